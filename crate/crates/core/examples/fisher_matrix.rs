//! Fisher information of sample size one for the source-monitoring model.

use mpt_mdl::{fisher_information, zoo};

fn main() -> mpt_mdl::Result<()> {
    let model = zoo::load("sm-5b")?;
    let theta = [0.6, 0.5, 0.4, 0.5, 0.3];
    let info = fisher_information(&model, &theta)?;
    println!("parameters {:?}", model.space().names());
    for row in info.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:8.4}")).collect();
        println!("[{}]", cells.join(" "));
    }
    println!("det = {:.6e}, sqrt(det) = {:.6e}", info.determinant(), info.sqrt_det()?);
    Ok(())
}
