//! Exact NML complexity of nested source-monitoring models, and an NML
//! rank-stability audit of the decision strategies.

use mpt_mdl::nml::{c_nml, nml_stability_audit, outcome_count, Allocation, NmlOptions};
use mpt_mdl::zoo;

fn main() -> mpt_mdl::Result<()> {
    for id in ["sm-4", "sm-5b"] {
        let model = zoo::load(id)?;
        let alloc = Allocation::for_model(&model, 12)?;
        let c = c_nml(&model, &alloc)?;
        println!(
            "{id:<6} N = 12 {:?}: C_NML = {:.5} over {} outcomes",
            alloc.per_tree,
            c.value,
            outcome_count(&model, &alloc).unwrap_or_default()
        );
    }

    let models = [zoo::load("ttb")?, zoo::load("waddprob")?];
    let audit = nml_stability_audit(&models, (3..=30).step_by(3), &NmlOptions::default())?;
    for row in &audit.rows {
        println!("N = {:>2}: {:?}", row.n, row.values);
    }
    println!("stable: {}, first inversion: {:?}", audit.stable, audit.first_inversion);
    Ok(())
}
