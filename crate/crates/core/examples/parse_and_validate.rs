//! Parse a model from text, check it, and print its canonical form.

use mpt_mdl::{parse_model, serialize_model, validate};

const TEXT: &str = "\
model pair-detection
params D g
bound g <= 1/2
tree old weight 1/2
cat yes: D + (1-D)*g
cat no: (1-D)*(1-g)
tree new weight 1/2
cat yes: g
cat no: (1-g)
";

fn main() -> mpt_mdl::Result<()> {
    let model = parse_model(TEXT)?;
    let report = validate(&model);
    println!(
        "{}: S = {}, {} categories, valid = {}, Omega fills {:.3} of the unit square",
        model.name(),
        model.free_count(),
        model.category_count(),
        report.passed,
        report.omega_volume
    );
    let probs = model.category_probabilities(&[0.6, 0.2])?;
    println!("p at (D, g) = (0.6, 0.2): {probs:?}");
    print!("{}", serialize_model(&model));

    match parse_model("cat hit: p\ncat miss: (1-p\n") {
        Err(e) => println!("malformed input: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
