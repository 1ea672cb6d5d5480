//! Monte Carlo estimate of ln ∫ sqrt(det I) for a single coin, whose exact
//! value is ln π.

use mpt_mdl::{c_fia, integrate_sqrt_det_report, zoo};

fn main() -> mpt_mdl::Result<()> {
    let model = zoo::load("bernoulli")?;
    let report = integrate_sqrt_det_report(&model, 1_000_000, 1)?;
    let li = report.estimate;
    println!("ln integral = {:.5} ± {:.5}  (exact {:.5})", li.value, li.std_error, std::f64::consts::PI.ln());
    println!("accepted {} of {} proposals", report.accepted, li.n_samples);
    for n in [10, 100, 1000] {
        let c = c_fia(&li, model.free_count(), n as f64)?;
        println!("C_FIA({n:>4}) = {:.4}", c.value);
    }
    Ok(())
}
