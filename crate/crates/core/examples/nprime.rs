//! Lower-bound N' for source monitoring when only 5% of the items are new.

use mpt_mdl::reports::n_prime_report;
use mpt_mdl::zoo::{self, Preset};

fn main() -> mpt_mdl::Result<()> {
    let models = ["sm-5b", "sm-4"]
        .iter()
        .map(|id| zoo::get(id)?.model_with(Preset::Percent(5)))
        .collect::<mpt_mdl::Result<Vec<_>>>()?;
    let r = n_prime_report(&models, 1_000_000, 1)?;
    for (name, li) in r.models.iter().zip(&r.log_integrals) {
        println!("{name:<6} ln integral = {:.4} ± {:.4}", li.value, li.std_error);
    }
    println!(
        "N' = {:.0} ± {:.0}; FIA ranks these models as NML does from N = {}",
        r.result.lower_bound, r.result.lower_bound_se, r.minimum_integer_n
    );
    Ok(())
}
