//! FIA and exact NML curves for TTB and WADDprob at equal item proportions,
//! written as CSV for plotting.

use mpt_mdl::nml::NmlOptions;
use mpt_mdl::reports::{curves, CurveKind};
use mpt_mdl::zoo::{self, Preset};

fn main() -> mpt_mdl::Result<()> {
    let models = [
        zoo::get("ttb")?.model_with(Preset::Equal)?,
        zoo::get("waddprob")?.model_with(Preset::Equal)?,
    ];
    let ns: Vec<u64> = (3..=60).step_by(3).collect();
    let c = curves(&models, &ns, 1_000_000, 1, &NmlOptions::default())?;
    println!("model,N,kind,value");
    for p in &c.points {
        let kind = if p.kind == CurveKind::Fia { "fia" } else { "nml" };
        println!("{},{},{},{:.5}", p.model, p.n, kind, p.value);
    }
    if let Some(np) = c.n_prime {
        eprintln!("FIA curves cross at N' = {:.1} ± {:.1}", np.result.lower_bound, np.result.lower_bound_se);
    }
    Ok(())
}
