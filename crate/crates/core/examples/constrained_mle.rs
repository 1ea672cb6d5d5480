//! Order-constrained maximum likelihood for WADDprob: error rates that
//! violate e1 <= e3 <= e2 are pooled.

use mpt_mdl::nml::{MleOptions, MleSolver};
use mpt_mdl::zoo;

fn main() -> mpt_mdl::Result<()> {
    let model = zoo::load("waddprob")?;
    let solver = MleSolver::new(&model, MleOptions::default());
    println!("solver: {:?}", solver.solver());
    // per tree: (consistent, inconsistent); type 2 is oriented the other way
    for counts in [[6, 4, 1, 9, 8, 2], [9, 1, 8, 2, 7, 3], [2, 8, 2, 8, 2, 8]] {
        let fit = solver.solve(&counts)?;
        println!("{counts:?} -> e = {:.4?}, log L = {:.4}", fit.theta_hat, fit.log_lik);
    }
    Ok(())
}
