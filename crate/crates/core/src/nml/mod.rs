//! Exact normalized maximum likelihood complexity for discrete data:
//! `C_NML(N) = ln Σ_x Π_t multinomial(x_t) · exp(LML(x))` over every
//! frequency table `x` of the allocation.

mod mle;
mod outcomes;
mod pava;

pub use mle::{constrained_mle, grid_refine, MleOptions, MleResult, MleSolver, Solver};
pub use outcomes::{
    enumerate_outcomes, outcome_count, Allocation, OutcomeSpace, OutcomeVector, DEFAULT_CAP,
};
pub use pava::pava_nondecreasing;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fia::{ComplexityEstimate, EstimateKind};
use crate::model::MptModel;
use crate::numeric::{ln_factorials, LogSumExp};

const OUTCOME_CHUNK: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmlOptions {
    pub cap: u64,
    pub mle: MleOptions,
}

impl Default for NmlOptions {
    fn default() -> Self {
        NmlOptions {
            cap: DEFAULT_CAP,
            mle: MleOptions::default(),
        }
    }
}

pub fn c_nml(model: &MptModel, alloc: &Allocation) -> Result<ComplexityEstimate> {
    c_nml_with(model, alloc, &NmlOptions::default())
}

pub fn c_nml_with(model: &MptModel, alloc: &Allocation, opts: &NmlOptions) -> Result<ComplexityEstimate> {
    let space = enumerate_outcomes(model, alloc, opts.cap)?;
    let solver = MleSolver::new(model, opts.mle);
    let ln_fact = ln_factorials(alloc.n as usize);
    // log multinomial coefficient of every per-tree table
    let tree_coef: Vec<Vec<f64>> = (0..model.trees().len())
        .map(|t| {
            space
                .tree_tables(t)
                .iter()
                .map(|table| {
                    let n: u64 = table.iter().sum();
                    ln_fact[n as usize] - table.iter().map(|&k| ln_fact[k as usize]).sum::<f64>()
                })
                .collect()
        })
        .collect();
    let n_chunks = space.len().div_ceil(OUTCOME_CHUNK);
    let partials: Vec<Result<LogSumExp>> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = LogSumExp::default();
            let mut counts = Vec::with_capacity(model.category_count());
            let start = chunk * OUTCOME_CHUNK;
            let end = (start + OUTCOME_CHUNK).min(space.len());
            for index in start..end {
                let digits = space.fill_flat(index, &mut counts);
                let mle = solver.solve(&counts)?;
                if !mle.converged {
                    return Err(Error::NonConvergence(format!(
                        "outcome {:?} ({:?} solver)",
                        counts, mle.solver
                    )));
                }
                let coef: f64 = digits
                    .iter()
                    .enumerate()
                    .map(|(t, &d)| tree_coef[t][d])
                    .sum();
                acc.add(coef + mle.log_lik);
            }
            Ok(acc)
        })
        .collect();
    let mut total = LogSumExp::default();
    for p in partials {
        total.merge(&p?);
    }
    Ok(ComplexityEstimate::exact(EstimateKind::CNml, total.value()))
}

/// C_NML at each sample size, allocating N by the model's tree weights.
pub fn nml_curve(
    model: &MptModel,
    ns: impl IntoIterator<Item = u64>,
    opts: &NmlOptions,
) -> Result<Vec<(u64, f64)>> {
    ns.into_iter()
        .map(|n| {
            let alloc = Allocation::for_model(model, n)?;
            c_nml_with(model, &alloc, opts).map(|c| (n, c.value))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub n: u64,
    pub values: Vec<f64>,
    /// Model names from least to most complex.
    pub order: Vec<String>,
    /// Two models within 1e-12 of each other; broken by list order.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub models: Vec<String>,
    pub rows: Vec<AuditRow>,
    pub stable: bool,
    /// Smallest N whose rank order differs from the first N's.
    pub first_inversion: Option<u64>,
}

/// Rank models by C_NML at each N and report whether the order ever changes.
pub fn nml_stability_audit(
    models: &[MptModel],
    ns: impl IntoIterator<Item = u64>,
    opts: &NmlOptions,
) -> Result<StabilityReport> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("audit needs at least one model".into()));
    }
    let names: Vec<String> = models.iter().map(|m| m.name().to_string()).collect();
    let mut rows = Vec::new();
    for n in ns {
        let values = models
            .iter()
            .map(|m| {
                let alloc = Allocation::for_model(m, n)?;
                c_nml_with(m, &alloc, opts).map(|c| c.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut idx: Vec<usize> = (0..models.len()).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let tie = idx
            .windows(2)
            .any(|w| (values[w[0]] - values[w[1]]).abs() <= 1e-12);
        rows.push(AuditRow {
            n,
            order: idx.iter().map(|&i| names[i].clone()).collect(),
            values,
            tie,
        });
    }
    let first_inversion = rows
        .iter()
        .skip(1)
        .find(|r| rows.first().is_some_and(|f| f.order != r.order))
        .map(|r| r.n);
    Ok(StabilityReport {
        models: names,
        stable: first_inversion.is_none(),
        first_inversion,
        rows,
    })
}
