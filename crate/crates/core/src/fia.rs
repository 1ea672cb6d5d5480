//! Fisher information approximation: the Monte Carlo estimate of
//! `ln ∫_Ω sqrt(det I(θ)) dθ`, the complexity
//! `C_FIA(N) = S/2 · ln(N / 2π) + ln ∫_Ω sqrt(det I(θ)) dθ`,
//! and the sample size `N'` above which the FIA rank order of two models
//! with different S can no longer change.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::FisherWorkspace;
use crate::model::MptModel;
use crate::numeric::NeumaierSum;

/// Number of proposals per independently seeded block. Sample `i` is drawn
/// from stream `i / CHUNK` of the seed, so results do not depend on the
/// number of workers.
pub const CHUNK: u64 = 4096;

pub const DEFAULT_SAMPLES: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    LogIntegral,
    CFia,
    CNml,
}

/// A log-scale quantity with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityEstimate {
    pub kind: EstimateKind,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

impl ComplexityEstimate {
    pub fn exact(kind: EstimateKind, value: f64) -> Self {
        ComplexityEstimate {
            kind,
            value,
            std_error: 0.0,
            n_samples: 0,
            seed: 0,
        }
    }
}

/// Details of one integration run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegrationReport {
    pub estimate: ComplexityEstimate,
    /// Proposals that fell inside Omega.
    pub accepted: u64,
    /// Proposals whose integrand could not be evaluated (counted as zero).
    pub failures: u64,
    /// Volume of the proposal box (product of effective upper bounds).
    pub box_volume: f64,
}

impl IntegrationReport {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.estimate.n_samples as f64
    }

    /// Estimated fraction of the unit cube occupied by Omega.
    pub fn omega_volume(&self) -> f64 {
        self.acceptance_rate() * self.box_volume
    }
}

#[derive(Clone, Copy)]
struct ChunkAcc {
    sum: NeumaierSum,
    sum_sq: NeumaierSum,
    accepted: u64,
    failures: u64,
}

/// Monte Carlo estimate of `ln ∫_Ω sqrt(det I(θ)) dθ` from `n_samples`
/// uniform proposals on the box `Π [0, u_s]` (u_s: effective upper bounds),
/// with Omega handled by rejection.
pub fn integrate_sqrt_det(model: &MptModel, n_samples: u64, seed: u64) -> Result<ComplexityEstimate> {
    integrate_sqrt_det_report(model, n_samples, seed).map(|r| r.estimate)
}

pub fn integrate_sqrt_det_report(
    model: &MptModel,
    n_samples: u64,
    seed: u64,
) -> Result<IntegrationReport> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 Monte Carlo samples, got {n_samples}"
        )));
    }
    let s = model.free_count();
    let upper = model.space().effective_upper_bounds();
    let box_volume: f64 = upper.iter().product();
    let n_chunks = n_samples.div_ceil(CHUNK);

    let run_chunk = |chunk: u64| -> ChunkAcc {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let start = chunk * CHUNK;
        let end = (start + CHUNK).min(n_samples);
        let mut ws = FisherWorkspace::new(model);
        let mut theta = vec![0.0; s];
        let mut acc = ChunkAcc {
            sum: NeumaierSum::default(),
            sum_sq: NeumaierSum::default(),
            accepted: 0,
            failures: 0,
        };
        for _ in start..end {
            for (t, u) in theta.iter_mut().zip(&upper) {
                *t = rng.random::<f64>() * u;
            }
            if !model.space().contains(&theta) {
                continue;
            }
            acc.accepted += 1;
            match ws.sqrt_det(model, &theta) {
                Ok(v) => {
                    acc.sum.add(v);
                    acc.sum_sq.add(v * v);
                }
                Err(_) => acc.failures += 1,
            }
        }
        acc
    };

    let chunks: Vec<ChunkAcc> = (0..n_chunks).into_par_iter().map(run_chunk).collect();

    let mut sum = NeumaierSum::default();
    let mut sum_sq = NeumaierSum::default();
    let mut accepted = 0;
    let mut failures = 0;
    for acc in &chunks {
        sum.merge(&acc.sum);
        sum_sq.merge(&acc.sum_sq);
        accepted += acc.accepted;
        failures += acc.failures;
    }
    if accepted == 0 {
        return Err(Error::EmptyRegion {
            proposals: n_samples,
        });
    }
    if failures * 1000 > n_samples {
        return Err(Error::NumericalFailureRate {
            failures,
            samples: n_samples,
        });
    }
    let n = n_samples as f64;
    let mean = sum.value() / n;
    if mean <= 0.0 {
        return Err(Error::NumericalFailureRate {
            failures,
            samples: n_samples,
        });
    }
    let var = (sum_sq.value() / n - mean * mean).max(0.0);
    let std_error = (var / n).sqrt() / mean;
    Ok(IntegrationReport {
        estimate: ComplexityEstimate {
            kind: EstimateKind::LogIntegral,
            value: mean.ln() + box_volume.ln(),
            std_error,
            n_samples,
            seed,
        },
        accepted,
        failures,
        box_volume,
    })
}

/// `C_FIA(N) = S/2 · ln(N / 2π) + ln ∫ sqrt(det I)`. `n` may be any positive
/// real.
pub fn c_fia(log_integral: &ComplexityEstimate, s: usize, n: f64) -> Result<ComplexityEstimate> {
    if log_integral.kind != EstimateKind::LogIntegral {
        return Err(Error::InvalidArgument(format!(
            "C_FIA needs a log-integral estimate, got {:?}",
            log_integral.kind
        )));
    }
    if !(n > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "sample size must be positive, got {n}"
        )));
    }
    Ok(ComplexityEstimate {
        kind: EstimateKind::CFia,
        value: s as f64 / 2.0 * (n / (2.0 * PI)).ln() + log_integral.value,
        ..*log_integral
    })
}

/// One C_FIA value per sample size, all sharing the same integral.
pub fn fia_curve(
    log_integral: &ComplexityEstimate,
    s: usize,
    ns: impl IntoIterator<Item = u64>,
) -> Result<Vec<(u64, ComplexityEstimate)>> {
    ns.into_iter()
        .map(|n| c_fia(log_integral, s, n as f64).map(|c| (n, c)))
        .collect()
}

/// Free-parameter count and log-integral of one model in an N' comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiaTerms {
    pub free_count: usize,
    pub log_integral: ComplexityEstimate,
}

impl FiaTerms {
    pub fn new(free_count: usize, log_integral: ComplexityEstimate) -> Self {
        FiaTerms {
            free_count,
            log_integral,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NPrime {
    pub value: f64,
    pub std_error: f64,
}

impl NPrime {
    /// Smallest integer sample size strictly above N'.
    pub fn minimum_integer_n(&self) -> u64 {
        self.value.ceil() as u64
    }
}

/// Sample size at which the C_FIA curves of two models intersect; zero when
/// both have the same number of free parameters. The standard error follows
/// from the delta method:
/// `SE(N')/N' = 2/|S_i - S_j| · sqrt(SE_i^2 + SE_j^2)`.
pub fn n_prime_pair(i: &FiaTerms, j: &FiaTerms) -> NPrime {
    if i.free_count == j.free_count {
        return NPrime {
            value: 0.0,
            std_error: 0.0,
        };
    }
    let ds = i.free_count as f64 - j.free_count as f64;
    let exponent = 2.0 / ds * (j.log_integral.value - i.log_integral.value);
    let value = 2.0 * PI * exponent.exp();
    let rel = 2.0 / ds.abs() * i.log_integral.std_error.hypot(j.log_integral.std_error);
    NPrime {
        value,
        std_error: value * rel,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NPrimeResult {
    pub pairwise: Vec<Vec<f64>>,
    pub per_pair_se: Vec<Vec<f64>>,
    pub lower_bound: f64,
    pub lower_bound_se: f64,
    /// Pair attaining the lower bound, if any pair has different S.
    pub argmax: Option<(usize, usize)>,
}

impl NPrimeResult {
    pub fn minimum_integer_n(&self) -> u64 {
        self.lower_bound.ceil() as u64
    }
}

/// Lower-bound N' of a model set: the largest pairwise intersection.
pub fn n_prime_set(models: &[FiaTerms]) -> Result<NPrimeResult> {
    if models.len() < 2 {
        return Err(Error::InvalidArgument(
            "N' needs at least two models".into(),
        ));
    }
    let m = models.len();
    let mut pairwise = vec![vec![0.0; m]; m];
    let mut per_pair_se = vec![vec![0.0; m]; m];
    let mut lower_bound = 0.0;
    let mut lower_bound_se = 0.0;
    let mut argmax = None;
    for a in 0..m {
        for b in a + 1..m {
            let np = n_prime_pair(&models[a], &models[b]);
            pairwise[a][b] = np.value;
            pairwise[b][a] = np.value;
            per_pair_se[a][b] = np.std_error;
            per_pair_se[b][a] = np.std_error;
            if models[a].free_count != models[b].free_count
                && (argmax.is_none() || np.value > lower_bound)
            {
                lower_bound = np.value;
                lower_bound_se = np.std_error;
                argmax = Some((a, b));
            }
        }
    }
    Ok(NPrimeResult {
        pairwise,
        per_pair_se,
        lower_bound,
        lower_bound_se,
        argmax,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_model;

    fn log_integral(value: f64, se: f64) -> ComplexityEstimate {
        ComplexityEstimate {
            kind: EstimateKind::LogIntegral,
            value,
            std_error: se,
            n_samples: 1000,
            seed: 0,
        }
    }

    #[test]
    fn c_fia_first_term_vanishes_at_two_pi() {
        let li = log_integral(PI.ln(), 0.01);
        let c = c_fia(&li, 1, 2.0 * PI).unwrap();
        assert!((c.value - PI.ln()).abs() < 1e-15);
        assert_eq!(c.kind, EstimateKind::CFia);
        assert_eq!(c.std_error, 0.01);
    }

    #[test]
    fn c_fia_without_parameters_is_flat() {
        let li = log_integral(0.3, 0.0);
        for n in [1.0, 10.0, 1e6] {
            assert_eq!(c_fia(&li, 0, n).unwrap().value, 0.3);
        }
    }

    #[test]
    fn c_fia_rejects_bad_input() {
        let li = log_integral(0.3, 0.0);
        assert!(c_fia(&li, 1, 0.0).is_err());
        let wrong = ComplexityEstimate::exact(EstimateKind::CNml, 1.0);
        assert!(c_fia(&wrong, 1, 10.0).is_err());
    }

    #[test]
    fn n_prime_closed_form() {
        let a = FiaTerms::new(1, log_integral(PI.ln(), 0.0));
        let b = FiaTerms::new(2, log_integral((PI * PI / 2.0).ln(), 0.0));
        // S/2 ln(N/2pi) + L equal for both: N = 2pi (2/pi)^2
        let expected = 8.0 / PI;
        assert!((n_prime_pair(&a, &b).value - expected).abs() < 1e-12);
        assert!((n_prime_pair(&b, &a).value - expected).abs() < 1e-12);
    }

    #[test]
    fn n_prime_equal_s_is_zero() {
        let a = FiaTerms::new(2, log_integral(0.1, 0.01));
        let b = FiaTerms::new(2, log_integral(0.7, 0.01));
        assert_eq!(n_prime_pair(&a, &b).value, 0.0);
        let set = n_prime_set(&[a, b, a]).unwrap();
        assert_eq!(set.lower_bound, 0.0);
        assert!(set.argmax.is_none());
        assert!(set.pairwise.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn n_prime_se_by_delta_method() {
        let a = FiaTerms::new(3, log_integral(0.0, 0.03));
        let b = FiaTerms::new(1, log_integral(1.0, 0.04));
        let np = n_prime_pair(&a, &b);
        assert!((np.std_error / np.value - 0.05).abs() < 1e-12);
    }

    #[test]
    fn too_few_samples() {
        let m = parse_model("cat a: p\ncat b: (1-p)").unwrap();
        assert!(matches!(
            integrate_sqrt_det(&m, 999, 1),
            Err(Error::InvalidArgument(_))
        ));
    }
}
