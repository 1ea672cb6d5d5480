#![allow(dead_code)]

use mpt_mdl::MptModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A uniform point of Omega by rejection from the effective bounding box.
pub fn random_point(model: &MptModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let upper = model.space().effective_upper_bounds();
    loop {
        let theta: Vec<f64> = upper
            .iter()
            .map(|u| rng.random_range(0.001..0.999) * u)
            .collect();
        if model.space().contains(&theta) {
            return theta;
        }
    }
}

fn binomial_ll(k: u64, n: u64, p: f64) -> f64 {
    let mut ll = 0.0;
    if k > 0 {
        ll += k as f64 * p.ln();
    }
    if n > k {
        ll += (n - k) as f64 * (1.0 - p).ln();
    }
    ll
}

/// Maximum log-likelihood of independent binomial rates under
/// `rate[0] <= rate[1] <= ... <= bound`, found by trying every split of the
/// chain into blocks of equal value.
pub fn chain_oracle(successes: &[u64], trials: &[u64], bound: f64) -> f64 {
    let k = successes.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..1 << (k - 1) {
        let mut values = Vec::with_capacity(k);
        let mut start = 0;
        for i in 0..k {
            let cut = i == k - 1 || mask & (1 << i) != 0;
            if cut {
                let s: u64 = successes[start..=i].iter().sum();
                let n: u64 = trials[start..=i].iter().sum();
                let v = if n == 0 { f64::NAN } else { (s as f64 / n as f64).min(bound) };
                values.extend(std::iter::repeat_n(v, i + 1 - start));
                start = i + 1;
            }
        }
        // blocks without data copy their left neighbour, which is always feasible
        let mut carry = 0.0;
        for v in values.iter_mut() {
            if v.is_nan() {
                *v = carry;
            }
            carry = *v;
        }
        if values.windows(2).any(|w| w[0] > w[1] + 1e-15) {
            continue;
        }
        let ll: f64 = (0..k).map(|i| binomial_ll(successes[i], trials[i], values[i])).sum();
        best = best.max(ll);
    }
    best
}

/// WADDprob counts are (consistent, inconsistent) per type; type 2 counts
/// the consistent response as the error. Returns the chain oracle in the
/// order e1 <= e3 <= e2.
pub fn waddprob_oracle(counts: &[u64]) -> f64 {
    let e1 = (counts[1], counts[0] + counts[1]);
    let e2 = (counts[2], counts[2] + counts[3]);
    let e3 = (counts[5], counts[4] + counts[5]);
    chain_oracle(&[e1.0, e3.0, e2.0], &[e1.1, e3.1, e2.1], 0.5)
}

/// Coarse grid over Omega followed by compass search from the best grid
/// points and from `random_starts` uniform interior points. Faces where a
/// parameter drops out of the likelihood trap single starts, hence the
/// random ones.
pub fn grid_oracle(model: &MptModel, counts: &[u64], per_dim: usize, random_starts: usize) -> (f64, Vec<f64>) {
    let s = model.free_count();
    let upper = model.space().effective_upper_bounds();
    let total = per_dim.pow(s as u32);
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let theta: Vec<f64> = (0..s)
            .map(|d| {
                let i = rem % per_dim;
                rem /= per_dim;
                upper[d] * i as f64 / (per_dim - 1) as f64
            })
            .collect();
        if !model.space().contains(&theta) {
            continue;
        }
        starts.push((model.log_likelihood(&theta, counts), theta));
    }
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    starts.truncate(4);
    let mut r = rng(counts.iter().fold(17, |h, &c| h.wrapping_mul(31).wrapping_add(c)));
    for _ in 0..random_starts {
        starts.push((0.0, random_point(model, &mut r)));
    }
    starts
        .into_iter()
        .map(|(_, t)| compass(model, counts, t, &upper))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
}

fn compass(model: &MptModel, counts: &[u64], mut theta: Vec<f64>, upper: &[f64]) -> (f64, Vec<f64>) {
    let s = theta.len();
    let mut ll = model.log_likelihood(&theta, counts);
    let mut step = 0.1;
    // coordinate and pairwise-diagonal directions, so ridges can be followed
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..s {
        let mut d = vec![0.0; s];
        d[i] = 1.0;
        dirs.push(d);
        for j in i + 1..s {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; s];
                d[i] = 1.0;
                d[j] = sign;
                dirs.push(d);
            }
        }
    }
    while step > 1e-11 {
        let mut improved = false;
        for d in &dirs {
            for sign in [1.0, -1.0] {
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(d)
                    .zip(upper)
                    .map(|((t, di), u)| (t + sign * step * di).clamp(0.0, *u))
                    .collect();
                if !model.space().contains(&cand) {
                    continue;
                }
                let v = model.log_likelihood(&cand, counts);
                if v > ll {
                    ll = v;
                    theta = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (ll, theta)
}
