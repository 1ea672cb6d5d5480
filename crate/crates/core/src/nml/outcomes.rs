use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MptModel, Rational};

pub const DEFAULT_CAP: u64 = 100_000_000;

/// Number of observations given to each tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Allocation {
    pub n: u64,
    pub per_tree: Vec<u64>,
}

impl Allocation {
    pub fn new(per_tree: Vec<u64>) -> Self {
        Allocation {
            n: per_tree.iter().sum(),
            per_tree,
        }
    }

    /// Split `n` by `weights` using the largest-remainder rule; equal
    /// remainders go to the earlier tree.
    pub fn from_weights(weights: &[Rational], n: u64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidAllocation("no trees".into()));
        }
        let total: Rational = weights.iter().sum();
        if total != Rational::from_integer(1) {
            return Err(Error::InvalidAllocation(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let quotas: Vec<Rational> = weights.iter().map(|w| *w * n).collect();
        let mut per_tree: Vec<u64> = quotas.iter().map(|q| q.to_integer()).collect();
        let assigned: u64 = per_tree.iter().sum();
        let mut order: Vec<usize> = (0..weights.len()).collect();
        // stable sort keeps earlier trees first among equal remainders
        order.sort_by(|&a, &b| quotas[b].fract().cmp(&quotas[a].fract()));
        for &t in order.iter().take((n - assigned) as usize) {
            per_tree[t] += 1;
        }
        Ok(Allocation { n, per_tree })
    }

    pub fn for_model(model: &MptModel, n: u64) -> Result<Self> {
        Self::from_weights(&model.weights(), n)
    }

    fn check(&self, model: &MptModel) -> Result<()> {
        if self.per_tree.len() != model.trees().len() {
            return Err(Error::InvalidAllocation(format!(
                "{} tree counts for a model with {} trees",
                self.per_tree.len(),
                model.trees().len()
            )));
        }
        if self.per_tree.iter().sum::<u64>() != self.n {
            return Err(Error::InvalidAllocation(
                "tree counts do not add up to N".into(),
            ));
        }
        Ok(())
    }
}

/// One frequency table: counts per category, per tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutcomeVector {
    pub counts: Vec<Vec<u64>>,
}

impl OutcomeVector {
    /// Counts in global category order.
    pub fn flat(&self) -> Vec<u64> {
        self.counts.iter().flatten().copied().collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// All frequency tables of an allocation, indexable by outcome number.
#[derive(Debug, Clone)]
pub struct OutcomeSpace {
    per_tree: Vec<Vec<Vec<u64>>>,
    count: u64,
}

/// `C(n + k - 1, k - 1)` compositions of `n` into `k` ordered parts.
fn composition_count(n: u64, k: usize) -> Option<u128> {
    let mut c: u128 = 1;
    // C(n + k - 1, k - 1) computed incrementally, exact at every step
    for i in 1..k as u128 {
        c = c.checked_mul(n as u128 + i)? / i;
    }
    Some(c)
}

/// Exact size of the outcome space, or `None` when it exceeds `u128`.
pub fn outcome_count(model: &MptModel, alloc: &Allocation) -> Option<u128> {
    model
        .trees()
        .iter()
        .zip(&alloc.per_tree)
        .try_fold(1u128, |acc, (tree, &n)| {
            acc.checked_mul(composition_count(n, tree.categories.len())?)
        })
}

fn log10_outcome_count(model: &MptModel, alloc: &Allocation) -> f64 {
    let ln_choose = |n: u64, k: u64| -> f64 {
        (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
    };
    model
        .trees()
        .iter()
        .zip(&alloc.per_tree)
        .map(|(t, &n)| {
            let k = t.categories.len() as u64 - 1;
            ln_choose(n + k, k)
        })
        .sum::<f64>()
        / std::f64::consts::LN_10
}

fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut current = vec![0; k];
    fn rec(n: u64, pos: usize, current: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if pos == current.len() - 1 {
            current[pos] = n;
            out.push(current.clone());
            return;
        }
        for first in (0..=n).rev() {
            current[pos] = first;
            rec(n - first, pos + 1, current, out);
        }
    }
    rec(n, 0, &mut current, &mut out);
    out
}

/// Every frequency table of the allocation; refuses when the count exceeds
/// `cap`.
pub fn enumerate_outcomes(model: &MptModel, alloc: &Allocation, cap: u64) -> Result<OutcomeSpace> {
    alloc.check(model)?;
    let count = match outcome_count(model, alloc) {
        Some(c) if c <= cap as u128 => c as u64,
        Some(c) => {
            return Err(Error::EnumerationRefused {
                count: c.to_string(),
                cap,
            })
        }
        None => {
            return Err(Error::EnumerationRefused {
                count: format!("~1e{:.0}", log10_outcome_count(model, alloc)),
                cap,
            })
        }
    };
    let per_tree = model
        .trees()
        .iter()
        .zip(&alloc.per_tree)
        .map(|(t, &n)| compositions(n, t.categories.len()))
        .collect();
    Ok(OutcomeSpace { per_tree, count })
}

impl OutcomeSpace {
    pub fn len(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Outcome number `index`; the last tree varies fastest.
    pub fn get(&self, index: u64) -> OutcomeVector {
        let mut counts = vec![Vec::new(); self.per_tree.len()];
        self.fill(index, &mut counts);
        OutcomeVector { counts }
    }

    /// Flat per-category counts of outcome `index`, written into `out`.
    pub(crate) fn fill_flat(&self, index: u64, out: &mut Vec<u64>) -> Vec<usize> {
        let mut digits = vec![0usize; self.per_tree.len()];
        let mut rem = index;
        for t in (0..self.per_tree.len()).rev() {
            let base = self.per_tree[t].len() as u64;
            digits[t] = (rem % base) as usize;
            rem /= base;
        }
        out.clear();
        for (t, &d) in digits.iter().enumerate() {
            out.extend_from_slice(&self.per_tree[t][d]);
        }
        digits
    }

    fn fill(&self, index: u64, counts: &mut [Vec<u64>]) {
        let mut rem = index;
        for t in (0..self.per_tree.len()).rev() {
            let base = self.per_tree[t].len() as u64;
            counts[t] = self.per_tree[t][(rem % base) as usize].clone();
            rem /= base;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = OutcomeVector> + '_ {
        (0..self.count).map(move |i| self.get(i))
    }

    /// The per-tree tables, `tables(t)[d]` being the `d`-th composition.
    pub(crate) fn tree_tables(&self, t: usize) -> &[Vec<u64>] {
        &self.per_tree[t]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_model;

    #[test]
    fn bernoulli_outcomes() {
        let m = parse_model("cat a: p\ncat b: (1-p)").unwrap();
        let space = enumerate_outcomes(&m, &Allocation::new(vec![2]), DEFAULT_CAP).unwrap();
        let all: Vec<Vec<u64>> = space.iter().map(|o| o.flat()).collect();
        assert_eq!(all, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn composition_counts() {
        assert_eq!(composition_count(10, 2), Some(11));
        assert_eq!(composition_count(4, 3), Some(15));
        assert_eq!(composition_count(0, 5), Some(1));
        for n in 0..8 {
            for k in 1..5 {
                assert_eq!(compositions(n, k).len() as u128, composition_count(n, k).unwrap());
            }
        }
    }

    #[test]
    fn largest_remainder() {
        let w = [Rational::new(7, 20), Rational::new(7, 20), Rational::new(3, 10)];
        assert_eq!(Allocation::from_weights(&w, 10).unwrap().per_tree, vec![4, 3, 3]);
        let w = [Rational::new(1, 3); 3];
        assert_eq!(Allocation::from_weights(&w, 4).unwrap().per_tree, vec![2, 1, 1]);
        assert_eq!(Allocation::from_weights(&w, 30).unwrap().per_tree, vec![10, 10, 10]);
        assert!(Allocation::from_weights(&[Rational::new(1, 2)], 3).is_err());
    }

    #[test]
    fn refusal_reports_count() {
        let m = parse_model("cat a: p*q\ncat b: p*(1-q)\ncat c: (1-p)*(1-q)\ncat d: (1-p)*q").unwrap();
        let err = enumerate_outcomes(&m, &Allocation::new(vec![100]), 1000).unwrap_err();
        assert_eq!(
            err,
            Error::EnumerationRefused {
                count: "176851".into(),
                cap: 1000
            }
        );
    }
}
