//! Multinomial processing tree models.
//!
//! A model is a list of trees. Each tree receives a fixed share (`weight`) of
//! the observations and splits them over its categories. A category's
//! probability is a sum of branch products
//! `c * prod_s theta_s^a_s * (1 - theta_s)^b_s`.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Exact non-negative rational used for tree weights, bounds and coefficients.
pub type Rational = Ratio<u64>;

/// Interior points are clipped to `[EPSILON, 1 - EPSILON]` wherever a
/// computation needs strictly positive probabilities.
pub const EPSILON: f64 = 1e-9;

pub fn rational_to_f64(r: &Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Clip every coordinate into the open unit box.
pub fn clip_interior(theta: &[f64]) -> Vec<f64> {
    theta
        .iter()
        .map(|t| t.clamp(EPSILON, 1.0 - EPSILON))
        .collect()
}

/// One product term of a category probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchTerm {
    pub coefficient: Rational,
    /// parameter index -> (power of theta, power of 1 - theta)
    pub exponents: BTreeMap<usize, (u32, u32)>,
}

impl BranchTerm {
    pub fn new(coefficient: Rational, exponents: BTreeMap<usize, (u32, u32)>) -> Self {
        let exponents = exponents
            .into_iter()
            .filter(|(_, (a, b))| a + b > 0)
            .collect();
        BranchTerm {
            coefficient,
            exponents,
        }
    }

    pub fn constant(coefficient: Rational) -> Self {
        BranchTerm {
            coefficient,
            exponents: BTreeMap::new(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.exponents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub label: String,
    pub branches: Vec<BranchTerm>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    pub label: String,
    pub categories: Vec<Category>,
    /// Share of the N observations allocated to this tree.
    pub weight: Rational,
}

/// Free parameters, their upper bounds and the order constraints that carve
/// the region Omega out of the unit box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterSpace {
    names: Vec<String>,
    upper_bounds: BTreeMap<usize, Rational>,
    order_constraints: Vec<(usize, usize)>,
}

impl ParameterSpace {
    pub fn new(
        names: Vec<String>,
        upper_bounds: BTreeMap<usize, Rational>,
        order_constraints: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "parameter `{name}` declared twice"
                )));
            }
        }
        let s = names.len();
        for (&idx, bound) in &upper_bounds {
            if idx >= s {
                return Err(Error::InvalidModel(format!(
                    "bound on unknown parameter index {idx}"
                )));
            }
            if *bound.numer() == 0 || bound > &Rational::from_integer(1) {
                return Err(Error::InvalidModel(format!(
                    "bound {bound} on `{}` is outside (0, 1]",
                    names[idx]
                )));
            }
        }
        let mut order: Vec<(usize, usize)> = Vec::new();
        for &(i, j) in &order_constraints {
            if i >= s || j >= s {
                return Err(Error::InvalidModel(format!(
                    "order constraint ({i}, {j}) references an unknown parameter"
                )));
            }
            if i == j {
                return Err(Error::CyclicOrder {
                    name: names[i].clone(),
                });
            }
            if !order.contains(&(i, j)) {
                order.push((i, j));
            }
        }
        order.sort_unstable();
        check_acyclic(&names, &order)?;
        Ok(ParameterSpace {
            names,
            upper_bounds,
            order_constraints: order,
        })
    }

    /// Unconstrained space over the given names.
    pub fn unconstrained(names: Vec<String>) -> Result<Self> {
        Self::new(names, BTreeMap::new(), Vec::new())
    }

    pub fn free_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Bounds as declared; parameters without a declaration are bounded by 1.
    pub fn declared_upper_bounds(&self) -> &BTreeMap<usize, Rational> {
        &self.upper_bounds
    }

    pub fn order_constraints(&self) -> &[(usize, usize)] {
        &self.order_constraints
    }

    pub fn has_constraints(&self) -> bool {
        !self.order_constraints.is_empty() || !self.upper_bounds.is_empty()
    }

    /// Upper bounds after propagating declared bounds down the order
    /// constraints (`theta_i <= theta_j <= u` implies `theta_i <= u`).
    pub fn effective_upper_bounds(&self) -> Vec<f64> {
        let mut ub: Vec<Rational> = (0..self.free_count())
            .map(|i| {
                self.upper_bounds
                    .get(&i)
                    .copied()
                    .unwrap_or_else(|| Rational::from_integer(1))
            })
            .collect();
        // acyclic, so S rounds reach the fixpoint
        for _ in 0..self.free_count() {
            let mut changed = false;
            for &(i, j) in &self.order_constraints {
                if ub[j] < ub[i] {
                    ub[i] = ub[j];
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        ub.iter().map(rational_to_f64).collect()
    }

    /// Whether `theta` lies in Omega (box bounds and order constraints).
    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return false;
        }
        for (&i, bound) in &self.upper_bounds {
            if theta[i] > rational_to_f64(bound) {
                return false;
            }
        }
        self.order_constraints
            .iter()
            .all(|&(i, j)| theta[i] <= theta[j])
    }

    /// Fraction of the unit cube occupied by Omega, estimated from `probes`
    /// seeded uniform draws.
    pub fn volume_fraction(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta = vec![0.0; self.free_count()];
        let mut hits = 0usize;
        for _ in 0..probes {
            for t in theta.iter_mut() {
                *t = rng.random::<f64>();
            }
            if self.contains(&theta) {
                hits += 1;
            }
        }
        hits as f64 / probes as f64
    }
}

fn check_acyclic(names: &[String], order: &[(usize, usize)]) -> Result<()> {
    let s = names.len();
    let mut indegree = vec![0usize; s];
    for &(_, j) in order {
        indegree[j] += 1;
    }
    let mut ready: Vec<usize> = (0..s).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(i) = ready.pop() {
        visited += 1;
        for &(a, b) in order {
            if a == i {
                indegree[b] -= 1;
                if indegree[b] == 0 {
                    ready.push(b);
                }
            }
        }
    }
    if visited == s {
        Ok(())
    } else {
        let culprit = (0..s).find(|&i| indegree[i] > 0).unwrap_or(0);
        Err(Error::CyclicOrder {
            name: names[culprit].clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Compiled {
    /// first global category index of each tree, plus a final sentinel
    tree_start: Vec<usize>,
    weights: Vec<f64>,
    branches: Vec<FlatBranch>,
}

#[derive(Debug, Clone, PartialEq)]
struct FlatBranch {
    category: usize,
    coefficient: f64,
    factors: Vec<(usize, i32, i32)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MptModel {
    name: String,
    trees: Vec<Tree>,
    space: ParameterSpace,
    compiled: Compiled,
}

impl MptModel {
    pub fn new(name: impl Into<String>, trees: Vec<Tree>, space: ParameterSpace) -> Result<Self> {
        let name = name.into();
        if trees.is_empty() {
            return Err(Error::InvalidModel("model has no trees".into()));
        }
        let s = space.free_count();
        let mut used = vec![false; s];
        let mut tree_labels = BTreeSet::new();
        let mut weight_sum = Rational::from_integer(0);
        for tree in &trees {
            if !tree_labels.insert(tree.label.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "tree `{}` declared twice",
                    tree.label
                )));
            }
            if tree.categories.len() < 2 {
                return Err(Error::InvalidModel(format!(
                    "tree `{}` needs at least two categories",
                    tree.label
                )));
            }
            if *tree.weight.numer() == 0 {
                return Err(Error::InvalidModel(format!(
                    "tree `{}` has zero weight",
                    tree.label
                )));
            }
            weight_sum += tree.weight;
            let mut cat_labels = BTreeSet::new();
            for cat in &tree.categories {
                if !cat_labels.insert(cat.label.as_str()) {
                    return Err(Error::InvalidModel(format!(
                        "category `{}` appears twice in tree `{}`",
                        cat.label, tree.label
                    )));
                }
                if cat.branches.is_empty() {
                    return Err(Error::InvalidModel(format!(
                        "category `{}/{}` has no branches",
                        tree.label, cat.label
                    )));
                }
                for branch in &cat.branches {
                    if branch.is_constant() && cat.branches.len() > 1 {
                        return Err(Error::InvalidModel(format!(
                            "category `{}/{}` mixes a constant branch with other branches",
                            tree.label, cat.label
                        )));
                    }
                    if *branch.coefficient.numer() == 0 {
                        return Err(Error::InvalidModel(format!(
                            "category `{}/{}` has a zero coefficient",
                            tree.label, cat.label
                        )));
                    }
                    for &p in branch.exponents.keys() {
                        if p >= s {
                            return Err(Error::InvalidModel(format!(
                                "category `{}/{}` references parameter index {p}, but S = {s}",
                                tree.label, cat.label
                            )));
                        }
                        used[p] = true;
                    }
                }
            }
        }
        if weight_sum != Rational::from_integer(1) {
            return Err(Error::WeightSum {
                sum: weight_sum.to_string(),
            });
        }
        if let Some(unused) = used.iter().position(|u| !u) {
            return Err(Error::InvalidModel(format!(
                "parameter `{}` does not appear in any branch",
                space.names()[unused]
            )));
        }
        let compiled = compile(&trees);
        Ok(MptModel {
            name,
            trees,
            space,
            compiled,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    /// Number of free parameters S (after equality constraints).
    pub fn free_count(&self) -> usize {
        self.space.free_count()
    }

    pub fn category_count(&self) -> usize {
        *self.compiled.tree_start.last().unwrap()
    }

    /// Global index range of the categories of tree `t`.
    pub fn tree_range(&self, t: usize) -> std::ops::Range<usize> {
        self.compiled.tree_start[t]..self.compiled.tree_start[t + 1]
    }

    pub fn weights(&self) -> Vec<Rational> {
        self.trees.iter().map(|t| t.weight).collect()
    }

    pub fn weights_f64(&self) -> &[f64] {
        &self.compiled.weights
    }

    /// Same model with different tree weights.
    pub fn with_weights(&self, weights: &[Rational]) -> Result<Self> {
        if weights.len() != self.trees.len() {
            return Err(Error::InvalidArgument(format!(
                "model `{}` has {} trees but {} weights were given",
                self.name,
                self.trees.len(),
                weights.len()
            )));
        }
        let trees = self
            .trees
            .iter()
            .zip(weights)
            .map(|(t, w)| Tree {
                weight: *w,
                ..t.clone()
            })
            .collect();
        MptModel::new(self.name.clone(), trees, self.space.clone())
    }

    pub fn with_name(&self, name: impl Into<String>) -> Self {
        MptModel {
            name: name.into(),
            ..self.clone()
        }
    }

    fn check_dim(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.free_count() {
            return Err(Error::DimensionMismatch {
                expected: self.free_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    /// Per-tree category probabilities at `theta`. Order constraints are not
    /// required; the function is defined on the whole unit box.
    pub fn category_probabilities(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(theta)?;
        let mut flat = vec![0.0; self.category_count()];
        self.eval_into(theta, &mut flat, None);
        Ok((0..self.trees.len())
            .map(|t| flat[self.tree_range(t)].to_vec())
            .collect())
    }

    /// Jacobian of the category probabilities: one row per category (trees
    /// concatenated in order), one column per free parameter.
    pub fn gradient(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(theta)?;
        let theta = clip_interior(theta);
        let s = self.free_count();
        let mut probs = vec![0.0; self.category_count()];
        let mut grad = vec![0.0; self.category_count() * s];
        self.eval_into(&theta, &mut probs, Some(&mut grad));
        Ok(grad.chunks(s).map(|row| row.to_vec()).collect())
    }

    /// Flat evaluation used by the hot loops: `probs[j]` for every global
    /// category and, optionally, `grad[j * S + s]`. Inputs are not checked.
    pub(crate) fn eval_into(&self, theta: &[f64], probs: &mut [f64], grad: Option<&mut [f64]>) {
        let s_count = theta.len();
        probs.iter_mut().for_each(|p| *p = 0.0);
        match grad {
            None => {
                for br in &self.compiled.branches {
                    let mut v = br.coefficient;
                    for &(s, a, b) in &br.factors {
                        v *= factor(theta[s], a, b);
                    }
                    probs[br.category] += v;
                }
            }
            Some(grad) => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let mut vals = [0.0f64; 16];
                let mut prefix = [0.0f64; 17];
                for br in &self.compiled.branches {
                    let m = br.factors.len();
                    if m > 16 {
                        // rare wide branch: fall back to quadratic loop
                        let vals: Vec<f64> = br
                            .factors
                            .iter()
                            .map(|&(s, a, b)| factor(theta[s], a, b))
                            .collect();
                        let total: f64 = br.coefficient * vals.iter().product::<f64>();
                        probs[br.category] += total;
                        for (k, &(s, a, b)) in br.factors.iter().enumerate() {
                            let rest: f64 = vals
                                .iter()
                                .enumerate()
                                .filter(|(l, _)| *l != k)
                                .map(|(_, v)| v)
                                .product();
                            grad[br.category * s_count + s] +=
                                br.coefficient * rest * factor_derivative(theta[s], a, b);
                        }
                        continue;
                    }
                    prefix[0] = br.coefficient;
                    for (k, &(s, a, b)) in br.factors.iter().enumerate() {
                        vals[k] = factor(theta[s], a, b);
                        prefix[k + 1] = prefix[k] * vals[k];
                    }
                    probs[br.category] += prefix[m];
                    let mut suffix = 1.0;
                    for k in (0..m).rev() {
                        let (s, a, b) = br.factors[k];
                        grad[br.category * s_count + s] +=
                            prefix[k] * suffix * factor_derivative(theta[s], a, b);
                        suffix *= vals[k];
                    }
                }
            }
        }
    }

    /// Log-likelihood `sum_j n_j ln p_j(theta)` of per-category counts
    /// (global category order). Zero counts contribute nothing.
    pub fn log_likelihood(&self, theta: &[f64], counts: &[u64]) -> f64 {
        let mut probs = vec![0.0; self.category_count()];
        self.eval_into(theta, &mut probs, None);
        log_likelihood_from_probs(&probs, counts)
    }

    pub(crate) fn branches_flat(&self) -> impl Iterator<Item = (usize, f64, &[(usize, i32, i32)])> {
        self.compiled
            .branches
            .iter()
            .map(|b| (b.category, b.coefficient, b.factors.as_slice()))
    }

    /// Tree label and category label for a global category index.
    pub fn category_label(&self, global: usize) -> (&str, &str) {
        let t = self
            .compiled
            .tree_start
            .windows(2)
            .position(|w| global >= w[0] && global < w[1])
            .expect("category index out of range");
        let tree = &self.trees[t];
        (
            &tree.label,
            &tree.categories[global - self.compiled.tree_start[t]].label,
        )
    }
}

pub(crate) fn log_likelihood_from_probs(probs: &[f64], counts: &[u64]) -> f64 {
    probs
        .iter()
        .zip(counts)
        .filter(|(_, &n)| n > 0)
        .map(|(&p, &n)| n as f64 * p.ln())
        .sum()
}

#[inline]
fn factor(t: f64, a: i32, b: i32) -> f64 {
    t.powi(a) * (1.0 - t).powi(b)
}

#[inline]
fn factor_derivative(t: f64, a: i32, b: i32) -> f64 {
    let mut d = 0.0;
    if a > 0 {
        d += a as f64 * t.powi(a - 1) * (1.0 - t).powi(b);
    }
    if b > 0 {
        d -= b as f64 * t.powi(a) * (1.0 - t).powi(b - 1);
    }
    d
}

fn compile(trees: &[Tree]) -> Compiled {
    let mut tree_start = vec![0];
    let mut branches = Vec::new();
    let mut global = 0;
    for tree in trees {
        for cat in &tree.categories {
            for br in &cat.branches {
                branches.push(FlatBranch {
                    category: global,
                    coefficient: rational_to_f64(&br.coefficient),
                    factors: br
                        .exponents
                        .iter()
                        .map(|(&s, &(a, b))| (s, a as i32, b as i32))
                        .collect(),
                });
            }
            global += 1;
        }
        tree_start.push(global);
    }
    Compiled {
        tree_start,
        weights: trees.iter().map(|t| rational_to_f64(&t.weight)).collect(),
        branches,
    }
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub points_checked: usize,
    /// Fraction of the unit cube inside Omega (rejection estimate).
    pub omega_volume: f64,
    pub issues: Vec<String>,
}

const NORMALIZATION_TOL: f64 = 1e-12;

/// Check the model invariants at 100 quasi-random interior points plus the
/// box corners (for S <= 10): per-tree normalization and probabilities in
/// [0, 1]. Omega must have positive volume over 10^4 probes.
pub fn validate(model: &MptModel) -> ValidationReport {
    let s = model.free_count();
    let mut points: Vec<Vec<f64>> = (1..=100).map(|i| halton_point(i, s)).collect();
    if s <= 10 {
        for mask in 0..(1usize << s) {
            points.push((0..s).map(|k| ((mask >> k) & 1) as f64).collect());
        }
    }
    let mut issues = Vec::new();
    let mut probs = vec![0.0; model.category_count()];
    for theta in &points {
        model.eval_into(theta, &mut probs, None);
        for (t, tree) in model.trees().iter().enumerate() {
            let range = model.tree_range(t);
            let sum: f64 = probs[range.clone()].iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                issues.push(format!(
                    "tree `{}` probabilities sum to {sum} at theta = {theta:?}",
                    tree.label
                ));
            }
            for (k, &p) in probs[range].iter().enumerate() {
                if !(-NORMALIZATION_TOL..=1.0 + NORMALIZATION_TOL).contains(&p) {
                    issues.push(format!(
                        "category `{}/{}` has probability {p} at theta = {theta:?}",
                        tree.label, tree.categories[k].label
                    ));
                }
            }
        }
        if issues.len() > 20 {
            break;
        }
    }
    let omega_volume = model.space().volume_fraction(10_000, 0x5eed);
    if omega_volume == 0.0 {
        issues.push("constrained region has no accepted probe out of 10^4".into());
    }
    ValidationReport {
        passed: issues.is_empty(),
        points_checked: points.len(),
        omega_volume,
        issues,
    }
}

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// `index`-th point of the Halton sequence in `dim` dimensions.
pub(crate) fn halton_point(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let mut f = 1.0;
            let mut r = 0.0;
            let mut i = index;
            while i > 0 {
                f /= base as f64;
                r += f * (i % base) as f64;
                i /= base;
            }
            r
        })
        .collect()
}
