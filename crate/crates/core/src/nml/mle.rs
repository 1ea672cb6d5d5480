//! Maximum likelihood under bounds and order constraints.
//!
//! The solver is chosen once per model:
//! - every tree binary with categories `theta_s` / `1 - theta_s`: the model
//!   is a set of binomial rates, solved in closed form, by clipping at an
//!   upper bound, or by weighted PAVA along chains of order constraints;
//! - unconstrained general MPT structure: EM with random restarts;
//! - anything else, or EM that fails to converge: coarse grid plus
//!   coordinate-wise refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::pava::pava_nondecreasing;
use crate::error::{Error, Result};
use crate::model::{log_likelihood_from_probs, MptModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    ClosedForm,
    ClipToBound,
    Pava,
    Em,
    GridRefine,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MleResult {
    pub theta_hat: Vec<f64>,
    pub log_lik: f64,
    pub converged: bool,
    pub solver: Solver,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    pub em_restarts: usize,
    /// Stop when one iteration or sweep improves the log-likelihood by less.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            em_restarts: 10,
            tolerance: 1e-10,
            max_iterations: 100_000,
            seed: 0x6d6c65,
        }
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Rates {
        /// per tree: parameter and the index (0 or 1) of its theta-category
        trees: Vec<(usize, usize)>,
        chains: Vec<Vec<usize>>,
        solver: Solver,
    },
    Em,
    Grid,
}

/// Constrained maximum-likelihood solver prepared for one model.
#[derive(Debug, Clone)]
pub struct MleSolver<'a> {
    model: &'a MptModel,
    plan: Plan,
    options: MleOptions,
    upper: Vec<f64>,
}

pub fn constrained_mle(model: &MptModel, counts: &[u64]) -> Result<MleResult> {
    MleSolver::new(model, MleOptions::default()).solve(counts)
}

impl<'a> MleSolver<'a> {
    pub fn new(model: &'a MptModel, options: MleOptions) -> Self {
        let upper = model.space().effective_upper_bounds();
        let plan = match rate_structure(model) {
            Some(trees) => match order_chains(model) {
                Some(chains) => {
                    let solver = if chains.iter().any(|c| c.len() > 1) {
                        Solver::Pava
                    } else if upper.iter().any(|&u| u < 1.0) {
                        Solver::ClipToBound
                    } else {
                        Solver::ClosedForm
                    };
                    Plan::Rates {
                        trees,
                        chains,
                        solver,
                    }
                }
                None => Plan::Grid,
            },
            None if !model.space().has_constraints() => Plan::Em,
            None => Plan::Grid,
        };
        MleSolver {
            model,
            plan,
            options,
            upper,
        }
    }

    pub fn solver(&self) -> Solver {
        match &self.plan {
            Plan::Rates { solver, .. } => *solver,
            Plan::Em => Solver::Em,
            Plan::Grid => Solver::GridRefine,
        }
    }

    /// Maximize the log-likelihood of per-category counts (global category
    /// order) over Omega.
    pub fn solve(&self, counts: &[u64]) -> Result<MleResult> {
        if counts.len() != self.model.category_count() {
            return Err(Error::DimensionMismatch {
                expected: self.model.category_count(),
                actual: counts.len(),
            });
        }
        Ok(match &self.plan {
            Plan::Rates {
                trees,
                chains,
                solver,
            } => self.solve_rates(counts, trees, chains, *solver),
            Plan::Em => {
                let em = self.solve_em(counts);
                if em.converged {
                    em
                } else {
                    let grid = grid_refine(self.model, counts, &self.upper, &self.options);
                    if grid.log_lik >= em.log_lik {
                        grid
                    } else {
                        MleResult {
                            converged: grid.converged,
                            ..em
                        }
                    }
                }
            }
            Plan::Grid => grid_refine(self.model, counts, &self.upper, &self.options),
        })
    }

    fn solve_rates(
        &self,
        counts: &[u64],
        trees: &[(usize, usize)],
        chains: &[Vec<usize>],
        solver: Solver,
    ) -> MleResult {
        let s_count = self.model.free_count();
        let mut successes = vec![0u64; s_count];
        let mut trials = vec![0u64; s_count];
        for (t, &(s, theta_cat)) in trees.iter().enumerate() {
            let range = self.model.tree_range(t);
            let c = &counts[range];
            successes[s] += c[theta_cat];
            trials[s] += c[0] + c[1];
        }
        let mut theta = vec![0.0; s_count];
        for chain in chains {
            let rates: Vec<f64> = chain
                .iter()
                .map(|&s| {
                    if trials[s] > 0 {
                        successes[s] as f64 / trials[s] as f64
                    } else {
                        0.0
                    }
                })
                .collect();
            let weights: Vec<f64> = chain.iter().map(|&s| trials[s] as f64).collect();
            let fitted = pava_nondecreasing(&rates, &weights)
                .unwrap_or_else(|| vec![0.5; chain.len()]);
            for (&s, v) in chain.iter().zip(fitted) {
                // effective bounds are nondecreasing along a chain, so the
                // clipped fit stays ordered and optimal
                theta[s] = v.min(self.upper[s]);
            }
        }
        let log_lik = self.model.log_likelihood(&theta, counts);
        MleResult {
            theta_hat: theta,
            log_lik,
            converged: true,
            solver,
        }
    }

    fn solve_em(&self, counts: &[u64]) -> MleResult {
        let s_count = self.model.free_count();
        let mut rng = ChaCha8Rng::seed_from_u64(self.options.seed);
        let mut best: Option<MleResult> = None;
        for restart in 0..self.options.em_restarts.max(1) {
            let start: Vec<f64> = if restart == 0 {
                vec![0.5; s_count]
            } else {
                (0..s_count).map(|_| rng.random_range(0.05..0.95)).collect()
            };
            let run = em_run(self.model, counts, start, &self.options);
            let better = match &best {
                None => true,
                Some(b) => run.log_lik > b.log_lik,
            };
            if better {
                best = Some(run);
            }
        }
        best.unwrap()
    }
}

/// EM for branch-product models: expected branch counts, then
/// `theta_s = E[sum a_s] / E[sum (a_s + b_s)]`.
fn em_run(model: &MptModel, counts: &[u64], start: Vec<f64>, opts: &MleOptions) -> MleResult {
    let s_count = model.free_count();
    let mut theta = start;
    let mut probs = vec![0.0; model.category_count()];
    let mut numer = vec![0.0; s_count];
    let mut denom = vec![0.0; s_count];
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    for _ in 0..opts.max_iterations {
        model.eval_into(&theta, &mut probs, None);
        let ll = log_likelihood_from_probs(&probs, counts);
        if (ll - prev).abs() < opts.tolerance {
            converged = true;
            break;
        }
        prev = ll;
        numer.iter_mut().for_each(|x| *x = 0.0);
        denom.iter_mut().for_each(|x| *x = 0.0);
        for (cat, coef, factors) in model.branches_flat() {
            let n = counts[cat];
            if n == 0 || probs[cat] <= 0.0 {
                continue;
            }
            let mut v = coef;
            for &(s, a, b) in factors {
                v *= theta[s].powi(a) * (1.0 - theta[s]).powi(b);
            }
            let expected = n as f64 * v / probs[cat];
            for &(s, a, b) in factors {
                numer[s] += expected * a as f64;
                denom[s] += expected * (a + b) as f64;
            }
        }
        for s in 0..s_count {
            if denom[s] > 0.0 {
                theta[s] = numer[s] / denom[s];
            }
        }
    }
    let log_lik = model.log_likelihood(&theta, counts);
    MleResult {
        theta_hat: theta,
        log_lik,
        converged,
        solver: Solver::Em,
    }
}

/// Coarse grid over Omega, then coordinate-wise golden-section refinement
/// from the best grid points.
pub fn grid_refine(model: &MptModel, counts: &[u64], upper: &[f64], opts: &MleOptions) -> MleResult {
    let s_count = model.free_count();
    let per_dim = ((200_000f64).powf(1.0 / s_count as f64).floor() as usize).clamp(3, 101);
    let total = per_dim.pow(s_count as u32);
    let mut starts: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut theta = vec![0.0; s_count];
    for idx in 0..total {
        let mut rem = idx;
        for s in 0..s_count {
            theta[s] = upper[s] * (rem % per_dim) as f64 / (per_dim - 1) as f64;
            rem /= per_dim;
        }
        if !model.space().contains(&theta) {
            continue;
        }
        let ll = model.log_likelihood(&theta, counts);
        if starts.len() < 5 || ll > starts[starts.len() - 1].0 {
            starts.push((ll, theta.clone()));
            starts.sort_by(|a, b| b.0.total_cmp(&a.0));
            starts.truncate(5);
        }
    }
    let mut best: Option<MleResult> = None;
    for (_, start) in starts {
        let run = coordinate_ascent(model, counts, start, upper, opts);
        if best.as_ref().is_none_or(|b| run.log_lik > b.log_lik) {
            best = Some(run);
        }
    }
    best.expect("grid contains at least one point of Omega")
}

fn coordinate_ascent(
    model: &MptModel,
    counts: &[u64],
    mut theta: Vec<f64>,
    upper: &[f64],
    opts: &MleOptions,
) -> MleResult {
    let order = model.space().order_constraints();
    let mut ll = model.log_likelihood(&theta, counts);
    let mut converged = false;
    for _ in 0..opts.max_iterations.min(20_000) {
        let before = ll;
        for s in 0..theta.len() {
            let mut lo: f64 = 0.0;
            let mut hi = upper[s];
            for &(i, j) in order {
                if j == s {
                    lo = lo.max(theta[i]);
                }
                if i == s {
                    hi = hi.min(theta[j]);
                }
            }
            let mut work = theta.clone();
            let mut line = |t: f64| {
                work[s] = t;
                model.log_likelihood(&work, counts)
            };
            let peak = golden_max(lo, hi, &mut line);
            let mut best_t = theta[s];
            let mut best_ll = ll;
            for t in [lo, hi, peak] {
                let v = line(t);
                if v > best_ll {
                    best_ll = v;
                    best_t = t;
                }
            }
            theta[s] = best_t;
            ll = best_ll;
        }
        if !order.is_empty() {
            ll = tied_moves(model, counts, &mut theta, upper, ll);
        }
        if ll - before <= opts.tolerance.min(1e-12) {
            converged = true;
            break;
        }
    }
    MleResult {
        theta_hat: theta,
        log_lik: ll,
        converged,
        solver: Solver::GridRefine,
    }
}

/// Line searches over groups of parameters held equal by active order
/// constraints, which single-coordinate moves cannot leave.
fn tied_moves(model: &MptModel, counts: &[u64], theta: &mut [f64], upper: &[f64], mut ll: f64) -> f64 {
    let order = model.space().order_constraints();
    let n = theta.len();
    let mut group: Vec<usize> = (0..n).collect();
    fn root(group: &mut [usize], mut i: usize) -> usize {
        while group[i] != i {
            group[i] = group[group[i]];
            i = group[i];
        }
        i
    }
    for &(i, j) in order {
        if (theta[i] - theta[j]).abs() <= 1e-10 {
            let (a, b) = (root(&mut group, i), root(&mut group, j));
            group[a] = b;
        }
    }
    for g in 0..n {
        let members: Vec<usize> = (0..n).filter(|&s| root(&mut group, s) == g).collect();
        if members.len() < 2 {
            continue;
        }
        let mut lo: f64 = 0.0;
        let mut hi = members.iter().map(|&s| upper[s]).fold(1.0, f64::min);
        for &(i, j) in order {
            match (members.contains(&i), members.contains(&j)) {
                (false, true) => lo = lo.max(theta[i]),
                (true, false) => hi = hi.min(theta[j]),
                _ => {}
            }
        }
        let mut work = theta.to_vec();
        let mut line = |t: f64| {
            for &s in &members {
                work[s] = t;
            }
            model.log_likelihood(&work, counts)
        };
        let peak = golden_max(lo, hi, &mut line);
        let mut best = None;
        for t in [lo, hi, peak] {
            let v = line(t);
            if v > ll {
                ll = v;
                best = Some(t);
            }
        }
        if let Some(t) = best {
            for &s in &members {
                theta[s] = t;
            }
        }
    }
    ll
}

fn golden_max(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b - a <= 0.0 {
        return a;
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > 1e-13 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Binomial-rate structure: each tree has two single-branch categories,
/// `theta_s` and `1 - theta_s`, for one parameter `s`.
fn rate_structure(model: &MptModel) -> Option<Vec<(usize, usize)>> {
    let one = crate::model::Rational::from_integer(1);
    model
        .trees()
        .iter()
        .map(|tree| {
            if tree.categories.len() != 2 {
                return None;
            }
            let mut param = None;
            let mut theta_cat = None;
            for (k, cat) in tree.categories.iter().enumerate() {
                if cat.branches.len() != 1 || cat.branches[0].coefficient != one {
                    return None;
                }
                let ex = &cat.branches[0].exponents;
                if ex.len() != 1 {
                    return None;
                }
                let (&s, &(a, b)) = ex.iter().next().unwrap();
                if param.is_some_and(|p| p != s) {
                    return None;
                }
                param = Some(s);
                match (a, b) {
                    (1, 0) => theta_cat = Some(k),
                    (0, 1) => {}
                    _ => return None,
                }
            }
            let theta_cat = theta_cat?;
            // the other category must be the complement
            let other = &tree.categories[1 - theta_cat].branches[0].exponents;
            (other.values().next() == Some(&(0, 1))).then_some((param?, theta_cat))
        })
        .collect()
}

/// Split parameters into chains of the (transitively reduced) order graph;
/// `None` if the order is not a disjoint union of chains.
fn order_chains(model: &MptModel) -> Option<Vec<Vec<usize>>> {
    let s_count = model.free_count();
    let edges = model.space().order_constraints();
    let reachable = |from: usize, to: usize, skip: (usize, usize)| -> bool {
        let mut stack = vec![from];
        let mut seen = vec![false; s_count];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for &(a, b) in edges {
                if a == v && (a, b) != skip && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    };
    let reduced: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|&(a, b)| !reachable(a, b, (a, b)))
        .collect();
    let mut next = vec![None; s_count];
    let mut has_prev = vec![false; s_count];
    for &(a, b) in &reduced {
        if next[a].is_some() || has_prev[b] {
            return None;
        }
        next[a] = Some(b);
        has_prev[b] = true;
    }
    let mut chains = Vec::new();
    for start in (0..s_count).filter(|&s| !has_prev[s]) {
        let mut chain = vec![start];
        let mut cur = start;
        while let Some(n) = next[cur] {
            chain.push(n);
            cur = n;
        }
        chains.push(chain);
    }
    Some(chains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_model;

    const WADD: &str = "params e1 e2 e3\norder e1 <= e3 <= e2 <= 1/2\n\
        tree t1 weight 1/3\ncat c: (1-e1)\ncat x: e1\n\
        tree t2 weight 1/3\ncat c: e2\ncat x: (1-e2)\n\
        tree t3 weight 1/3\ncat c: (1-e3)\ncat x: e3\n";

    #[test]
    fn bernoulli_sample_proportion() {
        let m = parse_model("cat a: p\ncat b: (1-p)").unwrap();
        let r = constrained_mle(&m, &[3, 1]).unwrap();
        assert_eq!(r.solver, Solver::ClosedForm);
        assert_eq!(r.theta_hat, vec![0.75]);
        assert!((r.log_lik - (3.0 * 0.75f64.ln() + 0.25f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn shared_bounded_rate_is_clipped() {
        let text = "params e\nbound e <= 0.5\n\
            tree t1 weight 1/3\ncat c: (1-e)\ncat x: e\n\
            tree t2 weight 1/3\ncat c: (1-e)\ncat x: e\n\
            tree t3 weight 1/3\ncat c: (1-e)\ncat x: e\n";
        let m = parse_model(text).unwrap();
        // 20 errors out of 30
        let r = constrained_mle(&m, &[3, 7, 3, 7, 4, 6]).unwrap();
        assert_eq!(r.solver, Solver::ClipToBound);
        assert_eq!(r.theta_hat, vec![0.5]);
    }

    #[test]
    fn waddprob_pools_reversed_rates() {
        let m = parse_model(WADD).unwrap();
        // raw error rates e1 = 0.4, e2 = 0.1, e3 = 0.2 with 10 per tree;
        // the e2 tree counts its theta-category first
        let r = constrained_mle(&m, &[6, 4, 1, 9, 8, 2]).unwrap();
        assert_eq!(r.solver, Solver::Pava);
        for v in &r.theta_hat {
            assert!((v - 7.0 / 30.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pava_respects_upper_bound() {
        let m = parse_model(WADD).unwrap();
        let r = constrained_mle(&m, &[9, 1, 9, 1, 9, 1]).unwrap();
        assert_eq!(r.theta_hat, vec![0.1, 0.5, 0.1]);
        let r = constrained_mle(&m, &[2, 8, 2, 8, 2, 8]).unwrap();
        assert_eq!(r.theta_hat, vec![0.5, 0.5, 0.5]);
    }

    #[test]
    fn em_recovers_saturated_two_parameter_tree() {
        let m = parse_model("cat a: p*q\ncat b: p*(1-q)\ncat c: (1-p)").unwrap();
        let r = constrained_mle(&m, &[3, 1, 4]).unwrap();
        assert_eq!(r.solver, Solver::Em);
        assert!(r.converged);
        assert!((r.theta_hat[0] - 0.5).abs() < 1e-6);
        assert!((r.theta_hat[1] - 0.75).abs() < 1e-6);
    }

    #[test]
    fn general_constrained_structure_uses_grid() {
        let m = parse_model("params p q\nbound q <= 0.5\ncat a: p*q\ncat b: p*(1-q)\ncat c: (1-p)").unwrap();
        let r = constrained_mle(&m, &[3, 1, 4]).unwrap();
        assert_eq!(r.solver, Solver::GridRefine);
        assert!(r.converged);
        assert!((r.theta_hat[0] - 0.5).abs() < 1e-6);
        assert!((r.theta_hat[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn non_chain_order_falls_back_to_grid() {
        let text = "params a b c\norder a <= c\norder b <= c\n\
            tree t1 weight 1/3\ncat x: a\ncat y: (1-a)\n\
            tree t2 weight 1/3\ncat x: b\ncat y: (1-b)\n\
            tree t3 weight 1/3\ncat x: c\ncat y: (1-c)\n";
        let m = parse_model(text).unwrap();
        let solver = MleSolver::new(&m, MleOptions::default());
        assert_eq!(solver.solver(), Solver::GridRefine);
        // rates 0.8, 0.2, 0.5: a and c pool to 0.65
        let r = solver.solve(&[8, 2, 2, 8, 5, 5]).unwrap();
        assert!((r.theta_hat[0] - 0.65).abs() < 1e-6, "{:?}", r.theta_hat);
        assert!((r.theta_hat[1] - 0.2).abs() < 1e-6);
        assert!((r.theta_hat[2] - 0.65).abs() < 1e-6);
    }

    #[test]
    fn redundant_order_edges_still_form_a_chain() {
        let text = "params a b c\norder a <= b <= c\norder a <= c\n\
            tree t1 weight 1/3\ncat x: a\ncat y: (1-a)\n\
            tree t2 weight 1/3\ncat x: b\ncat y: (1-b)\n\
            tree t3 weight 1/3\ncat x: c\ncat y: (1-c)\n";
        let m = parse_model(text).unwrap();
        assert_eq!(MleSolver::new(&m, MleOptions::default()).solver(), Solver::Pava);
    }
}
