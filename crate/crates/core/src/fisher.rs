//! Expected Fisher information of one observation.
//!
//! The observation falls into tree `t` with probability `w_t`, so
//! `I(theta)[s][u] = sum_t w_t sum_{j in t} (dp_j/ds)(dp_j/du) / p_j`,
//! and N observations carry `N * I(theta)`.

use crate::error::{Error, Result};
use crate::model::{clip_interior, MptModel};

#[derive(Debug, Clone, PartialEq)]
pub struct FisherMatrix {
    dim: usize,
    entries: Vec<f64>,
    theta: Vec<f64>,
}

impl FisherMatrix {
    pub fn from_entries(dim: usize, entries: Vec<f64>, theta: Vec<f64>) -> Self {
        assert_eq!(entries.len(), dim * dim);
        FisherMatrix {
            dim,
            entries,
            theta,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    /// Determinant from an LDL^T factorization with symmetric (diagonal)
    /// pivoting.
    pub fn determinant(&self) -> f64 {
        ldl_determinant(&self.entries, self.dim)
    }

    /// `sqrt(det I)`; slightly negative determinants within
    /// `1e-10 * (trace / S)^S` are treated as zero.
    pub fn sqrt_det(&self) -> Result<f64> {
        sqrt_det_checked(self.determinant(), self.trace(), self.dim, &self.theta)
    }
}

fn sqrt_det_checked(det: f64, trace: f64, dim: usize, theta: &[f64]) -> Result<f64> {
    if det >= 0.0 {
        return Ok(det.sqrt());
    }
    let scale = (trace / dim as f64).powi(dim as i32);
    if det.abs() <= 1e-10 * scale {
        Ok(0.0)
    } else {
        Err(Error::NegativeDeterminant {
            det,
            theta: theta.to_vec(),
        })
    }
}

pub fn sqrt_det(f: &FisherMatrix) -> Result<f64> {
    f.sqrt_det()
}

/// Determinant of a symmetric matrix stored row-major.
pub(crate) fn ldl_determinant(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    ldl_determinant_in_place(&mut m, n)
}

fn ldl_determinant_in_place(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for k in 0..n {
        // largest remaining diagonal entry in magnitude
        let mut p = k;
        for i in k + 1..n {
            if m[i * n + i].abs() > m[p * n + p].abs() {
                p = i;
            }
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            for r in 0..n {
                m.swap(r * n + k, r * n + p);
            }
        }
        let d = m[k * n + k];
        det *= d;
        if d == 0.0 {
            return 0.0;
        }
        for i in k + 1..n {
            let l = m[i * n + k] / d;
            if l == 0.0 {
                continue;
            }
            for j in k + 1..=i {
                m[i * n + j] -= l * m[j * n + k];
            }
        }
        // keep the trailing block symmetric
        for i in k + 1..n {
            for j in k + 1..i {
                m[j * n + i] = m[i * n + j];
            }
        }
    }
    det
}

/// Reusable buffers for evaluating Fisher information many times.
pub(crate) struct FisherWorkspace {
    probs: Vec<f64>,
    grad: Vec<f64>,
    matrix: Vec<f64>,
    clipped: Vec<f64>,
}

impl FisherWorkspace {
    pub(crate) fn new(model: &MptModel) -> Self {
        let s = model.free_count();
        let c = model.category_count();
        FisherWorkspace {
            probs: vec![0.0; c],
            grad: vec![0.0; c * s],
            matrix: vec![0.0; s * s],
            clipped: vec![0.0; s],
        }
    }

    /// Fill the Fisher matrix at `theta` (clipped to the interior). Returns
    /// the index of a zero-probability category on failure.
    fn fill(&mut self, model: &MptModel, theta: &[f64]) -> std::result::Result<(), usize> {
        let s = model.free_count();
        for (c, &t) in self.clipped.iter_mut().zip(theta) {
            *c = t.clamp(crate::model::EPSILON, 1.0 - crate::model::EPSILON);
        }
        model.eval_into(&self.clipped, &mut self.probs, Some(&mut self.grad));
        self.matrix.iter_mut().for_each(|x| *x = 0.0);
        let weights = model.weights_f64();
        for (t, &w) in weights.iter().enumerate() {
            for j in model.tree_range(t) {
                let p = self.probs[j];
                if p <= 0.0 {
                    return Err(j);
                }
                let row = &self.grad[j * s..(j + 1) * s];
                let scale = w / p;
                for a in 0..s {
                    let ga = row[a] * scale;
                    if ga == 0.0 {
                        continue;
                    }
                    for b in 0..=a {
                        self.matrix[a * s + b] += ga * row[b];
                    }
                }
            }
        }
        for a in 0..s {
            for b in 0..a {
                self.matrix[b * s + a] = self.matrix[a * s + b];
            }
        }
        Ok(())
    }

    /// `sqrt(det I(theta))` without allocating.
    pub(crate) fn sqrt_det(&mut self, model: &MptModel, theta: &[f64]) -> Result<f64> {
        if let Err(j) = self.fill(model, theta) {
            return Err(singular(model, j, &self.clipped));
        }
        let s = model.free_count();
        let trace: f64 = (0..s).map(|i| self.matrix[i * s + i]).sum();
        let det = ldl_determinant_in_place(&mut self.matrix, s);
        sqrt_det_checked(det, trace, s, &self.clipped)
    }
}

fn singular(model: &MptModel, j: usize, theta: &[f64]) -> Error {
    let (tree, category) = model.category_label(j);
    Error::Singular {
        tree: tree.to_string(),
        category: category.to_string(),
        theta: theta.to_vec(),
    }
}

/// Expected Fisher information of sample size one at `theta`.
pub fn fisher_information(model: &MptModel, theta: &[f64]) -> Result<FisherMatrix> {
    if theta.len() != model.free_count() {
        return Err(Error::DimensionMismatch {
            expected: model.free_count(),
            actual: theta.len(),
        });
    }
    let mut ws = FisherWorkspace::new(model);
    if let Err(j) = ws.fill(model, theta) {
        return Err(singular(model, j, &ws.clipped));
    }
    Ok(FisherMatrix {
        dim: model.free_count(),
        entries: ws.matrix,
        theta: clip_interior(theta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_model;

    #[test]
    fn bernoulli_information() {
        let m = parse_model("cat hit: p\ncat miss: (1-p)").unwrap();
        let f = fisher_information(&m, &[0.5]).unwrap();
        assert!((f.get(0, 0) - 4.0).abs() < 1e-12);
        assert!((f.sqrt_det().unwrap() - 2.0).abs() < 1e-12);
        let f = fisher_information(&m, &[0.2]).unwrap();
        assert!((f.get(0, 0) - 6.25).abs() < 1e-12);
    }

    #[test]
    fn independent_trees_are_halved() {
        let m = parse_model(
            "params p q\ntree a weight 1/2\ncat x: p\ncat y: (1-p)\n\
             tree b weight 1/2\ncat x: q\ncat y: (1-q)\n",
        )
        .unwrap();
        let f = fisher_information(&m, &[0.5, 0.5]).unwrap();
        assert_eq!(f.rows(), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);
        assert!((f.sqrt_det().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_category_is_named() {
        // p^40 underflows to zero at the clipped boundary
        let text = format!("cat a: {}\ncat b: (1-p)", vec!["p"; 40].join("*"));
        let m = parse_model(&text).unwrap();
        match fisher_information(&m, &[0.0]).unwrap_err() {
            Error::Singular { tree, category, .. } => {
                assert_eq!((tree.as_str(), category.as_str()), ("tree", "a"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.25, 0.5, 0.25, 2.0];
        let expected = 4.0 * (3.0 * 2.0 - 0.25 * 0.25) - 1.0 * (1.0 * 2.0 - 0.25 * 0.5)
            + 0.5 * (1.0 * 0.25 - 3.0 * 0.5);
        assert!((ldl_determinant(&a, 3) - expected).abs() < 1e-12);
    }

    #[test]
    fn noise_level_negative_determinant_clamps_to_zero() {
        assert_eq!(sqrt_det_checked(-1e-14, 2.0, 2, &[0.5, 0.5]).unwrap(), 0.0);
        assert!(matches!(
            sqrt_det_checked(-1e-3, 2.0, 2, &[0.5, 0.5]),
            Err(Error::NegativeDeterminant { .. })
        ));
    }
}
