//! Small numerical helpers shared by the estimators.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Streaming `ln Σ exp(x_i)` with a running maximum and compensated sum of
/// rescaled terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogSumExp {
    max: f64,
    scaled: NeumaierSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: NeumaierSum::default(),
        }
    }
}

impl LogSumExp {
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            let factor = (self.max - x).exp();
            let old = self.scaled.value() * factor;
            self.scaled = NeumaierSum::default();
            self.scaled.add(old);
            self.max = x;
        }
        self.scaled.add((x - self.max).exp());
    }

    pub fn merge(&mut self, other: &LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            let mut merged = *other;
            merged.merge(self);
            *self = merged;
            return;
        }
        let factor = (other.max - self.max).exp();
        self.scaled.add(other.scaled.value() * factor);
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.max + self.scaled.value().ln()
    }
}

/// Table of `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = NeumaierSum::default();
    table.push(0.0);
    for k in 1..=n {
        acc.add((k as f64).ln());
        table.push(acc.value());
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = NeumaierSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert!((s.value() - 1e-15).abs() < 1e-30);
    }

    #[test]
    fn log_sum_exp_matches_direct_sum() {
        let xs = [-1.0, 0.5, 2.0, -30.0, 1.5];
        let mut l = LogSumExp::default();
        for x in xs {
            l.add(x);
        }
        let direct: f64 = xs.iter().map(|x| f64::exp(*x)).sum::<f64>().ln();
        assert!((l.value() - direct).abs() < 1e-14);

        let mut a = LogSumExp::default();
        let mut b = LogSumExp::default();
        xs[..2].iter().for_each(|&x| a.add(x));
        xs[2..].iter().for_each(|&x| b.add(x));
        a.merge(&b);
        assert!((a.value() - direct).abs() < 1e-14);
    }

    #[test]
    fn factorial_table() {
        let t = ln_factorials(10);
        assert!((t[5] - 120f64.ln()).abs() < 1e-14);
        assert!((t[10] - 3628800f64.ln()).abs() < 1e-13);
    }
}
