/// Weighted isotonic (nondecreasing) regression by pool-adjacent-violators.
///
/// Elements with zero weight do not influence the fit; they take the value
/// of the nearest weighted element before them (or after them, at the start
/// of the sequence). Returns `None` when every weight is zero.
pub fn pava_nondecreasing(values: &[f64], weights: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(values.len(), weights.len());
    // blocks of (weighted sum, total weight, positions)
    let mut blocks: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if w <= 0.0 {
            continue;
        }
        blocks.push((v * w, w, vec![i]));
        while blocks.len() > 1 {
            let n = blocks.len();
            let last_mean = blocks[n - 1].0 / blocks[n - 1].1;
            let prev_mean = blocks[n - 2].0 / blocks[n - 2].1;
            if prev_mean <= last_mean {
                break;
            }
            let (s, w, idx) = blocks.pop().unwrap();
            let prev = blocks.last_mut().unwrap();
            prev.0 += s;
            prev.1 += w;
            prev.2.extend(idx);
        }
    }
    if blocks.is_empty() {
        return None;
    }
    let mut fitted = vec![f64::NAN; values.len()];
    for (s, w, idx) in &blocks {
        for &i in idx {
            fitted[i] = s / w;
        }
    }
    let first = fitted.iter().copied().find(|v| !v.is_nan()).unwrap();
    let mut carry = first;
    for v in fitted.iter_mut() {
        if v.is_nan() {
            *v = carry;
        } else {
            carry = *v;
        }
    }
    Some(fitted)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pools_a_fully_reversed_chain() {
        let fit = pava_nondecreasing(&[0.4, 0.2, 0.1], &[10.0, 10.0, 10.0]).unwrap();
        for v in fit {
            assert!((v - 7.0 / 30.0).abs() < 1e-15);
        }
    }

    #[test]
    fn keeps_sorted_input() {
        let fit = pava_nondecreasing(&[0.1, 0.2, 0.4], &[1.0, 5.0, 2.0]).unwrap();
        assert_eq!(fit, vec![0.1, 0.2, 0.4]);
    }

    #[test]
    fn weighted_pooling() {
        let fit = pava_nondecreasing(&[0.5, 0.1, 0.9], &[1.0, 3.0, 1.0]).unwrap();
        assert!((fit[0] - 0.2).abs() < 1e-15);
        assert!((fit[1] - 0.2).abs() < 1e-15);
        assert_eq!(fit[2], 0.9);
    }

    #[test]
    fn zero_weights_follow_neighbours() {
        let fit = pava_nondecreasing(&[0.9, 0.3, 0.0, 0.6], &[0.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(fit, vec![0.3, 0.3, 0.3, 0.6]);
        assert!(pava_nondecreasing(&[0.1, 0.2], &[0.0, 0.0]).is_none());
    }
}
