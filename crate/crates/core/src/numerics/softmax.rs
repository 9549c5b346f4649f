use crate::error::{Error, Result};

/// Numerically stable `log(sum(exp(xs)))`. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= sum);
    out
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|x| x - lse).collect()
}

/// Cross-entropy of `softmax(logits)` against a single target class.
///
/// Returns the loss `-log p[target]` and its gradient `p - onehot(target)`.
pub fn softmax_xent(logits: &[f64], target: usize) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::Index {
            index: target,
            len: logits.len(),
        });
    }
    let lse = log_sum_exp(logits);
    let loss = lse - logits[target];
    let mut grad: Vec<f64> = logits.iter().map(|x| (x - lse).exp()).collect();
    grad[target] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_log_k() {
        let (loss, _) = softmax_xent(&[0.7; 4], 0).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn symmetric_gradient() {
        let (_, grad) = softmax_xent(&[0.0, 0.0], 0).unwrap();
        assert_eq!(grad, vec![-0.5, 0.5]);
    }

    #[test]
    fn two_class_value() {
        // -log(e^0 / (e^2 + e^0)) = ln(1 + e^2)
        let (loss, _) = softmax_xent(&[2.0, 0.0], 1).unwrap();
        let expected = (1.0 + 2f64.exp()).ln();
        assert!((loss - expected).abs() < 1e-12);
        assert!((loss - 2.1269).abs() < 1e-4);
    }

    #[test]
    fn target_out_of_range() {
        assert!(matches!(
            softmax_xent(&[0.0, 1.0], 2),
            Err(Error::Index { index: 2, len: 2 })
        ));
    }

    #[test]
    fn large_logits_are_stable() {
        let (loss, grad) = softmax_xent(&[1000.0, 0.0], 0).unwrap();
        assert!(loss.is_finite() && loss >= 0.0);
        assert!(grad.iter().all(|g| g.is_finite()));
    }

    proptest! {
        #[test]
        fn loss_nonnegative_and_grad_sums_to_zero(
            logits in prop::collection::vec(-20.0f64..20.0, 1..12),
            t in 0usize..12,
        ) {
            let t = t % logits.len();
            let (loss, grad) = softmax_xent(&logits, t).unwrap();
            prop_assert!(loss >= 0.0);
            prop_assert!(grad.iter().sum::<f64>().abs() < 1e-12);
        }

        #[test]
        fn log_add_matches_direct(a in -30.0f64..30.0, b in -30.0f64..30.0) {
            let direct = (a.exp() + b.exp()).ln();
            prop_assert!((log_add(a, b) - direct).abs() < 1e-10);
        }
    }
}
