//! CTC loss (log-space forward-backward) and best-path alignment.
//!
//! The blank is always the last logit column.

use crate::error::{Error, Result};
use crate::numerics::{log_add, log_softmax, DenseMatrix};

/// Loss and gradient with respect to the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcOutput {
    /// `-log P(targets | logits)`.
    pub loss: f64,
    pub grad: DenseMatrix,
}

/// Frame index at which each target symbol is first emitted on the best
/// path. Strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentInfo {
    pub first_emission: Vec<usize>,
}

/// Minimum frames a target sequence needs: one per symbol plus a blank
/// between each pair of repeated neighbours.
pub fn min_frames(targets: &[u32]) -> usize {
    targets.len() + targets.windows(2).filter(|w| w[0] == w[1]).count()
}

struct Lattice {
    /// Blank-augmented labels: blank, l1, blank, l2, ..., blank.
    ext: Vec<usize>,
    log_probs: Vec<Vec<f64>>,
}

impl Lattice {
    fn new(logits: &DenseMatrix, targets: &[u32]) -> Result<Self> {
        let (frames, classes) = logits.shape();
        if targets.is_empty() {
            return Err(Error::Input("CTC targets must be non-empty".into()));
        }
        if classes < 2 {
            return Err(Error::Shape("CTC needs at least one label and a blank".into()));
        }
        let blank = classes - 1;
        if let Some(&bad) = targets.iter().find(|&&t| t as usize >= blank) {
            return Err(Error::Input(format!(
                "CTC target {bad} collides with blank or exceeds {} labels",
                blank
            )));
        }
        let required = min_frames(targets);
        if frames < required {
            return Err(Error::Alignment { frames, required });
        }
        let mut ext = Vec::with_capacity(2 * targets.len() + 1);
        ext.push(blank);
        for &t in targets {
            ext.push(t as usize);
            ext.push(blank);
        }
        let log_probs = (0..frames).map(|t| log_softmax(logits.row(t))).collect();
        Ok(Self { ext, log_probs })
    }

    fn states(&self) -> usize {
        self.ext.len()
    }

    /// Whether state `s` may be entered from `s - 2`.
    fn can_skip(&self, s: usize) -> bool {
        s >= 2 && s % 2 == 1 && self.ext[s] != self.ext[s - 2]
    }

    fn emit(&self, t: usize, s: usize) -> f64 {
        self.log_probs[t][self.ext[s]]
    }
}

/// CTC negative log-likelihood and its exact gradient with respect to the
/// logits (softmax is applied internally, per frame).
pub fn ctc_loss(logits: &DenseMatrix, targets: &[u32]) -> Result<CtcOutput> {
    let lat = Lattice::new(logits, targets)?;
    let frames = logits.rows();
    let classes = logits.cols();
    let s_count = lat.states();
    let neg = f64::NEG_INFINITY;

    let mut alpha = vec![vec![neg; s_count]; frames];
    alpha[0][0] = lat.emit(0, 0);
    alpha[0][1] = lat.emit(0, 1);
    for t in 1..frames {
        for s in 0..s_count {
            let mut acc = alpha[t - 1][s];
            if s >= 1 {
                acc = log_add(acc, alpha[t - 1][s - 1]);
            }
            if lat.can_skip(s) {
                acc = log_add(acc, alpha[t - 1][s - 2]);
            }
            if acc != neg {
                alpha[t][s] = acc + lat.emit(t, s);
            }
        }
    }

    let mut beta = vec![vec![neg; s_count]; frames];
    let last = frames - 1;
    beta[last][s_count - 1] = lat.emit(last, s_count - 1);
    beta[last][s_count - 2] = lat.emit(last, s_count - 2);
    for t in (0..last).rev() {
        for s in 0..s_count {
            let mut acc = beta[t + 1][s];
            if s + 1 < s_count {
                acc = log_add(acc, beta[t + 1][s + 1]);
            }
            if s + 2 < s_count && lat.can_skip(s + 2) {
                acc = log_add(acc, beta[t + 1][s + 2]);
            }
            if acc != neg {
                beta[t][s] = acc + lat.emit(t, s);
            }
        }
    }

    let log_p = log_add(alpha[last][s_count - 1], alpha[last][s_count - 2]);
    if !log_p.is_finite() {
        return Err(Error::Numeric("CTC likelihood underflowed".into()));
    }

    let mut grad = DenseMatrix::zeros(frames, classes);
    let mut occupancy = vec![neg; classes];
    for t in 0..frames {
        occupancy.iter_mut().for_each(|x| *x = neg);
        for s in 0..s_count {
            let ab = alpha[t][s] + beta[t][s];
            if ab != neg {
                let k = lat.ext[s];
                // alpha and beta both include the emission at (t, s).
                occupancy[k] = log_add(occupancy[k], ab - lat.log_probs[t][k]);
            }
        }
        let row = grad.row_mut(t);
        for k in 0..classes {
            let y = lat.log_probs[t][k].exp();
            let posterior = if occupancy[k] == neg {
                0.0
            } else {
                (occupancy[k] - log_p).exp()
            };
            row[k] = y - posterior;
        }
    }
    Ok(CtcOutput { loss: -log_p, grad })
}

/// Viterbi best path through the CTC lattice, reported as the frame where
/// each target symbol is first emitted.
///
/// Ties prefer staying in the current state, i.e. the earlier emission.
pub fn ctc_align_first_emission(logits: &DenseMatrix, targets: &[u32]) -> Result<AlignmentInfo> {
    let lat = Lattice::new(logits, targets)?;
    let frames = logits.rows();
    let s_count = lat.states();
    let neg = f64::NEG_INFINITY;

    let mut delta = vec![vec![neg; s_count]; frames];
    let mut back = vec![vec![0usize; s_count]; frames];
    delta[0][0] = lat.emit(0, 0);
    delta[0][1] = lat.emit(0, 1);
    for t in 1..frames {
        for s in 0..s_count {
            let mut best = (delta[t - 1][s], s);
            if s >= 1 && delta[t - 1][s - 1] > best.0 {
                best = (delta[t - 1][s - 1], s - 1);
            }
            if lat.can_skip(s) && delta[t - 1][s - 2] > best.0 {
                best = (delta[t - 1][s - 2], s - 2);
            }
            if best.0 != neg {
                delta[t][s] = best.0 + lat.emit(t, s);
                back[t][s] = best.1;
            }
        }
    }

    let last = frames - 1;
    let mut s = if delta[last][s_count - 1] >= delta[last][s_count - 2] {
        s_count - 1
    } else {
        s_count - 2
    };
    let mut path = vec![0usize; frames];
    for t in (0..frames).rev() {
        path[t] = s;
        if t > 0 {
            s = back[t][s];
        }
    }

    let mut first_emission = vec![usize::MAX; targets.len()];
    for (t, &s) in path.iter().enumerate() {
        if s % 2 == 1 {
            let i = s / 2;
            if first_emission[i] == usize::MAX {
                first_emission[i] = t;
            }
        }
    }
    debug_assert!(first_emission.iter().all(|&t| t < frames));
    Ok(AlignmentInfo { first_emission })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn two_frame_uniform() {
        // Vocab {a, blank}; paths aa, a-, -a each have probability 1/4.
        let logits = mat(&[&[0.0, 0.0], &[0.0, 0.0]]);
        let out = ctc_loss(&logits, &[0]).unwrap();
        assert!((out.loss + 0.75f64.ln()).abs() < 1e-12);
        assert!((out.loss - 0.2877).abs() < 1e-4);
    }

    #[test]
    fn certain_path_has_zero_loss() {
        let big = 50.0;
        let logits = mat(&[&[big, 0.0, 0.0, 0.0], &[0.0, big, 0.0, 0.0], &[0.0, 0.0, big, 0.0]]);
        let out = ctc_loss(&logits, &[0, 1, 2]).unwrap();
        assert!(out.loss < 1e-12);
    }

    #[test]
    fn infeasible_lengths() {
        let logits = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            ctc_loss(&logits, &[0, 0]),
            Err(Error::Alignment { frames: 2, required: 3 })
        ));
        assert!(ctc_loss(&logits, &[]).is_err());
        assert!(ctc_loss(&logits, &[2]).is_err());
        assert_eq!(min_frames(&[1, 1, 2, 2, 2]), 8);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = mat(&[&[0.3, -0.2, 0.1], &[1.0, 0.5, -0.5], &[0.2, 0.2, 0.9]]);
        let out = ctc_loss(&logits, &[0, 1]).unwrap();
        for t in 0..3 {
            assert!(out.grad.row(t).iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_alignment() {
        let big = 10.0;
        let logits = mat(&[&[big, 0.0, 0.0, 0.0], &[0.0, big, 0.0, 0.0], &[0.0, 0.0, big, 0.0]]);
        let a = ctc_align_first_emission(&logits, &[0, 1, 2]).unwrap();
        assert_eq!(a.first_emission, vec![0, 1, 2]);
    }

    #[test]
    fn blank_heavy_alignment() {
        // Classes {x, y, blank}; x peaks at frame 1, y at frame 3.
        let logits = mat(&[
            &[0.0, 0.0, 5.0],
            &[6.0, 0.0, 1.0],
            &[0.0, 0.0, 5.0],
            &[0.0, 6.0, 1.0],
            &[0.0, 0.0, 5.0],
        ]);
        let a = ctc_align_first_emission(&logits, &[0, 1]).unwrap();
        assert_eq!(a.first_emission, vec![1, 3]);
    }

    #[test]
    fn repeated_symbols_need_blank() {
        let logits = DenseMatrix::zeros(3, 2);
        let a = ctc_align_first_emission(&logits, &[0, 0]).unwrap();
        assert_eq!(a.first_emission, vec![0, 2]);
    }

    proptest::proptest! {
        #[test]
        fn alignment_is_strictly_increasing(
            targets in proptest::collection::vec(0u32..3, 1..5),
            extra in 0usize..4,
            values in proptest::collection::vec(-3.0f64..3.0, 64),
        ) {
            let frames = min_frames(&targets) + extra;
            let rows: Vec<Vec<f64>> = (0..frames).map(|t| values[t * 4 % 60..t * 4 % 60 + 4].to_vec()).collect();
            let a = ctc_align_first_emission(&DenseMatrix::from_rows(&rows).unwrap(), &targets).unwrap();
            proptest::prop_assert!(a.first_emission.windows(2).all(|w| w[0] < w[1]));
            proptest::prop_assert!(a.first_emission.iter().all(|&t| t < frames));
        }
    }
}
