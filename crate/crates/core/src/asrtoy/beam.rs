//! CTC prefix beam search.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::numerics::{log_add, log_softmax, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub tokens: Vec<u32>,
    /// Log probability of the prefix summed over its alignments.
    pub log_score: f64,
}

#[derive(Clone, Copy)]
struct Scores {
    blank: f64,
    non_blank: f64,
}

impl Scores {
    const EMPTY: Scores = Scores {
        blank: f64::NEG_INFINITY,
        non_blank: f64::NEG_INFINITY,
    };

    fn total(&self) -> f64 {
        log_add(self.blank, self.non_blank)
    }
}

/// Keep the `width` best prefixes; equal scores keep the lexicographically
/// smaller token sequence.
fn prune(beams: BTreeMap<Vec<u32>, Scores>, width: usize) -> Vec<(Vec<u32>, Scores)> {
    let mut v: Vec<_> = beams.into_iter().filter(|(_, s)| s.total() > f64::NEG_INFINITY).collect();
    v.sort_by(|a, b| b.1.total().total_cmp(&a.1.total()).then_with(|| a.0.cmp(&b.0)));
    v.truncate(width);
    v
}

/// Prefix beam search over per-frame logits whose last column is blank.
/// At each frame only the `beam_width` most likely non-blank tokens are
/// considered for extension.
pub fn ctc_prefix_beam_search(logits: &DenseMatrix, beam_width: usize, n_best: usize) -> Vec<Hypothesis> {
    let width = beam_width.max(1);
    let blank = logits.cols().saturating_sub(1);
    let mut beams = vec![(
        Vec::new(),
        Scores {
            blank: 0.0,
            non_blank: f64::NEG_INFINITY,
        },
    )];
    for t in 0..logits.rows() {
        let lp = log_softmax(logits.row(t));
        let mut candidates: Vec<usize> = (0..blank).collect();
        if candidates.len() > width {
            candidates.sort_by(|&a, &b| lp[b].total_cmp(&lp[a]).then(a.cmp(&b)));
            candidates.truncate(width);
        }
        let mut next: BTreeMap<Vec<u32>, Scores> = BTreeMap::new();
        for (prefix, s) in &beams {
            let total = s.total();
            let e = next.entry(prefix.clone()).or_insert(Scores::EMPTY);
            e.blank = log_add(e.blank, total + lp[blank]);
            for &c in &candidates {
                let p = lp[c];
                let c = c as u32;
                let mut extended = prefix.clone();
                extended.push(c);
                if prefix.last() == Some(&c) {
                    // Repeat without a blank in between collapses.
                    let e = next.entry(prefix.clone()).or_insert(Scores::EMPTY);
                    e.non_blank = log_add(e.non_blank, s.non_blank + p);
                    let e = next.entry(extended).or_insert(Scores::EMPTY);
                    e.non_blank = log_add(e.non_blank, s.blank + p);
                } else {
                    let e = next.entry(extended).or_insert(Scores::EMPTY);
                    e.non_blank = log_add(e.non_blank, total + p);
                }
            }
        }
        beams = prune(next, width);
    }
    beams
        .into_iter()
        .take(n_best.max(1))
        .map(|(tokens, s)| Hypothesis {
            tokens,
            log_score: s.total(),
        })
        .collect()
}
