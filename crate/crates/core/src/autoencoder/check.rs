//! Finite-difference checks of every routed loss gradient on a small
//! random fixture.
//!
//! The quantization loss stops gradients, so its oracles freeze the
//! stopped quantities: the residual inputs for the codebook part and the
//! chosen embeddings for the commitment part.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{AcousticSettings, AutoEncoderModel, LossWeights, ModelConfig};
use crate::charset::Charset;
use crate::error::Result;
use crate::numerics::{axpy, grad_check_filtered, squared_distance, DenseMatrix, GradCheckReport, ParamStore};

/// Gradient check of one loss term over one parameter group.
#[derive(Debug, Clone, Serialize)]
pub struct TermCheck {
    pub term: &'static str,
    pub params: &'static str,
    pub report: GradCheckReport,
}

type Batch = Vec<(Vec<usize>, Option<DenseMatrix>)>;

/// Three-utterance fixture: charset `abc`, N=2, M=3, D=4, 14 random frames
/// of dimension 3 per utterance.
pub fn fixture(seed: u64) -> Result<(AutoEncoderModel, Batch)> {
    let charset = Charset::new("abc".chars().collect())?;
    let config = ModelConfig {
        dim: 4,
        encoder_layers: 1,
        levels: 2,
        codebook_size: 3,
        beta: 0.25,
        acoustic: Some(AcousticSettings {
            feature_dim: 3,
            context: 1,
            hidden: 5,
            hidden_layers: 1,
        }),
    };
    let model = AutoEncoderModel::new(charset, config, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(4));
    let batch = [vec![0, 1, 2], vec![2, 2, 1], vec![1, 0, 0]]
        .into_iter()
        .map(|t| (t, Some(DenseMatrix::randn(14, 3, 1.0, &mut rng))))
        .collect();
    Ok((model, batch))
}

fn only(f: impl Fn(&mut LossWeights)) -> LossWeights {
    let mut w = LossWeights::zero();
    f(&mut w);
    w
}

pub fn loss_gradient_checks(seed: u64, epsilon: f64, tolerance: f64) -> Result<Vec<TermCheck>> {
    let (base, batch) = fixture(seed)?;
    let mut out = Vec::new();

    let direct: [(&'static str, &'static str, LossWeights, &[&str]); 3] = [
        ("label_ce", "label_decoder", only(|w| w.label_ce = 1.0), &["label_decoder."]),
        (
            "acoustic_ce",
            "label_decoder+acoustic_encoder",
            only(|w| w.acoustic_ce = 1.0),
            &["label_decoder.", "acoustic_encoder."],
        ),
        ("ctc", "acoustic_encoder", only(|w| w.ctc = 1.0), &["acoustic_encoder."]),
    ];
    for (term, params, w, prefixes) in direct {
        let mut model = base.clone();
        model.compute_gradients(&batch, &w)?;
        let loss = |s: &ParamStore| model.batch_loss_in(s, &batch, &w).map_or(f64::NAN, |l| l.total);
        let report = grad_check_filtered(loss, model.params(), epsilon, tolerance, |n| {
            prefixes.iter().any(|p| n.starts_with(p))
        })?;
        out.push(TermCheck { term, params, report });
    }

    let w = only(|w| w.vq = 1.0);
    let mut model = base.clone();
    model.compute_gradients(&batch, &w)?;
    let codec = model.codec()?;
    let frozen = batch
        .iter()
        .map(|(t, _)| model.label_encode(t).map(|e| e.quantized))
        .collect::<Result<Vec<_>>>()?;
    let n_utt = batch.len() as f64;

    let codebook_loss = |s: &ParamStore| {
        let mut total = 0.0;
        for q_utt in &frozen {
            let inv = 1.0 / q_utt.len() as f64;
            for q in q_utt {
                for (sym, r) in q.symbols.iter().zip(&q.residual_inputs) {
                    let e = s.value(model.codebook_ids()[sym.level]).row(sym.index);
                    total += squared_distance(r, e) * inv;
                }
            }
        }
        total / n_utt
    };
    let report = grad_check_filtered(codebook_loss, model.params(), epsilon, tolerance, |n| {
        n.starts_with("codebook.")
    })?;
    out.push(TermCheck {
        term: "vq",
        params: "codebooks",
        report,
    });

    let encoder = model.label_encoder();
    let commitment_loss = |s: &ParamStore| {
        let mut total = 0.0;
        for ((tokens, _), q_utt) in batch.iter().zip(&frozen) {
            let Ok(cache) = encoder.forward(s, tokens) else {
                return f64::NAN;
            };
            let z = cache.output();
            let inv = 1.0 / tokens.len() as f64;
            for (i, q) in q_utt.iter().enumerate() {
                let mut r = z.row(i).to_vec();
                for sym in &q.symbols {
                    let e = codec.embedding(*sym);
                    total += codec.beta() * squared_distance(&r, e) * inv;
                    axpy(&mut r, -1.0, e);
                }
            }
        }
        total / n_utt
    };
    let report = grad_check_filtered(commitment_loss, model.params(), epsilon, tolerance, |n| {
        n.starts_with("label_encoder.")
    })?;
    out.push(TermCheck {
        term: "vq",
        params: "label_encoder",
        report,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_routed_gradient_matches() {
        let checks = loss_gradient_checks(9, 1e-6, 1e-4).unwrap();
        assert_eq!(checks.len(), 5);
        for c in &checks {
            assert!(!c.report.entries.is_empty(), "{} {}", c.term, c.params);
            assert!(c.report.passed(), "{} {}: max rel {}", c.term, c.params, c.report.max_rel_error());
        }
    }
}
