use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{AutoEncoderModel, LossBreakdown, LossWeights, ModelConfig};
use crate::charset::Charset;
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, OptimizerConfig};
use crate::quantizer::{
    dead_code_restart, kmeans_warm_start, DeadCodeTracker, LatentSymbol, LevelUtilization,
    RestartConfig, UsageHistogram,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub weights: LossWeights,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Seed the codebooks with k-means over the initial encoder outputs.
    pub kmeans_init: bool,
    pub kmeans_iters: usize,
    pub restart: RestartConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            weights: LossWeights::default(),
            optimizer: OptimizerConfig::adam(3e-3),
            epochs: 20,
            batch_size: 16,
            kmeans_init: true,
            kmeans_iters: 10,
            restart: RestartConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub utilization: Vec<LevelUtilization>,
    pub ctc_skipped: usize,
    pub restarted: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: Vec<EpochReport>,
}

impl TrainingReport {
    pub fn final_loss(&self) -> Option<LossBreakdown> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Train an auto-encoder on `corpus` (one utterance per entry) with
/// optional per-utterance acoustic features. The charset is built from the
/// corpus unless one is supplied.
pub fn train_autoencoder(
    corpus: &[String],
    features: Option<&[DenseMatrix]>,
    charset: Option<Charset>,
    config: &TrainConfig,
) -> Result<(AutoEncoderModel, TrainingReport)> {
    if corpus.is_empty() {
        return Err(Error::Data("training corpus is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    config.optimizer.validate()?;
    if let Some(f) = features {
        if f.len() != corpus.len() {
            return Err(Error::Data(format!(
                "{} utterances but {} feature sequences",
                corpus.len(),
                f.len()
            )));
        }
    }
    let mut model_config = config.model.clone();
    match (features.and_then(|f| f.first()), model_config.acoustic) {
        (Some(f), Some(a)) if a.feature_dim != f.cols() => {
            return Err(Error::Data(format!(
                "features have dimension {}, model expects {}",
                f.cols(),
                a.feature_dim
            )))
        }
        (None, Some(_)) => model_config.acoustic = None,
        (Some(_), None) => {
            return Err(Error::Config("features given but no acoustic settings".into()))
        }
        _ => {}
    }
    let charset = charset.unwrap_or_else(|| Charset::from_lines(corpus.iter().map(String::as_str)));
    let tokens = corpus
        .iter()
        .enumerate()
        .map(|(line, text)| charset.encode(text, line + 1))
        .collect::<Result<Vec<_>>>()?;

    let mut model = AutoEncoderModel::new(charset, model_config, config.seed)?;
    if config.kmeans_init {
        warm_start(&mut model, &tokens, config)?;
    }

    let levels = model.config().levels;
    let size = model.config().codebook_size;
    let mut tracker = DeadCodeTracker::new(levels, size);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut report = TrainingReport::default();

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut hist = UsageHistogram::new(levels, size);
        let mut recent: Vec<Vec<Vec<f64>>> = vec![Vec::new(); levels];
        let mut sums = [0.0; 4];
        let mut seen = 0usize;
        let mut skipped = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<usize>, Option<DenseMatrix>)> = chunk
                .iter()
                .map(|&i| (tokens[i].clone(), features.map(|f| f[i].clone())))
                .collect();
            let (loss, outcomes) = model.train_step(&batch, &config.weights, &config.optimizer)?;
            let b = chunk.len() as f64;
            sums[0] += loss.ce_label * b;
            sums[1] += loss.ce_acoustic * b;
            sums[2] += loss.ctc * b;
            sums[3] += loss.vq * b;
            seen += chunk.len();
            for (o, &i) in outcomes.iter().zip(chunk) {
                hist.record(&o.symbols);
                if o.ctc_skipped {
                    skipped += 1;
                    warn!("utterance {i}: too few frames for CTC, acoustic terms skipped");
                }
                for (level, r) in o.residuals.iter().enumerate() {
                    recent[level].extend(r.iter().cloned());
                }
            }
        }
        let n = seen as f64;
        let loss = LossBreakdown::weighted(
            sums[0] / n,
            sums[1] / n,
            sums[2] / n,
            sums[3] / n,
            &config.weights,
        );
        tracker.observe_epoch(&hist);
        let restarted = if config.restart.enabled {
            let mut codec = model.codec()?;
            let cfg = RestartConfig {
                seed: config.restart.seed.wrapping_add(epoch as u64),
                ..config.restart
            };
            let reset: Vec<LatentSymbol> = dead_code_restart(&mut codec, &mut tracker, &recent, &cfg);
            model.set_codec(&codec)?;
            reset.len()
        } else {
            0
        };
        let utilization = hist.stats();
        info!(
            "epoch {epoch}: total={:.4} ce_label={:.4} ce_acoustic={:.4} ctc={:.4} vq={:.4} active={:?} restarted={restarted}",
            loss.total,
            loss.ce_label,
            loss.ce_acoustic,
            loss.ctc,
            loss.vq,
            utilization.iter().map(|u| u.active_codes).collect::<Vec<_>>()
        );
        report.epochs.push(EpochReport {
            epoch,
            loss,
            utilization,
            ctc_skipped: skipped,
            restarted,
        });
    }
    Ok((model, report))
}

fn warm_start(model: &mut AutoEncoderModel, tokens: &[Vec<usize>], config: &TrainConfig) -> Result<()> {
    let mut inputs = Vec::new();
    for t in tokens {
        let enc = model.label_encode(t)?;
        for i in 0..enc.z.rows() {
            inputs.push(enc.z.row(i).to_vec());
        }
    }
    let mut codec = model.codec()?;
    kmeans_warm_start(&mut codec, &inputs, config.kmeans_iters, config.seed.wrapping_add(7));
    model.set_codec(&codec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(epochs: usize) -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                dim: 8,
                encoder_layers: 1,
                levels: 2,
                codebook_size: 8,
                ..ModelConfig::default()
            },
            optimizer: OptimizerConfig::adam(0.02),
            epochs,
            batch_size: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn memorizes_a_single_utterance() {
        let corpus = vec!["abcab".to_string()];
        let (model, report) = train_autoencoder(&corpus, None, None, &small_config(150)).unwrap();
        let loss = report.final_loss().unwrap();
        assert!(loss.ce_label < 0.05, "{loss:?}");
        assert_eq!(loss.ctc, 0.0);
        assert!(!model.has_acoustic());
    }

    #[test]
    fn residual_norm_shrinks_with_level() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let corpus: Vec<String> =
            (0..40).map(|_| (0..rng.random_range(2..7)).map(|_| rng.random_range('a'..='h')).collect()).collect();
        let mut cfg = small_config(40);
        cfg.model.levels = 3;
        let (model, _) = train_autoencoder(&corpus, None, None, &cfg).unwrap();
        // norms[k] collects |r_k| for k = 0..=levels; r_levels is the final residual.
        let mut norms = vec![Vec::new(); 4];
        for _ in 0..40 {
            let tokens: Vec<usize> = (0..rng.random_range(1..8)).map(|_| rng.random_range(0..8)).collect();
            let enc = model.label_encode(&tokens).unwrap();
            for (i, q) in enc.quantized.iter().enumerate() {
                let z = enc.z.row(i);
                for (k, r) in q.residual_inputs.iter().enumerate() {
                    norms[k].push(r.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
                let last: f64 = z.iter().zip(&q.reconstruction).map(|(a, b)| (a - b) * (a - b)).sum();
                norms[3].push(last.sqrt());
            }
        }
        let medians: Vec<f64> = norms
            .iter_mut()
            .map(|v| {
                v.sort_by(f64::total_cmp);
                v[v.len() / 2]
            })
            .collect();
        assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
    }

    #[test]
    fn same_seed_same_checkpoint() {
        let corpus: Vec<String> = ["hello", "world", "held"].iter().map(|s| s.to_string()).collect();
        let cfg = small_config(3);
        let (a, _) = train_autoencoder(&corpus, None, None, &cfg).unwrap();
        let (b, _) = train_autoencoder(&corpus, None, None, &cfg).unwrap();
        assert_eq!(a.params().snapshot(), b.params().snapshot());
    }

    #[test]
    fn report_has_utilization_per_epoch() {
        let corpus: Vec<String> = ["ab", "ba", "abc"].iter().map(|s| s.to_string()).collect();
        let (_, report) = train_autoencoder(&corpus, None, None, &small_config(4)).unwrap();
        assert_eq!(report.epochs.len(), 4);
        assert!(report.epochs.iter().all(|e| e.utilization.len() == 2));
    }

    #[test]
    fn feature_count_mismatch_is_data_error() {
        let corpus = vec!["ab".to_string(), "ba".to_string()];
        let feats = vec![DenseMatrix::zeros(8, 3)];
        let mut cfg = small_config(1);
        cfg.model.acoustic = Some(super::super::model::AcousticSettings::new(3));
        let err = train_autoencoder(&corpus, Some(&feats), None, &cfg).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn trains_with_features() {
        let corpus = vec!["ab".to_string(), "ba".to_string(), "a".to_string()];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let feats: Vec<DenseMatrix> =
            (0..3).map(|_| DenseMatrix::randn(12, 3, 1.0, &mut rng)).collect();
        let mut cfg = small_config(2);
        cfg.model.acoustic = Some(super::super::model::AcousticSettings::new(3));
        let (model, report) = train_autoencoder(&corpus, Some(&feats), None, &cfg).unwrap();
        assert!(model.has_acoustic());
        assert!(report.final_loss().unwrap().ctc > 0.0);
    }
}
