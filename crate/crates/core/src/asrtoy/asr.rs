use std::collections::BTreeMap;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::beam::{ctc_prefix_beam_search, Hypothesis};
use crate::autoencoder::{ctc_loss, min_frames, AcousticNet, AcousticNetConfig};
use crate::error::{Error, Result};
use crate::numerics::{optimizer_step, DenseMatrix, OptimizerConfig, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsrConfig {
    pub context: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub beam_width: usize,
    pub seed: u64,
}

impl Default for AsrConfig {
    fn default() -> Self {
        Self {
            context: 3,
            hidden: 128,
            hidden_layers: 2,
            epochs: 12,
            batch_size: 8,
            optimizer: OptimizerConfig::adam(2e-3),
            beam_width: 8,
            seed: 0,
        }
    }
}

/// CTC acoustic model over a subword vocabulary; blank is the extra last
/// output.
#[derive(Debug, Clone)]
pub struct AsrModel {
    params: ParamStore,
    net: AcousticNet,
    vocab_size: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AsrTrainReport {
    /// Mean per-utterance CTC loss divided by target length, per epoch.
    pub epoch_losses: Vec<f64>,
    /// Utterances whose targets do not fit in their frames.
    pub skipped: usize,
}

impl AsrModel {
    pub fn new(feature_dim: usize, vocab_size: usize, config: &AsrConfig) -> Result<Self> {
        if vocab_size == 0 {
            return Err(Error::Config("empty output vocabulary".into()));
        }
        let mut params = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = AcousticNet::register(
            &mut params,
            "asr",
            AcousticNetConfig {
                feature_dim,
                context: config.context,
                hidden: config.hidden,
                hidden_layers: config.hidden_layers,
                output_dim: vocab_size + 1,
            },
            &mut rng,
        )?;
        Ok(Self {
            params,
            net,
            vocab_size,
        })
    }

    /// Rebuild a model from stored parameter values.
    pub fn from_snapshot(
        feature_dim: usize,
        vocab_size: usize,
        config: &AsrConfig,
        values: &BTreeMap<String, DenseMatrix>,
    ) -> Result<Self> {
        let mut model = Self::new(feature_dim, vocab_size, config)?;
        model.params.load_snapshot(values)?;
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn feature_dim(&self) -> usize {
        self.net.config().feature_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn logits(&self, frames: &DenseMatrix) -> Result<DenseMatrix> {
        self.net.logits(&self.params, frames)
    }

    pub fn decode(&self, frames: &DenseMatrix, beam_width: usize, n_best: usize) -> Result<Vec<Hypothesis>> {
        Ok(ctc_prefix_beam_search(&self.logits(frames)?, beam_width, n_best))
    }
}

pub fn train_asr(
    targets: &[Vec<u32>],
    features: &[DenseMatrix],
    vocab_size: usize,
    config: &AsrConfig,
) -> Result<(AsrModel, AsrTrainReport)> {
    if targets.len() != features.len() {
        return Err(Error::Data(format!(
            "{} target sequences but {} feature sequences",
            targets.len(),
            features.len()
        )));
    }
    let dim = features
        .first()
        .map(DenseMatrix::cols)
        .ok_or_else(|| Error::Data("no training utterances".into()))?;
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    config.optimizer.validate()?;
    if let Some(t) = targets.iter().flatten().find(|&&t| t as usize >= vocab_size) {
        return Err(Error::Input(format!("target {t} outside vocabulary of {vocab_size}")));
    }

    let usable: Vec<usize> = (0..targets.len())
        .filter(|&i| !targets[i].is_empty() && features[i].rows() >= min_frames(&targets[i]))
        .collect();
    let skipped = targets.len() - usable.len();
    if skipped > 0 {
        warn!("{skipped} utterances have targets longer than their frames allow; skipped");
    }
    let mut model = AsrModel::new(dim, vocab_size, config)?;
    let mut report = AsrTrainReport {
        skipped,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xa5a5);
    let mut order = usable;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grads = model.params.grad_buffer();
            for &i in chunk {
                let cache = model.net.forward(&model.params, &features[i])?;
                let out = ctc_loss(&cache.logits, &targets[i])?;
                let norm = 1.0 / targets[i].len() as f64;
                sum += out.loss * norm;
                let mut g = out.grad;
                g.map_inplace(|x| x * norm * scale);
                model.net.backward(&model.params, &cache, &g, &mut grads)?;
            }
            model.params.zero_grads();
            model.params.accumulate(&grads, 1.0)?;
            optimizer_step(&mut model.params, &config.optimizer)?;
        }
        let mean = sum / order.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!("asr epoch {epoch} loss {mean}")));
        }
        debug!("asr epoch {epoch}: ctc/token = {mean:.4}");
        report.epoch_losses.push(mean);
    }
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Three tokens, each rendered as two or three frames of a fixed
    /// prototype with a little noise.
    fn toy(n: usize, seed: u64) -> (Vec<Vec<u32>>, Vec<DenseMatrix>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let protos = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut targets = Vec::new();
        let mut feats = Vec::new();
        for _ in 0..n {
            let len = rng.random_range(1..5);
            let t: Vec<u32> = (0..len).map(|_| rng.random_range(0..3)).collect();
            let mut rows = Vec::new();
            for &s in &t {
                for _ in 0..rng.random_range(2..4) {
                    rows.push(protos[s as usize].iter().map(|x| x + rng.random_range(-0.1..0.1)).collect());
                }
                rows.push(vec![0.0; 3]);
            }
            targets.push(t);
            feats.push(DenseMatrix::from_rows(&rows).unwrap());
        }
        (targets, feats)
    }

    fn config() -> AsrConfig {
        AsrConfig {
            context: 1,
            hidden: 16,
            hidden_layers: 1,
            epochs: 30,
            batch_size: 4,
            optimizer: OptimizerConfig::adam(0.02),
            ..AsrConfig::default()
        }
    }

    #[test]
    fn learns_the_toy_task() {
        let (targets, feats) = toy(40, 1);
        let (model, report) = train_asr(&targets, &feats, 3, &config()).unwrap();
        let l = &report.epoch_losses;
        assert!(l[l.len() - 1] < l[0] * 0.5, "{l:?}");
        let (tt, tf) = toy(10, 2);
        let correct = tt
            .iter()
            .zip(&tf)
            .filter(|(t, f)| &model.decode(f, 4, 1).unwrap()[0].tokens == *t)
            .count();
        assert!(correct >= 8, "{correct}/10");
    }

    #[test]
    fn deterministic_and_validated() {
        let (targets, feats) = toy(8, 3);
        let mut cfg = config();
        cfg.epochs = 2;
        let (a, _) = train_asr(&targets, &feats, 3, &cfg).unwrap();
        let (b, _) = train_asr(&targets, &feats, 3, &cfg).unwrap();
        assert_eq!(a.params().snapshot(), b.params().snapshot());
        assert!(matches!(train_asr(&targets, &feats[1..], 3, &cfg), Err(Error::Data(_))));
        assert!(matches!(train_asr(&targets, &feats, 2, &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn infeasible_targets_are_counted() {
        let targets = vec![vec![0, 1, 2], vec![0]];
        let feats = vec![DenseMatrix::zeros(2, 3), DenseMatrix::zeros(2, 3)];
        let mut cfg = config();
        cfg.epochs = 1;
        let (_, report) = train_asr(&targets, &feats, 3, &cfg).unwrap();
        assert_eq!(report.skipped, 1);
    }
}
