//! The auto-encoder: label encoder → residual quantizer → label decoder,
//! with an acoustic encoder trained by CTC against the label encoder's
//! symbols and feeding the decoder through posterior-weighted embeddings.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::acoustic::{AcousticNet, AcousticNetConfig};
use super::ctc::{ctc_align_first_emission, ctc_loss, min_frames};
use super::label::{LabelDecoder, LabelEncoder};
use crate::charset::Charset;
use crate::error::{Error, Result};
use crate::numerics::{
    axpy, dot, optimizer_step, softmax, softmax_xent, DenseMatrix, GradBuffer, OptimizerConfig,
    ParamId, ParamStore,
};
use crate::quantizer::{
    rvq_quantize, straight_through_backward, vq_loss_backward, LatentSymbol, QuantizeResult,
    RvqCodec, DEFAULT_BETA,
};

/// Weights of the four loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Decoder cross-entropy from the label encoder's quantized embeddings.
    pub label_ce: f64,
    /// Decoder cross-entropy from the acoustic posterior mixture.
    pub acoustic_ce: f64,
    pub ctc: f64,
    pub vq: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            label_ce: 1.0,
            acoustic_ce: 1.0,
            ctc: 1.0,
            vq: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            label_ce: 0.0,
            acoustic_ce: 0.0,
            ctc: 0.0,
            vq: 0.0,
        }
    }
}

/// Term values of one step (means over the batch) and their weighted sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce_label: f64,
    pub ce_acoustic: f64,
    pub ctc: f64,
    pub vq: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn weighted(ce_label: f64, ce_acoustic: f64, ctc: f64, vq: f64, w: &LossWeights) -> Self {
        Self {
            ce_label,
            ce_acoustic,
            ctc,
            vq,
            total: w.label_ce * ce_label + w.acoustic_ce * ce_acoustic + w.ctc * ctc + w.vq * vq,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.ce_label, self.ce_acoustic, self.ctc, self.vq, self.total]
            .iter()
            .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcousticSettings {
    pub feature_dim: usize,
    pub context: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
}

impl AcousticSettings {
    pub fn new(feature_dim: usize) -> Self {
        Self {
            feature_dim,
            context: 2,
            hidden: 64,
            hidden_layers: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding dimension D.
    pub dim: usize,
    pub encoder_layers: usize,
    /// Number of codebooks N.
    pub levels: usize,
    /// Rows per codebook M.
    pub codebook_size: usize,
    pub beta: f64,
    pub acoustic: Option<AcousticSettings>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            encoder_layers: 2,
            levels: 3,
            codebook_size: 256,
            beta: DEFAULT_BETA,
            acoustic: None,
        }
    }
}

impl ModelConfig {
    pub fn acoustic_net(&self) -> Option<AcousticNetConfig> {
        self.acoustic.map(|a| AcousticNetConfig {
            feature_dim: a.feature_dim,
            context: a.context,
            hidden: a.hidden,
            hidden_layers: a.hidden_layers,
            output_dim: self.levels * self.codebook_size + 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.levels == 0 || self.codebook_size == 0 {
            return Err(Error::Config("D, N and M must all be positive".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        Ok(())
    }
}

pub(crate) fn codebook_name(level: usize) -> String {
    format!("codebook.{level}")
}

/// Label encoder output for one sequence.
#[derive(Debug, Clone)]
pub struct LabelEncoding {
    /// Pre-quantization vectors, `|W| x D`.
    pub z: DenseMatrix,
    pub quantized: Vec<QuantizeResult>,
}

impl LabelEncoding {
    /// Level-ordered symbols: token 1 levels 0..N, then token 2, ...
    pub fn symbols(&self) -> Vec<LatentSymbol> {
        self.quantized.iter().flat_map(|q| q.symbols.iter().copied()).collect()
    }

    pub fn ids(&self, codebook_size: usize) -> Vec<u32> {
        self.symbols().iter().map(|s| s.id(codebook_size)).collect()
    }
}

/// Per-utterance term values plus what the trainer needs for diagnostics.
#[derive(Debug, Clone, Default)]
pub struct UtteranceOutcome {
    pub ce_label: f64,
    pub ce_acoustic: f64,
    pub ctc: f64,
    pub vq: f64,
    /// CTC could not align (too few frames); acoustic terms were skipped.
    pub ctc_skipped: bool,
    pub symbols: Vec<LatentSymbol>,
    /// `residuals[level]` holds the vectors that level quantized.
    pub residuals: Vec<Vec<Vec<f64>>>,
}

/// Mixture `Σ_q P(q | x) e(q)` over the rows of one codebook level, with
/// the posterior renormalized over that level's logits (blank excluded).
/// Returns the mixture and the posterior.
pub fn acoustic_embedding_mixture(
    logits: &[f64],
    codec: &RvqCodec,
    level: usize,
) -> (Vec<f64>, Vec<f64>) {
    let m = codec.codebook_size();
    let probs = softmax(&logits[level * m..(level + 1) * m]);
    let cb = &codec.codebooks()[level];
    let mut mix = vec![0.0; codec.dim()];
    for (q, &p) in probs.iter().enumerate() {
        axpy(&mut mix, p, cb.row(q));
    }
    (mix, probs)
}

#[derive(Debug, Clone)]
pub struct AutoEncoderModel {
    config: ModelConfig,
    charset: Charset,
    params: ParamStore,
    encoder: LabelEncoder,
    decoder: LabelDecoder,
    acoustic: Option<AcousticNet>,
    codebooks: Vec<ParamId>,
}

impl AutoEncoderModel {
    pub fn new(charset: Charset, config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        if charset.is_empty() {
            return Err(Error::Config("charset is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let encoder = LabelEncoder::register(
            &mut params,
            charset.len(),
            config.dim,
            config.encoder_layers,
            &mut rng,
        )?;
        let decoder = LabelDecoder::register(&mut params, config.dim, charset.len(), &mut rng)?;
        let codec = RvqCodec::random(
            config.levels,
            config.codebook_size,
            config.dim,
            config.beta,
            seed.wrapping_add(1),
        )?;
        let codebooks = codec
            .codebooks()
            .iter()
            .map(|cb| params.register(codebook_name(cb.level), cb.embeddings.clone()))
            .collect::<Result<Vec<_>>>()?;
        let acoustic = match config.acoustic_net() {
            Some(cfg) => Some(AcousticNet::register(
                &mut params,
                "acoustic_encoder",
                cfg,
                &mut rng,
            )?),
            None => None,
        };
        Ok(Self {
            config,
            charset,
            params,
            encoder,
            decoder,
            acoustic,
            codebooks,
        })
    }

    /// Rebuild a model around an existing parameter store.
    pub fn from_params(charset: Charset, config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let encoder =
            LabelEncoder::attach(&params, charset.len(), config.dim, config.encoder_layers)?;
        let decoder = LabelDecoder::attach(&params, config.dim)?;
        let codebooks = (0..config.levels)
            .map(|k| {
                params
                    .id(&codebook_name(k))
                    .ok_or_else(|| Error::Data(format!("missing {}", codebook_name(k))))
            })
            .collect::<Result<Vec<_>>>()?;
        let acoustic = match config.acoustic_net() {
            Some(cfg) => Some(AcousticNet::attach(&params, "acoustic_encoder", cfg)?),
            None => None,
        };
        Ok(Self {
            config,
            charset,
            params,
            encoder,
            decoder,
            acoustic,
            codebooks,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn charset(&self) -> &Charset {
        &self.charset
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn label_encoder_ids(&self) -> Vec<ParamId> {
        self.encoder.param_ids().collect()
    }

    pub fn label_decoder_ids(&self) -> Vec<ParamId> {
        self.decoder.param_ids().collect()
    }

    pub fn acoustic_ids(&self) -> Vec<ParamId> {
        self.acoustic.iter().flat_map(|a| a.param_ids()).collect()
    }

    pub fn codebook_ids(&self) -> &[ParamId] {
        &self.codebooks
    }

    pub(crate) fn label_encoder(&self) -> &LabelEncoder {
        &self.encoder
    }

    pub fn has_acoustic(&self) -> bool {
        self.acoustic.is_some()
    }

    /// Snapshot of the codebooks held in `store`.
    pub fn codec_in(&self, store: &ParamStore) -> Result<RvqCodec> {
        RvqCodec::new(
            self.codebooks.iter().map(|&id| store.value(id).clone()).collect(),
            self.config.beta,
        )
    }

    pub fn codec(&self) -> Result<RvqCodec> {
        self.codec_in(&self.params)
    }

    /// Write codebook rows back into the parameter store.
    pub fn set_codec(&mut self, codec: &RvqCodec) -> Result<()> {
        for (&id, cb) in self.codebooks.iter().zip(codec.codebooks()) {
            self.params.set_value(id, cb.embeddings.clone())?;
        }
        Ok(())
    }

    pub fn label_encode(&self, tokens: &[usize]) -> Result<LabelEncoding> {
        let codec = self.codec()?;
        encode_with(&self.encoder, &self.params, &codec, tokens)
    }

    pub fn label_decode(&self, embeddings: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.decoder.distributions(&self.params, embeddings)
    }

    pub fn acoustic_logits(&self, frames: &DenseMatrix) -> Result<DenseMatrix> {
        let ac = self
            .acoustic
            .as_ref()
            .ok_or_else(|| Error::Config("model has no acoustic encoder".into()))?;
        ac.logits(&self.params, frames)
    }

    /// Loss terms for one utterance evaluated with `store`; optionally
    /// accumulates `scale`-weighted gradients into `grads`.
    pub fn utterance_pass(
        &self,
        store: &ParamStore,
        codec: &RvqCodec,
        tokens: &[usize],
        frames: Option<&DenseMatrix>,
        weights: &LossWeights,
        scale: f64,
        mut grads: Option<&mut GradBuffer>,
    ) -> Result<UtteranceOutcome> {
        let n = tokens.len();
        let levels = codec.levels();
        let m = codec.codebook_size();
        let mut out = UtteranceOutcome {
            residuals: vec![Vec::new(); levels],
            ..Default::default()
        };
        if n == 0 {
            return Ok(out);
        }
        let cache = self.encoder.forward(store, tokens)?;
        let z = cache.output();
        let quantized = (0..n)
            .map(|i| rvq_quantize(z.row(i), codec))
            .collect::<Result<Vec<_>>>()?;
        let inv_n = 1.0 / n as f64;
        let mut dz = DenseMatrix::zeros(n, codec.dim());

        // Decoder on the label encoder's quantized embeddings.
        for (i, q) in quantized.iter().enumerate() {
            let logits = self.decoder.logits(store, &q.straight_through_output)?;
            let (loss, mut g) = softmax_xent(&logits, tokens[i])?;
            out.ce_label += loss * inv_n;
            if let Some(grads) = grads.as_deref_mut() {
                if weights.label_ce != 0.0 {
                    g.iter_mut().for_each(|x| *x *= weights.label_ce * scale * inv_n);
                    let dx = self.decoder.backward(store, &q.straight_through_output, &g, grads);
                    axpy(dz.row_mut(i), 1.0, &straight_through_backward(&dx));
                }
            }
        }

        // Quantization loss.
        for (i, q) in quantized.iter().enumerate() {
            out.vq += q.vq_loss * inv_n;
            if let Some(grads) = grads.as_deref_mut() {
                if weights.vq != 0.0 {
                    let vg = vq_loss_backward(q, codec, weights.vq * scale * inv_n);
                    for (s, g) in &vg.rows {
                        axpy(grads.get_mut(self.codebooks[s.level]).row_mut(s.index), 1.0, g);
                    }
                    axpy(dz.row_mut(i), 1.0, &vg.input);
                }
            }
        }

        for q in &quantized {
            out.symbols.extend_from_slice(&q.symbols);
            for (level, r) in q.residual_inputs.iter().enumerate() {
                out.residuals[level].push(r.clone());
            }
        }

        if let (Some(frames), Some(ac)) = (frames, self.acoustic.as_ref()) {
            let targets: Vec<u32> = out.symbols.iter().map(|s| s.id(m)).collect();
            if frames.rows() < min_frames(&targets) {
                out.ctc_skipped = true;
            } else {
                let ac_cache = ac.forward(store, frames)?;
                let logits = &ac_cache.logits;
                let ctc = ctc_loss(logits, &targets)?;
                let inv_len = 1.0 / targets.len() as f64;
                out.ctc = ctc.loss * inv_len;
                let align = ctc_align_first_emission(logits, &targets)?;
                let mut dlogits = DenseMatrix::zeros(logits.rows(), logits.cols());
                let want_ac_grads = weights.ctc != 0.0 || weights.acoustic_ce != 0.0;
                if weights.ctc != 0.0 {
                    dlogits.add_scaled(&ctc.grad, weights.ctc * scale * inv_len)?;
                }
                for (i, &tok) in tokens.iter().enumerate() {
                    let mut input = vec![0.0; codec.dim()];
                    let mut posteriors = Vec::with_capacity(levels);
                    for level in 0..levels {
                        let t = align.first_emission[i * levels + level];
                        let (mix, probs) = acoustic_embedding_mixture(logits.row(t), codec, level);
                        axpy(&mut input, 1.0, &mix);
                        posteriors.push((t, probs));
                    }
                    let dec_logits = self.decoder.logits(store, &input)?;
                    let (loss, mut g) = softmax_xent(&dec_logits, tok)?;
                    out.ce_acoustic += loss * inv_n;
                    let Some(grads) = grads.as_deref_mut() else { continue };
                    if weights.acoustic_ce == 0.0 {
                        continue;
                    }
                    g.iter_mut().for_each(|x| *x *= weights.acoustic_ce * scale * inv_n);
                    let dinput = self.decoder.backward(store, &input, &g, grads);
                    for (level, (t, probs)) in posteriors.iter().enumerate() {
                        let cb = &codec.codebooks()[level];
                        let dprob: Vec<f64> = (0..m).map(|q| dot(&dinput, cb.row(q))).collect();
                        let mean = dot(probs, &dprob);
                        let row = &mut dlogits.row_mut(*t)[level * m..(level + 1) * m];
                        for q in 0..m {
                            row[q] += probs[q] * (dprob[q] - mean);
                        }
                    }
                }
                if let Some(grads) = grads.as_deref_mut() {
                    if want_ac_grads {
                        ac.backward(store, &ac_cache, &dlogits, grads)?;
                    }
                }
            }
        }

        if let Some(grads) = grads {
            if weights.label_ce != 0.0 || weights.vq != 0.0 {
                self.encoder.backward(store, &cache, tokens, &dz, grads)?;
            }
        }
        Ok(out)
    }

    /// Weighted batch loss evaluated with an arbitrary store (no gradients).
    pub fn batch_loss_in(
        &self,
        store: &ParamStore,
        batch: &[(Vec<usize>, Option<DenseMatrix>)],
        weights: &LossWeights,
    ) -> Result<LossBreakdown> {
        let codec = self.codec_in(store)?;
        let mut sums = [0.0; 4];
        for (tokens, frames) in batch {
            let o = self.utterance_pass(store, &codec, tokens, frames.as_ref(), weights, 1.0, None)?;
            sums[0] += o.ce_label;
            sums[1] += o.ce_acoustic;
            sums[2] += o.ctc;
            sums[3] += o.vq;
        }
        let b = batch.len().max(1) as f64;
        Ok(LossBreakdown::weighted(
            sums[0] / b,
            sums[1] / b,
            sums[2] / b,
            sums[3] / b,
            weights,
        ))
    }

    /// Zero the gradients, then accumulate the batch gradient into the store.
    /// Returns the breakdown and per-utterance outcomes.
    pub fn compute_gradients(
        &mut self,
        batch: &[(Vec<usize>, Option<DenseMatrix>)],
        weights: &LossWeights,
    ) -> Result<(LossBreakdown, Vec<UtteranceOutcome>)> {
        if batch.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        self.params.zero_grads();
        let codec = self.codec()?;
        let scale = 1.0 / batch.len() as f64;
        let mut grads = self.params.grad_buffer();
        let mut outcomes = Vec::with_capacity(batch.len());
        let mut sums = [0.0; 4];
        for (tokens, frames) in batch {
            let o = self.utterance_pass(
                &self.params,
                &codec,
                tokens,
                frames.as_ref(),
                weights,
                scale,
                Some(&mut grads),
            )?;
            sums[0] += o.ce_label * scale;
            sums[1] += o.ce_acoustic * scale;
            sums[2] += o.ctc * scale;
            sums[3] += o.vq * scale;
            outcomes.push(o);
        }
        self.params.accumulate(&grads, 1.0)?;
        let breakdown = LossBreakdown::weighted(sums[0], sums[1], sums[2], sums[3], weights);
        Ok((breakdown, outcomes))
    }

    /// One optimization step over `batch`.
    pub fn train_step(
        &mut self,
        batch: &[(Vec<usize>, Option<DenseMatrix>)],
        weights: &LossWeights,
        optimizer: &OptimizerConfig,
    ) -> Result<(LossBreakdown, Vec<UtteranceOutcome>)> {
        let (breakdown, outcomes) = self.compute_gradients(batch, weights)?;
        if !breakdown.is_finite() {
            return Err(Error::Numeric(format!(
                "loss terms ce_label={} ce_acoustic={} ctc={} vq={}",
                breakdown.ce_label, breakdown.ce_acoustic, breakdown.ctc, breakdown.vq
            )));
        }
        optimizer_step(&mut self.params, optimizer)?;
        Ok((breakdown, outcomes))
    }
}

pub(crate) fn encode_with(
    encoder: &LabelEncoder,
    store: &ParamStore,
    codec: &RvqCodec,
    tokens: &[usize],
) -> Result<LabelEncoding> {
    let cache = encoder.forward(store, tokens)?;
    let z = cache.output().clone();
    let quantized = (0..tokens.len())
        .map(|i| rvq_quantize(z.row(i), codec))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelEncoding { z, quantized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fixture(levels: usize, acoustic: bool) -> AutoEncoderModel {
        let charset = Charset::new("abc".chars().collect()).unwrap();
        let config = ModelConfig {
            dim: 4,
            encoder_layers: 1,
            levels,
            codebook_size: 3,
            beta: 0.25,
            acoustic: acoustic.then_some(AcousticSettings {
                feature_dim: 3,
                context: 1,
                hidden: 5,
                hidden_layers: 1,
            }),
        };
        AutoEncoderModel::new(charset, config, 9).unwrap()
    }

    fn batch(frames: usize) -> Vec<(Vec<usize>, Option<DenseMatrix>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        [vec![0, 1, 2], vec![2, 2, 1], vec![1, 0, 0]]
            .into_iter()
            .map(|t| {
                let f = DenseMatrix::randn(frames, 3, 1.0, &mut rng);
                (t, Some(f))
            })
            .collect()
    }

    fn only(f: impl Fn(&mut LossWeights)) -> LossWeights {
        let mut w = LossWeights::zero();
        f(&mut w);
        w
    }

    fn with_grads(w: &LossWeights) -> AutoEncoderModel {
        let mut model = fixture(2, true);
        model.compute_gradients(&batch(14), w).unwrap();
        model
    }

    fn all_zero(model: &AutoEncoderModel, ids: &[ParamId]) -> bool {
        ids.iter()
            .all(|&id| model.params().grad(id).data().iter().all(|&g| g == 0.0))
    }

    #[test]
    fn gradient_flow_contract() {
        let m = with_grads(&only(|w| w.label_ce = 1.0));
        assert!(all_zero(&m, &m.acoustic_ids()));
        assert!(!all_zero(&m, &m.label_encoder_ids()));

        let m = with_grads(&only(|w| w.ctc = 1.0));
        assert!(all_zero(&m, &m.label_encoder_ids()));
        assert!(all_zero(&m, &m.label_decoder_ids()));
        assert!(all_zero(&m, m.codebook_ids()));
        assert!(!all_zero(&m, &m.acoustic_ids()));

        let m = with_grads(&only(|w| w.acoustic_ce = 1.0));
        assert!(all_zero(&m, &m.label_encoder_ids()));
        assert!(all_zero(&m, m.codebook_ids()));
    }

    #[test]
    fn zero_weights_leave_parameters_unchanged() {
        let mut model = fixture(2, true);
        let before = model.params().snapshot();
        let opt = OptimizerConfig::adam(0.1);
        let (loss, _) = model.train_step(&batch(14), &LossWeights::zero(), &opt).unwrap();
        assert_eq!(loss.total, 0.0);
        assert_eq!(model.params().snapshot(), before);
    }

    #[test]
    fn total_is_weighted_sum() {
        let model = fixture(2, true);
        let w = LossWeights {
            label_ce: 0.3,
            acoustic_ce: 0.5,
            ctc: 2.0,
            vq: 1.5,
        };
        let l = model.batch_loss_in(model.params(), &batch(14), &w).unwrap();
        let expect = 0.3 * l.ce_label + 0.5 * l.ce_acoustic + 2.0 * l.ctc + 1.5 * l.vq;
        assert!((l.total - expect).abs() < 1e-12);
        assert!(l.is_finite());
    }

    #[test]
    fn short_utterances_skip_acoustic_terms() {
        let model = fixture(2, true);
        let codec = model.codec().unwrap();
        let frames = DenseMatrix::zeros(3, 3);
        let o = model
            .utterance_pass(model.params(), &codec, &[0, 1], Some(&frames), &LossWeights::default(), 1.0, None)
            .unwrap();
        assert!(o.ctc_skipped);
        assert_eq!(o.ctc, 0.0);
        assert!(o.ce_label > 0.0);
    }

    #[test]
    fn label_encode_shapes() {
        let model = fixture(3, false);
        let enc = model.label_encode(&[]).unwrap();
        assert!(enc.symbols().is_empty());
        let enc = model.label_encode(&[0, 1, 2, 1]).unwrap();
        assert_eq!(enc.symbols().len(), 12);
        let levels: Vec<usize> = enc.symbols().iter().map(|s| s.level).collect();
        assert_eq!(&levels[..6], &[0, 1, 2, 0, 1, 2]);
        assert!(matches!(model.label_encode(&[3]), Err(Error::Input(_))));
    }

    #[test]
    fn label_encode_hand_fixture() {
        let charset = Charset::new(vec!['x']).unwrap();
        let config = ModelConfig {
            dim: 2,
            encoder_layers: 0,
            levels: 2,
            codebook_size: 3,
            ..ModelConfig::default()
        };
        let mut model = AutoEncoderModel::new(charset, config, 0).unwrap();
        let embed = model.params().id("label_encoder.embed").unwrap();
        model
            .params_mut()
            .set_value(embed, DenseMatrix::from_rows(&[vec![0.9, 0.1]]).unwrap())
            .unwrap();
        let codec = RvqCodec::new(
            vec![
                DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap(),
                DenseMatrix::from_rows(&[vec![0.0, 0.2], vec![-0.1, 0.1], vec![0.0, 0.0]]).unwrap(),
            ],
            0.25,
        )
        .unwrap();
        model.set_codec(&codec).unwrap();
        // z = [0.9, 0.1] → row 0 of level 0, residual [-0.1, 0.1] → row 1.
        let enc = model.label_encode(&[0]).unwrap();
        assert_eq!(enc.ids(3), vec![0, 4]);
    }

    #[test]
    fn mixture_fixtures() {
        let codec = RvqCodec::new(
            vec![DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()],
            0.25,
        )
        .unwrap();
        let (mix, probs) = acoustic_embedding_mixture(&[0.0, 0.0, 5.0], &codec, 0);
        assert_eq!(probs, vec![0.5, 0.5]);
        assert_eq!(mix, vec![0.5, 0.5]);
        let (mix, _) = acoustic_embedding_mixture(&[0.0, -1e9, 0.0], &codec, 0);
        assert_eq!(mix, vec![1.0, 0.0]);
    }

    #[test]
    fn label_decode_normalizes() {
        let model = fixture(2, false);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        for d in model.label_decode(&xs).unwrap() {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(model.label_decode(&[vec![0.0; 3]]).is_err());
    }

    #[test]
    fn smoothed_loss_decreases_over_fifty_steps() {
        let mut model = fixture(2, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<(Vec<usize>, Option<DenseMatrix>)> = (0..10)
            .map(|i| {
                let tokens = vec![i % 3, (i / 3) % 3, (i + 1) % 3];
                (tokens, Some(DenseMatrix::randn(16, 3, 1.0, &mut rng)))
            })
            .collect();
        let opt = OptimizerConfig::adam(0.01);
        let w = LossWeights::default();
        let totals: Vec<f64> = (0..50)
            .map(|_| model.train_step(&data, &w, &opt).unwrap().0.total)
            .collect();
        let head: f64 = totals[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = totals[40..].iter().sum::<f64>() / 10.0;
        assert!(tail < head, "{head} -> {tail}");
    }
}
