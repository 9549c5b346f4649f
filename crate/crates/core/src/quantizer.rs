//! Vector quantization bottleneck: nearest-codeword lookup, residual
//! quantization across several codebooks, the codebook/commitment loss and
//! its gradient routing, plus codebook health diagnostics.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{axpy, squared_distance, DenseMatrix};

pub const DEFAULT_BETA: f64 = 0.25;

/// One discrete code: a codebook level and a row index within it.
///
/// The flat id `level * M + index` keeps the level recoverable from the
/// id alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatentSymbol {
    pub level: usize,
    pub index: usize,
}

impl LatentSymbol {
    pub fn new(level: usize, index: usize) -> Self {
        Self { level, index }
    }

    pub fn id(&self, codebook_size: usize) -> u32 {
        (self.level * codebook_size + self.index) as u32
    }

    pub fn from_id(id: u32, codebook_size: usize, levels: usize) -> Result<Self> {
        let id = id as usize;
        if id >= codebook_size * levels {
            return Err(Error::Input(format!(
                "symbol id {id} outside 0..{}",
                codebook_size * levels
            )));
        }
        Ok(Self {
            level: id / codebook_size,
            index: id % codebook_size,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub level: usize,
    pub embeddings: DenseMatrix,
}

impl Codebook {
    pub fn size(&self) -> usize {
        self.embeddings.rows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        self.embeddings.row(index)
    }

    /// Nearest row by squared Euclidean distance; ties go to the lowest
    /// index.
    pub fn nearest(&self, z: &[f64]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for i in 0..self.size() {
            let d = squared_distance(z, self.row(i));
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Residual quantizer: `N` codebooks of `M` rows in `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqCodec {
    codebooks: Vec<Codebook>,
    beta: f64,
}

impl RvqCodec {
    pub fn new(codebooks: Vec<DenseMatrix>, beta: f64) -> Result<Self> {
        let first = codebooks
            .first()
            .ok_or_else(|| Error::Config("at least one codebook is required".into()))?;
        let (m, d) = first.shape();
        if m == 0 || d == 0 {
            return Err(Error::Config("codebooks must be non-empty".into()));
        }
        for (k, cb) in codebooks.iter().enumerate() {
            if cb.shape() != (m, d) {
                return Err(Error::Shape(format!(
                    "codebook {k} is {:?}, expected {:?}",
                    cb.shape(),
                    (m, d)
                )));
            }
            if !cb.is_finite() {
                return Err(Error::Numeric(format!("codebook {k}")));
            }
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {beta}")));
        }
        Ok(Self {
            codebooks: codebooks
                .into_iter()
                .enumerate()
                .map(|(level, embeddings)| Codebook { level, embeddings })
                .collect(),
            beta,
        })
    }

    /// Seeded Gaussian rows with standard deviation `1/sqrt(D)`.
    pub fn random(levels: usize, size: usize, dim: usize, beta: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 1.0 / (dim as f64).sqrt();
        let books = (0..levels)
            .map(|_| DenseMatrix::randn(size, dim, std, &mut rng))
            .collect();
        Self::new(books, beta)
    }

    pub fn levels(&self) -> usize {
        self.codebooks.len()
    }

    pub fn codebook_size(&self) -> usize {
        self.codebooks[0].size()
    }

    pub fn dim(&self) -> usize {
        self.codebooks[0].dim()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Number of distinct latent symbols, `N * M`.
    pub fn vocab_size(&self) -> usize {
        self.levels() * self.codebook_size()
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn codebook_mut(&mut self, level: usize) -> &mut DenseMatrix {
        &mut self.codebooks[level].embeddings
    }

    pub fn embedding(&self, s: LatentSymbol) -> &[f64] {
        self.codebooks[s.level].row(s.index)
    }

    pub fn symbol(&self, id: u32) -> Result<LatentSymbol> {
        LatentSymbol::from_id(id, self.codebook_size(), self.levels())
    }

    /// Codebook level of a flat symbol id.
    pub fn level_of(&self, id: u32) -> Result<usize> {
        self.symbol(id).map(|s| s.level)
    }
}

/// Output of a single-codebook quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct VqOutput {
    pub symbol: LatentSymbol,
    pub embedding: Vec<f64>,
    pub loss: f64,
}

/// `‖sg[z] − e‖² + β‖z − sg[e]‖²` against the nearest row.
pub fn vq_quantize(z: &[f64], codebook: &Codebook, beta: f64) -> Result<VqOutput> {
    if z.len() != codebook.dim() {
        return Err(Error::Shape(format!(
            "input of dim {} for codebook of dim {}",
            z.len(),
            codebook.dim()
        )));
    }
    if !z.iter().all(|x| x.is_finite()) {
        return Err(Error::Input("non-finite quantizer input".into()));
    }
    let (index, dist) = codebook.nearest(z);
    Ok(VqOutput {
        symbol: LatentSymbol::new(codebook.level, index),
        embedding: codebook.row(index).to_vec(),
        loss: (1.0 + beta) * dist,
    })
}

/// Result of residual quantization of one vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeResult {
    /// One symbol per level, in level order.
    pub symbols: Vec<LatentSymbol>,
    /// Sum of the chosen embeddings.
    pub reconstruction: Vec<f64>,
    /// Sum of the per-level losses.
    pub vq_loss: f64,
    /// The vector each level quantized: `z` minus earlier embeddings.
    pub residual_inputs: Vec<Vec<f64>>,
    /// Forward value handed downstream. Equal to `reconstruction`; its
    /// gradient is copied unchanged to `z` by [`straight_through_backward`].
    pub straight_through_output: Vec<f64>,
}

pub fn rvq_quantize(z: &[f64], codec: &RvqCodec) -> Result<QuantizeResult> {
    let mut residual = z.to_vec();
    let mut reconstruction = vec![0.0; z.len()];
    let mut symbols = Vec::with_capacity(codec.levels());
    let mut residual_inputs = Vec::with_capacity(codec.levels());
    let mut vq_loss = 0.0;
    for cb in &codec.codebooks {
        let out = vq_quantize(&residual, cb, codec.beta)?;
        residual_inputs.push(residual.clone());
        axpy(&mut residual, -1.0, &out.embedding);
        axpy(&mut reconstruction, 1.0, &out.embedding);
        vq_loss += out.loss;
        symbols.push(out.symbol);
    }
    Ok(QuantizeResult {
        symbols,
        straight_through_output: reconstruction.clone(),
        reconstruction,
        vq_loss,
        residual_inputs,
    })
}

/// Gradient delivered to the quantizer input by a downstream loss: an
/// exact copy of the gradient at the reconstruction.
pub fn straight_through_backward(grad_at_reconstruction: &[f64]) -> Vec<f64> {
    grad_at_reconstruction.to_vec()
}

/// Gradients of the quantization loss with the assignment held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct VqLossGrad {
    /// Codebook term gradient `2(e − r)` for each chosen row.
    pub rows: Vec<(LatentSymbol, Vec<f64>)>,
    /// Commitment term gradient with respect to `z`.
    pub input: Vec<f64>,
}

/// Backward pass of `scale * vq_loss`.
///
/// The codebook term only reaches the chosen row; the commitment term only
/// reaches the input. Each residual is treated as `z` minus constants, so
/// every level's commitment gradient `2β(r − e)` lands on `z` directly.
pub fn vq_loss_backward(result: &QuantizeResult, codec: &RvqCodec, scale: f64) -> VqLossGrad {
    let beta = codec.beta;
    let mut input = vec![0.0; result.reconstruction.len()];
    let mut rows = Vec::with_capacity(result.symbols.len());
    for (s, r) in result.symbols.iter().zip(&result.residual_inputs) {
        let e = codec.embedding(*s);
        let g_row: Vec<f64> = e.iter().zip(r).map(|(e, r)| scale * 2.0 * (e - r)).collect();
        for ((gi, ri), ei) in input.iter_mut().zip(r).zip(e) {
            *gi += scale * 2.0 * beta * (ri - ei);
        }
        rows.push((*s, g_row));
    }
    VqLossGrad { rows, input }
}

/// Codebook term `‖r − e‖²` (gradient flows to `e` only).
pub fn codebook_term(r: &[f64], e: &[f64]) -> f64 {
    squared_distance(r, e)
}

/// Commitment term `β‖r − e‖²` (gradient flows to `r` only).
pub fn commitment_term(r: &[f64], e: &[f64], beta: f64) -> f64 {
    beta * squared_distance(r, e)
}

/// Usage of one codebook level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelUtilization {
    pub level: usize,
    pub active_codes: usize,
    /// `exp(entropy)` of the normalized histogram; `None` when the level
    /// was never used.
    pub perplexity: Option<f64>,
}

/// Per-level active code counts and perplexities from usage counts
/// (`histogram[level][index]`).
pub fn utilization_stats(histogram: &[Vec<u64>]) -> Vec<LevelUtilization> {
    histogram
        .iter()
        .enumerate()
        .map(|(level, counts)| {
            let total: u64 = counts.iter().sum();
            let active_codes = counts.iter().filter(|&&c| c > 0).count();
            let perplexity = (total > 0).then(|| {
                let t = total as f64;
                let entropy: f64 = counts
                    .iter()
                    .filter(|&&c| c > 0)
                    .map(|&c| {
                        let p = c as f64 / t;
                        -p * p.ln()
                    })
                    .sum();
                entropy.exp()
            });
            LevelUtilization {
                level,
                active_codes,
                perplexity,
            }
        })
        .collect()
}

/// Usage counts for every level of a codec.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageHistogram {
    pub counts: Vec<Vec<u64>>,
}

impl UsageHistogram {
    pub fn new(levels: usize, size: usize) -> Self {
        Self {
            counts: vec![vec![0; size]; levels],
        }
    }

    pub fn record(&mut self, symbols: &[LatentSymbol]) {
        for s in symbols {
            self.counts[s.level][s.index] += 1;
        }
    }

    pub fn stats(&self) -> Vec<LevelUtilization> {
        utilization_stats(&self.counts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartConfig {
    pub enabled: bool,
    /// Consecutive idle epochs before a row is reset.
    pub threshold: u32,
    pub seed: u64,
}

impl Default for RestartConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            threshold: 2,
            seed: 0,
        }
    }
}

/// Consecutive idle-epoch counters per codebook row.
#[derive(Debug, Clone, PartialEq)]
pub struct DeadCodeTracker {
    idle: Vec<Vec<u32>>,
}

impl DeadCodeTracker {
    pub fn new(levels: usize, size: usize) -> Self {
        Self {
            idle: vec![vec![0; size]; levels],
        }
    }

    /// Fold in one epoch of usage.
    pub fn observe_epoch(&mut self, histogram: &UsageHistogram) {
        for (idle, counts) in self.idle.iter_mut().zip(&histogram.counts) {
            for (i, &c) in idle.iter_mut().zip(counts) {
                *i = if c == 0 { *i + 1 } else { 0 };
            }
        }
    }

    pub fn dead_rows(&self, threshold: u32) -> Vec<LatentSymbol> {
        let mut out = Vec::new();
        for (level, idle) in self.idle.iter().enumerate() {
            for (index, &n) in idle.iter().enumerate() {
                if n >= threshold {
                    out.push(LatentSymbol::new(level, index));
                }
            }
        }
        out
    }
}

/// Reset rows idle for `threshold` epochs to randomly chosen recent inputs
/// of the same level (`recent_inputs[level]`). Returns the reset rows.
pub fn dead_code_restart(
    codec: &mut RvqCodec,
    tracker: &mut DeadCodeTracker,
    recent_inputs: &[Vec<Vec<f64>>],
    config: &RestartConfig,
) -> Vec<LatentSymbol> {
    if !config.enabled {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut reset = Vec::new();
    for s in tracker.dead_rows(config.threshold) {
        let Some(pool) = recent_inputs.get(s.level).filter(|p| !p.is_empty()) else {
            continue;
        };
        let pick = pool.choose(&mut rng).expect("non-empty");
        if pick.len() != codec.dim() {
            continue;
        }
        codec.codebook_mut(s.level).row_mut(s.index).copy_from_slice(pick);
        tracker.idle[s.level][s.index] = 0;
        reset.push(s);
    }
    reset
}

/// Initialize codebooks level by level with k-means over `inputs`, each
/// level clustering the residuals left by the previous ones.
///
/// Rows get k-means++ seeds then `iters` Lloyd iterations. If fewer
/// distinct inputs than rows exist, the remaining rows keep their values.
pub fn kmeans_warm_start(codec: &mut RvqCodec, inputs: &[Vec<f64>], iters: usize, seed: u64) {
    if inputs.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residuals: Vec<Vec<f64>> = inputs.to_vec();
    for level in 0..codec.levels() {
        let m = codec.codebook_size();
        let centroids = kmeans(&residuals, m, iters, &mut rng);
        for (i, c) in centroids.iter().enumerate() {
            codec.codebook_mut(level).row_mut(i).copy_from_slice(c);
        }
        let cb = &codec.codebooks[level];
        for r in &mut residuals {
            let (idx, _) = cb.nearest(r);
            axpy(r, -1.0, cb.row(idx));
        }
    }
}

fn kmeans<R: Rng>(points: &[Vec<f64>], k: usize, iters: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = points[pick].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }

    let dim = points[0].len();
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; dim]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for p in points {
            let (best, _) = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, squared_distance(p, c)))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            axpy(&mut sums[best], 1.0, p);
            counts[best] += 1;
        }
        for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
    }
    centroids
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codec(books: &[&[[f64; 2]]], beta: f64) -> RvqCodec {
        let mats = books
            .iter()
            .map(|rows| {
                DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        RvqCodec::new(mats, beta).unwrap()
    }

    #[test]
    fn latent_symbol_ids() {
        let s = LatentSymbol::new(2, 5);
        assert_eq!(s.id(16), 37);
        assert_eq!(LatentSymbol::from_id(37, 16, 3).unwrap(), s);
        assert!(LatentSymbol::from_id(48, 16, 3).is_err());
    }

    #[test]
    fn exact_match_has_zero_loss() {
        let c = codec(&[&[[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [5.0, -1.0]]], 0.25);
        let out = vq_quantize(&[5.0, -1.0], &c.codebooks()[0], 0.25).unwrap();
        assert_eq!(out.symbol.index, 3);
        assert_eq!(out.loss, 0.0);
    }

    #[test]
    fn loss_combines_both_terms() {
        let c = codec(&[&[[0.0, 0.0], [3.0, 0.0]]], 0.25);
        let out = vq_quantize(&[1.0, 0.0], &c.codebooks()[0], 0.25).unwrap();
        assert_eq!(out.symbol.index, 0);
        assert!((out.loss - 1.25).abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let c = codec(&[&[[0.0, 0.0], [2.0, 0.0]]], 0.25);
        let out = vq_quantize(&[1.0, 0.0], &c.codebooks()[0], 0.25).unwrap();
        assert_eq!(out.symbol.index, 0);
    }

    #[test]
    fn non_finite_input_rejected() {
        let c = codec(&[&[[0.0, 0.0]]], 0.25);
        assert!(vq_quantize(&[f64::NAN, 0.0], &c.codebooks()[0], 0.25).is_err());
        assert!(vq_quantize(&[0.0], &c.codebooks()[0], 0.25).is_err());
    }

    #[test]
    fn residual_trace() {
        let c = codec(&[&[[1.0, 0.0], [-1.0, 0.0]], &[[0.5, 0.0], [0.0, 0.0]]], 0.25);
        let r = rvq_quantize(&[1.5, 0.0], &c).unwrap();
        assert_eq!(r.symbols, vec![LatentSymbol::new(0, 0), LatentSymbol::new(1, 0)]);
        assert_eq!(r.reconstruction, vec![1.5, 0.0]);
        // Level 0 leaves [0.5, 0]; level 1 absorbs it exactly.
        assert!((r.vq_loss - 0.5f64.powi(2) * 1.25).abs() < 1e-12);
        let last = &r.residual_inputs[1];
        assert_eq!(squared_distance(last, c.codebooks()[1].row(0)), 0.0);
        assert_eq!(r.straight_through_output, r.reconstruction);
    }

    #[test]
    fn single_level_matches_vq() {
        let c = RvqCodec::random(1, 8, 4, 0.25, 3).unwrap();
        let z = [0.3, -0.2, 0.9, 0.1];
        let a = rvq_quantize(&z, &c).unwrap();
        let b = vq_quantize(&z, &c.codebooks()[0], 0.25).unwrap();
        assert_eq!(a.symbols, vec![b.symbol]);
        assert_eq!(a.reconstruction, b.embedding);
        assert_eq!(a.vq_loss, b.loss);
    }

    #[test]
    fn utilization_examples() {
        let m = 16;
        let uniform = utilization_stats(&[vec![3; m]]);
        assert_eq!(uniform[0].active_codes, m);
        assert!((uniform[0].perplexity.unwrap() - m as f64).abs() < 1e-9);

        let mut single = vec![0; m];
        single[4] = 10;
        let s = utilization_stats(&[single]);
        assert_eq!(s[0].active_codes, 1);
        assert!((s[0].perplexity.unwrap() - 1.0).abs() < 1e-12);

        let half: Vec<u64> = (0..m).map(|i| if i % 2 == 0 { 7 } else { 0 }).collect();
        let h = utilization_stats(&[half]);
        assert!((h[0].perplexity.unwrap() - (m / 2) as f64).abs() < 1e-9);

        let empty = utilization_stats(&[vec![0; m]]);
        assert_eq!(empty[0].active_codes, 0);
        assert!(empty[0].perplexity.is_none());
    }

    #[test]
    fn restart_disabled_is_noop() {
        let mut c = RvqCodec::random(1, 4, 2, 0.25, 1).unwrap();
        let before = c.clone();
        let mut t = DeadCodeTracker::new(1, 4);
        t.observe_epoch(&UsageHistogram::new(1, 4));
        let reset = dead_code_restart(&mut c, &mut t, &[vec![vec![9.0, 9.0]]], &RestartConfig {
            enabled: false,
            threshold: 1,
            seed: 0,
        });
        assert!(reset.is_empty());
        assert_eq!(c, before);
    }

    #[test]
    fn restart_resets_only_dead_rows() {
        let mut c = RvqCodec::random(1, 3, 2, 0.25, 1).unwrap();
        let before = c.clone();
        let mut t = DeadCodeTracker::new(1, 3);
        let mut h = UsageHistogram::new(1, 3);
        h.counts[0] = vec![4, 0, 2];
        t.observe_epoch(&h);
        let cfg = RestartConfig {
            enabled: true,
            threshold: 1,
            seed: 11,
        };
        let reset = dead_code_restart(&mut c, &mut t, &[vec![vec![9.0, -9.0]]], &cfg);
        assert_eq!(reset, vec![LatentSymbol::new(0, 1)]);
        assert_eq!(c.codebooks()[0].row(1), &[9.0, -9.0]);
        assert_eq!(c.codebooks()[0].row(0), before.codebooks()[0].row(0));
        assert_eq!(c.codebooks()[0].row(2), before.codebooks()[0].row(2));

        // Nothing idle any more.
        let mut again = c.clone();
        h.counts[0] = vec![1, 1, 1];
        t.observe_epoch(&h);
        assert!(dead_code_restart(&mut again, &mut t, &[vec![vec![0.0, 0.0]]], &cfg).is_empty());
        assert_eq!(again, c);
    }

    #[test]
    fn kmeans_recovers_separated_clusters() {
        let pts: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let base = if i % 2 == 0 { 5.0 } else { -5.0 };
                vec![base + (i as f64) * 1e-3, 0.0]
            })
            .collect();
        let mut c = RvqCodec::random(1, 2, 2, 0.25, 0).unwrap();
        kmeans_warm_start(&mut c, &pts, 5, 9);
        let mut xs: Vec<f64> = (0..2).map(|i| c.codebooks()[0].row(i)[0]).collect();
        xs.sort_by(f64::total_cmp);
        assert!((xs[0] + 5.0).abs() < 0.1 && (xs[1] - 5.0).abs() < 0.1);
    }

    proptest! {
        #[test]
        fn nearest_matches_exhaustive(
            seed in 0u64..1000,
            z in prop::collection::vec(-2.0f64..2.0, 3),
        ) {
            let c = RvqCodec::random(1, 9, 3, 0.25, seed).unwrap();
            let out = vq_quantize(&z, &c.codebooks()[0], 0.25).unwrap();
            let dists: Vec<f64> = (0..9).map(|i| squared_distance(&z, c.codebooks()[0].row(i))).collect();
            let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            let first = dists.iter().position(|&d| d == min).unwrap();
            prop_assert_eq!(out.symbol.index, first);
        }

        #[test]
        fn reconstruction_is_sum_of_embeddings(seed in 0u64..500) {
            let c = RvqCodec::random(3, 5, 4, 0.25, seed).unwrap();
            let z = [0.4, -0.1, 0.7, 0.2];
            let r = rvq_quantize(&z, &c).unwrap();
            let mut sum = vec![0.0; 4];
            for s in &r.symbols {
                axpy(&mut sum, 1.0, c.embedding(*s));
            }
            for (a, b) in sum.iter().zip(&r.reconstruction) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            prop_assert!(r.vq_loss >= 0.0);
        }
    }
}
