//! Label encoder (causal, token embedding plus residual causal-convolution
//! layers) and label decoder (linear map + softmax).

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{axpy, softmax, DenseMatrix, GradBuffer, ParamId, ParamStore};

/// Convolution taps: the current token and the two before it.
pub const CAUSAL_WIDTH: usize = 3;

#[derive(Debug, Clone)]
struct CausalLayer {
    taps: [ParamId; CAUSAL_WIDTH],
    bias: ParamId,
}

/// `h⁰ᵢ = E[wᵢ]`, `hˡᵢ = hˡ⁻¹ᵢ + tanh(Σⱼ hˡ⁻¹ᵢ₋ⱼ Wˡⱼ + bˡ)`; output `z = hᴷ`.
#[derive(Debug, Clone)]
pub struct LabelEncoder {
    embed: ParamId,
    layers: Vec<CausalLayer>,
    dim: usize,
    vocab: usize,
}

#[derive(Debug, Clone)]
pub struct LabelEncoderCache {
    /// `h⁰ … hᴷ`, each `|W| x D`.
    hidden: Vec<DenseMatrix>,
    /// tanh outputs per layer.
    activations: Vec<DenseMatrix>,
}

impl LabelEncoderCache {
    pub fn output(&self) -> &DenseMatrix {
        self.hidden.last().expect("at least the embedding layer")
    }
}

impl LabelEncoder {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        vocab: usize,
        dim: usize,
        layers: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if vocab == 0 || dim == 0 {
            return Err(Error::Config("label encoder needs a charset and D > 0".into()));
        }
        let embed = store.register(
            "label_encoder.embed",
            DenseMatrix::randn(vocab, dim, 1.0 / (dim as f64).sqrt(), rng),
        )?;
        let tap_std = 0.5 / ((CAUSAL_WIDTH * dim) as f64).sqrt();
        let layers = (0..layers)
            .map(|l| {
                let mut taps = Vec::with_capacity(CAUSAL_WIDTH);
                for j in 0..CAUSAL_WIDTH {
                    taps.push(store.register(
                        format!("label_encoder.l{l}.w{j}"),
                        DenseMatrix::randn(dim, dim, tap_std, rng),
                    )?);
                }
                let bias =
                    store.register(format!("label_encoder.l{l}.b"), DenseMatrix::zeros(1, dim))?;
                Ok(CausalLayer {
                    taps: taps.try_into().expect("CAUSAL_WIDTH taps"),
                    bias,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embed,
            layers,
            dim,
            vocab,
        })
    }

    pub fn attach(store: &ParamStore, vocab: usize, dim: usize, layers: usize) -> Result<Self> {
        let lookup = |name: String| {
            store
                .id(&name)
                .ok_or_else(|| Error::Data(format!("missing parameter {name}")))
        };
        let embed = lookup("label_encoder.embed".into())?;
        let layers = (0..layers)
            .map(|l| {
                let taps = [
                    lookup(format!("label_encoder.l{l}.w0"))?,
                    lookup(format!("label_encoder.l{l}.w1"))?,
                    lookup(format!("label_encoder.l{l}.w2"))?,
                ];
                let bias = lookup(format!("label_encoder.l{l}.b"))?;
                Ok(CausalLayer { taps, bias })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embed,
            layers,
            dim,
            vocab,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        std::iter::once(self.embed).chain(
            self.layers
                .iter()
                .flat_map(|l| l.taps.iter().copied().chain(std::iter::once(l.bias))),
        )
    }

    pub fn forward(&self, store: &ParamStore, tokens: &[usize]) -> Result<LabelEncoderCache> {
        let embed = store.value(self.embed);
        let n = tokens.len();
        let mut h = DenseMatrix::zeros(n, self.dim);
        for (i, &tok) in tokens.iter().enumerate() {
            if tok >= self.vocab {
                return Err(Error::Input(format!(
                    "token {tok} outside charset of {}",
                    self.vocab
                )));
            }
            h.row_mut(i).copy_from_slice(embed.row(tok));
        }
        let mut hidden = vec![h];
        let mut activations = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = hidden.last().expect("non-empty");
            let mut pre = DenseMatrix::zeros(n, self.dim);
            for (j, &tap) in layer.taps.iter().enumerate() {
                if j >= n {
                    break;
                }
                let w = store.value(tap);
                for i in j..n {
                    let src = prev.row(i - j);
                    let dst = pre.row_mut(i);
                    for (k, &x) in src.iter().enumerate() {
                        if x != 0.0 {
                            axpy(dst, x, w.row(k));
                        }
                    }
                }
            }
            pre.add_row_broadcast(store.value(layer.bias).data());
            pre.map_inplace(f64::tanh);
            let mut next = prev.clone();
            next.add_scaled(&pre, 1.0)?;
            activations.push(pre);
            hidden.push(next);
        }
        Ok(LabelEncoderCache {
            hidden,
            activations,
        })
    }

    /// Accumulate gradients for `dz` (gradient at the encoder output).
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &LabelEncoderCache,
        tokens: &[usize],
        dz: &DenseMatrix,
        grads: &mut GradBuffer,
    ) -> Result<()> {
        let n = tokens.len();
        let mut dh = dz.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let prev = &cache.hidden[l];
            let act = &cache.activations[l];
            let mut da = dh.clone();
            for (g, &a) in da.data_mut().iter_mut().zip(act.data()) {
                *g *= 1.0 - a * a;
            }
            // Residual path passes dh through unchanged.
            let mut dprev = dh;
            for (j, &tap) in layer.taps.iter().enumerate() {
                if j >= n {
                    break;
                }
                let w = store.value(tap);
                let gw = grads.get_mut(tap);
                for i in j..n {
                    let src = prev.row(i - j);
                    let g = da.row(i);
                    for (k, &x) in src.iter().enumerate() {
                        if x != 0.0 {
                            axpy(gw.row_mut(k), x, g);
                        }
                    }
                    let d = dprev.row_mut(i - j);
                    for (k, dk) in d.iter_mut().enumerate() {
                        *dk += crate::numerics::dot(w.row(k), g);
                    }
                }
            }
            grads.add(layer.bias, &da.sum_rows())?;
            dh = dprev;
        }
        let ge = grads.get_mut(self.embed);
        for (i, &tok) in tokens.iter().enumerate() {
            axpy(ge.row_mut(tok), 1.0, dh.row(i));
        }
        Ok(())
    }
}

/// Linear map from an embedding to charset logits.
#[derive(Debug, Clone)]
pub struct LabelDecoder {
    weight: ParamId,
    bias: ParamId,
    dim: usize,
}

impl LabelDecoder {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dim: usize,
        vocab: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.register(
            "label_decoder.w",
            DenseMatrix::randn(dim, vocab, 1.0 / (dim as f64).sqrt(), rng),
        )?;
        let bias = store.register("label_decoder.b", DenseMatrix::zeros(1, vocab))?;
        Ok(Self { weight, bias, dim })
    }

    pub fn attach(store: &ParamStore, dim: usize) -> Result<Self> {
        let weight = store
            .id("label_decoder.w")
            .ok_or_else(|| Error::Data("missing parameter label_decoder.w".into()))?;
        let bias = store
            .id("label_decoder.b")
            .ok_or_else(|| Error::Data("missing parameter label_decoder.b".into()))?;
        Ok(Self { weight, bias, dim })
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> {
        [self.weight, self.bias].into_iter()
    }

    pub fn logits(&self, store: &ParamStore, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim {
            return Err(Error::Input(format!(
                "decoder input has dim {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        let w = store.value(self.weight);
        let mut out = store.value(self.bias).data().to_vec();
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(&mut out, xk, w.row(k));
            }
        }
        Ok(out)
    }

    /// Per-token distributions over the charset.
    pub fn distributions(&self, store: &ParamStore, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter()
            .map(|x| self.logits(store, x).map(|l| softmax(&l)))
            .collect()
    }

    /// Most likely token; ties go to the lowest index.
    pub fn argmax(&self, store: &ParamStore, x: &[f64]) -> Result<usize> {
        let logits = self.logits(store, x)?;
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Accumulate parameter gradients for logit gradient `g` at input `x`
    /// and return the gradient with respect to `x`.
    pub fn backward(
        &self,
        store: &ParamStore,
        x: &[f64],
        g: &[f64],
        grads: &mut GradBuffer,
    ) -> Vec<f64> {
        let gw = grads.get_mut(self.weight);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                axpy(gw.row_mut(k), xk, g);
            }
        }
        axpy(grads.get_mut(self.bias).data_mut(), 1.0, g);
        let w = store.value(self.weight);
        (0..self.dim)
            .map(|k| crate::numerics::dot(w.row(k), g))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{dot, grad_check, softmax_xent};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(layers: usize) -> (ParamStore, LabelEncoder) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let enc = LabelEncoder::register(&mut store, 5, 3, layers, &mut rng).unwrap();
        (store, enc)
    }

    #[test]
    fn no_layers_is_an_embedding_lookup() {
        let (store, enc) = encoder(0);
        let z = enc.forward(&store, &[2, 0]).unwrap();
        let embed = store.value(store.id("label_encoder.embed").unwrap());
        assert_eq!(z.output().row(0), embed.row(2));
        assert_eq!(z.output().row(1), embed.row(0));
    }

    #[test]
    fn unknown_token_rejected() {
        let (store, enc) = encoder(1);
        assert!(matches!(enc.forward(&store, &[5]), Err(Error::Input(_))));
    }

    #[test]
    fn encoder_backward_matches_finite_differences() {
        let (mut store, enc) = encoder(2);
        let tokens = [1, 3, 3, 0];
        let probe = DenseMatrix::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect())
            .unwrap();
        let loss = |s: &ParamStore| dot(enc.forward(s, &tokens).unwrap().output().data(), probe.data());
        let cache = enc.forward(&store, &tokens).unwrap();
        let mut grads = store.grad_buffer();
        enc.backward(&store, &cache, &tokens, &probe, &mut grads).unwrap();
        store.accumulate(&grads, 1.0).unwrap();
        let report = grad_check(loss, &store, 1e-5, 1e-5).unwrap();
        assert!(report.passed(), "max rel {}", report.max_rel_error());
    }

    #[test]
    fn decoder_backward_matches_finite_differences() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dec = LabelDecoder::register(&mut store, 3, 4, &mut rng).unwrap();
        let x = [0.4, -0.3, 1.1];
        let (_, g) = softmax_xent(&dec.logits(&store, &x).unwrap(), 2).unwrap();
        let mut grads = store.grad_buffer();
        dec.backward(&store, &x, &g, &mut grads);
        store.accumulate(&grads, 1.0).unwrap();
        let loss = |s: &ParamStore| softmax_xent(&dec.logits(s, &x).unwrap(), 2).unwrap().0;
        let report = grad_check(loss, &store, 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "max rel {}", report.max_rel_error());
    }

    #[test]
    fn decoder_fixtures() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dec = LabelDecoder::register(&mut store, 2, 4, &mut rng).unwrap();
        let w = store.id("label_decoder.w").unwrap();
        store.set_value(w, DenseMatrix::zeros(2, 4)).unwrap();
        let d = dec.distributions(&store, &[vec![3.0, -1.0]]).unwrap();
        assert!(d[0].iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!(dec.distributions(&store, &[]).unwrap().is_empty());
        assert!(matches!(dec.logits(&store, &[1.0]), Err(Error::Input(_))));

        // Column 3 reads the first input coordinate.
        let mut sel = DenseMatrix::zeros(2, 4);
        sel.set(0, 3, 20.0);
        store.set_value(w, sel).unwrap();
        let d = dec.distributions(&store, &[vec![1.0, 0.0]]).unwrap();
        assert!(d[0][3] > 0.999_99);
        assert_eq!(dec.argmax(&store, &[1.0, 0.0]).unwrap(), 3);
        assert_eq!(dec.argmax(&store, &[0.0, 0.0]).unwrap(), 0);
    }

    proptest! {
        #[test]
        fn encoder_is_causal(
            tokens in proptest::collection::vec(0usize..5, 1..8),
            pos in 0usize..8,
            replacement in 0usize..5,
        ) {
            let (store, enc) = encoder(2);
            let j = pos % tokens.len();
            let mut changed = tokens.clone();
            changed[j] = replacement;
            let a = enc.forward(&store, &tokens).unwrap();
            let b = enc.forward(&store, &changed).unwrap();
            for i in 0..j {
                prop_assert_eq!(a.output().row(i), b.output().row(i));
            }
        }
    }
}
