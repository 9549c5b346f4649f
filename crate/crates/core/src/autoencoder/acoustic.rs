//! Per-frame acoustic network: stacked context frames through tanh hidden
//! layers to output logits. Shared by the auto-encoder and the toy ASR.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, GradBuffer, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcousticNetConfig {
    pub feature_dim: usize,
    /// Frames of context on each side.
    pub context: usize,
    pub hidden: usize,
    pub hidden_layers: usize,
    pub output_dim: usize,
}

impl AcousticNetConfig {
    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * self.feature_dim
    }
}

#[derive(Debug, Clone)]
pub struct AcousticNet {
    config: AcousticNetConfig,
    weights: Vec<ParamId>,
    biases: Vec<ParamId>,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AcousticCache {
    /// Layer inputs: stacked features, then each hidden activation.
    inputs: Vec<DenseMatrix>,
    pub logits: DenseMatrix,
}

impl AcousticNet {
    pub fn register<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        config: AcousticNetConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if config.feature_dim == 0 || config.hidden == 0 || config.output_dim == 0 {
            return Err(Error::Config("acoustic network dimensions must be positive".into()));
        }
        let mut dims = vec![config.input_dim()];
        dims.extend(std::iter::repeat_n(config.hidden, config.hidden_layers));
        dims.push(config.output_dim);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (l, pair) in dims.windows(2).enumerate() {
            let std = 1.0 / (pair[0] as f64).sqrt();
            weights.push(store.register(
                format!("{prefix}.w{l}"),
                DenseMatrix::randn(pair[0], pair[1], std, rng),
            )?);
            biases.push(store.register(format!("{prefix}.b{l}"), DenseMatrix::zeros(1, pair[1]))?);
        }
        Ok(Self {
            config,
            weights,
            biases,
        })
    }

    /// Rebuild handles for a store that already holds this network.
    pub fn attach(store: &ParamStore, prefix: &str, config: AcousticNetConfig) -> Result<Self> {
        let lookup = |name: String| {
            store
                .id(&name)
                .ok_or_else(|| Error::Data(format!("missing parameter {name}")))
        };
        let layers = config.hidden_layers + 1;
        let weights = (0..layers)
            .map(|l| lookup(format!("{prefix}.w{l}")))
            .collect::<Result<Vec<_>>>()?;
        let biases = (0..layers)
            .map(|l| lookup(format!("{prefix}.b{l}")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            weights,
            biases,
        })
    }

    pub fn config(&self) -> &AcousticNetConfig {
        &self.config
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.weights.iter().chain(&self.biases).copied()
    }

    /// Concatenate `±context` neighbouring frames, zero-padded at the edges.
    pub fn stack_context(&self, frames: &DenseMatrix) -> Result<DenseMatrix> {
        let f = self.config.feature_dim;
        if frames.cols() != f {
            return Err(Error::Shape(format!(
                "features have {} dims, network expects {f}",
                frames.cols()
            )));
        }
        let c = self.config.context as isize;
        let t_count = frames.rows();
        let mut out = DenseMatrix::zeros(t_count, self.config.input_dim());
        for t in 0..t_count {
            let row = out.row_mut(t);
            for (slot, off) in (-c..=c).enumerate() {
                let src = t as isize + off;
                if src >= 0 && (src as usize) < t_count {
                    row[slot * f..(slot + 1) * f].copy_from_slice(frames.row(src as usize));
                }
            }
        }
        Ok(out)
    }

    pub fn forward(&self, store: &ParamStore, frames: &DenseMatrix) -> Result<AcousticCache> {
        let mut x = self.stack_context(frames)?;
        let mut inputs = Vec::with_capacity(self.weights.len());
        let last = self.weights.len() - 1;
        for (l, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut y = x.matmul(store.value(w))?;
            y.add_row_broadcast(store.value(b).data());
            if l < last {
                y.map_inplace(f64::tanh);
            }
            inputs.push(x);
            x = y;
        }
        Ok(AcousticCache { inputs, logits: x })
    }

    pub fn logits(&self, store: &ParamStore, frames: &DenseMatrix) -> Result<DenseMatrix> {
        self.forward(store, frames).map(|c| c.logits)
    }

    /// Accumulate parameter gradients for `dlogits` into `grads`.
    pub fn backward(
        &self,
        store: &ParamStore,
        cache: &AcousticCache,
        dlogits: &DenseMatrix,
        grads: &mut GradBuffer,
    ) -> Result<()> {
        let mut dy = dlogits.clone();
        for l in (0..self.weights.len()).rev() {
            let x = &cache.inputs[l];
            grads.add(self.weights[l], &x.matmul_tn(&dy)?)?;
            grads.add(self.biases[l], &dy.sum_rows())?;
            if l == 0 {
                break;
            }
            let mut dx = dy.matmul_nt(store.value(self.weights[l]))?;
            // x is the tanh output of the previous layer.
            for (g, &a) in dx.data_mut().iter_mut().zip(x.data()) {
                *g *= 1.0 - a * a;
            }
            dy = dx;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> (ParamStore, AcousticNet) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = AcousticNetConfig {
            feature_dim: 2,
            context: 1,
            hidden: 4,
            hidden_layers: 2,
            output_dim: 3,
        };
        let net = AcousticNet::register(&mut store, "ac", cfg, &mut rng).unwrap();
        (store, net)
    }

    #[test]
    fn context_stacking_pads_edges() {
        let (_, net) = net();
        let frames = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let x = net.stack_context(&frames).unwrap();
        assert_eq!(x.row(0), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(x.row(1), &[1.0, 2.0, 3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (mut store, net) = net();
        let frames =
            DenseMatrix::from_rows(&[vec![0.5, -1.0], vec![0.2, 0.3], vec![-0.7, 0.9]]).unwrap();
        let probe = DenseMatrix::from_rows(&[
            vec![1.0, -0.5, 0.2],
            vec![0.3, 0.1, -0.4],
            vec![-0.2, 0.6, 0.05],
        ])
        .unwrap();
        let loss = |s: &ParamStore| -> f64 {
            let l = net.logits(s, &frames).unwrap();
            crate::numerics::dot(l.data(), probe.data())
        };
        let cache = net.forward(&store, &frames).unwrap();
        let mut grads = store.grad_buffer();
        net.backward(&store, &cache, &probe, &mut grads).unwrap();
        store.accumulate(&grads, 1.0).unwrap();
        let report = grad_check(loss, &store, 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "max rel {}", report.max_rel_error());
    }

    #[test]
    fn attach_finds_registered_params() {
        let (store, net) = net();
        let again = AcousticNet::attach(&store, "ac", *net.config()).unwrap();
        assert_eq!(again.param_ids().count(), net.param_ids().count());
        assert!(AcousticNet::attach(&store, "nope", *net.config()).is_err());
    }
}
