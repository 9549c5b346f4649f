use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            ..Self::default()
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {b}")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("adam epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// Apply one update using the gradients currently stored in `params`.
///
/// Fails without touching any value if a gradient holds NaN or infinity.
pub fn optimizer_step(params: &mut ParamStore, config: &OptimizerConfig) -> Result<()> {
    config.validate()?;
    let lr = config.learning_rate;
    match config.kind {
        OptimizerKind::Sgd => params.step_with(|_, value, grad, _| {
            value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .for_each(|(p, g)| *p -= lr * g);
        }),
        OptimizerKind::Adam => {
            let (b1, b2, eps) = (config.beta1, config.beta2, config.epsilon);
            params.step_with(|step, value, grad, moments| {
                let (m, v) = moments.get_or_insert_with(|| {
                    let (r, c) = grad.shape();
                    (
                        super::DenseMatrix::zeros(r, c),
                        super::DenseMatrix::zeros(r, c),
                    )
                });
                let bc1 = 1.0 - b1.powi(step as i32);
                let bc2 = 1.0 - b2.powi(step as i32);
                let it = value
                    .data_mut()
                    .iter_mut()
                    .zip(grad.data())
                    .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
                for ((p, &g), (mi, vi)) in it {
                    *mi = b1 * *mi + (1.0 - b1) * g;
                    *vi = b2 * *vi + (1.0 - b2) * g * g;
                    let m_hat = *mi / bc1;
                    let v_hat = *vi / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;

    fn store(p: f64, g: f64) -> (ParamStore, crate::numerics::ParamId) {
        let mut s = ParamStore::new();
        let id = s.register("p", DenseMatrix::from_vec(1, 1, vec![p]).unwrap()).unwrap();
        s.grad_mut(id).set(0, 0, g);
        (s, id)
    }

    #[test]
    fn sgd_single_step() {
        let (mut s, id) = store(1.0, 2.0);
        optimizer_step(&mut s, &OptimizerConfig::sgd(0.1)).unwrap();
        assert!((s.value(id).get(0, 0) - 0.8).abs() < 1e-15);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        for cfg in [OptimizerConfig::sgd(0.5), OptimizerConfig::adam(0.5)] {
            let (mut s, id) = store(1.25, 0.0);
            for _ in 0..3 {
                optimizer_step(&mut s, &cfg).unwrap();
            }
            assert_eq!(s.value(id).get(0, 0), 1.25);
        }
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // Bias correction makes the first step lr * sign(g).
        let (mut s, id) = store(0.0, 3.0);
        optimizer_step(&mut s, &OptimizerConfig::adam(0.01)).unwrap();
        assert!((s.value(id).get(0, 0) + 0.01).abs() < 1e-9);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let (mut s, id) = store(1.0, f64::NAN);
        let err = optimizer_step(&mut s, &OptimizerConfig::sgd(0.1)).unwrap_err();
        assert!(err.to_string().contains('p'));
        assert_eq!(s.value(id).get(0, 0), 1.0);
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn registration_order_does_not_matter() {
        let names = ["w", "b", "c"];
        let run = |order: &[usize]| {
            let mut s = ParamStore::new();
            for &i in order {
                let v = DenseMatrix::from_vec(1, 2, vec![i as f64, -(i as f64)]).unwrap();
                let id = s.register(names[i], v).unwrap();
                s.grad_mut(id).set(0, 1, 0.5 + i as f64);
            }
            for _ in 0..3 {
                optimizer_step(&mut s, &OptimizerConfig::adam(0.1)).unwrap();
            }
            s.snapshot()
        };
        assert_eq!(run(&[0, 1, 2]), run(&[2, 0, 1]));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::sgd(0.0).validate().is_err());
        let mut c = OptimizerConfig::default();
        c.beta1 = 1.0;
        assert!(c.validate().is_err());
    }
}
