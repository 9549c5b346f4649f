use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Handle to a parameter registered in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
struct Param {
    name: String,
    value: DenseMatrix,
    grad: DenseMatrix,
    // Adam moments, allocated lazily on the first Adam step.
    moments: Option<(DenseMatrix, DenseMatrix)>,
}

/// Named parameter tensors, each paired with a gradient buffer of the same
/// shape, plus the optimizer step counter.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Param>,
    index: BTreeMap<String, usize>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: DenseMatrix) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        if !value.is_finite() {
            return Err(Error::Numeric(name));
        }
        let id = self.params.len();
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.params.push(Param {
            name: name.clone(),
            value,
            grad,
            moments: None,
        });
        self.index.insert(name, id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.params[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseMatrix {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.params[id.0].grad
    }

    /// Replace a parameter's value, keeping its shape.
    pub fn set_value(&mut self, id: ParamId, value: DenseMatrix) -> Result<()> {
        let p = &mut self.params[id.0];
        if p.value.shape() != value.shape() {
            return Err(Error::Shape(format!(
                "parameter {} is {:?}, got {:?}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    /// Ids in name order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.index.values().map(|&i| ParamId(i))
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// A zeroed buffer with one matrix per parameter.
    pub fn grad_buffer(&self) -> GradBuffer {
        GradBuffer {
            grads: self
                .params
                .iter()
                .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
                .collect(),
        }
    }

    /// `grad += scale * buffer` for every parameter.
    pub fn accumulate(&mut self, buffer: &GradBuffer, scale: f64) -> Result<()> {
        for (p, g) in self.params.iter_mut().zip(&buffer.grads) {
            p.grad.add_scaled(g, scale)?;
        }
        Ok(())
    }

    /// Parameter values keyed by name.
    pub fn snapshot(&self) -> BTreeMap<String, DenseMatrix> {
        self.index
            .iter()
            .map(|(name, &i)| (name.clone(), self.params[i].value.clone()))
            .collect()
    }

    /// Overwrite values from a name-keyed map. Every registered parameter
    /// must be present with a matching shape.
    pub fn load_snapshot(&mut self, values: &BTreeMap<String, DenseMatrix>) -> Result<()> {
        for p in &mut self.params {
            let v = values
                .get(&p.name)
                .ok_or_else(|| Error::Data(format!("missing parameter {:?}", p.name)))?;
            if v.shape() != p.value.shape() {
                return Err(Error::Shape(format!(
                    "parameter {} is {:?}, got {:?}",
                    p.name,
                    p.value.shape(),
                    v.shape()
                )));
            }
            p.value = v.clone();
        }
        Ok(())
    }

    pub(crate) fn step_with<F>(&mut self, mut update: F) -> Result<()>
    where
        F: FnMut(u64, &mut DenseMatrix, &DenseMatrix, &mut Option<(DenseMatrix, DenseMatrix)>),
    {
        for p in &self.params {
            if !p.grad.is_finite() {
                return Err(Error::Numeric(format!("gradient of {}", p.name)));
            }
        }
        self.step += 1;
        let step = self.step;
        for &i in self.index.values() {
            let p = &mut self.params[i];
            update(step, &mut p.value, &p.grad, &mut p.moments);
        }
        Ok(())
    }
}

/// Gradient accumulator mirroring the shapes of a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradBuffer {
    grads: Vec<DenseMatrix>,
}

impl GradBuffer {
    pub fn get(&self, id: ParamId) -> &DenseMatrix {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.grads[id.0]
    }

    pub fn add(&mut self, id: ParamId, g: &DenseMatrix) -> Result<()> {
        self.grads[id.0].add_scaled(g, 1.0)
    }

    pub fn is_zero(&self, id: ParamId) -> bool {
        self.grads[id.0].data().iter().all(|&x| x == 0.0)
    }
}
