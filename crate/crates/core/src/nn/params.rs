use serde::{Deserialize, Serialize};

use super::{Scalar, SeededRng, Tensor};

/// Handle to a named parameter tensor in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// All trainable (and frozen) tensors of a model, addressed by [`ParamId`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParamStore<F> {
    names: Vec<String>,
    values: Vec<Tensor<F>>,
    trainable: Vec<bool>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            trainable: Vec::new(),
        }
    }

    pub fn add(&mut self, name: &str, value: Tensor<F>, trainable: bool) -> ParamId {
        assert!(
            !self.names.iter().any(|n| n == name),
            "duplicate parameter name {name}"
        );
        self.names.push(name.to_string());
        self.values.push(value);
        self.trainable.push(trainable);
        ParamId(self.values.len() - 1)
    }

    /// Register a tensor initialized uniformly in `[-bound, bound]`.
    pub fn add_uniform(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        bound: f64,
        trainable: bool,
        rng: &mut SeededRng,
    ) -> ParamId {
        let numel: usize = shape.iter().product();
        let data: Vec<F> = (0..numel)
            .map(|_| F::from_f64(rng.uniform(-bound, bound)))
            .collect();
        self.add(name, Tensor::new(shape, data), trainable)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    /// Total number of scalars across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|t| t.len()).sum()
    }

    /// Total number of scalars across trainable parameters.
    pub fn trainable_scalar_count(&self) -> usize {
        self.values
            .iter()
            .zip(&self.trainable)
            .filter(|(_, &t)| t)
            .map(|(v, _)| v.len())
            .sum()
    }
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradient accumulators matching a [`ParamStore`] entry for entry.
#[derive(Clone, Debug)]
pub struct GradStore<F> {
    grads: Vec<Tensor<F>>,
}

impl<F: Scalar> GradStore<F> {
    pub fn zeros_like(params: &ParamStore<F>) -> Self {
        GradStore {
            grads: params.values.iter().map(|t| t.zeros_like()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.grads[id.0]
    }

    pub fn zero_all(&mut self) {
        for g in &mut self.grads {
            g.fill(F::zero());
        }
    }

    /// Discard the accumulated gradient of one row of a 2-d parameter.
    /// Used to keep the padding row of an embedding matrix pinned at zero.
    pub fn zero_row(&mut self, id: ParamId, row: usize) {
        self.grads[id.0]
            .row_mut(row)
            .iter_mut()
            .for_each(|g| *g = F::zero());
    }
}
