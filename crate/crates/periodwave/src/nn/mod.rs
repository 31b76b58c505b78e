//! Minimal reverse-mode autodiff over dense f64 tensors.
//!
//! Everything the vector-field estimator needs and nothing more: tensors,
//! a gradient tape, and the op set (convolutions, norms, activations,
//! shape plumbing). Single-threaded by construction so seeded training is
//! bitwise reproducible.

pub mod ops;
pub mod tape;
pub mod tensor;

pub use tape::{Tape, Val};
pub use tensor::Tensor;

use crate::rng::Rng;

/// Named parameter tensors with stable ordering.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        debug_assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.tensors.push(t);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn by_name(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.numel()).sum()
    }
}

/// Kaiming-uniform initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub fn kaiming_uniform(shape: Vec<usize>, fan_in: usize, rng: &mut Rng) -> Tensor {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.uniform_in(-bound, bound)).collect())
}

/// One forward/backward pass: the tape plus parameter leaves bound to it.
pub struct Session {
    pub tape: Tape,
    pub params: Vec<Val>,
}

impl Session {
    /// Bind every parameter in the store as a leaf on a fresh tape.
    pub fn new(store: &ParamStore, recording: bool) -> Session {
        let mut tape = Tape::new(recording);
        let params = (0..store.len())
            .map(|i| tape.leaf(store.tensor(i).clone()))
            .collect();
        Session { tape, params }
    }

    pub fn p(&self, i: usize) -> &Val {
        &self.params[i]
    }

    /// Gradients per parameter index after a backward pass from `loss`.
    pub fn grads(&self, loss: &Val) -> Vec<Option<Tensor>> {
        let node_grads = self.tape.backward(loss);
        self.params
            .iter()
            .map(|v| v.id.and_then(|id| node_grads[id].clone()))
            .collect()
    }
}
