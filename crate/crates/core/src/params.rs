//! Named parameters with gradient buffers.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{contract_err, CoreError, Result};
use crate::tensor::Tensor;

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// A trainable tensor with its gradient buffer. Names are unique within a
/// store; shared tables (like the token embedding reused by the decoder
/// output projection) are shared by id, so they are registered — and
/// counted — exactly once.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(contract_err("register", alloc::format!("duplicate parameter name `{name}`")));
        }
        let id = ParamId(self.params.len());
        let grad = Tensor::zeros(value.rows(), value.cols());
        self.params.push(Parameter {
            name: name.to_string(),
            value,
            grad,
        });
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    /// Add a backward pass's gradients into the store buffers.
    pub fn accumulate(&mut self, grads: &GradBuffer) -> Result<()> {
        if grads.grads.len() != self.params.len() {
            return Err(contract_err("accumulate", "gradient buffer size mismatch"));
        }
        for (p, g) in self.params.iter_mut().zip(grads.grads.iter()) {
            if let Some(g) = g {
                p.grad.add_assign(g)?;
            }
        }
        Ok(())
    }

    /// Total element count over unique parameters.
    pub fn count_parameters(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Snapshot of all values, aligned with parameter ids.
    pub fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor]) -> Result<()> {
        if snapshot.len() != self.params.len() {
            return Err(contract_err("restore", "snapshot size mismatch"));
        }
        for (p, s) in self.params.iter_mut().zip(snapshot.iter()) {
            if !p.value.same_shape(s) {
                return Err(contract_err("restore", alloc::format!("shape mismatch for `{}`", p.name)));
            }
            p.value = s.clone();
        }
        Ok(())
    }

    /// First parameter holding a non-finite gradient, if any.
    pub fn find_non_finite_grad(&self) -> Option<&str> {
        self.params
            .iter()
            .find(|p| !p.grad.all_finite())
            .map(|p| p.name.as_str())
    }
}

/// Per-parameter gradients produced by one backward pass. Entries stay
/// `None` for parameters the loss did not touch.
#[derive(Debug)]
pub struct GradBuffer {
    pub(crate) grads: Vec<Option<Tensor>>,
}

impl GradBuffer {
    pub fn new(n_params: usize) -> Self {
        let mut grads = Vec::with_capacity(n_params);
        grads.resize_with(n_params, || None);
        Self { grads }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub(crate) fn add(&mut self, id: ParamId, g: &Tensor) -> Result<()> {
        match &mut self.grads[id.0] {
            Some(existing) => existing.add_assign(g),
            slot => {
                *slot = Some(g.clone());
                Ok(())
            }
        }
    }

    /// Dense view: zeros for untouched parameters.
    pub fn dense(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .iter()
            .map(|(id, p)| match self.get(id) {
                Some(g) => g.clone(),
                None => Tensor::zeros(p.value.rows(), p.value.cols()),
            })
            .collect()
    }
}

/// Global gradient-norm clipping; returns the pre-clip norm.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> Result<f64> {
    let mut sq = 0.0;
    for (_, p) in store.iter() {
        for &g in p.grad.data() {
            sq += g * g;
        }
    }
    let norm = crate::math::sqrt(sq);
    if !norm.is_finite() {
        let name = store.find_non_finite_grad().unwrap_or("<unknown>").to_string();
        return Err(CoreError::NonFinite {
            what: alloc::format!("gradient of `{name}`"),
        });
    }
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for p in store.params.iter_mut() {
            for g in p.grad.data_mut() {
                *g *= scale;
            }
        }
    }
    Ok(norm)
}
