//! ADAM with bias correction.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{contract_err, CoreError, Result};
use crate::params::{ParamId, ParamStore, Parameter};
use crate::tensor::Tensor;

/// Optimizer hyperparameters. The tracker trains with lr 1e-4; β/ε are the
/// optimizer's canonical defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_lr(1e-4)
    }
}

/// Per-parameter first/second moments plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub cfg: AdamConfig,
    /// Step counter; increments by exactly one per [`Adam::step`].
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

pub type Adam = AdamState;

impl AdamState {
    pub fn new(store: &ParamStore, cfg: AdamConfig) -> Self {
        let m = store.iter().map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
        let v = store.iter().map(|(_, p)| Tensor::zeros(p.value.rows(), p.value.cols())).collect();
        Self { cfg, t: 0, m, v }
    }

    /// One optimization step over every parameter, consuming the gradients
    /// currently held in the store. Fails without touching `t` if any
    /// gradient is non-finite.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(contract_err("adam_step", "optimizer/store size mismatch"));
        }
        if let Some(name) = store.find_non_finite_grad() {
            return Err(CoreError::NonFinite {
                what: alloc::format!("gradient of `{name}`"),
            });
        }
        self.t += 1;
        for i in 0..store.len() {
            let p = store.get_mut(ParamId(i));
            update_param(&self.cfg, self.t, p, &mut self.m[i], &mut self.v[i]);
        }
        Ok(())
    }

    /// Step a single parameter (useful for isolated-op tests). The caller is
    /// responsible for the step counter covering every parameter at once.
    pub fn step_single(&mut self, store: &mut ParamStore, id: ParamId) -> Result<()> {
        let p = store.get_mut(id);
        if !p.grad.all_finite() {
            return Err(CoreError::NonFinite {
                what: alloc::format!("gradient of `{}`", p.name.to_string()),
            });
        }
        self.t += 1;
        update_param(&self.cfg, self.t, p, &mut self.m[id.index()], &mut self.v[id.index()]);
        Ok(())
    }
}

fn update_param(cfg: &AdamConfig, t: u64, p: &mut Parameter, m: &mut Tensor, v: &mut Tensor) {
    let bc1 = 1.0 - crate::math::powi(cfg.beta1, t as i32);
    let bc2 = 1.0 - crate::math::powi(cfg.beta2, t as i32);
    let value = p.value.data_mut();
    let grad = p.grad.data();
    let (m, v) = (m.data_mut(), v.data_mut());
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        value[i] -= cfg.lr * m_hat / (crate::math::sqrt(v_hat) + cfg.eps);
    }
}
