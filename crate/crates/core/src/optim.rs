//! Update rules: AdamW on the state-full subspace, SignSGD on the
//! complement, and plain SGD as a baseline.
//!
//! These functions return the additive update `u` so that the caller applies
//! `theta += u`. Decoupled weight decay is not applied here; the engine
//! shrinks the whole parameter once per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ParamTensor;

/// AdamW moments for one parameter's state-full subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamSubState {
    pub m: ParamTensor,
    pub v: ParamTensor,
    /// Number of AdamW steps taken with these moments (bias-correction count).
    pub t: u64,
}

impl AdamSubState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: ParamTensor::zeros(rows, cols),
            v: ParamTensor::zeros(rows, cols),
            t: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.m.shape()
    }

    /// Number of stored moment scalars (`m` and `v` together).
    pub fn scalar_count(&self) -> usize {
        self.m.len() + self.v.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimHyper {
    pub lr_full: f64,
    pub lr_free: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for OptimHyper {
    fn default() -> Self {
        Self {
            lr_full: 1e-3,
            lr_free: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl OptimHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidHyper {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.lr_full > 0.0 && self.lr_full.is_finite()) {
            return bad("lr_full", "must be positive");
        }
        if !(self.lr_free > 0.0 && self.lr_free.is_finite()) {
            return bad("lr_free", "must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad("beta1", "must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return bad("beta2", "must be in [0, 1)");
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", "must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be non-negative");
        }
        Ok(())
    }
}

/// One AdamW step on the subspace gradient `g_sub`. Updates `state` in place
/// and returns the update to add to the selected columns.
pub fn adamw_step(state: &mut AdamSubState, g_sub: &ParamTensor, h: &OptimHyper) -> Result<ParamTensor> {
    g_sub.ensure_shape(state.shape())?;
    if !g_sub.is_finite() {
        return Err(Error::NonFiniteInput {
            context: "adamw gradient",
        });
    }
    state.t += 1;
    let bc1 = 1.0 - h.beta1.powi(state.t as i32);
    let bc2 = 1.0 - h.beta2.powi(state.t as i32);

    let mut u = ParamTensor::zeros(g_sub.rows(), g_sub.cols());
    let m = state.m.as_mut_slice();
    let v = state.v.as_mut_slice();
    for (((mi, vi), &g), ui) in m
        .iter_mut()
        .zip(v.iter_mut())
        .zip(g_sub.as_slice())
        .zip(u.as_mut_slice())
    {
        *mi = h.beta1 * *mi + (1.0 - h.beta1) * g;
        *vi = h.beta2 * *vi + (1.0 - h.beta2) * g * g;
        let m_hat = *mi / bc1;
        let v_hat = *vi / bc2;
        *ui = -h.lr_full * m_hat / (v_hat.sqrt() + h.eps);
    }
    Ok(u)
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `-lr_free * sign(g)` with `sign(0) = 0`.
pub fn signsgd_step(g_free: &ParamTensor, lr_free: f64) -> Result<ParamTensor> {
    if !g_free.is_finite() {
        return Err(Error::NonFiniteInput {
            context: "signsgd gradient",
        });
    }
    Ok(g_free.map(|g| -lr_free * sign(g)))
}

pub fn sgd_step(g: &ParamTensor, lr: f64) -> Result<ParamTensor> {
    if !g.is_finite() {
        return Err(Error::NonFiniteInput {
            context: "sgd gradient",
        });
    }
    Ok(g.map(|x| -lr * x))
}
