//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    pub fn for_params(params: &ParamVector, lr: f64) -> Self {
        Self::new(params.len(), lr)
    }
}

/// One Adam descent step on `params` along `grad`.
pub fn adam_step(params: &mut ParamVector, grad: &ParamVector, state: &mut AdamState) -> Result<()> {
    let n = params.len();
    if grad.len() != n {
        return Err(Error::ShapeMismatch { expected: n, actual: grad.len() });
    }
    if state.m.len() != n || state.v.len() != n {
        return Err(Error::ShapeMismatch { expected: n, actual: state.m.len() });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (i, (p, g)) in params.values_mut().iter_mut().zip(grad.values()).enumerate() {
        let m = b1 * state.m[i] + (1.0 - b1) * g;
        let v = b2 * state.v[i] + (1.0 - b2) * g * g;
        state.m[i] = m;
        state.v[i] = v;
        *p -= state.lr * (m / c1) / ((v / c2).sqrt() + state.eps);
    }
    Ok(())
}
