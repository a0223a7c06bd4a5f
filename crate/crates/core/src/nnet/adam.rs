use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Adam optimizer state with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state for parameters of the given shapes, β1 = 0.9, β2 = 0.999, ε = 1e-8.
    pub fn new(params: &[Tensor<T>], lr: f64) -> Self {
        Self {
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            second: params.iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<T: Scalar>(params: &mut [Tensor<T>], grads: &[Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::shape("parameter, gradient and optimizer state counts differ"));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.first) {
        if p.len() != g.len() || p.len() != m.len() {
            return Err(Error::shape(format!("gradient {:?} for parameter {:?}", g.shape(), p.shape())));
        }
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged);
    }
    state.step += 1;
    let t = state.step as f64;
    let b1 = T::from_f64(state.beta1);
    let b2 = T::from_f64(state.beta2);
    let one = T::one();
    let step_size = T::from_f64(state.lr * (1.0 - state.beta2.powf(t)).sqrt() / (1.0 - state.beta1.powf(t)));
    let eps_hat = T::from_f64(state.eps * (1.0 - state.beta2.powf(t)).sqrt());
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.first).zip(&mut state.second) {
        for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (one - b1) * gi;
            *vi = b2 * *vi + (one - b2) * gi * gi;
            *w = *w - step_size * *mi / (vi.sqrt() + eps_hat);
        }
    }
    Ok(())
}
