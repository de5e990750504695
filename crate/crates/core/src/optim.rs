//! Adam with bias-corrected moment estimates.
//!
//! ```text
//! m_t   = b1 * m_{t-1} + (1 - b1) * g
//! v_t   = b2 * v_{t-1} + (1 - b2) * g^2
//! m_hat = m_t / (1 - b1^t)
//! v_hat = v_t / (1 - b2^t)
//! w    <- w - lr * m_hat / sqrt(v_hat + eps)
//! ```
//!
//! Note that `eps` sits inside the square root by default. The more common
//! `sqrt(v_hat) + eps` form is available through [`EpsilonPlacement`].

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Largest step counter accepted before the state is considered overflowed.
pub const MAX_STEP: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EpsilonPlacement {
    /// `sqrt(v_hat + eps)`
    #[default]
    InsideSqrt,
    /// `sqrt(v_hat) + eps`
    OutsideSqrt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epsilon_placement: EpsilonPlacement,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-7,
            epsilon_placement: EpsilonPlacement::InsideSqrt,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.lr >= 0.0
            && self.lr.is_finite()
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "Adam needs 0 <= beta1, beta2 < 1, lr >= 0 and eps > 0, got {self:?}"
            )))
        }
    }
}

/// Moment accumulators for one parameter tensor. Kept in `f64` so the
/// update itself adds no rounding beyond the final store into the parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    shape: Vec<usize>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            first: vec![0.0; len],
            second: vec![0.0; len],
            step: 0,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Bias-corrected moments `(m_hat, v_hat)` at the current step.
    pub fn corrected(&self, h: &AdamHyper) -> (Vec<f64>, Vec<f64>) {
        let t = self.step as i32;
        let c1 = 1.0 - h.beta1.powi(t);
        let c2 = 1.0 - h.beta2.powi(t);
        (
            self.first.iter().map(|m| m / c1).collect(),
            self.second.iter().map(|v| v / c2).collect(),
        )
    }
}

/// Element storage that Adam can read and update.
pub trait Scalar: Copy {
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// One Adam update of `params` in place.
pub fn adam_step<P: Scalar, G: Scalar>(
    params: &mut [P],
    grads: &[G],
    state: &mut AdamState,
    h: &AdamHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.first.len() {
        return Err(Error::shape(format!(
            "adam: {} params, {} grads, {} moment entries",
            params.len(),
            grads.len(),
            state.first.len()
        )));
    }
    if state.step >= MAX_STEP {
        return Err(Error::state(format!(
            "adam step counter overflow at t = {}",
            state.step
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - h.beta1.powi(t);
    let c2 = 1.0 - h.beta2.powi(t);
    for (((w, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        let g = g.to_f64();
        *m = h.beta1 * *m + (1.0 - h.beta1) * g;
        *v = h.beta2 * *v + (1.0 - h.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        let denom = match h.epsilon_placement {
            EpsilonPlacement::InsideSqrt => (v_hat + h.epsilon).sqrt(),
            EpsilonPlacement::OutsideSqrt => v_hat.sqrt() + h.epsilon,
        };
        *w = P::from_f64(w.to_f64() - h.lr * m_hat / denom);
    }
    Ok(())
}

/// [`adam_step`] on tensors, with shape checks against the state.
pub fn adam_step_tensor(
    params: &mut Tensor,
    grads: &Tensor,
    state: &mut AdamState,
    h: &AdamHyper,
) -> Result<()> {
    if params.shape() != grads.shape() || params.shape() != state.shape() {
        return Err(Error::shape(format!(
            "adam: param {:?}, grad {:?}, state {:?}",
            params.shape(),
            grads.shape(),
            state.shape()
        )));
    }
    adam_step(params.data_mut(), grads.data(), state, h)
}
