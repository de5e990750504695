//! Shared helpers for the integration tests.
#![allow(dead_code)]

pub mod checks;
pub mod golden;
pub mod reference;

use scalelab::rng::Rng;
use scalelab::Tensor;

/// Relative error; the tiny floor only guards exact zeros (dead ReLU units).
pub const GRAD_FLOOR: f64 = 1e-9;
pub const GRAD_TOL: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

pub fn to_f64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

/// Central difference of `f` with respect to every entry of `x`.
pub fn numeric_grad(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + FD_STEP;
            let up = f(&probe);
            probe[i] = x[i] - FD_STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Largest relative error between an analytic f32 gradient and a numeric one.
pub fn worst(analytic: &Tensor, numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .data()
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err(a as f64, n))
        .fold(0.0, f64::max)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn uniform(rng: &mut Rng, shape: &[usize], lo: f32, hi: f32) -> Tensor {
    rng.uniform(shape, lo, hi).unwrap()
}
