//! Layer kinds, their shape inference, and forward/backward passes.
//!
//! Shapes passed to [`LayerSpec::output_shape`] are per-sample: `[H, W, C]`
//! for image tensors and `[F]` for flat feature vectors. Runtime tensors carry
//! a leading batch dimension.

mod batchnorm;
mod conv;
mod dense;
mod dropout;
mod flatten;
mod pool;

use std::fmt;

pub use batchnorm::{BatchNorm, BN_EPSILON, BN_MOMENTUM};
pub use conv::Conv2d;
pub use dense::Dense;
pub use dropout::{dropout_apply, Dropout};
pub use flatten::Flatten;
pub use pool::MaxPool2d;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Softmax,
    None,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softmax => "softmax",
            Activation::None => "none",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "softmax" => Some(Activation::Softmax),
            "none" => Some(Activation::None),
            _ => None,
        }
    }
}

/// One layer of an architecture. Convolutions are square, stride 1, valid
/// padding; pooling is square with stride equal to the window.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv2d {
        filters: usize,
        kernel: usize,
        activation: Activation,
    },
    MaxPool2d {
        pool: usize,
    },
    Dropout {
        rate: f64,
    },
    BatchNorm,
    Flatten,
    Dense {
        units: usize,
        activation: Activation,
    },
}

/// Parameter counts for one layer. Only trainable parameters receive
/// gradients; batchnorm running statistics are the non-trainable part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ParamCount {
    pub trainable: usize,
    pub non_trainable: usize,
}

impl LayerSpec {
    /// Display name in the Keras-style summary table.
    pub fn display_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "Conv2D",
            LayerSpec::MaxPool2d { .. } => "MaxPooling2D",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::BatchNorm => "BatchNormalization",
            LayerSpec::Flatten => "Flatten",
            LayerSpec::Dense { .. } => "Dense",
        }
    }

    /// Name used in architecture files.
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool2d { .. } => "maxpool2d",
            LayerSpec::Dropout { .. } => "dropout",
            LayerSpec::BatchNorm => "batchnorm",
            LayerSpec::Flatten => "flatten",
            LayerSpec::Dense { .. } => "dense",
        }
    }

    pub fn activation(&self) -> Activation {
        match self {
            LayerSpec::Conv2d { activation, .. } | LayerSpec::Dense { activation, .. } => {
                *activation
            }
            _ => Activation::None,
        }
    }

    /// Checks the field invariants that do not depend on the input shape.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::shape(m));
        match *self {
            LayerSpec::Conv2d {
                filters,
                kernel,
                activation,
            } => {
                if filters == 0 || kernel == 0 {
                    return bad(format!("conv2d needs filters and kernel >= 1, got {filters}/{kernel}"));
                }
                if activation == Activation::Softmax {
                    return bad("conv2d does not support softmax activation".into());
                }
            }
            LayerSpec::MaxPool2d { pool } if pool == 0 => {
                return bad("maxpool2d needs pool >= 1".into())
            }
            LayerSpec::Dropout { rate } if !(0.0..1.0).contains(&rate) => {
                return Err(Error::InvalidRate(rate))
            }
            LayerSpec::Dense { units, .. } if units == 0 => {
                return bad("dense needs units >= 1".into())
            }
            _ => {}
        }
        Ok(())
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        match *self {
            LayerSpec::Conv2d {
                filters, kernel, ..
            } => {
                let [h, w, _] = spatial(input, "conv2d")?;
                if h < kernel || w < kernel {
                    return Err(Error::shape(format!(
                        "conv2d kernel {kernel}x{kernel} does not fit a {h}x{w} input"
                    )));
                }
                Ok(vec![h - kernel + 1, w - kernel + 1, filters])
            }
            LayerSpec::MaxPool2d { pool } => {
                let [h, w, c] = spatial(input, "maxpool2d")?;
                if h < pool || w < pool {
                    return Err(Error::shape(format!(
                        "maxpool2d window {pool}x{pool} does not fit a {h}x{w} input"
                    )));
                }
                Ok(vec![(h - pool) / pool + 1, (w - pool) / pool + 1, c])
            }
            LayerSpec::Dropout { .. } | LayerSpec::BatchNorm => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { units, .. } => match input {
                [_] => Ok(vec![units]),
                _ => Err(Error::shape(format!(
                    "dense needs a flat input, got {input:?}"
                ))),
            },
        }
    }

    pub fn param_count(&self, input: &[usize]) -> Result<ParamCount> {
        self.output_shape(input)?;
        let trainable_only = |n| ParamCount {
            trainable: n,
            non_trainable: 0,
        };
        Ok(match *self {
            LayerSpec::Conv2d {
                filters, kernel, ..
            } => trainable_only((kernel * kernel * input[2] + 1) * filters),
            LayerSpec::Dense { units, .. } => trainable_only((input[0] + 1) * units),
            LayerSpec::BatchNorm => {
                let c = *input.last().unwrap_or(&0);
                ParamCount {
                    trainable: 2 * c,
                    non_trainable: 2 * c,
                }
            }
            _ => ParamCount::default(),
        })
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::Conv2d {
                filters,
                kernel,
                activation,
            } => write!(f, "conv2d({filters}, {kernel}x{kernel}, {})", activation.name()),
            LayerSpec::MaxPool2d { pool } => write!(f, "maxpool2d({pool}x{pool})"),
            LayerSpec::Dropout { rate } => write!(f, "dropout({rate})"),
            LayerSpec::BatchNorm => write!(f, "batchnorm"),
            LayerSpec::Flatten => write!(f, "flatten"),
            LayerSpec::Dense { units, activation } => {
                write!(f, "dense({units}, {})", activation.name())
            }
        }
    }
}

fn spatial(input: &[usize], what: &str) -> Result<[usize; 3]> {
    match *input {
        [h, w, c] => Ok([h, w, c]),
        _ => Err(Error::shape(format!(
            "{what} needs an (H, W, C) input, got {input:?}"
        ))),
    }
}

/// Splits a batched NHWC shape, checking rank.
pub(crate) fn nhwc(t: &Tensor, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [n, h, w, c] => Ok((n, h, w, c)),
        _ => Err(Error::shape(format!(
            "{what} needs an (N, H, W, C) tensor, got {:?}",
            t.shape()
        ))),
    }
}

/// Glorot-uniform limit `sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_limit(fan_in: usize, fan_out: usize) -> f32 {
    (6.0 / (fan_in + fan_out) as f64).sqrt() as f32
}

/// A parameter tensor together with its most recent gradient.
pub struct ParamSlot<'a> {
    pub value: &'a mut Tensor,
    pub grad: &'a Tensor,
}

/// A realized layer: parameters, gradients, and per-pass caches.
#[derive(Debug, Clone)]
pub enum Layer {
    Conv2d(Conv2d),
    MaxPool2d(MaxPool2d),
    Dropout(Dropout),
    BatchNorm(BatchNorm),
    Flatten(Flatten),
    Dense(Dense),
}

impl Layer {
    /// Allocates and initializes a layer for a per-sample input shape.
    pub fn build(spec: &LayerSpec, input: &[usize], rng: &mut Rng) -> Result<Layer> {
        spec.output_shape(input)?;
        Ok(match *spec {
            LayerSpec::Conv2d {
                filters,
                kernel,
                activation,
            } => Layer::Conv2d(Conv2d::init(kernel, input[2], filters, activation, rng)?),
            LayerSpec::MaxPool2d { pool } => Layer::MaxPool2d(MaxPool2d::new(pool)),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate)?),
            LayerSpec::BatchNorm => Layer::BatchNorm(BatchNorm::new(input[input.len() - 1])?),
            LayerSpec::Flatten => Layer::Flatten(Flatten::new()),
            LayerSpec::Dense { units, activation } => {
                Layer::Dense(Dense::init(input[0], units, activation, rng)?)
            }
        })
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.forward(input, mode),
            Layer::MaxPool2d(l) => l.forward(input, mode),
            Layer::Dropout(l) => l.forward(input, mode, rng),
            Layer::BatchNorm(l) => l.forward(input, mode),
            Layer::Flatten(l) => l.forward(input, mode),
            Layer::Dense(l) => l.forward(input, mode),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        match self {
            Layer::Conv2d(l) => l.backward(grad_out),
            Layer::MaxPool2d(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::BatchNorm(l) => l.backward(grad_out),
            Layer::Flatten(l) => l.backward(grad_out),
            Layer::Dense(l) => l.backward(grad_out),
        }
    }

    /// Trainable parameters paired with their gradients, in a fixed order.
    pub fn param_slots(&mut self) -> Vec<ParamSlot<'_>> {
        match self {
            Layer::Conv2d(l) => vec![
                ParamSlot {
                    value: &mut l.weight,
                    grad: &l.grad_weight,
                },
                ParamSlot {
                    value: &mut l.bias,
                    grad: &l.grad_bias,
                },
            ],
            Layer::Dense(l) => vec![
                ParamSlot {
                    value: &mut l.weight,
                    grad: &l.grad_weight,
                },
                ParamSlot {
                    value: &mut l.bias,
                    grad: &l.grad_bias,
                },
            ],
            Layer::BatchNorm(l) => vec![
                ParamSlot {
                    value: &mut l.gamma,
                    grad: &l.grad_gamma,
                },
                ParamSlot {
                    value: &mut l.beta,
                    grad: &l.grad_beta,
                },
            ],
            _ => Vec::new(),
        }
    }

    /// Trainable parameters, same order as [`Layer::param_slots`].
    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&l.weight, &l.bias],
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta],
            _ => Vec::new(),
        }
    }

    /// Gradients from the last backward pass, same order as [`Layer::params`].
    pub fn grads(&self) -> Vec<&Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&l.grad_weight, &l.grad_bias],
            Layer::Dense(l) => vec![&l.grad_weight, &l.grad_bias],
            Layer::BatchNorm(l) => vec![&l.grad_gamma, &l.grad_beta],
            _ => Vec::new(),
        }
    }

    /// Everything persisted in a model file: trainable parameters followed by
    /// batchnorm running statistics.
    pub fn persistent(&self) -> Vec<&Tensor> {
        match self {
            Layer::BatchNorm(l) => vec![&l.gamma, &l.beta, &l.running_mean, &l.running_var],
            other => other.params(),
        }
    }

    pub fn persistent_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Layer::Conv2d(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::BatchNorm(l) => vec![
                &mut l.gamma,
                &mut l.beta,
                &mut l.running_mean,
                &mut l.running_var,
            ],
            _ => Vec::new(),
        }
    }
}

pub(crate) fn relu_in_place(data: &mut [f32]) {
    for v in data {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes gradient entries whose activation output was not positive.
pub(crate) fn relu_gate(grad: &mut [f32], output: &[f32]) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= 0.0 {
            *g = 0.0;
        }
    }
}
