use crate::error::{Error, Result};
use crate::layers::{glorot_limit, relu_gate, relu_in_place, Activation, Mode};
use crate::loss::softmax;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Fully connected layer: `out = act(input · W + b)` with `W` of shape
/// `[In, Out]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub units: usize,
    pub activation: Activation,
    pub weight: Tensor,
    pub bias: Tensor,
    pub grad_weight: Tensor,
    pub grad_bias: Tensor,
    cache: Option<DenseCache>,
}

#[derive(Debug, Clone)]
struct DenseCache {
    input: Tensor,
    output: Tensor,
}

impl Dense {
    pub fn init(inputs: usize, units: usize, activation: Activation, rng: &mut Rng) -> Result<Self> {
        let limit = glorot_limit(inputs, units);
        let weight = rng.uniform(&[inputs, units], -limit, limit)?;
        Self::from_params(weight, Tensor::zeros(&[units])?, activation)
    }

    pub fn from_params(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let (inputs, units) = match *weight.shape() {
            [i, o] => (i, o),
            _ => {
                return Err(Error::shape(format!(
                    "dense weights must be [In, Out], got {:?}",
                    weight.shape()
                )))
            }
        };
        if bias.shape() != [units] {
            return Err(Error::shape(format!(
                "dense bias must be [{units}], got {:?}",
                bias.shape()
            )));
        }
        Ok(Self {
            inputs,
            units,
            activation,
            grad_weight: Tensor::zeros(&[inputs, units])?,
            grad_bias: Tensor::zeros(&[units])?,
            weight,
            bias,
            cache: None,
        })
    }

    /// Affine part only, before any activation.
    pub fn affine(&self, input: &Tensor) -> Result<Tensor> {
        match *input.shape() {
            [_, f] if f == self.inputs => {}
            _ => {
                return Err(Error::shape(format!(
                    "dense expects (N, {}) input, got {:?}",
                    self.inputs,
                    input.shape()
                )))
            }
        }
        let mut out = input.matmul(&self.weight)?;
        let bias = self.bias.data();
        for row in out.data_mut().chunks_exact_mut(self.units) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut out = self.affine(input)?;
        match self.activation {
            Activation::Relu => relu_in_place(out.data_mut()),
            Activation::Softmax => out = softmax(&out)?,
            Activation::None => {}
        }
        self.cache = match mode {
            Mode::Train => Some(DenseCache {
                input: input.clone(),
                output: out.clone(),
            }),
            Mode::Eval => None,
        };
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        self.backward_inner(grad_out, false)
    }

    /// Backward pass that treats `grad_pre` as the gradient with respect to
    /// the pre-activation values, skipping the activation's Jacobian. Used
    /// when a softmax head is fused with cross-entropy.
    pub fn backward_preactivation(&mut self, grad_pre: &Tensor) -> Result<Tensor> {
        self.backward_inner(grad_pre, true)
    }

    fn backward_inner(&mut self, grad: &Tensor, skip_activation: bool) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::state("dense backward without a training forward pass"))?;
        if grad.shape() != cache.output.shape() {
            return Err(Error::shape(format!(
                "dense backward: grad shape {:?} differs from output {:?}",
                grad.shape(),
                cache.output.shape()
            )));
        }
        let mut g = grad.clone();
        if !skip_activation {
            match self.activation {
                Activation::Relu => relu_gate(g.data_mut(), cache.output.data()),
                Activation::Softmax => {
                    // dz = p * (g - <g, p>) row by row
                    let p = cache.output.data();
                    for (g_row, p_row) in g.data_mut().chunks_exact_mut(self.units).zip(p.chunks_exact(self.units)) {
                        let dot: f64 = g_row.iter().zip(p_row).map(|(&a, &b)| a as f64 * b as f64).sum();
                        for (gv, &pv) in g_row.iter_mut().zip(p_row) {
                            *gv = (pv as f64 * (*gv as f64 - dot)) as f32;
                        }
                    }
                }
                Activation::None => {}
            }
        }

        let mut gb = vec![0.0f64; self.units];
        for row in g.data().chunks_exact(self.units) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc += v as f64;
            }
        }
        self.grad_bias = Tensor::from_vec(&[self.units], gb.into_iter().map(|v| v as f32).collect())?;
        self.grad_weight = cache.input.transpose()?.matmul(&g)?;
        g.matmul(&self.weight.transpose()?)
    }
}
