use crate::error::{Error, Result};
use crate::layers::{glorot_limit, nhwc, relu_gate, relu_in_place, Activation, Mode};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Valid-padding, stride-1 square convolution computed as one matrix product
/// over unrolled input patches (im2col).
///
/// Weights are laid out `[K, K, Cin, Cout]`, which flattens to the
/// `[K*K*Cin, Cout]` matrix the patch rows multiply against.
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub kernel: usize,
    pub in_channels: usize,
    pub filters: usize,
    pub activation: Activation,
    pub weight: Tensor,
    pub bias: Tensor,
    pub grad_weight: Tensor,
    pub grad_bias: Tensor,
    cache: Option<ConvCache>,
}

#[derive(Debug, Clone)]
struct ConvCache {
    input_shape: [usize; 4],
    cols: Tensor,
    output: Tensor,
}

impl Conv2d {
    pub fn init(
        kernel: usize,
        in_channels: usize,
        filters: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        let shape = [kernel, kernel, in_channels, filters];
        let limit = glorot_limit(kernel * kernel * in_channels, kernel * kernel * filters);
        let weight = rng.uniform(&shape, -limit, limit)?;
        Self::from_params(weight, Tensor::zeros(&[filters])?, activation)
    }

    pub fn from_params(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let [k, k2, cin, cout] = match *weight.shape() {
            [a, b, c, d] => [a, b, c, d],
            _ => {
                return Err(Error::shape(format!(
                    "conv weights must be [K, K, Cin, Cout], got {:?}",
                    weight.shape()
                )))
            }
        };
        if k != k2 {
            return Err(Error::shape("conv kernels must be square"));
        }
        if bias.shape() != [cout] {
            return Err(Error::shape(format!(
                "conv bias must be [{cout}], got {:?}",
                bias.shape()
            )));
        }
        if activation == Activation::Softmax {
            return Err(Error::shape("conv2d does not support softmax activation"));
        }
        Ok(Self {
            kernel: k,
            in_channels: cin,
            filters: cout,
            activation,
            grad_weight: Tensor::zeros(weight.shape())?,
            grad_bias: Tensor::zeros(&[cout])?,
            weight,
            bias,
            cache: None,
        })
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, h, w, c) = nhwc(input, "conv2d")?;
        if c != self.in_channels {
            return Err(Error::shape(format!(
                "conv2d expects {} input channels, got {c}",
                self.in_channels
            )));
        }
        let k = self.kernel;
        if h < k || w < k {
            return Err(Error::shape(format!(
                "conv2d kernel {k}x{k} does not fit a {h}x{w} input"
            )));
        }
        let (oh, ow) = (h - k + 1, w - k + 1);
        let cols = im2col(input, k)?;
        let w2 = self.weight.reshape(&[k * k * c, self.filters])?;
        let mut out = cols.matmul(&w2)?;
        let bias = self.bias.data();
        for row in out.data_mut().chunks_exact_mut(self.filters) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
        if self.activation == Activation::Relu {
            relu_in_place(out.data_mut());
        }
        let out = out.into_shape(&[n, oh, ow, self.filters])?;
        self.cache = match mode {
            Mode::Train => Some(ConvCache {
                input_shape: [n, h, w, c],
                cols,
                output: out.clone(),
            }),
            Mode::Eval => None,
        };
        Ok(out)
    }

    /// Returns the input gradient and stores weight/bias gradients.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::state("conv2d backward without a training forward pass"))?;
        if grad_out.shape() != cache.output.shape() {
            return Err(Error::shape(format!(
                "conv2d backward: grad shape {:?} differs from output {:?}",
                grad_out.shape(),
                cache.output.shape()
            )));
        }
        let rows = grad_out.len() / self.filters;
        let mut g = grad_out.reshape(&[rows, self.filters])?;
        if self.activation == Activation::Relu {
            relu_gate(g.data_mut(), cache.output.data());
        }

        let mut gb = vec![0.0f64; self.filters];
        for row in g.data().chunks_exact(self.filters) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc += v as f64;
            }
        }
        self.grad_bias = Tensor::from_vec(&[self.filters], gb.into_iter().map(|v| v as f32).collect())?;
        self.grad_weight = cache
            .cols
            .transpose()?
            .matmul(&g)?
            .into_shape(self.weight.shape())?;

        let k = self.kernel;
        let w2 = self.weight.reshape(&[k * k * self.in_channels, self.filters])?;
        let grad_cols = g.matmul(&w2.transpose()?)?;
        col2im(&grad_cols, cache.input_shape, k)
    }
}

/// Unrolls every K×K×C patch into a row. Row order is (n, i, j); column
/// order is (di, dj, c), matching the flattened weight layout.
fn im2col(input: &Tensor, k: usize) -> Result<Tensor> {
    let (n, h, w, c) = nhwc(input, "im2col")?;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let row_len = k * k * c;
    let src = input.data();
    let mut cols = vec![0.0f32; n * oh * ow * row_len];
    let mut dst = cols.chunks_exact_mut(row_len);
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let row = dst.next().expect("row count");
                for di in 0..k {
                    let start = ((b * h + i + di) * w + j) * c;
                    row[di * k * c..(di + 1) * k * c].copy_from_slice(&src[start..start + k * c]);
                }
            }
        }
    }
    Tensor::from_vec(&[n * oh * ow, row_len], cols)
}

/// Scatter-adds patch-row gradients back onto the input grid.
fn col2im(cols: &Tensor, [n, h, w, c]: [usize; 4], k: usize) -> Result<Tensor> {
    let (oh, ow) = (h - k + 1, w - k + 1);
    let row_len = k * k * c;
    let mut out = vec![0.0f32; n * h * w * c];
    let mut rows = cols.data().chunks_exact(row_len);
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                let row = rows.next().expect("row count");
                for di in 0..k {
                    let start = ((b * h + i + di) * w + j) * c;
                    let dst = &mut out[start..start + k * c];
                    for (d, s) in dst.iter_mut().zip(&row[di * k * c..(di + 1) * k * c]) {
                        *d += s;
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[n, h, w, c], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_first_conv_shape() {
        let mut rng = Rng::new(0);
        let mut conv = Conv2d::init(3, 3, 16, Activation::Relu, &mut rng).unwrap();
        let x = rng.uniform(&[1, 108, 108, 3], 0.0, 1.0).unwrap();
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 106, 106, 16]);
    }

    #[test]
    fn all_ones_sum_to_nine() {
        let w = Tensor::new(&[3, 3, 1, 1], 1.0).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let mut conv = Conv2d::from_params(w, b, Activation::None).unwrap();
        let x = Tensor::new(&[1, 3, 3, 1], 1.0).unwrap();
        let y = conv.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn kernel_larger_than_input() {
        let mut rng = Rng::new(0);
        let mut conv = Conv2d::init(3, 1, 1, Activation::None, &mut rng).unwrap();
        let x = Tensor::zeros(&[1, 2, 5, 1]).unwrap();
        assert!(matches!(conv.forward(&x, Mode::Eval), Err(Error::Shape(_))));
    }

    #[test]
    fn backward_requires_training_forward() {
        let mut rng = Rng::new(0);
        let mut conv = Conv2d::init(3, 1, 1, Activation::None, &mut rng).unwrap();
        let x = Tensor::zeros(&[1, 4, 4, 1]).unwrap();
        let g = Tensor::zeros(&[1, 2, 2, 1]).unwrap();
        assert!(matches!(conv.backward(&g), Err(Error::State(_))));
        conv.forward(&x, Mode::Eval).unwrap();
        assert!(matches!(conv.backward(&g), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(1);
        let mut conv = Conv2d::init(3, 2, 3, Activation::Relu, &mut rng).unwrap();
        let x = rng.uniform(&[2, 5, 5, 2], -1.0, 1.0).unwrap();
        let y = conv.forward(&x, Mode::Train).unwrap();
        let gx = conv.backward(&Tensor::zeros(y.shape()).unwrap()).unwrap();
        assert!(gx.data().iter().all(|&v| v == 0.0));
        assert!(conv.grad_weight.data().iter().all(|&v| v == 0.0));
        assert!(conv.grad_bias.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_by_one_kernel_hand_contraction() {
        // 2x2 single-channel input, 1x1 kernel mapping to one filter.
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![2.0]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let mut conv = Conv2d::from_params(w, b, Activation::None).unwrap();
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = conv.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0, 6.0, 8.0]);
        let g = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0, 0.5, -1.0, 2.0]).unwrap();
        let gx = conv.backward(&g).unwrap();
        // dW = 1*1 + 2*0.5 + 3*(-1) + 4*2 = 7; db = 1 + 0.5 - 1 + 2 = 2.5
        assert_eq!(conv.grad_weight.data(), &[7.0]);
        assert_eq!(conv.grad_bias.data(), &[2.5]);
        assert_eq!(gx.data(), &[2.0, 1.0, -2.0, 4.0]);
    }

    #[test]
    fn relu_gates_gradient() {
        let w = Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]).unwrap();
        let b = Tensor::zeros(&[1]).unwrap();
        let mut conv = Conv2d::from_params(w, b, Activation::Relu).unwrap();
        let x = Tensor::from_vec(&[1, 1, 2, 1], vec![-1.0, 3.0]).unwrap();
        let y = conv.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), &[0.0, 3.0]);
        let gx = conv.backward(&Tensor::new(&[1, 1, 2, 1], 1.0).unwrap()).unwrap();
        assert_eq!(gx.data(), &[0.0, 1.0]);
    }
}
