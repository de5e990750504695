use crate::error::{Error, Result};
use crate::layers::{nhwc, Mode};
use crate::tensor::Tensor;

/// Square max pooling with stride equal to the window. Trailing rows and
/// columns that do not fill a window are dropped.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub pool: usize,
    cache: Option<PoolCache>,
}

#[derive(Debug, Clone)]
struct PoolCache {
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    /// Flat input index of the winning element for each output element.
    argmax: Vec<usize>,
}

impl MaxPool2d {
    pub fn new(pool: usize) -> Self {
        Self { pool, cache: None }
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let (n, h, w, c) = nhwc(input, "maxpool2d")?;
        let p = self.pool;
        if p == 0 || h < p || w < p {
            return Err(Error::shape(format!(
                "maxpool2d window {p}x{p} does not fit a {h}x{w} input"
            )));
        }
        let (oh, ow) = ((h - p) / p + 1, (w - p) / p + 1);
        let src = input.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        let mut argmax = Vec::with_capacity(n * oh * ow * c);
        for b in 0..n {
            for i in 0..oh {
                for j in 0..ow {
                    for ch in 0..c {
                        // Row-major scan; strict > keeps the first of tied maxima.
                        let mut best_idx = ((b * h + i * p) * w + j * p) * c + ch;
                        let mut best = src[best_idx];
                        for di in 0..p {
                            for dj in 0..p {
                                let idx = ((b * h + i * p + di) * w + j * p + dj) * c + ch;
                                if src[idx] > best {
                                    best = src[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        let out = Tensor::from_vec(&[n, oh, ow, c], out)?;
        self.cache = match mode {
            Mode::Train => Some(PoolCache {
                input_shape: input.shape().to_vec(),
                output_shape: out.shape().to_vec(),
                argmax,
            }),
            Mode::Eval => None,
        };
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::state("maxpool2d backward without a training forward pass"))?;
        if grad_out.shape() != cache.output_shape.as_slice() {
            return Err(Error::shape(format!(
                "maxpool2d backward: grad shape {:?} differs from output {:?}",
                grad_out.shape(),
                cache.output_shape
            )));
        }
        let mut grad_in = Tensor::zeros(&cache.input_shape)?;
        let dst = grad_in.data_mut();
        for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
            dst[idx] += g;
        }
        Ok(grad_in)
    }
}
