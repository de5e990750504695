use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::Tensor;

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept by the running statistics at each training step.
pub const BN_MOMENTUM: f64 = 0.9;

/// Batch normalization over every axis except the last (channels).
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub channels: usize,
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub grad_gamma: Tensor,
    pub grad_beta: Tensor,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    shape: Vec<usize>,
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Result<Self> {
        let c = [channels];
        Ok(Self {
            channels,
            gamma: Tensor::new(&c, 1.0)?,
            beta: Tensor::zeros(&c)?,
            running_mean: Tensor::zeros(&c)?,
            running_var: Tensor::new(&c, 1.0)?,
            grad_gamma: Tensor::zeros(&c)?,
            grad_beta: Tensor::zeros(&c)?,
            cache: None,
        })
    }

    fn check(&self, input: &Tensor) -> Result<usize> {
        if input.rank() < 2 || input.shape()[input.rank() - 1] != self.channels {
            return Err(Error::shape(format!(
                "batchnorm expects {} channels on the last axis, got {:?}",
                self.channels,
                input.shape()
            )));
        }
        let per_channel = input.len() / self.channels;
        if per_channel == 0 {
            return Err(Error::InvalidBatch("batchnorm received an empty batch".into()));
        }
        Ok(per_channel)
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let m = self.check(input)?;
        let c = self.channels;
        let x = input.data();
        let gamma = self.gamma.data();
        let beta = self.beta.data();

        if mode == Mode::Eval {
            self.cache = None;
            let mean = self.running_mean.data();
            let var = self.running_var.data();
            let out = x
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let ch = i % c;
                    let xhat = (v as f64 - mean[ch] as f64) / (var[ch] as f64 + BN_EPSILON).sqrt();
                    (gamma[ch] as f64 * xhat + beta[ch] as f64) as f32
                })
                .collect();
            return Tensor::from_vec(input.shape(), out);
        }

        let mut mean = vec![0.0f64; c];
        for row in x.chunks_exact(c) {
            for (acc, &v) in mean.iter_mut().zip(row) {
                *acc += v as f64;
            }
        }
        mean.iter_mut().for_each(|v| *v /= m as f64);
        let mut var = vec![0.0f64; c];
        for row in x.chunks_exact(c) {
            for ((acc, &v), mu) in var.iter_mut().zip(row).zip(&mean) {
                let d = v as f64 - mu;
                *acc += d * d;
            }
        }
        var.iter_mut().for_each(|v| *v /= m as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPSILON).sqrt()).collect();

        let mut xhat = Vec::with_capacity(x.len());
        let mut out = Vec::with_capacity(x.len());
        for (i, &v) in x.iter().enumerate() {
            let ch = i % c;
            let h = (v as f64 - mean[ch]) * inv_std[ch];
            xhat.push(h);
            out.push((gamma[ch] as f64 * h + beta[ch] as f64) as f32);
        }

        for ((rm, rv), (mu, v)) in self
            .running_mean
            .data_mut()
            .iter_mut()
            .zip(self.running_var.data_mut())
            .zip(mean.iter().zip(&var))
        {
            *rm = (BN_MOMENTUM * *rm as f64 + (1.0 - BN_MOMENTUM) * mu) as f32;
            *rv = (BN_MOMENTUM * *rv as f64 + (1.0 - BN_MOMENTUM) * v) as f32;
        }

        self.cache = Some(BnCache {
            shape: input.shape().to_vec(),
            xhat,
            inv_std,
        });
        Tensor::from_vec(input.shape(), out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::state("batchnorm backward without a training forward pass"))?;
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::shape(format!(
                "batchnorm backward: grad shape {:?} differs from {:?}",
                grad_out.shape(),
                cache.shape
            )));
        }
        let c = self.channels;
        let m = (grad_out.len() / c) as f64;
        let g = grad_out.data();
        let mut sum_g = vec![0.0f64; c];
        let mut sum_gx = vec![0.0f64; c];
        for (i, (&gv, &h)) in g.iter().zip(&cache.xhat).enumerate() {
            let ch = i % c;
            sum_g[ch] += gv as f64;
            sum_gx[ch] += gv as f64 * h;
        }
        let gamma = self.gamma.data();
        let grad_in: Vec<f32> = g
            .iter()
            .zip(&cache.xhat)
            .enumerate()
            .map(|(i, (&gv, &h))| {
                let ch = i % c;
                let scale = gamma[ch] as f64 * cache.inv_std[ch] / m;
                (scale * (m * gv as f64 - sum_g[ch] - h * sum_gx[ch])) as f32
            })
            .collect();
        self.grad_gamma = Tensor::from_vec(&[c], sum_gx.iter().map(|&v| v as f32).collect())?;
        self.grad_beta = Tensor::from_vec(&[c], sum_g.iter().map(|&v| v as f32).collect())?;
        Tensor::from_vec(&cache.shape, grad_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardized_channel_is_unchanged() {
        let mut bn = BatchNorm::new(1).unwrap();
        let x = Tensor::from_vec(&[4, 1], vec![-1.0, 1.0, -1.0, 1.0]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        // var = 1, so the epsilon shrinks values by sqrt(1 + 1e-5)
        assert!(y.max_abs_diff(&x).unwrap() < 1e-4);
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNorm::new(2).unwrap();
        bn.beta = Tensor::from_vec(&[2], vec![0.25, -3.0]).unwrap();
        let x = Tensor::from_vec(&[1, 2, 2, 2], vec![5.0, 1.0, 5.0, 1.0, 5.0, 1.0, 5.0, 1.0]).unwrap();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for pair in y.data().chunks(2) {
            assert!((pair[0] - 0.25).abs() < 1e-6);
            assert!((pair[1] + 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::new(1).unwrap();
        let x = Tensor::from_vec(&[2, 1], vec![1.0, 3.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-6);
        assert!((bn.running_var.data()[0] - 1.0).abs() < 1e-6); // 0.9*1 + 0.1*1
        let y = bn.forward(&x, Mode::Eval).unwrap();
        let expect = (1.0 - 0.2) / (1.0f64 + 1e-5).sqrt();
        assert!((y.data()[0] as f64 - expect).abs() < 1e-6);
    }

    #[test]
    fn wrong_channel_count() {
        let mut bn = BatchNorm::new(3).unwrap();
        let x = Tensor::zeros(&[2, 2]).unwrap();
        assert!(matches!(bn.forward(&x, Mode::Train), Err(Error::Shape(_))));
    }
}
