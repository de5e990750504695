use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::Tensor;

/// Row-major flattening of each sample to `(N, H*W*C)`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode) -> Result<Tensor> {
        let n = input.shape()[0];
        let out = input.reshape(&[n, input.len() / n])?;
        self.input_shape = (mode == Mode::Train).then(|| input.shape().to_vec());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let shape = self
            .input_shape
            .take()
            .ok_or_else(|| Error::state("flatten backward without a training forward pass"))?;
        grad_out.reshape(&shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        let mut f = Flatten::new();
        let x = Tensor::zeros(&[1, 1, 1, 128]).unwrap();
        assert_eq!(f.forward(&x, Mode::Eval).unwrap().shape(), &[1, 128]);
        let x = Tensor::zeros(&[2, 2, 2, 3]).unwrap();
        assert_eq!(f.forward(&x, Mode::Eval).unwrap().shape(), &[2, 12]);
    }

    #[test]
    fn backward_inverts_forward() {
        let mut f = Flatten::new();
        let x = Tensor::from_vec(&[2, 1, 2, 2], (0..8).map(|v| v as f32).collect()).unwrap();
        let y = f.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.data(), x.data());
        assert_eq!(f.backward(&y).unwrap(), x);
    }
}
