use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Inverted dropout. Returns the output and, in training mode with a nonzero
/// rate, the multiplicative mask that was applied (0 or `1/(1-rate)`).
pub fn dropout_apply(
    input: &Tensor,
    rate: f64,
    mode: Mode,
    rng: &mut Rng,
) -> Result<(Tensor, Option<Vec<f32>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidRate(rate));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = (1.0 / (1.0 - rate)) as f32;
    let mask: Vec<f32> = (0..input.len())
        .map(|_| if rng.next_f64() < rate { 0.0 } else { keep })
        .collect();
    let data = input.data().iter().zip(&mask).map(|(x, m)| x * m).collect();
    Ok((Tensor::from_vec(input.shape(), data)?, Some(mask)))
}

#[derive(Debug, Clone)]
pub struct Dropout {
    pub rate: f64,
    cache: Option<DropoutCache>,
}

#[derive(Debug, Clone)]
struct DropoutCache {
    shape: Vec<usize>,
    mask: Option<Vec<f32>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidRate(rate));
        }
        Ok(Self { rate, cache: None })
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        let (out, mask) = dropout_apply(input, self.rate, mode, rng)?;
        self.cache = match mode {
            Mode::Train => Some(DropoutCache {
                shape: input.shape().to_vec(),
                mask,
            }),
            Mode::Eval => None,
        };
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::state("dropout backward without a training forward pass"))?;
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(Error::shape(format!(
                "dropout backward: grad shape {:?} differs from {:?}",
                grad_out.shape(),
                cache.shape
            )));
        }
        match cache.mask {
            None => Ok(grad_out.clone()),
            Some(mask) => {
                let data = grad_out.data().iter().zip(&mask).map(|(g, m)| g * m).collect();
                Tensor::from_vec(grad_out.shape(), data)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let mut rng = Rng::new(0);
        let x = rng.uniform(&[4, 5], -1.0, 1.0).unwrap();
        let (y, _) = dropout_apply(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn eval_is_identity() {
        let mut rng = Rng::new(0);
        let x = rng.uniform(&[4, 5], -1.0, 1.0).unwrap();
        let (y, mask) = dropout_apply(&x, 0.9, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(mask.is_none());
    }

    #[test]
    fn rate_of_one_rejected() {
        let mut rng = Rng::new(0);
        let x = Tensor::zeros(&[2]).unwrap();
        assert!(matches!(
            dropout_apply(&x, 1.0, Mode::Train, &mut rng),
            Err(Error::InvalidRate(_))
        ));
        assert!(Dropout::new(-0.1).is_err());
    }

    #[test]
    fn expectation_is_preserved() {
        let mut rng = Rng::new(17);
        let x = Tensor::new(&[1_000_000], 1.0).unwrap();
        let (y, _) = dropout_apply(&x, 0.5, Mode::Train, &mut rng).unwrap();
        assert!((y.mean() - 1.0).abs() < 0.01, "mean {}", y.mean());
        assert!(y.data().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn backward_reuses_forward_mask() {
        let mut rng = Rng::new(2);
        let mut d = Dropout::new(0.5).unwrap();
        let x = Tensor::new(&[64], 1.0).unwrap();
        let y = d.forward(&x, Mode::Train, &mut rng).unwrap();
        let g = d.backward(&Tensor::new(&[64], 1.0).unwrap()).unwrap();
        assert_eq!(g, y);
    }
}
