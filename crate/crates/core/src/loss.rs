//! Softmax and the binary cross-entropy objective.
//!
//! With a two-unit output head, softmax cross-entropy over the logits is the
//! same function as sigmoid binary cross-entropy on the logit difference
//! `z = l1 - l0`; both forms are provided and agree numerically.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Smallest probability fed to `ln`, so a saturated softmax cannot produce an
/// infinite loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Mean batch loss and its gradient with respect to the logits.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub loss: f64,
    pub grad_logits: Tensor,
}

fn rows(logits: &Tensor) -> Result<(usize, usize)> {
    match *logits.shape() {
        [n, k] => Ok((n, k)),
        _ => Err(Error::shape(format!(
            "expected (N, classes) logits, got {:?}",
            logits.shape()
        ))),
    }
}

fn softmax_row(row: &[f32], out: &mut [f64]) {
    let max = row.iter().fold(f32::NEG_INFINITY, |a, &b| a.max(b)) as f64;
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v as f64 - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// Row-wise softmax with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    let (_, k) = rows(logits)?;
    if !logits.all_finite() {
        return Err(Error::Numeric("softmax input contains NaN or infinity".into()));
    }
    let mut buf = vec![0.0f64; k];
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        softmax_row(row, &mut buf);
        out.extend(buf.iter().map(|&p| p as f32));
    }
    Tensor::from_vec(logits.shape(), out)
}

fn check_labels(labels: &[usize], n: usize, classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(format!(
            "{} labels for a batch of {n}",
            labels.len()
        )));
    }
    match labels.iter().position(|&y| y >= classes.min(2)) {
        Some(index) => Err(Error::InvalidLabel {
            index,
            label: labels[index],
        }),
        None => Ok(()),
    }
}

/// Batch-mean cross-entropy of `softmax(logits)` against class indices.
/// The gradient is `(p - onehot(y)) / N`.
pub fn cross_entropy_loss(logits: &Tensor, labels: &[usize]) -> Result<LossValue> {
    let (n, k) = rows(logits)?;
    check_labels(labels, n, k)?;
    if !logits.all_finite() {
        return Err(Error::Numeric("logits contain NaN or infinity".into()));
    }
    let mut p = vec![0.0f64; k];
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(n * k);
    for (row, &y) in logits.data().chunks_exact(k).zip(labels) {
        softmax_row(row, &mut p);
        loss -= p[y].max(PROB_FLOOR).ln();
        for (j, &pj) in p.iter().enumerate() {
            let target = if j == y { 1.0 } else { 0.0 };
            grad.push(((pj - target) / n as f64) as f32);
        }
    }
    Ok(LossValue {
        loss: loss / n as f64,
        grad_logits: Tensor::from_vec(&[n, k], grad)?,
    })
}

/// Sigmoid binary cross-entropy on the logit differences `z = l1 - l0`,
/// batch mean. Same clamping as [`cross_entropy_loss`].
pub fn binary_cross_entropy(logit_diff: &[f64], labels: &[usize]) -> Result<f64> {
    check_labels(labels, logit_diff.len(), 2)?;
    if logit_diff.is_empty() {
        return Err(Error::InvalidData("empty batch".into()));
    }
    let mut total = 0.0;
    for (&z, &y) in logit_diff.iter().zip(labels) {
        if !z.is_finite() {
            return Err(Error::Numeric("logit difference is not finite".into()));
        }
        // sigma(z) and 1 - sigma(z) without cancellation
        let (p1, p0) = if z >= 0.0 {
            let e = (-z).exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            let e = z.exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        };
        let p = if y == 1 { p1 } else { p0 };
        total -= p.max(PROB_FLOOR).ln();
    }
    Ok(total / logit_diff.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn t(shape: &[usize], v: &[f32]) -> Tensor {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = softmax(&t(&[1, 2], &[0.0, 0.0])).unwrap();
        assert_eq!(p.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax(&t(&[1, 2], &[0.3, -1.2])).unwrap();
        let b = softmax(&t(&[1, 2], &[100.3, 98.8])).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-6);
    }

    #[test]
    fn softmax_saturated_pair() {
        let p = softmax(&t(&[1, 2], &[10.0, -10.0])).unwrap();
        // 64-bit closed form: 1 / (1 + e^20)
        let small = 1.0 / (1.0 + 20f64.exp());
        assert!((small - 2.0611536e-9).abs() < 1e-15);
        assert!((p.data()[1] as f64 - small).abs() < 1e-15);
        assert!((p.data()[0] as f64 - (1.0 - small)).abs() < 1e-7);
    }

    #[test]
    fn softmax_rejects_nan() {
        assert!(matches!(
            softmax(&t(&[1, 2], &[f32::NAN, 0.0])),
            Err(Error::Numeric(_))
        ));
        assert!(matches!(
            softmax(&t(&[1, 2], &[f32::INFINITY, 0.0])),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn uniform_prediction_costs_ln2() {
        let lv = cross_entropy_loss(&t(&[1, 2], &[0.0, 0.0]), &[0]).unwrap();
        assert!((lv.loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(lv.grad_logits.data(), &[-0.5, 0.5]);

        let lv = cross_entropy_loss(&t(&[2, 2], &[0.0, 0.0, 0.0, 0.0]), &[0, 1]).unwrap();
        assert_eq!(lv.grad_logits.data(), &[-0.25, 0.25, 0.25, -0.25]);
    }

    #[test]
    fn confident_correct_prediction_costs_nothing() {
        let lv = cross_entropy_loss(&t(&[1, 2], &[-50.0, 50.0]), &[1]).unwrap();
        assert!(lv.loss < 1e-12);
        // e^-100 is below the floor, so the wrong label costs -ln(1e-12)
        let lv = cross_entropy_loss(&t(&[1, 2], &[-50.0, 50.0]), &[0]).unwrap();
        assert!((lv.loss + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn label_out_of_domain() {
        assert!(matches!(
            cross_entropy_loss(&t(&[2, 2], &[0.0; 4]), &[0, 2]),
            Err(Error::InvalidLabel { index: 1, label: 2 })
        ));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(21);
        let logits = rng.uniform(&[6, 2], -3.0, 3.0).unwrap();
        let labels = [0, 1, 1, 0, 1, 0];
        let analytic = cross_entropy_loss(&logits, &labels).unwrap().grad_logits;
        // 64-bit loss evaluated directly from the definition
        let loss64 = |l: &[f64]| -> f64 {
            l.chunks(2)
                .zip(&labels)
                .map(|(r, &y)| {
                    let m = r[0].max(r[1]);
                    let lse = m + ((r[0] - m).exp() + (r[1] - m).exp()).ln();
                    lse - r[y]
                })
                .sum::<f64>()
                / labels.len() as f64
        };
        let base: Vec<f64> = logits.data().iter().map(|&v| v as f64).collect();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut up = base.clone();
            up[i] += h;
            let mut dn = base.clone();
            dn[i] -= h;
            let numeric = (loss64(&up) - loss64(&dn)) / (2.0 * h);
            let a = analytic.data()[i] as f64;
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
            assert!(rel <= 1e-4, "index {i}: analytic {a}, numeric {numeric}");
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut rng = Rng::new(8);
        let logits = rng.uniform(&[16, 2], -5.0, 5.0).unwrap();
        let labels: Vec<usize> = (0..16).map(|i| i % 2).collect();
        let lv = cross_entropy_loss(&logits, &labels).unwrap();
        for row in lv.grad_logits.data().chunks(2) {
            assert!((row[0] + row[1]).abs() <= 1e-7);
        }
    }

    #[test]
    fn softmax_and_sigmoid_forms_agree() {
        let mut rng = Rng::new(5);
        let logits = rng.uniform(&[32, 2], -8.0, 8.0).unwrap();
        let labels: Vec<usize> = (0..32).map(|_| rng.below(2) as usize).collect();
        let ce = cross_entropy_loss(&logits, &labels).unwrap().loss;
        let diffs: Vec<f64> = logits
            .data()
            .chunks(2)
            .map(|r| r[1] as f64 - r[0] as f64)
            .collect();
        let bce = binary_cross_entropy(&diffs, &labels).unwrap();
        assert!((ce - bce).abs() < 1e-6, "{ce} vs {bce}");
    }

    #[test]
    fn loss_is_shift_invariant() {
        let mut rng = Rng::new(6);
        let logits = rng.uniform(&[8, 2], -2.0, 2.0).unwrap();
        let labels = [1, 0, 0, 1, 1, 1, 0, 0];
        let shifted = logits.add_scalar(3.5);
        let a = cross_entropy_loss(&logits, &labels).unwrap().loss;
        let b = cross_entropy_loss(&shifted, &labels).unwrap().loss;
        assert!((a - b).abs() < 1e-6);
    }
}
