//! Naive nested-loop forward passes in f64, written independently of the
//! library's im2col and matmul paths.

pub const BN_EPS: f64 = 1e-5;

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Valid convolution, stride 1. `x` is NHWC `[n, h, w, c]`, `weight` is
/// `[k, k, c, f]`.
pub fn conv(
    x: &[f64],
    [n, h, w, c]: [usize; 4],
    weight: &[f64],
    bias: &[f64],
    k: usize,
    relu_out: bool,
) -> Vec<f64> {
    let f = bias.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = vec![0.0; n * oh * ow * f];
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for o in 0..f {
                    let mut acc = bias[o];
                    for di in 0..k {
                        for dj in 0..k {
                            for ch in 0..c {
                                acc += x[((b * h + i + di) * w + j + dj) * c + ch]
                                    * weight[((di * k + dj) * c + ch) * f + o];
                            }
                        }
                    }
                    out[((b * oh + i) * ow + j) * f + o] = if relu_out { relu(acc) } else { acc };
                }
            }
        }
    }
    out
}

pub fn max_pool(x: &[f64], [n, h, w, c]: [usize; 4], p: usize) -> Vec<f64> {
    let (oh, ow) = (h / p, w / p);
    let mut out = vec![0.0; n * oh * ow * c];
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    for di in 0..p {
                        for dj in 0..p {
                            best = best.max(x[((b * h + i * p + di) * w + j * p + dj) * c + ch]);
                        }
                    }
                    out[((b * oh + i) * ow + j) * c + ch] = best;
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Act {
    Relu,
    Softmax,
    Linear,
}

/// `x` is `[n, inputs]`, `weight` is `[inputs, units]`.
pub fn dense(x: &[f64], n: usize, weight: &[f64], bias: &[f64], act: Act) -> Vec<f64> {
    let units = bias.len();
    let inputs = x.len() / n;
    let mut out = vec![0.0; n * units];
    for b in 0..n {
        for u in 0..units {
            let mut acc = bias[u];
            for i in 0..inputs {
                acc += x[b * inputs + i] * weight[i * units + u];
            }
            out[b * units + u] = acc;
        }
        let row = &mut out[b * units..(b + 1) * units];
        match act {
            Act::Relu => row.iter_mut().for_each(|v| *v = relu(*v)),
            Act::Softmax => {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let total: f64 = row.iter().map(|v| (v - m).exp()).sum();
                row.iter_mut().for_each(|v| *v = (*v - m).exp() / total);
            }
            Act::Linear => {}
        }
    }
    out
}

/// Training-mode batch normalization over every axis but the last.
pub fn batch_norm(x: &[f64], c: usize, gamma: &[f64], beta: &[f64]) -> Vec<f64> {
    let m = (x.len() / c) as f64;
    let mut out = vec![0.0; x.len()];
    for ch in 0..c {
        let vals: Vec<f64> = x.iter().skip(ch).step_by(c).cloned().collect();
        let mean = vals.iter().sum::<f64>() / m;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
        for (idx, v) in vals.iter().enumerate() {
            out[idx * c + ch] = gamma[ch] * (v - mean) / (var + BN_EPS).sqrt() + beta[ch];
        }
    }
    out
}

/// Mean two-class cross-entropy on logits, probabilities floored at 1e-12.
pub fn cross_entropy(logits: &[f64], labels: &[usize]) -> f64 {
    let n = labels.len();
    let mut total = 0.0;
    for (b, &y) in labels.iter().enumerate() {
        let row = &logits[b * 2..b * 2 + 2];
        let m = row[0].max(row[1]);
        let z = (row[0] - m).exp() + (row[1] - m).exp();
        let p = (row[y] - m).exp() / z;
        total -= p.max(1e-12).ln();
    }
    total / n as f64
}
