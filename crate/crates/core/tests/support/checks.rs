//! Oracle checks shared by the focused tests and the acceptance suite.
//! Each returns the worst observed error so callers can assert and report.

use scalelab::layers::{Activation, BatchNorm, Conv2d, Dense, Dropout, Flatten, MaxPool2d, Mode};
use scalelab::model::{micro_arch, Model};
use scalelab::rng::Rng;
use scalelab::Tensor;

use super::reference::{self, Act};
use super::{dot, numeric_grad, to_f64, uniform, worst};

fn dims(rng: &mut Rng, min_side: usize) -> [usize; 4] {
    [
        1 + rng.below(3) as usize,
        min_side + rng.below(4) as usize,
        min_side + rng.below(4) as usize,
        1 + rng.below(3) as usize,
    ]
}

fn probe(rng: &mut Rng, shape: &[usize]) -> (Tensor, Vec<f64>) {
    let r = uniform(rng, shape, -1.0, 1.0);
    let r64 = to_f64(&r);
    (r, r64)
}

pub fn conv_grad(seed: u64, relu: bool) -> f64 {
    let mut rng = Rng::stream(seed, "check-conv", relu as u64);
    let [n, h, w, c] = dims(&mut rng, 4);
    let k = 1 + rng.below(3) as usize;
    let f = 1 + rng.below(3) as usize;
    let act = if relu { Activation::Relu } else { Activation::None };
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let weight = uniform(&mut rng, &[k, k, c, f], -0.5, 0.5);
    let bias = uniform(&mut rng, &[f], -0.2, 0.2);
    let mut layer = Conv2d::from_params(weight.clone(), bias.clone(), act).unwrap();
    let y = layer.forward(&x, Mode::Train).unwrap();
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    let shape = [n, h, w, c];
    let (x64, w64, b64) = (to_f64(&x), to_f64(&weight), to_f64(&bias));
    let obj = |x: &[f64], w: &[f64], b: &[f64]| dot(&reference::conv(x, shape, w, b, k, relu), &r64);
    let nx = numeric_grad(&x64, |v| obj(v, &w64, &b64));
    let nw = numeric_grad(&w64, |v| obj(&x64, v, &b64));
    let nb = numeric_grad(&b64, |v| obj(&x64, &w64, v));
    worst(&gx, &nx)
        .max(worst(&layer.grad_weight, &nw))
        .max(worst(&layer.grad_bias, &nb))
}

pub fn pool_grad(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-pool", 0);
    let [n, h, w, c] = dims(&mut rng, 2);
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let mut layer = MaxPool2d::new(2);
    let y = layer.forward(&x, Mode::Train).unwrap();
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    let nx = numeric_grad(&to_f64(&x), |v| dot(&reference::max_pool(v, [n, h, w, c], 2), &r64));
    worst(&gx, &nx)
}

pub fn dropout_grad(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-dropout", 0);
    let [n, h, w, c] = dims(&mut rng, 2);
    let rate = [0.25, 0.5][rng.below(2) as usize];
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let mask_rng = Rng::stream(seed, "check-dropout-mask", 0);
    let mut layer = Dropout::new(rate).unwrap();
    let y = layer.forward(&x, Mode::Train, &mut mask_rng.clone()).unwrap();
    let (_, mask) =
        scalelab::layers::dropout_apply(&x, rate, Mode::Train, &mut mask_rng.clone()).unwrap();
    let mask: Vec<f64> = mask.unwrap().iter().map(|&m| m as f64).collect();
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    let nx = numeric_grad(&to_f64(&x), |v| {
        let out: Vec<f64> = v.iter().zip(&mask).map(|(a, m)| a * m).collect();
        dot(&out, &r64)
    });
    worst(&gx, &nx)
}

pub fn batchnorm_grad(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-bn", 0);
    let [mut n, h, w, c] = dims(&mut rng, 1);
    n += 1;
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let mut layer = BatchNorm::new(c).unwrap();
    layer.gamma = uniform(&mut rng, &[c], 0.5, 1.5);
    layer.beta = uniform(&mut rng, &[c], -0.5, 0.5);
    let y = layer.forward(&x, Mode::Train).unwrap();
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    let (x64, g64, b64) = (to_f64(&x), to_f64(&layer.gamma), to_f64(&layer.beta));
    let obj = |x: &[f64], g: &[f64], b: &[f64]| dot(&reference::batch_norm(x, c, g, b), &r64);
    let nx = numeric_grad(&x64, |v| obj(v, &g64, &b64));
    let ng = numeric_grad(&g64, |v| obj(&x64, v, &b64));
    let nb = numeric_grad(&b64, |v| obj(&x64, &g64, v));
    worst(&gx, &nx)
        .max(worst(&layer.grad_gamma, &ng))
        .max(worst(&layer.grad_beta, &nb))
}

pub fn flatten_grad(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-flatten", 0);
    let [n, h, w, c] = dims(&mut rng, 1);
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let mut layer = Flatten::new();
    let y = layer.forward(&x, Mode::Train).unwrap();
    assert_eq!(y.shape(), &[n, h * w * c]);
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    assert_eq!(gx.shape(), x.shape());
    let nx = numeric_grad(&to_f64(&x), |v| dot(v, &r64));
    worst(&gx, &nx)
}

pub fn dense_grad(seed: u64, activation: Activation) -> f64 {
    let mut rng = Rng::stream(seed, "check-dense", activation as u64);
    let n = 1 + rng.below(4) as usize;
    let inputs = 1 + rng.below(8) as usize;
    let units = 2 + rng.below(4) as usize;
    let x = uniform(&mut rng, &[n, inputs], -1.0, 1.0);
    let weight = uniform(&mut rng, &[inputs, units], -0.8, 0.8);
    let bias = uniform(&mut rng, &[units], -0.3, 0.3);
    let act = match activation {
        Activation::Relu => Act::Relu,
        Activation::Softmax => Act::Softmax,
        Activation::None => Act::Linear,
    };
    let mut layer = Dense::from_params(weight.clone(), bias.clone(), activation).unwrap();
    let y = layer.forward(&x, Mode::Train).unwrap();
    let (r, r64) = probe(&mut rng, y.shape());
    let gx = layer.backward(&r).unwrap();
    let (x64, w64, b64) = (to_f64(&x), to_f64(&weight), to_f64(&bias));
    let obj = |x: &[f64], w: &[f64], b: &[f64]| dot(&reference::dense(x, n, w, b, act), &r64);
    let nx = numeric_grad(&x64, |v| obj(v, &w64, &b64));
    let nw = numeric_grad(&w64, |v| obj(&x64, v, &b64));
    let nb = numeric_grad(&b64, |v| obj(&x64, &w64, v));
    worst(&gx, &nx)
        .max(worst(&layer.grad_weight, &nw))
        .max(worst(&layer.grad_bias, &nb))
}

/// Whole-network check on the 8x8x1 micro model: conv(2 filters, 3x3,
/// relu), 2x2 pool, flatten, dense(2), cross-entropy.
pub fn end_to_end_grad(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-e2e", 0);
    let mut model = Model::build(&micro_arch(8, 1, 2), seed).unwrap();
    for p in model.params_mut() {
        if p.rank() == 1 {
            *p = uniform(&mut rng, p.shape(), -0.2, 0.2);
        }
    }
    let n = 2 + rng.below(3) as usize;
    let x = uniform(&mut rng, &[n, 8, 8, 1], 0.0, 1.0);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(2) as usize).collect();
    model.compute_gradients(&x, &labels).unwrap();
    let params: Vec<Vec<f64>> = model.params().iter().map(|t| to_f64(t)).collect();
    let grads: Vec<Tensor> = model.grads().into_iter().cloned().collect();
    assert_eq!(params.len(), 4);
    let x64 = to_f64(&x);
    let loss = |p: &[Vec<f64>]| {
        let a = reference::conv(&x64, [n, 8, 8, 1], &p[0], &p[1], 3, true);
        let b = reference::max_pool(&a, [n, 6, 6, 2], 2);
        let logits = reference::dense(&b, n, &p[2], &p[3], Act::Linear);
        reference::cross_entropy(&logits, &labels)
    };
    let mut worst_err: f64 = 0.0;
    for i in 0..params.len() {
        let numeric = numeric_grad(&params[i], |v| {
            let mut p = params.clone();
            p[i] = v.to_vec();
            loss(&p)
        });
        worst_err = worst_err.max(worst(&grads[i], &numeric));
    }
    worst_err
}

/// Largest |im2col conv - nested-loop conv| over one random small case.
pub fn conv_oracle(seed: u64) -> f64 {
    let mut rng = Rng::stream(seed, "check-conv-oracle", 0);
    let n = 1 + rng.below(3) as usize;
    let k = 1 + rng.below(5) as usize;
    let h = k + rng.below(8) as usize;
    let w = k + rng.below(8) as usize;
    let c = 1 + rng.below(4) as usize;
    let f = 1 + rng.below(6) as usize;
    let relu = rng.below(2) == 1;
    let x = uniform(&mut rng, &[n, h, w, c], -1.0, 1.0);
    let weight = uniform(&mut rng, &[k, k, c, f], -1.0, 1.0);
    let bias = uniform(&mut rng, &[f], -1.0, 1.0);
    let act = if relu { Activation::Relu } else { Activation::None };
    let mut layer = Conv2d::from_params(weight.clone(), bias.clone(), act).unwrap();
    let y = layer.forward(&x, Mode::Eval).unwrap();
    assert_eq!(y.shape(), &[n, h - k + 1, w - k + 1, f]);
    let expected = reference::conv(&to_f64(&x), [n, h, w, c], &to_f64(&weight), &to_f64(&bias), k, relu);
    y.data()
        .iter()
        .zip(&expected)
        .map(|(&a, &b)| (a as f64 - b).abs())
        .fold(0.0, f64::max)
}

/// Probability that a random positive outranks a random negative, ties
/// counted one half, by explicit pair counting.
pub fn mann_whitney(scores: &[f64], labels: &[usize]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random scored instance with both classes and deliberate ties.
pub fn auc_instance(seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = Rng::stream(seed, "check-auc", 0);
    let n = 2 + rng.below(999) as usize;
    let levels = 1 + rng.below(50);
    let mut labels: Vec<usize> = (0..n).map(|_| rng.below(2) as usize).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = labels
        .iter()
        .map(|&y| {
            // coarse levels force ties; positives skew higher
            let raw = (rng.next_f64() + 0.3 * y as f64).min(1.0);
            (raw * levels as f64).floor() / levels as f64
        })
        .collect();
    (scores, labels)
}
