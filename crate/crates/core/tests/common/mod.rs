//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

pub mod gradcheck;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use specklenet::layers::Padding;
use specklenet::Tensor;

pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for relative errors, so components that are zero in
/// both the analytic and numeric gradient compare absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(lo..hi))
}

/// Uniform values with magnitude in `[0.05, 1)` and random sign, keeping
/// them away from the ReLU kink.
pub fn away_from_zero(rng: &mut impl Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.gen_range(0.05..1.0);
        if rng.gen::<bool>() {
            m
        } else {
            -m
        }
    })
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

pub fn max_rel_err(analytic: &Tensor<f64>, numeric: &Tensor<f64>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Central differences of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &Tensor<f64>, mut f: impl FnMut(&Tensor<f64>) -> f64) -> Tensor<f64> {
    let mut probe = x.clone();
    let mut out = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let up = f(&probe);
        probe.data_mut()[i] = orig - FD_STEP;
        let down = f(&probe);
        probe.data_mut()[i] = orig;
        out.data_mut()[i] = (up - down) / (2.0 * FD_STEP);
    }
    out
}

pub fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

/// `(out, pad_before)` along one axis, derived directly from the padding rule.
pub fn reference_extent(n: usize, k: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Same => {
            let out = n.div_ceil(stride);
            let total = ((out - 1) * stride + k).saturating_sub(n);
            (out, total / 2)
        }
        Padding::Valid => ((n - k) / stride + 1, 0),
    }
}

/// Direct-loop convolution: `out[y,x,o] = b[o] + Σ k[dy,dx,i,o]·in[y·s+dy−p, x·s+dx−p, i]`.
pub fn naive_conv(
    input: &Tensor<f64>,
    kernel: &Tensor<f64>,
    bias: &Tensor<f64>,
    stride: usize,
    padding: Padding,
) -> Tensor<f64> {
    let (h, w, c_in) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw, c_out) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[3]);
    let (oh, py) = reference_extent(h, kh, stride, padding);
    let (ow, px) = reference_extent(w, kw, stride, padding);
    let mut out = Tensor::zeros(&[oh, ow, c_out]);
    for y in 0..oh {
        for x in 0..ow {
            for o in 0..c_out {
                let mut acc = bias.data()[o];
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (y * stride + dy) as isize - py as isize;
                        let ix = (x * stride + dx) as isize - px as isize;
                        if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                            continue;
                        }
                        for i in 0..c_in {
                            acc += kernel.at(&[dy, dx, i, o]) * input.at(&[iy as usize, ix as usize, i]);
                        }
                    }
                }
                *out.at_mut(&[y, x, o]) = acc;
            }
        }
    }
    out
}

/// Direct-loop depthwise convolution.
pub fn naive_depthwise(
    input: &Tensor<f64>,
    kernel: &Tensor<f64>,
    bias: &Tensor<f64>,
    stride: usize,
    padding: Padding,
) -> Tensor<f64> {
    let (h, w, c) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let (kh, kw) = (kernel.shape()[0], kernel.shape()[1]);
    let (oh, py) = reference_extent(h, kh, stride, padding);
    let (ow, px) = reference_extent(w, kw, stride, padding);
    let mut out = Tensor::zeros(&[oh, ow, c]);
    for y in 0..oh {
        for x in 0..ow {
            for ch in 0..c {
                let mut acc = bias.data()[ch];
                for dy in 0..kh {
                    for dx in 0..kw {
                        let iy = (y * stride + dy) as isize - py as isize;
                        let ix = (x * stride + dx) as isize - px as isize;
                        if iy >= 0 && ix >= 0 && iy < h as isize && ix < w as isize {
                            acc += kernel.at(&[dy, dx, ch]) * input.at(&[iy as usize, ix as usize, ch]);
                        }
                    }
                }
                *out.at_mut(&[y, x, ch]) = acc;
            }
        }
    }
    out
}

/// Per-class F1 straight from (prediction, label) pairs by counting, with
/// 0 for undefined ratios. Returns `(per_class, macro, weighted)`.
pub fn brute_force_f1(preds: &[usize], labels: &[usize], n: usize) -> (Vec<f64>, f64, f64) {
    let mut f1 = Vec::with_capacity(n);
    let mut support = Vec::with_capacity(n);
    for c in 0..n {
        let tp = preds.iter().zip(labels).filter(|&(&p, &t)| p == c && t == c).count() as f64;
        let fp = preds.iter().zip(labels).filter(|&(&p, &t)| p == c && t != c).count() as f64;
        let fn_ = preds.iter().zip(labels).filter(|&(&p, &t)| p != c && t == c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1.push(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
        support.push(tp + fn_);
    }
    let macro_f1 = f1.iter().sum::<f64>() / n as f64;
    let total: f64 = support.iter().sum();
    let weighted = f1.iter().zip(&support).map(|(f, s)| f * s).sum::<f64>() / total;
    (f1, macro_f1, weighted)
}

/// Random labels and noisy predictions: each prediction is correct with
/// probability `hit`, otherwise uniform.
pub fn random_predictions(rng: &mut impl Rng, samples: usize, n: usize, hit: f64) -> (Vec<usize>, Vec<usize>) {
    let labels: Vec<usize> = (0..samples).map(|_| rng.gen_range(0..n)).collect();
    let preds = labels
        .iter()
        .map(|&t| if rng.gen_bool(hit) { t } else { rng.gen_range(0..n) })
        .collect();
    (preds, labels)
}
