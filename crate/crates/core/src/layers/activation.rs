use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Probabilities are clamped to this floor before taking the log.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

pub fn relu<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad_out` where `input > 0`; the subgradient at exactly zero is 0.
pub fn relu_backward<T: Element>(input: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad_out.shape() {
        return Err(Error::shape("relu_backward", input.shape(), grad_out.shape()));
    }
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Spatial mean per channel: `[h, w, c] -> [c]`.
pub fn global_avg_pool<T: Element>(input: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = input.hwc()?;
    let mut out = vec![T::zero(); c];
    for px in input.data().chunks_exact(c) {
        out.iter_mut().zip(px).for_each(|(o, &v)| *o += v);
    }
    let area = T::from_f64((h * w) as f64);
    out.iter_mut().for_each(|o| *o = *o / area);
    Tensor::new(vec![c], out)
}

/// Spreads `grad_out[i] / (h·w)` over every position of channel `i`.
pub fn gap_backward<T: Element>(h: usize, w: usize, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if h == 0 || w == 0 {
        return Err(Error::InvalidShape(format!("gap_backward over {h}x{w}")));
    }
    let c = grad_out.len();
    let area = T::from_f64((h * w) as f64);
    let spread: Vec<T> = grad_out.data().iter().map(|&g| g / area).collect();
    let mut data = Vec::with_capacity(h * w * c);
    for _ in 0..h * w {
        data.extend_from_slice(&spread);
    }
    Tensor::new(vec![h, w, c], data)
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Element>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    if logits.is_empty() {
        return Err(Error::Empty("logits"));
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("softmax logits"));
    }
    let max = logits.data().iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.data().iter().map(|&v| (v - max).exp()).collect();
    let total: T = out.iter().copied().sum();
    out.iter_mut().for_each(|v| *v = *v / total);
    Tensor::new(logits.shape().to_vec(), out)
}

/// Gradient with respect to logits given the gradient with respect to the
/// softmax output: `p ⊙ (g − ⟨g, p⟩)`.
pub fn softmax_backward<T: Element>(probs: &Tensor<T>, grad_probs: &Tensor<T>) -> Result<Tensor<T>> {
    if probs.shape() != grad_probs.shape() {
        return Err(Error::shape("softmax_backward", probs.shape(), grad_probs.shape()));
    }
    let dot: T = probs.data().iter().zip(grad_probs.data()).map(|(&p, &g)| p * g).sum();
    let data = probs
        .data()
        .iter()
        .zip(grad_probs.data())
        .map(|(&p, &g)| p * (g - dot))
        .collect();
    Tensor::new(probs.shape().to_vec(), data)
}

/// `−ln(max(probs[label], 1e-12))`.
pub fn cross_entropy<T: Element>(probs: &Tensor<T>, label: usize) -> Result<T> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    let p = probs.data()[label].max(T::from_f64(PROBABILITY_FLOOR));
    Ok(-p.ln())
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`:
/// `probs − one_hot(label)`.
pub fn softmax_cross_entropy_grad<T: Element>(probs: &Tensor<T>, label: usize) -> Result<Tensor<T>> {
    if label >= probs.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: probs.len(),
        });
    }
    let mut g = probs.clone();
    g.data_mut()[label] -= T::one();
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(data.to_vec()).unwrap()
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&v(&[-1.0, 0.0, 2.0])).data(), [0.0, 0.0, 2.0]);
        let pos = v(&[0.5, 3.0, 1e-9]);
        assert_eq!(relu(&pos), pos);
        let g = relu_backward(&v(&[-1.0, 2.0]), &v(&[5.0, 5.0])).unwrap();
        assert_eq!(g.data(), [0.0, 5.0]);
        assert_eq!(relu_backward(&v(&[0.0]), &v(&[7.0])).unwrap().data(), [0.0]);
    }

    #[test]
    fn gap_cases() {
        let x = Tensor::new(vec![2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(global_avg_pool(&x).unwrap().data(), [2.5]);
        let c = Tensor::<f64>::full(&[3, 5, 4], 0.75);
        assert_eq!(global_avg_pool(&c).unwrap().data(), [0.75; 4]);
        let g = gap_backward(2, 2, &v(&[2.0])).unwrap();
        assert_eq!(g.shape(), [2, 2, 1]);
        assert_eq!(g.data(), [0.5; 4]);
    }

    #[test]
    fn softmax_cases() {
        let uniform = softmax(&Tensor::<f64>::zeros(&[59])).unwrap();
        assert!(uniform.data().iter().all(|&p| (p - 1.0 / 59.0).abs() < 1e-15));

        let p = softmax(&v(&[1f64.ln(), 3f64.ln()])).unwrap();
        assert!((p.data()[0] - 0.25).abs() < 1e-15 && (p.data()[1] - 0.75).abs() < 1e-15);

        let base = v(&[0.3, -1.2, 4.0]);
        let shifted = base.map(|x| x + 100.0);
        let (a, b) = (softmax(&base).unwrap(), softmax(&shifted).unwrap());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(softmax(&v(&[1.0, f64::NAN])).is_err());
        assert!(softmax(&v(&[1000.0, 0.0])).unwrap().all_finite());
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&v(&[0.0, 1.0]), 1).unwrap(), 0.0);
        let uniform = Tensor::<f64>::full(&[59], 1.0 / 59.0);
        let loss = cross_entropy(&uniform, 3).unwrap();
        assert!((loss - 59f64.ln()).abs() < 1e-12);
        assert!((loss - 4.0775).abs() < 1e-4);
        assert!((cross_entropy(&v(&[1.0, 0.0]), 1).unwrap() - 1e-12f64.ln().abs()).abs() < 1e-9);
        assert!(matches!(
            cross_entropy(&uniform, 59),
            Err(Error::LabelOutOfRange { label: 59, classes: 59 })
        ));
        let g = softmax_cross_entropy_grad(&v(&[0.5, 0.5]), 0).unwrap();
        assert_eq!(g.data(), [-0.5, 0.5]);
    }
}
