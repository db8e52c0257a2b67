use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams<T = f32> {
    /// `[n_in, n_out]`
    pub weights: Tensor<T>,
    /// `[n_out]`
    pub bias: Tensor<T>,
}

impl<T: Element> DenseParams<T> {
    pub fn new(weights: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let p = Self { weights, bias };
        p.dims()?;
        Ok(p)
    }

    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[n_in, n_out]),
            bias: Tensor::zeros(&[n_out]),
        }
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        let &[n_in, n_out] = self.weights.shape() else {
            return Err(Error::InvalidShape(format!(
                "dense weights must be [n_in, n_out], got {:?}",
                self.weights.shape()
            )));
        };
        if self.bias.shape() != [n_out] {
            return Err(Error::shape("dense bias", self.bias.shape(), &[n_out]));
        }
        Ok((n_in, n_out))
    }
}

/// `output = inputᵀ · weights + bias`. Any input rank is accepted as long as
/// its element count equals `n_in`.
pub fn dense_forward<T: Element>(input: &Tensor<T>, p: &DenseParams<T>) -> Result<Tensor<T>> {
    let (n_in, n_out) = p.dims()?;
    if input.len() != n_in {
        return Err(Error::shape("dense input vs weights", input.shape(), p.weights.shape()));
    }
    let mut out = p.bias.data().to_vec();
    for (&x, row) in input.data().iter().zip(p.weights.data().chunks_exact(n_out)) {
        out.iter_mut().zip(row).for_each(|(o, &w)| *o += x * w);
    }
    Tensor::new(vec![n_out], out)
}

pub fn dense_backward<T: Element>(
    input: &Tensor<T>,
    p: &DenseParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n_in, n_out) = p.dims()?;
    if input.len() != n_in {
        return Err(Error::shape("dense input vs weights", input.shape(), p.weights.shape()));
    }
    if grad_out.shape() != [n_out] {
        return Err(Error::shape("dense_backward grad_out", grad_out.shape(), &[n_out]));
    }
    let g = grad_out.data();
    let mut grad_w = Vec::with_capacity(n_in * n_out);
    let mut grad_x = Vec::with_capacity(n_in);
    for (&x, row) in input.data().iter().zip(p.weights.data().chunks_exact(n_out)) {
        grad_w.extend(g.iter().map(|&gv| x * gv));
        grad_x.push(row.iter().zip(g).map(|(&w, &gv)| w * gv).sum());
    }
    Ok((
        Tensor::new(input.shape().to_vec(), grad_x)?,
        Tensor::new(vec![n_in, n_out], grad_w)?,
        grad_out.clone(),
    ))
}
