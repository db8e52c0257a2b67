use super::{Padding, Window};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Channel-wise convolution: one `kh × kw` filter per input channel, no mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseParams<T = f32> {
    /// `[kh, kw, c]`
    pub kernel: Tensor<T>,
    /// `[c]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: Padding,
}

impl<T: Element> DepthwiseParams<T> {
    pub fn new(kernel: Tensor<T>, bias: Tensor<T>, stride: usize, padding: Padding) -> Result<Self> {
        let p = Self {
            kernel,
            bias,
            stride,
            padding,
        };
        p.dims()?;
        Ok(p)
    }

    pub fn zeros(kh: usize, kw: usize, channels: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kernel: Tensor::zeros(&[kh, kw, channels]),
            bias: Tensor::zeros(&[channels]),
            stride,
            padding,
        }
    }

    pub fn dims(&self) -> Result<(usize, usize, usize)> {
        let &[kh, kw, c] = self.kernel.shape() else {
            return Err(Error::InvalidShape(format!(
                "depthwise kernel must be [kh, kw, c], got {:?}",
                self.kernel.shape()
            )));
        };
        if self.bias.shape() != [c] {
            return Err(Error::shape("depthwise bias", self.bias.shape(), &[c]));
        }
        Ok((kh, kw, c))
    }

    fn window(&self, input: &Tensor<T>) -> Result<(Window, usize)> {
        let (kh, kw, c) = self.dims()?;
        let (h, w, ci) = input.hwc()?;
        if ci != c {
            return Err(Error::shape(
                "depthwise input vs kernel",
                input.shape(),
                self.kernel.shape(),
            ));
        }
        let win = Window::resolve("depthwise", (h, w), (kh, kw), self.stride, self.padding)?;
        Ok((win, c))
    }
}

pub fn depthwise_forward<T: Element>(input: &Tensor<T>, p: &DepthwiseParams<T>) -> Result<Tensor<T>> {
    let (win, c) = p.window(input)?;
    let x = input.data();
    let k = p.kernel.data();
    let mut out = Vec::with_capacity(win.out_h * win.out_w * c);
    for oy in 0..win.out_h {
        for ox in 0..win.out_w {
            let start = out.len();
            out.extend_from_slice(p.bias.data());
            let acc = &mut out[start..];
            for ky in 0..win.kh {
                let Some(iy) = win.src_y(oy, ky) else { continue };
                for kx in 0..win.kw {
                    let Some(ix) = win.src_x(ox, kx) else { continue };
                    let src = &x[(iy * win.in_w + ix) * c..][..c];
                    let tap = &k[(ky * win.kw + kx) * c..][..c];
                    for ((a, &s), &t) in acc.iter_mut().zip(src).zip(tap) {
                        *a += t * s;
                    }
                }
            }
        }
    }
    Tensor::new(vec![win.out_h, win.out_w, c], out)
}

pub fn depthwise_backward<T: Element>(
    input: &Tensor<T>,
    p: &DepthwiseParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (win, c) = p.window(input)?;
    let expected = [win.out_h, win.out_w, c];
    if grad_out.shape() != expected {
        return Err(Error::shape("depthwise_backward grad_out", grad_out.shape(), &expected));
    }
    let x = input.data();
    let k = p.kernel.data();
    let g = grad_out.data();
    let mut gi = vec![T::zero(); x.len()];
    let mut gk = vec![T::zero(); k.len()];
    let mut gb = vec![T::zero(); c];

    for oy in 0..win.out_h {
        for ox in 0..win.out_w {
            let go = &g[(oy * win.out_w + ox) * c..][..c];
            gb.iter_mut().zip(go).for_each(|(b, &v)| *b += v);
            for ky in 0..win.kh {
                let Some(iy) = win.src_y(oy, ky) else { continue };
                for kx in 0..win.kw {
                    let Some(ix) = win.src_x(ox, kx) else { continue };
                    let base = (iy * win.in_w + ix) * c;
                    let tap = (ky * win.kw + kx) * c;
                    let src = &x[base..][..c];
                    let kt = &k[tap..][..c];
                    for ch in 0..c {
                        gk[tap + ch] += src[ch] * go[ch];
                        gi[base + ch] += kt[ch] * go[ch];
                    }
                }
            }
        }
    }

    Ok((
        Tensor::new(input.shape().to_vec(), gi)?,
        Tensor::new(p.kernel.shape().to_vec(), gk)?,
        Tensor::new(vec![c], gb)?,
    ))
}
