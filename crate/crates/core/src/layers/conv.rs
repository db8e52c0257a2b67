use super::{Padding, Window};
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Standard (cross-channel) convolution. A 1×1 kernel makes it pointwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams<T = f32> {
    /// `[kh, kw, c_in, c_out]`
    pub kernel: Tensor<T>,
    /// `[c_out]`
    pub bias: Tensor<T>,
    pub stride: usize,
    pub padding: Padding,
}

impl<T: Element> ConvParams<T> {
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

    pub fn zeros(kh: usize, kw: usize, c_in: usize, c_out: usize, stride: usize, padding: Padding) -> Self {
        Self {
            kernel: Tensor::zeros(&[kh, kw, c_in, c_out]),
            bias: Tensor::zeros(&[c_out]),
            stride,
            padding,
        }
    }

    /// `(kh, kw, c_in, c_out)` after checking kernel and bias agree.
    pub fn dims(&self) -> Result<(usize, usize, usize, usize)> {
        let &[kh, kw, c_in, c_out] = self.kernel.shape() else {
            return Err(Error::InvalidShape(format!(
                "conv kernel must be [kh, kw, c_in, c_out], got {:?}",
                self.kernel.shape()
            )));
        };
        if self.bias.shape() != [c_out] {
            return Err(Error::shape("conv bias", self.bias.shape(), &[c_out]));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidShape(format!(
                "conv kernel {kh}x{kw} must have odd sides"
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidShape("conv stride must be positive".into()));
        }
        Ok((kh, kw, c_in, c_out))
    }

    fn window(&self, input: &Tensor<T>) -> Result<(Window, usize, usize)> {
        let (kh, kw, c_in, c_out) = self.dims()?;
        let (h, w, c) = input.hwc()?;
        if c != c_in {
            return Err(Error::shape(
                "conv2d input vs kernel",
                input.shape(),
                self.kernel.shape(),
            ));
        }
        let win = Window::resolve("conv2d", (h, w), (kh, kw), self.stride, self.padding)?;
        Ok((win, c_in, c_out))
    }
}

/// Patch matrix `[out_h·out_w, kh·kw·c_in]`, rows in output raster order and
/// columns in kernel `(ky, kx, ci)` order. Taps outside the image stay zero.
fn im2col<T: Element>(input: &[T], win: &Window, c_in: usize) -> Vec<T> {
    let cols = win.kh * win.kw * c_in;
    let mut out = vec![T::zero(); win.out_h * win.out_w * cols];
    for oy in 0..win.out_h {
        for ox in 0..win.out_w {
            let row = &mut out[(oy * win.out_w + ox) * cols..][..cols];
            for ky in 0..win.kh {
                let Some(iy) = win.src_y(oy, ky) else { continue };
                for kx in 0..win.kw {
                    let Some(ix) = win.src_x(ox, kx) else { continue };
                    let src = &input[(iy * win.in_w + ix) * c_in..][..c_in];
                    row[(ky * win.kw + kx) * c_in..][..c_in].copy_from_slice(src);
                }
            }
        }
    }
    out
}

fn col2im<T: Element>(cols: &[T], win: &Window, c_in: usize, grad_input: &mut [T]) {
    let width = win.kh * win.kw * c_in;
    for oy in 0..win.out_h {
        for ox in 0..win.out_w {
            let row = &cols[(oy * win.out_w + ox) * width..][..width];
            for ky in 0..win.kh {
                let Some(iy) = win.src_y(oy, ky) else { continue };
                for kx in 0..win.kw {
                    let Some(ix) = win.src_x(ox, kx) else { continue };
                    let dst = &mut grad_input[(iy * win.in_w + ix) * c_in..][..c_in];
                    let src = &row[(ky * win.kw + kx) * c_in..][..c_in];
                    dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
                }
            }
        }
    }
}

/// Patch matrix for a 1×1 kernel: the input itself at stride 1, otherwise a
/// strided subsample. Returns `None` when the input can be used unchanged.
fn pointwise_rows<T: Element>(input: &[T], win: &Window, c_in: usize) -> Option<Vec<T>> {
    if win.stride == 1 {
        return None;
    }
    let mut out = Vec::with_capacity(win.out_h * win.out_w * c_in);
    for oy in 0..win.out_h {
        let iy = oy * win.stride;
        for ox in 0..win.out_w {
            let ix = ox * win.stride;
            out.extend_from_slice(&input[(iy * win.in_w + ix) * c_in..][..c_in]);
        }
    }
    Some(out)
}

fn is_pointwise(win: &Window) -> bool {
    win.kh == 1 && win.kw == 1 && win.pad_top == 0 && win.pad_left == 0
}

fn patches<'a, T: Element>(input: &'a [T], win: &Window, c_in: usize) -> std::borrow::Cow<'a, [T]> {
    if is_pointwise(win) {
        match pointwise_rows(input, win, c_in) {
            Some(rows) => rows.into(),
            None => input.into(),
        }
    } else {
        im2col(input, win, c_in).into()
    }
}

/// `output[y, x, o] = bias[o] + Σ kernel[ky, kx, ci, o] · input[sy, sx, ci]`.
pub fn conv2d_forward<T: Element>(input: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let (win, c_in, c_out) = p.window(input)?;
    let positions = win.out_h * win.out_w;
    let depth = win.kh * win.kw * c_in;
    let cols = patches(input.data(), &win, c_in);

    let mut out = Vec::with_capacity(positions * c_out);
    for _ in 0..positions {
        out.extend_from_slice(p.bias.data());
    }
    T::gemm(
        positions,
        depth,
        c_out,
        &cols,
        (depth as isize, 1),
        p.kernel.data(),
        (c_out as isize, 1),
        T::one(),
        &mut out,
        (c_out as isize, 1),
    );
    Tensor::new(vec![win.out_h, win.out_w, c_out], out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    p: &ConvParams<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (win, c_in, c_out) = p.window(input)?;
    let expected = [win.out_h, win.out_w, c_out];
    if grad_out.shape() != expected {
        return Err(Error::shape("conv2d_backward grad_out", grad_out.shape(), &expected));
    }
    let positions = win.out_h * win.out_w;
    let depth = win.kh * win.kw * c_in;
    let g = grad_out.data();

    let mut grad_bias = vec![T::zero(); c_out];
    for row in g.chunks_exact(c_out) {
        grad_bias.iter_mut().zip(row).for_each(|(b, &v)| *b += v);
    }

    let cols = patches(input.data(), &win, c_in);
    let mut grad_kernel = vec![T::zero(); depth * c_out];
    // colsᵀ · G
    T::gemm(
        depth,
        positions,
        c_out,
        &cols,
        (1, depth as isize),
        g,
        (c_out as isize, 1),
        T::zero(),
        &mut grad_kernel,
        (c_out as isize, 1),
    );

    // G · kernelᵀ, scattered back onto the input grid
    let mut grad_cols = vec![T::zero(); positions * depth];
    T::gemm(
        positions,
        c_out,
        depth,
        g,
        (c_out as isize, 1),
        p.kernel.data(),
        (1, c_out as isize),
        T::zero(),
        &mut grad_cols,
        (depth as isize, 1),
    );
    let grad_input = if is_pointwise(&win) && win.stride == 1 {
        grad_cols
    } else {
        let mut gi = vec![T::zero(); input.len()];
        col2im(&grad_cols, &win, c_in, &mut gi);
        gi
    };

    Ok((
        Tensor::new(input.shape().to_vec(), grad_input)?,
        Tensor::new(p.kernel.shape().to_vec(), grad_kernel)?,
        Tensor::new(vec![c_out], grad_bias)?,
    ))
}
