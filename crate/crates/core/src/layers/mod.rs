//! Forward and backward kernels for every layer the speckle network uses.
//!
//! All functions are pure: they borrow their inputs and return fresh tensors.
//! Feature maps are HWC; see [`crate::tensor`] for the layout of parameters.

mod activation;
mod conv;
mod dense;
mod depthwise;

pub use activation::{
    cross_entropy, gap_backward, global_avg_pool, relu, relu_backward, softmax, softmax_backward,
    softmax_cross_entropy_grad, PROBABILITY_FLOOR,
};
pub use conv::{conv2d_backward, conv2d_forward, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use depthwise::{depthwise_backward, depthwise_forward, DepthwiseParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Zero padding so the output is `ceil(in / stride)`; the odd extra row or
    /// column of padding goes after the input.
    #[default]
    Same,
    /// No padding; the kernel stays inside the input.
    Valid,
}

/// Output length and leading pad along one spatial axis.
pub fn output_extent(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<(usize, usize)> {
    if input == 0 || kernel == 0 || stride == 0 {
        return None;
    }
    match padding {
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Some((out, total / 2))
        }
        Padding::Valid => (input >= kernel).then(|| ((input - kernel) / stride + 1, 0)),
    }
}

/// Resolved geometry of a spatial convolution-like op.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad_top: usize,
    pub pad_left: usize,
}

impl Window {
    pub(crate) fn resolve(
        op: &'static str,
        (in_h, in_w): (usize, usize),
        (kh, kw): (usize, usize),
        stride: usize,
        padding: Padding,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::InvalidShape(format!("{op}: stride must be positive")));
        }
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::InvalidShape(format!(
                "{op}: kernel {kh}x{kw} must have odd sides"
            )));
        }
        let (out_h, pad_top) =
            output_extent(in_h, kh, stride, padding).ok_or_else(|| Error::shape(op, &[in_h, in_w], &[kh, kw]))?;
        let (out_w, pad_left) =
            output_extent(in_w, kw, stride, padding).ok_or_else(|| Error::shape(op, &[in_h, in_w], &[kh, kw]))?;
        Ok(Self {
            in_h,
            in_w,
            out_h,
            out_w,
            kh,
            kw,
            stride,
            pad_top,
            pad_left,
        })
    }

    /// Input coordinate under output `o` and kernel tap `k`, if inside the image.
    #[inline]
    pub(crate) fn source(o: usize, k: usize, stride: usize, pad: usize, limit: usize) -> Option<usize> {
        let pos = (o * stride + k).checked_sub(pad)?;
        (pos < limit).then_some(pos)
    }

    #[inline]
    pub(crate) fn src_y(&self, oy: usize, ky: usize) -> Option<usize> {
        Self::source(oy, ky, self.stride, self.pad_top, self.in_h)
    }

    #[inline]
    pub(crate) fn src_x(&self, ox: usize, kx: usize) -> Option<usize> {
        Self::source(ox, kx, self.stride, self.pad_left, self.in_w)
    }
}
