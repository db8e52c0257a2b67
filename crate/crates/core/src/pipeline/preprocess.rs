use rand::Rng;

use super::RawImage;
use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Input side length of the published model.
pub const INPUT_SIDE: usize = 512;

/// Green plane as an `[h, w, 1]` tensor of values in `[0, 255]`.
/// Single-channel images pass through unchanged.
pub fn extract_green<T: Element>(img: &RawImage) -> Result<Tensor<T>> {
    if img.data.len() != img.width * img.height * img.channels {
        return Err(Error::InvalidShape(format!(
            "{}x{}x{} image with {} bytes",
            img.width,
            img.height,
            img.channels,
            img.data.len()
        )));
    }
    let plane: Vec<T> = match img.channels {
        1 => img.data.iter().map(|&v| T::from_f64(v as f64)).collect(),
        3 => img.data.chunks_exact(3).map(|px| T::from_f64(px[1] as f64)).collect(),
        c => return Err(Error::InvalidShape(format!("expected 1 or 3 channels, got {c}"))),
    };
    Tensor::new(vec![img.height, img.width, 1], plane)
}

/// Divides by 255. Not idempotent.
pub fn normalize<T: Element>(t: &Tensor<T>) -> Tensor<T> {
    let scale = T::from_f64(255.0);
    t.map(|v| v / scale)
}

/// Bilinear resampling with half-pixel centres and edge clamping.
pub fn resize_bilinear<T: Element>(t: &Tensor<T>, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let (h, w, c) = t.hwc()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::InvalidShape(format!("resize target {out_h}x{out_w}")));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(t.clone());
    }
    // (lower index, upper index, upper weight) per output coordinate
    let taps = |n_in: usize, n_out: usize| -> Vec<(usize, usize, f64)> {
        let scale = n_in as f64 / n_out as f64;
        (0..n_out)
            .map(|o| {
                let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n_in - 1) as f64);
                let lo = src.floor() as usize;
                let hi = (lo + 1).min(n_in - 1);
                (lo, hi, src - lo as f64)
            })
            .collect()
    };
    let rows = taps(h, out_h);
    let cols = taps(w, out_w);
    let x = t.data();
    let mut out = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            for ch in 0..c {
                let at = |y: usize, xx: usize| x[(y * w + xx) * c + ch].to_f64();
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                out.push(T::from_f64(top * (1.0 - fy) + bottom * fy));
            }
        }
    }
    Tensor::new(vec![out_h, out_w, c], out)
}

/// Green channel → resize → `[0, 1]`.
pub fn preprocess<T: Element>(img: &RawImage, out_h: usize, out_w: usize) -> Result<Tensor<T>> {
    let green = extract_green::<T>(img)?;
    Ok(normalize(&resize_bilinear(&green, out_h, out_w)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Flips {
    pub horizontal: bool,
    pub vertical: bool,
}

pub fn sample_flips(rng: &mut impl Rng) -> Flips {
    Flips {
        horizontal: rng.gen_bool(0.5),
        vertical: rng.gen_bool(0.5),
    }
}

/// Mirrors columns (left ↔ right).
pub fn flip_horizontal<T: Element>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = t.hwc()?;
    let x = t.data();
    let mut out = Vec::with_capacity(x.len());
    for y in 0..h {
        for col in (0..w).rev() {
            out.extend_from_slice(&x[(y * w + col) * c..][..c]);
        }
    }
    Tensor::new(t.shape().to_vec(), out)
}

/// Mirrors rows (top ↔ bottom).
pub fn flip_vertical<T: Element>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let (h, w, c) = t.hwc()?;
    let row = w * c;
    let out = t.data().chunks_exact(row).rev().flatten().copied().collect();
    debug_assert_eq!(t.len(), h * row);
    Tensor::new(t.shape().to_vec(), out)
}

pub fn apply_flips<T: Element>(t: &Tensor<T>, flips: Flips) -> Result<Tensor<T>> {
    let mut out = if flips.horizontal {
        flip_horizontal(t)?
    } else {
        t.clone()
    };
    if flips.vertical {
        out = flip_vertical(&out)?;
    }
    Ok(out)
}

/// Independent horizontal and vertical flips, each with probability 0.5.
pub fn augment_flips<T: Element>(t: &Tensor<T>, rng: &mut impl Rng) -> Result<Tensor<T>> {
    apply_flips(t, sample_flips(rng))
}
