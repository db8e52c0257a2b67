//! Binary weight file.
//!
//! All integers are little-endian `u32` unless noted.
//!
//! ```text
//! magic          4 bytes  "SPKN"
//! version        u32      1
//! layer count    u32
//! per layer:
//!   kind         u8       0 conv, 1 depthwise, 2 pointwise, 3 relu,
//!                         4 gap, 5 dense, 6 softmax
//!   filters      u32
//!   kernel       u32
//!   stride       u32
//!   padding      u8       0 same, 1 valid
//! per parameterized layer, weight tensor then bias tensor:
//!   rank         u32
//!   dims         u32 × rank
//!   data         f32 × product(dims), little-endian, row-major
//! ```
//!
//! The input channel count is the `c_in` axis of the first parameter tensor
//! and the class count is the width of the last layer. Parameters are always
//! stored at single precision; a 64-bit model is rounded on save.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{LayerKind, LayerSpec, Model, ModelSpec, Parameters};
use crate::error::{Error, Result};
use crate::layers::Padding;
use crate::tensor::{Element, Tensor};

pub const MAGIC: [u8; 4] = *b"SPKN";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightFileError {
    #[error("weight file: bad magic {0:?}, expected \"SPKN\"")]
    BadMagic([u8; 4]),
    #[error("weight file: unsupported format version {0} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("weight file: truncated while reading {what} at byte {offset}")]
    Truncated { what: &'static str, offset: usize },
    #[error("weight file: unknown layer kind code {0}")]
    UnknownLayerKind(u8),
    #[error("weight file: unknown padding code {0}")]
    UnknownPadding(u8),
    #[error("weight file: tensor disagrees with embedded spec: {0}")]
    SpecMismatch(String),
    #[error("weight file: {0} unexpected trailing bytes")]
    TrailingBytes(usize),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightFileError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(WeightFileError::Truncated { what, offset: self.pos });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, WeightFileError> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, WeightFileError> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

fn padding_code(p: Padding) -> u8 {
    match p {
        Padding::Same => 0,
        Padding::Valid => 1,
    }
}

pub fn to_bytes<T: Element>(model: &Model<T>) -> Vec<u8> {
    let spec = model.spec();
    let payload: usize = model.params().iter().map(|(_, t)| 4 + 4 * t.rank() + 4 * t.len()).sum();
    let mut out = Vec::with_capacity(12 + spec.layers.len() * 14 + payload);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(spec.layers.len() as u32).to_le_bytes());
    for layer in &spec.layers {
        out.push(layer.kind.code());
        out.extend_from_slice(&(layer.filters as u32).to_le_bytes());
        out.extend_from_slice(&(layer.kernel_size as u32).to_le_bytes());
        out.extend_from_slice(&(layer.stride as u32).to_le_bytes());
        out.push(padding_code(layer.padding));
    }
    for (_, t) in model.params().iter() {
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    out
}

fn read_tensor<T: Element>(r: &mut Reader<'_>) -> Result<Tensor<T>> {
    let rank = r.u32("tensor rank")? as usize;
    if rank == 0 || rank > 4 {
        return Err(WeightFileError::SpecMismatch(format!("tensor rank {rank}")).into());
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(r.u32("tensor dims")? as usize);
    }
    let len = shape.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    let len = len
        .filter(|&l| l > 0)
        .ok_or_else(|| WeightFileError::SpecMismatch(format!("tensor shape {shape:?}")))?;
    let bytes = r.take(len.saturating_mul(4), "tensor data")?;
    let data = bytes
        .chunks_exact(4)
        .map(|b| T::from_f64(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64))
        .collect();
    Tensor::new(shape, data)
}

pub fn from_bytes<T: Element>(bytes: &[u8]) -> Result<Model<T>> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(WeightFileError::BadMagic([magic[0], magic[1], magic[2], magic[3]]).into());
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(WeightFileError::UnsupportedVersion(version).into());
    }
    let count = r.u32("layer count")? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let code = r.u8("layer kind")?;
        let kind = LayerKind::from_code(code).ok_or(WeightFileError::UnknownLayerKind(code))?;
        let filters = r.u32("filters")? as usize;
        let kernel_size = r.u32("kernel")? as usize;
        let stride = r.u32("stride")? as usize;
        let padding = match r.u8("padding")? {
            0 => Padding::Same,
            1 => Padding::Valid,
            other => return Err(WeightFileError::UnknownPadding(other).into()),
        };
        layers.push(LayerSpec {
            kind,
            filters,
            kernel_size,
            stride,
            padding,
        });
    }

    let mut tensors = Vec::new();
    for _ in layers.iter().filter(|l| l.kind.has_parameters()) {
        tensors.push(read_tensor::<T>(&mut r)?);
        tensors.push(read_tensor::<T>(&mut r)?);
    }
    if r.pos != bytes.len() {
        return Err(WeightFileError::TrailingBytes(bytes.len() - r.pos).into());
    }

    let input_channels = match tensors.first().map(|t| t.shape()) {
        Some([_, _, c, _]) | Some([_, _, c]) => *c,
        Some(s) => return Err(WeightFileError::SpecMismatch(format!("first weight has shape {s:?}")).into()),
        None => 1,
    };
    let num_classes = layers
        .iter()
        .rev()
        .find(|l| l.kind.has_parameters())
        .map_or(0, |l| l.filters);
    let spec = ModelSpec {
        layers,
        input_channels,
        num_classes,
    };
    let mut params = Parameters::<T>::zeros(&spec).map_err(|e| WeightFileError::SpecMismatch(e.to_string()))?;
    let keys: Vec<_> = params.iter().map(|(k, _)| k).collect();
    for (key, t) in keys.into_iter().zip(tensors) {
        let dst = params.get_mut(key).expect("key from same set");
        if dst.shape() != t.shape() {
            return Err(WeightFileError::SpecMismatch(format!(
                "{key}: spec implies {:?}, file has {:?}",
                dst.shape(),
                t.shape()
            ))
            .into());
        }
        *dst = t;
    }
    Model::from_parts(spec, params)
}

pub fn save_weights<T: Element>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_weights<T: Element>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

/// Bytes of raw f32 parameter data in a serialized model.
pub fn payload_bytes<T: Element>(model: &Model<T>) -> usize {
    model.parameter_count() * 4
}
