//! 8-bit binary PGM (`P5`) and PPM (`P6`) images.

use std::fs;
use std::path::Path;

use super::DatasetError;
use crate::error::{Error, Result};

/// Decoded 8-bit image, row-major, RGB-interleaved when `channels == 3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidShape(format!("image {width}x{height}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::InvalidShape(format!(
                "{width}x{height}x{channels} image needs {} bytes, got {}",
                width * height * channels,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Gray image replicated into three identical RGB planes.
    pub fn gray_to_rgb(&self) -> Self {
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self {
            width: self.width,
            height: self.height,
            channels: 3,
            data,
        }
    }

    pub fn to_netpbm(&self) -> Result<Vec<u8>> {
        let magic = match self.channels {
            1 => "P5",
            3 => "P6",
            c => return Err(Error::InvalidShape(format!("cannot encode {c}-channel image"))),
        };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_netpbm()?).map_err(|e| Error::io(path, e))
    }
}

fn malformed(source: &str, reason: impl Into<String>) -> Error {
    DatasetError::MalformedImage {
        path: source.into(),
        reason: reason.into(),
    }
    .into()
}

/// Parses a binary PGM/PPM with maxval 255. `source` names the file in errors.
pub fn decode_netpbm(bytes: &[u8], source: &str) -> Result<RawImage> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err(malformed(source, "truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| malformed(source, "non-ASCII header"))?);
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(source, "missing raster"));
    }
    pos += 1;

    let channels = match fields[0] {
        "P5" => 1,
        "P6" => 3,
        other => {
            return Err(malformed(
                source,
                format!("unsupported magic {other:?}, expected P5 or P6"),
            ))
        }
    };
    let num = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| malformed(source, format!("bad {what} {s:?}")))
    };
    let width = num(fields[1], "width")?;
    let height = num(fields[2], "height")?;
    let maxval = num(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(malformed(
            source,
            format!("maxval {maxval}, only 8-bit (255) is supported"),
        ));
    }
    if width == 0 || height == 0 {
        return Err(malformed(source, "zero dimension"));
    }
    let need = width * height * channels;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(malformed(
            source,
            format!("raster has {} bytes, expected {need}", raster.len()),
        ));
    }
    RawImage::new(width, height, channels, raster[..need].to_vec())
}

pub fn read_netpbm(path: impl AsRef<Path>) -> Result<RawImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DatasetError::MissingFile { path: path.into() }.into()
        } else {
            Error::io(path, e)
        }
    })?;
    decode_netpbm(&bytes, &path.display().to_string())
}
