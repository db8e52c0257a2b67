//! Image ingestion and preprocessing, dataset manifests, and the synthetic
//! speckle generator.

mod manifest;
mod netpbm;
mod preprocess;
mod synth;

pub use manifest::{load_manifest, parse_manifest, DatasetManifest, ManifestEntry, Split};
pub use netpbm::{decode_netpbm, read_netpbm, RawImage};
pub use preprocess::{
    apply_flips, augment_flips, extract_green, flip_horizontal, flip_vertical, normalize, preprocess, resize_bilinear,
    sample_flips, Flips, INPUT_SIDE,
};
pub use synth::{
    default_synth_classes, generate_synthetic, synth_speckle, write_synthetic_dataset, SpeckleParams, SynthClass,
    SynthConfig, SyntheticSplits,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing file: {path}")]
    MissingFile { path: PathBuf },
    #[error("{file}:{line}: unknown class name {name:?}")]
    UnknownClass { file: String, line: usize, name: String },
    #[error("{file}:{line}: expected `<relative_path>\\t<class_name>`")]
    MalformedLine { file: String, line: usize },
    #[error("{file}:{line}: duplicate path {path:?}")]
    DuplicatePath { file: String, line: usize, path: String },
    #[error("{file}: manifest has no entries")]
    EmptyManifest { file: String },
    #[error("{path}: malformed image: {reason}")]
    MalformedImage { path: String, reason: String },
}
