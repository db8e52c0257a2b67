use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{preprocess, read_netpbm, DatasetError, RawImage};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Relative to the manifest root.
    pub path: PathBuf,
    pub class_id: usize,
    /// 1-based line in the manifest file.
    pub line: usize,
}

/// Line-oriented list of `<relative_path>\t<class_name>` pairs. Blank lines
/// and lines starting with `#` are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub split: Split,
}

pub fn parse_manifest(
    text: &str,
    root: impl Into<PathBuf>,
    taxonomy: &Taxonomy,
    split: Split,
    source: &str,
) -> Result<DatasetManifest> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((path, class)) = trimmed.split_once('\t') else {
            return Err(DatasetError::MalformedLine {
                file: source.into(),
                line,
            }
            .into());
        };
        let (path, class) = (path.trim(), class.trim());
        if path.is_empty() || class.is_empty() || class.contains('\t') {
            return Err(DatasetError::MalformedLine {
                file: source.into(),
                line,
            }
            .into());
        }
        let class_id = taxonomy.class_id(class).ok_or_else(|| DatasetError::UnknownClass {
            file: source.into(),
            line,
            name: class.into(),
        })?;
        if !seen.insert(path.to_string()) {
            return Err(DatasetError::DuplicatePath {
                file: source.into(),
                line,
                path: path.into(),
            }
            .into());
        }
        entries.push(ManifestEntry {
            path: PathBuf::from(path),
            class_id,
            line,
        });
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyManifest { file: source.into() }.into());
    }
    Ok(DatasetManifest {
        root: root.into(),
        entries,
        split,
    })
}

/// Reads a manifest; image paths resolve against the manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>, taxonomy: &Taxonomy, split: Split) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            DatasetError::MissingFile { path: path.into() }.into()
        } else {
            Error::io(path, e)
        }
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_manifest(&text, root, taxonomy, split, &path.display().to_string())
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<RawImage> {
        read_netpbm(self.root.join(&entry.path))
    }

    /// Lazily loads and preprocesses each entry to `side × side`.
    pub fn iter_preprocessed<T: Element>(&self, side: usize) -> impl Iterator<Item = Result<(Tensor<T>, usize)>> + '_ {
        self.entries.iter().map(move |e| {
            let raw = self.load_image(e)?;
            Ok((preprocess(&raw, side, side)?, e.class_id))
        })
    }

    /// Loads and preprocesses every entry into memory, in manifest order.
    pub fn load_dataset<T: Element>(&self, side: usize) -> Result<Dataset<T>> {
        let pairs: Vec<(Tensor<T>, usize)> = self
            .entries
            .par_iter()
            .map(|e| {
                let raw = self.load_image(e)?;
                Ok((preprocess(&raw, side, side)?, e.class_id))
            })
            .collect::<Result<_>>()?;
        Ok(Dataset::from_pairs(pairs))
    }
}
