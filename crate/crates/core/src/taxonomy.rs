//! Material classes, their nine- and five-family groupings, hazard flags and
//! the family-to-preset table.
//!
//! The shipped table lives in `config/taxonomy.json`; see the README for the
//! schema. Nothing here hardcodes class names.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{Element, Tensor};

pub const CLASS_COUNT: usize = 59;
pub const FAMILY9_COUNT: usize = 9;
pub const FAMILY5_COUNT: usize = 5;

/// Environment variable naming a taxonomy file to use instead of the shipped one.
pub const TAXONOMY_ENV: &str = "SPECKLENET_TAXONOMY";

const DEFAULT_CONFIG: &str = include_str!("../config/taxonomy.json");

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("taxonomy: expected {expected} classes, found {found}")]
    ClassCount { expected: usize, found: usize },
    #[error("taxonomy: expected {expected} distinct {level} families, found {found}")]
    FamilyCount {
        level: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("taxonomy: class at position {position} has id {id}; ids must be 0..n in order")]
    NonDenseIds { position: usize, id: usize },
    #[error("taxonomy: duplicate class name {0:?}")]
    DuplicateName(String),
    #[error("taxonomy: family {family9:?} is split across {first:?} and {second:?}")]
    NotCoarsening {
        family9: String,
        first: String,
        second: String,
    },
    #[error("taxonomy: no preset for family {0:?}")]
    MissingPreset(String),
    #[error("taxonomy: preset {0:?} names no family")]
    UnusedPreset(String),
    #[error("taxonomy: family {0:?} contains hazardous classes but its preset is allowed")]
    HazardAllowed(String),
    #[error("taxonomy: preset {family:?}: {reason}")]
    InvalidPreset { family: String, reason: &'static str },
    #[error("taxonomy: class id {id} out of range for {classes} classes")]
    ClassOutOfRange { id: usize, classes: usize },
    #[error("taxonomy: unknown granularity {0:?} (expected fine, nine or five)")]
    UnknownGranularity(String),
    #[error("taxonomy: parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialClass {
    pub id: usize,
    pub name: String,
    pub family9: String,
    pub family5: String,
    pub hazardous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub power_percent: f64,
    pub speed_mm_per_s: f64,
    pub frequency_hz: f64,
    pub allowed: bool,
}

impl Preset {
    fn check(&self) -> Option<&'static str> {
        if !(self.power_percent > 0.0 && self.power_percent <= 100.0) {
            Some("power_percent must lie in (0, 100]")
        } else if !(self.speed_mm_per_s > 0.0 && self.speed_mm_per_s.is_finite()) {
            Some("speed_mm_per_s must be positive")
        } else if !(self.frequency_hz > 0.0 && self.frequency_hz.is_finite()) {
            Some("frequency_hz must be positive")
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Fine,
    Nine,
    Five,
}

impl FromStr for Granularity {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, TaxonomyError> {
        match s.to_ascii_lowercase().as_str() {
            "fine" | "59" => Ok(Granularity::Fine),
            "nine" | "9" => Ok(Granularity::Nine),
            "five" | "5" => Ok(Granularity::Five),
            _ => Err(TaxonomyError::UnknownGranularity(s.to_string())),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Granularity::Fine => "fine",
            Granularity::Nine => "nine",
            Granularity::Five => "five",
        })
    }
}

/// A partition of class ids into named groups. `map[class]` is a group index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grouping {
    pub names: Vec<String>,
    pub map: Vec<usize>,
}

impl Grouping {
    pub fn new(names: Vec<String>, map: Vec<usize>) -> Result<Self> {
        if let Some(&g) = map.iter().find(|&&g| g >= names.len()) {
            return Err(Error::InvalidConfig(format!(
                "grouping maps to group {g} but has {} names",
                names.len()
            )));
        }
        Ok(Self { names, map })
    }

    /// Groups in order of first appearance across `labels`.
    fn from_labels<'a>(labels: impl Iterator<Item = &'a str>) -> Self {
        let mut names: Vec<String> = Vec::new();
        let mut map = Vec::new();
        for label in labels {
            let idx = match names.iter().position(|n| n == label) {
                Some(i) => i,
                None => {
                    names.push(label.to_string());
                    names.len() - 1
                }
            };
            map.push(idx);
        }
        Self { names, map }
    }

    pub fn classes(&self) -> usize {
        self.map.len()
    }

    pub fn groups(&self) -> usize {
        self.names.len()
    }

    /// Sums a fine probability vector into group probabilities.
    pub fn aggregate<T: Element>(&self, probs: &Tensor<T>) -> Result<Vec<f64>> {
        if probs.len() != self.map.len() {
            return Err(Error::shape("aggregate", &[probs.len()], &[self.map.len()]));
        }
        let mut out = vec![0.0; self.names.len()];
        for (&g, &p) in self.map.iter().zip(probs.data()) {
            out[g] += p.to_f64();
        }
        Ok(out)
    }
}

#[derive(Deserialize)]
struct RawTaxonomy {
    version: String,
    classes: Vec<MaterialClass>,
    presets: BTreeMap<String, Preset>,
}

/// Validated, immutable taxonomy.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    version: String,
    classes: Vec<MaterialClass>,
    presets: BTreeMap<String, Preset>,
    nine: Grouping,
    five: Grouping,
}

impl Taxonomy {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTaxonomy = serde_json::from_str(text).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        Self::from_parts(raw.version, raw.classes, raw.presets)
    }

    pub fn from_parts(version: String, classes: Vec<MaterialClass>, presets: BTreeMap<String, Preset>) -> Result<Self> {
        validate(&classes, &presets)?;
        let nine = Grouping::from_labels(classes.iter().map(|c| c.family9.as_str()));
        let five = Grouping::from_labels(classes.iter().map(|c| c.family5.as_str()));
        Ok(Self {
            version,
            classes,
            presets,
            nine,
            five,
        })
    }

    /// The table shipped with the crate.
    pub fn default_config() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("shipped taxonomy is valid")
    }

    /// `path` if given, else the file named by `SPECKLENET_TAXONOMY`, else the
    /// shipped table.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => load_taxonomy(p),
            None => match std::env::var_os(TAXONOMY_ENV) {
                Some(p) if !p.is_empty() => load_taxonomy(Path::new(&p)),
                _ => Ok(Self::default_config()),
            },
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn classes(&self) -> &[MaterialClass] {
        &self.classes
    }

    pub fn presets(&self) -> &BTreeMap<String, Preset> {
        &self.presets
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Case-insensitive lookup by name.
    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name.trim()))
    }

    pub fn class(&self, id: usize) -> Result<&MaterialClass> {
        self.classes.get(id).ok_or_else(|| {
            TaxonomyError::ClassOutOfRange {
                id,
                classes: self.classes.len(),
            }
            .into()
        })
    }

    pub fn family_of(&self, id: usize, granularity: Granularity) -> Result<&str> {
        let c = self.class(id)?;
        Ok(match granularity {
            Granularity::Fine => &c.name,
            Granularity::Nine => &c.family9,
            Granularity::Five => &c.family5,
        })
    }

    /// Five-family group containing a nine-family group.
    pub fn coarsen(&self, family9: &str) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.family9 == family9)
            .map(|c| c.family5.as_str())
    }

    pub fn grouping(&self, granularity: Granularity) -> Grouping {
        match granularity {
            Granularity::Fine => Grouping {
                names: self.classes.iter().map(|c| c.name.clone()).collect(),
                map: (0..self.classes.len()).collect(),
            },
            Granularity::Nine => self.nine.clone(),
            Granularity::Five => self.five.clone(),
        }
    }

    pub fn preset_for(&self, id: usize) -> Result<&Preset> {
        let family = &self.class(id)?.family5;
        Ok(&self.presets[family])
    }
}

fn validate(classes: &[MaterialClass], presets: &BTreeMap<String, Preset>) -> Result<(), TaxonomyError> {
    if classes.len() != CLASS_COUNT {
        return Err(TaxonomyError::ClassCount {
            expected: CLASS_COUNT,
            found: classes.len(),
        });
    }
    let mut names = HashMap::new();
    for (position, c) in classes.iter().enumerate() {
        if c.id != position {
            return Err(TaxonomyError::NonDenseIds { position, id: c.id });
        }
        if names.insert(c.name.to_ascii_lowercase(), position).is_some() {
            return Err(TaxonomyError::DuplicateName(c.name.clone()));
        }
    }

    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    for c in classes {
        match parent.insert(&c.family9, &c.family5) {
            Some(prev) if prev != c.family5 => {
                return Err(TaxonomyError::NotCoarsening {
                    family9: c.family9.clone(),
                    first: prev.to_string(),
                    second: c.family5.clone(),
                })
            }
            _ => {}
        }
    }
    let five: std::collections::BTreeSet<&str> = classes.iter().map(|c| c.family5.as_str()).collect();
    if parent.len() != FAMILY9_COUNT {
        return Err(TaxonomyError::FamilyCount {
            level: "nine-way",
            expected: FAMILY9_COUNT,
            found: parent.len(),
        });
    }
    if five.len() != FAMILY5_COUNT {
        return Err(TaxonomyError::FamilyCount {
            level: "five-way",
            expected: FAMILY5_COUNT,
            found: five.len(),
        });
    }

    for family in &five {
        let Some(preset) = presets.get(*family) else {
            return Err(TaxonomyError::MissingPreset(family.to_string()));
        };
        if let Some(reason) = preset.check() {
            return Err(TaxonomyError::InvalidPreset {
                family: family.to_string(),
                reason,
            });
        }
        let hazardous = classes.iter().any(|c| c.family5 == *family && c.hazardous);
        if hazardous && preset.allowed {
            return Err(TaxonomyError::HazardAllowed(family.to_string()));
        }
    }
    if let Some(extra) = presets.keys().find(|k| !five.contains(k.as_str())) {
        return Err(TaxonomyError::UnusedPreset(extra.clone()));
    }
    Ok(())
}

pub fn load_taxonomy(path: impl AsRef<Path>) -> Result<Taxonomy> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Taxonomy::from_json(&text)
}

/// Outcome of classifying one image and looking up what to do with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub class_id: usize,
    pub class: String,
    pub confidence: f64,
    pub family9: String,
    pub family5: String,
    pub preset: Preset,
    pub allowed: bool,
    /// Set when `allowed` is false, e.g. `"hazardous_material"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refusal_reason: Option<String>,
}

pub const REFUSAL_HAZARDOUS: &str = "hazardous_material";
pub const REFUSAL_PRESET_DISALLOWED: &str = "preset_disallowed";

/// Predicts the class of a preprocessed image and resolves its families and preset.
pub fn classify_with_preset<T: Element>(model: &Model<T>, image: &Tensor<T>, taxonomy: &Taxonomy) -> Result<Decision> {
    if model.num_classes() != taxonomy.len() {
        return Err(Error::InvalidConfig(format!(
            "model predicts {} classes but the taxonomy has {}",
            model.num_classes(),
            taxonomy.len()
        )));
    }
    let (id, confidence) = model.predict(image)?;
    let class = taxonomy.class(id)?;
    let preset = *taxonomy.preset_for(id)?;
    let refusal_reason = if class.hazardous {
        Some(REFUSAL_HAZARDOUS.to_string())
    } else if !preset.allowed {
        Some(REFUSAL_PRESET_DISALLOWED.to_string())
    } else {
        None
    };
    Ok(Decision {
        class_id: id,
        class: class.name.clone(),
        confidence: confidence.to_f64(),
        family9: class.family9.clone(),
        family5: class.family5.clone(),
        allowed: refusal_reason.is_none(),
        preset,
        refusal_reason,
    })
}
