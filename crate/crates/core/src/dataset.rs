use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T = f32> {
    pub image: Tensor<T>,
    pub label: usize,
}

/// In-memory labelled images, already preprocessed to model input.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset<T = f32> {
    samples: Vec<Sample<T>>,
}

impl<T: Element> Dataset<T> {
    pub fn new(samples: Vec<Sample<T>>) -> Self {
        Self { samples }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Tensor<T>, usize)>) -> Self {
        Self {
            samples: pairs
                .into_iter()
                .map(|(image, label)| Sample { image, label })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn get(&self, index: usize) -> Option<&Sample<T>> {
        self.samples.get(index)
    }

    pub fn push(&mut self, image: Tensor<T>, label: usize) {
        self.samples.push(Sample { image, label });
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Same images with labels replaced, e.g. for label-permutation controls.
    pub fn with_labels(&self, labels: &[usize]) -> Result<Self> {
        if labels.len() != self.samples.len() {
            return Err(Error::InvalidShape(format!(
                "{} labels for {} samples",
                labels.len(),
                self.samples.len()
            )));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(labels)
                .map(|(s, &label)| Sample {
                    image: s.image.clone(),
                    label,
                })
                .collect(),
        })
    }

    pub fn cast<U: Element>(&self) -> Dataset<U> {
        Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| Sample {
                    image: s.image.cast(),
                    label: s.label,
                })
                .collect(),
        }
    }

    /// Rejects empty sets and labels outside `0..classes`.
    pub fn check_labels(&self, what: &'static str, classes: usize) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::Empty(what));
        }
        match self.samples.iter().find(|s| s.label >= classes) {
            Some(s) => Err(Error::LabelOutOfRange {
                label: s.label,
                classes,
            }),
            None => Ok(()),
        }
    }
}
