//! Mini-batch Adam training with cross-entropy loss, early stopping on
//! validation accuracy and best-epoch checkpointing.

mod adam;
mod history;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use history::{sidecar_path, EpochRecord, TrainingHistory, CSV_HEADER};
pub use schedule::{apply_lr_schedule, LrSchedule, ScheduleState};

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{save_weights, Model, Parameters};
use crate::pipeline::augment_flips;
use crate::rng::mix_seed;
use crate::tensor::{Element, Tensor};

/// Samples per gradient-reduction chunk. Chunks are summed in a fixed order,
/// so results do not depend on the number of worker threads.
const GRAD_CHUNK: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub lr_schedule: LrSchedule,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-accuracy improvement before stopping.
    pub early_stop_patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Random horizontal/vertical flips on training samples.
    pub augment: bool,
    /// When set, the best weights are written here on every improvement, with
    /// the history CSV alongside.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_path: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            lr_schedule: LrSchedule::ReduceOnPlateau {
                factor: 0.5,
                patience: 10,
            },
            batch_size: 64,
            max_epochs: 500,
            early_stop_patience: 50,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            augment: true,
            checkpoint_path: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        if self.early_stop_patience == 0 {
            return bad("early_stop_patience must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return bad("adam_epsilon must be positive");
        }
        if let LrSchedule::ReduceOnPlateau { factor, patience } = self.lr_schedule {
            if !(factor > 0.0 && factor < 1.0) || patience == 0 {
                return bad("reduce-on-plateau needs factor in (0, 1) and patience >= 1");
            }
        }
        Ok(())
    }
}

/// Per-sample seed for augmentation, so flips do not depend on scheduling.
fn sample_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    mix_seed(&[seed, epoch as u64, index as u64])
}

struct BatchResult<T> {
    grads: Parameters<T>,
    loss: f64,
    correct: usize,
}

fn chunk_gradients<T: Element>(
    model: &Model<T>,
    set: &Dataset<T>,
    indices: &[usize],
    augment: Option<(u64, usize)>,
) -> Result<BatchResult<T>> {
    let mut grads = model.params().zeros_like();
    let mut loss = 0.0;
    let mut correct = 0;
    for &i in indices {
        let sample = &set.samples()[i];
        let augmented;
        let image: &Tensor<T> = match augment {
            Some((seed, epoch)) => {
                let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(seed, epoch, i));
                augmented = augment_flips(&sample.image, &mut rng)?;
                &augmented
            }
            None => &sample.image,
        };
        let (l, probs, g) = model.loss_and_grad(image, sample.label)?;
        grads.add_assign(&g)?;
        loss += l.to_f64();
        correct += usize::from(probs.argmax() == sample.label);
    }
    Ok(BatchResult { grads, loss, correct })
}

/// Mean gradient over a batch, plus the summed loss and correct count.
pub fn batch_gradient<T: Element>(
    model: &Model<T>,
    set: &Dataset<T>,
    indices: &[usize],
    augment: Option<(u64, usize)>,
) -> Result<(Parameters<T>, f64, usize)> {
    if indices.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let parts: Vec<BatchResult<T>> = indices
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| chunk_gradients(model, set, chunk, augment))
        .collect::<Result<_>>()?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("non-empty batch");
    for p in parts {
        total.grads.add_assign(&p.grads)?;
        total.loss += p.loss;
        total.correct += p.correct;
    }
    total.grads.scale(T::from_f64(1.0 / indices.len() as f64));
    Ok((total.grads, total.loss, total.correct))
}

/// Trains on `train_set`, monitoring accuracy on `val_set`. Returns the
/// weights of the best validation epoch, never simply the last ones.
pub fn train<T: Element>(
    model: &Model<T>,
    train_set: &Dataset<T>,
    val_set: &Dataset<T>,
    config: &TrainingConfig,
) -> Result<(Model<T>, TrainingHistory)> {
    val_set.check_labels("validation set", model.num_classes())?;
    train_with_validator(model, train_set, config, |m, _| evaluate(m, val_set))
}

/// [`train`] with a caller-supplied validation step returning
/// `(loss, accuracy)` for the model after each epoch (1-based).
pub fn train_with_validator<T: Element>(
    model: &Model<T>,
    train_set: &Dataset<T>,
    config: &TrainingConfig,
    mut validate: impl FnMut(&Model<T>, usize) -> Result<(f64, f64)>,
) -> Result<(Model<T>, TrainingHistory)> {
    config.validate()?;
    train_set.check_labels("training set", model.num_classes())?;

    let mut current = model.clone();
    let mut best = model.clone();
    let mut adam = AdamState::new(current.params());
    let mut history = TrainingHistory::default();
    let mut schedule = ScheduleState::new(config.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stale = 0usize;

    for epoch in 1..=config.max_epochs {
        let lr = schedule.learning_rate;
        order.shuffle(&mut shuffle_rng);
        let augment = config.augment.then_some((config.seed, epoch));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            let (grads, loss, ok) = batch_gradient(&current, train_set, batch, augment)?;
            loss_sum += loss;
            correct += ok;
            adam_step(current.params_mut(), &grads, &mut adam, config, lr)?;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }

        let (val_loss, val_acc) = validate(&current, epoch)?;
        let improved = history.push(EpochRecord {
            epoch,
            train_loss,
            train_acc: correct as f64 / train_set.len() as f64,
            val_loss,
            val_acc,
            lr,
        });
        log::info!(
            "epoch {epoch}: train_loss {train_loss:.4} train_acc {:.4} val_loss {val_loss:.4} val_acc {val_acc:.4} lr {lr:e}",
            correct as f64 / train_set.len() as f64
        );
        if improved {
            best = current.clone();
            stale = 0;
            if let Some(path) = &config.checkpoint_path {
                save_weights(&best, path)?;
                history.write_csv(history::sidecar_path(path))?;
            }
        } else {
            stale += 1;
        }
        apply_lr_schedule(&mut schedule, &history, config);
        if stale >= config.early_stop_patience {
            history.stopped_early = true;
            break;
        }
    }
    if let Some(path) = &config.checkpoint_path {
        history.write_csv(history::sidecar_path(path))?;
    }
    Ok((best, history))
}

/// Class predictions and their probabilities, in dataset order.
pub fn predict_all<T: Element>(model: &Model<T>, set: &Dataset<T>) -> Result<Vec<(usize, Tensor<T>)>> {
    set.samples()
        .par_iter()
        .map(|s| model.forward(&s.image).map(|p| (p.argmax(), p)))
        .collect()
}

/// Mean cross-entropy and top-1 accuracy. No augmentation is applied.
pub fn evaluate<T: Element>(model: &Model<T>, set: &Dataset<T>) -> Result<(f64, f64)> {
    set.check_labels("evaluation set", model.num_classes())?;
    let outputs = predict_all(model, set)?;
    let mut loss = 0.0;
    let mut correct = 0;
    for ((pred, probs), sample) in outputs.iter().zip(set.samples()) {
        loss += crate::layers::cross_entropy(probs, sample.label)?.to_f64();
        correct += usize::from(*pred == sample.label);
    }
    let n = set.len() as f64;
    Ok((loss / n, correct as f64 / n))
}
