use std::fmt;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reference;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::{Element, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMode {
    /// One image at a time on the calling thread.
    Sequential,
    /// Images spread across the rayon pool; latency is wall time / images.
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub seconds_per_sample: f64,
    pub images_per_second: f64,
    pub samples: usize,
    pub warmup: usize,
    pub mode: BenchMode,
}

impl fmt::Display for BenchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} forward passes ({:?}, {} warmup)",
            self.samples, self.mode, self.warmup
        )?;
        writeln!(f, "seconds per sample: {:.6}", self.seconds_per_sample)?;
        writeln!(f, "images per second:  {:.2}", self.images_per_second)?;
        write!(
            f,
            "reference (hardware-dependent, not comparable across machines): {} s/sample, {} img/s",
            reference::SECONDS_PER_SAMPLE,
            reference::IMAGES_PER_SECOND
        )
    }
}

fn check<T>(images: &[Tensor<T>], warmup: usize) -> Result<()> {
    if images.is_empty() {
        return Err(Error::Empty("benchmark image set"));
    }
    if warmup == 0 {
        return Err(Error::InvalidConfig("benchmark warmup must be at least 1".into()));
    }
    Ok(())
}

fn finish(elapsed: f64, samples: usize, warmup: usize, mode: BenchMode) -> BenchResult {
    let seconds_per_sample = elapsed / samples as f64;
    BenchResult {
        seconds_per_sample,
        images_per_second: 1.0 / seconds_per_sample,
        samples,
        warmup,
        mode,
    }
}

/// Times single-threaded forward passes over already preprocessed images.
/// The first `warmup` passes (cycling through `images`) are not timed.
pub fn benchmark<T: Element>(model: &Model<T>, images: &[Tensor<T>], warmup: usize) -> Result<BenchResult> {
    check(images, warmup)?;
    for img in images.iter().cycle().take(warmup) {
        std::hint::black_box(model.forward(img)?);
    }
    let start = Instant::now();
    for img in images {
        std::hint::black_box(model.forward(img)?);
    }
    Ok(finish(
        start.elapsed().as_secs_f64(),
        images.len(),
        warmup,
        BenchMode::Sequential,
    ))
}

/// Throughput with images processed concurrently.
pub fn benchmark_parallel<T: Element>(model: &Model<T>, images: &[Tensor<T>], warmup: usize) -> Result<BenchResult> {
    check(images, warmup)?;
    for img in images.iter().cycle().take(warmup) {
        std::hint::black_box(model.forward(img)?);
    }
    let start = Instant::now();
    images
        .par_iter()
        .try_for_each(|img| model.forward(img).map(|p| drop(std::hint::black_box(p))))?;
    Ok(finish(
        start.elapsed().as_secs_f64(),
        images.len(),
        warmup,
        BenchMode::Parallel,
    ))
}
