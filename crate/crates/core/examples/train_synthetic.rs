//! Train the canonical network on a generated 8-class speckle dataset and
//! report test metrics.
//!
//! cargo run --release --example train_synthetic -- [max_epochs] [patience]
//!
//! RUST_LOG=info prints one line per epoch.

use specklenet::metrics::{confusion, report};
use specklenet::pipeline::{default_synth_classes, generate_synthetic, SynthConfig};
use specklenet::trainer::{predict_all, train, TrainingConfig};
use specklenet::{canonical_spec, init_model, Model, Taxonomy};

fn main() -> specklenet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer argument"));
    let defaults = TrainingConfig::default();
    let config = TrainingConfig {
        max_epochs: args.next().unwrap_or(defaults.max_epochs),
        early_stop_patience: args.next().unwrap_or(defaults.early_stop_patience),
        ..defaults
    };

    let taxonomy = Taxonomy::default_config();
    let synth = SynthConfig {
        classes: default_synth_classes(&taxonomy, 8)?,
        train_per_class: 100,
        val_per_class: 20,
        test_per_class: 20,
        resolution: 128,
        seed: 42,
    };
    for c in &synth.classes {
        println!(
            "{:<24} id {:>2}  correlation length {:.2}",
            c.name, c.class_id, c.params.correlation_length
        );
    }
    let splits = generate_synthetic::<f32>(&synth)?;

    let model: Model<f32> = init_model(&canonical_spec(), config.seed)?;
    let start = std::time::Instant::now();
    let (best, history) = train(&model, &splits.train, &splits.val, &config)?;
    println!(
        "{} epochs in {:.0?}, best epoch {} (val accuracy {:.3})",
        history.epochs_run(),
        start.elapsed(),
        history.best_epoch,
        history.best_val_accuracy
    );

    let preds: Vec<usize> = predict_all(&best, &splits.test)?.into_iter().map(|(p, _)| p).collect();
    let cm = confusion(&preds, &splits.test.labels(), best.num_classes())?;
    let r = report(&cm)?;
    println!(
        "test accuracy {:.4}, macro F1 over present classes {:.4}",
        r.accuracy,
        r.macro_f1_over(&r.present_classes())
    );
    Ok(())
}
