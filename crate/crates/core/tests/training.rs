mod common;

use common::gradcheck::random_model;
use common::{rng, uniform};
use specklenet::pipeline::{default_synth_classes, generate_synthetic, SynthConfig};
use specklenet::trainer::{batch_gradient, evaluate, train_with_validator, TrainingHistory};
use specklenet::*;

fn noise_set(n: usize, classes: usize, seed: u64) -> Dataset<f64> {
    let r = &mut rng(seed);
    Dataset::from_pairs((0..n).map(|i| (uniform(r, &[12, 12, 1], 0.0, 1.0), i % classes)))
}

#[test]
fn batch_gradient_is_mean_of_sample_gradients() {
    let model = random_model(3);
    let set = noise_set(21, model.num_classes(), 8);
    let indices: Vec<usize> = (0..21).rev().collect();
    let (batch, _, _) = batch_gradient(&model, &set, &indices, None).unwrap();

    let mut sum = model.params().zeros_like();
    for s in set.samples() {
        sum.add_assign(&model.loss_and_grad(&s.image, s.label).unwrap().2)
            .unwrap();
    }
    sum.scale(1.0 / 21.0);
    for ((key, a), (_, b)) in batch.iter().zip(sum.iter()) {
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!(
                (x - y).abs() <= 1e-6 * x.abs().max(y.abs()).max(1.0),
                "{key}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn overfits_a_small_synthetic_set() {
    let taxonomy = Taxonomy::default_config();
    let synth = SynthConfig {
        classes: default_synth_classes(&taxonomy, 4).unwrap(),
        train_per_class: 13,
        val_per_class: 0,
        test_per_class: 0,
        resolution: 32,
        seed: 5,
    };
    let mut train_set = generate_synthetic::<f32>(&synth).unwrap().train;
    train_set = Dataset::new(train_set.samples()[..50].to_vec());
    let model: Model<f32> = init_model(&canonical_spec(), 1).unwrap();
    let config = TrainingConfig {
        max_epochs: 200,
        early_stop_patience: 30,
        batch_size: 16,
        augment: false,
        ..Default::default()
    };
    let (best, history) = train_with_validator(&model, &train_set, &config, |m, _| evaluate(m, &train_set)).unwrap();
    assert!(
        history.best_val_accuracy >= 0.95,
        "train accuracy {}",
        history.best_val_accuracy
    );
    assert_eq!(evaluate(&best, &train_set).unwrap().1, history.best_val_accuracy);
}

fn short_run() -> (Model<f64>, TrainingHistory) {
    let model = random_model(11).cast::<f32>().cast::<f64>();
    let set = noise_set(40, model.num_classes(), 12);
    let config = TrainingConfig {
        max_epochs: 4,
        batch_size: 7,
        ..Default::default()
    };
    train(&model, &set, &noise_set(10, model.num_classes(), 13), &config).unwrap()
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(short_run)
    };
    let (m1, h1) = run(1);
    let (m3, h3) = run(3);
    assert_eq!(h1, h3);
    assert_eq!(m1.params(), m3.params());
}

#[test]
fn checkpoint_and_history_sidecar_track_best_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("best.spkn");
    let model = random_model(21);
    let set = noise_set(24, model.num_classes(), 22);
    let accs = [0.2, 0.5, 0.4, 0.5, 0.3];
    let config = TrainingConfig {
        max_epochs: accs.len(),
        batch_size: 8,
        checkpoint_path: Some(path.clone()),
        ..Default::default()
    };
    let (best, history) = train_with_validator(&model, &set, &config, |_, e| Ok((1.0, accs[e - 1]))).unwrap();
    assert_eq!(history.best_epoch, 2);
    assert!(!history.stopped_early);

    let saved: Model<f64> = load_weights(&path).unwrap();
    assert_eq!(saved.params(), best.cast::<f32>().cast::<f64>().params());
    let csv = std::fs::read_to_string(trainer::sidecar_path(&path)).unwrap();
    let reread = TrainingHistory::from_csv(&csv).unwrap();
    assert_eq!(reread.epochs_run(), accs.len());
    assert_eq!(reread.best_epoch, 2);
}
