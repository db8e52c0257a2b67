//! The `specklenet` command line.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error
//! (missing or malformed files, unknown classes), 4 numeric failure. Errors
//! are a single JSON line on stderr: `{"error":..,"kind":..,"exit_code":..}`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Error;
use crate::metrics::{
    benchmark, benchmark_parallel, confusion, export_report, group_confusion, render_confusion_plot, report,
    ReportFormat,
};
use crate::model::{canonical_spec, init_model, load_weights, save_weights, weights, Model};
use crate::pipeline::{
    default_synth_classes, load_manifest, preprocess, read_netpbm, synth_speckle, write_synthetic_dataset,
    DatasetError, SpeckleParams, Split, SynthConfig, INPUT_SIDE,
};
use crate::taxonomy::{classify_with_preset, Granularity, Taxonomy};
use crate::tensor::Tensor;
use crate::trainer::{evaluate, predict_all, sidecar_path, train, TrainingConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "specklenet",
    version,
    about = "Speckle material classifier: synth, train, eval, classify, bench, inspect"
)]
pub struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct TaxonomyArg {
    /// Taxonomy JSON; defaults to $SPECKLENET_TAXONOMY, then the shipped table.
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic speckle dataset with train/val/test manifests.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 8)]
        classes: usize,
        /// Training images per class.
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        /// Defaults to per_class / 5.
        #[arg(long)]
        val_per_class: Option<usize>,
        /// Defaults to per_class / 5.
        #[arg(long)]
        test_per_class: Option<usize>,
        #[arg(long, default_value_t = 128)]
        resolution: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        taxonomy: TaxonomyArg,
    },
    /// Train the canonical network and write the best weights plus history CSV.
    Train {
        #[arg(long)]
        manifest_train: PathBuf,
        #[arg(long)]
        manifest_val: PathBuf,
        /// Training configuration JSON; missing keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_weights: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Square input side images are resized to.
        #[arg(long, default_value_t = INPUT_SIDE)]
        side: usize,
        #[command(flatten)]
        taxonomy: TaxonomyArg,
    },
    /// Evaluate weights on a manifest at a chosen granularity.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// fine, nine or five.
        #[arg(long, default_value = "fine")]
        granularity: Granularity,
        /// Report file; `.json` for JSON, anything else CSV.
        #[arg(long)]
        report_out: Option<PathBuf>,
        /// Confusion plot; `.txt` for a text grid, anything else a PPM heatmap.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value_t = INPUT_SIDE)]
        side: usize,
        #[command(flatten)]
        taxonomy: TaxonomyArg,
    },
    /// Classify one PGM/PPM image and print the decision as a JSON line.
    Classify {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = INPUT_SIDE)]
        side: usize,
        #[command(flatten)]
        taxonomy: TaxonomyArg,
    },
    /// Time forward passes over a manifest or over generated images.
    Bench {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, conflicts_with = "count")]
        manifest: Option<PathBuf>,
        /// Number of generated speckle images when no manifest is given.
        #[arg(long, default_value_t = 32)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        warmup: usize,
        /// Spread images over all cores (reported as a separate mode).
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value_t = INPUT_SIDE)]
        side: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        taxonomy: TaxonomyArg,
    },
    /// Print per-layer output shapes and parameter counts.
    Inspect {
        /// A weight file, or `canonical`.
        target: String,
        #[arg(long, default_value_t = INPUT_SIDE)]
        side: usize,
    },
}

#[derive(Debug)]
pub struct CliError {
    pub exit_code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            exit_code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
        }
    }

    pub fn to_json_line(&self) -> String {
        json!({"error": self.message, "kind": self.kind, "exit_code": self.exit_code}).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (exit_code, kind) = match e {
            Error::InvalidConfig(_) => (EXIT_USAGE, "usage"),
            Error::NonFinite(_) => (EXIT_NUMERIC, "numeric"),
            _ => (EXIT_DATA, "data"),
        };
        Self {
            exit_code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self {
            exit_code: EXIT_DATA,
            kind: "io",
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::from(DatasetError::MissingFile {
            path: path.to_path_buf(),
        })
        .into())
    }
}

fn require_parent_dir(path: &Path) -> CliResult {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) if !dir.is_dir() => Err(Error::from(DatasetError::MissingFile {
            path: dir.to_path_buf(),
        })
        .into()),
        _ => Ok(()),
    }
}

fn require_side(side: usize) -> CliResult {
    if side < crate::model::MIN_INPUT_SIDE {
        return Err(CliError::usage(format!(
            "--side {side} is below {}",
            crate::model::MIN_INPUT_SIDE
        )));
    }
    Ok(())
}

fn load_taxonomy_arg(arg: &TaxonomyArg) -> CliResult<Taxonomy> {
    if let Some(p) = &arg.taxonomy {
        require_file(p)?;
    }
    Ok(Taxonomy::resolve(arg.taxonomy.as_deref())?)
}

fn emit(out: &mut dyn Write, as_json: bool, value: serde_json::Value, text: String) -> CliResult {
    if as_json {
        writeln!(out, "{value}")?;
    } else {
        writeln!(out, "{text}")?;
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command, writing
/// normal output to `out`.
pub fn run<I, S>(args: I, out: &mut dyn Write) -> CliResult
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                write!(out, "{e}")?;
                return Ok(());
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("invalid arguments");
            return Err(CliError::usage(first.trim_start_matches("error: ")));
        }
    };
    dispatch(cli, out)
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult {
    let as_json = cli.json;
    match cli.command {
        Command::Synth {
            out_dir,
            classes,
            per_class,
            val_per_class,
            test_per_class,
            resolution,
            seed,
            taxonomy,
        } => {
            let tax = load_taxonomy_arg(&taxonomy)?;
            if per_class == 0 {
                return Err(CliError::usage("--per-class must be at least 1"));
            }
            let config = SynthConfig {
                classes: default_synth_classes(&tax, classes)?,
                train_per_class: per_class,
                val_per_class: val_per_class.unwrap_or(per_class / 5),
                test_per_class: test_per_class.unwrap_or(per_class / 5),
                resolution,
                seed,
            };
            write_synthetic_dataset(&out_dir, &config)?;
            let names: Vec<&str> = config.classes.iter().map(|c| c.name.as_str()).collect();
            emit(
                out,
                as_json,
                json!({
                    "command": "synth",
                    "out_dir": out_dir,
                    "seed": seed,
                    "classes": names,
                    "train_per_class": config.train_per_class,
                    "val_per_class": config.val_per_class,
                    "test_per_class": config.test_per_class,
                    "resolution": resolution,
                }),
                format!(
                    "seed: {seed}\nwrote {} classes x {}/{}/{} images at {resolution}x{resolution} to {}",
                    names.len(),
                    config.train_per_class,
                    config.val_per_class,
                    config.test_per_class,
                    out_dir.display()
                ),
            )
        }

        Command::Train {
            manifest_train,
            manifest_val,
            config,
            out_weights,
            seed,
            side,
            taxonomy,
        } => {
            require_file(&manifest_train)?;
            require_file(&manifest_val)?;
            if let Some(c) = &config {
                require_file(c)?;
            }
            require_parent_dir(&out_weights)?;
            require_side(side)?;
            let tax = load_taxonomy_arg(&taxonomy)?;

            let mut cfg: TrainingConfig = match &config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(Error::from)?
                }
                None => TrainingConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.checkpoint_path = Some(out_weights.clone());
            cfg.validate()?;

            let train_set = load_manifest(&manifest_train, &tax, Split::Train)?.load_dataset::<f32>(side)?;
            let val_set = load_manifest(&manifest_val, &tax, Split::Val)?.load_dataset::<f32>(side)?;
            let spec = canonical_spec();
            let model: Model<f32> = init_model(&spec, cfg.seed)?;
            check_model_matches(&model, &tax)?;
            let (best, history) = train(&model, &train_set, &val_set, &cfg)?;
            save_weights(&best, &out_weights)?;
            let history_path = sidecar_path(&out_weights);
            history.write_csv(&history_path)?;
            emit(
                out,
                as_json,
                json!({
                    "command": "train",
                    "seed": cfg.seed,
                    "epochs_run": history.epochs_run(),
                    "best_epoch": history.best_epoch,
                    "best_val_accuracy": history.best_val_accuracy,
                    "stopped_early": history.stopped_early,
                    "weights": out_weights,
                    "history": history_path,
                }),
                format!(
                    "seed: {}\nepochs run: {}{}\nbest epoch: {} (val accuracy {:.4})\nweights: {}\nhistory: {}",
                    cfg.seed,
                    history.epochs_run(),
                    if history.stopped_early { " (early stop)" } else { "" },
                    history.best_epoch,
                    history.best_val_accuracy,
                    out_weights.display(),
                    history_path.display()
                ),
            )
        }

        Command::Eval {
            weights,
            manifest,
            granularity,
            report_out,
            plot,
            side,
            taxonomy,
        } => {
            require_file(&weights)?;
            require_file(&manifest)?;
            for p in report_out.iter().chain(plot.iter()) {
                require_parent_dir(p)?;
            }
            require_side(side)?;
            let tax = load_taxonomy_arg(&taxonomy)?;
            let model: Model<f32> = load_weights(&weights)?;
            check_model_matches(&model, &tax)?;
            let set = load_manifest(&manifest, &tax, Split::Test)?.load_dataset::<f32>(side)?;
            let (loss, _) = evaluate(&model, &set)?;
            let preds: Vec<usize> = predict_all(&model, &set)?.into_iter().map(|(p, _)| p).collect();
            let fine = confusion(&preds, &set.labels(), tax.len())?
                .with_labels(tax.classes().iter().map(|c| c.name.clone()).collect())?;
            let cm = group_confusion(&fine, &tax, granularity)?;
            let rep = report(&cm)?;
            if let Some(p) = &report_out {
                export_report(&rep, &cm, p, ReportFormat::from_path(p))?;
            }
            if let Some(p) = &plot {
                render_confusion_plot(&cm, p)?;
            }
            emit(
                out,
                as_json,
                json!({
                    "command": "eval",
                    "granularity": granularity,
                    "samples": set.len(),
                    "loss": loss,
                    "accuracy": rep.accuracy,
                    "macro_f1": rep.macro_f1,
                    "weighted_f1": rep.weighted_f1,
                }),
                format!(
                    "granularity: {granularity}\nsamples: {}\nloss: {loss:.4}\naccuracy: {:.4}\nmacro F1: {:.4}\nweighted F1: {:.4}",
                    set.len(),
                    rep.accuracy,
                    rep.macro_f1,
                    rep.weighted_f1
                ),
            )
        }

        Command::Classify {
            weights,
            image,
            side,
            taxonomy,
        } => {
            require_file(&weights)?;
            require_file(&image)?;
            require_side(side)?;
            let tax = load_taxonomy_arg(&taxonomy)?;
            let model: Model<f32> = load_weights(&weights)?;
            let input = preprocess::<f32>(&read_netpbm(&image)?, side, side)?;
            let decision = classify_with_preset(&model, &input, &tax)?;
            writeln!(out, "{}", serde_json::to_string(&decision).map_err(Error::from)?)?;
            Ok(())
        }

        Command::Bench {
            weights,
            manifest,
            count,
            warmup,
            parallel,
            side,
            seed,
            taxonomy,
        } => {
            require_file(&weights)?;
            if let Some(m) = &manifest {
                require_file(m)?;
            }
            require_side(side)?;
            let model: Model<f32> = load_weights(&weights)?;
            let images: Vec<Tensor<f32>> = match &manifest {
                Some(m) => {
                    let tax = load_taxonomy_arg(&taxonomy)?;
                    let set = load_manifest(m, &tax, Split::Test)?.load_dataset::<f32>(side)?;
                    set.samples().iter().map(|s| s.image.clone()).collect()
                }
                None => generated_images(count, side, seed)?,
            };
            let result = if parallel {
                benchmark_parallel(&model, &images, warmup)?
            } else {
                benchmark(&model, &images, warmup)?
            };
            emit(
                out,
                as_json,
                json!({
                    "command": "bench",
                    "seed": seed,
                    "result": result,
                    "reference_seconds_per_sample": crate::metrics::reference::SECONDS_PER_SAMPLE,
                    "reference_images_per_second": crate::metrics::reference::IMAGES_PER_SECOND,
                    "reference_note": "hardware-dependent",
                }),
                format!("seed: {seed}\n{result}"),
            )
        }

        Command::Inspect { target, side } => {
            require_side(side)?;
            let spec = if target == "canonical" {
                canonical_spec()
            } else {
                let path = PathBuf::from(&target);
                require_file(&path)?;
                load_weights::<f32>(&path)?.spec().clone()
            };
            let shapes = spec.output_shapes(side, side)?;
            let counts = spec.layer_parameter_counts()?;
            let total: usize = counts.iter().sum();
            let mut text = format!("input: {side}x{side}x{}\n", spec.input_channels);
            text.push_str(&format!(
                "{:<5} {:<10} {:<16} {:>9}\n",
                "layer", "kind", "output", "params"
            ));
            let mut rows = Vec::new();
            for (i, ((layer, shape), n)) in spec.layers.iter().zip(&shapes).zip(&counts).enumerate() {
                let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
                text.push_str(&format!(
                    "{i:<5} {:<10} {:<16} {n:>9}\n",
                    layer.kind.to_string(),
                    dims.join("x")
                ));
                rows.push(json!({"index": i, "kind": layer.kind.to_string(), "output": shape, "parameters": n}));
            }
            let payload = total * 4;
            text.push_str(&format!("total parameters: {total}\nweight payload: {payload} bytes"));
            emit(
                out,
                as_json,
                json!({
                    "command": "inspect",
                    "side": side,
                    "layers": rows,
                    "total_parameters": total,
                    "payload_bytes": payload,
                    "format_version": weights::FORMAT_VERSION,
                }),
                text,
            )
        }
    }
}

fn check_model_matches(model: &Model<f32>, tax: &Taxonomy) -> CliResult {
    if model.num_classes() != tax.len() {
        return Err(CliError::usage(format!(
            "model predicts {} classes but the taxonomy has {}",
            model.num_classes(),
            tax.len()
        )));
    }
    Ok(())
}

fn generated_images(count: usize, side: usize, seed: u64) -> CliResult<Vec<Tensor<f32>>> {
    if count == 0 {
        return Err(CliError::usage("--count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let params = SpeckleParams {
                correlation_length: rng.gen_range(1.0..8.0),
                seed: rng.gen(),
                ..SpeckleParams::default()
            };
            let raw = synth_speckle(&params, side, side)?;
            Ok(preprocess::<f32>(&raw, side, side)?)
        })
        .collect()
}

/// Entry point for the binary: runs, prints errors, returns the exit code.
pub fn main_with_args<I, S>(args: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(args, &mut lock) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("{}", e.to_json_line());
            e.exit_code
        }
    }
}
