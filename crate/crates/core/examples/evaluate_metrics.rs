//! Score noisy predictions over the 59-class taxonomy at every granularity
//! and export the fine-grained report and confusion plot.
//!
//! cargo run --example evaluate_metrics -- [out_dir]

use rand::{Rng, SeedableRng};
use specklenet::metrics::{export_report, group_confusion, render_confusion_plot, ReportFormat};
use specklenet::{confusion, report, Granularity, Taxonomy};

fn main() -> specklenet::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| ".".into());
    let taxonomy = Taxonomy::default_config();
    let n = taxonomy.len();

    // mistakes land on a neighbouring id, which is usually the same family
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let labels: Vec<usize> = (0..n * 20).map(|i| i % n).collect();
    let preds: Vec<usize> = labels
        .iter()
        .map(|&t| if rng.gen_bool(0.9) { t } else { (t + 1) % n })
        .collect();

    let names = taxonomy.classes().iter().map(|c| c.name.clone()).collect();
    let fine = confusion(&preds, &labels, n)?.with_labels(names)?;
    for g in [Granularity::Fine, Granularity::Nine, Granularity::Five] {
        let r = report(&group_confusion(&fine, &taxonomy, g)?)?;
        println!(
            "{g:>5}: accuracy {:.4}  macro F1 {:.4}  weighted F1 {:.4}  min recall {:.3}",
            r.accuracy,
            r.macro_f1,
            r.weighted_f1,
            r.recall.iter().cloned().fold(1.0, f64::min)
        );
    }

    let r = report(&fine)?;
    export_report(&r, &fine, format!("{out}/report.csv"), ReportFormat::Csv)?;
    export_report(&r, &fine, format!("{out}/report.json"), ReportFormat::Json)?;
    render_confusion_plot(&fine, format!("{out}/confusion.ppm"))?;
    println!("wrote report.csv, report.json and confusion.ppm to {out}");
    Ok(())
}
