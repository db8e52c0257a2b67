//! Classify an image and map the result to a cutter preset, refusing
//! hazardous materials. Untrained weights give an arbitrary class; the point
//! is the decision record.
//!
//! cargo run --example classify_with_preset -- [weights.spkn] [image.pgm]

use specklenet::pipeline::{preprocess, read_netpbm, synth_speckle, SpeckleParams};
use specklenet::{canonical_spec, classify_with_preset, init_model, load_weights, Granularity, Model, Taxonomy};

fn main() -> specklenet::Result<()> {
    let mut args = std::env::args().skip(1);
    let model: Model<f32> = match args.next() {
        Some(path) => load_weights(path)?,
        None => init_model(&canonical_spec(), 42)?,
    };
    let raw = match args.next() {
        Some(path) => read_netpbm(path)?,
        None => synth_speckle(&SpeckleParams::default(), 512, 512)?,
    };
    let taxonomy = Taxonomy::resolve(None)?;

    let decision = classify_with_preset(&model, &preprocess(&raw, 512, 512)?, &taxonomy)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&decision).expect("decision serializes")
    );

    for name in ["pvc", "hardwood_walnut"] {
        let id = taxonomy.class_id(name).expect("shipped class");
        let preset = taxonomy.preset_for(id)?;
        println!(
            "{name}: {} / {} -> allowed {}",
            taxonomy.family_of(id, Granularity::Nine)?,
            taxonomy.family_of(id, Granularity::Five)?,
            preset.allowed
        );
    }
    Ok(())
}
