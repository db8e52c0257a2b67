//! Save a model, reload it and confirm the outputs are bit-identical.
//!
//! cargo run --example weights_roundtrip -- [path]

use specklenet::model::weights::{payload_bytes, to_bytes};
use specklenet::pipeline::{preprocess, synth_speckle, SpeckleParams};
use specklenet::{canonical_spec, init_model, load_weights, save_weights, Model};

fn main() -> specklenet::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "canonical.spkn".into());
    let model: Model<f32> = init_model(&canonical_spec(), 42)?;
    save_weights(&model, &path)?;
    let bytes = to_bytes(&model);
    println!(
        "{path}: {} bytes ({} payload + {} header)",
        bytes.len(),
        payload_bytes(&model),
        bytes.len() - payload_bytes(&model)
    );

    let loaded: Model<f32> = load_weights(&path)?;
    let x = preprocess(&synth_speckle(&SpeckleParams::default(), 256, 256)?, 256, 256)?;
    let (a, b) = (model.forward(&x)?, loaded.forward(&x)?);
    let identical = a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits());
    println!(
        "parameters equal: {}, outputs bit-identical: {identical}",
        model.params() == loaded.params()
    );

    // a 64-bit model is stored at single precision
    let wide: Model<f64> = model.cast();
    assert_eq!(to_bytes(&wide), bytes);
    Ok(())
}
