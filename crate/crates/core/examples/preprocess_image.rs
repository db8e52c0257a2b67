//! Load a PGM/PPM, keep the green plane, normalize, resize to the model input
//! and show what a random flip does.
//!
//! cargo run --example preprocess_image -- <image.pgm|image.ppm> [side]

use rand::SeedableRng;
use specklenet::pipeline::{augment_flips, extract_green, preprocess, read_netpbm, synth_speckle, SpeckleParams};
use specklenet::Tensor;

fn main() -> specklenet::Result<()> {
    let mut args = std::env::args().skip(1);
    let raw = match args.next() {
        Some(path) => read_netpbm(path)?,
        None => synth_speckle(&SpeckleParams::default(), 300, 400)?.gray_to_rgb(),
    };
    let side: usize = args.next().map_or(512, |s| s.parse().expect("side must be an integer"));
    println!("raw: {}x{} with {} channel(s)", raw.width, raw.height, raw.channels);

    let green: Tensor<f32> = extract_green(&raw)?;
    let input: Tensor<f32> = preprocess(&raw, side, side)?;
    let stats = |t: &Tensor<f32>| {
        let (lo, hi) = t
            .data()
            .iter()
            .fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        (t.sum() / t.len() as f32, lo, hi)
    };
    println!("green plane {:?}: mean/min/max {:?}", green.shape(), stats(&green));
    println!("model input {:?}: mean/min/max {:?}", input.shape(), stats(&input));

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let flipped = augment_flips(&input, &mut rng)?;
    println!("flipped copy keeps the mean: {:?}", stats(&flipped).0);
    Ok(())
}
