//! Time single-image inference, sequential and batched over threads.
//!
//! cargo run --release --example benchmark -- [side] [count]

use specklenet::metrics::{benchmark, benchmark_parallel};
use specklenet::pipeline::{preprocess, synth_speckle, SpeckleParams};
use specklenet::{canonical_spec, init_model, Model, Tensor};

fn main() -> specklenet::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("integer argument"));
    let side = args.next().unwrap_or(512);
    let count = args.next().unwrap_or(16);

    let model: Model<f32> = init_model(&canonical_spec(), 42)?;
    let images = (0..count as u64)
        .map(|seed| {
            preprocess(
                &synth_speckle(
                    &SpeckleParams {
                        seed,
                        ..Default::default()
                    },
                    side,
                    side,
                )?,
                side,
                side,
            )
        })
        .collect::<specklenet::Result<Vec<Tensor<f32>>>>()?;

    println!("{}\n", benchmark(&model, &images, 3)?);
    println!("{}", benchmark_parallel(&model, &images, 3)?);
    Ok(())
}
