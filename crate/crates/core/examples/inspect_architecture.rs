//! Print the canonical layer stack with output shapes and parameter counts.
//!
//! cargo run --example inspect_architecture -- [side]

use specklenet::{canonical_spec, parameter_count};

fn main() -> specklenet::Result<()> {
    let side: usize = std::env::args()
        .nth(1)
        .map_or(512, |s| s.parse().expect("side must be an integer"));
    let spec = canonical_spec();
    let shapes = spec.output_shapes(side, side)?;
    let counts = spec.layer_parameter_counts()?;

    println!("input {side}x{side}x{}", spec.input_channels);
    for ((layer, shape), n) in spec.layers.iter().zip(&shapes).zip(&counts) {
        let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
        println!("{:<10} {:<14} {n:>8}", layer.kind.to_string(), dims.join("x"));
    }
    let total = parameter_count(&spec)?;
    println!(
        "{total} parameters, {:.2} MiB at f32",
        (total * 4) as f64 / (1 << 20) as f64
    );
    Ok(())
}
