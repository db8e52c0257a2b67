use std::collections::HashMap;
use std::fmt::Write as _;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specklenet::pipeline::*;
use specklenet::{Taxonomy, Tensor};

fn speckle(correlation_length: f64, mean_intensity: f64, seed: u64, side: usize) -> RawImage {
    let params = SpeckleParams {
        correlation_length,
        mean_intensity,
        seed,
        ..Default::default()
    };
    synth_speckle(&params, side, side).unwrap()
}

fn mean_std(data: &[u8]) -> (f64, f64) {
    let n = data.len() as f64;
    let mean = data.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = data.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// First horizontal lag at which the normalized autocovariance falls below 1/2.
fn half_width(img: &RawImage) -> usize {
    let (mean, std) = mean_std(&img.data);
    let (w, h) = (img.width, img.height);
    let at = |x: usize, y: usize| img.data[y * w + x] as f64 - mean;
    (1..w / 2)
        .find(|&lag| {
            let mut acc = 0.0;
            for y in 0..h {
                for x in 0..w - lag {
                    acc += at(x, y) * at(x + lag, y);
                }
            }
            acc / ((h * (w - lag)) as f64 * std * std) < 0.5
        })
        .expect("correlation decays within half the image")
}

#[test]
fn flip_combinations_are_equally_likely() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 10_000;
    let mut counts: HashMap<Flips, usize> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sample_flips(&mut rng)).or_default() += 1;
    }
    assert_eq!(counts.len(), 4);
    for (flips, n) in counts {
        let freq = n as f64 / draws as f64;
        assert!((freq - 0.25).abs() <= 0.02, "{flips:?}: {freq}");
    }
}

#[test]
fn intensity_histogram_decreases_beyond_mode() {
    // low mean keeps the tail away from the 255 clamp
    let img = speckle(1.0, 0.1, 3, 256);
    let mut bins = [0usize; 8];
    for &v in &img.data {
        if (v as usize) < 64 {
            bins[v as usize / 8] += 1;
        }
    }
    let mode = (0..bins.len()).max_by_key(|&i| bins[i]).unwrap();
    assert!(mode <= 1, "mode bin {mode} in {bins:?}");
    for pair in bins[mode..].windows(2) {
        assert!(pair[1] <= pair[0], "{bins:?}");
    }
}

#[test]
fn grain_size_follows_correlation_length() {
    let widths: Vec<usize> = [2.0, 4.0, 8.0]
        .iter()
        .map(|&l| half_width(&speckle(l, 0.25, 11, 192)))
        .collect();
    assert!(widths.windows(2).all(|w| w[0] < w[1]), "{widths:?}");
}

#[test]
fn seeds_share_statistics() {
    let (m1, s1) = mean_std(&speckle(2.0, 0.25, 1, 256).data);
    let (m2, s2) = mean_std(&speckle(2.0, 0.25, 2, 256).data);
    assert!((m1 - m2).abs() <= 0.1 * m1.max(m2), "means {m1} {m2}");
    assert!((s1 - s2).abs() <= 0.1 * s1.max(s2), "stds {s1} {s2}");
    // fully developed speckle: standard deviation close to the mean
    assert!((s1 / m1 - 1.0).abs() < 0.25, "contrast {}", s1 / m1);
}

#[test]
fn same_seed_same_pixels() {
    assert_eq!(speckle(2.0, 0.25, 5, 64), speckle(2.0, 0.25, 5, 64));
    assert_ne!(speckle(2.0, 0.25, 5, 64), speckle(2.0, 0.25, 6, 64));
}

#[test]
fn downscaling_preserves_mean() {
    let img = speckle(2.0, 0.25, 9, 256);
    let t: Tensor<f64> = extract_green(&img).unwrap();
    let small = resize_bilinear(&t, 128, 128).unwrap();
    let (a, b) = (t.sum() / t.len() as f64, small.sum() / small.len() as f64);
    assert!((a - b).abs() <= 0.02 * a, "{a} vs {b}");
}

#[test]
fn gray_and_replicated_rgb_agree() {
    let img = speckle(2.0, 0.25, 4, 40);
    let gray: Tensor<f64> = preprocess(&img, 32, 32).unwrap();
    let rgb: Tensor<f64> = preprocess(&img.gray_to_rgb(), 32, 32).unwrap();
    assert_eq!(gray, rgb);
}

#[test]
fn manifest_loads_every_entry() {
    let dir = tempfile::tempdir().unwrap();
    let taxonomy = Taxonomy::default_config();
    let mut text = String::from("# path\tclass\n");
    for i in 0..364 {
        let img = speckle(1.5, 0.25, i, 16);
        img.save(dir.path().join(format!("{i:03}.pgm"))).unwrap();
        let class = &taxonomy.classes()[i as usize % taxonomy.len()].name;
        writeln!(text, "{i:03}.pgm\t{class}").unwrap();
    }
    let path = dir.path().join("test.tsv");
    std::fs::write(&path, text).unwrap();
    let manifest = load_manifest(&path, &taxonomy, Split::Test).unwrap();
    assert_eq!(manifest.len(), 364);
    let set = manifest.load_dataset::<f32>(16).unwrap();
    assert_eq!(set.len(), 364);
    assert_eq!(set.get(60).unwrap().label, 1);
}

fn raw_image() -> impl Strategy<Value = RawImage> {
    (1usize..40, 1usize..40, prop_oneof![Just(1usize), Just(3)]).prop_flat_map(|(w, h, c)| {
        prop::collection::vec(any::<u8>(), w * h * c).prop_map(move |data| RawImage::new(w, h, c, data).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn preprocessing_yields_model_input(img in raw_image()) {
        let t: Tensor<f32> = preprocess(&img, INPUT_SIDE, INPUT_SIDE).unwrap();
        prop_assert_eq!(t.shape(), &[INPUT_SIDE, INPUT_SIDE, 1]);
        prop_assert!(t.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn flips_are_involutions(img in raw_image()) {
        let t: Tensor<f64> = extract_green(&img).unwrap();
        prop_assert_eq!(&flip_horizontal(&flip_horizontal(&t).unwrap()).unwrap(), &t);
        prop_assert_eq!(&flip_vertical(&flip_vertical(&t).unwrap()).unwrap(), &t);
        let both = Flips { horizontal: true, vertical: true };
        let f = apply_flips(&t, both).unwrap();
        prop_assert_eq!(f.shape(), t.shape());
        prop_assert!((f.sum() - t.sum()).abs() < 1e-9);
    }

    #[test]
    fn netpbm_encoding_decodes_to_same_image(img in raw_image()) {
        prop_assert_eq!(decode_netpbm(&img.to_netpbm().unwrap(), "mem").unwrap(), img);
    }
}
