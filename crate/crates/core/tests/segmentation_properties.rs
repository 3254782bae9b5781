use dermalens_core::imaging::{BinaryMask, FloatPlane, RasterImage};
use dermalens_core::segmentation::{
    chan_vese_from, chan_vese_segment, jaccard, preprocess, segment_lesion, shrink_initialize, CVParams, SegmentationConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn noisy_disk(n: usize, r: f64, noise: f64, seed: u64) -> (FloatPlane, BinaryMask) {
    let c = n as f64 / 2.0;
    let truth = BinaryMask::from_fn(n, n, |x, y| (x as f64 + 0.5 - c).powi(2) + (y as f64 + 0.5 - c).powi(2) <= r * r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = FloatPlane::from_fn(n, n, |x, y| {
        let base = if truth.get(x, y) { 0.3 } else { 0.8 };
        base + noise * rng.sample::<f64, _>(StandardNormal)
    })
    .unwrap();
    (plane, truth)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn affine_intensity_change_keeps_the_mask(a in 0.25f64..4.0, b in -2.0f64..2.0, seed in 0u64..1000) {
        let (plane, _) = noisy_disk(48, 14.0, 0.08, seed);
        let base = chan_vese_segment(&plane, &CVParams::default()).unwrap();
        let moved = chan_vese_segment(&plane.map(|v| a * v + b).unwrap(), &CVParams::default()).unwrap();
        prop_assert_eq!(base.mask, moved.mask);
        prop_assert_eq!(base.iterations_used, moved.iterations_used);
    }

    #[test]
    fn energy_never_increases(seed in 0u64..1000, noise in 0.0f64..0.2) {
        let (plane, _) = noisy_disk(40, 11.0, noise, seed);
        let params = CVParams::default();
        let init = shrink_initialize(40, 40, params.margin_fraction).unwrap();
        if let Ok((_, trace)) = chan_vese_from(&plane, init, &params) {
            prop_assert!(trace.energy.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}

const DISK_LEVEL: f64 = 60.0;
const SKIN_LEVEL: f64 = 180.0;

fn noisy_disk_image(noise: f64, seed: u64) -> (RasterImage, BinaryMask) {
    let truth = BinaryMask::from_fn(100, 100, |x, y| (x as f64 + 0.5 - 50.0).powi(2) + (y as f64 + 0.5 - 50.0).powi(2) <= 400.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let img = RasterImage::from_fn_rgb(100, 100, |x, y| {
        let base = if truth.get(x, y) { DISK_LEVEL } else { SKIN_LEVEL };
        let v = (base + noise * rng.sample::<f64, _>(StandardNormal)).round().clamp(0.0, 255.0) as u8;
        [v, v, v]
    })
    .unwrap();
    (img, truth)
}

/// Phase contrast over the noise standard deviation, both measured on the
/// smoothed luminance the segmenter sees.
fn smoothed_snr(noise: f64, seed: u64) -> f64 {
    let cfg = SegmentationConfig::default();
    let flat = RasterImage::from_fn_rgb(100, 100, {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        move |_, _| {
            let v = (120.0 + noise * rng.sample::<f64, _>(StandardNormal)).round().clamp(0.0, 255.0) as u8;
            [v, v, v]
        }
    })
    .unwrap();
    let plane = preprocess(&flat, cfg.kernel_size, cfg.sigma).unwrap().plane;
    let inner: Vec<f64> = (5..95).flat_map(|y| (5..95).map(move |x| (x, y))).map(|(x, y)| plane.get(x, y)).collect();
    let m = inner.iter().sum::<f64>() / inner.len() as f64;
    let sd = (inner.iter().map(|v| (v - m).powi(2)).sum::<f64>() / inner.len() as f64).sqrt();
    (SKIN_LEVEL - DISK_LEVEL) / 255.0 / sd
}

#[test]
fn noisy_disk_meets_the_overlap_target() {
    let noise = 75.0;
    for seed in 0..10 {
        let snr = smoothed_snr(noise, seed);
        assert!(snr >= 5.0, "fixture too noisy: SNR {snr}");
        let (img, truth) = noisy_disk_image(noise, seed);
        let got = segment_lesion(&img, &SegmentationConfig::default()).unwrap();
        let j = jaccard(&truth, &got.mask).unwrap();
        assert!(j >= 0.95, "seed {seed}: SNR {snr:.2}, J = {j}");
    }
}
