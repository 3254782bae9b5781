use dermalens_core::abcd::{analyze, border_irregularity, project_scores, AbcdConfig, AbcdFeatures, ProjectionConstants};
use dermalens_core::imaging::{BinaryMask, RasterImage};
use proptest::prelude::*;

/// Lobed shape: radius r·(1 + a·cos(k·θ)) around (cx, cy), sampled at pixel centers.
fn lobed(w: usize, h: usize, cx: f64, cy: f64, r: f64, a: f64, k: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |x, y| {
        let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
        let t = dy.atan2(dx);
        dx.hypot(dy) <= r * (1.0 + a * (k * t).cos())
    })
}

fn paint(mask: &BinaryMask) -> RasterImage {
    RasterImage::from_fn_rgb(mask.width(), mask.height(), |x, y| if mask.get(x, y) { [110, 70, 40] } else { [235, 205, 185] }).unwrap()
}

fn shift(mask: &BinaryMask, dx: usize, dy: usize) -> BinaryMask {
    BinaryMask::from_fn(mask.width() + dx, mask.height() + dy, |x, y| x >= dx && y >= dy && mask.get(x - dx, y - dy))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn translation_leaves_features_unchanged(r in 12.0f64..30.0, a in 0.0f64..0.3, k in 2u32..6, dx in 0usize..40, dy in 0usize..40) {
        let m = lobed(80, 80, 40.0, 40.0, r, a, k as f64);
        let moved = shift(&m, dx, dy);
        let cfg = AbcdConfig::default();
        let f0 = analyze(&paint(&m), &m, 0.033, &cfg).unwrap().features;
        let f1 = analyze(&paint(&moved), &moved, 0.033, &cfg).unwrap().features;
        prop_assert!((f0.asym_vertical_pct - f1.asym_vertical_pct).abs() < 1e-9);
        prop_assert!((f0.asym_horizontal_pct - f1.asym_horizontal_pct).abs() < 1e-9);
        prop_assert!((f0.irregularity_index - f1.irregularity_index).abs() < 1e-9);
        prop_assert_eq!(f0.asymmetry_parameters().len(), 8);
    }

    #[test]
    fn irregularity_is_scale_stable(r in 15.0f64..30.0, a in 0.0f64..0.25, k in 2u32..6) {
        let small = lobed(90, 90, 45.0, 45.0, r, a, k as f64);
        let i1 = border_irregularity(&small).unwrap();
        let blocky = BinaryMask::from_fn(180, 180, |x, y| small.get(x / 2, y / 2));
        let redrawn = lobed(180, 180, 90.0, 90.0, 2.0 * r, a, k as f64);
        for large in [blocky, redrawn] {
            let i2 = border_irregularity(&large).unwrap();
            prop_assert!((i2 / i1 - 1.0).abs() <= 0.05, "{} vs {}", i1, i2);
        }
    }

    #[test]
    fn projection_is_monotone(base in 0.0f64..50.0, bump in 0.0f64..50.0, field in 0usize..5) {
        let mk = |v: f64| {
            let mut f = AbcdFeatures {
                asym_vertical_pct: 5.0,
                asym_horizontal_pct: 5.0,
                centroid_distances: [0.0; 6],
                irregularity_index: 1.2,
                diameter_h_mm: 4.0,
                diameter_v_mm: 3.0,
                colors_present: vec![],
                color_regions: vec![],
                rect_major_px: 100.0,
                rect_minor_px: 80.0,
                tilt_deg: 0.0,
                lesion_area_px: 1000,
                mm_per_pixel: 0.033,
            };
            match field {
                0 => f.asym_vertical_pct = v,
                1 => f.asym_horizontal_pct = v,
                2 => f.irregularity_index = 1.0 + v / 10.0,
                3 => f.diameter_h_mm = v / 3.0,
                _ => f.diameter_v_mm = v / 3.0,
            }
            let s = project_scores(&f, &ProjectionConstants::default());
            [s.a2, s.a1, s.b, s.d1, s.d2][field]
        };
        prop_assert!(mk(base + bump) >= mk(base));
    }

    #[test]
    fn diameters_are_linear_in_scale(mm in 0.005f64..0.2, r in 10.0f64..30.0) {
        let m = lobed(80, 80, 40.0, 40.0, r, 0.1, 3.0);
        let cfg = AbcdConfig::default();
        let unit = analyze(&paint(&m), &m, 1.0, &cfg).unwrap().features;
        let f = analyze(&paint(&m), &m, mm, &cfg).unwrap().features;
        prop_assert!((f.diameter_h_mm - mm * unit.diameter_h_mm).abs() <= 1e-9);
        prop_assert!((f.diameter_v_mm - mm * unit.diameter_v_mm).abs() <= 1e-9);
    }
}
