use super::{BinaryMask, FloatPlane, ImagingError, RasterImage, Result};

pub const HEATMAP_LUT_SIZE: usize = 256;

/// The fixed blue → green → red ramp used for heatmaps.
///
/// Entries 0..=127 run from pure blue (0,0,255) to pure green (0,255,0);
/// entries 128..=255 run from pure green to pure red (255,0,0). Channel values
/// are `round(255·s)` with `s = i/127` in the lower half and `s = (i−128)/127`
/// in the upper half. A saliency value `v` selects entry `round(v·255)`, so
/// 0 → blue, 0.5 → entry 128 = (0,255,0), 1 → red.
pub fn heatmap_lut() -> [[u8; 3]; HEATMAP_LUT_SIZE] {
    let mut lut = [[0u8; 3]; HEATMAP_LUT_SIZE];
    for (i, entry) in lut.iter_mut().enumerate() {
        let (lower, s) = if i < 128 { (true, i as f64 / 127.0) } else { (false, (i - 128) as f64 / 127.0) };
        let up = (255.0 * s).round() as u8;
        let down = (255.0 * (1.0 - s)).round() as u8;
        *entry = if lower { [0, up, down] } else { [up, down, 0] };
    }
    lut
}

pub fn colorize(saliency: &FloatPlane) -> Result<RasterImage> {
    if let Some(bad) = saliency.values().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ImagingError::InvalidInput(format!("saliency value {bad} outside [0, 1]")));
    }
    let lut = heatmap_lut();
    let data = saliency
        .values()
        .iter()
        .flat_map(|&v| lut[(v * 255.0).round() as usize])
        .collect();
    RasterImage::new(saliency.width(), saliency.height(), 3, data)
}

/// `out = (1 − opacity)·base + opacity·overlay`, rounded to nearest.
///
/// A gray overlay is broadcast across the channels of an RGB base, and vice
/// versa the output always has the larger channel count.
pub fn blend_overlay(base: &RasterImage, overlay: &RasterImage, opacity: f64) -> Result<RasterImage> {
    if !(0.0..=1.0).contains(&opacity) {
        return Err(ImagingError::InvalidParameter(format!("opacity {opacity} outside [0, 1]")));
    }
    if !overlay.same_size(base.width(), base.height()) {
        return Err(ImagingError::InvalidInput(format!(
            "overlay is {}x{}, base is {}x{}",
            overlay.width(),
            overlay.height(),
            base.width(),
            base.height()
        )));
    }
    let (base, overlay) = if base.channels() == overlay.channels() {
        (base.clone(), overlay.clone())
    } else {
        (base.to_rgb(), overlay.to_rgb())
    };
    let data = base
        .data()
        .iter()
        .zip(overlay.data())
        .map(|(&b, &o)| ((1.0 - opacity) * f64::from(b) + opacity * f64::from(o)).round().clamp(0.0, 255.0) as u8)
        .collect();
    RasterImage::new(base.width(), base.height(), base.channels(), data)
}

/// Nearest-neighbor rescale. Output pixel centers are mapped back onto the source grid.
pub fn resample_mask(mask: &BinaryMask, new_w: usize, new_h: usize) -> Result<BinaryMask> {
    if new_w == 0 || new_h == 0 {
        return Err(ImagingError::InvalidParameter("target size must be positive".into()));
    }
    if mask.same_size(new_w, new_h) {
        return Ok(mask.clone());
    }
    let (w, h) = (mask.width(), mask.height());
    let src = |i: usize, n_out: usize, n_in: usize| (((i as f64 + 0.5) * n_in as f64 / n_out as f64) as usize).min(n_in - 1);
    Ok(BinaryMask::from_fn(new_w, new_h, |x, y| mask.get(src(x, new_w, w), src(y, new_h, h))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lut_endpoints_and_midpoint() {
        let lut = heatmap_lut();
        assert_eq!(lut[0], [0, 0, 255]);
        assert_eq!(lut[127], [0, 255, 0]);
        assert_eq!(lut[128], [0, 255, 0]);
        assert_eq!(lut[255], [255, 0, 0]);
    }

    #[test]
    fn lut_is_monotone_through_the_ramp() {
        let lut = heatmap_lut();
        for i in 1..128 {
            assert!(lut[i][1] >= lut[i - 1][1] && lut[i][2] <= lut[i - 1][2]);
        }
        for i in 129..256 {
            assert!(lut[i][0] >= lut[i - 1][0] && lut[i][1] <= lut[i - 1][1]);
        }
    }

    #[test]
    fn colorize_uniform_planes() {
        let cold = colorize(&FloatPlane::filled(3, 2, 0.0).unwrap()).unwrap();
        assert!(cold.data().chunks(3).all(|p| p == [0, 0, 255]));
        let hot = colorize(&FloatPlane::filled(3, 2, 1.0).unwrap()).unwrap();
        assert!(hot.data().chunks(3).all(|p| p == [255, 0, 0]));
        let mid = colorize(&FloatPlane::filled(1, 1, 0.5).unwrap()).unwrap();
        // round(0.5·255) = 128 → first entry of the upper half
        assert_eq!(mid.data(), &[0, 255, 0]);
    }

    #[test]
    fn colorize_rejects_out_of_range() {
        assert!(colorize(&FloatPlane::filled(1, 1, 1.01).unwrap()).is_err());
        assert!(colorize(&FloatPlane::filled(1, 1, -0.01).unwrap()).is_err());
    }

    #[test]
    fn blend_examples() {
        let base = RasterImage::filled_rgb(2, 2, [100, 100, 100]).unwrap();
        let over = RasterImage::filled_rgb(2, 2, [200, 200, 200]).unwrap();
        assert_eq!(blend_overlay(&base, &over, 0.0).unwrap(), base);
        assert_eq!(blend_overlay(&base, &over, 1.0).unwrap(), over);
        let b = blend_overlay(&base, &over, 0.9).unwrap();
        assert!(b.data().iter().all(|&v| v == 190));
    }

    #[test]
    fn blend_dimension_mismatch() {
        let base = RasterImage::filled_rgb(2, 2, [0, 0, 0]).unwrap();
        let over = RasterImage::filled_rgb(3, 2, [0, 0, 0]).unwrap();
        assert!(matches!(blend_overlay(&base, &over, 0.5), Err(ImagingError::InvalidInput(_))));
        assert!(blend_overlay(&base, &base, 1.5).is_err());
    }

    #[test]
    fn blend_broadcasts_gray_overlay() {
        let base = RasterImage::filled_rgb(1, 1, [0, 100, 200]).unwrap();
        let over = RasterImage::new(1, 1, 1, vec![255]).unwrap();
        assert_eq!(blend_overlay(&base, &over, 0.5).unwrap().data(), &[128, 178, 228]);
    }

    #[test]
    fn resample_identity_and_doubling() {
        let checker = BinaryMask::from_fn(2, 2, |x, y| (x + y) % 2 == 0);
        assert_eq!(resample_mask(&checker, 2, 2).unwrap(), checker);
        let big = resample_mask(&checker, 4, 4).unwrap();
        let expected = BinaryMask::from_fn(4, 4, |x, y| (x / 2 + y / 2) % 2 == 0);
        assert_eq!(big, expected);
    }

    #[test]
    fn resample_180_to_original_preserves_area_ratio() {
        let small = BinaryMask::from_fn(180, 180, |x, y| {
            let (dx, dy) = (x as f64 - 90.0, y as f64 - 80.0);
            dx * dx / (60.0 * 60.0) + dy * dy / (45.0 * 45.0) <= 1.0
        });
        let big = resample_mask(&small, 600, 450).unwrap();
        let r0 = small.count() as f64 / (180.0 * 180.0);
        let r1 = big.count() as f64 / (600.0 * 450.0);
        assert!((r1 - r0).abs() / r0 < 0.02, "{r0} vs {r1}");
    }

    proptest! {
        #[test]
        fn blend_stays_between_inputs(b in 0u8..=255, o in 0u8..=255, alpha in 0.0f64..=1.0) {
            let base = RasterImage::filled_rgb(1, 1, [b; 3]).unwrap();
            let over = RasterImage::filled_rgb(1, 1, [o; 3]).unwrap();
            let v = blend_overlay(&base, &over, alpha).unwrap().data()[0];
            prop_assert!(v >= b.min(o) && v <= b.max(o));
        }
    }
}
