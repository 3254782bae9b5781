//! Color variegation: assign lesion pixels to six clinical colors by HSV range.

use serde::{Deserialize, Serialize};

use crate::imaging::{BinaryMask, Hsv, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LesionColor {
    White,
    Red,
    LightBrown,
    DarkBrown,
    BlueGray,
    Black,
}

impl LesionColor {
    /// Fixed order; also the order of the six centroid distances.
    pub const ALL: [LesionColor; 6] = [
        LesionColor::White,
        LesionColor::Red,
        LesionColor::LightBrown,
        LesionColor::DarkBrown,
        LesionColor::BlueGray,
        LesionColor::Black,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            LesionColor::White => "white",
            LesionColor::Red => "red",
            LesionColor::LightBrown => "light-brown",
            LesionColor::DarkBrown => "dark-brown",
            LesionColor::BlueGray => "blue-gray",
            LesionColor::Black => "black",
        }
    }

    /// Marker color used when drawing the region overlay.
    pub fn marker_rgb(self) -> [u8; 3] {
        match self {
            LesionColor::White => [0, 255, 255],
            LesionColor::Red => [255, 0, 255],
            LesionColor::LightBrown => [255, 255, 0],
            LesionColor::DarkBrown => [255, 0, 0],
            LesionColor::BlueGray => [0, 0, 255],
            LesionColor::Black => [0, 255, 0],
        }
    }
}

/// Inclusive HSV box. `hue` is `None` for achromatic colors; a hue range with
/// `lo > hi` wraps through 0°.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorBox {
    pub color: LesionColor,
    pub hue: Option<(f64, f64)>,
    pub saturation: (f64, f64),
    pub value: (f64, f64),
}

fn hue_in(h: f64, (lo, hi): (f64, f64)) -> bool {
    if lo <= hi {
        (lo..=hi).contains(&h)
    } else {
        h >= lo || h <= hi
    }
}

fn hue_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % 360.0;
    d.min(360.0 - d)
}

impl ColorBox {
    pub fn contains(&self, px: Hsv) -> bool {
        self.hue.is_none_or(|r| hue_in(px.h, r))
            && (self.saturation.0..=self.saturation.1).contains(&px.s)
            && (self.value.0..=self.value.1).contains(&px.v)
    }

    pub fn center(&self) -> Hsv {
        let h = match self.hue {
            None => 0.0,
            Some((lo, hi)) if lo <= hi => (lo + hi) / 2.0,
            Some((lo, hi)) => ((lo + hi + 360.0) / 2.0) % 360.0,
        };
        Hsv { h, s: (self.saturation.0 + self.saturation.1) / 2.0, v: (self.value.0 + self.value.1) / 2.0 }
    }

    /// Squared distance to the box center; hue differences are scaled by 1/180
    /// and only count for boxes that constrain hue.
    pub fn distance_sq(&self, px: Hsv) -> f64 {
        let c = self.center();
        let dh = if self.hue.is_some() { hue_distance(px.h, c.h) / 180.0 } else { 0.0 };
        dh * dh + (px.s - c.s).powi(2) + (px.v - c.v).powi(2)
    }
}

/// The six default boxes, in matching priority order.
pub fn default_color_boxes() -> Vec<ColorBox> {
    vec![
        ColorBox { color: LesionColor::White, hue: None, saturation: (0.0, 0.15), value: (0.8, 1.0) },
        ColorBox { color: LesionColor::Red, hue: Some((345.0, 15.0)), saturation: (0.4, 1.0), value: (0.3, 1.0) },
        ColorBox { color: LesionColor::LightBrown, hue: Some((15.0, 50.0)), saturation: (0.2, 0.6), value: (0.5, 0.9) },
        ColorBox { color: LesionColor::DarkBrown, hue: Some((15.0, 50.0)), saturation: (0.3, 1.0), value: (0.2, 0.5) },
        ColorBox { color: LesionColor::BlueGray, hue: Some((180.0, 260.0)), saturation: (0.1, 0.5), value: (0.3, 0.8) },
        ColorBox { color: LesionColor::Black, hue: None, saturation: (0.0, 1.0), value: (0.0, 0.2) },
    ]
}

/// First box containing the pixel, else the box with the nearest center
/// (earlier boxes win ties).
pub fn classify_pixel(boxes: &[ColorBox], px: Hsv) -> Option<LesionColor> {
    if let Some(b) = boxes.iter().find(|b| b.contains(px)) {
        return Some(b.color);
    }
    boxes
        .iter()
        .map(|b| (b.distance_sq(px), b.color))
        .fold(None, |best: Option<(f64, LesionColor)>, cur| match best {
            Some(b) if b.0 <= cur.0 => Some(b),
            _ => Some(cur),
        })
        .map(|(_, c)| c)
}

/// Per-pixel color labels (row-major); `None` outside the lesion.
pub fn label_lesion_pixels(img: &RasterImage, mask: &BinaryMask, boxes: &[ColorBox]) -> Vec<Option<LesionColor>> {
    let mut out = Vec::with_capacity(mask.width() * mask.height());
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            out.push(if mask.get(x, y) { classify_pixel(boxes, Hsv::from_rgb(img.rgb(x, y))) } else { None });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorRegion {
    pub color: LesionColor,
    pub area_px: usize,
    /// V-weighted centroid (x, y) in pixel-center coordinates of the source image.
    pub centroid: (f64, f64),
}

/// Group lesion pixels by color and drop colors covering less than
/// `min_area_fraction` of the lesion. Regions come back in [`LesionColor::ALL`] order.
pub fn color_regions(
    img: &RasterImage,
    mask: &BinaryMask,
    boxes: &[ColorBox],
    min_area_fraction: f64,
) -> Vec<ColorRegion> {
    let labels = label_lesion_pixels(img, mask, boxes);
    let lesion_area = mask.count();
    let mut acc = [(0usize, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64); 6];
    for (i, label) in labels.iter().enumerate() {
        let Some(c) = label else { continue };
        let (x, y) = ((i % mask.width()) as f64, (i / mask.width()) as f64);
        let v = Hsv::from_rgb(img.rgb(i % mask.width(), i / mask.width())).v;
        let a = &mut acc[c.index()];
        a.0 += 1;
        a.1 += v * x;
        a.2 += v * y;
        a.3 += v;
        a.4 += x;
        a.5 += y;
    }
    LesionColor::ALL
        .iter()
        .zip(acc)
        .filter(|(_, a)| a.0 > 0 && a.0 as f64 >= min_area_fraction * lesion_area as f64)
        .map(|(&color, (n, wx, wy, wsum, sx, sy))| {
            let centroid = if wsum > 0.0 { (wx / wsum, wy / wsum) } else { (sx / n as f64, sy / n as f64) };
            ColorRegion { color, area_px: n, centroid }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hsv(rgb: [u8; 3]) -> Hsv {
        Hsv::from_rgb(rgb)
    }

    #[test]
    fn reference_colors_land_in_their_boxes() {
        let boxes = default_color_boxes();
        let cases = [
            ([235, 235, 235], LesionColor::White),
            ([180, 40, 40], LesionColor::Red),
            ([200, 150, 100], LesionColor::LightBrown),
            ([110, 70, 40], LesionColor::DarkBrown),
            ([100, 115, 140], LesionColor::BlueGray),
            ([30, 25, 25], LesionColor::Black),
        ];
        for (rgb, want) in cases {
            assert_eq!(classify_pixel(&boxes, hsv(rgb)), Some(want), "{rgb:?}");
        }
    }

    #[test]
    fn red_hue_wraps_through_zero() {
        let b = default_color_boxes()[1];
        assert!(b.contains(Hsv { h: 350.0, s: 0.8, v: 0.7 }));
        assert!(b.contains(Hsv { h: 10.0, s: 0.8, v: 0.7 }));
        assert!(!b.contains(Hsv { h: 100.0, s: 0.8, v: 0.7 }));
        assert!((b.center().h - 0.0).abs() < 1e-12);
    }

    #[test]
    fn unmatched_pixels_go_to_nearest_center_deterministically() {
        let boxes = default_color_boxes();
        // saturated green matches no box
        let px = hsv([40, 200, 40]);
        assert!(boxes.iter().all(|b| !b.contains(px)));
        let first = classify_pixel(&boxes, px);
        assert!(first.is_some());
        for _ in 0..10 {
            assert_eq!(classify_pixel(&boxes, px), first);
        }
    }

    #[test]
    fn uniform_dark_brown_disk_is_one_region() {
        let mask = BinaryMask::from_fn(60, 60, |x, y| (x as f64 - 30.0).powi(2) + (y as f64 - 30.0).powi(2) <= 400.0);
        let img = RasterImage::filled_rgb(60, 60, [110, 70, 40]).unwrap();
        let regions = color_regions(&img, &mask, &default_color_boxes(), 0.02);
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].color, LesionColor::DarkBrown);
        assert_eq!(regions[0].area_px, mask.count());
        assert!((regions[0].centroid.0 - 30.0).abs() < 1e-9);
    }

    #[test]
    fn speckle_below_min_fraction_is_dropped() {
        let mask = BinaryMask::from_fn(20, 20, |_, _| true);
        let img = RasterImage::from_fn_rgb(20, 20, |x, y| if x == 0 && y == 0 { [30, 25, 25] } else { [200, 150, 100] }).unwrap();
        let regions = color_regions(&img, &mask, &default_color_boxes(), 0.02);
        assert_eq!(regions.iter().map(|r| r.color).collect::<Vec<_>>(), vec![LesionColor::LightBrown]);
    }
}
