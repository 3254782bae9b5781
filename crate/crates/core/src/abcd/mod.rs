//! ABCD-rule descriptors: asymmetry, border irregularity, color variegation
//! and diameter, plus their projection onto 0–10 display bars.

mod border;
mod color;
mod geometry;

pub use border::{border_irregularity, chain_length, contour_perimeter, trace_outer_contour};
pub use color::{classify_pixel, color_regions, default_color_boxes, label_lesion_pixels, ColorBox, ColorRegion, LesionColor};
pub use geometry::{boundary_corners, convex_hull, mask_min_area_rect, min_area_rect, OrientedRect, Point};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{blend_overlay, BinaryMask, ImagingError, RasterImage};

/// Typical dermatoscope scale used when the caller does not supply one.
pub const DEFAULT_MM_PER_PIXEL: f64 = 0.033;

#[derive(Debug, Error)]
pub enum AbcdError {
    #[error("no lesion: the mask is empty")]
    NoLesion,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Lesion rotated so that its minimum-area rectangle is axis-aligned.
#[derive(Debug, Clone)]
pub struct AlignedLesion {
    pub mask: BinaryMask,
    pub image: RasterImage,
    /// Rectangle orientation in the source image, degrees in (−45, 45].
    pub tilt_angle: f64,
    pub rect_major: f64,
    pub rect_minor: f64,
    pub rect: OrientedRect,
    /// Lesion centroid in source-image pixel-center coordinates.
    pub centroid: (f64, f64),
}

const ALIGN_PADDING: usize = 2;

/// Rotate image and mask by −tilt about the rectangle center, onto a canvas
/// just large enough for the rectangle. Mask: nearest neighbor; image: bilinear.
///
/// Geometry is computed relative to the lesion bounding box so an integer
/// shift of the lesion gives bit-identical output.
pub fn align(img: &RasterImage, mask: &BinaryMask) -> Result<AlignedLesion, AbcdError> {
    if !img.same_size(mask.width(), mask.height()) {
        return Err(ImagingError::InvalidInput("image and mask sizes differ".into()).into());
    }
    let centroid = mask.centroid().ok_or(AbcdError::NoLesion)?;
    let (bx0, by0, bx1, by1) = mask.bounding_box().ok_or(AbcdError::NoLesion)?;
    let local = mask.crop(bx0, by0, bx1 - bx0 + 1, by1 - by0 + 1);
    let rect = mask_min_area_rect(&local).ok_or(AbcdError::NoLesion)?;
    let t = rect.angle_deg.to_radians();
    let (u, v) = ((t.cos(), t.sin()), (-t.sin(), t.cos()));
    let out_w = rect.length.ceil() as usize + 2 * ALIGN_PADDING;
    let out_h = rect.breadth.ceil() as usize + 2 * ALIGN_PADDING;
    let img = img.to_rgb();

    // output pixel center → continuous source coordinate (pixel corners at integers)
    let to_src = |x: usize, y: usize| {
        let (a, b) = (x as f64 + 0.5 - out_w as f64 / 2.0, y as f64 + 0.5 - out_h as f64 / 2.0);
        (rect.center.x + a * u.0 + b * v.0, rect.center.y + a * u.1 + b * v.1)
    };
    let aligned_mask = BinaryMask::from_fn(out_w, out_h, |x, y| {
        let (sx, sy) = to_src(x, y);
        local.get_signed(sx.floor() as i64, sy.floor() as i64)
    });
    let (sw, sh) = (img.width() as f64, img.height() as f64);
    let aligned_image = RasterImage::from_fn_rgb(out_w, out_h, |x, y| {
        let (sx, sy) = to_src(x, y);
        let (fx, fy) = ((sx - 0.5 + bx0 as f64).clamp(0.0, sw - 1.0), (sy - 0.5 + by0 as f64).clamp(0.0, sh - 1.0));
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
        let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
        let (p00, p10, p01, p11) = (img.rgb(x0, y0), img.rgb(x1, y0), img.rgb(x0, y1), img.rgb(x1, y1));
        std::array::from_fn(|c| {
            let top = f64::from(p00[c]) * (1.0 - tx) + f64::from(p10[c]) * tx;
            let bottom = f64::from(p01[c]) * (1.0 - tx) + f64::from(p11[c]) * tx;
            (top * (1.0 - ty) + bottom * ty).round() as u8
        })
    })?;
    Ok(AlignedLesion {
        mask: aligned_mask,
        image: aligned_image,
        tilt_angle: rect.angle_deg,
        rect_major: rect.major(),
        rect_minor: rect.minor(),
        rect: OrientedRect { center: Point { x: rect.center.x + bx0 as f64, y: rect.center.y + by0 as f64 }, ..rect },
        centroid,
    })
}

/// Percentage of lesion pixels with no counterpart in the lesion's mirror image.
fn mirror_mismatch_pct(mask: &BinaryMask, mirror: impl Fn(usize, usize) -> (i64, i64)) -> f64 {
    let area = mask.count();
    if area == 0 {
        return 0.0;
    }
    let mut unmatched = 0usize;
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                let (mx, my) = mirror(x, y);
                if !mask.get_signed(mx, my) {
                    unmatched += 1;
                }
            }
        }
    }
    100.0 * unmatched as f64 / area as f64
}

/// Shape and structure asymmetry: the two mirror-overlap percentages and the six
/// color-centroid distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Asymmetry {
    /// Mirror about the horizontal centroid axis (top/bottom flip).
    pub vertical_pct: f64,
    /// Mirror about the vertical centroid axis (left/right flip).
    pub horizontal_pct: f64,
    /// Lesion centroid to V-weighted color centroid, pixels, in [`LesionColor::ALL`] order.
    pub centroid_distances: [f64; 6],
}

pub fn asymmetry(lesion: &AlignedLesion, regions: &[ColorRegion]) -> Asymmetry {
    let m = &lesion.mask;
    let (cx, cy) = m.centroid().unwrap_or((0.0, 0.0));
    let vertical_pct = mirror_mismatch_pct(m, |x, y| (x as i64, (2.0 * cy - y as f64).round() as i64));
    let horizontal_pct = mirror_mismatch_pct(m, |x, y| ((2.0 * cx - x as f64).round() as i64, y as i64));
    let mut centroid_distances = [0.0; 6];
    for r in regions {
        let (dx, dy) = (r.centroid.0 - lesion.centroid.0, r.centroid.1 - lesion.centroid.1);
        centroid_distances[r.color.index()] = (dx * dx + dy * dy).sqrt();
    }
    Asymmetry { vertical_pct, horizontal_pct, centroid_distances }
}

/// (horizontal, vertical) diameters in mm from the rectangle's major and minor sides.
pub fn diameters(lesion: &AlignedLesion, mm_per_pixel: f64) -> Result<(f64, f64), AbcdError> {
    if !(mm_per_pixel > 0.0 && mm_per_pixel.is_finite()) {
        return Err(AbcdError::InvalidParameter(format!("mm_per_pixel must be positive, got {mm_per_pixel}")));
    }
    Ok((lesion.rect_major * mm_per_pixel, lesion.rect_minor * mm_per_pixel))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcdFeatures {
    pub asym_vertical_pct: f64,
    pub asym_horizontal_pct: f64,
    pub centroid_distances: [f64; 6],
    pub irregularity_index: f64,
    pub diameter_h_mm: f64,
    pub diameter_v_mm: f64,
    pub colors_present: Vec<LesionColor>,
    pub color_regions: Vec<ColorRegion>,
    pub rect_major_px: f64,
    pub rect_minor_px: f64,
    pub tilt_deg: f64,
    pub lesion_area_px: usize,
    pub mm_per_pixel: f64,
}

impl AbcdFeatures {
    /// The eight asymmetry parameters: two overlap percentages then six distances.
    pub fn asymmetry_parameters(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        out[0] = self.asym_vertical_pct;
        out[1] = self.asym_horizontal_pct;
        out[2..].copy_from_slice(&self.centroid_distances);
        out
    }
}

/// Display-bar mapping constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProjectionConstants {
    /// A = AS / asym_divisor.
    pub asym_divisor: f64,
    /// B = (I − 1) · border_gain.
    pub border_gain: f64,
    /// D = d_mm · 10 / diameter_full_scale_mm; 12 mm puts the 6 mm threshold at 5.
    pub diameter_full_scale_mm: f64,
}

impl Default for ProjectionConstants {
    fn default() -> Self {
        Self { asym_divisor: 10.0, border_gain: 5.0, diameter_full_scale_mm: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisplayScores {
    #[serde(rename = "A1")]
    pub a1: f64,
    #[serde(rename = "A2")]
    pub a2: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
}

/// A1 is the left/right (horizontal) asymmetry, A2 the top/bottom one.
pub fn project_scores(f: &AbcdFeatures, k: &ProjectionConstants) -> DisplayScores {
    let clamp = |v: f64| v.clamp(0.0, 10.0);
    DisplayScores {
        a1: clamp(f.asym_horizontal_pct / k.asym_divisor),
        a2: clamp(f.asym_vertical_pct / k.asym_divisor),
        b: clamp((f.irregularity_index - 1.0) * k.border_gain),
        d1: clamp(f.diameter_h_mm * 10.0 / k.diameter_full_scale_mm),
        d2: clamp(f.diameter_v_mm * 10.0 / k.diameter_full_scale_mm),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbcdConfig {
    pub color_boxes: Vec<ColorBox>,
    pub min_area_fraction: f64,
    pub projection: ProjectionConstants,
}

impl Default for AbcdConfig {
    fn default() -> Self {
        Self { color_boxes: default_color_boxes(), min_area_fraction: 0.02, projection: ProjectionConstants::default() }
    }
}

/// Everything computed for one lesion, kept together for rendering.
#[derive(Debug, Clone)]
pub struct AbcdAnalysis {
    pub features: AbcdFeatures,
    pub scores: DisplayScores,
    pub aligned: AlignedLesion,
}

pub fn analyze(img: &RasterImage, mask: &BinaryMask, mm_per_pixel: f64, config: &AbcdConfig) -> Result<AbcdAnalysis, AbcdError> {
    if mask.is_empty() {
        return Err(AbcdError::NoLesion);
    }
    let aligned = align(img, mask)?;
    let regions = color_regions(img, mask, &config.color_boxes, config.min_area_fraction);
    let asym = asymmetry(&aligned, &regions);
    let (diameter_h_mm, diameter_v_mm) = diameters(&aligned, mm_per_pixel)?;
    let features = AbcdFeatures {
        asym_vertical_pct: asym.vertical_pct,
        asym_horizontal_pct: asym.horizontal_pct,
        centroid_distances: asym.centroid_distances,
        irregularity_index: border_irregularity(mask)?,
        diameter_h_mm,
        diameter_v_mm,
        colors_present: regions.iter().map(|r| r.color).collect(),
        color_regions: regions,
        rect_major_px: aligned.rect_major,
        rect_minor_px: aligned.rect_minor,
        tilt_deg: aligned.tilt_angle,
        lesion_area_px: mask.count(),
        mm_per_pixel,
    };
    let scores = project_scores(&features, &config.projection);
    Ok(AbcdAnalysis { features, scores, aligned })
}

/// Lesion pixels painted with their color's marker, blended over the image.
pub fn render_color_regions(img: &RasterImage, mask: &BinaryMask, config: &AbcdConfig, opacity: f64) -> Result<RasterImage, AbcdError> {
    let labels = label_lesion_pixels(img, mask, &config.color_boxes);
    let kept: Vec<LesionColor> = color_regions(img, mask, &config.color_boxes, config.min_area_fraction)
        .into_iter()
        .map(|r| r.color)
        .collect();
    let base = img.to_rgb();
    let mut overlay = base.clone();
    for (i, label) in labels.iter().enumerate() {
        if let Some(c) = label.filter(|c| kept.contains(c)) {
            overlay.set_rgb(i % mask.width(), i / mask.width(), c.marker_rgb());
        }
    }
    Ok(blend_overlay(&base, &overlay, opacity)?)
}

/// Aligned lesion with its centroid axes drawn in white and the pixels that
/// do not match their top/bottom or left/right mirror tinted magenta.
pub fn render_asymmetry(lesion: &AlignedLesion) -> Result<RasterImage, AbcdError> {
    let m = &lesion.mask;
    let (cx, cy) = m.centroid().ok_or(AbcdError::NoLesion)?;
    let mut out = lesion.image.clone();
    for y in 0..m.height() {
        for x in 0..m.width() {
            if !m.get(x, y) {
                continue;
            }
            let my = (2.0 * cy - y as f64).round() as i64;
            let mx = (2.0 * cx - x as f64).round() as i64;
            if !m.get_signed(x as i64, my) || !m.get_signed(mx, y as i64) {
                let p = out.rgb(x, y);
                out.set_rgb(x, y, [((u16::from(p[0]) + 255) / 2) as u8, p[1] / 2, ((u16::from(p[2]) + 255) / 2) as u8]);
            }
        }
    }
    let (ax, ay) = (cx.round() as usize, cy.round() as usize);
    for y in 0..m.height() {
        out.set_rgb(ax.min(m.width() - 1), y, [255, 255, 255]);
    }
    for x in 0..m.width() {
        out.set_rgb(x, ay.min(m.height() - 1), [255, 255, 255]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_mask(n: usize, cx: f64, cy: f64, r: f64) -> BinaryMask {
        BinaryMask::from_fn(n, n, |x, y| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
    }

    #[test]
    fn aligned_axis_rectangle_is_unchanged() {
        let m = BinaryMask::from_fn(200, 160, |x, y| (40..160).contains(&x) && (40..120).contains(&y));
        let img = RasterImage::filled_rgb(200, 160, [120, 80, 50]).unwrap();
        let a = align(&img, &m).unwrap();
        assert!(a.tilt_angle.abs() < 1e-9);
        assert_eq!((a.rect_major, a.rect_minor), (120.0, 80.0));
        assert_eq!(a.mask.count(), m.count());
        let expected = BinaryMask::from_fn(124, 84, |x, y| (2..122).contains(&x) && (2..82).contains(&y));
        assert_eq!(a.mask, expected);
    }

    #[test]
    fn rotated_rectangle_is_realigned() {
        let t = 30f64.to_radians();
        let m = BinaryMask::from_fn(300, 300, |x, y| {
            let (dx, dy) = (x as f64 + 0.5 - 150.0, y as f64 + 0.5 - 150.0);
            (dx * t.cos() + dy * t.sin()).abs() <= 60.0 && (-dx * t.sin() + dy * t.cos()).abs() <= 40.0
        });
        let img = RasterImage::filled_rgb(300, 300, [120, 80, 50]).unwrap();
        let a = align(&img, &m).unwrap();
        assert!((a.tilt_angle - 30.0).abs() <= 0.5, "{}", a.tilt_angle);
        let again = mask_min_area_rect(&a.mask).unwrap();
        assert!(again.angle_deg.abs() <= 0.5, "{again:?}");
        assert!((a.rect_major - 120.0).abs() <= 1.5 && (a.rect_minor - 80.0).abs() <= 1.5);
    }

    #[test]
    fn disk_rectangle_matches_diameter() {
        let m = disk_mask(140, 69.5, 69.5, 50.0);
        let img = RasterImage::filled_rgb(140, 140, [120, 80, 50]).unwrap();
        let a = align(&img, &m).unwrap();
        assert!((a.rect_major - 100.0).abs() <= 1.0 && (a.rect_minor - 100.0).abs() <= 1.0, "{a:?}");
    }

    #[test]
    fn disk_is_symmetric() {
        let m = disk_mask(120, 60.0, 60.0, 40.0);
        let img = RasterImage::filled_rgb(120, 120, [110, 70, 40]).unwrap();
        let an = analyze(&img, &m, DEFAULT_MM_PER_PIXEL, &AbcdConfig::default()).unwrap();
        assert!(an.features.asym_vertical_pct <= 1.0 && an.features.asym_horizontal_pct <= 1.0);
        assert!(an.features.centroid_distances.iter().all(|&d| d < 0.5));
        assert_eq!(an.features.asymmetry_parameters().len(), 8);
    }

    #[test]
    fn half_disk_is_vertically_asymmetric_only() {
        // flat side up
        let m = BinaryMask::from_fn(120, 120, |x, y| {
            let (dx, dy) = (x as f64 - 60.0, y as f64 - 40.0);
            dy >= 0.0 && dx * dx + dy * dy <= 40.0 * 40.0
        });
        let img = RasterImage::filled_rgb(120, 120, [110, 70, 40]).unwrap();
        let an = analyze(&img, &m, DEFAULT_MM_PER_PIXEL, &AbcdConfig::default()).unwrap();
        assert!(an.features.asym_vertical_pct > 10.0, "{:?}", an.features);
        assert!(an.features.asym_horizontal_pct <= 1.5, "{:?}", an.features);
    }

    #[test]
    fn dark_blob_distance() {
        let m = disk_mask(140, 70.0, 70.0, 50.0);
        let img = RasterImage::from_fn_rgb(140, 140, |x, y| {
            if (x as f64 - 85.0).powi(2) + (y as f64 - 70.0).powi(2) <= 64.0 {
                [110, 70, 40]
            } else {
                [200, 150, 100]
            }
        })
        .unwrap();
        let an = analyze(&img, &m, DEFAULT_MM_PER_PIXEL, &AbcdConfig::default()).unwrap();
        let d = an.features.centroid_distances[LesionColor::DarkBrown.index()];
        assert!((d - 15.0).abs() <= 1.0, "{d}");
        assert_eq!(an.features.centroid_distances[LesionColor::Black.index()], 0.0);
        assert_eq!(an.features.colors_present, vec![LesionColor::LightBrown, LesionColor::DarkBrown]);
    }

    #[test]
    fn diameters_scale_linearly() {
        let m = BinaryMask::from_fn(200, 160, |x, y| (40..160).contains(&x) && (40..120).contains(&y));
        let img = RasterImage::filled_rgb(200, 160, [120, 80, 50]).unwrap();
        let a = align(&img, &m).unwrap();
        let (h, v) = diameters(&a, 0.05).unwrap();
        assert!((h - 6.0).abs() < 1e-12 && (v - 4.0).abs() < 1e-12);
        assert!(diameters(&a, 0.0).is_err());
        assert!(diameters(&a, -0.1).is_err());
    }

    #[test]
    fn projection_examples() {
        let zero = AbcdFeatures {
            asym_vertical_pct: 0.0,
            asym_horizontal_pct: 0.0,
            centroid_distances: [0.0; 6],
            irregularity_index: 1.0,
            diameter_h_mm: 0.0,
            diameter_v_mm: 0.0,
            colors_present: vec![],
            color_regions: vec![],
            rect_major_px: 0.0,
            rect_minor_px: 0.0,
            tilt_deg: 0.0,
            lesion_area_px: 0,
            mm_per_pixel: DEFAULT_MM_PER_PIXEL,
        };
        let k = ProjectionConstants::default();
        let s = project_scores(&zero, &k);
        assert_eq!((s.a1, s.a2, s.b, s.d1, s.d2), (0.0, 0.0, 0.0, 0.0, 0.0));
        let six = AbcdFeatures { diameter_h_mm: 6.0, asym_horizontal_pct: 100.0, irregularity_index: 4.0, ..zero.clone() };
        let s = project_scores(&six, &k);
        assert!((s.d1 - 5.0).abs() < 1e-12);
        assert_eq!(s.a1, 10.0);
        assert_eq!(s.b, 10.0);
    }

    #[test]
    fn empty_mask_is_no_lesion() {
        let img = RasterImage::filled_rgb(10, 10, [0, 0, 0]).unwrap();
        assert!(matches!(align(&img, &BinaryMask::new(10, 10)), Err(AbcdError::NoLesion)));
        assert!(matches!(analyze(&img, &BinaryMask::new(10, 10), 0.03, &AbcdConfig::default()), Err(AbcdError::NoLesion)));
    }

    #[test]
    fn renderers_keep_sizes() {
        let m = disk_mask(60, 30.0, 30.0, 20.0);
        let img = RasterImage::filled_rgb(60, 60, [110, 70, 40]).unwrap();
        let colors = render_color_regions(&img, &m, &AbcdConfig::default(), 0.7).unwrap();
        assert!(colors.same_size(60, 60));
        // dark-brown marker is red
        assert_eq!(colors.rgb(30, 30), [212, 21, 12]);
        assert_eq!(colors.rgb(0, 0), [110, 70, 40]);
        let a = align(&img, &m).unwrap();
        let asym = render_asymmetry(&a).unwrap();
        assert!(asym.same_size(a.mask.width(), a.mask.height()));
    }
}
