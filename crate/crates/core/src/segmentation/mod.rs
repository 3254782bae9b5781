//! Lesion/background separation.
//!
//! The pipeline is: Y' luminance → Gaussian smoothing → fast Chan–Vese on a
//! working copy no larger than `max_working_side` → largest component with
//! holes filled → nearest-neighbor upscale back to the input size.

mod chan_vese;
mod morphology;

pub use chan_vese::{
    chan_vese_energy, chan_vese_from, chan_vese_segment, contour_length, shrink_initialize, CVParams, ChanVeseTrace,
    LevelSetState,
};
pub use morphology::{fill_holes, largest_component};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{self, fit_within, gaussian_filter, resample_mask, rgb_to_yuv, BinaryMask, FloatPlane, ImagingError, RasterImage};

pub const DEFAULT_KERNEL_SIZE: usize = 5;
pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_MAX_WORKING_SIDE: usize = 512;

#[derive(Debug, Error)]
pub enum SegmentationError {
    #[error("invalid segmentation parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    /// No usable two-phase split. The offending mask is kept for inspection.
    #[error("degenerate segmentation: {reason}")]
    Degenerate { reason: String, mask: BinaryMask },
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    pub mask: BinaryMask,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Smoothed luminance plus the filter settings that produced it.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub plane: FloatPlane,
    pub kernel_size: usize,
    pub sigma: f64,
}

pub fn preprocess(img: &RasterImage, kernel_size: usize, sigma: f64) -> Result<Preprocessed, SegmentationError> {
    let yuv = rgb_to_yuv(img)?;
    let plane = gaussian_filter(&yuv.y, kernel_size, sigma)?;
    Ok(Preprocessed { plane, kernel_size, sigma })
}

/// Intersection over union of two binary masks. Two empty masks agree perfectly (1.0).
pub fn jaccard(truth: &BinaryMask, pred: &BinaryMask) -> Result<f64, ImagingError> {
    if !pred.same_size(truth.width(), truth.height()) {
        return Err(ImagingError::InvalidInput(format!(
            "mask sizes differ: {}x{} vs {}x{}",
            truth.width(),
            truth.height(),
            pred.width(),
            pred.height()
        )));
    }
    let (mut tt, mut pp, mut tp) = (0u64, 0u64, 0u64);
    for (&t, &p) in truth.bits().iter().zip(pred.bits()) {
        let (t, p) = (u64::from(t), u64::from(p));
        tt += t * t;
        pp += p * p;
        tp += t * p;
    }
    let denom = tt + pp - tp;
    Ok(if denom == 0 { 1.0 } else { tp as f64 / denom as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    pub kernel_size: usize,
    pub sigma: f64,
    pub chan_vese: CVParams,
    pub max_working_side: usize,
    pub keep_largest_component: bool,
    pub fill_holes: bool,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            kernel_size: DEFAULT_KERNEL_SIZE,
            sigma: DEFAULT_SIGMA,
            chan_vese: CVParams::default(),
            max_working_side: DEFAULT_MAX_WORKING_SIDE,
            keep_largest_component: true,
            fill_holes: true,
        }
    }
}

/// Result of the full segmentation pipeline on one photograph.
#[derive(Debug, Clone)]
pub struct LesionSegmentation {
    /// Final mask at the input resolution.
    pub mask: BinaryMask,
    /// Raw Chan–Vese output at the working resolution.
    pub working: SegmentationResult,
    pub working_size: (usize, usize),
    pub kernel_size: usize,
    pub sigma: f64,
}

pub fn segment_lesion(img: &RasterImage, config: &SegmentationConfig) -> Result<LesionSegmentation, SegmentationError> {
    if config.max_working_side < 8 {
        return Err(SegmentationError::InvalidParameter("max_working_side must be at least 8".into()));
    }
    let pre = preprocess(img, config.kernel_size, config.sigma)?;
    let (w, h) = (img.width(), img.height());
    let (ww, wh) = fit_within(w, h, config.max_working_side);
    let plane = if (ww, wh) == (w, h) { pre.plane } else { pre.plane.downscale_area(ww, wh)? };
    let working = chan_vese_segment(&plane, &config.chan_vese)?;
    let mut mask = working.mask.clone();
    if config.keep_largest_component {
        mask = largest_component(&mask);
    }
    if config.fill_holes {
        mask = fill_holes(&mask);
    }
    if mask.is_full() {
        return Err(SegmentationError::Degenerate { reason: "segmentation covers the whole frame".into(), mask });
    }
    let mask = resample_mask(&mask, w, h).map_err(imaging::ImagingError::from)?;
    Ok(LesionSegmentation { mask, working, working_size: (ww, wh), kernel_size: pre.kernel_size, sigma: pre.sigma })
}
