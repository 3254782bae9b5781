//! Black-box saliency by randomized occlusion (RISE).
//!
//! The image is classified many times under random smooth occlusion masks and
//! each pixel accumulates the target-class probability weighted by how
//! visible it was.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Prediction;
use crate::imaging::{blend_overlay, colorize, encode_plane_png16, FloatPlane, ImagingError, RasterImage};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("explanation aborted at mask {mask_index}: {cause}")]
    Aborted { mask_index: usize, cause: String },
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiseParams {
    pub n_masks: usize,
    /// Cells per side of the occlusion grid.
    pub grid_cells: usize,
    /// Probability that a grid cell is kept visible.
    pub p_on: f64,
    pub target_class: usize,
    pub seed: u64,
}

impl Default for RiseParams {
    fn default() -> Self {
        Self { n_masks: 1000, grid_cells: 7, p_on: 0.5, target_class: 1, seed: 42 }
    }
}

impl RiseParams {
    pub fn validate(&self) -> Result<(), ExplainError> {
        if self.n_masks == 0 {
            return Err(ExplainError::InvalidParameter("n_masks must be at least 1".into()));
        }
        if self.grid_cells < 2 {
            return Err(ExplainError::InvalidParameter(format!("grid_cells must be at least 2, got {}", self.grid_cells)));
        }
        if !(self.p_on > 0.0 && self.p_on < 1.0) {
            return Err(ExplainError::InvalidParameter(format!("p_on must lie in (0, 1), got {}", self.p_on)));
        }
        Ok(())
    }
}

/// One occlusion mask: an s×s on/off grid plus the crop offset into its
/// upsampled version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSpec {
    grid: usize,
    cells: Vec<bool>,
    dx: usize,
    dy: usize,
    cell_w: usize,
    cell_h: usize,
}

impl MaskSpec {
    /// Mask `index` of the sequence defined by `params.seed`. Each index has its
    /// own random stream, so masks can be produced in any order.
    pub fn generate(params: &RiseParams, index: usize, width: usize, height: usize) -> Self {
        let s = params.grid_cells;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(index as u64);
        let cells = (0..s * s).map(|_| rng.gen::<f64>() < params.p_on).collect();
        let cell_w = width.div_ceil(s).max(1);
        let cell_h = height.div_ceil(s).max(1);
        let dx = rng.gen_range(0..cell_w);
        let dy = rng.gen_range(0..cell_h);
        Self { grid: s, cells, dx, dy, cell_w, cell_h }
    }

    /// Source-grid sample positions and weights along one axis.
    fn taps(&self, pos: usize, cell: usize) -> (usize, usize, f64) {
        let s = self.grid;
        let up = ((s + 1) * cell) as f64;
        let g = ((pos as f64 + 0.5) * s as f64 / up - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = g.floor() as usize;
        let i1 = (i0 + 1).min(s - 1);
        (i0, i1, g - i0 as f64)
    }

    fn row_taps(&self, y: usize) -> (usize, usize, f64) {
        self.taps(y + self.dy, self.cell_h)
    }

    fn col_taps(&self, x: usize) -> (usize, usize, f64) {
        self.taps(x + self.dx, self.cell_w)
    }

    fn cell(&self, gx: usize, gy: usize) -> f64 {
        if self.cells[gy * self.grid + gx] {
            1.0
        } else {
            0.0
        }
    }

    fn value_with(&self, (y0, y1, fy): (usize, usize, f64), (x0, x1, fx): (usize, usize, f64)) -> f64 {
        let top = self.cell(x0, y0) * (1.0 - fx) + self.cell(x1, y0) * fx;
        let bottom = self.cell(x0, y1) * (1.0 - fx) + self.cell(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.value_with(self.row_taps(y), self.col_taps(x))
    }

    pub fn render(&self, width: usize, height: usize) -> FloatPlane {
        FloatPlane::from_fn(width, height, |x, y| self.value(x, y)).expect("mask values are finite")
    }
}

/// The mask sequence for an image of the given size, produced lazily.
pub fn generate_masks(
    params: &RiseParams,
    width: usize,
    height: usize,
) -> Result<impl Iterator<Item = FloatPlane> + '_, ExplainError> {
    params.validate()?;
    Ok((0..params.n_masks).map(move |i| MaskSpec::generate(params, i, width, height).render(width, height)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    /// Normalized to [0, 1].
    pub values: FloatPlane,
    /// Visibility-weighted mean target probability per pixel.
    pub raw_accumulator: FloatPlane,
    pub params_used: RiseParams,
}

/// Min–max normalization; a (numerically) constant plane maps to all zeros.
pub fn normalize_saliency(raw: &FloatPlane) -> FloatPlane {
    let (lo, hi) = raw.range();
    if hi - lo <= 1e-9 * hi.abs().max(lo.abs()).max(1.0) {
        return FloatPlane::filled(raw.width(), raw.height(), 0.0).expect("finite");
    }
    raw.map(|v| ((v - lo) / (hi - lo)).clamp(0.0, 1.0)).expect("finite")
}

/// Run RISE with `classifier` on `img`.
///
/// Each pixel's raw value is Σ f_i·M_i(λ) / Σ M_i(λ), the target probability
/// averaged over masks weighted by that pixel's visibility. Pixels never
/// visible get the mean score. Scores are computed in parallel; accumulation
/// runs in mask order so results do not depend on the thread count.
pub fn rise<F, E>(img: &RasterImage, classifier: F, params: &RiseParams) -> Result<SaliencyMap, ExplainError>
where
    F: Fn(&RasterImage) -> Result<Prediction, E> + Sync,
    E: std::fmt::Display,
{
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Err(ExplainError::InvalidParameter("image is empty".into()));
    }
    let specs: Vec<MaskSpec> = (0..params.n_masks).map(|i| MaskSpec::generate(params, i, w, h)).collect();

    let scores: Vec<Result<f64, ExplainError>> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let masked = img.modulate(&spec.render(w, h))?;
            let pred = classifier(&masked).map_err(|e| ExplainError::Aborted { mask_index: i, cause: e.to_string() })?;
            pred.probs.get(params.target_class).copied().ok_or_else(|| {
                ExplainError::InvalidParameter(format!(
                    "target_class {} outside a {}-class taxonomy",
                    params.target_class,
                    pred.probs.len()
                ))
            })
        })
        .collect();
    let scores: Vec<f64> = scores.into_iter().collect::<Result<_, _>>()?;
    let mean_score = scores.iter().sum::<f64>() / scores.len() as f64;

    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut weighted = vec![0.0f64; w];
            let mut coverage = vec![0.0f64; w];
            for (spec, &f) in specs.iter().zip(&scores) {
                let ry = spec.row_taps(y);
                for x in 0..w {
                    let m = spec.value_with(ry, spec.col_taps(x));
                    weighted[x] += f * m;
                    coverage[x] += m;
                }
            }
            weighted.iter().zip(&coverage).map(|(&a, &c)| if c > 0.0 { a / c } else { mean_score }).collect()
        })
        .collect();
    let raw = FloatPlane::new(w, h, rows.concat())?;
    Ok(SaliencyMap { values: normalize_saliency(&raw), raw_accumulator: raw, params_used: params.clone() })
}

pub fn render_explanation(img: &RasterImage, map: &SaliencyMap, opacity: f64) -> Result<RasterImage, ExplainError> {
    Ok(blend_overlay(img, &colorize(&map.values)?, opacity)?)
}

/// 16-bit grayscale PNG of the normalized map.
pub fn saliency_png16(map: &SaliencyMap) -> Result<Vec<u8>, ExplainError> {
    Ok(encode_plane_png16(&map.values)?)
}

pub fn params_sidecar(map: &SaliencyMap) -> serde_json::Value {
    serde_json::json!({
        "params": map.params_used,
        "width": map.values.width(),
        "height": map.values.height(),
    })
}
