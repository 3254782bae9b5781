//! Band-pass texture masks standing in for learned dermoscopic-structure
//! detectors. Output is a placeholder and is labelled as such by callers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Capabilities, FeatureClass, FeatureMaskProvider, ProviderDescriptor, ProviderError, ProviderKind};
use crate::imaging::{gaussian_filter, rgb_to_yuv, BinaryMask, FloatPlane, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Structures darker than their surroundings.
    Dark,
    Bright,
}

/// Difference-of-Gaussians pass band and threshold for one structure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureBand {
    pub sigma_fine: f64,
    pub sigma_coarse: f64,
    pub polarity: Polarity,
    /// Response must exceed `k_std` standard deviations of the in-lesion response…
    pub k_std: f64,
    /// …and this absolute luminance contrast.
    pub min_contrast: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicMaskConfig {
    pub bands: BTreeMap<FeatureClass, FeatureBand>,
}

impl Default for HeuristicMaskConfig {
    fn default() -> Self {
        let band = |sigma_fine, sigma_coarse, polarity| FeatureBand { sigma_fine, sigma_coarse, polarity, k_std: 0.75, min_contrast: 0.03 };
        Self {
            bands: BTreeMap::from([
                (FeatureClass::Globules, band(1.0, 4.0, Polarity::Dark)),
                (FeatureClass::Streaks, band(1.0, 6.0, Polarity::Dark)),
                (FeatureClass::PigmentNetwork, band(0.7, 2.0, Polarity::Dark)),
                (FeatureClass::MiliaLikeCyst, band(1.0, 4.0, Polarity::Bright)),
                (FeatureClass::NegativeNetwork, band(0.7, 2.0, Polarity::Bright)),
            ]),
        }
    }
}

fn kernel_for(sigma: f64) -> usize {
    2 * (3.0 * sigma).ceil() as usize + 1
}

pub fn heuristic_feature_mask(
    img: &RasterImage,
    lesion: &BinaryMask,
    class: FeatureClass,
    config: &HeuristicMaskConfig,
) -> Result<BinaryMask, ProviderError> {
    let band = config
        .bands
        .get(&class)
        .ok_or_else(|| ProviderError::UnknownFeatureClass(class.name().to_string()))?;
    if !img.same_size(lesion.width(), lesion.height()) {
        return Err(ProviderError::Analysis("image and lesion mask sizes differ".into()));
    }
    let (w, h) = (img.width(), img.height());
    if lesion.is_empty() {
        return Ok(BinaryMask::new(w, h));
    }
    let luma = rgb_to_yuv(&img.to_rgb()).map_err(|e| ProviderError::Analysis(e.to_string()))?.y;
    let inside: Vec<f64> = luma.values().iter().zip(lesion.bits()).filter(|(_, &b)| b).map(|(&v, _)| v).collect();
    let mean = inside.iter().sum::<f64>() / inside.len() as f64;
    // skin is replaced by the lesion mean so the border itself gives no response
    let filled = FloatPlane::from_fn(w, h, |x, y| if lesion.get(x, y) { luma.get(x, y) } else { mean })
        .map_err(|e| ProviderError::Analysis(e.to_string()))?;
    let blur = |s: f64| gaussian_filter(&filled, kernel_for(s), s).map_err(|e| ProviderError::Analysis(e.to_string()));
    let (fine, coarse) = (blur(band.sigma_fine)?, blur(band.sigma_coarse)?);
    let response: Vec<f64> = fine
        .values()
        .iter()
        .zip(coarse.values())
        .map(|(f, c)| match band.polarity {
            Polarity::Dark => c - f,
            Polarity::Bright => f - c,
        })
        .collect();
    let in_resp: Vec<f64> = response.iter().zip(lesion.bits()).filter(|(_, &b)| b).map(|(&r, _)| r).collect();
    let m = in_resp.iter().sum::<f64>() / in_resp.len() as f64;
    let std = (in_resp.iter().map(|r| (r - m).powi(2)).sum::<f64>() / in_resp.len() as f64).sqrt();
    let threshold = (band.k_std * std).max(band.min_contrast);
    let bits = response.iter().zip(lesion.bits()).map(|(&r, &b)| b && r > threshold).collect();
    BinaryMask::from_bits(w, h, bits).map_err(|e| ProviderError::Analysis(e.to_string()))
}

pub struct HeuristicFeatureMasks {
    descriptor: ProviderDescriptor,
    config: HeuristicMaskConfig,
}

impl HeuristicFeatureMasks {
    pub fn new(id: impl Into<String>, config: HeuristicMaskConfig) -> Self {
        Self {
            descriptor: ProviderDescriptor {
                kind: ProviderKind::FeatureMask,
                id: id.into(),
                taxonomy: None,
                capabilities: Capabilities { white_box_explainable: false, batch: false },
            },
            config,
        }
    }
}

impl FeatureMaskProvider for HeuristicFeatureMasks {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn is_heuristic(&self) -> bool {
        true
    }

    fn feature_mask(&self, img: &RasterImage, lesion: &BinaryMask, class: FeatureClass) -> Result<BinaryMask, ProviderError> {
        heuristic_feature_mask(img, lesion, class, &self.config)
    }
}
