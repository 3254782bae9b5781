//! Whole-image analysis and the report shapes shared by the service and CLI.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abcd::{analyze, AbcdAnalysis, AbcdConfig, AbcdFeatures, DisplayScores, LesionColor, DEFAULT_MM_PER_PIXEL};
use crate::classify::{
    confidence, malignancy_color, raw_feature_vector, ClassTaxonomy, ClassifyError, ConfidenceEntry, Dataset, ManifestEntry,
    Prediction, TaxonomyKind, N_FEATURES,
};
use crate::imaging::{decode_image, BinaryMask, RasterImage};
use crate::providers::{ProviderError, Segmenter};
use crate::segmentation::{segment_lesion, SegmentationConfig};

/// Segmentation plus ABCD analysis of one image.
#[derive(Debug, Clone)]
pub struct LesionAnalysis {
    pub mask: BinaryMask,
    pub abcd: AbcdAnalysis,
}

pub fn analyze_with_mask(
    img: &RasterImage,
    mask: BinaryMask,
    mm_per_pixel: f64,
    config: &AbcdConfig,
) -> Result<LesionAnalysis, ProviderError> {
    let abcd = analyze(img, &mask, mm_per_pixel, config).map_err(|e| ProviderError::Analysis(e.to_string()))?;
    Ok(LesionAnalysis { mask, abcd })
}

pub fn analyze_lesion(
    img: &RasterImage,
    segmenter: &dyn Segmenter,
    mm_per_pixel: f64,
    config: &AbcdConfig,
) -> Result<LesionAnalysis, ProviderError> {
    let mask = segmenter.segment(img)?;
    analyze_with_mask(img, mask, mm_per_pixel, config)
}

/// Response body of the ABCD feature endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbcdReport {
    pub mm_per_pixel: f64,
    pub features: AbcdFeatures,
    pub scores: DisplayScores,
    pub asymmetry_parameters: [f64; 8],
    pub colors: Vec<LesionColor>,
    /// Rendered overlays, by name: URLs from the service, file paths from the CLI.
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
}

impl AbcdReport {
    pub fn new(analysis: &AbcdAnalysis) -> Self {
        Self {
            mm_per_pixel: analysis.features.mm_per_pixel,
            features: analysis.features.clone(),
            scores: analysis.scores,
            asymmetry_parameters: analysis.features.asymmetry_parameters(),
            colors: analysis.features.colors_present.clone(),
            artifacts: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorCode {
    pub rgb: [u8; 3],
    pub hex: String,
}

/// Response body of the confidence endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub model_id: String,
    pub taxonomy: TaxonomyKind,
    pub labels: Vec<String>,
    pub prediction: Vec<f64>,
    pub confidence: Vec<ConfidenceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub malignancy_color: Option<ColorCode>,
}

impl ClassificationReport {
    pub fn new(model_id: &str, pred: &Prediction) -> Self {
        let malignancy_color = malignancy_color(pred).ok().map(|c| ColorCode { rgb: c.rgb, hex: c.hex() });
        Self {
            model_id: model_id.to_string(),
            taxonomy: pred.taxonomy.kind,
            labels: pred.taxonomy.labels.clone(),
            prediction: pred.probs.clone(),
            confidence: confidence(pred).entries,
            malignancy_color,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageInfo {
    pub width: usize,
    pub height: usize,
}

/// Per-image bundle written by the CLI: the ABCD and confidence responses side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub image: ImageInfo,
    pub abcd: AbcdReport,
    pub classification: ClassificationReport,
    #[serde(default)]
    pub artifacts: BTreeMap<String, String>,
    #[serde(default)]
    pub timings_ms: BTreeMap<String, f64>,
}

/// Settings that turn an image into a feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureExtraction {
    pub segmentation: SegmentationConfig,
    pub abcd: AbcdConfig,
    pub mm_per_pixel: f64,
}

impl Default for FeatureExtraction {
    fn default() -> Self {
        Self { segmentation: SegmentationConfig::default(), abcd: AbcdConfig::default(), mm_per_pixel: DEFAULT_MM_PER_PIXEL }
    }
}

pub fn load_image(path: &Path) -> Result<RasterImage, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    decode_image(&bytes).map(|(img, _)| img).map_err(|e| format!("{}: {e}", path.display()))
}

/// Unstandardized ABCD feature vector of an image.
pub fn image_features(img: &RasterImage, fx: &FeatureExtraction) -> Result<[f64; N_FEATURES], ProviderError> {
    let seg = segment_lesion(img, &fx.segmentation).map_err(|e| ProviderError::Analysis(e.to_string()))?;
    let analysis = analyze_with_mask(img, seg.mask, fx.mm_per_pixel, &fx.abcd)?;
    Ok(raw_feature_vector(&analysis.abcd.features))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub path: PathBuf,
    pub error: String,
}

/// Featurize every manifest entry in parallel. Entries that fail to load or
/// analyze are skipped and reported; unknown labels are an error.
pub fn dataset_from_manifest(
    entries: &[ManifestEntry],
    taxonomy: &ClassTaxonomy,
    fx: &FeatureExtraction,
) -> Result<(Dataset, Vec<SkippedItem>), ClassifyError> {
    let labels: Vec<usize> = entries
        .iter()
        .map(|e| {
            taxonomy
                .parse_label(&e.label)
                .ok_or_else(|| ClassifyError::Manifest(format!("unknown label {:?} for {}", e.label, e.path.display())))
        })
        .collect::<Result<_, _>>()?;
    let results: Vec<Result<[f64; N_FEATURES], String>> = entries
        .par_iter()
        .map(|e| load_image(&e.path).and_then(|img| image_features(&img, fx).map_err(|err| format!("{}: {err}", e.path.display()))))
        .collect();
    let mut features = Vec::new();
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for ((r, e), label) in results.into_iter().zip(entries).zip(labels) {
        match r {
            Ok(v) => {
                features.push(v.to_vec());
                kept.push(label);
            }
            Err(error) => skipped.push(SkippedItem { path: e.path.clone(), error }),
        }
    }
    Ok((Dataset::new(taxonomy.clone(), features, kept)?, skipped))
}
