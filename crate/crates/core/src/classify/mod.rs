//! Class taxonomies, predictions and the confidence presentation rule, plus
//! the baseline linear model trained on ABCD feature vectors.

mod manifest;
mod model;
mod train;

pub use manifest::{parse_manifest, parse_manifest_str, ManifestEntry};
pub use model::{featurize, raw_feature_vector, LinearModel, LossKind, Standardizer, TrainingInfo, FEATURE_NAMES, MODEL_FORMAT, MODEL_FORMAT_VERSION, N_FEATURES};
pub use train::{loss_and_gradient, train, Dataset, TrainParams, TrainingLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bundled binary model, trained on synthetic lesions with the default pipeline settings.
pub const DEFAULT_BINARY_MODEL_JSON: &str = include_str!("../../models/abcd-linear-binary-v1.json");

pub fn default_binary_model() -> LinearModel {
    LinearModel::from_json(DEFAULT_BINARY_MODEL_JSON).expect("bundled model is valid")
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifyError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("manifest error: {0}")]
    Manifest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaxonomyKind {
    Binary,
    Multi8,
}

/// Ordered class labels. Binary order is fixed: benign = 0, malignant = 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TaxonomyRepr")]
pub struct ClassTaxonomy {
    pub kind: TaxonomyKind,
    pub labels: Vec<String>,
}

#[derive(Deserialize)]
struct TaxonomyRepr {
    kind: TaxonomyKind,
    labels: Vec<String>,
}

impl TryFrom<TaxonomyRepr> for ClassTaxonomy {
    type Error = String;

    fn try_from(r: TaxonomyRepr) -> Result<Self, String> {
        let canonical = ClassTaxonomy::of(r.kind);
        if canonical.labels != r.labels {
            return Err(format!("labels {:?} do not match the {:?} taxonomy {:?}", r.labels, r.kind, canonical.labels));
        }
        Ok(canonical)
    }
}

pub const BINARY_LABELS: [&str; 2] = ["benign", "malignant"];
pub const MULTI8_LABELS: [&str; 8] = ["MEL", "NV", "BCC", "AK", "BKL", "DF", "VASC", "SCC"];

impl ClassTaxonomy {
    pub fn binary() -> Self {
        Self { kind: TaxonomyKind::Binary, labels: BINARY_LABELS.iter().map(|s| s.to_string()).collect() }
    }

    pub fn multi8() -> Self {
        Self { kind: TaxonomyKind::Multi8, labels: MULTI8_LABELS.iter().map(|s| s.to_string()).collect() }
    }

    pub fn of(kind: TaxonomyKind) -> Self {
        match kind {
            TaxonomyKind::Binary => Self::binary(),
            TaxonomyKind::Multi8 => Self::multi8(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Resolve a manifest label. Binary taxonomies also accept "0"/"1" and "malign".
    pub fn parse_label(&self, raw: &str) -> Option<usize> {
        let t = raw.trim();
        if let Some(i) = self.labels.iter().position(|l| l.eq_ignore_ascii_case(t)) {
            return Some(i);
        }
        match (self.kind, t.to_ascii_lowercase().as_str()) {
            (TaxonomyKind::Binary, "0") => Some(0),
            (TaxonomyKind::Binary, "1" | "malign") => Some(1),
            _ => None,
        }
    }
}

/// Probability distribution over a taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub taxonomy: ClassTaxonomy,
    pub probs: Vec<f64>,
}

impl Prediction {
    pub fn new(taxonomy: ClassTaxonomy, probs: Vec<f64>) -> Result<Self, ClassifyError> {
        if probs.len() != taxonomy.len() {
            return Err(ClassifyError::InvalidInput(format!(
                "{} probabilities for {} classes",
                probs.len(),
                taxonomy.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(ClassifyError::InvalidInput(format!("probability {p} outside [0, 1]")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(ClassifyError::InvalidInput(format!("probabilities sum to {total}")));
        }
        Ok(Self { taxonomy, probs })
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > self.probs[best] { i } else { best })
    }

    /// Probability of the malignant class; `None` for non-binary taxonomies.
    pub fn malignant_probability(&self) -> Option<f64> {
        (self.taxonomy.kind == TaxonomyKind::Binary).then(|| self.probs[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceEntry {
    pub label: String,
    pub p: f64,
    pub confidence_pct: f64,
}

/// Classes whose probability beats the uniform threshold, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceReport {
    pub entries: Vec<ConfidenceEntry>,
}

/// c = (p − u)/(1 − u)·100 with u = 1/n.
pub fn confidence_pct(p: f64, n_classes: usize) -> f64 {
    let u = 1.0 / n_classes as f64;
    (p - u) / (1.0 - u) * 100.0
}

/// Keep exactly the classes with p > 1/n. Ties in p keep taxonomy order.
pub fn confidence(pred: &Prediction) -> ConfidenceReport {
    let n = pred.probs.len();
    let u = 1.0 / n as f64;
    let mut idx: Vec<usize> = (0..n).filter(|&i| pred.probs[i] > u).collect();
    idx.sort_by(|&a, &b| pred.probs[b].total_cmp(&pred.probs[a]).then(a.cmp(&b)));
    ConfidenceReport {
        entries: idx
            .into_iter()
            .map(|i| ConfidenceEntry {
                label: pred.taxonomy.labels[i].clone(),
                p: pred.probs[i],
                confidence_pct: confidence_pct(pred.probs[i], n),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalignancyColor {
    pub rgb: [u8; 3],
}

impl MalignancyColor {
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.rgb[0], self.rgb[1], self.rgb[2])
    }
}

/// Border color for a binary prediction: green (0,255,0) at p_malignant = 0,
/// yellow (255,255,0) at 0.5, red (255,0,0) at 1, linear in between.
pub fn malignancy_color(pred: &Prediction) -> Result<MalignancyColor, ClassifyError> {
    let p = pred
        .malignant_probability()
        .ok_or_else(|| ClassifyError::InvalidInput("malignancy color needs a binary prediction".into()))?;
    let rgb = if p <= 0.5 {
        [(255.0 * 2.0 * p).round() as u8, 255, 0]
    } else {
        [255, (255.0 * (2.0 - 2.0 * p)).round() as u8, 0]
    };
    Ok(MalignancyColor { rgb })
}
