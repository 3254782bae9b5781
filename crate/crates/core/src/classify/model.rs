use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassTaxonomy, ClassifyError, Prediction};
use crate::abcd::AbcdFeatures;

pub const N_FEATURES: usize = 11;

pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "asym_vertical_pct",
    "asym_horizontal_pct",
    "dist_white_rel",
    "dist_red_rel",
    "dist_light_brown_rel",
    "dist_dark_brown_rel",
    "dist_blue_gray_rel",
    "dist_black_rel",
    "irregularity_index",
    "diameter_h_mm",
    "diameter_v_mm",
];

pub const MODEL_FORMAT: &str = "dermalens-linear-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Unstandardized feature vector in [`FEATURE_NAMES`] order. Color distances are
/// divided by the rectangle's major side so they do not grow with lesion size.
pub fn raw_feature_vector(f: &AbcdFeatures) -> [f64; N_FEATURES] {
    let major = if f.rect_major_px > 0.0 { f.rect_major_px } else { 1.0 };
    let mut v = [0.0; N_FEATURES];
    v[0] = f.asym_vertical_pct;
    v[1] = f.asym_horizontal_pct;
    for (slot, d) in v[2..8].iter_mut().zip(f.centroid_distances) {
        *slot = d / major;
    }
    v[8] = f.irregularity_index;
    v[9] = f.diameter_h_mm;
    v[10] = f.diameter_v_mm;
    v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self { means: vec![0.0; dim], scales: vec![1.0; dim] }
    }

    /// Column means and population standard deviations; near-constant columns get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, ClassifyError> {
        let Some(first) = rows.first() else {
            return Err(ClassifyError::Training("no samples".into()));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut means = vec![0.0; dim];
        for r in rows {
            for (m, v) in means.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scales = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in scales.iter_mut().zip(r).zip(&means) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scales {
            *s = if s.sqrt() > 1e-12 { s.sqrt() } else { 1.0 };
        }
        Ok(Self { means, scales })
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter().zip(&self.means).zip(&self.scales).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Standardized feature vector for a model.
pub fn featurize(f: &AbcdFeatures, standardizer: &Standardizer) -> Vec<f64> {
    standardizer.apply(&raw_feature_vector(f))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    /// Multiclass squared hinge.
    Hinge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub epochs: usize,
    pub final_loss: f64,
    pub l2: f64,
    pub seed: u64,
    pub samples: usize,
}

/// Linear scores `W·x + b` followed by a softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub format: String,
    pub version: u32,
    pub model_id: String,
    pub taxonomy: ClassTaxonomy,
    pub loss: LossKind,
    pub feature_names: Vec<String>,
    /// `n_classes` rows of `n_features` weights.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub standardizer: Standardizer,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingInfo>,
}

pub(super) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl LinearModel {
    /// All-zero model over the ABCD feature layout.
    pub fn zeros(model_id: impl Into<String>, taxonomy: ClassTaxonomy, dim: usize) -> Self {
        let k = taxonomy.len();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            model_id: model_id.into(),
            taxonomy,
            loss: LossKind::Logistic,
            feature_names: if dim == N_FEATURES {
                FEATURE_NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                (0..dim).map(|i| format!("x{i}")).collect()
            },
            weights: vec![vec![0.0; dim]; k],
            bias: vec![0.0; k],
            standardizer: Standardizer::identity(dim),
            training: None,
        }
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.means.len()
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let bad = |m: String| Err(ClassifyError::InvalidModel(m));
        if self.format != MODEL_FORMAT {
            return bad(format!("unexpected format tag {:?}", self.format));
        }
        if self.version != MODEL_FORMAT_VERSION {
            return bad(format!("unsupported model version {}", self.version));
        }
        let (k, d) = (self.taxonomy.len(), self.n_features());
        if self.weights.len() != k || self.bias.len() != k {
            return bad(format!("expected {k} weight rows and biases"));
        }
        if self.weights.iter().any(|r| r.len() != d) || self.standardizer.scales.len() != d || self.feature_names.len() != d {
            return bad(format!("inconsistent feature dimension (expected {d})"));
        }
        let all = self.weights.iter().flatten().chain(&self.bias).chain(&self.standardizer.means).chain(&self.standardizer.scales);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("non-finite parameter".into());
        }
        if self.standardizer.scales.iter().any(|&s| s <= 0.0) {
            return bad("standardization scales must be positive".into());
        }
        Ok(())
    }

    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>, ClassifyError> {
        if x.len() != self.n_features() {
            return Err(ClassifyError::InvalidInput(format!(
                "feature vector has {} entries, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::InvalidInput("non-finite feature value".into()));
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    /// Softmax over linear scores of a standardized feature vector.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction, ClassifyError> {
        let probs = softmax(&self.scores(x)?);
        Prediction::new(self.taxonomy.clone(), probs)
    }

    pub fn predict_features(&self, f: &AbcdFeatures) -> Result<Prediction, ClassifyError> {
        self.predict(&featurize(f, &self.standardizer))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ClassifyError> {
        let m: LinearModel = serde_json::from_str(s).map_err(|e| ClassifyError::InvalidModel(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ClassifyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClassifyError::InvalidModel(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), ClassifyError> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| ClassifyError::InvalidModel(format!("cannot write {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abcd::DEFAULT_MM_PER_PIXEL;
    use proptest::prelude::*;

    fn features() -> AbcdFeatures {
        AbcdFeatures {
            asym_vertical_pct: 12.0,
            asym_horizontal_pct: 4.0,
            centroid_distances: [0.0, 0.0, 10.0, 20.0, 0.0, 0.0],
            irregularity_index: 1.3,
            diameter_h_mm: 6.6,
            diameter_v_mm: 3.3,
            colors_present: vec![],
            color_regions: vec![],
            rect_major_px: 200.0,
            rect_minor_px: 100.0,
            tilt_deg: 0.0,
            lesion_area_px: 15000,
            mm_per_pixel: DEFAULT_MM_PER_PIXEL,
        }
    }

    #[test]
    fn raw_vector_by_hand() {
        let v = raw_feature_vector(&features());
        assert_eq!(v, [12.0, 4.0, 0.0, 0.0, 0.05, 0.1, 0.0, 0.0, 1.3, 6.6, 3.3]);
    }

    #[test]
    fn zero_features_with_zero_means_is_zero() {
        let zero = AbcdFeatures {
            asym_vertical_pct: 0.0,
            asym_horizontal_pct: 0.0,
            centroid_distances: [0.0; 6],
            irregularity_index: 0.0,
            diameter_h_mm: 0.0,
            diameter_v_mm: 0.0,
            ..features()
        };
        assert!(featurize(&zero, &Standardizer::identity(N_FEATURES)).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn standardized_training_columns_have_zero_mean() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i) as f64, 3.0]).collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        for j in 0..3 {
            let m: f64 = z.iter().map(|r| r[j]).sum::<f64>() / 20.0;
            assert!(m.abs() < 1e-6);
        }
        assert_eq!(s.scales[2], 1.0);
    }

    #[test]
    fn zero_model_is_uniform() {
        let b = LinearModel::zeros("z", ClassTaxonomy::binary(), N_FEATURES);
        assert_eq!(b.predict(&[0.3; N_FEATURES]).unwrap().probs, vec![0.5, 0.5]);
        let m = LinearModel::zeros("z", ClassTaxonomy::multi8(), N_FEATURES);
        assert!(m.predict(&[1.0; N_FEATURES]).unwrap().probs.iter().all(|&p| (p - 0.125).abs() < 1e-15));
        assert!(m.predict(&[1.0; 3]).is_err());
    }

    #[test]
    fn fixture_weights_match_hand_softmax() {
        let mut m = LinearModel::zeros("f", ClassTaxonomy::binary(), 2);
        m.weights = vec![vec![1.0, 0.0], vec![0.0, 2.0]];
        m.bias = vec![0.5, -0.5];
        let p = m.predict(&[1.0, 1.0]).unwrap();
        // scores 1.5 and 1.5 → equal
        assert!((p.probs[0] - 0.5).abs() < 1e-15);
        let p = m.predict(&[0.0, 1.0]).unwrap();
        // scores 0.5 and 1.5 → e^0.5 / (e^0.5 + e^1.5)
        let want = 0.5f64.exp() / (0.5f64.exp() + 1.5f64.exp());
        assert!((p.probs[0] - want).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let mut m = LinearModel::zeros("abc", ClassTaxonomy::binary(), N_FEATURES);
        m.weights[1][3] = 0.25;
        let back = LinearModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let mut broken = m.clone();
        broken.standardizer.scales[0] = 0.0;
        assert!(LinearModel::from_json(&broken.to_json()).is_err());
        let mut wrong_version = m.clone();
        wrong_version.version = 99;
        assert!(LinearModel::from_json(&wrong_version.to_json()).is_err());
    }

    proptest! {
        #[test]
        fn predictions_sum_to_one(x in proptest::collection::vec(-50.0f64..50.0, N_FEATURES), w in proptest::collection::vec(-5.0f64..5.0, 8 * N_FEATURES)) {
            let mut m = LinearModel::zeros("p", ClassTaxonomy::multi8(), N_FEATURES);
            m.weights = w.chunks(N_FEATURES).map(|c| c.to_vec()).collect();
            let p = m.predict(&x).unwrap();
            prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn argmax_ignores_constant_shift(x in proptest::collection::vec(-5.0f64..5.0, N_FEATURES), shift in -100.0f64..100.0) {
            let mut m = LinearModel::zeros("p", ClassTaxonomy::multi8(), N_FEATURES);
            for (k, row) in m.weights.iter_mut().enumerate() {
                row[k] = 1.0 + k as f64 * 0.1;
            }
            let a = m.predict(&x).unwrap().argmax();
            for b in &mut m.bias {
                *b += shift;
            }
            prop_assert_eq!(m.predict(&x).unwrap().argmax(), a);
        }
    }
}
