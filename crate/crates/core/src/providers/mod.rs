//! Pluggable analysis backends and the registry that resolves them by id.

mod baseline;
mod heuristic;

pub use baseline::{BaselineClassifier, ChanVeseSegmenter};
pub use heuristic::{heuristic_feature_mask, FeatureBand, HeuristicFeatureMasks, HeuristicMaskConfig, Polarity};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassTaxonomy, Prediction, TaxonomyKind};
use crate::imaging::{BinaryMask, RasterImage};
use crate::pipeline::LesionAnalysis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    /// The input could not be analyzed (bad image, degenerate segmentation, …).
    #[error("{0}")]
    Analysis(String),
    #[error("unknown feature class {0:?}")]
    UnknownFeatureClass(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("duplicate {kind} provider id {id:?}")]
    Duplicate { kind: ProviderKind, id: String },
    #[error("unknown {kind} provider id {id:?}")]
    Unknown { kind: ProviderKind, id: String },
    #[error("no default {0} provider")]
    NoDefault(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    Classifier,
    Segmenter,
    FeatureMask,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Classifier => "classifier",
            ProviderKind::Segmenter => "segmenter",
            ProviderKind::FeatureMask => "feature-mask",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Capabilities {
    pub white_box_explainable: bool,
    pub batch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    pub kind: ProviderKind,
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taxonomy: Option<ClassTaxonomy>,
    #[serde(default)]
    pub capabilities: Capabilities,
}

/// The five dermoscopic structures exposed by the feature-mask endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureClass {
    Globules,
    Streaks,
    PigmentNetwork,
    MiliaLikeCyst,
    NegativeNetwork,
}

impl FeatureClass {
    pub const ALL: [FeatureClass; 5] = [
        FeatureClass::Globules,
        FeatureClass::Streaks,
        FeatureClass::PigmentNetwork,
        FeatureClass::MiliaLikeCyst,
        FeatureClass::NegativeNetwork,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureClass::Globules => "globules",
            FeatureClass::Streaks => "streaks",
            FeatureClass::PigmentNetwork => "pigment_network",
            FeatureClass::MiliaLikeCyst => "milia_like_cyst",
            FeatureClass::NegativeNetwork => "negative_network",
        }
    }
}

impl fmt::Display for FeatureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureClass {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, ProviderError> {
        FeatureClass::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ProviderError::UnknownFeatureClass(s.to_string()))
    }
}

pub trait Classifier: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;

    fn taxonomy(&self) -> ClassTaxonomy {
        self.descriptor().taxonomy.clone().unwrap_or_else(ClassTaxonomy::binary)
    }

    fn classify_image(&self, img: &RasterImage) -> Result<Prediction, ProviderError>;

    /// Classify with a lesion analysis already at hand. Providers that work
    /// from ABCD features override this to skip re-segmentation.
    fn classify_analysis(&self, img: &RasterImage, _analysis: &LesionAnalysis) -> Result<Prediction, ProviderError> {
        self.classify_image(img)
    }

    /// Classify an occluded copy of an image whose lesion outline is known.
    /// Explanation methods call this; it must succeed for any occlusion.
    fn classify_occluded(&self, img: &RasterImage, _reference_mask: &BinaryMask) -> Result<Prediction, ProviderError> {
        self.classify_image(img)
    }
}

pub trait Segmenter: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;
    fn segment(&self, img: &RasterImage) -> Result<BinaryMask, ProviderError>;
}

pub trait FeatureMaskProvider: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;
    /// Non-clinical placeholder output that callers must label as such.
    fn is_heuristic(&self) -> bool;
    fn feature_mask(&self, img: &RasterImage, lesion: &BinaryMask, class: FeatureClass) -> Result<BinaryMask, ProviderError>;
}

/// Feature-mask provider that is configured off; every call reports unavailability.
pub struct UnavailableFeatureMasks {
    descriptor: ProviderDescriptor,
}

impl UnavailableFeatureMasks {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            descriptor: ProviderDescriptor {
                kind: ProviderKind::FeatureMask,
                id: id.into(),
                taxonomy: None,
                capabilities: Capabilities::default(),
            },
        }
    }
}

impl FeatureMaskProvider for UnavailableFeatureMasks {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn is_heuristic(&self) -> bool {
        false
    }

    fn feature_mask(&self, _: &RasterImage, _: &BinaryMask, class: FeatureClass) -> Result<BinaryMask, ProviderError> {
        Err(ProviderError::Unavailable(format!("no feature-mask backend is configured for {class}")))
    }
}

/// Providers by kind and id, plus the pinned defaults. Immutable once built;
/// reloading swaps a whole new registry.
#[derive(Default, Clone)]
pub struct Registry {
    classifiers: BTreeMap<String, Arc<dyn Classifier>>,
    segmenters: BTreeMap<String, Arc<dyn Segmenter>>,
    feature_masks: BTreeMap<String, Arc<dyn FeatureMaskProvider>>,
    default_classifiers: BTreeMap<TaxonomyKind, String>,
    default_segmenter: Option<String>,
    default_feature_masks: Option<String>,
}

fn insert<T: ?Sized>(map: &mut BTreeMap<String, Arc<T>>, kind: ProviderKind, id: &str, p: Arc<T>) -> Result<(), RegistryError> {
    if map.contains_key(id) {
        return Err(RegistryError::Duplicate { kind, id: id.to_string() });
    }
    map.insert(id.to_string(), p);
    Ok(())
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The first classifier registered for a taxonomy becomes its default.
    pub fn register_classifier(&mut self, p: Arc<dyn Classifier>) -> Result<(), RegistryError> {
        let id = p.descriptor().id.clone();
        let kind = p.taxonomy().kind;
        insert(&mut self.classifiers, ProviderKind::Classifier, &id, p)?;
        self.default_classifiers.entry(kind).or_insert(id);
        Ok(())
    }

    pub fn register_segmenter(&mut self, p: Arc<dyn Segmenter>) -> Result<(), RegistryError> {
        let id = p.descriptor().id.clone();
        insert(&mut self.segmenters, ProviderKind::Segmenter, &id, p)?;
        self.default_segmenter.get_or_insert(id);
        Ok(())
    }

    pub fn register_feature_masks(&mut self, p: Arc<dyn FeatureMaskProvider>) -> Result<(), RegistryError> {
        let id = p.descriptor().id.clone();
        insert(&mut self.feature_masks, ProviderKind::FeatureMask, &id, p)?;
        self.default_feature_masks.get_or_insert(id);
        Ok(())
    }

    /// Make `id` the default of its kind (and taxonomy, for classifiers).
    pub fn pin_default(&mut self, kind: ProviderKind, id: &str) -> Result<(), RegistryError> {
        let unknown = || RegistryError::Unknown { kind, id: id.to_string() };
        match kind {
            ProviderKind::Classifier => {
                let c = self.classifiers.get(id).ok_or_else(unknown)?;
                self.default_classifiers.insert(c.taxonomy().kind, id.to_string());
            }
            ProviderKind::Segmenter => {
                self.segmenters.get(id).ok_or_else(unknown)?;
                self.default_segmenter = Some(id.to_string());
            }
            ProviderKind::FeatureMask => {
                self.feature_masks.get(id).ok_or_else(unknown)?;
                self.default_feature_masks = Some(id.to_string());
            }
        }
        Ok(())
    }

    /// A requested id must exist; only an absent id falls back to the default.
    pub fn classifier(&self, taxonomy: TaxonomyKind, id: Option<&str>) -> Result<Arc<dyn Classifier>, RegistryError> {
        let id = match id {
            Some(id) => id.to_string(),
            None => self
                .default_classifiers
                .get(&taxonomy)
                .cloned()
                .ok_or_else(|| RegistryError::NoDefault(format!("{taxonomy:?} classifier").to_lowercase()))?,
        };
        self.classifiers
            .get(&id)
            .filter(|c| c.taxonomy().kind == taxonomy)
            .cloned()
            .ok_or(RegistryError::Unknown { kind: ProviderKind::Classifier, id })
    }

    pub fn segmenter(&self, id: Option<&str>) -> Result<Arc<dyn Segmenter>, RegistryError> {
        lookup(&self.segmenters, ProviderKind::Segmenter, id, self.default_segmenter.as_deref())
    }

    pub fn feature_masks(&self, id: Option<&str>) -> Result<Arc<dyn FeatureMaskProvider>, RegistryError> {
        lookup(&self.feature_masks, ProviderKind::FeatureMask, id, self.default_feature_masks.as_deref())
    }

    pub fn default_classifier_id(&self, taxonomy: TaxonomyKind) -> Option<&str> {
        self.default_classifiers.get(&taxonomy).map(String::as_str)
    }

    pub fn descriptors(&self) -> Vec<ProviderDescriptor> {
        self.classifiers
            .values()
            .map(|p| p.descriptor().clone())
            .chain(self.segmenters.values().map(|p| p.descriptor().clone()))
            .chain(self.feature_masks.values().map(|p| p.descriptor().clone()))
            .collect()
    }
}

fn lookup<T: ?Sized>(
    map: &BTreeMap<String, Arc<T>>,
    kind: ProviderKind,
    id: Option<&str>,
    default: Option<&str>,
) -> Result<Arc<T>, RegistryError> {
    let id = id.or(default).ok_or_else(|| RegistryError::NoDefault(kind.to_string()))?;
    map.get(id).cloned().ok_or(RegistryError::Unknown { kind, id: id.to_string() })
}
