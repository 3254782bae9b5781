//! Providers built from one configuration snapshot. Reloading builds a new
//! engine and swaps it in whole.

use std::path::Path;
use std::sync::Arc;

use dermalens_core::classify::{default_binary_model, LinearModel, TaxonomyKind};
use dermalens_core::providers::{
    BaselineClassifier, ChanVeseSegmenter, HeuristicFeatureMasks, ProviderKind, Registry, UnavailableFeatureMasks,
};

use crate::config::{ConfigError, FeatureMaskMode, ServiceConfig};

pub const HEURISTIC_MASKS_ID: &str = "heuristic";
pub const UNAVAILABLE_MASKS_ID: &str = "unavailable";

pub struct Engine {
    pub config: ServiceConfig,
    pub registry: Registry,
}

fn load_model(path: &Path, expected: TaxonomyKind, field: &str) -> Result<LinearModel, ConfigError> {
    let model = LinearModel::load(path).map_err(|e| ConfigError::Invalid(format!("{field} {}: {e}", path.display())))?;
    if model.taxonomy.kind != expected {
        return Err(ConfigError::Invalid(format!(
            "{field} {} has taxonomy {:?}, expected {expected:?}",
            path.display(),
            model.taxonomy.kind
        )));
    }
    Ok(model)
}

impl Engine {
    pub fn build(config: ServiceConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let reg_err = |e: dermalens_core::providers::RegistryError| ConfigError::Invalid(e.to_string());
        let classifier = |model: LinearModel| {
            Arc::new(BaselineClassifier::new(model, config.segmentation, config.abcd.clone(), config.mm_per_pixel))
        };
        let mut registry = Registry::new();

        let binary = match &config.binary_model {
            Some(p) => load_model(p, TaxonomyKind::Binary, "binary_model")?,
            None => default_binary_model(),
        };
        registry.register_classifier(classifier(binary)).map_err(reg_err)?;
        if let Some(p) = &config.multi8_model {
            registry.register_classifier(classifier(load_model(p, TaxonomyKind::Multi8, "multi8_model")?)).map_err(reg_err)?;
        }
        registry.register_segmenter(Arc::new(ChanVeseSegmenter::new(config.segmentation))).map_err(reg_err)?;
        match config.feature_masks {
            FeatureMaskMode::Heuristic => registry
                .register_feature_masks(Arc::new(HeuristicFeatureMasks::new(HEURISTIC_MASKS_ID, config.heuristic_masks.clone())))
                .map_err(reg_err)?,
            FeatureMaskMode::Unavailable => {
                registry.register_feature_masks(Arc::new(UnavailableFeatureMasks::new(UNAVAILABLE_MASKS_ID))).map_err(reg_err)?
            }
        }

        let pins = &config.providers;
        for (taxonomy, pin) in [(TaxonomyKind::Binary, &pins.binary_classifier), (TaxonomyKind::Multi8, &pins.multi8_classifier)] {
            if let Some(id) = pin {
                registry.pin_default(ProviderKind::Classifier, id).map_err(reg_err)?;
                registry
                    .classifier(taxonomy, Some(id))
                    .map_err(|_| ConfigError::Invalid(format!("pinned classifier {id:?} is not a {taxonomy:?} classifier")))?;
            }
        }
        if let Some(id) = &pins.segmenter {
            registry.pin_default(ProviderKind::Segmenter, id).map_err(reg_err)?;
        }
        if let Some(id) = &pins.feature_masks {
            registry.pin_default(ProviderKind::FeatureMask, id).map_err(reg_err)?;
        }
        Ok(Self { config, registry })
    }
}
