//! Service configuration, read from a JSON file whose fields all have defaults.

use std::path::{Path, PathBuf};

use dermalens_core::abcd::{AbcdConfig, DEFAULT_MM_PER_PIXEL};
use dermalens_core::explain::RiseParams;
use dermalens_core::providers::HeuristicMaskConfig;
use dermalens_core::segmentation::SegmentationConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{field}: path {path} does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

/// What answers `/extract_feature`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMaskMode {
    #[default]
    Heuristic,
    /// Every request gets 503.
    Unavailable,
}

/// Provider ids to use as defaults instead of the first registered one.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderPins {
    pub binary_classifier: Option<String>,
    pub multi8_classifier: Option<String>,
    pub segmenter: Option<String>,
    pub feature_masks: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Binary model file; the bundled model when absent.
    pub binary_model: Option<PathBuf>,
    /// Eight-class model file; confidence requests for `multi8` get 503 when absent.
    pub multi8_model: Option<PathBuf>,
    pub segmentation: SegmentationConfig,
    pub abcd: AbcdConfig,
    pub mm_per_pixel: f64,
    /// Defaults for `/explain/rise` fields the request leaves out.
    pub rise: RiseParams,
    /// Largest `n_masks` a request may ask for.
    pub rise_max_masks: usize,
    /// Heatmap opacity over the original image.
    pub overlay_opacity: f64,
    /// Directory served under `/html`; `/html` answers 404 when unset.
    pub static_root: Option<PathBuf>,
    pub feedback_path: PathBuf,
    /// Root that manifest paths given to `/evaluate` must resolve under; manifests are refused when unset.
    pub data_root: Option<PathBuf>,
    pub feature_masks: FeatureMaskMode,
    pub heuristic_masks: HeuristicMaskConfig,
    pub providers: ProviderPins,
    pub artifact_cache_mb: usize,
    pub max_upload_mb: usize,
    /// Evaluations with more images than this run as background jobs.
    pub evaluate_sync_limit: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 5000,
            binary_model: None,
            multi8_model: None,
            segmentation: SegmentationConfig::default(),
            abcd: AbcdConfig::default(),
            mm_per_pixel: DEFAULT_MM_PER_PIXEL,
            rise: RiseParams { n_masks: 100, ..RiseParams::default() },
            rise_max_masks: 4000,
            overlay_opacity: 0.8,
            static_root: None,
            feedback_path: PathBuf::from("feedback.jsonl"),
            data_root: None,
            feature_masks: FeatureMaskMode::Heuristic,
            heuristic_masks: HeuristicMaskConfig::default(),
            providers: ProviderPins::default(),
            artifact_cache_mb: 256,
            max_upload_mb: 64,
            evaluate_sync_limit: 50,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        let mut cfg: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })?;
        cfg.resolve_relative_to(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Make relative paths relative to `base` (the config file's directory).
    pub fn resolve_relative_to(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.binary_model, &mut self.multi8_model, &mut self.static_root, &mut self.data_root].into_iter().flatten() {
            fix(p);
        }
        fix(&mut self.feedback_path);
    }

    /// Fail loudly on anything that would only surface at request time.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let must_exist = |field: &'static str, p: &Option<PathBuf>| match p {
            Some(p) if !p.exists() => Err(ConfigError::MissingPath { field, path: p.clone() }),
            _ => Ok(()),
        };
        must_exist("binary_model", &self.binary_model)?;
        must_exist("multi8_model", &self.multi8_model)?;
        must_exist("static_root", &self.static_root)?;
        must_exist("data_root", &self.data_root)?;
        let parent = self.feedback_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(ConfigError::MissingPath { field: "feedback_path", path: parent.into() });
        }
        if !(self.mm_per_pixel > 0.0 && self.mm_per_pixel.is_finite()) {
            return Err(ConfigError::Invalid(format!("mm_per_pixel must be positive, got {}", self.mm_per_pixel)));
        }
        if !(0.0..=1.0).contains(&self.overlay_opacity) {
            return Err(ConfigError::Invalid(format!("overlay_opacity must lie in [0, 1], got {}", self.overlay_opacity)));
        }
        if self.rise_max_masks == 0 {
            return Err(ConfigError::Invalid("rise_max_masks must be positive".into()));
        }
        self.rise.validate().map_err(|e| ConfigError::Invalid(format!("rise: {e}")))?;
        if self.rise.n_masks > self.rise_max_masks {
            return Err(ConfigError::Invalid(format!(
                "rise.n_masks {} exceeds rise_max_masks {}",
                self.rise.n_masks, self.rise_max_masks
            )));
        }
        self.segmentation.chan_vese.validate().map_err(|e| ConfigError::Invalid(format!("segmentation: {e}")))?;
        Ok(())
    }
}
