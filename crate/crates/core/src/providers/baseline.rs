use super::{Capabilities, Classifier, ProviderDescriptor, ProviderError, ProviderKind, Segmenter};
use crate::abcd::AbcdConfig;
use crate::classify::{LinearModel, Prediction};
use crate::imaging::{BinaryMask, RasterImage};
use crate::pipeline::{analyze_with_mask, LesionAnalysis};
use crate::segmentation::{segment_lesion, SegmentationConfig};

pub struct ChanVeseSegmenter {
    descriptor: ProviderDescriptor,
    pub config: SegmentationConfig,
}

impl ChanVeseSegmenter {
    pub const ID: &'static str = "chan-vese";

    pub fn new(config: SegmentationConfig) -> Self {
        Self {
            descriptor: ProviderDescriptor {
                kind: ProviderKind::Segmenter,
                id: Self::ID.into(),
                taxonomy: None,
                capabilities: Capabilities::default(),
            },
            config,
        }
    }
}

impl Segmenter for ChanVeseSegmenter {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn segment(&self, img: &RasterImage) -> Result<BinaryMask, ProviderError> {
        segment_lesion(img, &self.config).map(|s| s.mask).map_err(|e| ProviderError::Analysis(e.to_string()))
    }
}

/// Chan–Vese segmentation, ABCD features, then a linear model.
pub struct BaselineClassifier {
    descriptor: ProviderDescriptor,
    model: LinearModel,
    segmenter: ChanVeseSegmenter,
    abcd: AbcdConfig,
    mm_per_pixel: f64,
}

impl BaselineClassifier {
    pub fn new(model: LinearModel, segmentation: SegmentationConfig, abcd: AbcdConfig, mm_per_pixel: f64) -> Self {
        Self {
            descriptor: ProviderDescriptor {
                kind: ProviderKind::Classifier,
                id: model.model_id.clone(),
                taxonomy: Some(model.taxonomy.clone()),
                capabilities: Capabilities::default(),
            },
            model,
            segmenter: ChanVeseSegmenter::new(segmentation),
            abcd,
            mm_per_pixel,
        }
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }
}

impl Classifier for BaselineClassifier {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn classify_image(&self, img: &RasterImage) -> Result<Prediction, ProviderError> {
        let mask = self.segmenter.segment(img)?;
        let analysis = analyze_with_mask(img, mask, self.mm_per_pixel, &self.abcd)?;
        self.classify_analysis(img, &analysis)
    }

    fn classify_analysis(&self, _img: &RasterImage, analysis: &LesionAnalysis) -> Result<Prediction, ProviderError> {
        self.model.predict_features(&analysis.abcd.features).map_err(|e| ProviderError::Analysis(e.to_string()))
    }

    /// Heavy occlusion can leave no separable lesion; the reference outline is
    /// used then, so colors are still read from the occluded pixels.
    fn classify_occluded(&self, img: &RasterImage, reference_mask: &BinaryMask) -> Result<Prediction, ProviderError> {
        let mask = self.segmenter.segment(img).or_else(|_| Ok::<_, ProviderError>(reference_mask.clone()))?;
        let analysis = analyze_with_mask(img, mask, self.mm_per_pixel, &self.abcd)?;
        self.classify_analysis(img, &analysis)
    }
}
