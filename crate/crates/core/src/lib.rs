//! Lesion analysis engine for dermoscopy images.

pub mod abcd;
pub mod classify;
pub mod evalharness;
pub mod explain;
pub mod imaging;
pub mod pipeline;
pub mod providers;
pub mod segmentation;
pub mod synth;
