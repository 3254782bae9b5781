//! Clinician feedback on masks, kept in an append-only JSON-lines file.
//!
//! Each record is written as one line followed by an fsync before the request
//! is answered. Existing bytes are never rewritten: a line cut short by a crash
//! is left in place, skipped on load and terminated before the next append.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dermalens_core::providers::FeatureClass;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeedbackError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("feedback store {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> FeedbackError {
    FeedbackError::Invalid { field: field.into(), message: message.into() }
}

/// Mask a feedback record refers to: the lesion outline or one of the structure masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", untagged)]
pub enum MaskClass {
    Segmentation(SegmentationTag),
    Feature(FeatureClass),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentationTag {
    Segmentation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackRegion {
    /// Closed polygon in image pixel coordinates; the last vertex joins the first.
    pub polygon: Vec<[f64; 2]>,
    pub action: RegionAction,
}

/// Request body of `POST /feedback`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSubmission {
    /// SHA-256 of the uploaded image bytes, as returned by the analysis endpoints.
    pub image_id: String,
    pub image_size: ImageSize,
    pub mask_class: MaskClass,
    pub regions: Vec<FeedbackRegion>,
    pub client_timestamp: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub record_id: String,
    #[serde(flatten)]
    pub submission: FeedbackSubmission,
    pub received_unix_ms: u64,
}

/// Parse and check a submission; errors name the offending field path.
pub fn parse_submission(body: &[u8]) -> Result<FeedbackSubmission, FeedbackError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    let sub: FeedbackSubmission = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        invalid(if path == "." { "body".to_string() } else { path }, e.into_inner().to_string())
    })?;
    validate(&sub)?;
    Ok(sub)
}

pub fn validate(sub: &FeedbackSubmission) -> Result<(), FeedbackError> {
    if sub.image_id.len() != 64 || !sub.image_id.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase()) {
        return Err(invalid("image_id", "expected a 64-character lowercase hex SHA-256"));
    }
    let ImageSize { width, height } = sub.image_size;
    if width == 0 || height == 0 {
        return Err(invalid("image_size", "width and height must be positive"));
    }
    if sub.regions.is_empty() {
        return Err(invalid("regions", "at least one region is required"));
    }
    for (i, r) in sub.regions.iter().enumerate() {
        if r.polygon.len() < 3 {
            return Err(invalid(format!("regions[{i}].polygon"), format!("a polygon needs at least 3 vertices, got {}", r.polygon.len())));
        }
        for (j, &[x, y]) in r.polygon.iter().enumerate() {
            let inside = x.is_finite() && y.is_finite() && (0.0..=f64::from(width)).contains(&x) && (0.0..=f64::from(height)).contains(&y);
            if !inside {
                return Err(invalid(
                    format!("regions[{i}].polygon[{j}]"),
                    format!("vertex ({x}, {y}) lies outside the {width}x{height} image"),
                ));
            }
        }
    }
    Ok(())
}

struct Inner {
    file: File,
    index: HashMap<String, FeedbackRecord>,
    /// Whether the file currently ends mid-line.
    dangling: bool,
}

pub struct FeedbackStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl FeedbackStore {
    /// Open (creating if needed) and index an existing store.
    pub fn open(path: &Path) -> Result<Self, FeedbackError> {
        let io = |source| FeedbackError::Io { path: path.into(), source };
        let file = OpenOptions::new().create(true).append(true).read(true).open(path).map_err(io)?;
        let text = std::fs::read(path).map_err(io)?;
        let dangling = !text.is_empty() && !text.ends_with(b"\n");
        let mut index = HashMap::new();
        for (n, line) in text.split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            match serde_json::from_slice::<FeedbackRecord>(line) {
                Ok(r) => {
                    index.insert(r.record_id.clone(), r);
                }
                Err(e) => tracing::warn!("{}: skipping unreadable line {}: {e}", path.display(), n + 1),
            }
        }
        Ok(Self { path: path.into(), inner: Mutex::new(Inner { file, index, dangling }) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Durably append a record; returns it once the bytes are on disk.
    pub fn append(&self, submission: FeedbackSubmission) -> Result<FeedbackRecord, FeedbackError> {
        validate(&submission)?;
        let received_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let record = FeedbackRecord { record_id: uuid::Uuid::new_v4().to_string(), submission, received_unix_ms };
        let mut line = serde_json::to_vec(&record).expect("records serialize");
        line.push(b'\n');
        let io = |source| FeedbackError::Io { path: self.path.clone(), source };
        let mut inner = self.inner.lock();
        if inner.dangling {
            line.insert(0, b'\n');
        }
        inner.file.write_all(&line).map_err(io)?;
        inner.file.sync_data().map_err(io)?;
        inner.dangling = false;
        inner.index.insert(record.record_id.clone(), record.clone());
        Ok(record)
    }

    pub fn get(&self, record_id: &str) -> Option<FeedbackRecord> {
        self.inner.lock().index.get(record_id).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ID: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

    fn body(polygon: &str) -> String {
        format!(
            r#"{{"image_id":"{ID}","image_size":{{"width":100,"height":80}},"mask_class":"streaks",
               "regions":[{{"polygon":{polygon},"action":"add"}}],"client_timestamp":"2024-01-01T00:00:00Z"}}"#
        )
    }

    #[test]
    fn accepts_a_valid_submission() {
        let s = parse_submission(body("[[1,1],[10,1],[10,10]]").as_bytes()).unwrap();
        assert_eq!(s.mask_class, MaskClass::Feature(FeatureClass::Streaks));
        assert_eq!(s.regions[0].action, RegionAction::Add);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |b: &str| match parse_submission(b.as_bytes()) {
            Err(FeedbackError::Invalid { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(&body("[[1,1],[10,1]]")), "regions[0].polygon");
        assert_eq!(field(&body("[[1,1],[10,1],[101,5]]")), "regions[0].polygon[2]");
        assert_eq!(field(&body("[[1,1],[10,1],[5,\"x\"]]")), "regions[0].polygon[2][1]");
        assert_eq!(field(&body("[[1,1],[10,1],[5,5]]").replace("\"add\"", "\"erase\"")), "regions[0].action");
        assert_eq!(field(&body("[[1,1],[10,1],[5,5]]").replace("streaks", "freckles")), "mask_class");
        assert_eq!(field(&body("[[1,1],[10,1],[5,5]]").replace(ID, "abc")), "image_id");
    }

    #[test]
    fn segmentation_is_a_mask_class() {
        let s = parse_submission(body("[[1,1],[10,1],[10,10]]").replace("streaks", "segmentation").as_bytes()).unwrap();
        assert_eq!(serde_json::to_value(s.mask_class).unwrap(), "segmentation");
    }

    #[test]
    fn records_survive_reopen_and_a_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fb.jsonl");
        let sub = parse_submission(body("[[1,1],[10,1],[10,10]]").as_bytes()).unwrap();
        let first = FeedbackStore::open(&path).unwrap().append(sub.clone()).unwrap();
        // simulate a crash mid-write
        OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"record_id\":\"tor").unwrap();
        let store = FeedbackStore::open(&path).unwrap();
        assert_eq!(store.get(&first.record_id), Some(first.clone()));
        let second = store.append(sub).unwrap();
        let reopened = FeedbackStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get(&second.record_id), Some(second));
    }
}
