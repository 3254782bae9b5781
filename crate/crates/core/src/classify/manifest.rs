use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::ClassifyError;

/// One labelled image. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: String,
}

/// Read a CSV (header with `path` and `label` columns) or JSONL manifest.
/// The format is chosen by extension; `.jsonl` and `.json` mean JSON lines.
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>, ClassifyError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ClassifyError::Manifest(format!("cannot read {}: {e}", path.display())))?;
    let jsonl = matches!(path.extension().and_then(|e| e.to_str()), Some("jsonl" | "json"));
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest_str(&text, jsonl, base)
}

pub fn parse_manifest_str(text: &str, jsonl: bool, base: &Path) -> Result<Vec<ManifestEntry>, ClassifyError> {
    let mut entries: Vec<ManifestEntry> = if jsonl {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| ClassifyError::Manifest(format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<_, _>>()?
    } else {
        csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes())
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| ClassifyError::Manifest(format!("record {}: {e}", i + 1))))
            .collect::<Result<_, _>>()?
    };
    for e in &mut entries {
        if e.path.as_os_str().is_empty() {
            return Err(ClassifyError::Manifest("empty path".into()));
        }
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    Ok(entries)
}
