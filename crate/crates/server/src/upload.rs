//! Multipart form reading and image-set extraction for `/evaluate`.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Component, Path, PathBuf};

use axum::extract::Multipart;

use crate::error::ApiError;

pub struct UploadedFile {
    pub field: String,
    pub filename: Option<String>,
    pub bytes: Vec<u8>,
}

/// All parts of a form: parts with a filename are files, the rest text fields.
#[derive(Default)]
pub struct Form {
    pub files: Vec<UploadedFile>,
    pub fields: HashMap<String, String>,
}

/// Keeps the status axum assigns (413 when the body limit is hit).
fn multipart_error(context: &str, e: axum::extract::multipart::MultipartError) -> ApiError {
    ApiError::new(e.status(), format!("{context}: {}", e.body_text()))
}

impl Form {
    pub async fn read(mut multipart: Multipart) -> Result<Self, ApiError> {
        let mut form = Form::default();
        while let Some(field) = multipart.next_field().await.map_err(|e| multipart_error("malformed multipart body", e))? {
            let name = field.name().unwrap_or_default().to_string();
            let filename = field.file_name().map(str::to_string);
            let bytes = field.bytes().await.map_err(|e| multipart_error(&format!("reading field {name:?}"), e))?;
            if filename.is_some() || name == "file" {
                form.files.push(UploadedFile { field: name, filename, bytes: bytes.to_vec() });
            } else {
                let text = String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::bad_request(format!("field {name:?} is not UTF-8")))?;
                form.fields.insert(name, text);
            }
        }
        Ok(form)
    }

    pub fn file(&self, field: &str) -> Option<&UploadedFile> {
        self.files.iter().find(|f| f.field == field)
    }

    /// The `file` part every image endpoint expects.
    pub fn image(&self) -> Result<&UploadedFile, ApiError> {
        self.file("file").ok_or_else(|| ApiError::bad_request("missing multipart field \"file\""))
    }

    /// Optional numeric or text field, parsed.
    pub fn parsed<T: std::str::FromStr>(&self, name: &str) -> Result<Option<T>, ApiError>
    where
        T::Err: std::fmt::Display,
    {
        match self.fields.get(name).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| ApiError::bad_request(format!("field {name:?}: {e}")).with("field", name)),
        }
    }
}

/// One image to score, with the name reported back for it.
pub struct NamedImage {
    pub name: String,
    pub bytes: Vec<u8>,
}

fn is_image_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    [".png", ".jpg", ".jpeg"].iter().any(|ext| lower.ends_with(ext))
}

/// Image entries of a zip archive in archive order; folders, hidden files and
/// non-image entries are skipped.
pub fn images_from_zip(bytes: &[u8]) -> Result<Vec<NamedImage>, String> {
    let mut archive = zip::ZipArchive::new(std::io::Cursor::new(bytes)).map_err(|e| format!("not a zip archive: {e}"))?;
    let mut out = Vec::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).map_err(|e| e.to_string())?;
        let name = entry.name().to_string();
        let hidden = name.split('/').any(|part| part.starts_with('.') || part == "__MACOSX");
        if entry.is_dir() || hidden || !is_image_name(&name) {
            continue;
        }
        let mut data = Vec::with_capacity(entry.size() as usize);
        entry.read_to_end(&mut data).map_err(|e| format!("{name}: {e}"))?;
        out.push(NamedImage { name, bytes: data });
    }
    Ok(out)
}

/// Resolve a path given by a client so that it cannot leave `root`.
pub fn confined_path(root: &Path, requested: &str) -> Option<PathBuf> {
    let rel = Path::new(requested);
    if rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        return None;
    }
    let joined = root.join(rel);
    let (root, full) = (root.canonicalize().ok()?, joined.canonicalize().ok()?);
    full.starts_with(&root).then_some(full)
}

/// Images listed in a manifest (one path per line, relative to `root`).
pub fn images_from_manifest(root: &Path, manifest: &str) -> Result<Vec<NamedImage>, String> {
    manifest
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|line| {
            let path = confined_path(root, line).ok_or_else(|| format!("{line}: not a file under the data root"))?;
            let bytes = std::fs::read(&path).map_err(|e| format!("{line}: {e}"))?;
            Ok(NamedImage { name: line.to_string(), bytes })
        })
        .collect()
}
