#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use dermalens_core::imaging::{encode_png, BinaryMask, RasterImage};
use dermalens_core::synth::{synth_lesion, SynthClass, SynthParams};
use dermalens_server::{router, AppState, ServiceConfig};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const BOUNDARY: &str = "dermalens-test-boundary";

pub enum Part<'a> {
    File { name: &'a str, filename: &'a str, content_type: &'a str, bytes: &'a [u8] },
    Text { name: &'a str, value: &'a str },
}

pub fn file<'a>(name: &'a str, filename: &'a str, bytes: &'a [u8]) -> Part<'a> {
    Part::File { name, filename, content_type: "application/octet-stream", bytes }
}

pub fn text<'a>(name: &'a str, value: &'a str) -> Part<'a> {
    Part::Text { name, value }
}

pub fn multipart(parts: &[Part]) -> Vec<u8> {
    let mut body = Vec::new();
    for p in parts {
        body.extend_from_slice(format!("--{BOUNDARY}\r\n").as_bytes());
        match p {
            Part::File { name, filename, content_type, bytes } => {
                body.extend_from_slice(
                    format!("Content-Disposition: form-data; name=\"{name}\"; filename=\"{filename}\"\r\nContent-Type: {content_type}\r\n\r\n")
                        .as_bytes(),
                );
                body.extend_from_slice(bytes);
            }
            Part::Text { name, value } => {
                body.extend_from_slice(format!("Content-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}").as_bytes());
            }
        }
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    body
}

pub struct Reply {
    pub status: StatusCode,
    pub content_type: String,
    pub headers: axum::http::HeaderMap,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("not JSON ({e}): {}", String::from_utf8_lossy(&self.body)))
    }
}

pub async fn send(app: &Router, req: Request<Body>) -> Reply {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let content_type = headers.get(header::CONTENT_TYPE).map(|v| v.to_str().unwrap().to_string()).unwrap_or_default();
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, content_type, headers, body }
}

pub async fn post_form(app: &Router, uri: &str, parts: &[Part<'_>]) -> Reply {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(multipart(parts)))
        .unwrap();
    send(app, req).await
}

pub async fn post_json(app: &Router, uri: &str, body: &serde_json::Value) -> Reply {
    let req = Request::post(uri).header(header::CONTENT_TYPE, "application/json").body(Body::from(body.to_string())).unwrap();
    send(app, req).await
}

pub async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Request::get(uri).body(Body::empty()).unwrap()).await
}

/// Config rooted in `dir`, with a static root holding `hello.html` and `app.js`.
pub fn test_config(dir: &Path) -> ServiceConfig {
    let html = dir.join("html");
    std::fs::create_dir_all(&html).unwrap();
    std::fs::write(html.join("hello.html"), "<!doctype html><title>hello</title><p>hello</p>\n").unwrap();
    std::fs::write(html.join("app.js"), "console.log('ok');\n").unwrap();
    std::fs::write(dir.join("secret.txt"), "do not serve").unwrap();
    ServiceConfig {
        static_root: Some(html),
        feedback_path: dir.join("feedback.jsonl"),
        ..ServiceConfig::default()
    }
}

pub fn app_with(config: ServiceConfig) -> (Arc<AppState>, Router) {
    let state = AppState::new(config, None).unwrap();
    let app = router(state.clone());
    (state, app)
}

pub const SMALL: SynthParams = SynthParams { width: 120, height: 90, noise_sigma: 4.0 };

pub fn lesion_png(class: SynthClass, seed: u64) -> Vec<u8> {
    encode_png(&synth_lesion(class, seed, &SMALL).image).unwrap()
}

/// Dark disk of radius `r` centered on a `w`×`h` light frame, and its analytic mask.
pub fn disk(w: usize, h: usize, r: f64) -> (RasterImage, BinaryMask) {
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let mask = BinaryMask::from_fn(w, h, |x, y| (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2) <= r * r);
    let img = RasterImage::from_fn_rgb(w, h, |x, y| if mask.get(x, y) { [110, 70, 40] } else { [235, 205, 185] }).unwrap();
    (img, mask)
}

/// Decode a PNG reply into (width, height, channel count, samples).
pub fn decode_png(bytes: &[u8]) -> (u32, u32, u8, Vec<u8>) {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).unwrap();
    let channels = img.color().channel_count();
    (img.width(), img.height(), channels, img.into_bytes())
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}
