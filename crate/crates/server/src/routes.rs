use std::path::{Component, Path as FsPath};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::multipart::MultipartRejection;
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use dermalens_core::abcd::{render_asymmetry, render_color_regions};
use dermalens_core::classify::{ClassTaxonomy, TaxonomyKind};
use dermalens_core::evalharness::{evaluate, score_dataset, EvalError, EvalReport};
use dermalens_core::explain::{render_explanation, rise, saliency_png16, RiseParams};
use dermalens_core::imaging::{decode_image, encode_mask_png, encode_png, RasterImage};
use dermalens_core::pipeline::{analyze_lesion, AbcdReport, ClassificationReport};
use dermalens_core::providers::FeatureClass;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::artifacts::content_hash;
use crate::error::{internal, status_body, ApiError};
use crate::feedback::{parse_submission, FeedbackError};
use crate::jobs::JobState;
use crate::upload::{images_from_manifest, images_from_zip, Form, NamedImage, UploadedFile};
use crate::AppState;

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.engine().config.max_upload_mb.saturating_mul(1 << 20);
    Router::new()
        .route("/model_info", get(model_info).post(model_info))
        .route("/html/{*file}", get(static_file).post(static_file))
        .route("/classify/binary", post(classify_binary))
        .route("/segment", post(segment))
        .route("/extract_feature/{feature_class}", post(extract_feature))
        .route("/features/abcd", post(features_abcd))
        .route("/classify/confidence", post(classify_confidence))
        .route("/explain/rise", post(explain_rise))
        .route("/evaluate", post(evaluate_sets))
        .route("/evaluate/{job_id}", get(evaluate_status))
        .route("/feedback", post(post_feedback))
        .route("/feedback/{record_id}", get(get_feedback))
        .route("/artifacts/{hash}/{file}", get(artifact))
        .route("/admin/reload", post(reload))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .layer(DefaultBodyLimit::max(limit))
        .layer(middleware::map_response(json_errors))
        .with_state(state)
}

/// Error statuses produced by the framework (405, 413, …) get a JSON body too.
async fn json_errors(res: Response) -> Response {
    let status = res.status();
    let is_json = res
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("application/json"));
    if (status.is_client_error() || status.is_server_error()) && !is_json {
        return (status, Json(status_body(status))).into_response();
    }
    res
}

/// Run CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(internal)?
}

async fn form(multipart: Result<Multipart, MultipartRejection>) -> AppResult<Form> {
    Form::read(multipart.map_err(|e| ApiError::bad_request(format!("expected a multipart/form-data body: {e}")))?).await
}

fn png_response(png: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], png).into_response()
}

#[derive(Debug, Default, Deserialize)]
struct Selection {
    provider: Option<String>,
    taxonomy: Option<String>,
    mm_per_pixel: Option<f64>,
}

impl Selection {
    /// Query string first, then the form field of the same name.
    fn provider<'a>(&'a self, form: &'a Form) -> Option<&'a str> {
        self.provider.as_deref().or_else(|| form.fields.get("provider").map(String::as_str)).filter(|s| !s.is_empty())
    }

    fn taxonomy(&self, form: &Form) -> AppResult<TaxonomyKind> {
        let raw = self.taxonomy.as_deref().or_else(|| form.fields.get("taxonomy").map(String::as_str)).unwrap_or("binary");
        match raw.trim().to_ascii_lowercase().as_str() {
            "binary" | "" => Ok(TaxonomyKind::Binary),
            "multi8" => Ok(TaxonomyKind::Multi8),
            other => Err(ApiError::bad_request(format!("taxonomy must be binary or multi8, got {other:?}")).with("field", "taxonomy")),
        }
    }
}

struct Upload {
    hash: String,
    filename: String,
    image: RasterImage,
}

fn decode_upload(file: &UploadedFile) -> AppResult<Upload> {
    let filename = file.filename.clone().unwrap_or_default();
    let (image, _) = decode_image(&file.bytes).map_err(|e| ApiError::bad_request(e.to_string()).with("filename", filename.clone()))?;
    Ok(Upload { hash: content_hash(&file.bytes), filename, image })
}

async fn model_info(State(state): Shared) -> Json<Value> {
    let engine = state.engine();
    let reg = &engine.registry;
    let masks = reg.feature_masks(None).ok();
    Json(json!({
        "binary_classification_model": reg.default_classifier_id(TaxonomyKind::Binary),
        "multi8_classification_model": reg.default_classifier_id(TaxonomyKind::Multi8),
        "segmenter": reg.segmenter(None).ok().map(|s| s.descriptor().id.clone()),
        "feature_masks": masks.map(|m| json!({ "id": m.descriptor().id, "heuristic": m.is_heuristic() })),
        "providers": reg.descriptors(),
        "service_version": env!("CARGO_PKG_VERSION"),
    }))
}

fn content_type_for(path: &FsPath) -> &'static str {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase();
    match ext.as_str() {
        "html" | "htm" => "text/html; charset=utf-8",
        "js" | "mjs" => "application/javascript",
        "css" => "text/css",
        "json" | "map" => "application/json",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        "svg" => "image/svg+xml",
        "ico" => "image/x-icon",
        "txt" => "text/plain; charset=utf-8",
        "woff" => "font/woff",
        "woff2" => "font/woff2",
        "wasm" => "application/wasm",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(state): Shared, Path(file): Path<String>) -> AppResult<Response> {
    let engine = state.engine();
    let root = engine.config.static_root.as_ref().ok_or_else(|| ApiError::not_found("no static root is configured"))?;
    let rel = FsPath::new(&file);
    let forbidden = || ApiError::new(StatusCode::FORBIDDEN, "path leaves the static root");
    if rel.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) || file.contains('\\') {
        return Err(forbidden());
    }
    let full = root.join(rel);
    let missing = || ApiError::not_found(format!("{file} not found"));
    let canon = full.canonicalize().map_err(|_| missing())?;
    if !canon.starts_with(root.canonicalize().map_err(internal)?) {
        return Err(forbidden());
    }
    if !canon.is_file() {
        return Err(missing());
    }
    let bytes = tokio::fs::read(&canon).await.map_err(|_| missing())?;
    Ok(([(header::CONTENT_TYPE, content_type_for(&canon))], bytes).into_response())
}

#[derive(Serialize)]
struct BinaryReply {
    filename: String,
    prediction: [f64; 2],
}

async fn classify_binary(State(state): Shared, Query(sel): Query<Selection>, mp: Result<Multipart, MultipartRejection>) -> AppResult<Json<BinaryReply>> {
    let form = form(mp).await?;
    let file = form.image()?;
    let filename = file.filename.clone().unwrap_or_default();
    let clf = state.engine().registry.classifier(TaxonomyKind::Binary, sel.provider(&form))?;
    let up = decode_upload(file)?;
    let pred = blocking(move || clf.classify_image(&up.image).map_err(ApiError::from)).await.map_err(|e| e.with("filename", filename.clone()))?;
    Ok(Json(BinaryReply { filename, prediction: [pred.probs[0], pred.probs[1]] }))
}

async fn segment(State(state): Shared, Query(sel): Query<Selection>, mp: Result<Multipart, MultipartRejection>) -> AppResult<Response> {
    let form = form(mp).await?;
    let seg = state.engine().registry.segmenter(sel.provider(&form))?;
    let up = decode_upload(form.image()?)?;
    let png = blocking(move || {
        let mask = seg.segment(&up.image)?;
        encode_mask_png(&mask).map_err(internal)
    })
    .await?;
    Ok(png_response(png))
}

async fn extract_feature(
    State(state): Shared,
    Path(class): Path<String>,
    Query(sel): Query<Selection>,
    mp: Result<Multipart, MultipartRejection>,
) -> AppResult<Response> {
    let class: FeatureClass = class.parse().map_err(|_| {
        let known: Vec<&str> = FeatureClass::ALL.iter().map(|c| c.name()).collect();
        ApiError::not_found(format!("unknown feature class {class:?}; expected one of {}", known.join(", ")))
    })?;
    let form = form(mp).await?;
    let engine = state.engine();
    let provider = engine.registry.feature_masks(sel.provider(&form))?;
    let seg = engine.registry.segmenter(None)?;
    let up = decode_upload(form.image()?)?;
    let (id, heuristic) = (provider.descriptor().id.clone(), provider.is_heuristic());
    let png = blocking(move || {
        let lesion = seg.segment(&up.image)?;
        let mask = provider.feature_mask(&up.image, &lesion, class)?;
        encode_mask_png(&mask).map_err(internal)
    })
    .await?;
    let mut res = png_response(png);
    let headers = res.headers_mut();
    headers.insert("x-mask-provider", HeaderValue::from_str(&id).map_err(internal)?);
    headers.insert("x-mask-provenance", HeaderValue::from_static(if heuristic { "heuristic" } else { "model" }));
    Ok(res)
}

#[derive(Serialize)]
struct AbcdReply {
    image_id: String,
    filename: String,
    #[serde(flatten)]
    report: AbcdReport,
}

async fn features_abcd(State(state): Shared, Query(sel): Query<Selection>, mp: Result<Multipart, MultipartRejection>) -> AppResult<Json<AbcdReply>> {
    let form = form(mp).await?;
    let engine = state.engine();
    let mm = match sel.mm_per_pixel {
        Some(v) => Some(v),
        None => form.parsed::<f64>("mm_per_pixel")?,
    }
    .unwrap_or(engine.config.mm_per_pixel);
    if !(mm > 0.0 && mm.is_finite()) {
        return Err(ApiError::bad_request(format!("mm_per_pixel must be positive, got {mm}")).with("field", "mm_per_pixel"));
    }
    let seg = engine.registry.segmenter(sel.provider(&form))?;
    let up = decode_upload(form.image()?)?;
    let st = state.clone();
    blocking(move || {
        let cfg = &engine.config;
        let analysis = analyze_lesion(&up.image, seg.as_ref(), mm, &cfg.abcd)?;
        let mut report = AbcdReport::new(&analysis.abcd);
        let colors = render_color_regions(&up.image, &analysis.mask, &cfg.abcd, cfg.overlay_opacity).map_err(internal)?;
        let axes = render_asymmetry(&analysis.abcd.aligned).map_err(internal)?;
        for (name, png) in [
            ("segmentation", encode_mask_png(&analysis.mask)),
            ("colors", encode_png(&colors)),
            ("asymmetry", encode_png(&axes)),
        ] {
            report.artifacts.insert(name.into(), st.artifacts.put(&up.hash, name, png.map_err(internal)?));
        }
        Ok(Json(AbcdReply { image_id: up.hash, filename: up.filename, report }))
    })
    .await
}

#[derive(Serialize)]
struct ConfidenceReply {
    image_id: String,
    filename: String,
    #[serde(flatten)]
    report: ClassificationReport,
}

async fn classify_confidence(
    State(state): Shared,
    Query(sel): Query<Selection>,
    mp: Result<Multipart, MultipartRejection>,
) -> AppResult<Json<ConfidenceReply>> {
    let form = form(mp).await?;
    let taxonomy = sel.taxonomy(&form)?;
    let clf = state.engine().registry.classifier(taxonomy, sel.provider(&form))?;
    let up = decode_upload(form.image()?)?;
    blocking(move || {
        let pred = clf.classify_image(&up.image)?;
        let report = ClassificationReport::new(&clf.descriptor().id, &pred);
        Ok(Json(ConfidenceReply { image_id: up.hash, filename: up.filename, report }))
    })
    .await
}

#[derive(Serialize)]
struct RiseReply {
    image_id: String,
    filename: String,
    classifier: String,
    target_label: String,
    params: RiseParams,
    opacity: f64,
    saliency_url: String,
    heatmap_url: String,
    elapsed_ms: f64,
}

fn rise_params(form: &Form, defaults: &RiseParams, max_masks: usize) -> AppResult<RiseParams> {
    let p = RiseParams {
        n_masks: form.parsed("n_masks")?.unwrap_or(defaults.n_masks),
        grid_cells: form.parsed("grid_cells")?.unwrap_or(defaults.grid_cells),
        p_on: form.parsed("p_on")?.unwrap_or(defaults.p_on),
        target_class: form.parsed("target_class")?.unwrap_or(defaults.target_class),
        seed: form.parsed("seed")?.unwrap_or(defaults.seed),
    };
    if p.n_masks > max_masks {
        return Err(ApiError::bad_request(format!("n_masks {} exceeds the limit of {max_masks}", p.n_masks))
            .with("field", "n_masks")
            .with("limit", max_masks));
    }
    p.validate().map_err(|e| ApiError::bad_request(e.to_string()).with("limit", max_masks))?;
    Ok(p)
}

async fn explain_rise(State(state): Shared, Query(sel): Query<Selection>, mp: Result<Multipart, MultipartRejection>) -> AppResult<Json<RiseReply>> {
    let form = form(mp).await?;
    let engine = state.engine();
    let cfg = &engine.config;
    let params = rise_params(&form, &cfg.rise, cfg.rise_max_masks)?;
    let opacity = form.parsed::<f64>("opacity")?.unwrap_or(cfg.overlay_opacity);
    if !(0.0..=1.0).contains(&opacity) {
        return Err(ApiError::bad_request(format!("opacity must lie in [0, 1], got {opacity}")).with("field", "opacity"));
    }
    let taxonomy = sel.taxonomy(&form)?;
    let n_classes = ClassTaxonomy::of(taxonomy).len();
    if params.target_class >= n_classes {
        return Err(ApiError::bad_request(format!("target_class {} out of range for {n_classes} classes", params.target_class))
            .with("field", "target_class"));
    }
    let clf = engine.registry.classifier(taxonomy, sel.provider(&form))?;
    let seg = engine.registry.segmenter(None)?;
    let up = decode_upload(form.image()?)?;
    let st = state.clone();
    blocking(move || {
        let started = std::time::Instant::now();
        let reference = seg.segment(&up.image)?;
        let map = rise(&up.image, |img: &RasterImage| clf.classify_occluded(img, &reference), &params)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        let heatmap = render_explanation(&up.image, &map, opacity).map_err(internal)?;
        let classifier = clf.descriptor().id.clone();
        let tag = {
            let key = json!({ "classifier": classifier, "params": params, "opacity": opacity });
            format!("rise-{}", &hex::encode(Sha256::digest(key.to_string()))[..16])
        };
        let saliency_url = st.artifacts.put(&up.hash, &format!("{tag}-saliency"), saliency_png16(&map).map_err(internal)?);
        let heatmap_url = st.artifacts.put(&up.hash, &format!("{tag}-heatmap"), encode_png(&heatmap).map_err(internal)?);
        Ok(Json(RiseReply {
            image_id: up.hash,
            filename: up.filename,
            target_label: clf.taxonomy().labels[params.target_class].clone(),
            classifier,
            params,
            opacity,
            saliency_url,
            heatmap_url,
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
        }))
    })
    .await
}

/// Images for one side of an evaluation: zip archives or image files in the
/// form field, or a manifest of paths under the data root.
fn image_set(form: &Form, field: &str, data_root: Option<&FsPath>) -> AppResult<Vec<NamedImage>> {
    let mut out = Vec::new();
    for f in form.files.iter().filter(|f| f.field == field) {
        let name = f.filename.clone().unwrap_or_default();
        if f.bytes.starts_with(b"PK\x03\x04") || f.bytes.starts_with(b"PK\x05\x06") || name.to_ascii_lowercase().ends_with(".zip") {
            out.extend(images_from_zip(&f.bytes).map_err(|e| ApiError::bad_request(format!("{field}: {e}")).with("field", field))?);
        } else {
            out.push(NamedImage { name, bytes: f.bytes.clone() });
        }
    }
    let manifest_field = format!("{field}_manifest");
    if let Some(text) = form.fields.get(&manifest_field) {
        let root = data_root.ok_or_else(|| ApiError::bad_request("manifests need a configured data_root").with("field", manifest_field.clone()))?;
        out.extend(images_from_manifest(root, text).map_err(|e| ApiError::bad_request(e).with("field", manifest_field.clone()))?);
    }
    if out.is_empty() {
        return Err(ApiError::bad_request(format!("the {field} set is empty")).with("field", field));
    }
    Ok(out)
}

fn run_evaluation(
    clf: Arc<dyn dermalens_core::providers::Classifier>,
    benign: Vec<NamedImage>,
    malignant: Vec<NamedImage>,
) -> Result<EvalReport, EvalError> {
    let set = score_dataset(&benign, &malignant, |i| i.name.clone(), |i| {
        let (img, _) = decode_image(&i.bytes).map_err(|e| e.to_string())?;
        let pred = clf.classify_image(&img).map_err(|e| e.to_string())?;
        pred.malignant_probability().ok_or_else(|| "classifier is not binary".to_string())
    })?;
    evaluate(&set)
}

async fn evaluate_sets(State(state): Shared, Query(sel): Query<Selection>, mp: Result<Multipart, MultipartRejection>) -> AppResult<Response> {
    let form = form(mp).await?;
    let engine = state.engine();
    let clf = engine.registry.classifier(TaxonomyKind::Binary, sel.provider(&form))?;
    let root = engine.config.data_root.as_deref();
    let benign = image_set(&form, "benign", root)?;
    let malignant = image_set(&form, "malignant", root)?;
    let total = benign.len() + malignant.len();
    if total <= engine.config.evaluate_sync_limit {
        let report = blocking(move || run_evaluation(clf, benign, malignant).map_err(|e| ApiError::bad_request(e.to_string()))).await?;
        return Ok(Json(report).into_response());
    }
    let job_id = state.jobs.start(total);
    let (st, id) = (state.clone(), job_id.clone());
    tokio::task::spawn_blocking(move || {
        let outcome = match run_evaluation(clf, benign, malignant) {
            Ok(report) => JobState::Done { report: Box::new(report) },
            Err(e) => JobState::Failed { error: e.to_string() },
        };
        st.jobs.finish(&id, outcome);
    });
    let body = json!({ "job_id": job_id, "status": "running", "total": total, "poll_url": format!("/evaluate/{job_id}") });
    Ok((StatusCode::ACCEPTED, Json(body)).into_response())
}

async fn evaluate_status(State(state): Shared, Path(job_id): Path<String>) -> AppResult<Json<JobState>> {
    state.jobs.get(&job_id).map(Json).ok_or_else(|| ApiError::not_found(format!("no evaluation job {job_id}")))
}

fn feedback_error(e: FeedbackError) -> ApiError {
    match e {
        FeedbackError::Invalid { field, message } => ApiError::bad_request(format!("{field}: {message}")).with("field", field),
        io @ FeedbackError::Io { .. } => internal(io),
    }
}

async fn post_feedback(State(state): Shared, headers: HeaderMap, body: Bytes) -> AppResult<Json<Value>> {
    let ct = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("application/json");
    if !ct.starts_with("application/json") {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "feedback must be sent as application/json"));
    }
    let submission = parse_submission(&body).map_err(feedback_error)?;
    let record = blocking(move || state.feedback.append(submission).map_err(feedback_error)).await?;
    Ok(Json(json!({ "record_id": record.record_id })))
}

async fn get_feedback(State(state): Shared, Path(record_id): Path<String>) -> AppResult<Json<crate::feedback::FeedbackRecord>> {
    state.feedback.get(&record_id).map(Json).ok_or_else(|| ApiError::not_found(format!("no feedback record {record_id}")))
}

async fn artifact(State(state): Shared, Path((hash, file)): Path<(String, String)>) -> AppResult<Response> {
    let name = file.strip_suffix(".png").ok_or_else(|| ApiError::not_found("artifacts are PNG files"))?;
    let png = state.artifacts.get(&hash, name).ok_or_else(|| ApiError::not_found(format!("artifact {hash}/{file} is not cached")))?;
    Ok(png_response(png.as_ref().clone()))
}

async fn reload(State(state): Shared) -> AppResult<Json<Value>> {
    let st = state.clone();
    let engine = blocking(move || st.reload().map_err(|e| ApiError::new(StatusCode::CONFLICT, e.to_string()))).await?;
    Ok(Json(json!({
        "reloaded": true,
        "binary_classification_model": engine.registry.default_classifier_id(TaxonomyKind::Binary),
        "multi8_classification_model": engine.registry.default_classifier_id(TaxonomyKind::Multi8),
    })))
}
