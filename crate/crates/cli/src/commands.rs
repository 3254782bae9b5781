use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use dermalens_core::abcd::{render_asymmetry, render_color_regions};
use dermalens_core::classify::{parse_manifest, train, ClassTaxonomy, LossKind, TaxonomyKind, TrainParams};
use dermalens_core::evalharness::{evaluate, per_threshold_csv, score_dataset, EvalReport};
use dermalens_core::explain::{params_sidecar, render_explanation, rise, saliency_png16, RiseParams, SaliencyMap};
use dermalens_core::imaging::{encode_mask_png, encode_png, BinaryMask, RasterImage};
use dermalens_core::pipeline::{
    analyze_lesion, dataset_from_manifest, load_image, AbcdReport, AnalysisReport, ClassificationReport, FeatureExtraction, ImageInfo,
};
use dermalens_core::providers::Classifier;
use dermalens_core::synth::{write_dataset, SynthParams};
use dermalens_server::{AppState, Engine, ServiceConfig};
use serde_json::json;

use crate::{AnalyzeArgs, Cli, Command, EvaluateArgs, ExplainArgs, Loss, ModelArgs, RiseArgs, ServeArgs, SynthArgs, Taxonomy, TrainArgs};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or missing inputs.
    Usage(String),
    /// The inputs were fine but the analysis failed.
    Pipeline(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Pipeline(_) => 1,
            CliError::Usage(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Pipeline(m) => m,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn pipeline<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(pipeline)?;
    }
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Analyze(a) => analyze(config, cli.seed, a),
        Command::Train(a) => train_model(config, cli.seed, a),
        Command::Evaluate(a) => evaluate_dirs(config, a),
        Command::Explain(a) => explain(config, cli.seed, a),
        Command::Serve(a) => serve(config, cli.config, a),
        Command::Synth(a) => synth(cli.seed, a),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ServiceConfig> {
    match path {
        None => Ok(ServiceConfig::default()),
        Some(p) if !p.is_file() => Err(usage(format!("config file {} not found", p.display()))),
        Some(p) => ServiceConfig::load(p).map_err(usage),
    }
}

fn engine(mut config: ServiceConfig, model: &ModelArgs) -> CliResult<Engine> {
    if let Some(m) = &model.model {
        require_file(m)?;
        config.binary_model = Some(m.clone());
    }
    // The CLI never touches the feedback log; keep an unwritable default from failing validation.
    config.feedback_path = std::env::temp_dir().join("dermalens-cli-feedback.jsonl");
    Engine::build(config).map_err(usage)
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{} not found", path.display())))
    }
}

fn read_image(path: &Path) -> CliResult<RasterImage> {
    require_file(path)?;
    load_image(path).map_err(pipeline)
}

fn taxonomy_kind(t: Taxonomy) -> TaxonomyKind {
    match t {
        Taxonomy::Binary => TaxonomyKind::Binary,
        Taxonomy::Multi8 => TaxonomyKind::Multi8,
    }
}

fn classifier(engine: &Engine, t: Taxonomy) -> CliResult<Arc<dyn Classifier>> {
    engine.registry.classifier(taxonomy_kind(t), None).map_err(pipeline)
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<String> {
    std::fs::write(path, bytes).map_err(|e| pipeline(format!("cannot write {}: {e}", path.display())))?;
    Ok(path.display().to_string())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "image".into())
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn rise_params(defaults: &RiseParams, args: &RiseArgs, seed: u64, max_masks: usize) -> CliResult<RiseParams> {
    let p = RiseParams {
        n_masks: args.n_masks.unwrap_or(defaults.n_masks),
        grid_cells: args.grid_cells.unwrap_or(defaults.grid_cells),
        p_on: args.p_on.unwrap_or(defaults.p_on),
        target_class: args.target_class.unwrap_or(defaults.target_class),
        seed,
    };
    if p.n_masks > max_masks {
        return Err(usage(format!("--n-masks {} exceeds the limit of {max_masks}", p.n_masks)));
    }
    p.validate().map_err(usage)?;
    Ok(p)
}

fn opacity(args: &RiseArgs, config: &ServiceConfig) -> CliResult<f64> {
    let o = args.opacity.unwrap_or(config.overlay_opacity);
    if (0.0..=1.0).contains(&o) {
        Ok(o)
    } else {
        Err(usage(format!("--opacity must lie in [0, 1], got {o}")))
    }
}

/// RISE over the classifier's occlusion path, with the segmenter's mask as reference.
fn run_rise(engine: &Engine, clf: &Arc<dyn Classifier>, img: &RasterImage, params: &RiseParams) -> CliResult<SaliencyMap> {
    if params.target_class >= clf.taxonomy().len() {
        return Err(usage(format!("--target-class {} out of range for {} classes", params.target_class, clf.taxonomy().len())));
    }
    let seg = engine.registry.segmenter(None).map_err(pipeline)?;
    let reference: BinaryMask = seg.segment(img).map_err(pipeline)?;
    rise(img, |m: &RasterImage| clf.classify_occluded(m, &reference), params).map_err(pipeline)
}

fn analyze(config: ServiceConfig, seed: u64, args: AnalyzeArgs) -> CliResult<()> {
    let engine = engine(config, &args.model)?;
    let cfg = &engine.config;
    let mm = args.mm_per_pixel.unwrap_or(cfg.mm_per_pixel);
    if !(mm > 0.0 && mm.is_finite()) {
        return Err(usage(format!("--mm-per-pixel must be positive, got {mm}")));
    }
    let rise_setup = if args.explain { Some((rise_params(&cfg.rise, &args.rise, seed, cfg.rise_max_masks)?, opacity(&args.rise, cfg)?)) } else { None };
    let clf = classifier(&engine, args.taxonomy)?;
    let img = read_image(&args.image)?;
    let started = Instant::now();
    let mut timings = BTreeMap::new();

    let t = Instant::now();
    let seg = engine.registry.segmenter(None).map_err(pipeline)?;
    let analysis = analyze_lesion(&img, seg.as_ref(), mm, &cfg.abcd).map_err(pipeline)?;
    timings.insert("segmentation_abcd".to_string(), ms(t));

    let t = Instant::now();
    let pred = clf.classify_image(&img).map_err(pipeline)?;
    timings.insert("classification".to_string(), ms(t));

    let mut abcd = AbcdReport::new(&analysis.abcd);
    let mut artifacts = BTreeMap::new();
    let name = stem(&args.image);
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        let colors = render_color_regions(&img, &analysis.mask, &cfg.abcd, cfg.overlay_opacity).map_err(pipeline)?;
        let axes = render_asymmetry(&analysis.abcd.aligned).map_err(pipeline)?;
        for (kind, png) in [
            ("segmentation", encode_mask_png(&analysis.mask)),
            ("colors", encode_png(&colors)),
            ("asymmetry", encode_png(&axes)),
        ] {
            let path = dir.join(format!("{name}.{kind}.png"));
            abcd.artifacts.insert(kind.into(), write(&path, &png.map_err(pipeline)?)?);
        }
    }
    if let Some((params, opacity)) = rise_setup {
        let t = Instant::now();
        let map = run_rise(&engine, &clf, &img, &params)?;
        timings.insert("rise".to_string(), ms(t));
        if let Some(dir) = &args.out {
            let heat = render_explanation(&img, &map, opacity).map_err(pipeline)?;
            artifacts.insert("rise_heatmap".into(), write(&dir.join(format!("{name}.rise-heatmap.png")), &encode_png(&heat).map_err(pipeline)?)?);
            artifacts.insert("rise_saliency".into(), write(&dir.join(format!("{name}.rise-saliency.png")), &saliency_png16(&map).map_err(pipeline)?)?);
        }
    }
    timings.insert("total".to_string(), ms(started));

    let report = AnalysisReport {
        image: ImageInfo { width: img.width(), height: img.height() },
        abcd,
        classification: ClassificationReport::new(&clf.descriptor().id, &pred),
        artifacts,
        timings_ms: timings,
    };
    let text = to_json(&report);
    match &args.out {
        Some(dir) => {
            let path = write(&dir.join(format!("{name}.report.json")), text.as_bytes())?;
            println!("{}", json!({ "report": path }));
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn train_model(config: ServiceConfig, seed: u64, args: TrainArgs) -> CliResult<()> {
    require_file(&args.manifest)?;
    let entries = parse_manifest(&args.manifest).map_err(usage)?;
    if entries.is_empty() {
        return Err(usage(format!("manifest {} lists no images", args.manifest.display())));
    }
    let taxonomy = ClassTaxonomy::of(taxonomy_kind(args.taxonomy));
    let fx = FeatureExtraction { segmentation: config.segmentation, abcd: config.abcd.clone(), mm_per_pixel: config.mm_per_pixel };
    let (data, skipped) = dataset_from_manifest(&entries, &taxonomy, &fx).map_err(usage)?;
    let params = TrainParams {
        loss: match args.loss {
            Loss::Logistic => LossKind::Logistic,
            Loss::Hinge => LossKind::Hinge,
        },
        l2: args.l2,
        max_epochs: args.max_epochs,
        seed,
        ..TrainParams::default()
    };
    let model_id = args.model_id.unwrap_or_else(|| stem(&args.out));
    let (model, log) = train(&data, &params, model_id).map_err(pipeline)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    model.save(&args.out).map_err(pipeline)?;
    let summary = json!({
        "model": args.out.display().to_string(),
        "model_id": model.model_id,
        "samples": data.len(),
        "class_counts": data.class_counts(),
        "skipped": skipped,
        "epochs": log.losses.len() - 1,
        "final_loss": log.losses.last(),
        "converged": log.converged,
    });
    print!("{}", to_json(&summary));
    Ok(())
}

const IMAGE_EXTENSIONS: [&str; 6] = ["png", "jpg", "jpeg", "bmp", "tif", "tiff"];

/// Image files directly inside `dir`, sorted by name; hidden files are skipped.
fn image_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(usage(format!("{} is not a directory", dir.display())));
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| usage(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .filter(|p| p.extension().is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_string_lossy().to_ascii_lowercase().as_str())))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("{} contains no images", dir.display())));
    }
    Ok(files)
}

fn write_curves(dir: &Path, report: &EvalReport) -> CliResult<Vec<String>> {
    let mut roc = String::from("threshold,fpr,tpr\n");
    for p in &report.roc_points {
        roc += &format!("{},{},{}\n", p.threshold, p.fpr, p.tpr);
    }
    let mut pr = String::from("threshold,recall,precision\n");
    for p in &report.pr_points {
        pr += &format!("{},{},{}\n", p.threshold, p.recall, p.precision);
    }
    Ok(vec![
        write(&dir.join("evaluation.json"), to_json(report).as_bytes())?,
        write(&dir.join("per_threshold.csv"), per_threshold_csv(report).as_bytes())?,
        write(&dir.join("roc.csv"), roc.as_bytes())?,
        write(&dir.join("pr.csv"), pr.as_bytes())?,
    ])
}

fn evaluate_dirs(config: ServiceConfig, args: EvaluateArgs) -> CliResult<()> {
    let benign = image_files(&args.benign_dir)?;
    let malignant = image_files(&args.malignant_dir)?;
    let engine = engine(config, &args.model)?;
    let clf = classifier(&engine, Taxonomy::Binary)?;
    let set = score_dataset(&benign, &malignant, |p| p.display().to_string(), |p| {
        let img = load_image(p)?;
        let pred = clf.classify_image(&img).map_err(|e| e.to_string())?;
        pred.malignant_probability().ok_or_else(|| "classifier is not binary".to_string())
    })
    .map_err(pipeline)?;
    let report = evaluate(&set).map_err(pipeline)?;
    match &args.out {
        Some(dir) => {
            ensure_dir(dir)?;
            let files = write_curves(dir, &report)?;
            println!("{}", json!({ "roc_auc": report.roc_auc, "n_items": report.n_items, "failures": report.failures.len(), "files": files }));
        }
        None => print!("{}", to_json(&report)),
    }
    Ok(())
}

fn explain(config: ServiceConfig, seed: u64, args: ExplainArgs) -> CliResult<()> {
    let engine = engine(config, &args.model)?;
    let cfg = &engine.config;
    let params = rise_params(&cfg.rise, &args.rise, seed, cfg.rise_max_masks)?;
    let opacity = opacity(&args.rise, cfg)?;
    let clf = classifier(&engine, args.taxonomy)?;
    let img = read_image(&args.image)?;
    let started = Instant::now();
    let map = run_rise(&engine, &clf, &img, &params)?;
    let elapsed_ms = ms(started);
    ensure_dir(&args.out)?;
    let name = stem(&args.image);
    let heat = render_explanation(&img, &map, opacity).map_err(pipeline)?;
    let saliency = write(&args.out.join(format!("{name}.rise-saliency.png")), &saliency_png16(&map).map_err(pipeline)?)?;
    let heatmap = write(&args.out.join(format!("{name}.rise-heatmap.png")), &encode_png(&heat).map_err(pipeline)?)?;
    let mut sidecar = params_sidecar(&map);
    sidecar["classifier"] = json!(clf.descriptor().id);
    sidecar["target_label"] = json!(clf.taxonomy().labels[params.target_class]);
    sidecar["opacity"] = json!(opacity);
    let sidecar_path = write(&args.out.join(format!("{name}.rise.json")), to_json(&sidecar).as_bytes())?;
    let summary = json!({
        "classifier": clf.descriptor().id,
        "target_label": clf.taxonomy().labels[params.target_class],
        "params": params,
        "opacity": opacity,
        "saliency": saliency,
        "heatmap": heatmap,
        "sidecar": sidecar_path,
        "elapsed_ms": elapsed_ms,
    });
    print!("{}", to_json(&summary));
    Ok(())
}

fn serve(mut config: ServiceConfig, config_path: Option<PathBuf>, args: ServeArgs) -> CliResult<()> {
    if let Some(port) = args.port {
        config.port = port;
    }
    if let Some(host) = args.host {
        config.host = host;
    }
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let state = AppState::new(config, config_path).map_err(usage)?;
    let rt = tokio::runtime::Runtime::new().map_err(pipeline)?;
    rt.block_on(dermalens_server::serve(state)).map_err(pipeline)
}

fn synth(seed: u64, args: SynthArgs) -> CliResult<()> {
    if args.per_class == 0 {
        return Err(usage("--per-class must be at least 1"));
    }
    if args.width < 32 || args.height < 32 {
        return Err(usage("images must be at least 32x32"));
    }
    let params = SynthParams { width: args.width, height: args.height, noise_sigma: args.noise };
    ensure_dir(&args.out)?;
    let manifest = write_dataset(&args.out, args.per_class, args.first_seed.unwrap_or(seed), &params).map_err(pipeline)?;
    println!("{}", json!({ "manifest": manifest.display().to_string(), "images": 2 * args.per_class }));
    Ok(())
}
