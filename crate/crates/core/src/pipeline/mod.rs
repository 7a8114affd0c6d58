//! End-to-end orchestration: one sample through every stage, or a corpus
//! through a bounded worker pool.

mod config;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assets::{align, scan_assets, AlignmentReport, AssetRecord};
use crate::codecheck::{extract_blocks, validate, GeneratedCode, ValidationReport};
use crate::design::DesignDocument;
use crate::layers::{build_document, filter_layers, normalize_coordinates, PresetLibrary, Removal};
use crate::llm::Client;
use crate::metrics::{
    align_images, codebleu, layout_map, mse, paired_stats, psnr, ssim, traditional_similarity, EvaluationReport, MetricRow, StatsSummary,
};
use crate::prompt::{build_prompt, PromptOptions};
use crate::psd::{read_design, RawDesignInput};
use crate::raster::{decode_image, render, render_external, write_png, AssetStore, RasterImage, WHITE};
pub use config::{BackendName, HttpSettings, ReportFormat, RunConfig};

/// Directory holding recorded responses inside a fixture corpus.
pub const REPLAY_DIR: &str = "_replay";
/// Design file names looked for in a sample directory, in order.
pub const DESIGN_FILES: &[&str] = &["design.psd", "design.layers", "design.txt"];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("corpus {0} contains no samples")]
    EmptyCorpus(PathBuf),
    #[error("{0} has no design file (expected one of design.psd, design.layers, design.txt)")]
    NoDesign(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Stage(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

/// Files of one sample directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLayout {
    pub id: String,
    pub root: PathBuf,
    pub design: PathBuf,
    pub screenshot: Option<PathBuf>,
    pub assets_dir: PathBuf,
    /// Holds `index.jsx` and `index.scss` when present.
    pub truth_dir: Option<PathBuf>,
}

impl SampleLayout {
    pub fn discover(root: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let root = root.as_ref();
        let design = DESIGN_FILES.iter().map(|f| root.join(f)).find(|p| p.is_file()).ok_or_else(|| PipelineError::NoDesign(root.to_path_buf()))?;
        let screenshot = Some(root.join("screenshot.png")).filter(|p| p.is_file());
        let truth = root.join("truth");
        let truth_dir = (truth.join("index.jsx").is_file() && truth.join("index.scss").is_file()).then_some(truth);
        let id = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "sample".into());
        Ok(Self { id, root: root.to_path_buf(), design, screenshot, assets_dir: root.join("assets"), truth_dir })
    }

    pub fn truth(&self) -> Option<GeneratedCode> {
        let dir = self.truth_dir.as_ref()?;
        let jsx = std::fs::read_to_string(dir.join("index.jsx")).ok()?;
        let scss = std::fs::read_to_string(dir.join("index.scss")).ok()?;
        Some(GeneratedCode::new(jsx, scss))
    }
}

/// Sample directories of a corpus, sorted by id. A sample is any immediate
/// subdirectory holding a design file.
pub fn discover_corpus(dir: impl AsRef<Path>) -> Result<Vec<SampleLayout>, PipelineError> {
    let dir = dir.as_ref();
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            if let Ok(s) = SampleLayout::discover(&path) {
                out.push(s);
            }
        }
    }
    if out.is_empty() {
        return Err(PipelineError::EmptyCorpus(dir.to_path_buf()));
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Output of the deterministic front half (parse → align).
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: RawDesignInput,
    pub removed: Vec<Removal>,
    pub assets: Vec<AssetRecord>,
    pub doc: DesignDocument,
    pub alignment: AlignmentReport,
}

pub fn prepare(sample: &SampleLayout, cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    let raw = read_design(&sample.design).map_err(|e| PipelineError::Stage(format!("parse: {e}")))?;
    let filtered = filter_layers(&raw, &cfg.filter);
    let normalized = normalize_coordinates(&filtered.input);
    let mut removed = filtered.removed;
    removed.extend(normalized.removed);
    let assets = if sample.assets_dir.is_dir() {
        scan_assets(&sample.assets_dir).map_err(|e| PipelineError::Stage(format!("assets: {e}")))?
    } else {
        Vec::new()
    };
    let preset = match &cfg.preset {
        Some(p) => PresetLibrary::load(p).map_err(io_err(p))?,
        None => PresetLibrary::default(),
    };
    let doc = build_document(&normalized.input, &cfg.filter, &assets, &preset).map_err(|e| PipelineError::Stage(format!("build: {e}")))?;
    let (doc, alignment) = align(&doc, &assets);
    Ok(Prepared { raw, removed, assets, doc, alignment })
}

pub fn prompt_options(sample: &SampleLayout, cfg: &RunConfig) -> PromptOptions {
    PromptOptions { ablation: cfg.ablation, screenshot: if cfg.ablation.no_attachments { None } else { sample.screenshot.clone() } }
}

/// Furthest stage reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Prompt,
    Generate,
    Validate,
    Render,
    Evaluate,
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_id: String,
    pub stage: Stage,
    /// First fatal error, prefixed by its stage.
    pub error: Option<String>,
    pub row: MetricRow,
    pub validation_errors: usize,
    pub validation_warnings: usize,
    pub resized_elements: usize,
    pub missing_glyphs: usize,
    pub missing_assets: Vec<String>,
}

/// Runs one sample with its own client.
pub fn run_pipeline(sample: &SampleLayout, cfg: &RunConfig) -> SampleResult {
    match cfg.client(&default_replay_dir(sample)) {
        Ok(client) => run_sample(sample, cfg, &client),
        Err(e) => SampleResult {
            sample_id: sample.id.clone(),
            stage: Stage::Parse,
            error: Some(format!("config: {e}")),
            row: MetricRow::failed(&sample.id),
            validation_errors: 0,
            validation_warnings: 0,
            resized_elements: 0,
            missing_glyphs: 0,
            missing_assets: vec![],
        },
    }
}

fn default_replay_dir(sample: &SampleLayout) -> PathBuf {
    sample.root.parent().unwrap_or(Path::new(".")).join(REPLAY_DIR)
}

/// Runs every stage, writing artifacts under `<out>/<sample_id>/`. Errors
/// end the run early and land in the record; nothing panics outward.
pub fn run_sample(sample: &SampleLayout, cfg: &RunConfig, client: &Client) -> SampleResult {
    let mut result = SampleResult {
        sample_id: sample.id.clone(),
        stage: Stage::Parse,
        error: None,
        row: MetricRow::failed(&sample.id),
        validation_errors: 0,
        validation_warnings: 0,
        resized_elements: 0,
        missing_glyphs: 0,
        missing_assets: vec![],
    };
    let out = cfg.out.join(&sample.id);
    if let Err(e) = stages(sample, cfg, client, &out, &mut result) {
        result.error = Some(e);
    } else {
        result.stage = Stage::Done;
    }
    if let Ok(json) = serde_json::to_string_pretty(&result) {
        let _ = std::fs::create_dir_all(&out);
        let _ = std::fs::write(out.join("metrics.json"), json + "\n");
    }
    result
}

fn stages(sample: &SampleLayout, cfg: &RunConfig, client: &Client, out: &Path, r: &mut SampleResult) -> Result<(), String> {
    let write = |name: &str, content: &[u8]| std::fs::write(out.join(name), content).map_err(|e| format!("write {name}: {e}"));
    std::fs::create_dir_all(out).map_err(|e| format!("create {}: {e}", out.display()))?;

    let prepared = prepare(sample, cfg).map_err(|e| e.to_string())?;
    let doc = &prepared.doc;
    r.resized_elements = prepared.alignment.resized;
    write("design.json", doc.to_json().as_bytes())?;

    r.stage = Stage::Prompt;
    let bundle = build_prompt(doc, &prompt_options(sample, cfg)).map_err(|e| format!("prompt: {e}"))?;
    bundle.export(out.join("prompt")).map_err(|e| format!("prompt: {e}"))?;

    r.stage = Stage::Generate;
    let response = client.generate(&bundle).map_err(|e| format!("generate: {e}"))?;
    write("response.txt", response.as_bytes())?;

    r.stage = Stage::Validate;
    let code = extract_blocks(&response).map_err(|e| format!("extract: {e}"))?.with_provenance(crate::prompt::hash_prompt(&bundle), client.backend.label());
    write("generated.jsx", code.jsx.as_bytes())?;
    write("generated.scss", code.scss.as_bytes())?;
    let report: ValidationReport = validate(&code, doc);
    write("validation.json", (report.to_json() + "\n").as_bytes())?;
    r.validation_errors = report.error_count();
    r.validation_warnings = report.violations.len() - r.validation_errors;
    r.row.codegen_ok = report.syntax_ok;
    let asset_errors = report.violations.iter().any(|v| v.severity == crate::layers::Severity::Error && (v.code == "unknown-asset" || v.code == "size-drift"));

    if let Some(truth) = sample.truth() {
        let score = codebleu(&code, &truth, &cfg.metrics);
        r.row.codebleu = Some(score.score);
        r.row.traditional = Some((traditional_similarity(&code.jsx, &truth.jsx) + traditional_similarity(&code.scss, &truth.scss)) / 2.0);
    }
    let Some(layout) = &report.layout else {
        return Err("validate: generated code does not parse".into());
    };
    let lm = layout_map(layout, doc, &cfg.metrics);
    r.row.map = Some(lm.map);
    r.row.ap_s = lm.ap_small;
    r.row.ap_m = lm.ap_medium;
    r.row.ap_l = lm.ap_large;

    r.stage = Stage::Render;
    let image: RasterImage = match &cfg.renderer {
        Some(cmd) => render_external(cmd, &code, &sample.assets_dir, &out.join("external")).map_err(|e| format!("render: {e}"))?,
        None => {
            let store = AssetStore::load(&prepared.assets).map_err(|e| format!("render: {e}"))?;
            let rendered = render(layout, &store, doc.dimensions, WHITE).map_err(|e| format!("render: {e}"))?;
            r.missing_glyphs = rendered.missing_glyphs;
            r.missing_assets = rendered.missing_assets;
            rendered.image
        }
    };
    write_png(&image, out.join("render.png")).map_err(|e| format!("render: {e}"))?;
    r.row.render_ok = true;
    r.row.resource_ok = !asset_errors && r.missing_assets.is_empty();

    r.stage = Stage::Evaluate;
    if let Some(shot) = &sample.screenshot {
        let reference = decode_image(shot).map_err(|e| format!("evaluate: {e}"))?;
        let (generated, reference, resized) = align_images(&image, &reference);
        r.row.resized = resized;
        r.row.mse = mse(&generated, &reference).ok();
        r.row.psnr_db = psnr(&generated, &reference, cfg.metrics.psnr_cap_db).ok();
        r.row.ssim = ssim(&generated, &reference, &cfg.metrics.ssim).ok();
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub report: EvaluationReport,
    /// Sorted by sample id.
    pub results: Vec<SampleResult>,
}

/// Runs every sample of `corpus` on a pool of `cfg.parallelism` threads and
/// writes `report.{json,csv,md}` to `cfg.out`.
pub fn run_batch(corpus: impl AsRef<Path>, cfg: &RunConfig) -> Result<BatchOutcome, PipelineError> {
    cfg.validate().map_err(PipelineError::Config)?;
    let corpus = corpus.as_ref();
    let mut samples = discover_corpus(corpus)?;
    if let Some(list) = &cfg.samples {
        let wanted = read_sample_list(list)?;
        samples.retain(|s| wanted.contains(&s.id));
        if samples.is_empty() {
            return Err(PipelineError::EmptyCorpus(corpus.to_path_buf()));
        }
    }
    let client = cfg.client(&corpus.join(REPLAY_DIR)).map_err(|e| PipelineError::Config(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    let mut results: Vec<SampleResult> = pool.install(|| samples.par_iter().map(|s| run_sample(s, cfg, &client)).collect());
    results.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    let report = EvaluationReport::from_rows(results.iter().map(|r| r.row.clone()).collect());
    for f in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
        write_report(&report, &cfg.out, f)?;
    }
    Ok(BatchOutcome { report, results })
}

/// Sample ids from a split file: one per line, blank lines and `#` comments ignored.
pub fn read_sample_list(path: &Path) -> Result<BTreeSet<String>, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Writes `report.json`, `report.csv` or `report.md` into `dir`.
pub fn write_report(report: &EvaluationReport, dir: impl AsRef<Path>, format: ReportFormat) -> Result<PathBuf, PipelineError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let (name, content) = match format {
        ReportFormat::Json => ("report.json", report.to_json() + "\n"),
        ReportFormat::Csv => ("report.csv", report.to_csv()),
        ReportFormat::Markdown => ("report.md", report.to_markdown()),
    };
    let path = dir.join(name);
    std::fs::write(&path, content).map_err(io_err(&path))?;
    Ok(path)
}

/// Paired comparison of one metric column across two runs of the same
/// corpus. Samples missing the metric in either run are skipped.
pub fn compare_runs(a: &EvaluationReport, b: &EvaluationReport, metric: &str) -> Result<StatsSummary, PipelineError> {
    let col_b: std::collections::BTreeMap<&str, Option<f64>> = b.rows.iter().map(|r| r.sample_id.as_str()).zip(b.column(metric)).collect();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (row, va) in a.rows.iter().zip(a.column(metric)) {
        if let (Some(x), Some(Some(y))) = (va, col_b.get(row.sample_id.as_str())) {
            xs.push(x);
            ys.push(*y);
        }
    }
    paired_stats(&xs, &ys).map_err(|e| PipelineError::Stage(format!("compare {metric}: {e}")))
}

/// Side-by-side summary, one row per configuration.
pub fn comparison_markdown(runs: &[(String, EvaluationReport)]) -> String {
    let metrics = ["codebleu", "traditional", "ssim", "psnr_db", "map"];
    let mut s = String::from("| configuration |");
    for m in metrics {
        s.push_str(&format!(" {m} |"));
    }
    s.push_str(" codegen | render | resource |\n|---|");
    s.push_str(&"---:|".repeat(metrics.len() + 3));
    s.push('\n');
    for (name, r) in runs {
        s.push_str(&format!("| {name} |"));
        for m in metrics {
            let v = r.aggregate(m).and_then(|a| a.mean);
            s.push_str(&format!(" {} |", v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())));
        }
        match r.rates {
            Some(rates) => s.push_str(&format!(" {:.1}% | {:.1}% | {:.1}% |\n", 100.0 * rates.codegen, 100.0 * rates.render, 100.0 * rates.resource)),
            None => s.push_str(" - | - | - |\n"),
        }
    }
    s
}
