use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psd2code::codecheck::validate_response;
use psd2code::design::DesignDocument;
use psd2code::metrics::{align_images, codebleu, layout_map, mse, psnr, ssim, traditional_similarity, EvaluationReport};
use psd2code::pipeline::{self, prepare, prompt_options, BackendName, RunConfig, SampleLayout};
use psd2code::prompt::{build_prompt, Ablation, PromptBundle};
use psd2code::raster::{decode_image, render, write_png, AssetStore, WHITE};
use psd2code::{assets, codecheck, fixtures};

/// Layered PSD designs to absolute-positioned JSX + SCSS.
#[derive(Parser)]
#[command(name = "psd2code", version)]
struct Cli {
    /// JSON run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// http, replay or template.
    #[arg(long, global = true)]
    backend: Option<BackendName>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    parallelism: Option<usize>,
    /// none, no_structural, no_attachments or simple_prompt.
    #[arg(long, global = true)]
    ablation: Option<String>,
    /// Fixture generation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a design file and print its layer tree.
    Parse { design: PathBuf },
    /// Build and align design.json for a sample directory.
    Align { sample: PathBuf },
    /// Export the prompt bundle of a sample.
    Prompt { sample: PathBuf },
    /// Send an exported prompt bundle to the backend.
    Generate { prompt_dir: PathBuf },
    /// Check a model response against design.json.
    Validate { response: PathBuf, design: PathBuf },
    /// Rasterize a response's layout.
    Render { response: PathBuf, design: PathBuf, assets: PathBuf },
    /// Score a render, or compare two batch reports.
    Evaluate {
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Response whose code is compared to --truth.
        #[arg(long)]
        response: Option<PathBuf>,
        /// Directory with index.jsx and index.scss.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// design.json for layout mAP of --response.
        #[arg(long)]
        design: Option<PathBuf>,
        /// Two report.json files for a paired comparison.
        #[arg(long, num_args = 2)]
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "ssim")]
        metric: String,
    },
    /// Run every stage on one sample.
    Pipeline { sample: PathBuf },
    /// Run a corpus and write report.{json,csv,md}.
    Batch {
        corpus: PathBuf,
        /// report.json of another run for a paired comparison.
        #[arg(long)]
        compare: Option<PathBuf>,
        #[arg(long, default_value = "ssim")]
        metric: String,
    },
    /// Write a synthetic corpus.
    Fixtures {
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn run_err(e: impl std::fmt::Display) -> Failure {
    Failure::Run(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(b) = cli.backend {
        cfg.backend = b;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(p) = cli.parallelism {
        cfg.parallelism = p;
    }
    if let Some(a) = &cli.ablation {
        cfg.ablation = Ablation::from_name(a).ok_or_else(|| usage(format!("unknown ablation '{a}'")))?;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| run_err(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_doc(path: &Path) -> Result<DesignDocument, Failure> {
    DesignDocument::load(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = config(&cli)?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Parse { design } => {
            let raw = psd2code::psd::read_design(design).map_err(run_err)?;
            write_or_print(out, &psd2code::psd::render_layer_dump(&raw))
        }
        Command::Align { sample } => {
            let s = SampleLayout::discover(sample).map_err(usage)?;
            let p = prepare(&s, &cfg).map_err(run_err)?;
            eprintln!(
                "bound {} image(s), resized {}, unmatched {:?}, orphan assets {:?}, traceability {:.3}",
                p.alignment.bound,
                p.alignment.resized,
                p.alignment.unmatched_elements,
                p.alignment.orphan_assets,
                assets::resource_traceability(&p.doc)
            );
            write_or_print(out, &p.doc.to_json())
        }
        Command::Prompt { sample } => {
            let s = SampleLayout::discover(sample).map_err(usage)?;
            let p = prepare(&s, &cfg).map_err(run_err)?;
            let bundle = build_prompt(&p.doc, &prompt_options(&s, &cfg)).map_err(run_err)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("prompt"));
            bundle.export(&dir).map_err(run_err)?;
            println!("{}", psd2code::prompt::hash_prompt(&bundle));
            Ok(())
        }
        Command::Generate { prompt_dir } => {
            let bundle = PromptBundle::load(prompt_dir).map_err(usage)?;
            let client = cfg.client(Path::new(pipeline::REPLAY_DIR)).map_err(usage)?;
            let text = client.generate(&bundle).map_err(run_err)?;
            write_or_print(out, &text)
        }
        Command::Validate { response, design } => {
            let report = validate_response(&read_text(response)?, &load_doc(design)?);
            write_or_print(out, &(report.to_json() + "\n"))?;
            if report.is_clean() {
                Ok(())
            } else {
                Err(run_err(format!("{} error(s)", report.error_count().max(1))))
            }
        }
        Command::Render { response, design, assets: dir } => {
            let doc = load_doc(design)?;
            let report = validate_response(&read_text(response)?, &doc);
            let layout = report.layout.ok_or_else(|| run_err("response does not parse"))?;
            let records = assets::scan_assets(dir).map_err(run_err)?;
            let store = AssetStore::load(&records).map_err(run_err)?;
            let r = render(&layout, &store, doc.dimensions, WHITE).map_err(run_err)?;
            let path = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("render.png"));
            write_png(&r.image, &path).map_err(run_err)?;
            if r.missing_glyphs > 0 || !r.missing_assets.is_empty() {
                eprintln!("missing glyphs: {}, missing assets: {:?}", r.missing_glyphs, r.missing_assets);
            }
            Ok(())
        }
        Command::Evaluate { generated, reference, response, truth, design, reports, metric } => {
            let mut out_json = serde_json::Map::new();
            if reports.len() == 2 {
                let load = |p: &PathBuf| -> Result<EvaluationReport, Failure> { serde_json::from_str(&read_text(p)?).map_err(usage) };
                let stats = pipeline::compare_runs(&load(&reports[0])?, &load(&reports[1])?, metric).map_err(run_err)?;
                out_json.insert("paired".into(), serde_json::to_value(stats).expect("serializable"));
            }
            if let (Some(g), Some(r)) = (generated, reference) {
                let (a, b, resized) = align_images(&decode_image(g).map_err(usage)?, &decode_image(r).map_err(usage)?);
                out_json.insert("resized".into(), resized.into());
                out_json.insert("mse".into(), mse(&a, &b).map_err(run_err)?.into());
                out_json.insert("psnr_db".into(), psnr(&a, &b, cfg.metrics.psnr_cap_db).map_err(run_err)?.into());
                out_json.insert("ssim".into(), ssim(&a, &b, &cfg.metrics.ssim).map_err(run_err)?.into());
            }
            if let Some(resp) = response {
                let code = codecheck::extract_blocks(&read_text(resp)?).map_err(run_err)?;
                if let Some(t) = truth {
                    let truth = codecheck::GeneratedCode::new(read_text(&t.join("index.jsx"))?, read_text(&t.join("index.scss"))?);
                    out_json.insert("codebleu".into(), serde_json::to_value(codebleu(&code, &truth, &cfg.metrics)).expect("serializable"));
                    let trad = (traditional_similarity(&code.jsx, &truth.jsx) + traditional_similarity(&code.scss, &truth.scss)) / 2.0;
                    out_json.insert("traditional".into(), trad.into());
                }
                if let Some(d) = design {
                    let doc = load_doc(d)?;
                    let report = codecheck::validate(&code, &doc);
                    if let Some(layout) = &report.layout {
                        out_json.insert("layout".into(), serde_json::to_value(layout_map(layout, &doc, &cfg.metrics)).expect("serializable"));
                    }
                }
            }
            if out_json.is_empty() {
                return Err(usage("nothing to evaluate: pass --generated/--reference, --response with --truth or --design, or --reports A B"));
            }
            println!("{}", serde_json::to_string_pretty(&out_json).expect("serializable"));
            Ok(())
        }
        Command::Pipeline { sample } => {
            let s = SampleLayout::discover(sample).map_err(usage)?;
            let result = pipeline::run_pipeline(&s, &cfg);
            println!("{}", serde_json::to_string_pretty(&result).expect("serializable"));
            match result.error {
                None => Ok(()),
                Some(e) => Err(run_err(e)),
            }
        }
        Command::Batch { corpus, compare, metric } => {
            let outcome = pipeline::run_batch(corpus, &cfg).map_err(|e| match e {
                pipeline::PipelineError::Config(m) => usage(m),
                other => run_err(other),
            })?;
            if let Some(other) = compare {
                let baseline: EvaluationReport = serde_json::from_str(&read_text(other)?).map_err(usage)?;
                match pipeline::compare_runs(&outcome.report, &baseline, metric) {
                    Ok(stats) => {
                        let json = serde_json::to_string_pretty(&stats).expect("serializable") + "\n";
                        std::fs::write(cfg.out.join("comparison.json"), json).map_err(run_err)?;
                    }
                    Err(e) => log::warn!("paired comparison skipped: {e}"),
                }
                let table = pipeline::comparison_markdown(&[("baseline".into(), baseline), ("this run".into(), outcome.report.clone())]);
                std::fs::write(cfg.out.join("comparison.md"), table).map_err(run_err)?;
            }
            print!("{}", outcome.report.to_markdown());
            let failed: Vec<&str> = outcome.results.iter().filter(|r| r.error.is_some()).map(|r| r.sample_id.as_str()).collect();
            if failed.len() == outcome.results.len() {
                return Err(run_err("every sample failed"));
            }
            if !failed.is_empty() {
                eprintln!("{} sample(s) failed: {}", failed.len(), failed.join(", "));
            }
            Ok(())
        }
        Command::Fixtures { dir, count } => {
            let samples = fixtures::write_corpus(dir, *count, cli.seed.unwrap_or(0)).map_err(run_err)?;
            println!("wrote {} samples to {}", samples.len(), dir.display());
            Ok(())
        }
    }
}
