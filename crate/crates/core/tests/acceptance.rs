//! Acceptance criteria 1 to 10. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stderr (bypassing libtest capture) and then asserts.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use psd2code::codecheck::{extract_blocks, validate, GeneratedCode};
use psd2code::design::{DesignDocument, Dimensions, ElementNode, ElementType, Position, Size};
use psd2code::fixtures;
use psd2code::geometry::{PixelBox, Rect};
use psd2code::layers::{build_document, classify_group, compute_group_stats, filter_layers, normalize_coordinates, FilterConfig, GroupDecision, PresetLibrary};
use psd2code::llm::{BackendKind, Client, GenerationParams};
use psd2code::metrics::{codebleu, layout_map, mse, paired_stats, psnr, ssim, traditional_similarity, MetricConfig, MetricsError, SsimConfig};
use psd2code::pipeline::{discover_corpus, run_batch, BackendName, RunConfig};
use psd2code::prompt::{build_prompt, Ablation, PromptOptions, ASSET_HEADING, CONSTRAINT_HEADING, REMINDER_HEADING, STRUCTURE_HEADING};
use psd2code::psd::{read_psd, write_synthetic_psd, LayerNode};
use psd2code::raster::RasterImage;
use rand::Rng;

fn report(n: u32, title: &str, ok: bool, detail: &str) {
    let line = format!("criterion {n:>2}: {} {title} ({detail})\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
}

fn template_code(doc: &DesignDocument) -> GeneratedCode {
    let bundle = build_prompt(doc, &PromptOptions::default()).expect("prompt");
    let response = Client::new(BackendKind::Template, GenerationParams::default()).generate(&bundle).expect("template");
    extract_blocks(&response).expect("two fenced blocks")
}

#[test]
fn criterion_01_psd_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut rng = fixtures::rng(0xC1);
    for i in 0..50 {
        let tree = fixtures::random_layer_tree(&mut rng, 6, 20);
        assert!(tree.depth() <= 6 && tree.layer_count() <= 20);
        let path = dir.path().join(format!("t{i}.psd"));
        write_synthetic_psd(&tree, &path).unwrap();
        match read_psd(&path) {
            Ok(back) if back.same_tree(&tree) => {}
            Ok(_) => failures.push(format!("tree {i} differs")),
            Err(e) => failures.push(format!("tree {i}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let ok = failures.is_empty() && elapsed < Duration::from_secs(5);
    report(1, "PSD round trip", ok, &format!("50 trees, {} mismatches, {:.2}s < 5s", failures.len(), elapsed.as_secs_f64()));
    assert!(ok, "{failures:?} in {elapsed:?}");
}

/// The five fold constraints, evaluated from the grid's nominal parameters
/// without looking at any computed statistics.
fn fold_oracle(pixels: usize, texts: usize, subgroups: usize, coverage: f64, structural: bool, container: bool, background: bool) -> bool {
    let a = pixels >= 1 && coverage >= 0.85;
    let b = texts == 0;
    let c = !structural;
    let d = pixels <= 2 || coverage >= 0.95;
    let e = !(container || subgroups >= 1) || (coverage >= 0.95 && background);
    a && b && c && d && e
}

#[test]
fn criterion_02_classifier_oracle() {
    let cfg = FilterConfig::default();
    let coverages = [0.5f64, 0.85, 0.90, 0.95, 1.0];
    let (mut cases, mut agree, mut folds) = (0usize, 0usize, 0usize);
    let mut disagreements = Vec::new();
    for pixels in 0..=3usize {
        for texts in 0..=1usize {
            for subgroups in 0..=1usize {
                for &coverage in &coverages {
                    for flags in 0..8u8 {
                        let (structural, container, background) = (flags & 1 != 0, flags & 2 != 0, flags & 4 != 0);
                        let mut name = String::from("item");
                        if structural {
                            name.push_str("_mask");
                        }
                        if container {
                            name.push_str("_list");
                        }
                        if background {
                            name.push_str("_bg");
                        }
                        // Frame 100x100 at the origin. The first pixel child spans
                        // `coverage` of the width; the rest sit inside it.
                        let width = (coverage * 100.0).round() as i32;
                        let mut children = Vec::new();
                        for p in 0..pixels {
                            let r = if p == 0 { Rect::new(0, 0, 100, width) } else { Rect::new(10, 10, 30, 10 + 10 * p as i32) };
                            children.push(LayerNode::pixel(format!("p{p}"), r));
                        }
                        for t in 0..texts {
                            children.push(LayerNode::text(format!("t{t}"), Rect::new(40, 20, 60, 40), "label"));
                        }
                        for s in 0..subgroups {
                            children.push(LayerNode::group(format!("sub{s}"), Rect::new(70, 10, 90, 30), vec![LayerNode::pixel("x", Rect::new(70, 10, 90, 30))]));
                        }
                        let group = LayerNode::group(name.clone(), Rect::new(0, 0, 100, 100), children);
                        let stats = compute_group_stats(&group);
                        let got = classify_group(&group, &stats, &cfg);
                        let expected = fold_oracle(pixels, texts, subgroups, coverage, structural, container, background);
                        let same = match got {
                            GroupDecision::FoldToImage { adopting, .. } => expected && adopting == Rect::new(0, 0, 100, width),
                            GroupDecision::KeepContainer => !expected,
                        };
                        cases += 1;
                        folds += expected as usize;
                        if same {
                            agree += 1;
                        } else {
                            disagreements.push(format!("{name} px={pixels} txt={texts} sub={subgroups} cov={coverage}: {got:?}"));
                        }
                    }
                }
            }
        }
    }
    let ok = cases >= 240 && agree == cases;
    report(2, "classifier oracle", ok, &format!("{agree}/{cases} agree, {folds} folds"));
    assert!(ok, "{disagreements:#?}");
}

#[test]
fn criterion_03_alignment_authority() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fixtures::write_corpus(&corpus, 6, 33).unwrap();
    let cfg = FilterConfig::default();
    let (mut bound, mut exact, mut moved, mut resized) = (0usize, 0usize, 0usize, 0usize);
    for sample in discover_corpus(&corpus).unwrap() {
        let raw = psd2code::psd::read_design(&sample.design).unwrap();
        let filtered = filter_layers(&raw, &cfg);
        let normalized = normalize_coordinates(&filtered.input);
        let assets = psd2code::assets::scan_assets(&sample.assets_dir).unwrap();
        let before = build_document(&normalized.input, &cfg, &assets, &PresetLibrary::default()).unwrap();
        let (after, rep) = psd2code::assets::align(&before, &assets);
        resized += rep.resized;
        for (b, a) in before.iter().into_iter().zip(after.iter()) {
            assert_eq!(b.id, a.id);
            if a.position != b.position {
                moved += 1;
            }
            let Some(file) = &a.asset_ref else { continue };
            bound += 1;
            // Independent header read through the image crate.
            let (w, h) = image::image_dimensions(sample.assets_dir.join(file)).unwrap();
            if (a.size.width, a.size.height) == (i64::from(w), i64::from(h)) {
                exact += 1;
            }
        }
    }
    let ok = bound > 0 && exact == bound && moved == 0 && resized > 0;
    report(3, "alignment authority", ok, &format!("{exact}/{bound} bound images exact, {resized} resized, {moved} moved"));
    assert!(ok);
}

#[test]
fn criterion_04_template_round_trip() {
    let cfg = MetricConfig::default();
    let mut rng = fixtures::rng(0xC4);
    let mut problems = Vec::new();
    for i in 0..20 {
        let doc = fixtures::random_document(&mut rng);
        let report = validate(&template_code(&doc), &doc);
        if report.error_count() > 0 {
            problems.push(format!("doc {i}: {:?}", report.errors().collect::<Vec<_>>()));
            continue;
        }
        let layout = report.layout.as_ref().expect("parsed");
        let key = |b: &PixelBox| (b.x, b.y, b.width, b.height);
        let mut got: Vec<(String, PixelBox)> = layout
            .leaves()
            .iter()
            .map(|b| (b.class.split('-').next().unwrap().to_string(), b.rect))
            .collect();
        let mut want: Vec<(String, PixelBox)> = doc.leaves().iter().map(|e| (e.id.clone(), e.bbox())).collect();
        got.sort_by(|a, b| (&a.0, key(&a.1)).cmp(&(&b.0, key(&b.1))));
        want.sort_by(|a, b| (&a.0, key(&a.1)).cmp(&(&b.0, key(&b.1))));
        if got != want {
            problems.push(format!("doc {i}: leaf boxes differ"));
        }
        let m = layout_map(layout, &doc, &cfg);
        if m.map != 1.0 || m.per_threshold.len() != cfg.iou_thresholds.len() || m.per_threshold.values().any(|&v| v != 1.0) {
            problems.push(format!("doc {i}: {m:?}"));
        }
    }
    let ok = problems.is_empty();
    report(4, "template round trip", ok, &format!("20 documents, {} failing", problems.len()));
    assert!(ok, "{problems:#?}");
}

fn naive_mse(a: &RasterImage, b: &RasterImage) -> f64 {
    let mut sum = 0.0;
    let mut n = 0.0;
    for y in 0..a.height {
        for x in 0..a.width {
            let (p, q) = (a.get(x, y), b.get(x, y));
            for c in 0..3 {
                sum += (f64::from(p[c]) - f64::from(q[c])).powi(2);
                n += 1.0;
            }
        }
    }
    sum / n
}

/// Direct SSIM: for every fully contained window, weighted moments under the
/// full 2-D Gaussian, then the closed-form index; mean over windows.
fn windowed_ssim(a: &RasterImage, b: &RasterImage, cfg: &SsimConfig) -> f64 {
    let lum = |img: &RasterImage, x: u32, y: u32| {
        let p = img.get(x, y);
        0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2])
    };
    let n = cfg.window as i64;
    let c = (n - 1) as f64 / 2.0;
    let mut g = vec![0.0; (n * n) as usize];
    for v in 0..n {
        for u in 0..n {
            g[(v * n + u) as usize] = (-(((u as f64 - c).powi(2) + (v as f64 - c).powi(2)) / (2.0 * cfg.gaussian_sigma.powi(2)))).exp();
        }
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|w| *w /= total);
    let (c1, c2) = ((cfg.k1 * cfg.dynamic_range).powi(2), (cfg.k2 * cfg.dynamic_range).powi(2));
    let mut acc = 0.0;
    let mut count = 0.0;
    for oy in 0..=(a.height as i64 - n) {
        for ox in 0..=(a.width as i64 - n) {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for v in 0..n {
                for u in 0..n {
                    let w = g[(v * n + u) as usize];
                    let (px, py) = ((ox + u) as u32, (oy + v) as u32);
                    let (p, q) = (lum(a, px, py), lum(b, px, py));
                    mx += w * p;
                    my += w * q;
                    xx += w * p * p;
                    yy += w * q * q;
                    xy += w * p * q;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1.0;
        }
    }
    acc / count
}

#[test]
fn criterion_05_visual_oracles() {
    let cfg = MetricConfig::default();
    let start = Instant::now();
    let mut rng = fixtures::rng(0xC5);
    let (mut worst_mse, mut worst_ssim, mut worst_psnr) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..100 {
        let a = fixtures::asset_pixels(&mut rng, 16, 16);
        let mut b = a.clone();
        // Mix of light noise and wholly independent images.
        let amount = if i % 4 == 0 { 255 } else { rng.gen_range(1..60) };
        for px in b.pixels.chunks_exact_mut(4) {
            for c in &mut px[..3] {
                *c = (i32::from(*c) + rng.gen_range(-amount..=amount)).clamp(0, 255) as u8;
            }
        }
        let m = mse(&a, &b).unwrap();
        worst_mse = worst_mse.max((m - naive_mse(&a, &b)).abs());
        worst_ssim = worst_ssim.max((ssim(&a, &b, &cfg.ssim).unwrap() - windowed_ssim(&a, &b, &cfg.ssim)).abs());
        if m > 0.0 {
            let expected = 10.0 * (255.0f64 * 255.0 / m).log10();
            worst_psnr = worst_psnr.max((psnr(&a, &b, f64::INFINITY).unwrap() - expected).abs());
        }
    }
    let a = fixtures::asset_pixels(&mut rng, 16, 16);
    let self_ssim = ssim(&a, &a, &cfg.ssim).unwrap();
    let black = RasterImage::filled(16, 16, [0, 0, 0, 255]);
    let white = RasterImage::filled(16, 16, [255, 255, 255, 255]);
    let c1 = (0.01f64 * 255.0).powi(2);
    let bw = ssim(&black, &white, &cfg.ssim).unwrap();
    let bw_err = (bw - c1 / (255.0 * 255.0 + c1)).abs();
    let elapsed = start.elapsed();
    let ok = worst_mse <= 1e-9 && worst_ssim <= 1e-6 && worst_psnr <= 1e-9 && self_ssim == 1.0 && bw_err <= 1e-9 && elapsed < Duration::from_secs(10);
    report(
        5,
        "visual-metric oracles",
        ok,
        &format!("mse err {worst_mse:.1e}, ssim err {worst_ssim:.1e}, psnr err {worst_psnr:.1e}, ssim(a,a) {self_ssim}, black/white err {bw_err:.1e}, {:.2}s", elapsed.as_secs_f64()),
    );
    assert!(ok);
}

/// Drops one leaf element: its JSX line and its SCSS rule.
fn delete_leaf(code: &GeneratedCode, class: &str) -> GeneratedCode {
    let needle = format!("className=\"{class}\"");
    let jsx: Vec<&str> = code.jsx.lines().filter(|l| !l.contains(&needle)).collect();
    let mut scss = String::new();
    let mut skipping = false;
    for line in code.scss.lines() {
        if line.trim_start().starts_with(&format!(".{class} ")) {
            skipping = true;
        }
        if !skipping {
            scss.push_str(line);
            scss.push('\n');
        }
        if skipping && line.trim() == "}" {
            skipping = false;
        }
    }
    GeneratedCode::new(jsx.join("\n") + "\n", scss)
}

#[test]
fn criterion_06_code_metric_properties() {
    let cfg = MetricConfig::default();
    let mut rng = fixtures::rng(0xC6);
    let (mut identities, mut decreases) = (0, 0);
    let mut notes = Vec::new();
    for i in 0..10 {
        let doc = fixtures::random_document(&mut rng);
        let code = template_code(&doc);
        let same = codebleu(&code, &code, &cfg).score;
        if same == 1.0 && traditional_similarity(&code.jsx, &code.jsx) == 1.0 && traditional_similarity(&code.scss, &code.scss) == 1.0 {
            identities += 1;
        } else {
            notes.push(format!("program {i}: self score {same}"));
        }
        let layout = validate(&code, &doc).layout.expect("parses");
        let leaves = layout.leaves();
        let victim = &leaves[rng.gen_range(0..leaves.len())].class;
        let cut = delete_leaf(&code, victim);
        assert_ne!(cut.jsx, code.jsx, "deletion must change the program");
        let first = codebleu(&cut, &code, &cfg).score;
        let again = codebleu(&cut, &code, &cfg).score;
        if first < same && first == again {
            decreases += 1;
        } else {
            notes.push(format!("program {i}: deleting {victim} gives {first} / {again}"));
        }
    }
    let ok = identities == 10 && decreases == 10;
    report(6, "code-metric properties", ok, &format!("identity {identities}/10, deletion decreases {decreases}/10"));
    assert!(ok, "{notes:#?}");
}

fn image(id: &str, x: i64, y: i64, w: i64, h: i64) -> ElementNode {
    ElementNode {
        id: id.into(),
        name: id.into(),
        position: Position { x, y },
        size: Size { width: w, height: h },
        kind: ElementType::Image,
        text_content: None,
        asset_ref: None,
        opacity: 1.0,
        z_hint: 0,
        children: Vec::new(),
    }
}

fn page(body: &str, rules: &str) -> GeneratedCode {
    GeneratedCode::new(
        format!("<div className=\"page\">{body}</div>"),
        format!(".page {{ position: relative; left: 0px; top: 0px; width: 200px; height: 200px; }}\n{rules}"),
    )
}

#[test]
fn criterion_07_layout_hand_cases() {
    let cfg = MetricConfig::default();
    let mut doc = DesignDocument { dimensions: Dimensions { width: 200, height: 200 }, elements: vec![image("e1", 0, 0, 50, 50), image("e2", 100, 100, 60, 60)], assets: vec![] };
    doc.renumber_z();
    let rule = |c: &str, x, y, w, h| format!(".{c} {{ position: absolute; left: {x}px; top: {y}px; width: {w}px; height: {h}px; }}\n");

    let one = page("<img className=\"a\" />", &rule("a", 0, 0, 50, 50));
    let both = page("<img className=\"a\" /><img className=\"b\" />", &(rule("a", 0, 0, 50, 50) + &rule("b", 100, 100, 60, 60)));
    let none = page("", "");
    let score = |code: &GeneratedCode| layout_map(validate(code, &doc).layout.as_ref().expect("parses"), &doc, &cfg).map;

    let (partial, full, empty) = (score(&one), score(&both), score(&none));
    let ok = (partial - 2.0 / 3.0).abs() <= 1e-9 && full == 1.0 && empty == 0.0;
    report(7, "layout-metric hand cases", ok, &format!("2 truths/1 match {partial:.12}, truth vs truth {full}, empty {empty}"));
    assert!(ok);
}

#[test]
fn criterion_08_statistics() {
    let a = [2.0, 3.0, 4.0, 8.0];
    let b = [1.0, 2.0, 3.0, 5.0];
    let s = paired_stats(&a, &b).unwrap();
    // Two-sided p for Student's t: I_{df/(df+t^2)}(df/2, 1/2).
    let oracle = statrs::function::beta::beta_reg(s.df / 2.0, 0.5, s.df / (s.df + s.t_statistic.powi(2)));
    let p_err = (s.p_value - oracle).abs();
    let degenerate = matches!(paired_stats(&a, &a), Err(MetricsError::DegenerateInput(_)));
    let ok = (s.t_statistic - 3.0).abs() <= 1e-9 && (s.cohens_d - 1.5).abs() <= 1e-9 && p_err <= 1e-6 && degenerate;
    report(8, "statistics", ok, &format!("t {}, d {}, p {:.8} vs oracle {oracle:.8}, a=b degenerate {degenerate}", s.t_statistic, s.cohens_d, s.p_value));
    assert!(ok);
}

fn read_reports(dir: &Path) -> Vec<Vec<u8>> {
    ["report.json", "report.csv", "report.md"].iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn criterion_09_batch_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    fixtures::write_corpus(&corpus, 10, 99).unwrap();
    let start = Instant::now();
    let run = |parallelism: usize| {
        let cfg = RunConfig { backend: BackendName::Replay, parallelism, out: dir.path().join(format!("out{parallelism}")), ..RunConfig::default() };
        let outcome = run_batch(&corpus, &cfg).unwrap();
        (outcome, read_reports(&cfg.out))
    };
    let (serial, serial_files) = run(1);
    let (parallel, parallel_files) = run(4);
    let elapsed = start.elapsed();
    let identical = serial_files == parallel_files;
    let r = serial.report.rates.expect("non-empty corpus");
    let full = r.codegen == 1.0 && r.render == 1.0 && r.resource == 1.0 && serial.report.counts.n_total == 10;
    let ok = identical && full && parallel.report.rates == Some(r) && elapsed < Duration::from_secs(60);
    report(
        9,
        "end-to-end determinism",
        ok,
        &format!("identical {identical}, rates {:.0}%/{:.0}%/{:.0}%, {:.1}s < 60s", r.codegen * 100.0, r.render * 100.0, r.resource * 100.0, elapsed.as_secs_f64()),
    );
    assert!(ok, "{:#?}", serial.results.iter().filter(|x| x.error.is_some()).collect::<Vec<_>>());
}

#[test]
fn criterion_10_ablation_plumbing() {
    let dir = tempfile::tempdir().unwrap();
    let shot = dir.path().join("screenshot.png");
    let doc = fixtures::random_document(&mut fixtures::rng(0xCA));
    psd2code::raster::write_png(&RasterImage::filled(doc.dimensions.width as u32, doc.dimensions.height as u32, [255, 255, 255, 255]), &shot).unwrap();
    let bundle = |name: &str| build_prompt(&doc, &PromptOptions { ablation: Ablation::from_name(name).unwrap(), screenshot: Some(shot.clone()) }).unwrap();
    let full = bundle("none");
    let coords = |s: &str| s.matches(" at (").count();

    let mut checks = Vec::new();
    checks.push(("full prompt has every fragment", full.user.contains(STRUCTURE_HEADING) && full.user.contains(CONSTRAINT_HEADING) && !full.example.is_empty() && full.attachments.len() == 1 && coords(&full.user) > 0));

    let s = bundle("no_structural");
    checks.push(("no_structural drops the structural prior", !s.user.contains(STRUCTURE_HEADING) && !s.user.contains(REMINDER_HEADING) && coords(&s.user) == 0 && s.user.contains(ASSET_HEADING) && s.attachments.len() == 1));

    let a = bundle("no_attachments");
    checks.push(("no_attachments drops the screenshot", a.attachments.is_empty() && a.user == full.user && a.system == full.system));

    let p = bundle("simple_prompt");
    checks.push((
        "simple_prompt drops rules and example",
        p.example.is_empty() && !p.user.contains(CONSTRAINT_HEADING) && !p.user.contains("[HARD]") && !p.system.contains("Engineering rules") && p.user.contains(STRUCTURE_HEADING),
    ));

    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let ok = failed.is_empty();
    report(10, "ablation plumbing", ok, &format!("{}/{} string checks", checks.len() - failed.len(), checks.len()));
    assert!(ok, "{failed:?}");
}
