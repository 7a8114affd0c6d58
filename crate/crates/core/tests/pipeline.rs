use std::path::Path;

use psd2code::fixtures::write_corpus;
use psd2code::pipeline::{compare_runs, comparison_markdown, run_batch, run_pipeline, BackendName, RunConfig, SampleLayout, Stage};
use regex::Regex;

fn corpus(dir: &Path, n: usize) -> std::path::PathBuf {
    let c = dir.join("corpus");
    write_corpus(&c, n, 17).unwrap();
    c
}

#[test]
fn template_sample_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 1);
    let cfg = RunConfig { out: dir.path().join("out"), ..RunConfig::default() };
    let r = run_pipeline(&SampleLayout::discover(c.join("sample_000")).unwrap(), &cfg);
    assert_eq!(r.stage, Stage::Done);
    assert!(r.row.codegen_ok && r.row.render_ok && r.row.resource_ok);
    assert_eq!(r.row.map, Some(1.0));
    let out = dir.path().join("out/sample_000");
    for f in ["design.json", "prompt/user.txt", "generated.jsx", "generated.scss", "validation.json", "render.png", "metrics.json", "response.txt"] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn corrupt_design_is_a_row_not_a_crash() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 3);
    std::fs::write(c.join("sample_001/design.psd"), b"8BPS garbage").unwrap();
    let cfg = RunConfig { backend: BackendName::Replay, out: dir.path().join("out"), ..RunConfig::default() };
    let outcome = run_batch(&c, &cfg).unwrap();
    assert_eq!(outcome.report.rows.len(), 3);
    let bad = &outcome.results[1];
    assert_eq!((bad.sample_id.as_str(), bad.stage), ("sample_001", Stage::Parse));
    assert!(bad.error.as_deref().unwrap().starts_with("parse"));
    assert!(!bad.row.codegen_ok && bad.row.ssim.is_none());
    let counts = outcome.report.counts;
    assert_eq!((counts.n_total, counts.n_codegen_ok), (3, 2));
}

#[test]
fn sample_list_restricts_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 4);
    let list = dir.path().join("test.txt");
    std::fs::write(&list, "# held-out split\nsample_003\n\nsample_001  # second\n").unwrap();
    let cfg = RunConfig { samples: Some(list), out: dir.path().join("out"), ..RunConfig::default() };
    let ids: Vec<String> = run_batch(&c, &cfg).unwrap().report.rows.into_iter().map(|r| r.sample_id).collect();
    assert_eq!(ids, ["sample_001", "sample_003"]);
}

#[test]
fn paired_comparison_between_two_configs() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 6);
    // The second configuration replays responses whose widths are all 3px off.
    let skewed = dir.path().join("skewed");
    std::fs::create_dir(&skewed).unwrap();
    let width = Regex::new(r"width: (\d+)px").unwrap();
    for entry in std::fs::read_dir(c.join("_replay")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let text = width.replace_all(&text, |m: &regex::Captures| format!("width: {}px", m[1].parse::<i64>().unwrap() + 3));
        std::fs::write(skewed.join(path.file_name().unwrap()), text.as_bytes()).unwrap();
    }
    let base = RunConfig { backend: BackendName::Replay, out: dir.path().join("a"), ..RunConfig::default() };
    let other = RunConfig { replay_dir: Some(skewed), out: dir.path().join("b"), ..base.clone() };
    let a = run_batch(&c, &base).unwrap().report;
    let b = run_batch(&c, &other).unwrap().report;

    let stats = compare_runs(&a, &b, "codebleu").unwrap();
    assert_eq!(stats.n, 6);
    assert!(stats.mean_diff > 0.0 && stats.t_statistic > 0.0);
    assert!(b.rates.unwrap().resource < 1.0, "size drift must show up as a resource failure");

    let table = comparison_markdown(&[("full".into(), a), ("skewed".into(), b)]);
    assert_eq!(table.lines().filter(|l| l.starts_with("| full |") || l.starts_with("| skewed |")).count(), 2);
}
