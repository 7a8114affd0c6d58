use jsonschema::JSONSchema;
use psd2code::fixtures;
use psd2code::pipeline::{run_batch, BackendName, RunConfig};

fn compile(name: &str) -> JSONSchema {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&schema).unwrap()
}

fn assert_valid(schema: &JSONSchema, value: &serde_json::Value) {
    if let Err(errors) = schema.validate(value) {
        let msgs: Vec<String> = errors.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{msgs:#?}");
    }
}

#[test]
fn design_documents_match_schema() {
    let schema = compile("design.schema.json");
    let mut rng = fixtures::rng(8);
    for _ in 0..20 {
        let doc = fixtures::random_document(&mut rng);
        assert_valid(&schema, &serde_json::from_str(&doc.to_json()).unwrap());
    }
    let bad = serde_json::json!({"dimensions": {"width": 10, "height": 10}, "elements": [{"type": "video"}]});
    assert!(!schema.is_valid(&bad));
}

#[test]
fn batch_report_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    fixtures::write_corpus(&corpus, 3, 4).unwrap();
    let cfg = RunConfig { backend: BackendName::Replay, out: dir.path().join("out"), ..RunConfig::default() };
    run_batch(&corpus, &cfg).unwrap();
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(cfg.out.join("report.json")).unwrap()).unwrap();
    assert_valid(&compile("report.schema.json"), &report);
    let design: serde_json::Value = serde_json::from_slice(&std::fs::read(cfg.out.join("sample_000/design.json")).unwrap()).unwrap();
    assert_valid(&compile("design.schema.json"), &design);
}
