//! Generate code with the offline template backend, then break it on purpose
//! and watch the validator catch each fault.

use psd2code::codecheck::{extract_blocks, validate, GeneratedCode};
use psd2code::fixtures;
use psd2code::llm::{BackendKind, Client, GenerationParams};
use psd2code::prompt::{build_prompt, PromptOptions};

fn main() {
    let doc = fixtures::random_document(&mut fixtures::rng(5));
    let bundle = build_prompt(&doc, &PromptOptions::default()).expect("prompt");
    let client = Client::new(BackendKind::Template, GenerationParams::default());
    let response = client.generate(&bundle).expect("template backend is infallible");
    let code = extract_blocks(&response).expect("fenced blocks");

    let report = validate(&code, &doc);
    println!("clean: {} ({} warnings)", report.is_clean(), report.violations.len());
    println!("{}\n{}", code.jsx, code.scss);

    // Move the page off the canvas and point every image at a file that does not exist.
    let scss = code.scss.replacen("left: 0px;", "left: 400px;", 1).replace("url(\"assets/", "url(\"assets/ghost-");
    let broken = GeneratedCode::new(code.jsx.clone(), scss);
    for v in validate(&broken, &doc).violations.iter().take(8) {
        println!("{:?} {}: {}", v.severity, v.code, v.message);
    }
}
