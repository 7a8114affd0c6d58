//! Rasterize a template-generated page to a PNG.
//!
//! ```bash
//! cargo run --example render_layout -- /tmp/page.png
//! ```

use psd2code::codecheck::validate_response;
use psd2code::fixtures;
use psd2code::llm::{BackendKind, Client, GenerationParams};
use psd2code::prompt::{build_prompt, PromptOptions};
use psd2code::raster::{render, write_png, AssetStore, WHITE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "page.png".into());
    let mut rng = fixtures::rng(9);
    let doc = fixtures::random_document(&mut rng);

    let mut store = AssetStore::new();
    for a in &doc.assets {
        store.insert(a.file.clone(), fixtures::asset_pixels(&mut rng, a.width, a.height));
    }

    let bundle = build_prompt(&doc, &PromptOptions::default())?;
    let response = Client::new(BackendKind::Template, GenerationParams::default()).generate(&bundle)?;
    let layout = validate_response(&response, &doc).layout.expect("template output parses");
    let r = render(&layout, &store, doc.dimensions, WHITE)?;
    write_png(&r.image, &out)?;
    println!("{}x{} -> {out} (missing glyphs {}, missing assets {:?})", r.image.width, r.image.height, r.missing_glyphs, r.missing_assets);
    Ok(())
}
