//! Encode a random layer tree as a PSD, read it back, and print the layer dump.
//!
//! ```bash
//! cargo run --example psd_roundtrip -- 42
//! ```

use psd2code::fixtures;
use psd2code::psd::{encode_psd, parse_psd, render_layer_dump};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(42);
    let mut rng = fixtures::rng(seed);
    let tree = fixtures::random_layer_tree(&mut rng, 4, 12);

    let bytes = encode_psd(&tree);
    let back = parse_psd(&bytes).expect("writer output must parse");
    assert!(tree.same_tree(&back));

    println!("{} bytes, {} layers, depth {}", bytes.len(), back.layer_count(), back.depth());
    print!("{}", render_layer_dump(&back));
}
