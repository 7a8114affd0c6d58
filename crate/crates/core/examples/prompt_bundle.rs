//! Build the prompt for a random design under every ablation and print digests.

use psd2code::fixtures;
use psd2code::prompt::{build_prompt, hash_prompt, Ablation, PromptOptions};

fn main() {
    let doc = fixtures::random_document(&mut fixtures::rng(11));
    for name in ["none", "no_structural", "no_attachments", "simple_prompt"] {
        let ablation = Ablation::from_name(name).expect("known ablation");
        let bundle = build_prompt(&doc, &PromptOptions { ablation, screenshot: None }).expect("prompt");
        println!("{name:<15} {:>5} chars  {}", bundle.user.len(), &hash_prompt(&bundle)[..16]);
    }
    let full = build_prompt(&doc, &PromptOptions::default()).expect("prompt");
    println!("\n{}", full.user);
}
