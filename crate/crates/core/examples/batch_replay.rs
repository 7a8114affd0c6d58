//! Write a synthetic corpus and evaluate it end to end with recorded responses.
//!
//! ```bash
//! cargo run --release --example batch_replay -- 10 4
//! ```

use psd2code::fixtures::write_corpus;
use psd2code::pipeline::{run_batch, BackendName, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>());
    let n = args.next().transpose()?.unwrap_or(6);
    let parallelism = args.next().transpose()?.unwrap_or(2);

    let dir = tempfile::tempdir()?;
    let corpus = dir.path().join("corpus");
    write_corpus(&corpus, n, 2024)?;

    let cfg = RunConfig { backend: BackendName::Replay, parallelism, out: dir.path().join("out"), ..RunConfig::default() };
    let outcome = run_batch(&corpus, &cfg)?;
    print!("{}", outcome.report.to_markdown());
    for r in &outcome.results {
        println!("{}: {:?} ({} warnings)", r.sample_id, r.stage, r.validation_warnings);
    }
    Ok(())
}
