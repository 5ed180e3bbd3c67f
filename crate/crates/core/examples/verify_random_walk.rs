//! Synthesize a certificate for the random walk against a shipped automaton.
//!
//!     cargo run --release --example verify_random_walk -- "G b"

use ldbsm::automaton::{parse_ldba, shipped};
use ldbsm::model::load_model;
use ldbsm::pipeline::{synthesize, PipelineOptions};

fn main() -> anyhow::Result<()> {
    let spec = std::env::args().nth(1).unwrap_or_else(|| "GF a".into());
    let model = load_model(include_str!("../data/models/random_walk.toml"))?;
    let text = shipped()
        .get(spec.as_str())
        .copied()
        .ok_or_else(|| anyhow::anyhow!("no shipped automaton `{spec}`"))?;
    let a = parse_ldba(text)?;
    let opts = PipelineOptions::default();
    let result = synthesize(&model, &a, "random_walk", &spec, &opts)?;
    for at in &result.manifest.attempts {
        println!("{} [{}] {} {:.2}s", at.assignment, at.stage, at.status, at.seconds);
    }
    match result.certificate {
        Some(c) => print!("{}", c.render(&model)),
        None => println!("{}", result.manifest.failure.unwrap_or_default()),
    }
    Ok(())
}
