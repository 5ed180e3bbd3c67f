//! Co-synthesize a controller and certificate for the controlled walk,
//! then simulate the closed loop.
//!
//!     cargo run --release --example control_walk -- "GF a"

use ldbsm::automaton::{parse_ldba, shipped};
use ldbsm::certificate::extract_policy;
use ldbsm::model::load_model;
use ldbsm::montecarlo::{simulate, SimConfig};
use ldbsm::pipeline::{synthesize, PipelineOptions};
use ldbsm::template::Mode;

fn main() -> anyhow::Result<()> {
    let spec = std::env::args().nth(1).unwrap_or_else(|| "GF a".into());
    let model = load_model(include_str!("../data/models/controlled_walk.toml"))?;
    let text = shipped()
        .get(spec.as_str())
        .copied()
        .ok_or_else(|| anyhow::anyhow!("no shipped automaton `{spec}`"))?;
    let a = parse_ldba(text)?;
    let mut opts = PipelineOptions::default();
    opts.synthesis.mode = Mode::Control;
    let result = synthesize(&model, &a, "controlled_walk", &spec, &opts)?;
    let Some(cert) = result.certificate else {
        println!("{}", result.manifest.failure.unwrap_or_default());
        return Ok(());
    };
    for (q, pi) in cert.controller.iter().flatten() {
        println!("u at {q} = {}", model.render_poly(&pi[0]));
    }
    let policy = extract_policy(&cert, &a, &model)?;
    let cfg = SimConfig {
        horizon: 1000,
        runs: 1000,
        ..SimConfig::default()
    };
    print!("{}", simulate(&model, &a, &cert, &policy, &cfg)?.render(&cfg));
    Ok(())
}
