//! Monte-Carlo run of the random walk under the hand-written certificate's policy.
//!
//!     cargo run --release --example simulate_walk

use ldbsm::automaton::{parse_ldba, shipped};
use ldbsm::certificate::{extract_policy, load_certificate};
use ldbsm::model::load_model;
use ldbsm::montecarlo::{simulate, SimConfig};

fn main() -> anyhow::Result<()> {
    let model = load_model(include_str!("../data/models/random_walk.toml"))?;
    let a = parse_ldba(shipped()["GF a"])?;
    let cert = load_certificate(include_str!("../data/certificates/walk_gf_a.toml"), &model)?;
    let policy = extract_policy(&cert, &a, &model)?;
    let cfg = SimConfig {
        horizon: 2000,
        runs: 2000,
        seed: 42,
        ..SimConfig::default()
    };
    let stats = simulate(&model, &a, &cert, &policy, &cfg)?;
    print!("{}", stats.render(&cfg));
    let worst = stats.runs.iter().filter_map(|r| r.first_accepting).max();
    println!("latest first accepting visit = {worst:?}");
    Ok(())
}
