//! Check the hand-written random-walk certificate, then break it.
//!
//!     cargo run --example check_certificate

use ldbsm::automaton::{parse_ldba, shipped};
use ldbsm::certificate::{check, load_certificate, CheckOptions};
use ldbsm::model::load_model;
use ldbsm::poly::{fmt_rational, int};

fn main() -> anyhow::Result<()> {
    let model = load_model(include_str!("../data/models/random_walk.toml"))?;
    let a = parse_ldba(shipped()["GF a"])?;
    let mut cert = load_certificate(include_str!("../data/certificates/walk_gf_a.toml"), &model)?;

    let report = check(&model, &a, &cert, &CheckOptions::default())?;
    println!("{}", report.render());

    cert.constants.eta_s = int(-9);
    let report = check(&model, &a, &cert, &CheckOptions::default())?;
    for f in report.failures() {
        if let Some(w) = &f.witness {
            let at: Vec<String> = w.x.iter().map(|(n, v)| format!("{n} = {}", fmt_rational(v))).collect();
            println!("eta_S = -9 breaks {} {} at {} (value {})", f.condition.label(), f.label, at.join(", "), fmt_rational(&w.value));
        }
    }
    Ok(())
}
