//! Shipped automata: structure, rejecting states and validation.
//!
//!     cargo run --example automata

use ldbsm::automaton::{parse_ldba, shipped};

fn main() -> anyhow::Result<()> {
    for (name, text) in shipped() {
        let a = parse_ldba(text)?;
        let rejecting: Vec<&str> = a.rejecting_states().iter().map(|&q| a.states[q].as_str()).collect();
        let report = a.validate();
        println!(
            "{name:10} states={:?} accepting={:?} rejecting={rejecting:?} valid={}",
            a.states,
            a.accepting.iter().map(|&q| &a.states[q]).collect::<Vec<_>>(),
            report.is_valid()
        );
    }
    Ok(())
}
