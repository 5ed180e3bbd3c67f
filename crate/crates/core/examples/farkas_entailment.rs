//! Reduce one parametric entailment with Farkas' lemma and solve it.
//!
//!   x >= 0, 1 - x >= 0  |=  c + d*x >= 0,   with c, d unknown and d >= 1.
//!
//!     cargo run --example farkas_entailment

use std::time::Duration;

use ldbsm::constraints::Entailment;
use ldbsm::expr::Cmp;
use ldbsm::model::Constraint;
use ldbsm::poly::{int, Coeff, ParamPoly, Symbols, Var};
use ldbsm::positivstellensatz::{farkas_reduce, ExConstraint, ExistentialSystem, Rel};
use ldbsm::smtbridge::{emit, solve_system, DEFAULT_SOLVER};

fn main() -> anyhow::Result<()> {
    let mut symbols = Symbols::new();
    let c = symbols.fresh("c");
    let d = symbols.fresh("d");
    let x = ParamPoly::var(Var::State(0));
    let conclusion = &ParamPoly::constant(Coeff::unknown(c)) + &x.scale(&Coeff::unknown(d));
    let e = Entailment {
        label: "demo".into(),
        bound_vars: vec![Var::State(0)],
        premise: vec![
            Constraint::new(x.clone(), Cmp::Ge),
            Constraint::new(&ParamPoly::int(1) - &x, Cmp::Ge),
        ],
        conclusion: vec![conclusion],
    };
    let mut constraints = farkas_reduce(&e, &mut symbols)?;
    constraints.push(ExConstraint::new("d >= 1", &Coeff::unknown(d) - &Coeff::constant(int(1)), Rel::Ge));
    let mut sys = ExistentialSystem::new(symbols);
    sys.constraints = constraints;
    print!("{}", emit(&sys));
    let out = solve_system(&sys, DEFAULT_SOLVER, Duration::from_secs(10), None)?;
    println!("; {}", out.status);
    for (u, v) in out.assignment.iter().flatten() {
        println!("{} = {v}", sys.symbols.name(*u));
    }
    Ok(())
}
