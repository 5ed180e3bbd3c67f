pub mod dists;
pub mod expr;
pub mod model;
pub mod poly;
pub mod automaton;
pub mod transcendental;
pub mod constraints;
pub mod positivstellensatz;
pub mod template;
pub mod simplex;
pub mod smtbridge;
pub mod certificate;
pub mod montecarlo;
pub mod pipeline;
pub mod cli;
