//! The probability certified by a set of constants.
//!
//!     cargo run --example probability_bound -- -8 5/32 1

use ldbsm::certificate::probability_bound;
use ldbsm::expr::ExprParser;
use ldbsm::poly::{fmt_rational, Rational};

fn number(s: &str) -> anyhow::Result<Rational> {
    let none = |_: &str| None;
    let p = ExprParser::new(&none).parse_poly(s).map_err(|e| anyhow::anyhow!(e.message))?;
    p.to_concrete()
        .filter(|c| c.is_constant())
        .map(|c| c.constant_term())
        .ok_or_else(|| anyhow::anyhow!("`{s}` is not a number"))
}

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (eta, eps, m) = match args.as_slice() {
        [a, b, c] => (number(a)?, number(b)?, number(c)?),
        _ => (number("-8")?, number("5/32")?, number("1")?),
    };
    let b = probability_bound(&eta, &eps, &m)?;
    println!("1 - exp(8 eta eps / M^2) = {}", b.decimal(15));
    println!("certified lower bound    = {}", fmt_rational(&b.certified()));
    Ok(())
}
