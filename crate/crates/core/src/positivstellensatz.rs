//! Reduction of universally quantified entailments to existential
//! constraints over the unknowns.
//!
//! Linear entailments use Farkas' lemma: `c = sum_i lam_i a_i + mu` with
//! non-negative multipliers. Higher degrees use a Putinar-style
//! representation `c = s_0 + sum_i s_i a_i` where every `s` is a sum of
//! squares of parametric polynomials.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use thiserror::Error;

use crate::constraints::Entailment;
use crate::poly::{Coeff, Monomial, ParamPoly, Poly, Rational, Symbols, Unknown, Var};
use crate::template::dense_monomials;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rel {
    /// `poly = 0`
    Eq,
    /// `poly >= 0`
    Ge,
}

/// A polynomial constraint over unknowns only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExConstraint {
    pub label: String,
    pub poly: Coeff,
    pub rel: Rel,
}

impl ExConstraint {
    pub fn new(label: impl Into<String>, poly: Coeff, rel: Rel) -> Self {
        ExConstraint {
            label: label.into(),
            poly,
            rel,
        }
    }

    /// Exact evaluation; unbound unknowns make the constraint fail.
    pub fn holds(&self, assignment: &BTreeMap<Unknown, Rational>) -> bool {
        match self.poly.eval_unknowns(assignment, None) {
            Ok(v) => match self.rel {
                Rel::Eq => num_traits::Zero::is_zero(&v),
                Rel::Ge => v >= num_traits::Zero::zero(),
            },
            Err(_) => false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReduceError {
    #[error("{label}: Farkas reduction needs degree <= 1 in the bound variables (found {degree}); use the Putinar reduction")]
    Degree { label: String, degree: u32 },
}

/// A disjunction of constraint conjunctions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Disjunction {
    pub label: String,
    pub branches: Vec<Vec<ExConstraint>>,
}

impl Disjunction {
    pub fn holds(&self, assignment: &BTreeMap<Unknown, Rational>) -> bool {
        self.branches.iter().any(|b| b.iter().all(|c| c.holds(assignment)))
    }
}

/// Existential constraints together with the unknown table.
///
/// Unknowns in `binary` range over `{0, 1}`; the SMT bridge declares them
/// Boolean, which keeps products with a binary factor linear.
#[derive(Clone, Debug, Default)]
pub struct ExistentialSystem {
    pub symbols: Symbols,
    pub constraints: Vec<ExConstraint>,
    pub binary: BTreeSet<Unknown>,
    pub disjunctions: Vec<Disjunction>,
}

impl ExistentialSystem {
    pub fn new(symbols: Symbols) -> Self {
        ExistentialSystem {
            symbols,
            ..Default::default()
        }
    }

    /// Unknowns in declaration order.
    pub fn unknowns(&self) -> Vec<Unknown> {
        self.symbols.iter().collect()
    }

    /// Labels of every constraint that fails under the assignment.
    pub fn violations(&self, assignment: &BTreeMap<Unknown, Rational>) -> Vec<String> {
        let mut out: Vec<String> = self
            .constraints
            .iter()
            .filter(|c| !c.holds(assignment))
            .map(|c| c.label.clone())
            .collect();
        for &b in &self.binary {
            match assignment.get(&b) {
                Some(v) if v.is_zero() || v.is_one() => {}
                _ => out.push(format!("{} is not 0 or 1", self.symbols.name(b))),
            }
        }
        out.extend(
            self.disjunctions
                .iter()
                .filter(|d| !d.holds(assignment))
                .map(|d| d.label.clone()),
        );
        out
    }

    /// Number of constraints by kind, for reporting.
    pub fn stats(&self) -> (usize, usize, usize) {
        let eqs = self.constraints.iter().filter(|c| c.rel == Rel::Eq).count();
        (self.symbols.len(), eqs, self.constraints.len() - eqs)
    }

    /// Restrict `u` to a finite menu of values: `u = sum_j v_j m_j` with
    /// one-hot binaries `m_j`, substituted into every constraint.
    pub fn restrict_to_menu(&mut self, u: Unknown, values: &[Rational]) {
        let base = self.symbols.name(u).to_string();
        let mut sum = Coeff::zero();
        let mut hot = Coeff::zero();
        for (j, v) in values.iter().enumerate() {
            let m = self.symbols.fresh(format!("{base}_m{j}"));
            self.binary.insert(m);
            sum = &sum + &Coeff::unknown(m).scale(v);
            hot = &hot + &Coeff::unknown(m);
        }
        let bind = |x: Unknown| (x == u).then(|| sum.clone());
        for c in &mut self.constraints {
            c.poly = c.poly.substitute(bind);
        }
        for d in &mut self.disjunctions {
            for c in d.branches.iter_mut().flatten() {
                c.poly = c.poly.substitute(bind);
            }
        }
        self.constraints.push(ExConstraint::new(
            format!("menu / {base}"),
            &Coeff::unknown(u) - &sum,
            Rel::Eq,
        ));
        self.constraints.push(ExConstraint::new(
            format!("menu / {base} / one-hot"),
            &hot - &Coeff::constant(Rational::one()),
            Rel::Eq,
        ));
    }
}

fn bound_degree(p: &ParamPoly, bound: &BTreeSet<Var>) -> u32 {
    p.degree_by(|v| bound.contains(&v))
}

fn all_monomials<'a>(polys: impl Iterator<Item = &'a ParamPoly>) -> BTreeSet<Monomial<Var>> {
    let mut out = BTreeSet::new();
    for p in polys {
        for (m, _) in p.terms() {
            out.insert(m.clone());
        }
    }
    out
}

fn fresh(symbols: &mut Symbols, prefix: &str) -> Unknown {
    let n = symbols.len();
    symbols.fresh(format!("{prefix}{n}"))
}

fn monomial_label(m: &Monomial<Var>) -> String {
    if m.is_one() {
        return "1".into();
    }
    m.powers()
        .iter()
        .map(|(v, e)| if *e == 1 { v.to_string() } else { format!("{v}^{e}") })
        .collect::<Vec<_>>()
        .join("*")
}

/// Farkas reduction of one entailment (premises relaxed to `>= 0`).
pub fn farkas_reduce(e: &Entailment, symbols: &mut Symbols) -> Result<Vec<ExConstraint>, ReduceError> {
    farkas_impl(e, symbols, None)
}

/// Farkas reduction where multipliers of premises with unknown coefficients
/// are restricted to `{0, 1}` and pushed into `binary`. Sound but incomplete;
/// the resulting system is linear whenever the conclusions are.
pub fn farkas_reduce_linear(
    e: &Entailment,
    symbols: &mut Symbols,
    binary: &mut BTreeSet<Unknown>,
) -> Result<Vec<ExConstraint>, ReduceError> {
    farkas_impl(e, symbols, Some(binary))
}

fn farkas_impl(
    e: &Entailment,
    symbols: &mut Symbols,
    mut binary: Option<&mut BTreeSet<Unknown>>,
) -> Result<Vec<ExConstraint>, ReduceError> {
    let bound: BTreeSet<Var> = e.bound_vars.iter().copied().collect();
    let premises: Vec<ParamPoly> = e.premise.iter().map(|c| c.relaxed_nonneg()).collect();
    for p in premises.iter().chain(&e.conclusion) {
        let degree = bound_degree(p, &bound);
        if degree > 1 {
            return Err(ReduceError::Degree {
                label: e.label.clone(),
                degree,
            });
        }
    }
    let mut out = Vec::new();
    for (j, c) in e.conclusion.iter().enumerate() {
        let lams: Vec<Unknown> = premises.iter().map(|_| fresh(symbols, "lam")).collect();
        let mu = fresh(symbols, "mu");
        if let Some(bin) = binary.as_deref_mut() {
            for (a, &l) in premises.iter().zip(&lams) {
                if !a.is_concrete() {
                    bin.insert(l);
                }
            }
        }
        for &l in &lams {
            out.push(ExConstraint::new(
                format!("{} / c{} / {} >= 0", e.label, j + 1, symbols.name(l)),
                Coeff::unknown(l),
                Rel::Ge,
            ));
        }
        out.push(ExConstraint::new(
            format!("{} / c{} / {} >= 0", e.label, j + 1, symbols.name(mu)),
            Coeff::unknown(mu),
            Rel::Ge,
        ));
        // c - sum lam_i a_i - mu == 0, monomial by monomial
        let mut rhs = ParamPoly::constant(Coeff::unknown(mu));
        for (a, &l) in premises.iter().zip(&lams) {
            rhs = &rhs + &a.scale(&Coeff::unknown(l));
        }
        let residual = c - &rhs;
        for m in all_monomials([c, &rhs].into_iter()) {
            let k = residual.coeff(&m);
            out.push(ExConstraint::new(
                format!("{} / c{} / [{}]", e.label, j + 1, monomial_label(&m)),
                k,
                Rel::Eq,
            ));
        }
    }
    Ok(out)
}

/// A sum of `squares` squares of dense parametric polynomials of degree
/// `half` over `vars`. For `half == 0` this is just a nonnegative unknown,
/// pushed to `side` as `s >= 0`, which keeps the system linear in it.
fn parametric_sos(
    vars: &[Var],
    half: u32,
    squares: usize,
    symbols: &mut Symbols,
    side: &mut Vec<ExConstraint>,
) -> ParamPoly {
    if half == 0 {
        let u = fresh(symbols, "s");
        side.push(ExConstraint::new(format!("{} >= 0", symbols.name(u)), Coeff::unknown(u), Rel::Ge));
        return ParamPoly::constant(Coeff::unknown(u));
    }
    let mut sigma = ParamPoly::zero();
    for _ in 0..squares {
        let mut h = ParamPoly::zero();
        for exps in dense_monomials(vars.len(), half) {
            let u = fresh(symbols, "s");
            let m = Monomial::from_powers(vars.iter().copied().zip(exps).collect());
            h.add_term(m, Coeff::unknown(u));
        }
        sigma = &sigma + &(&h * &h);
    }
    sigma
}

/// Putinar-style reduction with SOS multipliers of degree `sos_degree`.
pub fn putinar_reduce(
    e: &Entailment,
    sos_degree: u32,
    squares: usize,
    symbols: &mut Symbols,
) -> Vec<ExConstraint> {
    let bound: BTreeSet<Var> = e.bound_vars.iter().copied().collect();
    let vars: Vec<Var> = e.bound_vars.clone();
    let premises: Vec<ParamPoly> = e.premise.iter().map(|c| c.relaxed_nonneg()).collect();
    let max_premise = premises.iter().map(|a| bound_degree(a, &bound)).max().unwrap_or(0);
    let mut out = Vec::new();
    for (j, c) in e.conclusion.iter().enumerate() {
        let top = bound_degree(c, &bound).max(sos_degree + max_premise);
        let sigma0_half = top.div_ceil(2);
        let mut rhs = parametric_sos(&vars, sigma0_half, squares, symbols, &mut out);
        for a in &premises {
            let s = parametric_sos(&vars, sos_degree / 2, squares, symbols, &mut out);
            rhs = &rhs + &(&s * a);
        }
        let residual = c - &rhs;
        for m in all_monomials([c, &rhs].into_iter()) {
            let k = residual.coeff(&m);
            if k.is_zero() {
                continue;
            }
            out.push(ExConstraint::new(
                format!("{} / c{} / [{}]", e.label, j + 1, monomial_label(&m)),
                k,
                Rel::Eq,
            ));
        }
    }
    out
}

/// Which reduction to use for an entailment.
pub fn is_linear(e: &Entailment) -> bool {
    let bound: BTreeSet<Var> = e.bound_vars.iter().copied().collect();
    e.premise
        .iter()
        .map(|c| &c.poly)
        .chain(&e.conclusion)
        .all(|p| bound_degree(p, &bound) <= 1)
}

/// Reduce a whole entailment list: Farkas where linear, Putinar otherwise.
/// With `linear_multipliers` the Farkas path uses [`farkas_reduce_linear`].
pub fn reduce_all(
    entailments: &[Entailment],
    symbols: Symbols,
    sos_degree: u32,
    squares: usize,
    linear_multipliers: bool,
) -> ExistentialSystem {
    let mut sys = ExistentialSystem::new(symbols);
    for e in entailments {
        if is_linear(e) {
            let cs = if linear_multipliers {
                farkas_reduce_linear(e, &mut sys.symbols, &mut sys.binary)
            } else {
                farkas_reduce(e, &mut sys.symbols)
            }
            .expect("linear entailment");
            sys.constraints.extend(cs);
        } else {
            let cs = putinar_reduce(e, sos_degree, squares, &mut sys.symbols);
            sys.constraints.extend(cs);
        }
    }
    sys
}

/// Polynomial identity check used by tests: does `lhs` equal `rhs` after
/// assigning the unknowns?
pub fn identity_holds(
    lhs: &ParamPoly,
    rhs: &ParamPoly,
    assignment: &BTreeMap<Unknown, Rational>,
) -> bool {
    match (lhs.assign(assignment, None), rhs.assign(assignment, None)) {
        (Ok(a), Ok(b)) => (&a - &b).is_zero(),
        _ => false,
    }
}

/// Concrete polynomial from rationals, for building test entailments.
pub fn concrete(p: &Poly<Var, Rational>) -> ParamPoly {
    ParamPoly::from_rational_poly(p)
}
