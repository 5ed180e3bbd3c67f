//! Symbolic polynomial templates with unknown coefficients.

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::automaton::Ldba;
use crate::model::SdsModel;
use crate::poly::{fmt_rational, int, rat, Coeff, Monomial, ParamPoly, Rational, Symbols, Unknown, Var};
use crate::positivstellensatz::{Disjunction, ExConstraint, ExistentialSystem, Rel};
use crate::transcendental::{floor_to, ln_enclosure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Verify,
    Control,
}

/// How `for all w` clauses are discharged.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Encoding {
    /// Substitute the corners of the noise support box.
    Additive,
    /// Keep noise variables quantified with support-box premises.
    Strict,
}

/// Where the liveness certificate must be non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiveScope {
    /// On the whole invariant.
    Invariant,
    /// On the invariant intersected with `V_safe <= 0`, plus at every
    /// successor of such a state.
    SafeRegion,
}

/// How the existential system is handed to the solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// Linear restriction first, then the exact system with the time left.
    Portfolio,
    /// Binary multipliers on template premises, a piecewise-linear inner
    /// bound on the probability threshold and a finite controller menu.
    /// Sound, incomplete, and linear for degree-1 verification.
    Linear,
    /// The full nonlinear system.
    Exact,
}

impl Strategy {
    /// Concrete stages to run, in order.
    pub fn stages(self) -> &'static [Strategy] {
        match self {
            Strategy::Portfolio => &[Strategy::Linear, Strategy::Exact],
            Strategy::Linear => &[Strategy::Linear],
            Strategy::Exact => &[Strategy::Exact],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Portfolio => "portfolio",
            Strategy::Linear => "linear",
            Strategy::Exact => "exact",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthesisOptions {
    pub degree: u32,
    pub invariant_count: usize,
    pub probability: Rational,
    pub mode: Mode,
    pub encoding: Encoding,
    /// Degree of the SOS multipliers used when Farkas does not apply.
    pub sos_degree: u32,
    /// Number of parametric squares per SOS multiplier.
    pub sos_squares: usize,
    pub epsilon_floor: Rational,
    pub timeout_secs: u64,
    pub live_scope: LiveScope,
    pub strategy: Strategy,
    /// Grid size for constant controller coefficients under the linear
    /// strategy.
    pub menu_points: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            degree: 1,
            invariant_count: 1,
            probability: rat(9999, 10000),
            mode: Mode::Verify,
            encoding: Encoding::Additive,
            sos_degree: 2,
            sos_squares: 2,
            epsilon_floor: rat(1, 1000),
            timeout_secs: 600,
            live_scope: LiveScope::SafeRegion,
            strategy: Strategy::Portfolio,
            menu_points: 9,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptionsError {
    #[error("template degree must be at least 1")]
    Degree,
    #[error("invariant count must be at least 1")]
    InvariantCount,
    #[error("probability threshold {0} is outside [0, 1]")]
    Probability(String),
    #[error("SOS multiplier degree must be even (got {0})")]
    SosDegree(u32),
    #[error("epsilon floor must be positive")]
    EpsilonFloor,
    #[error("controller menu needs at least 2 points")]
    MenuPoints,
    #[error("control mode needs a model with an input space")]
    NoInputs,
    #[error("verification of a model with inputs needs a controller for every automaton state")]
    NoController,
}

impl SynthesisOptions {
    pub fn validate(&self) -> Result<(), OptionsError> {
        if self.degree < 1 {
            return Err(OptionsError::Degree);
        }
        if self.invariant_count < 1 {
            return Err(OptionsError::InvariantCount);
        }
        if self.probability.is_negative() || self.probability > Rational::one() {
            return Err(OptionsError::Probability(fmt_rational(&self.probability)));
        }
        if self.sos_degree % 2 != 0 {
            return Err(OptionsError::SosDegree(self.sos_degree));
        }
        if !self.epsilon_floor.is_positive() {
            return Err(OptionsError::EpsilonFloor);
        }
        if self.menu_points < 2 {
            return Err(OptionsError::MenuPoints);
        }
        Ok(())
    }
}

/// Unknowns standing for the certificate constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantIds {
    pub eta_s: Unknown,
    pub eps_s: Unknown,
    pub m_s: Unknown,
    pub beta_s: Unknown,
    pub eps_l: Unknown,
    pub m_l: Unknown,
}

#[derive(Clone, Debug)]
pub struct TemplateSpace {
    pub symbols: Symbols,
    /// Indexed by automaton state.
    pub v_safe: Vec<ParamPoly>,
    pub v_live: Vec<ParamPoly>,
    pub invariant: Vec<Vec<ParamPoly>>,
    /// Synthesized controller (control mode), one polynomial per input.
    pub controller: Option<Vec<Vec<ParamPoly>>>,
    pub constants: ConstantIds,
    /// All template unknowns Ω, in allocation order.
    pub unknowns: Vec<Unknown>,
}

impl TemplateSpace {
    pub fn constant(&self, u: Unknown) -> ParamPoly {
        ParamPoly::constant(Coeff::unknown(u))
    }
}

/// Exponent vectors of all monomials of total degree `<= d` in `n`
/// variables, graded then lexicographically decreasing.
pub fn dense_monomials(n: usize, d: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == n {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=left).rev() {
            prefix.push(e);
            rec(n, left - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for t in 0..=d {
        if n == 0 {
            if t == 0 {
                out.push(Vec::new());
            }
            continue;
        }
        rec(n, t, &mut Vec::new(), &mut out);
    }
    out
}

fn monomial_tag(exps: &[u32], names: &[String]) -> String {
    let parts: Vec<String> = exps
        .iter()
        .zip(names)
        .filter(|(e, _)| **e > 0)
        .map(|(e, n)| if *e == 1 { n.clone() } else { format!("{n}^{e}") })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join(".")
    }
}

/// A dense template of degree `d` over the state variables.
pub fn dense_template(
    symbols: &mut Symbols,
    prefix: &str,
    state_names: &[String],
    d: u32,
) -> (ParamPoly, Vec<Unknown>) {
    let mut p = ParamPoly::zero();
    let mut ids = Vec::new();
    for exps in dense_monomials(state_names.len(), d) {
        let u = symbols.fresh(format!("{prefix}_{}", monomial_tag(&exps, state_names)));
        ids.push(u);
        let m = Monomial::from_powers(
            exps.iter()
                .enumerate()
                .map(|(i, &e)| (Var::State(i as u16), e))
                .collect(),
        );
        p.add_term(m, Coeff::unknown(u));
    }
    (p, ids)
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Allocate all templates and constants.
pub fn instantiate(model: &SdsModel, automaton: &Ldba, opts: &SynthesisOptions) -> TemplateSpace {
    let mut symbols = Symbols::new();
    let mut unknowns = Vec::new();
    let (mut v_safe, mut v_live, mut invariant) = (Vec::new(), Vec::new(), Vec::new());
    let mut controller = (opts.mode == Mode::Control).then(Vec::new);
    let names = &model.state_names;
    for q in &automaton.states {
        let tag = sanitize(q);
        let (p, ids) = dense_template(&mut symbols, &format!("vs_{tag}"), names, opts.degree);
        v_safe.push(p);
        unknowns.extend(ids);
        let (p, ids) = dense_template(&mut symbols, &format!("vl_{tag}"), names, opts.degree);
        v_live.push(p);
        unknowns.extend(ids);
        let mut inv = Vec::new();
        for j in 1..=opts.invariant_count {
            let (p, ids) = dense_template(&mut symbols, &format!("inv{j}_{tag}"), names, opts.degree);
            inv.push(p);
            unknowns.extend(ids);
        }
        invariant.push(inv);
        if let Some(ctrl) = controller.as_mut() {
            let mut pis = Vec::new();
            for k in 1..=model.input_dim() {
                let (p, ids) = dense_template(&mut symbols, &format!("pi{k}_{tag}"), names, opts.degree);
                pis.push(p);
                unknowns.extend(ids);
            }
            ctrl.push(pis);
        }
    }
    let mut c = |name: &str| {
        let u = symbols.fresh(name);
        unknowns.push(u);
        u
    };
    let constants = ConstantIds {
        eta_s: c("eta_S"),
        eps_s: c("eps_S"),
        m_s: c("M_S"),
        beta_s: c("beta_S"),
        eps_l: c("eps_L"),
        m_l: c("M_L"),
    };
    TemplateSpace {
        symbols,
        v_safe,
        v_live,
        invariant,
        controller,
        constants,
        unknowns,
    }
}

/// `ln(1 - p)` rounded down to 40 decimals; `None` when `p = 1`.
pub fn ln_one_minus_p_floor(p: &Rational) -> Option<Rational> {
    let q = Rational::one() - p;
    if !q.is_positive() {
        return None;
    }
    if q.is_one() {
        return Some(Rational::zero());
    }
    let (lo, _) = ln_enclosure(&q, 45);
    Some(floor_to(&lo, &num_traits::pow(num_bigint::BigInt::from(10), 40)))
}

/// Sign constraints on the constants and the probability threshold.
pub fn side_constraints(ts: &TemplateSpace, opts: &SynthesisOptions) -> Vec<ExConstraint> {
    let k = &ts.constants;
    let u = |x: Unknown| Coeff::unknown(x);
    let floor = Coeff::constant(opts.epsilon_floor.clone());
    let mut out = vec![ExConstraint::new("side / eta_S <= 0", -u(k.eta_s), Rel::Ge)];
    for (name, id) in [("eps_S", k.eps_s), ("M_S", k.m_s), ("eps_L", k.eps_l), ("M_L", k.m_l)] {
        out.push(ExConstraint::new(
            format!("side / {name} >= floor"),
            &u(id) - &floor,
            Rel::Ge,
        ));
    }
    match ln_one_minus_p_floor(&opts.probability) {
        Some(l) => {
            // M_S^2 * ln(1-p) - 8 eta_S eps_S >= 0
            let lhs = &(&u(k.m_s) * &u(k.m_s)).scale(&l) - &(&u(k.eta_s) * &u(k.eps_s)).scale(&int(8));
            out.push(ExConstraint::new("side / probability threshold", lhs, Rel::Ge));
        }
        None => out.push(ExConstraint::new(
            "side / probability threshold p = 1 is unattainable",
            Coeff::constant(int(-1)),
            Rel::Ge,
        )),
    }
    out
}

/// Smallest decimal with `digits` significant digits not below `r > 0`.
fn round_up_significant(r: &Rational, digits: u32) -> Rational {
    let mut scale = Rational::one();
    let ten = int(10);
    let lo = num_traits::pow(ten.clone(), digits as usize - 1);
    let hi = &lo * &ten;
    let mut v = r.clone();
    while v < lo {
        v *= &ten;
        scale *= &ten;
    }
    while v >= hi {
        v /= &ten;
        scale /= &ten;
    }
    v.ceil() / scale
}

/// Piecewise-linear inner approximation of the threshold: for ratios
/// `r = 2^k`, `eps_S >= r M_S` and `-eta_S >= c_r M_S` with
/// `c_r >= |ln(1-p)| / (8 r)` together imply `M_S^2 ln(1-p) >= 8 eta_S eps_S`.
pub fn threshold_disjunction(ts: &TemplateSpace, l: &Rational) -> Disjunction {
    let k = &ts.constants;
    let u = |x: Unknown| Coeff::unknown(x);
    let mag = -l.clone();
    let branches = (-12i32..=12)
        .map(|e| {
            let r = if e >= 0 {
                Rational::from_integer(num_traits::pow(num_bigint::BigInt::from(2), e as usize))
            } else {
                Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(2), (-e) as usize))
            };
            let c = round_up_significant(&(&mag / (int(8) * &r)), 3);
            vec![
                ExConstraint::new(
                    format!("side / threshold r={}", fmt_rational(&r)),
                    &u(k.eps_s) - &u(k.m_s).scale(&r),
                    Rel::Ge,
                ),
                ExConstraint::new(
                    format!("side / threshold c={}", fmt_rational(&c)),
                    &(-u(k.eta_s)) - &u(k.m_s).scale(&c),
                    Rel::Ge,
                ),
            ]
        })
        .collect();
    Disjunction {
        label: "side / probability threshold (piecewise-linear)".into(),
        branches,
    }
}

/// Add the side constraints to a system, in exact or linear form.
pub fn add_side_constraints(sys: &mut ExistentialSystem, ts: &TemplateSpace, opts: &SynthesisOptions, linear: bool) {
    let all = side_constraints(ts, opts);
    let l = ln_one_minus_p_floor(&opts.probability);
    match l {
        Some(l) if linear => {
            let n = all.len() - 1;
            sys.constraints.extend(all.into_iter().take(n));
            if !l.is_zero() {
                sys.disjunctions.push(threshold_disjunction(ts, &l));
            }
        }
        _ => sys.constraints.extend(all),
    }
}

/// Finite value menu for every controller unknown: a grid over the input
/// box for constant coefficients, zero for the others.
pub fn controller_menu(ts: &TemplateSpace, model: &SdsModel, points: usize) -> Vec<(Unknown, Vec<Rational>)> {
    let mut out = Vec::new();
    let Some(ctrl) = &ts.controller else {
        return out;
    };
    for per_state in ctrl {
        for (k, pi) in per_state.iter().enumerate() {
            let (lo, hi) = &model.input_box[k];
            for (m, c) in pi.terms() {
                let Some(&u) = c.unknowns().iter().next() else { continue };
                let values = if m.is_one() {
                    (0..points)
                        .map(|j| lo + (hi - lo) * Rational::new((j as i64).into(), ((points - 1) as i64).into()))
                        .collect()
                } else {
                    vec![Rational::zero()]
                };
                out.push((u, values));
            }
        }
    }
    out
}
