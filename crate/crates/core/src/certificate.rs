//! Concrete certificates: the file format, the probability bound they
//! certify, an independent checker of the certificate conditions (a)-(f),
//! and the automaton policy used by the simulator.
//!
//! The checker derives every obligation from the model and the automaton
//! itself. Linear obligations are decided exactly with the rational
//! simplex: a Farkas multiplier vector is the proof, an LP minimiser is the
//! witness. Nonlinear obligations are falsified by sampling over a
//! user-supplied box, or optionally proved through a Putinar system handed
//! to the SMT solver.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::automaton::{Ldba, Letter, StateId};
use crate::constraints::{Entailment, TransitionAssignment};
use crate::expr::{Cmp, ExprParser};
use crate::model::{letter_cells, line_col, toml_error, Constraint, Located, ModelError, SdsModel, MAX_PREDICATES};
use crate::poly::{fmt_rational, rational_from_f64, to_f64, FastPoly, ParamPoly, Poly, Rational, Symbols, Unknown, Var};
use crate::positivstellensatz::{putinar_reduce, ExistentialSystem};
use crate::simplex::{self, LpResult, RowRel};
use crate::smtbridge::{solve_system, Status};
use crate::template::{Encoding, LiveScope, TemplateSpace};
use crate::transcendental::{ceil_to, decimal_floor, exp_enclosure, floor_to};

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: float literal; certificate numbers must be rational strings such as \"5/32\"")]
    Float { line: usize, column: usize },
    #[error("certificate does not match the model or automaton: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl From<ModelError> for CertificateError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parse { line, column, message } => CertificateError::Parse { line, column, message },
            other => CertificateError::Mismatch(other.to_string()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("probability bound needs eta_S <= 0, eps_S > 0 and M_S > 0 (got eta_S = {eta}, eps_S = {eps}, M_S = {m})")]
pub struct DomainError {
    pub eta: String,
    pub eps: String,
    pub m: String,
}

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("condition {0} is nonlinear and needs a sampling box; pass a bounding box for the state variables")]
    NoBoundingBox(String),
    #[error("bounding box has {got} intervals, the model has {want} state variables")]
    BoxDimension { got: usize, want: usize },
    #[error("for-all-noise clauses need a bounded noise support")]
    UnboundedNoise,
    #[error("expectation: {0}")]
    Expectation(String),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

/// The six certificate constants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constants {
    pub eta_s: Rational,
    pub eps_s: Rational,
    pub m_s: Rational,
    pub beta_s: Rational,
    pub eps_l: Rational,
    pub m_l: Rational,
}

/// One resolved nondeterministic choice, by name.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Choice {
    pub state: String,
    pub letter: Vec<String>,
    pub next: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CertificateSolution {
    pub v_safe: BTreeMap<String, ParamPoly>,
    pub v_live: BTreeMap<String, ParamPoly>,
    pub invariant: BTreeMap<String, Vec<ParamPoly>>,
    pub constants: Constants,
    pub controller: Option<BTreeMap<String, Vec<ParamPoly>>>,
    pub assignment_used: Vec<Choice>,
    pub certified_probability: Rational,
}

fn letter_mask(a: &Ldba, names: &[String]) -> Result<Letter, CertificateError> {
    let mut mask = 0;
    for n in names {
        let i = a
            .props
            .iter()
            .position(|p| p == n)
            .ok_or_else(|| CertificateError::Mismatch(format!("unknown proposition `{n}`")))?;
        mask |= 1 << i;
    }
    Ok(mask)
}

fn letter_names(a: &Ldba, letter: Letter) -> Vec<String> {
    a.props
        .iter()
        .enumerate()
        .filter(|(i, _)| letter & (1 << i) != 0)
        .map(|(_, p)| p.clone())
        .collect()
}

impl CertificateSolution {
    /// Instantiate a solved template space.
    pub fn from_solution(
        a: &Ldba,
        ts: &TemplateSpace,
        asg: &TransitionAssignment,
        values: &BTreeMap<Unknown, Rational>,
    ) -> Result<Self, CertificateError> {
        let fix = |p: &ParamPoly| {
            p.assign(values, Some(&ts.symbols))
                .map_err(|e| CertificateError::Mismatch(e.to_string()))
        };
        let value = |u: Unknown| {
            values
                .get(&u)
                .cloned()
                .ok_or_else(|| CertificateError::Mismatch(format!("no value for `{}`", ts.symbols.name(u))))
        };
        let mut v_safe = BTreeMap::new();
        let mut v_live = BTreeMap::new();
        let mut invariant = BTreeMap::new();
        let mut controller = ts.controller.as_ref().map(|_| BTreeMap::new());
        for (q, name) in a.states.iter().enumerate() {
            v_safe.insert(name.clone(), fix(&ts.v_safe[q])?);
            v_live.insert(name.clone(), fix(&ts.v_live[q])?);
            invariant.insert(name.clone(), ts.invariant[q].iter().map(fix).collect::<Result<_, _>>()?);
            if let (Some(out), Some(c)) = (controller.as_mut(), ts.controller.as_ref()) {
                out.insert(name.clone(), c[q].iter().map(fix).collect::<Result<_, _>>()?);
            }
        }
        let k = &ts.constants;
        let constants = Constants {
            eta_s: value(k.eta_s)?,
            eps_s: value(k.eps_s)?,
            m_s: value(k.m_s)?,
            beta_s: value(k.beta_s)?,
            eps_l: value(k.eps_l)?,
            m_l: value(k.m_l)?,
        };
        let bound = probability_bound(&constants.eta_s, &constants.eps_s, &constants.m_s)?;
        let assignment_used = asg
            .choice
            .iter()
            .map(|(&(q, l), &t)| Choice {
                state: a.states[q].clone(),
                letter: letter_names(a, l),
                next: a.states[t].clone(),
            })
            .collect();
        Ok(CertificateSolution {
            v_safe,
            v_live,
            invariant,
            constants,
            controller,
            assignment_used,
            certified_probability: bound.certified(),
        })
    }

    /// The choices as a [`TransitionAssignment`] over `a`.
    pub fn transition_assignment(&self, a: &Ldba) -> Result<TransitionAssignment, CertificateError> {
        let mut out = TransitionAssignment::default();
        for c in &self.assignment_used {
            let q = state_of(a, &c.state)?;
            let t = state_of(a, &c.next)?;
            let l = letter_mask(a, &c.letter)?;
            if !a.successors(q, l).contains(&t) {
                return Err(CertificateError::Mismatch(format!(
                    "`{}` is not a successor of `{}` on {}",
                    c.next,
                    c.state,
                    a.letter_name(l)
                )));
            }
            out.choice.insert((q, l), t);
        }
        Ok(out)
    }

    /// Every automaton state has an entry, with matching controller arity.
    pub fn validate_against(&self, model: &SdsModel, a: &Ldba) -> Result<(), CertificateError> {
        for q in &a.states {
            for (what, has) in [
                ("v_safe", self.v_safe.contains_key(q)),
                ("v_live", self.v_live.contains_key(q)),
                ("invariant", self.invariant.contains_key(q)),
            ] {
                if !has {
                    return Err(CertificateError::Mismatch(format!("no {what} for state `{q}`")));
                }
            }
            if let Some(c) = &self.controller {
                match c.get(q) {
                    Some(ps) if ps.len() == model.input_dim() => {}
                    Some(ps) => {
                        return Err(CertificateError::Mismatch(format!(
                            "controller for `{q}` has {} polynomials, the model has {} inputs",
                            ps.len(),
                            model.input_dim()
                        )))
                    }
                    None => return Err(CertificateError::Mismatch(format!("no controller for state `{q}`"))),
                }
            }
        }
        for q in self.v_safe.keys() {
            if a.state_id(q).is_none() {
                return Err(CertificateError::Mismatch(format!("state `{q}` is not in the automaton")));
            }
        }
        self.transition_assignment(a)?;
        Ok(())
    }

    /// Serialize to the TOML certificate format.
    pub fn render(&self, model: &SdsModel) -> String {
        let q = |s: &str| format!("\"{}\"", s);
        let r = |v: &Rational| q(&fmt_rational(v));
        let poly = |p: &ParamPoly| q(&model.render_poly(p));
        let list = |items: Vec<String>| format!("[{}]", items.join(", "));
        let k = &self.constants;
        let mut out = String::new();
        let _ = writeln!(out, "certified_probability = {}", r(&self.certified_probability));
        out.push_str("\n[constants]\n");
        for (name, v) in [
            ("eta_S", &k.eta_s),
            ("eps_S", &k.eps_s),
            ("M_S", &k.m_s),
            ("beta_S", &k.beta_s),
            ("eps_L", &k.eps_l),
            ("M_L", &k.m_l),
        ] {
            let _ = writeln!(out, "{name} = {}", r(v));
        }
        for (name, vs) in &self.v_safe {
            let _ = writeln!(out, "\n[states.{}]", q(name));
            let _ = writeln!(out, "v_safe = {}", poly(vs));
            if let Some(vl) = self.v_live.get(name) {
                let _ = writeln!(out, "v_live = {}", poly(vl));
            }
            if let Some(inv) = self.invariant.get(name) {
                let _ = writeln!(out, "invariant = {}", list(inv.iter().map(poly).collect()));
            }
            if let Some(c) = self.controller.as_ref().and_then(|c| c.get(name)) {
                let _ = writeln!(out, "controller = {}", list(c.iter().map(poly).collect()));
            }
        }
        for c in &self.assignment_used {
            out.push_str("\n[[assignment]]\n");
            let _ = writeln!(out, "state = {}", q(&c.state));
            let _ = writeln!(out, "letter = {}", list(c.letter.iter().map(|s| q(s)).collect()));
            let _ = writeln!(out, "next = {}", q(&c.next));
        }
        out
    }
}

fn state_of(a: &Ldba, name: &str) -> Result<StateId, CertificateError> {
    a.state_id(name)
        .ok_or_else(|| CertificateError::Mismatch(format!("state `{name}` is not in the automaton")))
}

// ---------------------------------------------------------------------------
// File format.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCertificate {
    certified_probability: Spanned<String>,
    constants: RawConstants,
    states: BTreeMap<String, RawState>,
    #[serde(default)]
    assignment: Vec<RawChoice>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConstants {
    #[serde(rename = "eta_S")]
    eta_s: Spanned<String>,
    #[serde(rename = "eps_S")]
    eps_s: Spanned<String>,
    #[serde(rename = "M_S")]
    m_s: Spanned<String>,
    #[serde(rename = "beta_S")]
    beta_s: Spanned<String>,
    #[serde(rename = "eps_L")]
    eps_l: Spanned<String>,
    #[serde(rename = "M_L")]
    m_l: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    v_safe: Spanned<String>,
    v_live: Spanned<String>,
    #[serde(default)]
    invariant: Vec<Spanned<String>>,
    controller: Option<Vec<Spanned<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChoice {
    state: String,
    #[serde(default)]
    letter: Vec<String>,
    next: String,
}

/// Parse a certificate. Polynomials may only mention the model's state
/// variables; every number must be an exact rational string.
pub fn load_certificate(text: &str, model: &SdsModel) -> Result<CertificateSolution, CertificateError> {
    let raw: RawCertificate = toml::from_str(text).map_err(|e| {
        let (line, column, message) = toml_error(text, &e);
        if message.contains("floating point") {
            CertificateError::Float { line, column }
        } else {
            CertificateError::Parse { line, column, message }
        }
    })?;
    let loc = Located { text };
    let resolve = |n: &str| {
        model
            .state_names
            .iter()
            .position(|s| s == n)
            .map(|i| Var::State(i as u16))
    };
    let parser = ExprParser::new(&resolve).exact_only();
    let poly = |s: &Spanned<String>| parser.parse_poly(s.get_ref()).map_err(|e| loc.err(s, e));
    let rational = |s: &Spanned<String>| loc.rational(s, true);
    let k = &raw.constants;
    let constants = Constants {
        eta_s: rational(&k.eta_s)?,
        eps_s: rational(&k.eps_s)?,
        m_s: rational(&k.m_s)?,
        beta_s: rational(&k.beta_s)?,
        eps_l: rational(&k.eps_l)?,
        m_l: rational(&k.m_l)?,
    };
    let certified_probability = rational(&raw.certified_probability)?;
    let mut v_safe = BTreeMap::new();
    let mut v_live = BTreeMap::new();
    let mut invariant = BTreeMap::new();
    let mut controller = BTreeMap::new();
    let with_controller = raw.states.values().filter(|s| s.controller.is_some()).count();
    if with_controller != 0 && with_controller != raw.states.len() {
        return Err(CertificateError::Mismatch(
            "either every state or no state carries a controller".into(),
        ));
    }
    for (name, s) in &raw.states {
        v_safe.insert(name.clone(), poly(&s.v_safe)?);
        v_live.insert(name.clone(), poly(&s.v_live)?);
        invariant.insert(name.clone(), s.invariant.iter().map(poly).collect::<Result<Vec<_>, _>>()?);
        if let Some(c) = &s.controller {
            controller.insert(name.clone(), c.iter().map(poly).collect::<Result<Vec<_>, _>>()?);
        }
    }
    if certified_probability.is_negative() || certified_probability > Rational::one() {
        let (line, column) = line_col(text, raw.certified_probability.span().start);
        return Err(CertificateError::Parse {
            line,
            column,
            message: "certified_probability must lie in [0, 1]".into(),
        });
    }
    Ok(CertificateSolution {
        v_safe,
        v_live,
        invariant,
        constants,
        controller: (with_controller > 0).then_some(controller),
        assignment_used: raw
            .assignment
            .into_iter()
            .map(|c| Choice {
                state: c.state,
                letter: c.letter,
                next: c.next,
            })
            .collect(),
        certified_probability,
    })
}

// ---------------------------------------------------------------------------
// Probability bound.

/// Enclosure of `1 - exp(8 eta eps / M^2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbabilityBound {
    pub lower: Rational,
    pub upper: Rational,
}

impl ProbabilityBound {
    /// Midpoint rounded to `places` decimals. A bound below 1 is never
    /// shown as 1; it is truncated instead.
    pub fn decimal(&self, places: u32) -> String {
        let mid = (&self.lower + &self.upper) / Rational::from_integer(2.into());
        let half = Rational::new(BigInt::one(), BigInt::from(2) * BigInt::from(10).pow(places));
        let rounded = &mid + half;
        if rounded >= Rational::one() && self.upper < Rational::one() {
            return decimal_floor(&self.lower, places);
        }
        decimal_floor(&rounded, places)
    }

    /// The lower bound rounded down to 12 decimals, the value stored in
    /// certificate files.
    pub fn certified(&self) -> Rational {
        floor_to(&self.lower, &BigInt::from(10).pow(12))
    }
}

pub fn probability_bound(eta: &Rational, eps: &Rational, m: &Rational) -> Result<ProbabilityBound, DomainError> {
    if eta.is_positive() || !eps.is_positive() || !m.is_positive() {
        return Err(DomainError {
            eta: fmt_rational(eta),
            eps: fmt_rational(eps),
            m: fmt_rational(m),
        });
    }
    let t = -(Rational::from_integer(8.into()) * eta * eps) / (m * m);
    if t.is_zero() {
        return Ok(ProbabilityBound {
            lower: Rational::zero(),
            upper: Rational::zero(),
        });
    }
    // e^{-t} lies in [1/hi, 1/lo]
    let (lo, hi) = exp_enclosure(&t, 40);
    let den = BigInt::from(10).pow(45);
    let one = Rational::one();
    Ok(ProbabilityBound {
        lower: floor_to(&(&one - one.clone() / lo), &den),
        upper: ceil_to(&(&one - one.clone() / hi), &den),
    })
}

// ---------------------------------------------------------------------------
// Checker.

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    A,
    B,
    C,
    D,
    E,
    F,
    InputBox,
    Constants,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::A => "(a)",
            Condition::B => "(b)",
            Condition::C => "(c)",
            Condition::D => "(d)",
            Condition::E => "(e)",
            Condition::F => "(f)",
            Condition::InputBox => "(input box)",
            Condition::Constants => "(constants)",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Exact: Farkas multipliers found by the simplex.
    Farkas,
    /// Exact: Putinar system solved and re-validated.
    Putinar,
    /// Falsifier only.
    Sampling,
    /// Direct rational comparison.
    Direct,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Witness {
    pub state: String,
    pub x: Vec<(String, Rational)>,
    pub w: Vec<(String, Rational)>,
    /// Value of the violated `... >= 0` expression.
    pub value: Rational,
    /// Only the closure of a strict premise is violated.
    pub boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConditionResult {
    pub condition: Condition,
    pub label: String,
    pub method: Method,
    pub witness: Option<Witness>,
    pub note: Option<String>,
}

impl ConditionResult {
    pub fn passed(&self) -> bool {
        self.witness.is_none() && self.note.is_none()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub results: Vec<ConditionResult>,
    /// Whether every result comes from an exact method.
    pub exact: bool,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionResult> {
        self.results.iter().filter(|r| !r.passed())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let verdict = match self.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
        };
        let _ = writeln!(out, "verdict: {verdict}");
        let _ = writeln!(out, "path: {}", if self.exact { "exact" } else { "sampling" });
        for r in &self.results {
            let method = match r.method {
                Method::Farkas => "farkas",
                Method::Putinar => "putinar",
                Method::Sampling => "sampling",
                Method::Direct => "direct",
            };
            if r.passed() {
                let _ = writeln!(out, "{} {}: ok [{method}]", r.condition.label(), r.label);
                continue;
            }
            let _ = write!(out, "{} {}: FAIL [{method}]", r.condition.label(), r.label);
            if let Some(w) = &r.witness {
                let pt = |xs: &[(String, Rational)]| {
                    xs.iter()
                        .map(|(n, v)| format!("{n} = {}", fmt_rational(v)))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                let _ = write!(out, " at q = {}, {}", w.state, pt(&w.x));
                if !w.w.is_empty() {
                    let _ = write!(out, ", {}", pt(&w.w));
                }
                let _ = write!(out, ": value {} ({:.6})", fmt_rational(&w.value), to_f64(&w.value));
                if w.boundary {
                    out.push_str(" on the closure of a strict premise");
                }
            }
            if let Some(n) = &r.note {
                let _ = write!(out, " ({n})");
            }
            out.push('\n');
        }
        out
    }
}

/// Optional exact path for nonlinear obligations.
#[derive(Clone, Debug)]
pub struct PutinarCheck {
    pub solver_cmd: String,
    pub sos_degree: u32,
    pub squares: usize,
    pub timeout: Duration,
}

#[derive(Clone, Debug)]
pub struct CheckOptions {
    pub live_scope: LiveScope,
    pub encoding: Encoding,
    /// Sampling box for the state variables; required by nonlinear
    /// obligations.
    pub bounding_box: Option<Vec<(Rational, Rational)>>,
    pub samples: usize,
    pub seed: u64,
    pub putinar: Option<PutinarCheck>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            live_scope: LiveScope::SafeRegion,
            encoding: Encoding::Additive,
            bounding_box: None,
            samples: 100_000,
            seed: 0,
            putinar: None,
        }
    }
}

/// `conclusion >= 0` must hold wherever all premises hold.
#[derive(Clone, Debug)]
struct Obligation {
    condition: Condition,
    state: StateId,
    label: String,
    vars: Vec<Var>,
    premises: Vec<Constraint>,
    conclusion: ParamPoly,
    /// Noise corner substituted into this obligation, if any.
    corner: Vec<(Var, Rational)>,
}

fn nonneg(p: ParamPoly) -> Constraint {
    Constraint::new(p, Cmp::Ge)
}

fn konst(r: &Rational) -> ParamPoly {
    ParamPoly::rational(r.clone())
}

fn corners(b: &[(Var, Rational, Rational)]) -> Vec<Vec<(Var, Rational)>> {
    let mut out = vec![Vec::new()];
    for (v, lo, hi) in b {
        let mut next = Vec::with_capacity(out.len() * 2);
        for c in &out {
            for end in [lo, hi] {
                let mut c2: Vec<(Var, Rational)> = c.clone();
                c2.push((*v, end.clone()));
                next.push(c2);
            }
        }
        out = next;
    }
    out
}

struct Builder<'a> {
    model: &'a SdsModel,
    a: &'a Ldba,
    opts: &'a CheckOptions,
    state_vars: Vec<Var>,
    noise_box: Option<Vec<(Var, Rational, Rational)>>,
    out: Vec<Obligation>,
}

impl Builder<'_> {
    fn push(&mut self, condition: Condition, q: StateId, label: String, premises: &[Constraint], conclusion: ParamPoly) {
        self.out.push(Obligation {
            condition,
            state: q,
            label: format!("{} {label}", self.a.states[q]),
            vars: self.state_vars.clone(),
            premises: premises.to_vec(),
            conclusion,
            corner: Vec::new(),
        });
    }

    /// A clause that must hold for every noise value in the support.
    fn push_forall(
        &mut self,
        condition: Condition,
        q: StateId,
        label: String,
        premises: &[Constraint],
        conclusion: ParamPoly,
    ) -> Result<(), CheckError> {
        let noise: BTreeSet<Var> = conclusion.vars().into_iter().filter(|v| v.is_noise()).collect();
        if noise.is_empty() {
            self.push(condition, q, label, premises, conclusion);
            return Ok(());
        }
        let bx = self.noise_box.clone().ok_or(CheckError::UnboundedNoise)?;
        let used: Vec<(Var, Rational, Rational)> = bx.into_iter().filter(|(v, _, _)| noise.contains(v)).collect();
        let multi_affine = used.iter().all(|(v, _, _)| conclusion.degree_in(*v) <= 1);
        if self.opts.encoding == Encoding::Additive && multi_affine {
            for corner in corners(&used) {
                let bind: BTreeMap<Var, ParamPoly> = corner.iter().map(|(v, r)| (*v, konst(r))).collect();
                let tag = corner
                    .iter()
                    .map(|(v, r)| format!("{}={}", self.model.var_name(*v), fmt_rational(r)))
                    .collect::<Vec<_>>()
                    .join(",");
                self.out.push(Obligation {
                    condition,
                    state: q,
                    label: format!("{} {label} [{tag}]", self.a.states[q]),
                    vars: self.state_vars.clone(),
                    premises: premises.to_vec(),
                    conclusion: conclusion.compose(&bind),
                    corner,
                });
            }
        } else {
            let mut prem = premises.to_vec();
            let mut vars = self.state_vars.clone();
            for (v, lo, hi) in &used {
                let w = ParamPoly::var(*v);
                prem.push(nonneg(&w - &konst(lo)));
                prem.push(nonneg(&konst(hi) - &w));
                vars.push(*v);
            }
            self.out.push(Obligation {
                condition,
                state: q,
                label: format!("{} {label} [all noise]", self.a.states[q]),
                vars,
                premises: prem,
                conclusion,
                corner: Vec::new(),
            });
        }
        Ok(())
    }
}

fn controller_polys(
    model: &SdsModel,
    cert: &CertificateSolution,
    q: &str,
) -> Result<Vec<ParamPoly>, CertificateError> {
    if model.input_dim() == 0 {
        return Ok(Vec::new());
    }
    if let Some(c) = cert.controller.as_ref().and_then(|c| c.get(q)) {
        return Ok(c.clone());
    }
    model
        .controller
        .as_ref()
        .and_then(|c| c.for_state(q))
        .cloned()
        .ok_or_else(|| CertificateError::Mismatch(format!("model has inputs but no controller for state `{q}`")))
}

fn obligations(
    model: &SdsModel,
    a: &Ldba,
    cert: &CertificateSolution,
    opts: &CheckOptions,
) -> Result<Vec<Obligation>, CheckError> {
    cert.validate_against(model, a)?;
    let choices = cert.transition_assignment(a)?;
    let noise_box = model.noise.bounded_support().map(|b| {
        b.into_iter()
            .enumerate()
            .map(|(i, (lo, hi))| (Var::Noise(i as u16), lo, hi))
            .collect()
    });
    let mut b = Builder {
        model,
        a,
        opts,
        state_vars: (0..model.state_dim()).map(|i| Var::State(i as u16)).collect(),
        noise_box,
        out: Vec::new(),
    };
    let k = &cert.constants;
    let name = |q: StateId| a.states[q].as_str();
    let vs = |q: StateId| &cert.v_safe[name(q)];
    let vl = |q: StateId| &cert.v_live[name(q)];
    let inv = |q: StateId| &cert.invariant[name(q)];
    let inv_premises = |q: StateId| -> Vec<Constraint> { inv(q).iter().cloned().map(nonneg).collect() };
    let q0 = a.initial;
    let init = model.init.conjuncts.clone();

    for (j, p) in inv(q0).iter().enumerate() {
        b.push(Condition::A, q0, format!("Init => I_{}", j + 1), &init, p.clone());
    }
    b.push(Condition::B, q0, "Init => eta_S - V_safe".into(), &init, &konst(&k.eta_s) - vs(q0));

    let rejecting = a.rejecting_states();
    for &q in &rejecting {
        b.push(Condition::C, q, "I => V_safe".into(), &inv_premises(q), vs(q).clone());
    }

    let safe = |q: StateId| -> Vec<Constraint> {
        let mut p = inv_premises(q);
        p.push(nonneg(-vs(q)));
        p
    };
    for q in 0..a.states.len() {
        let (prem, what) = match opts.live_scope {
            LiveScope::SafeRegion => (safe(q), "I, V_safe <= 0 => V_live"),
            LiveScope::Invariant => (inv_premises(q), "I => V_live"),
        };
        b.push(Condition::D, q, what.into(), &prem, vl(q).clone());
    }

    let preds = model.predicates_for(&a.props).map_err(CertificateError::from)?;
    let cells = letter_cells(&preds, MAX_PREDICATES).map_err(CertificateError::from)?;
    for q in 0..a.states.len() {
        let pi = controller_polys(model, cert, name(q))?;
        let inputs: BTreeMap<Var, ParamPoly> = pi
            .iter()
            .enumerate()
            .map(|(i, p)| (Var::Input(i as u16), p.clone()))
            .collect();
        for (i, (lo, hi)) in model.input_box.iter().enumerate() {
            let u = &pi[i];
            let tag = model.input_names[i].clone();
            b.push(Condition::InputBox, q, format!("{tag} >= lower"), &safe(q), u - &konst(lo));
            b.push(Condition::InputBox, q, format!("{tag} <= upper"), &safe(q), &konst(hi) - u);
        }
        if rejecting.contains(&q) {
            continue;
        }
        let accepting = a.accepting.contains(&q);
        let cond = if accepting { Condition::F } else { Condition::E };
        for cell in &cells {
            let letter = cell.mask;
            let succ = a.successors(q, letter);
            let t = match choices.choice.get(&(q, letter)) {
                Some(&t) => t,
                None if succ.len() == 1 => *succ.iter().next().unwrap(),
                None => {
                    return Err(CertificateError::Mismatch(format!(
                        "no transition choice for ({}, {})",
                        name(q),
                        a.letter_name(letter)
                    ))
                    .into())
                }
            };
            for (pi_idx, piece) in model.dynamics.pieces.iter().enumerate() {
                let mut prem = safe(q);
                prem.extend(cell.conds.iter().cloned());
                prem.extend(piece.guard.conjuncts.iter().cloned());
                let next: BTreeMap<Var, ParamPoly> = piece
                    .body
                    .iter()
                    .enumerate()
                    .map(|(i, f)| (Var::State(i as u16), f.compose(&inputs)))
                    .collect();
                let tag = format!("{} piece {} -> {}", cell.label(), pi_idx + 1, name(t));
                let expect = |p: &ParamPoly| {
                    p.expect_over_noise(&model.noise)
                        .map_err(|e| CheckError::Expectation(e.to_string()))
                };
                let vs_next = vs(t).compose(&next);
                let vl_next = vl(t).compose(&next);
                let e_vs = expect(&vs_next)?;
                let e_vl = expect(&vl_next)?;
                b.push(
                    cond,
                    q,
                    format!("{tag} / V_safe - E[V_safe'] - eps_S"),
                    &prem,
                    &(vs(q) - &e_vs) - &konst(&k.eps_s),
                );
                if accepting {
                    b.push(cond, q, format!("{tag} / V_live + M_L - E[V_live']"), &prem, &(vl(q) + &konst(&k.m_l)) - &e_vl);
                } else {
                    b.push(cond, q, format!("{tag} / V_live - E[V_live'] - eps_L"), &prem, &(vl(q) - &e_vl) - &konst(&k.eps_l));
                }
                for (j, p) in inv(t).iter().enumerate() {
                    b.push_forall(cond, q, format!("{tag} / I_{}'", j + 1), &prem, p.compose(&next))?;
                }
                let diff = vs(q) - &vs_next;
                b.push_forall(cond, q, format!("{tag} / V_safe - V_safe' - beta_S"), &prem, &diff - &konst(&k.beta_s))?;
                b.push_forall(
                    cond,
                    q,
                    format!("{tag} / beta_S + M_S - (V_safe - V_safe')"),
                    &prem,
                    &(&konst(&k.beta_s) + &konst(&k.m_s)) - &diff,
                )?;
                if opts.live_scope == LiveScope::SafeRegion {
                    b.push_forall(Condition::D, q, format!("{tag} / V_live'"), &prem, vl_next)?;
                }
            }
        }
    }
    Ok(b.out)
}

fn constant_results(cert: &CertificateSolution) -> Vec<ConditionResult> {
    let k = &cert.constants;
    let mut out = Vec::new();
    let mut direct = |label: &str, ok: bool, note: String| {
        out.push(ConditionResult {
            condition: Condition::Constants,
            label: label.into(),
            method: Method::Direct,
            witness: None,
            note: (!ok).then_some(note),
        })
    };
    direct("eta_S <= 0", !k.eta_s.is_positive(), format!("eta_S = {}", fmt_rational(&k.eta_s)));
    for (n, v) in [("eps_S", &k.eps_s), ("M_S", &k.m_s), ("eps_L", &k.eps_l), ("M_L", &k.m_l)] {
        direct(&format!("{n} > 0"), v.is_positive(), format!("{n} = {}", fmt_rational(v)));
    }
    match probability_bound(&k.eta_s, &k.eps_s, &k.m_s) {
        Ok(b) => direct(
            "certified_probability <= bound",
            cert.certified_probability <= b.lower,
            format!(
                "file claims {}, constants give {}",
                fmt_rational(&cert.certified_probability),
                b.decimal(10)
            ),
        ),
        Err(e) => direct("certified_probability <= bound", false, e.to_string()),
    }
    out
}

/// Check every certificate condition.
pub fn check(
    model: &SdsModel,
    a: &Ldba,
    cert: &CertificateSolution,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let obs = obligations(model, a, cert, opts)?;
    if let Some(bx) = &opts.bounding_box {
        if bx.len() != model.state_dim() {
            return Err(CheckError::BoxDimension {
                got: bx.len(),
                want: model.state_dim(),
            });
        }
    }
    let mut results = constant_results(cert);
    let mut exact = true;
    for ob in &obs {
        let r = discharge(model, a, ob, opts)?;
        if r.method == Method::Sampling {
            exact = false;
        }
        results.push(r);
    }
    // stable: within a condition, derivation order
    results.sort_by_key(|r| r.condition);
    let verdict = if results.iter().all(ConditionResult::passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CheckReport { verdict, results, exact })
}

fn is_linear(ob: &Obligation) -> bool {
    let bound: BTreeSet<Var> = ob.vars.iter().copied().collect();
    let deg = |p: &ParamPoly| p.degree_by(|v| bound.contains(&v));
    ob.premises.iter().all(|c| deg(&c.poly) <= 1) && deg(&ob.conclusion) <= 1
}

fn concrete(p: &ParamPoly) -> Poly<Var, Rational> {
    p.to_concrete().expect("certificate polynomials are concrete")
}

/// Coefficients on `vars` and the constant term of an affine polynomial.
fn affine(p: &ParamPoly, vars: &[Var]) -> (Vec<Rational>, Rational) {
    let c = concrete(p);
    let coef = vars.iter().map(|v| c.coeff(&crate::poly::Monomial::var(*v))).collect();
    (coef, c.constant_term())
}

/// Farkas multipliers `(lam, mu) >= 0` with `c = sum lam_i a_i + mu`.
pub fn farkas_certificate(premises: &[ParamPoly], conclusion: &ParamPoly, vars: &[Var]) -> Option<Vec<Rational>> {
    let m = premises.len();
    let rows: Vec<(Vec<Rational>, Rational)> = premises.iter().map(|p| affine(p, vars)).collect();
    let (c, c0) = affine(conclusion, vars);
    let mut mat = Vec::with_capacity(vars.len() + 1);
    let mut rhs = Vec::with_capacity(vars.len() + 1);
    for j in 0..vars.len() {
        let mut row: Vec<Rational> = rows.iter().map(|(a, _)| a[j].clone()).collect();
        row.push(Rational::zero());
        mat.push(row);
        rhs.push(c[j].clone());
    }
    let mut row: Vec<Rational> = rows.iter().map(|(_, a0)| a0.clone()).collect();
    row.push(Rational::one());
    mat.push(row);
    rhs.push(c0);
    simplex::feasible_nonneg(&mat, &rhs, m + 1)
}

/// A point satisfying the premises (strict ones tightened by `delta`) where
/// the conclusion is negative, if one exists.
fn lp_witness(ob: &Obligation, delta: &Rational) -> Option<(Vec<Rational>, Rational)> {
    let rows: Vec<(Vec<Rational>, Rational, RowRel)> = ob
        .premises
        .iter()
        .map(|c| {
            let (a, a0) = affine(&c.relaxed_nonneg(), &ob.vars);
            let strict = matches!(c.cmp, Cmp::Gt | Cmp::Lt);
            (a, if strict { a0 - delta } else { a0 }, RowRel::Ge)
        })
        .collect();
    let (c, c0) = affine(&ob.conclusion, &ob.vars);
    let value_at = |x: &[Rational]| x.iter().zip(&c).fold(c0.clone(), |acc, (xi, ci)| acc + xi * ci);
    match simplex::minimize(&c, &c0, &rows) {
        LpResult::Infeasible => None,
        LpResult::Optimal { point, value } => value.is_negative().then_some((point, value)),
        LpResult::Unbounded { point, ray } => {
            // walk along the ray until the value reaches -1
            let v0 = value_at(&point);
            let slope = value_at(&ray) - &c0;
            let t = ((&v0 + Rational::one()) / -&slope).max(Rational::zero());
            let x: Vec<Rational> = point.iter().zip(&ray).map(|(p, r)| p + &t * r).collect();
            let v = value_at(&x);
            Some((x, v))
        }
    }
}

fn point_map(vars: &[Var], x: &[Rational], corner: &[(Var, Rational)]) -> BTreeMap<Var, Rational> {
    let mut m: BTreeMap<Var, Rational> = vars.iter().copied().zip(x.iter().cloned()).collect();
    m.extend(corner.iter().cloned());
    m
}

fn make_witness(model: &SdsModel, a: &Ldba, ob: &Obligation, point: &BTreeMap<Var, Rational>, value: Rational, boundary: bool) -> Witness {
    let mut x = Vec::new();
    let mut w = Vec::new();
    for (v, r) in point {
        match v {
            Var::State(_) => x.push((model.var_name(*v), r.clone())),
            Var::Noise(_) => w.push((model.var_name(*v), r.clone())),
            Var::Input(_) => {}
        }
    }
    Witness {
        state: a.states[ob.state].clone(),
        x,
        w,
        value,
        boundary,
    }
}

fn result(ob: &Obligation, method: Method, witness: Option<Witness>, note: Option<String>) -> ConditionResult {
    ConditionResult {
        condition: ob.condition,
        label: ob.label.clone(),
        method,
        witness,
        note,
    }
}

fn discharge(model: &SdsModel, a: &Ldba, ob: &Obligation, opts: &CheckOptions) -> Result<ConditionResult, CheckError> {
    if is_linear(ob) {
        let prem: Vec<ParamPoly> = ob.premises.iter().map(Constraint::relaxed_nonneg).collect();
        if farkas_certificate(&prem, &ob.conclusion, &ob.vars).is_some() {
            return Ok(result(ob, Method::Farkas, None, None));
        }
        return Ok(result(ob, Method::Farkas, Some(linear_witness(model, a, ob)), None));
    }
    if let Some(p) = &opts.putinar {
        if putinar_proves(ob, p) {
            return Ok(result(ob, Method::Putinar, None, None));
        }
    }
    let bx = opts
        .bounding_box
        .as_ref()
        .ok_or_else(|| CheckError::NoBoundingBox(format!("{} {}", ob.condition.label(), ob.label)))?;
    let w = sample_witness(model, a, ob, bx, opts.samples, opts.seed);
    Ok(result(ob, Method::Sampling, w, None))
}

fn linear_witness(model: &SdsModel, a: &Ldba, ob: &Obligation) -> Witness {
    // the relaxed minimum is negative; find a point that also satisfies
    // the strict premises
    let mut delta = Rational::one();
    let sixteenth = Rational::new(1.into(), 16.into());
    for _ in 0..12 {
        if let Some((x, v)) = lp_witness(ob, &delta) {
            let pt = point_map(&ob.vars, &x, &ob.corner);
            return make_witness(model, a, ob, &pt, v, false);
        }
        delta *= &sixteenth;
    }
    let (x, v) = lp_witness(ob, &Rational::zero()).expect("Farkas infeasible implies a relaxed witness");
    let pt = point_map(&ob.vars, &x, &ob.corner);
    make_witness(model, a, ob, &pt, v, true)
}

fn putinar_proves(ob: &Obligation, p: &PutinarCheck) -> bool {
    let e = Entailment {
        label: ob.label.clone(),
        bound_vars: ob.vars.clone(),
        premise: ob.premises.clone(),
        conclusion: vec![ob.conclusion.clone()],
    };
    let mut symbols = Symbols::new();
    let constraints = putinar_reduce(&e, p.sos_degree, p.squares, &mut symbols);
    let mut sys = ExistentialSystem::new(symbols);
    sys.constraints = constraints;
    matches!(
        solve_system(&sys, &p.solver_cmd, p.timeout, None),
        Ok(o) if o.status == Status::Sat
    )
}

/// Grid plus uniform random points; candidates found in floating point are
/// confirmed exactly, and the first confirmed one (by sample index) wins.
fn sample_witness(
    model: &SdsModel,
    a: &Ldba,
    ob: &Obligation,
    state_box: &[(Rational, Rational)],
    samples: usize,
    seed: u64,
) -> Option<Witness> {
    let mut ranges: Vec<(f64, f64)> = Vec::new();
    for v in &ob.vars {
        match v {
            Var::State(i) => {
                let (lo, hi) = &state_box[*i as usize];
                ranges.push((to_f64(lo), to_f64(hi)));
            }
            Var::Noise(i) => {
                let (lo, hi) = model.noise.support_box(*i as usize)?;
                ranges.push((to_f64(&lo), to_f64(&hi)));
            }
            Var::Input(_) => ranges.push((0.0, 0.0)),
        }
    }
    let slot_of: BTreeMap<Var, usize> = ob.vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let slot = |v: Var| slot_of.get(&v).copied().unwrap_or(0);
    let prem: Vec<(FastPoly, Cmp)> = ob
        .premises
        .iter()
        .map(|c| (FastPoly::compile(&c.poly, &slot).expect("concrete"), c.cmp))
        .collect();
    let concl = FastPoly::compile(&ob.conclusion, &slot).expect("concrete");
    let k = ob.vars.len();
    let per_dim = if k == 0 { 1 } else { ((10_000f64).powf(1.0 / k as f64).floor() as usize).clamp(2, 101) };
    let grid_count = per_dim.saturating_pow(k as u32).min(1_000_000);
    let total = grid_count + samples;
    let point_at = |idx: usize| -> Vec<f64> {
        if idx < grid_count {
            let mut rest = idx;
            ranges
                .iter()
                .map(|(lo, hi)| {
                    let j = rest % per_dim;
                    rest /= per_dim;
                    lo + (hi - lo) * j as f64 / (per_dim - 1) as f64
                })
                .collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((idx - grid_count) as u64);
            ranges
                .iter()
                .map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                .collect()
        }
    };
    let confirm = |x: &[f64]| -> Option<(BTreeMap<Var, Rational>, Rational)> {
        let exact: Vec<Rational> = x.iter().map(|v| rational_from_f64(*v).unwrap_or_else(Rational::zero)).collect();
        let pt = point_map(&ob.vars, &exact, &ob.corner);
        if !ob.premises.iter().all(|c| c.holds_at(&pt)) {
            return None;
        }
        let v = concrete(&ob.conclusion).eval_with(|v| pt.get(&v).cloned().ok_or(()), |c| Ok::<_, ()>(c.clone())).ok()?;
        v.is_negative().then_some((pt, v))
    };
    let found = (0..total).into_par_iter().find_first(|&idx| {
        let x = point_at(idx);
        let inside = prem.iter().all(|(f, cmp)| {
            let v = f.eval(&x);
            // loose filter; the exact confirmation decides
            match cmp {
                Cmp::Ge | Cmp::Gt => v >= -1e-9,
                Cmp::Le | Cmp::Lt => v <= 1e-9,
            }
        });
        inside && concl.eval(&x) < 1e-9 && confirm(&x).is_some()
    })?;
    let (pt, v) = confirm(&point_at(found))?;
    Some(make_witness(model, a, ob, &pt, v, false))
}

// ---------------------------------------------------------------------------
// Automaton policy.

/// The automaton component of the product policy: inside the safe region
/// `{V_safe < 0}` of a non-rejecting state it follows the certificate's
/// transition choices; elsewhere it takes the smallest-order successor.
#[derive(Clone, Debug)]
pub struct Policy {
    /// `inside[q][letter]` and `outside[q][letter]`.
    pub inside: Vec<Vec<StateId>>,
    pub outside: Vec<Vec<StateId>>,
    v_safe: Vec<FastPoly>,
}

impl Policy {
    pub fn in_safe_region(&self, q: StateId, x: &[f64]) -> bool {
        self.v_safe[q].eval(x) < 0.0
    }

    pub fn next(&self, q: StateId, letter: Letter, x: &[f64]) -> StateId {
        if self.in_safe_region(q, x) {
            self.inside[q][letter as usize]
        } else {
            self.outside[q][letter as usize]
        }
    }

    pub fn v_safe(&self, q: StateId, x: &[f64]) -> f64 {
        self.v_safe[q].eval(x)
    }
}

pub fn extract_policy(cert: &CertificateSolution, a: &Ldba, model: &SdsModel) -> Result<Policy, CertificateError> {
    cert.validate_against(model, a)?;
    let choices = cert.transition_assignment(a)?;
    let rejecting = a.rejecting_states();
    let slot = |v: Var| match v {
        Var::State(i) => i as usize,
        _ => 0,
    };
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut v_safe = Vec::new();
    for q in 0..a.states.len() {
        let smallest: Vec<StateId> = a
            .letters()
            .map(|l| *a.successors(q, l).iter().next().expect("total automaton"))
            .collect();
        let chosen: Vec<StateId> = a
            .letters()
            .map(|l| match choices.choice.get(&(q, l)) {
                Some(&t) if !rejecting.contains(&q) => t,
                _ => smallest[l as usize],
            })
            .collect();
        inside.push(chosen);
        outside.push(smallest);
        let vs = &cert.v_safe[&a.states[q]];
        v_safe.push(
            FastPoly::compile(vs, &slot)
                .ok_or_else(|| CertificateError::Mismatch(format!("V_safe of `{}` is not concrete", a.states[q])))?,
        );
    }
    Ok(Policy { inside, outside, v_safe })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{parse_ldba, shipped};
    use crate::model::load_model;
    use crate::poly::{int, rat};

    const RW: &str = include_str!("../data/models/random_walk.toml");
    const WALK_CERT: &str = include_str!("../data/certificates/walk_gf_a.toml");

    fn setup() -> (SdsModel, Ldba, CertificateSolution) {
        let m = load_model(RW).unwrap();
        let a = parse_ldba(shipped()["GF a"]).unwrap();
        let c = load_certificate(WALK_CERT, &m).unwrap();
        (m, a, c)
    }

    #[test]
    fn hand_certificate_passes_exactly() {
        let (m, a, c) = setup();
        let r = check(&m, &a, &c, &CheckOptions::default()).unwrap();
        assert!(r.passed(), "{}", r.render());
        assert!(r.exact);
        assert!(r.results.iter().any(|x| x.condition == Condition::E));
        assert!(r.results.iter().any(|x| x.condition == Condition::F));
    }

    #[test]
    fn eta_mutation_fails_b_at_three() {
        let (m, a, mut c) = setup();
        c.constants.eta_s = int(-9);
        let r = check(&m, &a, &c, &CheckOptions::default()).unwrap();
        assert!(!r.passed());
        let f: Vec<_> = r.failures().filter(|x| x.witness.is_some()).collect();
        assert_eq!(f.len(), 1, "{}", r.render());
        assert_eq!(f[0].condition, Condition::B);
        let w = f[0].witness.as_ref().unwrap();
        assert_eq!(w.x, vec![("x".to_string(), int(3))]);
        // eta_S - V_safe(3) = -9 + 129/16
        assert_eq!(w.value, rat(-15, 16));
    }

    #[test]
    fn eps_mutation_fails_expected_decrease() {
        let (m, a, mut c) = setup();
        c.constants.eps_s = int(1);
        c.certified_probability = Rational::zero();
        let r = check(&m, &a, &c, &CheckOptions::default()).unwrap();
        assert!(!r.passed());
        let w = r
            .failures()
            .find(|x| x.label.contains("E[V_safe']"))
            .and_then(|x| x.witness.clone())
            .expect("decrease witness");
        // the true decrease is 5/32 everywhere
        assert_eq!(w.value, rat(5, 32) - int(1));
    }

    #[test]
    fn negative_live_fails_d() {
        let (m, a, mut c) = setup();
        c.v_live.insert("q0".into(), ParamPoly::int(-1));
        let r = check(&m, &a, &c, &CheckOptions::default()).unwrap();
        let d = r
            .failures()
            .find(|x| x.condition == Condition::D && x.label.starts_with("q0 I"))
            .expect("condition (d)");
        assert_eq!(d.witness.as_ref().unwrap().value, int(-1));
    }

    #[test]
    fn literal_scope_rejects_hand_certificate() {
        // V_live(q1) = 4747/128 - x/256 is negative for large x in I(q1)
        let (m, a, c) = setup();
        let opts = CheckOptions {
            live_scope: LiveScope::Invariant,
            ..CheckOptions::default()
        };
        let r = check(&m, &a, &c, &opts).unwrap();
        let d = r.failures().find(|x| x.condition == Condition::D).expect("fails");
        let w = d.witness.as_ref().unwrap();
        assert_eq!(w.state, "q1");
        assert!(w.x[0].1 > int(9494));
    }

    #[test]
    fn strict_encoding_agrees() {
        let (m, a, c) = setup();
        let opts = CheckOptions {
            encoding: Encoding::Strict,
            ..CheckOptions::default()
        };
        assert!(check(&m, &a, &c, &opts).unwrap().passed());
    }

    #[test]
    fn round_trip_and_float_rejection() {
        let (m, _, c) = setup();
        let text = c.render(&m);
        assert_eq!(load_certificate(&text, &m).unwrap(), c);
        let bad = WALK_CERT.replace("eps_S = \"5/32\"", "eps_S = 0.15625");
        assert!(matches!(load_certificate(&bad, &m), Err(CertificateError::Float { .. })));
        let bad = WALK_CERT.replace("eps_S = \"5/32\"", "eps_S = \"0.15625\"");
        assert!(matches!(load_certificate(&bad, &m), Err(CertificateError::Parse { .. })));
        let bad = WALK_CERT.replace("v_safe = \"-9 + 5/16*x\"", "v_safe = \"-9 + 5/16*y\"");
        assert!(load_certificate(&bad, &m).is_err());
    }

    #[test]
    fn nonlinear_needs_a_box_and_samples_soundly() {
        let (m, a, mut c) = setup();
        // x^2/1000 added to V_live(q0) keeps (d) true but makes it nonlinear
        let x = ParamPoly::var(Var::State(0));
        let extra = (&x * &x).scale(&crate::poly::Coeff::constant(rat(1, 1000)));
        let vl = &c.v_live["q0"] + &extra;
        c.v_live.insert("q0".into(), vl);
        assert!(matches!(
            check(&m, &a, &c, &CheckOptions::default()),
            Err(CheckError::NoBoundingBox(_))
        ));
        let opts = CheckOptions {
            bounding_box: Some(vec![(int(-200), int(200))]),
            samples: 2000,
            ..CheckOptions::default()
        };
        let r = check(&m, &a, &c, &opts).unwrap();
        assert!(!r.exact);
        // a quadratic that dips below zero inside the safe region
        let bad = &(&x * &x).scale(&crate::poly::Coeff::constant(rat(-1, 10))) + &ParamPoly::int(1);
        c.v_live.insert("q0".into(), bad);
        let r = check(&m, &a, &c, &opts).unwrap();
        let f = r.failures().find(|x| x.condition == Condition::D).expect("falsified");
        let w = f.witness.as_ref().unwrap();
        let xv = &w.x[0].1;
        assert_eq!(rat(-1, 10) * xv * xv + int(1), w.value);
        assert!(w.value.is_negative());
    }

    #[test]
    fn bound_values() {
        let b = probability_bound(&int(-8), &rat(5, 32), &int(1)).unwrap();
        assert_eq!(b.decimal(10), "0.9999546001");
        let b = probability_bound(&int(-1), &rat(1, 8), &int(1)).unwrap();
        assert_eq!(b.decimal(10), "0.6321205588");
        let b = probability_bound(&int(0), &int(3), &int(2)).unwrap();
        assert!(b.lower.is_zero() && b.upper.is_zero());
        assert!(probability_bound(&int(1), &int(1), &int(1)).is_err());
        assert!(probability_bound(&int(-1), &int(0), &int(1)).is_err());
        assert!(probability_bound(&int(-1), &int(1), &int(-1)).is_err());
    }

    #[test]
    fn policy_follows_delta_on_deterministic_automaton() {
        let (m, a, c) = setup();
        let p = extract_policy(&c, &a, &m).unwrap();
        for q in 0..a.states.len() {
            for l in a.letters() {
                let t = *a.successors(q, l).iter().next().unwrap();
                for x in [-5.0, 10.0, 500.0] {
                    assert_eq!(p.next(q, l, &[x]), t);
                }
            }
        }
    }

    #[test]
    fn policy_jumps_inside_safe_region_only() {
        let m = load_model(RW).unwrap();
        let a = parse_ldba(shipped()["FG a"]).unwrap();
        let mut c = load_certificate(WALK_CERT, &m).unwrap();
        for q in ["q2"] {
            c.v_safe.insert(q.into(), c.v_safe["q0"].clone());
            c.v_live.insert(q.into(), c.v_live["q0"].clone());
            c.invariant.insert(q.into(), c.invariant["q0"].clone());
        }
        c.assignment_used = vec![Choice {
            state: "q0".into(),
            letter: vec!["a".into()],
            next: "q1".into(),
        }];
        let p = extract_policy(&c, &a, &m).unwrap();
        // V_safe = -9 + 5x/16 < 0 iff x < 28.8
        assert_eq!(p.next(0, 1, &[-1.0]), 1);
        assert_eq!(p.next(0, 1, &[30.0]), 0);
        assert_eq!(p.next(0, 0, &[-1.0]), 0);
    }
}
