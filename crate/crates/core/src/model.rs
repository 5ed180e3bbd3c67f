//! Stochastic dynamical systems: spaces, piecewise-polynomial dynamics,
//! initial set, labelling predicates and an optional fixed controller.
//!
//! Models are stored as TOML documents. Polynomials are strings in the
//! infix syntax of [`crate::expr`]; inequalities are written `lhs op rhs`.
//!
//! ```toml
//! [state]
//! vars = ["x"]
//!
//! [noise]
//! vars = ["w"]
//! dims = [{ family = "uniform", lo = "-2", hi = "1" }]
//!
//! [[dynamics]]
//! guard = ["x > 100"]
//! body = ["x"]
//!
//! [[dynamics]]
//! guard = ["x <= 100"]
//! body = ["x + w"]
//!
//! [init]
//! constraints = ["x >= 2", "x <= 3"]
//!
//! [[predicates]]
//! name = "a"
//! expr = "-x"
//! ```

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use crate::dists::{NoiseError, NoiseFamily, NoiseSpec};
use crate::expr::{Cmp, ExprError, ExprParser};
use crate::poly::{fmt_rational, rational_from_f64, to_f64, FastPoly, ParamPoly, Rational, Var};

/// Default cap on the number of predicates (2^k letter cells).
pub const MAX_PREDICATES: usize = 8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("too many predicates: {count} exceeds the maximum of {max}")]
    Capacity { count: usize, max: usize },
}

/// One polynomial inequality `poly op 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub poly: ParamPoly,
    pub cmp: Cmp,
}

impl Constraint {
    pub fn new(poly: ParamPoly, cmp: Cmp) -> Self {
        Constraint { poly, cmp }
    }

    /// Equivalent `p >= 0` form; strict inequalities are relaxed.
    pub fn relaxed_nonneg(&self) -> ParamPoly {
        match self.cmp {
            Cmp::Ge | Cmp::Gt => self.poly.clone(),
            Cmp::Le | Cmp::Lt => -&self.poly,
        }
    }

    pub fn holds_at(&self, point: &BTreeMap<Var, Rational>) -> bool {
        self.poly
            .eval(point, &BTreeMap::new())
            .map(|v| self.cmp.holds(&v))
            .unwrap_or(false)
    }
}

/// Conjunction of polynomial inequalities; empty means the whole space.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SemiAlgebraicSet {
    pub conjuncts: Vec<Constraint>,
}

impl SemiAlgebraicSet {
    pub fn whole() -> Self {
        Self::default()
    }

    pub fn is_whole(&self) -> bool {
        self.conjuncts.is_empty()
    }

    pub fn contains(&self, point: &BTreeMap<Var, Rational>) -> bool {
        self.conjuncts.iter().all(|c| c.holds_at(point))
    }

    /// Per-variable bounds implied by single-variable affine conjuncts.
    pub fn bounding_box(&self, n: usize) -> Vec<(Option<Rational>, Option<Rational>)> {
        let mut out: Vec<(Option<Rational>, Option<Rational>)> = vec![(None, None); n];
        for c in &self.conjuncts {
            let Some(p) = c.poly.to_concrete() else { continue };
            let vars = p.vars();
            if p.degree() != 1 || vars.len() != 1 {
                continue;
            }
            let Some(Var::State(i)) = vars.into_iter().next() else { continue };
            let a = p.coeff(&crate::poly::Monomial::var(Var::State(i)));
            let b = p.constant_term();
            // a*x + b op 0  <=>  x op' -b/a
            let bound = -b / &a;
            let lower = matches!(c.cmp, Cmp::Ge | Cmp::Gt) == a.is_positive();
            let slot = &mut out[i as usize];
            if lower {
                if slot.0.as_ref().map_or(true, |l| bound > *l) {
                    slot.0 = Some(bound);
                }
            } else if slot.1.as_ref().map_or(true, |h| bound < *h) {
                slot.1 = Some(bound);
            }
        }
        out
    }
}

/// Atomic proposition `name`, true at `x` iff `expr(x) >= 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predicate {
    pub name: String,
    pub expr: ParamPoly,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Piece {
    pub guard: SemiAlgebraicSet,
    /// One polynomial per state dimension over x, u, w.
    pub body: Vec<ParamPoly>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PiecewisePolyMap {
    pub pieces: Vec<Piece>,
}

impl PiecewisePolyMap {
    /// First piece whose guard holds at the point.
    pub fn select(&self, point: &BTreeMap<Var, Rational>) -> Option<&Piece> {
        self.pieces.iter().find(|p| p.guard.contains(point))
    }
}

/// Fixed controller: one polynomial per input dimension over the state,
/// optionally overridden per automaton state.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Controller {
    pub default: Option<Vec<ParamPoly>>,
    pub per_state: BTreeMap<String, Vec<ParamPoly>>,
}

impl Controller {
    pub fn for_state(&self, q: &str) -> Option<&Vec<ParamPoly>> {
        self.per_state.get(q).or(self.default.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SdsModel {
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub noise_names: Vec<String>,
    pub input_box: Vec<(Rational, Rational)>,
    pub noise: NoiseSpec,
    pub dynamics: PiecewisePolyMap,
    pub init: SemiAlgebraicSet,
    pub predicates: Vec<Predicate>,
    pub controller: Option<Controller>,
}

/// A sign assignment over predicates realizing one letter of `2^P`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LetterCell {
    /// Bit `i` set iff predicate `i` holds in the cell.
    pub mask: u32,
    pub letter: Vec<String>,
    pub conds: Vec<Constraint>,
}

impl LetterCell {
    pub fn label(&self) -> String {
        format!("cell{{{}}}", self.letter.join(","))
    }
}

/// Enumerate the `2^|P|` letter cells of a predicate list.
pub fn letter_cells(predicates: &[Predicate], max: usize) -> Result<Vec<LetterCell>, ModelError> {
    if predicates.len() > max {
        return Err(ModelError::Capacity {
            count: predicates.len(),
            max,
        });
    }
    let k = predicates.len();
    Ok((0..(1u32 << k))
        .map(|mask| {
            let mut letter = Vec::new();
            let mut conds = Vec::new();
            for (i, p) in predicates.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    letter.push(p.name.clone());
                    conds.push(Constraint::new(p.expr.clone(), Cmp::Ge));
                } else {
                    conds.push(Constraint::new(p.expr.clone(), Cmp::Lt));
                }
            }
            LetterCell {
                mask,
                letter,
                conds,
            }
        })
        .collect())
}

impl SdsModel {
    pub fn state_dim(&self) -> usize {
        self.state_names.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_names.len()
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_names.len()
    }

    pub fn var_name(&self, v: Var) -> String {
        match v {
            Var::State(i) => self.state_names[i as usize].clone(),
            Var::Input(i) => self.input_names[i as usize].clone(),
            Var::Noise(i) => self.noise_names[i as usize].clone(),
        }
    }

    pub fn resolve(&self, name: &str) -> Option<Var> {
        lookup(&self.state_names, name)
            .map(Var::State)
            .or_else(|| lookup(&self.input_names, name).map(Var::Input))
            .or_else(|| lookup(&self.noise_names, name).map(Var::Noise))
    }

    pub fn render_poly(&self, p: &ParamPoly) -> String {
        p.render(&|v| self.var_name(v), None)
    }

    pub fn predicate(&self, name: &str) -> Option<&Predicate> {
        self.predicates.iter().find(|p| p.name == name)
    }

    /// Predicates for a list of proposition names, in that order.
    pub fn predicates_for(&self, props: &[String]) -> Result<Vec<Predicate>, ModelError> {
        props
            .iter()
            .map(|n| {
                self.predicate(n)
                    .cloned()
                    .ok_or_else(|| ModelError::Invalid(format!("automaton proposition `{n}` has no predicate in the model")))
            })
            .collect()
    }

    /// Sample `samples` points in a box and report states covered by no
    /// dynamics piece. Guard coverage is the modeller's responsibility, so
    /// the result is a list of warnings.
    pub fn coverage_warnings(&self, samples: usize, seed: u64) -> Vec<String> {
        let n = self.state_dim();
        let mut radius = 1000.0f64;
        for piece in &self.dynamics.pieces {
            for c in &piece.guard.conjuncts {
                for (_, k) in c.poly.terms() {
                    if let Some(r) = k.as_constant() {
                        radius = radius.max(2.0 * to_f64(&r).abs());
                    }
                }
            }
        }
        let slot = |v: Var| match v {
            Var::State(i) => i as usize,
            _ => 0,
        };
        let guards: Vec<Vec<(FastPoly, Cmp)>> = self
            .dynamics
            .pieces
            .iter()
            .map(|p| {
                p.guard
                    .conjuncts
                    .iter()
                    .filter_map(|c| FastPoly::compile(&c.poly, &slot).map(|f| (f, c.cmp)))
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uncovered = 0usize;
        let mut example: Option<Vec<f64>> = None;
        let mut point = vec![0.0; n.max(1)];
        for _ in 0..samples {
            for v in point.iter_mut().take(n) {
                *v = rng.gen_range(-radius..=radius);
            }
            let covered = guards
                .iter()
                .any(|g| g.iter().all(|(f, cmp)| cmp.holds_f64(f.eval(&point))));
            if !covered {
                uncovered += 1;
                example.get_or_insert_with(|| point[..n].to_vec());
            }
        }
        match example {
            Some(pt) => vec![format!(
                "dynamics guards do not cover {uncovered} of {samples} sampled states (e.g. {:?})",
                pt
            )],
            None => Vec::new(),
        }
    }

    /// Input-space box as constraints over the input variables.
    pub fn input_constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        for (i, (lo, hi)) in self.input_box.iter().enumerate() {
            let u = ParamPoly::var(Var::Input(i as u16));
            out.push(Constraint::new(&u - &ParamPoly::rational(lo.clone()), Cmp::Ge));
            out.push(Constraint::new(&ParamPoly::rational(hi.clone()) - &u, Cmp::Ge));
        }
        out
    }

    /// Serialize back to the TOML model format.
    pub fn render(&self) -> String {
        let q = |s: &str| format!("\"{}\"", s);
        let list = |items: Vec<String>| format!("[{}]", items.join(", "));
        let poly = |p: &ParamPoly| q(&self.render_poly(p));
        let cons = |c: &Constraint| q(&format!("{} {} 0", self.render_poly(&c.poly), c.cmp));
        let mut out = String::new();
        out.push_str("[state]\n");
        out.push_str(&format!(
            "vars = {}\n",
            list(self.state_names.iter().map(|s| q(s)).collect())
        ));
        if !self.input_names.is_empty() {
            out.push_str("\n[input]\n");
            out.push_str(&format!(
                "vars = {}\n",
                list(self.input_names.iter().map(|s| q(s)).collect())
            ));
            out.push_str(&format!(
                "bounds = {}\n",
                list(
                    self.input_box
                        .iter()
                        .map(|(l, h)| list(vec![q(&fmt_rational(l)), q(&fmt_rational(h))]))
                        .collect()
                )
            ));
        }
        if !self.noise_names.is_empty() {
            out.push_str("\n[noise]\n");
            out.push_str(&format!(
                "vars = {}\n",
                list(self.noise_names.iter().map(|s| q(s)).collect())
            ));
            let dims: Vec<String> = self
                .noise
                .families()
                .iter()
                .enumerate()
                .map(|(d, f)| {
                    let mut s = match f {
                        NoiseFamily::Uniform { lo, hi } => format!(
                            "{{ family = \"uniform\", lo = {}, hi = {}",
                            q(&fmt_rational(lo)),
                            q(&fmt_rational(hi))
                        ),
                        NoiseFamily::PointMass(v) => {
                            format!("{{ family = \"point\", value = {}", q(&fmt_rational(v)))
                        }
                        NoiseFamily::Moments(ms) => format!(
                            "{{ family = \"moments\", moments = {}",
                            list(ms.iter().map(|m| q(&fmt_rational(m))).collect())
                        ),
                    };
                    if let Some((lo, hi)) = self.noise.explicit_support(d) {
                        s.push_str(&format!(
                            ", support = [{}, {}]",
                            q(&fmt_rational(lo)),
                            q(&fmt_rational(hi))
                        ));
                    }
                    s.push_str(" }");
                    s
                })
                .collect();
            out.push_str(&format!("dims = {}\n", list(dims)));
        }
        for piece in &self.dynamics.pieces {
            out.push_str("\n[[dynamics]]\n");
            out.push_str(&format!(
                "guard = {}\n",
                list(piece.guard.conjuncts.iter().map(cons).collect())
            ));
            out.push_str(&format!("body = {}\n", list(piece.body.iter().map(poly).collect())));
        }
        out.push_str("\n[init]\n");
        out.push_str(&format!(
            "constraints = {}\n",
            list(self.init.conjuncts.iter().map(cons).collect())
        ));
        for p in &self.predicates {
            out.push_str("\n[[predicates]]\n");
            out.push_str(&format!("name = {}\nexpr = {}\n", q(&p.name), poly(&p.expr)));
        }
        if let Some(ctrl) = &self.controller {
            out.push_str("\n[controller]\n");
            if let Some(d) = &ctrl.default {
                out.push_str(&format!("default = {}\n", list(d.iter().map(poly).collect())));
            }
            if !ctrl.per_state.is_empty() {
                out.push_str("\n[controller.states]\n");
                for (name, ps) in &ctrl.per_state {
                    out.push_str(&format!("{} = {}\n", q(name), list(ps.iter().map(poly).collect())));
                }
            }
        }
        out
    }
}

fn lookup(names: &[String], name: &str) -> Option<u16> {
    names.iter().position(|n| n == name).map(|i| i as u16)
}

// ---------------------------------------------------------------------------
// File format.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    state: RawVars,
    input: Option<RawInput>,
    noise: Option<RawNoise>,
    #[serde(default)]
    dynamics: Vec<RawPiece>,
    init: Option<RawSet>,
    #[serde(default)]
    predicates: Vec<RawPredicate>,
    controller: Option<RawController>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVars {
    vars: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    vars: Vec<String>,
    bounds: Vec<[Spanned<String>; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    vars: Vec<String>,
    dims: Vec<RawNoiseDim>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoiseDim {
    family: String,
    lo: Option<Spanned<String>>,
    hi: Option<Spanned<String>>,
    value: Option<Spanned<String>>,
    moments: Option<Vec<Spanned<String>>>,
    support: Option<[Spanned<String>; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiece {
    #[serde(default)]
    guard: Vec<Spanned<String>>,
    body: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSet {
    #[serde(default)]
    constraints: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPredicate {
    name: String,
    expr: Spanned<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawController {
    default: Option<Vec<Spanned<String>>>,
    #[serde(default)]
    states: BTreeMap<String, Vec<Spanned<String>>>,
}

/// Line and column (1-based) of a byte offset.
pub(crate) fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let upto = &text[..offset.min(text.len())];
    let line = upto.matches('\n').count() + 1;
    let col = upto.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

pub(crate) fn toml_error(text: &str, e: &toml::de::Error) -> (usize, usize, String) {
    let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((1, 1));
    (line, column, e.message().to_string())
}

/// Parsing context mapping spanned strings to located errors.
pub(crate) struct Located<'t> {
    pub text: &'t str,
}

impl<'t> Located<'t> {
    pub fn err(&self, s: &Spanned<String>, e: ExprError) -> ModelError {
        // +1 skips the opening quote of the TOML string
        let (line, column) = line_col(self.text, s.span().start + 1 + e.column.saturating_sub(1));
        ModelError::Parse {
            line,
            column,
            message: e.message,
        }
    }

    pub fn at(&self, s: &Spanned<String>, message: impl Into<String>) -> ModelError {
        let (line, column) = line_col(self.text, s.span().start);
        ModelError::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn rational(&self, s: &Spanned<String>, exact_only: bool) -> Result<Rational, ModelError> {
        let none = |_: &str| None;
        let parser = ExprParser::new(&none);
        let parser = if exact_only { parser.exact_only() } else { parser };
        let p = parser.parse_poly(s.get_ref()).map_err(|e| self.err(s, e))?;
        match p.to_concrete() {
            Some(c) if c.is_constant() => Ok(c.constant_term()),
            _ => Err(self.at(s, "expected a rational constant")),
        }
    }
}

/// Parse and validate a model document.
pub fn load_model(text: &str) -> Result<SdsModel, ModelError> {
    let raw: RawModel = toml::from_str(text).map_err(|e| {
        let (line, column, message) = toml_error(text, &e);
        ModelError::Parse {
            line,
            column,
            message,
        }
    })?;
    let loc = Located { text };

    let state_names = raw.state.vars;
    if state_names.is_empty() {
        return Err(ModelError::Invalid("state space needs at least one variable".into()));
    }
    let (input_names, input_box) = match raw.input {
        Some(inp) => {
            if inp.vars.len() != inp.bounds.len() {
                return Err(ModelError::Dimension(format!(
                    "{} input variables but {} bounds",
                    inp.vars.len(),
                    inp.bounds.len()
                )));
            }
            let mut bx = Vec::new();
            for [lo, hi] in &inp.bounds {
                let (l, h) = (loc.rational(lo, false)?, loc.rational(hi, false)?);
                if l > h {
                    return Err(loc.at(lo, format!("empty input interval [{l}, {h}]")));
                }
                bx.push((l, h));
            }
            (inp.vars, bx)
        }
        None => (Vec::new(), Vec::new()),
    };
    let (noise_names, noise) = match raw.noise {
        Some(nz) => {
            if nz.vars.len() != nz.dims.len() {
                return Err(ModelError::Dimension(format!(
                    "{} noise variables but {} distributions",
                    nz.vars.len(),
                    nz.dims.len()
                )));
            }
            let mut fams = Vec::new();
            let mut support = Vec::new();
            for d in &nz.dims {
                let need = |f: &Option<Spanned<String>>, key: &str| {
                    f.as_ref()
                        .ok_or_else(|| ModelError::Invalid(format!("{} noise needs `{key}`", d.family)))
                        .and_then(|s| loc.rational(s, false))
                };
                let fam = match d.family.as_str() {
                    "uniform" => NoiseFamily::Uniform {
                        lo: need(&d.lo, "lo")?,
                        hi: need(&d.hi, "hi")?,
                    },
                    "point" => NoiseFamily::PointMass(need(&d.value, "value")?),
                    "moments" => NoiseFamily::Moments(
                        d.moments
                            .as_ref()
                            .ok_or_else(|| ModelError::Invalid("moments noise needs `moments`".into()))?
                            .iter()
                            .map(|m| loc.rational(m, false))
                            .collect::<Result<_, _>>()?,
                    ),
                    other => {
                        return Err(ModelError::Invalid(format!(
                            "unknown noise family `{other}` (expected uniform, point or moments)"
                        )))
                    }
                };
                fams.push(fam);
                support.push(match &d.support {
                    Some([lo, hi]) => Some((loc.rational(lo, false)?, loc.rational(hi, false)?)),
                    None => None,
                });
            }
            (nz.vars, NoiseSpec::with_support(fams, support)?)
        }
        None => (Vec::new(), NoiseSpec::none()),
    };

    let mut seen = std::collections::BTreeSet::new();
    for n in state_names.iter().chain(&input_names).chain(&noise_names) {
        if !seen.insert(n.clone()) {
            return Err(ModelError::Invalid(format!("variable `{n}` declared twice")));
        }
    }

    let mut model = SdsModel {
        state_names,
        input_names,
        noise_names,
        input_box,
        noise,
        dynamics: PiecewisePolyMap::default(),
        init: SemiAlgebraicSet::whole(),
        predicates: Vec::new(),
        controller: None,
    };
    let n = model.state_dim();

    let all = |name: &str| model.resolve(name);
    let state_only = |name: &str| model.resolve(name).filter(|v| matches!(v, Var::State(_)));
    let body_parser = ExprParser::new(&all);
    let state_parser = ExprParser::new(&state_only);
    let ineqs = |items: &[Spanned<String>]| -> Result<SemiAlgebraicSet, ModelError> {
        let mut conjuncts = Vec::new();
        for s in items {
            let (p, cmp) = state_parser.parse_ineq(s.get_ref()).map_err(|e| loc.err(s, e))?;
            conjuncts.push(Constraint::new(p, cmp));
        }
        Ok(SemiAlgebraicSet { conjuncts })
    };

    let mut pieces = Vec::new();
    for rp in &raw.dynamics {
        if rp.body.len() != n {
            return Err(ModelError::Dimension(format!(
                "dynamics piece has {} body components, state dimension is {n}",
                rp.body.len()
            )));
        }
        let guard = ineqs(&rp.guard)?;
        let body = rp
            .body
            .iter()
            .map(|s| body_parser.parse_poly(s.get_ref()).map_err(|e| loc.err(s, e)))
            .collect::<Result<Vec<_>, _>>()?;
        pieces.push(Piece { guard, body });
    }
    if pieces.is_empty() {
        // identity dynamics
        pieces.push(Piece {
            guard: SemiAlgebraicSet::whole(),
            body: (0..n).map(|i| ParamPoly::var(Var::State(i as u16))).collect(),
        });
    }
    let init = match &raw.init {
        Some(s) => ineqs(&s.constraints)?,
        None => SemiAlgebraicSet::whole(),
    };
    let mut predicates = Vec::new();
    for rp in &raw.predicates {
        if predicates.iter().any(|p: &Predicate| p.name == rp.name) {
            return Err(ModelError::Invalid(format!("predicate `{}` declared twice", rp.name)));
        }
        let expr = state_parser
            .parse_poly(rp.expr.get_ref())
            .map_err(|e| loc.err(&rp.expr, e))?;
        predicates.push(Predicate {
            name: rp.name.clone(),
            expr,
        });
    }
    let controller = match &raw.controller {
        Some(rc) => {
            let m = model.input_dim();
            let parse_vec = |v: &Vec<Spanned<String>>| -> Result<Vec<ParamPoly>, ModelError> {
                if v.len() != m {
                    return Err(ModelError::Dimension(format!(
                        "controller has {} components, input dimension is {m}",
                        v.len()
                    )));
                }
                v.iter()
                    .map(|s| state_parser.parse_poly(s.get_ref()).map_err(|e| loc.err(s, e)))
                    .collect()
            };
            Some(Controller {
                default: rc.default.as_ref().map(parse_vec).transpose()?,
                per_state: rc
                    .states
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), parse_vec(v)?)))
                    .collect::<Result<_, ModelError>>()?,
            })
        }
        None => None,
    };
    model.dynamics = PiecewisePolyMap { pieces };
    model.init = init;
    model.predicates = predicates;
    model.controller = controller;
    Ok(model)
}

/// Convert an `f64` sample into exact variable bindings.
pub fn exact_point(values: &[(Var, f64)]) -> BTreeMap<Var, Rational> {
    values
        .iter()
        .filter_map(|&(v, x)| rational_from_f64(x).map(|r| (v, r)))
        .collect()
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} 0", self.poly, self.cmp)
    }
}

/// True when a rational interval is degenerate.
pub fn is_point(lo: &Rational, hi: &Rational) -> bool {
    (hi - lo).is_zero()
}
