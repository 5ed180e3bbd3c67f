//! Quantified polynomial entailments for the certificate conditions.
//!
//! Each entailment reads `forall x (, w). premise => conclusion` with every
//! conclusion of the form `p >= 0`. Expectations are eliminated with noise
//! moments; the choice of letter becomes a case split over letter cells and
//! the choice of successor is fixed by a [`TransitionAssignment`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::automaton::{Ldba, Letter, StateId};
use crate::expr::Cmp;
use crate::model::{letter_cells, Constraint, LetterCell, ModelError, SdsModel, MAX_PREDICATES};
use crate::poly::{Coeff, ParamPoly, PolyError, Rational, Unknown, Var};
use crate::template::{Encoding, LiveScope, Mode, SynthesisOptions, TemplateSpace};

/// Default cap on the number of transition assignments.
pub const MAX_ASSIGNMENTS: usize = 256;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("encoding error: {0}")]
    Encoding(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("{count} transition assignments exceed the cap of {cap}; restrict the nondeterministic choices in the automaton")]
    Capacity { count: usize, cap: usize },
    #[error("no controller for automaton state `{0}`")]
    NoController(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entailment {
    pub label: String,
    pub bound_vars: Vec<Var>,
    pub premise: Vec<Constraint>,
    /// Every entry must be non-negative.
    pub conclusion: Vec<ParamPoly>,
}

/// One fixed successor per nondeterministic `(state, letter)` pair.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TransitionAssignment {
    pub choice: BTreeMap<(StateId, Letter), StateId>,
}

impl TransitionAssignment {
    /// The successor used for `(q, letter)`: the chosen one, or the unique
    /// (else smallest-order) successor.
    pub fn successor(&self, a: &Ldba, q: StateId, letter: Letter) -> StateId {
        self.choice
            .get(&(q, letter))
            .copied()
            .unwrap_or_else(|| *a.successors(q, letter).iter().next().expect("total automaton"))
    }

    /// Short identifier usable in file names.
    pub fn tag(&self, a: &Ldba) -> String {
        if self.choice.is_empty() {
            return "deterministic".into();
        }
        self.choice
            .iter()
            .map(|(&(q, l), &t)| format!("{}-{}-{}", a.states[q], l, a.states[t]))
            .collect::<Vec<_>>()
            .join("_")
    }

    pub fn describe(&self, a: &Ldba) -> String {
        if self.choice.is_empty() {
            return "(deterministic)".into();
        }
        self.choice
            .iter()
            .map(|(&(q, l), &t)| format!("{} --{}--> {}", a.states[q], a.letter_name(l), a.states[t]))
            .collect::<Vec<_>>()
            .join("; ")
    }
}

/// Cartesian product of successor choices over all nondeterministic
/// `(state, letter)` pairs, lexicographic in state order.
pub fn enumerate_assignments(a: &Ldba, cap: usize) -> Result<Vec<TransitionAssignment>, GenerateError> {
    let mut pairs: Vec<((StateId, Letter), Vec<StateId>)> = Vec::new();
    for q in 0..a.states.len() {
        for l in a.letters() {
            let succ = a.successors(q, l);
            if succ.len() > 1 {
                pairs.push(((q, l), succ.iter().copied().collect()));
            }
        }
    }
    let mut count: usize = 1;
    for (_, choices) in &pairs {
        count = count.saturating_mul(choices.len());
    }
    if count > cap {
        return Err(GenerateError::Capacity { count, cap });
    }
    let mut out = vec![TransitionAssignment::default()];
    for (key, choices) in &pairs {
        let mut next = Vec::with_capacity(out.len() * choices.len());
        for base in &out {
            for &c in choices {
                let mut t = base.clone();
                t.choice.insert(*key, c);
                next.push(t);
            }
        }
        out = next;
    }
    Ok(out)
}

/// Clauses of SafetyCond plus the liveness clause for one transition,
/// split by whether they still mention the noise.
#[derive(Clone, Debug, Default)]
pub struct TransitionClauses {
    pub expectation: Vec<ParamPoly>,
    pub forall_noise: Vec<ParamPoly>,
}

/// Controller polynomials for state `q`, or none for uncontrolled models.
pub fn controller_for(
    model: &SdsModel,
    a: &Ldba,
    ts: &TemplateSpace,
    mode: Mode,
    q: StateId,
) -> Result<Vec<ParamPoly>, GenerateError> {
    if model.input_dim() == 0 {
        return Ok(Vec::new());
    }
    if mode == Mode::Control {
        if let Some(c) = &ts.controller {
            return Ok(c[q].clone());
        }
    }
    model
        .controller
        .as_ref()
        .and_then(|c| c.for_state(&a.states[q]))
        .cloned()
        .ok_or_else(|| GenerateError::NoController(a.states[q].clone()))
}

/// `f(x, pi(x), w)` for one dynamics piece.
pub fn closed_loop(body: &[ParamPoly], pi: &[ParamPoly]) -> BTreeMap<Var, ParamPoly> {
    let inputs: BTreeMap<Var, ParamPoly> = pi
        .iter()
        .enumerate()
        .map(|(k, p)| (Var::Input(k as u16), p.clone()))
        .collect();
    body.iter()
        .enumerate()
        .map(|(i, f)| (Var::State(i as u16), f.compose(&inputs)))
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn transition_clauses(
    q: StateId,
    q_next: StateId,
    accepting: bool,
    next_state: &BTreeMap<Var, ParamPoly>,
    ts: &TemplateSpace,
    model: &SdsModel,
    opts: &SynthesisOptions,
) -> Result<TransitionClauses, GenerateError> {
    let k = &ts.constants;
    let vs = &ts.v_safe[q];
    let vs_next = ts.v_safe[q_next].compose(next_state);
    let vl_next = ts.v_live[q_next].compose(next_state);
    let mut out = TransitionClauses::default();
    for inv in &ts.invariant[q_next] {
        out.forall_noise.push(inv.compose(next_state));
    }
    let e_vs = vs_next.expect_over_noise(&model.noise)?;
    out.expectation.push(&(vs - &e_vs) - &ts.constant(k.eps_s));
    let diff = vs - &vs_next;
    out.forall_noise.push(&diff - &ts.constant(k.beta_s));
    out.forall_noise
        .push(&(&ts.constant(k.beta_s) + &ts.constant(k.m_s)) - &diff);
    let e_vl = vl_next.expect_over_noise(&model.noise)?;
    let live = if accepting {
        &(&ts.v_live[q] + &ts.constant(k.m_l)) - &e_vl
    } else {
        &(&ts.v_live[q] - &e_vl) - &ts.constant(k.eps_l)
    };
    out.expectation.push(live);
    if opts.live_scope == LiveScope::SafeRegion {
        out.forall_noise.push(vl_next);
    }
    Ok(out)
}

fn noise_vars(model: &SdsModel) -> Vec<Var> {
    (0..model.noise_dim()).map(|i| Var::Noise(i as u16)).collect()
}

/// Replace noise by every corner of its support box. Only valid when each
/// clause is affine in every single noise variable.
pub fn corner_substitution(
    clauses: &[ParamPoly],
    model: &SdsModel,
) -> Result<Vec<ParamPoly>, GenerateError> {
    let used: BTreeSet<Var> = clauses
        .iter()
        .flat_map(|c| c.vars())
        .filter(|v| v.is_noise())
        .collect();
    if used.is_empty() {
        return Ok(clauses.to_vec());
    }
    let Some(support) = model.noise.bounded_support() else {
        return Err(GenerateError::Encoding(
            "noise has no bounded support; declare a support box or use the strict encoding".into(),
        ));
    };
    for c in clauses {
        for &v in &used {
            if c.degree_in(v) > 1 {
                return Err(GenerateError::Encoding(format!(
                    "composed certificate has degree {} in noise variable {}; use the strict encoding",
                    c.degree_in(v),
                    model.var_name(v)
                )));
            }
        }
    }
    let used: Vec<Var> = used.into_iter().collect();
    let mut out = Vec::new();
    for corner in 0..(1usize << used.len()) {
        let bind: BTreeMap<Var, ParamPoly> = used
            .iter()
            .enumerate()
            .map(|(j, &v)| {
                let Var::Noise(i) = v else { unreachable!() };
                let (lo, hi) = &support[i as usize];
                let val = if corner & (1 << j) == 0 { lo } else { hi };
                (v, ParamPoly::rational(val.clone()))
            })
            .collect();
        for c in clauses {
            let s = c.compose(&bind);
            if !out.contains(&s) {
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Support-box premises `lo <= w_i <= hi` for every noise dimension.
pub fn noise_box_premises(model: &SdsModel) -> Result<Vec<Constraint>, GenerateError> {
    let support = model.noise.bounded_support().ok_or_else(|| {
        GenerateError::Encoding("universally quantified noise needs a bounded support box".into())
    })?;
    let mut out = Vec::new();
    for (i, (lo, hi)) in support.iter().enumerate() {
        let w = ParamPoly::var(Var::Noise(i as u16));
        out.push(Constraint::new(&w - &ParamPoly::rational(lo.clone()), Cmp::Ge));
        out.push(Constraint::new(&ParamPoly::rational(hi.clone()) - &w, Cmp::Ge));
    }
    Ok(out)
}

fn nonneg(p: &ParamPoly) -> Constraint {
    Constraint::new(p.clone(), Cmp::Ge)
}

fn state_vars(model: &SdsModel) -> Vec<Var> {
    (0..model.state_dim()).map(|i| Var::State(i as u16)).collect()
}

/// Letter cells over the automaton's propositions.
pub fn automaton_cells(model: &SdsModel, a: &Ldba) -> Result<Vec<LetterCell>, GenerateError> {
    let preds = model.predicates_for(&a.props)?;
    Ok(letter_cells(&preds, MAX_PREDICATES)?)
}

/// All entailments for one transition assignment.
pub fn generate(
    model: &SdsModel,
    a: &Ldba,
    ts: &TemplateSpace,
    assignment: &TransitionAssignment,
    opts: &SynthesisOptions,
) -> Result<Vec<Entailment>, GenerateError> {
    let cells = automaton_cells(model, a)?;
    let xs = state_vars(model);
    let k = &ts.constants;
    let rejecting = a.rejecting_states();
    let init = model.init.conjuncts.clone();
    let q0 = a.initial;
    let mut out = Vec::new();
    let entail = |label: String, premise: Vec<Constraint>, conclusion: Vec<ParamPoly>| Entailment {
        label,
        bound_vars: xs.clone(),
        premise,
        conclusion,
    };
    let inv_premise = |q: StateId| -> Vec<Constraint> { ts.invariant[q].iter().map(nonneg).collect() };
    let safe_premise = |q: StateId| -> Vec<Constraint> {
        let mut p = inv_premise(q);
        p.push(Constraint::new(ts.v_safe[q].clone(), Cmp::Le));
        p
    };

    out.push(entail(
        format!("cond-a / {}", a.states[q0]),
        init.clone(),
        ts.invariant[q0].clone(),
    ));
    out.push(entail(
        format!("cond-b / {}", a.states[q0]),
        init,
        vec![&ts.constant(k.eta_s) - &ts.v_safe[q0]],
    ));
    for &q in &rejecting {
        out.push(entail(
            format!("cond-c / {}", a.states[q]),
            inv_premise(q),
            vec![ts.v_safe[q].clone()],
        ));
    }
    for q in 0..a.states.len() {
        let premise = match opts.live_scope {
            LiveScope::Invariant => inv_premise(q),
            LiveScope::SafeRegion => safe_premise(q),
        };
        out.push(entail(
            format!("cond-d / {}", a.states[q]),
            premise,
            vec![ts.v_live[q].clone()],
        ));
    }

    for q in 0..a.states.len() {
        if rejecting.contains(&q) {
            continue;
        }
        let accepting = a.accepting.contains(&q);
        let cond = if accepting { "cond-f" } else { "cond-e" };
        let pi = controller_for(model, a, ts, opts.mode, q)?;
        for cell in &cells {
            let q_next = assignment.successor(a, q, cell.mask);
            for (pi_idx, piece) in model.dynamics.pieces.iter().enumerate() {
                let next_state = closed_loop(&piece.body, &pi);
                let clauses = transition_clauses(q, q_next, accepting, &next_state, ts, model, opts)?;
                let mut premise = safe_premise(q);
                premise.extend(cell.conds.iter().cloned());
                premise.extend(piece.guard.conjuncts.iter().cloned());
                let label = format!(
                    "{cond} / {} / {} / piece-{} / q'={}",
                    a.states[q],
                    cell.label(),
                    pi_idx + 1,
                    a.states[q_next]
                );
                match opts.encoding {
                    Encoding::Additive => {
                        let mut conclusion = clauses.expectation;
                        conclusion.extend(corner_substitution(&clauses.forall_noise, model)?);
                        out.push(entail(label, premise, conclusion));
                    }
                    Encoding::Strict => {
                        let (with_w, without_w): (Vec<ParamPoly>, Vec<ParamPoly>) =
                            clauses.forall_noise.into_iter().partition(|c| c.has_noise());
                        let mut plain = clauses.expectation;
                        plain.extend(without_w);
                        out.push(entail(label.clone(), premise.clone(), plain));
                        if !with_w.is_empty() {
                            let mut p = premise;
                            p.extend(noise_box_premises(model)?);
                            let mut bound = xs.clone();
                            bound.extend(noise_vars(model));
                            out.push(Entailment {
                                label: format!("{label} / forall-w"),
                                bound_vars: bound,
                                premise: p,
                                conclusion: with_w,
                            });
                        }
                    }
                }
            }
        }
    }

    if opts.mode == Mode::Control {
        for q in 0..a.states.len() {
            let pi = controller_for(model, a, ts, opts.mode, q)?;
            let mut conclusion = Vec::new();
            for (p, (lo, hi)) in pi.iter().zip(&model.input_box) {
                conclusion.push(p - &ParamPoly::rational(lo.clone()));
                conclusion.push(&ParamPoly::rational(hi.clone()) - p);
            }
            out.push(entail(
                format!("input-box / {}", a.states[q]),
                safe_premise(q),
                conclusion,
            ));
        }
    }
    Ok(out)
}

/// Template unknowns that no entailment mentions.
pub fn unused_unknowns(ts: &TemplateSpace, entailments: &[Entailment]) -> Vec<Unknown> {
    let mut used = BTreeSet::new();
    for e in entailments {
        for c in &e.premise {
            used.extend(c.poly.unknowns());
        }
        for c in &e.conclusion {
            used.extend(c.unknowns());
        }
    }
    ts.unknowns.iter().copied().filter(|u| !used.contains(u)).collect()
}

/// Human-readable dump, one block per entailment.
pub fn render_entailments(entailments: &[Entailment], model: &SdsModel, ts: &TemplateSpace) -> String {
    let names = |v: Var| model.var_name(v);
    let show = |p: &ParamPoly| p.render(&names, Some(&ts.symbols));
    let mut out = String::new();
    for e in entailments {
        let _ = writeln!(out, "[{}]", e.label);
        let vars: Vec<String> = e.bound_vars.iter().map(|&v| names(v)).collect();
        let _ = writeln!(out, "  forall {}", vars.join(", "));
        let _ = writeln!(out, "  premise:");
        if e.premise.is_empty() {
            let _ = writeln!(out, "    true");
        }
        for c in &e.premise {
            let _ = writeln!(out, "    {} {} 0", show(&c.poly), c.cmp);
        }
        let _ = writeln!(out, "  conclusion:");
        for c in &e.conclusion {
            let _ = writeln!(out, "    {} >= 0", show(c));
        }
        out.push('\n');
    }
    out
}

/// Substitute concrete values for every unknown of an entailment.
pub fn assign_entailment(
    e: &Entailment,
    assignment: &BTreeMap<Unknown, Rational>,
) -> Result<Entailment, PolyError> {
    Ok(Entailment {
        label: e.label.clone(),
        bound_vars: e.bound_vars.clone(),
        premise: e
            .premise
            .iter()
            .map(|c| Ok(Constraint::new(c.poly.assign(assignment, None)?, c.cmp)))
            .collect::<Result<_, PolyError>>()?,
        conclusion: e
            .conclusion
            .iter()
            .map(|c| c.assign(assignment, None))
            .collect::<Result<_, _>>()?,
    })
}

/// Coefficient of a concrete constant, for tests and diagnostics.
pub fn constant_value(p: &ParamPoly) -> Option<Rational> {
    if p.degree() == 0 {
        p.constant_term().as_constant()
    } else {
        None
    }
}

/// Convenience: an unknown as a coefficient.
pub fn unknown_coeff(u: Unknown) -> Coeff {
    Coeff::unknown(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{parse_ldba, shipped};
    use crate::model::load_model;
    use crate::poly::{int, rat};
    use crate::template::instantiate;

    const RW: &str = include_str!("../data/models/random_walk.toml");
    const CW: &str = include_str!("../data/models/controlled_walk.toml");

    /// Hand-written certificate values for every unknown of the GF a templates.
    fn hand_certificate(ts: &TemplateSpace) -> BTreeMap<Unknown, Rational> {
        let vals = [
            ("vs_q0_1", int(-9)),
            ("vs_q0_x", rat(5, 16)),
            ("vl_q0_1", rat(367, 2)),
            ("vl_q0_x", rat(3, 4)),
            ("inv1_q0_1", int(73)),
            ("inv1_q0_x", rat(1, 2)),
            ("vs_q1_1", int(-9)),
            ("vs_q1_x", rat(5, 16)),
            ("vl_q1_1", rat(4747, 128)),
            ("vl_q1_x", rat(-1, 256)),
            ("inv1_q1_1", int(0)),
            ("inv1_q1_x", int(0)),
            ("eta_S", int(-8)),
            ("eps_S", rat(5, 32)),
            ("M_S", int(1)),
            ("beta_S", rat(-11, 32)),
            ("eps_L", rat(3, 8)),
            ("M_L", int(260)),
        ];
        vals.iter()
            .map(|(n, v)| (ts.symbols.lookup(n).unwrap(), v.clone()))
            .collect()
    }

    fn setup(aut: &str) -> (SdsModel, Ldba, TemplateSpace, SynthesisOptions) {
        let m = load_model(RW).unwrap();
        let a = parse_ldba(shipped()[aut]).unwrap();
        let o = SynthesisOptions::default();
        let ts = instantiate(&m, &a, &o);
        (m, a, ts, o)
    }

    #[test]
    fn assignment_counts() {
        let (_, a, _, _) = setup("GF a");
        assert_eq!(enumerate_assignments(&a, MAX_ASSIGNMENTS).unwrap().len(), 1);
        let fg = parse_ldba(shipped()["FG a"]).unwrap();
        let all = enumerate_assignments(&fg, MAX_ASSIGNMENTS).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].choice[&(0, 1)], 0);
        assert_eq!(all[1].choice[&(0, 1)], 1);
        let two = parse_ldba(
            "states: q0, q1\ninit: q0\naccepting: q1\n\
             q0 --~--> q0\nq0 --~--> q1\nq0 --a--> q0\nq0 --a--> q1\nq1 --~--> q1\nq1 --a--> q1\n",
        )
        .unwrap();
        assert_eq!(enumerate_assignments(&two, MAX_ASSIGNMENTS).unwrap().len(), 4);
        assert!(matches!(
            enumerate_assignments(&two, 3),
            Err(GenerateError::Capacity { count: 4, cap: 3 })
        ));
    }

    #[test]
    fn always_eventually_structure() {
        let (m, a, ts, o) = setup("GF a");
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &o).unwrap();
        let count = |p: &str| es.iter().filter(|e| e.label.starts_with(p)).count();
        assert_eq!(count("cond-c"), 0);
        assert_eq!(count("cond-e"), 4);
        assert!(es.iter().filter(|e| e.label.starts_with("cond-e")).all(|e| e.label.contains("/ q0 /")));
        assert_eq!(count("cond-f"), 4);
        assert_eq!(count("cond-d"), 2);
        assert!(unused_unknowns(&ts, &es).is_empty());
    }

    #[test]
    fn eventually_always_structure() {
        let (m, a, ts, o) = setup("FG a");
        let asg = &enumerate_assignments(&a, MAX_ASSIGNMENTS).unwrap()[1];
        let es = generate(&m, &a, &ts, asg, &o).unwrap();
        let labels: Vec<&str> = es.iter().map(|e| e.label.as_str()).collect();
        assert!(labels.contains(&"cond-c / q2"));
        assert!(labels.iter().any(|l| l.starts_with("cond-e / q0 / cell{a}") && l.ends_with("q'=q1")));
        assert!(labels.iter().any(|l| l.starts_with("cond-f / q1")));
        assert!(!labels.iter().any(|l| l.contains("/ q2 /")));
    }

    #[test]
    fn decrease_clause_reduces_to_constant() {
        let (m, _, ts, o) = setup("GF a");
        let piece = &m.dynamics.pieces[1];
        let next = closed_loop(&piece.body, &[]);
        let cl = transition_clauses(0, 0, false, &next, &ts, &m, &o).unwrap();
        let asg = hand_certificate(&ts);
        let dec = cl.expectation[0].assign(&asg, None).unwrap();
        assert_eq!(constant_value(&dec), Some(Rational::from_integer(0.into())));
        // with eps_S left symbolic: 5/32 - eps_S
        let mut partial = asg.clone();
        partial.remove(&ts.constants.eps_s);
        let sym = cl.expectation[0].assign(&partial, None);
        assert!(sym.is_err());
        // identity piece: decrease becomes -eps_S
        let id_next = closed_loop(&m.dynamics.pieces[0].body, &[]);
        let cl = transition_clauses(0, 0, false, &id_next, &ts, &m, &o).unwrap();
        let dec = cl.expectation[0].assign(&asg, None).unwrap();
        assert_eq!(constant_value(&dec), Some(rat(-5, 32)));
    }

    #[test]
    fn corner_substitution_bounded_differences() {
        let (m, _, ts, o) = setup("GF a");
        let next = closed_loop(&m.dynamics.pieces[1].body, &[]);
        let cl = transition_clauses(0, 0, false, &next, &ts, &m, &o).unwrap();
        // V_safe(x) - V_safe(x + w) = -5w/16; at w in {-2, 1}: 5/8 and -5/16
        let asg = hand_certificate(&ts);
        let diff_lo = cl.forall_noise[1].assign(&asg, None).unwrap();
        let corners = corner_substitution(&[diff_lo], &m).unwrap();
        let vals: Vec<Rational> = corners.iter().map(|c| constant_value(c).unwrap()).collect();
        // -5w/16 - beta_S with beta_S = -11/32
        assert_eq!(vals, vec![rat(5, 8) + rat(11, 32), rat(-5, 16) + rat(11, 32)]);
        assert!(vals.iter().all(|v| *v >= Rational::from_integer(0.into())));
    }

    #[test]
    fn additive_rejects_nonlinear_noise() {
        let (m, a, _, o) = setup("GF a");
        let opts = SynthesisOptions { degree: 2, ..o };
        let ts = instantiate(&m, &a, &opts);
        let err = generate(&m, &a, &ts, &TransitionAssignment::default(), &opts).unwrap_err();
        assert!(matches!(err, GenerateError::Encoding(ref s) if s.contains("strict")));
        let strict = SynthesisOptions {
            encoding: Encoding::Strict,
            ..opts
        };
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &strict).unwrap();
        let fw: Vec<&Entailment> = es.iter().filter(|e| e.label.ends_with("forall-w")).collect();
        // the identity piece has no noise, so only the random piece keeps w
        assert_eq!(fw.len(), 4);
        assert!(fw.iter().all(|e| e.bound_vars.contains(&Var::Noise(0))));
        assert!(es
            .iter()
            .filter(|e| !e.label.ends_with("forall-w"))
            .all(|e| e.conclusion.iter().all(|c| !c.has_noise())));
    }

    #[test]
    fn control_mode_adds_input_box() {
        let m = load_model(CW).unwrap();
        let a = parse_ldba(shipped()["GF a"]).unwrap();
        let o = SynthesisOptions {
            mode: Mode::Control,
            ..Default::default()
        };
        let ts = instantiate(&m, &a, &o);
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &o).unwrap();
        let boxes: Vec<&Entailment> = es.iter().filter(|e| e.label.starts_with("input-box")).collect();
        assert_eq!(boxes.len(), 2);
        assert_eq!(boxes[0].conclusion.len(), 2);
        assert!(unused_unknowns(&ts, &es).is_empty());
        // verification of an input model without controller
        let o = SynthesisOptions::default();
        let ts = instantiate(&m, &a, &o);
        assert!(matches!(
            generate(&m, &a, &ts, &TransitionAssignment::default(), &o),
            Err(GenerateError::NoController(_))
        ));
    }

    #[test]
    fn example_three_satisfies_generated_entailments_pointwise() {
        // independent pointwise evaluation at sampled states
        let (m, a, ts, o) = setup("GF a");
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &o).unwrap();
        let asg = hand_certificate(&ts);
        let concrete: Vec<Entailment> = es.iter().map(|e| assign_entailment(e, &asg).unwrap()).collect();
        for i in -400..=400 {
            let x = rat(i, 4);
            let pt: BTreeMap<Var, Rational> = [(Var::State(0), x.clone())].into();
            for e in &concrete {
                if e.premise.iter().all(|c| c.holds_at(&pt)) {
                    for c in &e.conclusion {
                        let v = c.eval(&pt, &BTreeMap::new()).unwrap();
                        assert!(v >= Rational::from_integer(0.into()), "{} at x = {x}", e.label);
                    }
                }
            }
        }
    }

    #[test]
    fn literal_live_scope_rejects_example_three() {
        let (m, a, ts, o) = setup("GF a");
        let o = SynthesisOptions {
            live_scope: LiveScope::Invariant,
            ..o
        };
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &o).unwrap();
        let d1 = es.iter().find(|e| e.label == "cond-d / q1").unwrap();
        let e = assign_entailment(d1, &hand_certificate(&ts)).unwrap();
        let pt: BTreeMap<Var, Rational> = [(Var::State(0), int(10_000))].into();
        assert!(e.premise.iter().all(|c| c.holds_at(&pt)));
        assert!(e.conclusion[0].eval(&pt, &BTreeMap::new()).unwrap() < Rational::from_integer(0.into()));
    }

    #[test]
    fn dump_is_stable() {
        let (m, a, ts, o) = setup("GF a");
        let es = generate(&m, &a, &ts, &TransitionAssignment::default(), &o).unwrap();
        let text = render_entailments(&es, &m, &ts);
        assert_eq!(text, render_entailments(&es, &m, &ts));
        assert!(text.starts_with("[cond-a / q0]\n  forall x\n  premise:\n    -2 + x >= 0\n"));
    }
}
