//! Monte-Carlo simulation of the product system under an extracted policy.
//!
//! Step `t` reads the label of `x_t`, moves the automaton to
//! `q_{t+1} = pi_A(x_t, q_t)` and the system to `x_{t+1} = f(x_t, pi_S(x_t, q_t), w_t)`.
//! The step counts as an accepting visit when `q_{t+1}` is accepting, and
//! as leaving the safe region when `V_safe(x_t, q_t) >= 0`.
//!
//! Every run draws from its own ChaCha8 stream (`seed`, stream = run
//! index), so results do not depend on thread scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::automaton::{Ldba, StateId};
use crate::certificate::{CertificateSolution, Policy};
use crate::dists::NoiseFamily;
use crate::expr::Cmp;
use crate::model::SdsModel;
use crate::poly::{to_f64, FastPoly, ParamPoly, Rational, Var};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("noise dimension {0} has no samplable distribution (moments only)")]
    Unsupported(usize),
    #[error("initial set is unbounded in `{0}`; give explicit initial points")]
    UnboundedInit(String),
    #[error("no initial state found by rejection sampling in the init box")]
    EmptyInit,
    #[error("no dynamics piece covers the state {0:?}")]
    Uncovered(Vec<f64>),
    #[error("{0}")]
    Config(String),
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub horizon: u64,
    pub runs: usize,
    pub seed: u64,
    /// Runs with at least this many accepting visits count as accepting.
    pub accepting_visits: u64,
    /// Fixed initial states; runs cycle through them instead of sampling.
    pub initial_points: Option<Vec<Vec<f64>>>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 10_000,
            runs: 10_000,
            seed: 0,
            accepting_visits: 10,
            initial_points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub run: usize,
    pub x0: Vec<f64>,
    pub exited_si_at: Option<u64>,
    pub accepting_visits: u64,
    pub first_accepting: Option<u64>,
    pub final_state: StateId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimStats {
    pub fraction_exited_si: f64,
    pub fraction_k_accepting_visits: f64,
    pub mean_accepting_visits: f64,
    pub runs: Vec<RunSummary>,
}

impl SimStats {
    pub fn render(&self, cfg: &SimConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "runs = {}", self.runs.len());
        let _ = writeln!(out, "horizon = {}", cfg.horizon);
        let _ = writeln!(out, "seed = {}", cfg.seed);
        let _ = writeln!(out, "fraction_exited_SI = {:.6}", self.fraction_exited_si);
        let _ = writeln!(
            out,
            "fraction_at_least_{}_accepting_visits = {:.6}",
            cfg.accepting_visits, self.fraction_k_accepting_visits
        );
        let _ = writeln!(out, "mean_accepting_visits = {:.3}", self.mean_accepting_visits);
        out
    }

    pub fn to_csv(&self, state_names: &[String]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["run".to_string()];
        header.extend(state_names.iter().map(|n| format!("{n}_0")));
        header.extend(["exited_si_at", "accepting_visits", "first_accepting", "final_state"].map(String::from));
        w.write_record(&header).expect("in-memory write");
        let opt = |v: Option<u64>| v.map(|t| t.to_string()).unwrap_or_default();
        for r in &self.runs {
            let mut row = vec![r.run.to_string()];
            row.extend(r.x0.iter().map(|x| x.to_string()));
            row.extend([
                opt(r.exited_si_at),
                r.accepting_visits.to_string(),
                opt(r.first_accepting),
                r.final_state.to_string(),
            ]);
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

enum Noise {
    Uniform(f64, f64),
    Point(f64),
}

struct Compiled {
    n: usize,
    m: usize,
    noise: Vec<Noise>,
    pieces: Vec<(Vec<(FastPoly, Cmp)>, Vec<FastPoly>)>,
    /// Per automaton state, one polynomial per input.
    controller: Vec<Vec<FastPoly>>,
    predicates: Vec<FastPoly>,
    init: Vec<(FastPoly, Cmp)>,
    init_box: Vec<(f64, f64)>,
}

fn compile(model: &SdsModel, a: &Ldba, cert: &CertificateSolution) -> Result<Compiled, SimError> {
    let n = model.state_dim();
    let m = model.input_dim();
    let slot = move |v: Var| match v {
        Var::State(i) => i as usize,
        Var::Input(i) => n + i as usize,
        Var::Noise(i) => n + m + i as usize,
    };
    let fast = |p: &ParamPoly| FastPoly::compile(p, &slot).ok_or_else(|| SimError::Config("polynomial with unknown coefficients".into()));
    let mut noise = Vec::new();
    for (i, f) in model.noise.families().iter().enumerate() {
        noise.push(match f {
            NoiseFamily::Uniform { lo, hi } => Noise::Uniform(to_f64(lo), to_f64(hi)),
            NoiseFamily::PointMass(v) => Noise::Point(to_f64(v)),
            NoiseFamily::Moments(_) => return Err(SimError::Unsupported(i)),
        });
    }
    let mut pieces = Vec::new();
    for p in &model.dynamics.pieces {
        let guard = p.guard.conjuncts.iter().map(|c| Ok((fast(&c.poly)?, c.cmp))).collect::<Result<_, SimError>>()?;
        let body = p.body.iter().map(fast).collect::<Result<_, _>>()?;
        pieces.push((guard, body));
    }
    let mut controller = Vec::new();
    for q in &a.states {
        let pis: Vec<ParamPoly> = if m == 0 {
            Vec::new()
        } else if let Some(c) = cert.controller.as_ref().and_then(|c| c.get(q)) {
            c.clone()
        } else {
            model
                .controller
                .as_ref()
                .and_then(|c| c.for_state(q))
                .cloned()
                .ok_or_else(|| SimError::Config(format!("no controller for state `{q}`")))?
        };
        controller.push(pis.iter().map(fast).collect::<Result<_, _>>()?);
    }
    let predicates = model
        .predicates_for(&a.props)
        .map_err(|e| SimError::Config(e.to_string()))?
        .iter()
        .map(|p| fast(&p.expr))
        .collect::<Result<_, _>>()?;
    let init = model.init.conjuncts.iter().map(|c| Ok((fast(&c.poly)?, c.cmp))).collect::<Result<_, SimError>>()?;
    let init_box = model
        .init
        .bounding_box(n)
        .into_iter()
        .enumerate()
        .map(|(i, b)| match b {
            (Some(lo), Some(hi)) => Ok((to_f64(&lo), to_f64(&hi))),
            _ => Err(SimError::UnboundedInit(model.state_names[i].clone())),
        })
        .collect::<Result<Vec<_>, _>>();
    Ok(Compiled {
        n,
        m,
        noise,
        pieces,
        controller,
        predicates,
        init,
        // only needed when sampling initial states
        init_box: init_box.unwrap_or_default(),
    })
}

fn holds(g: &[(FastPoly, Cmp)], buf: &[f64]) -> bool {
    g.iter().all(|(f, cmp)| cmp.holds_f64(f.eval(buf)))
}

fn run_one(
    c: &Compiled,
    a: &Ldba,
    policy: &Policy,
    cfg: &SimConfig,
    run: usize,
) -> Result<RunSummary, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(run as u64);
    let (n, m) = (c.n, c.m);
    let mut buf = vec![0.0; n + m + c.noise.len()];
    let x0: Vec<f64> = match &cfg.initial_points {
        Some(pts) => pts[run % pts.len()].clone(),
        None => {
            if c.init_box.len() != n {
                return Err(SimError::UnboundedInit(String::new()));
            }
            let mut found = None;
            for _ in 0..10_000 {
                for (i, &(lo, hi)) in c.init_box.iter().enumerate() {
                    buf[i] = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
                }
                if holds(&c.init, &buf) {
                    found = Some(buf[..n].to_vec());
                    break;
                }
            }
            found.ok_or(SimError::EmptyInit)?
        }
    };
    buf[..n].copy_from_slice(&x0);
    let mut q = a.initial;
    let mut summary = RunSummary {
        run,
        x0,
        exited_si_at: None,
        accepting_visits: 0,
        first_accepting: None,
        final_state: q,
    };
    let mut next = vec![0.0; n];
    for t in 0..cfg.horizon {
        let x = &buf[..n];
        if summary.exited_si_at.is_none() && !policy.in_safe_region(q, x) {
            summary.exited_si_at = Some(t);
        }
        let mut letter = 0u32;
        for (i, p) in c.predicates.iter().enumerate() {
            if p.eval(&buf) >= 0.0 {
                letter |= 1 << i;
            }
        }
        let q_next = policy.next(q, letter, &buf[..n]);
        for k in 0..m {
            buf[n + k] = c.controller[q][k].eval(&buf);
        }
        for (j, d) in c.noise.iter().enumerate() {
            buf[n + m + j] = match *d {
                Noise::Uniform(lo, hi) => rng.gen_range(lo..hi),
                Noise::Point(v) => v,
            };
        }
        let (_, body) = c
            .pieces
            .iter()
            .find(|(g, _)| holds(g, &buf))
            .ok_or_else(|| SimError::Uncovered(buf[..n].to_vec()))?;
        for (i, f) in body.iter().enumerate() {
            next[i] = f.eval(&buf);
        }
        buf[..n].copy_from_slice(&next);
        q = q_next;
        if a.accepting.contains(&q) {
            summary.accepting_visits += 1;
            summary.first_accepting.get_or_insert(t);
        }
    }
    summary.final_state = q;
    Ok(summary)
}

pub fn simulate(
    model: &SdsModel,
    a: &Ldba,
    cert: &CertificateSolution,
    policy: &Policy,
    cfg: &SimConfig,
) -> Result<SimStats, SimError> {
    if cfg.runs == 0 || cfg.accepting_visits == 0 {
        return Err(SimError::Config("runs and the accepting-visit threshold must be at least 1".into()));
    }
    if let Some(pts) = &cfg.initial_points {
        if pts.is_empty() || pts.iter().any(|p| p.len() != model.state_dim()) {
            return Err(SimError::Config("initial points must be non-empty and match the state dimension".into()));
        }
    }
    let c = compile(model, a, cert)?;
    let runs: Vec<RunSummary> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_one(&c, a, policy, cfg, r))
        .collect::<Result<_, _>>()?;
    let total = runs.len() as f64;
    let exited = runs.iter().filter(|r| r.exited_si_at.is_some()).count() as f64;
    let k = runs.iter().filter(|r| r.accepting_visits >= cfg.accepting_visits).count() as f64;
    let visits: u64 = runs.iter().map(|r| r.accepting_visits).sum();
    Ok(SimStats {
        fraction_exited_si: exited / total,
        fraction_k_accepting_visits: k / total,
        mean_accepting_visits: visits as f64 / total,
        runs,
    })
}

/// Parse `x0` points given as rationals.
pub fn points_from_rationals(points: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    points.iter().map(|p| p.iter().map(to_f64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{parse_ldba, shipped};
    use crate::certificate::{extract_policy, load_certificate};
    use crate::model::load_model;

    const RW: &str = include_str!("../data/models/random_walk.toml");
    const WALK_CERT: &str = include_str!("../data/certificates/walk_gf_a.toml");

    const DET: &str = r#"
[state]
vars = ["x"]

[noise]
vars = ["w"]
dims = [{ family = "point", value = "0" }]

[[dynamics]]
body = ["x - 1 + w"]

[init]
constraints = ["x >= 5/2", "x <= 5/2"]

[[predicates]]
name = "a"
expr = "-x"

[[predicates]]
name = "b"
expr = "100 - x"
"#;

    fn hand_certificate() -> (SdsModel, Ldba, CertificateSolution, Policy) {
        let m = load_model(RW).unwrap();
        let a = parse_ldba(shipped()["GF a"]).unwrap();
        let c = load_certificate(WALK_CERT, &m).unwrap();
        let p = extract_policy(&c, &a, &m).unwrap();
        (m, a, c, p)
    }

    #[test]
    fn deterministic_trace() {
        let m = load_model(DET).unwrap();
        let a = parse_ldba(shipped()["GF a"]).unwrap();
        let c = load_certificate(WALK_CERT, &m).unwrap();
        let p = extract_policy(&c, &a, &m).unwrap();
        let cfg = SimConfig {
            horizon: 20,
            runs: 3,
            ..SimConfig::default()
        };
        let s = simulate(&m, &a, &c, &p, &cfg).unwrap();
        for r in &s.runs {
            assert_eq!(r.x0, vec![2.5]);
            // x_3 = -0.5 is the first state with x <= 0
            assert_eq!(r.first_accepting, Some(3));
            assert_eq!(r.accepting_visits, 17);
        }
    }

    #[test]
    fn empty_horizon() {
        let (m, a, c, p) = hand_certificate();
        let cfg = SimConfig {
            horizon: 0,
            runs: 10,
            ..SimConfig::default()
        };
        let s = simulate(&m, &a, &c, &p, &cfg).unwrap();
        assert_eq!(s.fraction_exited_si, 0.0);
        assert_eq!(s.mean_accepting_visits, 0.0);
    }

    #[test]
    fn reproducible_and_consistent() {
        let (m, a, c, p) = hand_certificate();
        let cfg = SimConfig {
            horizon: 500,
            runs: 400,
            seed: 11,
            ..SimConfig::default()
        };
        let s1 = simulate(&m, &a, &c, &p, &cfg).unwrap();
        let s2 = simulate(&m, &a, &c, &p, &cfg).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.fraction_exited_si <= 0.01);
        assert!(s1.fraction_k_accepting_visits >= 0.99);
        assert!(s1.runs.iter().all(|r| (2.0..=3.0).contains(&r.x0[0])));
        let csv = s1.to_csv(&m.state_names);
        assert_eq!(csv.lines().count(), 401);
    }

    #[test]
    fn moments_noise_is_rejected() {
        let text = RW.replace(
            "dims = [{ family = \"uniform\", lo = \"-2\", hi = \"1\" }]",
            "dims = [{ family = \"moments\", moments = [\"-1/2\", \"1\"] }]",
        );
        let m = load_model(&text).unwrap();
        let a = parse_ldba(shipped()["GF a"]).unwrap();
        let c = load_certificate(WALK_CERT, &m).unwrap();
        let p = extract_policy(&c, &a, &m).unwrap();
        let err = simulate(&m, &a, &c, &p, &SimConfig::default()).unwrap_err();
        assert_eq!(err, SimError::Unsupported(0));
    }
}
