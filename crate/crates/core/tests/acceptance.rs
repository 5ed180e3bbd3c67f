//! Acceptance criteria 1 to 7. Prints one `criterion N: PASS|FAIL: ...`
//! line per criterion and fails if any criterion fails.
//!
//! Criteria 2, 3 and 6 drive the SMT solver end to end and take minutes.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldbsm::automaton::{parse_ldba, shipped, Ldba};
use ldbsm::certificate::{extract_policy, probability_bound, CertificateSolution};
use ldbsm::cli;
use ldbsm::constraints::Entailment;
use ldbsm::expr::Cmp;
use ldbsm::model::{load_model, Constraint, SdsModel};
use ldbsm::montecarlo::{simulate, SimConfig};
use ldbsm::pipeline::{synthesize, PipelineOptions};
use ldbsm::poly::{int, rat, Coeff, Monomial, ParamPoly, Rational, Symbols, Unknown, Var};
use ldbsm::positivstellensatz::{farkas_reduce, putinar_reduce, ExConstraint, ExistentialSystem, Rel};
use ldbsm::smtbridge::{solve_system, Status, DEFAULT_SOLVER};
use ldbsm::template::Mode;

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(rel)
}

fn run_cli(args: &[&str]) -> cli::Outcome {
    let mut all = vec!["ldbsm"];
    all.extend_from_slice(args);
    cli::run(all)
}

type Verdict = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// 1. Hand-written certificate

fn criterion_1() -> Verdict {
    let model = data("models/random_walk.toml");
    let cert = data("certificates/walk_gf_a.toml");
    let (m, c) = (model.to_str().unwrap(), cert.to_str().unwrap());
    let start = Instant::now();
    let out = run_cli(&["check", m, "GF a", c]);
    let secs = start.elapsed().as_secs_f64();
    ensure(out.code == cli::EXIT_OK, || format!("check exited {}: {}{}", out.code, out.stdout, out.stderr))?;
    ensure(out.stdout.contains("path: exact"), || format!("not the exact path:\n{}", out.stdout))?;
    ensure(secs < 1.0, || format!("check took {secs:.3}s"))?;

    let text = std::fs::read_to_string(&cert).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut witnesses = Vec::new();
    for (from, to) in [("eta_S = \"-8\"", "eta_S = \"-9\""), ("eps_S = \"5/32\"", "eps_S = \"1\"")] {
        assert!(text.contains(from));
        let path = dir.path().join("mutated.toml");
        std::fs::write(&path, text.replace(from, to)).unwrap();
        let out = run_cli(&["check", m, "GF a", path.to_str().unwrap()]);
        ensure(out.code == cli::EXIT_CHECK_FAIL, || format!("{to}: exit {}", out.code))?;
        let line = out
            .stdout
            .lines()
            .find(|l| l.contains("FAIL") && l.contains("at q ="))
            .ok_or_else(|| format!("{to}: no witness in\n{}", out.stdout))?;
        witnesses.push(format!("{to}: {}", line.trim()));
    }
    Ok(format!("pass in {secs:.3}s; mutations fail [{}]", witnesses.join("; ")))
}

// ---------------------------------------------------------------------------
// 2 and 3. Synthesis rows

struct Synthesized {
    row: String,
    model_path: PathBuf,
    model: SdsModel,
    automaton: Ldba,
    cert: CertificateSolution,
}

fn synthesize_row(model_file: &str, row: &str, mode: Mode, budget: u64) -> (Option<Synthesized>, f64, String) {
    let model_path = data(model_file);
    let model = load_model(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    let automaton = parse_ldba(shipped()[row]).unwrap();
    let mut opts = PipelineOptions::default();
    opts.synthesis.mode = mode;
    opts.synthesis.timeout_secs = budget;
    let start = Instant::now();
    let result = synthesize(&model, &automaton, model_file, row, &opts);
    let secs = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let verdict = r.manifest.verdict.clone();
            match r.certificate {
                Some(cert) => (
                    Some(Synthesized {
                        row: row.to_string(),
                        model_path,
                        model,
                        automaton,
                        cert,
                    }),
                    secs,
                    verdict,
                ),
                None => (None, secs, verdict),
            }
        }
        Err(e) => (None, secs, format!("error: {e}")),
    }
}

fn criterion_2(found: &mut Vec<Synthesized>) -> Verdict {
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for row in ["F a", "GF a", "b U a", "G b", "G b & F a"] {
        let (s, secs, verdict) = synthesize_row("models/random_walk.toml", row, Mode::Verify, 600);
        lines.push(format!("{row} {verdict} {secs:.1}s"));
        match s {
            Some(s) if secs <= 600.0 => found.push(s),
            _ => failed.push(row),
        }
    }
    // allowed to come back unknown; a certificate still has to check
    let (s, secs, verdict) = synthesize_row("models/random_walk.toml", "F a & F b", Mode::Verify, 600);
    lines.push(format!("F a & F b {verdict} {secs:.1}s (may be unknown)"));
    if let Some(s) = s {
        found.push(s);
    }
    if failed.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(format!("no certificate for {failed:?}: {}", lines.join(", ")))
    }
}

/// Exact check that the controller maps sampled invariant points into the
/// input box.
fn controller_in_box(s: &Synthesized, samples: usize, rng: &mut ChaCha8Rng) -> Result<usize, String> {
    let ctrl = s.cert.controller.as_ref().ok_or("certificate has no controller")?;
    let bounds = &s.model.input_box;
    let n = s.model.state_dim();
    let mut checked = 0;
    for (q, pi) in ctrl {
        let inv = &s.cert.invariant[q];
        let mut drawn = 0;
        while drawn < samples && checked < samples * 50 {
            checked += 1;
            let scale = [10i64, 1_000, 1_000_000][rng.gen_range(0..3)];
            let point: BTreeMap<Var, Rational> = (0..n)
                .map(|i| (Var::State(i as u16), rat(rng.gen_range(-scale * 64..=scale * 64), 64)))
                .collect();
            let inside = inv.iter().all(|p| {
                let v = p.eval(&point, &BTreeMap::new()).unwrap();
                !v.is_negative()
            });
            if !inside {
                continue;
            }
            drawn += 1;
            for (j, p) in pi.iter().enumerate() {
                let u = p.eval(&point, &BTreeMap::new()).unwrap();
                let (lo, hi) = &bounds[j];
                if &u < lo || &u > hi {
                    return Err(format!("{}: state {q} at {point:?} gives u = {u}", s.row));
                }
            }
        }
        if drawn < samples {
            return Err(format!("{}: only {drawn} invariant points found for {q}", s.row));
        }
    }
    Ok(ctrl.len() * samples)
}

fn criterion_3(found: &mut Vec<Synthesized>) -> Verdict {
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for row in ["F a", "GF a", "b U a", "G b"] {
        let (s, secs, verdict) = synthesize_row("models/controlled_walk.toml", row, Mode::Control, 900);
        match s {
            Some(s) if secs <= 900.0 => match controller_in_box(&s, 100_000, &mut rng) {
                Ok(n) => {
                    lines.push(format!("{row} {verdict} {secs:.1}s, {n} controller samples in box"));
                    found.push(s);
                }
                Err(e) => {
                    lines.push(format!("{row} controller: {e}"));
                    failed.push(row);
                }
            },
            _ => {
                lines.push(format!("{row} {verdict} {secs:.1}s"));
                failed.push(row);
            }
        }
    }
    if failed.is_empty() {
        Ok(lines.join(", "))
    } else {
        Err(format!("failed {failed:?}: {}", lines.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// 4. Probability bound

/// `floor(e^t * 10^150)` from below: a truncated Taylor series with each
/// term floored, for rational `t > 0`.
fn exp_lower_scaled(t: &Rational, scale: &BigInt) -> BigInt {
    let (p, q) = (t.numer().clone(), t.denom().clone());
    let mut term = scale.clone();
    let mut sum = scale.clone();
    let mut k = BigInt::one();
    while !term.is_zero() {
        term = term * &p / (&q * &k);
        sum += &term;
        k += 1;
    }
    sum
}

fn criterion_4() -> Verdict {
    let b = probability_bound(&int(-8), &rat(5, 32), &int(1)).unwrap();
    let shown = b.decimal(10);
    ensure(shown == "0.9999546001", || format!("bound shown as {shown}"))?;

    let scale = BigInt::from(10).pow(150);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut tested = 0;
    while tested < 1000 {
        let eta = -rat(rng.gen_range(1..=400), rng.gen_range(1..=60));
        let eps = rat(rng.gen_range(1..=200), rng.gen_range(1..=100));
        let m = rat(rng.gen_range(1..=80), rng.gen_range(1..=20));
        let t = -(int(8) * &eta * &eps) / (&m * &m);
        if t > int(60) {
            continue;
        }
        tested += 1;
        let bound = probability_bound(&eta, &eps, &m).map_err(|e| e.to_string())?;
        // lower <= 1 - e^{-t}  iff  (1 - lower) e^t >= 1
        let gap = Rational::one() - &bound.lower;
        let lhs = gap.numer().clone() * exp_lower_scaled(&t, &scale);
        let rhs = gap.denom().clone() * &scale;
        ensure(lhs >= rhs, || {
            format!("lower bound {} exceeds 1 - e^-t for eta={eta}, eps={eps}, M={m}", bound.lower)
        })?;
        ensure(bound.lower <= bound.upper, || format!("empty enclosure at t = {t}"))?;
    }
    Ok(format!("bound {shown}; lower bound below 1 - e^-t on {tested} random triples"))
}

// ---------------------------------------------------------------------------
// 5. Reductions

fn xv(i: usize) -> Var {
    Var::State(i as u16)
}

/// `sum a_i x_i + c`
fn linear(a: &[i64], c: i64) -> ParamPoly {
    let mut p = ParamPoly::int(c);
    for (i, &k) in a.iter().enumerate() {
        p = &p + &ParamPoly::var(xv(i)).scale(&Coeff::int(k));
    }
    p
}

/// Full-dimensional polytope `g . x + h >= 0`: a box around the origin cut by
/// up to two half-spaces that keep the origin strictly inside.
#[derive(Clone, Debug)]
struct Polytope {
    n: usize,
    rows: Vec<(Vec<i64>, i64)>,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

fn random_polytope(rng: &mut ChaCha8Rng, n: usize) -> Polytope {
    let mut rows = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for i in 0..n {
        let (l, u) = (rng.gen_range(-5..=0), rng.gen_range(1..=5));
        let mut e = vec![0; n];
        e[i] = 1;
        rows.push((e.clone(), -l));
        e[i] = -1;
        rows.push((e, u));
        lo.push(l);
        hi.push(u);
    }
    for _ in 0..rng.gen_range(0..=2) {
        let g: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
        rows.push((g, rng.gen_range(1..=5)));
    }
    Polytope { n, rows, lo, hi }
}

fn polytope_premise(p: &Polytope) -> Vec<Constraint> {
    p.rows.iter().map(|(g, h)| Constraint::new(linear(g, *h), Cmp::Ge)).collect()
}

/// Solve a square system exactly; `None` when singular.
fn solve_square(mut m: Vec<Vec<Rational>>, mut rhs: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = &m[r][col] / &m[col][col];
                for c in col..n {
                    let d = &f * &m[col][c];
                    m[r][c] -= d;
                }
                let d = &f * &rhs[col];
                rhs[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &rhs[i] / &m[i][i]).collect())
}

fn subsets(k: usize, n: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = subsets(k, n - 1);
    for mut s in subsets(k - 1, n - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// Minimum of `a . x` over the polytope by vertex enumeration.
fn vertex_min(p: &Polytope, a: &[i64]) -> Rational {
    let mut best: Option<Rational> = None;
    for idx in subsets(p.n, p.rows.len()) {
        let m: Vec<Vec<Rational>> = idx.iter().map(|&r| p.rows[r].0.iter().map(|&g| int(g)).collect()).collect();
        let rhs: Vec<Rational> = idx.iter().map(|&r| int(-p.rows[r].1)).collect();
        let Some(x) = solve_square(m, rhs) else { continue };
        let feasible = p.rows.iter().all(|(g, h)| {
            let v: Rational = g.iter().zip(&x).map(|(&gi, xi)| int(gi) * xi).sum::<Rational>() + int(*h);
            !v.is_negative()
        });
        if feasible {
            let v: Rational = a.iter().zip(&x).map(|(&ai, xi)| int(ai) * xi).sum();
            if best.as_ref().map_or(true, |b| v < *b) {
                best = Some(v);
            }
        }
    }
    best.expect("bounded nonempty polytope has a vertex")
}

const GRID: i64 = 1024;

/// Minimum over sampled premise points of an integer polynomial evaluated at
/// `k / GRID`, scaled by `GRID^deg`. Points are exact multiples of 1/1024.
fn sampled_min(
    p: &Polytope,
    extra: &dyn Fn(&[i64]) -> bool,
    value: &dyn Fn(&[i64]) -> i64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Option<i64> {
    let mut best: Option<i64> = None;
    let mut k = vec![0i64; p.n];
    for _ in 0..samples {
        for i in 0..p.n {
            k[i] = rng.gen_range(p.lo[i] * GRID..=p.hi[i] * GRID);
        }
        let inside = p
            .rows
            .iter()
            .all(|(g, h)| g.iter().zip(&k).map(|(a, b)| a * b).sum::<i64>() + h * GRID >= 0)
            && extra(&k);
        if inside {
            let v = value(&k);
            best = Some(best.map_or(v, |b: i64| b.min(v)));
        }
    }
    best
}

fn solve(sys: &ExistentialSystem, secs: u64) -> Result<(Status, BTreeMap<Unknown, Rational>), String> {
    let out = solve_system(sys, DEFAULT_SOLVER, Duration::from_secs(secs), None).map_err(|e| e.to_string())?;
    Ok((out.status, out.assignment.unwrap_or_default()))
}

fn farkas_soundness(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let (mut sat, mut unsat) = (0, 0);
    for case in 0..500 {
        let n = rng.gen_range(1..=3);
        let poly = random_polytope(rng, n);
        let a: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        // constant near the boundary: -min(a . x) plus a small slack
        let floor = vertex_min(&poly, &a).floor().to_integer();
        let c = i64::try_from(-floor).unwrap() + rng.gen_range(-3..=4);
        let mut symbols = Symbols::new();
        // half the cases carry an unknown constant `t <= c`
        let unknown = rng.gen_bool(0.5).then(|| symbols.fresh("t"));
        let mut conclusion = linear(&a, if unknown.is_some() { 0 } else { c });
        if let Some(t) = unknown {
            conclusion = &conclusion + &ParamPoly::constant(Coeff::unknown(t));
        }
        let e = Entailment {
            label: format!("case{case}"),
            bound_vars: (0..n).map(xv).collect(),
            premise: polytope_premise(&poly),
            conclusion: vec![conclusion],
        };
        let cs = farkas_reduce(&e, &mut symbols).map_err(|e| e.to_string())?;
        let mut sys = ExistentialSystem::new(symbols);
        sys.constraints = cs;
        if let Some(t) = unknown {
            sys.constraints
                .push(ExConstraint::new("cap", &Coeff::int(c) - &Coeff::unknown(t), Rel::Ge));
        }
        let (status, model) = solve(&sys, 30)?;
        match status {
            Status::Sat => sat += 1,
            Status::Unsat => {
                unsat += 1;
                continue;
            }
            other => return Err(format!("case {case}: solver returned {}", other.as_str())),
        }
        let constant = match unknown {
            Some(t) => model.get(&t).cloned().unwrap_or_else(Rational::zero),
            None => int(c),
        };
        let value = |k: &[i64]| a.iter().zip(k).map(|(x, y)| x * y).sum::<i64>();
        let min = sampled_min(&poly, &|_| true, &value, 100_000, rng).ok_or("no sample in premise")?;
        // min / GRID + constant >= 0
        ensure(int(min) + constant.clone() * int(GRID) >= Rational::zero(), || {
            format!("case {case}: counterexample, {a:?} . x + {constant} reaches {}/{GRID} on {poly:?}", min)
        })?;
        let vmin = vertex_min(&poly, &a);
        ensure(&vmin + &constant >= Rational::zero(), || {
            format!("case {case}: vertex counterexample, {a:?} . x + {constant} reaches {vmin} on {poly:?}")
        })?;
    }
    Ok(format!("farkas {sat} sat/{unsat} unsat, no counterexample in samples or vertices"))
}

fn farkas_completeness(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut tight = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=3);
        let poly = random_polytope(rng, n);
        let a: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
        let min = vertex_min(&poly, &a);
        // constant making the entailment true, tight in half the cases
        let slack = if rng.gen_bool(0.5) {
            tight += 1;
            Rational::zero()
        } else {
            rat(rng.gen_range(1..=40), 8)
        };
        let constant = -min + slack;
        let conclusion = &linear(&a, 0) + &ParamPoly::rational(constant.clone());
        let e = Entailment {
            label: format!("true{case}"),
            bound_vars: (0..n).map(xv).collect(),
            premise: polytope_premise(&poly),
            conclusion: vec![conclusion],
        };
        let mut symbols = Symbols::new();
        let cs = farkas_reduce(&e, &mut symbols).map_err(|e| e.to_string())?;
        let mut sys = ExistentialSystem::new(symbols);
        sys.constraints = cs;
        let (status, _) = solve(&sys, 30)?;
        ensure(status == Status::Sat, || {
            format!("true entailment {a:?} . x + {constant} >= 0 on {poly:?} gave {}", status.as_str())
        })?;
    }
    Ok(format!("farkas complete on 200 true entailments ({tight} tight)"))
}

fn putinar_soundness(rng: &mut ChaCha8Rng) -> Result<String, String> {
    let mut summary = Vec::new();
    for sos_degree in [0u32, 2] {
        let (mut sat, mut unsat, mut unknown) = (0, 0, 0);
        for case in 0..200 {
            let n = rng.gen_range(1..=2);
            // ball - |x|^2 >= 0, optionally cut by one half-space through
            // the interior
            let ball = rng.gen_range(1..=30);
            let r = (ball as f64).sqrt().ceil() as i64;
            let mut rows = Vec::new();
            if rng.gen_bool(0.5) {
                rows.push(((0..n).map(|_| rng.gen_range(-3..=3)).collect::<Vec<i64>>(), rng.gen_range(1..=5)));
            }
            let poly = Polytope {
                n,
                rows,
                lo: vec![-r; n],
                hi: vec![r; n],
            };
            let square_sum = (0..n).fold(ParamPoly::zero(), |acc, i| {
                &acc + &ParamPoly::term(Monomial::from_powers(vec![(xv(i), 2)]), Coeff::int(1))
            });
            let mut premise = polytope_premise(&poly);
            premise.push(Constraint::new(&ParamPoly::int(ball) - &square_sum, Cmp::Ge));
            // random quadratic conclusion q(x) + t with t <= c
            let quad: Vec<i64> = (0..n).map(|_| rng.gen_range(-3..=3)).collect();
            let cross = if n == 2 { rng.gen_range(-2..=2) } else { 0 };
            let lin: Vec<i64> = (0..n).map(|_| rng.gen_range(-4..=4)).collect();
            let mut q = linear(&lin, 0);
            for i in 0..n {
                q = &q + &ParamPoly::term(Monomial::from_powers(vec![(xv(i), 2)]), Coeff::int(quad[i]));
            }
            if n == 2 {
                q = &q + &ParamPoly::term(Monomial::from_powers(vec![(xv(0), 1), (xv(1), 1)]), Coeff::int(cross));
            }
            let g2 = GRID * GRID;
            let in_ball = |k: &[i64]| k.iter().map(|x| x * x).sum::<i64>() <= ball * g2;
            let value = |k: &[i64]| {
                let mut v: i64 = (0..n).map(|i| quad[i] * k[i] * k[i] + lin[i] * k[i] * GRID).sum();
                if n == 2 {
                    v += cross * k[0] * k[1];
                }
                v
            };
            // cap t near the sampled minimum so most cases are feasible
            let Some(est) = sampled_min(&poly, &in_ball, &value, 2_000, rng) else { continue };
            let c = -est.div_euclid(g2) + rng.gen_range(-1..=8);
            let mut symbols = Symbols::new();
            let t = symbols.fresh("t");
            let e = Entailment {
                label: format!("quad{case}"),
                bound_vars: (0..n).map(xv).collect(),
                premise,
                conclusion: vec![&q + &ParamPoly::constant(Coeff::unknown(t))],
            };
            let cs = putinar_reduce(&e, sos_degree, 2, &mut symbols);
            let mut sys = ExistentialSystem::new(symbols);
            sys.constraints = cs;
            sys.constraints
                .push(ExConstraint::new("cap", &Coeff::int(c) - &Coeff::unknown(t), Rel::Ge));
            let (status, model) = solve(&sys, 2)?;
            match status {
                Status::Sat => sat += 1,
                Status::Unsat => {
                    unsat += 1;
                    continue;
                }
                _ => {
                    unknown += 1;
                    continue;
                }
            }
            let tv = model.get(&t).cloned().unwrap_or_else(Rational::zero);
            let Some(min) = sampled_min(&poly, &in_ball, &value, 100_000, rng) else { continue };
            ensure(int(min) + tv.clone() * int(g2) >= Rational::zero(), || {
                format!("sos degree {sos_degree}, case {case}: q + {tv} reaches {min}/{g2}")
            })?;
        }
        summary.push(format!("putinar deg {sos_degree}: {sat} sat/{unsat} unsat/{unknown} unknown, sound"));
    }
    Ok(summary.join(", "))
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = farkas_soundness(&mut rng)?;
    let b = farkas_completeness(&mut rng)?;
    let c = putinar_soundness(&mut rng)?;
    Ok(format!("{a}; {b}; {c}"))
}

// ---------------------------------------------------------------------------
// 6. Self-consistency

fn criterion_6(found: &[Synthesized]) -> Verdict {
    ensure(!found.is_empty(), || "no certificates from criteria 2 and 3".into())?;
    let p = 0.9999;
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (i, s) in found.iter().enumerate() {
        let kind = if s.cert.controller.is_some() { "control" } else { "verify" };
        let name = format!("{kind} {}", s.row);
        let path = dir.path().join(format!("cert{i}.toml"));
        std::fs::write(&path, s.cert.render(&s.model)).unwrap();
        let out = run_cli(&["check", s.model_path.to_str().unwrap(), &s.row, path.to_str().unwrap()]);
        if out.code != cli::EXIT_OK || !out.stdout.contains("path: exact") {
            failed.push(format!("{name}: check exit {}", out.code));
            continue;
        }
        let policy = extract_policy(&s.cert, &s.automaton, &s.model).map_err(|e| e.to_string())?;
        let stats = simulate(&s.model, &s.automaton, &s.cert, &policy, &SimConfig::default())
            .map_err(|e| format!("{name}: {e}"))?;
        let ok = stats.fraction_exited_si <= 1.0 - p + 0.01 && stats.fraction_k_accepting_visits >= p - 0.01;
        let line = format!(
            "{name}: exited {:.4}, >=10 visits {:.4}",
            stats.fraction_exited_si, stats.fraction_k_accepting_visits
        );
        if ok {
            lines.push(line);
        } else {
            failed.push(line);
        }
    }
    if failed.is_empty() {
        Ok(format!("{} certificates check exactly; {}", found.len(), lines.join(", ")))
    } else {
        Err(format!("{}; passing: {}", failed.join(", "), lines.join(", ")))
    }
}

// ---------------------------------------------------------------------------
// 7. Rejecting states

fn criterion_7() -> Verdict {
    let names = |a: &Ldba, set: &std::collections::BTreeSet<usize>| {
        set.iter().map(|&q| a.states[q].clone()).collect::<Vec<_>>()
    };
    let gfa = parse_ldba(shipped()["GF a"]).unwrap();
    ensure(gfa.rejecting_states().is_empty(), || "GF a has rejecting states".into())?;
    let fga = parse_ldba(shipped()["FG a"]).unwrap();
    ensure(names(&fga, &fga.rejecting_states()) == ["q2"], || {
        format!("FG a gives {:?}", names(&fga, &fga.rejecting_states()))
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonempty = 0;
    for case in 0..200 {
        let n = rng.gen_range(1..=8);
        let props = rng.gen_range(1..=2);
        let letters = 1usize << props;
        let prop_names = ["a", "b"];
        let accepting: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
        let mut text = format!(
            "states: {}\ninit: q0\naccepting: {}\nprops: {}\n",
            (0..n).map(|q| format!("q{q}")).collect::<Vec<_>>().join(", "),
            accepting.iter().map(|q| format!("q{q}")).collect::<Vec<_>>().join(", "),
            prop_names[..props].join(", ")
        );
        // node n stands for the completion sink
        let mut reach = vec![vec![false; n + 1]; n + 1];
        let mut incomplete = false;
        for q in 0..n {
            for l in 0..letters {
                let label: Vec<&str> = (0..props).filter(|i| l >> i & 1 == 1).map(|i| prop_names[i]).collect();
                let label = if label.is_empty() { "~".to_string() } else { label.join(",") };
                let mut any = false;
                for t in 0..n {
                    if rng.gen_bool((2.0 / n as f64).min(1.0)) {
                        text.push_str(&format!("q{q} --{label}--> q{t}\n"));
                        reach[q][t] = true;
                        any = true;
                    }
                }
                if !any {
                    incomplete = true;
                    reach[q][n] = true;
                }
            }
        }
        let total = if incomplete { n + 1 } else { n };
        reach[n][n] = true;
        for (q, row) in reach.iter_mut().enumerate() {
            row[q] = true;
        }
        // Floyd-Warshall closure
        for k in 0..total {
            for i in 0..total {
                if reach[i][k] {
                    for j in 0..total {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let expected: Vec<String> = (0..total)
            .filter(|&q| !accepting.iter().any(|&f| reach[q][f]))
            .map(|q| if q == n { "sink".to_string() } else { format!("q{q}") })
            .collect();
        let a = parse_ldba(&text).map_err(|e| format!("case {case}: {e}\n{text}"))?;
        let got = names(&a, &a.rejecting_states());
        ensure(got == expected, || format!("case {case}: got {got:?}, oracle {expected:?}\n{text}"))?;
        if !got.is_empty() {
            nonempty += 1;
        }
    }
    Ok(format!("GF a gives {{}}, FG a gives {{q2}}, 200 random automata agree ({nonempty} with rejecting states)"))
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    }
}

/// `LDBSM_CRITERIA=1,5` runs a subset (6 pulls in 2 and 3).
fn selected() -> impl Fn(usize) -> bool {
    let only: Option<Vec<usize>> = std::env::var("LDBSM_CRITERIA")
        .ok()
        .map(|v| v.split(',').filter_map(|n| n.trim().parse().ok()).collect());
    move |n| match &only {
        None => true,
        Some(o) => o.contains(&n) || (o.contains(&6) && (n == 2 || n == 3)),
    }
}

#[test]
fn acceptance_criteria() {
    // raw stderr is not captured by the harness, so the lines show up in plain `cargo test`
    let report = |line: String| {
        let _ = writeln!(std::io::stderr(), "{line}");
    };
    let wanted = selected();
    let mut found = Vec::new();
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut record = |n: usize, f: &mut dyn FnMut() -> Verdict| {
        if !wanted(n) {
            return;
        }
        let start = Instant::now();
        let v = guarded(f);
        let secs = start.elapsed().as_secs_f64();
        match &v {
            Ok(d) => report(format!("criterion {n}: PASS: {d} [{secs:.1}s]")),
            Err(d) => report(format!("criterion {n}: FAIL: {d} [{secs:.1}s]")),
        }
        results.push((n, v));
    };
    record(1, &mut criterion_1);
    record(7, &mut criterion_7);
    record(4, &mut criterion_4);
    record(5, &mut criterion_5);
    record(2, &mut || criterion_2(&mut found));
    record(3, &mut || criterion_3(&mut found));
    record(6, &mut || criterion_6(&found));

    results.sort_by_key(|r| r.0);
    report("summary:".to_string());
    for (n, v) in &results {
        report(format!("criterion {n}: {}", if v.is_ok() { "PASS" } else { "FAIL" }));
    }
    let failed: Vec<usize> = results.iter().filter(|r| r.1.is_err()).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
