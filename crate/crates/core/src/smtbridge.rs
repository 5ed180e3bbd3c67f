//! SMT-LIB2 emission for existential systems and an external solver driver.
//!
//! One solver process per query. The command is a whitespace-separated
//! template; an argument containing `{file}` receives the path of a
//! temporary script file, otherwise the script is piped to standard input.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::thread;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::poly::{Coeff, Rational, Symbols, Unknown};
use crate::positivstellensatz::{ExConstraint, ExistentialSystem, Rel};

pub const DEFAULT_SOLVER: &str = "z3 -in";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    SolverError,
    /// The solver said sat but its model fails exact re-validation.
    SatUnverified,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Sat => "sat",
            Status::Unsat => "unsat",
            Status::Unknown => "unknown",
            Status::Timeout => "timeout",
            Status::SolverError => "solver-error",
            Status::SatUnverified => "sat-unverified",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub status: Status,
    /// Present iff `status == Sat`.
    pub assignment: Option<BTreeMap<Unknown, Rational>>,
    /// Solver transcript (stdout, then stderr) plus bridge diagnostics.
    pub raw: String,
    pub wall_time: f64,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("empty solver command")]
    EmptyCommand,
    #[error("cannot start solver `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        #[source]
        source: std::io::Error,
    },
    #[error("i/o error talking to the solver: {0}")]
    Io(#[from] std::io::Error),
}

fn is_simple_symbol(s: &str) -> bool {
    const EXTRA: &str = "~!@$%^&*_-+=<>.?/";
    !s.is_empty()
        && !s.starts_with(|c: char| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || EXTRA.contains(c))
}

/// SMT-LIB symbol for an unknown name.
pub fn smt_symbol(name: &str) -> String {
    if is_simple_symbol(name) {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

/// SMT-LIB literal for a rational.
pub fn smt_rational(r: &Rational) -> String {
    let mag = if r.is_integer() {
        r.numer().abs().to_string()
    } else {
        format!("(/ {} {})", r.numer().abs(), r.denom())
    };
    if r.is_negative() {
        format!("(- {mag})")
    } else {
        mag
    }
}

fn smt_term(c: &Coeff, symbols: &Symbols, binary: &BTreeSet<Unknown>) -> String {
    let mut terms = Vec::new();
    for (m, k) in c.terms() {
        let mut factors = Vec::new();
        let mut guards = Vec::new();
        for &(u, e) in m.powers() {
            if binary.contains(&u) {
                // b^e = b for b in {0, 1}
                guards.push(smt_symbol(symbols.name(u)));
                continue;
            }
            for _ in 0..e {
                factors.push(smt_symbol(symbols.name(u)));
            }
        }
        if !k.is_one() || factors.is_empty() {
            factors.insert(0, smt_rational(k));
        }
        let body = if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            format!("(* {})", factors.join(" "))
        };
        terms.push(match guards.len() {
            0 => body,
            1 => format!("(ite {} {body} 0)", guards[0]),
            _ => format!("(ite (and {}) {body} 0)", guards.join(" ")),
        });
    }
    match terms.len() {
        0 => "0".into(),
        1 => terms.pop().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

fn smt_atom(c: &ExConstraint, symbols: &Symbols, binary: &BTreeSet<Unknown>) -> String {
    let all_negative = !c.poly.is_zero() && c.poly.terms().all(|(_, k)| k.is_negative());
    match c.rel {
        Rel::Eq => format!("(= {} 0)", smt_term(&c.poly, symbols, binary)),
        Rel::Ge if all_negative => format!("(<= {} 0)", smt_term(&-&c.poly, symbols, binary)),
        Rel::Ge => format!("(>= {} 0)", smt_term(&c.poly, symbols, binary)),
    }
}

/// Deterministic SMT-LIB2 script for the system.
pub fn emit(sys: &ExistentialSystem) -> String {
    let mut out = String::new();
    let logic = if sys.binary.is_empty() && sys.disjunctions.is_empty() {
        "(set-logic QF_NRA)\n"
    } else {
        ""
    };
    out.push_str(logic);
    for u in sys.symbols.iter() {
        let sort = if sys.binary.contains(&u) { "Bool" } else { "Real" };
        let _ = writeln!(out, "(declare-const {} {sort})", smt_symbol(sys.symbols.name(u)));
    }
    if sys.constraints.is_empty() && sys.disjunctions.is_empty() {
        out.push_str("(assert true)\n");
    }
    for c in &sys.constraints {
        let _ = writeln!(out, "; {}", c.label.replace('\n', " "));
        let _ = writeln!(out, "(assert {})", smt_atom(c, &sys.symbols, &sys.binary));
    }
    for d in &sys.disjunctions {
        let _ = writeln!(out, "; {}", d.label.replace('\n', " "));
        let branches: Vec<String> = d
            .branches
            .iter()
            .map(|b| {
                let atoms: Vec<String> = b.iter().map(|c| smt_atom(c, &sys.symbols, &sys.binary)).collect();
                format!("(and {})", atoms.join(" "))
            })
            .collect();
        let _ = writeln!(out, "(assert (or {}))", branches.join(" "));
    }
    out.push_str("(check-sat)\n");
    if !sys.symbols.is_empty() {
        let names: Vec<String> = sys.symbols.iter().map(|u| smt_symbol(sys.symbols.name(u))).collect();
        let _ = writeln!(out, "(get-value ({}))", names.join(" "));
    }
    out
}

// ---------------------------------------------------------------------------
// S-expressions and model parsing.

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

pub fn parse_sexps(text: &str) -> Result<Vec<Sexp>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    while i < chars.len() {
        let c = chars[i];
        match c {
            ';' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => {
                stack.push(Vec::new());
                i += 1;
            }
            ')' => {
                let done = stack.pop().ok_or("unbalanced `)`")?;
                stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::List(done));
                i += 1;
            }
            '|' => {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '|' {
                    i += 1;
                }
                let s: String = chars[start..i.min(chars.len())].iter().collect();
                stack.last_mut().unwrap().push(Sexp::Atom(s));
                i += 1;
            }
            '"' => {
                let start = i;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                i += 1;
                let s: String = chars[start..i.min(chars.len())].iter().collect();
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
            c if c.is_whitespace() => i += 1,
            _ => {
                let start = i;
                while i < chars.len() && !chars[i].is_whitespace() && !"()|;".contains(chars[i]) {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                stack.last_mut().unwrap().push(Sexp::Atom(s));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced `(`".into());
    }
    Ok(stack.pop().unwrap())
}

/// Exact value of a decimal or integer literal.
pub fn parse_decimal(s: &str) -> Option<Rational> {
    let (ip, fp) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if ip.is_empty() && fp.is_empty() {
        return None;
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{ip}{fp}");
    let n: num_bigint::BigInt = digits.parse().ok()?;
    let d = num_traits::pow(num_bigint::BigInt::from(10), fp.len());
    Some(Rational::new(n, d))
}

/// Evaluate a model value term; algebraic numbers are rejected.
pub fn eval_value(s: &Sexp) -> Result<Rational, String> {
    match s {
        Sexp::Atom(a) if a == "true" => Ok(Rational::one()),
        Sexp::Atom(a) if a == "false" => Ok(Rational::zero()),
        Sexp::Atom(a) => parse_decimal(a).ok_or_else(|| format!("not a rational literal: {a}")),
        Sexp::List(items) => {
            let Some(Sexp::Atom(head)) = items.first() else {
                return Err("malformed value".into());
            };
            let args: Result<Vec<Rational>, String> = items[1..].iter().map(eval_value).collect();
            match head.as_str() {
                "-" => {
                    let a = args?;
                    match a.len() {
                        1 => Ok(-a[0].clone()),
                        n if n >= 2 => Ok(a[1..].iter().fold(a[0].clone(), |acc, x| acc - x)),
                        _ => Err("malformed negation".into()),
                    }
                }
                "+" => Ok(args?.iter().fold(Rational::zero(), |acc, x| acc + x)),
                "*" => Ok(args?.iter().fold(Rational::one(), |acc, x| acc * x)),
                "/" => {
                    let a = args?;
                    if a.len() != 2 || a[1].is_zero() {
                        return Err("malformed division".into());
                    }
                    Ok(&a[0] / &a[1])
                }
                "root-obj" => Err("algebraic number in model".into()),
                other => Err(format!("unsupported value term `{other}`")),
            }
        }
    }
}

/// Parse a `get-value` response into named values.
pub fn parse_model(text: &str) -> Result<BTreeMap<String, Rational>, String> {
    let mut out = BTreeMap::new();
    for top in parse_sexps(text)? {
        let Sexp::List(pairs) = top else { continue };
        for p in pairs {
            let Sexp::List(kv) = p else {
                return Err("malformed model entry".into());
            };
            if kv.len() != 2 {
                return Err("malformed model entry".into());
            }
            let Sexp::Atom(name) = &kv[0] else {
                return Err("malformed model entry".into());
            };
            out.insert(name.clone(), eval_value(&kv[1])?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Process driver.

fn read_all(mut r: impl Read + Send + 'static) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut s = String::new();
        let _ = r.read_to_string(&mut s);
        s
    })
}

/// Run the solver on a script. `cancel` aborts the process when set.
pub fn solve(
    script: &str,
    solver_cmd: &str,
    timeout: Duration,
    cancel: Option<&AtomicBool>,
) -> Result<(Status, String, String, f64), SolverError> {
    let parts: Vec<&str> = solver_cmd.split_whitespace().collect();
    let (prog, args) = parts.split_first().ok_or(SolverError::EmptyCommand)?;
    let uses_file = args.iter().any(|a| a.contains("{file}"));
    let tmp = if uses_file {
        let mut f = tempfile::Builder::new().prefix("ldbsm-").suffix(".smt2").tempfile()?;
        f.write_all(script.as_bytes())?;
        f.flush()?;
        Some(f)
    } else {
        None
    };
    let args: Vec<String> = args
        .iter()
        .map(|a| match &tmp {
            Some(f) => a.replace("{file}", &f.path().to_string_lossy()),
            None => a.to_string(),
        })
        .collect();
    let start = Instant::now();
    let mut child = Command::new(prog)
        .args(&args)
        .stdin(if uses_file { Stdio::null() } else { Stdio::piped() })
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SolverError::Spawn {
            cmd: solver_cmd.to_string(),
            source,
        })?;
    let writer = child.stdin.take().map(|mut stdin| {
        let script = script.to_string();
        thread::spawn(move || {
            let _ = stdin.write_all(script.as_bytes());
        })
    });
    let out = read_all(child.stdout.take().expect("piped stdout"));
    let err = read_all(child.stderr.take().expect("piped stderr"));
    let mut killed = None;
    loop {
        if child.try_wait()?.is_some() {
            break;
        }
        if start.elapsed() >= timeout {
            let _ = child.kill();
            killed = Some(Status::Timeout);
            break;
        }
        if cancel.is_some_and(|c| c.load(Ordering::Relaxed)) {
            let _ = child.kill();
            killed = Some(Status::Unknown);
            break;
        }
        thread::sleep(Duration::from_millis(10));
    }
    let exit = child.wait()?;
    if let Some(w) = writer {
        let _ = w.join();
    }
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    let wall = start.elapsed().as_secs_f64();
    drop(tmp);
    if let Some(s) = killed {
        return Ok((s, stdout, stderr, wall));
    }
    let verdict = stdout.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let status = match verdict {
        "sat" => Status::Sat,
        "unsat" => Status::Unsat,
        "unknown" => Status::Unknown,
        "timeout" => Status::Timeout,
        _ => Status::SolverError,
    };
    let status = if status != Status::SolverError || exit.success() {
        status
    } else {
        Status::SolverError
    };
    Ok((status, stdout, stderr, wall))
}

/// Emit, solve, parse and re-validate a system.
pub fn solve_system(
    sys: &ExistentialSystem,
    solver_cmd: &str,
    timeout: Duration,
    cancel: Option<&AtomicBool>,
) -> Result<SolverOutcome, SolverError> {
    let script = emit(sys);
    let (status, stdout, stderr, wall) = solve(&script, solver_cmd, timeout, cancel)?;
    let mut raw = stdout.clone();
    if !stderr.is_empty() {
        raw.push_str("\n; stderr\n");
        raw.push_str(&stderr);
    }
    if status != Status::Sat {
        return Ok(SolverOutcome {
            status,
            assignment: None,
            raw,
            wall_time: wall,
        });
    }
    let body = stdout.trim_start().strip_prefix("sat").unwrap_or("");
    let fail = |raw: &mut String, why: String| {
        raw.push_str(&format!("\n; bridge: {why}\n"));
    };
    let named = match parse_model(body) {
        Ok(m) => m,
        Err(e) => {
            fail(&mut raw, format!("model rejected: {e}"));
            return Ok(SolverOutcome {
                status: Status::Unknown,
                assignment: None,
                raw,
                wall_time: wall,
            });
        }
    };
    let mut assignment = BTreeMap::new();
    for u in sys.symbols.iter() {
        let name = sys.symbols.name(u);
        let key = named
            .get(name)
            .or_else(|| named.get(&smt_symbol(name)))
            .cloned()
            // unconstrained unknowns may be omitted by some solvers
            .unwrap_or_else(Rational::zero);
        assignment.insert(u, key);
    }
    let bad = sys.violations(&assignment);
    if !bad.is_empty() {
        fail(
            &mut raw,
            format!("{} constraints fail exact re-validation, first: {}", bad.len(), bad[0]),
        );
        return Ok(SolverOutcome {
            status: Status::SatUnverified,
            assignment: None,
            raw,
            wall_time: wall,
        });
    }
    Ok(SolverOutcome {
        status: Status::Sat,
        assignment: Some(assignment),
        raw,
        wall_time: wall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{int, rat};
    use crate::positivstellensatz::ExConstraint;

    fn solver() -> String {
        std::env::var("LDBSM_SOLVER").unwrap_or_else(|_| DEFAULT_SOLVER.to_string())
    }

    fn system(build: impl FnOnce(&mut Symbols) -> Vec<ExConstraint>) -> ExistentialSystem {
        let mut s = Symbols::new();
        let cs = build(&mut s);
        ExistentialSystem {
            symbols: s,
            constraints: cs,
            ..Default::default()
        }
    }

    #[test]
    fn smallest_script() {
        let sys = system(|s| {
            let eta = s.fresh("eta_S");
            vec![ExConstraint::new("eta", -Coeff::unknown(eta), Rel::Ge)]
        });
        let text = emit(&sys);
        assert_eq!(
            text,
            "(set-logic QF_NRA)\n(declare-const eta_S Real)\n; eta\n(assert (<= eta_S 0))\n(check-sat)\n(get-value (eta_S))\n"
        );
        assert_eq!(emit(&sys), text);
    }

    #[test]
    fn threshold_constraint_rendering() {
        let sys = system(|s| {
            let (eta, eps, m) = (s.fresh("eta_S"), s.fresh("eps_S"), s.fresh("M_S"));
            let (u, l) = (Coeff::unknown, rat(-46, 5));
            let lhs = &(&u(m) * &u(m)).scale(&l) - &(&u(eta) * &u(eps)).scale(&int(8));
            vec![ExConstraint::new("threshold", lhs, Rel::Ge)]
        });
        let text = emit(&sys);
        assert!(
            text.contains("(assert (<= (+ (* 8 eta_S eps_S) (* (/ 46 5) M_S M_S)) 0))"),
            "{text}"
        );
    }

    #[test]
    fn literals_and_symbols() {
        assert_eq!(smt_rational(&rat(-3, 4)), "(- (/ 3 4))");
        assert_eq!(smt_rational(&int(7)), "7");
        assert_eq!(smt_symbol("vs_q0_x^2.y"), "vs_q0_x^2.y");
        assert_eq!(smt_symbol("vs_q 0"), "|vs_q 0|");
    }

    #[test]
    fn model_parsing() {
        let m = parse_model("((a (- 9.0)) (b (/ 5.0 16.0)) (|c d| 0.25) (e (- (/ 1 3))))").unwrap();
        assert_eq!(m["a"], int(-9));
        assert_eq!(m["b"], rat(5, 16));
        assert_eq!(m["c d"], rat(1, 4));
        assert_eq!(m["e"], rat(-1, 3));
        assert!(parse_model("((a (root-obj (+ (^ x 2) (- 2)) 1)))").is_err());
    }

    #[test]
    fn empty_system_is_sat() {
        let sys = ExistentialSystem::default();
        assert!(emit(&sys).contains("(assert true)"));
        let out = solve_system(&sys, &solver(), Duration::from_secs(30), None).unwrap();
        assert_eq!(out.status, Status::Sat);
    }

    #[test]
    fn pinned_value_is_sat() {
        let sys = system(|s| {
            let a = s.fresh("a");
            vec![
                ExConstraint::new("lo", &Coeff::unknown(a) - &Coeff::constant(int(1)), Rel::Ge),
                ExConstraint::new("hi", &Coeff::constant(int(1)) - &Coeff::unknown(a), Rel::Ge),
            ]
        });
        let out = solve_system(&sys, &solver(), Duration::from_secs(30), None).unwrap();
        assert_eq!(out.status, Status::Sat);
        assert_eq!(out.assignment.unwrap().values().next(), Some(&int(1)));
    }

    #[test]
    fn contradiction_is_unsat() {
        let sys = system(|s| {
            let a = s.fresh("a");
            vec![
                ExConstraint::new("pos", &Coeff::unknown(a) - &Coeff::constant(rat(1, 100)), Rel::Ge),
                ExConstraint::new("neg", -Coeff::unknown(a), Rel::Ge),
            ]
        });
        let out = solve_system(&sys, &solver(), Duration::from_secs(30), None).unwrap();
        assert_eq!(out.status, Status::Unsat);
        assert!(out.assignment.is_none());
    }

    #[test]
    fn file_placeholder_and_errors() {
        let sys = system(|s| {
            let a = s.fresh("a");
            vec![ExConstraint::new("eq", &Coeff::unknown(a) - &Coeff::constant(rat(1, 3)), Rel::Eq)]
        });
        let cmd = solver().replace(" -in", "") + " {file}";
        let out = solve_system(&sys, &cmd, Duration::from_secs(30), None).unwrap();
        assert_eq!(out.status, Status::Sat);
        assert_eq!(out.assignment.unwrap().values().next(), Some(&rat(1, 3)));
        assert!(matches!(
            solve_system(&sys, "definitely-not-a-solver-binary", Duration::from_secs(5), None),
            Err(SolverError::Spawn { .. })
        ));
        let out = solve_system(&sys, "false", Duration::from_secs(5), None).unwrap();
        assert_eq!(out.status, Status::SolverError);
    }

    #[test]
    fn timeout_and_cancel() {
        let (status, ..) = solve("", "sleep 5", Duration::from_millis(200), None).unwrap();
        assert_eq!(status, Status::Timeout);
        let flag = AtomicBool::new(true);
        let (status, ..) = solve("", "sleep 5", Duration::from_secs(10), Some(&flag)).unwrap();
        assert_eq!(status, Status::Unknown);
    }

    #[test]
    fn inexact_model_is_flagged() {
        // a fake solver answering with a rounded value for a = 1/3
        let sys = system(|s| {
            let a = s.fresh("a");
            vec![ExConstraint::new("eq", &Coeff::unknown(a).scale(&int(3)) - &Coeff::constant(int(1)), Rel::Eq)]
        });
        let dir = tempfile::tempdir().unwrap();
        let fake = dir.path().join("fake.sh");
        std::fs::write(&fake, "#!/bin/sh\ncat > /dev/null\necho sat\necho '((a 0.3333333333))'\n").unwrap();
        let cmd = format!("sh {}", fake.display());
        let out = solve_system(&sys, &cmd, Duration::from_secs(10), None).unwrap();
        assert_eq!(out.status, Status::SatUnverified);
        assert!(out.raw.contains("re-validation"));
    }
}
