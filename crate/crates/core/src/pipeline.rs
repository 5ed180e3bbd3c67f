//! End-to-end synthesis: template, entailments, reduction, solver, then the
//! independent checker as a gate before a certificate is accepted.
//!
//! Transition assignments are tried by a bounded pool of workers; the
//! first validated certificate cancels the rest. With the portfolio
//! strategy the linear stage runs over all assignments first, then the
//! exact stage with the time that remains.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::automaton::Ldba;
use crate::certificate::{check, CertificateSolution, CheckError, CheckOptions, CheckReport, probability_bound};
use crate::constraints::{enumerate_assignments, generate, render_entailments, GenerateError, TransitionAssignment, MAX_ASSIGNMENTS};
use crate::model::SdsModel;
use crate::poly::{fmt_rational, Rational};
use crate::positivstellensatz::reduce_all;
use crate::smtbridge::{emit, solve_system, SolverError, Status};
use crate::template::{
    add_side_constraints, controller_menu, instantiate, Encoding, LiveScope, Mode, OptionsError, Strategy, SynthesisOptions,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Options(#[from] OptionsError),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub synthesis: SynthesisOptions,
    pub solver_cmd: String,
    pub workers: usize,
    pub seed: u64,
    pub dump_smt: bool,
    pub dump_entailments: bool,
    /// Sampling box handed to the checker for nonlinear certificates.
    pub check_box: Option<Vec<(Rational, Rational)>>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            synthesis: SynthesisOptions::default(),
            solver_cmd: crate::smtbridge::DEFAULT_SOLVER.into(),
            workers: 1,
            seed: 0,
            dump_smt: false,
            dump_entailments: false,
            check_box: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Attempt {
    pub assignment: String,
    pub stage: String,
    pub status: String,
    pub seconds: f64,
    pub unknowns: usize,
    pub constraints: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ManifestOptions {
    pub mode: String,
    pub degree: u32,
    pub ninv: usize,
    pub prob: String,
    pub encoding: String,
    pub l1_scope: String,
    pub sos_degree: u32,
    pub strategy: String,
    pub solver_cmd: String,
    pub timeout_secs: u64,
    pub workers: usize,
    pub seed: u64,
}

/// What a run did. Exactly one of `certificate` and `failure` is set.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub model: String,
    pub automaton: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_probability: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<String>,
    pub total_seconds: f64,
    pub options: ManifestOptions,
    pub attempts: Vec<Attempt>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

pub struct SynthesisResult {
    pub manifest: RunManifest,
    pub certificate: Option<CertificateSolution>,
    pub report: Option<CheckReport>,
    /// Rendered entailments and SMT queries, by file name.
    pub dumps: Vec<(String, String)>,
}

impl SynthesisResult {
    pub fn succeeded(&self) -> bool {
        self.certificate.is_some()
    }
}

fn encoding_name(e: Encoding) -> &'static str {
    match e {
        Encoding::Additive => "additive",
        Encoding::Strict => "strict",
    }
}

fn scope_name(s: LiveScope) -> &'static str {
    match s {
        LiveScope::SafeRegion => "safe-region",
        LiveScope::Invariant => "invariant",
    }
}

/// Model/mode compatibility on top of [`SynthesisOptions::validate`].
pub fn validate_inputs(model: &SdsModel, a: &Ldba, opts: &SynthesisOptions) -> Result<(), OptionsError> {
    opts.validate()?;
    match opts.mode {
        Mode::Control if model.input_dim() == 0 => Err(OptionsError::NoInputs),
        Mode::Verify if model.input_dim() > 0 => {
            let ok = model
                .controller
                .as_ref()
                .is_some_and(|c| a.states.iter().all(|q| c.for_state(q).is_some()));
            if ok {
                Ok(())
            } else {
                Err(OptionsError::NoController)
            }
        }
        _ => Ok(()),
    }
}

pub fn check_options(opts: &PipelineOptions) -> CheckOptions {
    CheckOptions {
        live_scope: opts.synthesis.live_scope,
        encoding: opts.synthesis.encoding,
        bounding_box: opts.check_box.clone(),
        seed: opts.seed,
        ..CheckOptions::default()
    }
}

struct Found {
    order: usize,
    certificate: CertificateSolution,
    report: Option<CheckReport>,
    check_note: String,
}

/// Outcome of one assignment under one stage.
enum Tried {
    Accepted(Box<Found>),
    Rejected,
}

#[allow(clippy::too_many_arguments)]
fn try_assignment(
    model: &SdsModel,
    a: &Ldba,
    asg: &TransitionAssignment,
    order: usize,
    stage: Strategy,
    opts: &PipelineOptions,
    deadline: Instant,
    cancel: &AtomicBool,
    attempts: &Mutex<Vec<Attempt>>,
    dumps: &Mutex<Vec<(String, String)>>,
) -> Result<Tried, PipelineError> {
    let so = &opts.synthesis;
    let ts = instantiate(model, a, so);
    let es = generate(model, a, &ts, asg, so)?;
    let linear = stage == Strategy::Linear;
    let mut sys = reduce_all(&es, ts.symbols.clone(), so.sos_degree, so.sos_squares, linear);
    add_side_constraints(&mut sys, &ts, so, linear);
    if linear {
        for (u, vals) in controller_menu(&ts, model, so.menu_points) {
            sys.restrict_to_menu(u, &vals);
        }
    }
    let tag = asg.tag(a);
    if opts.dump_entailments && stage == so.strategy.stages()[0] {
        let text = format!("# assignment {}\n{}", asg.describe(a), render_entailments(&es, model, &ts));
        dumps.lock().unwrap().push(("entailments.txt".into(), text));
    }
    if opts.dump_smt {
        dumps
            .lock()
            .unwrap()
            .push((format!("query-{tag}-{}.smt2", stage.as_str()), emit(&sys)));
    }
    let (unknowns, eqs, ineqs) = sys.stats();
    let left = deadline.saturating_duration_since(Instant::now());
    let mut attempt = Attempt {
        assignment: asg.describe(a),
        stage: stage.as_str().into(),
        status: String::new(),
        seconds: 0.0,
        unknowns,
        constraints: eqs + ineqs + sys.disjunctions.len(),
        note: None,
    };
    if left.is_zero() {
        attempt.status = Status::Timeout.as_str().into();
        attempt.note = Some("no time left in the budget".into());
        attempts.lock().unwrap().push(attempt);
        return Ok(Tried::Rejected);
    }
    let out = solve_system(&sys, &opts.solver_cmd, left, Some(cancel))?;
    attempt.status = out.status.as_str().into();
    attempt.seconds = out.wall_time;
    let Some(values) = out.assignment else {
        if out.status == Status::SatUnverified {
            attempt.note = out.raw.lines().find(|l| l.contains("bridge:")).map(|l| l.trim_start_matches("; ").to_string());
        }
        attempts.lock().unwrap().push(attempt);
        return Ok(Tried::Rejected);
    };
    let cert = match CertificateSolution::from_solution(a, &ts, asg, &values) {
        Ok(c) => c,
        Err(e) => {
            attempt.note = Some(format!("solution rejected: {e}"));
            attempts.lock().unwrap().push(attempt);
            return Ok(Tried::Rejected);
        }
    };
    let (report, check_note) = match check(model, a, &cert, &check_options(opts)) {
        Ok(r) if r.passed() => {
            let note = if r.exact { "pass (exact)" } else { "pass (sampling)" };
            (Some(r), note.to_string())
        }
        Ok(r) => {
            let first = r.failures().next().map(|f| format!("{} {}", f.condition.label(), f.label));
            attempt.note = Some(format!("independent check failed: {}", first.unwrap_or_default()));
            attempts.lock().unwrap().push(attempt);
            return Ok(Tried::Rejected);
        }
        Err(CheckError::NoBoundingBox(_)) => (None, "skipped: nonlinear certificate and no check box".to_string()),
        Err(e) => {
            attempt.note = Some(format!("independent check error: {e}"));
            attempts.lock().unwrap().push(attempt);
            return Ok(Tried::Rejected);
        }
    };
    attempts.lock().unwrap().push(attempt);
    Ok(Tried::Accepted(Box::new(Found {
        order,
        certificate: cert,
        report,
        check_note,
    })))
}

/// Run one stage over all assignments with a bounded worker pool.
fn run_stage(
    model: &SdsModel,
    a: &Ldba,
    assignments: &[TransitionAssignment],
    stage: Strategy,
    opts: &PipelineOptions,
    deadline: Instant,
    attempts: &Mutex<Vec<Attempt>>,
    dumps: &Mutex<Vec<(String, String)>>,
) -> Result<Option<Found>, PipelineError> {
    let next = AtomicUsize::new(0);
    let cancel = AtomicBool::new(false);
    let found: Mutex<Option<Found>> = Mutex::new(None);
    let error: Mutex<Option<PipelineError>> = Mutex::new(None);
    let workers = opts.workers.clamp(1, assignments.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if cancel.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= assignments.len() {
                    break;
                }
                match try_assignment(model, a, &assignments[i], i, stage, opts, deadline, &cancel, attempts, dumps) {
                    Ok(Tried::Accepted(f)) => {
                        let mut slot = found.lock().unwrap();
                        if slot.as_ref().map_or(true, |g| f.order < g.order) {
                            *slot = Some(*f);
                        }
                        cancel.store(true, Ordering::SeqCst);
                    }
                    Ok(Tried::Rejected) => {}
                    Err(e) => {
                        error.lock().unwrap().get_or_insert(e);
                        cancel.store(true, Ordering::SeqCst);
                    }
                }
            });
        }
    });
    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(found.into_inner().unwrap())
}

pub fn synthesize(
    model: &SdsModel,
    a: &Ldba,
    model_name: &str,
    automaton_name: &str,
    opts: &PipelineOptions,
) -> Result<SynthesisResult, PipelineError> {
    let so = &opts.synthesis;
    validate_inputs(model, a, so)?;
    let start = Instant::now();
    let budget = Duration::from_secs(so.timeout_secs);
    let assignments = enumerate_assignments(a, MAX_ASSIGNMENTS)?;
    let attempts = Mutex::new(Vec::new());
    let dumps = Mutex::new(Vec::new());
    let stages = so.strategy.stages();
    let mut found = None;
    for (i, &stage) in stages.iter().enumerate() {
        // earlier stages of a portfolio get half of what is left
        let left = budget.saturating_sub(start.elapsed());
        let share = if i + 1 < stages.len() { left / 2 } else { left };
        let deadline = Instant::now() + share;
        found = run_stage(model, a, &assignments, stage, opts, deadline, &attempts, &dumps)?;
        if found.is_some() {
            break;
        }
    }
    let options = ManifestOptions {
        mode: match so.mode {
            Mode::Verify => "verify".into(),
            Mode::Control => "control".into(),
        },
        degree: so.degree,
        ninv: so.invariant_count,
        prob: fmt_rational(&so.probability),
        encoding: encoding_name(so.encoding).into(),
        l1_scope: scope_name(so.live_scope).into(),
        sos_degree: so.sos_degree,
        strategy: so.strategy.as_str().into(),
        solver_cmd: opts.solver_cmd.clone(),
        timeout_secs: so.timeout_secs,
        workers: opts.workers,
        seed: opts.seed,
    };
    let mut manifest = RunManifest {
        model: model_name.into(),
        automaton: automaton_name.into(),
        verdict: "unknown".into(),
        certificate: None,
        failure: None,
        certified_probability: None,
        check: None,
        total_seconds: start.elapsed().as_secs_f64(),
        options,
        attempts: attempts.into_inner().unwrap(),
    };
    let dumps = dumps.into_inner().unwrap();
    match found {
        Some(f) => {
            manifest.verdict = "success".into();
            manifest.certificate = Some("certificate".into());
            let k = &f.certificate.constants;
            manifest.certified_probability = probability_bound(&k.eta_s, &k.eps_s, &k.m_s).ok().map(|b| b.decimal(10));
            manifest.check = Some(f.check_note);
            Ok(SynthesisResult {
                manifest,
                certificate: Some(f.certificate),
                report: f.report,
                dumps,
            })
        }
        None => {
            manifest.failure = Some(
                "Unknown: no transition assignment produced a validated certificate within the budget. \
                 This does not show that the property fails; the template method is incomplete."
                    .into(),
            );
            Ok(SynthesisResult {
                manifest,
                certificate: None,
                report: None,
                dumps,
            })
        }
    }
}

/// Write `manifest`, `certificate`, `report` and any dumps into `dir`.
pub fn write_run_dir(dir: &Path, model: &SdsModel, result: &SynthesisResult) -> Result<(), PipelineError> {
    let io = |path: PathBuf| move |source| PipelineError::Io { path, source };
    std::fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(io(p.clone()))
    };
    write("manifest", &result.manifest.render())?;
    if let Some(c) = &result.certificate {
        write("certificate", &c.render(model))?;
    }
    if let Some(r) = &result.report {
        write("report", &r.render())?;
    }
    // several assignments may contribute to one dump file
    let mut merged: std::collections::BTreeMap<&str, String> = std::collections::BTreeMap::new();
    for (name, text) in &result.dumps {
        let slot = merged.entry(name.as_str()).or_default();
        if !slot.is_empty() {
            slot.push('\n');
        }
        slot.push_str(text);
    }
    for (name, text) in merged {
        write(name, &text)?;
    }
    Ok(())
}
