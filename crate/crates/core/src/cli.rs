//! Command-line front end. [`run`] returns the exit status and the text
//! to print, so the binary stays a two-line shim and tests can drive every
//! subcommand in-process.
//!
//! Exit statuses: 0 success or pass, 1 input error, 2 unknown, 3 check
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::automaton::{parse_ldba, shipped, Ldba};
use crate::certificate::{check, extract_policy, load_certificate, probability_bound, CheckOptions, PutinarCheck};
use crate::expr::ExprParser;
use crate::model::{load_model, SdsModel};
use crate::montecarlo::{simulate, SimConfig};
use crate::pipeline::{synthesize, write_run_dir, PipelineOptions};
use crate::poly::Rational;
use crate::smtbridge::DEFAULT_SOLVER;
use crate::template::{Encoding, LiveScope, Mode, Strategy, SynthesisOptions};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_CHECK_FAIL: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "ldbsm", version, about = "Supermartingale certificates for omega-regular specifications of stochastic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a certificate for a model with a fixed (or no) controller.
    Verify(SynthArgs),
    /// Synthesize a controller together with its certificate.
    Control(SynthArgs),
    /// Check a certificate file against a model and an automaton.
    Check(CheckArgs),
    /// Simulate the product system under a certificate's policy.
    Simulate(SimArgs),
}

#[derive(Args, Debug)]
struct Inputs {
    /// Model file (TOML).
    model: PathBuf,
    /// Automaton file, or the name of a shipped automaton such as "GF a".
    automaton: String,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncodingArg {
    Additive,
    Strict,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScopeArg {
    SafeRegion,
    Invariant,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Portfolio,
    Linear,
    Exact,
}

impl From<EncodingArg> for Encoding {
    fn from(e: EncodingArg) -> Self {
        match e {
            EncodingArg::Additive => Encoding::Additive,
            EncodingArg::Strict => Encoding::Strict,
        }
    }
}

impl From<ScopeArg> for LiveScope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::SafeRegion => LiveScope::SafeRegion,
            ScopeArg::Invariant => LiveScope::Invariant,
        }
    }
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Portfolio => Strategy::Portfolio,
            StrategyArg::Linear => Strategy::Linear,
            StrategyArg::Exact => Strategy::Exact,
        }
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Template degree.
    #[arg(long, default_value_t = 1)]
    degree: u32,
    /// Number of invariant polynomials per automaton state.
    #[arg(long, default_value_t = 1)]
    ninv: usize,
    /// Probability threshold, e.g. 0.9999 or 9999/10000.
    #[arg(long, default_value = "9999/10000")]
    prob: String,
    #[arg(long, value_enum, default_value = "additive")]
    encoding: EncodingArg,
    /// Degree of SOS multipliers for nonlinear entailments.
    #[arg(long, default_value_t = 2)]
    sos_degree: u32,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver_cmd: String,
    /// Wall-clock budget in seconds for the whole run.
    #[arg(long, default_value_t = 600)]
    timeout: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Write the SMT queries into the run directory.
    #[arg(long)]
    dump_smt: bool,
    /// Write the generated entailments into the run directory.
    #[arg(long)]
    dump_entailments: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where the liveness certificate must be non-negative.
    #[arg(long, value_enum, default_value = "safe-region")]
    l1_scope: ScopeArg,
    #[arg(long, value_enum, default_value = "portfolio")]
    strategy: StrategyArg,
    /// Grid size for constant controller terms in the linear stage.
    #[arg(long, default_value_t = 9)]
    menu_points: usize,
    /// Sampling box for checking nonlinear certificates, "lo:hi,lo:hi".
    #[arg(long = "box")]
    check_box: Option<String>,
    /// Run directory.
    #[arg(long, short, default_value = "ldbsm-run")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Certificate file (TOML).
    certificate: PathBuf,
    #[arg(long, value_enum, default_value = "additive")]
    encoding: EncodingArg,
    #[arg(long, value_enum, default_value = "safe-region")]
    l1_scope: ScopeArg,
    /// Sampling box for nonlinear obligations, "lo:hi,lo:hi".
    #[arg(long = "box")]
    check_box: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Try to prove nonlinear obligations with a Putinar system first.
    #[arg(long)]
    putinar: bool,
    #[arg(long, default_value_t = 2)]
    sos_degree: u32,
    #[arg(long, default_value = DEFAULT_SOLVER)]
    solver_cmd: String,
    /// Per-obligation solver timeout in seconds (Putinar mode).
    #[arg(long, default_value_t = 60)]
    timeout: u64,
}

#[derive(Args, Debug)]
struct SimArgs {
    #[command(flatten)]
    inputs: Inputs,
    certificate: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accepting-visit threshold k.
    #[arg(long, short = 'k', default_value_t = 10)]
    visits: u64,
    /// Fixed initial state "x1,x2,..."; repeat for several.
    #[arg(long)]
    x0: Vec<String>,
    /// Write per-run summaries as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Exit status plus what to print on stdout and stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn input_error(msg: impl std::fmt::Display) -> Self {
        Outcome {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        }
    }
}

pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Outcome {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            } else {
                Outcome {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            };
        }
    };
    let result = match cli.command {
        Command::Verify(a) => cmd_synth(a, Mode::Verify),
        Command::Control(a) => cmd_synth(a, Mode::Control),
        Command::Check(a) => cmd_check(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    result.unwrap_or_else(Outcome::input_error)
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
}

fn load_inputs(inputs: &Inputs) -> anyhow::Result<(SdsModel, Ldba)> {
    let model = load_model(&read(&inputs.model)?).map_err(|e| anyhow::anyhow!("{}: {e}", inputs.model.display()))?;
    let path = Path::new(&inputs.automaton);
    let text = if path.exists() {
        read(path)?
    } else if let Some(t) = shipped().get(inputs.automaton.as_str()) {
        t.to_string()
    } else {
        anyhow::bail!(
            "automaton `{}` is neither a file nor a shipped name ({})",
            inputs.automaton,
            shipped().keys().copied().collect::<Vec<_>>().join(", ")
        );
    };
    let a = parse_ldba(&text).map_err(|e| anyhow::anyhow!("{}: {e}", inputs.automaton))?;
    Ok((model, a))
}

fn parse_rational(s: &str) -> anyhow::Result<Rational> {
    let none = |_: &str| None;
    let p = ExprParser::new(&none).parse_poly(s).map_err(|e| anyhow::anyhow!("`{s}`: {}", e.message))?;
    match p.to_concrete() {
        Some(c) if c.is_constant() => Ok(c.constant_term()),
        _ => anyhow::bail!("`{s}` is not a number"),
    }
}

/// "lo:hi,lo:hi" with one interval per state variable.
fn parse_box(s: &str, dim: usize) -> anyhow::Result<Vec<(Rational, Rational)>> {
    let out = s
        .split(',')
        .map(|iv| {
            let (lo, hi) = iv.split_once(':').ok_or_else(|| anyhow::anyhow!("interval `{iv}` is not lo:hi"))?;
            let (lo, hi) = (parse_rational(lo.trim())?, parse_rational(hi.trim())?);
            anyhow::ensure!(lo <= hi, "empty interval `{iv}`");
            Ok((lo, hi))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    anyhow::ensure!(out.len() == dim, "box has {} intervals, the model has {dim} state variables", out.len());
    Ok(out)
}

fn cmd_synth(args: SynthArgs, mode: Mode) -> anyhow::Result<Outcome> {
    let (model, a) = load_inputs(&args.inputs)?;
    let synthesis = SynthesisOptions {
        degree: args.degree,
        invariant_count: args.ninv,
        probability: parse_rational(&args.prob)?,
        mode,
        encoding: args.encoding.into(),
        sos_degree: args.sos_degree,
        timeout_secs: args.timeout,
        live_scope: args.l1_scope.into(),
        strategy: args.strategy.into(),
        menu_points: args.menu_points,
        ..SynthesisOptions::default()
    };
    let check_box = args.check_box.as_deref().map(|b| parse_box(b, model.state_dim())).transpose()?;
    let opts = PipelineOptions {
        synthesis,
        solver_cmd: args.solver_cmd,
        workers: args.workers,
        seed: args.seed,
        dump_smt: args.dump_smt,
        dump_entailments: args.dump_entailments,
        check_box,
    };
    let mut out = Outcome::default();
    for w in model.coverage_warnings(10_000, args.seed) {
        let _ = writeln!(out.stderr, "warning: {w}");
    }
    let result = synthesize(
        &model,
        &a,
        &args.inputs.model.display().to_string(),
        &args.inputs.automaton,
        &opts,
    )?;
    write_run_dir(&args.out, &model, &result)?;
    for at in &result.manifest.attempts {
        let _ = writeln!(
            out.stdout,
            "{} [{}]: {} in {:.2}s{}",
            at.assignment,
            at.stage,
            at.status,
            at.seconds,
            at.note.as_ref().map(|n| format!(" ({n})")).unwrap_or_default()
        );
    }
    match &result.certificate {
        Some(c) => {
            let k = &c.constants;
            let bound = probability_bound(&k.eta_s, &k.eps_s, &k.m_s)?;
            let _ = writeln!(out.stdout, "success: certificate written to {}", args.out.join("certificate").display());
            let _ = writeln!(out.stdout, "certified probability >= {}", bound.decimal(10));
            let _ = writeln!(out.stdout, "independent check: {}", result.manifest.check.as_deref().unwrap_or("-"));
            if let Some(ctrl) = &c.controller {
                for (q, ps) in ctrl {
                    let rendered: Vec<String> = ps.iter().map(|p| model.render_poly(p)).collect();
                    let _ = writeln!(out.stdout, "controller at {q}: [{}]", rendered.join(", "));
                }
            }
            out.code = EXIT_OK;
        }
        None => {
            let _ = writeln!(out.stdout, "{}", result.manifest.failure.as_deref().unwrap_or("unknown"));
            out.code = EXIT_UNKNOWN;
        }
    }
    Ok(out)
}

fn cmd_check(args: CheckArgs) -> anyhow::Result<Outcome> {
    let (model, a) = load_inputs(&args.inputs)?;
    let cert = load_certificate(&read(&args.certificate)?, &model)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.certificate.display()))?;
    let opts = CheckOptions {
        live_scope: args.l1_scope.into(),
        encoding: args.encoding.into(),
        bounding_box: args.check_box.as_deref().map(|b| parse_box(b, model.state_dim())).transpose()?,
        samples: args.samples,
        seed: args.seed,
        putinar: args.putinar.then(|| PutinarCheck {
            solver_cmd: args.solver_cmd.clone(),
            sos_degree: args.sos_degree,
            squares: 2,
            timeout: Duration::from_secs(args.timeout),
        }),
    };
    let report = check(&model, &a, &cert, &opts)?;
    let mut out = Outcome {
        code: if report.passed() { EXIT_OK } else { EXIT_CHECK_FAIL },
        stdout: report.render(),
        stderr: String::new(),
    };
    if report.passed() {
        let k = &cert.constants;
        if let Ok(b) = probability_bound(&k.eta_s, &k.eps_s, &k.m_s) {
            let _ = writeln!(out.stdout, "certified probability >= {}", b.decimal(10));
        }
    }
    Ok(out)
}

fn cmd_simulate(args: SimArgs) -> anyhow::Result<Outcome> {
    let (model, a) = load_inputs(&args.inputs)?;
    let cert = load_certificate(&read(&args.certificate)?, &model)
        .map_err(|e| anyhow::anyhow!("{}: {e}", args.certificate.display()))?;
    let policy = extract_policy(&cert, &a, &model)?;
    let initial_points = if args.x0.is_empty() {
        None
    } else {
        let pts = args
            .x0
            .iter()
            .map(|p| p.split(',').map(|v| parse_rational(v.trim()).map(|r| crate::poly::to_f64(&r))).collect())
            .collect::<anyhow::Result<Vec<Vec<f64>>>>()?;
        Some(pts)
    };
    let cfg = SimConfig {
        horizon: args.horizon,
        runs: args.runs,
        seed: args.seed,
        accepting_visits: args.visits,
        initial_points,
    };
    let stats = simulate(&model, &a, &cert, &policy, &cfg)?;
    if let Some(path) = &args.csv {
        std::fs::write(path, stats.to_csv(&model.state_names)).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    }
    Ok(Outcome {
        code: EXIT_OK,
        stdout: stats.render(&cfg),
        stderr: String::new(),
    })
}
