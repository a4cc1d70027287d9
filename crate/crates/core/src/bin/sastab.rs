//! Command-line front end. Exit codes: 0 success, 1 verification failure,
//! 2 configuration or input error, 3 every seed overflowed.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sastab::config::{parse_seeds, ExperimentConfig};
use sastab::model::GradientReport;
use sastab::ode::{DescentReport, DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use sastab::stabilizer::{CInfinityReport, CnEstimate, WgcReport};
use sastab::{
    analyze, check_c_infinity, check_descent, gradient_check, integrate, load_config, read_trace,
    rng_stream, run_ensemble_trajectories, verify_wgc, window_descent_report, write_trace, Error,
    Mode, RunSummary, Verdict,
};

#[derive(Parser)]
#[command(name = "sastab", version, about = "Stochastic approximation with stabilized step sizes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory and write its trace CSV.
    Run(Common),
    /// Run every seed and write the summary JSON.
    Ensemble(Common),
    /// Audit W, the growth bound c_N and the scaled steps.
    Verify(Common),
    /// Integrate the limiting o.d.e. from x0.
    Ode {
        #[command(flatten)]
        common: Common,
        /// Integration end time.
        #[arg(long, default_value_t = 10.0)]
        t_end: f64,
    },
    /// Recompute diagnostics from a stored trace.
    Analyze {
        #[command(flatten)]
        common: Common,
        /// Trace CSV to read.
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Vanilla,
    Adaptive,
    Projection,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// `a..b` or `a,b,c`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Projection radius (overrides run.radius).
    #[arg(long)]
    radius: Option<f64>,
}

enum Failure {
    Verification,
    Input(String),
    AllOverflowed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Failure> {
        let mut cfg = load_config(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(s) = &self.seeds {
            cfg.run.seeds = parse_seeds(s).map_err(|m| Failure::Input(format!("--seeds: {m}")))?;
        }
        if let Some(h) = self.horizon {
            cfg.run.horizon = h;
        }
        let radius = self.radius.or(match cfg.mode {
            Mode::Projection { radius } => Some(radius),
            _ => None,
        });
        if let Some(m) = self.mode {
            cfg.mode = match m {
                ModeArg::Vanilla => Mode::Vanilla,
                ModeArg::Adaptive => Mode::Adaptive,
                ModeArg::Projection => Mode::Projection {
                    radius: radius.ok_or_else(|| Failure::Input("projection mode needs --radius".into()))?,
                },
            };
        } else if let (Some(r), Mode::Projection { .. }) = (self.radius, cfg.mode) {
            cfg.mode = Mode::Projection { radius: r };
        }
        Ok(cfg)
    }
}

fn emit(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Failure::Input(e.to_string()))
}

fn run_one(c: &Common) -> Result<(), Failure> {
    let cfg = c.load()?;
    let traj = cfg.engine()?.run(&cfg.run.x0, cfg.run.horizon, cfg.run.seed)?;
    let out = c.out.clone().or(cfg.output.trace.clone());
    match &out {
        Some(p) => write_trace(&traj, p)?,
        None => {
            let mut buf = Vec::new();
            sastab::trace::write_trace_to(&traj, &mut buf)?;
            emit(&String::from_utf8_lossy(&buf), None)?;
        }
    }
    let s = RunSummary::from_trajectory(cfg.run.seed, &traj, &cfg.problem);
    eprintln!(
        "seed {}: {} steps, sup |y| = {}, terminal y = {}, last scaled step = {:?}",
        s.seed, s.steps, s.sup_norm, s.terminal_y, s.last_scaled
    );
    if s.overflow {
        return Err(Failure::AllOverflowed);
    }
    Ok(())
}

fn ensemble(c: &Common) -> Result<(), Failure> {
    let cfg = c.load()?;
    let engine = cfg.engine()?;
    let runs = run_ensemble_trajectories(&engine, &cfg.run.x0, cfg.run.horizon, &cfg.run.seeds, cfg.run.workers);
    let mut summaries = Vec::with_capacity(runs.len());
    let mut violations = 0;
    for (seed, r) in cfg.run.seeds.iter().zip(runs) {
        let t = r?;
        violations += window_descent_report(&t, &cfg.problem, &cfg.diagnostics)?.violations();
        summaries.push(RunSummary::from_trajectory(*seed, &t, &cfg.problem));
    }
    let summary = sastab::trace::EnsembleSummary::new(&summaries, Some(violations))?;
    let a = &summary.aggregates;
    eprintln!(
        "{} seeds: overflow rate {}, max sup |y| {:?}, max last scaled {:?}, violated windows {}",
        summaries.len(),
        a.overflow_rate,
        a.max_sup_norm,
        a.max_last_scaled,
        violations
    );
    let out = c.out.clone().or(cfg.output.summary.clone());
    emit(&summary.to_json()?, out.as_deref())?;
    if summaries.iter().all(|s| s.overflow) {
        return Err(Failure::AllOverflowed);
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    problem: String,
    gradient: GradientSummary,
    descent: DescentReport,
    c_n: CnEstimate,
    wgc: WgcReport,
    c_infinity: CInfinityReport,
    passed: bool,
}

#[derive(Serialize)]
struct GradientSummary {
    points: usize,
    worst_rel_error: f64,
    passed: bool,
}

impl From<&GradientReport> for GradientSummary {
    fn from(r: &GradientReport) -> Self {
        GradientSummary {
            points: r.entries.len(),
            worst_rel_error: r.worst_rel_error(),
            passed: r.passed,
        }
    }
}

fn verify(c: &Common) -> Result<(), Failure> {
    let cfg = c.load()?;
    let p = &cfg.problem;
    let s = &cfg.stabilizer;
    let mut rng = rng_stream(s.seed, 3);
    let points: Vec<_> = (0..100).map(|_| s.sample_box.sample(&mut rng)).collect();
    let gradient = gradient_check(&p.lyapunov, &points, 1e-5);
    let descent = check_descent(p, s.threshold_m, u32::MAX, s.samples, &s.sample_box, &mut rng)?;
    let (stab, c_n) = cfg.calibrate()?;
    let wgc = verify_wgc(&stab, p, s.samples, &mut rng)?;
    let c_infinity = check_c_infinity(p, s.samples, &s.sample_box, &mut rng)?;
    let passed = gradient.passed && descent.verdict == Verdict::Pass && wgc.passed();
    eprintln!(
        "gradient {}, descent sup {:.6} ({:?}), c_N {:.6}, wgc violations {}, c_inf {:?}",
        if gradient.passed { "ok" } else { "FAILED" },
        descent.sup_wdot,
        descent.verdict,
        c_n.c_n,
        wgc.violations,
        c_infinity.verdict
    );
    let report = VerifyReport {
        problem: p.name.clone(),
        gradient: (&gradient).into(),
        descent,
        c_n,
        wgc,
        c_infinity,
        passed,
    };
    emit(&json(&report)?, c.out.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn ode(c: &Common, t_end: f64) -> Result<(), Failure> {
    let cfg = c.load()?;
    let flow = integrate(&cfg.problem.drift, &cfg.run.x0, t_end, DEFAULT_REL_TOL, DEFAULT_ABS_TOL)?;
    let mut text = String::from("t");
    for i in 0..cfg.problem.dim() {
        text.push_str(&format!(",u{i}"));
    }
    text.push('\n');
    for (t, u) in flow.times.iter().zip(&flow.states) {
        text.push_str(&format!("{t:?}"));
        for x in u.iter() {
            text.push_str(&format!(",{x:?}"));
        }
        text.push('\n');
    }
    eprintln!(
        "u({t_end}) = {} after {} accepted / {} rejected steps",
        flow.endpoint, flow.accepted_steps, flow.rejected_steps
    );
    emit(&text, c.out.as_deref())
}

fn analyze_trace(c: &Common, trace: &Path) -> Result<(), Failure> {
    let cfg = c.load()?;
    let traj = read_trace(trace)?;
    if traj.terminal.y.dim() != cfg.problem.dim() {
        return Err(Failure::Input(format!(
            "trace has dimension {}, problem {}",
            traj.terminal.y.dim(),
            cfg.problem.dim()
        )));
    }
    let report = analyze(&traj, &cfg.problem, &cfg.diagnostics)?;
    eprintln!(
        "{} windows, {} violated, last scaled step {:?}",
        report.windows.len(),
        report.violations(),
        report.last_scaled
    );
    emit(&json(&report)?, c.out.as_deref())?;
    if report.violations() > 0 {
        return Err(Failure::Verification);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run_one(c),
        Command::Ensemble(c) => ensemble(c),
        Command::Verify(c) => verify(c),
        Command::Ode { common, t_end } => ode(common, *t_end),
        Command::Analyze { common, trace } => analyze_trace(common, trace),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::AllOverflowed) => {
            eprintln!("every run overflowed");
            ExitCode::from(3)
        }
    }
}
