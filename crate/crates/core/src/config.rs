//! Experiment files (TOML).
//!
//! ```toml
//! [problem]
//! builtin = "example1"          # or an inline definition, see below
//!
//! [schedule]
//! family = "harmonic"           # or "polynomial" with a0, b, gamma
//!
//! [stabilizer]
//! M = 1
//! N = 4                         # or "inf"
//! margin = 1.05
//! samples = 10000
//! box = [-5.0, 5.0]             # per-coordinate bounds for all sampling
//! seed = 0
//!
//! [run]
//! mode = "adaptive"             # "vanilla", "projection" (needs radius)
//! x0 = 3.0
//! horizon = 10000
//! seed = 42
//! seeds = "0..100"              # or "1,2,3" or [1, 2, 3]
//! workers = 4
//!
//! [diagnostics]
//! T = 1.0
//! m = 4
//! delta = 0.05
//! epsilon = 0.05
//!
//! [output]
//! trace = "trace.csv"
//! summary = "summary.json"
//! ```
//!
//! An inline problem replaces `builtin` with expressions:
//!
//! ```toml
//! [problem]
//! name = "cubic"
//! h = "-x^3"                    # or ["-x0", "-x1"] in higher dimension
//! W = "x^2"
//! grad_W = "2*x"
//! region = [-3.0, 3.0]
//! [problem.noise]
//! kind = "gaussian"             # "uniform" (lo, hi), "zero", "multiplicative" (scale, f)
//! sd = 1.0
//! ```
//!
//! Unknown keys are rejected; every error names the offending key.

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::analysis::DiagnosticsConfig;
use crate::engine::{Engine, Mode};
use crate::error::{Error, Result};
use crate::expr::{parse_expression, Expr};
use crate::model::{
    gradient_check, rng_stream, AdditiveDist, DriftField, LyapunovSpec, NoiseModel, SAProblem,
    StepSchedule,
};
use crate::ode::{check_descent, Verdict};
use crate::registry;
use crate::stabilizer::{
    estimate_c_n, CnEstimate, StabilizerConfig, UpperLevel, DEFAULT_MARGIN,
};
use crate::vector::{BoxRegion, RealVector};

#[derive(Clone, Debug, PartialEq)]
pub enum ProblemSource {
    Builtin(String),
    Inline,
}

#[derive(Clone, Debug)]
pub struct StabilizerSettings {
    pub threshold_m: u32,
    pub threshold_n: UpperLevel,
    pub margin: f64,
    pub samples: usize,
    pub sample_box: BoxRegion,
    /// Seed of the generator used for calibration and audits.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct RunSettings {
    pub x0: RealVector,
    pub horizon: usize,
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub workers: usize,
}

#[derive(Clone, Debug, Default)]
pub struct OutputPaths {
    pub trace: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub source: ProblemSource,
    pub problem: SAProblem,
    pub mode: Mode,
    pub stabilizer: StabilizerSettings,
    pub run: RunSettings,
    pub diagnostics: DiagnosticsConfig,
    pub output: OutputPaths,
}

impl ExperimentConfig {
    /// Estimates `c_N` on the configured box and builds the stabilizer.
    /// With `N = inf` the sup runs over all of `{W >= M}` in the box.
    pub fn calibrate(&self) -> Result<(StabilizerConfig, CnEstimate)> {
        let s = &self.stabilizer;
        let mut rng = rng_stream(s.seed, 1);
        let upper = match s.threshold_n {
            UpperLevel::Finite(n) => n,
            UpperLevel::Infinite => u32::MAX,
        };
        let est = estimate_c_n(
            &self.problem,
            s.threshold_m,
            upper,
            s.samples,
            s.margin,
            &s.sample_box,
            &mut rng,
        )?;
        let cfg = StabilizerConfig::new(
            s.threshold_m,
            s.threshold_n,
            s.margin,
            est.c_n,
            s.samples,
            s.sample_box.clone(),
        )?;
        Ok((cfg, est))
    }

    /// Engine for the configured mode; adaptive mode calibrates first.
    pub fn engine(&self) -> Result<Engine> {
        self.engine_with_mode(self.mode)
    }

    pub fn engine_with_mode(&self, mode: Mode) -> Result<Engine> {
        let stabilizer = match mode {
            Mode::Adaptive => Some(self.calibrate()?.0),
            _ => None,
        };
        Engine::new(self.problem.clone(), mode, stabilizer)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("<file>", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<toml>", e.message().to_string()))?;
    let root = Section::new("", &root);
    root.only(&["problem", "schedule", "stabilizer", "run", "diagnostics", "output"])?;

    let problem_sec = root.section("problem")?;
    let schedule = match root.opt_section("schedule")? {
        Some(s) => parse_schedule(&s)?,
        None => StepSchedule::Harmonic,
    };
    let stab_sec = root.opt_section("stabilizer")?;
    let threshold_m = match &stab_sec {
        Some(s) => s.opt_u32("M")?.unwrap_or(1),
        None => 1,
    };
    if threshold_m == 0 {
        return Err(Error::config("stabilizer.M", "stabilizer.M must be at least 1"));
    }
    let (source, problem) = parse_problem(&problem_sec, schedule, threshold_m)?;
    let stabilizer = parse_stabilizer(stab_sec.as_ref(), &problem, threshold_m)?;
    let (mode, run) = parse_run(&root.section("run")?, &problem)?;
    let diagnostics = match root.opt_section("diagnostics")? {
        Some(s) => parse_diagnostics(&s, threshold_m)?,
        None => DiagnosticsConfig {
            level_m: threshold_m + 3,
            ..DiagnosticsConfig::default()
        },
    };
    let output = match root.opt_section("output")? {
        Some(s) => {
            s.only(&["trace", "summary"])?;
            OutputPaths {
                trace: s.opt_str("trace")?.map(PathBuf::from),
                summary: s.opt_str("summary")?.map(PathBuf::from),
            }
        }
        None => OutputPaths::default(),
    };

    let cfg = ExperimentConfig {
        source,
        problem,
        mode,
        stabilizer,
        run,
        diagnostics,
        output,
    };
    if cfg.source == ProblemSource::Inline {
        audit_inline(&cfg)?;
    }
    Ok(cfg)
}

/// Typed access to one TOML table, remembering its key path.
struct Section<'a> {
    path: String,
    table: &'a Table,
}

impl<'a> Section<'a> {
    fn new(path: &str, table: &'a Table) -> Self {
        Section {
            path: path.to_string(),
            table,
        }
    }

    fn key(&self, k: &str) -> String {
        if self.path.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.path)
        }
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.table.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::config(
                self.key(k),
                format!("unknown key; expected one of: {}", allowed.join(", ")),
            )),
            None => Ok(()),
        }
    }

    fn get(&self, k: &str) -> Result<&'a Value> {
        self.table
            .get(k)
            .ok_or_else(|| Error::config(self.key(k), "missing key"))
    }

    fn mismatch(&self, k: &str, want: &str, got: &Value) -> Error {
        Error::config(self.key(k), format!("expected {want}, found {}", got.type_str()))
    }

    fn opt_section(&self, k: &str) -> Result<Option<Section<'a>>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section {
                path: self.key(k),
                table: t,
            })),
            Some(v) => Err(self.mismatch(k, "a table", v)),
        }
    }

    fn section(&self, k: &str) -> Result<Section<'a>> {
        self.opt_section(k)?
            .ok_or_else(|| Error::config(self.key(k), "missing section"))
    }

    fn opt_f64(&self, k: &str) -> Result<Option<f64>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(self.mismatch(k, "a number", v)),
        }
    }

    fn f64(&self, k: &str) -> Result<f64> {
        self.get(k)?;
        Ok(self.opt_f64(k)?.unwrap_or_default())
    }

    fn opt_u64(&self, k: &str) -> Result<Option<u64>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(self.mismatch(k, "a nonnegative integer", v)),
        }
    }

    fn opt_u32(&self, k: &str) -> Result<Option<u32>> {
        match self.opt_u64(k)? {
            None => Ok(None),
            Some(v) => u32::try_from(v)
                .map(Some)
                .map_err(|_| Error::config(self.key(k), format!("{v} is too large"))),
        }
    }

    fn opt_str(&self, k: &str) -> Result<Option<&'a str>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(self.mismatch(k, "a string", v)),
        }
    }

    fn str(&self, k: &str) -> Result<&'a str> {
        self.get(k)?;
        Ok(self.opt_str(k)?.unwrap_or_default())
    }

    /// A number or an array of numbers.
    fn opt_vector(&self, k: &str) -> Result<Option<Vec<f64>>> {
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(vec![*x])),
            Some(Value::Integer(i)) => Ok(Some(vec![*i as f64])),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(n) => Ok(*n as f64),
                    other => Err(Error::config(
                        format!("{}[{i}]", self.key(k)),
                        format!("expected a number, found {}", other.type_str()),
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(self.mismatch(k, "a number or array of numbers", v)),
        }
    }

    /// One expression or an array of them.
    fn opt_exprs(&self, k: &str) -> Result<Option<Vec<Expr>>> {
        let parse = |key: String, s: &str| {
            parse_expression(s).map_err(|e| Error::config(key, e.to_string()))
        };
        match self.table.get(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(vec![parse(self.key(k), s)?])),
            Some(Value::Array(items)) if !items.is_empty() => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::String(s) => parse(format!("{}[{i}]", self.key(k)), s),
                    other => Err(Error::config(
                        format!("{}[{i}]", self.key(k)),
                        format!("expected an expression string, found {}", other.type_str()),
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(self.mismatch(k, "an expression string or array of them", v)),
        }
    }

    fn exprs(&self, k: &str) -> Result<Vec<Expr>> {
        self.get(k)?;
        Ok(self.opt_exprs(k)?.unwrap_or_default())
    }
}

fn parse_schedule(s: &Section) -> Result<StepSchedule> {
    match s.str("family")? {
        "harmonic" => {
            s.only(&["family"])?;
            Ok(StepSchedule::Harmonic)
        }
        "polynomial" => {
            s.only(&["family", "a0", "b", "gamma"])?;
            let a0 = s.opt_f64("a0")?.unwrap_or(1.0);
            let b = s.opt_f64("b")?.unwrap_or(1.0);
            let gamma = s.f64("gamma")?;
            StepSchedule::polynomial(a0, b, gamma).map_err(|e| Error::config(s.key("family"), e.to_string()))
        }
        other => Err(Error::config(
            s.key("family"),
            format!("unknown schedule `{other}`; expected harmonic or polynomial"),
        )),
    }
}

fn parse_problem(s: &Section, schedule: StepSchedule, threshold_m: u32) -> Result<(ProblemSource, SAProblem)> {
    if let Some(name) = s.opt_str("builtin")? {
        s.only(&["builtin", "region"])?;
        let mut problem = registry::builtin(name)
            .map_err(|_| Error::config(s.key("builtin"), format!("unknown problem `{name}`; known: {}", registry::NAMES.join(", "))))?;
        problem.schedule = schedule;
        problem.lyapunov = problem.lyapunov.with_threshold(threshold_m);
        if s.table.contains_key("region") {
            problem.region = parse_box(s, "region", problem.dim())?;
        }
        return Ok((ProblemSource::Builtin(name.to_string()), problem));
    }
    s.only(&["name", "h", "W", "grad_W", "hessian_bound", "region", "noise"])?;
    let h = s.exprs("h")?;
    let d = h.len();
    let w = s.exprs("W")?;
    if w.len() != 1 {
        return Err(Error::config(s.key("W"), "W must be a single expression"));
    }
    let grad = s.exprs("grad_W")?;
    if grad.len() != d {
        return Err(Error::config(
            s.key("grad_W"),
            format!("expected {d} component(s) to match h, found {}", grad.len()),
        ));
    }
    for (key, list) in [("h", &h), ("W", &w), ("grad_W", &grad)] {
        check_arity(s, key, list, d)?;
    }
    let noise = parse_noise(&s.section("noise")?, d)?;
    let region = match s.table.get("region") {
        Some(_) => parse_box(s, "region", d)?,
        None => BoxRegion::cube(d, 10.0)?,
    };
    let hessian_bound = s.opt_f64("hessian_bound")?.unwrap_or(f64::INFINITY);
    let w = w.into_iter().next().unwrap_or(Expr::Num(0.0));
    let problem = SAProblem::new(
        s.opt_str("name")?.unwrap_or("inline"),
        DriftField::new(d, vector_fn(h)),
        noise,
        LyapunovSpec::new(move |x| eval_or_nan(&w, x), vector_fn(grad), hessian_bound, threshold_m),
        schedule,
        region,
    )?;
    Ok((ProblemSource::Inline, problem))
}

fn check_arity(s: &Section, key: &str, list: &[Expr], d: usize) -> Result<()> {
    match list.iter().map(Expr::arity).max() {
        Some(a) if a > d => Err(Error::config(
            s.key(key),
            format!("refers to x{} but the problem has dimension {d}", a - 1),
        )),
        _ => Ok(()),
    }
}

/// Evaluation errors (division by zero, negative sqrt) become NaN, which the
/// engine and the audits treat as overflow.
fn eval_or_nan(e: &Expr, x: &RealVector) -> f64 {
    e.eval(x.as_slice()).unwrap_or(f64::NAN)
}

fn vector_fn(components: Vec<Expr>) -> impl Fn(&RealVector) -> RealVector + Send + Sync + 'static {
    move |x| RealVector::new(components.iter().map(|e| eval_or_nan(e, x)).collect())
}

fn parse_noise(s: &Section, d: usize) -> Result<NoiseModel> {
    let invalid = |e: Error| Error::config(s.key("kind"), e.to_string());
    match s.str("kind")? {
        "zero" => {
            s.only(&["kind"])?;
            Ok(NoiseModel::zero(d))
        }
        "uniform" => {
            s.only(&["kind", "lo", "hi"])?;
            NoiseModel::additive(d, AdditiveDist::Uniform { lo: s.f64("lo")?, hi: s.f64("hi")? }).map_err(invalid)
        }
        "gaussian" => {
            s.only(&["kind", "mean", "sd"])?;
            let mean = s.opt_f64("mean")?.unwrap_or(0.0);
            NoiseModel::additive(d, AdditiveDist::Gaussian { mean, sd: s.f64("sd")? }).map_err(invalid)
        }
        "multiplicative" => {
            s.only(&["kind", "scale", "f"])?;
            let scale = s.exprs("scale")?;
            if scale.len() != d {
                return Err(Error::config(
                    s.key("scale"),
                    format!("expected {d} component(s), found {}", scale.len()),
                ));
            }
            check_arity(s, "scale", &scale, d)?;
            let f = s.exprs("f")?;
            if f.len() != 1 {
                return Err(Error::config(s.key("f"), "f must be a single expression"));
            }
            check_arity(s, "f", &f, d)?;
            let f = f.into_iter().next().unwrap_or(Expr::Num(0.0));
            Ok(NoiseModel::multiplicative(d, vector_fn(scale), move |x| eval_or_nan(&f, x)))
        }
        other => Err(Error::config(
            s.key("kind"),
            format!("unknown noise `{other}`; expected zero, uniform, gaussian or multiplicative"),
        )),
    }
}

/// `[lo, hi]` applied to every coordinate.
fn parse_box(s: &Section, k: &str, d: usize) -> Result<BoxRegion> {
    let v = s.opt_vector(k)?.unwrap_or_default();
    if v.len() != 2 {
        return Err(Error::config(s.key(k), "expected [lo, hi]"));
    }
    BoxRegion::new(vec![v[0]; d], vec![v[1]; d]).map_err(|e| Error::config(s.key(k), e.to_string()))
}

fn parse_stabilizer(s: Option<&Section>, problem: &SAProblem, threshold_m: u32) -> Result<StabilizerSettings> {
    let Some(s) = s else {
        return Ok(StabilizerSettings {
            threshold_m,
            threshold_n: UpperLevel::Finite(threshold_m * 4),
            margin: DEFAULT_MARGIN,
            samples: 10_000,
            sample_box: problem.region.clone(),
            seed: 0,
        });
    };
    s.only(&["M", "N", "margin", "samples", "box", "seed"])?;
    let threshold_n = match s.table.get("N") {
        None => UpperLevel::Finite(threshold_m * 4),
        Some(Value::String(t)) if t == "inf" => UpperLevel::Infinite,
        Some(_) => match s.opt_u32("N") {
            Ok(Some(n)) => UpperLevel::Finite(n),
            _ => {
                return Err(Error::config(
                    s.key("N"),
                    "expected a positive integer or \"inf\"",
                ))
            }
        },
    };
    if let UpperLevel::Finite(n) = threshold_n {
        if n <= threshold_m {
            return Err(Error::config(s.key("N"), "stabilizer.N must exceed stabilizer.M"));
        }
    }
    let margin = s.opt_f64("margin")?.unwrap_or(DEFAULT_MARGIN);
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(Error::config(s.key("margin"), "stabilizer.margin must exceed 1"));
    }
    let samples = s.opt_u64("samples")?.unwrap_or(10_000) as usize;
    if samples == 0 {
        return Err(Error::config(s.key("samples"), "stabilizer.samples must be positive"));
    }
    let sample_box = if s.table.contains_key("box") {
        parse_box(s, "box", problem.dim())?
    } else {
        problem.region.clone()
    };
    Ok(StabilizerSettings {
        threshold_m,
        threshold_n,
        margin,
        samples,
        sample_box,
        seed: s.opt_u64("seed")?.unwrap_or(0),
    })
}

/// `"a..b"` (half open), `"a,b,c"`, or an integer array.
pub fn parse_seeds(text: &str) -> std::result::Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad range start in `{text}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad range end in `{text}`"))?;
        if b <= a {
            return Err(format!("empty seed range `{text}`"));
        }
        return Ok((a..b).collect());
    }
    let seeds = text
        .split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|_| format!("bad seed `{}`", t.trim())))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn parse_run(s: &Section, problem: &SAProblem) -> Result<(Mode, RunSettings)> {
    s.only(&["mode", "radius", "x0", "horizon", "seed", "seeds", "workers"])?;
    let mode = match s.opt_str("mode")?.unwrap_or("adaptive") {
        "vanilla" => Mode::Vanilla,
        "adaptive" => Mode::Adaptive,
        "projection" => {
            let radius = s.f64("radius")?;
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(Error::config(s.key("radius"), "run.radius must be positive"));
            }
            Mode::Projection { radius }
        }
        other => {
            return Err(Error::config(
                s.key("mode"),
                format!("unknown mode `{other}`; expected vanilla, adaptive or projection"),
            ))
        }
    };
    s.get("x0")?;
    let x0 = s.opt_vector("x0")?.unwrap_or_default();
    if x0.len() != problem.dim() || x0.iter().any(|c| !c.is_finite()) {
        return Err(Error::config(
            s.key("x0"),
            format!("expected {} finite coordinate(s)", problem.dim()),
        ));
    }
    let horizon = s
        .opt_u64("horizon")?
        .ok_or_else(|| Error::config(s.key("horizon"), "missing key"))? as usize;
    let seed = s.opt_u64("seed")?.unwrap_or(0);
    let seeds = match s.table.get("seeds") {
        None => vec![seed],
        Some(Value::String(t)) => parse_seeds(t).map_err(|m| Error::config(s.key("seeds"), m))?,
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(Error::config(s.key("seeds"), "expected nonnegative integers")),
            })
            .collect::<Result<Vec<_>>>()?,
        Some(v) => return Err(s.mismatch("seeds", "a string or integer array", v)),
    };
    let workers = match s.opt_u64("workers")? {
        Some(0) | None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(w) => w as usize,
    };
    Ok((
        mode,
        RunSettings {
            x0: RealVector::new(x0),
            horizon,
            seed,
            seeds,
            workers,
        },
    ))
}

fn parse_diagnostics(s: &Section, threshold_m: u32) -> Result<DiagnosticsConfig> {
    s.only(&["T", "m", "delta", "epsilon", "K"])?;
    let window = s.opt_f64("T")?.unwrap_or(1.0);
    let level_m = s.opt_u32("m")?.unwrap_or(threshold_m + 3);
    if level_m <= threshold_m {
        return Err(Error::config(s.key("m"), "diagnostics.m must exceed stabilizer.M"));
    }
    let delta = s.opt_f64("delta")?.unwrap_or(0.05);
    let epsilon = s.opt_f64("epsilon")?.unwrap_or(0.05);
    let mut diag = DiagnosticsConfig::new(window, level_m, delta, epsilon)
        .map_err(|e| Error::config(s.path.clone(), e.to_string()))?;
    if let Some(k) = s.opt_f64("K")? {
        diag = diag.with_lipschitz(k);
    }
    Ok(diag)
}

/// An inline Lyapunov pair must be consistent (`grad_W` matches `W`) and `W`
/// must decrease along `h` on `{W >= M}` within the region.
fn audit_inline(cfg: &ExperimentConfig) -> Result<()> {
    let p = &cfg.problem;
    let mut rng = rng_stream(cfg.stabilizer.seed, 2);
    let mut points = p.region.scaled(0.9)?.landmarks();
    points.extend((0..100).map(|_| p.region.sample(&mut rng)));
    let report = gradient_check(&p.lyapunov, &points, 1e-5);
    if !report.passed {
        let bad = report.entries.iter().find(|e| !e.passed);
        return Err(Error::config(
            "problem.grad_W",
            match bad {
                Some(e) => format!(
                    "grad_W disagrees with W at {}: analytic {}, numeric {}",
                    e.point, e.analytic, e.numeric
                ),
                None => "gradient check failed".into(),
            },
        ));
    }
    let descent = check_descent(
        p,
        cfg.stabilizer.threshold_m,
        u32::MAX,
        cfg.stabilizer.samples.min(10_000),
        &p.region,
        &mut rng,
    )
    .map_err(|e| Error::config("problem.h", format!("descent check could not run: {e}")))?;
    if descent.verdict == Verdict::Fail {
        return Err(Error::config(
            "problem.h",
            format!(
                "h . grad W = {} >= 0 at {} with W >= M",
                descent.sup_wdot,
                descent.worst_point.map(|x| x.to_string()).unwrap_or_default()
            ),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE1: &str = include_str!("../presets/example1.toml");

    fn with_stab(stab: &str) -> String {
        format!(
            "[problem]\nbuiltin = \"example1\"\n[stabilizer]\n{stab}\n[run]\nx0 = 3.0\nhorizon = 10\n"
        )
    }

    fn inline(h: &str, w: &str, grad: &str) -> String {
        format!(
            "[problem]\nh = \"{h}\"\nW = \"{w}\"\ngrad_W = \"{grad}\"\nregion = [-3.0, 3.0]\n\
             [problem.noise]\nkind = \"gaussian\"\nsd = 1.0\n[run]\nx0 = 1.0\nhorizon = 10\n"
        )
    }

    fn config_err(r: Result<ExperimentConfig>) -> (String, String) {
        match r {
            Err(Error::Config { key, message }) => (key, message),
            Err(e) => panic!("expected config error, got {e}"),
            Ok(_) => panic!("expected config error"),
        }
    }

    #[test]
    fn preset_example1() {
        let cfg = parse_config(EXAMPLE1).unwrap();
        assert_eq!(cfg.source, ProblemSource::Builtin("example1".into()));
        assert_eq!(cfg.stabilizer.threshold_m, 1);
        assert_eq!(cfg.stabilizer.threshold_n, UpperLevel::Finite(4));
        assert_eq!(cfg.mode, Mode::Adaptive);
        assert_eq!(cfg.run.seeds, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn n_must_exceed_m() {
        let (key, msg) = config_err(parse_config(&with_stab("M = 1\nN = 1")));
        assert_eq!(key, "stabilizer.N");
        assert_eq!(msg, "stabilizer.N must exceed stabilizer.M");
        let cfg = parse_config(&with_stab("M = 1\nN = \"inf\"")).unwrap();
        assert_eq!(cfg.stabilizer.threshold_n, UpperLevel::Infinite);
    }

    #[test]
    fn key_paths() {
        let (key, _) = config_err(parse_config("[problem]\nbuiltin = \"example1\"\n[run]\nx0 = 3.0\n"));
        assert_eq!(key, "run.horizon");
        let (key, _) = config_err(parse_config(&with_stab("M = 1\nmargn = 2.0")));
        assert_eq!(key, "stabilizer.margn");
        let (key, msg) = config_err(parse_config(&with_stab("M = \"one\"")));
        assert_eq!(key, "stabilizer.M");
        assert!(msg.contains("string"));
        let (key, _) = config_err(parse_config("[problem]\nbuiltin = \"nope\"\n[run]\nx0 = 0\nhorizon = 1\n"));
        assert_eq!(key, "problem.builtin");
    }

    #[test]
    fn inline_expressions() {
        let (key, msg) = config_err(parse_config(&inline("x**2", "x^2", "2*x")));
        assert_eq!(key, "problem.h");
        assert!(msg.starts_with("syntax error"), "{msg}");

        let cfg = parse_config(&inline("-x^3", "x^2", "2*x")).unwrap();
        assert_eq!(cfg.source, ProblemSource::Inline);
        assert_eq!(cfg.problem.h(&RealVector::scalar(2.0))[0], -8.0);
        assert_eq!(cfg.problem.f(&RealVector::scalar(2.0)), 1.0);
    }

    #[test]
    fn inline_audits() {
        let (key, _) = config_err(parse_config(&inline("-x", "x^2", "3*x")));
        assert_eq!(key, "problem.grad_W");
        let (key, msg) = config_err(parse_config(&inline("x", "x^2", "2*x")));
        assert_eq!(key, "problem.h");
        assert!(msg.contains(">= 0"));
    }

    #[test]
    fn seeds_syntax() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("4, 9,1").unwrap(), vec![4, 9, 1]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("a").is_err());
    }
}
