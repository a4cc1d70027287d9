//! Iteration engine.
//!
//! Three modes share one update rule `y' = y + a_eff (h(y) + M)`:
//!
//! * `Vanilla`: `a_eff = a(n)`.
//! * `Adaptive`: `a_eff = a(n) / g(y)` with `g` from the stabilizer.
//! * `Projection`: vanilla step followed by radial projection onto the
//!   Euclidean ball of the given radius about the origin.
//!
//! Each step draws the noise `M_{n+1}` first and then evaluates `g(y_n)`;
//! `g` depends only on `y_n`, so the draw order only matters for
//! reproducibility.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::error::{Error, Result};
use crate::model::{rng_stream, SAProblem, SaRng};
use crate::registry;
use crate::stabilizer::{scaling_factor, StabilizerConfig};
use crate::vector::RealVector;

pub const DEFAULT_HORIZON: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Mode {
    Vanilla,
    Adaptive,
    Projection { radius: f64 },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Vanilla => "vanilla",
            Mode::Adaptive => "adaptive",
            Mode::Projection { .. } => "projection",
        }
    }
}

/// Live state of one run. `rng` stands in for the history the noise is
/// conditioned on.
#[derive(Clone, Debug)]
pub struct EngineState {
    pub n: usize,
    pub y: RealVector,
    pub rng: SaRng,
    pub overflowed: bool,
}

impl EngineState {
    pub fn new(x0: RealVector, seed: u64) -> Self {
        EngineState {
            n: 0,
            y: x0,
            rng: rng_stream(seed, 0),
            overflowed: false,
        }
    }
}

/// One recorded step: the state `y_n` and the step sizes used to leave it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub a: f64,
    pub g: f64,
    pub a_eff: f64,
    pub w: f64,
    pub y: RealVector,
}

impl TraceRow {
    pub fn scaled(&self) -> bool {
        self.g > 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TerminalState {
    pub n: usize,
    pub y: RealVector,
    pub overflowed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMeta {
    pub problem: String,
    pub mode: Mode,
    pub seed: u64,
}

/// Recorded run. `rows[n]` holds `y_n`; the state after the last row is
/// `terminal`. A run that overflows at step `n` (non-finite `y_{n+1}`) keeps
/// `n + 1` rows and stores the offending value in `terminal`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub rows: Vec<TraceRow>,
    /// `noise[n]` is the draw `M_{n+1}` used in step `n`; absent for traces
    /// read back from disk.
    pub noise: Option<Vec<RealVector>>,
    pub terminal: TerminalState,
    pub meta: Option<RunMeta>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn overflowed(&self) -> bool {
        self.terminal.overflowed
    }

    /// `y_j` for `j <= rows.len()`, the last index being the terminal state.
    pub fn state(&self, j: usize) -> Option<&RealVector> {
        if j < self.rows.len() {
            Some(&self.rows[j].y)
        } else if j == self.rows.len() {
            Some(&self.terminal.y)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug)]
pub struct Engine {
    problem: SAProblem,
    mode: Mode,
    stabilizer: Option<StabilizerConfig>,
}

impl Engine {
    pub fn new(problem: SAProblem, mode: Mode, stabilizer: Option<StabilizerConfig>) -> Result<Self> {
        match mode {
            Mode::Adaptive if stabilizer.is_none() => {
                return Err(Error::InvalidParameter("adaptive mode needs a stabilizer config".into()))
            }
            Mode::Projection { radius } if !(radius > 0.0 && radius.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "projection radius = {radius}, expected > 0"
                )))
            }
            _ => {}
        }
        Ok(Engine {
            problem,
            mode,
            stabilizer,
        })
    }

    pub fn vanilla(problem: SAProblem) -> Self {
        Engine::new(problem, Mode::Vanilla, None).expect("vanilla needs no config")
    }

    pub fn adaptive(problem: SAProblem, stabilizer: StabilizerConfig) -> Self {
        Engine::new(problem, Mode::Adaptive, Some(stabilizer)).expect("config supplied")
    }

    pub fn problem(&self) -> &SAProblem {
        &self.problem
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn stabilizer(&self) -> Option<&StabilizerConfig> {
        self.stabilizer.as_ref()
    }

    /// Deterministic part of a step: given `y_n` and the draw `M_{n+1}`,
    /// returns the row for `n` and `y_{n+1}`.
    pub fn advance(&self, n: usize, y: &RealVector, noise: &RealVector) -> Result<(TraceRow, RealVector)> {
        let a = self.problem.schedule.value(n)?;
        let g = match (self.mode, &self.stabilizer) {
            (Mode::Adaptive, Some(cfg)) => scaling_factor(cfg, &self.problem, y),
            _ => 1.0,
        };
        let a_eff = a / g;
        let h = self.problem.h(y);
        let mut next = y.add_scaled(a_eff, &h).add_scaled(a_eff, noise);
        if let Mode::Projection { radius } = self.mode {
            let norm = next.norm();
            if norm > radius {
                next = RealVector::new(next.iter().map(|c| c / norm * radius).collect());
            }
        }
        let row = TraceRow {
            n,
            a,
            g,
            a_eff,
            w: self.problem.w(y),
            y: y.clone(),
        };
        Ok((row, next))
    }

    /// Draws `M_{n+1}`, advances `state`, and returns the row and the draw.
    /// A non-finite `y_{n+1}` or `W(y_{n+1})` marks the state overflowed,
    /// after which it is frozen.
    pub fn step(&self, state: &mut EngineState) -> Result<Option<(TraceRow, RealVector)>> {
        if state.overflowed {
            return Ok(None);
        }
        let noise = self.problem.noise.sample(&state.y, &mut state.rng);
        let (row, next) = self.advance(state.n, &state.y, &noise)?;
        if !next.is_finite() || !self.problem.w(&next).is_finite() {
            state.overflowed = true;
        }
        state.n += 1;
        state.y = next;
        Ok(Some((row, noise)))
    }

    /// Runs `horizon` steps from `x0`, stopping early on overflow.
    pub fn run(&self, x0: &RealVector, horizon: usize, seed: u64) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        if x0.dim() != self.problem.dim() || !x0.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "x0 = {x0} must be a finite point of dimension {}",
                self.problem.dim()
            )));
        }
        let mut state = EngineState::new(x0.clone(), seed);
        let mut rows = Vec::with_capacity(horizon);
        let mut noise = Vec::with_capacity(horizon);
        while state.n < horizon && !state.overflowed {
            if let Some((row, m)) = self.step(&mut state)? {
                rows.push(row);
                noise.push(m);
            }
        }
        Ok(Trajectory {
            rows,
            noise: Some(noise),
            terminal: TerminalState {
                n: state.n,
                y: state.y,
                overflowed: state.overflowed,
            },
            meta: Some(RunMeta {
                problem: self.problem.name.clone(),
                mode: self.mode,
                seed,
            }),
        })
    }

    /// Re-applies the recorded noise to `y_0`, returning `y_1, ..., y_len`.
    pub fn replay(&self, trajectory: &Trajectory) -> Result<Vec<RealVector>> {
        let noise = trajectory
            .noise
            .as_ref()
            .ok_or_else(|| Error::IncompleteTrace("no noise record to replay".into()))?;
        let Some(first) = trajectory.rows.first() else {
            return Ok(Vec::new());
        };
        let mut y = first.y.clone();
        let mut out = Vec::with_capacity(noise.len());
        for (n, m) in noise.iter().enumerate() {
            let (_, next) = self.advance(n, &y, m)?;
            out.push(next.clone());
            y = next;
        }
        Ok(out)
    }
}

/// A run described by name, resolved against the builtin registry.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub mode: Mode,
    pub x0: RealVector,
    pub horizon: usize,
    pub seed: u64,
    pub stabilizer: Option<StabilizerConfig>,
}

pub fn run(config: &RunConfig) -> Result<Trajectory> {
    let problem = registry::builtin(&config.problem).map_err(|e| match e {
        Error::UnknownProblem(name) => Error::config("problem", format!("unknown problem `{name}`")),
        other => other,
    })?;
    let engine = Engine::new(problem, config.mode, config.stabilizer.clone())?;
    engine.run(&config.x0, config.horizon, config.seed)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub sup_norm: f64,
    pub overflow: bool,
    pub overflow_index: Option<usize>,
    pub last_scaled: Option<usize>,
    pub steps: usize,
    pub terminal_y: RealVector,
    pub terminal_w: f64,
    pub error: Option<String>,
}

impl RunSummary {
    pub fn from_trajectory(seed: u64, trajectory: &Trajectory, problem: &SAProblem) -> Self {
        RunSummary {
            seed,
            sup_norm: analysis::sup_norm(trajectory),
            overflow: trajectory.overflowed(),
            overflow_index: trajectory.overflowed().then(|| trajectory.rows.len() - 1),
            last_scaled: analysis::last_scaled_index(trajectory),
            steps: trajectory.rows.len(),
            terminal_y: trajectory.terminal.y.clone(),
            terminal_w: problem.w(&trajectory.terminal.y),
            error: None,
        }
    }

    fn failed(seed: u64, dim: usize, error: &Error) -> Self {
        RunSummary {
            seed,
            sup_norm: f64::NAN,
            overflow: false,
            overflow_index: None,
            last_scaled: None,
            steps: 0,
            terminal_y: RealVector::new(vec![f64::NAN; dim]),
            terminal_w: f64::NAN,
            error: Some(error.to_string()),
        }
    }
}

fn with_workers<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(job),
        Err(_) => job(),
    }
}

/// One trajectory per seed, in seed order, on `workers` threads.
pub fn run_ensemble_trajectories(
    engine: &Engine,
    x0: &RealVector,
    horizon: usize,
    seeds: &[u64],
    workers: usize,
) -> Vec<Result<Trajectory>> {
    with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&seed| engine.run(x0, horizon, seed))
            .collect()
    })
}

/// Per-seed summaries in seed order. Failures are recorded in the summary.
pub fn run_ensemble(
    engine: &Engine,
    x0: &RealVector,
    horizon: usize,
    seeds: &[u64],
    workers: usize,
) -> Result<Vec<RunSummary>> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("ensemble needs at least one seed".into()));
    }
    let problem = engine.problem();
    Ok(with_workers(workers, || {
        seeds
            .par_iter()
            .map(|&seed| match engine.run(x0, horizon, seed) {
                Ok(t) => RunSummary::from_trajectory(seed, &t, problem),
                Err(e) => RunSummary::failed(seed, problem.dim(), &e),
            })
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DriftField, LyapunovSpec, NoiseModel, StepSchedule};
    use crate::stabilizer::UpperLevel;
    use crate::vector::BoxRegion;
    use std::f64::consts::E;

    fn noiseless_linear(schedule: StepSchedule) -> SAProblem {
        SAProblem::new(
            "linear",
            DriftField::scalar(|x| -x),
            NoiseModel::zero(1),
            LyapunovSpec::squared_distance(RealVector::zeros(1), 1),
            schedule,
            BoxRegion::interval(-10.0, 10.0).unwrap(),
        )
        .unwrap()
    }

    fn example1_stabilizer() -> StabilizerConfig {
        let p = registry::example1();
        let mut rng = rng_stream(0, 0);
        StabilizerConfig::calibrate(&p, 4, 1.05, 10_000, BoxRegion::interval(-5.0, 5.0).unwrap(), &mut rng)
            .unwrap()
            .0
    }

    #[test]
    fn vanilla_first_step_hits_zero() {
        let engine = Engine::vanilla(noiseless_linear(StepSchedule::Harmonic));
        let (row, next) = engine
            .advance(0, &RealVector::scalar(1.0), &RealVector::zeros(1))
            .unwrap();
        assert_eq!(next, RealVector::scalar(0.0));
        assert_eq!(row.g, 1.0);
        assert_eq!(row.a_eff, 1.0);
    }

    #[test]
    fn adaptive_step_from_three() {
        let engine = Engine::adaptive(registry::example1(), example1_stabilizer());
        let (row, next) = engine
            .advance(0, &RealVector::scalar(3.0), &RealVector::zeros(1))
            .unwrap();
        let g = 1.05 * 2.0f64.sqrt() * E.powi(3);
        assert!((row.g - g).abs() < 1e-9);
        let expected = 3.0 - (1.0 / g) * 3.0 * E.powi(3);
        assert!((next[0] - expected).abs() < 1e-12);
        assert!((next[0] - 0.9797).abs() < 1e-4);
    }

    #[test]
    fn projection_lands_on_sphere() {
        let engine = Engine::new(
            noiseless_linear(StepSchedule::Harmonic),
            Mode::Projection { radius: 3.0 },
            None,
        )
        .unwrap();
        // y = -4.5 with a(0) = 1 goes to 0; use noise to push outward to 10
        let (_, next) = engine
            .advance(0, &RealVector::scalar(0.0), &RealVector::scalar(10.0))
            .unwrap();
        assert_eq!(next.norm(), 3.0);
        let (_, next) = engine
            .advance(0, &RealVector::scalar(0.0), &RealVector::scalar(-10.0))
            .unwrap();
        assert_eq!(next, RealVector::scalar(-3.0));
    }

    #[test]
    fn mode_validation() {
        let p = registry::example1();
        assert!(Engine::new(p.clone(), Mode::Adaptive, None).is_err());
        assert!(Engine::new(p, Mode::Projection { radius: 0.0 }, None).is_err());
    }

    #[test]
    fn unknown_problem_is_config_error() {
        let cfg = RunConfig {
            problem: "nope".into(),
            mode: Mode::Vanilla,
            x0: RealVector::scalar(0.0),
            horizon: 5,
            seed: 0,
            stabilizer: None,
        };
        assert!(matches!(run(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn runs_are_deterministic() {
        let engine = Engine::adaptive(registry::example1(), example1_stabilizer());
        let a = engine.run(&RealVector::scalar(3.0), 500, 7).unwrap();
        let b = engine.run(&RealVector::scalar(3.0), 500, 7).unwrap();
        assert_eq!(a, b);
        let c = engine.run(&RealVector::scalar(3.0), 500, 8).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn rows_track_invariants() {
        let engine = Engine::adaptive(registry::example1(), example1_stabilizer());
        let t = engine.run(&RealVector::scalar(3.0), 2000, 3).unwrap();
        assert_eq!(t.len(), 2000);
        assert_eq!(t.terminal.n, 2000);
        for (i, r) in t.rows.iter().enumerate() {
            assert_eq!(r.n, i);
            assert!(r.g >= 1.0);
            assert!(r.a_eff <= r.a);
            assert_eq!(r.a_eff, r.a / r.g);
        }
    }

    #[test]
    fn replay_reproduces_iterates() {
        let engine = Engine::adaptive(registry::example1(), example1_stabilizer());
        let t = engine.run(&RealVector::scalar(3.0), 1000, 11).unwrap();
        let replayed = engine.replay(&t).unwrap();
        for (j, y) in replayed.iter().enumerate() {
            assert_eq!(Some(y), t.state(j + 1));
        }
    }

    #[test]
    fn vanilla_example1_overflows_and_stops() {
        let engine = Engine::vanilla(registry::example1());
        let t = engine.run(&RealVector::scalar(3.0), 50, 1).unwrap();
        assert!(t.overflowed());
        assert!(t.len() < 50);
        assert!(t.rows.iter().all(|r| r.y.is_finite()));
        assert!(!t.terminal.y.is_finite() || !t.terminal.y.norm().is_finite());
    }

    #[test]
    fn infinite_level_matches_vanilla() {
        let p = registry::example2();
        let unscaled = StabilizerConfig::unscaled(&p, 2.0).unwrap();
        assert_eq!(unscaled.threshold_n, UpperLevel::Infinite);
        let adaptive = Engine::adaptive(p.clone(), unscaled);
        let vanilla = Engine::vanilla(p);
        let x0 = RealVector::scalar(4.0);
        let a = adaptive.run(&x0, 300, 2).unwrap();
        let v = vanilla.run(&x0, 300, 2).unwrap();
        assert_eq!(a.rows, v.rows);
        assert_eq!(a.terminal, v.terminal);
    }

    #[test]
    fn ensemble_order_and_worker_independence() {
        let engine = Engine::adaptive(registry::example1(), example1_stabilizer());
        let x0 = RealVector::scalar(3.0);
        let seeds = [1, 2, 3];
        let one = run_ensemble(&engine, &x0, 500, &seeds, 1).unwrap();
        let many = run_ensemble(&engine, &x0, 500, &seeds, 4).unwrap();
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&many).unwrap()
        );
        assert_eq!(one.iter().map(|s| s.seed).collect::<Vec<_>>(), seeds);

        let single = engine.run(&x0, 500, 2).unwrap();
        assert_eq!(one[1], RunSummary::from_trajectory(2, &single, engine.problem()));
        assert!(run_ensemble(&engine, &x0, 10, &[], 1).is_err());
    }

    #[test]
    fn exhausted_table_is_reported_per_seed() {
        let engine = Engine::vanilla(noiseless_linear(StepSchedule::table(vec![0.1; 5]).unwrap()));
        let s = run_ensemble(&engine, &RealVector::scalar(1.0), 10, &[0], 1).unwrap();
        assert!(s[0].error.as_deref().unwrap().contains("exhausted"));
    }
}
