//! Stochastic approximation with adaptively scaled step sizes.
//!
//! The iteration `y_{n+1} = y_n + a(n)/g(y_n) [h(y_n) + M_{n+1}]` divides the
//! step by `g >= 1` whenever the Lyapunov function `W` exceeds a level `N`,
//! keeping the iterates bounded without projecting them. Around it the crate
//! provides the audits that make a run trustworthy (gradient and descent
//! checks for `W`, the `c_N` growth bound, the limiting o.d.e.) and the
//! diagnostics that read stability off recorded trajectories.
//!
//! ```
//! use sastab::{registry, rng_stream, BoxRegion, Engine, RealVector, StabilizerConfig};
//!
//! let problem = registry::example1();
//! let (stab, _) = StabilizerConfig::calibrate(
//!     &problem, 4, 1.05, 2_000,
//!     BoxRegion::interval(-5.0, 5.0).unwrap(),
//!     &mut rng_stream(0, 1),
//! ).unwrap();
//! let run = Engine::adaptive(problem, stab).run(&RealVector::scalar(3.0), 1_000, 7).unwrap();
//! assert!(!run.overflowed());
//! ```

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod expr;
pub mod model;
pub mod ode;
pub mod registry;
pub mod stabilizer;
pub mod trace;
pub mod vector;

pub use analysis::{
    analyze, ensemble_lyapunov_moment, hitting_time, last_scaled_index, martingale_partial_sums,
    sup_norm, window_descent_report, window_indices, DiagnosticsConfig, StabilityReport,
    WindowVerdict,
};
pub use config::{load_config, parse_config, ExperimentConfig};
pub use engine::{run_ensemble, run_ensemble_trajectories, Engine, Mode, RunSummary, Trajectory};
pub use error::{Error, Result};
pub use expr::{parse_expression, Expr};
pub use model::{
    gradient_check, lipschitz_estimate, rng_stream, AdditiveDist, DriftField, LyapunovSpec,
    NoiseModel, SAProblem, StepSchedule,
};
pub use ode::{check_descent, equilibria_1d, integrate, Verdict};
pub use stabilizer::{
    check_c_infinity, estimate_c_n, scaling_factor, verify_wgc, StabilizerConfig, UpperLevel,
};
pub use trace::{read_trace, summarize, write_trace};
pub use vector::{BoxRegion, RealVector};
