//! Step-size scaling.
//!
//! Far from the origin (`W(y) > N`) the step `a(n)` is divided by
//!
//! ```text
//! g(y) = max(1, margin * sqrt((|h(y)|^2 + f(y)) / W(y)))
//! ```
//!
//! and inside `{W <= N}` it is left alone. The constant `c_N` dominates
//! `(|h|^2 + f) / W` on the annulus `{M <= W <= N}`; together the two give
//! `c_N W(y) > (|h(y)|^2 + f(y)) / g(y)^2` whenever `W(y) >= M`, which is
//! what keeps `E[W]` of the stopped iterates bounded.

use rand::RngCore;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::SAProblem;
use crate::vector::{BoxRegion, RealVector};

pub const DEFAULT_MARGIN: f64 = 1.05;

/// Rejection sampling gives up after this many draws per requested sample.
const RETRY_FACTOR: usize = 100;

/// The outer level `N`; `Infinite` disables scaling entirely.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpperLevel {
    Finite(u32),
    Infinite,
}

impl UpperLevel {
    /// Whether `W(y) > N`.
    pub fn exceeded_by(&self, w: f64) -> bool {
        match *self {
            UpperLevel::Finite(n) => w > n as f64,
            UpperLevel::Infinite => false,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            UpperLevel::Finite(n) => n as f64,
            UpperLevel::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilizerConfig {
    pub threshold_m: u32,
    pub threshold_n: UpperLevel,
    pub margin: f64,
    pub c_n: f64,
    pub annulus_samples: usize,
    pub sample_box: BoxRegion,
}

impl StabilizerConfig {
    pub fn new(
        threshold_m: u32,
        threshold_n: UpperLevel,
        margin: f64,
        c_n: f64,
        annulus_samples: usize,
        sample_box: BoxRegion,
    ) -> Result<Self> {
        if threshold_m == 0 {
            return Err(Error::InvalidParameter("M must be a positive integer".into()));
        }
        if let UpperLevel::Finite(n) = threshold_n {
            if n <= threshold_m {
                return Err(Error::InvalidParameter(format!(
                    "N = {n} must exceed M = {threshold_m}"
                )));
            }
        }
        if !(margin > 1.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter(format!("margin = {margin}, expected > 1")));
        }
        if !(c_n > 1.0) {
            return Err(Error::InvalidParameter(format!("c_N = {c_n}, expected > 1")));
        }
        Ok(StabilizerConfig {
            threshold_m,
            threshold_n,
            margin,
            c_n,
            annulus_samples,
            sample_box,
        })
    }

    /// Estimates `c_N` on `sample_box` and returns the config with the estimate.
    pub fn calibrate(
        problem: &SAProblem,
        threshold_n: u32,
        margin: f64,
        samples: usize,
        sample_box: BoxRegion,
        rng: &mut dyn RngCore,
    ) -> Result<(Self, CnEstimate)> {
        let m = problem.threshold_m();
        let est = estimate_c_n(problem, m, threshold_n, samples, margin, &sample_box, rng)?;
        let config = StabilizerConfig::new(
            m,
            UpperLevel::Finite(threshold_n),
            margin,
            est.c_n,
            samples,
            sample_box,
        )?;
        Ok((config, est))
    }

    /// `N = inf`: `g = 1` everywhere and the original iteration is recovered.
    pub fn unscaled(problem: &SAProblem, c_n: f64) -> Result<Self> {
        StabilizerConfig::new(
            problem.threshold_m(),
            UpperLevel::Infinite,
            DEFAULT_MARGIN,
            c_n,
            0,
            problem.region.clone(),
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CnEstimate {
    pub c_n: f64,
    pub sampled_sup: f64,
    pub worst_point: Option<RealVector>,
    pub hits: usize,
    pub attempts: usize,
}

/// Draws up to `wanted` points of `region` satisfying `keep`.
fn rejection_sample(
    region: &BoxRegion,
    wanted: usize,
    rng: &mut dyn RngCore,
    mut keep: impl FnMut(&RealVector) -> bool,
) -> (Vec<RealVector>, usize) {
    let budget = wanted.saturating_mul(RETRY_FACTOR).max(RETRY_FACTOR);
    let mut out = Vec::with_capacity(wanted);
    let mut attempts = 0;
    while out.len() < wanted && attempts < budget {
        attempts += 1;
        let y = region.sample(rng);
        if keep(&y) {
            out.push(y);
        }
    }
    (out, attempts)
}

fn annulus_sup(
    problem: &SAProblem,
    m: u32,
    n: u32,
    samples: usize,
    region: &BoxRegion,
    rng: &mut dyn RngCore,
) -> Result<(f64, Option<RealVector>, usize, usize)> {
    let (lo, hi) = (m as f64, n as f64);
    let (points, attempts) = rejection_sample(region, samples, rng, |y| {
        let w = problem.w(y);
        w >= lo && w <= hi
    });
    if points.is_empty() {
        return Err(Error::EmptyRegion {
            what: format!("annulus {{{m} <= W <= {n}}}"),
            attempts,
        });
    }
    let mut sup = 0.0f64;
    let mut worst = None;
    for y in &points {
        let ratio = problem.growth_numerator(y) / problem.w(y);
        if !ratio.is_finite() {
            return Err(Error::NumericOverflow(format!(
                "(|h|^2 + f) / W is {ratio} at {y}"
            )));
        }
        if ratio > sup || worst.is_none() {
            sup = sup.max(ratio);
            worst = Some(y.clone());
        }
    }
    Ok((sup, worst, points.len(), attempts))
}

/// `margin * max(1, sup over sampled {M <= W <= N} of (|h|^2 + f) / W)`.
pub fn estimate_c_n(
    problem: &SAProblem,
    m: u32,
    n: u32,
    samples: usize,
    margin: f64,
    region: &BoxRegion,
    rng: &mut dyn RngCore,
) -> Result<CnEstimate> {
    if n <= m {
        return Err(Error::InvalidParameter(format!("N = {n} must exceed M = {m}")));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("estimate_c_n needs samples >= 1".into()));
    }
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(Error::InvalidParameter(format!("margin = {margin}, expected > 1")));
    }
    let (sup, worst_point, hits, attempts) = annulus_sup(problem, m, n, samples, region, rng)?;
    Ok(CnEstimate {
        c_n: margin * sup.max(1.0),
        sampled_sup: sup,
        worst_point,
        hits,
        attempts,
    })
}

/// Smallest `N` in `M+1..=max_level` whose annulus sup estimate agrees to
/// within 1% between `samples` and `2 * samples` draws.
pub fn choose_threshold_n(
    problem: &SAProblem,
    samples: usize,
    region: &BoxRegion,
    max_level: u32,
    rng: &mut dyn RngCore,
) -> Result<u32> {
    let m = problem.threshold_m();
    for n in (m + 1)..=max_level {
        let (a, ..) = annulus_sup(problem, m, n, samples, region, rng)?;
        let (b, ..) = annulus_sup(problem, m, n, 2 * samples, region, rng)?;
        if (a - b).abs() <= 0.01 * a.max(b) {
            return Ok(n);
        }
    }
    Err(Error::InvalidParameter(format!(
        "no N in {}..={max_level} gave a stable annulus estimate",
        m + 1
    )))
}

/// `g(y)`; exactly 1 whenever `W(y) <= N`.
pub fn scaling_factor(config: &StabilizerConfig, problem: &SAProblem, y: &RealVector) -> f64 {
    let w = problem.w(y);
    if !config.threshold_n.exceeded_by(w) {
        return 1.0;
    }
    let g = config.margin * problem.growth_root(y) / w.sqrt();
    if g.is_nan() {
        f64::INFINITY
    } else {
        g.max(1.0)
    }
}

/// `a(n) / g(y)`.
pub fn adaptive_step(
    config: &StabilizerConfig,
    problem: &SAProblem,
    n: usize,
    y: &RealVector,
) -> Result<f64> {
    Ok(problem.schedule.value(n)? / scaling_factor(config, problem, y))
}

#[derive(Clone, Debug, Serialize)]
pub struct WgcReport {
    pub samples: usize,
    pub violations: usize,
    /// `max (|h|^2 + f) / (g^2 c_N W)`; below 1 means the inequality holds.
    pub worst_ratio: f64,
    pub worst_point: Option<RealVector>,
}

impl WgcReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Audits `c_N W(y) > (|h(y)|^2 + f(y)) / g(y)^2` on sampled `y` with
/// `W(y) >= M` inside the config's sample box.
pub fn verify_wgc(
    config: &StabilizerConfig,
    problem: &SAProblem,
    samples: usize,
    rng: &mut dyn RngCore,
) -> Result<WgcReport> {
    let m = config.threshold_m as f64;
    let (points, attempts) =
        rejection_sample(&config.sample_box, samples, rng, |y| problem.w(y) >= m);
    if points.is_empty() {
        return Err(Error::EmptyRegion {
            what: format!("{{W >= {}}}", config.threshold_m),
            attempts,
        });
    }
    let mut violations = 0;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_point = None;
    for y in &points {
        let g = scaling_factor(config, problem, y);
        let rhs = problem.growth_numerator(y) / (g * g);
        let ratio = rhs / (config.c_n * problem.w(y));
        if !(ratio < 1.0) {
            violations += 1;
        }
        let r = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if r > worst_ratio {
            worst_ratio = r;
            worst_point = Some(y.clone());
        }
    }
    Ok(WgcReport {
        samples: points.len(),
        violations,
        worst_ratio,
        worst_point,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CInfinityVerdict {
    Pass,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct CInfinityReport {
    /// Sampled sup of `(|h|^2 + f) / min(1, W)`; infinite when `W = 0` with a
    /// positive numerator.
    pub estimate: f64,
    /// The same sup restricted to the box shrunk to 90% about its center.
    pub inner_estimate: f64,
    pub worst_point: Option<RealVector>,
    pub verdict: CInfinityVerdict,
}

/// Evidence, on `region` only, for running the unscaled scheme: if
/// `(|h|^2 + f) / min(1, W)` is bounded, `g = 1` is a valid choice.
///
/// The verdict is `Inconclusive` when the estimate is infinite or when the
/// outer 10% shell of the box raises the sup by more than 1%, i.e. the
/// quantity still grows with the box.
pub fn check_c_infinity(
    problem: &SAProblem,
    samples: usize,
    region: &BoxRegion,
    rng: &mut dyn RngCore,
) -> Result<CInfinityReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("check_c_infinity needs samples >= 1".into()));
    }
    let inner = region.scaled(0.9)?;
    let mut points = region.landmarks();
    points.extend((0..samples).map(|_| region.sample(rng)));

    let mut estimate = 0.0f64;
    let mut inner_estimate = 0.0f64;
    let mut worst_point = None;
    for x in &points {
        let num = problem.growth_numerator(x);
        let den = problem.w(x).min(1.0);
        let ratio = if den > 0.0 {
            num / den
        } else if num > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if ratio > estimate || worst_point.is_none() {
            estimate = estimate.max(ratio);
            worst_point = Some(x.clone());
        }
        if inner.contains(x) {
            inner_estimate = inner_estimate.max(ratio);
        }
    }
    let verdict = if estimate.is_finite() && estimate <= 1.01 * inner_estimate {
        CInfinityVerdict::Pass
    } else {
        CInfinityVerdict::Inconclusive
    };
    Ok(CInfinityReport {
        estimate,
        inner_estimate,
        worst_point,
        verdict,
    })
}
