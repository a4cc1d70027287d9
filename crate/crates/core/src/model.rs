//! The problem model: drift field `h`, martingale-difference noise with its
//! declared conditional variance bound `f`, Lyapunov function `W`, and the
//! step-size schedule `a(n)`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::{BoxRegion, RealVector};

/// Generator used for every stochastic operation in the crate.
pub type SaRng = ChaCha8Rng;

pub type VectorFn = Arc<dyn Fn(&RealVector) -> RealVector + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&RealVector) -> f64 + Send + Sync>;
pub type SampleFn = Arc<dyn Fn(&RealVector, &mut dyn RngCore) -> RealVector + Send + Sync>;

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> SaRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Step-size sequence `a(n)`, indexed from `n = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `a(n) = 1 / (n + 1)`
    Harmonic,
    /// `a(n) = a0 / (n + b)^gamma`
    Polynomial { a0: f64, b: f64, gamma: f64 },
    /// Explicit values; `a(n)` past the end is an error.
    Table { values: Vec<f64> },
}

impl StepSchedule {
    pub fn polynomial(a0: f64, b: f64, gamma: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0.is_finite()) {
            return Err(Error::InvalidParameter(format!("polynomial a0 = {a0}, expected > 0")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("polynomial b = {b}, expected > 0")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "polynomial gamma = {gamma}, expected > 0"
            )));
        }
        Ok(StepSchedule::Polynomial { a0, b, gamma })
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidParameter(format!(
                "table entry {i} is {v}, expected a positive finite step"
            )));
        }
        Ok(StepSchedule::Table { values })
    }

    pub fn value(&self, n: usize) -> Result<f64> {
        match self {
            StepSchedule::Harmonic => Ok(1.0 / (n as f64 + 1.0)),
            StepSchedule::Polynomial { a0, b, gamma } => Ok(a0 / (n as f64 + b).powf(*gamma)),
            StepSchedule::Table { values } => {
                values.get(n).copied().ok_or(Error::ScheduleExhausted {
                    n,
                    len: values.len(),
                })
            }
        }
    }

    /// Whether the family guarantees `sum a(n) = inf` and `sum a(n)^2 < inf`.
    /// Tables are finite and never qualify.
    pub fn meets_step_conditions(&self) -> bool {
        match self {
            StepSchedule::Harmonic => true,
            StepSchedule::Polynomial { gamma, .. } => *gamma > 0.5 && *gamma <= 1.0,
            StepSchedule::Table { .. } => false,
        }
    }
}

pub fn schedule_value(schedule: &StepSchedule, n: usize) -> Result<f64> {
    schedule.value(n)
}

/// The mean field `h` of the iteration and right-hand side of the limiting o.d.e.
#[derive(Clone)]
pub struct DriftField {
    dim: usize,
    eval: VectorFn,
}

impl DriftField {
    pub fn new<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&RealVector) -> RealVector + Send + Sync + 'static,
    {
        DriftField {
            dim,
            eval: Arc::new(f),
        }
    }

    /// Scalar field `x -> f(x)` on `R`.
    pub fn scalar<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        DriftField::new(1, move |x| RealVector::scalar(f(x[0])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &RealVector) -> RealVector {
        (self.eval)(x)
    }
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField").field("dim", &self.dim).finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum AdditiveDist {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl AdditiveDist {
    fn variance(&self) -> f64 {
        match *self {
            AdditiveDist::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
            AdditiveDist::Gaussian { sd, .. } => sd * sd,
        }
    }

    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        match *self {
            AdditiveDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            AdditiveDist::Gaussian { mean, sd } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
        }
    }
}

#[derive(Clone)]
pub enum NoiseKind {
    /// `M = 0`.
    Zero,
    /// `M_i = scale_i(x) * xi_i` with `xi_i` iid standard normal.
    Multiplicative { scale: VectorFn },
    /// `M_i` iid from a zero-mean distribution, independent of `x`.
    Additive(AdditiveDist),
    /// Caller-supplied sampler; zero conditional mean is the caller's promise.
    Custom(SampleFn),
}

/// Martingale-difference noise together with its declared bound
/// `f(x) >= E[|M|^2 | x]`.
#[derive(Clone)]
pub struct NoiseModel {
    dim: usize,
    kind: NoiseKind,
    var_bound: ScalarFn,
}

impl NoiseModel {
    pub fn zero(dim: usize) -> Self {
        NoiseModel {
            dim,
            kind: NoiseKind::Zero,
            var_bound: Arc::new(|_| 0.0),
        }
    }

    pub fn multiplicative<S, F>(dim: usize, scale: S, var_bound: F) -> Self
    where
        S: Fn(&RealVector) -> RealVector + Send + Sync + 'static,
        F: Fn(&RealVector) -> f64 + Send + Sync + 'static,
    {
        NoiseModel {
            dim,
            kind: NoiseKind::Multiplicative {
                scale: Arc::new(scale),
            },
            var_bound: Arc::new(var_bound),
        }
    }

    /// Additive iid noise. The bound `f` is the exact second moment `d * var`.
    pub fn additive(dim: usize, dist: AdditiveDist) -> Result<Self> {
        match dist {
            AdditiveDist::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform({lo}, {hi}) needs finite lo < hi"
                    )));
                }
                if (lo + hi).abs() > 1e-12 * (hi - lo) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform({lo}, {hi}) has nonzero mean; noise must be a martingale difference"
                    )));
                }
            }
            AdditiveDist::Gaussian { mean, sd } => {
                if mean != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian mean {mean} must be 0 for a martingale difference"
                    )));
                }
                if !(sd >= 0.0 && sd.is_finite()) {
                    return Err(Error::InvalidParameter(format!("gaussian sd = {sd}")));
                }
            }
        }
        let bound = dim as f64 * dist.variance();
        Ok(NoiseModel {
            dim,
            kind: NoiseKind::Additive(dist),
            var_bound: Arc::new(move |_| bound),
        })
    }

    pub fn custom<S, F>(dim: usize, sample: S, var_bound: F) -> Self
    where
        S: Fn(&RealVector, &mut dyn RngCore) -> RealVector + Send + Sync + 'static,
        F: Fn(&RealVector) -> f64 + Send + Sync + 'static,
    {
        NoiseModel {
            dim,
            kind: NoiseKind::Custom(Arc::new(sample)),
            var_bound: Arc::new(var_bound),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn var_bound(&self, x: &RealVector) -> f64 {
        (self.var_bound)(x)
    }

    /// One draw of `M_{n+1}` given the current state.
    pub fn sample(&self, x: &RealVector, rng: &mut dyn RngCore) -> RealVector {
        match &self.kind {
            NoiseKind::Zero => RealVector::zeros(self.dim),
            NoiseKind::Multiplicative { scale } => {
                let s = scale(x);
                RealVector::new(
                    s.iter()
                        .map(|si| {
                            let z: f64 = rng.sample(StandardNormal);
                            si * z
                        })
                        .collect(),
                )
            }
            NoiseKind::Additive(dist) => {
                RealVector::new((0..self.dim).map(|_| dist.draw(rng)).collect())
            }
            NoiseKind::Custom(sample) => sample(x, rng),
        }
    }
}

impl fmt::Debug for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            NoiseKind::Zero => "zero".to_string(),
            NoiseKind::Multiplicative { .. } => "multiplicative-gaussian".to_string(),
            NoiseKind::Additive(d) => format!("{d:?}"),
            NoiseKind::Custom(_) => "custom".to_string(),
        };
        f.debug_struct("NoiseModel")
            .field("dim", &self.dim)
            .field("kind", &kind)
            .finish_non_exhaustive()
    }
}

pub fn sample_noise(model: &NoiseModel, x: &RealVector, rng: &mut dyn RngCore) -> RealVector {
    model.sample(x, rng)
}

/// Lyapunov function `W` with its gradient, a uniform bound on second
/// derivatives, and the level `M` outside which the flow must descend `W`.
#[derive(Clone)]
pub struct LyapunovSpec {
    value: ScalarFn,
    gradient: VectorFn,
    pub hessian_bound: f64,
    pub threshold_m: u32,
}

impl LyapunovSpec {
    pub fn new<W, G>(value: W, gradient: G, hessian_bound: f64, threshold_m: u32) -> Self
    where
        W: Fn(&RealVector) -> f64 + Send + Sync + 'static,
        G: Fn(&RealVector) -> RealVector + Send + Sync + 'static,
    {
        LyapunovSpec {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian_bound,
            threshold_m,
        }
    }

    /// `W(x) = |x - center|^2`, Hessian bound 2.
    pub fn squared_distance(center: RealVector, threshold_m: u32) -> Self {
        let c = center.clone();
        LyapunovSpec::new(
            move |x| x.sub(&center).norm_sq(),
            move |x| x.sub(&c).scale(2.0),
            2.0,
            threshold_m,
        )
    }

    pub fn value(&self, x: &RealVector) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &RealVector) -> RealVector {
        (self.gradient)(x)
    }

    pub fn with_threshold(mut self, threshold_m: u32) -> Self {
        self.threshold_m = threshold_m;
        self
    }
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("hessian_bound", &self.hessian_bound)
            .field("threshold_m", &self.threshold_m)
            .finish_non_exhaustive()
    }
}

/// Everything needed to run and audit one stochastic approximation scheme.
#[derive(Clone, Debug)]
pub struct SAProblem {
    pub name: String,
    pub drift: DriftField,
    pub noise: NoiseModel,
    pub lyapunov: LyapunovSpec,
    pub schedule: StepSchedule,
    /// Default region for sampling-based audits.
    pub region: BoxRegion,
}

impl SAProblem {
    pub fn new(
        name: impl Into<String>,
        drift: DriftField,
        noise: NoiseModel,
        lyapunov: LyapunovSpec,
        schedule: StepSchedule,
        region: BoxRegion,
    ) -> Result<Self> {
        let d = drift.dim();
        if d == 0 || noise.dim() != d || region.dim() != d {
            return Err(Error::InvalidParameter(format!(
                "dimension mismatch: drift {d}, noise {}, region {}",
                noise.dim(),
                region.dim()
            )));
        }
        Ok(SAProblem {
            name: name.into(),
            drift,
            noise,
            lyapunov,
            schedule,
            region,
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.dim()
    }

    pub fn threshold_m(&self) -> u32 {
        self.lyapunov.threshold_m
    }

    pub fn h(&self, x: &RealVector) -> RealVector {
        self.drift.eval(x)
    }

    pub fn w(&self, x: &RealVector) -> f64 {
        self.lyapunov.value(x)
    }

    pub fn f(&self, x: &RealVector) -> f64 {
        self.noise.var_bound(x)
    }

    /// `|h(y)|^2 + f(y)`
    pub(crate) fn growth_numerator(&self, y: &RealVector) -> f64 {
        self.h(y).norm_sq() + self.f(y)
    }

    /// `sqrt(|h(y)|^2 + f(y))` without squaring `|h|`.
    pub(crate) fn growth_root(&self, y: &RealVector) -> f64 {
        self.h(y).norm().hypot(self.f(y).sqrt())
    }

    pub fn drift_dot_grad(&self, x: &RealVector) -> Result<f64> {
        drift_dot_grad(self, x)
    }
}

/// `h(x) . grad W(x)`
pub fn drift_dot_grad(problem: &SAProblem, x: &RealVector) -> Result<f64> {
    let h = problem.h(x);
    let g = problem.lyapunov.gradient(x);
    if !h.is_finite() || !g.is_finite() {
        return Err(Error::NumericOverflow(format!("h or grad W non-finite at {x}")));
    }
    let v = h.dot(&g);
    if !v.is_finite() {
        return Err(Error::NumericOverflow(format!("h . grad W non-finite at {x}")));
    }
    Ok(v)
}

/// Sampled lower bound on the Lipschitz constant of `field` over `region`.
///
/// Half of the pairs are independent uniform points; the other half are
/// local pairs separated by at most 1e-3 of the box width, which tracks the
/// steepest local slope.
pub fn lipschitz_estimate(
    field: &DriftField,
    region: &BoxRegion,
    pairs: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::InvalidParameter("lipschitz_estimate needs pairs >= 1".into()));
    }
    // Re-validates in case the box was built by hand.
    let region = BoxRegion::new(region.lo.clone(), region.hi.clone())?;
    let widths = region.widths();
    let mut best = 0.0f64;
    for i in 0..pairs {
        let u = region.sample(rng);
        let v = if i % 2 == 0 {
            region.sample(rng)
        } else {
            let v = RealVector::new(
                u.iter()
                    .zip(&widths)
                    .enumerate()
                    .map(|(k, (c, w))| {
                        let t = c + 1e-3 * w * (2.0 * rng.random::<f64>() - 1.0);
                        t.clamp(region.lo[k], region.hi[k])
                    })
                    .collect(),
            );
            v
        };
        let dist = u.distance(&v);
        if dist == 0.0 {
            continue;
        }
        let slope = field.eval(&u).distance(&field.eval(&v)) / dist;
        if slope.is_finite() {
            best = best.max(slope);
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientCheckEntry {
    pub point: RealVector,
    pub analytic: RealVector,
    pub numeric: RealVector,
    pub abs_error: f64,
    pub rel_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub entries: Vec<GradientCheckEntry>,
    pub passed: bool,
}

impl GradientReport {
    pub fn worst_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }
}

pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const GRADIENT_ABS_TOL: f64 = 1e-9;

/// Compares `spec.gradient` against central differences of `spec.value`.
pub fn gradient_check(spec: &LyapunovSpec, points: &[RealVector], step: f64) -> GradientReport {
    let entries: Vec<GradientCheckEntry> = points
        .iter()
        .map(|p| {
            let analytic = spec.gradient(p);
            let numeric = RealVector::new(
                (0..p.dim())
                    .map(|i| {
                        let mut up = p.clone();
                        let mut down = p.clone();
                        up[i] += step;
                        down[i] -= step;
                        (spec.value(&up) - spec.value(&down)) / (up[i] - down[i])
                    })
                    .collect(),
            );
            let abs_error = if analytic.dim() == numeric.dim() {
                analytic.distance(&numeric)
            } else {
                f64::INFINITY
            };
            let scale = analytic.norm().max(numeric.norm());
            let rel_error = if scale > 0.0 { abs_error / scale } else { 0.0 };
            let passed = abs_error.is_finite()
                && (abs_error <= GRADIENT_ABS_TOL || rel_error <= GRADIENT_REL_TOL);
            GradientCheckEntry {
                point: p.clone(),
                analytic,
                numeric,
                abs_error,
                rel_error,
                passed,
            }
        })
        .collect();
    let passed = entries.iter().all(|e| e.passed);
    GradientReport { entries, passed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use std::f64::consts::E;

    #[test]
    fn harmonic_values() {
        let s = StepSchedule::Harmonic;
        assert_eq!(s.value(0).unwrap(), 1.0);
        assert_eq!(s.value(9).unwrap(), 0.1);
    }

    #[test]
    fn polynomial_value_at_zero() {
        let s = StepSchedule::polynomial(1.0, 10.0, 0.75).unwrap();
        // 10^(-3/4)
        let expected = 1.0 / (10.0f64.sqrt() * 10.0f64.sqrt().sqrt());
        assert!((s.value(0).unwrap() - expected).abs() < 1e-15);
        assert!((s.value(0).unwrap() - 0.17783).abs() < 1e-5);
    }

    #[test]
    fn table_exhaustion() {
        let s = StepSchedule::table(vec![0.5, 0.25]).unwrap();
        assert_eq!(s.value(1).unwrap(), 0.25);
        assert!(matches!(s.value(2), Err(Error::ScheduleExhausted { n: 2, len: 2 })));
        assert!(StepSchedule::table(vec![0.1, 0.0]).is_err());
    }

    #[test]
    fn harmonic_partial_sums_are_harmonic_numbers() {
        let s = StepSchedule::Harmonic;
        let mut sum = 0.0;
        let mut h = 0.0;
        for n in 0..1000 {
            sum += s.value(n).unwrap();
            h += 1.0 / (n + 1) as f64;
            assert!(((sum - h) / h).abs() < 1e-12);
        }
    }

    #[test]
    fn step_conditions() {
        assert!(StepSchedule::Harmonic.meets_step_conditions());
        assert!(StepSchedule::polynomial(1.0, 1.0, 0.75).unwrap().meets_step_conditions());
        assert!(!StepSchedule::polynomial(1.0, 1.0, 0.5).unwrap().meets_step_conditions());
        assert!(!StepSchedule::polynomial(1.0, 1.0, 1.5).unwrap().meets_step_conditions());
    }

    #[test]
    fn descent_rate_examples() {
        let p1 = registry::example1();
        let v = p1.drift_dot_grad(&RealVector::scalar(1.0)).unwrap();
        assert!((v - (-2.0 * E)).abs() < 1e-12);
        assert_eq!(p1.drift_dot_grad(&RealVector::scalar(0.0)).unwrap(), 0.0);

        let p2 = registry::example2();
        let v = p2.drift_dot_grad(&RealVector::scalar(2.0)).unwrap();
        assert!((v + 4.0 * 2.0f64.tanh()).abs() < 1e-12);
        assert!((v + 3.85611).abs() < 1e-5);
    }

    #[test]
    fn descent_rate_overflow_is_an_error() {
        let p1 = registry::example1();
        assert!(matches!(
            p1.drift_dot_grad(&RealVector::scalar(800.0)),
            Err(Error::NumericOverflow(_))
        ));
    }

    #[test]
    fn example1_noise_vanishes_at_origin() {
        let p1 = registry::example1();
        let mut rng = rng_stream(1, 0);
        assert_eq!(p1.noise.sample(&RealVector::scalar(0.0), &mut rng), RealVector::scalar(0.0));
    }

    #[test]
    fn uniform_noise_mean_and_example1_second_moment() {
        let draws = 1_000_000;
        let p2 = registry::example2();
        let mut rng = rng_stream(11, 0);
        let x = RealVector::scalar(0.3);
        let mean: f64 =
            (0..draws).map(|_| p2.noise.sample(&x, &mut rng)[0]).sum::<f64>() / draws as f64;
        // 3 sigma for variance 1/3 is 3 * sqrt(1/3 / 1e6) ~ 0.0017
        assert!(mean.abs() < 0.002, "mean {mean}");

        let p1 = registry::example1();
        let x = RealVector::scalar(1.0);
        let second: f64 = (0..draws)
            .map(|_| p1.noise.sample(&x, &mut rng).norm_sq())
            .sum::<f64>()
            / draws as f64;
        let bound = p1.f(&x);
        assert!((bound - E * E).abs() < 1e-12);
        // sd of the estimator: e^2 * sqrt(2 / 1e6) ~ 0.0104
        assert!((second - E * E).abs() < 0.05, "second moment {second}");
        assert!(second <= bound + 0.05);
    }

    #[test]
    fn noise_is_reproducible() {
        let p1 = registry::example1();
        let x = RealVector::scalar(0.7);
        let a: Vec<f64> = {
            let mut r = rng_stream(5, 2);
            (0..50).map(|_| p1.noise.sample(&x, &mut r)[0]).collect()
        };
        let b: Vec<f64> = {
            let mut r = rng_stream(5, 2);
            (0..50).map(|_| p1.noise.sample(&x, &mut r)[0]).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn additive_noise_validation() {
        assert!(NoiseModel::additive(1, AdditiveDist::Uniform { lo: 0.0, hi: 1.0 }).is_err());
        assert!(NoiseModel::additive(1, AdditiveDist::Gaussian { mean: 0.1, sd: 1.0 }).is_err());
        assert!(NoiseModel::additive(1, AdditiveDist::Gaussian { mean: 0.0, sd: -1.0 }).is_err());
        let m = NoiseModel::additive(2, AdditiveDist::Uniform { lo: -1.0, hi: 1.0 }).unwrap();
        assert!((m.var_bound(&RealVector::zeros(2)) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_linear_and_constant() {
        let mut rng = rng_stream(2, 0);
        let lin = DriftField::scalar(|x| -x);
        let region = BoxRegion::interval(-1.0, 1.0).unwrap();
        let k = lipschitz_estimate(&lin, &region, 10_000, &mut rng).unwrap();
        assert!((0.99..=1.0 + 1e-12).contains(&k), "k = {k}");

        let c = DriftField::scalar(|_| 3.0);
        assert_eq!(lipschitz_estimate(&c, &region, 100, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn lipschitz_example1_below_derivative_bound() {
        let mut rng = rng_stream(3, 0);
        let p1 = registry::example1();
        let region = BoxRegion::interval(-2.0, 2.0).unwrap();
        let k = lipschitz_estimate(&p1.drift, &region, 10_000, &mut rng).unwrap();
        let bound = 3.0 * E * E;
        assert!(k <= bound + 1e-9, "k = {k}");
        // local pairs near |x| = 2 should come close to the true constant
        assert!(k >= 0.9 * bound, "k = {k}");
    }

    #[test]
    fn lipschitz_degenerate_box() {
        let mut rng = rng_stream(2, 0);
        let bad = BoxRegion {
            lo: vec![0.0],
            hi: vec![0.0],
        };
        let lin = DriftField::scalar(|x| -x);
        assert!(matches!(
            lipschitz_estimate(&lin, &bad, 10, &mut rng),
            Err(Error::InvalidRegion(_))
        ));
    }

    #[test]
    fn gradient_check_cases() {
        let sq = LyapunovSpec::squared_distance(RealVector::zeros(1), 1);
        let pts: Vec<RealVector> = [1.0, 2.0, -3.0].iter().map(|&x| x.into()).collect();
        assert!(gradient_check(&sq, &pts, 1e-5).passed);

        let wrong = LyapunovSpec::new(
            |x| x[0] * x[0],
            |x| RealVector::scalar(2.0 * x[0] + 1.0),
            2.0,
            1,
        );
        let r = gradient_check(&wrong, &[RealVector::scalar(1.0)], 1e-5);
        assert!(!r.passed);

        let sq3 = LyapunovSpec::squared_distance(RealVector::zeros(3), 1);
        let p = RealVector::new(vec![1.0, 2.0, 3.0]);
        assert_eq!(sq3.gradient(&p), RealVector::new(vec![2.0, 4.0, 6.0]));
        assert!(gradient_check(&sq3, &[p], 1e-5).passed);
    }
}
