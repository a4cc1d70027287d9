//! The limiting o.d.e. `x' = h(x)`: an adaptive Dormand–Prince 5(4)
//! integrator, sampled audits of the descent condition, and comparison of
//! recorded iterates against the flow.

use rand::RngCore;
use serde::Serialize;

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::model::{DriftField, SAProblem};
use crate::vector::{BoxRegion, RealVector};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;

const MAX_STEPS: usize = 5_000_000;

// Dormand–Prince tableau; the field is autonomous so the nodes c_i are unused.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// PI step control
const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - 0.75 * BETA;
const MIN_SHRINK: f64 = 0.2;
const MAX_GROW: f64 = 10.0;

#[derive(Clone, Debug, Serialize)]
pub struct FlowResult {
    pub endpoint: RealVector,
    pub times: Vec<f64>,
    pub states: Vec<RealVector>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

/// Integrator state that can be advanced repeatedly along one trajectory.
pub struct Flow<'a> {
    field: &'a DriftField,
    rel_tol: f64,
    abs_tol: f64,
    t: f64,
    y: RealVector,
    k1: RealVector,
    h: Option<f64>,
    err_old: f64,
    record: bool,
    result: FlowResult,
}

impl<'a> Flow<'a> {
    pub fn new(field: &'a DriftField, u: RealVector, rel_tol: f64, abs_tol: f64) -> Result<Self> {
        if !(rel_tol > 0.0 && abs_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerances must be positive, got rel {rel_tol}, abs {abs_tol}"
            )));
        }
        if u.dim() != field.dim() {
            return Err(Error::InvalidParameter(format!(
                "initial point has dimension {}, field has {}",
                u.dim(),
                field.dim()
            )));
        }
        let k1 = field.eval(&u);
        Ok(Flow {
            field,
            rel_tol,
            abs_tol,
            t: 0.0,
            y: u.clone(),
            k1,
            h: None,
            err_old: 1e-4,
            record: true,
            result: FlowResult {
                endpoint: u.clone(),
                times: vec![0.0],
                states: vec![u],
                accepted_steps: 0,
                rejected_steps: 0,
            },
        })
    }

    /// Keep only the endpoint, not every accepted step.
    pub fn without_history(mut self) -> Self {
        self.record = false;
        self
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &RealVector {
        &self.y
    }

    fn weights(&self, y: &RealVector, y_new: &RealVector) -> impl Iterator<Item = f64> + '_ {
        let scales: Vec<f64> = y
            .iter()
            .zip(y_new.iter())
            .map(|(a, b)| self.abs_tol + self.rel_tol * a.abs().max(b.abs()))
            .collect();
        scales.into_iter()
    }

    fn initial_step(&self, span: f64) -> f64 {
        let sc: Vec<f64> = self
            .y
            .iter()
            .map(|c| self.abs_tol + self.rel_tol * c.abs())
            .collect();
        let rms = |v: &RealVector| {
            (v.iter().zip(&sc).map(|(c, s)| (c / s).powi(2)).sum::<f64>() / v.dim() as f64).sqrt()
        };
        let d0 = rms(&self.y);
        let d1 = rms(&self.k1);
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h.min(span)
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        let mut partial = self.result.clone();
        partial.endpoint = self.y.clone();
        Error::IntegrationFailure {
            t: self.t,
            reason: reason.into(),
            partial: Box::new(partial),
        }
    }

    /// Integrates forward to absolute time `t_end >= self.time()`.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        if t_end < self.t {
            return Err(Error::InvalidParameter(format!(
                "cannot integrate backwards from {} to {t_end}",
                self.t
            )));
        }
        let mut h = match self.h {
            Some(h) => h,
            None => self.initial_step(t_end - self.t),
        };
        let mut steps = 0usize;
        while self.t < t_end {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(self.fail("step budget exhausted"));
            }
            let remaining = t_end - self.t;
            let last = h >= remaining;
            let h_try = if last { remaining } else { h };
            if h_try <= 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(self.fail(format!("step size underflow (h = {h_try:e})")));
            }

            let (y_new, k7, err) = self.dp_step(h_try);
            let err = if err.is_finite() && y_new.is_finite() { err } else { f64::INFINITY };

            if err <= 1.0 {
                let fac11 = err.powf(EXPO);
                let fac = (fac11 / self.err_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROW, 1.0 / MIN_SHRINK);
                self.err_old = err.max(1e-4);
                self.t = if last { t_end } else { self.t + h_try };
                self.y = y_new;
                self.k1 = k7;
                self.result.accepted_steps += 1;
                if self.record {
                    self.result.times.push(self.t);
                    self.result.states.push(self.y.clone());
                }
                // A truncated final step says little about the next step size.
                if !last {
                    h = h_try / fac;
                }
            } else {
                self.result.rejected_steps += 1;
                let shrink = if err.is_finite() {
                    (err.powf(EXPO) / SAFETY).min(1.0 / MIN_SHRINK)
                } else {
                    1.0 / MIN_SHRINK
                };
                h = h_try / shrink;
                if h <= 1e-14 * self.t.abs().max(1.0) {
                    return Err(self.fail(format!("step size underflow (h = {h:e})")));
                }
            }
        }
        self.h = Some(h);
        self.result.endpoint = self.y.clone();
        Ok(())
    }

    fn dp_step(&self, h: f64) -> (RealVector, RealVector, f64) {
        let f = self.field;
        let y = &self.y;
        let k1 = &self.k1;
        let stage = |coeffs: &[(f64, &RealVector)]| {
            let mut out = y.clone();
            for (a, k) in coeffs {
                out = out.add_scaled(h * a, k);
            }
            out
        };
        let k2 = f.eval(&stage(&[(A21, k1)]));
        let k3 = f.eval(&stage(&[(A31, k1), (A32, &k2)]));
        let k4 = f.eval(&stage(&[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f.eval(&stage(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f.eval(&stage(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = stage(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f.eval(&y_new);

        let err_vec = RealVector::zeros(y.dim())
            .add_scaled(h * E1, k1)
            .add_scaled(h * E3, &k3)
            .add_scaled(h * E4, &k4)
            .add_scaled(h * E5, &k5)
            .add_scaled(h * E6, &k6)
            .add_scaled(h * E7, &k7);
        let d = y.dim() as f64;
        let err = (err_vec
            .iter()
            .zip(self.weights(y, &y_new))
            .map(|(e, s)| (e / s).powi(2))
            .sum::<f64>()
            / d)
            .sqrt();
        (y_new, k7, err)
    }

    pub fn into_result(self) -> FlowResult {
        self.result
    }
}

/// Solves `x' = h(x)`, `x(0) = u` on `[0, t_end]`.
pub fn integrate(
    field: &DriftField,
    u: &RealVector,
    t_end: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<FlowResult> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon T = {t_end}, expected > 0")));
    }
    let mut flow = Flow::new(field, u.clone(), rel_tol, abs_tol)?;
    flow.advance_to(t_end)?;
    Ok(flow.into_result())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct DescentReport {
    /// Sampled sup of `h . grad W` over `{lower <= W <= upper}`.
    pub sup_wdot: f64,
    pub worst_point: Option<RealVector>,
    pub samples: usize,
    pub verdict: Verdict,
}

/// Samples the annulus `{lower <= W <= upper}` inside `region` and checks
/// that `W` strictly decreases along the flow there.
pub fn check_descent(
    problem: &SAProblem,
    lower: u32,
    upper: u32,
    samples: usize,
    region: &BoxRegion,
    rng: &mut dyn RngCore,
) -> Result<DescentReport> {
    if upper <= lower {
        return Err(Error::InvalidParameter(format!(
            "descent check needs m > M, got M = {lower}, m = {upper}"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("check_descent needs samples >= 1".into()));
    }
    let (lo, hi) = (lower as f64, upper as f64);
    let budget = samples.saturating_mul(100);
    let mut hits = 0;
    let mut attempts = 0;
    let mut sup = f64::NEG_INFINITY;
    let mut worst = None;
    while hits < samples && attempts < budget {
        attempts += 1;
        let x = region.sample(rng);
        let w = problem.w(&x);
        if !(w >= lo && w <= hi) {
            continue;
        }
        hits += 1;
        let v = problem.drift_dot_grad(&x)?;
        if v > sup {
            sup = v;
            worst = Some(x);
        }
    }
    if hits == 0 {
        return Err(Error::EmptyRegion {
            what: format!("annulus {{{lower} <= W <= {upper}}}"),
            attempts,
        });
    }
    Ok(DescentReport {
        sup_wdot: sup,
        worst_point: worst,
        samples: hits,
        verdict: if sup < 0.0 { Verdict::Pass } else { Verdict::Fail },
    })
}

/// Roots of a scalar field on `[lo, hi]`, found by sign changes on a uniform
/// grid of `grid` points and refined by bisection to width 1e-10.
pub fn equilibria_1d(field: &DriftField, lo: f64, hi: f64, grid: usize) -> Result<Vec<f64>> {
    if field.dim() != 1 {
        return Err(Error::InvalidParameter(format!(
            "equilibria_1d needs a scalar field, got dimension {}",
            field.dim()
        )));
    }
    if grid < 2 || !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "need grid >= 2 and lo < hi, got grid {grid} on [{lo}, {hi}]"
        )));
    }
    let eval = |x: f64| field.eval(&RealVector::scalar(x))[0];
    let xs: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { hi } else { lo + (hi - lo) * i as f64 / (grid - 1) as f64 })
        .collect();
    let vals: Vec<f64> = xs.iter().map(|&x| eval(x)).collect();
    let mut roots = Vec::new();
    for i in 0..grid {
        if vals[i] == 0.0 {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < grid && vals[i + 1] != 0.0 && vals[i].signum() != vals[i + 1].signum() {
            let (mut a, mut b) = (xs[i], xs[i + 1]);
            let mut fa = vals[i];
            while b - a > 1e-10 {
                let mid = 0.5 * (a + b);
                let fm = eval(mid);
                if fm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
    }
    Ok(roots)
}

/// Largest distance between `y_j` and the flow started at `y_{start}` run
/// for the algorithmic time `sum_{n=start}^{j-1} a_eff(n)`, over
/// `start < j <= end`.
pub fn flow_compare(
    trajectory: &Trajectory,
    problem: &SAProblem,
    window: (usize, usize),
    rel_tol: f64,
) -> Result<f64> {
    let (start, end) = window;
    if start > end || end > trajectory.rows.len() {
        return Err(Error::InvalidParameter(format!(
            "window [{start}, {end}] outside a trajectory with {} rows",
            trajectory.rows.len()
        )));
    }
    let Some(origin) = trajectory.state(start) else {
        return Err(Error::InvalidParameter(format!("no state at index {start}")));
    };
    let mut flow = Flow::new(&problem.drift, origin.clone(), rel_tol, DEFAULT_ABS_TOL * rel_tol / DEFAULT_REL_TOL)?
        .without_history();
    let mut elapsed = 0.0;
    let mut worst = 0.0f64;
    for j in (start + 1)..=end {
        elapsed += trajectory.rows[j - 1].a_eff;
        flow.advance_to(elapsed)?;
        let y = trajectory
            .state(j)
            .ok_or_else(|| Error::InvalidParameter(format!("no state at index {j}")))?;
        worst = worst.max(y.distance(flow.state()));
    }
    Ok(worst)
}
