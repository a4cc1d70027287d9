//! Diagnostics computed on recorded trajectories: level-set hitting times,
//! windows of algorithmic time `T`, per-window Lyapunov descent, partial sums
//! of the gated martingale noise, and stopped Lyapunov moments of an
//! ensemble.
//!
//! Membership of a point in the `delta`-neighbourhood of a level set
//! `{W < L}` is decided through `W < L + epsilon / 2`, the inclusion used
//! when `delta` is small enough for `W` to move by less than `epsilon / 2`.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::model::SAProblem;
use crate::vector::RealVector;

#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticsConfig {
    /// Window length in algorithmic time.
    pub window: f64,
    /// Level `m > M` bounding the region the diagnostics watch.
    pub level_m: u32,
    pub delta: f64,
    pub epsilon: f64,
    /// Lipschitz estimate of `h` near `{W < m}`.
    pub lipschitz: Option<f64>,
}

impl DiagnosticsConfig {
    pub fn new(window: f64, level_m: u32, delta: f64, epsilon: f64) -> Result<Self> {
        for (name, v) in [("T", window), ("delta", delta), ("epsilon", epsilon)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} = {v}, expected > 0")));
            }
        }
        Ok(DiagnosticsConfig {
            window,
            level_m,
            delta,
            epsilon,
            lipschitz: None,
        })
    }

    pub fn with_lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    /// Requires `m >= M + 1`.
    pub fn validate_for(&self, problem: &SAProblem) -> Result<()> {
        if self.level_m <= problem.threshold_m() {
            return Err(Error::InvalidParameter(format!(
                "diagnostic level m = {} must exceed M = {}",
                self.level_m,
                problem.threshold_m()
            )));
        }
        Ok(())
    }

    /// `delta / (2 e^{K T})`: how small the martingale tail must be for the
    /// iterates to stay within `delta` of the flow over one window.
    pub fn tail_budget(&self) -> Option<f64> {
        self.lipschitz
            .map(|k| self.delta / (2.0 * (k * self.window).exp()))
    }
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            window: 1.0,
            level_m: 4,
            delta: 0.05,
            epsilon: 0.05,
            lipschitz: None,
        }
    }
}

/// `max_n |y_n|` over the rows and terminal state; infinite on overflow.
pub fn sup_norm(trajectory: &Trajectory) -> f64 {
    if trajectory.overflowed() {
        return f64::INFINITY;
    }
    trajectory
        .rows
        .iter()
        .map(|r| r.y.norm())
        .chain(std::iter::once(trajectory.terminal.y.norm()))
        .fold(0.0, f64::max)
}

/// First row index `n >= k` with `W(y_n) < level`.
pub fn hitting_time(trajectory: &Trajectory, k: usize, level: f64) -> Option<usize> {
    trajectory
        .rows
        .iter()
        .skip(k)
        .find(|r| r.w < level)
        .map(|r| r.n)
}

/// Last row index at which the step was scaled (`g > 1`).
pub fn last_scaled_index(trajectory: &Trajectory) -> Option<usize> {
    trajectory.rows.iter().rev().find(|r| r.scaled()).map(|r| r.n)
}

/// `n_0 < n_1 < ...` with `n_{i+1} = inf{n > n_i : sum_{j=n_i}^{n} a_eff(j) >= T}`,
/// stopping when the remaining rows cannot accumulate `T`.
pub fn window_indices(trajectory: &Trajectory, n0: usize, window: f64) -> Vec<usize> {
    let rows = &trajectory.rows;
    if n0 >= rows.len() {
        return Vec::new();
    }
    let mut out = vec![n0];
    let mut start = n0;
    loop {
        let mut sum = rows[start].a_eff;
        let mut next = None;
        for (n, row) in rows.iter().enumerate().skip(start + 1) {
            sum += row.a_eff;
            if sum >= window {
                next = Some(n);
                break;
            }
        }
        match next {
            Some(n) => {
                out.push(n);
                start = n;
            }
            None => break,
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WindowVerdict {
    /// `W` fell by more than `epsilon / 2` across the window.
    Descended,
    /// The window ended in the neighbourhood of `{W < M}`.
    Trapped,
    /// Neither.
    Violated,
    /// The window started outside `{W < m}` and is not judged.
    Unchecked,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowReport {
    /// Index into `windows` of the first window starting inside `{W < m}`.
    pub start: Option<usize>,
    /// `(n_i, n_{i+1})` pairs.
    pub windows: Vec<(usize, usize)>,
    /// One verdict per window; windows before `start` are `Unchecked`.
    pub verdicts: Vec<WindowVerdict>,
}

impl WindowReport {
    pub fn count(&self, verdict: WindowVerdict) -> usize {
        self.verdicts.iter().filter(|v| **v == verdict).count()
    }

    pub fn violations(&self) -> usize {
        self.count(WindowVerdict::Violated)
    }
}

/// Judges each window `[n_i, n_{i+1}]` (from `n_0 = 0`) that starts in
/// `{W < m}`: either `W` drops by `epsilon / 2` or the window ends with
/// `W < M + epsilon / 2`.
pub fn window_descent_report(
    trajectory: &Trajectory,
    problem: &SAProblem,
    diag: &DiagnosticsConfig,
) -> Result<WindowReport> {
    diag.validate_for(problem)?;
    let idx = window_indices(trajectory, 0, diag.window);
    let windows: Vec<(usize, usize)> = idx.windows(2).map(|p| (p[0], p[1])).collect();
    let m = diag.level_m as f64;
    let trap = problem.threshold_m() as f64 + diag.epsilon / 2.0;
    let rows = &trajectory.rows;
    let start = windows.iter().position(|&(a, _)| rows[a].w < m);
    let verdicts = windows
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let (w0, w1) = (rows[a].w, rows[b].w);
            if start.is_none_or(|s| i < s) || !(w0 < m) {
                WindowVerdict::Unchecked
            } else if w1 < w0 - diag.epsilon / 2.0 {
                WindowVerdict::Descended
            } else if w1 < trap {
                WindowVerdict::Trapped
            } else {
                WindowVerdict::Violated
            }
        })
        .collect();
    Ok(WindowReport {
        start,
        windows,
        verdicts,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MartingaleReport {
    /// `S_q = sum_{n <= q} 1{W(y_n) < m + epsilon/2} a_eff(n) M_{n+1}`
    pub partials: Vec<RealVector>,
    /// `sup_tail[k]`: Euclidean diameter of the bounding box of
    /// `{S_q : q >= k}`; nonincreasing in `k`, and tends to 0 exactly when
    /// the partial sums converge.
    pub sup_tail: Vec<f64>,
}

impl MartingaleReport {
    /// First `k` with `sup_tail[k] < budget`.
    pub fn settled_after(&self, budget: f64) -> Option<usize> {
        self.sup_tail.iter().position(|&s| s < budget)
    }
}

/// Partial sums of the noise gated on the neighbourhood of `{W < m}`.
pub fn martingale_partial_sums(
    trajectory: &Trajectory,
    problem: &SAProblem,
    diag: &DiagnosticsConfig,
) -> Result<MartingaleReport> {
    let noise = trajectory
        .noise
        .as_ref()
        .ok_or_else(|| Error::IncompleteTrace("trajectory has no recorded noise".into()))?;
    if noise.len() != trajectory.rows.len() {
        return Err(Error::IncompleteTrace(format!(
            "{} noise draws for {} rows",
            noise.len(),
            trajectory.rows.len()
        )));
    }
    let gate = diag.level_m as f64 + diag.epsilon / 2.0;
    let d = problem.dim();
    let mut acc = RealVector::zeros(d);
    let mut partials = Vec::with_capacity(noise.len());
    for (row, m) in trajectory.rows.iter().zip(noise) {
        if row.w < gate {
            acc = acc.add_scaled(row.a_eff, m);
        }
        partials.push(acc.clone());
    }
    Ok(MartingaleReport {
        sup_tail: tail_oscillation(&partials, d),
        partials,
    })
}

fn tail_oscillation(partials: &[RealVector], d: usize) -> Vec<f64> {
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut lo = vec![f64::INFINITY; d];
    let mut out = vec![0.0; partials.len()];
    for (k, s) in partials.iter().enumerate().rev() {
        for i in 0..d {
            hi[i] = hi[i].max(s[i]);
            lo[i] = lo[i].min(s[i]);
        }
        out[k] = hi
            .iter()
            .zip(&lo)
            .fold(0.0f64, |acc, (h, l)| acc.hypot(h - l));
    }
    out
}

/// Ensemble mean of `W(y_{n ∧ tau})`, `tau` the first `n >= k` with
/// `W(y_n) < M`, for `n = k, k+1, ...` up to the longest trajectory.
/// Trajectories that overflowed before `n` contribute `+inf`.
pub fn ensemble_lyapunov_moment(trajectories: &[Trajectory], k: usize, level_m: u32) -> Vec<f64> {
    let len = trajectories.iter().map(|t| t.rows.len()).max().unwrap_or(0);
    if trajectories.is_empty() || len <= k {
        return Vec::new();
    }
    let level = level_m as f64;
    let mut sums = vec![0.0; len - k];
    for t in trajectories {
        let tau = hitting_time(t, k, level);
        for (i, n) in (k..len).enumerate() {
            let at = tau.map_or(n, |tau| n.min(tau));
            sums[i] += t.rows.get(at).map_or(f64::INFINITY, |r| r.w);
        }
    }
    let count = trajectories.len() as f64;
    sums.into_iter().map(|s| s / count).collect()
}

/// Everything the diagnostics know about one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub sup_norm: f64,
    /// Level -> first hitting time from 0 (`None` = never).
    pub hit_times: BTreeMap<u32, Option<usize>>,
    pub last_scaled: Option<usize>,
    pub windows: Vec<(usize, usize)>,
    pub window_verdicts: Vec<WindowVerdict>,
    pub diagnostics_start: Option<usize>,
    pub martingale_sup_tail: Option<Vec<f64>>,
    pub tail_budget: Option<f64>,
    pub overflow: bool,
}

impl StabilityReport {
    pub fn violations(&self) -> usize {
        self.window_verdicts
            .iter()
            .filter(|v| **v == WindowVerdict::Violated)
            .count()
    }
}

pub fn analyze(
    trajectory: &Trajectory,
    problem: &SAProblem,
    diag: &DiagnosticsConfig,
) -> Result<StabilityReport> {
    let windows = window_descent_report(trajectory, problem, diag)?;
    let mut hit_times = BTreeMap::new();
    for level in [problem.threshold_m(), diag.level_m] {
        hit_times.insert(level, hitting_time(trajectory, 0, level as f64));
    }
    let martingale = match martingale_partial_sums(trajectory, problem, diag) {
        Ok(r) => Some(r.sup_tail),
        Err(Error::IncompleteTrace(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(StabilityReport {
        sup_norm: sup_norm(trajectory),
        hit_times,
        last_scaled: last_scaled_index(trajectory),
        windows: windows.windows,
        window_verdicts: windows.verdicts,
        diagnostics_start: windows.start,
        martingale_sup_tail: martingale,
        tail_budget: diag.tail_budget(),
        overflow: trajectory.overflowed(),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::engine::{TerminalState, TraceRow};
    use crate::registry;
    use proptest::prelude::*;

    /// A 1-d trajectory with `y_n = sqrt(W_n)` and the given steps.
    pub(crate) fn synthetic(ws: &[f64], gs: &[f64], a_eff: &[f64]) -> Trajectory {
        let rows: Vec<TraceRow> = ws
            .iter()
            .enumerate()
            .map(|(n, &w)| TraceRow {
                n,
                a: a_eff[n] * gs[n],
                g: gs[n],
                a_eff: a_eff[n],
                w,
                y: RealVector::scalar(w.sqrt()),
            })
            .collect();
        let last = rows.last().map(|r| r.y.clone()).unwrap_or(RealVector::zeros(1));
        Trajectory {
            terminal: TerminalState {
                n: rows.len(),
                y: last,
                overflowed: false,
            },
            rows,
            noise: None,
            meta: None,
        }
    }

    fn with_w(ws: &[f64]) -> Trajectory {
        synthetic(ws, &vec![1.0; ws.len()], &vec![0.5; ws.len()])
    }

    #[test]
    fn sup_norm_cases() {
        let t = synthetic(&[9.0, 1.0, 0.25], &[1.0; 3], &[0.1; 3]);
        assert_eq!(sup_norm(&t), 3.0);
        let mut o = t.clone();
        o.terminal.overflowed = true;
        assert_eq!(sup_norm(&o), f64::INFINITY);
    }

    #[test]
    fn hitting_time_cases() {
        let t = with_w(&[9.0, 5.0, 3.0, 0.5]);
        assert_eq!(hitting_time(&t, 0, 4.0), Some(2));
        assert_eq!(hitting_time(&t, 3, 1.0), Some(3));
        assert_eq!(hitting_time(&t, 0, 0.1), None);
    }

    #[test]
    fn last_scaled_cases() {
        let t = synthetic(&[1.0; 5], &[5.0, 2.0, 1.0, 1.0, 1.0], &[0.1; 5]);
        assert_eq!(last_scaled_index(&t), Some(1));
        let t = synthetic(&[1.0; 4], &[1.0; 4], &[0.1; 4]);
        assert_eq!(last_scaled_index(&t), None);
        let t = synthetic(&[1.0; 4], &[1.0, 1.0, 3.0, 1.0], &[0.1; 4]);
        assert_eq!(last_scaled_index(&t), Some(2));
    }

    #[test]
    fn window_cases() {
        let t = synthetic(&[1.0; 6], &[1.0; 6], &[0.5; 6]);
        assert_eq!(window_indices(&t, 0, 1.0), vec![0, 1, 2, 3, 4, 5]);

        let harmonic: Vec<f64> = (0..10).map(|n| 1.0 / (n + 1) as f64).collect();
        let t = synthetic(&[1.0; 10], &[1.0; 10], &harmonic);
        assert_eq!(window_indices(&t, 0, 1.0)[1], 1);

        let t = synthetic(&[1.0; 4], &[1.0; 4], &[0.1; 4]);
        assert_eq!(window_indices(&t, 0, 1.0), vec![0]);
    }

    #[test]
    fn descent_verdicts() {
        let p = registry::example1();
        let diag = DiagnosticsConfig::new(1.0, 4, 0.05, 0.05).unwrap();
        // each window is one step of length 1; W drops by 0.5 and stays above M
        let t = synthetic(&[3.9, 3.4, 2.9, 2.4, 1.9], &[1.0; 5], &[0.5; 5]);
        let r = window_descent_report(&t, &p, &diag).unwrap();
        assert_eq!(r.start, Some(0));
        assert!(r.verdicts.iter().all(|v| *v == WindowVerdict::Descended));

        let t = synthetic(&[0.5, 0.6, 0.6, 0.7, 0.7], &[1.0; 5], &[0.5; 5]);
        let r = window_descent_report(&t, &p, &diag).unwrap();
        assert!(r.verdicts.iter().all(|v| *v == WindowVerdict::Trapped));

        let t = synthetic(&[9.0, 9.0, 3.0, 3.0, 3.5], &[1.0; 5], &[0.5; 5]);
        let r = window_descent_report(&t, &p, &diag).unwrap();
        assert_eq!(r.start, Some(2));
        assert_eq!(
            r.verdicts,
            vec![
                WindowVerdict::Unchecked,
                WindowVerdict::Unchecked,
                WindowVerdict::Violated,
                WindowVerdict::Violated
            ]
        );

        let bad = DiagnosticsConfig::new(1.0, 1, 0.05, 0.05).unwrap();
        assert!(window_descent_report(&t, &p, &bad).is_err());
    }

    #[test]
    fn martingale_sums() {
        let p = registry::example1();
        let diag = DiagnosticsConfig::new(1.0, 4, 0.05, 0.05).unwrap();
        let mut t = synthetic(&[1.0; 4], &[1.0; 4], &[1.0; 4]);
        t.noise = Some([1.0, -1.0, 1.0, -1.0].iter().map(|&m| RealVector::scalar(m)).collect());
        let r = martingale_partial_sums(&t, &p, &diag).unwrap();
        let partials: Vec<f64> = r.partials.iter().map(|s| s[0]).collect();
        assert_eq!(partials, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(r.sup_tail[0], 1.0);

        let mut outside = synthetic(&[100.0; 4], &[1.0; 4], &[1.0; 4]);
        outside.noise = t.noise.clone();
        let r = martingale_partial_sums(&outside, &p, &diag).unwrap();
        assert!(r.partials.iter().all(|s| s[0] == 0.0));

        let missing = synthetic(&[1.0; 4], &[1.0; 4], &[1.0; 4]);
        assert!(matches!(
            martingale_partial_sums(&missing, &p, &diag),
            Err(Error::IncompleteTrace(_))
        ));
    }

    #[test]
    fn stopped_moments() {
        // both already inside {W < 1} at k = 0
        let a = with_w(&[0.5, 3.0, 7.0]);
        let b = with_w(&[0.25, 9.0, 1.0]);
        let m = ensemble_lyapunov_moment(&[a.clone(), b], 0, 1);
        assert_eq!(m, vec![0.375, 0.375, 0.375]);

        let c = with_w(&[4.0, 2.0, 0.5, 6.0]);
        assert_eq!(ensemble_lyapunov_moment(&[c], 0, 1), vec![4.0, 2.0, 0.5, 0.5]);
        assert!(ensemble_lyapunov_moment(&[a], 5, 1).is_empty());
    }

    proptest! {
        #[test]
        fn hitting_time_monotone(ws in prop::collection::vec(0.0f64..10.0, 1..60), k1 in 0usize..60, k2 in 0usize..60, m1 in 0.5f64..10.0, m2 in 0.5f64..10.0) {
            let t = with_w(&ws);
            let (ka, kb) = (k1.min(k2), k1.max(k2));
            let (lo, hi) = (m1.min(m2), m1.max(m2));
            let inf = usize::MAX;
            let ha = hitting_time(&t, ka, lo).unwrap_or(inf);
            let hb = hitting_time(&t, kb, lo).unwrap_or(inf);
            prop_assert!(ha <= hb);
            let hl = hitting_time(&t, ka, lo).unwrap_or(inf);
            let hh = hitting_time(&t, ka, hi).unwrap_or(inf);
            prop_assert!(hh <= hl);
        }

        #[test]
        fn windows_are_tight(a in prop::collection::vec(0.01f64..0.99, 2..200)) {
            let n = a.len();
            let t = synthetic(&vec![1.0; n], &vec![1.0; n], &a);
            let idx = window_indices(&t, 0, 1.0);
            for w in idx.windows(2) {
                let full: f64 = a[w[0]..=w[1]].iter().sum();
                let short: f64 = a[w[0]..w[1]].iter().sum();
                prop_assert!(full >= 1.0);
                prop_assert!(short < 1.0);
            }
            let last = *idx.last().unwrap();
            prop_assert!(a[last..].iter().sum::<f64>() < 1.0 + a[last]);
        }

        #[test]
        fn sup_tail_nonincreasing(steps in prop::collection::vec(-1.0f64..1.0, 1..200)) {
            let n = steps.len();
            let p = registry::example1();
            let diag = DiagnosticsConfig::default();
            let mut t = synthetic(&vec![1.0; n], &vec![1.0; n], &vec![1.0; n]);
            t.noise = Some(steps.iter().map(|&m| RealVector::scalar(m)).collect());
            let r = martingale_partial_sums(&t, &p, &diag).unwrap();
            for w in r.sup_tail.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            // the raw tail distance never exceeds the oscillation
            for k in 0..n {
                let raw = r.partials[k..].iter().map(|s| (s[0] - r.partials[k][0]).abs()).fold(0.0, f64::max);
                prop_assert!(raw <= r.sup_tail[k] + 1e-12);
            }
        }
    }
}
