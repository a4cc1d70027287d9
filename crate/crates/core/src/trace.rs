//! Trace CSV and ensemble summary JSON.
//!
//! Trace header: `n,a,g,a_eff,W,scaled,y0,...,y{d-1}`; one row per step,
//! holding the state the step started from. Floats use the shortest
//! representation that parses back to the same value.

use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::engine::{RunSummary, TerminalState, TraceRow, Trajectory};
use crate::error::{Error, Result};
use crate::vector::RealVector;

const FIXED: [&str; 6] = ["n", "a", "g", "a_eff", "W", "scaled"];

fn float(v: f64) -> String {
    format!("{v:?}")
}

pub fn write_trace_to<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let d = trajectory.terminal.y.dim();
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = FIXED
        .iter()
        .map(|s| s.to_string())
        .chain((0..d).map(|i| format!("y{i}")))
        .collect();
    w.write_record(&header)?;
    for row in &trajectory.rows {
        let mut rec = vec![
            row.n.to_string(),
            float(row.a),
            float(row.g),
            float(row.a_eff),
            float(row.w),
            (row.scaled() as u8).to_string(),
        ];
        rec.extend(row.y.iter().map(|c| float(*c)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(trajectory: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_trace_to(trajectory, std::fs::File::create(path)?)
}

/// Rows only: the noise record is absent and the terminal state is the last
/// row's state.
pub fn read_trace_from<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let fixed_ok = header.len() > FIXED.len()
        && header.iter().zip(FIXED).all(|(a, b)| a == b)
        && header
            .iter()
            .skip(FIXED.len())
            .enumerate()
            .all(|(i, h)| h == format!("y{i}"));
    if !fixed_ok {
        return Err(Error::IncompleteTrace(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let d = header.len() - FIXED.len();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| Error::IncompleteTrace(format!("row {}: bad {what}", line + 1));
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(FIXED.get(i).unwrap_or(&"y")));
        let n = rec.get(0).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad("n"))?;
        let y = (0..d).map(|i| num(FIXED.len() + i)).collect::<Result<Vec<_>>>()?;
        rows.push(TraceRow {
            n,
            a: num(1)?,
            g: num(2)?,
            a_eff: num(3)?,
            w: num(4)?,
            y: RealVector::new(y),
        });
    }
    let terminal = match rows.last() {
        Some(last) => TerminalState {
            n: last.n,
            y: last.y.clone(),
            overflowed: false,
        },
        None => return Err(Error::IncompleteTrace("trace has no rows".into())),
    };
    Ok(Trajectory {
        rows,
        noise: None,
        terminal,
        meta: None,
    })
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Trajectory> {
    read_trace_from(std::fs::File::open(path)?)
}

#[derive(Clone, Debug, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// `null` when the run overflowed.
    pub sup_norm: f64,
    pub overflow: bool,
    pub last_scaled: Option<usize>,
    #[serde(rename = "terminal_W")]
    pub terminal_w: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Aggregates {
    pub overflow_rate: f64,
    /// Over the runs that stayed finite.
    pub max_sup_norm: Option<f64>,
    pub max_last_scaled: Option<usize>,
    /// Violated windows across the ensemble, when diagnostics were run.
    pub descent_violations: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub seeds: Vec<SeedSummary>,
    pub aggregates: Aggregates,
}

impl EnsembleSummary {
    pub fn new(summaries: &[RunSummary], descent_violations: Option<usize>) -> Result<Self> {
        if summaries.is_empty() {
            return Err(Error::InvalidParameter("nothing to summarize".into()));
        }
        let seeds: Vec<SeedSummary> = summaries
            .iter()
            .map(|s| SeedSummary {
                seed: s.seed,
                sup_norm: s.sup_norm,
                overflow: s.overflow,
                last_scaled: s.last_scaled,
                terminal_w: s.terminal_w,
                error: s.error.clone(),
            })
            .collect();
        let overflows = summaries.iter().filter(|s| s.overflow).count();
        let max_sup_norm = summaries
            .iter()
            .filter(|s| !s.overflow && s.sup_norm.is_finite())
            .map(|s| s.sup_norm)
            .reduce(f64::max);
        Ok(EnsembleSummary {
            seeds,
            aggregates: Aggregates {
                overflow_rate: overflows as f64 / summaries.len() as f64,
                max_sup_norm,
                max_last_scaled: summaries.iter().filter_map(|s| s.last_scaled).max(),
                descent_violations,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn summarize(
    summaries: &[RunSummary],
    descent_violations: Option<usize>,
    path: impl AsRef<Path>,
) -> Result<EnsembleSummary> {
    let summary = EnsembleSummary::new(summaries, descent_violations)?;
    std::fs::write(path, summary.to_json()? + "\n")?;
    Ok(summary)
}
