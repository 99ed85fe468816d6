//! CSV emitters for grids, curves and optimiser traces.

use serde::Serialize;

use crate::optimize::RestartTrace;
use crate::real::Real;
use crate::rules::AllocationRule;

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

fn headed_csv(header: &[String], rows: &[Vec<f64>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv write");
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// `x, pi_1, ..., pi_K` on `points` equally spaced points over `[lo, hi]`.
pub fn pi_grid_csv<T: Real>(rule: &AllocationRule<T>, lo: T, hi: T, points: usize) -> String {
    let k = rule.n_arms();
    let header: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=k).map(|j| format!("pi_{j}")))
        .collect();
    let steps = points.max(2) - 1;
    let rows: Vec<Vec<f64>> = (0..=steps)
        .map(|i| {
            let x = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(steps);
            std::iter::once(x.to_f64_lossy())
                .chain(rule.pi_eval(&[x]).into_iter().map(|p| p.to_f64_lossy()))
                .collect()
        })
        .collect();
    headed_csv(&header, &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealRow {
    /// Sample size, or `inf` for the asymptotic limit row.
    pub n: String,
    #[serde(rename = "R_I")]
    pub regret: f64,
    #[serde(rename = "n_R_I")]
    pub scaled: f64,
}

pub fn ideal_csv(rows: &[IdealRow]) -> String {
    to_csv(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationRow {
    /// `nu_1` value or rule identifier.
    pub design: String,
    pub errors: String,
    pub n: usize,
    pub mean: f64,
    pub ci: f64,
    pub reps: usize,
    pub starved: usize,
    /// Ideal regret of the same design, for side-by-side curves.
    pub ideal: f64,
}

pub fn simulation_csv(rows: &[SimulationRow]) -> String {
    to_csv(rows)
}

#[derive(Serialize)]
struct TraceRow {
    restart: usize,
    iterations: usize,
    evaluations: usize,
    objective: f64,
    converged: bool,
}

/// One row per optimiser restart.
pub fn trace_csv<T: Real>(trace: &[RestartTrace<T>]) -> String {
    to_csv(trace.iter().map(|t| TraceRow {
        restart: t.restart,
        iterations: t.iterations,
        evaluations: t.evaluations,
        objective: t.objective.to_f64_lossy(),
        converged: t.converged,
    }))
}
