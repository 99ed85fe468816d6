//! Design synthesis: rule optimisation, the moment-space lower bound and
//! reconstruction of deterministic rules.

mod design;
mod lower_bound;
mod nelder_mead;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::real::Real;
use crate::rules::AllocationRule;

pub use design::{evaluate_design, optimize_constant, optimize_softmax, optimize_softmax_ladder, DesignObjective};
pub use lower_bound::{
    lower_bound_asymptotic, min_variance_bound, reconstruct_deterministic, MomentProfile, Reconstruction,
};
pub use nelder_mead::{NelderMead, NmOutcome};

/// Objective value assigned to infeasible probes.
pub const PENALTY: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    /// Random starts in addition to the all-zero start.
    pub restarts: usize,
    pub seed: u64,
    pub nelder_mead: NelderMead,
    /// Run restarts on the rayon pool. Results do not depend on this.
    pub parallel: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 16,
            seed: 0,
            nelder_mead: NelderMead::default(),
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartTrace<T> {
    pub restart: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: T,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    /// Best rule found (design optimisation).
    pub rule: Option<AllocationRule<T>>,
    /// Best moment profile found (lower bound).
    pub profile: Option<MomentProfile<T>>,
    /// Objective of the returned design, re-evaluated from scratch.
    pub objective: T,
    pub best_restart: usize,
    pub trace: Vec<RestartTrace<T>>,
    /// Whether the winning restart met the convergence tolerance.
    pub converged: bool,
    pub wall_time: Duration,
}

impl<T: Real> OptimizationResult<T> {
    pub fn restart_count(&self) -> usize {
        self.trace.len()
    }

    pub fn restart_values(&self) -> Vec<T> {
        self.trace.iter().map(|t| t.objective).collect()
    }
}

pub(crate) struct MultiStart<T> {
    pub x: Vec<T>,
    pub best: usize,
    pub trace: Vec<RestartTrace<T>>,
    pub converged: bool,
    pub wall_time: Duration,
}

/// Starting points: zeros, then `restarts` uniform draws on `[-1, 1]^dim`
/// (restart `i` draws from stream `i` of the master seed), then `warm`.
pub(crate) fn starting_points<T: Real>(cfg: &OptimizerConfig, dim: usize, warm: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut starts = vec![vec![T::zero(); dim]];
    for i in 1..=cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        starts.push((0..dim).map(|_| T::lit(rng.random_range(-1.0..=1.0))).collect());
    }
    starts.extend(warm.iter().cloned());
    starts
}

/// Runs Nelder-Mead from every start and keeps the lowest value; ties go to
/// the lowest restart index.
pub(crate) fn multi_start<T, F>(cfg: &OptimizerConfig, dim: usize, warm: &[Vec<T>], objective: F) -> MultiStart<T>
where
    T: Real,
    F: Fn(&[T]) -> T + Sync,
{
    let clock = Instant::now();
    let starts = starting_points(cfg, dim, warm);
    let nm = cfg.nelder_mead;
    let run = |s: &Vec<T>| nm.minimize(|x| objective(x), s);
    let outcomes: Vec<NmOutcome<T>> = if cfg.parallel {
        starts.par_iter().map(run).collect()
    } else {
        starts.iter().map(run).collect()
    };
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value < outcomes[best].value {
            best = i;
        }
    }
    let trace = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| RestartTrace {
            restart: i,
            iterations: o.iterations,
            evaluations: o.evaluations,
            objective: o.value,
            converged: o.converged,
        })
        .collect();
    let winner = &outcomes[best];
    MultiStart {
        x: winner.x.clone(),

        best,
        converged: winner.converged,
        trace,
        wall_time: clock.elapsed(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_are_deterministic_and_in_range() {
        let cfg = OptimizerConfig {
            restarts: 5,
            seed: 42,
            ..OptimizerConfig::default()
        };
        let a = starting_points::<f64>(&cfg, 4, &[]);
        let b = starting_points::<f64>(&cfg, 4, &[]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a[0].iter().all(|&v| v == 0.0));
        assert!(a[1..].iter().flatten().all(|v| (-1.0..=1.0).contains(v)));
        assert_ne!(a[1], a[2]);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.2).powi(4) + (3.0 * x[0]).sin().powi(2);
        let serial = OptimizerConfig {
            restarts: 6,
            seed: 9,
            ..OptimizerConfig::default()
        };
        let parallel = OptimizerConfig {
            parallel: true,
            ..serial
        };
        let a = multi_start(&serial, 2, &[], f);
        let b = multi_start(&parallel, 2, &[], f);
        assert_eq!(a.x, b.x);
        assert_eq!(a.best, b.best);
        assert_eq!(a.trace, b.trace);
    }
}
