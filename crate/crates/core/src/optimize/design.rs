use crate::asymptotic::asymptotic_limit;
use crate::error::{DesignError, Result};
use crate::ideal::IdealRegret;
use crate::real::Real;
use crate::rules::{arm_moments, arm_moments_on, AllocationRule, ArmMoments, CovariateGrid, SoftmaxRule, STARVATION_THRESHOLD};
use crate::scenario::Scenario;

use super::{multi_start, OptimizationResult, OptimizerConfig, PENALTY};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignObjective {
    /// Ideal regret at a fixed sample size.
    IdealRegret { n: u64 },
    /// Limit of `n · R_I`.
    AsymptoticLimit,
}

fn objective_on_moments<T: Real>(
    engine: &IdealRegret<T>,
    scenario: &Scenario<T>,
    moments: &ArmMoments<T>,
    objective: DesignObjective,
) -> Result<T> {
    match objective {
        DesignObjective::IdealRegret { n } => engine.evaluate(scenario, moments, n),
        DesignObjective::AsymptoticLimit => Ok(asymptotic_limit(scenario, moments)?.limit),
    }
}

/// Objective of a concrete rule; errors on starved arms.
pub fn evaluate_design<T: Real>(
    scenario: &Scenario<T>,
    rule: &AllocationRule<T>,
    objective: DesignObjective,
) -> Result<T> {
    let m = arm_moments(rule, scenario)?;
    objective_on_moments(&IdealRegret::default(), scenario, &m, objective)
}

struct Problem<'a, T> {
    scenario: &'a Scenario<T>,
    objective: DesignObjective,
    engine: IdealRegret<T>,
    grid: CovariateGrid<T>,
}

impl<'a, T: Real> Problem<'a, T> {
    fn new(scenario: &'a Scenario<T>, objective: DesignObjective) -> Self {
        Self {
            scenario,
            objective,
            engine: IdealRegret::default(),
            grid: CovariateGrid::new(scenario, &[], crate::rules::MOMENT_NODES),
        }
    }

    /// Objective with starved or singular probes mapped to large finite
    /// values that still point back toward feasibility.
    fn penalized(&self, rule: &AllocationRule<T>) -> T {
        let penalty = T::lit(PENALTY);
        let m = match arm_moments_on(&self.grid, rule, self.scenario) {
            Ok(m) => m,
            Err(_) => return penalty * T::lit(2.0),
        };
        if m.any_starved() {
            let thr = T::lit(STARVATION_THRESHOLD);
            let deficit: T = m.arms.iter().map(|a| ((thr - a.nu) / thr).max(T::zero())).sum();
            return penalty * (T::one() + deficit);
        }
        match objective_on_moments(&self.engine, self.scenario, &m, self.objective) {
            Ok(v) if v.is_finite() => v,
            _ => penalty * T::lit(2.0),
        }
    }

    /// Exact re-evaluation of the returned design.
    fn final_value(&self, rule: &AllocationRule<T>) -> Result<T> {
        let m = arm_moments_on(&self.grid, rule, self.scenario)?;
        objective_on_moments(&self.engine, self.scenario, &m, self.objective)
    }
}

fn softmax_probs<T: Real>(a: &[T]) -> Vec<T> {
    let mut out: Vec<T> = a.iter().copied().chain(std::iter::once(T::zero())).collect();
    let mx = out.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in out.iter_mut() {
        *v = (*v - mx).exp();
        total += *v;
    }
    out.iter_mut().for_each(|v| *v /= total);
    out
}

fn check_arms<T: Real>(scenario: &Scenario<T>) -> Result<()> {
    if scenario.n_arms() < 2 {
        return Err(DesignError::InvalidInput("optimisation needs at least two arms".into()));
    }
    Ok(())
}

/// Best softmax-polynomial rule of the given degree. `warm` (of equal or
/// lower degree) is added as an extra start.
pub fn optimize_softmax<T: Real>(
    scenario: &Scenario<T>,
    objective: DesignObjective,
    degree: usize,
    cfg: &OptimizerConfig,
    warm: Option<&SoftmaxRule<T>>,
) -> Result<OptimizationResult<T>> {
    check_arms(scenario)?;
    let base = SoftmaxRule::balanced(scenario, degree)?;
    let k = scenario.n_arms();
    let m1 = degree + 1;
    let mut warm_starts = Vec::new();
    if let Some(w) = warm {
        if w.degree() > degree || w.coeffs().len() != (k - 1) * (w.degree() + 1) {
            return Err(DesignError::InvalidInput(
                "warm start must have the same arms and no higher degree".into(),
            ));
        }
        let wm = w.degree() + 1;
        let mut padded = vec![T::zero(); (k - 1) * m1];
        for r in 0..k - 1 {
            padded[r * m1..r * m1 + wm].copy_from_slice(&w.coeffs()[r * wm..(r + 1) * wm]);
        }
        warm_starts.push(padded);
    }
    let problem = Problem::new(scenario, objective);
    let to_rule = |x: &[T]| {
        base.with_coeffs(x.to_vec())
            .map(AllocationRule::Softmax)
            .ok()
    };
    let ms = multi_start(cfg, (k - 1) * m1, &warm_starts, |x| match to_rule(x) {
        Some(r) => problem.penalized(&r),
        None => T::lit(PENALTY) * T::lit(2.0),
    });
    let rule = to_rule(&ms.x).ok_or_else(|| DesignError::InvalidInput("optimiser left the parameter space".into()))?;
    let objective = problem.final_value(&rule)?;
    Ok(OptimizationResult {
        rule: Some(rule),
        profile: None,
        objective,
        best_restart: ms.best,
        trace: ms.trace,
        converged: ms.converged,
        wall_time: ms.wall_time,
    })
}

/// Softmax optimisation for degrees `0..=max_degree`, each warm-started from
/// the previous optimum so the best objective never increases with degree.
pub fn optimize_softmax_ladder<T: Real>(
    scenario: &Scenario<T>,
    objective: DesignObjective,
    max_degree: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<OptimizationResult<T>>> {
    let mut out: Vec<OptimizationResult<T>> = Vec::with_capacity(max_degree + 1);
    for m in 0..=max_degree {
        let warm = out.last().and_then(|r| match &r.rule {
            Some(AllocationRule::Softmax(s)) => Some(s.clone()),
            _ => None,
        });
        out.push(optimize_softmax(scenario, objective, m, cfg, warm.as_ref())?);
    }
    Ok(out)
}

/// Best covariate-free allocation, parameterised by `K − 1` softmax logits.
pub fn optimize_constant<T: Real>(
    scenario: &Scenario<T>,
    objective: DesignObjective,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult<T>> {
    check_arms(scenario)?;
    let k = scenario.n_arms();
    let problem = Problem::new(scenario, objective);
    let to_rule = |x: &[T]| AllocationRule::Constant { nu: softmax_probs(x) };
    let ms = multi_start(cfg, k - 1, &[], |x| problem.penalized(&to_rule(x)));
    let rule = to_rule(&ms.x);
    let objective = problem.final_value(&rule)?;
    Ok(OptimizationResult {
        rule: Some(rule),
        profile: None,
        objective,
        best_restart: ms.best,
        trace: ms.trace,
        converged: ms.converged,
        wall_time: ms.wall_time,
    })
}
