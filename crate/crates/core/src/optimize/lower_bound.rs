use serde::Serialize;

use crate::covariate::CovariateModel;
use crate::error::{DesignError, Result};
use crate::quadrature::GaussLegendre;
use crate::real::Real;
use crate::rules::{arm_moments, AllocationRule, PiecewiseRule, MOMENT_NODES};
use crate::scenario::{Basis, Scenario};

use super::{multi_start, OptimizationResult, OptimizerConfig, PENALTY};

/// Slack, relative to the squared support width, for deciding that an arm's
/// variance sits on its floor.
const FLOOR_TOL: f64 = 1e-6;
/// Maximum moment discrepancy accepted by the reconstruction round trip.
const ROUND_TRIP_TOL: f64 = 1e-4;

/// Smallest variance of a density on the line bounded above by `c`.
pub fn min_variance_bound<T: Real>(c: T) -> Result<T> {
    if !(c > T::zero()) || !c.is_finite() {
        return Err(DesignError::InvalidInput(format!("density bound must be > 0, got {c}")));
    }
    Ok(T::one() / (T::lit(12.0) * c * c))
}

/// Per-arm covariate mass, mean and variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentProfile<T> {
    pub nu: Vec<T>,
    pub mu: Vec<T>,
    pub tau_sq: Vec<T>,
    /// Variance floors `ν_k² w² / 12` when the uniform bound is active.
    pub floor: Option<Vec<T>>,
    /// Residuals of `Σν = 1`, `Σνμ = μ`, `Σν(τ² + μ²) = τ² + μ²`.
    pub residuals: [T; 3],
}

impl<T: Real> MomentProfile<T> {
    /// Arms whose variance is on the floor (within a small relative slack).
    pub fn at_floor(&self, width: T) -> Vec<bool> {
        match &self.floor {
            Some(fl) => self
                .tau_sq
                .iter()
                .zip(fl)
                .map(|(&t, &f)| t - f <= T::lit(FLOOR_TOL) * width * width)
                .collect(),
            None => vec![false; self.nu.len()],
        }
    }

    fn with_residuals(mut self, mean: T, var: T) -> Self {
        let s0: T = self.nu.iter().copied().sum();
        let s1: T = self.nu.iter().zip(&self.mu).map(|(&n, &m)| n * m).sum();
        let s2: T = (0..self.nu.len())
            .map(|k| self.nu[k] * (self.tau_sq[k] + self.mu[k] * self.mu[k]))
            .sum();
        self.residuals = [s0 - T::one(), s1 - mean, s2 - (var + mean * mean)];
        self
    }
}

/// Cached geometry of the limit as a function of the moment profile.
struct ProfileObjective<T> {
    /// `(θ, left, right, f(θ)/(2|Δβ|))` per envelope breakpoint.
    crossings: Vec<(T, usize, usize, T)>,
    sigma_sq: Vec<T>,
}

impl<T: Real> ProfileObjective<T> {
    fn new(scenario: &Scenario<T>) -> Self {
        let cov = scenario.covariate();
        let crossings = scenario
            .envelope_1d()
            .iter()
            .map(|c| {
                let gap = (scenario.arm(c.right).beta[0] - scenario.arm(c.left).beta[0]).abs();
                (c.theta, c.left, c.right, cov.density_1d(c.theta) / (T::lit(2.0) * gap))
            })
            .collect();
        Self {
            crossings,
            sigma_sq: scenario.arms().iter().map(|a| a.sigma * a.sigma).collect(),
        }
    }

    fn value(&self, nu: &[T], mu: &[T], tau_sq: &[T]) -> T {
        let mut total = T::zero();
        for &(theta, l, r, w) in &self.crossings {
            let mut v = T::zero();
            for j in [l, r] {
                let d = theta - mu[j];
                v += self.sigma_sq[j] / nu[j] * (T::one() + d * d / tau_sq[j]);
            }
            total += w * v;
        }
        total
    }
}

fn softmax<T: Real>(a: &[T]) -> Vec<T> {
    let mx = a.iter().copied().fold(T::neg_infinity(), T::max);
    let e: Vec<T> = a.iter().map(|&v| (v - mx).exp()).collect();
    let s: T = e.iter().copied().sum();
    e.into_iter().map(|v| v / s).collect()
}

struct Decoder<T> {
    k: usize,
    lo: T,
    hi: T,
    mean: T,
    var: T,
    uniform_floor: bool,
}

enum Decoded<T> {
    Feasible(MomentProfile<T>),
    /// Penalty value for an infeasible probe.
    Infeasible(T),
}

impl<T: Real> Decoder<T> {
    /// Three blocks of `K` logits: masses, shares of the (shifted) mean and
    /// shares of the residual variance budget.
    fn decode(&self, p: &[T]) -> Decoded<T> {
        let k = self.k;
        let nu = softmax(&p[..k]);
        let shares = softmax(&p[k..2 * k]);
        let budget_shares = softmax(&p[2 * k..]);
        let penalty = T::lit(PENALTY);
        if nu.iter().any(|&v| !(v > T::zero())) {
            return Decoded::Infeasible(penalty * T::lit(2.0));
        }
        let width = self.hi - self.lo;
        let mu: Vec<T> = (0..k)
            .map(|j| self.lo + shares[j] * (self.mean - self.lo) / nu[j])
            .collect();
        let overshoot: T = mu.iter().map(|&m| (m - self.hi).max(T::zero()) / width).sum();
        if overshoot > T::zero() {
            return Decoded::Infeasible(penalty * (T::one() + overshoot));
        }
        let floor: Option<Vec<T>> = self
            .uniform_floor
            .then(|| nu.iter().map(|&v| v * v * width * width / T::lit(12.0)).collect());
        let used: T = (0..k)
            .map(|j| nu[j] * (mu[j] * mu[j] + floor.as_ref().map_or(T::zero(), |f| f[j])))
            .sum();
        let budget = self.var + self.mean * self.mean - used;
        if !(budget > T::zero()) {
            return Decoded::Infeasible(penalty * (T::one() + budget.abs() / self.var));
        }
        let tau_sq: Vec<T> = (0..k)
            .map(|j| floor.as_ref().map_or(T::zero(), |f| f[j]) + budget_shares[j] * budget / nu[j])
            .collect();
        if tau_sq.iter().any(|&t| !(t > T::zero())) {
            return Decoded::Infeasible(penalty * T::lit(2.0));
        }
        Decoded::Feasible(
            MomentProfile {
                nu,
                mu,
                tau_sq,
                floor,
                residuals: [T::zero(); 3],
            }
            .with_residuals(self.mean, self.var),
        )
    }
}

/// Minimises the K-arm limit over moment profiles satisfying the mixture
/// identities. With `use_uniform_bound` every arm's variance is held above
/// the smallest variance compatible with a uniform covariate density.
pub fn lower_bound_asymptotic<T: Real>(
    scenario: &Scenario<T>,
    use_uniform_bound: bool,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult<T>> {
    if scenario.basis() != (Basis::Linear { dim: 1 }) {
        return Err(DesignError::Unsupported(
            "the moment lower bound needs a linear model in a scalar covariate".into(),
        ));
    }
    if use_uniform_bound && !matches!(scenario.covariate(), CovariateModel::UniformBox { .. }) {
        return Err(DesignError::InvalidInput(
            "the uniform variance floor applies to a uniform covariate only".into(),
        ));
    }
    if scenario.arms().iter().any(|a| !(a.sigma > T::zero())) {
        return Err(DesignError::InvalidInput("noise standard deviations must be > 0".into()));
    }
    let (lo, hi) = scenario.covariate().support_1d();
    let (mean, var) = scenario.covariate().mean_var_1d(&GaussLegendre::new(MOMENT_NODES));
    let k = scenario.n_arms();
    let decoder = Decoder {
        k,
        lo,
        hi,
        mean,
        var,
        uniform_floor: use_uniform_bound,
    };
    let objective = ProfileObjective::new(scenario);
    let ms = multi_start(cfg, 3 * k, &[], |p| match decoder.decode(p) {
        Decoded::Feasible(prof) => objective.value(&prof.nu, &prof.mu, &prof.tau_sq),
        Decoded::Infeasible(v) => v,
    });
    let profile = match decoder.decode(&ms.x) {
        Decoded::Feasible(p) => p,
        Decoded::Infeasible(_) => {
            return Err(DesignError::InvalidInput(
                "no feasible moment profile found; increase restarts".into(),
            ))
        }
    };
    let value = objective.value(&profile.nu, &profile.mu, &profile.tau_sq);
    Ok(OptimizationResult {
        rule: None,
        profile: Some(profile),
        objective: value,
        best_restart: ms.best,
        trace: ms.trace,
        converged: ms.converged,
        wall_time: ms.wall_time,
    })
}

/// Piecewise rule realising a profile on a uniform covariate, with the
/// checks that it does so.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T> {
    pub rule: AllocationRule<T>,
    /// Largest `|ν|, |μ|, |τ²|` discrepancy between `arm_moments(rule)` and
    /// the profile.
    pub max_moment_error: T,
    /// The residual arm's implied density is non-negative everywhere.
    pub residual_nonnegative: bool,
    pub valid: bool,
}

/// Arms on the variance floor become uniform bands `μ_k ± ν_k w / 2`; the one
/// remaining arm takes the complement.
pub fn reconstruct_deterministic<T: Real>(
    profile: &MomentProfile<T>,
    scenario: &Scenario<T>,
) -> Result<Reconstruction<T>> {
    let (lo, hi) = match scenario.covariate() {
        CovariateModel::UniformBox { bounds } if bounds.len() == 1 => bounds[0],
        _ => {
            return Err(DesignError::ReconstructionInapplicable(
                "needs a uniform scalar covariate".into(),
            ))
        }
    };
    let k = profile.nu.len();
    if k != scenario.n_arms() {
        return Err(DesignError::InvalidInput("profile and scenario disagree on K".into()));
    }
    let width = hi - lo;
    let floor = profile.at_floor(width);
    let residual: Vec<usize> = (0..k).filter(|&j| !floor[j]).collect();
    if residual.len() == k {
        return Err(DesignError::ReconstructionInapplicable(
            "no arm has its variance on the floor".into(),
        ));
    }
    if residual.len() != 1 {
        return Err(DesignError::ReconstructionInapplicable(format!(
            "{} arms lie above the variance floor; exactly one residual arm is required",
            residual.len()
        )));
    }
    let rest = residual[0];
    let slack = T::lit(1e-6) * width;
    let mut bands: Vec<(T, T, usize)> = Vec::new();
    for j in (0..k).filter(|&j| floor[j]) {
        let half = profile.nu[j] * width * T::lit(0.5);
        let (a, b) = (profile.mu[j] - half, profile.mu[j] + half);
        if a < lo - slack || b > hi + slack {
            return Err(DesignError::ReconstructionInapplicable(format!(
                "band of arm {} [{a}, {b}] leaves the support",
                j + 1
            )));
        }
        bands.push((a.max(lo), b.min(hi), j));
    }
    bands.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite band"));
    for w in bands.windows(2) {
        if w[1].0 < w[0].1 - slack {
            return Err(DesignError::ReconstructionInapplicable(format!(
                "bands of arms {} and {} overlap",
                w[0].2 + 1,
                w[1].2 + 1
            )));
        }
    }
    let mut intervals: Vec<(T, usize)> = Vec::new();
    let mut cursor = lo;
    for &(a, b, j) in &bands {
        if a > cursor + slack {
            intervals.push((cursor, rest));
        }
        let start = if intervals.is_empty() { lo } else { a.max(cursor) };
        intervals.push((start, j));
        cursor = b;
    }
    if cursor < hi - slack {
        intervals.push((cursor, rest));
    }
    let mut bp = Vec::new();
    let mut owners = vec![intervals[0].1];
    for &(start, arm) in &intervals[1..] {
        if arm != *owners.last().expect("non-empty") {
            bp.push(start);
            owners.push(arm);
        }
    }
    let rule = AllocationRule::Piecewise(PiecewiseRule::new(k, bp, owners)?);
    let m = arm_moments(&rule, scenario)?;
    let mut err = T::zero();
    for j in 0..k {
        let a = &m.arms[j];
        err = err
            .max((a.nu - profile.nu[j]).abs())
            .max((a.mu - profile.mu[j]).abs())
            .max((a.tau_sq - profile.tau_sq[j]).abs());
    }
    // each band carries exactly the covariate density, so the complement
    // leaves a non-negative remainder for the residual arm
    let residual_nonnegative = m.arms[rest].nu > T::zero();
    let valid = residual_nonnegative && err <= T::lit(ROUND_TRIP_TOL);
    Ok(Reconstruction {
        rule,
        max_moment_error: err,
        residual_nonnegative,
        valid,
    })
}
