//! Monte Carlo trials: allocate, observe, fit per-arm OLS, score the
//! estimated rule against the truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DesignError, Result};
use crate::linalg::SymMatrix;
use crate::quadrature::GaussLegendre;
use crate::real::{pairwise_sum, Real};
use crate::rules::AllocationRule;
use crate::scenario::{ArmModel, Basis, Scenario};

pub const MIN_REPS: usize = 100;
const CI_Z: f64 = 1.96;
const OLS_TOL: f64 = 1e-12;
const REGRET_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorModel {
    Normal,
    /// `Exp(rate 1/σ) − σ`: mean 0, variance σ².
    CenteredExponential,
}

impl ErrorModel {
    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        match self {
            ErrorModel::Normal => sigma * rng.sample::<f64, _>(StandardNormal),
            ErrorModel::CenteredExponential => {
                if sigma > 0.0 {
                    Exp::new(1.0 / sigma).expect("positive rate").sample(rng) - sigma
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::Normal => "normal",
            ErrorModel::CenteredExponential => "centered-exponential",
        }
    }
}

/// Per-arm fit of one simulated trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmFit<T> {
    pub subjects: usize,
    /// `(α̂, β̂…)` on the design vector; `None` when the arm could not be fitted.
    pub coefficients: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFit<T> {
    pub arms: Vec<ArmFit<T>>,
}

impl<T: Real> TrialFit<T> {
    pub fn all_unfitted(&self) -> bool {
        self.arms.iter().all(|a| a.coefficients.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimulationConfig {
    pub reps: usize,
    pub seed: u64,
    pub error_model: ErrorModel,
    /// Run replications on the rayon pool. Results do not depend on this.
    pub parallel: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            reps: 10_000,
            seed: 0,
            error_model: ErrorModel::Normal,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult<T> {
    pub mean: T,
    pub sd: T,
    /// `1.96 · sd / √reps`.
    pub ci_half_width: T,
    pub reps: usize,
    /// Replications in which no arm could be fitted.
    pub starved: usize,
    /// Per arm, replications in which that arm could not be fitted.
    pub unfitted: Vec<usize>,
    pub seed: u64,
}

/// RNG for replication `rep` under `seed`; independent of scheduling.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Simulates `n` subjects and fits every arm by least squares.
pub fn simulate_trial<T: Real, R: Rng + ?Sized>(
    scenario: &Scenario<T>,
    rule: &AllocationRule<T>,
    n: usize,
    error_model: ErrorModel,
    rng: &mut R,
) -> TrialFit<T> {
    let k = scenario.n_arms();
    let basis = scenario.basis();
    let dl = basis.design_len();
    let cov = scenario.covariate();
    let mut xtx = vec![SymMatrix::<T>::zeros(dl); k];
    let mut xty = vec![vec![T::zero(); dl]; k];
    let mut counts = vec![0usize; k];
    let mut pi = vec![T::zero(); k];
    let mut h = vec![T::zero(); dl];
    let sigmas: Vec<f64> = scenario.arms().iter().map(|a| a.sigma.to_f64_lossy()).collect();
    for _ in 0..n {
        let x = cov.sample(rng);
        rule.pi_into(&x, &mut pi);
        let u = T::lit(rng.random::<f64>());
        let mut acc = T::zero();
        let mut arm = k - 1;
        for (j, &p) in pi.iter().enumerate() {
            acc += p;
            if u < acc {
                arm = j;
                break;
            }
        }
        // an arm with zero probability is never drawn, even at the top end
        while pi[arm] == T::zero() && arm > 0 {
            arm -= 1;
        }
        basis.fill_design(&x, &mut h);
        let y = scenario.g_design(arm, &h) + T::lit(error_model.sample(sigmas[arm], rng));
        xtx[arm].add_outer(&h, T::one());
        for (b, &hj) in xty[arm].iter_mut().zip(&h) {
            *b += hj * y;
        }
        counts[arm] += 1;
    }
    let arms = (0..k)
        .map(|j| {
            let coefficients = if counts[j] < dl + 1 {
                None
            } else {
                xtx[j].solve(&xty[j], T::lit(OLS_TOL)).ok()
            };
            ArmFit {
                subjects: counts[j],
                coefficients,
            }
        })
        .collect();
    TrialFit { arms }
}

/// Precomputed truth used to score fitted rules.
pub struct RegretScorer<'a, T> {
    scenario: &'a Scenario<T>,
    gl: GaussLegendre<T>,
    /// Regret of always choosing the worst fixed arm.
    worst: T,
}

impl<'a, T: Real> RegretScorer<'a, T> {
    pub fn new(scenario: &'a Scenario<T>) -> Result<Self> {
        if scenario.dim() > 2 {
            return Err(DesignError::Unsupported(format!(
                "regret scoring for a {}-dimensional covariate",
                scenario.dim()
            )));
        }
        let mut s = Self {
            scenario,
            gl: GaussLegendre::new(REGRET_NODES),
            worst: T::zero(),
        };
        let worst = (0..scenario.n_arms())
            .map(|j| {
                let c = scenario.arm(j).coefficients();
                s.regret_of(&[(j, c)])
            })
            .fold(T::zero(), T::max);
        s.worst = worst;
        Ok(s)
    }

    pub fn worst_case(&self) -> T {
        self.worst
    }

    /// `∫ [g*(x) − g_{δ̂(x)}(x)] f(x) dx` where `δ̂` maximises the fitted
    /// utilities over the arms that were fitted.
    pub fn regret(&self, fits: &TrialFit<T>) -> T {
        let fitted: Vec<(usize, Vec<T>)> = fits
            .arms
            .iter()
            .enumerate()
            .filter_map(|(j, a)| a.coefficients.clone().map(|c| (j, c)))
            .collect();
        if fitted.is_empty() {
            return self.worst;
        }
        self.regret_of(&fitted)
    }

    /// Regret of choosing, at each `x`, the arm whose given coefficient
    /// vector scores highest. Entries are `(arm index, coefficients)`.
    fn regret_of(&self, fitted: &[(usize, Vec<T>)]) -> T {
        let s = self.scenario;
        let present: Vec<usize> = fitted.iter().map(|f| f.0).collect();
        let arms = fitted
            .iter()
            .map(|(_, c)| ArmModel::new(c[0], c[1..].to_vec(), T::one()))
            .collect();
        let chooser = Scenario::new(arms, s.basis(), s.covariate().clone()).expect("same shape");
        if s.dim() == 2 {
            return self.regret_2d(&chooser, &present);
        }
        let mut cuts: Vec<T> = s.envelope_1d().iter().map(|c| c.theta).collect();
        cuts.extend(chooser.envelope_1d().iter().map(|c| c.theta));
        let cov = s.covariate();
        let mut total = T::zero();
        for (a, b) in cov.panels_1d(&cuts) {
            let mid = (a + b) * T::lit(0.5);
            let best = s.best_arm_1d(mid);
            let chosen = present[chooser.best_arm_1d(mid)];
            if best == chosen {
                continue;
            }
            total += match s.basis() {
                Basis::Linear { .. } => {
                    let (m0, m1) = cov.partial_moments(a, b);
                    let (ci, cj) = (s.arm(best).coefficients(), s.arm(chosen).coefficients());
                    (ci[0] - cj[0]) * m0 + (ci[1] - cj[1]) * m1
                }
                Basis::Polynomial { .. } => self
                    .gl
                    .integrate(a, b, |x| (s.g_1d(best, x) - s.g_1d(chosen, x)) * cov.density_1d(x)),
            };
        }
        total
    }

    fn regret_2d(&self, fitted: &Scenario<T>, present: &[usize]) -> T {
        let s = self.scenario;
        let cov = s.covariate();
        let support = cov.support();
        let mut total = T::zero();
        let mut h = [T::one(), T::zero(), T::zero()];
        for (x1, w1) in self.gl.mapped(support[0].0, support[0].1) {
            for (x2, w2) in self.gl.mapped(support[1].0, support[1].1) {
                h[1] = x1;
                h[2] = x2;
                let best = s.best_arm_design(&h);
                let chosen = present[fitted.best_arm_design(&h)];
                total += w1 * w2 * (s.g_design(best, &h) - s.g_design(chosen, &h)) * cov.density(&[x1, x2]);
            }
        }
        total
    }
}

/// Mean realised regret over `cfg.reps` simulated trials of size `n`.
pub fn estimate_regret<T: Real>(
    scenario: &Scenario<T>,
    rule: &AllocationRule<T>,
    n: usize,
    cfg: &SimulationConfig,
) -> Result<SimulationResult<T>> {
    if cfg.reps < MIN_REPS {
        return Err(DesignError::InvalidInput(format!(
            "at least {MIN_REPS} replications required, got {}",
            cfg.reps
        )));
    }
    if n == 0 {
        return Err(DesignError::InvalidInput("sample size n must be >= 1".into()));
    }
    if rule.n_arms() != scenario.n_arms() {
        return Err(DesignError::InvalidInput("rule and scenario disagree on K".into()));
    }
    if !rule.supports_dim(scenario.dim()) {
        return Err(DesignError::Unsupported(format!("{} rules need a scalar covariate", rule.kind_name())));
    }
    let scorer = RegretScorer::new(scenario)?;
    let one = |r: usize| {
        let mut rng = replication_rng(cfg.seed, r as u64);
        let fit = simulate_trial(scenario, rule, n, cfg.error_model, &mut rng);
        let unfitted: Vec<bool> = fit.arms.iter().map(|a| a.coefficients.is_none()).collect();
        (scorer.regret(&fit), unfitted)
    };
    let outcomes: Vec<(T, Vec<bool>)> = if cfg.parallel {
        (0..cfg.reps).into_par_iter().map(one).collect()
    } else {
        (0..cfg.reps).map(one).collect()
    };
    let values: Vec<T> = outcomes.iter().map(|o| o.0).collect();
    let reps_t = T::from_usize_lossy(cfg.reps);
    let mean = pairwise_sum(&values) / reps_t;
    let sq: Vec<T> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let sd = (pairwise_sum(&sq) / T::from_usize_lossy(cfg.reps - 1)).sqrt();
    let mut unfitted = vec![0usize; scenario.n_arms()];
    let mut starved = 0;
    for (_, u) in &outcomes {
        for (c, &flag) in unfitted.iter_mut().zip(u) {
            *c += flag as usize;
        }
        starved += u.iter().all(|&f| f) as usize;
    }
    Ok(SimulationResult {
        mean,
        sd,
        ci_half_width: T::lit(CI_Z) * sd / reps_t.sqrt(),
        reps: cfg.reps,
        starved,
        unfitted,
        seed: cfg.seed,
    })
}
