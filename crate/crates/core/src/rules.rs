//! Allocation rules `π(x)` and the per-arm moments they induce.
//!
//! A rule maps a covariate value to a point on the K-simplex. Everything the
//! regret formulas need from a rule is captured by [`ArmMoments`]: the mass
//! `ν_k`, the mean and variance of the arm's covariate density
//! `f_k = f π_k / ν_k`, its second-moment matrix `Q_k` and the asymptotic
//! OLS covariance `Σ_k = σ_k² Q_k⁻¹ / ν_k`.

use crate::error::{DesignError, Result};
use crate::linalg::SymMatrix;
use crate::quadrature::GaussLegendre;
use crate::real::Real;
use crate::scenario::Scenario;

/// Arms whose allocation mass falls below this are flagged as starved.
pub const STARVATION_THRESHOLD: f64 = 1e-6;
/// Gauss-Legendre nodes per panel (per dimension) for moment integrals.
pub const MOMENT_NODES: usize = 256;
const CHOLESKY_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum AllocationRule<T> {
    /// Covariate-free proportions.
    Constant { nu: Vec<T> },
    Softmax(SoftmaxRule<T>),
    Piecewise(PiecewiseRule<T>),
}

/// `π_k(x) ∝ exp(Σ_j A_kj z^j)` with `z = (x − center)/scale` and the last
/// arm as the zero-exponent reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxRule<T> {
    coeffs: Vec<T>,
    n_arms: usize,
    degree: usize,
    center: T,
    scale: T,
}

impl<T: Real> SoftmaxRule<T> {
    /// `coeffs` is the `(K−1) × (degree+1)` matrix in row-major order.
    pub fn new(n_arms: usize, degree: usize, coeffs: Vec<T>, center: T, scale: T) -> Result<Self> {
        if n_arms < 2 {
            return Err(DesignError::InvalidInput("softmax rule needs K >= 2".into()));
        }
        if coeffs.len() != (n_arms - 1) * (degree + 1) {
            return Err(DesignError::InvalidInput(format!(
                "softmax rule with K={n_arms}, degree={degree} needs {} coefficients, got {}",
                (n_arms - 1) * (degree + 1),
                coeffs.len()
            )));
        }
        if !(scale > T::zero()) || !center.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(DesignError::InvalidInput(
                "softmax rule needs finite coefficients and a positive scale".into(),
            ));
        }
        Ok(Self {
            coeffs,
            n_arms,
            degree,
            center,
            scale,
        })
    }

    /// All-zero coefficients standardised to the scenario's covariate.
    pub fn balanced(scenario: &Scenario<T>, degree: usize) -> Result<Self> {
        let (center, scale) = standardization(scenario)?;
        let k = scenario.n_arms();
        Self::new(k, degree, vec![T::zero(); (k - 1) * (degree + 1)], center, scale)
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn center(&self) -> T {
        self.center
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn with_coeffs(&self, coeffs: Vec<T>) -> Result<Self> {
        Self::new(self.n_arms, self.degree, coeffs, self.center, self.scale)
    }

    fn eval_into(&self, x: T, out: &mut [T]) {
        let z = (x - self.center) / self.scale;
        let m = self.degree + 1;
        let last = self.n_arms - 1;
        out[last] = T::zero();
        for (k, row) in self.coeffs.chunks(m).enumerate() {
            let mut e = T::zero();
            for &a in row.iter().rev() {
                e = e * z + a;
            }
            out[k] = e;
        }
        let mx = out.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in out.iter_mut() {
            *v = (*v - mx).exp();
            total += *v;
        }
        for v in out.iter_mut() {
            *v /= total;
        }
    }
}

/// Mean and standard deviation of a 1-D covariate, used to standardise
/// softmax exponents.
pub fn standardization<T: Real>(scenario: &Scenario<T>) -> Result<(T, T)> {
    if !scenario.is_1d() {
        return Err(DesignError::Unsupported(
            "softmax-polynomial rules are defined for a scalar covariate only".into(),
        ));
    }
    let gl = GaussLegendre::new(MOMENT_NODES);
    let (mean, var) = scenario.covariate().mean_var_1d(&gl);
    Ok((mean, var.sqrt()))
}

/// Deterministic rule: arm `arms[i]` on the i-th interval between
/// consecutive breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRule<T> {
    breakpoints: Vec<T>,
    arms: Vec<usize>,
    n_arms: usize,
}

impl<T: Real> PiecewiseRule<T> {
    pub fn new(n_arms: usize, breakpoints: Vec<T>, arms: Vec<usize>) -> Result<Self> {
        if arms.len() != breakpoints.len() + 1 {
            return Err(DesignError::InvalidInput(
                "piecewise rule needs one arm per interval (breakpoints + 1)".into(),
            ));
        }
        if !breakpoints.windows(2).all(|w| w[0] < w[1]) || breakpoints.iter().any(|b| !b.is_finite()) {
            return Err(DesignError::InvalidInput(
                "piecewise rule breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if let Some(&a) = arms.iter().find(|&&a| a >= n_arms) {
            return Err(DesignError::ArmOutOfRange {
                arm: a + 1,
                arms: n_arms,
            });
        }
        Ok(Self {
            breakpoints,
            arms,
            n_arms,
        })
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    /// Arm owning `x`; a breakpoint belongs to the interval on its right.
    pub fn arm_at(&self, x: T) -> usize {
        let i = self.breakpoints.iter().take_while(|&&b| b <= x).count();
        self.arms[i]
    }
}

impl<T: Real> AllocationRule<T> {
    pub fn constant(nu: Vec<T>) -> Result<Self> {
        if nu.len() < 2 {
            return Err(DesignError::InvalidInput("constant rule needs K >= 2".into()));
        }
        if nu.iter().any(|&v| !(v >= T::zero()) || !v.is_finite()) {
            return Err(DesignError::InvalidInput(
                "constant rule proportions must be finite and >= 0".into(),
            ));
        }
        let total: T = nu.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(DesignError::InvalidInput(format!(
                "constant rule proportions sum to {total}, expected 1"
            )));
        }
        Ok(AllocationRule::Constant { nu })
    }

    pub fn balanced(k: usize) -> Self {
        AllocationRule::Constant {
            nu: vec![T::one() / T::from_usize_lossy(k); k],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AllocationRule::Constant { .. } => "constant",
            AllocationRule::Softmax(_) => "softmax",
            AllocationRule::Piecewise(_) => "piecewise",
        }
    }

    pub fn n_arms(&self) -> usize {
        match self {
            AllocationRule::Constant { nu } => nu.len(),
            AllocationRule::Softmax(s) => s.n_arms,
            AllocationRule::Piecewise(p) => p.n_arms,
        }
    }

    /// Points where the rule is discontinuous.
    pub fn breakpoints(&self) -> &[T] {
        match self {
            AllocationRule::Piecewise(p) => &p.breakpoints,
            _ => &[],
        }
    }

    /// Whether the rule can be evaluated on a covariate of this dimension.
    pub fn supports_dim(&self, dim: usize) -> bool {
        matches!(self, AllocationRule::Constant { .. }) || dim == 1
    }

    /// Allocation probabilities at `x`.
    pub fn pi_eval(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_arms()];
        self.pi_into(x, &mut out);
        out
    }

    #[inline]
    pub fn pi_into(&self, x: &[T], out: &mut [T]) {
        match self {
            AllocationRule::Constant { nu } => out.copy_from_slice(nu),
            AllocationRule::Softmax(s) => s.eval_into(x[0], out),
            AllocationRule::Piecewise(p) => {
                out.iter_mut().for_each(|v| *v = T::zero());
                out[p.arm_at(x[0])] = T::one();
            }
        }
    }

    fn check_against(&self, scenario: &Scenario<T>) -> Result<()> {
        if self.n_arms() != scenario.n_arms() {
            return Err(DesignError::InvalidInput(format!(
                "rule allocates {} arms, scenario has {}",
                self.n_arms(),
                scenario.n_arms()
            )));
        }
        if !self.supports_dim(scenario.dim()) {
            return Err(DesignError::Unsupported(format!(
                "{} rules need a scalar covariate",
                self.kind_name()
            )));
        }
        Ok(())
    }
}

/// Constant rule proportional to the noise standard deviations; minimises
/// the two-arm fitted-difference variance uniformly in `x`.
pub fn two_arm_optimal<T: Real>(sigma1: T, sigma2: T) -> Result<AllocationRule<T>> {
    if !(sigma1 > T::zero() && sigma2 > T::zero()) {
        return Err(DesignError::InvalidInput(format!(
            "noise standard deviations must be > 0 (got {sigma1}, {sigma2})"
        )));
    }
    let total = sigma1 + sigma2;
    Ok(AllocationRule::Constant {
        nu: vec![sigma1 / total, sigma2 / total],
    })
}

/// Quadrature nodes over the covariate support with density folded into the
/// weights, plus the design vector at every node.
#[derive(Debug, Clone)]
pub struct CovariateGrid<T> {
    dim: usize,
    design_len: usize,
    points: Vec<T>,
    weights: Vec<T>,
    design: Vec<T>,
}

impl<T: Real> CovariateGrid<T> {
    /// Grid for `scenario`, with extra panel edges at `breaks` (1-D only).
    pub fn new(scenario: &Scenario<T>, breaks: &[T], nodes: usize) -> Self {
        let dim = scenario.dim();
        let basis = scenario.basis();
        let design_len = basis.design_len();
        let gl = GaussLegendre::<T>::new(nodes);
        let cov = scenario.covariate();
        let mut grid = Self {
            dim,
            design_len,
            points: Vec::new(),
            weights: Vec::new(),
            design: Vec::new(),
        };
        let mut h = vec![T::zero(); design_len];
        if dim == 1 {
            for (a, b) in cov.panels_1d(breaks) {
                for (x, w) in gl.mapped(a, b) {
                    let wf = w * cov.density_1d(x);
                    grid.points.push(x);
                    grid.weights.push(wf);
                    basis.fill_design(&[x], &mut h);
                    grid.design.extend_from_slice(&h);
                }
            }
        } else {
            let support = cov.support();
            let axes: Vec<Vec<(T, T)>> = support
                .iter()
                .map(|&(lo, hi)| gl.mapped(lo, hi).collect())
                .collect();
            let total: usize = axes.iter().map(Vec::len).product();
            let mut idx = vec![0usize; dim];
            let mut x = vec![T::zero(); dim];
            for _ in 0..total {
                let mut w = T::one();
                for d in 0..dim {
                    x[d] = axes[d][idx[d]].0;
                    w *= axes[d][idx[d]].1;
                }
                grid.weights.push(w * cov.density(&x));
                grid.points.extend_from_slice(&x);
                basis.fill_design(&x, &mut h);
                grid.design.extend_from_slice(&h);
                for d in (0..dim).rev() {
                    idx[d] += 1;
                    if idx[d] < axes[d].len() {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
        grid
    }

    /// Grid adapted to a rule's discontinuities.
    pub fn for_rule(scenario: &Scenario<T>, rule: &AllocationRule<T>) -> Self {
        Self::new(scenario, rule.breakpoints(), MOMENT_NODES)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> T {
        self.weights[i]
    }

    pub fn design(&self, i: usize) -> &[T] {
        &self.design[i * self.design_len..(i + 1) * self.design_len]
    }
}

/// Moments of one arm's induced covariate distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMoment<T> {
    pub nu: T,
    /// Mean of the first covariate coordinate under `f_k`.
    pub mu: T,
    /// Variance of the first covariate coordinate under `f_k`.
    pub tau_sq: T,
    /// `∫ h hᵗ f_k` over design vectors `h = (1, features)`.
    pub q: SymMatrix<T>,
    /// `σ_k² Q_k⁻¹ / ν_k`; absent for starved arms.
    pub sigma: Option<SymMatrix<T>>,
    pub starved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmMoments<T> {
    pub arms: Vec<ArmMoment<T>>,
    /// `∫ h hᵗ f` under the full covariate density.
    pub population_q: SymMatrix<T>,
}

impl<T: Real> ArmMoments<T> {
    pub fn nus(&self) -> Vec<T> {
        self.arms.iter().map(|a| a.nu).collect()
    }

    pub fn any_starved(&self) -> bool {
        self.arms.iter().any(|a| a.starved)
    }

    /// First starved arm as an error, for routines that cannot proceed.
    pub fn require_fed(&self) -> Result<()> {
        match self.arms.iter().position(|a| a.starved) {
            Some(k) => Err(DesignError::StarvedArm {
                arm: k + 1,
                nu: self.arms[k].nu.to_f64_lossy(),
            }),
            None => Ok(()),
        }
    }

    pub fn covariance(&self, k: usize) -> Result<&SymMatrix<T>> {
        self.arms[k].sigma.as_ref().ok_or(DesignError::StarvedArm {
            arm: k + 1,
            nu: self.arms[k].nu.to_f64_lossy(),
        })
    }

    /// `ξ_k²(x) = hᵗ Σ_k h` for a design vector `h`.
    #[inline]
    pub fn xi_sq_design(&self, k: usize, h: &[T]) -> Result<T> {
        Ok(self.covariance(k)?.quad_form(h))
    }
}

/// Moments induced by `rule` under the scenario's covariate density.
pub fn arm_moments<T: Real>(rule: &AllocationRule<T>, scenario: &Scenario<T>) -> Result<ArmMoments<T>> {
    let grid = CovariateGrid::for_rule(scenario, rule);
    arm_moments_on(&grid, rule, scenario)
}

/// As [`arm_moments`] on a prebuilt grid. The grid must already split at the
/// rule's breakpoints.
pub fn arm_moments_on<T: Real>(
    grid: &CovariateGrid<T>,
    rule: &AllocationRule<T>,
    scenario: &Scenario<T>,
) -> Result<ArmMoments<T>> {
    rule.check_against(scenario)?;
    let k = scenario.n_arms();
    let dl = scenario.basis().design_len();
    let mut mass = vec![T::zero(); k];
    let mut m1 = vec![T::zero(); k];
    let mut m2 = vec![T::zero(); k];
    let mut qs = vec![SymMatrix::zeros(dl); k];
    let mut pop = SymMatrix::zeros(dl);
    let mut pi = vec![T::zero(); k];
    for i in 0..grid.len() {
        let w = grid.weight(i);
        if w == T::zero() {
            continue;
        }
        let x = grid.point(i);
        let h = grid.design(i);
        rule.pi_into(x, &mut pi);
        pop.add_outer(h, w);
        let x1 = x[0];
        for a in 0..k {
            let wa = w * pi[a];
            if wa == T::zero() {
                continue;
            }
            mass[a] += wa;
            m1[a] += wa * x1;
            m2[a] += wa * x1 * x1;
            qs[a].add_outer(h, wa);
        }
    }
    let threshold = T::lit(STARVATION_THRESHOLD);
    let mut arms = Vec::with_capacity(k);
    for a in 0..k {
        let nu = mass[a];
        let starved = nu < threshold;
        let (mu, tau_sq, q, sigma) = if nu > T::zero() {
            let mu = m1[a] / nu;
            let tau_sq = (m2[a] / nu - mu * mu).max(T::zero());
            let q = qs[a].scaled(T::one() / nu);
            let sigma = if starved {
                None
            } else {
                let inv = q
                    .inverse(T::lit(CHOLESKY_TOL))
                    .map_err(|_| DesignError::SingularMoments { arm: a + 1 })?;
                let s = scenario.arm(a).sigma;
                Some(inv.scaled(s * s / nu))
            };
            (mu, tau_sq, q, sigma)
        } else {
            (T::nan(), T::nan(), SymMatrix::zeros(dl), None)
        };
        arms.push(ArmMoment {
            nu,
            mu,
            tau_sq,
            q,
            sigma,
            starved,
        });
    }
    Ok(ArmMoments {
        arms,
        population_q: pop,
    })
}

/// Smallest eigenvalue of `Σ₁ + Σ₂ − (σ₁ + σ₂)² Q⁻¹` for a two-arm rule.
/// Non-negative for every rule; zero at [`two_arm_optimal`].
pub fn psd_gap<T: Real>(moments: &ArmMoments<T>, scenario: &Scenario<T>) -> Result<T> {
    if scenario.n_arms() != 2 || moments.arms.len() != 2 {
        return Err(DesignError::InvalidInput("psd gap is defined for two arms".into()));
    }
    moments.require_fed()?;
    let s1 = moments.covariance(0)?;
    let s2 = moments.covariance(1)?;
    let q_inv = moments
        .population_q
        .inverse(T::lit(CHOLESKY_TOL))
        .map_err(|_| DesignError::SingularMoments { arm: 0 })?;
    let sig = scenario.arm(0).sigma + scenario.arm(1).sigma;
    let gap = s1.add(s2).sub(&q_inv.scaled(sig * sig));
    Ok(gap.min_eigenvalue())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn pi_eval_examples() {
        let s = presets::three_arm_uniform::<f64>();
        let rule = AllocationRule::Softmax(SoftmaxRule::balanced(&s, 2).unwrap());
        for x in [0.0, 0.3, 1.0] {
            let p = rule.pi_eval(&[x]);
            assert!(p.iter().all(|&v| close(v, 1.0 / 3.0, 1e-15)));
        }
        let c = AllocationRule::constant(vec![0.414, 0.586]).unwrap();
        assert_eq!(c.pi_eval(&[0.77]), vec![0.414, 0.586]);
        let pw = AllocationRule::Piecewise(PiecewiseRule::new(2, vec![0.3], vec![0, 1]).unwrap());
        assert_eq!(pw.pi_eval(&[0.1]), vec![1.0, 0.0]);
        assert_eq!(pw.pi_eval(&[0.3]), vec![0.0, 1.0]);
    }

    #[test]
    fn softmax_survives_large_covariates() {
        let s = presets::diets::<f64>();
        let (c, sc) = standardization(&s).unwrap();
        let rule = SoftmaxRule::new(3, 4, vec![3.0, -2.0, 1.0, 0.5, 2.0, -1.0, 0.0, 4.0, 0.0, 1.0], c, sc)
            .map(AllocationRule::Softmax)
            .unwrap();
        for x in [0.0, 156.0, 600.0, 900.0] {
            let p = rule.pi_eval(&[x]);
            assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0 && *v <= 1.0));
            assert!(close(p.iter().sum(), 1.0, 1e-15));
        }
    }

    #[test]
    fn constant_rule_rejects_bad_proportions() {
        assert!(AllocationRule::<f64>::constant(vec![0.5, 0.6]).is_err());
        assert!(AllocationRule::<f64>::constant(vec![-0.1, 1.1]).is_err());
        assert!(AllocationRule::<f64>::constant(vec![1.0]).is_err());
    }

    #[test]
    fn moments_of_balanced_rule_on_uniform() {
        let s = presets::two_arm_example::<f64>();
        let m = arm_moments(&AllocationRule::balanced(2), &s).unwrap();
        for a in &m.arms {
            assert!(close(a.nu, 0.5, 1e-14));
            assert!(close(a.mu, 0.5, 1e-14));
            assert!(close(a.tau_sq, 1.0 / 12.0, 1e-14));
            assert!(close(a.q.get(0, 0), 1.0, 1e-14));
            assert!(close(a.q.get(0, 1), 0.5, 1e-14));
            assert!(close(a.q.get(1, 1), 1.0 / 3.0, 1e-14));
        }
    }

    #[test]
    fn moments_of_piecewise_segment() {
        let s = presets::two_arm_example::<f64>();
        let rule = AllocationRule::Piecewise(PiecewiseRule::new(2, vec![0.3], vec![0, 1]).unwrap());
        let m = arm_moments(&rule, &s).unwrap();
        assert!(close(m.arms[0].nu, 0.3, 1e-14));
        assert!(close(m.arms[0].mu, 0.15, 1e-14));
        assert!(close(m.arms[0].tau_sq, 0.0075, 1e-14));
    }

    #[test]
    fn covariance_definition_holds() {
        let s = presets::two_arm_example::<f64>();
        let rule = AllocationRule::constant(vec![0.3, 0.7]).unwrap();
        let m = arm_moments(&rule, &s).unwrap();
        for (k, a) in m.arms.iter().enumerate() {
            let sig = s.arm(k).sigma;
            let want = a.q.inverse(1e-14).unwrap().scaled(sig * sig / a.nu);
            assert!(a.sigma.as_ref().unwrap().max_abs_diff(&want) < 1e-12);
            // constant rule: Σ_k ∝ Q⁻¹
            let q_inv = m.population_q.inverse(1e-14).unwrap().scaled(sig * sig / a.nu);
            assert!(a.sigma.as_ref().unwrap().max_abs_diff(&q_inv) < 1e-10);
        }
    }

    #[test]
    fn starved_arm_is_flagged() {
        let s = presets::two_arm_example::<f64>();
        let rule = AllocationRule::constant(vec![1.0, 0.0]).unwrap();
        let m = arm_moments(&rule, &s).unwrap();
        assert!(m.arms[1].starved);
        assert!(m.arms[1].sigma.is_none());
        assert!(matches!(m.require_fed(), Err(DesignError::StarvedArm { arm: 2, .. })));
    }

    #[test]
    fn two_arm_optimal_examples() {
        let r = two_arm_optimal(1.0_f64, 1.0).unwrap();
        assert_eq!(r.pi_eval(&[0.2]), vec![0.5, 0.5]);
        let r = two_arm_optimal(0.1_f64.sqrt(), 0.2_f64.sqrt()).unwrap();
        let p = r.pi_eval(&[0.2]);
        assert!(close(p[0], 0.4142, 5e-5) && close(p[1], 0.5858, 5e-5));
        let r = two_arm_optimal(1.0_f64, 3.0).unwrap();
        assert_eq!(r.pi_eval(&[0.2]), vec![0.25, 0.75]);
        assert!(two_arm_optimal(0.0_f64, 1.0).is_err());
        assert!(two_arm_optimal(1.0_f64, -1.0).is_err());
    }

    #[test]
    fn psd_gap_examples() {
        let s = presets::two_arm_example::<f64>();
        let opt = two_arm_optimal(s.arm(0).sigma, s.arm(1).sigma).unwrap();
        let gap = psd_gap(&arm_moments(&opt, &s).unwrap(), &s).unwrap();
        assert!(gap.abs() <= 1e-8, "{gap}");

        // balanced rule, σ₁ ≠ σ₂: oracle by explicit 2×2 algebra.
        // Σ₁+Σ₂ − (σ₁+σ₂)²Q⁻¹ = c·Q⁻¹ with c = 2(σ₁²+σ₂²) − (σ₁+σ₂)² = (σ₁−σ₂)² > 0
        let gap = psd_gap(&arm_moments(&AllocationRule::balanced(2), &s).unwrap(), &s).unwrap();
        let (s1, s2) = (0.1_f64.sqrt(), 0.2_f64.sqrt());
        let c = (s1 - s2).powi(2);
        // eigenvalues of Q⁻¹ = [[4,-6],[-6,12]]: 8 ± √52
        let want = c * (8.0 - 52.0_f64.sqrt());
        assert!(gap > 0.0);
        assert!(close(gap, want, 1e-12), "{gap} vs {want}");
    }

    #[test]
    fn f32_instantiation_works() {
        let s = presets::two_arm_example::<f32>();
        let m = arm_moments(&AllocationRule::balanced(2), &s).unwrap();
        assert!((m.arms[0].tau_sq - 1.0 / 12.0).abs() < 1e-5);
    }
}
