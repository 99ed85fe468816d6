//! Ground truth of a trial: per-arm response models, the covariate
//! distribution, and the geometry of which arm is best where.

use crate::covariate::CovariateModel;
use crate::error::{DesignError, Result};
use crate::quadrature::GaussLegendre;
use crate::real::Real;

/// Grid size for the polynomial sign-change search.
pub const ROOT_GRID: usize = 4096;
/// Bisection stops once the bracket is this narrow.
pub const ROOT_BRACKET: f64 = 1e-12;

/// Feature map turning a covariate into regression features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `(x_1, ..., x_p)` for a `p`-dimensional covariate.
    Linear { dim: usize },
    /// `(x, x², ..., x^J)` for a scalar covariate.
    Polynomial { degree: usize },
}

impl Basis {
    /// Number of slope coefficients per arm.
    pub fn n_slopes(&self) -> usize {
        match *self {
            Basis::Linear { dim } => dim,
            Basis::Polynomial { degree } => degree,
        }
    }

    /// Length of the design vector `(1, features)`.
    pub fn design_len(&self) -> usize {
        self.n_slopes() + 1
    }

    pub fn covariate_dim(&self) -> usize {
        match *self {
            Basis::Linear { dim } => dim,
            Basis::Polynomial { .. } => 1,
        }
    }

    /// Writes `(1, features(x))` into `out`.
    #[inline]
    pub fn fill_design<T: Real>(&self, x: &[T], out: &mut [T]) {
        out[0] = T::one();
        match *self {
            Basis::Linear { dim } => out[1..=dim].copy_from_slice(&x[..dim]),
            Basis::Polynomial { degree } => {
                let mut p = T::one();
                for slot in out.iter_mut().take(degree + 1).skip(1) {
                    p *= x[0];
                    *slot = p;
                }
            }
        }
    }

    pub fn design<T: Real>(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.design_len()];
        self.fill_design(x, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmModel<T> {
    pub alpha: T,
    /// Slope (linear) or polynomial coefficients, lowest power first.
    pub beta: Vec<T>,
    pub sigma: T,
    /// Subtracted from the response to form the utility.
    pub cost: T,
}

impl<T: Real> ArmModel<T> {
    pub fn new(alpha: T, beta: Vec<T>, sigma: T) -> Self {
        Self {
            alpha,
            beta,
            sigma,
            cost: T::zero(),
        }
    }

    pub fn with_cost(mut self, cost: T) -> Self {
        self.cost = cost;
        self
    }

    /// Coefficients on the design vector: `(α − cost, β…)`.
    pub fn coefficients(&self) -> Vec<T> {
        std::iter::once(self.alpha - self.cost)
            .chain(self.beta.iter().copied())
            .collect()
    }

    #[inline]
    fn eval_design(&self, h: &[T]) -> T {
        let mut v = self.alpha - self.cost;
        for (b, hj) in self.beta.iter().zip(&h[1..]) {
            v += *b * *hj;
        }
        v
    }
}

/// Envelope breakpoint of a 1-D scenario. Arm indices are 0-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing<T> {
    pub theta: T,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    arms: Vec<ArmModel<T>>,
    basis: Basis,
    covariate: CovariateModel<T>,
}

impl<T: Real> Scenario<T> {
    /// Assembles a scenario. Only shape mismatches that would make evaluation
    /// meaningless are rejected here; [`Scenario::validate`] reports the rest.
    pub fn new(arms: Vec<ArmModel<T>>, basis: Basis, covariate: CovariateModel<T>) -> Result<Self> {
        if basis.covariate_dim() != covariate.dim() {
            return Err(DesignError::InvalidInput(format!(
                "basis expects a {}-dimensional covariate, covariate model has {}",
                basis.covariate_dim(),
                covariate.dim()
            )));
        }
        if let Some((k, arm)) = arms
            .iter()
            .enumerate()
            .find(|(_, a)| a.beta.len() != basis.n_slopes())
        {
            return Err(DesignError::InvalidInput(format!(
                "arm {}: expected {} slope coefficients, found {}",
                k + 1,
                basis.n_slopes(),
                arm.beta.len()
            )));
        }
        Ok(Self {
            arms,
            basis,
            covariate,
        })
    }

    /// Linear scenario with a scalar covariate.
    pub fn linear_1d(params: &[(T, T, T)], covariate: CovariateModel<T>) -> Result<Self> {
        let arms = params
            .iter()
            .map(|&(a, b, s)| ArmModel::new(a, vec![b], s))
            .collect();
        Self::new(arms, Basis::Linear { dim: 1 }, covariate)
    }

    pub fn arms(&self) -> &[ArmModel<T>] {
        &self.arms
    }

    pub fn arm(&self, k: usize) -> &ArmModel<T> {
        &self.arms[k]
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn covariate(&self) -> &CovariateModel<T> {
        &self.covariate
    }

    pub fn dim(&self) -> usize {
        self.covariate.dim()
    }

    pub fn is_1d(&self) -> bool {
        self.dim() == 1
    }

    pub fn sigmas(&self) -> Vec<T> {
        self.arms.iter().map(|a| a.sigma).collect()
    }

    fn check_arm(&self, k: usize) -> Result<()> {
        if k >= self.arms.len() {
            return Err(DesignError::ArmOutOfRange {
                arm: k + 1,
                arms: self.arms.len(),
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if !self.covariate.contains(x) {
            return Err(DesignError::OutsideSupport {
                point: x.iter().map(|v| v.to_f64_lossy()).collect(),
            });
        }
        Ok(())
    }

    /// Expected utility of arm `k` (0-based) at covariate `x`.
    pub fn g_eval(&self, k: usize, x: &[T]) -> Result<T> {
        self.check_arm(k)?;
        self.check_point(x)?;
        Ok(self.g_unchecked(k, x))
    }

    #[inline]
    pub fn g_unchecked(&self, k: usize, x: &[T]) -> T {
        let h = self.basis.design(x);
        self.arms[k].eval_design(&h)
    }

    /// Utility of arm `k` from a precomputed design vector.
    #[inline]
    pub fn g_design(&self, k: usize, h: &[T]) -> T {
        self.arms[k].eval_design(h)
    }

    #[inline]
    pub(crate) fn g_1d(&self, k: usize, x: T) -> T {
        let arm = &self.arms[k];
        match self.basis {
            Basis::Linear { .. } => arm.alpha - arm.cost + arm.beta[0] * x,
            Basis::Polynomial { .. } => {
                // Horner on (α − cost, β_1, ..., β_J)
                let mut v = T::zero();
                for &b in arm.beta.iter().rev() {
                    v = (v + b) * x;
                }
                v + arm.alpha - arm.cost
            }
        }
    }

    /// Derivative of `g_k` for a scalar covariate.
    pub(crate) fn dg_1d(&self, k: usize, x: T) -> T {
        let arm = &self.arms[k];
        let mut v = T::zero();
        let mut p = T::one();
        for (j, &b) in arm.beta.iter().enumerate() {
            v += T::from_usize_lossy(j + 1) * b * p;
            p *= x;
        }
        v
    }

    /// Best arm at `x`; ties go to the lowest index.
    pub fn best_arm(&self, x: &[T]) -> Result<usize> {
        self.check_point(x)?;
        let h = self.basis.design(x);
        Ok(self.best_arm_design(&h))
    }

    #[inline]
    pub fn best_arm_design(&self, h: &[T]) -> usize {
        let mut best = 0;
        let mut best_v = self.arms[0].eval_design(h);
        for k in 1..self.arms.len() {
            let v = self.arms[k].eval_design(h);
            if v > best_v {
                best = k;
                best_v = v;
            }
        }
        best
    }

    pub(crate) fn best_arm_1d(&self, x: T) -> usize {
        let mut best = 0;
        let mut best_v = self.g_1d(0, x);
        for k in 1..self.arms.len() {
            let v = self.g_1d(k, x);
            if v > best_v {
                best = k;
                best_v = v;
            }
        }
        best
    }

    fn arms_identical(&self, i: usize, j: usize) -> bool {
        self.arms[i].coefficients() == self.arms[j].coefficients()
    }

    /// Roots of `g_i − g_j` strictly inside `(lo, hi)`.
    fn pair_roots(&self, i: usize, j: usize, lo: T, hi: T) -> Vec<T> {
        let (ci, cj) = (self.arms[i].coefficients(), self.arms[j].coefficients());
        let diff: Vec<T> = ci.iter().zip(&cj).map(|(&a, &b)| a - b).collect();
        match self.basis {
            Basis::Linear { .. } => {
                if diff[1] == T::zero() {
                    return Vec::new();
                }
                let theta = -diff[0] / diff[1];
                if theta > lo && theta < hi {
                    vec![theta]
                } else {
                    Vec::new()
                }
            }
            Basis::Polynomial { .. } => {
                let d = |x: T| {
                    let mut v = T::zero();
                    for &c in diff.iter().rev() {
                        v = v * x + c;
                    }
                    v
                };
                bracketed_roots(d, lo, hi)
            }
        }
    }

    /// Breakpoints of the upper envelope on the support, ascending. Identical
    /// arms never produce a breakpoint (the lower index wins everywhere).
    pub(crate) fn envelope_1d(&self) -> Vec<Crossing<T>> {
        let (lo, hi) = self.covariate.support_1d();
        let k = self.arms.len();
        let mut cand = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                if !self.arms_identical(i, j) {
                    cand.extend(self.pair_roots(i, j, lo, hi));
                }
            }
        }
        cand.sort_by(|a, b| a.partial_cmp(b).expect("finite root"));
        let tol = T::lit(1e-13) * (hi - lo);
        cand.dedup_by(|a, b| (*a - *b).abs() <= tol);

        let mut edges = Vec::with_capacity(cand.len() + 2);
        edges.push(lo);
        edges.extend(cand.iter().copied());
        edges.push(hi);
        let owners: Vec<usize> = edges
            .windows(2)
            .map(|w| self.best_arm_1d((w[0] + w[1]) * T::lit(0.5)))
            .collect();
        let mut out = Vec::new();
        for (m, theta) in cand.into_iter().enumerate() {
            if owners[m] != owners[m + 1] {
                out.push(Crossing {
                    theta,
                    left: owners[m],
                    right: owners[m + 1],
                });
            }
        }
        out
    }

    /// Arms that are optimal somewhere on the 1-D support, in envelope order
    /// (each run listed once per interval it owns).
    pub(crate) fn envelope_owners_1d(&self) -> Vec<usize> {
        let (lo, _) = self.covariate.support_1d();
        let env = self.envelope_1d();
        let mut owners = vec![match env.first() {
            Some(c) => c.left,
            None => self.best_arm_1d(lo),
        }];
        owners.extend(env.iter().map(|c| c.right));
        owners
    }

    /// Breakpoints of the upper envelope of `{g_k}` on the support.
    pub fn intersection_points(&self) -> Result<Vec<Crossing<T>>> {
        if !self.is_1d() {
            return Err(DesignError::Unsupported(
                "intersection points need a scalar covariate".into(),
            ));
        }
        let k = self.arms.len();
        for i in 0..k {
            for j in (i + 1)..k {
                if self.arms_identical(i, j) {
                    return Err(DesignError::IdenticalArms {
                        first: i + 1,
                        second: j + 1,
                    });
                }
            }
        }
        Ok(self.envelope_1d())
    }

    /// Human-readable list of everything wrong with the scenario; empty when
    /// the scenario is fit for every engine routine.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        if self.arms.len() < 2 {
            diags.push(format!(
                "scenario must have at least 2 arms (found {})",
                self.arms.len()
            ));
        }
        for (k, arm) in self.arms.iter().enumerate() {
            let id = k + 1;
            if !(arm.sigma > T::zero()) || !arm.sigma.is_finite() {
                diags.push(format!("arm {id}: noise_sd must be > 0"));
            }
            if !(arm.cost >= T::zero()) {
                diags.push(format!("arm {id}: cost must be >= 0"));
            }
            if !arm.alpha.is_finite() || arm.beta.iter().any(|b| !b.is_finite()) {
                diags.push(format!("arm {id}: coefficients must be finite"));
            }
        }
        match &self.covariate {
            CovariateModel::UniformBox { bounds } => {
                for (d, &(lo, hi)) in bounds.iter().enumerate() {
                    if !(hi > lo) {
                        diags.push(format!("covariate dimension {}: empty interval", d + 1));
                    }
                }
            }
            CovariateModel::Tabulated(t) => {
                if t.values().iter().any(|&v| v < T::zero() || !v.is_finite()) {
                    diags.push("covariate density must be finite and >= 0".into());
                }
            }
            CovariateModel::Gamma(_) => {}
        }
        if !diags.is_empty() {
            return diags;
        }
        if self.is_1d() {
            let gl = GaussLegendre::new(256);
            let mass = self.covariate.total_mass(&gl);
            if (mass - T::one()).abs() > T::lit(1e-8) {
                diags.push(format!("covariate density integrates to {mass}, expected 1"));
            }
            let k = self.arms.len();
            for i in 0..k {
                for j in (i + 1)..k {
                    if self.arms_identical(i, j) {
                        diags.push(format!("arms {} and {} are identical", i + 1, j + 1));
                    }
                }
            }
            let owners = self.envelope_owners_1d();
            for a in 0..k {
                if !owners.contains(&a) {
                    diags.push(format!("arm {} is never optimal", a + 1));
                }
            }
        }
        diags
    }
}

/// Sign changes of `d` on a uniform grid, refined by bisection.
fn bracketed_roots<T: Real, F: Fn(T) -> T>(d: F, lo: T, hi: T) -> Vec<T> {
    let step = (hi - lo) / T::from_usize_lossy(ROOT_GRID);
    let width = T::lit(ROOT_BRACKET);
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut d0 = d(x0);
    for i in 1..=ROOT_GRID {
        let x1 = if i == ROOT_GRID {
            hi
        } else {
            lo + step * T::from_usize_lossy(i)
        };
        let d1 = d(x1);
        if d1 == T::zero() {
            if x1 > lo && x1 < hi {
                roots.push(x1);
            }
        } else if d0 != T::zero() && (d0 < T::zero()) != (d1 < T::zero()) {
            let (mut a, mut b, mut da) = (x0, x1, d0);
            while b - a > width {
                let m = (a + b) * T::lit(0.5);
                if m <= a || m >= b {
                    break;
                }
                let dm = d(m);
                if dm == T::zero() {
                    a = m;
                    b = m;
                    break;
                }
                if (dm < T::zero()) == (da < T::zero()) {
                    a = m;
                    da = dm;
                } else {
                    b = m;
                }
            }
            let r = (a + b) * T::lit(0.5);
            if r > lo && r < hi {
                roots.push(r);
            }
        }
        x0 = x1;
        d0 = d1;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn g_eval_examples() {
        let diets = presets::diets::<f64>();
        assert!((diets.g_eval(0, &[100.0]).unwrap() + 40.0).abs() < 1e-12);
        let s = presets::two_arm_example::<f64>();
        assert!((s.g_eval(0, &[0.4]).unwrap() - 0.4).abs() < 1e-15);
        assert!((s.g_eval(1, &[0.4]).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn g_eval_rejects_bad_inputs() {
        let s = presets::two_arm_example::<f64>();
        assert!(matches!(s.g_eval(2, &[0.4]), Err(DesignError::ArmOutOfRange { arm: 3, arms: 2 })));
        assert!(matches!(s.g_eval(0, &[1.5]), Err(DesignError::OutsideSupport { .. })));
    }

    #[test]
    fn best_arm_examples() {
        let diets = presets::diets::<f64>();
        assert_eq!(diets.best_arm(&[100.0]).unwrap(), 0);
        assert_eq!(diets.best_arm(&[300.0]).unwrap(), 2);
        let twins = Scenario::linear_1d(
            &[(0.1, 0.3, 1.0), (0.1, 0.3, 1.0)],
            CovariateModel::uniform(0.0, 1.0),
        )
        .unwrap();
        for x in [0.0, 0.25, 0.9] {
            assert_eq!(twins.best_arm(&[x]).unwrap(), 0);
        }
    }

    #[test]
    fn intersection_examples() {
        let s = presets::two_arm_example::<f64>();
        let c = s.intersection_points().unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].theta - 0.4).abs() < 1e-15);
        assert_eq!((c[0].left, c[0].right), (0, 1));

        let s = presets::three_arm_uniform::<f64>();
        let c = s.intersection_points().unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0].theta - 1.0 / 3.0).abs() < 1e-15);
        assert!((c[1].theta - 11.0 / 15.0).abs() < 1e-15);
        assert_eq!((c[0].left, c[0].right, c[1].left, c[1].right), (0, 1, 1, 2));

        let c = presets::diets::<f64>().intersection_points().unwrap();
        assert!((c[0].theta - 400.0 / 3.0).abs() < 1e-9);
        assert!((c[1].theta - 1600.0 / 7.0).abs() < 1e-9);
        assert!((c[0].theta - 133.33).abs() < 0.01 && (c[1].theta - 228.57).abs() < 0.01);
    }

    #[test]
    fn identical_arms_rejected_for_intersections() {
        let twins = Scenario::linear_1d(
            &[(0.1, 0.3, 1.0), (0.1, 0.3, 2.0)],
            CovariateModel::uniform(0.0, 1.0),
        )
        .unwrap();
        assert_eq!(
            twins.intersection_points(),
            Err(DesignError::IdenticalArms { first: 1, second: 2 })
        );
    }

    #[test]
    fn no_crossing_in_support_is_empty() {
        let s = Scenario::linear_1d(
            &[(1.0, 0.0, 1.0), (0.0, 0.5, 1.0)],
            CovariateModel::uniform(0.0, 1.0),
        )
        .unwrap();
        assert!(s.intersection_points().unwrap().is_empty());
    }

    #[test]
    fn polynomial_crossings() {
        // g1 = 0, g2 = x² − x + 0.21 = (x − 0.3)(x − 0.7)
        let s = Scenario::new(
            vec![
                ArmModel::new(0.0, vec![0.0, 0.0], 1.0),
                ArmModel::new(0.21, vec![-1.0, 1.0], 1.0),
            ],
            Basis::Polynomial { degree: 2 },
            CovariateModel::uniform(0.0, 1.0),
        )
        .unwrap();
        let c: Vec<Crossing<f64>> = s.intersection_points().unwrap();
        assert_eq!(c.len(), 2);
        assert!((c[0].theta - 0.3).abs() < 1e-11);
        assert!((c[1].theta - 0.7).abs() < 1e-11);
        assert_eq!((c[0].left, c[0].right), (1, 0));
        assert_eq!((c[1].left, c[1].right), (0, 1));
    }

    #[test]
    fn validate_examples() {
        assert!(presets::two_arm_example::<f64>().validate().is_empty());
        assert!(presets::diets::<f64>().validate().is_empty());

        let bad = Scenario::linear_1d(
            &[(0.2, 0.5, 0.1_f64.sqrt()), (0.0, 1.0, 0.0)],
            CovariateModel::uniform(0.0, 1.0),
        )
        .unwrap();
        assert_eq!(bad.validate(), vec!["arm 2: noise_sd must be > 0".to_string()]);

        // arm 2 sits far below the others everywhere
        let s = Scenario::linear_1d(
            &[(0.0, 0.0, 1.0), (-10.0, 0.0, 1.0), (0.1, 0.05, 1.0)],
            CovariateModel::uniform(-10.0, 10.0),
        )
        .unwrap();
        assert_eq!(s.validate(), vec!["arm 2 is never optimal".to_string()]);
    }

    #[test]
    fn envelope_scan_confirms_dominated_arm() {
        // brute-force scan over the support
        let s = Scenario::linear_1d(
            &[(0.0, 0.0, 1.0), (-10.0, 0.0, 1.0), (0.1, 0.05, 1.0)],
            CovariateModel::uniform(-10.0, 10.0),
        )
        .unwrap();
        let mut seen = [false; 3];
        for i in 0..=10_000 {
            let x = -10.0 + 20.0 * i as f64 / 10_000.0;
            seen[s.best_arm(&[x]).unwrap()] = true;
        }
        assert_eq!(seen, [true, false, true]);
    }
}
