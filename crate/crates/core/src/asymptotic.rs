//! Closed-form limits of `n · R_I` as `n → ∞`.

use serde::Serialize;

use crate::covariate::CovariateModel;
use crate::error::{DesignError, Result};
use crate::quadrature::GaussLegendre;
use crate::real::Real;
use crate::rules::ArmMoments;
use crate::scenario::{Basis, Scenario};

/// Crossings whose derivative gap falls below this are rejected.
pub const TANGENCY_THRESHOLD: f64 = 1e-8;
const OUTER_NODES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitFormula {
    TwoOneDim,
    TwoTwoDim,
    KOneDim,
    Polynomial,
}

impl LimitFormula {
    pub fn tag(&self) -> &'static str {
        match self {
            LimitFormula::TwoOneDim => "two-1d",
            LimitFormula::TwoTwoDim => "two-pdim",
            LimitFormula::KOneDim => "K-1d",
            LimitFormula::Polynomial => "polynomial",
        }
    }
}

/// Contribution of one envelope breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingTerm<T> {
    pub theta: T,
    /// 0-based arms on either side.
    pub left: usize,
    pub right: usize,
    pub v: T,
    pub density: T,
    pub slope_gap: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport<T> {
    pub limit: T,
    pub terms: Vec<CrossingTerm<T>>,
    pub formula: LimitFormula,
    pub diagnostics: Vec<String>,
}

/// `V(x) = hᵗ(Σ_l + Σ_r)h` at a scalar covariate.
fn v_matrix<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>, l: usize, r: usize, x: T) -> Result<T> {
    let h = scenario.basis().design(&[x]);
    Ok(moments.covariance(l)?.quad_form(&h) + moments.covariance(r)?.quad_form(&h))
}

/// `(σ²/ν)(1 + (θ − μ)²/τ²)`: one arm's share of `V` for a linear 1-D model.
pub fn explicit_xi_sq<T: Real>(sigma: T, nu: T, mu: T, tau_sq: T, theta: T) -> T {
    let d = theta - mu;
    sigma * sigma / nu * (T::one() + d * d / tau_sq)
}

fn check_moments<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<()> {
    if moments.arms.len() != scenario.n_arms() {
        return Err(DesignError::InvalidInput(format!(
            "moments describe {} arms, scenario has {}",
            moments.arms.len(),
            scenario.n_arms()
        )));
    }
    moments.require_fed()
}

fn crossing_terms<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<Vec<CrossingTerm<T>>> {
    let cov = scenario.covariate();
    let mut terms = Vec::new();
    for c in scenario.envelope_1d() {
        let gap = (scenario.dg_1d(c.right, c.theta) - scenario.dg_1d(c.left, c.theta)).abs();
        if gap < T::lit(TANGENCY_THRESHOLD) {
            return Err(DesignError::TangentialCrossing {
                theta: c.theta.to_f64_lossy(),
                gap: gap.to_f64_lossy(),
            });
        }
        let v = v_matrix(scenario, moments, c.left, c.right, c.theta)?;
        let density = cov.density_1d(c.theta);
        terms.push(CrossingTerm {
            theta: c.theta,
            left: c.left,
            right: c.right,
            v,
            density,
            slope_gap: gap,
            value: v * density / (T::lit(2.0) * gap),
        });
    }
    Ok(terms)
}

fn report<T: Real>(terms: Vec<CrossingTerm<T>>, formula: LimitFormula, diagnostics: Vec<String>) -> AsymptoticReport<T> {
    let limit = terms.iter().map(|t| t.value).sum();
    AsymptoticReport {
        limit,
        terms,
        formula,
        diagnostics,
    }
}

fn require_linear_1d<T: Real>(scenario: &Scenario<T>) -> Result<()> {
    if scenario.basis() != (Basis::Linear { dim: 1 }) {
        return Err(DesignError::Unsupported(
            "this limit needs a linear model in a scalar covariate".into(),
        ));
    }
    Ok(())
}

/// Two arms, scalar covariate. Zero (with a diagnostic) when the lines do
/// not cross inside the support.
pub fn limit_two_1d<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<AsymptoticReport<T>> {
    require_linear_1d(scenario)?;
    if scenario.n_arms() != 2 {
        return Err(DesignError::InvalidInput("two-arm limit needs K = 2".into()));
    }
    check_moments(scenario, moments)?;
    let terms = crossing_terms(scenario, moments)?;
    let mut diags = Vec::new();
    if terms.is_empty() {
        diags.push("the two lines do not cross inside the support; limit is 0".to_string());
    }
    Ok(report(terms, LimitFormula::TwoOneDim, diags))
}

/// Delta-method variance `V(θ)/(β₂ − β₁)²` of the estimated crossing point.
pub fn theta_hat_variance<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<T> {
    let rep = limit_two_1d(scenario, moments)?;
    match rep.terms.first() {
        Some(t) => Ok(t.v / (t.slope_gap * t.slope_gap)),
        None => Err(DesignError::InvalidInput(
            "the two lines do not cross inside the support".into(),
        )),
    }
}

/// K arms, scalar linear covariate: sum over envelope breakpoints. Every
/// arm must own an interval of the support.
pub fn limit_k_1d<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<AsymptoticReport<T>> {
    require_linear_1d(scenario)?;
    check_moments(scenario, moments)?;
    let owners = scenario.envelope_owners_1d();
    if let Some(k) = (0..scenario.n_arms()).find(|k| !owners.contains(k)) {
        return Err(DesignError::InvalidInput(format!(
            "arm {} is never optimal on the support",
            k + 1
        )));
    }
    let terms = crossing_terms(scenario, moments)?;
    let formula = if scenario.n_arms() == 2 {
        LimitFormula::TwoOneDim
    } else {
        LimitFormula::KOneDim
    };
    Ok(report(terms, formula, Vec::new()))
}

/// Per-crossing `V_m(θ_m)` from `(ν, μ, τ²)` alone, for a linear 1-D model.
pub fn explicit_v<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<Vec<T>> {
    require_linear_1d(scenario)?;
    check_moments(scenario, moments)?;
    Ok(scenario
        .envelope_1d()
        .iter()
        .map(|c| {
            [c.left, c.right]
                .iter()
                .map(|&j| {
                    let a = &moments.arms[j];
                    explicit_xi_sq(scenario.arm(j).sigma, a.nu, a.mu, a.tau_sq, c.theta)
                })
                .sum()
        })
        .collect())
}

/// K-arm limit written in the moment profile `(ν_k, μ_k, τ_k²)` directly.
/// Arms missing from the envelope are ignored.
pub fn limit_from_profile<T: Real>(scenario: &Scenario<T>, nu: &[T], mu: &[T], tau_sq: &[T]) -> Result<T> {
    require_linear_1d(scenario)?;
    let cov = scenario.covariate();
    let mut total = T::zero();
    for c in scenario.envelope_1d() {
        let gap = (scenario.arm(c.right).beta[0] - scenario.arm(c.left).beta[0]).abs();
        let v: T = [c.left, c.right]
            .iter()
            .map(|&j| explicit_xi_sq(scenario.arm(j).sigma, nu[j], mu[j], tau_sq[j], c.theta))
            .sum();
        total += v * cov.density_1d(c.theta) / (T::lit(2.0) * gap);
    }
    Ok(total)
}

/// Polynomial model in a scalar covariate: one term per simple crossing,
/// weighted by the derivative gap.
pub fn limit_polynomial<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<AsymptoticReport<T>> {
    if !matches!(scenario.basis(), Basis::Polynomial { .. }) {
        return Err(DesignError::Unsupported(
            "polynomial limit needs a polynomial basis".into(),
        ));
    }
    check_moments(scenario, moments)?;
    let terms = crossing_terms(scenario, moments)?;
    Ok(report(terms, LimitFormula::Polynomial, Vec::new()))
}

/// Two arms, two linear covariates on a box: integral of the crossing line.
pub fn limit_two_pdim<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<T> {
    let cov = scenario.covariate();
    match scenario.basis() {
        Basis::Linear { dim: 2 } => {}
        Basis::Linear { dim } if dim > 2 => {
            return Err(DesignError::Unsupported(format!(
                "asymptotic limit for a {dim}-dimensional covariate"
            )))
        }
        _ => return Err(DesignError::Unsupported("two-dimensional limit needs a linear basis with p = 2".into())),
    }
    if !matches!(cov, CovariateModel::UniformBox { .. }) {
        return Err(DesignError::Unsupported("two-dimensional limit needs a box covariate".into()));
    }
    if scenario.n_arms() != 2 {
        return Err(DesignError::InvalidInput("two-arm limit needs K = 2".into()));
    }
    check_moments(scenario, moments)?;
    let (c1, c2) = (scenario.arm(0).coefficients(), scenario.arm(1).coefficients());
    let d: Vec<T> = c2.iter().zip(&c1).map(|(&a, &b)| a - b).collect();
    // integrate along the coordinate with the larger slope gap
    let (solve, along) = if d[1].abs() >= d[2].abs() { (0, 1) } else { (1, 0) };
    let gap = d[1 + solve].abs();
    if gap < T::lit(TANGENCY_THRESHOLD) {
        return Err(DesignError::TangentialCrossing {
            theta: f64::NAN,
            gap: gap.to_f64_lossy(),
        });
    }
    let support = cov.support();
    let (slo, shi) = support[solve];
    let (alo, ahi) = support[along];
    let theta = |t: T| -(d[0] + d[1 + along] * t) / d[1 + solve];
    let mut cuts: Vec<T> = Vec::new();
    if d[1 + along] != T::zero() {
        for edge in [slo, shi] {
            let t = -(d[0] + d[1 + solve] * edge) / d[1 + along];
            if t > alo && t < ahi {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cut"));
    let mut edges = vec![alo];
    edges.extend(cuts);
    edges.push(ahi);

    let gl = GaussLegendre::<T>::new(OUTER_NODES);
    let (s1, s2) = (moments.covariance(0)?, moments.covariance(1)?);
    let mut total = T::zero();
    let mut x = [T::zero(); 2];
    for e in edges.windows(2) {
        total += gl.integrate(e[0], e[1], |t| {
            let th = theta(t);
            if th < slo || th > shi {
                return T::zero();
            }
            x[solve] = th;
            x[along] = t;
            let h = [T::one(), x[0], x[1]];
            (s1.quad_form(&h) + s2.quad_form(&h)) * cov.density(&x)
        });
    }
    Ok(total / (T::lit(2.0) * gap))
}

/// Dispatches on the scenario shape.
pub fn asymptotic_limit<T: Real>(scenario: &Scenario<T>, moments: &ArmMoments<T>) -> Result<AsymptoticReport<T>> {
    match (scenario.basis(), scenario.n_arms()) {
        (Basis::Polynomial { .. }, _) => limit_polynomial(scenario, moments),
        (Basis::Linear { dim: 1 }, 2) => limit_two_1d(scenario, moments),
        (Basis::Linear { dim: 1 }, _) => limit_k_1d(scenario, moments),
        (Basis::Linear { dim: 2 }, 2) => Ok(AsymptoticReport {
            limit: limit_two_pdim(scenario, moments)?,
            terms: Vec::new(),
            formula: LimitFormula::TwoTwoDim,
            diagnostics: Vec::new(),
        }),
        (Basis::Linear { dim }, k) => Err(DesignError::Unsupported(format!(
            "asymptotic limit for K = {k} arms with a {dim}-dimensional covariate"
        ))),
    }
}
