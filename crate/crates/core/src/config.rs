//! TOML scenario and rule files.
//!
//! ```toml
//! K = 2
//! basis = "linear"          # or "polynomial:J"
//!
//! [covariate]
//! kind = "uniform"          # uniform | gamma | tabulated
//! params = [0.0, 1.0]       # uniform: lo, hi per dimension; gamma: shape, rate
//!
//! [[arms]]
//! alpha = 0.2
//! beta = [0.5]
//! sigma = 0.316
//! cost = 0.0
//! ```
//!
//! Rules live under a `[rule]` table: `kind` is `constant` (`nu`),
//! `softmax` (`A` row-major, optional `center`/`scale`), `piecewise`
//! (`breakpoints`, 1-based `arms`) or `balanced`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::covariate::{CovariateModel, TabulatedDensity};
use crate::error::{DesignError, Result};
use crate::real::Real;
use crate::rules::{standardization, AllocationRule, PiecewiseRule, SoftmaxRule};
use crate::scenario::{ArmModel, Basis, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "K")]
    pub k: usize,
    pub basis: String,
    pub covariate: CovariateConfig,
    pub arms: Vec<ArmConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knots: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub cost: f64,
}

fn config_err(msg: impl Into<String>) -> DesignError {
    DesignError::Config(msg.into())
}

fn parse_basis(s: &str, dim: usize) -> Result<Basis> {
    let s = s.trim();
    if s == "linear" {
        return Ok(Basis::Linear { dim });
    }
    if let Some(j) = s.strip_prefix("polynomial:") {
        let degree: usize = j
            .trim()
            .parse()
            .map_err(|_| config_err(format!("basis: bad polynomial degree {j:?}")))?;
        if degree == 0 {
            return Err(config_err("basis: polynomial degree must be >= 1"));
        }
        return Ok(Basis::Polynomial { degree });
    }
    Err(config_err(format!("basis: expected \"linear\" or \"polynomial:J\", got {s:?}")))
}

fn finite(field: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(config_err(format!("{field}: values must be finite")))
    }
}

impl CovariateConfig {
    fn build<T: Real>(&self) -> Result<CovariateModel<T>> {
        finite("covariate.params", &self.params)?;
        match self.kind.as_str() {
            "uniform" => {
                if self.params.is_empty() || self.params.len() % 2 != 0 {
                    return Err(config_err("covariate.params: uniform needs (lo, hi) per dimension"));
                }
                let bounds: Vec<(T, T)> = self.params.chunks(2).map(|c| (T::lit(c[0]), T::lit(c[1]))).collect();
                if bounds.iter().any(|&(lo, hi)| !(lo < hi)) {
                    return Err(config_err("covariate.params: uniform needs lo < hi"));
                }
                Ok(CovariateModel::UniformBox { bounds })
            }
            "gamma" => match self.params[..] {
                [shape, rate] => CovariateModel::gamma(T::lit(shape), T::lit(rate))
                    .map_err(|e| config_err(format!("covariate.params: {e}"))),
                _ => Err(config_err("covariate.params: gamma needs [shape, rate]")),
            },
            "tabulated" => {
                let (k, v) = match (&self.knots, &self.values) {
                    (Some(k), Some(v)) => (k, v),
                    _ => return Err(config_err("covariate: tabulated needs `knots` and `values`")),
                };
                finite("covariate.knots", k)?;
                finite("covariate.values", v)?;
                let t = TabulatedDensity::new(k.iter().map(|&x| T::lit(x)).collect(), v.iter().map(|&x| T::lit(x)).collect())
                    .map_err(|e| config_err(format!("covariate: {e}")))?;
                Ok(CovariateModel::Tabulated(t))
            }
            other => Err(config_err(format!(
                "covariate.kind: expected uniform, gamma or tabulated, got {other:?}"
            ))),
        }
    }

    fn from_model<T: Real>(m: &CovariateModel<T>) -> Self {
        let f = |v: T| v.to_f64_lossy();
        match m {
            CovariateModel::UniformBox { bounds } => Self {
                kind: "uniform".into(),
                params: bounds.iter().flat_map(|&(lo, hi)| [f(lo), f(hi)]).collect(),
                knots: None,
                values: None,
            },
            CovariateModel::Gamma(g) => Self {
                kind: "gamma".into(),
                params: vec![f(g.shape()), f(g.rate())],
                knots: None,
                values: None,
            },
            CovariateModel::Tabulated(t) => Self {
                kind: "tabulated".into(),
                params: Vec::new(),
                knots: Some(t.knots().iter().map(|&v| f(v)).collect()),
                values: Some(t.values().iter().map(|&v| f(v)).collect()),
            },
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            DesignError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn build<T: Real>(&self) -> Result<Scenario<T>> {
        if self.k < 1 || self.arms.len() != self.k {
            return Err(config_err(format!("K = {} but {} [[arms]] given", self.k, self.arms.len())));
        }
        let covariate = self.covariate.build::<T>()?;
        let basis = parse_basis(&self.basis, covariate.dim())?;
        let mut arms = Vec::with_capacity(self.k);
        for (i, a) in self.arms.iter().enumerate() {
            let field = format!("arms[{}]", i + 1);
            finite(&field, &[a.alpha, a.sigma, a.cost])?;
            finite(&format!("{field}.beta"), &a.beta)?;
            if !(a.sigma > 0.0) {
                return Err(config_err(format!("{field}.sigma: must be > 0")));
            }
            if a.beta.len() != basis.n_slopes() {
                return Err(config_err(format!(
                    "{field}.beta: expected {} coefficients for basis {:?}, got {}",
                    basis.n_slopes(),
                    self.basis,
                    a.beta.len()
                )));
            }
            arms.push(
                ArmModel::new(T::lit(a.alpha), a.beta.iter().map(|&b| T::lit(b)).collect(), T::lit(a.sigma))
                    .with_cost(T::lit(a.cost)),
            );
        }
        Scenario::new(arms, basis, covariate).map_err(|e| config_err(e.to_string()))
    }

    pub fn from_scenario<T: Real>(s: &Scenario<T>) -> Self {
        let basis = match s.basis() {
            Basis::Linear { .. } => "linear".to_string(),
            Basis::Polynomial { degree } => format!("polynomial:{degree}"),
        };
        Self {
            k: s.n_arms(),
            basis,
            covariate: CovariateConfig::from_model(s.covariate()),
            arms: s
                .arms()
                .iter()
                .map(|a| ArmConfig {
                    alpha: a.alpha.to_f64_lossy(),
                    beta: a.beta.iter().map(|b| b.to_f64_lossy()).collect(),
                    sigma: a.sigma.to_f64_lossy(),
                    cost: a.cost.to_f64_lossy(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleFile {
    pub rule: RuleConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleConfig {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    /// 1-based arm per interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<usize>>,
}

impl RuleConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str::<RuleFile>(text)
            .map(|f| f.rule)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            DesignError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RuleFile { rule: self.clone() }).expect("rule config is always representable")
    }

    /// Builds the rule for `scenario`; softmax rules without an explicit
    /// `center`/`scale` are standardised to the scenario's covariate.
    pub fn build<T: Real>(&self, scenario: &Scenario<T>) -> Result<AllocationRule<T>> {
        let k = scenario.n_arms();
        let need = |name: &str| config_err(format!("rule.{name}: required for kind {:?}", self.kind));
        let lift = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let wrap = |e: DesignError| match e {
            DesignError::InvalidInput(m) => config_err(format!("rule: {m}")),
            other => other,
        };
        let rule = match self.kind.as_str() {
            "balanced" => AllocationRule::balanced(k),
            "constant" => {
                let nu = self.nu.as_ref().ok_or_else(|| need("nu"))?;
                finite("rule.nu", nu)?;
                AllocationRule::constant(lift(nu)).map_err(wrap)?
            }
            "softmax" => {
                let a = self.a.as_ref().ok_or_else(|| need("A"))?;
                finite("rule.A", a)?;
                if k < 2 || a.is_empty() || a.len() % (k - 1) != 0 {
                    return Err(config_err(format!(
                        "rule.A: expected (K-1) x (m+1) = {} x (m+1) entries, got {}",
                        k.saturating_sub(1),
                        a.len()
                    )));
                }
                let degree = a.len() / (k - 1) - 1;
                if let Some(d) = self.degree {
                    if d != degree {
                        return Err(config_err(format!("rule.degree: {d} disagrees with rule.A ({degree})")));
                    }
                }
                let (c0, s0) = match (self.center, self.scale) {
                    (Some(c), Some(s)) => (T::lit(c), T::lit(s)),
                    _ => standardization(scenario)?,
                };
                AllocationRule::Softmax(SoftmaxRule::new(k, degree, lift(a), c0, s0).map_err(wrap)?)
            }
            "piecewise" => {
                let b = self.breakpoints.as_ref().ok_or_else(|| need("breakpoints"))?;
                let arms = self.arms.as_ref().ok_or_else(|| need("arms"))?;
                finite("rule.breakpoints", b)?;
                if arms.contains(&0) {
                    return Err(config_err("rule.arms: arm indices are 1-based"));
                }
                let arms = arms.iter().map(|&a| a - 1).collect();
                AllocationRule::Piecewise(PiecewiseRule::new(k, lift(b), arms).map_err(wrap)?)
            }
            other => {
                return Err(config_err(format!(
                    "rule.kind: expected balanced, constant, softmax or piecewise, got {other:?}"
                )))
            }
        };
        if rule.n_arms() != k {
            return Err(config_err(format!("rule has {} arms, scenario has {k}", rule.n_arms())));
        }
        Ok(rule)
    }

    pub fn from_rule<T: Real>(rule: &AllocationRule<T>) -> Self {
        let lower = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<f64>>();
        match rule {
            AllocationRule::Constant { nu } => Self {
                kind: "constant".into(),
                nu: Some(lower(nu)),
                ..Self::default()
            },
            AllocationRule::Softmax(s) => Self {
                kind: "softmax".into(),
                a: Some(lower(s.coeffs())),
                degree: Some(s.degree()),
                center: Some(s.center().to_f64_lossy()),
                scale: Some(s.scale().to_f64_lossy()),
                ..Self::default()
            },
            AllocationRule::Piecewise(p) => Self {
                kind: "piecewise".into(),
                breakpoints: Some(lower(p.breakpoints())),
                arms: Some(p.arms().iter().map(|a| a + 1).collect()),
                ..Self::default()
            },
        }
    }
}
