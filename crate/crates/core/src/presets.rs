//! Bundled scenarios used by the examples, tests and the command line.

use crate::covariate::CovariateModel;
use crate::real::Real;
use crate::scenario::{ArmModel, Basis, Scenario};

pub const NAMES: [&str; 4] = ["scenario_3_2", "scenario_4_2", "scenario_4_2_overlap", "diets"];

/// Two arms on `U[0, 1]`: lines `0.2 + 0.5x` and `x`, noise variances 0.1 and 0.2.
pub fn two_arm_example<T: Real>() -> Scenario<T> {
    Scenario::linear_1d(
        &[
            (T::lit(0.2), T::lit(0.5), T::lit(0.1).sqrt()),
            (T::zero(), T::one(), T::lit(0.2).sqrt()),
        ],
        CovariateModel::uniform(T::zero(), T::one()),
    )
    .expect("well-formed preset")
}

/// Three arms on `U[0, 1]` with unit noise whose optimal bands are disjoint.
pub fn three_arm_uniform<T: Real>() -> Scenario<T> {
    three_arm_with_alpha3(T::lit(-1.2))
}

/// Same slopes as [`three_arm_uniform`] but crossings pushed together.
pub fn three_arm_overlap<T: Real>() -> Scenario<T> {
    three_arm_with_alpha3(T::lit(-0.8))
}

fn three_arm_with_alpha3<T: Real>(alpha3: T) -> Scenario<T> {
    Scenario::linear_1d(
        &[
            (T::zero(), T::lit(0.2), T::one()),
            (T::lit(-0.1), T::lit(0.5), T::one()),
            (alpha3, T::lit(2.0), T::one()),
        ],
        CovariateModel::uniform(T::zero(), T::one()),
    )
    .expect("well-formed preset")
}

/// Three diets against insulin secretion (gamma covariate). The intercepts
/// already include the diet costs, so `cost` is zero on every arm.
pub fn diets<T: Real>() -> Scenario<T> {
    let arms = [(40.0, -0.8, 190.0), (-80.0, 0.1, 150.0), (-240.0, 0.8, 130.0)]
        .iter()
        .map(|&(a, b, s)| ArmModel::new(T::lit(a), vec![T::lit(b)], T::lit(s)))
        .collect();
    Scenario::new(
        arms,
        Basis::Linear { dim: 1 },
        CovariateModel::gamma(T::lit(3.12), T::lit(0.02)).expect("valid gamma"),
    )
    .expect("well-formed preset")
}

pub fn by_name<T: Real>(name: &str) -> Option<Scenario<T>> {
    match name {
        "scenario_3_2" => Some(two_arm_example()),
        "scenario_4_2" => Some(three_arm_uniform()),
        "scenario_4_2_overlap" => Some(three_arm_overlap()),
        "diets" => Some(diets()),
        _ => None,
    }
}
