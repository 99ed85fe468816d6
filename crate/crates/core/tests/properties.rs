use allocdesign::quadrature::GaussLegendre;
use allocdesign::rules::MOMENT_NODES;
use allocdesign::*;
use proptest::prelude::*;

fn uniform_three<T: Real>() -> Scenario<T> {
    presets::three_arm_uniform()
}

/// Random rule of each class on `[0, 1]` with `k` arms.
fn rule_strategy(k: usize) -> impl Strategy<Value = AllocationRule<f64>> {
    let constant = prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let t: f64 = w.iter().sum();
        AllocationRule::constant(w.iter().map(|v| v / t).collect()).unwrap()
    });
    let softmax = (0usize..=3).prop_flat_map(move |deg| {
        prop::collection::vec(-2.0f64..2.0, (k - 1) * (deg + 1)).prop_map(move |a| {
            AllocationRule::Softmax(SoftmaxRule::new(k, deg, a, 0.5, (1.0f64 / 12.0).sqrt()).unwrap())
        })
    });
    let piecewise = prop::collection::vec(0.05f64..0.95, 1..4).prop_flat_map(move |mut b| {
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup_by(|x, y| (*x - *y).abs() < 1e-3);
        let len = b.len() + 1;
        prop::collection::vec(0..k, len).prop_map(move |arms| {
            AllocationRule::Piecewise(PiecewiseRule::new(k, b.clone(), arms).unwrap())
        })
    });
    prop_oneof![constant, softmax, piecewise]
}

/// `Σν, Σνμ, Σν(τ² + μ²)`; arms with no mass contribute nothing.
fn mixture(m: &ArmMoments<f64>) -> (f64, f64, f64) {
    let fed = || m.arms.iter().filter(|a| a.nu > 0.0);
    (
        fed().map(|a| a.nu).sum(),
        fed().map(|a| a.nu * a.mu).sum(),
        fed().map(|a| a.nu * (a.tau_sq + a.mu * a.mu)).sum(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_identities_hold_for_every_rule_class(rule in rule_strategy(3)) {
        let s = uniform_three::<f64>();
        let m = arm_moments(&rule, &s).unwrap();
        let (total, first, second) = mixture(&m);
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!((first - 0.5).abs() < 1e-6);
        prop_assert!((second - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn mixture_identities_on_gamma(rule in rule_strategy(3)) {
        let s = presets::diets::<f64>();
        let rule = match rule {
            AllocationRule::Softmax(r) => {
                let (c, sd) = allocdesign::rules::standardization(&s).unwrap();
                AllocationRule::Softmax(SoftmaxRule::new(3, r.degree(), r.coeffs().to_vec(), c, sd).unwrap())
            }
            AllocationRule::Piecewise(p) => {
                let b = p.breakpoints().iter().map(|x| x * 400.0).collect();
                AllocationRule::Piecewise(PiecewiseRule::new(3, b, p.arms().to_vec()).unwrap())
            }
            c => c,
        };
        let m = arm_moments(&rule, &s).unwrap();
        let (mean, var) = s.covariate().mean_var_1d(&GaussLegendre::new(MOMENT_NODES));
        let (total, first, second) = mixture(&m);
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!((first - mean).abs() < 1e-6 * mean);
        prop_assert!((second - (var + mean * mean)).abs() < 1e-6 * (var + mean * mean));
    }

    #[test]
    fn selection_probabilities_sum_to_one(
        rule in rule_strategy(3),
        x in 0.0f64..1.0,
        n in 1u64..100_000,
    ) {
        let s = uniform_three::<f64>();
        let m = arm_moments(&rule, &s).unwrap();
        prop_assume!(!m.any_starved());
        let total: f64 = (0..3).map(|k| prob_select(&s, &rule, &[x], k, n).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn ideal_regret_is_nonnegative_and_shrinks(rule in rule_strategy(3)) {
        let s = uniform_three::<f64>();
        let m = arm_moments(&rule, &s).unwrap();
        prop_assume!(!m.any_starved());
        let a = ideal_regret(&s, &rule, 50).unwrap();
        let b = ideal_regret(&s, &rule, 5_000).unwrap();
        prop_assert!(a >= 0.0 && b >= 0.0);
        prop_assert!(b < a);
    }

    #[test]
    fn scenario_config_round_trips_bit_exactly(
        alphas in prop::collection::vec(-1e3f64..1e3, 2..5),
        slope in -10.0f64..10.0,
        sigma in 1e-3f64..1e3,
        cost in -5.0f64..5.0,
        lo in -5.0f64..0.0,
        width in 0.1f64..10.0,
    ) {
        let arms = alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| ArmModel::new(a, vec![slope * (i as f64 + 1.0)], sigma).with_cost(cost))
            .collect();
        let s = Scenario::new(arms, Basis::Linear { dim: 1 }, covariate::CovariateModel::uniform(lo, lo + width)).unwrap();
        let cfg = ScenarioConfig::from_scenario(&s);
        let parsed = ScenarioConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&parsed, &cfg);
        let back: Scenario<f64> = parsed.build().unwrap();
        prop_assert_eq!(&back, &s);
        let again = ScenarioConfig::parse(&ScenarioConfig::from_scenario(&back).to_toml()).unwrap();
        prop_assert_eq!(again, cfg);
    }

    #[test]
    fn rule_config_round_trips(rule in rule_strategy(3)) {
        let s = uniform_three::<f64>();
        let cfg = RuleConfig::from_rule(&rule);
        let back = RuleConfig::parse(&cfg.to_toml()).unwrap().build(&s).unwrap();
        prop_assert_eq!(back, rule);
    }

    #[test]
    fn limit_is_invariant_under_relabeling(perm in Just([2usize, 0, 1]), rule in rule_strategy(3)) {
        let s = uniform_three::<f64>();
        let m = arm_moments(&rule, &s).unwrap();
        prop_assume!(!m.any_starved());
        let base = asymptotic_limit(&s, &m).unwrap().limit;
        let arms = perm.iter().map(|&i| s.arm(i).clone()).collect();
        let sp = Scenario::new(arms, s.basis(), s.covariate().clone()).unwrap();
        let rp = match &rule {
            AllocationRule::Constant { nu } => AllocationRule::constant(perm.iter().map(|&i| nu[i]).collect()).unwrap(),
            AllocationRule::Piecewise(p) => {
                let inv: Vec<usize> = (0..3).map(|j| perm.iter().position(|&i| i == j).unwrap()).collect();
                AllocationRule::Piecewise(
                    PiecewiseRule::new(3, p.breakpoints().to_vec(), p.arms().iter().map(|&a| inv[a]).collect()).unwrap(),
                )
            }
            AllocationRule::Softmax(_) => return Ok(()),
        };
        let mp = arm_moments(&rp, &sp).unwrap();
        let permuted = asymptotic_limit(&sp, &mp).unwrap().limit;
        prop_assert!((permuted - base).abs() <= 1e-9 * base.abs().max(1.0), "{base} vs {permuted}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn psd_gap_nonnegative_over_two_arm_rules(rule in rule_strategy(2)) {
        let s = presets::two_arm_example::<f64>();
        let m = arm_moments(&rule, &s).unwrap();
        prop_assume!(!m.any_starved());
        let gap = psd_gap(&m, &s).unwrap();
        prop_assert!(gap >= -1e-8, "{gap}");
    }
}

#[test]
fn psd_gap_vanishes_at_optimal_rule() {
    let s = presets::two_arm_example::<f64>();
    let opt = two_arm_optimal(s.arm(0).sigma, s.arm(1).sigma).unwrap();
    let gap = psd_gap(&arm_moments(&opt, &s).unwrap(), &s).unwrap();
    assert!(gap.abs() <= 1e-8, "{gap}");
}

#[test]
fn simulation_is_reproducible() {
    let s = presets::three_arm_uniform::<f64>();
    let rule = AllocationRule::balanced(3);
    let cfg = SimulationConfig {
        reps: 200,
        seed: 99,
        error_model: ErrorModel::CenteredExponential,
        parallel: false,
    };
    let a = estimate_regret(&s, &rule, 90, &cfg).unwrap();
    let b = estimate_regret(&s, &rule, 90, &cfg).unwrap();
    assert_eq!(a, b);
    let c = estimate_regret(&s, &rule, 90, &SimulationConfig { seed: 100, ..cfg }).unwrap();
    assert_ne!(a.mean, c.mean);
}

#[test]
fn monte_carlo_agreement_improves_with_n() {
    let s = presets::two_arm_example::<f64>();
    let rule = AllocationRule::balanced(2);
    let cfg = SimulationConfig {
        reps: 20_000,
        seed: 1,
        parallel: true,
        ..SimulationConfig::default()
    };
    let gaps: Vec<f64> = [50u64, 100, 400]
        .iter()
        .map(|&n| {
            let mc = estimate_regret(&s, &rule, n as usize, &cfg).unwrap().mean;
            (mc - ideal_regret(&s, &rule, n).unwrap()).abs()
        })
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn single_precision_tracks_double() {
    let s64 = presets::three_arm_uniform::<f64>();
    let s32 = presets::three_arm_uniform::<f32>();
    for n in [20u64, 200, 2000] {
        let a = ideal_regret(&s64, &Rule64::balanced(3), n).unwrap();
        let b = ideal_regret(&s32, &Rule32::balanced(3), n).unwrap() as f64;
        assert!((a - b).abs() <= 1e-3 * a, "n={n}: {a} vs {b}");
    }
    let l64 = evaluate_design(&s64, &Rule64::balanced(3), DesignObjective::AsymptoticLimit).unwrap();
    let l32 = evaluate_design(&s32, &Rule32::balanced(3), DesignObjective::AsymptoticLimit).unwrap() as f64;
    assert!((l64 - l32).abs() <= 1e-4 * l64);
}
