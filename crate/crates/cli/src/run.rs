use std::fs;
use std::path::Path;

use allocdesign::report::{ideal_csv, pi_grid_csv, simulation_csv, trace_csv, IdealRow, SimulationRow};
use allocdesign::{
    asymptotic_limit, estimate_regret, evaluate_design, ideal_regret, limit_from_profile, lower_bound_asymptotic,
    optimize_constant, optimize_softmax, reconstruct_deterministic, AllocationRule, DesignError, DesignObjective,
    ErrorModel, OptimizerConfig, Real, RuleConfig, Scenario64, SimulationConfig, SoftmaxRule,
};
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::{Command, RunManifest, MANIFEST_FILE};

type Result<T> = std::result::Result<T, CliError>;

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn write_toml<S: Serialize>(dir: &Path, name: &str, value: &S) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| CliError::config(e.to_string()))?;
    write(dir, name, &text)
}

fn parse_n(s: &str) -> Result<Option<u64>> {
    if s == "inf" {
        return Ok(None);
    }
    match s.parse::<u64>() {
        Ok(n) if n >= 1 => Ok(Some(n)),
        _ => Err(CliError::config(format!("--n: expected a positive integer or `inf`, got {s:?}"))),
    }
}

fn finite_n(list: &[String]) -> Result<Vec<u64>> {
    list.iter()
        .map(|s| parse_n(s)?.ok_or_else(|| CliError::config("--n: `inf` is not allowed for this command")))
        .collect()
}

fn rule_of(manifest: &RunManifest, scenario: &Scenario64) -> Result<AllocationRule<f64>> {
    let cfg = manifest.rule.clone().unwrap_or_else(|| RuleConfig {
        kind: "balanced".into(),
        ..RuleConfig::default()
    });
    Ok(cfg.build(scenario)?)
}

fn reduction(base: f64, value: f64) -> f64 {
    100.0 * (base - value) / base
}

/// Runs a manifest, writing every artifact into `manifest.out`. Returns a
/// short human-readable summary.
pub fn execute(manifest: &RunManifest, parallel: bool) -> Result<String> {
    let scenario: Scenario64 = manifest.scenario.build()?;
    let out = &manifest.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let summary = match manifest.command {
        Command::IdealRegret => ideal(manifest, &scenario)?,
        Command::Optimize => optimize(manifest, &scenario, parallel)?,
        Command::LowerBound => lower_bound(manifest, &scenario, parallel)?,
        Command::Simulate => simulate(manifest, &scenario, parallel)?,
        Command::Asymptotic => asymptotic(manifest, &scenario)?,
    };
    write(out, MANIFEST_FILE, &manifest.to_toml())?;
    Ok(summary)
}

fn ideal(manifest: &RunManifest, scenario: &Scenario64) -> Result<String> {
    let rule = rule_of(manifest, scenario)?;
    let mut rows = Vec::new();
    for n in finite_n(&manifest.n)? {
        let r = ideal_regret(scenario, &rule, n)?;
        rows.push(IdealRow {
            n: n.to_string(),
            regret: r,
            scaled: r * n as f64,
        });
    }
    let mut note = String::new();
    match evaluate_design(scenario, &rule, DesignObjective::AsymptoticLimit) {
        Ok(limit) => rows.push(IdealRow {
            n: "inf".into(),
            regret: 0.0,
            scaled: limit,
        }),
        Err(e) => note = format!("\nasymptotic limit unavailable: {e}"),
    }
    let csv = ideal_csv(&rows);
    write(&manifest.out, "ideal_regret.csv", &csv)?;
    Ok(format!("{csv}{note}"))
}

#[derive(Serialize)]
struct OptimizeReport {
    objective: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<u64>,
    degree: usize,
    /// All values are `n · R_I` (or the limit for `n = inf`).
    balanced: f64,
    constant: f64,
    optimized: f64,
    constant_reduction_pct: f64,
    optimized_reduction_pct: f64,
    restarts: usize,
    best_restart: usize,
    converged: bool,
    constant_nu: Vec<f64>,
}

fn optimize(manifest: &RunManifest, scenario: &Scenario64, parallel: bool) -> Result<String> {
    let n_str = match &manifest.n[..] {
        [one] => one,
        _ => return Err(CliError::config("--n: optimize takes exactly one sample size")),
    };
    let n = parse_n(n_str)?;
    let objective = match n {
        Some(n) => DesignObjective::IdealRegret { n },
        None => DesignObjective::AsymptoticLimit,
    };
    let scale = n.map_or(1.0, |n| n as f64);
    let m = manifest.m.unwrap_or(0);
    let cfg = OptimizerConfig {
        restarts: manifest.restarts.unwrap_or(16),
        seed: manifest.seed,
        parallel,
        ..OptimizerConfig::default()
    };
    let balanced = evaluate_design(scenario, &AllocationRule::balanced(scenario.n_arms()), objective)?;
    let constant = optimize_constant(scenario, objective, &cfg)?;
    let constant_rule = constant.rule.clone().expect("design result carries a rule");
    let constant_nu = match &constant_rule {
        AllocationRule::Constant { nu } => nu.clone(),
        _ => unreachable!("constant optimiser returns a constant rule"),
    };
    let best = if m == 0 {
        constant.clone()
    } else {
        let last = *constant_nu.last().expect("K >= 2");
        let logits: Vec<f64> = constant_nu[..constant_nu.len() - 1]
            .iter()
            .map(|&v| (v.max(1e-300) / last.max(1e-300)).ln())
            .collect();
        let warm = SoftmaxRule::balanced(scenario, 0)?.with_coeffs(logits)?;
        optimize_softmax(scenario, objective, m, &cfg, Some(&warm))?
    };
    let rule = best.rule.as_ref().expect("design result carries a rule");
    let report = OptimizeReport {
        objective: match objective {
            DesignObjective::IdealRegret { .. } => "ideal-regret".into(),
            DesignObjective::AsymptoticLimit => "asymptotic-limit".into(),
        },
        n,
        degree: m,
        balanced: balanced * scale,
        constant: constant.objective * scale,
        optimized: best.objective * scale,
        constant_reduction_pct: reduction(balanced, constant.objective),
        optimized_reduction_pct: reduction(balanced, best.objective),
        restarts: best.restart_count(),
        best_restart: best.best_restart,
        converged: best.converged,
        constant_nu,
    };
    let out = &manifest.out;
    write(out, "rule.toml", &RuleConfig::from_rule(rule).to_toml())?;
    write_toml(out, "report.toml", &report)?;
    write(out, "trace.csv", &trace_csv(&best.trace))?;
    if scenario.is_1d() {
        let (lo, hi) = scenario.covariate().support_1d();
        write(out, "pi_grid.csv", &pi_grid_csv(rule, lo, hi, manifest.grid_points))?;
    }
    Ok(format!(
        "balanced {:.6}\nconstant {:.6} ({:.2}% reduction)\noptimized {:.6} ({:.2}% reduction)",
        report.balanced, report.constant, report.constant_reduction_pct, report.optimized, report.optimized_reduction_pct
    ))
}

#[derive(Serialize)]
struct LowerBoundReport {
    bound: f64,
    uniform_floor: bool,
    nu: Vec<f64>,
    mu: Vec<f64>,
    tau_sq: Vec<f64>,
    residuals: Vec<f64>,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reconstruction: Option<ReconstructionReport>,
}

#[derive(Serialize)]
struct ReconstructionReport {
    valid: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_moment_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

fn lower_bound(manifest: &RunManifest, scenario: &Scenario64, parallel: bool) -> Result<String> {
    let cfg = OptimizerConfig {
        restarts: manifest.restarts.unwrap_or(16),
        seed: manifest.seed,
        parallel,
        ..OptimizerConfig::default()
    };
    let res = lower_bound_asymptotic(scenario, manifest.uniform_floor, &cfg)?;
    let profile = res.profile.as_ref().expect("lower bound carries a profile");
    let mut report = LowerBoundReport {
        bound: res.objective,
        uniform_floor: manifest.uniform_floor,
        nu: profile.nu.clone(),
        mu: profile.mu.clone(),
        tau_sq: profile.tau_sq.clone(),
        residuals: profile.residuals.to_vec(),
        converged: res.converged,
        reconstruction: None,
    };
    let out = &manifest.out;
    write(out, "trace.csv", &trace_csv(&res.trace))?;
    let mut failure = None;
    if manifest.reconstruct {
        match reconstruct_deterministic(profile, scenario) {
            Ok(rec) => {
                write(out, "rule.toml", &RuleConfig::from_rule(&rec.rule).to_toml())?;
                report.reconstruction = Some(ReconstructionReport {
                    valid: rec.valid,
                    max_moment_error: Some(rec.max_moment_error),
                    reason: None,
                });
            }
            Err(e @ DesignError::ReconstructionInapplicable(_)) => {
                report.reconstruction = Some(ReconstructionReport {
                    valid: false,
                    max_moment_error: None,
                    reason: Some(e.to_string()),
                });
                failure = Some(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    write_toml(out, "report.toml", &report)?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(format!("lower bound {:.6}", report.bound))
}

fn error_models(manifest: &RunManifest) -> Result<Vec<ErrorModel>> {
    match manifest.errors.as_deref().unwrap_or("normal") {
        "normal" => Ok(vec![ErrorModel::Normal]),
        "exponential" | "centered-exponential" => Ok(vec![ErrorModel::CenteredExponential]),
        "both" => Ok(vec![ErrorModel::Normal, ErrorModel::CenteredExponential]),
        other => Err(CliError::config(format!(
            "--errors: expected normal, exponential or both, got {other:?}"
        ))),
    }
}

fn simulate(manifest: &RunManifest, scenario: &Scenario64, parallel: bool) -> Result<String> {
    let designs: Vec<(String, AllocationRule<f64>)> = if manifest.nu1.is_empty() {
        vec![(manifest.rule_source.clone().unwrap_or_else(|| "balanced".into()), rule_of(manifest, scenario)?)]
    } else {
        if scenario.n_arms() != 2 {
            return Err(CliError::config("--nu1 sweeps need a two-arm scenario"));
        }
        manifest
            .nu1
            .iter()
            .map(|&v| Ok((v.to_string(), AllocationRule::constant(vec![v, 1.0 - v])?)))
            .collect::<std::result::Result<_, DesignError>>()?
    };
    let models = error_models(manifest)?;
    let mut rows = Vec::new();
    for n in finite_n(&manifest.n)? {
        for (label, rule) in &designs {
            let ideal = ideal_regret(scenario, rule, n).unwrap_or(f64::NAN);
            for &model in &models {
                let cfg = SimulationConfig {
                    reps: manifest.reps.unwrap_or(10_000),
                    seed: manifest.seed,
                    error_model: model,
                    parallel,
                };
                let res = estimate_regret(scenario, rule, n as usize, &cfg)?;
                rows.push(SimulationRow {
                    design: label.clone(),
                    errors: model.name().into(),
                    n: n as usize,
                    mean: res.mean,
                    ci: res.ci_half_width,
                    reps: res.reps,
                    starved: res.starved,
                    ideal,
                });
            }
        }
    }
    let csv = simulation_csv(&rows);
    write(&manifest.out, "simulation.csv", &csv)?;
    Ok(csv)
}

#[derive(Serialize)]
struct AsymptoticOut {
    limit: f64,
    formula: String,
    diagnostics: Vec<String>,
}

fn asymptotic(manifest: &RunManifest, scenario: &Scenario64) -> Result<String> {
    let out = &manifest.out;
    if let Some(p) = &manifest.profile {
        let limit = limit_from_profile(scenario, &p.nu, &p.mu, &p.tau_sq)?;
        write_toml(
            out,
            "report.toml",
            &AsymptoticOut {
                limit,
                formula: "profile".into(),
                diagnostics: Vec::new(),
            },
        )?;
        return Ok(format!("limit {limit:.6}"));
    }
    let rule = rule_of(manifest, scenario)?;
    let moments = allocdesign::arm_moments(&rule, scenario)?;
    let report = asymptotic_limit(scenario, &moments)?;
    #[derive(Serialize)]
    struct TermRow {
        theta: f64,
        left: usize,
        right: usize,
        v: f64,
        density: f64,
        slope_gap: f64,
        value: f64,
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &report.terms {
        w.serialize(TermRow {
            theta: t.theta.to_f64_lossy(),
            left: t.left + 1,
            right: t.right + 1,
            v: t.v,
            density: t.density,
            slope_gap: t.slope_gap,
            value: t.value,
        })
        .map_err(|e| CliError::config(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::config(e.to_string()))?;
    write(out, "crossings.csv", &String::from_utf8(bytes).expect("csv output is utf-8"))?;
    write_toml(
        out,
        "report.toml",
        &AsymptoticOut {
            limit: report.limit,
            formula: report.formula.tag().into(),
            diagnostics: report.diagnostics.clone(),
        },
    )?;
    Ok(format!("limit {:.6} ({})", report.limit, report.formula.tag()))
}
