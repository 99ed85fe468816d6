//! `allocdesign`: evaluate, optimise and simulate covariate-dependent
//! allocation designs.

mod error;
mod manifest;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use allocdesign::{presets, two_arm_optimal, RuleConfig, Scenario64, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::manifest::{Command, ProfileConfig, RunManifest};

#[derive(Parser)]
#[command(name = "allocdesign", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Scenario TOML file, or a bundled name: scenario_3_2, scenario_4_2,
    /// scenario_4_2_overlap, diets.
    #[arg(long)]
    scenario: String,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed for restarts and replications.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Use all cores. Results are identical to a serial run.
    #[arg(long)]
    parallel: bool,
    /// Points in emitted allocation grids.
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ideal regret of a rule at each n, plus the n → ∞ limit row.
    IdealRegret {
        #[command(flatten)]
        common: Common,
        /// Rule TOML file, `balanced`, or `optimal` (two-arm optimum).
        #[arg(long, default_value = "balanced")]
        rule: String,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<String>,
    },
    /// Optimise a softmax-polynomial rule (degree m; m = 0 gives a constant rule).
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Sample size, or `inf` to minimise the asymptotic limit.
        #[arg(long)]
        n: String,
        #[arg(long, default_value_t = 4)]
        m: usize,
        /// Random starts besides the all-zero start.
        #[arg(long, default_value_t = 16)]
        restarts: usize,
    },
    /// Lower bound on the asymptotic regret over all rules.
    LowerBound {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        /// Hold each arm's variance above the uniform-density floor.
        #[arg(long)]
        uniform_floor: bool,
        /// Also rebuild a deterministic rule from the bound's profile.
        #[arg(long)]
        reconstruct: bool,
    },
    /// Monte Carlo regret of a rule (or of a sweep of two-arm constant rules).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "balanced", conflicts_with = "nu1")]
        rule: String,
        /// Comma-separated ν₁ values for a two-arm constant-rule sweep.
        #[arg(long, value_delimiter = ',')]
        nu1: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "100")]
        n: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// normal, exponential or both.
        #[arg(long, default_value = "normal")]
        errors: String,
    },
    /// Asymptotic limit of n · ideal regret for a rule or a moment profile.
    Asymptotic {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "balanced", conflicts_with = "profile")]
        rule: String,
        /// TOML file with a `[profile]` table of `nu`, `mu`, `tau_sq`.
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Re-run a saved manifest.
    Replay {
        manifest: PathBuf,
        /// Write into this directory instead of the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        parallel: bool,
    },
}

fn load_scenario(source: &str) -> Result<ScenarioConfig, CliError> {
    if let Some(s) = presets::by_name::<f64>(source) {
        return Ok(ScenarioConfig::from_scenario(&s));
    }
    let path = Path::new(source);
    if !path.exists() {
        return Err(CliError::config(format!(
            "--scenario: {source:?} is neither a file nor one of {}",
            presets::NAMES.join(", ")
        )));
    }
    Ok(ScenarioConfig::load(path)?)
}

fn load_rule(source: &str, scenario: &Scenario64) -> Result<RuleConfig, CliError> {
    match source {
        "balanced" => Ok(RuleConfig {
            kind: "balanced".into(),
            ..RuleConfig::default()
        }),
        "optimal" => {
            if scenario.n_arms() != 2 {
                return Err(CliError::config("--rule optimal needs a two-arm scenario"));
            }
            let r = two_arm_optimal(scenario.arm(0).sigma, scenario.arm(1).sigma)?;
            Ok(RuleConfig::from_rule(&r))
        }
        path => Ok(RuleConfig::load(Path::new(path))?),
    }
}

fn base_manifest(command: Command, common: &Common) -> Result<RunManifest, CliError> {
    Ok(RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        command,
        scenario_source: common.scenario.clone(),
        rule_source: None,
        n: Vec::new(),
        m: None,
        restarts: None,
        reps: None,
        seed: common.seed,
        errors: None,
        nu1: Vec::new(),
        uniform_floor: false,
        reconstruct: false,
        grid_points: common.grid_points,
        out: common.out.clone(),
        scenario: load_scenario(&common.scenario)?,
        rule: None,
        profile: None,
    })
}

fn with_rule(mut m: RunManifest, rule: &str) -> Result<RunManifest, CliError> {
    let scenario: Scenario64 = m.scenario.build()?;
    m.rule = Some(load_rule(rule, &scenario)?);
    m.rule_source = Some(rule.to_string());
    Ok(m)
}

fn resolve(cmd: Cmd) -> Result<(RunManifest, bool), CliError> {
    Ok(match cmd {
        Cmd::IdealRegret { common, rule, n } => {
            let mut m = with_rule(base_manifest(Command::IdealRegret, &common)?, &rule)?;
            m.n = n;
            (m, common.parallel)
        }
        Cmd::Optimize { common, n, m: degree, restarts } => {
            let mut m = base_manifest(Command::Optimize, &common)?;
            m.n = vec![n];
            m.m = Some(degree);
            m.restarts = Some(restarts);
            (m, common.parallel)
        }
        Cmd::LowerBound {
            common,
            restarts,
            uniform_floor,
            reconstruct,
        } => {
            let mut m = base_manifest(Command::LowerBound, &common)?;
            m.restarts = Some(restarts);
            m.uniform_floor = uniform_floor;
            m.reconstruct = reconstruct;
            (m, common.parallel)
        }
        Cmd::Simulate {
            common,
            rule,
            nu1,
            n,
            reps,
            errors,
        } => {
            let mut m = base_manifest(Command::Simulate, &common)?;
            if nu1.is_empty() {
                m = with_rule(m, &rule)?;
            }
            m.nu1 = nu1;
            m.n = n;
            m.reps = Some(reps);
            m.errors = Some(errors);
            (m, common.parallel)
        }
        Cmd::Asymptotic { common, rule, profile } => {
            let mut m = base_manifest(Command::Asymptotic, &common)?;
            match profile {
                Some(p) => m.profile = Some(ProfileConfig::load(&p)?),
                None => m = with_rule(m, &rule)?,
            }
            (m, common.parallel)
        }
        Cmd::Replay { manifest, out, parallel } => {
            let mut m = RunManifest::load(&manifest)?;
            if let Some(o) = out {
                m.out = o;
            }
            (m, parallel)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(cli.command).and_then(|(m, parallel)| run::execute(&m, parallel));
    match result {
        Ok(summary) => {
            println!("{}", summary.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
