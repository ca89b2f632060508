//! `riskopt` — config-driven experiment runner.
//!
//! Verbs: `solve` (build model, check assumptions, solve, write
//! solution.json), `probe` (solve then trace the solvency-gap curve and
//! verdict, writing solution.json + gap_curve.csv + report.json), `compare`
//! (two probes on the same instance side by side), and `check-assumptions`.
//!
//! Exit codes: 0 success, 2 validation error, 3 assumption error,
//! 4 numeric failure.

// `!(x > 0.0)` style guards intentionally reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use config::ExperimentConfig;
use riskopt_core::dro::solve_dro_var_bd;
use riskopt_core::es_opt::{es_cm_witness, solve_es_bd, solve_es_cm, solve_es_ns};
use riskopt_core::probe::{probe, ProbeSettings, RobustnessReport};
use riskopt_core::var_opt::{solve_var_bd, solve_var_ns, var_cm_witness_sequence};
use riskopt_core::{
    ConstraintKind, Error as CoreError, MarketModel, RiskMeasure, SolutionFunction,
};
use serde_json::json;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum AppError {
    Config(String),
    Core(CoreError),
    Io(std::io::Error),
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(msg) => write!(f, "{msg}"),
            AppError::Core(e) => write!(f, "{e}"),
            AppError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Io(e)
    }
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Core(CoreError::Domain(_)) => 2,
            AppError::Core(CoreError::Assumption { .. }) => 3,
            AppError::Core(CoreError::Nonexistence(_)) => 3,
            AppError::Core(CoreError::Numeric(_)) => 4,
            AppError::Io(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(name = "riskopt", about = "Risk-measure optimization and robustness probing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config sample count.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write solution.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve, then trace the solvency-gap curve and write all reports.
    Probe {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Probe two configs sharing the same instance and print a side-by-side
    /// table.
    Compare {
        #[arg(long)]
        config_a: PathBuf,
        #[arg(long)]
        config_b: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the per-assumption diagnostics for the configured model.
    CheckAssumptions {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn dispatch(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Solve { config, common } => {
            let cfg = load_with_overrides(&config, &common)?;
            let solved = solve_configured(&cfg)?;
            std::fs::create_dir_all(&common.out_dir)?;
            let path = common.out_dir.join(&cfg.output.solution);
            report::write_pretty_json(&path, &solved.record)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Probe { config, common } => {
            let cfg = load_with_overrides(&config, &common)?;
            let (solved, rep) = probe_configured(&cfg)?;
            std::fs::create_dir_all(&common.out_dir)?;
            write_probe_outputs(&common.out_dir, &cfg, &solved, &rep)?;
            println!(
                "verdict: {:?} (limit gap {})",
                rep.verdict,
                report::sig17(rep.limit_gap_estimate)
            );
            Ok(())
        }
        Command::Compare { config_a, config_b, common } => {
            let cfg_a = load_with_overrides(&config_a, &common)?;
            let cfg_b = load_with_overrides(&config_b, &common)?;
            if !cfg_a.shares_instance_with(&cfg_b) {
                return Err(AppError::Config(
                    "compare requires identical model/problem/perturb blocks".to_string(),
                ));
            }
            // Identical objectives are allowed and simply produce two
            // identical columns.
            let (solved_a, rep_a) = probe_configured(&cfg_a)?;
            let (solved_b, rep_b) = probe_configured(&cfg_b)?;
            std::fs::create_dir_all(common.out_dir.join("a"))?;
            std::fs::create_dir_all(common.out_dir.join("b"))?;
            write_probe_outputs(&common.out_dir.join("a"), &cfg_a, &solved_a, &rep_a)?;
            write_probe_outputs(&common.out_dir.join("b"), &cfg_b, &solved_b, &rep_b)?;
            let table = report::comparison_table(&cfg_a.rho, &cfg_b.rho, &rep_a, &rep_b);
            std::fs::write(common.out_dir.join("compare.txt"), &table)?;
            print!("{table}");
            Ok(())
        }
        Command::CheckAssumptions { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let model = cfg.build_model()?;
            warn_rescale(&model);
            let assumptions = model.check_assumptions(cfg.problem.p).map_err(AppError::Core)?;
            let value = json!({
                "model": {
                    "x": report::to_clean_value(model.x()),
                    "gamma": report::to_clean_value(&model.gamma().describe()),
                },
                "p": cfg.problem.p,
                "assumptions": report::to_clean_value(&assumptions),
            });
            println!("{}", serde_json::to_string_pretty(&value).expect("json"));
            Ok(())
        }
    }
}

fn load_with_overrides(path: &Path, common: &CommonArgs) -> Result<ExperimentConfig, AppError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = common.samples {
        cfg.n_samples = samples;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn warn_rescale(model: &MarketModel) {
    if let Some(w) = model.rescale_warning() {
        eprintln!("warning: {w}");
    }
}

/// Everything `solve` produces: the record written to solution.json plus the
/// position to probe (absent when the problem has no optimizer).
struct Solved {
    record: serde_json::Value,
    solution: Option<SolutionFunction>,
}

fn problem_echo(cfg: &ExperimentConfig) -> serde_json::Value {
    json!({
        "constraint": cfg.problem.constraint,
        "rho": cfg.rho,
        "p": cfg.problem.p,
        "x0": cfg.problem.x0,
        "m": cfg.problem.m,
        "epsilon": cfg.problem.epsilon,
    })
}

fn solve_configured(cfg: &ExperimentConfig) -> Result<Solved, AppError> {
    let model = cfg.build_model()?;
    warn_rescale(&model);
    let assumptions = model.check_assumptions(cfg.problem.p).map_err(AppError::Core)?;
    let rho = cfg.rho_measure()?;
    let echo = problem_echo(cfg);

    if let Some(dro) = cfg.build_dro()? {
        let g = solve_dro_var_bd(&model, &dro).map_err(AppError::Core)?;
        let record =
            report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
        return Ok(Solved { record, solution: Some(g) });
    }

    let spec = cfg.build_problem()?;
    match (rho, spec.constraint) {
        (RiskMeasure::Var, ConstraintKind::CompleteMarket) => {
            // Unbounded below: report the certificate instead of a solution.
            let levels = cfg
                .problem
                .witness_levels
                .clone()
                .unwrap_or_else(|| vec![-1.0, -10.0, -100.0]);
            let w = var_cm_witness_sequence(&model, &spec, &levels).map_err(AppError::Core)?;
            let record = report::solution_record(
                echo,
                &model,
                &assumptions,
                None,
                Some(&w),
                "unbounded_below",
            );
            Ok(Solved { record, solution: None })
        }
        (RiskMeasure::Var, ConstraintKind::NoShortSelling) => {
            let g = solve_var_ns(&model, &spec).map_err(AppError::Core)?;
            let record =
                report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
            Ok(Solved { record, solution: Some(g) })
        }
        (RiskMeasure::Var, ConstraintKind::Bounded) => {
            let g = solve_var_bd(&model, &spec).map_err(AppError::Core)?;
            let record =
                report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
            Ok(Solved { record, solution: Some(g) })
        }
        (RiskMeasure::Es, ConstraintKind::CompleteMarket) => match solve_es_cm(&model, &spec) {
            Ok(g) => {
                let record =
                    report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
                Ok(Solved { record, solution: Some(g) })
            }
            Err(CoreError::Nonexistence(msg)) => {
                // Emit the certificate on stderr before failing with the
                // assumption exit code.
                let weights = cfg
                    .problem
                    .witness_weights
                    .clone()
                    .unwrap_or_else(|| vec![0.0, 1.0, 10.0, 100.0]);
                if let Ok(w) = es_cm_witness(&model, &spec, &weights) {
                    eprintln!("{}", w.description);
                    for e in &w.elements {
                        eprintln!(
                            "  weight {} -> objective {}",
                            report::sig17(e.param),
                            report::sig17(e.objective)
                        );
                    }
                }
                Err(AppError::Core(CoreError::Nonexistence(msg)))
            }
            Err(e) => Err(AppError::Core(e)),
        },
        (RiskMeasure::Es, ConstraintKind::NoShortSelling) => {
            let g = solve_es_ns(&model, &spec).map_err(AppError::Core)?;
            let record =
                report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
            Ok(Solved { record, solution: Some(g) })
        }
        (RiskMeasure::Es, ConstraintKind::Bounded) => {
            let g = solve_es_bd(&model, &spec).map_err(AppError::Core)?;
            let record =
                report::solution_record(echo, &model, &assumptions, Some(&g), None, "solved");
            Ok(Solved { record, solution: Some(g) })
        }
    }
}

fn probe_configured(cfg: &ExperimentConfig) -> Result<(Solved, RobustnessReport), AppError> {
    let solved = solve_configured(cfg)?;
    let g = solved.solution.as_ref().ok_or_else(|| {
        AppError::Core(CoreError::Nonexistence(
            "the configured problem has no optimizer to probe".to_string(),
        ))
    })?;
    let model = cfg.build_model()?;
    let family = cfg.build_family(&model)?;
    let settings = ProbeSettings {
        metric: cfg.metric_kind()?,
        eps_grid: cfg.perturb.eps_grid.clone(),
        n_samples: cfg.n_samples,
        seed: cfg.seed,
    };
    let rho = cfg.rho_measure()?;
    let p = cfg.risk_level()?;
    // Re-solver for the optimality contrast (used when the perturbed law
    // stays in closed form).
    let cfg2 = cfg.clone();
    let resolver = move |zm: &MarketModel| -> riskopt_core::Result<SolutionFunction> {
        let spec = cfg2.build_problem().map_err(|e| CoreError::Domain(e.to_string()))?;
        match (cfg2.rho.as_str(), spec.constraint) {
            ("var", ConstraintKind::NoShortSelling) => solve_var_ns(zm, &spec),
            ("var", ConstraintKind::Bounded) => solve_var_bd(zm, &spec),
            ("es", ConstraintKind::NoShortSelling) => solve_es_ns(zm, &spec),
            ("es", ConstraintKind::Bounded) => solve_es_bd(zm, &spec),
            ("es", ConstraintKind::CompleteMarket) => solve_es_cm(zm, &spec),
            _ => Err(CoreError::Domain("no re-solver for this problem".to_string())),
        }
    };
    let rep = probe(&model, g, rho, p, &family, &settings, Some(&resolver))
        .map_err(AppError::Core)?;
    Ok((solved, rep))
}

fn write_probe_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    solved: &Solved,
    rep: &RobustnessReport,
) -> Result<(), AppError> {
    std::fs::create_dir_all(dir)?;
    report::write_pretty_json(&dir.join(&cfg.output.solution), &solved.record)?;
    report::write_gap_curve(&dir.join(&cfg.output.gap_curve), rep)?;
    report::write_pretty_json(&dir.join(&cfg.output.report), &report::report_record(rep))?;
    Ok(())
}
