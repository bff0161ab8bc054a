//! Command-line front end. `run_cli` returns the process exit code:
//! 0 on success, 1 for invalid input, 2 when the solver fails and 64 for
//! usage errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::dataio::{
    self, load_dataset, load_plan, metrics_json, prepare_request, run_scenario, save_results,
    RobustSettings, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::evaluation::{compute_census, compute_metrics_with, MetricsReport, TransferPlan};
use crate::model::{build_model, ObjectiveKind, Preset};
use crate::service::{self, ServiceConfig};
use crate::solver::write_lp;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser)]
#[command(name = "surgeflow", version, about = "Patient and resource redistribution for facility networks under surge load")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reconstruct admissions from the census and write them as CSV.
    Estimate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Build and solve a scenario, then write the result bundle.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score an existing transfer plan.
    Evaluate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long, default_value = "evaluation")]
        out: PathBuf,
    },
    /// Start the HTTP service.
    Serve {
        /// Defaults to SURGEFLOW_PORT, then 8080.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "surgeflow-data")]
        data_dir: PathBuf,
        /// Solves allowed to run at once.
        #[arg(long, default_value_t = 2)]
        workers: usize,
    },
    /// Write the model in LP text format.
    ExportLp {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    MinOverflow,
    LoadBalance,
    Combined,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    Base,
    Operational,
}

/// Scenario file and the flags that override it.
#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveArg>,
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Robust budget; enables the robust model.
    #[arg(long)]
    gamma: Option<f64>,
    /// Restrict transfers to whole patients.
    #[arg(long)]
    integer: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self) -> Result<(ScenarioConfig, PathBuf)> {
        let (mut cfg, base) = ScenarioConfig::load(&self.scenario)?;
        if let Some(o) = self.objective {
            cfg.objective = match (o, cfg.objective) {
                (ObjectiveArg::MinOverflow, _) => ObjectiveKind::MinOverflow,
                (ObjectiveArg::LoadBalance, _) => ObjectiveKind::LoadBalance,
                (ObjectiveArg::Combined, keep @ ObjectiveKind::Combined { .. }) => keep,
                (ObjectiveArg::Combined, _) => ObjectiveKind::Combined { patient: 1.0, nurse: 1.0 },
            };
            if matches!(cfg.objective, ObjectiveKind::Combined { .. }) {
                cfg.include_resources = true;
            }
        }
        if let Some(p) = self.preset {
            cfg.preset = Some(match p {
                PresetArg::Base => Preset::Base,
                PresetArg::Operational => Preset::Operational,
            });
            cfg.options = None;
        }
        if self.integer {
            let mut opts = cfg.operational_options();
            opts.integer_transfers = true;
            cfg.options = Some(opts);
        }
        if let Some(gamma) = self.gamma {
            let fraction = cfg.robust.as_ref().and_then(|r| r.deviation_fraction);
            cfg.robust = Some(RobustSettings { gamma, deviation_fraction: fraction });
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.check()?;
        Ok((cfg, base))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) => EXIT_SOLVER,
        _ => EXIT_INPUT,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate { scenario, out } => estimate(&scenario, &out),
        Command::Solve { scenario, out } => solve(&scenario, &out),
        Command::Evaluate { scenario, plan, out } => evaluate(&scenario, &plan, &out),
        Command::ExportLp { scenario, out } => export_lp(&scenario, &out),
        Command::Serve { port, data_dir, workers } => {
            let port = match port {
                Some(p) => p,
                None => std::env::var("SURGEFLOW_PORT")
                    .ok()
                    .map(|v| {
                        v.parse::<u16>()
                            .map_err(|_| Error::invalid(format!("SURGEFLOW_PORT `{v}` is not a port number")))
                    })
                    .transpose()?
                    .unwrap_or(8080),
            };
            let config = ServiceConfig {
                data_dir,
                workers,
                ..ServiceConfig::default()
            };
            service::serve(config, port)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn estimate(args: &ScenarioArgs, out: &Path) -> Result<()> {
    let (cfg, base) = args.load()?;
    let mut paths = cfg.dataset.resolve(&base)?;
    if paths.census.is_none() {
        return Err(Error::invalid("estimation needs a `census.csv` in the dataset"));
    }
    paths.admissions = None;
    info!("estimating admissions with {} iterations", cfg.estimation.iterations);
    let loaded = load_dataset(&paths, &cfg)?;
    let inst = &loaded.instance;
    let mut rows: Vec<(String, NaiveDate, String, f64)> = Vec::new();
    for (i, loc) in inst.system.locations.iter().enumerate() {
        for t in 0..inst.horizon {
            let date = inst
                .date_of(t)
                .ok_or_else(|| Error::invalid("instance has no `start_date`"))?;
            rows.push((loc.id.clone(), date, inst.groups[0].id.clone(), inst.admissions.get(0, i, t)));
        }
    }
    ensure_dir(out)?;
    let path = out.join("estimated_admissions.csv");
    dataio::write_rows(&path, &["location_id", "date", "group", "admissions"], &rows)?;
    let report = out.join("estimation.json");
    let mut text = serde_json::to_string_pretty(&loaded.estimation)?;
    text.push('\n');
    std::fs::write(&report, text).map_err(|e| Error::io(&report, e))?;

    let mut table = format!("{:<16} {:>12} {:>10} {:>10}\n", "location", "residual", "relative", "corrected");
    for r in &loaded.estimation {
        table.push_str(&format!(
            "{:<16} {:>12.3} {:>9.2}% {:>10}\n",
            r.location_id,
            r.residual,
            100.0 * r.relative_residual,
            r.corrected_days
        ));
    }
    say(&table);
    say(&format!("wrote {}\n", path.display()));
    Ok(())
}

fn solve(args: &ScenarioArgs, out: &Path) -> Result<()> {
    let (cfg, base) = args.load()?;
    let run = run_scenario(&cfg, &base)?;
    let inst = &run.request.instance;
    info!(
        "solved {} variables, {} rows: {} objective {}",
        run.built.model.num_vars(),
        run.built.model.num_constraints(),
        run.outcome.solution.status,
        run.outcome.solution.objective
    );
    let sol = &run.outcome.solution;
    if !sol.is_optimal() {
        eprintln!(
            "warning: solver stopped early ({}); objective {:.6}, bound {:.6}",
            sol.status, sol.objective, sol.stats.best_bound
        );
    }
    let baseline = compute_metrics_with(inst, &TransferPlan::empty(), &cfg.metrics)?;
    save_results(out, inst, &run.built.model, &run.outcome)?;
    say(&metrics_table(&baseline, &run.outcome.metrics));
    say(&format!("wrote {}\n", out.display()));
    Ok(())
}

fn evaluate(args: &ScenarioArgs, plan_path: &Path, out: &Path) -> Result<()> {
    let (cfg, base) = args.load()?;
    let inst = dataio::load_scenario(&cfg, &base)?.instance;
    let plan = load_plan(plan_path, &inst)?;
    let metrics = compute_metrics_with(&inst, &plan, &cfg.metrics)?;
    let baseline = compute_metrics_with(&inst, &TransferPlan::empty(), &cfg.metrics)?;
    ensure_dir(out)?;
    let path = out.join("metrics.json");
    std::fs::write(&path, metrics_json(&metrics)?).map_err(|e| Error::io(&path, e))?;
    let census = compute_census(&inst, &plan)?;
    dataio::write_rows(
        &out.join("census.csv"),
        &dataio::CENSUS_HEADER,
        &dataio::census_records(&inst, &census)?,
    )?;
    say(&metrics_table(&baseline, &metrics));
    say(&format!("wrote {}\n", path.display()));
    Ok(())
}

fn export_lp(args: &ScenarioArgs, out: &Path) -> Result<()> {
    let (cfg, base) = args.load()?;
    let (req, _) = prepare_request(&cfg, &base)?;
    let built = build_model(&req)?;
    ensure_dir(out)?;
    let path = out.join("model.lp");
    std::fs::write(&path, write_lp(&built.model)).map_err(|e| Error::io(&path, e))?;
    say(&format!("wrote {}\n", path.display()));
    Ok(())
}

// adding zero folds -0.0 into 0.0
fn pct(v: f64) -> String {
    format!("{:.2}%", 100.0 * v + 0.0)
}

fn num(v: f64) -> String {
    format!("{:.2}", v + 0.0)
}

/// Prints to stdout, ignoring a closed pipe.
fn say(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Baseline and plan side by side, one row per evaluation metric.
pub fn metrics_table(baseline: &MetricsReport, plan: &MetricsReport) -> String {
    let rows: Vec<(&str, fn(&MetricsReport) -> String)> = vec![
        ("Overflow", |m| num(m.total_overflow)),
        ("Overflow Reduction", |m| pct(m.overflow_reduction)),
        ("Median Non-Zero Overflow", |m| num(m.median_nonzero_overflow)),
        ("Mean Non-Zero Overflow", |m| num(m.mean_nonzero_overflow)),
        ("Max Non-Zero Overflow", |m| num(m.max_nonzero_overflow)),
        ("Median Load", |m| pct(m.median_load)),
        ("Mean Load", |m| pct(m.mean_load)),
        ("Max Load", |m| pct(m.max_load)),
        ("Percent Of Location-Days With An Overflow", |m| pct(m.percent_node_days_overflow)),
        ("Total Patients Transferred", |m| num(m.total_transferred)),
        ("Percent Of Patients Transferred", |m| pct(m.percent_patients_transferred)),
        ("Median Non-Zero Transfer", |m| num(m.median_nonzero_transfer)),
        ("Mean Non-Zero Transfer", |m| num(m.mean_nonzero_transfer)),
        ("Max Non-Zero Transfer", |m| num(m.max_nonzero_transfer)),
        ("Percent Of Location-Days With A Transfer", |m| pct(m.percent_node_days_transfer)),
    ];
    let mut s = format!("{:<44} {:>14} {:>14}\n", "", "No Transfers", "Plan");
    for (label, f) in rows {
        s.push_str(&format!("{:<44} {:>14} {:>14}\n", label, f(baseline), f(plan)));
    }
    if let (Some(b), Some(p)) = (&baseline.resources, &plan.resources) {
        s.push_str(&format!("{:<44} {:>14} {:>14}\n", "Shortage", num(b.total_shortage), num(p.total_shortage)));
        s.push_str(&format!(
            "{:<44} {:>14} {:>14}\n",
            "Shortage Reduction",
            pct(b.shortage_reduction),
            pct(p.shortage_reduction)
        ));
        s.push_str(&format!(
            "{:<44} {:>14} {:>14}\n",
            "Resources Transferred",
            num(b.total_transferred),
            num(p.total_transferred)
        ));
    }
    s
}
