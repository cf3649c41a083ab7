//! Command line front end for the rescheduling study pipeline.
//!
//! Every subcommand is a pure function of (store, config, seed): artifacts
//! land in the store, progress goes to stdout as one JSON object per line,
//! and the exit code reports what happened (0 ok, 1 generation or solve
//! failure, 2 usage error).

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corescope::grid::{generate_infrastructure, render_svg, InfraParams, SpeedDistribution};
use corescope::grid::{Infrastructure, TrainId};
use corescope::pipeline::{
    analyze, expand_agenda, run_agenda, run_single, write_analysis, AgendaConfig, AnalysisOptions,
    Progress, RunError, Store,
};
use corescope::resched::malfunction_for_train;
use corescope::schedule::{generate_schedule, verify_conflict_free, Schedule};
use corescope::seeds::derive_seed;

const USAGE_EXIT: u8 = 2;
const FAILURE_EXIT: u8 = 1;

#[derive(Parser)]
#[command(name = "corescope", version, about = "Railway rescheduling scope-restriction study")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one infrastructure and store it under infra/{id}/.
    GenInfra(GenInfraArgs),
    /// Generate one schedule for a stored infrastructure.
    GenSchedule(GenScheduleArgs),
    /// Draw the malfunction for one train of a stored schedule.
    GenMalfunction(GenMalfunctionArgs),
    /// Run a single experiment of an agenda by composite id.
    RunExperiment(RunExperimentArgs),
    /// Run every experiment of an agenda over a worker pool.
    RunAgenda(RunAgendaArgs),
    /// Aggregate stored results into CSV tables and SVG charts.
    Analyze(AnalyzeArgs),
    /// Render a stored infrastructure to SVG.
    Render(RenderArgs),
    /// Check a schedule file for occupancy conflicts.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct StoreArg {
    /// Store root; falls back to $CORESCOPE_STORE, then ./store.
    #[arg(long)]
    store: Option<PathBuf>,
}

impl StoreArg {
    fn open(&self) -> Store {
        let root = self
            .store
            .clone()
            .or_else(|| std::env::var_os("CORESCOPE_STORE").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("store"));
        Store::new(root)
    }
}

#[derive(Args)]
struct GenInfraArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Agenda config supplying defaults for unset flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Index of the infrastructure inside the store.
    #[arg(long, default_value_t = 0)]
    infra_id: usize,
    /// Generator seed; defaults to the config's first flatland seed value.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    width: Option<u32>,
    #[arg(long)]
    height: Option<u32>,
    #[arg(long)]
    max_num_cities: Option<u32>,
    #[arg(long)]
    grid_mode: Option<bool>,
    #[arg(long)]
    max_rail_between_cities: Option<u32>,
    #[arg(long)]
    max_rail_in_city: Option<u32>,
    #[arg(long)]
    number_of_agents: Option<u32>,
    /// Speed class as steps_per_cell:fraction, repeatable.
    #[arg(long = "speed", value_parser = parse_speed)]
    speeds: Vec<(u32, f64)>,
}

#[derive(Args)]
struct GenScheduleArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    infra_id: usize,
    #[arg(long, default_value_t = 0)]
    schedule_id: usize,
    /// Generator seed; defaults to a value derived from the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Latest allowed arrival; defaults to twice the slowest solo run.
    #[arg(long)]
    horizon: Option<i64>,
}

#[derive(Args)]
struct GenMalfunctionArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    infra_id: usize,
    #[arg(long, default_value_t = 0)]
    schedule_id: usize,
    /// Train hit by the malfunction.
    #[arg(long)]
    malfunction_train_id: u32,
    /// First time step at which the halt may start.
    #[arg(long)]
    earliest_malfunction: Option<i64>,
    /// Halt length in time steps.
    #[arg(long)]
    malfunction_duration: Option<i64>,
}

#[derive(Args)]
struct RunExperimentArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Agenda config file.
    #[arg(long)]
    config: PathBuf,
    /// Composite experiment id, e.g. i0_s0_m3_r0.
    #[arg(long)]
    id: String,
}

#[derive(Args)]
struct RunAgendaArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Agenda config file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent experiments.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Agenda to analyze; may also be taken from --config.
    #[arg(long)]
    agenda_id: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of equidistant difficulty bins.
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Keep only instances whose unrestricted solve took at least this many seconds.
    #[arg(long)]
    min_time: Option<f64>,
    /// Keep only instances whose unrestricted solve took at most this many seconds.
    #[arg(long)]
    max_time: Option<f64>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    store: StoreArg,
    #[arg(long, default_value_t = 0)]
    infra_id: usize,
    /// Output file; defaults to infrastructure.svg next to the stored JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    store: StoreArg,
    /// Schedule JSON file to check.
    #[arg(long)]
    schedule: PathBuf,
    /// Infrastructure JSON file; defaults to the stored one the schedule names.
    #[arg(long)]
    infra: Option<PathBuf>,
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn usage(message: impl Display) -> Self {
        CliError {
            message: message.to_string(),
            code: USAGE_EXIT,
        }
    }

    fn failure(message: impl Display) -> Self {
        CliError {
            message: message.to_string(),
            code: FAILURE_EXIT,
        }
    }
}

fn parse_speed(raw: &str) -> Result<(u32, f64), String> {
    let (steps, fraction) = raw
        .split_once(':')
        .ok_or_else(|| format!("expected steps_per_cell:fraction, got `{raw}`"))?;
    let steps: u32 = steps
        .parse()
        .map_err(|e| format!("bad steps_per_cell in `{raw}`: {e}"))?;
    let fraction: f64 = fraction
        .parse()
        .map_err(|e| format!("bad fraction in `{raw}`: {e}"))?;
    Ok((steps, fraction))
}

fn emit(line: serde_json::Value) {
    println!("{line}");
}

fn progress_line(progress: Progress<'_>) {
    let line = match progress {
        Progress::InfraReady { infra_idx, cached } => serde_json::json!({
            "event": "infra-ready", "infra_id": infra_idx, "cached": cached,
        }),
        Progress::ScheduleReady {
            infra_idx,
            schedule_idx,
            cached,
        } => serde_json::json!({
            "event": "schedule-ready", "infra_id": infra_idx,
            "schedule_id": schedule_idx, "cached": cached,
        }),
        Progress::ExperimentFinished {
            composite_id,
            cached,
        } => serde_json::json!({
            "event": "experiment-finished", "composite_id": composite_id, "cached": cached,
        }),
    };
    emit(line);
}

fn load_config(path: &Path) -> Result<AgendaConfig, CliError> {
    let raw = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_slice(&raw)
        .map_err(|e| CliError::usage(format!("invalid config {}: {e}", path.display())))
}

fn config_or_default(path: &Option<PathBuf>) -> Result<AgendaConfig, CliError> {
    match path {
        Some(path) => load_config(path),
        None => Ok(AgendaConfig::desk_default()),
    }
}

fn first_value(range: &corescope::pipeline::ValueRange, what: &str) -> Result<i64, CliError> {
    let values = range
        .expand()
        .map_err(|e| CliError::usage(format!("config {what}: {e}")))?;
    Ok(values[0])
}

fn run_error(err: RunError) -> CliError {
    match err {
        RunError::UnknownExperiment { .. } => CliError::usage(err),
        other => CliError::failure(other),
    }
}

fn gen_infra(args: &GenInfraArgs) -> Result<(), CliError> {
    let config = config_or_default(&args.config)?;
    let params = InfraParams {
        width: args.width.unwrap_or(config.width),
        height: args.height.unwrap_or(config.height),
        max_num_cities: args
            .max_num_cities
            .map(Ok)
            .unwrap_or_else(|| first_value(&config.max_num_cities, "max_num_cities").map(|v| v as u32))?,
        grid_mode: args.grid_mode.unwrap_or(config.grid_mode),
        max_rails_between_cities: args
            .max_rail_between_cities
            .unwrap_or(config.max_rail_between_cities),
        max_rails_in_city: args.max_rail_in_city.unwrap_or(config.max_rail_in_city),
        num_agents: args
            .number_of_agents
            .map(Ok)
            .unwrap_or_else(|| first_value(&config.number_of_agents, "number_of_agents").map(|v| v as u32))?,
        speeds: if args.speeds.is_empty() {
            SpeedDistribution(config.speed_data.clone())
        } else {
            SpeedDistribution(args.speeds.clone())
        },
    };
    let seed = match args.seed {
        Some(seed) => seed,
        None => first_value(&config.flatland_seed_value, "flatland_seed_value")? as u64,
    };
    let mut infra =
        generate_infrastructure(&params, seed).map_err(CliError::failure)?;
    infra.infra_id = args.infra_id as u32;
    let store = args.store.open();
    let path = store.infra_path(args.infra_id);
    store.write_json(&path, &infra).map_err(CliError::failure)?;
    emit(serde_json::json!({
        "event": "infra-written", "infra_id": args.infra_id, "seed": seed,
        "cities": infra.cities.len(), "trains": infra.trains.len(),
        "path": path.display().to_string(),
    }));
    Ok(())
}

fn gen_schedule(args: &GenScheduleArgs) -> Result<(), CliError> {
    let config = config_or_default(&args.config)?;
    let store = args.store.open();
    let infra: Infrastructure = store
        .read_json(&store.infra_path(args.infra_id))
        .map_err(CliError::failure)?;
    let seed = args.seed.unwrap_or_else(|| {
        derive_seed(
            config.master_seed,
            &[7, args.infra_id as u64, args.schedule_id as u64],
        )
    });
    let mut schedule =
        generate_schedule(&infra, args.horizon, seed).map_err(CliError::failure)?;
    schedule.schedule_id = args.schedule_id as u32;
    let path = store.schedule_path(args.infra_id, args.schedule_id);
    store.write_json(&path, &schedule).map_err(CliError::failure)?;
    emit(serde_json::json!({
        "event": "schedule-written", "infra_id": args.infra_id,
        "schedule_id": args.schedule_id, "seed": seed,
        "trains": schedule.runs.len(), "horizon": schedule.horizon,
        "path": path.display().to_string(),
    }));
    Ok(())
}

fn gen_malfunction(args: &GenMalfunctionArgs) -> Result<(), CliError> {
    let config = config_or_default(&args.config)?;
    let store = args.store.open();
    let schedule: Schedule = store
        .read_json(&store.schedule_path(args.infra_id, args.schedule_id))
        .map_err(CliError::failure)?;
    let train = TrainId(args.malfunction_train_id);
    let earliest = args
        .earliest_malfunction
        .unwrap_or(config.earliest_malfunction);
    let duration = args
        .malfunction_duration
        .unwrap_or(config.malfunction_duration);
    let drawn = malfunction_for_train(&schedule, train, earliest, duration);
    let record = corescope::pipeline::MalfunctionRecord {
        version: corescope::pipeline::FORMAT_VERSION,
        infra_idx: args.infra_id,
        schedule_idx: args.schedule_id,
        train,
        earliest_malfunction: earliest,
        duration,
        malfunction: drawn.as_ref().ok().copied(),
        inapplicable_reason: drawn.as_ref().err().map(|e| e.to_string()),
    };
    let path = store.malfunction_path(args.infra_id, args.schedule_id, train);
    store.write_json(&path, &record).map_err(CliError::failure)?;
    emit(serde_json::json!({
        "event": "malfunction-written", "infra_id": args.infra_id,
        "schedule_id": args.schedule_id, "train": train.0,
        "applicable": record.malfunction.is_some(),
        "path": path.display().to_string(),
    }));
    Ok(())
}

fn run_experiment_cmd(args: &RunExperimentArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let agenda = expand_agenda(&config).map_err(CliError::usage)?;
    let store = args.store.open();
    let result = run_single(&agenda, &store, &args.id).map_err(run_error)?;
    emit(serde_json::json!({
        "event": "experiment-finished", "composite_id": result.composite_id,
        "applicable": result.malfunction.is_some(),
        "scopers": result.scopers.len(),
        "error": result.error,
    }));
    match result.error {
        Some(message) => Err(CliError::failure(message)),
        None => Ok(()),
    }
}

fn run_agenda_cmd(args: &RunAgendaArgs) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let agenda = expand_agenda(&config).map_err(CliError::usage)?;
    let store = args.store.open();
    let summary =
        run_agenda(&agenda, &store, args.workers, &progress_line).map_err(run_error)?;
    emit(serde_json::json!({
        "event": "agenda-finished", "agenda_id": config.agenda_id,
        "experiments": agenda.experiments.len(),
        "executed": summary.executed,
        "skipped_existing": summary.skipped_existing,
        "inapplicable": summary.inapplicable,
    }));
    Ok(())
}

fn analyze_cmd(args: &AnalyzeArgs) -> Result<(), CliError> {
    let agenda_id = match (&args.agenda_id, &args.config) {
        (Some(id), _) => id.clone(),
        (None, Some(path)) => load_config(path)?.agenda_id,
        (None, None) => {
            return Err(CliError::usage("pass --agenda-id or --config"));
        }
    };
    let time_range = match (args.min_time, args.max_time) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(f64::MAX))),
    };
    let options = AnalysisOptions {
        bins: args.bins,
        time_range,
    };
    let store = args.store.open();
    let report = analyze(&store, &agenda_id, &options).map_err(CliError::failure)?;
    for warning in &report.warnings {
        emit(serde_json::json!({"event": "warning", "message": warning}));
    }
    let written = write_analysis(&store, &report).map_err(CliError::failure)?;
    for path in &written {
        emit(serde_json::json!({
            "event": "analysis-written", "path": path.display().to_string(),
        }));
    }
    emit(serde_json::json!({
        "event": "analysis-finished", "agenda_id": agenda_id,
        "analyzed": report.analyzed, "bins": report.bins,
        "dominance_violations": report.dominance_violations.len(),
    }));
    Ok(())
}

fn render_cmd(args: &RenderArgs) -> Result<(), CliError> {
    let store = args.store.open();
    let infra_path = store.infra_path(args.infra_id);
    let infra: Infrastructure = store.read_json(&infra_path).map_err(CliError::failure)?;
    let svg = render_svg(&infra);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| infra_path.with_extension("svg"));
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::failure(format!("cannot create {}: {e}", parent.display())))?;
    }
    std::fs::write(&out, svg)
        .map_err(|e| CliError::failure(format!("cannot write {}: {e}", out.display())))?;
    emit(serde_json::json!({
        "event": "render-written", "infra_id": args.infra_id,
        "path": out.display().to_string(),
    }));
    Ok(())
}

fn verify_cmd(args: &VerifyArgs) -> Result<(), CliError> {
    let store = args.store.open();
    let schedule: Schedule = store.read_json(&args.schedule).map_err(CliError::failure)?;
    let infra_path = args
        .infra
        .clone()
        .unwrap_or_else(|| store.infra_path(schedule.infra_id as usize));
    let infra: Infrastructure = store.read_json(&infra_path).map_err(CliError::failure)?;
    let conflicts = verify_conflict_free(&schedule, &infra);
    for conflict in &conflicts {
        emit(serde_json::json!({
            "event": "conflict",
            "cell": conflict.cell,
            "first": conflict.first.0,
            "second": conflict.second.0,
            "overlap": conflict.overlap,
        }));
    }
    emit(serde_json::json!({
        "event": "verify-finished", "schedule": args.schedule.display().to_string(),
        "trains": schedule.runs.len(), "conflicts": conflicts.len(),
    }));
    if conflicts.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "{} occupancy conflicts",
            conflicts.len()
        )))
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenInfra(args) => gen_infra(args),
        Command::GenSchedule(args) => gen_schedule(args),
        Command::GenMalfunction(args) => gen_malfunction(args),
        Command::RunExperiment(args) => run_experiment_cmd(args),
        Command::RunAgenda(args) => run_agenda_cmd(args),
        Command::Analyze(args) => analyze_cmd(args),
        Command::Render(args) => render_cmd(args),
        Command::Verify(args) => verify_cmd(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
