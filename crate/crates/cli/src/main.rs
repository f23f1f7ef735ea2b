//! Command-line front end: instance generation, plan/replan runs, roster
//! validation, and paired-seed benchmark batches.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation failure, 3 solver
//! failure.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use metrocrew::heuristics::{lgh, lgh_r, sph};
use metrocrew::model::{
    generate_crew, parse_instance, perturb_timetable, CrewSpec, Instance, InstanceFile,
};
use metrocrew::planner::{plan, PlanResult};
use metrocrew::replanner::{apply_disruption, replan, DisruptionScenario, ReplanOutcome};
use metrocrew::roster::Roster;
use metrocrew::validate::{validate_roster, Mode, ValidationReport};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "metrocrew", version, about = "Multi-line metro crew planner")]
struct Cli {
    /// Base random seed for generation and benchmark repetitions.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for benchmark batches.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Log filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    /// Omit wall times from outputs so reruns are byte-identical.
    #[arg(long, global = true)]
    redact_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a full instance file from a generator spec.
    Gen(GenArgs),
    /// Build a roster for an instance.
    Plan(PlanArgs),
    /// Rebuild a roster after a disruption.
    Replan(ReplanArgs),
    /// Check a roster against the operational rules.
    Validate(ValidateArgs),
    /// Run a paired-seed benchmark batch and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Instance spec; tasks and crew may be left to the generator.
    #[arg(long)]
    spec: PathBuf,
    /// Jitter task times by the global seed after generation.
    #[arg(long)]
    perturb: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlanAlgo {
    Tscg,
    Sph,
    Lgh,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = PlanAlgo::Tscg)]
    algo: PlanAlgo,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReplanAlgo {
    Fpah,
    FpahN,
    LghR,
}

#[derive(Args)]
struct ReplanArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Roster in force when the disruption hits.
    #[arg(long)]
    roster: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = ReplanAlgo::Fpah)]
    algo: ReplanAlgo,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    roster: PathBuf,
    /// Validate as a replanned roster for this scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Pre-disruption roster; required with --scenario.
    #[arg(long, requires = "scenario")]
    original: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

fn usage<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Usage(format!("{context}: {e}"))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(usage(&path.display().to_string()))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(usage(&path.display().to_string())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_instance_file(path: &Path) -> Result<Instance, CliError> {
    parse_instance(&read_file(path)?).map_err(usage(&path.display().to_string()))
}

fn load_roster(path: &Path) -> Result<Roster, CliError> {
    Roster::from_json(&read_file(path)?).map_err(usage(&path.display().to_string()))
}

fn load_scenario(path: &Path) -> Result<DisruptionScenario, CliError> {
    serde_json::from_str(&read_file(path)?).map_err(usage(&path.display().to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            let benign = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if benign {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_USAGE)
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Gen(args) => cmd_gen(cli, args),
        Command::Plan(args) => cmd_plan(cli, args),
        Command::Replan(args) => cmd_replan(cli, args),
        Command::Validate(args) => cmd_validate(cli, args),
        Command::Bench(args) => cmd_bench(cli, args),
    }
}

fn cmd_gen(cli: &Cli, args: &GenArgs) -> Result<(), CliError> {
    let mut instance = load_instance_file(&args.spec)?;
    if args.perturb {
        instance.tasks = perturb_timetable(&instance.tasks, instance.horizon, cli.seed);
    }
    if instance.crew.is_empty() {
        return Err(CliError::Usage(
            "spec has no crew; give explicit members or a generate block".into(),
        ));
    }
    let file = InstanceFile::from_instance(&instance);
    let text = serde_json::to_string_pretty(&file).expect("instance serialization");
    write_output(cli.out.as_deref(), &text)
}

/// Roster plus a metrics block, the output schema of `plan` and `replan`.
#[derive(Serialize)]
struct RunOutput<M: Serialize> {
    algorithm: String,
    metrics: M,
    roster: serde_json::Value,
}

fn emit_run<M: Serialize>(
    cli: &Cli,
    algorithm: &str,
    metrics: M,
    roster: &Roster,
    instance: &Instance,
) -> Result<(), CliError> {
    let output = RunOutput {
        algorithm: algorithm.to_string(),
        metrics,
        roster: serde_json::from_str(&roster.to_json(instance)).expect("roster json"),
    };
    let text = serde_json::to_string_pretty(&output).expect("output serialization");
    write_output(cli.out.as_deref(), &text)
}

fn run_plan(instance: &Instance, algo: PlanAlgo) -> Result<PlanResult, CliError> {
    let result = match algo {
        PlanAlgo::Tscg => plan(instance).map_err(|e| CliError::Solver(e.to_string()))?,
        PlanAlgo::Sph => sph(instance).map_err(|e| CliError::Solver(e.to_string()))?,
        PlanAlgo::Lgh => lgh(instance),
    };
    Ok(result)
}

fn cmd_plan(cli: &Cli, args: &PlanArgs) -> Result<(), CliError> {
    let instance = load_instance_file(&args.instance)?;
    let mut result = run_plan(&instance, args.algo)?;
    if cli.redact_timing {
        result.metrics.wall_time_s = 0.0;
    }
    let name = args
        .algo
        .to_possible_value()
        .expect("named variant")
        .get_name()
        .to_string();
    emit_run(cli, &name, result.metrics, &result.roster, &instance)
}

fn run_replan(
    instance: &Instance,
    original: &Roster,
    scenario: &DisruptionScenario,
    algo: ReplanAlgo,
) -> Result<ReplanOutcome, CliError> {
    let outcome = match algo {
        ReplanAlgo::Fpah => replan(instance, original, scenario, true),
        ReplanAlgo::FpahN => replan(instance, original, scenario, false),
        ReplanAlgo::LghR => lgh_r(instance, original, scenario),
    };
    outcome.map_err(|e| CliError::Solver(e.to_string()))
}

fn cmd_replan(cli: &Cli, args: &ReplanArgs) -> Result<(), CliError> {
    let instance = load_instance_file(&args.instance)?;
    let original = load_roster(&args.roster)?;
    let scenario = load_scenario(&args.scenario)?;
    let mut outcome = run_replan(&instance, &original, &scenario, args.algo)?;
    if cli.redact_timing {
        outcome.metrics.wall_time_s = 0.0;
    }
    let name = args
        .algo
        .to_possible_value()
        .expect("named variant")
        .get_name()
        .to_string();
    emit_run(cli, &name, outcome.metrics, &outcome.roster, &outcome.instance)
}

fn cmd_validate(cli: &Cli, args: &ValidateArgs) -> Result<(), CliError> {
    let instance = load_instance_file(&args.instance)?;
    let roster = load_roster(&args.roster)?;
    let report: ValidationReport = match &args.scenario {
        None => validate_roster(&instance, &roster, Mode::Plan),
        Some(scenario_path) => {
            let scenario = load_scenario(scenario_path)?;
            let original_path = args
                .original
                .as_ref()
                .ok_or_else(|| CliError::Usage("--scenario requires --original".into()))?;
            let original = load_roster(original_path)?;
            let (rinst, demands, _) = apply_disruption(&instance, &scenario)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            validate_roster(
                &rinst,
                &roster,
                Mode::Replan {
                    day: scenario.day,
                    t_bar: scenario.t_bar,
                    original: &original,
                    demands: &demands,
                },
            )
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("report serialization");
    write_output(cli.out.as_deref(), &text)?;
    if report.is_feasible() {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{} rule violations",
            report.violations.len()
        )))
    }
}

/// Benchmark batch description.
#[derive(Deserialize)]
struct BenchConfig {
    /// Instance spec file, resolved relative to the config file.
    instance: String,
    /// Any of tscg, sph, lgh, fpah, fpah-n, lgh-r. Replanning algorithms
    /// require `scenario`; their originals are planned with tscg.
    algorithms: Vec<String>,
    repetitions: u32,
    #[serde(default)]
    scenario: Option<DisruptionScenario>,
    /// Jitter task times per repetition seed.
    #[serde(default = "default_true")]
    perturb: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone)]
struct BenchRow {
    algorithm: String,
    seed: u64,
    status: String,
    obj: Option<f64>,
    cvg: Option<f64>,
    cvg_u: Option<f64>,
    wall_s: Option<f64>,
}

fn err_status(msg: impl std::fmt::Display) -> String {
    format!("error: {msg}").replace(',', ";")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn bench_instance_for_seed(file: &InstanceFile, perturb: bool, seed: u64) -> Result<Instance, CliError> {
    let mut instance = Instance {
        days: file.days,
        horizon: file.horizon,
        params: file.params.clone(),
        lines: file.lines.clone(),
        transfers: file.transfers.clone(),
        tasks: Vec::new(),
        crew: Vec::new(),
    };
    instance.tasks = match &file.tasks {
        Some(tasks) => tasks.clone(),
        None => {
            let mut tasks = Vec::new();
            for day in 0..instance.days {
                for line in &instance.lines {
                    tasks.extend(metrocrew::model::generate_tasks(line, day, &instance.params));
                }
            }
            tasks
        }
    };
    if perturb {
        instance.tasks = perturb_timetable(&instance.tasks, instance.horizon, seed);
    }
    instance.crew = match &file.crew {
        Some(CrewSpec::Explicit(crew)) => crew.clone(),
        Some(CrewSpec::Generate { n_r, seed: s }) => generate_crew(
            *n_r,
            &instance,
            s.wrapping_add(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        ),
        None => Vec::new(),
    };
    instance
        .validate()
        .map_err(|e| CliError::Usage(format!("benchmark instance: {e}")))?;
    Ok(instance)
}

fn bench_repetition(
    file: &InstanceFile,
    config: &BenchConfig,
    seed: u64,
) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    let fail_all = |rows: &mut Vec<BenchRow>, msg: &str| {
        for algo in &config.algorithms {
            rows.push(BenchRow {
                algorithm: algo.clone(),
                seed,
                status: err_status(msg),
                obj: None,
                cvg: None,
                cvg_u: None,
                wall_s: None,
            });
        }
    };
    let instance = match bench_instance_for_seed(file, config.perturb, seed) {
        Ok(i) => i,
        Err(e) => {
            fail_all(&mut rows, &e.to_string());
            return rows;
        }
    };
    let wants_replan = config
        .algorithms
        .iter()
        .any(|a| matches!(a.as_str(), "fpah" | "fpah-n" | "lgh-r"));
    let original: Option<Roster> = if wants_replan {
        match plan(&instance) {
            Ok(r) => Some(r.roster),
            Err(e) => {
                fail_all(&mut rows, &format!("original plan: {e}"));
                return rows;
            }
        }
    } else {
        None
    };
    for algo in &config.algorithms {
        let row = match algo.as_str() {
            "tscg" | "sph" | "lgh" => {
                let which = match algo.as_str() {
                    "tscg" => PlanAlgo::Tscg,
                    "sph" => PlanAlgo::Sph,
                    _ => PlanAlgo::Lgh,
                };
                match run_plan(&instance, which) {
                    Ok(r) => BenchRow {
                        algorithm: algo.clone(),
                        seed,
                        status: "ok".into(),
                        obj: Some(r.metrics.obj),
                        cvg: Some(r.metrics.coverage),
                        cvg_u: None,
                        wall_s: Some(r.metrics.wall_time_s),
                    },
                    Err(e) => BenchRow {
                        algorithm: algo.clone(),
                        seed,
                        status: err_status(e),
                        obj: None,
                        cvg: None,
                        cvg_u: None,
                        wall_s: None,
                    },
                }
            }
            "fpah" | "fpah-n" | "lgh-r" => {
                let which = match algo.as_str() {
                    "fpah" => ReplanAlgo::Fpah,
                    "fpah-n" => ReplanAlgo::FpahN,
                    _ => ReplanAlgo::LghR,
                };
                let scenario = config.scenario.as_ref();
                match (scenario, original.as_ref()) {
                    (Some(scenario), Some(original)) => {
                        match run_replan(&instance, original, scenario, which) {
                            Ok(o) => BenchRow {
                                algorithm: algo.clone(),
                                seed,
                                status: "ok".into(),
                                obj: Some(o.metrics.obj),
                                cvg: Some(o.metrics.coverage),
                                cvg_u: Some(o.metrics.urgent_coverage),
                                wall_s: Some(o.metrics.wall_time_s),
                            },
                            Err(e) => BenchRow {
                                algorithm: algo.clone(),
                                seed,
                                status: err_status(e),
                                obj: None,
                                cvg: None,
                                cvg_u: None,
                                wall_s: None,
                            },
                        }
                    }
                    _ => BenchRow {
                        algorithm: algo.clone(),
                        seed,
                        status: "error: replanning needs a scenario".into(),
                        obj: None,
                        cvg: None,
                        cvg_u: None,
                        wall_s: None,
                    },
                }
            }
            other => BenchRow {
                algorithm: other.to_string(),
                seed,
                status: "error: unknown algorithm".into(),
                obj: None,
                cvg: None,
                cvg_u: None,
                wall_s: None,
            },
        };
        rows.push(row);
    }
    rows
}

fn mean_stdev(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<(), CliError> {
    let text = read_file(&args.config)?;
    let config: BenchConfig =
        serde_json::from_str(&text).map_err(usage(&args.config.display().to_string()))?;
    if config.repetitions == 0 || config.algorithms.is_empty() {
        return Err(CliError::Usage(
            "bench config needs at least one repetition and one algorithm".into(),
        ));
    }
    let instance_path = args
        .config
        .parent()
        .unwrap_or(Path::new("."))
        .join(&config.instance);
    let file: InstanceFile = serde_json::from_str(&read_file(&instance_path)?)
        .map_err(usage(&instance_path.display().to_string()))?;

    let seeds: Vec<u64> = (0..config.repetitions)
        .map(|i| cli.seed.wrapping_add(i as u64))
        .collect();
    let results: Mutex<Vec<Option<Vec<BenchRow>>>> =
        Mutex::new(vec![None; seeds.len()]);
    let next = AtomicUsize::new(0);
    let workers = cli.threads.max(1).min(seeds.len());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let rows = bench_repetition(&file, &config, seeds[i]);
                results.lock().expect("results lock")[i] = Some(rows);
            });
        }
    });
    let mut rows: Vec<BenchRow> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .flat_map(|r| r.expect("all repetitions complete"))
        .collect();
    rows.sort_by(|a, b| (&a.algorithm, a.seed).cmp(&(&b.algorithm, b.seed)));

    let mut csv = String::from("algorithm,seed,status,obj,cvg,cvg_u,wall_s\n");
    for row in &rows {
        let wall = if cli.redact_timing { None } else { row.wall_s };
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.algorithm,
            row.seed,
            format!("{},{}", row.status, fmt_opt(row.obj)),
            fmt_opt(row.cvg),
            fmt_opt(row.cvg_u),
            fmt_opt(wall),
        ));
    }
    // Aggregate lines over successful rows, one mean and one stdev row
    // per algorithm, in the order the config lists them.
    let mut per_algo: BTreeMap<&str, Vec<&BenchRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.status == "ok") {
        per_algo.entry(&row.algorithm).or_default().push(row);
    }
    for algo in &config.algorithms {
        let Some(ok_rows) = per_algo.get(algo.as_str()) else {
            continue;
        };
        let collect = |f: fn(&BenchRow) -> Option<f64>| -> Vec<f64> {
            ok_rows.iter().filter_map(|r| f(r)).collect()
        };
        for (stat, pick) in [("mean", 0usize), ("stdev", 1usize)] {
            let agg = |values: Vec<f64>| -> Option<f64> {
                if values.is_empty() {
                    None
                } else {
                    let (m, s) = mean_stdev(&values);
                    Some(if pick == 0 { m } else { s })
                }
            };
            let wall = if cli.redact_timing {
                None
            } else {
                agg(collect(|r| r.wall_s))
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                algo,
                stat,
                format!("ok,{}", fmt_opt(agg(collect(|r| r.obj)))),
                fmt_opt(agg(collect(|r| r.cvg))),
                fmt_opt(agg(collect(|r| r.cvg_u))),
                fmt_opt(wall),
            ));
        }
    }
    write_output(cli.out.as_deref(), &csv)
}
