mod demos;
mod expr;
mod output;
mod runner;
mod scenario;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use metrikos::{
    hilbert_to_metric, metric_to_hilbert, multilaterate, sample_locus, MetricCoords, MetrikosError,
    MultilaterationOptions,
};

use output::{num, write_atomic, Format};
use runner::{CheckResult, RunOutcome};
use scenario::{Flow, LocusSpec, Overrides, PointValue, Prepared, RunSpec, ScenarioFile};

/// Bad user input: exit status 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

const CHECK_FAILURE: u8 = 1;
const INPUT_ERROR: u8 = 2;
const RUNTIME_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "metrikos", version, about = "Metric coordinate systems: conversion, flows and invariance checks")]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Tolerance for checks that do not set their own.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every run and check of a scenario and write trajectories and a report.
    Run { scenario: Option<PathBuf> },
    /// Execute a scenario's checks and print a pass/fail summary.
    Check { scenario: Option<PathBuf> },
    /// Convert a point to metric coordinates or back. Without --config the
    /// Hilbert space formulas for the orthonormal basis plus the origin are used.
    Convert {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "coords")]
        point: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coords: Option<Vec<f64>>,
        /// Initial guess for recovering a point (defaults to the base point).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        guess: Option<Vec<f64>>,
    },
    /// Integrate one field of the --config scenario from a given start.
    Integrate {
        #[arg(long)]
        field: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        start: Vec<f64>,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        step: f64,
        #[arg(long, default_value = "rk4")]
        method: String,
        #[arg(long)]
        recover: bool,
        #[arg(long)]
        sphere: bool,
    },
    /// Sample a locus of the --config scenario, by name or from inline parameters.
    Locus {
        #[arg(long, conflicts_with = "kind")]
        name: Option<String>,
        #[arg(long)]
        kind: Option<String>,
        #[arg(long, value_delimiter = ',')]
        points: Vec<String>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Run a bundled scenario.
    Demo {
        name: Option<String>,
        #[arg(long)]
        list: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let code = if e.chain().any(|c| c.is::<InputError>()) { INPUT_ERROR } else { RUNTIME_ERROR };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(InputError(msg.into()))
}

fn overrides(cli: &Cli) -> Result<Overrides> {
    if let Some(t) = cli.tol {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(input(format!("--tol must be a finite nonnegative number, got {t}")));
        }
    }
    Ok(Overrides { seed: cli.seed, tol: cli.tol })
}

fn read_scenario(path: &Path) -> Result<ScenarioFile> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("reading {}: {e}", path.display())))?;
    let mut file = scenario::parse(&text, &path.display().to_string())?;
    if file.name.is_none() {
        file.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(file)
}

fn scenario_path<'a>(cli: &'a Cli, positional: &'a Option<PathBuf>) -> Result<&'a Path> {
    positional.as_deref().or(cli.config.as_deref()).ok_or_else(|| input("no scenario given; pass a path or --config"))
}

fn config_file(cli: &Cli) -> Result<ScenarioFile> {
    let path = cli.config.as_deref().ok_or_else(|| input("this command needs --config"))?;
    read_scenario(path)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Run { scenario } => {
            let p = scenario::prepare(read_scenario(scenario_path(cli, scenario)?)?, &overrides(cli)?)?;
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("metrikos_out"));
            execute(cli, &p, Some(&out))
        }
        Command::Check { scenario } => {
            let p = scenario::prepare(read_scenario(scenario_path(cli, scenario)?)?, &overrides(cli)?)?;
            execute(cli, &p, cli.out.as_deref())
        }
        Command::Demo { name, list } => demo(cli, name.as_deref(), *list),
        Command::Convert { point, coords, guess } => {
            convert(cli, point.as_deref(), coords.as_deref(), guess.as_deref())
        }
        Command::Integrate { field, start, t_end, step, method, recover, sphere } => {
            let mut file = config_file(cli)?;
            file.checks.clear();
            file.runs = vec![RunSpec {
                name: Some(field.clone()),
                field: field.clone(),
                start: PointValue::Vector(start.clone()),
                t_end: *t_end,
                step: *step,
                method: Some(method.clone()),
                recover: *recover,
                flow: if *sphere { Flow::Sphere } else { Flow::Coords },
            }];
            let p = scenario::prepare(file, &overrides(cli)?)?;
            let outcome = runner::execute_runs(&p)?.remove(0);
            let traj = outcome.trajectory.as_ref();
            if let Some(t) = traj {
                let text = output::trajectory_text(t, &p.point_names, outcome.error.is_some(), cli.format)?;
                emit(cli.out.as_deref(), &format!("{field}.{}", cli.format.extension()), &text)?;
            }
            match outcome.error {
                Some(e) => Err(anyhow!(e)),
                None => Ok(0),
            }
        }
        Command::Locus { name, kind, points, r, theta, count } => {
            let mut file = config_file(cli)?;
            file.runs.clear();
            file.checks.clear();
            let wanted = match (name, kind) {
                (Some(n), None) => n.clone(),
                (None, Some(k)) => {
                    file.loci = vec![LocusSpec {
                        name: k.clone(),
                        kind: k.clone(),
                        points: points.clone(),
                        r: *r,
                        theta: *theta,
                    }];
                    k.clone()
                }
                _ => return Err(input("give --name or --kind")),
            };
            if *count == 0 {
                return Err(input("--count must be at least 1"));
            }
            let p = scenario::prepare(file, &overrides(cli)?)?;
            let (_, locus) = p
                .loci
                .iter()
                .find(|(n, _)| *n == wanted)
                .ok_or_else(|| input(format!("no locus named '{wanted}' in the scenario")))?;
            let cloud = sample_locus(locus, &p.system, *count, p.seed)?;
            let coords =
                cloud.iter().map(|x| p.system.coords_of(x).map(|c| c.0)).collect::<metrikos::Result<Vec<_>>>()?;
            let text = match cli.format {
                Format::Csv => output::cloud_csv(&cloud, &coords, &p.point_names),
                Format::Json => {
                    let points: Vec<Vec<f64>> =
                        cloud.iter().map(|x| x.as_vector().unwrap_or_default().to_vec()).collect();
                    serde_json::to_string_pretty(
                        &serde_json::json!({ "locus": wanted, "points": points, "coords": coords }),
                    )? + "\n"
                }
            };
            emit(cli.out.as_deref(), &format!("locus_{wanted}.{}", cli.format.extension()), &text)?;
            Ok(0)
        }
    }
}

/// Writes `name` under `dir`, or to stdout without one.
fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<()> {
    match dir {
        Some(d) => {
            let path = d.join(name);
            write_atomic(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn demo(cli: &Cli, name: Option<&str>, list: bool) -> Result<u8> {
    let listing = || demos::names().collect::<Vec<_>>().join("\n  ");
    let name = match (name, list) {
        (None, true) | (None, false) => {
            println!("available demos:\n  {}", listing());
            return if list { Ok(0) } else { Err(input("no demo name given")) };
        }
        (Some(n), _) => n,
    };
    let Some(text) = demos::find(name) else {
        return Err(input(format!("unknown demo '{name}'; available demos:\n  {}", listing())));
    };
    let p = scenario::prepare(scenario::parse(text, name)?, &overrides(cli)?)?;
    execute(cli, &p, cli.out.as_deref())
}

fn label(c: &CheckResult) -> &'static str {
    match (c.passed, c.expect_pass) {
        (true, true) => "PASS ",
        (false, false) => "XFAIL",
        (false, true) => "FAIL ",
        (true, false) => "XPASS",
    }
}

fn execute(cli: &Cli, p: &Prepared, out: Option<&Path>) -> Result<u8> {
    let runs: Vec<RunOutcome> = runner::execute_runs(p)?;
    let checks = runner::execute_checks(p, &runs)?;

    let mut files = vec![None; runs.len()];
    if let Some(dir) = out {
        for (k, (spec, outcome)) in p.runs.iter().zip(&runs).enumerate() {
            if let Some(t) = &outcome.trajectory {
                let file = format!("{}.{}", spec.name, cli.format.extension());
                let text = output::trajectory_text(t, &p.point_names, outcome.error.is_some(), cli.format)?;
                write_atomic(&dir.join(&file), &text)?;
                files[k] = Some(file);
            }
        }
        write_atomic(&dir.join("report.json"), &output::report_json(p, &runs, &checks, &files)?)
            .context("writing the report")?;
    }

    println!("scenario {} (seed {})", p.name, p.seed);
    if !p.description.is_empty() {
        println!("  {}", p.description);
    }
    for (spec, outcome) in p.runs.iter().zip(&runs) {
        match (&outcome.trajectory, &outcome.error) {
            (Some(t), None) => println!(
                "run {}: {}, {} entries up to t = {}",
                spec.name,
                t.status.name(),
                t.len(),
                t.times.last().unwrap_or(&0.0)
            ),
            (_, Some(e)) => println!("run {}: error: {e}", spec.name),
            (None, None) => unreachable!("a run either produces a trajectory or fails"),
        }
    }
    for c in &checks {
        println!("{}  {} [{}]: {}", label(c), c.name, c.kind, c.detail);
    }
    let as_expected = checks.iter().filter(|c| c.ok()).count();
    println!("{as_expected} of {} checks as expected", checks.len());
    if let Some(dir) = out {
        println!("outputs in {}", dir.display());
    }

    if let Some((spec, _)) = p.runs.iter().zip(&runs).find(|(_, r)| r.error.is_some()) {
        bail!("run '{}' failed; partial outputs are marked with status 'error'", spec.name);
    }
    Ok(if as_expected == checks.len() { 0 } else { CHECK_FAILURE })
}

fn user_error(e: MetrikosError) -> anyhow::Error {
    match e {
        MetrikosError::NoConvergence { .. } | MetrikosError::Integration { .. } => anyhow!(e),
        other => input(other.to_string()),
    }
}

fn print_row(cli: &Cli, header: &[String], values: &[f64]) -> Result<()> {
    let text = match cli.format {
        Format::Csv => {
            format!("{}\n{}\n", header.join(","), values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(","))
        }
        Format::Json => {
            let map: serde_json::Map<String, serde_json::Value> =
                header.iter().cloned().zip(values.iter().map(|v| serde_json::json!(v))).collect();
            serde_json::to_string_pretty(&map)? + "\n"
        }
    };
    emit(cli.out.as_deref(), &format!("convert.{}", cli.format.extension()), &text)
}

fn convert(cli: &Cli, point: Option<&[f64]>, coords: Option<&[f64]>, guess: Option<&[f64]>) -> Result<u8> {
    if point.is_none() && coords.is_none() {
        return Err(input("give --point or --coords"));
    }
    let Some(path) = cli.config.as_deref() else {
        if guess.is_some() {
            return Err(input("--guess needs --config"));
        }
        return match (point, coords) {
            (Some(w), _) => {
                let c = hilbert_to_metric(w).map_err(user_error)?;
                let mut header: Vec<String> = (1..=w.len()).map(|k| format!("x_e{k}")).collect();
                header.push("x_o".into());
                print_row(cli, &header, &c.0).map(|_| 0)
            }
            (None, Some(c)) => {
                let w = metric_to_hilbert(&MetricCoords(c.to_vec())).map_err(user_error)?;
                let header: Vec<String> = (1..=w.len()).map(|k| format!("w_{k}")).collect();
                print_row(cli, &header, &w).map(|_| 0)
            }
            (None, None) => unreachable!(),
        };
    };
    let mut file = read_scenario(path)?;
    file.runs.clear();
    file.checks.clear();
    let p = scenario::prepare(file, &overrides(cli)?)?;
    let names = p.coord_symbols();
    match (point, coords) {
        (Some(x), _) => {
            let x = scenario::to_point(p.system.space(), &PointValue::Vector(x.to_vec()))
                .map_err(|e| input(format!("{e:#}")))?;
            let c = p.system.coords_of(&x).map_err(user_error)?;
            print_row(cli, &names, &c.0)?;
        }
        (None, Some(c)) => {
            if c.len() != p.system.len() {
                return Err(input(format!("expected {} coordinates, got {}", p.system.len(), c.len())));
            }
            let target = MetricCoords(c.to_vec());
            let report = p.system.check_feasible(&target).map_err(user_error)?;
            if !report.is_feasible() {
                return Err(user_error(MetrikosError::Infeasible(report)));
            }
            let start = match guess {
                Some(g) => scenario::to_point(p.system.space(), &PointValue::Vector(g.to_vec()))
                    .map_err(|e| input(format!("{e:#}")))?,
                None => p.system.base_point().clone(),
            };
            let m = multilaterate(&p.system, &target, &start, MultilaterationOptions::default()).map_err(user_error)?;
            let x = m.point.as_vector().ok_or_else(|| anyhow!("recovered point is not a vector"))?;
            let mut header: Vec<String> = (0..x.len()).map(|k| format!("p_{k}")).collect();
            header.push("residual".into());
            let mut row = x.to_vec();
            row.push(m.residual);
            print_row(cli, &header, &row)?;
        }
        (None, None) => unreachable!(),
    }
    Ok(0)
}
