//! CSV and JSON export. Files are written to a temporary sibling and renamed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use metrikos::{SpacePoint, Trajectory};
use serde::Serialize;

use crate::runner::{CheckResult, RunOutcome};
use crate::scenario::Prepared;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// 17 significant digits, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

fn point_values(p: &SpacePoint) -> Vec<f64> {
    match p {
        SpacePoint::Vector(v) | SpacePoint::Function(v) => v.clone(),
        SpacePoint::Index(i) => vec![*i as f64],
    }
}

/// `t, x_<name>..., p_0..., status`. Every row but the last reads `ok`; the
/// last carries the trajectory status, or `error` for a partial trajectory.
pub fn trajectory_csv(traj: &Trajectory, names: &[String], failed: bool) -> String {
    let mut out = String::from("t");
    for n in names {
        out.push_str(&format!(",x_{n}"));
    }
    let width = traj.points.as_ref().and_then(|p| p.first()).map(|p| point_values(p).len()).unwrap_or(0);
    for k in 0..width {
        out.push_str(&format!(",p_{k}"));
    }
    out.push_str(",status\n");
    for k in 0..traj.len() {
        out.push_str(&num(traj.times[k]));
        for v in traj.coords[k].values() {
            out.push(',');
            out.push_str(&num(*v));
        }
        if let Some(points) = &traj.points {
            for v in point_values(&points[k]) {
                out.push(',');
                out.push_str(&num(v));
            }
        }
        let status = match (k + 1 == traj.len(), failed) {
            (false, _) => "ok",
            (true, true) => "error",
            (true, false) => traj.status.name(),
        };
        let _ = writeln!(out, ",{status}");
    }
    out
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    names: &'a [String],
    method: &'static str,
    step: f64,
    status: &'static str,
    failed: bool,
    times: &'a [f64],
    coords: Vec<&'a [f64]>,
    points: Option<Vec<Vec<f64>>>,
}

pub fn trajectory_json(traj: &Trajectory, names: &[String], failed: bool) -> Result<String> {
    let doc = TrajectoryJson {
        names,
        method: traj.method.name(),
        step: traj.step,
        status: traj.status.name(),
        failed,
        times: &traj.times,
        coords: traj.coords.iter().map(|c| c.values()).collect(),
        points: traj.points.as_ref().map(|p| p.iter().map(point_values).collect()),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn trajectory_text(traj: &Trajectory, names: &[String], failed: bool, format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(trajectory_csv(traj, names, failed)),
        Format::Json => trajectory_json(traj, names, failed),
    }
}

/// Point cloud with ambient columns then coordinates.
pub fn cloud_csv(points: &[SpacePoint], coords: &[Vec<f64>], names: &[String]) -> String {
    let width = points.first().map(|p| point_values(p).len()).unwrap_or(0);
    let mut header: Vec<String> = (0..width).map(|k| format!("p_{k}")).collect();
    header.extend(names.iter().map(|n| format!("x_{n}")));
    let mut out = header.join(",") + "\n";
    for (p, c) in points.iter().zip(coords) {
        let row: Vec<String> = point_values(p).into_iter().chain(c.iter().copied()).map(num).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct RunJson<'a> {
    name: &'a str,
    field: &'a str,
    method: &'static str,
    flow: &'static str,
    status: &'static str,
    entries: usize,
    t_final: Option<f64>,
    error: Option<&'a str>,
    file: Option<String>,
}

#[derive(Serialize)]
struct CheckJson<'a> {
    name: &'a str,
    kind: &'static str,
    expect_pass: bool,
    passed: bool,
    ok: bool,
    detail: &'a str,
    metrics: Vec<(&'a str, f64)>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    scenario: &'a str,
    description: &'a str,
    seed: u64,
    ok: bool,
    runs: Vec<RunJson<'a>>,
    checks: Vec<CheckJson<'a>>,
}

pub fn report_json(
    p: &Prepared,
    runs: &[RunOutcome],
    checks: &[CheckResult],
    files: &[Option<String>],
) -> Result<String> {
    let run_docs = p
        .runs
        .iter()
        .zip(runs)
        .zip(files)
        .map(|((spec, outcome), file)| RunJson {
            name: &spec.name,
            field: &p.fields[spec.field].name,
            method: spec.method.name(),
            flow: match spec.flow {
                crate::scenario::Flow::Coords => "coords",
                crate::scenario::Flow::Sphere => "sphere",
            },
            status: match (&outcome.error, &outcome.trajectory) {
                (Some(_), _) | (None, None) => "error",
                (None, Some(t)) => t.status.name(),
            },
            entries: outcome.trajectory.as_ref().map_or(0, Trajectory::len),
            t_final: outcome.trajectory.as_ref().and_then(|t| t.times.last().copied()),
            error: outcome.error.as_deref(),
            file: file.clone(),
        })
        .collect();
    let check_docs = checks
        .iter()
        .map(|c| CheckJson {
            name: &c.name,
            kind: c.kind,
            expect_pass: c.expect_pass,
            passed: c.passed,
            ok: c.ok(),
            detail: &c.detail,
            metrics: c.metrics.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
        })
        .collect();
    let doc = ReportJson {
        scenario: &p.name,
        description: &p.description,
        seed: p.seed,
        ok: runs.iter().all(|r| r.error.is_none()) && checks.iter().all(CheckResult::ok),
        runs: run_docs,
        checks: check_docs,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use metrikos::{Method, MetricCoords, TrajectoryStatus};

    fn tiny() -> Trajectory {
        Trajectory {
            times: vec![0.0, 0.5],
            coords: vec![MetricCoords(vec![1.0, 2.0]), MetricCoords(vec![1.5, 1.5])],
            points: Some(vec![SpacePoint::Vector(vec![0.0, 1.0]), SpacePoint::Vector(vec![0.25, 1.0])]),
            step: 0.5,
            method: Method::Rk4,
            status: TrajectoryStatus::StoppedInfeasible { index: 2 },
        }
    }

    #[test]
    fn csv_layout() {
        let csv = trajectory_csv(&tiny(), &["a".into(), "b".into()], false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x_a,x_b,p_0,p_1,status");
        assert!(lines[1].ends_with(",ok"));
        assert!(lines[2].ends_with(",stopped_infeasible"));
        assert!(lines[2].starts_with("5.0000000000000000e-1,1.5000000000000000e0"));
        assert!(trajectory_csv(&tiny(), &["a".into(), "b".into()], true).trim_end().ends_with(",error"));
    }

    #[test]
    fn seventeen_significant_digits() {
        let s = num(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
        assert_eq!(num(-1.0 / 3.0).parse::<f64>().unwrap(), -1.0 / 3.0);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/out.csv");
        write_atomic(&path, "x\n").unwrap();
        write_atomic(&path, "y\n").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "y\n");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
