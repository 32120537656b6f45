//! Executes prepared scenarios: trajectories first, then checks against them.

use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use metrikos::fields::{cutoff, mcshane_extend_vector};
use metrikos::invariance::Residual;
use metrikos::{
    central_derivative, conserved_quantities, default_nagumo_steps, hilbert_to_metric, integrate_coords,
    integrate_points, integrate_sphere_flow, invariance_test, lipschitz_estimate, metric_to_hilbert, nagumo_check,
    orthonormal_system, random_probes, CoordSet, CoordinateSystem, Curve, DerivativeOptions, Differentiability,
    EmbeddedPoint, MetricCoords, MetrikosError, MultilaterationOptions, SpacePoint, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::Expr;
use crate::scenario::{CheckSpec, Flow, Prepared, PreparedCheck, PreparedRun};

/// Probes used to detect conserved quantities.
const PROBES: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub kind: &'static str,
    pub expect_pass: bool,
    pub passed: bool,
    pub detail: String,
    pub metrics: Vec<(String, f64)>,
}

impl CheckResult {
    /// The check behaved as the scenario expected.
    pub fn ok(&self) -> bool {
        self.passed == self.expect_pass
    }
}

/// Thread count from `METRIKOS_THREADS`, if set.
pub fn thread_limit() -> Result<Option<usize>> {
    match std::env::var("METRIKOS_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| {
                anyhow!(crate::InputError(format!("METRIKOS_THREADS must be a positive integer, got '{v}'")))
            })?;
            if n == 0 {
                return Err(anyhow!(crate::InputError("METRIKOS_THREADS must be at least 1".into())));
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// A finished run. On failure `trajectory` holds whatever was integrated
/// before the error, if anything.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

pub fn execute_runs(p: &Prepared) -> Result<Vec<RunOutcome>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building the thread pool")?;
    Ok(pool.install(|| {
        p.runs
            .par_iter()
            .map(|r| match execute_run(p, r) {
                Ok(t) => RunOutcome { trajectory: Some(t), error: None },
                Err(e) => {
                    let partial = e.downcast_ref::<MetrikosError>().and_then(|m| match m {
                        MetrikosError::Integration { partial, .. } if !partial.is_empty() => Some((**partial).clone()),
                        _ => None,
                    });
                    RunOutcome { trajectory: partial, error: Some(format!("{e:#}")) }
                }
            })
            .collect()
    }))
}

pub fn execute_run(p: &Prepared, run: &PreparedRun) -> Result<Trajectory> {
    let field = &p.fields[run.field].field;
    let traj = match run.flow {
        Flow::Sphere => integrate_sphere_flow(field, &p.system, &run.start, run.t_end, run.step),
        Flow::Coords if run.recover => integrate_points(
            field,
            &p.system,
            &run.start,
            run.t_end,
            run.step,
            run.method,
            MultilaterationOptions::default(),
        ),
        Flow::Coords => integrate_coords(field, &p.system, &run.start, run.t_end, run.step, run.method),
    };
    traj.with_context(|| format!("run '{}'", run.name))
}

/// Checks on a failed run are reported as not passed without being evaluated.
pub fn execute_checks(p: &Prepared, runs: &[RunOutcome]) -> Result<Vec<CheckResult>> {
    let mut trajectories = Vec::with_capacity(runs.len());
    for r in runs {
        trajectories.push(match (&r.trajectory, &r.error) {
            (Some(t), None) => t.clone(),
            _ => Trajectory {
                times: Vec::new(),
                coords: Vec::new(),
                points: None,
                step: 0.0,
                method: metrikos::Method::Rk4,
                status: metrikos::TrajectoryStatus::Completed,
            },
        });
    }
    p.checks
        .iter()
        .map(|c| match c.run.and_then(|r| runs[r].error.as_ref().map(|e| (r, e))) {
            Some((r, e)) => Ok(CheckResult {
                name: c.name.clone(),
                kind: c.spec.kind(),
                expect_pass: c.expect_pass,
                passed: false,
                detail: format!("not evaluated: run '{}' failed: {e}", p.runs[r].name),
                metrics: Vec::new(),
            }),
            None => execute_check(p, &trajectories, c).with_context(|| format!("check '{}'", c.name)),
        })
        .collect()
}

struct Verdict {
    passed: bool,
    detail: String,
    metrics: Vec<(String, f64)>,
}

fn verdict(passed: bool, detail: String, metrics: &[(&str, f64)]) -> Verdict {
    Verdict { passed, detail, metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect() }
}

fn execute_check(p: &Prepared, trajectories: &[Trajectory], c: &PreparedCheck) -> Result<CheckResult> {
    let v = match &c.spec {
        CheckSpec::Feasibility { samples, .. } => feasibility(p, c, trajectories, samples.unwrap_or(200))?,
        CheckSpec::Invariance { .. } => invariance(p, c, trajectories)?,
        CheckSpec::Nagumo { samples, k, .. } => nagumo(p, c, samples.unwrap_or(16), k.unwrap_or(0.0))?,
        CheckSpec::Lipschitz { samples, max, .. } => lipschitz(p, c, samples.unwrap_or(200), *max)?,
        CheckSpec::Convergence { n_from, n_to, limit, d_limit, .. } => {
            convergence(p, c, *n_from, *n_to, limit, *d_limit)?
        }
        CheckSpec::ClosedForm { .. } => closed_form(c, &trajectories[c.run.expect("resolved")])?,
        CheckSpec::Jumps { min_point_jump, max_coord_step, .. } => {
            jumps(p, &trajectories[c.run.expect("resolved")], *min_point_jump, *max_coord_step)?
        }
        CheckSpec::Domination { pairs, rel_tol } => domination(p, c, pairs, rel_tol.unwrap_or(0.02))?,
        CheckSpec::Derivative { t0, expect, left, right, .. } => {
            derivative(p, c, *t0, expect, left.as_deref(), right.as_deref())?
        }
        CheckSpec::HilbertRoundtrip { dims, samples, range } => hilbert_roundtrip(c, dims, *samples, *range)?,
        CheckSpec::Mcshane { samples, pairs, radius, .. } => mcshane(p, c, *samples, *pairs, *radius)?,
    };
    Ok(CheckResult {
        name: c.name.clone(),
        kind: c.spec.kind(),
        expect_pass: c.expect_pass,
        passed: v.passed,
        detail: v.detail,
        metrics: v.metrics,
    })
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Random points of `X`, drawn from the system's sampling box.
pub fn sample_points(system: &CoordinateSystem, count: usize, seed: u64) -> Result<Vec<SpacePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = system.sampling_box(3.0).unwrap_or_default();
    let mut out = Vec::with_capacity(count);
    for _ in 0..1000 * count.max(1) {
        if out.len() == count {
            break;
        }
        let x = system.space().random_point(&mut rng, &lo, &hi);
        if system.space().member(&x)? {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(anyhow!("found only {} of {count} sample points in X", out.len()));
    }
    Ok(out)
}

fn feasibility(p: &Prepared, c: &PreparedCheck, trajectories: &[Trajectory], samples: usize) -> Result<Verdict> {
    let coords: Vec<MetricCoords> = match c.run {
        Some(r) => trajectories[r].coords.clone(),
        None => sample_points(&p.system, samples, c.seed)?
            .iter()
            .map(|x| p.system.coords_of(x))
            .collect::<metrikos::Result<_>>()?,
    };
    let mut bad = 0usize;
    let mut worst = 0.0f64;
    for w in &coords {
        let report = p.system.check_feasible_tol(w, c.tol)?;
        if !report.is_feasible() {
            bad += 1;
        }
        for v in &report.violations {
            worst = worst.max(-v.slack);
        }
    }
    Ok(verdict(
        bad == 0,
        format!("{bad} of {} coordinate vectors infeasible, worst violation {worst:.3e}", coords.len()),
        &[("checked", coords.len() as f64), ("infeasible", bad as f64), ("worst_violation", worst)],
    ))
}

fn expr_residual(e: &Expr, offset: f64) -> Residual {
    let e = e.clone();
    Arc::new(move |w: &[f64]| e.eval(w) - offset)
}

fn invariance(p: &Prepared, c: &PreparedCheck, trajectories: &[Trajectory]) -> Result<Verdict> {
    let run = &p.runs[c.run.expect("resolved")];
    let traj = &trajectories[c.run.expect("resolved")];
    let start = traj.coords[0].clone();
    let mut sets: Vec<(String, CoordSet)> = Vec::new();
    if let Some(e) = c.exprs.first() {
        let level = e.eval(start.values());
        sets.push((format!("{} = {level:.6}", e.source()), CoordSet::implicit(expr_residual(e, level))));
    } else {
        let field = &p.fields[run.field].field;
        let probes = random_probes(&p.system, PROBES, c.seed)?;
        for law in conserved_quantities(field, &probes)? {
            sets.push((law.describe(&p.point_names), CoordSet::level_set(law, &start)));
        }
        if sets.is_empty() {
            return Ok(verdict(
                false,
                format!("field '{}' conserves none of the detected quantities", field.label()),
                &[],
            ));
        }
    }
    let mut passed = true;
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for (label, set) in &sets {
        let out = invariance_test(traj, set, c.tol)?;
        worst = worst.max(out.max_distance);
        passed &= out.invariant;
        parts.push(match out.first_exit {
            None => format!("{label}: max distance {:.3e}", out.max_distance),
            Some(k) => format!("{label}: leaves at t = {} (max distance {:.3e})", traj.times[k], out.max_distance),
        });
    }
    Ok(verdict(
        passed,
        format!("{} ({} entries, {})", parts.join("; "), traj.len(), traj.status.name()),
        &[("sets", sets.len() as f64), ("max_distance", worst)],
    ))
}

fn nagumo(p: &Prepared, c: &PreparedCheck, samples: usize, k: f64) -> Result<Verdict> {
    let field = &p.fields[c.field.expect("resolved")].field;
    let probes: Vec<Vec<f64>> = random_probes(&p.system, samples, c.seed)?.into_iter().map(|w| w.0).collect();
    let mut sets: Vec<(String, CoordSet)> = Vec::new();
    if let Some(e) = c.exprs.first() {
        sets.push((format!("{} = 0", e.source()), CoordSet::implicit(expr_residual(e, 0.0))));
    } else if let Some(l) = c.locus {
        let (name, locus) = &p.loci[l];
        sets.push((format!("locus '{name}'"), CoordSet::locus(*locus, &p.system)?));
    } else {
        let through = MetricCoords(probes[0].clone());
        for law in conserved_quantities(field, &random_probes(&p.system, PROBES, c.seed ^ 1)?)? {
            sets.push((law.describe(&p.point_names), CoordSet::level_set(law, &through)));
        }
        if sets.is_empty() {
            return Ok(verdict(
                false,
                format!("field '{}' conserves none of the detected quantities", field.label()),
                &[],
            ));
        }
    }
    let mut passed = true;
    let mut parts = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (label, set) in &sets {
        let report = nagumo_check(field, set, &probes, &default_nagumo_steps(), k, c.tol)?;
        passed &= report.passed();
        worst = worst.max(report.max_limsup());
        parts.push(format!(
            "{label}: {} of {} samples violate, max limsup {:.3e}",
            report.violations.len(),
            report.samples.len(),
            report.max_limsup()
        ));
    }
    Ok(verdict(passed, parts.join("; "), &[("max_limsup", worst), ("k", k)]))
}

fn lipschitz(p: &Prepared, c: &PreparedCheck, samples: usize, max: Option<f64>) -> Result<Verdict> {
    let field = &p.fields[c.field.expect("resolved")].field;
    let points = sample_points(&p.system, samples.max(2), c.seed)?;
    let est = lipschitz_estimate(field, &p.system, &points)?;
    let passed = max.is_none_or(|m| est.constant <= m + c.tol);
    let bound = max.map(|m| format!(" (bound {m})")).unwrap_or_default();
    Ok(verdict(
        passed,
        format!("sampled constant {:.6} over {} pairs{bound}", est.constant, est.pairs),
        &[("constant", est.constant), ("pairs", est.pairs as f64)],
    ))
}

fn convergence(
    p: &Prepared,
    c: &PreparedCheck,
    n_from: u32,
    n_to: u32,
    limit: &crate::scenario::PointValue,
    d_limit: Option<f64>,
) -> Result<Verdict> {
    let limit = crate::scenario::to_point(p.system.space(), limit)?;
    let sequence: Vec<SpacePoint> =
        (n_from..=n_to).map(|n| SpacePoint::Vector(c.exprs.iter().map(|e| e.eval(&[n as f64])).collect())).collect();
    let report = p.system.compare_convergence(&sequence, &limit)?;
    let dc = *report.dc_gaps.last().expect("nonempty");
    let d = *report.d_gaps.last().expect("nonempty");
    let mut passed = dc <= c.tol;
    let mut detail = format!("at n = {n_to}: d_C gap {dc:.3e}, d gap {d:.6}");
    if let Some(target) = d_limit {
        passed &= (d - target).abs() <= c.tol;
        detail.push_str(&format!(" (expected d gap {target})"));
    }
    Ok(verdict(passed, detail, &[("dc_gap", dc), ("d_gap", d)]))
}

fn closed_form(c: &PreparedCheck, traj: &Trajectory) -> Result<Verdict> {
    let mut vars: Vec<f64> = traj.coords[0].values().to_vec();
    vars.push(0.0);
    let last = vars.len() - 1;
    let mut worst = 0.0f64;
    for (t, w) in traj.times.iter().zip(&traj.coords) {
        vars[last] = *t;
        for (e, got) in c.exprs.iter().zip(w.values()) {
            worst = worst.max((e.eval(&vars) - got).abs());
        }
    }
    let t_final = *traj.times.last().expect("nonempty");
    Ok(verdict(
        worst <= c.tol,
        format!("max deviation {worst:.3e} over {} entries up to t = {t_final} ({})", traj.len(), traj.status.name()),
        &[("max_deviation", worst), ("t_final", t_final)],
    ))
}

fn jumps(p: &Prepared, traj: &Trajectory, min_point_jump: Option<f64>, max_coord_step: Option<f64>) -> Result<Verdict> {
    let points = traj.points.as_ref().ok_or_else(|| anyhow!("trajectory carries no points"))?;
    let mut point_jump = 0.0f64;
    let mut at = 0.0;
    let mut coord_step = 0.0f64;
    for k in 1..traj.len() {
        let d = p.system.distance(&points[k - 1], &points[k])?;
        if d > point_jump {
            point_jump = d;
            at = traj.times[k];
        }
        coord_step = coord_step.max(traj.coords[k - 1].sup_distance(&traj.coords[k]));
    }
    let passed = min_point_jump.is_none_or(|m| point_jump >= m) && max_coord_step.is_none_or(|m| coord_step <= m);
    Ok(verdict(
        passed,
        format!("largest point jump {point_jump:.6} at t = {at}, largest coordinate step {coord_step:.3e}"),
        &[("point_jump", point_jump), ("coord_step", coord_step)],
    ))
}

fn domination(p: &Prepared, c: &PreparedCheck, pairs: &[crate::scenario::PairSpec], rel_tol: f64) -> Result<Verdict> {
    let mut passed = true;
    let mut parts = Vec::new();
    let mut worst_ratio = 0.0f64;
    for pair in pairs {
        let x = crate::scenario::to_point(p.system.space(), &pair.x)?;
        let y = crate::scenario::to_point(p.system.space(), &pair.y)?;
        let d = p.system.distance(&x, &y)?;
        let dc = p.system.d_c(&x, &y)?;
        passed &= dc <= d + c.tol;
        if d > 0.0 {
            worst_ratio = worst_ratio.max(dc / d);
        }
        let mut part = format!("d {d:.6e} d_C {dc:.6e}");
        if let Some(expected) = pair.dc {
            let ok = (dc - expected).abs() <= rel_tol * expected.abs().max(f64::MIN_POSITIVE);
            passed &= ok;
            part.push_str(&format!(" (expected {expected:.4e}{})", if ok { "" } else { ", mismatch" }));
        }
        parts.push(part);
    }
    Ok(verdict(passed, parts.join("; "), &[("max_ratio", worst_ratio)]))
}

fn status_name(s: Differentiability) -> &'static str {
    match s {
        Differentiability::Differentiable => "differentiable",
        Differentiability::NonDifferentiable => "non_differentiable",
        Differentiability::Indeterminate => "indeterminate",
    }
}

fn derivative(
    p: &Prepared,
    c: &PreparedCheck,
    t0: f64,
    expect: &[String],
    left: Option<&[f64]>,
    right: Option<&[f64]>,
) -> Result<Verdict> {
    let exprs = c.exprs.clone();
    let curve =
        Curve::new(move |t: f64| SpacePoint::Vector(exprs.iter().map(|e| e.eval(&[t])).collect()), t0 - 1.0, t0 + 1.0);
    let opts = DerivativeOptions { tol: c.tol, ..DerivativeOptions::default() };
    let out = central_derivative(&curve, &p.system, t0, &opts)?;
    let got: Vec<&str> = out.status.iter().map(|s| status_name(*s)).collect();
    let mut passed = got.iter().zip(expect).all(|(g, e)| g == e);
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() <= c.tol);
    if let Some(l) = left {
        passed &= close(&out.left, l);
    }
    if let Some(r) = right {
        passed &= close(&out.right, r);
    }
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(", ");
    Ok(verdict(
        passed,
        format!("status [{}], left [{}], right [{}]", got.join(", "), fmt(&out.left), fmt(&out.right)),
        &[],
    ))
}

fn hilbert_roundtrip(c: &PreparedCheck, dims: &[usize], samples: usize, range: f64) -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut round = 0.0f64;
    let mut oracle = 0.0f64;
    for &n in dims {
        let system = orthonormal_system(n)?;
        for _ in 0..samples {
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-range..range)).collect();
            let coords = hilbert_to_metric(&w)?;
            let back = metric_to_hilbert(&coords)?;
            round = round.max(sup(&w, &back));
            let direct = system.coords_of(&SpacePoint::Vector(w))?;
            oracle = oracle.max(direct.sup_distance(&coords));
        }
    }
    Ok(verdict(
        round <= c.tol && oracle <= c.tol,
        format!("round trip error {round:.3e}, distance formula error {oracle:.3e} over {} dimensions", dims.len()),
        &[("round_trip_error", round), ("formula_error", oracle)],
    ))
}

fn mcshane(p: &Prepared, c: &PreparedCheck, samples: usize, pairs: usize, radius: f64) -> Result<Verdict> {
    let field = &p.fields[c.field.expect("resolved")].field;
    let points = sample_points(&p.system, samples, c.seed)?;
    let mut data: Vec<(EmbeddedPoint, Vec<f64>)> = Vec::with_capacity(points.len());
    for x in &points {
        let coords = p.system.coords_of(x)?;
        let v = field.velocity(coords.values())?;
        data.push((p.system.embed_coords(&coords), v));
    }
    let mut k = 0.0f64;
    for i in 0..data.len() {
        for j in (i + 1)..data.len() {
            let gap = data[i].0.sup_distance(&data[j].0);
            if gap > 1e-12 {
                k = k.max(sup(&data[i].1, &data[j].1) / gap);
            }
        }
    }
    let ext = mcshane_extend_vector(data.clone(), k)?;
    let exact = data.iter().map(|(e, v)| sup(&ext.eval(e.values()), v)).fold(0.0f64, f64::max);

    let dim = data[0].0.values().len();
    let (mut lo, mut hi) = (vec![f64::INFINITY; dim], vec![f64::NEG_INFINITY; dim]);
    for (e, _) in &data {
        for (d, v) in e.values().iter().enumerate() {
            lo[d] = lo[d].min(*v);
            hi[d] = hi[d].max(*v);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x5eed);
    let mut draw = |lo: &[f64], hi: &[f64]| -> Vec<f64> {
        lo.iter().zip(hi).map(|(a, b)| if b > a { rng.random_range(*a..*b) } else { *a }).collect()
    };
    let mut ratio = 0.0f64;
    for _ in 0..pairs {
        let (x, y) = (draw(&lo, &hi), draw(&lo, &hi));
        let gap = sup(&x, &y);
        if gap > 1e-12 {
            ratio = ratio.max(sup(&ext.eval(&x), &ext.eval(&y)) / gap);
        }
    }

    let center = data[0].0.clone();
    let ball_lo: Vec<f64> = center.values().iter().map(|v| v - radius).collect();
    let ball_hi: Vec<f64> = center.values().iter().map(|v| v + radius).collect();
    let bound_m = (0..pairs)
        .map(|_| ext.eval(&draw(&ball_lo, &ball_hi)).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);
    let cut = cutoff(|x: &[f64]| ext.eval(x), &center, radius)?;
    let wide_lo: Vec<f64> = center.values().iter().map(|v| v - 1.5 * radius).collect();
    let wide_hi: Vec<f64> = center.values().iter().map(|v| v + 1.5 * radius).collect();
    let mut cut_ratio = 0.0f64;
    let mut leak = 0.0f64;
    for _ in 0..pairs {
        let x = draw(&wide_lo, &wide_hi);
        let y = draw(&wide_lo, &wide_hi);
        let gap = sup(&x, &y);
        if gap > 1e-12 {
            cut_ratio = cut_ratio.max(sup(&cut.eval(&x), &cut.eval(&y)) / gap);
        }
        if sup(&x, center.values()) >= radius {
            leak = leak.max(cut.eval(&x).iter().fold(0.0f64, |m, v| m.max(v.abs())));
        }
    }
    let cut_bound = 4.0 * k + 2.0 / radius * bound_m;
    let passed = exact <= c.tol && ratio <= k + c.tol && cut_ratio <= cut_bound + c.tol && leak == 0.0;
    Ok(verdict(
        passed,
        format!(
            "K = {k:.6}: error on data {exact:.1e}, extension ratio {ratio:.6}, cutoff ratio {cut_ratio:.4} <= {cut_bound:.4}, outside support {leak:.1e}"
        ),
        &[("k", k), ("data_error", exact), ("extension_ratio", ratio), ("cutoff_ratio", cut_ratio), ("cutoff_bound", cut_bound)],
    ))
}
