//! Scenario files: schema, parsing and validation.
//!
//! Everything a scenario references is resolved here, so a scenario that
//! prepares without error only fails later for numerical reasons.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use metrikos::fields::Component;
use metrikos::{CoordField, CoordinateSystem, GridSpace, Locus, Method, Space, SpacePoint, Subset};
use serde::Deserialize;

use crate::expr::Expr;
use crate::InputError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    pub name: Option<String>,
    pub description: Option<String>,
    pub seed: Option<u64>,
    pub space: SpaceSpec,
    #[serde(default)]
    pub points: Vec<PointSpec>,
    pub base_point: Option<PointValue>,
    #[serde(default)]
    pub fields: Vec<FieldSpec>,
    #[serde(default)]
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub checks: Vec<CheckEntry>,
    #[serde(default)]
    pub loci: Vec<LocusSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: String,
    pub dim: Option<usize>,
    pub count: Option<usize>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub cells: Option<usize>,
    pub subset: Option<SubsetSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SubsetSpec {
    Named(String),
    Custom { normal: Vec<f64>, offset: f64 },
}

/// An index (discrete spaces), a vector, or a formula in `x` (grid spaces).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PointValue {
    Index(usize),
    Vector(Vec<f64>),
    Function(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpec {
    pub name: String,
    pub at: PointValue,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub name: String,
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flow {
    #[default]
    Coords,
    Sphere,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: Option<String>,
    pub field: String,
    pub start: PointValue,
    pub t_end: f64,
    pub step: f64,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub recover: bool,
    #[serde(default)]
    pub flow: Flow,
}

#[derive(Debug, Deserialize)]
pub struct CheckEntry {
    pub name: Option<String>,
    #[serde(default = "yes")]
    pub expect_pass: bool,
    pub tol: Option<f64>,
    #[serde(flatten)]
    pub spec: CheckSpec,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
pub struct PairSpec {
    pub x: PointValue,
    pub y: PointValue,
    pub dc: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckSpec {
    Feasibility { run: Option<String>, samples: Option<usize> },
    Invariance { run: String, expr: Option<String> },
    Nagumo { field: String, expr: Option<String>, locus: Option<String>, samples: Option<usize>, k: Option<f64> },
    Lipschitz { field: String, samples: Option<usize>, max: Option<f64> },
    Convergence { sequence: Vec<String>, n_from: u32, n_to: u32, limit: PointValue, d_limit: Option<f64> },
    ClosedForm { run: String, components: Vec<String> },
    Jumps { run: String, min_point_jump: Option<f64>, max_coord_step: Option<f64> },
    Domination { pairs: Vec<PairSpec>, rel_tol: Option<f64> },
    Derivative { curve: Vec<String>, t0: f64, expect: Vec<String>, left: Option<Vec<f64>>, right: Option<Vec<f64>> },
    HilbertRoundtrip { dims: Vec<usize>, samples: usize, range: f64 },
    Mcshane { field: String, samples: usize, pairs: usize, radius: f64 },
}

impl CheckSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CheckSpec::Feasibility { .. } => "feasibility",
            CheckSpec::Invariance { .. } => "invariance",
            CheckSpec::Nagumo { .. } => "nagumo",
            CheckSpec::Lipschitz { .. } => "lipschitz",
            CheckSpec::Convergence { .. } => "convergence",
            CheckSpec::ClosedForm { .. } => "closed_form",
            CheckSpec::Jumps { .. } => "jumps",
            CheckSpec::Domination { .. } => "domination",
            CheckSpec::Derivative { .. } => "derivative",
            CheckSpec::HilbertRoundtrip { .. } => "hilbert_roundtrip",
            CheckSpec::Mcshane { .. } => "mcshane",
        }
    }

    fn default_tol(&self) -> f64 {
        match self {
            CheckSpec::Feasibility { run: Some(_), .. } => 1e-6,
            CheckSpec::Feasibility { run: None, .. } => 1e-12,
            CheckSpec::Invariance { .. } => 1e-6,
            CheckSpec::Nagumo { .. } => 0.05,
            CheckSpec::Lipschitz { .. } => 1e-9,
            CheckSpec::Convergence { .. } => 1e-3,
            CheckSpec::ClosedForm { .. } => 1e-9,
            CheckSpec::Jumps { .. } => 0.0,
            CheckSpec::Domination { .. } => 1e-12,
            CheckSpec::Derivative { .. } => 1e-3,
            CheckSpec::HilbertRoundtrip { .. } => 1e-9,
            CheckSpec::Mcshane { .. } => 1e-9,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocusSpec {
    pub name: String,
    pub kind: String,
    pub points: Vec<String>,
    pub r: Option<f64>,
    pub theta: Option<f64>,
}

pub struct NamedField {
    pub name: String,
    pub field: CoordField,
}

pub struct PreparedRun {
    pub name: String,
    pub field: usize,
    pub start: SpacePoint,
    pub t_end: f64,
    pub step: f64,
    pub method: Method,
    pub recover: bool,
    pub flow: Flow,
}

pub struct PreparedCheck {
    pub name: String,
    pub expect_pass: bool,
    pub tol: f64,
    pub seed: u64,
    pub spec: CheckSpec,
    pub exprs: Vec<Expr>,
    pub field: Option<usize>,
    pub run: Option<usize>,
    pub locus: Option<usize>,
}

pub struct Prepared {
    pub name: String,
    pub description: String,
    pub seed: u64,
    pub system: CoordinateSystem,
    pub point_names: Vec<String>,
    pub fields: Vec<NamedField>,
    pub runs: Vec<PreparedRun>,
    pub checks: Vec<PreparedCheck>,
    pub loci: Vec<(String, Locus)>,
}

impl Prepared {
    /// `x_<name>` for every coordinatizing point.
    pub fn coord_symbols(&self) -> Vec<String> {
        self.point_names.iter().map(|n| format!("x_{n}")).collect()
    }
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(InputError(msg.into()))
}

pub fn parse(text: &str, origin: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| input(format!("{origin}: {e}")))
}

pub fn prepare(file: ScenarioFile, overrides: &Overrides) -> Result<Prepared> {
    prepare_inner(file, overrides).map_err(|e| if e.is::<InputError>() { e } else { input(format!("{e:#}")) })
}

fn prepare_inner(file: ScenarioFile, overrides: &Overrides) -> Result<Prepared> {
    if file.version != SCHEMA_VERSION {
        bail!("unsupported scenario version {} (expected {SCHEMA_VERSION})", file.version);
    }
    let space = build_space(&file.space)?;
    if file.points.is_empty() {
        bail!("a scenario needs at least one coordinatizing point");
    }
    let mut point_names = Vec::new();
    let mut coords = Vec::new();
    for p in &file.points {
        if point_names.contains(&p.name) {
            bail!("duplicate point name '{}'", p.name);
        }
        if p.name.is_empty() || !p.name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            bail!("point name '{}' must be alphanumeric", p.name);
        }
        coords.push(to_point(&space, &p.at).with_context(|| format!("point '{}'", p.name))?);
        point_names.push(p.name.clone());
    }
    let base = match &file.base_point {
        Some(v) => to_point(&space, v).context("base_point")?,
        None => coords[0].clone(),
    };
    let system = CoordinateSystem::new(space, coords, base)?;
    let symbols: Vec<String> = point_names.iter().map(|n| format!("x_{n}")).collect();
    let symbol_refs: Vec<&str> = symbols.iter().map(String::as_str).collect();

    let mut fields = Vec::new();
    for f in &file.fields {
        if fields.iter().any(|g: &NamedField| g.name == f.name) {
            bail!("duplicate field name '{}'", f.name);
        }
        if f.components.is_empty() || f.components.len() > system.len() {
            bail!("field '{}' needs between 1 and {} components", f.name, system.len());
        }
        let exprs = f
            .components
            .iter()
            .enumerate()
            .map(|(k, src)| {
                Expr::parse(src, &symbol_refs).map_err(|e| anyhow!("fields.{}.components[{k}] \"{src}\": {e}", f.name))
            })
            .collect::<Result<Vec<_>>>()?;
        let field = match exprs.iter().map(Expr::constant).collect::<Option<Vec<_>>>() {
            Some(values) => CoordField::constant(f.name.clone(), &values),
            None => CoordField::new(
                f.name.clone(),
                exprs.into_iter().map(|e| Arc::new(move |x: &[f64]| e.eval(x)) as Component).collect(),
            ),
        };
        fields.push(NamedField { name: f.name.clone(), field });
    }
    let field_index = |name: &str| -> Result<usize> {
        fields.iter().position(|f| f.name == name).ok_or_else(|| anyhow!("unknown field '{name}'"))
    };

    let mut loci = Vec::new();
    for l in &file.loci {
        let locus = build_locus(l, &point_names).with_context(|| format!("locus '{}'", l.name))?;
        locus.validate(&system).with_context(|| format!("locus '{}'", l.name))?;
        loci.push((l.name.clone(), locus));
    }

    let mut runs = Vec::new();
    for (k, r) in file.runs.iter().enumerate() {
        let name = r.name.clone().unwrap_or_else(|| format!("run{k}"));
        if runs.iter().any(|p: &PreparedRun| p.name == name) {
            bail!("duplicate run name '{name}'");
        }
        let field = field_index(&r.field).with_context(|| format!("run '{name}'"))?;
        let start = to_point(system.space(), &r.start).with_context(|| format!("run '{name}' start"))?;
        if !system.space().member(&start)? {
            bail!("run '{name}': start is not in X");
        }
        if !(r.t_end >= 0.0 && r.t_end.is_finite()) || !(r.step > 0.0 && r.step.is_finite()) {
            bail!("run '{name}': need t_end >= 0 and step > 0");
        }
        let dim = fields[field].field.dim();
        match r.flow {
            Flow::Coords if dim != system.len() => {
                bail!("run '{name}': field '{}' has {dim} components, the system has {}", r.field, system.len())
            }
            Flow::Coords
                if r.recover
                    && !matches!(
                        system.space().kind(),
                        metrikos::SpaceKind::Euclidean { .. } | metrikos::SpaceKind::Sphere
                    ) =>
            {
                bail!("run '{name}': point recovery needs a euclidean space or the sphere")
            }
            Flow::Sphere if *system.space().kind() != metrikos::SpaceKind::Sphere || system.len() != 3 || dim < 2 => {
                bail!("run '{name}': sphere flows need the sphere, three points and at least two components")
            }
            _ => {}
        }
        let method = match r.method.as_deref().unwrap_or("rk4") {
            "rk4" => Method::Rk4,
            "euler" => Method::Euler,
            other => bail!("run '{name}': unknown method '{other}' (rk4 | euler)"),
        };
        if r.flow == Flow::Sphere && method != Method::Rk4 {
            bail!("run '{name}': sphere flows are integrated with rk4");
        }
        runs.push(PreparedRun {
            name,
            field,
            start,
            t_end: r.t_end,
            step: r.step,
            method,
            recover: r.recover,
            flow: r.flow,
        });
    }
    let run_index = |name: &str| -> Result<usize> {
        runs.iter().position(|r| r.name == name).ok_or_else(|| anyhow!("unknown run '{name}'"))
    };

    let seed = overrides.seed.or(file.seed).unwrap_or(0);
    let mut checks = Vec::new();
    for (k, entry) in file.checks.into_iter().enumerate() {
        let name = entry.name.clone().unwrap_or_else(|| format!("{}{k}", entry.spec.kind()));
        let ctx = |e: anyhow::Error| e.context(format!("check '{name}'"));
        let tol = entry.tol.or(overrides.tol).unwrap_or_else(|| entry.spec.default_tol());
        if !(tol >= 0.0) {
            return Err(ctx(anyhow!("tol must be >= 0")));
        }
        let mut check = PreparedCheck {
            name: name.clone(),
            expect_pass: entry.expect_pass,
            tol,
            seed: seed.wrapping_add((k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            spec: entry.spec,
            exprs: Vec::new(),
            field: None,
            run: None,
            locus: None,
        };
        let compile = |srcs: &[String], names: &[&str]| -> Result<Vec<Expr>> {
            srcs.iter().map(|s| Expr::parse(s, names).map_err(|e| anyhow!("\"{s}\": {e}"))).collect()
        };
        let mut with_t = symbol_refs.clone();
        with_t.push("t");
        let dim = system.space().ambient_dim();
        match &check.spec {
            CheckSpec::Feasibility { run, .. } => {
                check.run = run.as_deref().map(run_index).transpose().map_err(ctx)?;
            }
            CheckSpec::Invariance { run, expr } => {
                check.run = Some(run_index(run).map_err(ctx)?);
                if let Some(e) = expr {
                    check.exprs = compile(std::slice::from_ref(e), &symbol_refs).map_err(ctx)?;
                }
            }
            CheckSpec::Nagumo { field, expr, locus, .. } => {
                let f = field_index(field).map_err(ctx)?;
                if fields[f].field.dim() != system.len() {
                    return Err(ctx(anyhow!("nagumo needs a field with one component per point")));
                }
                check.field = Some(f);
                if expr.is_some() && locus.is_some() {
                    return Err(ctx(anyhow!("give either expr or locus, not both")));
                }
                if let Some(e) = expr {
                    check.exprs = compile(std::slice::from_ref(e), &symbol_refs).map_err(ctx)?;
                }
                if let Some(l) = locus {
                    check.locus =
                        Some(loci.iter().position(|(n, _)| n == l).ok_or_else(|| ctx(anyhow!("unknown locus '{l}'")))?);
                }
            }
            CheckSpec::Lipschitz { field, .. } => check.field = Some(field_index(field).map_err(ctx)?),
            CheckSpec::Convergence { sequence, n_from, n_to, limit, .. } => {
                if dim != Some(sequence.len()) {
                    return Err(ctx(anyhow!("sequence needs one formula per ambient coordinate")));
                }
                if n_from > n_to || *n_from == 0 {
                    return Err(ctx(anyhow!("need 1 <= n_from <= n_to")));
                }
                to_point(system.space(), limit).map_err(ctx)?;
                check.exprs = compile(sequence, &["n"]).map_err(ctx)?;
            }
            CheckSpec::ClosedForm { run, components } => {
                let r = run_index(run).map_err(ctx)?;
                if components.len() != system.len() {
                    return Err(ctx(anyhow!("closed form needs one formula per point")));
                }
                check.run = Some(r);
                check.exprs = compile(components, &with_t).map_err(ctx)?;
            }
            CheckSpec::Jumps { run, .. } => {
                let r = run_index(run).map_err(ctx)?;
                if !runs[r].recover && runs[r].flow == Flow::Coords {
                    return Err(ctx(anyhow!("run '{run}' does not recover points")));
                }
                check.run = Some(r);
            }
            CheckSpec::Domination { pairs, .. } => {
                for p in pairs {
                    to_point(system.space(), &p.x).map_err(ctx)?;
                    to_point(system.space(), &p.y).map_err(ctx)?;
                }
            }
            CheckSpec::Derivative { curve, expect, left, right, .. } => {
                if dim != Some(curve.len()) {
                    return Err(ctx(anyhow!("curve needs one formula per ambient coordinate")));
                }
                let n = system.len();
                if expect.len() != n
                    || left.as_ref().is_some_and(|v| v.len() != n)
                    || right.as_ref().is_some_and(|v| v.len() != n)
                {
                    return Err(ctx(anyhow!("expect/left/right need one entry per point")));
                }
                for e in expect {
                    if !matches!(e.as_str(), "differentiable" | "non_differentiable" | "indeterminate") {
                        return Err(ctx(anyhow!("unknown expectation '{e}'")));
                    }
                }
                check.exprs = compile(curve, &["t"]).map_err(ctx)?;
            }
            CheckSpec::HilbertRoundtrip { dims, samples, range } => {
                if dims.is_empty() || dims.contains(&0) || *samples == 0 || !(*range > 0.0) {
                    return Err(ctx(anyhow!("need positive dims, samples and range")));
                }
            }
            CheckSpec::Mcshane { field, samples, pairs, radius } => {
                let f = field_index(field).map_err(ctx)?;
                if fields[f].field.dim() != system.len() {
                    return Err(ctx(anyhow!("mcshane needs a field with one component per point")));
                }
                if *samples < 2 || *pairs == 0 || !(*radius > 0.0) {
                    return Err(ctx(anyhow!("need samples >= 2, pairs >= 1 and radius > 0")));
                }
                check.field = Some(f);
            }
        }
        checks.push(check);
    }

    Ok(Prepared {
        name: file.name.unwrap_or_else(|| "scenario".into()),
        description: file.description.unwrap_or_default(),
        seed,
        system,
        point_names,
        fields,
        runs,
        checks,
        loci,
    })
}

fn build_space(spec: &SpaceSpec) -> Result<Space> {
    let need =
        |v: Option<usize>, what: &str| v.ok_or_else(|| anyhow!("space.{what} is required for kind '{}'", spec.kind));
    let space = match spec.kind.as_str() {
        "euclidean" => Space::euclidean(need(spec.dim, "dim")?),
        "sup_plane" | "sup_metric_plane" => Space::sup_plane(),
        "discrete" => Space::discrete(need(spec.count, "count")?),
        "sphere" | "sphere_geodesic" => Space::sphere(),
        "grid" | "grid_function_space" => {
            let (lo, hi) = (spec.lo.unwrap_or(-1.0), spec.hi.unwrap_or(3.0));
            Space::grid(GridSpace::uniform(lo, hi, need(spec.cells, "cells")?)?)
        }
        other => bail!("unknown space kind '{other}' (euclidean | sup_plane | discrete | sphere | grid)"),
    };
    let subset = match &spec.subset {
        None => Subset::All,
        Some(SubsetSpec::Custom { normal, offset }) => Subset::Custom { normal: normal.clone(), offset: *offset },
        Some(SubsetSpec::Named(name)) => match name.as_str() {
            "all" => Subset::All,
            "half_plane" => Subset::HalfPlane,
            "half_space" => Subset::HalfSpace,
            "open_strips" => Subset::OpenStrips,
            "slit_plane" | "slit_regions" => Subset::SlitPlane,
            "slit_plane_reflected" => Subset::SlitPlaneReflected,
            "sup_ball_pair" => Subset::SupBallPair,
            "abs_graph" => Subset::AbsGraph,
            other => bail!("unknown subset '{other}'"),
        },
    };
    Ok(space.with_subset(subset)?)
}

/// Sphere inputs are normalized; grid formulas are sampled in the variable `x`.
pub fn to_point(space: &Space, value: &PointValue) -> Result<SpacePoint> {
    let point = match (space.kind(), value) {
        (metrikos::SpaceKind::Discrete { .. }, PointValue::Index(i)) => SpacePoint::Index(*i),
        (metrikos::SpaceKind::GridFunction(g), PointValue::Function(src)) => {
            let e = Expr::parse(src, &["x"]).map_err(|e| anyhow!("\"{src}\": {e}"))?;
            g.sample(|x| e.eval(&[x]))
        }
        (metrikos::SpaceKind::Sphere, PointValue::Vector(v)) => {
            let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(n > 0.0) {
                bail!("sphere points must be nonzero");
            }
            SpacePoint::Vector(v.iter().map(|c| c / n).collect())
        }
        (_, PointValue::Vector(v)) => SpacePoint::Vector(v.clone()),
        (_, PointValue::Index(i)) => SpacePoint::Vector(vec![*i as f64]),
        (kind, other) => bail!("{other:?} is not a point of {kind:?}"),
    };
    space.validate(&point)?;
    Ok(point)
}

pub fn build_locus(spec: &LocusSpec, names: &[String]) -> Result<Locus> {
    let idx = |k: usize| -> Result<usize> {
        let name = spec.points.get(k).ok_or_else(|| anyhow!("locus '{}' needs more points", spec.kind))?;
        names.iter().position(|n| n == name).ok_or_else(|| anyhow!("unknown point '{name}'"))
    };
    let r = || spec.r.ok_or_else(|| anyhow!("locus '{}' needs r", spec.kind));
    let expected = if spec.kind == "sphere" { 1 } else { 2 };
    if spec.points.len() != expected {
        bail!("locus '{}' takes {expected} point name(s), got {}", spec.kind, spec.points.len());
    }
    Ok(match spec.kind.as_str() {
        "sphere" => Locus::Sphere { center: idx(0)?, r: r()? },
        "ellipsoid" => Locus::Ellipsoid { i: idx(0)?, j: idx(1)?, r: r()? },
        "hyperboloid" => Locus::Hyperboloid { i: idx(0)?, j: idx(1)?, r: r()? },
        "cylinder" => Locus::Cylinder { i: idx(0)?, j: idx(1)?, r: r()? },
        "cone" => Locus::Cone { i: idx(0)?, j: idx(1)?, theta: spec.theta.ok_or_else(|| anyhow!("cone needs theta"))? },
        "plane" => Locus::Plane { i: idx(0)?, j: idx(1)? },
        "segment" => Locus::Segment { i: idx(0)?, j: idx(1)? },
        "ray" => Locus::Ray { i: idx(0)?, j: idx(1)? },
        "line" => Locus::Line { i: idx(0)?, j: idx(1)? },
        other => bail!("unknown locus kind '{other}'"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
name = "minimal"
[space]
kind = "euclidean"
dim = 2
[[points]]
name = "a"
at = [0, 0]
[[points]]
name = "b"
at = [1.0, 0.0]
"#;

    fn prep(extra: &str) -> Result<Prepared> {
        let text = format!("{MINIMAL}{extra}");
        prepare(parse(&text, "test")?, &Overrides { seed: None, tol: None })
    }

    #[test]
    fn minimal_scenario_prepares() {
        let p = prep("").unwrap();
        assert_eq!(p.point_names, vec!["a", "b"]);
        assert_eq!(p.system.len(), 2);
        assert!(p.runs.is_empty() && p.checks.is_empty());
        assert_eq!(p.coord_symbols(), vec!["x_a", "x_b"]);
    }

    #[test]
    fn fields_runs_and_checks_resolve() {
        let p = prep(
            r#"
[[fields]]
name = "hyp"
components = ["1", "1"]
[[runs]]
name = "r"
field = "hyp"
start = [0.5, 0.5]
t_end = 0.1
step = 0.01
[[checks]]
kind = "invariance"
run = "r"
expr = "x_a - x_b"
tol = 1e-7
"#,
        )
        .unwrap();
        assert_eq!(p.runs[0].field, 0);
        assert_eq!(p.checks[0].run, Some(0));
        assert_eq!(p.checks[0].tol, 1e-7);
        assert!(p.checks[0].expect_pass);
    }

    #[test]
    fn errors_name_their_source() {
        let bad_expr = prep("[[fields]]\nname = \"f\"\ncomponents = [\"1 +\", \"x_q\"]\n").err().unwrap();
        assert!(bad_expr.is::<InputError>());
        let msg = format!("{bad_expr:#}");
        assert!(msg.contains("fields.f.components[0]") && msg.contains("column"), "{msg}");

        let unknown = prep("[[runs]]\nfield = \"nope\"\nstart = [0.5, 0.5]\nt_end = 1\nstep = 0.1\n").err().unwrap();
        assert!(format!("{unknown:#}").contains("unknown field 'nope'"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse("version = 1\nname = \n", "demo.toml").unwrap_err();
        assert!(err.is::<InputError>());
        assert!(format!("{err}").contains("line 2"), "{err}");
        let err = parse("version = 1\nbogus = 3\n[space]\nkind = \"sphere\"\n", "demo.toml").unwrap_err();
        assert!(format!("{err}").contains("bogus"));
    }

    #[test]
    fn version_and_locus_validation() {
        let err = prepare(
            parse(&MINIMAL.replace("version = 1", "version = 2"), "t").unwrap(),
            &Overrides { seed: None, tol: None },
        )
        .err()
        .unwrap();
        assert!(format!("{err:#}").contains("version"));
        let err =
            prep("[[loci]]\nname = \"e\"\nkind = \"ellipsoid\"\npoints = [\"a\", \"b\"]\nr = 0.5\n").err().unwrap();
        assert!(format!("{err:#}").contains("ellipsoid needs r"), "{err:#}");
    }

    #[test]
    fn sphere_points_are_normalized() {
        let p = to_point(&Space::sphere(), &PointValue::Vector(vec![1.0, 1.0, 0.0])).unwrap();
        let v = p.as_vector().unwrap();
        assert!((v[0] - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
