//! Metric-coordinate vector fields and their solutions.
//!
//! A [`CoordField`] prescribes one speed per coordinatizing point as a
//! function of the current metric coordinates. Solutions are integrated in
//! coordinate space `ℝ^C` and can be mapped back to ambient points by
//! multilateration. The Lipschitz machinery used to prove existence of
//! solutions (McShane extension, radial cutoff) is available as executable
//! constructions on embedded points.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{tangent_metric, TangentRep};
use crate::conversion::{multilaterate, sphere_distance_gradient, tangent_basis, MultilaterationOptions};
use crate::error::{MetrikosError, Result};
use crate::metric_core::{sup_diff, CoordinateSystem, EmbeddedPoint, MetricCoords};
use crate::spaces::{dot, normalize, SpaceKind, SpacePoint};

/// Trajectory entries must satisfy the triangle constraints within this slack.
pub const TRAJECTORY_FEASIBILITY_TOL: f64 = 1e-6;

/// Probe tolerance for [`conserved_quantities`].
pub const CONSERVATION_TOL: f64 = 1e-10;

pub type Component = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A metric-coordinate vector field `V_C(x) = (F_c(x_C))_{c ∈ C}`.
#[derive(Clone)]
pub struct CoordField {
    label: String,
    components: Vec<Component>,
}

impl fmt::Debug for CoordField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoordField").field("label", &self.label).field("components", &self.components.len()).finish()
    }
}

impl CoordField {
    pub fn new(label: impl Into<String>, components: Vec<Component>) -> Self {
        CoordField { label: label.into(), components }
    }

    pub fn constant(label: impl Into<String>, values: &[f64]) -> Self {
        let components = values.iter().map(|&v| Arc::new(move |_: &[f64]| v) as Component).collect();
        CoordField::new(label, components)
    }

    pub fn zero(dim: usize) -> Self {
        CoordField::constant("zero", &vec![0.0; dim])
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Raw component values; non-finite outputs are errors.
    pub fn velocity(&self, coords: &[f64]) -> Result<Vec<f64>> {
        self.components
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let v = f(coords);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(MetrikosError::InvalidField { component: k, value: v })
                }
            })
            .collect()
    }

    /// The tangent representative `V(x)` at the given coordinates.
    pub fn eval(&self, coords: &MetricCoords) -> Result<TangentRep> {
        if coords.len() != self.dim() {
            return Err(MetrikosError::shape(format!("{} coordinates", self.dim()), format!("{}", coords.len())));
        }
        TangentRep::new(coords.clone(), self.velocity(coords.values())?)
    }
}

/// Same as [`CoordField::eval`].
pub fn eval_field(field: &CoordField, coords: &MetricCoords) -> Result<TangentRep> {
    field.eval(coords)
}

/// Fields used by the worked examples.
pub mod catalog {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    /// `(1, −1, 0)`: solutions keep `x_a + x_b` and `x_c`, following an
    /// ellipsoid with foci `a, b` intersected with a sphere about `c`.
    pub fn sphere_ellipsoid() -> CoordField {
        CoordField::constant("sphere_ellipsoid", &[1.0, -1.0, 0.0])
    }

    /// `(1, −1, −1)`, the field whose solution is `(x_a + t, x_b − t, x_c − t)`.
    pub fn airtraffic_second() -> CoordField {
        CoordField::constant("airtraffic_second", &[1.0, -1.0, -1.0])
    }

    /// `(1, −1, 1)`, reading the third displayed line as `V_c := V_b... = 1`.
    pub fn airtraffic_second_literal() -> CoordField {
        CoordField::constant("airtraffic_second_literal", &[1.0, -1.0, 1.0])
    }

    /// `V_a = V_b = 1` on a two-point system: hyperbolic flow with foci `a, b`.
    pub fn hyperbolic_pair() -> CoordField {
        CoordField::constant("hyperbolic_pair", &[1.0, 1.0])
    }

    /// `f = g = π/2 − x_c` on `S²` with `C = {a, b, c}`; only the `a` and `b`
    /// components are prescribed.
    pub fn s2_hyperbolic() -> CoordField {
        let f: Component = Arc::new(|x: &[f64]| FRAC_PI_2 - x[2]);
        CoordField::new("s2_hyperbolic", vec![f.clone(), f])
    }

    /// `f = g = x_c − π/2`: positive beyond the great circle `x_c = π/2` and
    /// negative inside it.
    pub fn s2_directed() -> CoordField {
        let f: Component = Arc::new(|x: &[f64]| x[2] - FRAC_PI_2);
        CoordField::new("s2_directed", vec![f.clone(), f])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Euler,
    Rk4,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Rk4 => "rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TrajectoryStatus {
    Completed,
    /// The step that would have produced entry `index` left the feasible region.
    StoppedInfeasible {
        index: usize,
    },
    /// The recovered point for entry `index` was outside `X`.
    StoppedDomain {
        index: usize,
    },
}

impl TrajectoryStatus {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryStatus::Completed => "completed",
            TrajectoryStatus::StoppedInfeasible { .. } => "stopped_infeasible",
            TrajectoryStatus::StoppedDomain { .. } => "stopped_domain",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub coords: Vec<MetricCoords>,
    pub points: Option<Vec<SpacePoint>>,
    pub step: f64,
    pub method: Method,
    pub status: TrajectoryStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_coords(&self) -> &MetricCoords {
        self.coords.last().expect("trajectories hold at least the start")
    }

    fn truncate(&mut self, len: usize) {
        self.times.truncate(len);
        self.coords.truncate(len);
        if let Some(p) = self.points.as_mut() {
            p.truncate(len);
        }
    }
}

fn step_times(t_end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(MetrikosError::InvalidInput(format!("step must be positive, got {step}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(MetrikosError::InvalidInput(format!("t_end must be nonnegative, got {t_end}")));
    }
    let full = (t_end / step + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=full).map(|k| k as f64 * step).collect();
    let last = *times.last().unwrap();
    if t_end - last > 1e-9 * step {
        times.push(t_end);
    } else if full > 0 {
        *times.last_mut().unwrap() = t_end;
    }
    Ok(times)
}

fn advance(field: &CoordField, x: &[f64], h: f64, method: Method) -> Result<Vec<f64>> {
    let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> { a.iter().zip(k).map(|(x, v)| x + s * v).collect() };
    match method {
        Method::Euler => Ok(axpy(x, &field.velocity(x)?, h)),
        Method::Rk4 => {
            let k1 = field.velocity(x)?;
            let k2 = field.velocity(&axpy(x, &k1, h / 2.0))?;
            let k3 = field.velocity(&axpy(x, &k2, h / 2.0))?;
            let k4 = field.velocity(&axpy(x, &k3, h))?;
            Ok((0..x.len()).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
        }
    }
}

/// Integrates `σ⁺ = V(σ)` in coordinate space, starting from `coords_of(x0)`.
///
/// After every accepted step the new coordinates are checked against the
/// triangle constraints; the first infeasible step ends the trajectory with
/// [`TrajectoryStatus::StoppedInfeasible`] rather than being projected back.
pub fn integrate_coords(
    field: &CoordField,
    system: &CoordinateSystem,
    x0: &SpacePoint,
    t_end: f64,
    step: f64,
    method: Method,
) -> Result<Trajectory> {
    if field.dim() != system.len() {
        return Err(MetrikosError::shape(format!("field over {} points", system.len()), format!("{}", field.dim())));
    }
    let start = system.coords_of(x0)?;
    let report = system.check_feasible_tol(&start, TRAJECTORY_FEASIBILITY_TOL)?;
    if !report.is_feasible() {
        return Err(MetrikosError::Infeasible(report));
    }
    let times = step_times(t_end, step)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        coords: vec![start],
        points: None,
        step,
        method,
        status: TrajectoryStatus::Completed,
    };
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let next = match advance(field, traj.final_coords().values(), h, method) {
            Ok(v) => MetricCoords(v),
            Err(e) => {
                return Err(MetrikosError::Integration {
                    time: times[k - 1],
                    reason: e.to_string(),
                    partial: Box::new(traj),
                })
            }
        };
        if !system.check_feasible_tol(&next, TRAJECTORY_FEASIBILITY_TOL)?.is_feasible() {
            traj.status = TrajectoryStatus::StoppedInfeasible { index: k };
            break;
        }
        traj.times.push(times[k]);
        traj.coords.push(next);
    }
    Ok(traj)
}

/// [`integrate_coords`] followed by point recovery along the trajectory.
///
/// Each point is multilaterated warm-started from the previous one. When the
/// recovered point lies outside `X`, the subset's reflection alternates with
/// the same coordinates are tried; if none lies in `X` the trajectory stops
/// with [`TrajectoryStatus::StoppedDomain`].
pub fn integrate_points(
    field: &CoordField,
    system: &CoordinateSystem,
    x0: &SpacePoint,
    t_end: f64,
    step: f64,
    method: Method,
    recover: MultilaterationOptions,
) -> Result<Trajectory> {
    if !system.space().member(x0)? {
        return Err(MetrikosError::InvalidInput("initial point is not in X".into()));
    }
    let mut traj = integrate_coords(field, system, x0, t_end, step, method)?;
    let mut points = vec![x0.clone()];
    for k in 1..traj.coords.len() {
        let target = &traj.coords[k];
        let recovered = match multilaterate(system, target, &points[k - 1], recover) {
            Ok(m) => m.point,
            Err(e) => {
                let time = traj.times[k];
                traj.truncate(k);
                traj.points = Some(points);
                return Err(MetrikosError::Integration { time, reason: e.to_string(), partial: Box::new(traj) });
            }
        };
        let chosen = if system.space().member(&recovered)? {
            Some(recovered)
        } else {
            let mut found = None;
            for alt in system.space().alternates(&recovered) {
                let same = system.coords_of(&alt)?.sup_distance(target) <= recover.tol.max(1e-12) * 10.0;
                if same && system.space().member(&alt)? {
                    found = Some(alt);
                    break;
                }
            }
            found
        };
        match chosen {
            Some(p) => points.push(p),
            None => {
                traj.status = TrajectoryStatus::StoppedDomain { index: k };
                traj.truncate(k);
                break;
            }
        }
    }
    traj.points = Some(points);
    Ok(traj)
}

/// Ambient realization of a field on `S²` at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereVelocity {
    /// Tangent vector `u` at `x`, in ambient coordinates.
    pub ambient: [f64; 3],
    /// `(V_a, V_b, V_c)` induced by `u`; the first two match the prescription.
    pub coords_velocity: [f64; 3],
}

/// Solves `∇d_a · u = f`, `∇d_b · u = g` for `u` in the tangent plane at `x`.
///
/// `system` must be the unit sphere with `C = {a, b, c}`; only the first two
/// components of `field` are evaluated and the third coordinate speed is
/// whatever `u` induces. Where the two gradients are parallel (on the great
/// circle through `a` and `b`) a prescription is accepted only if it is
/// consistent, in which case the minimum-norm `u` is returned.
pub fn realize_on_sphere(field: &CoordField, system: &CoordinateSystem, x: &SpacePoint) -> Result<SphereVelocity> {
    if *system.space().kind() != SpaceKind::Sphere || system.len() != 3 {
        return Err(MetrikosError::InvalidInput(
            "realize_on_sphere needs the sphere with three coordinatizing points".into(),
        ));
    }
    if field.dim() < 2 {
        return Err(MetrikosError::InvalidInput("field must prescribe the a and b components".into()));
    }
    let coords = system.coords_of(x)?;
    let xv = x.as_vector().expect("validated");
    let prescribed = field.velocity(coords.values())?;
    let (f, g) = (prescribed[0], prescribed[1]);
    let centers: Vec<&[f64]> = system.coordinatizing_points().iter().map(|c| c.as_vector().unwrap()).collect();
    let ga = sphere_distance_gradient(xv, centers[0])
        .ok_or_else(|| MetrikosError::Degenerate("x coincides with ±a".into()))?;
    let gb = sphere_distance_gradient(xv, centers[1])
        .ok_or_else(|| MetrikosError::Degenerate("x coincides with ±b".into()))?;
    let (t1, t2) = tangent_basis(xv);
    let m = Matrix2::new(dot(&ga, &t1), dot(&ga, &t2), dot(&gb, &t1), dot(&gb, &t2));
    let rhs = Vector2::new(f, g);
    let svd = m.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(1e-300);
    let local = svd.solve(&rhs, eps).map_err(|e| MetrikosError::Degenerate(e.to_string()))?;
    let misfit = (m * local - rhs).amax();
    if misfit > 1e-10 * (1.0 + f.abs() + g.abs()) {
        return Err(MetrikosError::Degenerate(format!(
            "prescription (f, g) = ({f}, {g}) is not realizable at this point (misfit {misfit:e})"
        )));
    }
    let u =
        [local[0] * t1[0] + local[1] * t2[0], local[0] * t1[1] + local[1] * t2[1], local[0] * t1[2] + local[1] * t2[2]];
    let vc = match sphere_distance_gradient(xv, centers[2]) {
        Some(gc) => dot(&gc, &u),
        // one-sided speed away from ±c
        None => {
            let speed = dot(&u, &u).sqrt();
            if dot(xv, centers[2]) > 0.0 {
                speed
            } else {
                -speed
            }
        }
    };
    Ok(SphereVelocity { ambient: u, coords_velocity: [dot(&ga, &u), dot(&gb, &u), vc] })
}

/// RK4 in ambient `ℝ³` on the realized sphere field, renormalizing stage
/// points and every accepted step onto `S²`.
pub fn integrate_sphere_flow(
    field: &CoordField,
    system: &CoordinateSystem,
    x0: &SpacePoint,
    t_end: f64,
    step: f64,
) -> Result<Trajectory> {
    let times = step_times(t_end, step)?;
    let start = system.coords_of(x0)?;
    let mut traj = Trajectory {
        times: vec![0.0],
        coords: vec![start],
        points: Some(vec![x0.clone()]),
        step,
        method: Method::Rk4,
        status: TrajectoryStatus::Completed,
    };
    let velocity = |p: &[f64]| -> Result<[f64; 3]> {
        let mut q = p.to_vec();
        normalize(&mut q);
        Ok(realize_on_sphere(field, system, &SpacePoint::Vector(q))?.ambient)
    };
    let mut x = x0.as_vector().expect("validated").to_vec();
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        let stage =
            |base: &[f64], dir: &[f64; 3], s: f64| -> Vec<f64> { (0..3).map(|i| base[i] + s * dir[i]).collect() };
        let result = (|| -> Result<Vec<f64>> {
            let k1 = velocity(&x)?;
            let k2 = velocity(&stage(&x, &k1, h / 2.0))?;
            let k3 = velocity(&stage(&x, &k2, h / 2.0))?;
            let k4 = velocity(&stage(&x, &k3, h))?;
            let mut next: Vec<f64> =
                (0..3).map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
            normalize(&mut next);
            Ok(next)
        })();
        match result {
            Ok(next) => {
                x = next;
                let p = SpacePoint::Vector(x.clone());
                traj.coords.push(system.coords_of(&p)?);
                traj.times.push(times[k]);
                traj.points.as_mut().unwrap().push(p);
            }
            Err(e) => {
                return Err(MetrikosError::Integration {
                    time: times[k - 1],
                    reason: e.to_string(),
                    partial: Box::new(traj),
                })
            }
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    /// Largest sampled ratio `d_C^T(V(x), V(y)) / d_C(x, y)`; a lower bound on the true constant.
    pub constant: f64,
    pub first: usize,
    pub second: usize,
    pub pairs: usize,
}

/// Sampled Lipschitz constant of `V: (X, d_C) → (TX, d_C^T)`.
///
/// Because `d_C^T` includes the base-point distance, the estimate is never below 1.
/// Pairs closer than `1e-9` in `d_C` are skipped.
pub fn lipschitz_estimate(
    field: &CoordField,
    system: &CoordinateSystem,
    samples: &[SpacePoint],
) -> Result<LipschitzEstimate> {
    if samples.len() < 2 {
        return Err(MetrikosError::InvalidInput("need at least two samples".into()));
    }
    let reps = samples.iter().map(|s| field.eval(&system.coords_of(s)?)).collect::<Result<Vec<_>>>()?;
    let mut best: Option<LipschitzEstimate> = None;
    let mut pairs = 0;
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            let dc = reps[i].base.sup_distance(&reps[j].base);
            if dc <= 1e-9 {
                continue;
            }
            pairs += 1;
            let ratio = tangent_metric(&reps[i], &reps[j])? / dc;
            if best.as_ref().is_none_or(|b| ratio > b.constant) {
                best = Some(LipschitzEstimate { constant: ratio, first: i, second: j, pairs: 0 });
            }
        }
    }
    let mut est = best.ok_or_else(|| MetrikosError::InvalidInput("all sample pairs coincide in d_C".into()))?;
    est.pairs = pairs;
    Ok(est)
}

/// `f̄(x) = max_{y ∈ S} (f(y) − K · ‖x − y‖_∞)` on embedded points.
#[derive(Debug, Clone, PartialEq)]
pub struct McShaneExtension {
    points: Vec<EmbeddedPoint>,
    values: Vec<f64>,
    k: f64,
}

impl McShaneExtension {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.points
            .iter()
            .zip(&self.values)
            .map(|(p, v)| v - self.k * sup_diff(x, p.values()))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.k
    }
}

/// Builds the McShane extension of `K`-Lipschitz data, rejecting data that is
/// not `K`-Lipschitz among itself (the error names the offending pair).
pub fn mcshane_extend(values: Vec<(EmbeddedPoint, f64)>, k: f64) -> Result<McShaneExtension> {
    if values.is_empty() {
        return Err(MetrikosError::InvalidInput("extension needs at least one data point".into()));
    }
    if !(k >= 0.0) || !k.is_finite() {
        return Err(MetrikosError::InvalidInput(format!("Lipschitz constant must be >= 0, got {k}")));
    }
    let dim = values[0].0.values().len();
    for (i, (p, v)) in values.iter().enumerate() {
        if p.values().len() != dim {
            return Err(MetrikosError::shape(format!("{dim} coordinates"), format!("{}", p.values().len())));
        }
        for (j, (q, w)) in values.iter().enumerate().skip(i + 1) {
            let d = p.sup_distance(q);
            let slack = 1e-12 * 1f64.max(v.abs()).max(w.abs());
            if (v - w).abs() > k * d + slack {
                return Err(MetrikosError::InvalidInput(format!(
                    "data is not {k}-Lipschitz: points {i} and {j} have |Δf| = {} > K·d = {}",
                    (v - w).abs(),
                    k * d
                )));
            }
        }
    }
    let (points, values) = values.into_iter().unzip();
    Ok(McShaneExtension { points, values, k })
}

/// Coordinate-wise McShane extension of vector-valued data.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorMcShane {
    parts: Vec<McShaneExtension>,
}

impl VectorMcShane {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.parts.iter().map(|p| p.eval(x)).collect()
    }
}

pub fn mcshane_extend_vector(values: Vec<(EmbeddedPoint, Vec<f64>)>, k: f64) -> Result<VectorMcShane> {
    let width = values.first().map(|(_, v)| v.len()).unwrap_or(0);
    if values.iter().any(|(_, v)| v.len() != width) {
        return Err(MetrikosError::InvalidInput("vector data must have uniform length".into()));
    }
    let parts = (0..width)
        .map(|c| mcshane_extend(values.iter().map(|(p, v)| (p.clone(), v[c])).collect(), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(VectorMcShane { parts })
}

/// `f*(x) = s(‖x − center‖_∞) · f(x)` with `s = 1` inside `r/2`, `0` outside
/// `r`, and `2 − (2/r)‖x − center‖_∞` in between.
pub struct Cutoff<F> {
    inner: F,
    center: Vec<f64>,
    radius: f64,
}

pub fn cutoff<F: Fn(&[f64]) -> Vec<f64>>(inner: F, center: &EmbeddedPoint, radius: f64) -> Result<Cutoff<F>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(MetrikosError::InvalidInput(format!("cutoff radius must be positive, got {radius}")));
    }
    Ok(Cutoff { inner, center: center.values().to_vec(), radius })
}

impl<F: Fn(&[f64]) -> Vec<f64>> Cutoff<F> {
    pub fn factor(&self, x: &[f64]) -> f64 {
        let dist = sup_diff(x, &self.center);
        if dist < self.radius / 2.0 {
            1.0
        } else if dist >= self.radius {
            0.0
        } else {
            2.0 - 2.0 / self.radius * dist
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let s = self.factor(x);
        if s == 0.0 {
            return vec![0.0; self.center.len()];
        }
        (self.inner)(x).into_iter().map(|v| s * v).collect()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

/// A quantity conserved along every solution of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConservationLaw {
    /// `x_i` constant: a sphere about `C[i]`.
    Sphere { center: usize },
    /// `x_i + x_j` constant: an ellipsoid with foci `C[i], C[j]`.
    Ellipsoid { i: usize, j: usize },
    /// `x_i − x_j` constant: a hyperboloid with foci `C[i], C[j]`.
    Hyperboloid { i: usize, j: usize },
}

impl ConservationLaw {
    /// The conserved quantity at the given coordinates.
    pub fn value(&self, coords: &[f64]) -> f64 {
        match *self {
            ConservationLaw::Sphere { center } => coords[center],
            ConservationLaw::Ellipsoid { i, j } => coords[i] + coords[j],
            ConservationLaw::Hyperboloid { i, j } => coords[i] - coords[j],
        }
    }

    /// Gradient of [`value`](Self::value) with respect to the coordinates.
    pub fn gradient(&self, dim: usize) -> Vec<f64> {
        let mut g = vec![0.0; dim];
        match *self {
            ConservationLaw::Sphere { center } => g[center] = 1.0,
            ConservationLaw::Ellipsoid { i, j } => {
                g[i] = 1.0;
                g[j] = 1.0;
            }
            ConservationLaw::Hyperboloid { i, j } => {
                g[i] = 1.0;
                g[j] = -1.0;
            }
        }
        g
    }

    pub fn describe(&self, names: &[String]) -> String {
        let n = |k: usize| names.get(k).cloned().unwrap_or_else(|| k.to_string());
        match *self {
            ConservationLaw::Sphere { center } => format!("x_{} conserved (sphere, center {})", n(center), n(center)),
            ConservationLaw::Ellipsoid { i, j } => {
                format!("x_{} + x_{} conserved (ellipsoid, foci {}, {})", n(i), n(j), n(i), n(j))
            }
            ConservationLaw::Hyperboloid { i, j } => {
                format!("x_{} - x_{} conserved (hyperboloid, foci {}, {})", n(i), n(j), n(i), n(j))
            }
        }
    }
}

/// Probes the field for the sphere, ellipsoid and hyperboloid conservation
/// patterns (`V_i = 0`, `V_i + V_j = 0`, `V_i − V_j = 0`) at every probe.
pub fn conserved_quantities(field: &CoordField, probes: &[MetricCoords]) -> Result<Vec<ConservationLaw>> {
    let n = field.dim();
    if n < 2 {
        return Err(MetrikosError::InvalidInput("need at least two coordinates".into()));
    }
    if probes.is_empty() {
        return Err(MetrikosError::InvalidInput("need at least one probe".into()));
    }
    let velocities = probes.iter().map(|p| field.velocity(p.values())).collect::<Result<Vec<_>>>()?;
    let holds = |f: &dyn Fn(&[f64]) -> f64| velocities.iter().all(|v| f(v).abs() <= CONSERVATION_TOL);
    let mut laws = Vec::new();
    for i in 0..n {
        if holds(&|v| v[i]) {
            laws.push(ConservationLaw::Sphere { center: i });
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if holds(&|v| v[i] + v[j]) {
                laws.push(ConservationLaw::Ellipsoid { i, j });
            }
            if holds(&|v| v[i] - v[j]) {
                laws.push(ConservationLaw::Hyperboloid { i, j });
            }
        }
    }
    Ok(laws)
}

/// Coordinates of `count` random points of `X` (seeded), for use as probes.
pub fn random_probes(system: &CoordinateSystem, count: usize, seed: u64) -> Result<Vec<MetricCoords>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = system.sampling_box(1.0).unwrap_or_default();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 1000 * count.max(1) {
            return Err(MetrikosError::InvalidInput("could not sample points of X for probes".into()));
        }
        let p = system.space().random_point(&mut rng, &lo, &hi);
        if system.space().member(&p)? {
            out.push(system.coords_of(&p)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Space, Subset};
    use rand::Rng;
    use std::f64::consts::FRAC_PI_2;

    pub(crate) fn h3_system() -> CoordinateSystem {
        CoordinateSystem::new(
            Space::euclidean(3).with_subset(Subset::HalfSpace).unwrap(),
            vec![[1.0, 0.0, 0.0].into(), [0.0, 1.0, 0.0].into(), [0.0, 0.0, 0.0].into()],
            [0.0, 0.0, 1.0].into(),
        )
        .unwrap()
    }

    fn s2_system() -> CoordinateSystem {
        CoordinateSystem::new(
            Space::sphere(),
            vec![[1.0, 0.0, 0.0].into(), [0.0, 1.0, 0.0].into(), [0.0, 0.0, 1.0].into()],
            [0.0, 0.0, 1.0].into(),
        )
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        let t = catalog::sphere_ellipsoid().eval(&MetricCoords(vec![0.3, 2.0, 1.0])).unwrap();
        assert_eq!(t.velocity, vec![1.0, -1.0, 0.0]);
        assert_eq!(t.speed_bound, 1.0);
        let z = CoordField::zero(3).eval(&MetricCoords(vec![0.3, 2.0, 1.0])).unwrap();
        assert_eq!(z.velocity, vec![0.0; 3]);
        let s2 = catalog::s2_hyperbolic().velocity(&[1.0, 1.2, FRAC_PI_2]).unwrap();
        assert_eq!(s2, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_component_is_an_error() {
        let bad: Component = Arc::new(|x: &[f64]| (x[0] - 10.0).sqrt());
        let f = CoordField::new("bad", vec![bad]);
        assert!(matches!(f.eval(&MetricCoords(vec![1.0])), Err(MetrikosError::InvalidField { component: 0, .. })));
    }

    #[test]
    fn step_times_cover_interval() {
        let t = step_times(0.5, 1e-3).unwrap();
        assert_eq!(t.len(), 501);
        assert_eq!(*t.last().unwrap(), 0.5);
        let t = step_times(0.25, 0.1).unwrap();
        assert_eq!(t.len(), 4);
        assert!((t[2] - 0.2).abs() < 1e-15);
        assert_eq!(t[3], 0.25);
        assert_eq!(step_times(0.0, 0.1).unwrap(), vec![0.0]);
        assert!(step_times(1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_solutions() {
        let sys = h3_system();
        let x0: SpacePoint = [0.3, 0.6, 1.2].into();
        let c0 = sys.coords_of(&x0).unwrap().0;
        let traj = integrate_coords(&catalog::sphere_ellipsoid(), &sys, &x0, 0.5, 1e-3, Method::Rk4).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        let end = traj.final_coords().values();
        assert!((end[0] - (c0[0] + 0.5)).abs() < 1e-9);
        assert!((end[1] - (c0[1] - 0.5)).abs() < 1e-9);
        assert!((end[2] - c0[2]).abs() < 1e-9);

        let traj = integrate_coords(&catalog::airtraffic_second(), &sys, &x0, 0.1, 1e-3, Method::Rk4).unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        let end = traj.final_coords().values();
        assert!((end[0] - (c0[0] + 0.1)).abs() < 1e-9);
        assert!((end[1] - (c0[1] - 0.1)).abs() < 1e-9);
        assert!((end[2] - (c0[2] - 0.1)).abs() < 1e-9);

        let traj = integrate_coords(&CoordField::zero(3), &sys, &x0, 0.5, 1e-3, Method::Euler).unwrap();
        assert!(traj.coords.iter().all(|c| c.0 == c0));
    }

    #[test]
    fn leaving_the_feasible_region_stops() {
        let sys = h3_system();
        let x0: SpacePoint = [0.3, 0.6, 1.2].into();
        let traj = integrate_coords(&catalog::sphere_ellipsoid(), &sys, &x0, 5.0, 1e-2, Method::Rk4).unwrap();
        match traj.status {
            TrajectoryStatus::StoppedInfeasible { index } => assert_eq!(index, traj.len()),
            other => panic!("{other:?}"),
        }
        for c in &traj.coords {
            assert!(sys.check_feasible_tol(c, TRAJECTORY_FEASIBILITY_TOL).unwrap().is_feasible());
        }
    }

    #[test]
    fn failing_field_keeps_partial_trajectory() {
        let sys = h3_system();
        let f: Component = Arc::new(|x: &[f64]| if x[0] > 1.6 { f64::NAN } else { 1.0 });
        let z: Component = Arc::new(|_: &[f64]| 0.0);
        let field = CoordField::new("nan", vec![f, z.clone(), z]);
        let err = integrate_coords(&field, &sys, &[0.3, 0.6, 1.2].into(), 1.0, 1e-2, Method::Euler).unwrap_err();
        match err {
            MetrikosError::Integration { partial, .. } => assert!(partial.len() > 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn euler_is_first_order_and_rk4_fourth_order() {
        // V_k = −x_k / 4 has solution x_k(t) = x_k(0) e^{−t/4}
        let sys = h3_system();
        let comps: Vec<Component> = (0..3).map(|k| Arc::new(move |x: &[f64]| -0.25 * x[k]) as Component).collect();
        let field = CoordField::new("decay", comps);
        let x0: SpacePoint = [0.4, 0.5, 1.0].into();
        let c0 = sys.coords_of(&x0).unwrap().0;
        let err = |h: f64, m: Method| {
            let traj = integrate_coords(&field, &sys, &x0, 0.4, h, m).unwrap();
            let exact: Vec<f64> = c0.iter().map(|v| v * (-0.1f64).exp()).collect();
            sup_diff(traj.final_coords().values(), &exact)
        };
        let ratio_euler = err(0.02, Method::Euler) / err(0.01, Method::Euler);
        let ratio_rk4 = err(0.04, Method::Rk4) / err(0.02, Method::Rk4);
        assert!((ratio_euler - 2.0).abs() < 0.1, "{ratio_euler}");
        assert!((ratio_rk4 - 16.0).abs() < 1.0, "{ratio_rk4}");
    }

    #[test]
    fn recovered_points_follow_ellipsoid_and_sphere() {
        let sys = h3_system();
        let x0: SpacePoint = [0.3, 0.6, 1.2].into();
        let traj =
            integrate_points(&catalog::sphere_ellipsoid(), &sys, &x0, 0.5, 1e-2, Method::Rk4, Default::default())
                .unwrap();
        let c0 = sys.coords_of(&x0).unwrap().0;
        let points = traj.points.as_ref().unwrap();
        assert_eq!(points.len(), traj.len());
        for (p, c) in points.iter().zip(&traj.coords) {
            let actual = sys.coords_of(p).unwrap();
            assert!(actual.sup_distance(c) < 1e-8);
            assert!((actual.0[0] + actual.0[1] - c0[0] - c0[1]).abs() < 1e-8);
            assert!((actual.0[2] - c0[2]).abs() < 1e-8);
            assert!(p.as_vector().unwrap()[2] > 0.0);
        }
        let still =
            integrate_points(&CoordField::zero(3), &sys, &x0, 0.1, 1e-2, Method::Rk4, Default::default()).unwrap();
        assert!(still
            .points
            .unwrap()
            .iter()
            .all(|p| sup_diff(p.as_vector().unwrap(), x0.as_vector().unwrap()) < 1e-12));
    }

    #[test]
    fn strips_flow_jumps_in_d() {
        let sys = CoordinateSystem::new(
            Space::euclidean(2).with_subset(Subset::OpenStrips).unwrap(),
            vec![[0.0, 0.0].into(), [1.0, 0.0].into()],
            [0.5, 0.5].into(),
        )
        .unwrap();
        let x0: SpacePoint = [0.5, 2.5].into();
        let traj = integrate_points(&catalog::hyperbolic_pair(), &sys, &x0, 2.0, 1e-2, Method::Rk4, Default::default())
            .unwrap();
        assert_eq!(traj.status, TrajectoryStatus::Completed);
        let points = traj.points.unwrap();
        let max_coord_jump = traj.coords.windows(2).map(|w| w[0].sup_distance(&w[1])).fold(0.0, f64::max);
        let max_point_jump = points.windows(2).map(|w| sys.distance(&w[0], &w[1]).unwrap()).fold(0.0, f64::max);
        assert!(max_coord_jump < 0.011);
        assert!(max_point_jump > 1.0);
        assert!(points.iter().all(|p| sys.space().member(p).unwrap()));
    }

    #[test]
    fn domain_exit_without_alternate_stops() {
        // X = {x < 0.6}; the flow circles the origin clockwise through x = 1/√2
        let sys = CoordinateSystem::new(
            Space::euclidean(2).with_subset(Subset::Custom { normal: vec![-1.0, 0.0], offset: -0.6 }).unwrap(),
            vec![[0.0, 0.0].into(), [0.0, 1.0].into()],
            [0.0, 0.5].into(),
        )
        .unwrap();
        let field = CoordField::constant("clockwise", &[0.0, 1.0]);
        let traj =
            integrate_points(&field, &sys, &[0.5, 0.5].into(), 0.3, 1e-2, Method::Rk4, Default::default()).unwrap();
        assert!(matches!(traj.status, TrajectoryStatus::StoppedDomain { index } if index == traj.len()));
        assert!(traj.len() > 2);
        assert_eq!(traj.points.as_ref().unwrap().len(), traj.len());
        assert!(traj.points.unwrap().iter().all(|p| p.as_vector().unwrap()[0] < 0.6));
    }

    #[test]
    fn sphere_realization_examples() {
        let sys = s2_system();
        let x = {
            let s = 1.0 / 3f64.sqrt();
            SpacePoint::from([s, s, s])
        };
        let zero = CoordField::zero(2);
        let v = realize_on_sphere(&zero, &sys, &x).unwrap();
        assert!(v.ambient.iter().all(|c| c.abs() < 1e-15));

        let field = catalog::s2_hyperbolic();
        let v = realize_on_sphere(&field, &sys, &x).unwrap();
        let coords = sys.coords_of(&x).unwrap();
        let f = FRAC_PI_2 - coords.0[2];
        let xs = x.as_vector().unwrap();
        // −(u·a)/√(1 − (x·a)²) = f, same for b
        let da = -v.ambient[0] / (1.0 - xs[0] * xs[0]).sqrt();
        let db = -v.ambient[1] / (1.0 - xs[1] * xs[1]).sqrt();
        assert!((da - f).abs() < 1e-10 && (db - f).abs() < 1e-10);
        assert!(dot(&v.ambient, xs).abs() < 1e-12);

        // on the great circle through a and b the prescription vanishes
        let on_circle = {
            let s = 0.5f64.sqrt();
            SpacePoint::from([s, s, 0.0])
        };
        let v = realize_on_sphere(&field, &sys, &on_circle).unwrap();
        assert!(v.ambient.iter().all(|c| c.abs() < 1e-12));

        // an inconsistent prescription on that circle is degenerate
        let odd: Component = Arc::new(|_: &[f64]| 1.0);
        let neg: Component = Arc::new(|_: &[f64]| -3.0);
        let bad = CoordField::new("bad", vec![odd, neg]);
        assert!(matches!(realize_on_sphere(&bad, &sys, &on_circle), Err(MetrikosError::Degenerate(_))));
        assert!(realize_on_sphere(&field, &sys, &[1.0, 0.0, 0.0].into()).is_err());
    }

    #[test]
    fn directed_field_sign_conditions() {
        let sys = s2_system();
        let f = catalog::s2_directed();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = sys.space().random_point(&mut rng, &[], &[]);
            let c = sys.coords_of(&p).unwrap();
            let v = f.velocity(c.values()).unwrap();
            if c.0[2] > FRAC_PI_2 + 1e-9 {
                assert!(v[0] > 0.0 && v[1] > 0.0);
            } else if c.0[2] < FRAC_PI_2 - 1e-9 {
                assert!(v[0] < 0.0 && v[1] < 0.0);
            }
        }
        assert_eq!(f.velocity(&[0.3, 0.4, FRAC_PI_2]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn lipschitz_examples() {
        let sys = h3_system();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<SpacePoint> = (0..60)
            .map(|_| [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), rng.random_range(0.1..2.0)].into())
            .collect();
        let est = lipschitz_estimate(&catalog::sphere_ellipsoid(), &sys, &samples).unwrap();
        assert!((est.constant - 1.0).abs() < 1e-12);
        let est = lipschitz_estimate(&CoordField::zero(3), &sys, &samples).unwrap();
        assert!((est.constant - 1.0).abs() < 1e-12);
        let comps: Vec<Component> = (0..3).map(|k| Arc::new(move |x: &[f64]| 2.0 * x[k]) as Component).collect();
        let est = lipschitz_estimate(&CoordField::new("double", comps), &sys, &samples).unwrap();
        assert!(est.constant >= 1.0 && est.constant <= 2.0 + 1e-12);
        assert!(est.constant > 1.9);
        assert!(lipschitz_estimate(&CoordField::zero(3), &sys, &samples[..1]).is_err());
    }

    #[test]
    fn mcshane_examples() {
        let data = vec![(EmbeddedPoint(vec![0.0]), 0.0), (EmbeddedPoint(vec![1.0]), 1.0)];
        let ext = mcshane_extend(data.clone(), 1.0).unwrap();
        assert_eq!(ext.eval(&[0.5]), 0.5);
        assert_eq!(ext.eval(&[2.0]), 0.0);
        assert_eq!(ext.eval(&[0.0]), 0.0);
        assert_eq!(ext.eval(&[1.0]), 1.0);
        assert!(mcshane_extend(data, 0.5).is_err());
    }

    #[test]
    fn cutoff_regions() {
        let center = EmbeddedPoint(vec![0.0, 0.0]);
        let f = |x: &[f64]| vec![1.0 + x[0], 2.0 - x[1]];
        let c = cutoff(f, &center, 2.0).unwrap();
        let inner = [0.5, 0.0];
        assert_eq!(c.eval(&inner), f(&inner));
        let mid = [0.0, 1.5];
        let got = c.eval(&mid);
        let want: Vec<f64> = f(&mid).iter().map(|v| 0.5 * v).collect();
        assert!(sup_diff(&got, &want) < 1e-15);
        assert_eq!(c.eval(&[4.0, 0.0]), vec![0.0, 0.0]);
        assert!(cutoff(f, &center, 0.0).is_err());
    }

    #[test]
    fn conservation_probes() {
        let sys = h3_system();
        let probes = random_probes(&sys, 64, 4).unwrap();
        let laws = conserved_quantities(&catalog::sphere_ellipsoid(), &probes).unwrap();
        assert_eq!(laws, vec![ConservationLaw::Sphere { center: 2 }, ConservationLaw::Ellipsoid { i: 0, j: 1 }]);

        let pair_probes: Vec<MetricCoords> = probes.iter().map(|p| MetricCoords(p.0[..2].to_vec())).collect();
        let laws = conserved_quantities(&catalog::hyperbolic_pair(), &pair_probes).unwrap();
        assert_eq!(laws, vec![ConservationLaw::Hyperboloid { i: 0, j: 1 }]);

        let laws = conserved_quantities(&CoordField::zero(3), &probes).unwrap();
        assert_eq!(laws.len(), 3 + 2 * 3);

        let laws = conserved_quantities(&catalog::airtraffic_second(), &probes).unwrap();
        assert!(laws.contains(&ConservationLaw::Ellipsoid { i: 0, j: 1 }));
        assert!(laws.contains(&ConservationLaw::Hyperboloid { i: 1, j: 2 }));
    }
}
