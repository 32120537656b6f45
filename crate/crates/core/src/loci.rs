//! Geometric loci written as equations in metric coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MetrikosError, Result};
use crate::metric_core::{CoordinateSystem, MetricCoords};
use crate::spaces::{dot, normalize, SpaceKind, SpacePoint};

/// Sampled points must satisfy their locus equation to this tolerance.
pub const LOCUS_SAMPLE_TOL: f64 = 1e-8;

const HERON_TOL: f64 = 1e-12;

/// Indices refer to the coordinatizing points of a system; `d` below is
/// `d(C[i], C[j])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Locus {
    /// `x_i = r`
    Sphere { center: usize, r: f64 },
    /// `x_i + x_j = r`, `r ≥ d`
    Ellipsoid { i: usize, j: usize, r: f64 },
    /// `|x_i − x_j| = r`, `0 < r < d`
    Hyperboloid { i: usize, j: usize, r: f64 },
    /// Heron area of `(x, C[i], C[j])` equals `r`: axis `C[i]C[j]`, radius `2r/d`.
    Cylinder { i: usize, j: usize, r: f64 },
    /// `x_j² = d² + x_i² − 2·x_i·d·cos θ`: half-cone with vertex `C[i]`.
    Cone { i: usize, j: usize, theta: f64 },
    /// `x_i = x_j`
    Plane { i: usize, j: usize },
    /// `x_i + x_j = d`
    Segment { i: usize, j: usize },
    /// `x_i ± x_j = d`, from `C[i]` through `C[j]`
    Ray { i: usize, j: usize },
    /// `|x_i ± x_j| = d`
    Line { i: usize, j: usize },
}

/// Which sign choice of a `±` equation matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    Single,
    /// `x_i + x_j = d`
    Sum,
    /// `x_i − x_j = d`
    Difference,
    /// `x_j − x_i = d`
    ReverseDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Membership {
    pub member: bool,
    pub residual: f64,
    pub branch: Branch,
}

impl Locus {
    pub fn name(&self) -> &'static str {
        match self {
            Locus::Sphere { .. } => "sphere",
            Locus::Ellipsoid { .. } => "ellipsoid",
            Locus::Hyperboloid { .. } => "hyperboloid",
            Locus::Cylinder { .. } => "cylinder",
            Locus::Cone { .. } => "cone",
            Locus::Plane { .. } => "plane",
            Locus::Segment { .. } => "segment",
            Locus::Ray { .. } => "ray",
            Locus::Line { .. } => "line",
        }
    }

    fn pair(&self) -> Option<(usize, usize)> {
        match *self {
            Locus::Sphere { .. } => None,
            Locus::Ellipsoid { i, j, .. }
            | Locus::Hyperboloid { i, j, .. }
            | Locus::Cylinder { i, j, .. }
            | Locus::Cone { i, j, .. }
            | Locus::Plane { i, j }
            | Locus::Segment { i, j }
            | Locus::Ray { i, j }
            | Locus::Line { i, j } => Some((i, j)),
        }
    }

    /// Checks indices and the parameter range against the system.
    pub fn validate(&self, system: &CoordinateSystem) -> Result<()> {
        let n = system.len();
        let check = |k: usize| {
            if k < n {
                Ok(())
            } else {
                Err(MetrikosError::IndexOutOfRange { index: k, len: n })
            }
        };
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(MetrikosError::InvalidInput(format!("{what} must be finite, got {v}")))
            }
        };
        if let Locus::Sphere { center, r } = *self {
            check(center)?;
            finite(r, "radius")?;
            if r < 0.0 {
                return Err(MetrikosError::EmptyLocus(format!("sphere radius {r} is negative")));
            }
            return Ok(());
        }
        let (i, j) = self.pair().expect("pair locus");
        check(i)?;
        check(j)?;
        if i == j {
            return Err(MetrikosError::InvalidInput(format!("{} needs two distinct points", self.name())));
        }
        let d = system.pair_distance(i, j);
        match *self {
            Locus::Ellipsoid { r, .. } => {
                finite(r, "r")?;
                if r < d {
                    return Err(MetrikosError::EmptyLocus(format!("ellipsoid needs r >= d(a,b) = {d}, got {r}")));
                }
            }
            Locus::Hyperboloid { r, .. } => {
                finite(r, "r")?;
                if !(r > 0.0 && r < d) {
                    return Err(MetrikosError::EmptyLocus(format!("hyperboloid needs 0 < r < d(a,b) = {d}, got {r}")));
                }
            }
            Locus::Cylinder { r, .. } => {
                finite(r, "r")?;
                if r < 0.0 {
                    return Err(MetrikosError::EmptyLocus(format!("cylinder parameter {r} is negative")));
                }
            }
            Locus::Cone { theta, .. } => {
                finite(theta, "theta")?;
                if !(theta > 0.0 && theta < std::f64::consts::PI) {
                    return Err(MetrikosError::InvalidInput(format!("cone angle must lie in (0, pi), got {theta}")));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

fn best_branch(candidates: &[(f64, Branch)]) -> (f64, Branch) {
    candidates.iter().copied().min_by(|a, b| a.0.abs().total_cmp(&b.0.abs())).expect("at least one branch")
}

fn residual_with_branch(locus: &Locus, coords: &MetricCoords, system: &CoordinateSystem) -> Result<(f64, Branch)> {
    if coords.len() != system.len() {
        return Err(MetrikosError::shape(format!("{} coordinates", system.len()), format!("{}", coords.len())));
    }
    let x = coords.values();
    if let Locus::Sphere { center, r } = *locus {
        return Ok((x[center] - r, Branch::Single));
    }
    let (i, j) = locus.pair().expect("pair locus");
    let (a, b, d) = (x[i], x[j], system.pair_distance(i, j));
    Ok(match *locus {
        Locus::Ellipsoid { r, .. } => (a + b - r, Branch::Single),
        Locus::Hyperboloid { r, .. } => ((a - b).abs() - r, Branch::Single),
        Locus::Cylinder { r, .. } => {
            let s = (a + b + d) / 2.0;
            let radicand = s * (s - a) * (s - b) * (s - d);
            let scale = s.powi(4).max(1.0);
            if radicand < -HERON_TOL * scale {
                let report = system.check_feasible_tol(coords, HERON_TOL)?;
                if !report.is_feasible() {
                    return Err(MetrikosError::Infeasible(report));
                }
            }
            (radicand.max(0.0).sqrt() - r, Branch::Single)
        }
        Locus::Cone { theta, .. } => (b * b - d * d - a * a + 2.0 * a * d * theta.cos(), Branch::Single),
        Locus::Plane { .. } => (a - b, Branch::Single),
        Locus::Segment { .. } => (a + b - d, Branch::Single),
        Locus::Ray { .. } => best_branch(&[(a + b - d, Branch::Sum), (a - b - d, Branch::Difference)]),
        Locus::Line { .. } => best_branch(&[
            (a + b - d, Branch::Sum),
            (a - b - d, Branch::Difference),
            (b - a - d, Branch::ReverseDifference),
        ]),
        Locus::Sphere { .. } => unreachable!(),
    })
}

/// Signed residual of the locus equation; for `±` equations, the branch with
/// the smallest absolute residual.
pub fn locus_residual(locus: &Locus, coords: &MetricCoords, system: &CoordinateSystem) -> Result<f64> {
    locus.validate(system)?;
    Ok(residual_with_branch(locus, coords, system)?.0)
}

pub fn locus_membership(
    locus: &Locus,
    coords: &MetricCoords,
    system: &CoordinateSystem,
    tol: f64,
) -> Result<Membership> {
    locus.validate(system)?;
    let (residual, branch) = residual_with_branch(locus, coords, system)?;
    Ok(Membership { member: residual.abs() <= tol, residual, branch })
}

/// [`sample_locus_in`] with the default box, `C`'s bounding box inflated by
/// three diameters.
pub fn sample_locus(locus: &Locus, system: &CoordinateSystem, count: usize, seed: u64) -> Result<Vec<SpacePoint>> {
    sample_locus_in(locus, system, count, seed, 3.0)
}

/// `count` points of `X` on the locus, each with `|residual| ≤ 1e−8`, from
/// seeded random starts corrected by Newton steps along the ambient gradient.
pub fn sample_locus_in(
    locus: &Locus,
    system: &CoordinateSystem,
    count: usize,
    seed: u64,
    inflate: f64,
) -> Result<Vec<SpacePoint>> {
    locus.validate(system)?;
    let sphere = match system.space().kind() {
        SpaceKind::Euclidean { .. } => false,
        SpaceKind::Sphere => true,
        other => {
            return Err(MetrikosError::InvalidInput(format!(
                "locus sampling needs a euclidean space or the sphere, got {other:?}"
            )))
        }
    };
    let (lo, hi) = system
        .sampling_box(inflate)
        .ok_or_else(|| MetrikosError::InvalidInput("no sampling box for this space".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let residual = |p: &[f64]| -> Result<f64> {
        let coords = system.coords_of(&SpacePoint::Vector(p.to_vec()))?;
        Ok(residual_with_branch(locus, &coords, system)?.0)
    };
    let budget = 200 * count.max(1);
    let mut out = Vec::with_capacity(count);
    for _ in 0..budget {
        if out.len() == count {
            break;
        }
        let start = system.space().random_point(&mut rng, &lo, &hi);
        let mut p = start.as_vector().expect("vector space").to_vec();
        if let Some(q) = newton_project(&residual, &mut p, sphere)? {
            let point = SpacePoint::Vector(q);
            if system.space().member(&point)? {
                out.push(point);
            }
        }
    }
    if out.len() < count {
        return Err(MetrikosError::EmptyLocus(format!(
            "found {} of {count} {} points within the sampling budget",
            out.len(),
            locus.name()
        )));
    }
    Ok(out)
}

fn newton_project(residual: &dyn Fn(&[f64]) -> Result<f64>, p: &mut [f64], sphere: bool) -> Result<Option<Vec<f64>>> {
    for _ in 0..200 {
        let g = residual(p)?;
        if !g.is_finite() {
            return Ok(None);
        }
        if g.abs() <= LOCUS_SAMPLE_TOL * 0.1 {
            break;
        }
        let mut grad = Vec::with_capacity(p.len());
        for k in 0..p.len() {
            let h = 1e-7 * p[k].abs().max(1.0);
            let mut up = p.to_vec();
            let mut down = p.to_vec();
            up[k] += h;
            down[k] -= h;
            if sphere {
                normalize(&mut up);
                normalize(&mut down);
            }
            grad.push((residual(&up)? - residual(&down)?) / (2.0 * h));
        }
        if sphere {
            let radial = dot(&grad, p);
            for (gk, pk) in grad.iter_mut().zip(p.iter()) {
                *gk -= radial * pk;
            }
        }
        let norm2 = dot(&grad, &grad);
        if !(norm2 > 1e-20) {
            return Ok(None);
        }
        for (pk, gk) in p.iter_mut().zip(&grad) {
            *pk -= g * gk / norm2;
        }
        if sphere {
            normalize(p);
        }
    }
    let g = residual(p)?;
    Ok((g.abs() <= LOCUS_SAMPLE_TOL).then(|| p.to_vec()))
}
