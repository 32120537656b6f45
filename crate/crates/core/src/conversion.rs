//! Conversions between orthonormal and metric coordinates, and general point
//! recovery from metric coordinates (multilateration).

use nalgebra::{DMatrix, DVector};

use crate::error::{MetrikosError, Result};
use crate::metric_core::{CoordinateSystem, MetricCoords};
use crate::spaces::{dot, normalize, Space, SpaceKind, SpacePoint};

/// Radicands below this are treated as an internal inconsistency rather than rounding.
const RADICAND_TOL: f64 = 1e-12;

/// Feasibility slack accepted on multilateration targets.
const TARGET_FEASIBILITY_TOL: f64 = 1e-6;

/// The coordinate system `(ℝⁿ, d, ℝⁿ, {e₁, …, eₙ, 0})`, with `C` ordered basis first.
pub fn orthonormal_system(n: usize) -> Result<CoordinateSystem> {
    if n == 0 {
        return Err(MetrikosError::InvalidInput("dimension must be >= 1".into()));
    }
    let mut coords: Vec<SpacePoint> = (0..n)
        .map(|k| {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            SpacePoint::Vector(e)
        })
        .collect();
    coords.push(SpacePoint::Vector(vec![0.0; n]));
    CoordinateSystem::new(Space::euclidean(n), coords, SpacePoint::Vector(vec![0.0; n]))
}

/// `w_c = (‖w‖² − 2⟨w, c⟩ + 1)^{1/2}` for basis vectors `c`, followed by `w_0 = ‖w‖`.
pub fn hilbert_to_metric(w: &[f64]) -> Result<MetricCoords> {
    let norm_sq = dot(w, w);
    let mut out = Vec::with_capacity(w.len() + 1);
    for (k, &wk) in w.iter().enumerate() {
        let radicand = norm_sq - 2.0 * wk + 1.0;
        if radicand < -RADICAND_TOL {
            return Err(MetrikosError::Consistency(format!("negative radicand {radicand} for basis coordinate {k}")));
        }
        out.push(radicand.max(0.0).sqrt());
    }
    out.push(norm_sq.sqrt());
    Ok(MetricCoords(out))
}

/// `w̃_c = (w_0² − w_c² + 1) / 2` for each basis vector `c`.
///
/// Expects coordinates over `basis ∪ {0}` in the order produced by
/// [`hilbert_to_metric`]; infeasible tuples are rejected with the report attached.
pub fn metric_to_hilbert(coords: &MetricCoords) -> Result<Vec<f64>> {
    if coords.len() < 2 {
        return Err(MetrikosError::shape("at least 2 coordinates", format!("{}", coords.len())));
    }
    let n = coords.len() - 1;
    let report = orthonormal_system(n)?.check_feasible(coords)?;
    if !report.is_feasible() {
        return Err(MetrikosError::Infeasible(report));
    }
    let v = coords.values();
    let w0_sq = v[n] * v[n];
    Ok(v[..n].iter().map(|wc| (w0_sq - wc * wc + 1.0) / 2.0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultilaterationOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for MultilaterationOptions {
    fn default() -> Self {
        MultilaterationOptions { max_iter: 100, tol: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Multilateration {
    pub point: SpacePoint,
    pub iterations: usize,
    /// `max_k |d(x, C[k]) − target[k]|` at the returned point.
    pub residual: f64,
}

enum Geometry {
    Euclidean(usize),
    Sphere,
}

/// Recovers a point from its metric coordinates by damped Gauss-Newton on
/// `r_k(x) = d(x, C[k]) − target[k]`.
///
/// Supported on Euclidean spaces and the unit sphere. On the sphere the
/// iterate moves in the tangent plane and is renormalized after every step.
/// When several points share the target coordinates, the one in the initial
/// guess's basin is returned.
pub fn multilaterate(
    system: &CoordinateSystem,
    target: &MetricCoords,
    initial_guess: &SpacePoint,
    opts: MultilaterationOptions,
) -> Result<Multilateration> {
    let geometry = match system.space().kind() {
        SpaceKind::Euclidean { dim } => Geometry::Euclidean(*dim),
        SpaceKind::Sphere => Geometry::Sphere,
        other => return Err(MetrikosError::InvalidInput(format!("multilateration is not supported on {other:?}"))),
    };
    system.space().validate(initial_guess)?;
    let report = system.check_feasible_tol(target, TARGET_FEASIBILITY_TOL)?;
    if !report.is_feasible() {
        return Err(MetrikosError::Infeasible(report));
    }
    let centers: Vec<&[f64]> =
        system.coordinatizing_points().iter().map(|c| c.as_vector().expect("validated vector space")).collect();
    let target = target.values();
    let space = system.space();

    let residuals = |x: &[f64]| -> Vec<f64> {
        centers
            .iter()
            .zip(target)
            .map(|(c, t)| {
                let d = match geometry {
                    Geometry::Euclidean(_) => crate::spaces::euclidean(x, c),
                    Geometry::Sphere => crate::spaces::great_circle(x, c),
                };
                d - t
            })
            .collect()
    };
    // Squared distances are smooth at the centers, where the plain distance has a cone apex.
    let solver_residuals = |x: &[f64]| -> Vec<f64> {
        match geometry {
            Geometry::Euclidean(_) => centers
                .iter()
                .zip(target)
                .map(|(c, t)| x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() - t * t)
                .collect(),
            Geometry::Sphere => residuals(x),
        }
    };
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let max_abs = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut x = initial_guess.as_vector().expect("validated vector space").to_vec();
    let mut r = solver_residuals(&x);
    for iter in 0..opts.max_iter {
        let res = max_abs(&residuals(&x));
        if res <= opts.tol {
            return Ok(Multilateration { point: SpacePoint::Vector(x), iterations: iter, residual: res });
        }
        // Jacobian in local coordinates; `basis` maps local steps to ambient ones.
        let (jac, basis) = match geometry {
            Geometry::Euclidean(n) => (euclidean_jacobian(&x, &centers, n), None),
            Geometry::Sphere => {
                let (t1, t2) = tangent_basis(&x);
                (sphere_jacobian(&x, &centers, &t1, &t2), Some((t1, t2)))
            }
        };
        let step = solve_least_squares(jac, &r)?;
        let current = cost(&r);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-10 {
            let mut trial = x.clone();
            match &basis {
                None => trial.iter_mut().zip(step.iter()).for_each(|(t, s)| *t += alpha * s),
                Some((t1, t2)) => {
                    for k in 0..3 {
                        trial[k] += alpha * (step[0] * t1[k] + step[1] * t2[k]);
                    }
                    normalize(&mut trial);
                }
            }
            let tr = solver_residuals(&trial);
            if cost(&tr) < current {
                accepted = Some((trial, tr));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nx, nr)) => {
                x = nx;
                r = nr;
            }
            None => {
                return Err(MetrikosError::NoConvergence { iterations: iter + 1, residual: res });
            }
        }
    }
    let res = max_abs(&residuals(&x));
    if res <= opts.tol {
        let point = SpacePoint::Vector(x);
        debug_assert!(space.validate(&point).is_ok());
        return Ok(Multilateration { point, iterations: opts.max_iter, residual: res });
    }
    Err(MetrikosError::NoConvergence { iterations: opts.max_iter, residual: res })
}

/// Jacobian of the squared distances.
fn euclidean_jacobian(x: &[f64], centers: &[&[f64]], n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(centers.len(), n);
    for (row, c) in centers.iter().enumerate() {
        for k in 0..n {
            j[(row, k)] = 2.0 * (x[k] - c[k]);
        }
    }
    j
}

/// Gradient of `x ↦ acos(x · c)` restricted to the tangent plane, in the basis `(t1, t2)`.
fn sphere_jacobian(x: &[f64], centers: &[&[f64]], t1: &[f64; 3], t2: &[f64; 3]) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(centers.len(), 2);
    for (row, c) in centers.iter().enumerate() {
        if let Some(g) = sphere_distance_gradient(x, c) {
            j[(row, 0)] = dot(&g, t1);
            j[(row, 1)] = dot(&g, t2);
        }
    }
    j
}

/// Tangent-plane gradient `−(c − (x·c) x) / ‖c − (x·c) x‖` of the geodesic distance to `c`,
/// or `None` at `x = ±c` where the distance is not differentiable.
pub(crate) fn sphere_distance_gradient(x: &[f64], c: &[f64]) -> Option<[f64; 3]> {
    let xc = dot(x, c);
    let p = [c[0] - xc * x[0], c[1] - xc * x[1], c[2] - xc * x[2]];
    let norm = dot(&p, &p).sqrt();
    (norm > 1e-15).then(|| [-p[0] / norm, -p[1] / norm, -p[2] / norm])
}

/// Orthonormal basis of the tangent plane at the unit vector `x`.
pub(crate) fn tangent_basis(x: &[f64]) -> ([f64; 3], [f64; 3]) {
    let k = (0..3).min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
    let mut t1 = [0.0; 3];
    t1[k] = 1.0;
    let proj = x[k];
    for i in 0..3 {
        t1[i] -= proj * x[i];
    }
    normalize(&mut t1);
    let t2 = [x[1] * t1[2] - x[2] * t1[1], x[2] * t1[0] - x[0] * t1[2], x[0] * t1[1] - x[1] * t1[0]];
    (t1, t2)
}

fn solve_least_squares(jac: DMatrix<f64>, r: &[f64]) -> Result<DVector<f64>> {
    let svd = jac.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin < 1e-12 * smax {
        return Err(MetrikosError::Degenerate(format!("Jacobian is singular (singular values {smin:e} .. {smax:e})")));
    }
    let rhs = DVector::from_iterator(r.len(), r.iter().map(|v| -v));
    svd.solve(&rhs, 0.0).map_err(|e| MetrikosError::Degenerate(e.to_string()))
}
