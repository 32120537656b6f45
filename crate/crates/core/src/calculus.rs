//! Coordinate-wise derivatives of curves.
//!
//! A curve `φ` is differentiated through its metric coordinates
//! `φ_c(t) = d(φ(t), c)`: each coordinate gets its own sequence of difference
//! quotients over a decreasing list of step sizes, followed by one Richardson
//! step. Finite differencing cannot prove a limit fails to exist, so two-sided
//! checks report an explicit indeterminate band.

use serde::Serialize;

use crate::error::{MetrikosError, Result};
use crate::metric_core::{sup_diff, CoordinateSystem, MetricCoords};
use crate::spaces::{GridSpace, SpacePoint};

/// A curve `t ↦ φ(t)` defined on `[lo, hi]`.
pub struct Curve<F> {
    map: F,
    lo: f64,
    hi: f64,
}

impl<F: Fn(f64) -> SpacePoint> Curve<F> {
    pub fn new(map: F, lo: f64, hi: f64) -> Self {
        Curve { map, lo, hi }
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn at(&self, t: f64) -> Result<SpacePoint> {
        if t < self.lo || t > self.hi || !t.is_finite() {
            return Err(MetrikosError::InvalidInput(format!(
                "t = {t} outside curve domain [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok((self.map)(t))
    }
}

/// A tangent representative: base coordinates plus forward coordinate velocities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentRep {
    pub base: MetricCoords,
    pub velocity: Vec<f64>,
    pub speed_bound: f64,
}

impl TangentRep {
    pub fn new(base: MetricCoords, velocity: Vec<f64>) -> Result<Self> {
        if base.len() != velocity.len() {
            return Err(MetrikosError::shape(
                format!("{} velocity components", base.len()),
                format!("{}", velocity.len()),
            ));
        }
        let speed_bound = velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !speed_bound.is_finite() {
            return Err(MetrikosError::InvalidInput("velocity is not finite".into()));
        }
        Ok(TangentRep { base, velocity, speed_bound })
    }
}

/// The tangent-bundle metric `max(d_C(base), sup_c |Δvelocity_c|)`.
pub fn tangent_metric(u: &TangentRep, v: &TangentRep) -> Result<f64> {
    if u.base.len() != v.base.len() || u.velocity.len() != v.velocity.len() {
        return Err(MetrikosError::shape(
            format!("{} coordinates", u.base.len()),
            format!("{} coordinates", v.base.len()),
        ));
    }
    Ok(u.base.sup_distance(&v.base).max(sup_diff(&u.velocity, &v.velocity)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeOptions {
    /// Strictly decreasing positive step sizes; at least three.
    pub h_seq: Vec<f64>,
    pub tol: f64,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        DerivativeOptions { h_seq: (0..=12).map(|k| 1e-2 * 0.5f64.powi(k)).collect(), tol: 1e-6 }
    }
}

impl DerivativeOptions {
    fn validate(&self) -> Result<()> {
        if self.h_seq.len() < 3 {
            return Err(MetrikosError::InvalidInput("h_seq needs at least three steps".into()));
        }
        if self.h_seq.iter().any(|h| !(*h > 0.0)) || self.h_seq.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(MetrikosError::InvalidInput("h_seq must be positive and strictly decreasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardDerivative {
    pub tangent: TangentRep,
    /// Per coordinate: last two extrapolated quotients agree within `tol`.
    pub converged: Vec<bool>,
    /// Per coordinate: `|R_last − R_prev|`.
    pub last_change: Vec<f64>,
}

impl ForwardDerivative {
    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Differentiability {
    Differentiable,
    NonDifferentiable,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralDerivative {
    pub base: MetricCoords,
    /// Extrapolated one-sided quotients per coordinate.
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub status: Vec<Differentiability>,
}

impl CentralDerivative {
    pub fn all_differentiable(&self) -> bool {
        self.status.iter().all(|s| *s == Differentiability::Differentiable)
    }

    /// Mean of the one-sided quotients.
    pub fn velocity(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(l, r)| 0.5 * (l + r)).collect()
    }
}

struct OneSided {
    extrapolated: Vec<f64>,
    change: Vec<f64>,
}

/// Richardson-extrapolated one-sided quotients. `sign = 1` looks forward, `-1` backward.
fn one_sided<F: Fn(f64) -> SpacePoint>(
    curve: &Curve<F>,
    system: &CoordinateSystem,
    t: f64,
    base: &MetricCoords,
    opts: &DerivativeOptions,
    sign: f64,
) -> Result<OneSided> {
    let n = system.len();
    let quotients = opts
        .h_seq
        .iter()
        .map(|&h| {
            let shifted = system.coords_of(&curve.at(t + sign * h)?)?;
            Ok(shifted.values().iter().zip(base.values()).map(|(s, b)| sign * (s - b) / h).collect::<Vec<f64>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let h = &opts.h_seq;
    let rich: Vec<Vec<f64>> = (0..h.len() - 1)
        .map(|k| {
            let ratio = h[k] / h[k + 1];
            (0..n).map(|c| (ratio * quotients[k + 1][c] - quotients[k][c]) / (ratio - 1.0)).collect()
        })
        .collect();
    let last = &rich[rich.len() - 1];
    let prev = &rich[rich.len() - 2];
    Ok(OneSided { extrapolated: last.clone(), change: last.iter().zip(prev).map(|(a, b)| (a - b).abs()).collect() })
}

/// Forward metric-coordinate derivative `φ_c⁺(t)` for every `c ∈ C`.
///
/// Coordinates whose extrapolated quotients have not settled are flagged in
/// `converged`; infinite-speed curves show up there rather than as infinities.
pub fn forward_derivative<F: Fn(f64) -> SpacePoint>(
    curve: &Curve<F>,
    system: &CoordinateSystem,
    t: f64,
    opts: &DerivativeOptions,
) -> Result<ForwardDerivative> {
    opts.validate()?;
    let base = system.coords_of(&curve.at(t)?)?;
    let side = one_sided(curve, system, t, &base, opts, 1.0)?;
    let converged = side.change.iter().map(|c| *c < opts.tol).collect();
    Ok(ForwardDerivative { tangent: TangentRep::new(base, side.extrapolated)?, converged, last_change: side.change })
}

/// Two-sided check: left and right quotients are extrapolated separately.
///
/// A coordinate is differentiable when they agree within `tol`, and
/// non-differentiable only when they differ by more than `100 · tol`.
pub fn central_derivative<F: Fn(f64) -> SpacePoint>(
    curve: &Curve<F>,
    system: &CoordinateSystem,
    t: f64,
    opts: &DerivativeOptions,
) -> Result<CentralDerivative> {
    opts.validate()?;
    let base = system.coords_of(&curve.at(t)?)?;
    let right = one_sided(curve, system, t, &base, opts, 1.0)?;
    let left = one_sided(curve, system, t, &base, opts, -1.0)?;
    let status = (0..system.len())
        .map(|c| {
            let settled = right.change[c] < opts.tol && left.change[c] < opts.tol;
            let gap = (right.extrapolated[c] - left.extrapolated[c]).abs();
            if gap > 100.0 * opts.tol {
                Differentiability::NonDifferentiable
            } else if settled && gap <= opts.tol {
                Differentiability::Differentiable
            } else {
                Differentiability::Indeterminate
            }
        })
        .collect();
    Ok(CentralDerivative { base, left: left.extrapolated, right: right.extrapolated, status })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tangency {
    Tangent,
    NotTangent,
    /// A forward derivative did not converge.
    Indeterminate,
}

/// Two curves are tangent at `t0` when they meet in `d_C` and share forward
/// coordinate derivatives, both within `tol`.
pub fn tangency_test<F: Fn(f64) -> SpacePoint, G: Fn(f64) -> SpacePoint>(
    first: &Curve<F>,
    second: &Curve<G>,
    system: &CoordinateSystem,
    t0: f64,
    tol: f64,
    opts: &DerivativeOptions,
) -> Result<Tangency> {
    let a = forward_derivative(first, system, t0, opts)?;
    let b = forward_derivative(second, system, t0, opts)?;
    if !a.all_converged() || !b.all_converged() {
        return Ok(Tangency::Indeterminate);
    }
    let same_point = a.tangent.base.sup_distance(&b.tangent.base) <= tol;
    let same_velocity = sup_diff(&a.tangent.velocity, &b.tangent.velocity) <= tol;
    Ok(if same_point && same_velocity { Tangency::Tangent } else { Tangency::NotTangent })
}

/// Closed-form coordinate derivative `(c(t) − c(t+1)) / φ_c(t)` of the shifted
/// indicator curve `φ(t) = χ_[0,1](· − t)` against a continuous `c`.
///
/// `φ_c(t)` is the quadrature distance on `grid`; `c` is interpolated linearly
/// between nodes.
pub fn char_shift_derivative(c: &[f64], t: f64, grid: &GridSpace) -> Result<f64> {
    if c.len() != grid.len() {
        return Err(MetrikosError::shape(format!("{} samples", grid.len()), format!("{}", c.len())));
    }
    let indicator = grid.shifted_indicator(t);
    let phi = grid.l2_distance(indicator.as_function().expect("function"), c);
    if phi == 0.0 {
        return Err(MetrikosError::DivisionByZero(format!("the curve passes through the coordinate point at t = {t}")));
    }
    Ok((grid.interpolate(c, t) - grid.interpolate(c, t + 1.0)) / phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Space, SpacePoint};
    use std::f64::consts::SQRT_2;

    fn plane_system(points: &[[f64; 2]]) -> CoordinateSystem {
        CoordinateSystem::new(
            Space::euclidean(2),
            points.iter().map(|p| SpacePoint::from(*p)).collect(),
            [0.0, 0.0].into(),
        )
        .unwrap()
    }

    #[test]
    fn constant_curve_has_zero_velocity() {
        let sys = plane_system(&[[1.0, 0.0], [0.0, 1.0], [3.0, 3.0]]);
        let curve = Curve::new(|_| SpacePoint::from([0.4, 0.7]), -1.0, 1.0);
        let d = forward_derivative(&curve, &sys, 0.0, &Default::default()).unwrap();
        assert!(d.tangent.velocity.iter().all(|v| *v == 0.0));
        assert!(d.all_converged());
        assert_eq!(d.tangent.speed_bound, 0.0);
    }

    #[test]
    fn kink_forward_quotient() {
        let sys = plane_system(&[[1.0, 1.0]]);
        let curve = Curve::new(|t: f64| SpacePoint::from([t, t.abs()]), -1.0, 1.0);
        let d = forward_derivative(&curve, &sys, 0.0, &Default::default()).unwrap();
        assert!((d.tangent.velocity[0] + SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn observer_dependence() {
        let curve = Curve::new(|t: f64| SpacePoint::from([t, t.abs()]), -1.0, 1.0);
        let smooth = central_derivative(&curve, &plane_system(&[[-2.0, 0.0]]), 0.0, &Default::default()).unwrap();
        assert_eq!(smooth.status, vec![Differentiability::Differentiable]);
        assert!((smooth.velocity()[0] - 1.0).abs() < 1e-6);

        let kinked = central_derivative(&curve, &plane_system(&[[1.0, 1.0]]), 0.0, &Default::default()).unwrap();
        assert_eq!(kinked.status, vec![Differentiability::NonDifferentiable]);
        assert!(kinked.left[0].abs() < 1e-3);
        assert!((kinked.right[0] + SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn circle_is_differentiable_with_chain_rule_values() {
        let sys = plane_system(&[[2.0, 0.1], [-1.5, 0.3], [0.2, -2.5]]);
        let curve = Curve::new(|t: f64| SpacePoint::from([t.cos(), t.sin()]), -10.0, 10.0);
        for &t in &[0.0, 0.7, 2.1, -1.3] {
            let d = central_derivative(&curve, &sys, t, &Default::default()).unwrap();
            assert!(d.all_differentiable(), "t = {t}: {:?}", d.status);
            let p = [t.cos(), t.sin()];
            let v = [-t.sin(), t.cos()];
            for (k, c) in sys.coordinatizing_points().iter().enumerate() {
                let c = c.as_vector().unwrap();
                let diff = [p[0] - c[0], p[1] - c[1]];
                let norm = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
                let chain = (diff[0] * v[0] + diff[1] * v[1]) / norm;
                assert!((d.velocity()[k] - chain).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn infinite_speed_is_not_converged() {
        let sys = plane_system(&[[1.0, 0.0]]);
        let curve = Curve::new(|t: f64| SpacePoint::from([-t.sqrt(), t.sqrt()]), 0.0, 1.0);
        let d = forward_derivative(&curve, &sys, 0.0, &Default::default()).unwrap();
        assert!(!d.all_converged());
        assert!(d.tangent.speed_bound.is_finite());
    }

    #[test]
    fn tangency_examples() {
        let sys = plane_system(&[[1.3, 0.4], [-0.7, 1.9], [0.5, -2.2]]);
        let line = Curve::new(|t: f64| SpacePoint::from([t, 0.0]), -1.0, 1.0);
        let parabola = Curve::new(|t: f64| SpacePoint::from([t, t * t]), -1.0, 1.0);
        let fast = Curve::new(|t: f64| SpacePoint::from([2.0 * t, 0.0]), -1.0, 1.0);
        let opts = DerivativeOptions::default();
        assert_eq!(tangency_test(&line, &line, &sys, 0.0, 1e-6, &opts).unwrap(), Tangency::Tangent);
        assert_eq!(tangency_test(&line, &parabola, &sys, 0.0, 1e-6, &opts).unwrap(), Tangency::Tangent);
        assert_eq!(tangency_test(&line, &fast, &sys, 0.0, 1e-6, &opts).unwrap(), Tangency::NotTangent);
        let root = Curve::new(|t: f64| SpacePoint::from([t.sqrt(), 0.0]), 0.0, 1.0);
        assert_eq!(tangency_test(&line, &root, &sys, 0.0, 1e-6, &opts).unwrap(), Tangency::Indeterminate);
    }

    #[test]
    fn reparametrization_scales_velocity() {
        let sys = plane_system(&[[1.3, 0.4], [-0.7, 1.9], [0.5, -2.2]]);
        let phi = |t: f64| SpacePoint::from([t.cos() + 0.3 * t, 0.5 * t.sin() - t * t]);
        for s in [0.5, 2.0] {
            let base = Curve::new(phi, -5.0, 5.0);
            let scaled = Curve::new(move |t: f64| phi(s * t), -5.0, 5.0);
            let t = 0.4;
            let a = forward_derivative(&scaled, &sys, t / s, &Default::default()).unwrap();
            let b = forward_derivative(&base, &sys, t, &Default::default()).unwrap();
            for (x, y) in a.tangent.velocity.iter().zip(&b.tangent.velocity) {
                assert!((x - s * y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn tangent_metric_examples() {
        let base = MetricCoords(vec![1.0, 2.0, 3.0]);
        let u = TangentRep::new(base.clone(), vec![1.0, -1.0, 0.0]).unwrap();
        let v = TangentRep::new(base.clone(), vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(tangent_metric(&u, &u).unwrap(), 0.0);
        assert_eq!(tangent_metric(&u, &v).unwrap(), 2.0);
        let w = TangentRep::new(MetricCoords(vec![4.0, 2.0, 3.0]), vec![1.0, -1.0, 0.0]).unwrap();
        assert_eq!(tangent_metric(&u, &w).unwrap(), 3.0);
        let short = TangentRep::new(MetricCoords(vec![1.0]), vec![0.0]).unwrap();
        assert!(tangent_metric(&u, &short).is_err());
    }

    #[test]
    fn rejects_bad_step_sequences() {
        let sys = plane_system(&[[1.0, 0.0]]);
        let curve = Curve::new(|t: f64| SpacePoint::from([t, 0.0]), -1.0, 1.0);
        let bad = DerivativeOptions { h_seq: vec![1e-2, 1e-2, 1e-3], tol: 1e-6 };
        assert!(forward_derivative(&curve, &sys, 0.0, &bad).is_err());
        assert!(forward_derivative(&curve, &sys, 0.995, &Default::default()).is_err());
    }

    #[test]
    fn char_shift_closed_form_examples() {
        let grid = GridSpace::uniform(-1.0, 3.0, 4000).unwrap();
        let zero = vec![0.0; grid.len()];
        assert_eq!(char_shift_derivative(&zero, 0.5, &grid).unwrap(), 0.0);

        let hat = grid.sample(|x| (1.0 - x.abs()).max(0.0));
        let hat = hat.as_function().unwrap();
        let phi0 = grid.l2_distance(grid.shifted_indicator(0.0).as_function().unwrap(), hat);
        let d = char_shift_derivative(hat, 0.0, &grid).unwrap();
        assert!((d - 1.0 / phi0).abs() < 1e-12);

        // symmetric about t + 1/2
        let sym = grid.sample(|x| (-(x - 0.8).powi(2)).exp());
        let d = char_shift_derivative(sym.as_function().unwrap(), 0.3, &grid).unwrap();
        assert!(d.abs() < 1e-6);

        let ind = grid.shifted_indicator(0.0);
        assert!(matches!(
            char_shift_derivative(ind.as_function().unwrap(), 0.0, &grid),
            Err(MetrikosError::DivisionByZero(_))
        ));
    }

    #[test]
    fn grid_forward_derivative_matches_closed_form() {
        let grid = GridSpace::uniform(-1.0, 3.0, 4000).unwrap();
        let spacing = grid.max_spacing();
        let c = grid.sample(|x| (1.0 - x.abs()).max(0.0));
        let system = CoordinateSystem::new(Space::grid(grid.clone()), vec![c.clone()], grid.sample(|_| 0.0)).unwrap();
        let curve_grid = grid.clone();
        let curve = Curve::new(move |t| curve_grid.shifted_indicator(t), -1.0, 2.0);
        let opts =
            DerivativeOptions { h_seq: [16.0, 8.0, 4.0, 2.0, 1.0].iter().map(|m| m * spacing).collect(), tol: 1e-6 };
        for node in [100, 300, 450, 620, 800, 960] {
            let t = grid.nodes()[node];
            let numeric = forward_derivative(&curve, &system, t, &opts).unwrap().tangent.velocity[0];
            let exact = char_shift_derivative(c.as_function().unwrap(), t, &grid).unwrap();
            assert!((numeric - exact).abs() < 1e-3, "t = {t}: {numeric} vs {exact}");
        }
    }
}
