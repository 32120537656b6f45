//! Tangency residuals and positive invariance in coordinate space.
//!
//! Sets live in `ℝ^C` under the sup-norm. Metric coordinates and embedded
//! points differ by a fixed translation, so every distance here is the same
//! whichever of the two representations the caller uses, as long as it is
//! used consistently.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{MetrikosError, Result};
use crate::fields::{ConservationLaw, CoordField, Cutoff, Trajectory, VectorMcShane};
use crate::loci::{locus_residual, Locus};
use crate::metric_core::{sup_diff, CoordinateSystem, MetricCoords};

pub type Residual = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A closed subset of `ℝ^C`.
#[derive(Clone)]
pub enum CoordSet {
    /// Finite point cloud; `resolution` is the caller's bound on the gap
    /// between the cloud and the set it stands for.
    Sampled { cloud: Vec<Vec<f64>>, resolution: f64 },
    /// Zero set of `residual`. With a `calibration` factor `κ` the distance
    /// is `|residual| / κ`; without one it is found by sup-norm descent onto
    /// the zero set, optionally compared against a point cloud.
    Implicit { residual: Residual, calibration: Option<f64>, samples: Vec<Vec<f64>> },
    /// Closed sup-norm ball.
    Ball { center: Vec<f64>, radius: f64 },
}

impl fmt::Debug for CoordSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoordSet::Sampled { cloud, resolution } => {
                f.debug_struct("Sampled").field("points", &cloud.len()).field("resolution", resolution).finish()
            }
            CoordSet::Implicit { calibration, samples, .. } => {
                f.debug_struct("Implicit").field("calibration", calibration).field("samples", &samples.len()).finish()
            }
            CoordSet::Ball { center, radius } => {
                f.debug_struct("Ball").field("center", center).field("radius", radius).finish()
            }
        }
    }
}

impl CoordSet {
    pub fn sampled(cloud: Vec<Vec<f64>>, resolution: f64) -> Result<Self> {
        let Some(first) = cloud.first() else {
            return Err(MetrikosError::InvalidInput("sampled set needs at least one point".into()));
        };
        if cloud.iter().any(|p| p.len() != first.len()) {
            return Err(MetrikosError::InvalidInput("cloud points must share one dimension".into()));
        }
        if !(resolution >= 0.0) {
            return Err(MetrikosError::InvalidInput(format!("resolution must be >= 0, got {resolution}")));
        }
        Ok(CoordSet::Sampled { cloud, resolution })
    }

    pub fn implicit(residual: Residual) -> Self {
        CoordSet::Implicit { residual, calibration: None, samples: Vec::new() }
    }

    pub fn with_calibration(self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(MetrikosError::InvalidInput(format!("calibration must be positive, got {factor}")));
        }
        match self {
            CoordSet::Implicit { residual, samples, .. } => {
                Ok(CoordSet::Implicit { residual, calibration: Some(factor), samples })
            }
            _ => Err(MetrikosError::InvalidInput("only implicit sets take a calibration".into())),
        }
    }

    pub fn with_samples(self, cloud: Vec<Vec<f64>>) -> Result<Self> {
        match self {
            CoordSet::Implicit { residual, calibration, .. } => {
                Ok(CoordSet::Implicit { residual, calibration, samples: cloud })
            }
            _ => Err(MetrikosError::InvalidInput("only implicit sets take extra samples".into())),
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(MetrikosError::InvalidInput(format!("ball radius must be >= 0, got {radius}")));
        }
        Ok(CoordSet::Ball { center, radius })
    }

    /// The level set of a conserved quantity through `through`.
    pub fn level_set(law: ConservationLaw, through: &MetricCoords) -> Self {
        let level = law.value(through.values());
        CoordSet::implicit(Arc::new(move |x: &[f64]| law.value(x) - level))
    }

    /// A locus of the system, as the zero set of its residual.
    pub fn locus(locus: Locus, system: &CoordinateSystem) -> Result<Self> {
        locus.validate(system)?;
        let system = system.clone();
        Ok(CoordSet::implicit(Arc::new(move |x: &[f64]| {
            locus_residual(&locus, &MetricCoords(x.to_vec()), &system).unwrap_or(f64::NAN)
        })))
    }

    /// Resolution term that bounds the error of [`set_distance`].
    pub fn resolution(&self) -> f64 {
        match self {
            CoordSet::Sampled { resolution, .. } => *resolution,
            _ => 0.0,
        }
    }
}

fn cloud_distance(cloud: &[Vec<f64>], w: &[f64]) -> f64 {
    cloud.iter().map(|p| sup_diff(p, w)).fold(f64::INFINITY, f64::min)
}

fn numeric_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let h = 1e-7 * x[k].abs().max(1.0);
            probe[k] = x[k] + h;
            let up = f(&probe);
            probe[k] = x[k] - h;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}

// Steps v ← v − g(v)·sign(∇g)/‖∇g‖₁, the smallest sup-norm move that zeroes
// the linearization. Exact in one step for affine residuals.
fn descend(residual: &dyn Fn(&[f64]) -> f64, w: &[f64]) -> Option<f64> {
    let mut v = w.to_vec();
    for _ in 0..60 {
        let g = residual(&v);
        if !g.is_finite() {
            return None;
        }
        if g.abs() <= 1e-13 {
            return Some(sup_diff(&v, w));
        }
        let grad = numeric_gradient(residual, &v);
        let l1: f64 = grad.iter().map(|c| c.abs()).sum();
        if !(l1 > 1e-14) {
            return None;
        }
        for (vk, gk) in v.iter_mut().zip(&grad) {
            if *gk != 0.0 {
                *vk -= g * gk.signum() / l1;
            }
        }
    }
    let g = residual(&v);
    (g.abs() <= 1e-9).then(|| sup_diff(&v, w))
}

/// `d(w, S) = inf_{y ∈ S} ‖w − y‖_∞`. Returns `+∞` when an implicit set's
/// zero set cannot be reached from `w`.
pub fn set_distance(set: &CoordSet, w: &[f64]) -> f64 {
    match set {
        CoordSet::Sampled { cloud, .. } => cloud_distance(cloud, w),
        CoordSet::Ball { center, radius } => (sup_diff(center, w) - radius).max(0.0),
        CoordSet::Implicit { residual, calibration, samples } => {
            let from_cloud = cloud_distance(samples, w);
            let local = match calibration {
                Some(k) => {
                    let g = residual(w);
                    if g.is_finite() {
                        g.abs() / k
                    } else {
                        f64::INFINITY
                    }
                }
                None => descend(residual.as_ref(), w).unwrap_or(f64::INFINITY),
            };
            local.min(from_cloud)
        }
    }
}

/// Anything that assigns a velocity to a point of `ℝ^C`.
pub trait VelocityField {
    fn velocity_at(&self, w: &[f64]) -> Result<Vec<f64>>;
}

impl VelocityField for CoordField {
    fn velocity_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.velocity(w)
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> VelocityField for Cutoff<F> {
    fn velocity_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(w))
    }
}

impl VelocityField for VectorMcShane {
    fn velocity_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(w))
    }
}

/// Adapts a plain closure to [`VelocityField`].
pub struct FnField<F>(pub F);

impl<F: Fn(&[f64]) -> Vec<f64>> VelocityField for FnField<F> {
    fn velocity_at(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok((self.0)(w))
    }
}

/// `(d(S, w + hV(w)) − d(S, w)) / h`.
pub fn nagumo_residual(field: &dyn VelocityField, set: &CoordSet, w: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(MetrikosError::InvalidInput(format!("h must be positive, got {h}")));
    }
    let v = field.velocity_at(w)?;
    if v.len() != w.len() {
        return Err(MetrikosError::shape(format!("velocity of length {}", w.len()), format!("{}", v.len())));
    }
    let moved: Vec<f64> = w.iter().zip(&v).map(|(x, dx)| x + h * dx).collect();
    Ok((set_distance(set, &moved) - set_distance(set, w)) / h)
}

pub fn default_nagumo_steps() -> Vec<f64> {
    vec![1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NagumoSample {
    pub index: usize,
    pub distance: f64,
    /// Max of the residuals over the tail half of `h_seq`.
    pub limsup: f64,
    /// `K·d(w, S) + tol − limsup`; negative means violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NagumoReport {
    pub samples: Vec<NagumoSample>,
    /// Indices into `samples` whose margin is negative.
    pub violations: Vec<usize>,
    pub resolution: f64,
}

impl NagumoReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_limsup(&self) -> f64 {
        self.samples.iter().map(|s| s.limsup).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_limsup(&self) -> f64 {
        self.samples.iter().map(|s| s.limsup).fold(f64::INFINITY, f64::min)
    }
}

/// Tests `limsup_{h→0⁺} (d(S, w + hV) − d(S, w))/h ≤ K·d(w, S)` at every sample.
pub fn nagumo_check(
    field: &dyn VelocityField,
    set: &CoordSet,
    samples: &[Vec<f64>],
    h_seq: &[f64],
    k: f64,
    tol: f64,
) -> Result<NagumoReport> {
    if h_seq.is_empty() || h_seq.iter().any(|h| !(*h > 0.0)) || h_seq.windows(2).any(|p| p[1] >= p[0]) {
        return Err(MetrikosError::InvalidInput("h_seq must be positive and strictly decreasing".into()));
    }
    let tail = &h_seq[h_seq.len() / 2..];
    let mut out = Vec::with_capacity(samples.len());
    let mut violations = Vec::new();
    for (index, w) in samples.iter().enumerate() {
        let distance = set_distance(set, w);
        let mut limsup = f64::NEG_INFINITY;
        for &h in tail {
            limsup = limsup.max(nagumo_residual(field, set, w, h)?);
        }
        let margin = k * distance + tol - limsup;
        if !(margin >= 0.0) {
            violations.push(index);
        }
        out.push(NagumoSample { index, distance, limsup, margin });
    }
    Ok(NagumoReport { samples: out, violations, resolution: set.resolution() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceOutcome {
    pub invariant: bool,
    pub first_exit: Option<usize>,
    pub max_distance: f64,
}

/// Whether every entry of the trajectory stays within `tol` of `S`.
pub fn invariance_test(trajectory: &Trajectory, set: &CoordSet, tol: f64) -> Result<InvarianceOutcome> {
    if trajectory.is_empty() {
        return Err(MetrikosError::InvalidInput("trajectory is empty".into()));
    }
    let mut first_exit = None;
    let mut max_distance = 0.0f64;
    for (k, c) in trajectory.coords.iter().enumerate() {
        let d = set_distance(set, c.values());
        max_distance = max_distance.max(d);
        if first_exit.is_none() && !(d <= tol) {
            first_exit = Some(k);
        }
    }
    Ok(InvarianceOutcome { invariant: first_exit.is_none(), first_exit, max_distance })
}
