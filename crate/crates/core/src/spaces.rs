//! Concrete metric spaces and the subsets `X ⊂ M` used throughout the crate.
//!
//! Every space is described by a [`SpaceKind`] (the ambient metric space `M`)
//! together with a [`Subset`] predicate selecting `X`. Points are carried as
//! [`SpacePoint`] values whose shape is validated against the space before any
//! distance is taken.

use serde::Serialize;

use crate::error::{MetrikosError, Result};

/// Tolerance on `‖x‖ = 1` for points of the unit sphere.
pub const SPHERE_NORM_TOL: f64 = 1e-12;

/// A point of one of the supported spaces, in its ambient representation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SpacePoint {
    /// Ambient coordinates in `ℝⁿ` (Euclidean, sup-metric plane, sphere).
    Vector(Vec<f64>),
    /// Element of a finite discrete space.
    Index(usize),
    /// Samples of a function on the nodes of a [`GridSpace`].
    Function(Vec<f64>),
}

impl SpacePoint {
    pub fn vector(values: &[f64]) -> Self {
        SpacePoint::Vector(values.to_vec())
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            SpacePoint::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_function(&self) -> Option<&[f64]> {
        match self {
            SpacePoint::Function(v) => Some(v),
            _ => None,
        }
    }

    fn describe(&self) -> String {
        match self {
            SpacePoint::Vector(v) => format!("vector of length {}", v.len()),
            SpacePoint::Index(i) => format!("index {i}"),
            SpacePoint::Function(v) => format!("function with {} samples", v.len()),
        }
    }
}

impl From<Vec<f64>> for SpacePoint {
    fn from(v: Vec<f64>) -> Self {
        SpacePoint::Vector(v)
    }
}

impl<const N: usize> From<[f64; N]> for SpacePoint {
    fn from(v: [f64; N]) -> Self {
        SpacePoint::Vector(v.to_vec())
    }
}

/// A finite grid on the real line with positive quadrature weights, standing
/// in for `L²(ℝ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpace {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GridSpace {
    /// Uniform grid on `[lo, hi]` with `cells` cells and trapezoid weights.
    pub fn uniform(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        if cells == 0 || !(hi > lo) {
            return Err(MetrikosError::InvalidInput(format!(
                "uniform grid needs lo < hi and at least one cell (got [{lo}, {hi}], {cells})"
            )));
        }
        let step = (hi - lo) / cells as f64;
        let nodes = (0..=cells).map(|k| lo + step * k as f64).collect();
        Self::trapezoid(nodes)
    }

    /// Arbitrary strictly increasing nodes with trapezoid weights.
    pub fn trapezoid(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(MetrikosError::InvalidInput("grid needs at least two nodes".into()));
        }
        let n = nodes.len();
        let mut weights = vec![0.0; n];
        for k in 0..n - 1 {
            let half = 0.5 * (nodes[k + 1] - nodes[k]);
            weights[k] += half;
            weights[k + 1] += half;
        }
        Self::with_weights(nodes, weights)
    }

    pub fn with_weights(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() || nodes.len() < 2 {
            return Err(MetrikosError::InvalidInput("grid nodes and weights must have equal length >= 2".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(MetrikosError::InvalidInput("grid must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(MetrikosError::InvalidInput("quadrature weights must be positive".into()));
        }
        Ok(GridSpace { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest gap between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> SpacePoint {
        SpacePoint::Function(self.nodes.iter().map(|&x| f(x)).collect())
    }

    /// The indicator of `[t, t + 1]` sampled on the nodes, i.e. `χ_[0,1](· − t)`.
    ///
    /// Nodes within `1e-9 · spacing` of an endpoint count as inside, so shifts
    /// landing on grid nodes are represented exactly.
    pub fn shifted_indicator(&self, t: f64) -> SpacePoint {
        let eps = 1e-9 * self.max_spacing();
        self.sample(|x| if x >= t - eps && x <= t + 1.0 + eps { 1.0 } else { 0.0 })
    }

    /// Weighted `L²` distance between two sampled functions.
    pub fn l2_distance(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f.iter().zip(g)).map(|(w, (a, b))| w * (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    /// Piecewise-linear interpolation of samples at `x`; zero outside the grid.
    pub fn interpolate(&self, samples: &[f64], x: f64) -> f64 {
        let nodes = &self.nodes;
        if x < nodes[0] || x > nodes[nodes.len() - 1] {
            return 0.0;
        }
        let k = nodes.partition_point(|&n| n <= x);
        if k == 0 {
            return samples[0];
        }
        if k >= nodes.len() {
            return samples[nodes.len() - 1];
        }
        let (x0, x1) = (nodes[k - 1], nodes[k]);
        let s = (x - x0) / (x1 - x0);
        samples[k - 1] * (1.0 - s) + samples[k] * s
    }

    /// Index of the node equal to `x` (within `1e-9` of the local spacing).
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let eps = 1e-9 * self.max_spacing();
        let k = self.nodes.partition_point(|&n| n < x - eps);
        (k < self.nodes.len() && (self.nodes[k] - x).abs() <= eps).then_some(k)
    }
}

/// The ambient metric space `M`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    Euclidean {
        dim: usize,
    },
    /// `ℝ²` with `d∞(x, y) = max |xᵢ − yᵢ|`.
    SupPlane,
    /// A finite set `{0, …, count−1}` with the discrete metric.
    Discrete {
        count: usize,
    },
    /// The unit sphere `S² ⊂ ℝ³` with the geodesic (great-circle) metric.
    Sphere,
    GridFunction(GridSpace),
}

/// Named subsets `X ⊂ M`.
#[derive(Debug, Clone, PartialEq)]
pub enum Subset {
    All,
    /// Open half-plane `{y > 0}` in `ℝ²`.
    HalfPlane,
    /// Open half-space: last coordinate positive.
    HalfSpace,
    /// `ℝ × ((0,1) ∪ ⋃_{n≥1} ([2n, 2n+1) ∪ (−2n−2, −2n−1]))`.
    OpenStrips,
    /// `{(x, y): y > 1, x ≠ 0} ∪ {(0, −1)}`.
    SlitPlane,
    /// `{(x, y): y ≥ 1, x ≠ 0} ∪ {(0, 1)} ∪ {(0, y): y < −1}`.
    SlitPlaneReflected,
    /// Sup-metric balls of radius 1/4 about `(1, 1)` and `(0, −1)`, minus the line `s − t = 1`.
    SupBallPair,
    /// The graph `{(x, |x|): |x| ≤ 1}`.
    AbsGraph,
    /// Open half-space `normal · x > offset`.
    Custom {
        normal: Vec<f64>,
        offset: f64,
    },
}

impl Subset {
    pub fn name(&self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::HalfPlane => "half_plane",
            Subset::HalfSpace => "half_space",
            Subset::OpenStrips => "open_strips",
            Subset::SlitPlane => "slit_plane",
            Subset::SlitPlaneReflected => "slit_plane_reflected",
            Subset::SupBallPair => "sup_ball_pair",
            Subset::AbsGraph => "abs_graph",
            Subset::Custom { .. } => "custom",
        }
    }
}

/// A metric space together with a subset predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    kind: SpaceKind,
    subset: Subset,
}

impl Space {
    pub fn new(kind: SpaceKind, subset: Subset) -> Result<Self> {
        match &kind {
            SpaceKind::Euclidean { dim } if *dim == 0 => {
                return Err(MetrikosError::InvalidInput("euclidean dimension must be >= 1".into()))
            }
            SpaceKind::Discrete { count } if *count == 0 => {
                return Err(MetrikosError::InvalidInput("discrete space needs at least one point".into()))
            }
            _ => {}
        }
        let ambient = match &kind {
            SpaceKind::Euclidean { dim } => Some(*dim),
            SpaceKind::SupPlane => Some(2),
            _ => None,
        };
        let ok = match &subset {
            Subset::All => true,
            Subset::HalfSpace => ambient.is_some(),
            Subset::Custom { normal, .. } => ambient == Some(normal.len()),
            Subset::SupBallPair => kind == SpaceKind::SupPlane,
            Subset::HalfPlane
            | Subset::OpenStrips
            | Subset::SlitPlane
            | Subset::SlitPlaneReflected
            | Subset::AbsGraph => ambient == Some(2),
        };
        if !ok {
            return Err(MetrikosError::InvalidInput(format!(
                "subset '{}' is not defined on {:?}",
                subset.name(),
                kind
            )));
        }
        Ok(Space { kind, subset })
    }

    pub fn euclidean(dim: usize) -> Self {
        Space::new(SpaceKind::Euclidean { dim }, Subset::All).expect("dim >= 1")
    }

    pub fn sup_plane() -> Self {
        Space { kind: SpaceKind::SupPlane, subset: Subset::All }
    }

    pub fn discrete(count: usize) -> Self {
        Space::new(SpaceKind::Discrete { count }, Subset::All).expect("count >= 1")
    }

    pub fn sphere() -> Self {
        Space { kind: SpaceKind::Sphere, subset: Subset::All }
    }

    pub fn grid(grid: GridSpace) -> Self {
        Space { kind: SpaceKind::GridFunction(grid), subset: Subset::All }
    }

    pub fn with_subset(self, subset: Subset) -> Result<Self> {
        Space::new(self.kind, subset)
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn subset(&self) -> &Subset {
        &self.subset
    }

    /// Ambient vector dimension for vector-valued spaces.
    pub fn ambient_dim(&self) -> Option<usize> {
        match &self.kind {
            SpaceKind::Euclidean { dim } => Some(*dim),
            SpaceKind::SupPlane => Some(2),
            SpaceKind::Sphere => Some(3),
            _ => None,
        }
    }

    pub fn grid_space(&self) -> Option<&GridSpace> {
        match &self.kind {
            SpaceKind::GridFunction(g) => Some(g),
            _ => None,
        }
    }

    /// A random point of `M`: uniform in the box `[lo, hi]` for vector spaces
    /// (`lo`/`hi` ignored on the sphere, which is sampled uniformly).
    pub fn random_point<R: rand::Rng + ?Sized>(&self, rng: &mut R, lo: &[f64], hi: &[f64]) -> SpacePoint {
        match &self.kind {
            SpaceKind::Euclidean { .. } | SpaceKind::SupPlane => SpacePoint::Vector(
                lo.iter().zip(hi).map(|(a, b)| if b > a { rng.random_range(*a..*b) } else { *a }).collect(),
            ),
            SpaceKind::Sphere => loop {
                let mut v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                let n = dot(&v, &v);
                if n > 1e-4 && n <= 1.0 {
                    normalize(&mut v);
                    break SpacePoint::Vector(v);
                }
            },
            SpaceKind::Discrete { count } => SpacePoint::Index(rng.random_range(0..*count)),
            SpaceKind::GridFunction(g) => {
                let (a, b, c) = (rng.random_range(-1.0..1.0), rng.random_range(0.5..3.0), rng.random_range(0.0..6.3));
                g.sample(|x| a * (b * x + c).sin())
            }
        }
    }

    /// Checks that `x` has the representation and shape this space expects.
    pub fn validate(&self, x: &SpacePoint) -> Result<()> {
        match (&self.kind, x) {
            (SpaceKind::Euclidean { dim }, SpacePoint::Vector(v)) => check_len(v, *dim, "euclidean"),
            (SpaceKind::SupPlane, SpacePoint::Vector(v)) => check_len(v, 2, "sup-metric plane"),
            (SpaceKind::Sphere, SpacePoint::Vector(v)) => {
                check_len(v, 3, "sphere")?;
                let norm = dot(v, v).sqrt();
                if (norm - 1.0).abs() > SPHERE_NORM_TOL {
                    return Err(MetrikosError::InvalidInput(format!("sphere point has norm {norm}, expected 1")));
                }
                Ok(())
            }
            (SpaceKind::Discrete { count }, SpacePoint::Index(i)) => {
                if i < count {
                    Ok(())
                } else {
                    Err(MetrikosError::IndexOutOfRange { index: *i, len: *count })
                }
            }
            (SpaceKind::GridFunction(g), SpacePoint::Function(f)) => check_len(f, g.len(), "grid function"),
            (kind, x) => Err(MetrikosError::shape(format!("point of {kind:?}"), x.describe())),
        }
    }

    /// The metric `d(x, y)` of the ambient space.
    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(self.distance_unchecked(x, y))
    }

    /// `distance` without shape validation; callers must have validated both points.
    pub(crate) fn distance_unchecked(&self, x: &SpacePoint, y: &SpacePoint) -> f64 {
        match (&self.kind, x, y) {
            (SpaceKind::Euclidean { .. }, SpacePoint::Vector(a), SpacePoint::Vector(b)) => euclidean(a, b),
            (SpaceKind::SupPlane, SpacePoint::Vector(a), SpacePoint::Vector(b)) => sup_norm_diff(a, b),
            (SpaceKind::Sphere, SpacePoint::Vector(a), SpacePoint::Vector(b)) => great_circle(a, b),
            (SpaceKind::Discrete { .. }, SpacePoint::Index(i), SpacePoint::Index(j)) => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
            (SpaceKind::GridFunction(g), SpacePoint::Function(a), SpacePoint::Function(b)) => g.l2_distance(a, b),
            _ => f64::NAN,
        }
    }

    /// Exact evaluation of the subset predicate `x ∈ X`.
    pub fn member(&self, x: &SpacePoint) -> Result<bool> {
        self.validate(x)?;
        let v = match x {
            SpacePoint::Vector(v) => v.as_slice(),
            _ => return Ok(true),
        };
        Ok(match &self.subset {
            Subset::All => true,
            Subset::HalfPlane | Subset::HalfSpace => v[v.len() - 1] > 0.0,
            Subset::OpenStrips => in_strips(v[1]),
            Subset::SlitPlane => (v[1] > 1.0 && v[0] != 0.0) || (v[0] == 0.0 && v[1] == -1.0),
            Subset::SlitPlaneReflected => (v[1] >= 1.0 && v[0] != 0.0) || (v[0] == 0.0 && (v[1] == 1.0 || v[1] < -1.0)),
            Subset::SupBallPair => {
                let near = |c: [f64; 2]| (v[0] - c[0]).abs().max((v[1] - c[1]).abs()) < 0.25;
                (near([1.0, 1.0]) || near([0.0, -1.0])) && v[0] - v[1] != 1.0
            }
            Subset::AbsGraph => v[0].abs() <= 1.0 && v[1] == v[0].abs(),
            Subset::Custom { normal, offset } => dot(normal, v) > *offset,
        })
    }

    /// Alternative ambient representatives of `x` that share its distances to
    /// every point of the reflection axis; used to move a recovered point into
    /// `X` when the subset is only symmetric up to a reflection.
    pub fn alternates(&self, x: &SpacePoint) -> Vec<SpacePoint> {
        match (&self.subset, x) {
            (Subset::OpenStrips | Subset::SlitPlane | Subset::SlitPlaneReflected, SpacePoint::Vector(v)) => {
                vec![SpacePoint::Vector(vec![v[0], -v[1]])]
            }
            (Subset::HalfPlane | Subset::HalfSpace, SpacePoint::Vector(v)) => {
                let mut m = v.clone();
                let last = m.len() - 1;
                m[last] = -m[last];
                vec![SpacePoint::Vector(m)]
            }
            _ => Vec::new(),
        }
    }
}

fn check_len(v: &[f64], expected: usize, what: &str) -> Result<()> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(MetrikosError::shape(format!("{what} point of length {expected}"), format!("length {}", v.len())))
    }
}

fn in_strips(y: f64) -> bool {
    if y > 0.0 && y < 1.0 {
        return true;
    }
    if y >= 2.0 {
        // [2n, 2n+1)
        let n = (y / 2.0).floor();
        return y < 2.0 * n + 1.0;
    }
    let m = -y;
    if m >= 3.0 {
        // −y ∈ [2n+1, 2n+2)
        let n = ((m - 1.0) / 2.0).floor();
        return m < 2.0 * n + 2.0;
    }
    false
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Great-circle distance between unit vectors, `atan2(‖a × b‖, a · b)`.
///
/// Equal to `acos(clamp(a · b, −1, 1))` but keeps full precision for nearly
/// coincident or antipodal points.
pub fn great_circle(a: &[f64], b: &[f64]) -> f64 {
    let cross = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
    dot(&cross, &cross).sqrt().atan2(dot(a, b))
}

pub(crate) fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn sup_metric_takes_max() {
        let s = Space::sup_plane();
        let d = s.distance(&[0.0, 0.0].into(), &[3.0, -4.0].into()).unwrap();
        assert_eq!(d, 4.0);
    }

    #[test]
    fn orthogonal_sphere_points_are_quarter_circle_apart() {
        let s = Space::sphere();
        let d = s.distance(&[1.0, 0.0, 0.0].into(), &[0.0, 1.0, 0.0].into()).unwrap();
        assert!((d - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn great_circle_agrees_with_clamped_acos() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let mut a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut a);
            normalize(&mut b);
            let acos = dot(&a, &b).clamp(-1.0, 1.0).acos();
            assert!((great_circle(&a, &b) - acos).abs() < 1e-7);
        }
    }

    #[test]
    fn sphere_rejects_non_unit_points() {
        let s = Space::sphere();
        assert!(s.validate(&[1.0, 1.0, 0.0].into()).is_err());
    }

    #[test]
    fn indicator_distance_to_zero_is_one() {
        let g = GridSpace::uniform(-1.0, 3.0, 4000).unwrap();
        let s = Space::grid(g.clone());
        let ind = g.shifted_indicator(0.0);
        let zero = g.sample(|_| 0.0);
        let d = s.distance(&ind, &zero).unwrap();
        assert!((d - 1.0).abs() < 2e-2, "{d}");
    }

    #[test]
    fn half_space_is_open() {
        let s = Space::euclidean(3).with_subset(Subset::HalfSpace).unwrap();
        assert!(s.member(&[1.0, 2.0, 0.5].into()).unwrap());
        assert!(!s.member(&[1.0, 2.0, 0.0].into()).unwrap());
    }

    #[test]
    fn strips_membership() {
        let s = Space::euclidean(2).with_subset(Subset::OpenStrips).unwrap();
        let m = |y: f64| s.member(&[0.0, y].into()).unwrap();
        assert!(m(2.5));
        assert!(!m(1.5));
        assert!(m(0.5));
        assert!(!m(0.0));
        assert!(!m(1.0));
        assert!(m(2.0));
        assert!(!m(3.0));
        assert!(m(4.2));
        assert!(m(-3.0));
        assert!(m(-3.5));
        assert!(!m(-4.0));
        assert!(!m(-2.5));
        assert!(m(-5.0));
        assert!(!m(-1.5));
    }

    #[test]
    fn slit_plane_membership() {
        let s = Space::euclidean(2).with_subset(Subset::SlitPlane).unwrap();
        assert!(s.member(&[0.0, -1.0].into()).unwrap());
        assert!(!s.member(&[0.0, 2.0].into()).unwrap());
        assert!(s.member(&[0.1, 2.0].into()).unwrap());
        assert!(!s.member(&[0.1, 1.0].into()).unwrap());
    }

    #[test]
    fn sup_ball_pair_excludes_line() {
        let s = Space::sup_plane().with_subset(Subset::SupBallPair).unwrap();
        assert!(s.member(&[1.1, 1.0].into()).unwrap());
        assert!(!s.member(&[1.0, 0.0].into()).unwrap());
        assert!(!s.member(&[0.1, -0.9].into()).unwrap());
        assert!(s.member(&[0.1, -1.0].into()).unwrap());
    }

    #[test]
    fn incompatible_subset_is_rejected() {
        assert!(Space::sphere().with_subset(Subset::OpenStrips).is_err());
        assert!(Space::euclidean(3).with_subset(Subset::HalfPlane).is_err());
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let s = Space::euclidean(2);
        let err = s.distance(&[0.0].into(), &[0.0, 1.0].into()).unwrap_err();
        assert!(matches!(err, MetrikosError::ShapeMismatch { .. }));
        assert!(s.distance(&SpacePoint::Index(0), &[0.0, 1.0].into()).is_err());
    }

    #[test]
    fn discrete_metric_values() {
        let s = Space::discrete(3);
        let p = |i| SpacePoint::Index(i);
        assert_eq!(s.distance(&p(0), &p(0)).unwrap(), 0.0);
        assert_eq!(s.distance(&p(0), &p(2)).unwrap(), 1.0);
        assert!(s.distance(&p(0), &p(3)).is_err());
    }

    fn random_point(space: &Space, rng: &mut ChaCha8Rng) -> SpacePoint {
        match space.kind() {
            SpaceKind::Euclidean { dim } => {
                SpacePoint::Vector((0..*dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            }
            SpaceKind::SupPlane => SpacePoint::Vector(vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]),
            SpaceKind::Sphere => {
                let mut v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                normalize(&mut v);
                SpacePoint::Vector(v)
            }
            SpaceKind::Discrete { count } => SpacePoint::Index(rng.random_range(0..*count)),
            SpaceKind::GridFunction(g) => {
                let (a, b, c) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0));
                g.sample(|x| a * (b * x + c).sin())
            }
        }
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        let spaces = [
            Space::euclidean(3),
            Space::sup_plane(),
            Space::sphere(),
            Space::discrete(4),
            Space::grid(GridSpace::uniform(-1.0, 1.0, 200).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for space in &spaces {
            for _ in 0..10_000 {
                let (x, y, z) =
                    (random_point(space, &mut rng), random_point(space, &mut rng), random_point(space, &mut rng));
                let dxy = space.distance(&x, &y).unwrap();
                let dyx = space.distance(&y, &x).unwrap();
                let dxz = space.distance(&x, &z).unwrap();
                let dyz = space.distance(&y, &z).unwrap();
                assert_eq!(dxy, dyx);
                assert!(dxy >= 0.0);
                let slack = if space.grid_space().is_some() { 1e-6 * (dxy + dyz) } else { 1e-12 };
                assert!(dxz <= dxy + dyz + slack, "{space:?}");
                assert_eq!(space.distance(&x, &x).unwrap(), 0.0);
                match space.kind() {
                    SpaceKind::Sphere => assert!((0.0..=std::f64::consts::PI).contains(&dxy)),
                    SpaceKind::Discrete { .. } => assert!(dxy == 0.0 || dxy == 1.0),
                    _ => {}
                }
            }
        }
    }
}
