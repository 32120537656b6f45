//! Coordinate systems `(M, d, X, C)` with a finite coordinatizing list `C`.
//!
//! A point `x` is represented by its metric coordinates `x_c = d(x, c)`. This
//! module extracts coordinates, evaluates the pseudo-metric
//! `d_C(x, y) = max_c |x_c − y_c|`, embeds points into bounded `C`-tuples
//! relative to a base point, and checks the triangle-inequality constraints
//! every realizable coordinate tuple must satisfy.

use serde::Serialize;

use crate::error::{MetrikosError, Result};
use crate::spaces::{Space, SpacePoint};

/// Default threshold below which two distances are considered equal.
pub const DEFAULT_SEPARATION_TOL: f64 = 1e-9;

/// Default relative slack for [`CoordinateSystem::check_feasible`].
pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-12;

/// Metric coordinates `(d(x, c))_{c ∈ C}`, indexed parallel to the system's `C`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricCoords(pub Vec<f64>);

impl MetricCoords {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `max_k |self_k − other_k|`.
    pub fn sup_distance(&self, other: &MetricCoords) -> f64 {
        sup_diff(&self.0, &other.0)
    }
}

impl From<Vec<f64>> for MetricCoords {
    fn from(v: Vec<f64>) -> Self {
        MetricCoords(v)
    }
}

/// Image of a point under the embedding `i(x)_c = x_c − d(c, w)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddedPoint(pub Vec<f64>);

impl EmbeddedPoint {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &EmbeddedPoint) -> f64 {
        sup_diff(&self.0, &other.0)
    }
}

/// The three families of necessary conditions on a coordinate tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Inequality {
    /// `x_c ≥ 0`
    Nonnegative,
    /// `|x_a − x_b| ≤ d(a, b)`
    Difference,
    /// `x_a + x_b ≥ d(a, b)`
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub first: usize,
    pub second: Option<usize>,
    pub inequality: Inequality,
    /// Signed slack of the inequality; negative when violated.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FeasibilityReport {
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A pair of samples that `C` fails to separate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationWitness {
    pub first: usize,
    pub second: usize,
    pub distance: f64,
    pub dc_distance: f64,
}

/// Result of a sampled coordinatization check. An empty witness list means
/// no counterexample was found among the samples, not that `C` coordinatizes `X`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CoordinatizationReport {
    pub pairs_checked: usize,
    pub witnesses: Vec<SeparationWitness>,
}

impl CoordinatizationReport {
    pub fn no_counterexample(&self) -> bool {
        self.witnesses.is_empty()
    }
}

/// Gap sequences `d_C(x_n, limit)` and `d(x_n, limit)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dc_gaps: Vec<f64>,
    pub d_gaps: Vec<f64>,
}

/// The quadruple `(M, d, X, C)` plus a base point `w ∈ X` for the embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSystem {
    space: Space,
    coords: Vec<SpacePoint>,
    base_point: SpacePoint,
    // d(C[i], C[j]), row-major
    pair_distances: Vec<f64>,
    // d(C[i], w)
    base_offsets: Vec<f64>,
}

impl CoordinateSystem {
    pub fn new(space: Space, coords: Vec<SpacePoint>, base_point: SpacePoint) -> Result<Self> {
        if coords.is_empty() {
            return Err(MetrikosError::InvalidInput("coordinatizing set must be nonempty".into()));
        }
        for c in &coords {
            space.validate(c)?;
        }
        space.validate(&base_point)?;
        if !space.member(&base_point)? {
            return Err(MetrikosError::InvalidInput("base point does not lie in X".into()));
        }
        let n = coords.len();
        let mut pair_distances = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                if coords[i] == coords[j] {
                    return Err(MetrikosError::InvalidInput(format!(
                        "coordinatizing points {i} and {j} are duplicates"
                    )));
                }
                let d = space.distance_unchecked(&coords[i], &coords[j]);
                pair_distances[i * n + j] = d;
                pair_distances[j * n + i] = d;
            }
        }
        let base_offsets = coords.iter().map(|c| space.distance_unchecked(c, &base_point)).collect();
        Ok(CoordinateSystem { space, coords, base_point, pair_distances, base_offsets })
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn coordinatizing_points(&self) -> &[SpacePoint] {
        &self.coords
    }

    pub fn base_point(&self) -> &SpacePoint {
        &self.base_point
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `d(C[i], C[j])`.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        self.pair_distances[i * self.coords.len() + j]
    }

    /// The same system with `C[index]` removed.
    pub fn without(&self, index: usize) -> Result<CoordinateSystem> {
        if index >= self.coords.len() {
            return Err(MetrikosError::IndexOutOfRange { index, len: self.coords.len() });
        }
        if self.coords.len() < 2 {
            return Err(MetrikosError::InvalidInput("cannot drop the only coordinatizing point".into()));
        }
        let mut coords = self.coords.clone();
        coords.remove(index);
        CoordinateSystem::new(self.space.clone(), coords, self.base_point.clone())
    }

    /// Axis-aligned bounding box of `C` (vector spaces only), inflated on every
    /// side by `factor` times its diameter (at least `factor`).
    pub fn sampling_box(&self, factor: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let dim = self.space.ambient_dim()?;
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for c in &self.coords {
            let v = c.as_vector()?;
            for k in 0..dim {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        let diameter = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max).max(1.0);
        for k in 0..dim {
            lo[k] -= factor * diameter;
            hi[k] += factor * diameter;
        }
        Some((lo, hi))
    }

    /// `x_c = d(x, c)` for every `c ∈ C`. Points outside `X` are coordinatized too.
    pub fn coords_of(&self, x: &SpacePoint) -> Result<MetricCoords> {
        self.space.validate(x)?;
        Ok(MetricCoords(self.coords.iter().map(|c| self.space.distance_unchecked(x, c)).collect()))
    }

    pub fn distance(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        self.space.distance(x, y)
    }

    /// The pseudo-metric `d_C(x, y) = max_c |x_c − y_c|`; never exceeds `d(x, y)`.
    pub fn d_c(&self, x: &SpacePoint, y: &SpacePoint) -> Result<f64> {
        let cx = self.coords_of(x)?;
        let cy = self.coords_of(y)?;
        Ok(cx.sup_distance(&cy))
    }

    /// `i(x)_c = x_c − d(c, w)`; an isometry from `(X, d_C)` into `(ℝ^C, ‖·‖_∞)`.
    pub fn embed(&self, x: &SpacePoint) -> Result<EmbeddedPoint> {
        let cx = self.coords_of(x)?;
        Ok(self.embed_coords(&cx))
    }

    pub fn embed_coords(&self, coords: &MetricCoords) -> EmbeddedPoint {
        EmbeddedPoint(coords.0.iter().zip(&self.base_offsets).map(|(x, o)| x - o).collect())
    }

    /// Inverse of [`embed_coords`](Self::embed_coords) on coordinate tuples.
    pub fn unembed(&self, e: &EmbeddedPoint) -> MetricCoords {
        MetricCoords(e.0.iter().zip(&self.base_offsets).map(|(x, o)| x + o).collect())
    }

    fn check_len(&self, coords: &MetricCoords) -> Result<()> {
        if coords.len() == self.coords.len() {
            Ok(())
        } else {
            Err(MetrikosError::shape(
                format!("{} coordinates", self.coords.len()),
                format!("{} coordinates", coords.len()),
            ))
        }
    }

    /// Reports every violated triangle-inequality constraint, using
    /// [`DEFAULT_FEASIBILITY_TOL`] relative slack.
    pub fn check_feasible(&self, coords: &MetricCoords) -> Result<FeasibilityReport> {
        self.check_feasible_tol(coords, DEFAULT_FEASIBILITY_TOL)
    }

    /// As [`check_feasible`](Self::check_feasible) with an explicit tolerance,
    /// scaled by `max(1, |x_a|, |x_b|, d(a, b))` for each inequality.
    pub fn check_feasible_tol(&self, coords: &MetricCoords, tol: f64) -> Result<FeasibilityReport> {
        self.check_len(coords)?;
        let x = coords.values();
        let n = x.len();
        let mut violations = Vec::new();
        for (i, &xi) in x.iter().enumerate() {
            if xi < -tol * xi.abs().max(1.0) || !xi.is_finite() {
                violations.push(Violation { first: i, second: None, inequality: Inequality::Nonnegative, slack: xi });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = self.pair_distance(i, j);
                let scale = tol * 1f64.max(x[i].abs()).max(x[j].abs()).max(d);
                let diff_slack = d - (x[i] - x[j]).abs();
                if diff_slack < -scale {
                    violations.push(Violation {
                        first: i,
                        second: Some(j),
                        inequality: Inequality::Difference,
                        slack: diff_slack,
                    });
                }
                let sum_slack = x[i] + x[j] - d;
                if sum_slack < -scale {
                    violations.push(Violation {
                        first: i,
                        second: Some(j),
                        inequality: Inequality::Sum,
                        slack: sum_slack,
                    });
                }
            }
        }
        Ok(FeasibilityReport { violations })
    }

    /// All sample pairs with `d > tol` but `d_C ≤ tol`.
    pub fn verify_coordinatizing(&self, samples: &[SpacePoint], tol: f64) -> Result<CoordinatizationReport> {
        if samples.len() < 2 {
            return Err(MetrikosError::InvalidInput("need at least two samples".into()));
        }
        let coords = samples.iter().map(|s| self.coords_of(s)).collect::<Result<Vec<_>>>()?;
        let mut report = CoordinatizationReport::default();
        for i in 0..samples.len() {
            for j in (i + 1)..samples.len() {
                report.pairs_checked += 1;
                let dc = coords[i].sup_distance(&coords[j]);
                if dc > tol {
                    continue;
                }
                let d = self.space.distance_unchecked(&samples[i], &samples[j]);
                if d > tol {
                    report.witnesses.push(SeparationWitness { first: i, second: j, distance: d, dc_distance: dc });
                }
            }
        }
        Ok(report)
    }

    /// [`verify_coordinatizing`](Self::verify_coordinatizing) on the system with `C[drop_index]` removed.
    pub fn redundant_point_check(
        &self,
        drop_index: usize,
        samples: &[SpacePoint],
        tol: f64,
    ) -> Result<CoordinatizationReport> {
        self.without(drop_index)?.verify_coordinatizing(samples, tol)
    }

    pub fn compare_convergence(&self, sequence: &[SpacePoint], limit: &SpacePoint) -> Result<ConvergenceReport> {
        if sequence.is_empty() {
            return Err(MetrikosError::InvalidInput("sequence must be nonempty".into()));
        }
        let limit_coords = self.coords_of(limit)?;
        let mut dc_gaps = Vec::with_capacity(sequence.len());
        let mut d_gaps = Vec::with_capacity(sequence.len());
        for x in sequence {
            dc_gaps.push(self.coords_of(x)?.sup_distance(&limit_coords));
            d_gaps.push(self.space.distance_unchecked(x, limit));
        }
        Ok(ConvergenceReport { dc_gaps, d_gaps })
    }
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Subset;
    use proptest::prelude::*;

    fn right_corner() -> CoordinateSystem {
        CoordinateSystem::new(
            Space::euclidean(2),
            vec![[1.0, 0.0].into(), [0.0, 1.0].into(), [0.0, 0.0].into()],
            [0.0, 0.0].into(),
        )
        .unwrap()
    }

    fn pair_system() -> CoordinateSystem {
        CoordinateSystem::new(Space::euclidean(2), vec![[0.0, 0.0].into(), [1.0, 0.0].into()], [0.0, 1.0].into())
            .unwrap()
    }

    #[test]
    fn coords_of_origin_and_three_four() {
        let sys = right_corner();
        assert_eq!(sys.coords_of(&[0.0, 0.0].into()).unwrap().0, vec![1.0, 1.0, 0.0]);
        let c = sys.coords_of(&[3.0, 4.0].into()).unwrap();
        let expected = [20f64.sqrt(), 18f64.sqrt(), 5.0];
        for (a, b) in c.0.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn discrete_coords() {
        let sys = CoordinateSystem::new(
            Space::discrete(3),
            vec![SpacePoint::Index(0), SpacePoint::Index(1)],
            SpacePoint::Index(0),
        )
        .unwrap();
        assert_eq!(sys.coords_of(&SpacePoint::Index(2)).unwrap().0, vec![1.0, 1.0]);
    }

    #[test]
    fn shape_mismatch_on_coords() {
        let sys = right_corner();
        assert!(matches!(sys.coords_of(&[1.0, 2.0, 3.0].into()), Err(MetrikosError::ShapeMismatch { .. })));
    }

    #[test]
    fn system_rejects_duplicates_and_empty() {
        let s = Space::euclidean(2);
        assert!(CoordinateSystem::new(s.clone(), vec![], [0.0, 0.0].into()).is_err());
        assert!(
            CoordinateSystem::new(s.clone(), vec![[1.0, 0.0].into(), [1.0, 0.0].into()], [0.0, 0.0].into()).is_err()
        );
        let h = s.with_subset(Subset::HalfPlane).unwrap();
        assert!(CoordinateSystem::new(h, vec![[1.0, 0.0].into()], [0.0, -1.0].into()).is_err());
    }

    #[test]
    fn d_c_divergence_fixture() {
        let sys = pair_system();
        let big = 2f64.powi(15);
        let x: SpacePoint = [15.0, big].into();
        let y: SpacePoint = [-15.0, big].into();
        let dc = sys.d_c(&x, &y).unwrap();
        let four15 = 4f64.powi(15);
        let expected = 60.0 / ((196.0 + four15).sqrt() + (256.0 + four15).sqrt());
        assert!((dc - expected).abs() / expected < 1e-6, "{dc} vs {expected}");
        assert!((dc - 9.155e-4).abs() / 9.155e-4 < 0.02);
        assert_eq!(sys.distance(&x, &y).unwrap(), 30.0);
    }

    #[test]
    fn single_center_collapses_equal_radii() {
        let sys = CoordinateSystem::new(Space::euclidean(2), vec![[0.0, 0.0].into()], [0.0, 1.0].into()).unwrap();
        assert_eq!(sys.d_c(&[1.0, 0.0].into(), &[0.0, 1.0].into()).unwrap(), 0.0);
    }

    #[test]
    fn embedding_examples() {
        let sys = pair_system();
        let w = sys.base_point().clone();
        assert!(sys.embed(&w).unwrap().0.iter().all(|v| *v == 0.0));
        let e = sys.embed(&[0.0, 0.0].into()).unwrap();
        assert!((e.0[0] + 1.0).abs() < 1e-15);
        assert!((e.0[1] - (1.0 - 2f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn infeasible_tuples_name_the_inequality() {
        let sys = pair_system();
        let r = sys.check_feasible(&MetricCoords(vec![0.2, 0.2])).unwrap();
        assert!(!r.is_feasible());
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].inequality, Inequality::Sum);
        assert!((r.violations[0].slack + 0.6).abs() < 1e-12);

        let r = sys.check_feasible(&MetricCoords(vec![3.0, 1.5])).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].inequality, Inequality::Difference);
        assert!((r.violations[0].slack + 0.5).abs() < 1e-12);

        let r = sys.check_feasible(&MetricCoords(vec![-0.5, 1.0])).unwrap();
        assert!(r.violations.iter().any(|v| v.inequality == Inequality::Nonnegative));
        assert!(sys.check_feasible(&MetricCoords(vec![1.0])).is_err());
    }

    #[test]
    fn plane_with_three_points_separates_samples() {
        use rand::{Rng, SeedableRng};
        let sys = right_corner();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<SpacePoint> =
            (0..500).map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)].into()).collect();
        let r = sys.verify_coordinatizing(&samples, DEFAULT_SEPARATION_TOL).unwrap();
        assert!(r.no_counterexample());
        assert_eq!(r.pairs_checked, 500 * 499 / 2);
    }

    #[test]
    fn sup_metric_bounded_c_fails() {
        let square = vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [0.0, 1.0].into(), [1.0, 1.0].into()];
        let sys = CoordinateSystem::new(Space::sup_plane(), square, [0.0, 0.0].into()).unwrap();
        let samples = vec![[-10.0, 0.0].into(), [-10.0, 0.5].into(), [0.5, 0.5].into()];
        let r = sys.verify_coordinatizing(&samples, DEFAULT_SEPARATION_TOL).unwrap();
        assert_eq!(r.witnesses.len(), 1);
        assert_eq!((r.witnesses[0].first, r.witnesses[0].second), (0, 1));
    }

    #[test]
    fn redundant_point_checks() {
        let sys = CoordinateSystem::new(
            Space::euclidean(2),
            vec![[0.0, 0.0].into(), [1.0, 0.0].into(), [0.0, 1.0].into(), [2.0, 3.0].into()],
            [0.5, 0.5].into(),
        )
        .unwrap();
        let samples: Vec<SpacePoint> = (0..30)
            .flat_map(|i| (0..30).map(move |j| SpacePoint::from([i as f64 * 0.1 - 1.0, j as f64 * 0.13 - 2.0])))
            .collect();
        for k in 0..4 {
            assert!(sys.redundant_point_check(k, &samples, 1e-9).unwrap().no_counterexample(), "drop {k}");
        }
        assert!(matches!(sys.redundant_point_check(4, &samples, 1e-9), Err(MetrikosError::IndexOutOfRange { .. })));

        let pair = pair_system();
        let sym = vec![[1.0, 0.0].into(), [-1.0, 0.0].into(), [0.0, 1.0].into()];
        assert!(!pair.redundant_point_check(1, &sym, 1e-9).unwrap().no_counterexample());

        let disc = CoordinateSystem::new(
            Space::discrete(3),
            vec![SpacePoint::Index(0), SpacePoint::Index(1)],
            SpacePoint::Index(0),
        )
        .unwrap();
        let all: Vec<SpacePoint> = (0..3).map(SpacePoint::Index).collect();
        assert!(disc.verify_coordinatizing(&all, 1e-9).unwrap().no_counterexample());
        assert!(!disc.redundant_point_check(0, &all, 1e-9).unwrap().no_counterexample());
    }

    #[test]
    fn convergence_of_simple_sequence() {
        let sys = pair_system();
        let seq: Vec<SpacePoint> = (1..200).map(|n| [1.0 / n as f64, 0.0].into()).collect();
        let r = sys.compare_convergence(&seq, &[0.0, 0.0].into()).unwrap();
        assert!(*r.dc_gaps.last().unwrap() < 1e-2);
        assert!(*r.d_gaps.last().unwrap() < 1e-2);
        assert!(sys.compare_convergence(&[], &[0.0, 0.0].into()).is_err());
    }

    proptest! {
        #[test]
        fn pseudo_metric_and_domination(
            ax in -5.0..5.0f64, ay in -5.0..5.0f64,
            bx in -5.0..5.0f64, by in -5.0..5.0f64,
            cx in -5.0..5.0f64, cy in -5.0..5.0f64,
        ) {
            let sys = right_corner();
            let (x, y, z): (SpacePoint, SpacePoint, SpacePoint) = ([ax, ay].into(), [bx, by].into(), [cx, cy].into());
            let dxy = sys.d_c(&x, &y).unwrap();
            prop_assert_eq!(dxy, sys.d_c(&y, &x).unwrap());
            prop_assert_eq!(sys.d_c(&x, &x).unwrap(), 0.0);
            prop_assert!(sys.d_c(&x, &z).unwrap() <= dxy + sys.d_c(&y, &z).unwrap() + 1e-12);
            prop_assert!(dxy <= sys.distance(&x, &y).unwrap() + 1e-12);
            let ex = sys.embed(&x).unwrap();
            let ey = sys.embed(&y).unwrap();
            prop_assert!((ex.sup_distance(&ey) - dxy).abs() < 1e-12);
            prop_assert!(ex.sup_norm() <= sys.distance(&x, sys.base_point()).unwrap() + 1e-12);
            let cxs = sys.coords_of(&x).unwrap();
            prop_assert!(cxs.0.iter().all(|v| *v >= 0.0));
            prop_assert!(sys.check_feasible(&cxs).unwrap().is_feasible());
        }
    }
}
