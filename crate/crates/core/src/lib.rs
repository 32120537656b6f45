//! Metric coordinate systems: points of a metric space described by their
//! distances to a fixed coordinatizing set, with conversion to Cartesian
//! coordinates, coordinate-wise calculus, vector fields and their flows,
//! invariance diagnostics and geometric loci.

pub mod calculus;
pub mod conversion;
pub mod error;
pub mod fields;
pub mod invariance;
pub mod loci;
pub mod metric_core;
pub mod spaces;

pub use calculus::{
    central_derivative, char_shift_derivative, forward_derivative, tangency_test, tangent_metric, CentralDerivative,
    Curve, DerivativeOptions, Differentiability, ForwardDerivative, Tangency, TangentRep,
};
pub use conversion::{
    hilbert_to_metric, metric_to_hilbert, multilaterate, orthonormal_system, Multilateration, MultilaterationOptions,
};
pub use error::{MetrikosError, Result};
pub use fields::{
    conserved_quantities, integrate_coords, integrate_points, integrate_sphere_flow, lipschitz_estimate,
    mcshane_extend, mcshane_extend_vector, random_probes, realize_on_sphere, ConservationLaw, CoordField, Method,
    Trajectory, TrajectoryStatus,
};
pub use invariance::{
    default_nagumo_steps, invariance_test, nagumo_check, nagumo_residual, set_distance, CoordSet, InvarianceOutcome,
    NagumoReport, VelocityField,
};
pub use loci::{locus_membership, locus_residual, sample_locus, Branch, Locus, Membership};
pub use metric_core::{CoordinateSystem, EmbeddedPoint, FeasibilityReport, Inequality, MetricCoords, Violation};
pub use spaces::{great_circle, GridSpace, Space, SpaceKind, SpacePoint, Subset};

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
pub struct ReadmeDoctests;
