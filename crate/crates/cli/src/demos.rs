//! Scenarios bundled into the binary.

pub const DEMOS: &[(&str, &str)] = &[
    ("airtraffic_ellipsoid_sphere", include_str!("../scenarios/airtraffic_ellipsoid_sphere.toml")),
    ("airtraffic_hyperboloid", include_str!("../scenarios/airtraffic_hyperboloid.toml")),
    ("s2_hyperbolic", include_str!("../scenarios/s2_hyperbolic.toml")),
    ("strips_discontinuous", include_str!("../scenarios/strips_discontinuous.toml")),
    ("dc_vs_d_divergence", include_str!("../scenarios/dc_vs_d_divergence.toml")),
    ("observer_dependence", include_str!("../scenarios/observer_dependence.toml")),
    ("slit_plane_nonhomeo", include_str!("../scenarios/slit_plane_nonhomeo.toml")),
    ("hilbert_roundtrip", include_str!("../scenarios/hilbert_roundtrip.toml")),
    ("mcshane_cutoff", include_str!("../scenarios/mcshane_cutoff.toml")),
];

pub fn find(name: &str) -> Option<&'static str> {
    DEMOS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    DEMOS.iter().map(|(n, _)| *n)
}
