//! Shared fixtures for the benchmark targets.

use nmm_core::fit::Dataset;
use nmm_core::Admg;

/// The saturated four-variable example graph.
pub fn saturated4() -> Admg {
    Admg::parse(
        4,
        &[("x2", "x4"), ("x2", "x1"), ("x3", "x1")],
        &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
    )
    .unwrap()
}

/// The four-variable chain with two crossing bidirected arcs.
pub fn verma4_graph() -> Admg {
    Admg::parse(
        4,
        &[("x1", "x2"), ("x2", "x3"), ("x3", "x4")],
        &[("x1", "x3"), ("x2", "x4")],
    )
    .unwrap()
}

/// A fixed strictly positive dataset over four variables.
pub fn dataset4() -> Dataset {
    let counts: Vec<f64> = (0..16).map(|i| 40.0 + ((i * 37) % 61) as f64).collect();
    Dataset::new((1..=4).map(|i| format!("x{i}")).collect(), counts).unwrap()
}
