//! Shared fixtures for the benchmarks.

use homflow::catalog;
use homflow::homspace::{split_u, ReductiveSplit};
use homflow::InvariantMetric;
use nalgebra::DVector;

/// Split of the two-weight example with a non-trivial adapted metric.
pub fn two_weight_fixture() -> (ReductiveSplit, InvariantMetric) {
    let split = split_u(&catalog::e5(1.0, 2.0), &[], &Default::default()).expect("catalog entry splits");
    let diag = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.5, 0.5]);
    let g = InvariantMetric::new(nalgebra::DMatrix::from_diagonal(&diag)).expect("positive diagonal");
    (split, g)
}
