//! Numerical toolkit for homogeneous spaces `G/H` with `G = U ⋉_θ V`:
//! structure constants, reductive and weight decompositions, Ricci and
//! unimodular Ricci curvature, the (unimodular) Ricci flow on invariant
//! metrics, moment-map stability and the submersion deformation.

pub mod catalog;
pub mod curvature;
pub mod deform;
pub mod error;
pub mod flow;
pub mod homspace;
pub mod liealg;
pub mod linalg;
pub mod ode;
pub mod sampling;
pub mod stability;

pub use curvature::{CurvatureReport, InvariantMetric};
pub use error::{Error, Result};
pub use flow::{FlowControls, FlowKind, FlowTrajectory};
pub use homspace::{split_u, weight_split, HomogeneousSpace, ReductiveSplit, SplitOptions, WeightDecomposition};
pub use liealg::{LieAlgebra, SemidirectData};
pub use linalg::{Mat, Vector};
