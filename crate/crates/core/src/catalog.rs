//! Built-in examples with exact structure constants.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{rotation_generators, LieAlgebra, SemidirectData};
use crate::linalg::Mat;

pub const NAMES: [&str; 5] = ["E1_su2xR_R3", "E2_su2_biinv", "E3_heisenberg", "E4_preflat_E2", "E5_two_weights"];

/// Tunable constants of the catalog entries.
#[derive(Debug, Clone, Copy)]
pub struct CatalogParams {
    pub lambda: f64,
    pub lambda2: f64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams { lambda: 1.0, lambda2: 2.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuggestedMetric {
    pub name: String,
    /// Row-major P on m in the adapted basis.
    pub p: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub data: SemidirectData,
    pub h_basis: Vec<Vec<f64>>,
    pub metrics: Vec<SuggestedMetric>,
}

/// `su(2) ⊕ ℝZ`; basis e1, e2, e3, Z.
pub fn su2_plus_r() -> LieAlgebra {
    LieAlgebra::from_brackets(
        4,
        Some(vec!["e1".into(), "e2".into(), "e3".into(), "Z".into()]),
        &[
            (0, 1, vec![0.0, 0.0, 1.0, 0.0]),
            (1, 2, vec![1.0, 0.0, 0.0, 0.0]),
            (2, 0, vec![0.0, 1.0, 0.0, 0.0]),
        ],
    )
    .expect("valid constants")
}

/// `(su(2) ⊕ ℝ) ⋉ ℝ³`, rotation action and `θ(Z) = λ·Id`.
pub fn e1(lambda: f64) -> SemidirectData {
    let mut th = rotation_generators();
    th.push(Mat::identity(3, 3) * lambda);
    SemidirectData::new(su2_plus_r(), 3, th).expect("valid representation")
}

pub fn e2() -> SemidirectData {
    SemidirectData::new(LieAlgebra::su2(), 0, vec![Mat::zeros(0, 0); 3]).expect("valid")
}

/// Heisenberg algebra written as `ℝX ⋉ ℝ²` with `θ(X): Y ↦ Z`.
pub fn e3() -> SemidirectData {
    let u = LieAlgebra::abelian(1).with_labels(vec!["X".into()]).expect("one label");
    SemidirectData::new(u, 2, vec![Mat::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0])]).expect("valid")
}

/// `ℝZ ⋉ ℝ²` with the rotation generator.
pub fn e4() -> SemidirectData {
    let u = LieAlgebra::abelian(1).with_labels(vec!["Z".into()]).expect("one label");
    SemidirectData::new(u, 2, vec![Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])]).expect("valid")
}

/// `(su(2) ⊕ ℝ) ⋉ (ℝ³ ⊕ ℝ³)` with weights λ1, λ2 on the two copies.
pub fn e5(lambda1: f64, lambda2: f64) -> SemidirectData {
    let rot = rotation_generators();
    let mut th: Vec<Mat> = rot.iter().map(|r| crate::linalg::block_diag(&[r.clone(), r.clone()])).collect();
    th.push(crate::linalg::block_diag(&[Mat::identity(3, 3) * lambda1, Mat::identity(3, 3) * lambda2]));
    SemidirectData::new(su2_plus_r(), 6, th).expect("valid representation")
}

fn diag(values: &[f64]) -> Vec<Vec<f64>> {
    crate::linalg::to_rows(&Mat::from_diagonal(&nalgebra::DVector::from_row_slice(values)))
}

fn metric(name: &str, values: &[f64]) -> SuggestedMetric {
    SuggestedMetric { name: name.into(), p: diag(values) }
}

pub fn entry(name: &str, params: CatalogParams) -> Result<CatalogEntry> {
    let e = match name {
        "E1_su2xR_R3" => CatalogEntry {
            name: NAMES[0],
            description: "(su(2)+R) x R^3, rotation action, Z acting by lambda*Id",
            data: e1(params.lambda),
            h_basis: vec![],
            metrics: vec![
                metric("background", &[1.0; 7]),
                metric("v_diag_1_1_4", &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0]),
            ],
        },
        "E2_su2_biinv" => CatalogEntry {
            name: NAMES[1],
            description: "su(2), V = 0",
            data: e2(),
            h_basis: vec![],
            metrics: vec![metric("background", &[1.0; 3]), metric("berger", &[1.0, 1.0, 2.0])],
        },
        "E3_heisenberg" => CatalogEntry {
            name: NAMES[2],
            description: "Heisenberg algebra [X,Y]=Z as R x R^2 (nilpotent, not stable)",
            data: e3(),
            h_basis: vec![],
            metrics: vec![metric("background", &[1.0; 3])],
        },
        "E4_preflat_E2" => CatalogEntry {
            name: NAMES[3],
            description: "R x R^2 with the rotation generator (unimodular, preflat)",
            data: e4(),
            h_basis: vec![],
            metrics: vec![metric("flat", &[1.0; 3]), metric("v_diag_1_4", &[1.0, 1.0, 4.0])],
        },
        "E5_two_weights" => CatalogEntry {
            name: NAMES[4],
            description: "(su(2)+R) x (R^3 + R^3) with distinct weights lambda, lambda2",
            data: e5(params.lambda, params.lambda2),
            h_basis: vec![],
            metrics: vec![
                metric("background", &[1.0; 10]),
                metric("blocks", &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.5, 0.5]),
            ],
        },
        other => return Err(Error::InvalidArgument(format!("unknown catalog entry '{other}'"))),
    };
    if params.lambda2 == params.lambda && e.name == NAMES[4] {
        return Err(Error::InvalidArgument("E5 needs two distinct weights".into()));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_entries_resolve() {
        for n in NAMES {
            let e = entry(n, CatalogParams::default()).unwrap();
            assert!(e.data.semidirect().is_ok());
        }
        assert!(entry("E9", CatalogParams::default()).is_err());
    }
}
