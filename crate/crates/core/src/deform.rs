//! Riemannian-submersion splitting `g ↔ (g^B, g^F, φ)`, the horizontal
//! retraction `r_t`, and the nilsoliton / transpose-derivation conditions.

use serde::Serialize;

use crate::curvature::{ricci, InvariantMetric};
use crate::error::{Error, Result};
use crate::homspace::{ser_mat, HomogeneousSpace, ReductiveSplit};
use crate::liealg::{LieAlgebra, SemidirectData};
use crate::linalg::{chol_upper, gram_schmidt, inverse, max_abs, spd_inverse, sym, Mat, Vector};

/// `g` written as base metric, fibre metric and horizontal graph map.
#[derive(Debug, Clone, Serialize)]
pub struct SubmersionSplit {
    /// Metric on m_u (the base `U/H`).
    #[serde(serialize_with = "ser_mat")]
    pub gb: Mat,
    /// Metric on V (the fibre).
    #[serde(serialize_with = "ser_mat")]
    pub gf: Mat,
    /// `φ: m_u → V`; the horizontal space is the graph of `Id + φ`.
    #[serde(serialize_with = "ser_mat")]
    pub phi: Mat,
    /// ad(h)-equivariance residual of φ.
    pub phi_equivariance: f64,
}

pub fn submersion_split(split: &ReductiveSplit, g: &InvariantMetric) -> Result<SubmersionSplit> {
    let nu = split.mu().len();
    let v = split.v();
    let p = g.p();
    let puu = p.view((0, 0), (nu, nu)).into_owned();
    let pvv = p.view((v.start, v.start), (v.len(), v.len())).into_owned();
    let pvu = p.view((v.start, 0), (v.len(), nu)).into_owned();
    let pvv_inv = spd_inverse(&pvv)?;
    let phi = -(&pvv_inv * &pvu);
    let gb = sym(&(&puu - pvu.transpose() * &pvv_inv * &pvu));
    let mut eq = 0.0_f64;
    for a in split.space().ad_h() {
        let au = a.view((0, 0), (nu, nu));
        let av = a.view((v.start, v.start), (v.len(), v.len()));
        eq = eq.max(max_abs(&(&phi * au - av * &phi)));
    }
    Ok(SubmersionSplit { gb, gf: pvv, phi, phi_equivariance: eq })
}

/// Inverse of [`submersion_split`].
pub fn assemble(gb: &Mat, gf: &Mat, phi: &Mat) -> Mat {
    let nu = gb.nrows();
    let nv = gf.nrows();
    let mut p = Mat::zeros(nu + nv, nu + nv);
    let pvu = -(gf * phi);
    p.view_mut((0, 0), (nu, nu)).copy_from(&(gb + phi.transpose() * gf * phi));
    p.view_mut((nu, nu), (nv, nv)).copy_from(gf);
    p.view_mut((nu, 0), (nv, nu)).copy_from(&pvu);
    p.view_mut((0, nu), (nu, nv)).copy_from(&pvu.transpose());
    sym(&p)
}

/// `r_t(g) = g(g^B, g^F, (1−t)φ)`.
pub fn retract_horizontal(ss: &SubmersionSplit, t: f64) -> Result<InvariantMetric> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("retraction parameter {t} outside [0,1]")));
    }
    InvariantMetric::new(assemble(&ss.gb, &ss.gf, &(&ss.phi * (1.0 - t))))
}

/// The pieces of the unimodular scalar curvature along the submersion:
/// `scal* = base − ¼·oneill + trace_term + fiber_term`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalStarTerms {
    /// Scalar curvature of `(U/H, g^B)`.
    pub base: f64,
    /// `Σ g([X_i,X_j], V_k)²` over horizontal and vertical orthonormal frames.
    pub oneill: f64,
    /// `−½ Σ tr θ(U_i)²`.
    pub trace_term: f64,
    /// `−½ Σ ‖θ(U_i)‖²_{g^F}`.
    pub fiber_term: f64,
}

impl ScalStarTerms {
    pub fn total(&self) -> f64 {
        self.base - 0.25 * self.oneill + self.trace_term + self.fiber_term
    }
}

pub fn scal_star_terms(split: &ReductiveSplit, ss: &SubmersionSplit) -> Result<ScalStarTerms> {
    let nu = ss.gb.nrows();
    let nv = ss.gf.nrows();
    let n = nu + nv;
    let p = assemble(&ss.gb, &ss.gf, &ss.phi);
    let ub = InvariantMetric::new(ss.gb.clone())?.frame();
    let vf = if nv == 0 { Mat::zeros(0, 0) } else { InvariantMetric::new(ss.gf.clone())?.frame() };
    let base = if nu == 0 { 0.0 } else { ricci(split.u_space(), &InvariantMetric::new(ss.gb.clone())?)?.scal };

    let xs: Vec<Vector> = (0..nu)
        .map(|i| {
            let mut x = Vector::zeros(n);
            x.rows_mut(0, nu).copy_from(&ub.column(i));
            let vert = &ss.phi * ub.column(i);
            x.rows_mut(nu, nv).copy_from(&vert);
            x
        })
        .collect();
    let vk: Vec<Vector> = (0..nv)
        .map(|k| {
            let mut x = Vector::zeros(n);
            x.rows_mut(nu, nv).copy_from(&vf.column(k));
            x
        })
        .collect();
    let mut oneill = 0.0;
    for i in 0..nu {
        for j in 0..nu {
            if i == j {
                continue;
            }
            let w = &p * split.space().bracket_m(&xs[i], &xs[j]);
            for v in &vk {
                oneill += w.dot(v).powi(2);
            }
        }
    }
    let mut trace_term = 0.0;
    let mut fiber_term = 0.0;
    for i in 0..nu {
        let mut u = Vector::zeros(n);
        u.rows_mut(0, nu).copy_from(&ub.column(i));
        let th = split.ad_on_v(&u);
        trace_term -= 0.5 * (&th * &th).trace();
        if nv > 0 {
            let thg = vf.transpose() * &ss.gf * &th * &vf;
            fiber_term -= 0.5 * thg.norm_squared();
        }
    }
    Ok(ScalStarTerms { base, oneill, trace_term, fiber_term })
}

/// Fit `Ric_N ≈ c·Id + D` with D a g^F-symmetric derivation.
#[derive(Debug, Clone, Serialize)]
pub struct NilsolitonFit {
    pub c: f64,
    /// D in the original basis of n.
    #[serde(serialize_with = "ser_mat")]
    pub d: Mat,
    pub residual: f64,
    pub symmetry_residual: f64,
    pub derivation_residual: f64,
}

/// Frobenius-orthonormal basis of a family of matrices.
fn orthonormal_family(mats: &[Mat], n: usize) -> Vec<Mat> {
    if mats.is_empty() {
        return vec![];
    }
    let cols: Vec<Vector> = mats.iter().map(|m| Vector::from_column_slice(m.as_slice())).collect();
    let q = gram_schmidt(&Mat::from_columns(&cols), &Mat::identity(n * n, n * n), 1e-10);
    (0..q.ncols()).map(|c| Mat::from_column_slice(n, n, q.column(c).as_slice())).collect()
}

fn project(basis: &[Mat], m: &Mat) -> Mat {
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for b in basis {
        out += b * b.dot(m);
    }
    out
}

/// `n` in a g^F-orthonormal basis, plus the change of basis `R⁻¹`.
fn orthonormal_algebra(n: &LieAlgebra, gf: &Mat) -> Result<(LieAlgebra, Mat, Mat)> {
    if gf.nrows() != n.dim() || gf.ncols() != n.dim() {
        return Err(Error::Dimension(format!("fibre metric must be {0}x{0}", n.dim())));
    }
    crate::linalg::check_spd(gf)?;
    let r = chol_upper(gf)?;
    let rinv = inverse(&r)?;
    Ok((n.change_basis(&rinv)?, r, rinv))
}

pub fn nilsoliton_fit(n: &LieAlgebra, gf: &Mat) -> Result<NilsolitonFit> {
    if !n.is_nilpotent() {
        return Err(Error::NotNilpotent);
    }
    let dim = n.dim();
    let (on, r, rinv) = orthonormal_algebra(n, gf)?;
    let ric = ricci(&HomogeneousSpace::lie_group(on.clone()), &InvariantMetric::background(dim))?.ric;

    let ders = on.derivations();
    // symmetric derivations: null space of the antisymmetric-part map
    let sym_ders: Vec<Mat> = if ders.is_empty() {
        vec![]
    } else {
        let a = Mat::from_columns(
            &ders.iter().map(|d| Vector::from_column_slice((d - d.transpose()).as_slice())).collect::<Vec<_>>(),
        );
        let ns = crate::linalg::null_space(&a, 1e-8);
        (0..ns.ncols())
            .map(|c| {
                let mut m = Mat::zeros(dim, dim);
                for (i, d) in ders.iter().enumerate() {
                    m += d * ns[(i, c)];
                }
                sym(&m)
            })
            .collect()
    };
    let basis = orthonormal_family(&sym_ders, dim);
    let id = Mat::identity(dim, dim);
    let id_perp = &id - project(&basis, &id);
    let c = if id_perp.norm() > 1e-9 {
        let rp = &ric - project(&basis, &ric);
        rp.dot(&id_perp) / id_perp.norm_squared()
    } else {
        0.0
    };
    let d_on = project(&basis, &(&ric - &id * c));
    let residual = (&ric - &id * c - &d_on).norm();
    let d = &rinv * &d_on * &r;
    let gd = gf * &d;
    Ok(NilsolitonFit {
        c,
        symmetry_residual: max_abs(&(&gd - gd.transpose())),
        derivation_residual: n.derivation_residual(&d),
        d,
        residual,
    })
}

/// Max over θ_k of the Frobenius distance from the g^F-transpose of θ_k to
/// Der(n), measured in a g^F-orthonormal basis.
pub fn transpose_derivation_residual(d: &SemidirectData, n: &LieAlgebra, gf: &Mat) -> Result<f64> {
    if d.dim_v() != n.dim() {
        return Err(Error::Dimension("theta acts on a space of the wrong dimension".into()));
    }
    for t in d.theta() {
        let r = n.derivation_residual(t);
        if r > 1e-9 * n.scale() * max_abs(t).max(1.0) {
            return Err(Error::NotDerivation(r));
        }
    }
    let (on, r, rinv) = orthonormal_algebra(n, gf)?;
    let basis = orthonormal_family(&on.derivations(), n.dim());
    let mut worst = 0.0_f64;
    for t in d.theta() {
        let tt = (&r * t * &rinv).transpose();
        worst = worst.max((&tt - project(&basis, &tt)).norm());
    }
    Ok(worst)
}

/// Residuals tracked along a flow on `u ⋉_θ n`.
#[derive(Debug, Clone, Serialize)]
pub struct Prop65Sample {
    pub t: f64,
    /// Largest metric entry coupling u and n.
    pub coupling: f64,
    pub nilsoliton_residual: f64,
    pub transpose_residual: f64,
}

/// Runs the Ricci flow on the Lie group `u ⋉_θ n` from `p0` and re-measures
/// the nilsoliton and transpose-derivation residuals of the fibre metric at
/// every accepted step.
pub fn nilradical_flow_check(
    u: &LieAlgebra,
    n: &LieAlgebra,
    theta: &[Mat],
    p0: &Mat,
    controls: &crate::flow::FlowControls,
) -> Result<Vec<Prop65Sample>> {
    let g = crate::liealg::semidirect_with(u, n, theta)?;
    let space = HomogeneousSpace::lie_group(g);
    let raw = crate::flow::integrate_raw(&space, p0, controls)?;
    let p = u.dim();
    let q = n.dim();
    let d = SemidirectData::new(u.clone(), q, theta.to_vec())
        .or_else(|_| Err(Error::InvalidArgument("theta is not a representation".into())))?;
    raw.times
        .iter()
        .zip(&raw.metrics)
        .map(|(&t, m)| {
            let gf = m.view((p, p), (q, q)).into_owned();
            let coupling = max_abs(&m.view((0, p), (p, q)).into_owned());
            Ok(Prop65Sample {
                t,
                coupling,
                nilsoliton_residual: nilsoliton_fit(n, &gf)?.residual,
                transpose_residual: transpose_derivation_residual(&d, n, &gf)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::homspace::split_u;

    #[test]
    fn heisenberg_nilsoliton() {
        let f = nilsoliton_fit(&LieAlgebra::heisenberg(), &Mat::identity(3, 3)).unwrap();
        assert!((f.c + 1.5).abs() < 1e-12);
        let want = Mat::from_diagonal(&Vector::from_vec(vec![1.0, 1.0, 2.0]));
        assert!((&f.d - want).amax() < 1e-12);
        assert!(f.residual < 1e-12);
    }

    #[test]
    fn abelian_nilsoliton_is_trivial() {
        let f = nilsoliton_fit(&LieAlgebra::abelian(3), &Mat::identity(3, 3)).unwrap();
        assert_eq!(f.c, 0.0);
        assert!(f.d.amax() < 1e-15);
        assert!(f.residual < 1e-15);
    }

    #[test]
    fn non_nilpotent_rejected() {
        assert!(matches!(nilsoliton_fit(&LieAlgebra::su2(), &Mat::identity(3, 3)), Err(Error::NotNilpotent)));
    }

    #[test]
    fn two_by_two_schur() {
        let split = split_u(&catalog::e4(), &[], &Default::default()).unwrap();
        let mut p = Mat::identity(3, 3);
        p[(1, 1)] = 2.0;
        p[(0, 1)] = 0.3;
        p[(1, 0)] = 0.3;
        let ss = submersion_split(&split, &InvariantMetric::new(p.clone()).unwrap()).unwrap();
        assert!((ss.phi[(0, 0)] + 0.15).abs() < 1e-15);
        assert!((ss.gb[(0, 0)] - (1.0 - 0.09 / 2.0)).abs() < 1e-15);
        assert!((assemble(&ss.gb, &ss.gf, &ss.phi) - p).amax() < 1e-15);
    }

    #[test]
    fn transpose_residual_counterexample() {
        let h3 = LieAlgebra::heisenberg();
        // X ↦ Z is a derivation; its transpose Z ↦ X is not
        let dx = Mat::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let d = SemidirectData::new(LieAlgebra::abelian(1), 3, vec![dx]).unwrap();
        assert!(transpose_derivation_residual(&d, &h3, &Mat::identity(3, 3)).unwrap() > 0.1);
        let rot = Mat::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let d = SemidirectData::new(LieAlgebra::abelian(1), 3, vec![rot]).unwrap();
        assert!(transpose_derivation_residual(&d, &h3, &Mat::identity(3, 3)).unwrap() < 1e-12);
    }
}
