//! Ricci and unimodular Ricci curvature of invariant metrics.
//!
//! With a g-orthonormal frame `X_i` of m,
//!
//! ```text
//! ric(X,Y)  = −½B(X,Y) + M(X,Y) − ½(g([H,X]_m,Y) + g([H,Y]_m,X))
//! M(X,Y)    = −½ Σ_i g([X,X_i]_m,[Y,X_i]_m) + ¼ Σ_{i,j} g([X_i,X_j]_m,X) g([X_i,X_j]_m,Y)
//! ric*      = −½B + M
//! ```
//!
//! where `g(H,X) = tr(ad X)`. All matrices are expressed in the adapted basis
//! of m (background-orthonormal), as (0,2) tensors.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homspace::{check_theta_adapted, ser_mat, HomogeneousSpace, ReductiveSplit, TOL_BLOCK};
use crate::linalg::{check_spd, max_abs, spd_inverse, sym, sym_eigen, Mat, Vector};

/// `g(x,y) = ⟨Px, y⟩` for the background ⟨·,·⟩ (the identity in adapted
/// coordinates).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMetric {
    #[serde(serialize_with = "ser_mat")]
    p: Mat,
}

/// Tolerance for ad(h)-equivariance of P.
pub const TOL_EQUIV: f64 = 1e-10;

impl InvariantMetric {
    pub fn new(p: Mat) -> Result<Self> {
        check_spd(&p)?;
        Ok(InvariantMetric { p: sym(&p) })
    }

    /// Validates dimension and ad(h)-equivariance against a space.
    pub fn on(space: &HomogeneousSpace, p: Mat) -> Result<Self> {
        if p.nrows() != space.dim_m() {
            return Err(Error::Dimension(format!("metric is {}x{}, m has dimension {}", p.nrows(), p.ncols(), space.dim_m())));
        }
        let m = Self::new(p)?;
        let res = space.equivariance_residual(&m.p);
        if res > TOL_EQUIV * max_abs(&m.p).max(1.0) * space.algebra().scale() {
            return Err(Error::NotEquivariant(res));
        }
        Ok(m)
    }

    pub fn background(n: usize) -> Self {
        InvariantMetric { p: Mat::identity(n, n) }
    }

    pub fn p(&self) -> &Mat {
        &self.p
    }

    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn scaled(&self, s: f64) -> Self {
        InvariantMetric { p: &self.p * s }
    }

    /// Columns form a g-orthonormal frame diagonalizing P.
    pub fn frame(&self) -> Mat {
        let (vals, vecs) = sym_eigen(&self.p);
        let mut f = vecs;
        for (c, v) in vals.iter().enumerate() {
            let s = 1.0 / v.sqrt();
            f.column_mut(c).scale_mut(s);
        }
        f
    }

    pub fn inner(&self, x: &Vector, y: &Vector) -> f64 {
        x.dot(&(&self.p * y))
    }
}

/// Curvature of one metric; all tensors (0,2) in the adapted basis of m.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    #[serde(serialize_with = "ser_mat")]
    pub ric: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub ric_star: Mat,
    /// Mean curvature vector in adapted coordinates.
    pub h: Vec<f64>,
    #[serde(serialize_with = "ser_mat")]
    pub m: Mat,
    #[serde(serialize_with = "ser_mat")]
    pub b: Mat,
    /// The symmetrized `ad(H)` term, `ric = ric* − h_sym`.
    #[serde(serialize_with = "ser_mat")]
    pub h_sym: Mat,
    pub scal: f64,
    pub scal_star: f64,
    /// `−½ tr_g B − ¼‖[·,·]_m‖²_g − ‖H‖²_g`, evaluated independently of the trace.
    pub scal_formula: f64,
    pub ric_norm_sq: f64,
    pub ric_star_norm_sq: f64,
    pub mean_curvature_norm_sq: f64,
    pub bracket_norm_sq: f64,
}

/// Ricci data using the eigenframe of P.
pub fn ricci(space: &HomogeneousSpace, g: &InvariantMetric) -> Result<CurvatureReport> {
    if g.dim() != space.dim_m() {
        return Err(Error::Dimension(format!("metric dim {} vs dim m {}", g.dim(), space.dim_m())));
    }
    Ok(ricci_in_frame(space, g.p(), &g.frame()))
}

/// Ricci data computed with a caller-supplied g-orthonormal frame.
pub fn ricci_with_frame(space: &HomogeneousSpace, g: &InvariantMetric, frame: &Mat) -> Result<CurvatureReport> {
    let n = space.dim_m();
    if g.dim() != n || frame.nrows() != n || frame.ncols() != n {
        return Err(Error::Dimension("frame shape".into()));
    }
    let dev = max_abs(&(frame.transpose() * g.p() * frame - Mat::identity(n, n)));
    if dev > 1e-9 {
        return Err(Error::InvalidArgument(format!("frame is not g-orthonormal (deviation {dev:.3e})")));
    }
    Ok(ricci_in_frame(space, g.p(), frame))
}

fn ricci_in_frame(space: &HomogeneousSpace, p: &Mat, f: &Mat) -> CurvatureReport {
    let n = space.dim_m();
    let cm = space.cm_slice();
    // G = Fᵀ P maps adapted coordinates to frame coordinates
    let gmat = f.transpose() * p;
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;

    let mut t1 = vec![0.0; n * n * n];
    for i in 0..n {
        for a in 0..n {
            let w = f[(a, i)];
            if w == 0.0 {
                continue;
            }
            for b in 0..n {
                for c in 0..n {
                    t1[idx(i, b, c)] += w * cm[idx(a, b, c)];
                }
            }
        }
    }
    let mut t2 = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for b in 0..n {
                let w = f[(b, j)];
                if w == 0.0 {
                    continue;
                }
                for c in 0..n {
                    t2[idx(i, j, c)] += w * t1[idx(i, b, c)];
                }
            }
        }
    }
    // gamma[i][j][k] = g([X_i, X_j]_m, X_k)
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = 0.0;
                for c in 0..n {
                    s += gmat[(k, c)] * t2[idx(i, j, c)];
                }
                gamma[idx(i, j, k)] = s;
            }
        }
    }

    let bf = f.transpose() * space.killing_m() * f;
    let hf: Vector = f.transpose() * space.trace_m();

    let mut mo = Mat::zeros(n, n);
    for p_ in 0..n {
        for q in p_..n {
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for i in 0..n {
                for k in 0..n {
                    s1 += gamma[idx(p_, i, k)] * gamma[idx(q, i, k)];
                    s2 += gamma[idx(i, k, p_)] * gamma[idx(i, k, q)];
                }
            }
            let v = -0.5 * s1 + 0.25 * s2;
            mo[(p_, q)] = v;
            mo[(q, p_)] = v;
        }
    }
    let mut hs = Mat::zeros(n, n);
    for p_ in 0..n {
        for q in 0..n {
            let mut s = 0.0;
            for r in 0..n {
                s += hf[r] * (gamma[idx(r, p_, q)] + gamma[idx(r, q, p_)]);
            }
            hs[(p_, q)] = 0.5 * s;
        }
    }
    let ric_star_f = &bf * -0.5 + &mo;
    let ric_f = &ric_star_f - &hs;

    let bracket_norm_sq: f64 = gamma.iter().map(|x| x * x).sum();
    let h_norm_sq = hf.norm_squared();
    let scal_formula = -0.5 * bf.trace() - 0.25 * bracket_norm_sq - h_norm_sq;

    let back = |m: &Mat| sym(&(gmat.transpose() * m * &gmat));
    CurvatureReport {
        ric: back(&ric_f),
        ric_star: back(&ric_star_f),
        h: (f * &hf).iter().cloned().collect(),
        m: back(&mo),
        b: space.killing_m().clone(),
        h_sym: back(&hs),
        scal: ric_f.trace(),
        scal_star: ric_star_f.trace(),
        scal_formula,
        ric_norm_sq: ric_f.norm_squared(),
        ric_star_norm_sq: ric_star_f.norm_squared(),
        mean_curvature_norm_sq: h_norm_sq,
        bracket_norm_sq,
    }
}

/// `H_g` solving `g(H, X) = tr(ad X)`.
pub fn mean_curvature(space: &HomogeneousSpace, g: &InvariantMetric) -> Result<Vector> {
    Ok(spd_inverse(g.p())? * space.trace_m())
}

pub fn unimodular_ricci(space: &HomogeneousSpace, g: &InvariantMetric) -> Result<Mat> {
    Ok(ricci(space, g)?.ric_star)
}

/// `Ric = P⁻¹ ric`, the (1,1) form.
pub fn ricci_operator(g: &InvariantMetric, ric: &Mat) -> Result<Mat> {
    Ok(spd_inverse(g.p())? * ric)
}

fn require_adapted(split: &ReductiveSplit, g: &InvariantMetric) -> Result<()> {
    let r = check_theta_adapted(split, g.p());
    if r > TOL_BLOCK * max_abs(g.p()).max(1.0) {
        return Err(Error::NotAdapted(r));
    }
    Ok(())
}

/// Eigen-data of P on one weight block.
#[derive(Debug, Clone)]
pub struct BlockFrame {
    /// Eigenvalues `g_1 ≤ … ≤ g_d`.
    pub g: Vector,
    /// Background-orthonormal eigenvectors `Ā_i` (block coordinates).
    pub abar: Mat,
}

pub fn block_frame(g: &InvariantMetric, r: std::ops::Range<usize>) -> BlockFrame {
    let blk = g.p().view((r.start, r.start), (r.len(), r.len())).into_owned();
    let (vals, vecs) = sym_eigen(&blk);
    BlockFrame { g: vals, abar: vecs }
}

/// g-orthonormal frame of m_u (columns, m coordinates).
pub fn mu_frame(split: &ReductiveSplit, g: &InvariantMetric) -> Mat {
    let mu = split.mu();
    let n = split.dim_m();
    let pmu = g.p().view((0, 0), (mu.len(), mu.len())).into_owned();
    let f = InvariantMetric { p: pmu }.frame();
    let mut out = Mat::zeros(n, mu.len());
    out.view_mut((0, 0), (mu.len(), mu.len())).copy_from(&f);
    out
}

/// `c[i][j] = ⟨[X, Ā_i], Ā_j⟩` on one block, for X in m_u.
pub fn block_coefficients(split: &ReductiveSplit, x: &Vector, r: &std::ops::Range<usize>, abar: &Mat) -> Mat {
    let ad = split.space().ad_m(x);
    let blk = ad.view((r.start, r.start), (r.len(), r.len())).into_owned();
    // column i of blk·Ā holds [X, Ā_i]; project onto Ā_j
    (abar.transpose() * blk * abar).transpose()
}

/// Specialized V-block evaluation on one weight block.
#[derive(Debug, Clone, Serialize)]
pub struct VBlock {
    pub g: Vec<f64>,
    /// `ric*(A_i, A_i)` from the block formula, `A_i = Ā_i/√g_i`.
    pub diag: Vec<f64>,
    /// `ric*(A_p, A_q)` from the block formula.
    #[serde(serialize_with = "ser_mat")]
    pub full: Mat,
    /// Same entries from the general formula.
    #[serde(serialize_with = "ser_mat")]
    pub general: Mat,
    pub max_deviation: f64,
}

pub fn ricci_v_block(split: &ReductiveSplit, g: &InvariantMetric) -> Result<Vec<VBlock>> {
    require_adapted(split, g)?;
    let general = ricci(split.space(), g)?.ric_star;
    let u = mu_frame(split, g);
    let mut out = Vec::new();
    for r in split.blocks() {
        let bf = block_frame(g, r.clone());
        let d = r.len();
        let coeffs: Vec<Mat> =
            (0..u.ncols()).map(|k| block_coefficients(split, &u.column(k).into_owned(), &r, &bf.abar)).collect();
        let diag: Vec<f64> = (0..d)
            .map(|i| {
                let mut s = 0.0;
                for c in &coeffs {
                    for j in 0..d {
                        s += c[(i, j)].powi(2) * (bf.g[i] / bf.g[j] - bf.g[j] / bf.g[i]);
                    }
                }
                0.5 * s
            })
            .collect();
        // Θ_k[j][i] = g(θ_k A_i, A_j) = c_k[i][j] √(g_j / g_i)
        let mut full = Mat::zeros(d, d);
        for c in &coeffs {
            let th = Mat::from_fn(d, d, |j, i| c[(i, j)] * (bf.g[j] / bf.g[i]).sqrt());
            full += (&th * th.transpose() - th.transpose() * &th) * 0.5;
        }
        let mut a = Mat::zeros(split.dim_m(), d);
        for i in 0..d {
            for k in 0..d {
                a[(r.start + k, i)] = bf.abar[(k, i)] / bf.g[i].sqrt();
            }
        }
        let gen = a.transpose() * &general * &a;
        let mut dev = max_abs(&(&gen - &full));
        for i in 0..d {
            dev = dev.max((gen[(i, i)] - diag[i]).abs());
        }
        out.push(VBlock { g: bf.g.iter().cloned().collect(), diag, full, general: gen, max_deviation: dev });
    }
    Ok(out)
}

/// Specialized m_u-block evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct UBlock {
    /// ric* on m_u from the general formula.
    #[serde(serialize_with = "ser_mat")]
    pub ric_star: Mat,
    /// Ricci tensor of the sub-datum `(u, h, g|_{m_u})`.
    #[serde(serialize_with = "ser_mat")]
    pub ric_uh: Mat,
    /// `−½(Σ g([Y,A_i],[Y',A_i]) + tr(ad Y ad Y'|_V))`.
    #[serde(serialize_with = "ser_mat")]
    pub correction: Mat,
    pub max_deviation: f64,
    /// l-direction specialization: `(general, specialized)` for each l basis vector.
    pub l_directions: Vec<(f64, f64)>,
    pub l_max_deviation: f64,
    /// Lower bound check at the top eigenvector of g on l: `(ric*(L,L), bound)`.
    pub top_l: Option<(f64, f64)>,
}

/// `Σ_{α,i,j} ⟨[L,Ā_i],Ā_j⟩² (g_i/g_j + g_j/g_i − 2)` for a vector L of m_u.
pub fn l_error_term(split: &ReductiveSplit, g: &InvariantMetric, l: &Vector) -> f64 {
    let mut s = 0.0;
    for r in split.blocks() {
        let bf = block_frame(g, r.clone());
        let c = block_coefficients(split, l, &r, &bf.abar);
        for i in 0..r.len() {
            for j in 0..r.len() {
                s += c[(i, j)].powi(2) * (bf.g[i] / bf.g[j] + bf.g[j] / bf.g[i] - 2.0);
            }
        }
    }
    s
}

/// Killing form of k = h ⊕ l, restricted to l (adapted m coordinates).
pub fn killing_k_on_l(split: &ReductiveSplit) -> Mat {
    let a = split.space().algebra();
    let nh = split.dim_h();
    let nk = nh + split.l().len();
    Mat::from_fn(split.l().len(), split.l().len(), |x, y| {
        let (i, j) = (nh + x, nh + y);
        let mut s = 0.0;
        for p in 0..nk {
            for q in 0..nk {
                s += a.c(i, q, p) * a.c(j, p, q);
            }
        }
        s
    })
}

pub fn ricci_u_block(split: &ReductiveSplit, g: &InvariantMetric) -> Result<UBlock> {
    require_adapted(split, g)?;
    let general = ricci(split.space(), g)?.ric_star;
    let mu = split.mu();
    let v = split.v();
    let nu = mu.len();
    let n = split.dim_m();
    let pmu = g.p().view((0, 0), (nu, nu)).into_owned();
    let ric_uh = ricci(split.u_space(), &InvariantMetric { p: pmu })?.ric;

    let pv = g.p().view((v.start, v.start), (v.len(), v.len())).into_owned();
    let fv = InvariantMetric { p: pv.clone() }.frame();
    let fv_inv = fv.transpose() * &pv;
    let thetas: Vec<Mat> = (0..nu)
        .map(|a| {
            let mut e = Vector::zeros(n);
            e[a] = 1.0;
            split.ad_on_v(&e)
        })
        .collect();
    let thetas_g: Vec<Mat> = thetas.iter().map(|t| &fv_inv * t * &fv).collect();
    let correction = Mat::from_fn(nu, nu, |a, b| {
        -0.5 * ((thetas_g[a].transpose() * &thetas_g[b]).trace() + (&thetas[a] * &thetas[b]).trace())
    });
    let ric_star_mu = general.view((0, 0), (nu, nu)).into_owned();
    let max_deviation = max_abs(&(&ric_star_mu - (&ric_uh + &correction)));

    let mut l_directions = Vec::new();
    let mut l_dev = 0.0_f64;
    for a in split.l() {
        let mut e = Vector::zeros(n);
        e[a] = 1.0;
        let spec = ric_uh[(a, a)] - 0.25 * l_error_term(split, g, &e);
        l_dev = l_dev.max((spec - general[(a, a)]).abs());
        l_directions.push((general[(a, a)], spec));
    }

    let top_l = if split.l().is_empty() {
        None
    } else {
        let nl = split.l().len();
        let pl = g.p().view((0, 0), (nl, nl)).into_owned();
        let (_, vecs) = sym_eigen(&pl);
        let mut lm = Vector::zeros(n);
        lm.rows_mut(0, nl).copy_from(&vecs.column(nl - 1));
        let bk = killing_k_on_l(split);
        let lv = lm.rows(0, nl).into_owned();
        let bound = -0.25 * lv.dot(&(&bk * &lv)) - 0.25 * l_error_term(split, g, &lm);
        Some((lm.dot(&(&general * &lm)), bound))
    };
    Ok(UBlock { ric_star: ric_star_mu, ric_uh, correction, max_deviation, l_directions, l_max_deviation: l_dev, top_l })
}

/// Scalar curvature and its unimodular part.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalarCurvatures {
    pub scal: f64,
    pub scal_star: f64,
    /// Unimodular scalar curvature from the submersion decomposition.
    pub scal_star_submersion: f64,
    pub mean_curvature_norm_sq: f64,
    /// Largest disagreement among the independent evaluations.
    pub consistency: f64,
}

pub fn scalar_curvatures(split: &ReductiveSplit, g: &InvariantMetric) -> Result<ScalarCurvatures> {
    let rep = ricci(split.space(), g)?;
    let sub = crate::deform::scal_star_terms(split, &crate::deform::submersion_split(split, g)?)?;
    let consistency = (rep.scal - rep.scal_formula)
        .abs()
        .max((rep.scal_star - rep.scal - rep.mean_curvature_norm_sq).abs())
        .max((sub.total() - rep.scal_star).abs());
    Ok(ScalarCurvatures {
        scal: rep.scal,
        scal_star: rep.scal_star,
        scal_star_submersion: sub.total(),
        mean_curvature_norm_sq: rep.mean_curvature_norm_sq,
        consistency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liealg::LieAlgebra;

    #[test]
    fn su2_biinvariant() {
        let s = HomogeneousSpace::lie_group(LieAlgebra::su2());
        let r = ricci(&s, &InvariantMetric::background(3)).unwrap();
        assert!((&r.ric - Mat::identity(3, 3) * 0.5).amax() < 1e-14);
        assert!((r.scal - 1.5).abs() < 1e-14);
        assert!((r.scal - r.scal_formula).abs() < 1e-14);
    }

    #[test]
    fn heisenberg_standard() {
        let s = HomogeneousSpace::lie_group(LieAlgebra::heisenberg());
        let r = ricci(&s, &InvariantMetric::background(3)).unwrap();
        let want = Mat::from_diagonal(&Vector::from_vec(vec![-0.5, -0.5, 0.5]));
        assert!((&r.ric - want).amax() < 1e-14);
        assert!((r.scal + 0.5).abs() < 1e-14);
    }

    #[test]
    fn abelian_is_flat() {
        let s = HomogeneousSpace::lie_group(LieAlgebra::abelian(3));
        let p = Mat::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 3.0]);
        let r = ricci(&s, &InvariantMetric::new(p).unwrap()).unwrap();
        assert_eq!(r.ric.amax(), 0.0);
        assert_eq!(r.scal, 0.0);
    }

    #[test]
    fn round_two_sphere_as_su2_mod_circle() {
        // symmetric space: ric = −½B|_m = identity for g = −B/2
        let su2 = LieAlgebra::su2();
        let t = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let s = HomogeneousSpace::new(su2.change_basis(&t).unwrap(), 1).unwrap();
        let r = ricci(&s, &InvariantMetric::background(2)).unwrap();
        assert!((&r.ric - Mat::identity(2, 2)).amax() < 1e-14);
        assert!((r.scal - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mean_curvature_of_lambda_example() {
        let d = crate::catalog::e1(0.7);
        let split = crate::homspace::split_u(&d, &[], &Default::default()).unwrap();
        let h = mean_curvature(split.space(), &InvariantMetric::background(7)).unwrap();
        assert!((h[3] - 2.1).abs() < 1e-14);
        assert!(h.iter().enumerate().all(|(i, &x)| i == 3 || x.abs() < 1e-14));
    }

    #[test]
    fn preflat_corrections_cancel() {
        let split = crate::homspace::split_u(&crate::catalog::e4(), &[], &Default::default()).unwrap();
        let g = InvariantMetric::new(Mat::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 1.0]))).unwrap();
        let u = ricci_u_block(&split, &g).unwrap();
        assert!(u.ric_star[(0, 0)].abs() < 1e-14);
        // Σ‖[Y,A_i]‖² = 2/a and tr(ad²Y|_V) = −2/a for Y = Z/√a
        assert!((u.correction[(0, 0)]).abs() < 1e-14);
    }
}
