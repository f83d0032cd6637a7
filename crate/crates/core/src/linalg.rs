//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Symmetric part (M + Mᵀ)/2.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn skew(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |a, &x| a.max(x.abs()))
}

pub fn frob(m: &Mat) -> f64 {
    m.norm()
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
///
/// Cyclic Jacobi rotations; nalgebra's `SymmetricEigen` was observed to return
/// mismatched eigenpairs on nearly diagonal input with off-diagonal entries
/// around 1e-31.
pub fn sym_eigen(m: &Mat) -> (Vector, Mat) {
    let n = m.nrows();
    if n == 0 {
        return (Vector::zeros(0), Mat::zeros(0, 0));
    }
    let mut a = sym(m);
    let mut v = Mat::identity(n, n);
    let scale = a.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)] * a[(i, j)]).sum();
        if off.sqrt() <= f64::EPSILON * 1e-3 * scale || off == 0.0 {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let vals = Vector::from_iterator(n, idx.iter().map(|&i| a[(i, i)]));
    let mut vecs = Mat::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &v.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

/// Checks symmetry and positive definiteness.
pub fn check_spd(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    let scale = max_abs(m).max(1.0);
    let asym = max_abs(&skew(m));
    if asym > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!("matrix is not symmetric (residual {asym:.3e})")));
    }
    let lmin = min_eigenvalue(m);
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    Ok(())
}

/// Condition number of an SPD matrix.
pub fn spd_condition(m: &Mat) -> f64 {
    let (v, _) = sym_eigen(m);
    if v.is_empty() {
        return 1.0;
    }
    v[v.len() - 1] / v[0]
}

/// Orthonormal basis (columns) of the null space of `a`, using a QR
/// reduction followed by an SVD of the triangular factor. Singular values at
/// or below `rel_cutoff` times the largest one are treated as zero.
pub fn null_space(a: &Mat, rel_cutoff: f64) -> Mat {
    null_space_with(a, |smax| rel_cutoff * smax)
}

/// Null space with an absolute singular-value cutoff, for matrices whose
/// scale is known in advance (it may consist of roundoff only).
pub fn null_space_abs(a: &Mat, cutoff: f64) -> Mat {
    null_space_with(a, |_| cutoff)
}

fn null_space_with(a: &Mat, cutoff: impl Fn(f64) -> f64) -> Mat {
    let n = a.ncols();
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let r = if a.nrows() >= n {
        a.clone().qr().r()
    } else {
        let mut padded = Mat::zeros(n, n);
        padded.rows_mut(0, a.nrows()).copy_from(a);
        padded
    };
    let svd = r.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let cut = cutoff(smax);
    let cols: Vec<Vector> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] <= cut)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        Mat::zeros(n, 0)
    } else {
        Mat::from_columns(&cols)
    }
}

/// Gram–Schmidt (twice, for stability) of the columns of `cols` with respect
/// to the inner product `gram`; columns whose residual norm falls below `tol`
/// are dropped.
pub fn gram_schmidt(cols: &Mat, gram: &Mat, tol: f64) -> Mat {
    let mut out: Vec<Vector> = Vec::new();
    for c in 0..cols.ncols() {
        let mut v = cols.column(c).into_owned();
        let scale = (v.dot(&(gram * &v))).sqrt();
        if scale == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in &out {
                let coef = q.dot(&(gram * &v));
                v -= q * coef;
            }
        }
        let nrm = v.dot(&(gram * &v)).sqrt();
        if nrm > tol * scale.max(1.0) {
            out.push(v / nrm);
        }
    }
    if out.is_empty() {
        Mat::zeros(cols.nrows(), 0)
    } else {
        Mat::from_columns(&out)
    }
}

/// `gram`-orthogonal projector onto the column span of `basis`, where the
/// columns are assumed `gram`-orthonormal.
pub fn projector(basis: &Mat, gram: &Mat) -> Mat {
    basis * basis.transpose() * gram
}

/// A `gram`-orthonormal basis of span(`basis`) built by projecting the
/// standard basis vectors in index order. Coordinate-aligned subspaces come
/// back with their natural basis.
pub fn canonical_basis(basis: &Mat, gram: &Mat) -> Mat {
    let n = basis.nrows();
    let on = gram_schmidt(basis, gram, 1e-10);
    let k = on.ncols();
    if k == 0 {
        return Mat::zeros(n, 0);
    }
    let proj = projector(&on, gram);
    let mut picked: Vec<Vector> = Vec::new();
    for i in 0..n {
        let v = proj.column(i).into_owned();
        let mut w = v.clone();
        for q in &picked {
            let coef = q.dot(&(gram * &w));
            w -= q * coef;
        }
        let nrm = w.dot(&(gram * &w)).sqrt();
        if nrm > 1e-6 {
            let mut w = w / nrm;
            for q in &picked {
                let coef = q.dot(&(gram * &w));
                w -= q * coef;
            }
            let nrm = w.dot(&(gram * &w)).sqrt();
            picked.push(w / nrm);
        }
        if picked.len() == k {
            break;
        }
    }
    Mat::from_columns(&picked)
}

/// `gram`-orthogonal complement of span(`sub`) inside span(`ambient`).
/// Both arguments are spanning sets (columns); the result is canonical.
pub fn complement_in(ambient: &Mat, sub: &Mat, gram: &Mat) -> Mat {
    let a = gram_schmidt(ambient, gram, 1e-10);
    let s = gram_schmidt(sub, gram, 1e-10);
    if s.ncols() == 0 {
        return canonical_basis(&a, gram);
    }
    let ps = projector(&s, gram);
    let n = a.nrows();
    let resid = (Mat::identity(n, n) - ps) * &a;
    canonical_basis(&resid, gram)
}

/// Intersection of two subspaces given by spanning columns.
pub fn intersect(a: &Mat, b: &Mat) -> Mat {
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let qa = gram_schmidt(a, &id, 1e-10);
    let qb = gram_schmidt(b, &id, 1e-10);
    if qa.ncols() == 0 || qb.ncols() == 0 {
        return Mat::zeros(n, 0);
    }
    // x = qa y lies in span(b) iff (I - Pb) qa y = 0
    let pb = &qb * qb.transpose();
    let m = (&id - pb) * &qa;
    // qa is orthonormal, so the singular values of m lie in [0, 1]
    let ns = null_space_abs(&m, 1e-8);
    if ns.ncols() == 0 {
        return Mat::zeros(n, 0);
    }
    canonical_basis(&(qa * ns), &id)
}

/// Cholesky-type factor R with M = Rᵀ R (R upper triangular).
pub fn chol_upper(m: &Mat) -> Result<Mat> {
    let c = nalgebra::Cholesky::new(sym(m)).ok_or_else(|| Error::NotPositiveDefinite(min_eigenvalue(m)))?;
    Ok(c.l().transpose())
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular matrix".into()))
}

/// Inverse of an SPD matrix through its eigen-decomposition (symmetric output).
pub fn spd_inverse(m: &Mat) -> Result<Mat> {
    let (v, q) = sym_eigen(m);
    if v.len() > 0 && !(v[0] > 0.0) {
        return Err(Error::NotPositiveDefinite(v[0]));
    }
    let d = Mat::from_diagonal(&v.map(|x| 1.0 / x));
    Ok(sym(&(&q * d * q.transpose())))
}

/// Applies f to the spectrum of a symmetric matrix.
pub fn sym_fn(m: &Mat, f: impl Fn(f64) -> f64) -> Mat {
    let (v, q) = sym_eigen(m);
    let d = Mat::from_diagonal(&v.map(f));
    sym(&(&q * d * q.transpose()))
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[Mat]) -> Mat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        out.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(b);
        o += b.nrows();
    }
    out
}

/// Row-major nested vectors to a matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(nr, nc, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

/// Finite-difference weights for the first derivative at `x0` from nodes
/// `xs` (Fornberg's recursion).
pub fn fd_weights(x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let m = 1;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|r| r[1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenpairs_of_nearly_diagonal_matrix() {
        let mut m = Mat::from_diagonal(&Vector::from_vec(vec![1.01401007, 1.01400770, 0.92524842, 1.50264802, 1.22879446, 1.22879160, 2.64912537]));
        m[(0, 1)] = -1.58e-31;
        m[(1, 0)] = -1.58e-31;
        m[(0, 3)] = -5.6e-16;
        m[(3, 0)] = -5.6e-16;
        m[(5, 6)] = 8.6e-16;
        m[(6, 5)] = 8.6e-16;
        let (v, q) = sym_eigen(&m);
        let r = &m * &q - &q * Mat::from_diagonal(&v);
        assert!(r.amax() < 1e-14);
        assert!((q.transpose() * &q - Mat::identity(7, 7)).amax() < 1e-14);
        assert!(v.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = Mat::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-8);
        assert_eq!(ns.ncols(), 2);
        assert!((a * ns).norm() < 1e-12);
    }

    #[test]
    fn canonical_basis_keeps_coordinate_axes() {
        let id = Mat::identity(4, 4);
        let b = Mat::from_columns(&[
            Vector::from_vec(vec![0.6, 0.8, 0.0, 0.0]),
            Vector::from_vec(vec![-0.8, 0.6, 0.0, 0.0]),
        ]);
        let c = canonical_basis(&b, &id);
        assert!((c - id.columns(0, 2)).norm() < 1e-12);
    }

    #[test]
    fn fd_weights_exact_on_quartic() {
        let xs = [0.0, 0.1, 0.25, 0.3, 0.5];
        let w = fd_weights(0.25, &xs);
        let d: f64 = xs.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((d - 4.0 * 0.25f64.powi(3)).abs() < 1e-10);
    }
}
