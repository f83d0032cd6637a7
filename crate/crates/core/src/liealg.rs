//! Real Lie algebras given by structure constants, and semidirect products
//! `u ⋉_θ V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, null_space, Mat, Vector};

/// Default tolerance for the Jacobi and homomorphism checks, relative to the
/// scale of the input constants.
pub const TOL_JACOBI: f64 = 1e-10;

/// A finite-dimensional real Lie algebra, `[e_i, e_j] = Σ_k c[i][j][k] e_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LieAlgebraText", into = "LieAlgebraText")]
pub struct LieAlgebra {
    dim: usize,
    c: Vec<f64>,
    labels: Vec<String>,
}

/// Sparse text form: only nonzero brackets `[e_i, e_j]` with `i < j` are listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LieAlgebraText {
    pub dim: usize,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    /// Coordinates of `[e_i, e_j]`; length `dim`.
    pub coeffs: Vec<f64>,
}

impl TryFrom<LieAlgebraText> for LieAlgebra {
    type Error = Error;
    fn try_from(t: LieAlgebraText) -> Result<Self> {
        let labels = if t.labels.is_empty() { None } else { Some(t.labels) };
        let mut entries = Vec::with_capacity(t.brackets.len());
        for b in t.brackets {
            if b.coeffs.len() != t.dim {
                return Err(Error::Dimension(format!(
                    "bracket ({},{}) has {} coefficients, expected {}",
                    b.i,
                    b.j,
                    b.coeffs.len(),
                    t.dim
                )));
            }
            entries.push((b.i, b.j, b.coeffs));
        }
        LieAlgebra::from_brackets(t.dim, labels, &entries)
    }
}

impl From<LieAlgebra> for LieAlgebraText {
    fn from(a: LieAlgebra) -> Self {
        let mut brackets = Vec::new();
        for i in 0..a.dim {
            for j in i + 1..a.dim {
                let coeffs: Vec<f64> = (0..a.dim).map(|k| a.c(i, j, k)).collect();
                if coeffs.iter().any(|&x| x != 0.0) {
                    brackets.push(BracketEntry { i, j, coeffs });
                }
            }
        }
        LieAlgebraText { dim: a.dim, labels: a.labels, brackets }
    }
}

fn default_labels(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("e{i}")).collect()
}

impl LieAlgebra {
    /// Builds an algebra from a dense tensor (index `(i*dim + j)*dim + k`),
    /// rejecting non-antisymmetric constants and Jacobi violations.
    pub fn new(dim: usize, c: Vec<f64>, labels: Option<Vec<String>>) -> Result<Self> {
        if c.len() != dim * dim * dim {
            return Err(Error::Dimension(format!("expected {} constants, got {}", dim * dim * dim, c.len())));
        }
        let labels = labels.unwrap_or_else(|| default_labels(dim));
        if labels.len() != dim {
            return Err(Error::Dimension(format!("{} labels for dimension {dim}", labels.len())));
        }
        let a = LieAlgebra { dim, c, labels };
        let scale = a.scale();
        let mut asym = 0.0_f64;
        for i in 0..dim {
            for j in 0..dim {
                for k in 0..dim {
                    asym = asym.max((a.c(i, j, k) + a.c(j, i, k)).abs());
                }
            }
        }
        if asym > TOL_JACOBI * scale {
            return Err(Error::Antisymmetry(asym));
        }
        let jac = a.jacobi_residual();
        if jac > TOL_JACOBI * scale * scale {
            return Err(Error::Jacobi(jac));
        }
        Ok(a)
    }

    /// Builds an algebra from the brackets `[e_i, e_j]` listed for some pairs;
    /// the antisymmetric partner is filled in.
    pub fn from_brackets(dim: usize, labels: Option<Vec<String>>, entries: &[(usize, usize, Vec<f64>)]) -> Result<Self> {
        let mut c = vec![0.0; dim * dim * dim];
        for (i, j, v) in entries {
            let (i, j) = (*i, *j);
            if i >= dim || j >= dim || v.len() != dim {
                return Err(Error::Dimension(format!("bracket entry ({i},{j}) out of range")));
            }
            if i == j {
                if v.iter().any(|&x| x != 0.0) {
                    return Err(Error::Antisymmetry(max_abs(&Mat::from_row_slice(1, dim, v))));
                }
                continue;
            }
            for k in 0..dim {
                c[(i * dim + j) * dim + k] = v[k];
                c[(j * dim + i) * dim + k] = -v[k];
            }
        }
        Self::new(dim, c, labels)
    }

    pub fn abelian(dim: usize) -> Self {
        LieAlgebra { dim, c: vec![0.0; dim * dim * dim], labels: default_labels(dim) }
    }

    /// su(2) in the basis with `[e1,e2]=e3`, `[e2,e3]=e1`, `[e3,e1]=e2`.
    pub fn su2() -> Self {
        Self::from_brackets(
            3,
            Some(vec!["e1".into(), "e2".into(), "e3".into()]),
            &[(0, 1, vec![0.0, 0.0, 1.0]), (1, 2, vec![1.0, 0.0, 0.0]), (2, 0, vec![0.0, 1.0, 0.0])],
        )
        .expect("su(2) constants are valid")
    }

    /// Heisenberg algebra with `[X,Y]=Z`.
    pub fn heisenberg() -> Self {
        Self::from_brackets(3, Some(vec!["X".into(), "Y".into(), "Z".into()]), &[(0, 1, vec![0.0, 0.0, 1.0])])
            .expect("h3 constants are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::Dimension("label count".into()));
        }
        self.labels = labels;
        Ok(self)
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.dim + j) * self.dim + k]
    }

    /// Raw dense tensor.
    pub fn constants(&self) -> &[f64] {
        &self.c
    }

    /// Largest absolute structure constant, floored at 1.
    pub fn scale(&self) -> f64 {
        self.c.iter().fold(1.0_f64, |a, &x| a.max(x.abs()))
    }

    pub fn bracket(&self, x: &Vector, y: &Vector) -> Result<Vector> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::Dimension(format!(
                "bracket arguments of length {} and {} in dimension {}",
                x.len(),
                y.len(),
                self.dim
            )));
        }
        Ok(self.bracket_unchecked(x, y))
    }

    pub(crate) fn bracket_unchecked(&self, x: &Vector, y: &Vector) -> Vector {
        let n = self.dim;
        let mut out = Vector::zeros(n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = x[i] * y[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.c[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `ad x`; column j holds `[x, e_j]`.
    pub fn ad(&self, x: &Vector) -> Mat {
        let n = self.dim;
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                for k in 0..n {
                    m[(k, j)] += x[i] * self.c(i, j, k);
                }
            }
        }
        m
    }

    pub fn ad_basis(&self, i: usize) -> Mat {
        let n = self.dim;
        Mat::from_fn(n, n, |k, j| self.c(i, j, k))
    }

    pub fn killing_form(&self) -> Mat {
        let n = self.dim;
        let ads: Vec<Mat> = (0..n).map(|i| self.ad_basis(i)).collect();
        let mut b = Mat::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = (&ads[i] * &ads[j]).trace();
                b[(i, j)] = v;
                b[(j, i)] = v;
            }
        }
        b
    }

    /// Max norm over basis triples of the Jacobiator.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.dim;
        let e = |i: usize| {
            let mut v = Vector::zeros(n);
            v[i] = 1.0;
            v
        };
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                let bij = self.bracket_unchecked(&e(i), &e(j));
                for k in j + 1..n {
                    let bjk = self.bracket_unchecked(&e(j), &e(k));
                    let bki = self.bracket_unchecked(&e(k), &e(i));
                    let s = self.bracket_unchecked(&bij, &e(k))
                        + self.bracket_unchecked(&bjk, &e(i))
                        + self.bracket_unchecked(&bki, &e(j));
                    worst = worst.max(s.amax());
                }
            }
        }
        worst
    }

    /// `tr(ad e_i)` for each basis element.
    pub fn unimodularity_defect(&self) -> Vector {
        let n = self.dim;
        Vector::from_fn(n, |i, _| (0..n).map(|j| self.c(i, j, j)).sum())
    }

    /// Max over basis pairs of `‖D[x,y] − [Dx,y] − [x,Dy]‖`.
    pub fn derivation_residual(&self, d: &Mat) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i + 1..n {
                for m in 0..n {
                    let mut r = 0.0;
                    for k in 0..n {
                        r += self.c(i, j, k) * d[(m, k)];
                    }
                    for l in 0..n {
                        r -= d[(l, i)] * self.c(l, j, m) + d[(l, j)] * self.c(i, l, m);
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }

    /// Matrix of the linear map D ↦ (D[e_i,e_j] − [De_i,e_j] − [e_i,De_j])_{i<j},
    /// acting on the column-major vectorization of D.
    fn derivation_system(&self) -> Mat {
        let n = self.dim;
        let pairs = n * n.saturating_sub(1) / 2;
        let mut a = Mat::zeros(pairs * n, n * n);
        let var = |row: usize, col: usize| col * n + row;
        let mut r = 0;
        for i in 0..n {
            for j in i + 1..n {
                for m in 0..n {
                    for k in 0..n {
                        a[(r, var(m, k))] += self.c(i, j, k);
                    }
                    for l in 0..n {
                        a[(r, var(l, i))] -= self.c(l, j, m);
                        a[(r, var(l, j))] -= self.c(i, l, m);
                    }
                    r += 1;
                }
            }
        }
        a
    }

    /// A basis of Der(a) as matrices acting on coordinate vectors.
    pub fn derivations(&self) -> Vec<Mat> {
        let n = self.dim;
        let ns = null_space(&self.derivation_system(), 1e-8);
        (0..ns.ncols())
            .map(|c| Mat::from_column_slice(n, n, ns.column(c).as_slice()))
            .collect()
    }

    /// Structure constants in the new basis `f_a = Σ_i t[i][a] e_i`.
    pub fn change_basis(&self, t: &Mat) -> Result<LieAlgebra> {
        let n = self.dim;
        if t.nrows() != n || t.ncols() != n {
            return Err(Error::Dimension("basis change must be square".into()));
        }
        let tinv = t.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("singular basis change".into()))?;
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            let fa = t.column(a).into_owned();
            for b in 0..n {
                let fb = t.column(b).into_owned();
                let br = &tinv * self.bracket_unchecked(&fa, &fb);
                for k in 0..n {
                    c[(a * n + b) * n + k] = br[k];
                }
            }
        }
        // enforce exact antisymmetry against rounding
        for a in 0..n {
            for b in a..n {
                for k in 0..n {
                    let v = 0.5 * (c[(a * n + b) * n + k] - c[(b * n + a) * n + k]);
                    c[(a * n + b) * n + k] = v;
                    c[(b * n + a) * n + k] = -v;
                }
            }
        }
        Ok(LieAlgebra { dim: n, c, labels: default_labels(n) })
    }

    /// Span of all brackets of the columns of `basis` (a spanning set).
    pub fn derived_span(&self, basis: &Mat) -> Mat {
        let mut cols = Vec::new();
        for a in 0..basis.ncols() {
            for b in a + 1..basis.ncols() {
                cols.push(self.bracket_unchecked(&basis.column(a).into_owned(), &basis.column(b).into_owned()));
            }
        }
        if cols.is_empty() {
            Mat::zeros(self.dim, 0)
        } else {
            Mat::from_columns(&cols)
        }
    }

    /// True when the lower central series reaches zero.
    pub fn is_nilpotent(&self) -> bool {
        let n = self.dim;
        let id = Mat::identity(n, n);
        let full = id.clone();
        let mut cur = crate::linalg::gram_schmidt(&full, &id, 1e-10);
        for _ in 0..=n {
            if cur.ncols() == 0 {
                return true;
            }
            let mut cols = Vec::new();
            for a in 0..n {
                for b in 0..cur.ncols() {
                    cols.push(self.bracket_unchecked(&full.column(a).into_owned(), &cur.column(b).into_owned()));
                }
            }
            let next = crate::linalg::gram_schmidt(&Mat::from_columns(&cols), &id, 1e-9);
            if next.ncols() == cur.ncols() {
                return false;
            }
            cur = next;
        }
        cur.ncols() == 0
    }
}

/// Data of a semidirect product `u ⋉_θ V` with `V` abelian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SemidirectText", into = "SemidirectText")]
pub struct SemidirectData {
    u: LieAlgebra,
    dim_v: usize,
    theta: Vec<Mat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemidirectText {
    pub u: LieAlgebra,
    pub dim_v: usize,
    /// One row-major `dim_v × dim_v` matrix per basis element of u.
    pub theta: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<SemidirectText> for SemidirectData {
    type Error = Error;
    fn try_from(t: SemidirectText) -> Result<Self> {
        let theta = t.theta.iter().map(|m| crate::linalg::from_rows(m)).collect::<Result<Vec<_>>>()?;
        SemidirectData::new(t.u, t.dim_v, theta)
    }
}

impl From<SemidirectData> for SemidirectText {
    fn from(d: SemidirectData) -> Self {
        SemidirectText {
            theta: d.theta.iter().map(crate::linalg::to_rows).collect(),
            u: d.u,
            dim_v: d.dim_v,
        }
    }
}

impl SemidirectData {
    pub fn new(u: LieAlgebra, dim_v: usize, theta: Vec<Mat>) -> Result<Self> {
        if theta.len() != u.dim() {
            return Err(Error::Dimension(format!("{} theta matrices for dim u = {}", theta.len(), u.dim())));
        }
        if theta.iter().any(|m| m.nrows() != dim_v || m.ncols() != dim_v) {
            return Err(Error::Dimension(format!("theta matrices must be {dim_v}x{dim_v}")));
        }
        let d = SemidirectData { u, dim_v, theta };
        let res = d.homomorphism_residual();
        let scale = d.u.scale().max(d.theta.iter().map(max_abs).fold(1.0, f64::max));
        if res > TOL_JACOBI * scale * scale {
            return Err(Error::Homomorphism(res));
        }
        Ok(d)
    }

    pub fn u(&self) -> &LieAlgebra {
        &self.u
    }

    pub fn dim_u(&self) -> usize {
        self.u.dim()
    }

    pub fn dim_v(&self) -> usize {
        self.dim_v
    }

    pub fn theta(&self) -> &[Mat] {
        &self.theta
    }

    /// θ applied to a coordinate vector of u.
    pub fn theta_of(&self, x: &Vector) -> Mat {
        let mut m = Mat::zeros(self.dim_v, self.dim_v);
        for (k, t) in self.theta.iter().enumerate() {
            if x[k] != 0.0 {
                m += t * x[k];
            }
        }
        m
    }

    /// Max entry of θ([e_i,e_j]) − [θ_i, θ_j] over pairs.
    pub fn homomorphism_residual(&self) -> f64 {
        let p = self.u.dim();
        let mut worst = 0.0_f64;
        for i in 0..p {
            for j in i + 1..p {
                let mut lhs = Mat::zeros(self.dim_v, self.dim_v);
                for k in 0..p {
                    let c = self.u.c(i, j, k);
                    if c != 0.0 {
                        lhs += &self.theta[k] * c;
                    }
                }
                let rhs = &self.theta[i] * &self.theta[j] - &self.theta[j] * &self.theta[i];
                worst = worst.max(max_abs(&(lhs - rhs)));
            }
        }
        worst
    }

    /// The algebra `u ⋉_θ V`: basis of u first, then V.
    pub fn semidirect(&self) -> Result<LieAlgebra> {
        let v = LieAlgebra::abelian(self.dim_v).with_labels((1..=self.dim_v).map(|i| format!("v{i}")).collect())?;
        semidirect_with(&self.u, &v, &self.theta)
    }
}

/// `u ⋉_θ n` for a (possibly nonabelian) ideal `n`; θ must act by derivations,
/// which the Jacobi check of the result enforces.
pub fn semidirect_with(u: &LieAlgebra, n: &LieAlgebra, theta: &[Mat]) -> Result<LieAlgebra> {
    let p = u.dim();
    let q = n.dim();
    if theta.len() != p || theta.iter().any(|m| m.nrows() != q || m.ncols() != q) {
        return Err(Error::Dimension("theta shape does not match u and n".into()));
    }
    let dim = p + q;
    let mut c = vec![0.0; dim * dim * dim];
    let idx = |i: usize, j: usize, k: usize| (i * dim + j) * dim + k;
    for i in 0..p {
        for j in 0..p {
            for k in 0..p {
                c[idx(i, j, k)] = u.c(i, j, k);
            }
        }
        for a in 0..q {
            for b in 0..q {
                let v = theta[i][(b, a)];
                c[idx(i, p + a, p + b)] = v;
                c[idx(p + a, i, p + b)] = -v;
            }
        }
    }
    for a in 0..q {
        for b in 0..q {
            for k in 0..q {
                c[idx(p + a, p + b, p + k)] = n.c(a, b, k);
            }
        }
    }
    let mut labels: Vec<String> = u.labels().to_vec();
    labels.extend(n.labels().iter().map(|l| if u.labels().contains(l) { format!("{l}'") } else { l.clone() }));
    LieAlgebra::new(dim, c, Some(labels))
}

/// Rotation generators on ℝ³: `(L_i)_{jk} = −ε_{ijk}`; a representation of
/// [`LieAlgebra::su2`].
pub fn rotation_generators() -> Vec<Mat> {
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    (0..3).map(|i| Mat::from_fn(3, 3, |j, k| -eps(i, j, k))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vector {
        let mut v = Vector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn su2_bracket_and_killing() {
        let a = LieAlgebra::su2();
        let b = a.bracket(&e(3, 0), &e(3, 1)).unwrap();
        assert_eq!(b, e(3, 2));
        let k = a.killing_form();
        assert!((k + Mat::identity(3, 3) * 2.0).amax() < 1e-14);
    }

    #[test]
    fn abelian_has_zero_killing_and_full_derivations() {
        let a = LieAlgebra::abelian(3);
        assert_eq!(a.killing_form().amax(), 0.0);
        assert_eq!(a.derivations().len(), 9);
        assert_eq!(a.bracket(&e(3, 0), &e(3, 1)).unwrap().amax(), 0.0);
    }

    #[test]
    fn derivation_dimensions() {
        // oracle: Der(h3) has the 6 free parameters a,b,c,d,e,f of
        // [[a,b,0],[c,d,0],[e,f,a+d]]; su(2) has only inner derivations
        assert_eq!(LieAlgebra::heisenberg().derivations().len(), 6);
        let su2 = LieAlgebra::su2();
        let ders = su2.derivations();
        assert_eq!(ders.len(), 3);
        for d in &ders {
            assert!(su2.derivation_residual(d) < 1e-10);
        }
    }

    #[test]
    fn rejects_non_jacobi() {
        // [e1,e2]=e3, [e1,e3]=e1 violates Jacobi in dimension 3
        let r = LieAlgebra::from_brackets(3, None, &[(0, 1, vec![0.0, 0.0, 1.0]), (0, 2, vec![0.0, 1.0, 0.0]), (1, 2, vec![0.0, 0.0, 1.0])]);
        assert!(matches!(r, Err(Error::Jacobi(_))));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = LieAlgebra::su2();
        assert!(matches!(a.bracket(&e(2, 0), &e(3, 0)), Err(Error::Dimension(_))));
    }

    #[test]
    fn semidirect_lambda_example() {
        let mut u = vec![];
        u.push((0, 1, vec![0.0, 0.0, 1.0, 0.0]));
        u.push((1, 2, vec![1.0, 0.0, 0.0, 0.0]));
        u.push((2, 0, vec![0.0, 1.0, 0.0, 0.0]));
        let u = LieAlgebra::from_brackets(4, None, &u).unwrap();
        let mut th = rotation_generators();
        th.push(Mat::identity(3, 3) * 1.5);
        let d = SemidirectData::new(u.clone(), 3, th).unwrap();
        let g = d.semidirect().unwrap();
        let tr = g.unimodularity_defect();
        assert!((tr[3] - 4.5).abs() < 1e-14);
        assert!(tr.iter().enumerate().all(|(i, &t)| i == 3 || t == 0.0));
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    assert_eq!(g.c(i, j, k), u.c(i, j, k));
                }
            }
        }
    }

    #[test]
    fn rejects_non_homomorphism() {
        let mut th = rotation_generators();
        th[2] = Mat::zeros(3, 3);
        assert!(matches!(SemidirectData::new(LieAlgebra::su2(), 3, th), Err(Error::Homomorphism(_))));
    }

    #[test]
    fn text_round_trip() {
        let h = LieAlgebra::heisenberg();
        let s = serde_json::to_string(&h).unwrap();
        let back: LieAlgebra = serde_json::from_str(&s).unwrap();
        assert_eq!(h, back);
        assert_eq!(LieAlgebraText::from(h).brackets.len(), 1);
    }

    #[test]
    fn nilpotency() {
        assert!(LieAlgebra::heisenberg().is_nilpotent());
        assert!(LieAlgebra::abelian(2).is_nilpotent());
        assert!(!LieAlgebra::su2().is_nilpotent());
    }
}
