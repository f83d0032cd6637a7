//! Reductive decompositions `g = h ⊕ l ⊕ ẑ ⊕ V`, weight spaces of the
//! representation θ, and θ-adaptedness of metrics.
//!
//! A [`ReductiveSplit`] rewrites the algebra in an adapted basis that is
//! orthonormal for the background inner product, ordered as
//! `h | l_ss | l ⊖ l_ss | ẑ | V^α₁ | V^α₂ | …`. Metrics on `m` are then
//! stored relative to the identity.

use std::fmt;
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::liealg::{LieAlgebra, SemidirectData};
use crate::linalg::{
    canonical_basis, chol_upper, complement_in, gram_schmidt, intersect, max_abs, null_space, skew, sym, sym_eigen,
    Mat, Vector,
};

/// Grouping tolerance for joint eigenvalues (after normalising to unit
/// spectral radius).
pub const TOL_WEIGHT: f64 = 1e-8;
/// Skewness tolerance for the residual operators `J^α_X`.
pub const TOL_SKEW: f64 = 1e-10;
/// Threshold below which a metric counts as θ-adapted.
pub const TOL_BLOCK: f64 = 1e-10;

/// A reductive homogeneous datum in adapted coordinates: the first `dim_h`
/// basis vectors span `h`, the rest span `m`, and the background inner product
/// is the identity on `m`.
#[derive(Debug, Clone)]
pub struct HomogeneousSpace {
    algebra: LieAlgebra,
    dim_h: usize,
    /// `[f_a, f_b]_m` for a, b in m, flattened `(a*nm + b)*nm + c`.
    cm: Vec<f64>,
    killing_m: Mat,
    trace_m: Vector,
    ad_h: Vec<Mat>,
}

impl HomogeneousSpace {
    pub fn new(algebra: LieAlgebra, dim_h: usize) -> Result<Self> {
        let n = algebra.dim();
        if dim_h > n {
            return Err(Error::Dimension("dim h exceeds dim g".into()));
        }
        let nm = n - dim_h;
        let scale = algebra.scale();
        let mut sub = 0.0_f64;
        let mut red = 0.0_f64;
        for i in 0..dim_h {
            for j in 0..dim_h {
                for k in dim_h..n {
                    sub = sub.max(algebra.c(i, j, k).abs());
                }
            }
            for j in dim_h..n {
                for k in 0..dim_h {
                    red = red.max(algebra.c(i, j, k).abs());
                }
            }
        }
        if sub > TOL_SKEW * scale {
            return Err(Error::NotSubalgebra(sub));
        }
        if red > TOL_SKEW * scale {
            return Err(Error::NonReductive(format!("[h, m] leaves m (residual {red:.3e})")));
        }
        let mut cm = vec![0.0; nm * nm * nm];
        for a in 0..nm {
            for b in 0..nm {
                for c in 0..nm {
                    cm[(a * nm + b) * nm + c] = algebra.c(dim_h + a, dim_h + b, dim_h + c);
                }
            }
        }
        let kill = algebra.killing_form();
        let killing_m = kill.view((dim_h, dim_h), (nm, nm)).into_owned();
        let tr = algebra.unimodularity_defect();
        let trace_m = tr.rows(dim_h, nm).into_owned();
        let ad_h: Vec<Mat> = (0..dim_h)
            .map(|i| algebra.ad_basis(i).view((dim_h, dim_h), (nm, nm)).into_owned())
            .collect();
        let inv = ad_h.iter().map(|a| max_abs(&sym(a))).fold(0.0, f64::max);
        if inv > TOL_SKEW * scale {
            return Err(Error::BackgroundNotInvariant(inv));
        }
        Ok(HomogeneousSpace { algebra, dim_h, cm, killing_m, trace_m, ad_h })
    }

    /// A Lie group viewed as `G/{e}`; the given basis is background-orthonormal.
    pub fn lie_group(algebra: LieAlgebra) -> Self {
        Self::new(algebra, 0).expect("trivial isotropy is always reductive")
    }

    pub fn algebra(&self) -> &LieAlgebra {
        &self.algebra
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn dim_m(&self) -> usize {
        self.algebra.dim() - self.dim_h
    }

    /// `m`-component of `[f_a, f_b]`, indices relative to m.
    #[inline]
    pub fn cm(&self, a: usize, b: usize, c: usize) -> f64 {
        let nm = self.dim_m();
        self.cm[(a * nm + b) * nm + c]
    }

    pub(crate) fn cm_slice(&self) -> &[f64] {
        &self.cm
    }

    /// Killing form of g restricted to m.
    pub fn killing_m(&self) -> &Mat {
        &self.killing_m
    }

    /// `tr(ad X)` for the basis of m.
    pub fn trace_m(&self) -> &Vector {
        &self.trace_m
    }

    /// `ad X|_m` for the basis of h.
    pub fn ad_h(&self) -> &[Mat] {
        &self.ad_h
    }

    /// `m`-projected bracket of two vectors of m.
    pub fn bracket_m(&self, x: &Vector, y: &Vector) -> Vector {
        let nm = self.dim_m();
        let mut out = Vector::zeros(nm);
        for a in 0..nm {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..nm {
                let w = x[a] * y[b];
                if w == 0.0 {
                    continue;
                }
                let base = (a * nm + b) * nm;
                for c in 0..nm {
                    out[c] += w * self.cm[base + c];
                }
            }
        }
        out
    }

    /// `ad x|_m` projected to m, for x in m.
    pub fn ad_m(&self, x: &Vector) -> Mat {
        let nm = self.dim_m();
        let mut out = Mat::zeros(nm, nm);
        for a in 0..nm {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..nm {
                for c in 0..nm {
                    out[(c, b)] += x[a] * self.cm(a, b, c);
                }
            }
        }
        out
    }

    /// Max over the h-basis of `‖[ad X|_m, P]‖`.
    pub fn equivariance_residual(&self, p: &Mat) -> f64 {
        self.ad_h.iter().map(|a| max_abs(&(a * p - p * a))).fold(0.0, f64::max)
    }

    /// The sub-datum spanned by the first `dim_h + k` basis vectors, which
    /// must form a subalgebra.
    pub fn truncate(&self, k: usize) -> Result<HomogeneousSpace> {
        let n = self.dim_h + k;
        let a = &self.algebra;
        let full = a.dim();
        let mut leak = 0.0_f64;
        let mut c = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for l in 0..full {
                    let v = a.c(i, j, l);
                    if l < n {
                        c[(i * n + j) * n + l] = v;
                    } else {
                        leak = leak.max(v.abs());
                    }
                }
            }
        }
        if leak > TOL_SKEW * a.scale() {
            return Err(Error::NotSubalgebra(leak));
        }
        let labels = a.labels()[..n].to_vec();
        HomogeneousSpace::new(LieAlgebra::new(n, c, Some(labels))?, self.dim_h)
    }
}

/// One weight α with its subspace `V^α`.
#[derive(Debug, Clone, Serialize)]
pub struct Weight {
    /// `α(e_k)` for the basis of u.
    pub alpha: Vec<f64>,
    /// metricV-orthonormal basis of `V^α` (columns, original V coordinates).
    #[serde(serialize_with = "ser_mat")]
    pub basis: Mat,
    /// `J^α_{e_k} = θ(e_k)|_{V^α} − α(e_k)·Id` in the block basis.
    #[serde(serialize_with = "ser_mats")]
    pub j: Vec<Mat>,
}

impl Weight {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct WeightDecomposition {
    pub weights: Vec<Weight>,
}

impl WeightDecomposition {
    pub fn block_dims(&self) -> Vec<usize> {
        self.weights.iter().map(Weight::dim).collect()
    }
}

/// Why θ admits no weight decomposition for the given metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityFailure {
    /// Index of the offending basis element of u.
    pub operator: usize,
    pub residual: f64,
    pub reason: String,
}

impl fmt::Display for StabilityFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "theta(e{}): {} (residual {:.3e})", self.operator + 1, self.reason, self.residual)
    }
}

#[derive(Debug, Clone)]
pub enum WeightOutcome {
    Split(WeightDecomposition),
    Failure(StabilityFailure),
}

impl WeightOutcome {
    pub fn ok(self) -> Option<WeightDecomposition> {
        match self {
            WeightOutcome::Split(w) => Some(w),
            WeightOutcome::Failure(_) => None,
        }
    }
}

/// Joint eigenspace refinement of the metricV-symmetric parts of θ.
pub fn weight_split(d: &SemidirectData, metric_v: &Mat) -> Result<WeightOutcome> {
    let q = d.dim_v();
    if metric_v.nrows() != q || metric_v.ncols() != q {
        return Err(Error::Dimension(format!("metricV must be {q}x{q}")));
    }
    if q == 0 {
        return Ok(WeightOutcome::Split(WeightDecomposition::default()));
    }
    crate::linalg::check_spd(metric_v)?;
    let r = chol_upper(metric_v)?;
    let rinv = crate::linalg::inverse(&r)?;
    let th: Vec<Mat> = d.theta().iter().map(|t| &r * t * &rinv).collect();
    let scale = d.theta().iter().map(max_abs).fold(1.0, f64::max);

    for (k, t) in th.iter().enumerate() {
        let comm = max_abs(&(t * t.transpose() - t.transpose() * t));
        if comm > TOL_SKEW * scale * scale * 10.0 {
            return Ok(WeightOutcome::Failure(StabilityFailure {
                operator: k,
                residual: comm,
                reason: "symmetric and skew parts do not commute (operator is not normal)".into(),
            }));
        }
    }
    let syms: Vec<Mat> = th.iter().map(sym).collect();
    for i in 0..syms.len() {
        for j in i + 1..syms.len() {
            let comm = max_abs(&(&syms[i] * &syms[j] - &syms[j] * &syms[i]));
            if comm > TOL_SKEW * scale * scale * 10.0 {
                return Ok(WeightOutcome::Failure(StabilityFailure {
                    operator: j,
                    residual: comm,
                    reason: format!("symmetric part does not commute with that of theta(e{})", i + 1),
                }));
            }
        }
    }

    let mut blocks = vec![Mat::identity(q, q)];
    for s in &syms {
        let rho = sym_eigen(s).0.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        // rounding-level symmetric parts (e.g. of a conjugated skew operator)
        // carry no weight information and must not split the blocks
        if rho <= TOL_SKEW * scale {
            continue;
        }
        let sn = s / rho;
        let mut next = Vec::new();
        for b in &blocks {
            let (vals, vecs) = sym_eigen(&(b.transpose() * &sn * b));
            let mut start = 0;
            for i in 1..=vals.len() {
                if i == vals.len() || vals[i] - vals[i - 1] > TOL_WEIGHT {
                    next.push(b * vecs.columns(start, i - start));
                    start = i;
                }
            }
        }
        blocks = next;
    }

    let mut weights = Vec::new();
    for b in &blocks {
        let dim = b.ncols() as f64;
        let alpha: Vec<f64> = syms.iter().map(|s| (b.transpose() * s * b).trace() / dim).collect();
        for (k, t) in th.iter().enumerate() {
            let leak = max_abs(&(t * b - b * (b.transpose() * t * b)));
            if leak > TOL_SKEW * scale * 10.0 {
                return Ok(WeightOutcome::Failure(StabilityFailure {
                    operator: k,
                    residual: leak,
                    reason: "joint eigenspace is not invariant".into(),
                }));
            }
            let jm = b.transpose() * t * b - Mat::identity(b.ncols(), b.ncols()) * alpha[k];
            let asym = max_abs(&sym(&jm));
            if asym > TOL_SKEW * scale * 10.0 {
                return Ok(WeightOutcome::Failure(StabilityFailure {
                    operator: k,
                    residual: asym,
                    reason: "residual operator is not skew".into(),
                }));
            }
        }
        let orig = canonical_basis(&(&rinv * b), metric_v);
        let j = d
            .theta()
            .iter()
            .zip(&alpha)
            .map(|(t, &a)| {
                let m = orig.transpose() * metric_v * t * &orig;
                skew(&(m - Mat::identity(orig.ncols(), orig.ncols()) * a))
            })
            .collect();
        weights.push(Weight { alpha, basis: orig, j });
    }
    weights.sort_by(|a, b| {
        for (x, y) in a.alpha.iter().zip(&b.alpha) {
            if (x - y).abs() > TOL_WEIGHT * scale {
                return x.total_cmp(y);
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(WeightOutcome::Split(WeightDecomposition { weights }))
}

/// Choices that the decomposition does not determine.
#[derive(Debug, Clone, Default)]
pub struct SplitOptions {
    /// Inner product on V (default identity); θ must be normal for it.
    pub metric_v: Option<Mat>,
    /// Background inner product on u (default: identity when ad(k)-invariant,
    /// otherwise −B on [u,u] plus identity on the centre).
    pub background_u: Option<Mat>,
}

/// The decomposition `g = h ⊕ l ⊕ ẑ ⊕ V` in an adapted background-orthonormal
/// basis. Ranges returned by the accessors index `m = l ⊕ ẑ ⊕ V`.
#[derive(Debug, Clone)]
pub struct ReductiveSplit {
    space: HomogeneousSpace,
    u_space: HomogeneousSpace,
    data: SemidirectData,
    weights: WeightDecomposition,
    basis: Mat,
    background_u: Mat,
    metric_v: Mat,
    nh: usize,
    nl: usize,
    nlss: usize,
    nz: usize,
    block_dims: Vec<usize>,
    b0: f64,
    weights_vanish_on_derived: bool,
}

fn ad_u(u: &LieAlgebra, x: &Vector) -> Mat {
    u.ad(x)
}

fn default_background_u(u: &LieAlgebra, k: &Mat) -> Result<Mat> {
    let p = u.dim();
    let id = Mat::identity(p, p);
    let scale = u.scale();
    let inv = (0..k.ncols())
        .map(|c| max_abs(&sym(&ad_u(u, &k.column(c).into_owned()))))
        .fold(0.0, f64::max);
    if inv <= TOL_SKEW * scale {
        return Ok(id);
    }
    let derived = canonical_basis(&u.derived_span(&id), &id);
    let centre = centre_of(u);
    let t = Mat::from_columns(
        &derived.column_iter().chain(centre.column_iter()).map(|c| c.into_owned()).collect::<Vec<_>>(),
    );
    if t.ncols() != p {
        return Err(Error::NonReductive("u is not the sum of its derived algebra and centre".into()));
    }
    let kss = -(derived.transpose() * u.killing_form() * &derived);
    crate::linalg::check_spd(&kss).map_err(|_| Error::NonReductive("u is not compact".into()))?;
    let blk = crate::linalg::block_diag(&[kss, Mat::identity(centre.ncols(), centre.ncols())]);
    let tinv = crate::linalg::inverse(&t)?;
    Ok(sym(&(tinv.transpose() * blk * tinv)))
}

fn centre_of(u: &LieAlgebra) -> Mat {
    let p = u.dim();
    let mut a = Mat::zeros(p * p, p);
    for j in 0..p {
        for k in 0..p {
            for i in 0..p {
                a[(j * p + k, i)] = u.c(i, j, k);
            }
        }
    }
    canonical_basis(&null_space(&a, 1e-8), &Mat::identity(p, p))
}

/// Builds the reductive decomposition for `u ⋉_θ V` with isotropy spanned by
/// `h_basis` (coordinate vectors in u).
pub fn split_u(d: &SemidirectData, h_basis: &[Vec<f64>], opts: &SplitOptions) -> Result<ReductiveSplit> {
    let u = d.u();
    let p = u.dim();
    let q = d.dim_v();
    let id_p = Mat::identity(p, p);
    let metric_v = opts.metric_v.clone().unwrap_or_else(|| Mat::identity(q, q));
    let wd = match weight_split(d, &metric_v)? {
        WeightOutcome::Split(w) => w,
        WeightOutcome::Failure(f) => return Err(Error::Unstable(f.to_string())),
    };

    // k: common kernel of the weights
    let w = Mat::from_fn(wd.weights.len(), p, |a, k| wd.weights[a].alpha[k]);
    let k_span = if wd.weights.is_empty() { id_p.clone() } else { null_space(&w, 1e-8) };
    let derived = u.derived_span(&id_p);
    let wscale = max_abs(&w).max(1.0);
    let weights_vanish_on_derived = derived.ncols() == 0 || max_abs(&(&w * &derived)) <= 1e-9 * wscale * u.scale();

    let bu = match &opts.background_u {
        Some(b) => {
            if b.nrows() != p || b.ncols() != p {
                return Err(Error::Dimension(format!("background_u must be {p}x{p}")));
            }
            crate::linalg::check_spd(b)?;
            b.clone()
        }
        None => default_background_u(u, &k_span)?,
    };
    let kb = canonical_basis(&k_span, &bu);
    for c in 0..kb.ncols() {
        let a = ad_u(u, &kb.column(c).into_owned());
        let res = max_abs(&(a.transpose() * &bu + &bu * &a));
        if res > TOL_SKEW * u.scale() * max_abs(&bu).max(1.0) {
            return Err(Error::BackgroundNotInvariant(res));
        }
    }

    // h
    let hcols: Vec<Vector> = h_basis
        .iter()
        .map(|v| {
            if v.len() != p {
                Err(Error::Dimension(format!("h vector of length {} in dim u = {p}", v.len())))
            } else {
                Ok(Vector::from_vec(v.clone()))
            }
        })
        .collect::<Result<_>>()?;
    let hraw = if hcols.is_empty() { Mat::zeros(p, 0) } else { Mat::from_columns(&hcols) };
    let hb = gram_schmidt(&hraw, &bu, 1e-10);
    if hb.ncols() != hraw.ncols() {
        return Err(Error::InvalidArgument("h_basis is linearly dependent".into()));
    }
    let hb = canonical_basis(&hb, &bu);
    if hb.ncols() > 0 {
        let in_k = if wd.weights.is_empty() { 0.0 } else { max_abs(&(&w * &hb)) };
        if in_k > 1e-9 * wscale {
            return Err(Error::IsotropyNotInK(in_k));
        }
        let ph = &hb * hb.transpose() * &bu;
        let br = u.derived_span(&hb);
        let out = if br.ncols() == 0 { 0.0 } else { max_abs(&(&br - &ph * &br)) };
        if out > 1e-9 * u.scale() {
            return Err(Error::NotSubalgebra(out));
        }
    }

    let lb = complement_in(&kb, &hb, &bu);
    let kss = u.derived_span(&kb);
    let lss = if kss.ncols() == 0 || lb.ncols() == 0 {
        Mat::zeros(p, 0)
    } else {
        canonical_basis(&intersect(&lb, &kss), &bu)
    };
    let lrest = complement_in(&lb, &lss, &bu);
    let zb = complement_in(&id_p, &kb, &bu);
    for c in 0..zb.ncols() {
        let a = ad_u(u, &zb.column(c).into_owned());
        if max_abs(&a) > 1e-9 * u.scale() {
            return Err(Error::NonReductive("complement of k in u is not central".into()));
        }
    }

    let n = p + q;
    let mut cols: Vec<Vector> = Vec::with_capacity(n);
    for m in [&hb, &lss, &lrest, &zb] {
        for c in m.column_iter() {
            let mut v = Vector::zeros(n);
            v.rows_mut(0, p).copy_from(&c);
            cols.push(v);
        }
    }
    for wt in &wd.weights {
        for c in wt.basis.column_iter() {
            let mut v = Vector::zeros(n);
            v.rows_mut(p, q).copy_from(&c);
            cols.push(v);
        }
    }
    if cols.len() != n {
        return Err(Error::NonReductive(format!("adapted basis has {} vectors for dim g = {n}", cols.len())));
    }
    let basis = Mat::from_columns(&cols);
    let g = d.semidirect()?;
    let mut labels = Vec::with_capacity(n);
    labels.extend((0..hb.ncols()).map(|i| format!("h{}", i + 1)));
    labels.extend((0..lb.ncols()).map(|i| format!("l{}", i + 1)));
    labels.extend((0..zb.ncols()).map(|i| format!("z{}", i + 1)));
    for (a, wt) in wd.weights.iter().enumerate() {
        labels.extend((0..wt.dim()).map(|i| format!("v{}_{}", a + 1, i + 1)));
    }
    let adapted = g.change_basis(&basis)?.with_labels(labels)?;
    let nh = hb.ncols();
    let nl = lb.ncols();
    let nk = nh + nl;
    let space = HomogeneousSpace::new(adapted.clone(), nh)?;

    // background must be ad(k)-invariant on m
    let scale = adapted.scale();
    for i in 0..nk {
        let a = adapted.ad_basis(i).view((nh, nh), (n - nh, n - nh)).into_owned();
        let res = max_abs(&sym(&a));
        if res > 1e-9 * scale {
            return Err(Error::BackgroundNotInvariant(res));
        }
    }

    let b0 = if lss.ncols() == 0 {
        0.0
    } else {
        let mut bk = Mat::zeros(nk, nk);
        for i in 0..nk {
            for j in 0..nk {
                let mut s = 0.0;
                for a in 0..nk {
                    for b in 0..nk {
                        s += adapted.c(i, b, a) * adapted.c(j, a, b);
                    }
                }
                bk[(i, j)] = s;
            }
        }
        let blk = -bk.view((nh, nh), (lss.ncols(), lss.ncols())).into_owned();
        sym_eigen(&blk).0[0]
    };

    let u_space = space.truncate(nl + zb.ncols())?;
    Ok(ReductiveSplit {
        space,
        u_space,
        data: d.clone(),
        block_dims: wd.block_dims(),
        weights: wd,
        basis,
        background_u: bu,
        metric_v,
        nh,
        nl,
        nlss: lss.ncols(),
        nz: zb.ncols(),
        b0,
        weights_vanish_on_derived,
    })
}

impl ReductiveSplit {
    pub fn space(&self) -> &HomogeneousSpace {
        &self.space
    }

    /// The sub-datum `(u, h)` with m_u = l ⊕ ẑ.
    pub fn u_space(&self) -> &HomogeneousSpace {
        &self.u_space
    }

    pub fn data(&self) -> &SemidirectData {
        &self.data
    }

    pub fn weights(&self) -> &WeightDecomposition {
        &self.weights
    }

    /// Columns: the adapted basis in the original coordinates of `u ⋉ V`.
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn background_u(&self) -> &Mat {
        &self.background_u
    }

    pub fn metric_v(&self) -> &Mat {
        &self.metric_v
    }

    pub fn dim_h(&self) -> usize {
        self.nh
    }

    pub fn dim_m(&self) -> usize {
        self.space.dim_m()
    }

    pub fn l(&self) -> Range<usize> {
        0..self.nl
    }

    pub fn lss(&self) -> Range<usize> {
        0..self.nlss
    }

    pub fn z(&self) -> Range<usize> {
        self.nl..self.nl + self.nz
    }

    pub fn mu(&self) -> Range<usize> {
        0..self.nl + self.nz
    }

    pub fn v(&self) -> Range<usize> {
        self.nl + self.nz..self.dim_m()
    }

    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut o = self.nl + self.nz;
        self.block_dims
            .iter()
            .map(|&d| {
                let r = o..o + d;
                o += d;
                r
            })
            .collect()
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Whether every weight vanishes on `[u,u]` (checked, not assumed).
    pub fn weights_vanish_on_derived(&self) -> bool {
        self.weights_vanish_on_derived
    }

    /// Adapted-basis labels of m.
    pub fn m_labels(&self) -> Vec<String> {
        self.space.algebra().labels()[self.nh..].to_vec()
    }

    /// Matrix of `ad x|_V` for x in m_u (adapted coordinates of m).
    pub fn ad_on_v(&self, x: &Vector) -> Mat {
        let v = self.v();
        let full = self.space.ad_m(x);
        full.view((v.start, v.start), (v.len(), v.len())).into_owned()
    }

    pub fn text(&self) -> SplitText {
        let r = |r: Range<usize>| r.map(|i| i + self.nh).collect::<Vec<_>>();
        SplitText {
            algebra: self.space.algebra().clone(),
            h_idx: (0..self.nh).collect(),
            l_idx: r(self.l()),
            lss_idx: r(self.lss()),
            z_idx: r(self.z()),
            v_idx: r(self.v()),
            blocks: self.blocks().into_iter().map(r).collect(),
            background: crate::linalg::to_rows(&Mat::identity(self.dim_m(), self.dim_m())),
            basis: crate::linalg::to_rows(&self.basis),
            b0: self.b0,
            weights_vanish_on_derived: self.weights_vanish_on_derived,
        }
    }
}

/// Serializable view of a split; index sets refer to the adapted basis of g.
#[derive(Debug, Clone, Serialize)]
pub struct SplitText {
    pub algebra: LieAlgebra,
    pub h_idx: Vec<usize>,
    pub l_idx: Vec<usize>,
    pub lss_idx: Vec<usize>,
    pub z_idx: Vec<usize>,
    pub v_idx: Vec<usize>,
    pub blocks: Vec<Vec<usize>>,
    pub background: Vec<Vec<f64>>,
    pub basis: Vec<Vec<f64>>,
    pub b0: f64,
    pub weights_vanish_on_derived: bool,
}

/// Largest metric entry coupling m_u to V or two distinct weight blocks.
pub fn check_theta_adapted(split: &ReductiveSplit, p: &Mat) -> f64 {
    let mu = split.mu();
    let v = split.v();
    let mut worst = 0.0_f64;
    for i in mu.clone() {
        for j in v.clone() {
            worst = worst.max(p[(i, j)].abs());
        }
    }
    let blocks = split.blocks();
    for (a, ba) in blocks.iter().enumerate() {
        for bb in blocks.iter().skip(a + 1) {
            for i in ba.clone() {
                for j in bb.clone() {
                    worst = worst.max(p[(i, j)].abs());
                }
            }
        }
    }
    worst
}

pub(crate) fn ser_mat<S: serde::Serializer>(m: &Mat, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::linalg::to_rows(m).serialize(s)
}

pub(crate) fn ser_mats<S: serde::Serializer>(m: &[Mat], s: S) -> std::result::Result<S::Ok, S::Error> {
    m.iter().map(crate::linalg::to_rows).collect::<Vec<_>>().serialize(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn lambda_example_split() {
        let d = catalog::e1(1.0);
        let s = split_u(&d, &[], &SplitOptions::default()).unwrap();
        assert_eq!(s.l(), 0..3);
        assert_eq!(s.lss(), 0..3);
        assert_eq!(s.z(), 3..4);
        assert_eq!(s.v(), 4..7);
        assert!((s.b0() - 2.0).abs() < 1e-12);
        assert!(s.weights_vanish_on_derived());
        // adapted basis coincides with the natural one
        assert!((s.basis() - Mat::identity(7, 7)).amax() < 1e-12);
        let w = &s.weights().weights[0];
        assert_eq!(w.alpha, vec![0.0, 0.0, 0.0, 1.0]);
        let rot = crate::liealg::rotation_generators();
        for k in 0..3 {
            assert!((&w.j[k] - &rot[k]).amax() < 1e-12);
        }
        assert!(w.j[3].amax() < 1e-12);
    }

    #[test]
    fn preflat_split() {
        let s = split_u(&catalog::e4(), &[], &SplitOptions::default()).unwrap();
        assert_eq!(s.l(), 0..1);
        assert_eq!(s.lss().len(), 0);
        assert_eq!(s.z().len(), 0);
        assert_eq!(s.b0(), 0.0);
        let w = &s.weights().weights[0];
        assert_eq!(w.alpha, vec![0.0]);
        assert!((&w.j[0] - Mat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn trivial_action_has_no_z_hat() {
        let d = SemidirectData::new(LieAlgebra::su2(), 2, vec![Mat::zeros(2, 2); 3]).unwrap();
        let s = split_u(&d, &[], &SplitOptions::default()).unwrap();
        assert_eq!(s.z().len(), 0);
        assert_eq!(s.l().len(), 3);
    }

    #[test]
    fn non_semisimple_operator_fails() {
        let d = SemidirectData::new(LieAlgebra::abelian(1), 2, vec![Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])])
            .unwrap();
        let out = weight_split(&d, &Mat::identity(2, 2)).unwrap();
        assert!(matches!(out, WeightOutcome::Failure(_)));
        assert!(matches!(split_u(&d, &[], &SplitOptions::default()), Err(Error::Unstable(_))));
    }

    #[test]
    fn two_weights_are_separated() {
        let s = split_u(&catalog::e5(1.0, 2.0), &[], &SplitOptions::default()).unwrap();
        assert_eq!(s.blocks(), vec![4..7, 7..10]);
        let a: Vec<f64> = s.weights().weights.iter().map(|w| w.alpha[3]).collect();
        assert_eq!(a, vec![1.0, 2.0]);
    }

    #[test]
    fn circle_isotropy() {
        let d = catalog::e1(1.0);
        let s = split_u(&d, &[vec![0.0, 0.0, 1.0, 0.0]], &SplitOptions::default()).unwrap();
        assert_eq!(s.dim_h(), 1);
        assert_eq!(s.l().len(), 2);
        assert_eq!(s.lss().len(), 2);
        assert!((s.b0() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn isotropy_must_be_subalgebra() {
        let d = catalog::e1(1.0);
        let r = split_u(&d, &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]], &SplitOptions::default());
        assert!(matches!(r, Err(Error::NotSubalgebra(_))));
        let r = split_u(&d, &[vec![0.0, 0.0, 0.0, 1.0]], &SplitOptions::default());
        assert!(matches!(r, Err(Error::IsotropyNotInK(_))));
    }

    #[test]
    fn adaptedness_residual() {
        let s = split_u(&catalog::e1(1.0), &[], &SplitOptions::default()).unwrap();
        let mut p = Mat::identity(7, 7);
        assert_eq!(check_theta_adapted(&s, &p), 0.0);
        p[(1, 5)] = 0.25;
        p[(5, 1)] = 0.25;
        assert_eq!(check_theta_adapted(&s, &p), 0.25);
    }
}
