//! Shared fixtures and an independent curvature oracle built from the
//! Levi-Civita connection (Nomizu operators) rather than the structure-constant
//! formula used by the library.

#![allow(dead_code)]

use homflow::linalg::{inverse, Mat, Vector};
use homflow::HomogeneousSpace;

/// Full bracket coefficients `[f_a, f_b] = Σ_k c(a, b, k) f_k` on g, with the
/// h-part of the basis first.
fn full_bracket(space: &HomogeneousSpace, x: &Vector, y: &Vector) -> Vector {
    let alg = space.algebra();
    let n = alg.dim();
    let mut out = Vector::zeros(n);
    for a in 0..n {
        for b in 0..n {
            let w = x[a] * y[b];
            if w == 0.0 {
                continue;
            }
            for k in 0..n {
                out[k] += w * alg.c(a, b, k);
            }
        }
    }
    out
}

fn embed(space: &HomogeneousSpace, x: &Vector) -> Vector {
    let nh = space.dim_h();
    let mut v = Vector::zeros(nh + x.len());
    v.rows_mut(nh, x.len()).copy_from(x);
    v
}

/// Ricci tensor and `Ric*` of the invariant metric `p` as bilinear forms on m.
pub struct Oracle {
    pub ric: Mat,
    pub ric_star: Mat,
    pub scal: f64,
    pub scal_star: f64,
}

pub fn nomizu(space: &HomogeneousSpace, p: &Mat) -> Oracle {
    let nh = space.dim_h();
    let nm = space.dim_m();
    let n = nh + nm;
    let pinv = inverse(p).expect("invertible metric");
    let e = |i: usize| {
        let mut v = Vector::zeros(nm);
        v[i] = 1.0;
        v
    };
    let br = |x: &Vector, y: &Vector| {
        let f = full_bracket(space, &embed(space, x), &embed(space, y));
        (f.rows(0, nh).into_owned(), f.rows(nh, nm).into_owned())
    };
    // Λ(e_a) as a matrix acting on m-coordinates.
    let lambda_of = |x: &Vector| -> Mat {
        let mut l = Mat::zeros(nm, nm);
        for b in 0..nm {
            let y = e(b);
            let half = br(x, &y).1 * 0.5;
            // g(U(x,y), w) = ½(g([w,x]_m, y) + g(x, [w,y]_m)) for all w.
            let mut rhs = Vector::zeros(nm);
            for w in 0..nm {
                let ew = e(w);
                let wx = br(&ew, x).1;
                let wy = br(&ew, &y).1;
                rhs[w] = 0.5 * ((wx.transpose() * p * &y)[0] + (x.transpose() * p * wy)[0]);
            }
            let u = &pinv * rhs;
            l.set_column(b, &(half + u));
        }
        l
    };
    let lams: Vec<Mat> = (0..nm).map(|a| lambda_of(&e(a))).collect();
    let ad_h_on_m = |hx: &Vector| -> Mat {
        let mut m = Mat::zeros(nm, nm);
        for b in 0..nm {
            let mut hv = Vector::zeros(n);
            hv.rows_mut(0, nh).copy_from(hx);
            let f = full_bracket(space, &hv, &embed(space, &e(b)));
            m.set_column(b, &f.rows(nh, nm));
        }
        m
    };
    let lambda_lin = |v: &Vector| -> Mat {
        let mut m = Mat::zeros(nm, nm);
        for a in 0..nm {
            m += &lams[a] * v[a];
        }
        m
    };
    // R(e_a, e_b) operators.
    let mut ric = Mat::zeros(nm, nm);
    for a in 0..nm {
        for b in 0..nm {
            let (bh, bm) = br(&e(a), &e(b));
            let r = &lams[a] * &lams[b] - &lams[b] * &lams[a] - lambda_lin(&bm) - ad_h_on_m(&bh);
            // Ric(y, z) = Σ_a coefficient of e_a in R(e_a, y) z; accumulate
            // over y = e_b: Ric(e_b, e_c) = Σ_a R(e_a, e_b)[a, c].
            for c in 0..nm {
                ric[(b, c)] += r[(a, c)];
            }
        }
    }
    let ric = (&ric + ric.transpose()) * 0.5;
    // Mean curvature vector: g(H, x) = tr ad x on g.
    let alg = space.algebra();
    let mut tr = Vector::zeros(nm);
    for a in 0..nm {
        tr[a] = (0..n).map(|k| alg.c(nh + a, k, k)).sum();
    }
    let hvec = &pinv * tr;
    let adh = {
        let mut m = Mat::zeros(nm, nm);
        for b in 0..nm {
            m.set_column(b, &br(&hvec, &e(b)).1);
        }
        m
    };
    // S(ad H)(x, y) = ½(g([H,x], y) + g(x, [H,y])).
    let pa = p * &adh;
    let s_h = (pa.transpose() + pa) * 0.5;
    let ric_star = &ric + s_h;
    let scal = (&pinv * &ric).trace();
    let scal_star = (&pinv * &ric_star).trace();
    Oracle { ric, ric_star, scal, scal_star }
}

/// Relative max-entry distance with an absolute floor of 1.
pub fn rel_dist(a: &Mat, b: &Mat) -> f64 {
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    (a - b).iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale
}

pub fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&Vector::from_row_slice(values))
}
