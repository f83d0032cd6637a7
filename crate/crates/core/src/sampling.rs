//! Seeded random invariant metrics with controlled conditioning.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::homspace::ReductiveSplit;
use crate::linalg::{null_space, sym_eigen, sym_fn, Mat};

/// Default bound κ: eigenvalues of sampled metrics lie in `[1/κ, κ]`.
pub const KAPPA: f64 = 10.0;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Basis of the symmetric ad(h)-equivariant matrices on m; with `adapted`,
/// restricted to those with `m_u ⊥ V` and mutually orthogonal weight blocks.
pub fn metric_basis(split: &ReductiveSplit, adapted: bool) -> Vec<Mat> {
    let n = split.dim_m();
    let mut block_of = vec![0usize; n];
    for (a, r) in split.blocks().into_iter().enumerate() {
        for i in r {
            block_of[i] = a + 1;
        }
    }
    let mut elems = Vec::new();
    for i in 0..n {
        for j in i..n {
            if adapted && block_of[i] != block_of[j] {
                continue;
            }
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            elems.push(e);
        }
    }
    let ad = split.space().ad_h();
    if ad.is_empty() || elems.is_empty() {
        return elems;
    }
    let rows = ad.len() * n * n;
    let mut c = Mat::zeros(rows, elems.len());
    for (col, e) in elems.iter().enumerate() {
        for (k, a) in ad.iter().enumerate() {
            let comm = a * e - e * a;
            for (idx, v) in comm.iter().enumerate() {
                c[(k * n * n + idx, col)] = *v;
            }
        }
    }
    let ns = null_space(&c, 1e-10);
    (0..ns.ncols())
        .map(|s| {
            let mut m = Mat::zeros(n, n);
            for (col, e) in elems.iter().enumerate() {
                m += e * ns[(col, s)];
            }
            m
        })
        .collect()
}

/// `P = exp(X)` for a random X in the span of [`metric_basis`], rescaled so
/// that the spectrum of X is `[−ln κ, ln κ]`-bounded with an extreme value
/// drawn uniformly in `[0, ln κ]`.
pub fn random_metric<R: Rng>(split: &ReductiveSplit, rng: &mut R, kappa: f64, adapted: bool) -> Mat {
    let basis = metric_basis(split, adapted);
    let n = split.dim_m();
    let mut x = Mat::zeros(n, n);
    for b in &basis {
        let c: f64 = rng.sample(StandardNormal);
        x += b * c;
    }
    let (vals, _) = sym_eigen(&x);
    let radius = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let target = rng.gen_range(0.0..=1.0) * kappa.ln();
    if radius > 0.0 {
        x *= target / radius;
    }
    sym_fn(&x, f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::homspace::{check_theta_adapted, split_u};

    #[test]
    fn sampled_metrics_are_adapted_and_bounded() {
        let s = split_u(&catalog::e5(1.0, 2.0), &[], &Default::default()).unwrap();
        let mut r = rng(7);
        for _ in 0..10 {
            let p = random_metric(&s, &mut r, KAPPA, true);
            assert!(check_theta_adapted(&s, &p) < 1e-14);
            let (v, _) = sym_eigen(&p);
            assert!(v[0] >= 1.0 / KAPPA - 1e-12 && v[v.len() - 1] <= KAPPA + 1e-12);
        }
    }

    #[test]
    fn equivariant_under_isotropy() {
        let d = catalog::e1(1.0);
        let s = split_u(&d, &[vec![0.0, 0.0, 1.0, 0.0]], &Default::default()).unwrap();
        let mut r = rng(3);
        let p = random_metric(&s, &mut r, KAPPA, false);
        assert!(s.space().equivariance_residual(&p) < 1e-12);
    }

    #[test]
    fn same_seed_same_metric() {
        let s = split_u(&catalog::e1(1.0), &[], &Default::default()).unwrap();
        let a = random_metric(&s, &mut rng(11), KAPPA, true);
        let b = random_metric(&s, &mut rng(11), KAPPA, true);
        assert_eq!(a, b);
    }
}
