//! Embedded Dormand–Prince 5(4) steps for matrix-valued ODEs.

use crate::linalg::Mat;

/// Butcher tableau of the Dormand–Prince pair.
mod dopri {
    pub const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    pub const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    /// Fifth-order weights (equal to the last row of A: first same as last).
    pub const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    /// Difference between fifth- and fourth-order weights.
    pub const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
}

/// Result of one trial step.
#[derive(Debug, Clone)]
pub struct Step {
    pub y: Mat,
    /// Derivative at the new point (reusable as the next `k1`).
    pub dy: Mat,
    /// Scaled RMS error estimate; the step is acceptable when ≤ 1.
    pub err: f64,
}

/// One Dormand–Prince step of size `h` from `(t, y)` with `k1 = f(t, y)`.
pub fn step<F, E>(f: &mut F, t: f64, y: &Mat, k1: &Mat, h: f64, tol: Tolerance) -> Result<Step, E>
where
    F: FnMut(f64, &Mat) -> Result<Mat, E> + ?Sized,
{
    let mut k: Vec<Mat> = Vec::with_capacity(7);
    k.push(k1.clone());
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = dopri::A[s][j];
            if a != 0.0 {
                ys += kj * (h * a);
            }
        }
        if s == 6 {
            // FSAL: the seventh stage point is the fifth-order solution
            let dy = f(t + h, &ys)?;
            k.push(dy);
            let mut err = Mat::zeros(y.nrows(), y.ncols());
            for (j, kj) in k.iter().enumerate() {
                err += kj * (h * dopri::E[j]);
            }
            let n = y.len().max(1) as f64;
            let mut acc = 0.0;
            for i in 0..y.len() {
                let sc = tol.atol + tol.rtol * y[i].abs().max(ys[i].abs());
                acc += (err[i] / sc).powi(2);
            }
            debug_assert!(dopri::B.iter().zip(dopri::A[6].iter()).all(|(b, a)| b == a));
            let dy = k.pop().expect("seven stages");
            return Ok(Step { y: ys, dy, err: (acc / n).sqrt() });
        }
        k.push(f(t + dopri::C[s] * h, &ys)?);
    }
    unreachable!("loop returns at the last stage")
}

/// Step-size update from the scaled error (safety factor 0.9, growth in [0.2, 5]).
pub fn next_h(h: f64, err: f64) -> f64 {
    let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
    h * fac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fifth_order() {
        let mut f = |_t: f64, y: &Mat| -> Result<Mat, ()> { Ok(-y) };
        let tol = Tolerance { rtol: 1e-10, atol: 1e-12 };
        let err_at = |h: f64, f: &mut dyn FnMut(f64, &Mat) -> Result<Mat, ()>| {
            let y0 = Mat::from_element(1, 1, 1.0);
            let k1 = f(0.0, &y0).unwrap();
            let s = step(f, 0.0, &y0, &k1, h, tol).unwrap();
            (s.y[(0, 0)] - (-h).exp()).abs()
        };
        let e1 = err_at(0.2, &mut f);
        let e2 = err_at(0.1, &mut f);
        // local error O(h^6)
        assert!(e1 / e2 > 40.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn linear_solution_is_exact() {
        let mut f = |_t: f64, _y: &Mat| -> Result<Mat, ()> { Ok(Mat::from_element(1, 1, -1.0)) };
        let y0 = Mat::from_element(1, 1, 1.0);
        let k1 = f(0.0, &y0).unwrap();
        let s = step(&mut f, 0.0, &y0, &k1, 0.7, Tolerance { rtol: 1e-8, atol: 1e-12 }).unwrap();
        assert!((s.y[(0, 0)] - 0.3).abs() < 1e-15);
        assert!(s.err < 1e-6);
    }
}
