//! Moment map of a representation `θ: u → gl(V)`, the negative moment map
//! flow on metrics over V, and closed-orbit detection.
//!
//! For a metric `Q` on V write `θ^{t_Q} = Q⁻¹θᵀQ` and `M_Q = Σ_k [θ_k, θ_k^{t_Q}]`.
//! With `Q = SᵀS` the conjugated family `θ̃_k = S θ_k S⁻¹` satisfies
//! `‖θ_k‖²_Q = ‖θ̃_k‖²`, and steepest descent of `Σ‖θ̃_k‖²` over the
//! conjugation orbit reads `dQ/dt = −2 Q M_Q`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::homspace::ser_mat;
use crate::liealg::SemidirectData;
use crate::linalg::{chol_upper, frob, inverse, max_abs, spd_condition, spd_inverse, sym, Mat};
use crate::ode::{self, Tolerance};

/// A representation together with a metric on V.
#[derive(Debug, Clone, Serialize)]
pub struct RepMetricState {
    #[serde(serialize_with = "crate::homspace::ser_mats")]
    theta: Vec<Mat>,
    #[serde(serialize_with = "ser_mat")]
    q: Mat,
    /// `Σ_k tr(θ_k²)` at construction.
    trace_sq: f64,
}

impl RepMetricState {
    pub fn new(theta: Vec<Mat>, q: Mat) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n || theta.iter().any(|t| t.shape() != (n, n)) {
            return Err(Error::Dimension("theta and Q must be square of equal size".into()));
        }
        crate::linalg::check_spd(&q)?;
        let trace_sq = theta.iter().map(|t| (t * t).trace()).sum();
        Ok(RepMetricState { theta, q: sym(&q), trace_sq })
    }

    pub fn from_data(d: &SemidirectData) -> Result<Self> {
        Self::new(d.theta().to_vec(), Mat::identity(d.dim_v(), d.dim_v()))
    }

    pub fn theta(&self) -> &[Mat] {
        &self.theta
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn trace_sq(&self) -> f64 {
        self.trace_sq
    }

    pub fn with_q(&self, q: Mat) -> Result<Self> {
        crate::linalg::check_spd(&q)?;
        Ok(RepMetricState { theta: self.theta.clone(), q: sym(&q), trace_sq: self.trace_sq })
    }

    /// `θ_k^{t_Q}` for every k.
    pub fn transposes(&self) -> Result<Vec<Mat>> {
        let qi = spd_inverse(&self.q)?;
        Ok(self.theta.iter().map(|t| &qi * t.transpose() * &self.q).collect())
    }

    /// `θ̃_k = S θ_k S⁻¹` with `Q = SᵀS`.
    pub fn conjugated(&self) -> Result<Vec<Mat>> {
        let s = chol_upper(&self.q)?;
        let si = inverse(&s)?;
        Ok(self.theta.iter().map(|t| &s * t * &si).collect())
    }

    /// `M_Q = Σ_k [θ_k, θ_k^{t_Q}]`.
    pub fn moment(&self) -> Result<Mat> {
        let n = self.q.nrows();
        let mut m = Mat::zeros(n, n);
        for (t, tt) in self.theta.iter().zip(self.transposes()?) {
            m += t * &tt - &tt * t;
        }
        Ok(m)
    }

    /// `Σ_k ‖θ_k‖²_Q`.
    pub fn norm_sq(&self) -> Result<f64> {
        Ok(self.conjugated()?.iter().map(|t| t.norm_squared()).sum())
    }

    /// `Σ_k tr(θ̃_k²)` evaluated on the conjugated family.
    pub fn conjugated_trace_sq(&self) -> Result<f64> {
        Ok(self.conjugated()?.iter().map(|t| (t * t).trace()).sum())
    }
}

/// `‖Σ_k [θ̃_k, θ̃_kᵀ]‖_F`, the Q-norm of the moment map. It is invariant under
/// simultaneous Q-orthogonal conjugation and vanishes iff every θ_k is Q-normal.
pub fn normality_residual(state: &RepMetricState) -> f64 {
    let Ok(th) = state.conjugated() else { return f64::INFINITY };
    let n = state.q.nrows();
    let mut m = Mat::zeros(n, n);
    for t in &th {
        m += t * t.transpose() - t.transpose() * t;
    }
    frob(&m)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentMapOptions {
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// The flow stops once the residual drops below this value times
    /// `max(1, Σ‖θ_k‖²_Q(0))`. It sits far below [`TOL_STABLE`] because an
    /// unstable orbit also drives the residual to zero, but only at the rate
    /// `1/cond(Q)`; the divergence threshold is then reached first.
    pub residual_tol: f64,
    /// Divergence threshold on cond(Q).
    pub max_condition: f64,
    /// Once the residual is below [`TOL_STABLE`], the flow also stops as
    /// converged when `max|Q(t) − Q(t/2)| ≤ settle_tol · max|Q(t)|`. Near a
    /// stable minimum the explicit integrator settles into tolerance-level
    /// chatter, while on an unstable orbit Q keeps drifting (cond(Q) ~ t).
    pub settle_tol: f64,
}

impl Default for MomentMapOptions {
    fn default() -> Self {
        MomentMapOptions { t_max: 1e14, rtol: 1e-10, atol: 1e-14, residual_tol: 1e-13, max_condition: 1e12, settle_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentMapSample {
    pub t: f64,
    #[serde(serialize_with = "ser_mat")]
    pub q: Mat,
    pub residual: f64,
    pub norm_sq: f64,
    pub trace_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMapStop {
    Converged,
    Diverged,
    TimeLimit,
    StepFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentMapPath {
    pub samples: Vec<MomentMapSample>,
    pub stop: MomentMapStop,
    /// `max |Σ tr(θ̃²)(t) − Σ tr(θ²)|` along the path.
    pub trace_drift: f64,
    /// Largest single-step increase of `Σ‖θ_k‖²_Q` (0 when monotone).
    pub max_norm_increase: f64,
}

impl MomentMapPath {
    pub fn last(&self) -> &MomentMapSample {
        self.samples.last().expect("path holds the initial state")
    }
}

fn sample(state: &RepMetricState, t: f64) -> Result<MomentMapSample> {
    Ok(MomentMapSample {
        t,
        q: state.q.clone(),
        residual: normality_residual(state),
        norm_sq: state.norm_sq()?,
        trace_sq: state.conjugated_trace_sq()?,
    })
}

fn settled(path: &MomentMapPath, tol: f64, scale: f64) -> bool {
    let last = path.last();
    if last.residual > TOL_STABLE * scale || last.t < 1.0 {
        return false;
    }
    let half = last.t / 2.0;
    let Some(earlier) = path.samples.iter().rev().find(|s| s.t <= half) else {
        return false;
    };
    max_abs(&(&last.q - &earlier.q)) <= tol * max_abs(&last.q)
}

/// Integrates `dQ/dt = −2 Q M_Q` with θ held fixed.
///
/// Time is reparametrized as `t = eˢ − 1`, so that the algebraic approach to
/// the boundary of the orbit in the unstable case costs O(log t) steps.
pub fn moment_map_flow(state: &RepMetricState, opts: &MomentMapOptions) -> Result<MomentMapPath> {
    let tol = Tolerance { rtol: opts.rtol, atol: opts.atol };
    let base = state.clone();
    let mut f = |s: f64, q: &Mat| -> Result<Mat> {
        let st = base.with_q(q.clone())?;
        let m = st.moment()?;
        Ok(sym(&(q * m)) * (-2.0 * s.exp()))
    };
    let s_max = opts.t_max.ln_1p();
    let mut s = 0.0;
    let mut q = state.q.clone();
    let mut k1 = f(0.0, &q)?;
    let mut h: f64 = 1e-3;
    let mut path = MomentMapPath {
        samples: vec![sample(state, 0.0)?],
        stop: MomentMapStop::TimeLimit,
        trace_drift: 0.0,
        max_norm_increase: 0.0,
    };
    let scale = path.last().norm_sq.max(1.0);
    loop {
        let last = path.last();
        if last.residual <= opts.residual_tol * scale || settled(&path, opts.settle_tol, scale) {
            path.stop = MomentMapStop::Converged;
            break;
        }
        if spd_condition(&q) > opts.max_condition {
            path.stop = MomentMapStop::Diverged;
            break;
        }
        if s >= s_max {
            break;
        }
        let hs = h.min(s_max - s);
        if hs < 1e-14 * s.max(1.0) {
            path.stop = MomentMapStop::StepFailure;
            break;
        }
        match ode::step(&mut f, s, &q, &k1, hs, tol) {
            Ok(st) if st.err <= 1.0 => {
                s += hs;
                q = sym(&st.y);
                k1 = st.dy;
                h = ode::next_h(hs, st.err);
                let cur = state.with_q(q.clone())?;
                let smp = sample(&cur, s.exp_m1())?;
                path.trace_drift = path.trace_drift.max((smp.trace_sq - state.trace_sq).abs());
                let inc = smp.norm_sq - path.last().norm_sq;
                let slack = 1e-12 * scale;
                path.max_norm_increase = path.max_norm_increase.max((inc - slack).max(0.0));
                path.samples.push(smp);
            }
            Ok(st) => h = ode::next_h(hs, st.err),
            Err(_) => h = hs * 0.25,
        }
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    NotStable,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    /// Minimal metric on V (stable) or the last metric reached (not stable).
    #[serde(serialize_with = "ser_mat")]
    pub witness: Mat,
    pub residual: f64,
    pub condition: f64,
    pub stop: MomentMapStop,
    /// "unstable orbit" when cond(Q) diverged.
    pub reason: String,
    pub steps: usize,
}

/// Residual threshold of the stable verdict.
pub const TOL_STABLE: f64 = 1e-8;

/// Runs the negative moment map flow from `Q = Id` and classifies the orbit.
pub fn is_stable(d: &SemidirectData) -> Result<StabilityVerdict> {
    is_stable_with(&RepMetricState::from_data(d)?, &MomentMapOptions::default())
}

pub fn is_stable_with(state: &RepMetricState, opts: &MomentMapOptions) -> Result<StabilityVerdict> {
    let path = moment_map_flow(state, opts)?;
    let last = path.last();
    let condition = spd_condition(&last.q);
    let stable = path.stop == MomentMapStop::Converged && last.residual <= TOL_STABLE && condition <= opts.max_condition;
    let reason = match path.stop {
        MomentMapStop::Converged => "residual converged".to_string(),
        MomentMapStop::Diverged => format!("unstable orbit: cond(Q) = {condition:.3e} exceeded {:.1e}", opts.max_condition),
        MomentMapStop::TimeLimit => format!("time limit reached with residual {:.3e}", last.residual),
        MomentMapStop::StepFailure => "step size underflow".to_string(),
    };
    Ok(StabilityVerdict {
        verdict: if stable { Verdict::Stable } else { Verdict::NotStable },
        witness: last.q.clone(),
        residual: last.residual,
        condition,
        stop: path.stop,
        reason,
        steps: path.samples.len() - 1,
    })
}
