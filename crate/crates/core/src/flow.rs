//! Ricci flow `dP/dt = −2·ric` and unimodular Ricci flow `dP/dt = −2·ric*`
//! on invariant metrics, with monitor channels, extinction detection and
//! blowdown sampling.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curvature::{block_frame, l_error_term, ricci, ricci_v_block, InvariantMetric};
use crate::error::{Error, Result};
use crate::homspace::{check_theta_adapted, HomogeneousSpace, ReductiveSplit, TOL_BLOCK};
use crate::linalg::{chol_upper, fd_weights, inverse, max_abs, min_eigenvalue, sym, sym_eigen, Mat, Vector};
use crate::ode::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Ricci,
    Unimodular,
}

fn d_t_max() -> f64 {
    10.0
}
fn d_rtol() -> f64 {
    1e-8
}
fn d_atol() -> f64 {
    1e-12
}
fn d_h_init() -> f64 {
    1e-3
}
fn d_h_min() -> f64 {
    1e-14
}
fn d_h_max() -> f64 {
    f64::INFINITY
}
fn d_eps() -> f64 {
    1e-8
}
fn d_rel() -> f64 {
    0.02
}
fn d_kind() -> FlowKind {
    FlowKind::Ricci
}

/// Integration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowControls {
    #[serde(default = "d_kind")]
    pub kind: FlowKind,
    #[serde(default = "d_t_max")]
    pub t_max: f64,
    #[serde(default = "d_rtol")]
    pub rtol: f64,
    #[serde(default = "d_atol")]
    pub atol: f64,
    #[serde(default = "d_h_init")]
    pub h_init: f64,
    #[serde(default = "d_h_min")]
    pub h_min: f64,
    #[serde(default = "d_h_max")]
    pub h_max: f64,
    /// Extinction floor for min eig(P), relative to its initial value.
    #[serde(default = "d_eps")]
    pub extinction_eps: f64,
    /// Caps each step so that `h·‖P^{-1/2}·dP/dt·P^{-1/2}‖ ≤ max_rel_change`;
    /// keeps the monitors resolved as the metric degenerates.
    #[serde(default = "d_rel")]
    pub max_rel_change: f64,
    /// Times the integrator lands on exactly.
    #[serde(default)]
    pub sample_times: Vec<f64>,
}

impl Default for FlowControls {
    fn default() -> Self {
        FlowControls {
            kind: d_kind(),
            t_max: d_t_max(),
            rtol: d_rtol(),
            atol: d_atol(),
            h_init: d_h_init(),
            h_min: d_h_min(),
            h_max: d_h_max(),
            extinction_eps: d_eps(),
            max_rel_change: d_rel(),
            sample_times: vec![],
        }
    }
}

impl FlowControls {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("flow controls: {m}")));
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.extinction_eps > 0.0) {
            return bad("rtol, atol and extinction_eps must be positive");
        }
        if !(self.h_min > 0.0 && self.h_min < self.h_init) {
            return bad("need 0 < h_min < h_init");
        }
        if !(self.h_max >= self.h_init) {
            return bad("need h_max >= h_init");
        }
        if !(self.max_rel_change > 0.0) {
            return bad("max_rel_change must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extinction {
    /// Midpoint of the bracket.
    pub time: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    TMax,
    Extinction,
    StiffFailure,
}

/// Times, metrics and their time derivatives.
#[derive(Debug, Clone)]
pub struct RawTrajectory {
    pub times: Vec<f64>,
    pub metrics: Vec<Mat>,
    pub derivatives: Vec<Mat>,
    pub stop: StopReason,
    pub extinction: Option<Extinction>,
}

fn rhs(space: &HomogeneousSpace, kind: FlowKind, p: &Mat) -> Result<Mat> {
    let lmin = min_eigenvalue(p);
    if !(lmin > 0.0) {
        return Err(Error::NotPositiveDefinite(lmin));
    }
    let g = InvariantMetric::new(sym(p))?;
    let rep = ricci(space, &g)?;
    let r = match kind {
        FlowKind::Ricci => rep.ric,
        FlowKind::Unimodular => rep.ric_star,
    };
    Ok(r * -2.0)
}

/// `‖R⁻ᵀ·dP·R⁻¹‖_F` for `P = RᵀR`: the rate of change of P measured in its
/// own geometry, independent of how the spectrum of P is spread out.
fn relative_rate(p: &Mat, dp: &Mat) -> Result<f64> {
    let rinv = inverse(&chol_upper(p)?)?;
    Ok((rinv.transpose() * dp * rinv).norm())
}

/// Integrates the flow of `controls.kind` on `space` from `p0`.
pub fn integrate_raw(space: &HomogeneousSpace, p0: &Mat, controls: &FlowControls) -> Result<RawTrajectory> {
    controls.validate()?;
    let g0 = InvariantMetric::on(space, p0.clone())?;
    let kind = controls.kind;
    let tol = Tolerance { rtol: controls.rtol, atol: controls.atol };
    let mut f = |_t: f64, y: &Mat| rhs(space, kind, y);

    let mut t = 0.0;
    let mut y = g0.p().clone();
    let mut k1 = f(0.0, &y)?;
    let floor = controls.extinction_eps * min_eigenvalue(&y);
    let mut h = controls.h_init;
    let mut samples: Vec<f64> = controls.sample_times.iter().cloned().filter(|&s| s > 0.0 && s < controls.t_max).collect();
    samples.sort_by(f64::total_cmp);
    let mut next_sample = 0;

    let mut out = RawTrajectory {
        times: vec![0.0],
        metrics: vec![y.clone()],
        derivatives: vec![k1.clone()],
        stop: StopReason::TMax,
        extinction: None,
    };
    loop {
        if t >= controls.t_max {
            break;
        }
        let rate = relative_rate(&y, &k1)?;
        let mut hs = h.min(controls.h_max).min(controls.t_max - t);
        if rate > 0.0 {
            hs = hs.min(controls.max_rel_change / rate);
        }
        while next_sample < samples.len() && samples[next_sample] <= t {
            next_sample += 1;
        }
        let mut landing = None;
        if next_sample < samples.len() && t + hs >= samples[next_sample] {
            hs = samples[next_sample] - t;
            landing = Some(samples[next_sample]);
        }
        if hs < controls.h_min {
            out.stop = StopReason::StiffFailure;
            break;
        }
        let trial = ode::step(&mut f, t, &y, &k1, hs, tol);
        let s = match trial {
            Err(_) => {
                h = hs * 0.25;
                continue;
            }
            Ok(s) if s.err > 1.0 => {
                h = ode::next_h(hs, s.err);
                continue;
            }
            Ok(s) => s,
        };
        if min_eigenvalue(&s.y) <= floor {
            // bisect the step length for the crossing of the floor
            let (mut lo, mut hi) = (0.0, hs);
            let mut best: Option<ode::Step> = None;
            while hi - lo > 1e-10 * t.abs().max(1.0) {
                let mid = 0.5 * (lo + hi);
                match ode::step(&mut f, t, &y, &k1, mid, tol) {
                    Ok(st) if min_eigenvalue(&st.y) > floor => {
                        lo = mid;
                        best = Some(st);
                    }
                    _ => hi = mid,
                }
            }
            if let Some(st) = best {
                out.times.push(t + lo);
                out.metrics.push(sym(&st.y));
                out.derivatives.push(st.dy);
            }
            out.extinction = Some(Extinction { time: t + 0.5 * (lo + hi), lo: t + lo, hi: t + hi });
            out.stop = StopReason::Extinction;
            break;
        }
        t = landing.unwrap_or(t + hs);
        if (controls.t_max - t).abs() <= 1e-14 * controls.t_max {
            t = controls.t_max;
        }
        y = sym(&s.y);
        k1 = s.dy;
        out.times.push(t);
        out.metrics.push(y.clone());
        out.derivatives.push(k1.clone());
        h = ode::next_h(hs, s.err).max(if landing.is_some() { h } else { 0.0 });
    }
    Ok(out)
}

/// A named monitor time series.
#[derive(Debug, Clone, Serialize)]
pub struct Channel {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowTrajectory {
    pub kind: FlowKind,
    pub controls: FlowControls,
    pub times: Vec<f64>,
    pub metrics: Vec<InvariantMetric>,
    pub derivatives: Vec<Mat>,
    pub channels: Vec<Channel>,
    /// Whether the initial metric was θ-adapted.
    pub theta_adapted: bool,
    pub unimodular_algebra: bool,
    pub extinction: Option<Extinction>,
    pub stop: StopReason,
    pub block_dims: Vec<usize>,
    pub b0: f64,
    pub lss_dim: usize,
}

impl FlowTrajectory {
    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    fn ch(&self, name: &str) -> &[f64] {
        self.channel(name).unwrap_or_else(|| panic!("monitor channel {name} missing"))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Cubic Hermite interpolation of P at time `t` inside the integrated range.
    pub fn metric_at(&self, t: f64) -> Result<Mat> {
        let n = self.times.len();
        if n == 0 || t < 0.0 || t > self.t_final() + 1e-12 * self.t_final().max(1.0) {
            return Err(Error::InvalidArgument(format!("time {t} outside the integrated range [0, {}]", self.t_final())));
        }
        let i = match self.times.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(i) => return Ok(self.metrics[i].p().clone()),
            Err(i) => i.clamp(1, n - 1),
        };
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let h = t1 - t0;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        Ok(self.metrics[i - 1].p() * h00
            + &self.derivatives[i - 1] * (h10 * h)
            + self.metrics[i].p() * h01
            + &self.derivatives[i] * (h11 * h))
    }
}

struct Recorder {
    names: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl Recorder {
    fn push(&mut self, row: Vec<(String, f64)>) {
        if self.names.is_empty() {
            self.names = row.iter().map(|(n, _)| n.clone()).collect();
            self.values = vec![Vec::new(); row.len()];
        }
        for (k, (_, v)) in row.into_iter().enumerate() {
            self.values[k].push(v);
        }
    }
}

/// Largest eigenvalue of P on `l_ss` and the largest g-unit error term over
/// its eigenspace. Eigenvalues within a relative 1e-6 of the top one are
/// treated as one cluster, since the right derivative of the largest
/// eigenvalue is governed by the worst direction in that cluster.
fn top_l_error(split: &ReductiveSplit, g: &InvariantMetric) -> (f64, f64) {
    let r = split.lss();
    let nss = r.len();
    let p = g.p();
    let (vals, vecs) = sym_eigen(&p.view((r.start, r.start), (nss, nss)).into_owned());
    let glm = vals[nss - 1];
    let top: Vec<usize> = (0..nss).filter(|&i| vals[i] >= glm * (1.0 - 1e-6)).collect();
    let embed = |c: usize| {
        let mut v = Vector::zeros(split.dim_m());
        v.rows_mut(r.start, nss).copy_from(&vecs.column(c));
        v
    };
    let k = top.len();
    let mut q = Mat::zeros(k, k);
    for a in 0..k {
        q[(a, a)] = l_error_term(split, g, &embed(top[a]));
        for b in 0..a {
            let e = l_error_term(split, g, &(embed(top[a]) + embed(top[b])));
            let v = 0.5 * (e - q[(a, a)] - q[(b, b)]);
            q[(a, b)] = v;
            q[(b, a)] = v;
        }
    }
    let (ev, _) = sym_eigen(&q);
    (glm, ev[k - 1].max(0.0) / glm)
}

/// Instantaneous monitor values of one metric.
fn monitor_row(split: &ReductiveSplit, p: &Mat) -> Result<Vec<(String, f64)>> {
    let g = InvariantMetric::new(p.clone())?;
    let rep = ricci(split.space(), &g)?;
    // On adapted metrics the block formula gives ric* on V with roundoff
    // relative to the V-block alone; the general formula carries roundoff
    // of the size of the whole curvature, which dominates near extinction.
    let adapted = check_theta_adapted(split, p) <= TOL_BLOCK * max_abs(p).max(1.0);
    let vblocks = if adapted { Some(ricci_v_block(split, &g)?) } else { None };
    let mut row = Vec::new();
    for (a, r) in split.blocks().into_iter().enumerate() {
        let bf = block_frame(&g, r.clone());
        let d = r.len();
        let rbar: Vec<f64> = match &vblocks {
            Some(vb) => (0..d).map(|i| vb[a].diag[i] * vb[a].g[i]).collect(),
            None => {
                let blk = rep.ric_star.view((r.start, r.start), (d, d)).into_owned();
                (0..d).map(|i| bf.abar.column(i).dot(&(&blk * bf.abar.column(i)))).collect()
            }
        };
        let a = a + 1;
        for i in 0..d {
            row.push((format!("gV{a}_{}", i + 1), bf.g[i]));
        }
        for i0 in 0..d {
            row.push((format!("psum{a}_{}", i0 + 1), bf.g.rows(i0, d - i0).sum()));
        }
        row.push((format!("pinch{a}"), bf.g[d - 1] / bf.g[0]));
        for i0 in 0..d {
            row.push((format!("fbar{a}_{}", i0 + 1), rbar[i0..].iter().sum()));
        }
        for i0 in 0..d {
            row.push((format!("f{a}_{}", i0 + 1), (i0..d).map(|i| rbar[i] / bf.g[i]).sum()));
        }
    }
    let nl = split.l().len();
    if nl > 0 {
        let (vals, _) = sym_eigen(&p.view((split.l().start, split.l().start), (nl, nl)).into_owned());
        for (i, v) in vals.iter().enumerate() {
            row.push((format!("gL_{}", i + 1), *v));
        }
    }
    let nss = split.lss().len();
    if nss > 0 {
        let (glm, bad) = top_l_error(split, &g);
        row.push(("gl_m".into(), glm));
        row.push(("bad_term".into(), bad));
    }
    row.push(("scal".into(), rep.scal));
    row.push(("scal_star".into(), rep.scal_star));
    row.push(("ric_norm_sq".into(), rep.ric_norm_sq));
    row.push(("ric_star_norm_sq".into(), rep.ric_star_norm_sq));
    row.push(("adapted_residual".into(), check_theta_adapted(split, p)));
    row.push(("equivariance_residual".into(), split.space().equivariance_residual(p)));
    Ok(row)
}

fn running_integral(times: &[f64], vals: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vals.len());
    let mut acc = 0.0;
    for i in 0..vals.len() {
        if i > 0 {
            acc += 0.5 * (vals[i] + vals[i - 1]) * (times[i] - times[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Integrates and samples every monitor channel at each accepted step.
pub fn integrate(split: &ReductiveSplit, g0: &InvariantMetric, controls: &FlowControls) -> Result<FlowTrajectory> {
    let raw = integrate_raw(split.space(), g0.p(), controls)?;
    let theta_adapted = check_theta_adapted(split, g0.p()) <= TOL_BLOCK * max_abs(g0.p()).max(1.0);
    let mut rec = Recorder { names: vec![], values: vec![] };
    for p in &raw.metrics {
        rec.push(monitor_row(split, p)?);
    }
    let mut channels: Vec<Channel> =
        rec.names.into_iter().zip(rec.values).map(|(name, values)| Channel { name, values }).collect();
    let integrals: Vec<Channel> = channels
        .iter()
        .filter_map(|c| {
            let stem = if let Some(rest) = c.name.strip_prefix("fbar") {
                format!("Fbar_int{rest}")
            } else if let Some(rest) = c.name.strip_prefix('f') {
                format!("F_int{rest}")
            } else if c.name == "bad_term" {
                "bad_term_int".to_string()
            } else {
                return None;
            };
            Some(Channel { name: stem, values: running_integral(&raw.times, &c.values) })
        })
        .collect();
    channels.extend(integrals);
    Ok(FlowTrajectory {
        kind: controls.kind,
        controls: controls.clone(),
        metrics: raw.metrics.into_iter().map(|p| InvariantMetric::new(p)).collect::<Result<_>>()?,
        derivatives: raw.derivatives,
        times: raw.times,
        channels,
        theta_adapted,
        unimodular_algebra: split.space().trace_m().amax() == 0.0,
        extinction: raw.extinction,
        stop: raw.stop,
        block_dims: split.blocks().iter().map(|r| r.len()).collect(),
        b0: split.b0(),
        lss_dim: split.lss().len(),
    })
}

/// Largest relative gap between a finite-difference `dR/dt` and `2‖Ric‖²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalarEvolution {
    pub max_relative_deviation: f64,
    /// Worst sample time.
    pub at: f64,
    pub samples_used: usize,
}

/// Compares the finite-difference derivative of the scalar curvature (for the
/// unimodular kind: of scal*) with `2‖Ric‖²_g` (resp. `2‖Ric*‖²_g`) at interior
/// samples. Samples whose smallest metric eigenvalue is below `atol/rtol`, where
/// the integrator no longer controls relative accuracy, are skipped.
pub fn verify_scalar_evolution(traj: &FlowTrajectory) -> Result<ScalarEvolution> {
    let n = traj.len();
    if n < 3 {
        return Err(Error::InvalidArgument("scalar evolution check needs at least 3 samples".into()));
    }
    let (s, q) = match traj.kind {
        FlowKind::Ricci => (traj.ch("scal"), traj.ch("ric_norm_sq")),
        FlowKind::Unimodular => (traj.ch("scal_star"), traj.ch("ric_star_norm_sq")),
    };
    let floor = traj.controls.atol / traj.controls.rtol;
    let w = if n >= 5 { 2 } else { 1 };
    let scale = q.iter().fold(0.0_f64, |a, &x| a.max(2.0 * x.abs()));
    let mut worst = 0.0_f64;
    let mut at = 0.0;
    let mut used = 0;
    for i in w..n - w {
        if (i - w..=i + w).any(|j| min_eigenvalue(traj.metrics[j].p()) < floor) {
            continue;
        }
        let xs = &traj.times[i - w..=i + w];
        let wts = fd_weights(traj.times[i], xs);
        let fd: f64 = wts.iter().zip(&s[i - w..=i + w]).map(|(a, b)| a * b).sum();
        let exact = 2.0 * q[i];
        let den = exact.abs().max(1e-12 * scale).max(f64::MIN_POSITIVE);
        let dev = if fd == exact { 0.0 } else { (fd - exact).abs() / den };
        used += 1;
        if dev > worst {
            worst = dev;
            at = traj.times[i];
        }
    }
    Ok(ScalarEvolution { max_relative_deviation: worst, at, samples_used: used })
}

/// Outcome of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation (0 when none).
    pub worst: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub checks: Vec<CheckResult>,
    /// Notes on checks that do not apply to this trajectory.
    pub skipped: Vec<String>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Per-block eigenvalue monotonicity, sign conditions and integral bounds.
///
/// For the Ricci kind on a non-unimodular algebra the V-block also expands
/// along the mean curvature, so only the scale-invariant checks (pinch,
/// signs) are performed.
pub fn verify_monotonicity(traj: &FlowTrajectory) -> MonotonicityReport {
    let c = &traj.controls;
    let step_tol = |v: f64| 10.0 * (c.atol + c.rtol * v.abs());
    let mut checks = Vec::new();
    let mut skipped = Vec::new();
    if !traj.theta_adapted {
        skipped.push("trajectory not started theta-adapted".into());
        return MonotonicityReport { checks, skipped };
    }
    let full = traj.kind == FlowKind::Unimodular || traj.unimodular_algebra;
    if !full {
        skipped.push("eigenvalue and integral bounds need the unimodular flow".into());
    }
    let nonincreasing = |name: String, v: &[f64]| {
        let worst = v.windows(2).map(|w| (w[1] - w[0] - step_tol(w[0])).max(0.0)).fold(0.0, f64::max);
        CheckResult { name, passed: worst == 0.0, worst }
    };
    let nondecreasing = |name: String, v: &[f64]| {
        let worst = v.windows(2).map(|w| (w[0] - w[1] - step_tol(w[0])).max(0.0)).fold(0.0, f64::max);
        CheckResult { name, passed: worst == 0.0, worst }
    };
    for (a, &d) in traj.block_dims.iter().enumerate() {
        let a = a + 1;
        if full {
            checks.push(nonincreasing(format!("gV{a}_{d} nonincreasing"), traj.ch(&format!("gV{a}_{d}"))));
            checks.push(nondecreasing(format!("gV{a}_1 nondecreasing"), traj.ch(&format!("gV{a}_1"))));
            for i0 in 1..=d {
                checks.push(nonincreasing(format!("psum{a}_{i0} nonincreasing"), traj.ch(&format!("psum{a}_{i0}"))));
            }
        }
        checks.push(nonincreasing(format!("pinch{a} nonincreasing"), traj.ch(&format!("pinch{a}"))));
        for i0 in 1..=d {
            for stem in ["fbar", "f"] {
                let v = traj.ch(&format!("{stem}{a}_{i0}"));
                let worst = v.iter().map(|&x| (-x - 1e-10).max(0.0)).fold(0.0, f64::max);
                checks.push(CheckResult { name: format!("{stem}{a}_{i0} >= 0"), passed: worst == 0.0, worst });
            }
        }
        if full {
            let g1 = traj.ch(&format!("gV{a}_1"))[0];
            for i0 in 1..=d {
                let s0 = traj.ch(&format!("psum{a}_{i0}"))[0];
                let tol = 1e-8 * s0.max(1.0);
                let fb = traj.ch(&format!("Fbar_int{a}_{i0}"));
                let worst = fb.iter().map(|&x| (x - 0.5 * s0 - tol).max(0.0)).fold(0.0, f64::max);
                checks.push(CheckResult { name: format!("Fbar_int{a}_{i0} bounded"), passed: worst == 0.0, worst });
                let f = traj.ch(&format!("F_int{a}_{i0}"));
                let bound = 0.5 * s0 / g1;
                let worst = f.iter().map(|&x| (x - bound - tol).max(0.0)).fold(0.0, f64::max);
                checks.push(CheckResult { name: format!("F_int{a}_{i0} bounded"), passed: worst == 0.0, worst });
            }
        }
    }
    MonotonicityReport { checks, skipped }
}

/// Linear extinction barrier for the largest eigenvalue on `l_ss`.
#[derive(Debug, Clone, Serialize)]
pub struct Barrier {
    pub b0: f64,
    pub slope: f64,
    pub glm0: f64,
    /// Running maximum of g^l_m over the whole run.
    pub c0: f64,
    /// Realized correction `C0 · ∫bad/2` at the final time.
    pub c_tilde: f64,
    /// The sharper realized value `∫ g^l_m·bad/2`.
    pub c_tilde_tight: f64,
    pub root: f64,
    /// `max_t (g^l_m(t) − barrier(t))`; ≤ tolerance when certified.
    pub max_violation: f64,
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtinctionReport {
    pub hypothesis_holds: bool,
    pub note: String,
    pub extinction: Option<Extinction>,
    pub glm_running_max: f64,
    pub barrier: Option<Barrier>,
    pub extinct_before_root: Option<bool>,
}

pub fn extinction_analysis(traj: &FlowTrajectory, split: &ReductiveSplit) -> Result<ExtinctionReport> {
    if !traj.theta_adapted {
        return Err(Error::NotAdapted(check_theta_adapted(split, traj.metrics[0].p())));
    }
    if traj.kind != FlowKind::Unimodular && !traj.unimodular_algebra {
        return Err(Error::InvalidArgument("extinction analysis needs the unimodular flow".into()));
    }
    if split.lss().is_empty() {
        return Ok(ExtinctionReport {
            hypothesis_holds: false,
            note: "l_ss = 0: no compact semisimple factor, extinction barrier unavailable; flow may be immortal".into(),
            extinction: traj.extinction,
            glm_running_max: 0.0,
            barrier: None,
            extinct_before_root: None,
        });
    }
    let times = &traj.times;
    let glm = traj.ch("gl_m");
    let bad = traj.ch("bad_term");
    let b0 = split.b0();
    let bad_int = running_integral(times, bad);
    let weighted: Vec<f64> = glm.iter().zip(bad).map(|(g, e)| g * e).collect();
    let tight = running_integral(times, &weighted);
    let mut cmax = 0.0_f64;
    let mut viol = f64::NEG_INFINITY;
    let mut c_tilde = 0.0;
    for i in 0..times.len() {
        cmax = cmax.max(glm[i]);
        c_tilde = cmax * bad_int[i] / 2.0;
        let barrier = glm[0] - 0.5 * b0 * times[i] + c_tilde;
        viol = viol.max(glm[i] - barrier);
    }
    let tol = 1e-8 * glm[0].max(1.0);
    let root = 2.0 * (glm[0] + c_tilde) / b0;
    let certified = viol <= tol;
    let before = traj.extinction.map(|e| certified && e.hi <= root + tol);
    Ok(ExtinctionReport {
        hypothesis_holds: true,
        note: String::new(),
        extinction: traj.extinction,
        glm_running_max: cmax,
        barrier: Some(Barrier {
            b0,
            slope: -0.5 * b0,
            glm0: glm[0],
            c0: cmax,
            c_tilde,
            c_tilde_tight: tight.last().copied().unwrap_or(0.0) / 2.0,
            root,
            max_violation: viol.max(0.0),
            certified,
        }),
        extinct_before_root: before,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowdownSample {
    pub s: f64,
    pub t: f64,
    /// `s⁻¹·P(s·t_ref)`, row-major.
    pub p: Vec<Vec<f64>>,
    /// `‖Ric‖_g` of the rescaled metric.
    pub ric_norm: f64,
    pub scal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowdownReport {
    pub t_ref: f64,
    pub samples: Vec<BlowdownSample>,
    pub ric_norm_decreasing: bool,
    /// `(t, Rscal(g(t))·t)` at every trajectory sample.
    pub scal_times_t: Vec<(f64, f64)>,
    /// `|Rscal·t|` is nonincreasing on `[t_final/10, t_final]` (up to `tol`).
    pub scal_t_decreasing_final_decade: bool,
    pub scal_t_final: f64,
    pub tol: f64,
}

/// Parabolic blowdowns `s⁻¹ g(s·t_ref)`.
pub fn blowdown(traj: &FlowTrajectory, split: &ReductiveSplit, s_values: &[f64], t_ref: f64) -> Result<BlowdownReport> {
    let mut samples = Vec::new();
    for &s in s_values {
        if !(s > 0.0) {
            return Err(Error::InvalidArgument(format!("blowdown factor {s} must be positive")));
        }
        let t = s * t_ref;
        if t > traj.t_final() * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("s = {s} needs t = {t} beyond the integrated range {}", traj.t_final())));
        }
        let p = traj.metric_at(t)? / s;
        let rep = ricci(split.space(), &InvariantMetric::new(p.clone())?)?;
        samples.push(BlowdownSample {
            s,
            t,
            p: crate::linalg::to_rows(&p),
            ric_norm: rep.ric_norm_sq.sqrt(),
            scal: rep.scal,
        });
    }
    let ric_norm_decreasing = samples.windows(2).all(|w| w[1].ric_norm < w[0].ric_norm);
    let scal = traj.ch("scal");
    let scal_times_t: Vec<(f64, f64)> = traj.times.iter().zip(scal).map(|(&t, &r)| (t, r * t)).collect();
    let tf = traj.t_final();
    let tol = 1e-10;
    let tail: Vec<f64> = scal_times_t.iter().filter(|(t, _)| *t >= tf / 10.0).map(|(_, v)| v.abs()).collect();
    let dec = tail.windows(2).all(|w| w[1] <= w[0] + tol);
    Ok(BlowdownReport {
        t_ref,
        samples,
        ric_norm_decreasing,
        scal_t_final: scal_times_t.last().map_or(0.0, |x| x.1),
        scal_times_t,
        scal_t_decreasing_final_decade: dec,
        tol,
    })
}

/// Largest entrywise metric difference at the sample times of `a`
/// (interpolating `b`).
pub fn max_deviation(a: &FlowTrajectory, b: &FlowTrajectory) -> Result<f64> {
    let tb = b.t_final();
    let mut worst = 0.0_f64;
    for (t, m) in a.times.iter().zip(&a.metrics) {
        if *t > tb {
            break;
        }
        worst = worst.max(max_abs(&(m.p() - b.metric_at(*t)?)));
    }
    Ok(worst)
}

/// Column names of [`write_csv`]: `t`, the upper triangle `p_i_j`, then the
/// monitor channels in trajectory order.
pub fn csv_header(traj: &FlowTrajectory) -> Vec<String> {
    let n = traj.metrics.first().map_or(0, |m| m.dim());
    let mut h = vec!["t".to_string()];
    for i in 0..n {
        for j in i..n {
            h.push(format!("p_{i}_{j}"));
        }
    }
    h.extend(traj.channels.iter().map(|c| c.name.clone()));
    h
}

pub fn write_csv(traj: &FlowTrajectory, path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Parse(format!("writing {}: {e}", path.display()));
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let cerr = |e: csv::Error| Error::Parse(format!("writing {}: {e}", path.display()));
    w.write_record(csv_header(traj)).map_err(cerr)?;
    for (k, (t, m)) in traj.times.iter().zip(&traj.metrics).enumerate() {
        let n = m.dim();
        let mut rec = vec![t.to_string()];
        for i in 0..n {
            for j in i..n {
                rec.push(m.p()[(i, j)].to_string());
            }
        }
        rec.extend(traj.channels.iter().map(|c| c.values[k].to_string()));
        w.write_record(&rec).map_err(cerr)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

/// One two-column CSV per channel, plus a gnuplot script plotting them.
pub fn write_plot_data(traj: &FlowTrajectory, dir: &Path, gnuplot: bool) -> Result<()> {
    let io = |e: std::io::Error| Error::Parse(format!("writing plot data: {e}"));
    std::fs::create_dir_all(dir).map_err(io)?;
    for c in &traj.channels {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{}.csv", c.name))).map_err(io)?);
        writeln!(f, "t,{}", c.name).map_err(io)?;
        for (t, v) in traj.times.iter().zip(&c.values) {
            writeln!(f, "{t},{v}").map_err(io)?;
        }
    }
    if gnuplot {
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("plot.gp")).map_err(io)?);
        writeln!(f, "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600").map_err(io)?;
        for c in &traj.channels {
            writeln!(f, "set output '{0}.png'\nplot '{0}.csv' using 1:2 with lines", c.name).map_err(io)?;
        }
    }
    Ok(())
}
