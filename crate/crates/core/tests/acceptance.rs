//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use homflow::curvature::{ricci, ricci_u_block, ricci_v_block, InvariantMetric};
use homflow::deform::{nilsoliton_fit, retract_horizontal, scal_star_terms, submersion_split};
use homflow::flow::{
    blowdown, extinction_analysis, integrate, verify_monotonicity, verify_scalar_evolution, FlowControls, FlowKind,
    FlowTrajectory,
};
use homflow::homspace::check_theta_adapted;
use homflow::linalg::{frob, inverse, max_abs, sym, sym_fn, Mat, Vector};
use homflow::sampling::{random_metric, rng, KAPPA};
use homflow::stability::{is_stable, is_stable_with, moment_map_flow, MomentMapOptions, RepMetricState, Verdict};
use homflow::{catalog, split_u, HomogeneousSpace, LieAlgebra, ReductiveSplit, SemidirectData};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, format!("runtime {:.2} s exceeds {limit_s} s", elapsed.as_secs_f64()))
}

fn split_of(d: &SemidirectData) -> ReductiveSplit {
    split_u(d, &[], &Default::default()).expect("catalog split")
}

fn diag(values: &[f64]) -> InvariantMetric {
    InvariantMetric::new(common::diag(values)).expect("positive diagonal")
}

fn run(split: &ReductiveSplit, g0: &InvariantMetric, controls: &FlowControls) -> Result<FlowTrajectory, String> {
    integrate(split, g0, controls).map_err(|e| e.to_string())
}

fn c1_curvature_oracle() -> Outcome {
    let start = Instant::now();
    let tol = 1e-9;
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (name, d) in [
        ("E1", catalog::e1(1.0)),
        ("E2", catalog::e2()),
        ("E4", catalog::e4()),
        ("E5", catalog::e5(1.0, 2.0)),
    ] {
        let split = split_of(&d);
        let mut r = rng(1000);
        for k in 0..50 {
            let g = InvariantMetric::new(random_metric(&split, &mut r, KAPPA, true)).map_err(|e| e.to_string())?;
            for b in ricci_v_block(&split, &g).map_err(|e| e.to_string())? {
                ensure(b.max_deviation <= tol, format!("{name} metric {k}: V block deviation {:.3e}", b.max_deviation))?;
                worst = worst.max(b.max_deviation);
            }
            let u = ricci_u_block(&split, &g).map_err(|e| e.to_string())?;
            ensure(u.max_deviation <= tol, format!("{name} metric {k}: m_u deviation {:.3e}", u.max_deviation))?;
            ensure(u.l_max_deviation <= tol, format!("{name} metric {k}: l deviation {:.3e}", u.l_max_deviation))?;
            if let Some((value, bound)) = u.top_l {
                ensure(value >= bound - tol, format!("{name} metric {k}: top-l bound {value} < {bound}"))?;
            }
            worst = worst.max(u.max_deviation).max(u.l_max_deviation);
            count += 1;
        }
    }
    // The Heisenberg datum is not stable, so the block formulas do not apply;
    // its general-formula Ricci tensor is checked against the Nomizu oracle.
    let heis = HomogeneousSpace::lie_group(catalog::e3().semidirect().map_err(|e| e.to_string())?);
    let mut r = rng(1003);
    for k in 0..50 {
        let x = Mat::from_fn(3, 3, |_, _| r.sample::<f64, _>(StandardNormal));
        let x = sym(&x);
        let rho = frob(&x);
        let p = sym_fn(&(x * (r.gen_range(0.0..=1.0) * KAPPA.ln() / rho)), f64::exp);
        let rep = ricci(&heis, &InvariantMetric::new(p.clone()).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let o = common::nomizu(&heis, &p);
        let dev = max_abs(&(&rep.ric - &o.ric)).max(max_abs(&(&rep.ric_star - &o.ric_star)));
        ensure(dev <= tol, format!("E3 metric {k}: general vs Nomizu {dev:.3e}"))?;
        worst = worst.max(dev);
        count += 1;
    }
    within(start.elapsed(), 10.0)?;
    Ok(format!("{count} metrics, worst deviation {worst:.2e}; E3 compared with the Nomizu oracle (not stable)"))
}

fn c2_closed_form_extinction() -> Outcome {
    let start = Instant::now();
    let split = split_of(&catalog::e2());
    let c = FlowControls { rtol: 1e-8, t_max: 2.0, ..Default::default() };
    let traj = run(&split, &InvariantMetric::background(3), &c)?;
    let ext = traj.extinction.ok_or("no extinction detected")?;
    ensure((ext.time - 1.0).abs() <= 1e-4, format!("extinction time {}", ext.time))?;
    let mut worst = 0.0_f64;
    for (t, g) in traj.times.iter().zip(&traj.metrics) {
        worst = worst.max(frob(&(g.p() - Mat::identity(3, 3) * (1.0 - t))));
    }
    ensure(worst <= 1e-6, format!("profile deviation {worst:.3e}"))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!("T = {:.10}, max ||g(t) - (1-t)I|| = {worst:.2e} over {} samples", ext.time, traj.len()))
}

fn c3_flow_invariance() -> Outcome {
    let mut report = Vec::new();
    for (name, d, g0) in [
        ("E1", catalog::e1(1.0), diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0])),
        ("E5", catalog::e5(1.0, 2.0), diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.5, 0.5])),
    ] {
        let split = split_of(&d);
        let mut r = rng(3);
        let random = InvariantMetric::new(random_metric(&split, &mut r, KAPPA, true)).map_err(|e| e.to_string())?;
        for (label, g) in [("diagonal", &g0), ("random", &random)] {
            for kind in [FlowKind::Ricci, FlowKind::Unimodular] {
                let traj = run(&split, g, &FlowControls { kind, t_max: 2.0, ..Default::default() })?;
                let res = traj.channel("adapted_residual").ok_or("missing adapted_residual")?;
                let worst = res.iter().fold(0.0_f64, |a, &b| a.max(b));
                ensure(worst <= 1e-8, format!("{name} {label} {kind:?}: residual {worst:.3e}"))?;
                // the stored metrics are re-measured independently of the monitor
                let direct = traj.metrics.iter().map(|m| check_theta_adapted(&split, m.p())).fold(0.0, f64::max);
                ensure(direct <= 1e-8, format!("{name} {label} {kind:?}: stored metrics {direct:.3e}"))?;
                report.push(format!("{name}/{label}/{kind:?} {worst:.1e}"));
            }
        }
    }
    Ok(format!("max off-block residuals: {}", report.join(", ")))
}

fn c4_monotonicity() -> Outcome {
    let split = split_of(&catalog::e1(1.0));
    let g0 = diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0]);
    let mut lines = Vec::new();
    for kind in [FlowKind::Unimodular, FlowKind::Ricci] {
        let traj = run(&split, &g0, &FlowControls { kind, ..Default::default() })?;
        let rep = verify_monotonicity(&traj);
        let failed: Vec<String> =
            rep.checks.iter().filter(|c| !c.passed).map(|c| format!("{} ({:.2e})", c.name, c.worst)).collect();
        ensure(failed.is_empty(), format!("{kind:?}: {}", failed.join("; ")))?;
        lines.push(format!("{kind:?}: {} checks over {} samples", rep.checks.len(), traj.len()));
        if !rep.skipped.is_empty() {
            lines.push(format!("{kind:?} skipped: {}", rep.skipped.join("; ")));
        }
    }
    Ok(lines.join("; "))
}

fn c5_finite_extinction() -> Outcome {
    let start = Instant::now();
    let split = split_of(&catalog::e1(1.0));
    let g0 = diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0]);
    let traj = run(&split, &g0, &FlowControls { kind: FlowKind::Unimodular, t_max: 20.0, ..Default::default() })?;
    let rep = extinction_analysis(&traj, &split).map_err(|e| e.to_string())?;
    let ext = rep.extinction.ok_or("no extinction detected")?;
    let barrier = rep.barrier.ok_or("barrier unavailable")?;
    ensure((barrier.slope + 1.0).abs() <= 1e-12, format!("slope {}", barrier.slope))?;
    ensure(barrier.certified, format!("barrier violated by {:.3e}", barrier.max_violation))?;
    ensure(rep.extinct_before_root == Some(true), format!("extinction {} after barrier root {}", ext.hi, barrier.root))?;
    ensure(ext.hi - ext.lo <= 1e-6, format!("bracket width {:.3e}", ext.hi - ext.lo))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "T in [{:.10}, {:.10}] (width {:.1e}), b0 = {}, C~ = {:.4}, barrier root {:.4}, {:.1} s",
        ext.lo,
        ext.hi,
        ext.hi - ext.lo,
        barrier.b0,
        barrier.c_tilde,
        barrier.root,
        start.elapsed().as_secs_f64()
    ))
}

fn c6_preflat_blowdown() -> Outcome {
    let split = split_of(&catalog::e4());
    let g0 = diag(&[1.0, 1.0, 4.0]);
    let c = FlowControls { t_max: 200.0, h_max: 0.25, ..Default::default() };
    let traj = run(&split, &g0, &c)?;
    ensure((traj.t_final() - 200.0).abs() < 1e-9, format!("stopped at t = {}", traj.t_final()))?;
    let rep = blowdown(&traj, &split, &[1.0, 2.0, 4.0, 8.0, 16.0], 1.0).map_err(|e| e.to_string())?;
    ensure(rep.scal_t_decreasing_final_decade, "Rscal*t not decreasing on the final decade")?;
    ensure(rep.scal_t_final.abs() < 0.05, format!("Rscal*t = {} at t_max", rep.scal_t_final))?;
    let norms: Vec<String> = rep.samples.iter().map(|s| format!("{:.1e}", s.ric_norm)).collect();
    ensure(rep.ric_norm_decreasing, format!("blowdown Ricci norms not decreasing: {}", norms.join(", ")))?;
    Ok(format!("Rscal*t(200) = {:.2e}; |Ric| over s = 1..16: {}", rep.scal_t_final, norms.join(", ")))
}

fn c7_scalar_evolution() -> Outcome {
    let mut lines = Vec::new();
    for (name, d, g0) in [
        ("E1", catalog::e1(1.0), diag(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 4.0])),
        ("E2", catalog::e2(), diag(&[1.0, 1.0, 2.0])),
    ] {
        let split = split_of(&d);
        for kind in [FlowKind::Ricci, FlowKind::Unimodular] {
            let traj = run(&split, &g0, &FlowControls { kind, ..Default::default() })?;
            let ev = verify_scalar_evolution(&traj).map_err(|e| e.to_string())?;
            ensure(
                ev.max_relative_deviation <= 1e-3,
                format!("{name} {kind:?}: deviation {:.3e} at t = {}", ev.max_relative_deviation, ev.at),
            )?;
            lines.push(format!("{name}/{kind:?} {:.1e} ({} samples)", ev.max_relative_deviation, ev.samples_used));
        }
    }
    Ok(format!("max relative deviation of dR/dt from 2|Ric|^2: {}", lines.join(", ")))
}

fn c8_stability() -> Outcome {
    // normal family conjugated by a random P with condition number 10
    let d = catalog::e5(1.0, 2.0);
    let mut r = rng(8);
    let o = Mat::from_fn(6, 6, |_, _| r.sample::<f64, _>(StandardNormal)).qr().q();
    let ev: Vec<f64> = (0..6).map(|i| 10f64.powf(i as f64 / 5.0)).collect();
    let p = &o * Mat::from_diagonal(&Vector::from_vec(ev)) * o.transpose();
    let pinv = inverse(&p).map_err(|e| e.to_string())?;
    let th: Vec<Mat> = d.theta().iter().map(|t| &p * t * &pinv).collect();
    let st = RepMetricState::new(th, Mat::identity(6, 6)).map_err(|e| e.to_string())?;
    let opts = MomentMapOptions::default();
    let v = is_stable_with(&st, &opts).map_err(|e| e.to_string())?;
    ensure(v.verdict == Verdict::Stable, format!("conjugated normal family: {}", v.reason))?;
    ensure(v.residual <= 1e-8, format!("recovery residual {:.3e}", v.residual))?;
    let path = moment_map_flow(&st, &opts).map_err(|e| e.to_string())?;
    ensure(path.trace_drift <= 1e-10, format!("trace drift {:.3e}", path.trace_drift))?;
    ensure(path.max_norm_increase == 0.0, format!("norm increased by {:.3e}", path.max_norm_increase))?;

    let jordan = SemidirectData::new(LieAlgebra::abelian(1), 2, vec![Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])])
        .map_err(|e| e.to_string())?;
    let jv = is_stable(&jordan).map_err(|e| e.to_string())?;
    ensure(jv.verdict == Verdict::NotStable && jv.reason.starts_with("unstable orbit"), format!("Jordan block: {}", jv.reason))?;

    let e1 = is_stable(&catalog::e1(1.0)).map_err(|e| e.to_string())?;
    ensure(e1.verdict == Verdict::Stable, format!("E1: {}", e1.reason))?;
    ensure(max_abs(&(&e1.witness - Mat::identity(3, 3))) == 0.0, "E1 witness is not the identity")?;
    Ok(format!(
        "recovery residual {:.1e} (drift {:.1e}, {} steps); Jordan: {}; E1 stable at Q = I",
        v.residual, path.trace_drift, v.steps, jv.reason
    ))
}

fn c9_deform() -> Outcome {
    let split = split_of(&catalog::e1(1.0));
    let mut worst_quad = 0.0_f64;
    let mut min_phi = f64::INFINITY;
    for seed in 0..20 {
        let p = random_metric(&split, &mut rng(900 + seed), KAPPA, false);
        let ss = submersion_split(&split, &InvariantMetric::new(p).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let phi = max_abs(&ss.phi);
        ensure(phi > 1e-3, format!("seed {seed}: phi vanishes"))?;
        min_phi = min_phi.min(phi);
        let oneill0 = scal_star_terms(&split, &ss).map_err(|e| e.to_string())?.oneill;
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let g = retract_horizontal(&ss, t).map_err(|e| e.to_string())?;
            let scal_star = ricci(split.space(), &g).map_err(|e| e.to_string())?.scal_star;
            ensure(
                scal_star >= prev - 1e-12 * scal_star.abs().max(1.0),
                format!("seed {seed}: Rscal* decreased at t = {t}: {prev} -> {scal_star}"),
            )?;
            prev = scal_star;
            let terms = scal_star_terms(&split, &submersion_split(&split, &g).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
            let dev = (terms.oneill - (1.0 - t).powi(2) * oneill0).abs() / oneill0.abs().max(1.0);
            worst_quad = worst_quad.max(dev);
        }
    }
    ensure(worst_quad <= 1e-10, format!("O'Neill term deviates from (1-t)^2 scaling by {worst_quad:.3e}"))?;
    let fit = nilsoliton_fit(&LieAlgebra::heisenberg(), &Mat::identity(3, 3)).map_err(|e| e.to_string())?;
    let d_dev = max_abs(&(&fit.d - common::diag(&[1.0, 1.0, 2.0])));
    ensure((fit.c + 1.5).abs() <= 1e-10 && d_dev <= 1e-10, format!("nilsoliton c = {}, D deviation {d_dev:.3e}", fit.c))?;
    ensure(fit.residual <= 1e-10, format!("nilsoliton residual {:.3e}", fit.residual))?;
    Ok(format!(
        "20 metrics (min |phi| {min_phi:.2}), O'Neill quadratic to {worst_quad:.1e}; Heisenberg c = {}, residual {:.1e}",
        fit.c, fit.residual
    ))
}

fn c10_equivalence() -> Outcome {
    let split = split_of(&catalog::e4());
    let g0 = diag(&[1.0, 1.0, 4.0]);
    let times: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();
    let base = FlowControls { t_max: 10.0, sample_times: times.clone(), ..Default::default() };
    let a = run(&split, &g0, &FlowControls { kind: FlowKind::Ricci, ..base.clone() })?;
    let b = run(&split, &g0, &FlowControls { kind: FlowKind::Unimodular, ..base.clone() })?;
    let at = |traj: &FlowTrajectory, t: f64| {
        traj.times.iter().position(|&s| s == t).map(|i| traj.metrics[i].p().clone()).ok_or(format!("t = {t} not landed"))
    };
    let mut worst = 0.0_f64;
    for &t in &times {
        worst = worst.max(max_abs(&(at(&a, t)? - at(&b, t)?)));
    }
    ensure(worst <= 10.0 * base.rtol, format!("deviation {worst:.3e}"))?;
    Ok(format!("max deviation {worst:.1e} at {} matched times (limit {:.0e})", times.len(), 10.0 * base.rtol))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("curvature oracle agreement", c1_curvature_oracle),
        ("closed-form extinction", c2_closed_form_extinction),
        ("flow invariance of adapted metrics", c3_flow_invariance),
        ("monotonicity suite", c4_monotonicity),
        ("finite extinction with certified barrier", c5_finite_extinction),
        ("preflat blowdown", c6_preflat_blowdown),
        ("scalar evolution", c7_scalar_evolution),
        ("stability toolkit", c8_stability),
        ("deform suite", c9_deform),
        ("equivalence cross-check", c10_equivalence),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} ({name}): {detail} [{secs:.2} s]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL criterion {:>2} ({name}): {detail} [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
