//! The experiment pipeline: resolve, split, integrate, verify, write.
//!
//! Every stage has a name; the first failing stage is recorded in
//! `summary.json` and in a `FAILED` marker file next to whatever artifacts
//! were already written.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use homflow::curvature::{ricci, ricci_u_block, ricci_v_block, scalar_curvatures, InvariantMetric};
use homflow::deform::{nilsoliton_fit, retract_horizontal, scal_star_terms, submersion_split};
use homflow::flow::{self, blowdown, extinction_analysis, verify_monotonicity, verify_scalar_evolution, FlowKind};
use homflow::homspace::{check_theta_adapted, TOL_BLOCK};
use homflow::linalg::{max_abs, to_rows, Mat};
use homflow::sampling::{random_metric, rng, KAPPA};
use homflow::stability::{is_stable, Verdict};
use homflow::{split_u, FlowTrajectory, ReductiveSplit};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MetricKind, ResolvedSpace};

pub const SCHEMA_VERSION: u32 = 1;

/// Checks that need a trajectory.
const FLOW_CHECKS: [&str; 6] =
    ["theta-adapted-invariance", "equivariance", "monotonicity", "scalar-evolution", "extinction", "blowdown"];
/// Checks that run on the representation alone, before the split.
const ALGEBRA_CHECKS: [&str; 2] = ["stability", "nilsoliton"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    ChecksFailed,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ChecksFailed => 1,
            Status::Failed => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub status: CheckStatus,
    pub note: String,
    pub details: Value,
}

impl CheckOutcome {
    fn verdict(name: &str, pass: bool, note: impl Into<String>, details: Value) -> Self {
        CheckOutcome {
            name: name.into(),
            status: if pass { CheckStatus::Pass } else { CheckStatus::Fail },
            note: note.into(),
            details,
        }
    }

    fn skipped(name: &str, note: impl Into<String>) -> Self {
        CheckOutcome { name: name.into(), status: CheckStatus::Skipped, note: note.into(), details: Value::Null }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpaceSummary {
    pub name: String,
    pub dim_g: usize,
    pub dim_h: usize,
    pub dim_m: usize,
    pub m_labels: Vec<String>,
    pub block_dims: Vec<usize>,
    pub lss_dim: usize,
    pub b0: f64,
    pub unimodular: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowSummary {
    pub kind: FlowKind,
    pub samples: usize,
    pub t_final: f64,
    pub stop: flow::StopReason,
    pub extinction_time: Option<f64>,
    pub extinction_bracket: Option<[f64; 2]>,
    pub theta_adapted: bool,
    pub initial_metric: Vec<Vec<f64>>,
    pub final_metric: Vec<Vec<f64>>,
    pub final_scal: f64,
    pub final_scal_star: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub status: Status,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub seed: Option<u64>,
    pub config: ExperimentConfig,
    pub space: Option<SpaceSummary>,
    pub flow: Option<FlowSummary>,
    pub checks: Vec<CheckOutcome>,
}

struct StageError {
    stage: String,
    error: anyhow::Error,
}

trait Staged<T> {
    fn stage(self, name: &str) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<anyhow::Error>> Staged<T> for std::result::Result<T, E> {
    fn stage(self, name: &str) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError { stage: name.into(), error: e.into() })
    }
}

/// Config validation including the checks that need the split (block
/// dimensions of a block metric). Returns the resolved space.
pub fn validate(cfg: &ExperimentConfig) -> Result<ResolvedSpace> {
    let space = cfg.validate()?;
    let needs_flow: Vec<&str> = cfg.checks.run.iter().map(String::as_str).filter(|c| FLOW_CHECKS.contains(c)).collect();
    if cfg.flow.is_none() && !needs_flow.is_empty() {
        bail!("checks {} need a [flow] table", needs_flow.join(", "));
    }
    if cfg.metric.kind == MetricKind::Blocks {
        let split = split_u(&space.data, &space.h_basis, &Default::default()).context("split for block metric")?;
        cfg.metric.build(&space, split.dim_m(), &block_sizes(&split))?;
    }
    if cfg.sweep.is_some() {
        for (label, point) in cfg.expand() {
            point.validate().with_context(|| format!("sweep point {}", label.unwrap_or_default()))?;
        }
    }
    Ok(space)
}

fn block_sizes(split: &ReductiveSplit) -> Vec<usize> {
    let mut b = vec![split.mu().len()];
    b.extend(split.blocks().iter().map(|r| r.len()));
    b
}

fn needs_split(cfg: &ExperimentConfig) -> bool {
    cfg.flow.is_some()
        || matches!(cfg.metric.kind, MetricKind::Blocks | MetricKind::Random)
        || cfg.checks.run.iter().any(|c| !ALGEBRA_CHECKS.contains(&c.as_str()))
}

/// Runs one experiment and writes its artifacts into `out`. The returned
/// summary has already been written; `Err` is reserved for failures to write
/// the artifacts themselves.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<Summary> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let marker = out.join("FAILED");
    if marker.exists() {
        fs::remove_file(&marker)?;
    }
    let mut cfg = cfg.clone();
    if let Some(s) = seed {
        cfg.metric.seed = Some(s);
    }
    let mut summary = Summary {
        schema_version: SCHEMA_VERSION,
        status: Status::Ok,
        failed_stage: None,
        error: None,
        seed: cfg.metric.seed,
        config: cfg.clone(),
        space: None,
        flow: None,
        checks: vec![],
    };
    if let Err(e) = pipeline(&cfg, out, &mut summary) {
        summary.status = Status::Failed;
        summary.failed_stage = Some(e.stage.clone());
        summary.error = Some(format!("{:#}", e.error));
        fs::write(&marker, format!("stage: {}\nerror: {:#}\n", e.stage, e.error))?;
    } else if summary.checks.iter().any(|c| c.status == CheckStatus::Fail) {
        summary.status = Status::ChecksFailed;
    }
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out.join("summary.json"), text)?;
    Ok(summary)
}

fn pipeline(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> std::result::Result<(), StageError> {
    let space = validate(cfg).stage("config-validate")?;
    let mut outcomes: Vec<CheckOutcome> = Vec::new();
    let requested = |name: &str| cfg.checks.run.iter().any(|c| c == name);

    if requested("stability") {
        outcomes.push(check_stability(&space).stage("check:stability")?);
    }
    if requested("nilsoliton") {
        outcomes.push(check_nilsoliton(cfg, &space).stage("check:nilsoliton")?);
    }
    if needs_split(cfg) {
        let split = split_u(&space.data, &space.h_basis, &Default::default()).stage("split")?;
        summary.space = Some(space_summary(&space, &split));
        let g0 = initial_metric(cfg, &space, &split).stage("metric")?;
        let traj = match &cfg.flow {
            Some(controls) => {
                let traj = flow::integrate(&split, &g0, controls).stage("flow")?;
                summary.flow = Some(flow_summary(&traj));
                write_trajectory(cfg, &traj, out).stage("output")?;
                Some(traj)
            }
            None => None,
        };
        for name in &cfg.checks.run {
            if ALGEBRA_CHECKS.contains(&name.as_str()) {
                continue;
            }
            let stage = format!("check:{name}");
            let outcome = match traj.as_ref() {
                Some(t) if FLOW_CHECKS.contains(&name.as_str()) => flow_check(cfg, name, &split, t).stage(&stage)?,
                _ => metric_check(name, &split, &g0).stage(&stage)?,
            };
            outcomes.push(outcome);
        }
    }
    // report in the configured order
    let order = |o: &CheckOutcome| cfg.checks.run.iter().position(|c| *c == o.name).unwrap_or(usize::MAX);
    outcomes.sort_by_key(order);
    summary.checks = outcomes;
    Ok(())
}

fn space_summary(space: &ResolvedSpace, split: &ReductiveSplit) -> SpaceSummary {
    SpaceSummary {
        name: space.name.clone(),
        dim_g: space.data.dim_u() + space.data.dim_v(),
        dim_h: split.dim_h(),
        dim_m: split.dim_m(),
        m_labels: split.m_labels(),
        block_dims: split.blocks().iter().map(|r| r.len()).collect(),
        lss_dim: split.lss().len(),
        b0: split.b0(),
        unimodular: split.space().trace_m().iter().all(|&x| x == 0.0),
    }
}

fn initial_metric(cfg: &ExperimentConfig, space: &ResolvedSpace, split: &ReductiveSplit) -> Result<InvariantMetric> {
    let m = &cfg.metric;
    let p = if m.kind == MetricKind::Random {
        let kappa = m.kappa.unwrap_or(KAPPA);
        if !(kappa >= 1.0) {
            bail!("metric: kappa must be at least 1");
        }
        random_metric(split, &mut rng(m.seed.unwrap_or(0)), kappa, m.adapted.unwrap_or(true))
    } else {
        m.build(space, split.dim_m(), &block_sizes(split))?
    };
    Ok(InvariantMetric::on(split.space(), p)?)
}

fn flow_summary(traj: &FlowTrajectory) -> FlowSummary {
    let last = |name: &str| traj.channel(name).and_then(|v| v.last().copied()).unwrap_or(f64::NAN);
    FlowSummary {
        kind: traj.kind,
        samples: traj.len(),
        t_final: traj.t_final(),
        stop: traj.stop,
        extinction_time: traj.extinction.map(|e| e.time),
        extinction_bracket: traj.extinction.map(|e| [e.lo, e.hi]),
        theta_adapted: traj.theta_adapted,
        initial_metric: to_rows(traj.metrics[0].p()),
        final_metric: to_rows(traj.metrics[traj.len() - 1].p()),
        final_scal: last("scal"),
        final_scal_star: last("scal_star"),
    }
}

fn write_trajectory(cfg: &ExperimentConfig, traj: &FlowTrajectory, out: &Path) -> Result<()> {
    if cfg.outputs.trajectory_csv {
        flow::write_csv(traj, &out.join("trajectory.csv"))?;
    }
    if cfg.outputs.plots {
        flow::write_plot_data(traj, &out.join("plots"), cfg.outputs.gnuplot)?;
    }
    Ok(())
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b))
}

fn channel<'a>(traj: &'a FlowTrajectory, name: &str) -> Result<&'a [f64]> {
    traj.channel(name).ok_or_else(|| anyhow!("monitor channel {name} missing"))
}

fn flow_check(cfg: &ExperimentConfig, name: &str, split: &ReductiveSplit, traj: &FlowTrajectory) -> Result<CheckOutcome> {
    let not_adapted = "not applicable: initial metric is not theta-adapted";
    Ok(match name {
        "theta-adapted-invariance" => {
            if !traj.theta_adapted {
                return Ok(CheckOutcome::skipped(name, not_adapted));
            }
            let worst = max_of(channel(traj, "adapted_residual")?);
            CheckOutcome::verdict(name, worst <= 1e-8, "", json!({ "max_residual": worst, "tol": 1e-8 }))
        }
        "equivariance" => {
            let worst = max_of(channel(traj, "equivariance_residual")?);
            let note = if split.dim_h() == 0 { "h = 0: equivariance is vacuous" } else { "" };
            CheckOutcome::verdict(name, worst <= 1e-8, note, json!({ "max_residual": worst, "tol": 1e-8 }))
        }
        "monotonicity" => {
            if !traj.theta_adapted {
                return Ok(CheckOutcome::skipped(name, not_adapted));
            }
            let rep = verify_monotonicity(traj);
            CheckOutcome::verdict(name, rep.passed(), rep.skipped.join("; "), serde_json::to_value(&rep.checks)?)
        }
        "scalar-evolution" => {
            let ev = verify_scalar_evolution(traj)?;
            let tol = cfg.checks.scalar_evolution_tol;
            let mut d = serde_json::to_value(ev)?;
            d["tol"] = json!(tol);
            CheckOutcome::verdict(name, ev.max_relative_deviation <= tol, "", d)
        }
        "extinction" => {
            if !traj.theta_adapted {
                return Ok(CheckOutcome::skipped(name, not_adapted));
            }
            if traj.kind != FlowKind::Unimodular && !traj.unimodular_algebra {
                return Ok(CheckOutcome::skipped(name, "not applicable: needs the unimodular flow kind"));
            }
            let rep = extinction_analysis(traj, split)?;
            if !rep.hypothesis_holds {
                return Ok(CheckOutcome::skipped(name, rep.note));
            }
            let pass = rep.extinction.is_some()
                && rep.barrier.as_ref().is_some_and(|b| b.certified)
                && rep.extinct_before_root == Some(true);
            let note = if rep.extinction.is_none() { "no extinction before t_max" } else { "" };
            CheckOutcome::verdict(name, pass, note, serde_json::to_value(&rep)?)
        }
        "blowdown" => {
            let rep = blowdown(traj, split, &cfg.checks.blowdown_s, cfg.checks.blowdown_t_ref)?;
            let pass = rep.ric_norm_decreasing && rep.scal_t_decreasing_final_decade;
            let d = json!({
                "t_ref": rep.t_ref,
                "ric_norm": rep.samples.iter().map(|s| json!({ "s": s.s, "t": s.t, "ric_norm": s.ric_norm, "scal": s.scal })).collect::<Vec<_>>(),
                "ric_norm_decreasing": rep.ric_norm_decreasing,
                "scal_t_decreasing_final_decade": rep.scal_t_decreasing_final_decade,
                "scal_t_final": rep.scal_t_final,
            });
            CheckOutcome::verdict(name, pass, "", d)
        }
        other => bail!("{other} is not a trajectory check"),
    })
}

fn metric_check(name: &str, split: &ReductiveSplit, g0: &InvariantMetric) -> Result<CheckOutcome> {
    Ok(match name {
        "curvature-blocks" => {
            let res = check_theta_adapted(split, g0.p());
            if res > TOL_BLOCK {
                return Ok(CheckOutcome::skipped(name, "not applicable: initial metric is not theta-adapted"));
            }
            let tol = 1e-9;
            let v: Vec<f64> = ricci_v_block(split, g0)?.iter().map(|b| b.max_deviation).collect();
            let u = ricci_u_block(split, g0)?;
            let top_ok = u.top_l.map_or(true, |(val, bound)| val >= bound - tol);
            let pass = max_of(&v) <= tol && u.max_deviation <= tol && u.l_max_deviation <= tol && top_ok;
            let d = json!({
                "v_block_deviation": v,
                "m_u_deviation": u.max_deviation,
                "l_deviation": u.l_max_deviation,
                "top_l": u.top_l.map(|(val, bound)| json!({ "ric_star": val, "lower_bound": bound })),
                "tol": tol,
            });
            CheckOutcome::verdict(name, pass, "", d)
        }
        "scalar-consistency" => {
            let s = scalar_curvatures(split, g0)?;
            let tol = 1e-9 * s.scal.abs().max(1.0);
            CheckOutcome::verdict(name, s.consistency <= tol, "", serde_json::to_value(s)?)
        }
        "deform" => {
            let ss = submersion_split(split, g0)?;
            let oneill0 = scal_star_terms(split, &ss)?.oneill;
            let mut rows = Vec::new();
            let mut monotone = true;
            let mut quad = 0.0_f64;
            let mut prev = f64::NEG_INFINITY;
            for k in 0..=10 {
                let t = k as f64 / 10.0;
                let g = retract_horizontal(&ss, t)?;
                let scal_star = ricci(split.space(), &g)?.scal_star;
                monotone &= scal_star >= prev - 1e-12 * scal_star.abs().max(1.0);
                prev = scal_star;
                let terms = scal_star_terms(split, &submersion_split(split, &g)?)?;
                quad = quad.max((terms.oneill - (1.0 - t).powi(2) * oneill0).abs() / oneill0.abs().max(1.0));
                rows.push(json!({ "t": t, "scal_star": scal_star, "oneill": terms.oneill }));
            }
            let phi = max_abs(&ss.phi);
            let note = if phi == 0.0 { "phi = 0: the retraction is constant" } else { "" };
            let d = json!({ "phi_max": phi, "grid": rows, "oneill_quadratic_deviation": quad, "phi_equivariance": ss.phi_equivariance });
            CheckOutcome::verdict(name, monotone && quad <= 1e-10, note, d)
        }
        other => bail!("check {other} needs a [flow] table"),
    })
}

fn check_stability(space: &ResolvedSpace) -> Result<CheckOutcome> {
    let v = is_stable(&space.data)?;
    let pass = v.verdict == Verdict::Stable;
    Ok(CheckOutcome::verdict("stability", pass, v.reason.clone(), serde_json::to_value(&v)?))
}

fn check_nilsoliton(cfg: &ExperimentConfig, space: &ResolvedSpace) -> Result<CheckOutcome> {
    let g = space.data.semidirect()?;
    if !g.is_nilpotent() {
        return Ok(CheckOutcome::skipped("nilsoliton", "not applicable: the algebra is not nilpotent"));
    }
    if !space.h_basis.is_empty() {
        return Ok(CheckOutcome::skipped("nilsoliton", "not applicable: needs h = 0"));
    }
    let n = g.dim();
    let p: Mat = match cfg.metric.kind {
        MetricKind::Background | MetricKind::Diag | MetricKind::Dense | MetricKind::Suggested => {
            cfg.metric.build(space, n, &[])?
        }
        _ => bail!("nilsoliton check takes a background, diag, dense or suggested metric on g"),
    };
    let fit = nilsoliton_fit(&g, &p)?;
    let pass = fit.residual <= 1e-10;
    Ok(CheckOutcome::verdict("nilsoliton", pass, "", serde_json::to_value(&fit)?))
}

/// `catalog show`: the representation, its split and suggested metrics.
pub fn describe(space: &ResolvedSpace) -> Value {
    let split = split_u(&space.data, &space.h_basis, &Default::default());
    let stability = is_stable(&space.data).ok();
    json!({
        "name": space.name,
        "data": serde_json::to_value(&space.data).unwrap_or(Value::Null),
        "h_basis": space.h_basis,
        "suggested_metrics": space.suggested,
        "stability": stability.map(|v| json!({ "verdict": v.verdict, "reason": v.reason })),
        "split": match &split {
            Ok(s) => json!({
                "m_labels": s.m_labels(),
                "block_dims": s.blocks().iter().map(|r| r.len()).collect::<Vec<_>>(),
                "lss_dim": s.lss().len(),
                "b0": s.b0(),
                "layout": s.text(),
            }),
            Err(e) => json!({ "error": e.to_string() }),
        },
    })
}
