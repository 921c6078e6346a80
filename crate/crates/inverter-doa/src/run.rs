//! Runs study points, alone or as a parallel sweep.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use inverter_doa_core::dynamics::FullOrderCheck;
use inverter_doa_core::manifold::{contains, DoaBoundary, Point};
use inverter_doa_core::metrics::StabilityReport;
use inverter_doa_core::pipeline::{analyze_scenario, gsp_gfm_convergence, ConvergencePoint, Outcome};
use inverter_doa_core::{
    integrate, Direction, Equilibrium, FaultSpec, InverterKind, IntegratorSettings, LimitCycle, ManifoldBranch, Model,
    RhsMode, State2, TwoInverterSystem,
};
use serde::Serialize;
use serde_json::Value;

use crate::basin::{basin_agreement, grid_samples, random_samples, BasinSummary};
use crate::error::{Error, Result};
use crate::study::{Study, StudyPoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibria {
    pub prefault: Vec<Equilibrium>,
    pub fault_on: Vec<Equilibrium>,
    pub postfault: Vec<Equilibrium>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoaSummary {
    pub is_bounded: bool,
    pub vertices: usize,
    pub branches: usize,
    pub area: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub period: f64,
    pub winding: (i32, i32),
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingSummary {
    pub clearing_time: f64,
    /// Post-fault state ends inside the DOA (or, without a DOA, at the SEP).
    pub stable: bool,
    pub final_state: Point,
}

/// Geometry kept for CSV and SVG export; not part of the JSON report.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub doa: Option<DoaBoundary>,
    pub fault_on_trajectory: Vec<(f64, Point)>,
    /// One fault-on plus post-fault trajectory per clearing time.
    pub clearing_trajectories: Vec<Vec<(f64, Point)>>,
    pub limit_cycle: Option<LimitCycle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointResult {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub system: TwoInverterSystem,
    pub fault: FaultSpec,
    pub fault_on_system: TwoInverterSystem,
    pub postfault_system: TwoInverterSystem,
    pub outcome: Outcome,
    pub equilibria: Equilibria,
    pub pre_sep: Option<State2>,
    pub post_sep: Option<State2>,
    pub report: Option<StabilityReport>,
    pub doa: Option<DoaSummary>,
    pub limit_cycle: Option<CycleSummary>,
    pub full_order: Option<FullOrderCheck>,
    pub clearing: Vec<ClearingSummary>,
    pub basin: Option<BasinSummary>,
    #[serde(skip)]
    pub artifacts: Artifacts,
}

impl PointResult {
    pub fn branches(&self) -> &[ManifoldBranch] {
        self.artifacts.doa.as_ref().map_or(&[], |d| &d.branches)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_s: f64,
    pub point_s: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub name: String,
    pub study_sha256: String,
    /// The study with all defaults and overrides applied.
    pub study: Value,
    pub points: Vec<PointResult>,
    pub convergence: Option<Vec<ConvergencePoint>>,
    /// Wall-clock data; the only part of the report that varies between runs.
    pub timing: Timing,
}

fn trajectory_settings(s: &IntegratorSettings, t_max: f64) -> IntegratorSettings {
    IntegratorSettings { t_max, domain_box: f64::INFINITY, max_arc_length: f64::INFINITY, ..*s }
}

fn clearing_run(
    on: &Model,
    post: &Model,
    x0: Point,
    tc: f64,
    horizon: f64,
    settings: &IntegratorSettings,
) -> inverter_doa_core::Result<Vec<(f64, Point)>> {
    let mut samples = vec![(0.0, x0)];
    let mut x = x0;
    if tc > 0.0 {
        let tr = integrate(on, x0, &trajectory_settings(settings, tc), Direction::Forward)?;
        x = tr.last().1;
        samples.extend(tr.samples.into_iter().skip(1));
    }
    let tr = integrate(post, x, &trajectory_settings(settings, horizon), Direction::Forward)?;
    samples.extend(tr.samples.into_iter().skip(1).map(|(t, y)| (t + tc, y)));
    Ok(samples)
}

/// Runs the full pipeline on one resolved point. Physical and numerical
/// failures are recorded in `outcome`.
pub fn run_point(study: &Study, point: &StudyPoint) -> Result<PointResult> {
    let opts = study.options();
    let o = analyze_scenario(&point.system, &point.fault, &opts)?;
    let mut r = PointResult {
        index: point.index,
        sweep_value: point.sweep_value,
        system: point.system,
        fault: point.fault,
        fault_on_system: o.fault_on,
        postfault_system: o.postfault,
        outcome: o.outcome,
        equilibria: Equilibria {
            prefault: o.prefault_equilibria,
            fault_on: o.fault_on_equilibria,
            postfault: o.postfault_equilibria,
        },
        pre_sep: o.pre_sep,
        post_sep: o.post_sep,
        report: o.report,
        doa: o.doa.as_ref().map(|d| DoaSummary {
            is_bounded: d.is_bounded,
            vertices: d.closed_polygon.len(),
            branches: d.branches.len(),
            area: d.area(),
            half_width: d.half_width,
        }),
        limit_cycle: o.limit_cycle.as_ref().map(|c| CycleSummary {
            period: c.period,
            winding: c.winding,
            points: c.polyline.len(),
        }),
        full_order: o.full_order,
        clearing: Vec::new(),
        basin: None,
        artifacts: Artifacts {
            doa: o.doa,
            fault_on_trajectory: o.fault_on_trajectory,
            clearing_trajectories: Vec::new(),
            limit_cycle: o.limit_cycle,
        },
    };
    let (Some(pre), Some(post)) = (r.pre_sep, r.post_sep) else {
        return Ok(r);
    };
    let mode = if opts.mode == RhsMode::FullOrder { RhsMode::Exact } else { opts.mode };
    let on_m = Model::new(&r.fault_on_system, mode)?;
    let post_m = Model::new(&r.postfault_system, mode)?;
    let sep = post.to_array();
    for &tc in &study.outputs.clearing_times {
        match clearing_run(&on_m, &post_m, pre.to_array(), tc, study.outputs.post_fault_horizon, &study.solver) {
            Ok(samples) => {
                let end = samples.last().map_or(sep, |s| s.1);
                let stable = match &r.artifacts.doa {
                    Some(d) => {
                        let m = contains(d, end);
                        m.inside && !m.wrapped
                    }
                    None => (end[0] - sep[0]).hypot(end[1] - sep[1]) < 1e-2,
                };
                r.clearing.push(ClearingSummary { clearing_time: tc, stable, final_state: end });
                r.artifacts.clearing_trajectories.push(samples);
            }
            Err(e) => {
                r.outcome = Outcome::NumericalFailure(e.to_string());
                return Ok(r);
            }
        }
    }
    let a = &study.analysis;
    if let (Some(d), true) = (&r.artifacts.doa, a.basin_samples > 0) {
        let c = d.sep.state.to_array();
        let samples = match a.seed {
            Some(seed) => random_samples(c, d.half_width, a.basin_samples, seed),
            None => grid_samples(c, d.half_width, (a.basin_samples as f64).sqrt().ceil().max(2.0) as usize),
        };
        r.basin = Some(basin_agreement(&post_m, d, &samples, 0.05));
    }
    Ok(r)
}

/// Worker count from `INVERTER_DOA_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("INVERTER_DOA_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|n| *n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every sweep point on up to `workers` threads; results keep the input order.
pub fn run_study(study: &Study, workers: usize) -> Result<StudyResult> {
    let start = Instant::now();
    let points = study.points()?;
    let slots: Vec<Mutex<Option<(Result<PointResult>, f64)>>> = points.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers.max(1).min(points.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(p) = points.get(i) else { break };
                let t = Instant::now();
                let r = run_point(study, p);
                *slots[i].lock().unwrap() = Some((r, t.elapsed().as_secs_f64()));
            });
        }
    });
    let mut results = Vec::with_capacity(points.len());
    let mut point_s = Vec::with_capacity(points.len());
    for slot in slots {
        let (r, dt) = slot.into_inner().unwrap().expect("every point runs");
        results.push(r?);
        point_s.push(dt);
    }
    let convergence = match &study.convergence {
        Some(c) => Some(convergence_table(study, &c.reference, &c.m_q)?),
        None => None,
    };
    Ok(StudyResult {
        name: study.name.clone(),
        study_sha256: study.digest(),
        study: study.to_value(),
        points: results,
        convergence,
        timing: Timing { total_s: start.elapsed().as_secs_f64(), point_s },
    })
}

fn convergence_table(study: &Study, reference: &inverter_doa_core::InverterConfig, m_q: &[f64]) -> Result<Vec<ConvergencePoint>> {
    let base = study.points()?.remove(0).system;
    let gfm = if base.ibr2.kind() == InverterKind::Gsp {
        TwoInverterSystem { ibr2: *reference, ..base }
    } else if base.ibr1.kind() == InverterKind::Gsp {
        TwoInverterSystem { ibr1: *reference, ..base }
    } else {
        return Err(Error::Study("convergence needs a GSP unit".into()));
    };
    Ok(gsp_gfm_convergence(&base, &gfm, &study.fault, m_q, &study.options())?)
}

/// Re-simulates the fault-on phase for `t_clear` and the post-fault phase
/// for `horizon`.
pub fn simulate(point: &PointResult, t_clear: f64, horizon: f64, study: &Study) -> Result<Vec<(f64, Point)>> {
    let pre = point.pre_sep.ok_or_else(|| Error::Missing {
        what: "pre-fault SEP".into(),
        hint: "run `equilibria` to inspect the operating point".into(),
    })?;
    let mode = if study.analysis.mode == RhsMode::FullOrder { RhsMode::Exact } else { study.analysis.mode };
    let on = Model::new(&point.fault_on_system, mode)?;
    let post = Model::new(&point.postfault_system, mode)?;
    Ok(clearing_run(&on, &post, pre.to_array(), t_clear, horizon, &study.solver)?)
}
