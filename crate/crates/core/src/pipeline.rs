//! End-to-end analysis of one fault scenario.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, reduced_vs_full_check, Direction, FullOrderCheck, IntegratorSettings, Model, RhsMode, State2};
use crate::equilibria::{find_equilibria_grid, first_sep, Equilibrium};
use crate::error::{invalid, Error, Result};
use crate::manifold::{compute_doa, contains, detect_limit_cycle, hausdorff, DoaBoundary, DoaOptions, LimitCycle, Point};
use crate::metrics::{self, StabilityReport};
use crate::network::{apply_fault, FaultKind, FaultSpec, InverterKind, NetworkParams, TwoInverterSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisFlags {
    pub doa: bool,
    pub ccr: bool,
    pub t_ccr: bool,
    pub cct: bool,
    pub cca: bool,
    pub lyapunov: bool,
    pub spo: bool,
    pub full_order_check: bool,
}

impl Default for AnalysisFlags {
    fn default() -> Self {
        AnalysisFlags {
            doa: true,
            ccr: true,
            t_ccr: true,
            cct: true,
            cca: true,
            lyapunov: true,
            spo: false,
            full_order_check: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub mode: RhsMode,
    pub flags: AnalysisFlags,
    pub doa: DoaOptions,
    /// Settings for fault-on and post-fault simulations.
    pub settings: IntegratorSettings,
    pub equilibrium_grid: usize,
    /// Upper end of the CCT bisection interval.
    pub cct_t_hi: f64,
    pub lyapunov_samples: usize,
    /// PLL integral gain of the full-order check, as a fraction of `k_pll`.
    pub k_i_ratio: f64,
    /// Post-fault horizon of the full-order check.
    pub full_order_horizon: f64,
    /// Horizon of the limit-cycle search.
    pub spo_t_max: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            mode: RhsMode::Exact,
            flags: AnalysisFlags::default(),
            doa: DoaOptions::default(),
            settings: IntegratorSettings { t_max: 5.0, ..Default::default() },
            equilibrium_grid: 24,
            cct_t_hi: 1.0,
            lyapunov_samples: 720,
            k_i_ratio: 0.1,
            full_order_horizon: 5.0,
            spo_t_max: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "detail", rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    NoPrefaultSep,
    NoPostfaultSep,
    OpenBasin,
    NumericalFailure(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub outcome: Outcome,
    pub prefault: TwoInverterSystem,
    pub fault_on: TwoInverterSystem,
    pub postfault: TwoInverterSystem,
    pub prefault_equilibria: Vec<Equilibrium>,
    pub fault_on_equilibria: Vec<Equilibrium>,
    pub postfault_equilibria: Vec<Equilibrium>,
    pub pre_sep: Option<State2>,
    pub post_sep: Option<State2>,
    pub doa: Option<DoaBoundary>,
    pub report: Option<StabilityReport>,
    pub limit_cycle: Option<LimitCycle>,
    pub full_order: Option<FullOrderCheck>,
    /// Fault-on trajectory up to the CCT bisection horizon.
    pub fault_on_trajectory: Vec<(f64, Point)>,
}

fn numerical(e: &Error) -> Outcome {
    Outcome::NumericalFailure(e.to_string())
}

/// Runs fault application, equilibrium search, DOA assembly and the requested
/// metrics. Physical outcomes (no SEP, open basin) and numerical failures are
/// reported in `outcome`; invalid input is an error.
pub fn analyze_scenario(base: &TwoInverterSystem, fault: &FaultSpec, opts: &AnalysisOptions) -> Result<ScenarioOutcome> {
    base.validate()?;
    let (fault_on, postfault) = apply_fault(base, fault)?;
    let mode = if opts.mode == RhsMode::FullOrder { RhsMode::Exact } else { opts.mode };
    let pre_m = Model::new(base, mode)?;
    let on_m = Model::new(&fault_on, mode)?;
    let post_m = Model::new(&postfault, mode)?;
    let pre_eq = find_equilibria_grid(&pre_m, opts.equilibrium_grid);
    let post_eq = find_equilibria_grid(&post_m, opts.equilibrium_grid);
    let mut out = ScenarioOutcome {
        outcome: Outcome::Ok,
        prefault: *base,
        fault_on,
        postfault,
        pre_sep: first_sep(&pre_eq).map(|e| e.state),
        post_sep: first_sep(&post_eq).map(|e| e.state),
        prefault_equilibria: pre_eq,
        fault_on_equilibria: find_equilibria_grid(&on_m, opts.equilibrium_grid),
        postfault_equilibria: post_eq,
        doa: None,
        report: None,
        limit_cycle: None,
        full_order: None,
        fault_on_trajectory: Vec::new(),
    };
    let Some(pre_sep) = out.pre_sep else {
        out.outcome = Outcome::NoPrefaultSep;
        return Ok(out);
    };
    let Some(post) = first_sep(&out.postfault_equilibria) else {
        out.outcome = Outcome::NoPostfaultSep;
        return Ok(out);
    };
    let x0 = pre_sep.to_array();

    let traj_settings = IntegratorSettings { t_max: opts.cct_t_hi, domain_box: f64::INFINITY, max_arc_length: f64::INFINITY, ..opts.settings };
    match integrate(&on_m, x0, &traj_settings, Direction::Forward) {
        Ok(tr) => out.fault_on_trajectory = tr.samples,
        Err(e) => {
            out.outcome = numerical(&e);
            return Ok(out);
        }
    }

    let f = opts.flags;
    if !(f.doa || f.ccr || f.t_ccr || f.cct || f.cca || f.spo) {
        return Ok(out);
    }
    let doa = match compute_doa(&post_m, &post, &out.postfault_equilibria, &opts.doa) {
        Ok(d) => d,
        Err(Error::OpenBasin) => {
            out.outcome = Outcome::OpenBasin;
            return Ok(out);
        }
        Err(e @ Error::IntegrationFailed { .. }) => {
            out.outcome = numerical(&e);
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let ccr = metrics::ccr(&doa);
    let mut report = StabilityReport {
        ccr,
        t_ccr: f64::NAN,
        zero_margin: false,
        cct: None,
        cct_bracketed: None,
        cca_proj: None,
        cca_decoupled: None,
        lyapunov_level: None,
    };
    let result: Result<()> = (|| {
        if f.t_ccr {
            let t = metrics::t_ccr(&on_m, x0, post.state.to_array(), ccr, &opts.settings)?;
            report.t_ccr = t.t_ccr;
            report.zero_margin = t.zero_margin;
        }
        if f.cct {
            let c = metrics::cct_bisection(&on_m, x0, &doa, &opts.settings, opts.cct_t_hi)?;
            report.cct = Some(c.cct);
            report.cct_bracketed = Some(c.bracketed);
        }
        if f.cca {
            let c = metrics::cca(&doa, &post_m.coefficients());
            report.cca_proj = Some(c.proj);
            report.cca_decoupled = Some(c.decoupled);
        }
        if f.lyapunov {
            if let Ok(l) = metrics::local_lyapunov_estimate(&post_m, &post, opts.lyapunov_samples, doa.half_width) {
                report.lyapunov_level = Some(l.level);
            }
        }
        if f.spo {
            // Seed: the fault-on state a little beyond the clearing limit.
            let t_seed = report.cct.map_or(opts.cct_t_hi, |c| (1.2 * c + 0.05).min(opts.cct_t_hi));
            let seed = crate::dynamics::flow(&on_m, x0, t_seed, &opts.settings)?;
            if !contains(&doa, seed).inside {
                let s = IntegratorSettings { t_max: opts.spo_t_max, ..opts.settings };
                out.limit_cycle = detect_limit_cycle(&post_m, seed, &s)?;
            }
        }
        if f.full_order_check && (base.ibr1.is_pll() || base.ibr2.is_pll()) {
            let t_fault = if report.t_ccr.is_finite() { report.t_ccr } else { opts.cct_t_hi };
            let phases = [(fault_on, t_fault), (postfault, opts.full_order_horizon)];
            out.full_order = Some(reduced_vs_full_check(&phases, pre_sep, opts.k_i_ratio, &opts.settings)?);
        }
        Ok(())
    })();
    out.doa = Some(doa);
    out.report = Some(report);
    if let Err(e) = result {
        out.outcome = numerical(&e);
    }
    Ok(out)
}

/// Pre-fault system for one point of a location sweep: `x1 = position` and
/// the post-fault grid reactance is `total_x - position`. For a line fault the
/// pre-fault reactance is the post-fault value divided by the trip factor.
pub fn location_system(base: &TwoInverterSystem, fault: &FaultSpec, position: f64, total_x: f64) -> Result<TwoInverterSystem> {
    if !(position > 0.0 && position < total_x && total_x.is_finite()) {
        return Err(invalid(alloc::format!("location {position} outside (0, {total_x})")));
    }
    let xg_post = total_x - position;
    let xg = match fault.kind {
        FaultKind::LineFault { post_fault_xg_factor, .. } => xg_post / post_fault_xg_factor,
        FaultKind::VoltageSag { .. } => xg_post,
    };
    Ok(base.with_network(NetworkParams { x1: position, xg, ..base.network }))
}

/// Replaces the PLL gain of every GSP unit by `k_gfm / (x_own + xg)` on the
/// post-fault network, so that its equivalent gain matches a GFM unit.
pub fn match_gsp_gain(sys: &TwoInverterSystem, fault: &FaultSpec, k_gfm: f64) -> Result<TwoInverterSystem> {
    let (_, post) = apply_fault(sys, fault)?;
    let n = post.network;
    let mut out = *sys;
    if sys.ibr1.kind() == InverterKind::Gsp {
        out.ibr1 = sys.ibr1.with_gain(k_gfm / (n.x1 + n.xg));
    }
    if sys.ibr2.kind() == InverterKind::Gsp {
        out.ibr2 = sys.ibr2.with_gain(k_gfm / (n.x2 + n.xg));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub m_q: f64,
    pub outcome: Outcome,
    /// Hausdorff distance to the GFM polygon, when both polygons exist.
    pub hausdorff: Option<f64>,
}

fn doa_only(opts: &AnalysisOptions) -> AnalysisOptions {
    let mut o = *opts;
    o.flags = AnalysisFlags { doa: true, ccr: false, t_ccr: false, cct: false, cca: false, lyapunov: false, spo: false, full_order_check: false };
    o
}

/// Hausdorff distance between the post-fault DOA of `base_gsp` at each droop
/// value and the post-fault DOA of `base_gfm`.
pub fn gsp_gfm_convergence(
    base_gsp: &TwoInverterSystem,
    base_gfm: &TwoInverterSystem,
    fault: &FaultSpec,
    mq_values: &[f64],
    opts: &AnalysisOptions,
) -> Result<Vec<ConvergencePoint>> {
    let o = doa_only(opts);
    let reference = analyze_scenario(base_gfm, fault, &o)?;
    mq_values
        .iter()
        .map(|&m_q| {
            let sys = TwoInverterSystem { ibr1: base_gsp.ibr1.with_m_q(m_q), ibr2: base_gsp.ibr2.with_m_q(m_q), network: base_gsp.network };
            let r = analyze_scenario(&sys, fault, &o)?;
            let hausdorff = match (&r.doa, &reference.doa) {
                (Some(a), Some(b)) => Some(hausdorff(&a.closed_polygon, &b.closed_polygon)),
                _ => None,
            };
            let outcome = if r.outcome == Outcome::Ok { reference.outcome.clone() } else { r.outcome };
            Ok(ConvergencePoint { m_q, outcome, hausdorff })
        })
        .collect()
}
