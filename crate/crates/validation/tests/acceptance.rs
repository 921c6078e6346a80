//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any criterion fails.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use inverter_doa::{run_point, run_study, PointResult, Study, StudyResult};
use inverter_doa_core::manifold::{contains, point_segment_distance, DoaBoundary, Point};
use inverter_doa_core::metrics::{cca, local_lyapunov_estimate};
use inverter_doa_core::{
    energy_function, integrate, Direction, IntegratorSettings, InverterConfig, Model, NetworkParams, RhsMode, TwoInverterSystem,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Relative tolerance on reported CCR and t_ccr values.
const REL_TOL: f64 = 0.10;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn study(name: &str) -> Study {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../studies").join(format!("{name}.json"));
    let mut s = Study::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    s.name = name.into();
    s
}

fn run(name: &str) -> StudyResult {
    run_study(&study(name), 1).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn within(value: f64, target: f64) -> bool {
    (value - target).abs() <= REL_TOL * target.abs()
}

fn check(label: &str, value: f64, target: f64) -> (bool, String) {
    let ok = within(value, target);
    let err = 100.0 * (value - target) / target;
    (ok, format!("{label} {value:.4} vs {target} ({err:+.1}%{})", if ok { "" } else { " out of tolerance" }))
}

fn ccr_of(p: &PointResult) -> f64 {
    p.report.as_ref().map_or(f64::NAN, |r| r.ccr)
}

fn t_ccr_of(p: &PointResult) -> f64 {
    p.report.as_ref().map_or(f64::NAN, |r| r.t_ccr)
}

fn metric_checks(p: &PointResult, ccr: f64, t_ccr: f64, tag: &str) -> Vec<(bool, String)> {
    vec![check(&format!("{tag} CCR"), ccr_of(p), ccr), check(&format!("{tag} t_ccr"), t_ccr_of(p), t_ccr)]
}

fn combine(parts: Vec<(bool, String)>) -> Verdict {
    let pass = parts.iter().all(|p| p.0);
    Verdict::new(pass, parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; "))
}

fn two_gfl_metrics() -> Verdict {
    let mut parts = Vec::new();
    for (name, ccr, t_ccr, tag) in [("table_a1_xg035", 0.90, 0.212, "xg=0.35"), ("table_a1_xg040", 0.53, 0.131, "xg=0.40")] {
        let s = study(name);
        let start = Instant::now();
        let p = run_point(&s, &s.points().unwrap()[0]).unwrap();
        let secs = start.elapsed().as_secs_f64();
        parts.extend(metric_checks(&p, ccr, t_ccr, tag));
        parts.push((secs < 10.0, format!("{tag} runtime {secs:.2}s")));
    }
    combine(parts)
}

fn two_gfl_cct_bracket() -> Verdict {
    let r = run("table_a1_xg035");
    let cct = r.points[0].report.as_ref().and_then(|r| r.cct).unwrap_or(f64::NAN);
    Verdict::new((0.212..0.25).contains(&cct), format!("xg=0.35 CCT {cct:.6} s, required in [0.212, 0.25)"))
}

fn periodic_orbit() -> Verdict {
    let r = run("table_a1_xg040");
    let p = &r.points[0];
    let (Some(doa), Some(cycle)) = (&p.artifacts.doa, &p.artifacts.limit_cycle) else {
        return Verdict::new(false, "no limit cycle detected");
    };
    let inside = cycle.polyline.iter().filter(|x| contains(doa, **x).inside).count();
    Verdict::new(
        cycle.winding == (1, 0) && inside == 0,
        format!("winding {:?}, period {:.4} s, {inside} of {} cycle points inside the DOA", cycle.winding, cycle.period, cycle.polyline.len()),
    )
}

fn statcom_metrics() -> Verdict {
    let gfm = run("table_a2_gfm");
    let gsp = run("table_a2_gsp");
    let at = |m_q: f64| gsp.points.iter().find(|p| p.sweep_value == Some(m_q)).expect("sweep value present");
    let mut parts = metric_checks(&gfm.points[0], 0.65, 0.28, "GFM");
    parts.extend(metric_checks(at(1.0), 0.27, 0.155, "GSP m_q=1"));
    parts.extend(metric_checks(at(4.0), 0.66, 0.28, "GSP m_q=4"));
    combine(parts)
}

fn gfm_gsp_sweep() -> Verdict {
    let r = run("table_a3");
    let mut parts = Vec::new();
    for (m_q, t) in [(0.0, 0.15), (2.0, 0.31), (4.0, 0.45)] {
        let p = r.points.iter().find(|p| p.sweep_value == Some(m_q)).expect("sweep value present");
        parts.push(check(&format!("m_q={m_q} t_ccr"), t_ccr_of(p), t));
    }
    let ccr: Vec<f64> = r.points.iter().map(ccr_of).collect();
    let increasing = ccr.windows(2).all(|w| w[1] > w[0]);
    parts.push((increasing, format!("CCR {ccr:.3?} {}", if increasing { "strictly increasing" } else { "not strictly increasing" })));
    combine(parts)
}

fn gsp_to_gfm_convergence() -> Verdict {
    let r = run("table_a2_gsp");
    let Some(rows) = r.convergence else {
        return Verdict::new(false, "no convergence table");
    };
    let m_q: Vec<f64> = rows.iter().map(|c| c.m_q).collect();
    let d: Vec<f64> = rows.iter().map(|c| c.hausdorff.unwrap_or(f64::NAN)).collect();
    let monotone = m_q == [1.0, 2.0, 4.0, 16.0] && d.windows(2).all(|w| w[1] <= w[0]);
    Verdict::new(monotone, format!("Hausdorff {d:.4?} over m_q {m_q:?}"))
}

fn location_optimum() -> Verdict {
    let mut parts = Vec::new();
    for (name, tag) in [("location_gfm", "GFM"), ("location_gsp", "GSP")] {
        let r = run(name);
        let at = |x: f64| r.points.iter().find(|p| p.sweep_value == Some(x)).expect("position present");
        let ccr = [0.2, 0.5, 0.9].map(|x| at(x).report.as_ref().map(|r| r.ccr));
        let ok = match ccr {
            [Some(a), Some(m), Some(b)] => m > a && m > b,
            _ => false,
        };
        let shown: Vec<String> = [0.2, 0.5, 0.9]
            .iter()
            .zip(ccr)
            .map(|(x, c)| match c {
                Some(c) => format!("{x}:{c:.3}"),
                None => format!("{x}:{}", inverter_doa::export::outcome_label(&at(*x).outcome)),
            })
            .collect();
        parts.push((ok, format!("{tag} CCR {}", shown.join(" "))));
    }
    combine(parts)
}

/// Fixed-step RK4 from `x0`; true if the state settles on `sep` itself.
fn simulate_to_sep(model: &Model, x0: Point, sep: Point) -> bool {
    let h = 2e-3;
    let mut x = x0;
    let add = |x: Point, k: Point, s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    for _ in 0..(40.0 / h) as usize {
        let k1 = model.rhs(x);
        let k2 = model.rhs(add(x, k1, h / 2.0));
        let k3 = model.rhs(add(x, k2, h / 2.0));
        let k4 = model.rhs(add(x, k3, h));
        x = [
            x[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            x[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        let dist = (x[0] - sep[0]).hypot(x[1] - sep[1]);
        if dist < 1e-4 {
            return true;
        }
        // More than a turn away from the window: slipping or settled on a shifted copy.
        if (x[0] - sep[0]).abs() > 3.0 * PI || (x[1] - sep[1]).abs() > 3.0 * PI {
            return false;
        }
        if model.rhs(x).iter().all(|v| v.abs() < 1e-10) {
            return false;
        }
    }
    false
}

fn manifold_distance(doa: &DoaBoundary, p: Point) -> f64 {
    doa.segments()
        .filter(|s| !s.2)
        .map(|(a, b, _)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

struct BasinCheck {
    fraction: f64,
    used: usize,
    secs: f64,
}

fn basin_check(p: &PointResult, mode: RhsMode) -> Option<BasinCheck> {
    let doa = p.artifacts.doa.as_ref()?;
    let start = Instant::now();
    let model = Model::new(&p.postfault_system, mode).unwrap();
    let sep = doa.sep.state.to_array();
    let n = 41;
    let step = TAU / n as f64;
    let (mut used, mut agree) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let x = [sep[0] - PI + (i as f64 + 0.5) * step, sep[1] - PI + (j as f64 + 0.5) * step];
            if manifold_distance(doa, x) < 0.05 {
                continue;
            }
            used += 1;
            if contains(doa, x).inside == simulate_to_sep(&model, x, sep) {
                agree += 1;
            }
        }
    }
    Some(BasinCheck { fraction: agree as f64 / used as f64, used, secs: start.elapsed().as_secs_f64() })
}

const SCENARIOS: [&str; 8] =
    ["table_a1_xg035", "table_a1_xg040", "table_a2_gfm", "table_a2_gsp", "table_a3", "table_a3_location", "location_gfm", "location_gsp"];

fn all_points() -> Vec<(String, RhsMode, PointResult)> {
    SCENARIOS
        .iter()
        .flat_map(|name| {
            let s = study(name);
            let mode = s.analysis.mode;
            run_study(&s, 4).unwrap().points.into_iter().map(move |p| {
                let tag = match p.sweep_value {
                    Some(v) => format!("{name}[{v}]"),
                    None => name.to_string(),
                };
                (tag, mode, p)
            })
        })
        .collect()
}

fn basin_oracle() -> Verdict {
    let points = all_points();
    let results: Vec<(String, Option<BasinCheck>)> = std::thread::scope(|s| {
        let handles: Vec<_> = points.iter().map(|(tag, mode, p)| (tag.clone(), s.spawn(move || basin_check(p, *mode)))).collect();
        handles.into_iter().map(|(t, h)| (t, h.join().unwrap())).collect()
    });
    let mut parts = Vec::new();
    let mut skipped = Vec::new();
    for (tag, r) in results {
        match r {
            Some(b) => parts.push((
                b.fraction >= 0.98 && b.secs < 120.0,
                format!("{tag} {:.1}% of {} ({:.1}s)", 100.0 * b.fraction, b.used, b.secs),
            )),
            None => skipped.push(tag),
        }
    }
    let mut v = combine(parts);
    if !skipped.is_empty() {
        v.detail.push_str(&format!("; no post-fault DOA: {}", skipped.join(", ")));
    }
    v
}

fn representatives() -> Vec<(&'static str, TwoInverterSystem)> {
    let net = |x1, x2, xg| NetworkParams { x1, x2, xg, ug: 1.0 };
    let gfm = |k: f64, p: f64| InverterConfig::gfm(k, p, 1.0);
    vec![
        ("GFM-GFM", TwoInverterSystem::new(gfm(5.0 * PI, 0.5), InverterConfig::gfm(4.0 * PI, 0.3, 1.05), net(0.3, 0.25, 0.2))),
        ("GFL-GFM", TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), gfm(5.0 * PI, 0.6), net(0.5, 0.15, 0.6))),
        ("GFL-GFL", TwoInverterSystem::new(InverterConfig::gfl(20.0 * PI, 0.8), InverterConfig::gfl(20.0 * PI, 0.4), net(0.2, 0.2, 0.35))),
        ("GFL-GSP", TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), InverterConfig::gsp(20.9, 0.6, 2.0, 1.0), net(0.5, 0.15, 0.6))),
        ("GSP-GFM", TwoInverterSystem::new(InverterConfig::gsp(12.0 * PI, 0.2, 2.0, 1.0), gfm(5.0 * PI, 0.8), net(0.1, 0.5, 0.6))),
    ]
}

fn numerical_hygiene() -> Verdict {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut parts = Vec::new();
    let h = 1e-6;
    let mut worst = 0.0f64;
    for (name, sys) in representatives() {
        let m = Model::new(&sys, RhsMode::Exact).unwrap();
        for _ in 0..100 {
            let x = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
            let j = m.jacobian(x);
            let scale = j.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
            for c in 0..2 {
                let (mut xp, mut xm) = (x, x);
                xp[c] += h;
                xm[c] -= h;
                let (fp, fm) = (m.rhs(xp), m.rhs(xm));
                for r in 0..2 {
                    worst = worst.max((j[r][c] - (fp[r] - fm[r]) / (2.0 * h)).abs() / scale);
                }
            }
        }
        let c = m.coefficients();
        let has_pll = sys.ibr1.is_pll() || sys.ibr2.is_pll();
        if has_pll && (c.d1 != 0.0 || c.d2 != 0.0) && energy_function(&c).exists {
            parts.push((false, format!("{name} reports an energy function")));
        }
    }
    parts.push((worst <= 1e-6, format!("worst Jacobian error {worst:.1e} (relative)")));

    let (_, sys) = &representatives()[0];
    let m = Model::new(sys, RhsMode::Exact).unwrap();
    let v = energy_function(&m.coefficients()).terms.expect("GFM pair has an energy function");
    let s = IntegratorSettings { t_max: 3.0, domain_box: f64::INFINITY, max_arc_length: f64::INFINITY, ..Default::default() };
    let mut rise = f64::NEG_INFINITY;
    for _ in 0..50 {
        let x0 = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
        let tr = integrate(&m, x0, &s, Direction::Forward).unwrap();
        for w in tr.samples.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            rise = rise.max(v.value(b[0], b[1]) - v.value(a[0], a[1]));
        }
    }
    parts.push((rise <= 1e-9, format!("largest energy step {rise:.1e} over 50 GFM-GFM trajectories")));
    parts.push((true, "no energy function for PLL combinations with cosine terms".to_string()));
    combine(parts)
}

fn ordering_chain() -> Verdict {
    let mut parts = Vec::new();
    for (tag, mode, p) in all_points() {
        let Some(doa) = &p.artifacts.doa else { continue };
        let model = Model::new(&p.postfault_system, mode).unwrap();
        let sep = doa.sep.state.to_array();
        let mut violations = 0;
        if let Ok(l) = local_lyapunov_estimate(&model, &doa.sep, 720, doa.half_width) {
            for frac in [0.25, 0.5, 0.75, 1.0] {
                let e = inverter_doa_core::metrics::LyapunovEstimate { level: l.level * frac * frac, ..l };
                violations += e.boundary(sep, 360).iter().filter(|x| !contains(doa, **x).inside).count();
            }
        }
        let rect = cca(doa, &model.coefficients()).rect;
        violations += doa
            .closed_polygon
            .iter()
            .filter(|x| x[0] < rect.0[0] || x[0] > rect.1[0] || x[1] < rect.0[1] || x[1] > rect.1[1])
            .count();
        let r = p.report.as_ref().unwrap();
        let order = match r.cct {
            Some(cct) if r.t_ccr.is_finite() => r.t_ccr <= cct,
            _ => true,
        };
        if violations > 0 || !order {
            parts.push((false, format!("{tag}: {violations} membership violations, t_ccr {} cct {:?}", r.t_ccr, r.cct)));
        } else {
            parts.push((true, String::new()));
        }
    }
    let n = parts.len();
    let mut v = combine(parts.into_iter().filter(|p| !p.0 || p.1.is_empty()).collect());
    if v.pass {
        v.detail = format!("{n} scenarios, zero violations, t_ccr <= cct throughout");
    } else {
        v.detail = v.detail.split("; ").filter(|s| !s.is_empty()).collect::<Vec<_>>().join("; ");
    }
    v
}

fn main() -> ExitCode {
    let criteria: [(u32, fn() -> Verdict); 10] = [
        (1, two_gfl_metrics),
        (2, two_gfl_cct_bracket),
        (3, periodic_orbit),
        (4, statcom_metrics),
        (5, gfm_gsp_sweep),
        (6, gsp_to_gfm_convergence),
        (7, location_optimum),
        (8, basin_oracle),
        (9, numerical_hygiene),
        (10, ordering_chain),
    ];
    let verdicts: Vec<(u32, Verdict)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(n, f)| (*n, s.spawn(f))).collect();
        handles
            .into_iter()
            .map(|(n, h)| {
                let v = h.join().unwrap_or_else(|e| {
                    let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                    Verdict::new(false, format!("panicked: {}", msg.unwrap_or_default()))
                });
                (n, v)
            })
            .collect()
    });
    let mut failed = 0;
    for (n, v) in &verdicts {
        println!("{} criterion {n}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("{} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
