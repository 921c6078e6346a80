mod common;

use std::f64::consts::PI;

use inverter_doa_core::dynamics::flow;
use inverter_doa_core::equilibria::{find_equilibria_grid, first_sep};
use inverter_doa_core::manifold::{compute_doa, contains, hausdorff, DoaBoundary, DoaOptions};
use inverter_doa_core::metrics::{self, local_lyapunov_estimate};
use inverter_doa_core::pipeline::{analyze_scenario, AnalysisOptions};
use inverter_doa_core::{
    apply_fault, integrate_with, Direction, Equilibrium, InverterConfig, IntegratorSettings, Model, RhsMode, Run,
    Termination, TwoInverterSystem,
};
use proptest::prelude::*;

fn post_fault_doa(sys: &TwoInverterSystem, opts: &DoaOptions) -> (Model, Equilibrium, DoaBoundary) {
    let m = Model::new(sys, RhsMode::Exact).unwrap();
    let eqs = find_equilibria_grid(&m, 24);
    let sep = first_sep(&eqs).unwrap();
    let doa = compute_doa(&m, &sep, &eqs, opts).unwrap();
    (m, sep, doa)
}

fn a1_post() -> TwoInverterSystem {
    let (sys, fault) = common::a1(0.35);
    apply_fault(&sys, &fault).unwrap().1
}

/// Plain forward simulation: does `x0` settle on `sep` itself?
fn settles(m: &Model, x0: [f64; 2], sep: [f64; 2]) -> bool {
    let s = IntegratorSettings { t_max: 40.0, domain_box: f64::INFINITY, max_arc_length: f64::INFINITY, ..Default::default() };
    let near = |_: f64, x: &[f64; 2]| (x[0] - sep[0]).hypot(x[1] - sep[1]) < 1e-3;
    let run = Run { stop: Some(&near), ..Run::new(Direction::Forward) };
    integrate_with(m, x0, &s, &run).unwrap().termination == Termination::Stopped
}

#[test]
fn decoupled_units_give_a_rectangle() {
    let sys = TwoInverterSystem::new(InverterConfig::gfl(60.0, 0.8), InverterConfig::gfl(60.0, 0.4), common::net(0.2, 0.3, 1e-6));
    let (m, sep, doa) = post_fault_doa(&sys, &DoaOptions::default());
    let s = sep.state.to_array();
    let c = metrics::cca(&doa, &m.coefficients());
    let dec = c.decoupled.map(Option::unwrap);
    let ccr = metrics::ccr(&doa);
    assert!((ccr - dec[0].min(dec[1])).abs() < 1e-3, "{ccr} vs {dec:?}");
    // Boundary at π - asin(C/B) per axis; the window clips the other side.
    let area = (dec[0] + PI) * (dec[1] + PI);
    assert!((doa.area() - area).abs() < 0.02 * area, "{} vs {area}", doa.area());
    for i in 0..2 {
        assert!((c.rect.1[i] - s[i] - dec[i]).abs() < 1e-3);
    }
}

#[test]
fn boundary_is_invariant() {
    let (m, _, doa) = post_fault_doa(&a1_post(), &DoaOptions::default());
    let s = IntegratorSettings { domain_box: f64::INFINITY, max_arc_length: f64::INFINITY, ..Default::default() };
    let mut checked = 0;
    for (a, _, splice) in doa.segments().step_by(7) {
        let c = doa.sep.state.to_array();
        // Stay clear of the window edge, where the polygon is clipped.
        if splice || (a[0] - c[0]).abs().max((a[1] - c[1]).abs()) > PI - 0.5 {
            continue;
        }
        let b = flow(&m, a, 0.05, &s).unwrap();
        let (r, _) = doa.reduce(b);
        assert!(doa.distance_to_boundary(r) < 5e-3, "{a:?} drifted to {b:?}");
        checked += 1;
    }
    assert!(checked > 10);
}

#[test]
fn offset_size_barely_moves_the_boundary() {
    let sys = a1_post();
    let (_, _, coarse) = post_fault_doa(&sys, &DoaOptions::default());
    let (_, _, fine) = post_fault_doa(&sys, &DoaOptions { epsilon: 1e-5, ..Default::default() });
    let d = hausdorff(&coarse.closed_polygon, &fine.closed_polygon);
    assert!(d < 1e-2, "{d}");
    assert!((metrics::ccr(&coarse) - metrics::ccr(&fine)).abs() < 1e-3);
}

#[test]
fn ellipse_and_disk_lie_inside() {
    for (sys, fault) in [common::a1(0.35), common::a1(0.4), common::a3(2.0)] {
        let post = apply_fault(&sys, &fault).unwrap().1;
        let (m, sep, doa) = post_fault_doa(&post, &DoaOptions::default());
        let l = local_lyapunov_estimate(&m, &sep, 720, doa.half_width).unwrap();
        let s = sep.state.to_array();
        for p in l.boundary(s, 360) {
            assert!(contains(&doa, p).inside, "{p:?}");
        }
        let ccr = metrics::ccr(&doa);
        for k in 0..72 {
            let (sn, cs) = (k as f64 * PI / 36.0).sin_cos();
            let p = [s[0] + 0.999 * ccr * cs, s[1] + 0.999 * ccr * sn];
            assert!(contains(&doa, p).inside);
        }
    }
}

#[test]
fn clearing_metrics_are_ordered() {
    for (sys, fault) in [common::a1(0.35), common::a3(0.0), common::a2(InverterConfig::gfm(5.0 * PI, 0.6, 1.0))] {
        let o = analyze_scenario(&sys, &fault, &AnalysisOptions::default()).unwrap();
        let r = o.report.unwrap();
        let cct = r.cct.unwrap();
        assert!(r.t_ccr <= cct, "{} > {cct}", r.t_ccr);
        assert!(r.ccr > 0.0);
    }
}

#[test]
fn rotating_orbit_after_late_clearing() {
    let (sys, fault) = common::a1(0.4);
    let mut opts = AnalysisOptions::default();
    opts.flags.spo = true;
    let o = analyze_scenario(&sys, &fault, &opts).unwrap();
    let c = o.limit_cycle.expect("cycle");
    assert_eq!(c.winding, (1, 0));
    let doa = o.doa.unwrap();
    assert!(c.polyline.iter().all(|p| !contains(&doa, *p).inside));
    assert!(c.period > 0.0);
}

#[test]
fn boundary_continues_through_shifted_source() {
    // The stable manifolds of the two saddles meet at a source just inside the
    // top edge and at its copy just below the bottom edge.
    let sys = TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), InverterConfig::gfm(5.0 * PI, 0.0, 1.0), common::net(0.2, 0.15, 0.9));
    let (m, sep, doa) = post_fault_doa(&sys, &DoaOptions::default());
    let s = sep.state.to_array();
    let mut checked = 0;
    for i in 0..15 {
        for j in 0..15 {
            let p = [s[0] - PI + (i as f64 + 0.5) * 2.0 * PI / 15.0, s[1] - PI + (j as f64 + 0.5) * 2.0 * PI / 15.0];
            if doa.distance_to_boundary(p) < 0.05 {
                continue;
            }
            checked += 1;
            assert_eq!(contains(&doa, p).inside, settles(&m, p, s), "at {p:?}");
        }
    }
    assert!(checked > 150);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn membership_agrees_with_simulation(u in -1.0f64..1.0, v in -1.0f64..1.0) {
        let (m, sep, doa) = post_fault_doa(&a1_post(), &DoaOptions::default());
        let s = sep.state.to_array();
        let p = [s[0] + PI * u, s[1] + PI * v];
        prop_assume!(doa.distance_to_boundary(p) > 0.05);
        prop_assert_eq!(contains(&doa, p).inside, settles(&m, p, s), "at {:?}", p);
    }
}
