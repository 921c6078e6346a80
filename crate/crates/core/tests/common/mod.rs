#![allow(dead_code)]

use std::f64::consts::PI;

use inverter_doa_core::{Combination, FaultSpec, InverterConfig, NetworkParams, TwoInverterSystem};
use num_complex::Complex64;

pub fn net(x1: f64, x2: f64, xg: f64) -> NetworkParams {
    NetworkParams { x1, x2, xg, ug: 1.0 }
}

/// One representative per combination, in canonical slot order.
pub fn representatives() -> Vec<(Combination, TwoInverterSystem)> {
    let gfm = |k: f64, p: f64| InverterConfig::gfm(k, p, 1.0);
    vec![
        (Combination::GfmGfm, TwoInverterSystem::new(gfm(5.0 * PI, 0.5), InverterConfig::gfm(4.0 * PI, 0.3, 1.05), net(0.3, 0.25, 0.2))),
        (Combination::GflGfm, TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), gfm(5.0 * PI, 0.6), net(0.5, 0.15, 0.6))),
        (Combination::GflGfl, TwoInverterSystem::new(InverterConfig::gfl(20.0 * PI, 0.8), InverterConfig::gfl(20.0 * PI, 0.4), net(0.2, 0.2, 0.35))),
        (
            Combination::GflGsp,
            TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), InverterConfig::gsp(20.9, 0.6, 2.0, 1.0), net(0.5, 0.15, 0.6)),
        ),
        (
            Combination::GspGfm,
            TwoInverterSystem::new(InverterConfig::gsp(12.0 * PI, 0.2, 2.0, 1.0), gfm(5.0 * PI, 0.8), net(0.1, 0.5, 0.6)),
        ),
    ]
}

pub fn a1(xg: f64) -> (TwoInverterSystem, FaultSpec) {
    let k = 20.0 * PI;
    (
        TwoInverterSystem::new(InverterConfig::gfl(k, 0.8), InverterConfig::gfl(k, 0.4), net(0.2, 0.2, xg)),
        FaultSpec::line(0.5, 0.02),
    )
}

pub fn a2(ibr2: InverterConfig) -> (TwoInverterSystem, FaultSpec) {
    (
        TwoInverterSystem::new(InverterConfig::gfl(5.0 * PI, 1.0), ibr2, net(0.5, 0.15, 0.3)),
        FaultSpec::line(0.8, 0.001),
    )
}

pub fn a3(m_q: f64) -> (TwoInverterSystem, FaultSpec) {
    (
        TwoInverterSystem::new(
            InverterConfig::gfm(5.0 * PI, 0.8, 1.0),
            InverterConfig::gsp(12.0 * PI, 0.2, m_q, 1.0),
            net(0.5, 0.1, 0.3),
        ),
        FaultSpec::line(0.8, 0.001),
    )
}

/// Angle rates from a phasor solution of the star network: GFM units are
/// voltage sources behind their reactance, PLL units inject
/// `(i_d + j i_q) e^{jδ}` and GSP units pick `i_q` from their voltage droop.
pub fn phasor_rhs(sys: &TwoInverterSystem, d: [f64; 2]) -> [f64; 2] {
    let n = sys.network;
    let x = [n.x1, n.x2];
    let invs = [sys.ibr1, sys.ibr2];
    let j = Complex64::i();
    let terminals = |iq: [f64; 2]| -> [(Complex64, Complex64); 2] {
        let mut y = 1.0 / (j * n.xg);
        let mut inj = Complex64::from(n.ug) / (j * n.xg);
        for k in 0..2 {
            let rot = Complex64::from_polar(1.0, d[k]);
            match invs[k] {
                InverterConfig::Gfm { v_mag, .. } => {
                    y += 1.0 / (j * x[k]);
                    inj += v_mag * rot / (j * x[k]);
                }
                InverterConfig::Gfl { i_d, .. } | InverterConfig::Gsp { i_d, .. } => inj += Complex64::new(i_d, iq[k]) * rot,
            }
        }
        let vn = inj / y;
        let mut out = [(Complex64::default(), Complex64::default()); 2];
        for k in 0..2 {
            let rot = Complex64::from_polar(1.0, d[k]);
            out[k] = match invs[k] {
                InverterConfig::Gfm { v_mag, .. } => {
                    let e = v_mag * rot;
                    (e, (e - vn) / (j * x[k]))
                }
                InverterConfig::Gfl { i_d, .. } | InverterConfig::Gsp { i_d, .. } => {
                    let i = Complex64::new(i_d, iq[k]) * rot;
                    (vn + j * x[k] * i, i)
                }
            };
        }
        out
    };
    let vd = |iq: [f64; 2], k: usize| (terminals(iq)[k].0 * Complex64::from_polar(1.0, -d[k])).re;
    let mut iq = [0.0; 2];
    for k in 0..2 {
        if let InverterConfig::Gsp { m_q, v_ref, .. } = invs[k] {
            // V_d is affine in this unit's own i_q.
            let mut unit = [0.0; 2];
            unit[k] = 1.0;
            let v0 = vd([0.0; 2], k);
            let slope = vd(unit, k) - v0;
            iq[k] = m_q * (v0 - v_ref) / (1.0 - m_q * slope);
        }
    }
    let t = terminals(iq);
    let mut out = [0.0; 2];
    for k in 0..2 {
        let (v, i) = t[k];
        out[k] = match invs[k] {
            InverterConfig::Gfm { k_gfm, p_ref, .. } => k_gfm * (p_ref - (v * i.conj()).re),
            InverterConfig::Gfl { k_pll, .. } | InverterConfig::Gsp { k_pll, .. } => {
                k_pll * (v * Complex64::from_polar(1.0, -d[k])).im
            }
        };
    }
    out
}

pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(1.0)
}
