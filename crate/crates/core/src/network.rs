//! Inverter and network parameters, derived impedances, the generalized
//! coefficient map and fault-network reduction.

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum InverterKind {
    Gfm,
    Gfl,
    Gsp,
}

/// Reduced-order inverter model.
///
/// GFL and GSP units synchronize through a PLL (`k_pll`, optional integral
/// gain `k_i` used only by the full-order model). GSP adds the algebraic
/// terminal-voltage droop `I_q = m_q (V_d - V_ref)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "UPPERCASE")]
pub enum InverterConfig {
    Gfm {
        k_gfm: f64,
        p_ref: f64,
        v_mag: f64,
    },
    Gfl {
        k_pll: f64,
        #[serde(default)]
        k_i: f64,
        i_d: f64,
        /// Optional PLL frequency clamp (rad/s), honoured by the full-order model only.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_limit: Option<f64>,
    },
    Gsp {
        k_pll: f64,
        #[serde(default)]
        k_i: f64,
        i_d: f64,
        m_q: f64,
        v_ref: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_limit: Option<f64>,
    },
}

impl InverterConfig {
    pub fn gfm(k_gfm: f64, p_ref: f64, v_mag: f64) -> Self {
        InverterConfig::Gfm { k_gfm, p_ref, v_mag }
    }

    pub fn gfl(k_pll: f64, i_d: f64) -> Self {
        InverterConfig::Gfl { k_pll, k_i: 0.0, i_d, omega_limit: None }
    }

    pub fn gsp(k_pll: f64, i_d: f64, m_q: f64, v_ref: f64) -> Self {
        InverterConfig::Gsp { k_pll, k_i: 0.0, i_d, m_q, v_ref, omega_limit: None }
    }

    pub fn kind(&self) -> InverterKind {
        match self {
            InverterConfig::Gfm { .. } => InverterKind::Gfm,
            InverterConfig::Gfl { .. } => InverterKind::Gfl,
            InverterConfig::Gsp { .. } => InverterKind::Gsp,
        }
    }

    /// Kind after normalization: a GSP unit with `m_q = 0` is a plain GFL unit.
    pub fn effective_kind(&self) -> InverterKind {
        match self {
            InverterConfig::Gsp { m_q, .. } if *m_q == 0.0 => InverterKind::Gfl,
            other => other.kind(),
        }
    }

    /// Synchronization gain: `k_gfm` for GFM, `k_pll` otherwise.
    pub fn gain(&self) -> f64 {
        match *self {
            InverterConfig::Gfm { k_gfm, .. } => k_gfm,
            InverterConfig::Gfl { k_pll, .. } | InverterConfig::Gsp { k_pll, .. } => k_pll,
        }
    }

    /// PLL integral gain; zero for GFM.
    pub fn k_i(&self) -> f64 {
        match *self {
            InverterConfig::Gfm { .. } => 0.0,
            InverterConfig::Gfl { k_i, .. } | InverterConfig::Gsp { k_i, .. } => k_i,
        }
    }

    pub fn omega_limit(&self) -> Option<f64> {
        match *self {
            InverterConfig::Gfm { .. } => None,
            InverterConfig::Gfl { omega_limit, .. } | InverterConfig::Gsp { omega_limit, .. } => {
                omega_limit
            }
        }
    }

    pub fn is_pll(&self) -> bool {
        !matches!(self, InverterConfig::Gfm { .. })
    }

    /// Copy with the synchronization gain (`k_gfm` or `k_pll`) replaced.
    pub fn with_gain(mut self, value: f64) -> Self {
        match &mut self {
            InverterConfig::Gfm { k_gfm, .. } => *k_gfm = value,
            InverterConfig::Gfl { k_pll, .. } | InverterConfig::Gsp { k_pll, .. } => *k_pll = value,
        }
        self
    }

    /// Copy with the TVC droop replaced (no-op unless GSP).
    pub fn with_m_q(mut self, value: f64) -> Self {
        if let InverterConfig::Gsp { m_q, .. } = &mut self {
            *m_q = value;
        }
        self
    }

    /// Copy with the PLL integral gain replaced (no-op for GFM).
    pub fn with_k_i(mut self, value: f64) -> Self {
        match &mut self {
            InverterConfig::Gfm { .. } => {}
            InverterConfig::Gfl { k_i, .. } | InverterConfig::Gsp { k_i, .. } => *k_i = value,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(invalid(alloc::format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let positive = |v: f64, name: &str| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(alloc::format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match *self {
            InverterConfig::Gfm { k_gfm, p_ref, v_mag } => {
                positive(k_gfm, "k_gfm")?;
                if !p_ref.is_finite() {
                    return Err(invalid("p_ref must be finite"));
                }
                positive(v_mag, "v_mag")
            }
            InverterConfig::Gfl { k_pll, k_i, i_d, omega_limit } => {
                positive(k_pll, "k_pll")?;
                finite_nonneg(k_i, "k_i")?;
                if !i_d.is_finite() {
                    return Err(invalid("i_d must be finite"));
                }
                omega_limit.map_or(Ok(()), |w| positive(w, "omega_limit"))
            }
            InverterConfig::Gsp { k_pll, k_i, i_d, m_q, v_ref, omega_limit } => {
                positive(k_pll, "k_pll")?;
                finite_nonneg(k_i, "k_i")?;
                finite_nonneg(m_q, "m_q")?;
                positive(v_ref, "v_ref")?;
                if !i_d.is_finite() {
                    return Err(invalid("i_d must be finite"));
                }
                omega_limit.map_or(Ok(()), |w| positive(w, "omega_limit"))
            }
        }
    }
}

/// Line reactances of the star network and the infinite-bus voltage (p.u.).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub x1: f64,
    pub x2: f64,
    pub xg: f64,
    pub ug: f64,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        for (v, name) in [(self.x1, "x1"), (self.x2, "x2"), (self.xg, "xg"), (self.ug, "ug")] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(alloc::format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn swapped(&self) -> Self {
        NetworkParams { x1: self.x2, x2: self.x1, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedImpedances {
    pub x_d12: f64,
    pub x_dg1: f64,
    pub x_dg2: f64,
    pub x_1sum: f64,
    pub x_2sum: f64,
    /// X1 + X2 // Xg
    pub x_1p2g: f64,
    /// X2 + X1 // Xg
    pub x_2p1g: f64,
}

pub fn derive_impedances(net: &NetworkParams) -> Result<DerivedImpedances> {
    net.validate()?;
    let NetworkParams { x1, x2, xg, .. } = *net;
    let s = x1 * x2 + x1 * xg + x2 * xg;
    Ok(DerivedImpedances {
        x_d12: s / xg,
        x_dg1: s / x2,
        x_dg2: s / x1,
        x_1sum: x1 + xg,
        x_2sum: x2 + xg,
        x_1p2g: x1 + xg * x2 / (xg + x2),
        x_2p1g: x2 + xg * x1 / (xg + x1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoInverterSystem {
    pub ibr1: InverterConfig,
    pub ibr2: InverterConfig,
    pub network: NetworkParams,
}

/// The five supported combinations in the orientation used by the dynamic
/// equations; any other ordering is handled by swapping the two slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combination {
    GfmGfm,
    GflGfm,
    GflGfl,
    GflGsp,
    GspGfm,
}

impl Combination {
    pub fn has_gsp(self) -> bool {
        matches!(self, Combination::GflGsp | Combination::GspGfm)
    }
}

impl TwoInverterSystem {
    pub fn new(ibr1: InverterConfig, ibr2: InverterConfig, network: NetworkParams) -> Self {
        TwoInverterSystem { ibr1, ibr2, network }
    }

    pub fn validate(&self) -> Result<()> {
        self.ibr1.validate()?;
        self.ibr2.validate()?;
        self.network.validate()?;
        self.orientation().map(|_| ())
    }

    /// Slot-exchanged copy (IBR1 <-> IBR2, X1 <-> X2).
    pub fn swapped(&self) -> Self {
        TwoInverterSystem {
            ibr1: self.ibr2,
            ibr2: self.ibr1,
            network: self.network.swapped(),
        }
    }

    /// Canonical combination and whether the slots must be exchanged to reach it.
    pub fn orientation(&self) -> Result<(Combination, bool)> {
        use InverterKind::*;
        let (k1, k2) = (self.ibr1.effective_kind(), self.ibr2.effective_kind());
        Ok(match (k1, k2) {
            (Gfm, Gfm) => (Combination::GfmGfm, false),
            (Gfl, Gfm) => (Combination::GflGfm, false),
            (Gfm, Gfl) => (Combination::GflGfm, true),
            (Gfl, Gfl) => (Combination::GflGfl, false),
            (Gfl, Gsp) => (Combination::GflGsp, false),
            (Gsp, Gfl) => (Combination::GflGsp, true),
            (Gsp, Gfm) => (Combination::GspGfm, false),
            (Gfm, Gsp) => (Combination::GspGfm, true),
            (Gsp, Gsp) => return Err(Error::UnsupportedCombination(self.ibr1.kind(), self.ibr2.kind())),
        })
    }

    /// The system in canonical orientation.
    pub fn canonical(&self) -> Result<(Combination, bool, TwoInverterSystem)> {
        let (combo, swapped) = self.orientation()?;
        Ok((combo, swapped, if swapped { self.swapped() } else { *self }))
    }

    pub fn with_network(&self, network: NetworkParams) -> Self {
        TwoInverterSystem { network, ..*self }
    }
}

/// Coefficients of the generalized two-angle form
///
/// ```text
/// d1' = k1 [C1 - A1 sin(d1-d2) - B1 sin d1 + D1 cos(d1-d2)]
/// d2' = k2 [C2 - A2 sin(d2-d1) - B2 sin d2 + D2 cos(d1-d2)]
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralizedCoefficients {
    pub k1: f64,
    pub k2: f64,
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub d1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
    pub d2: f64,
}

impl GeneralizedCoefficients {
    pub fn swapped(&self) -> Self {
        GeneralizedCoefficients {
            k1: self.k2,
            k2: self.k1,
            a1: self.a2,
            b1: self.b2,
            c1: self.c2,
            d1: self.d2,
            a2: self.a1,
            b2: self.b1,
            c2: self.c1,
            d2: self.d1,
        }
    }

    pub fn is_cosine_free(&self) -> bool {
        self.d1.abs() < 1e-12 && self.d2.abs() < 1e-12
    }

    pub fn rhs(&self, d1: f64, d2: f64) -> [f64; 2] {
        let u = d1 - d2;
        let (su, cu) = u.sin_cos();
        [
            self.k1 * (self.c1 - self.a1 * su - self.b1 * d1.sin() + self.d1 * cu),
            self.k2 * (self.c2 + self.a2 * su - self.b2 * d2.sin() + self.d2 * cu),
        ]
    }

    pub fn jacobian(&self, d1: f64, d2: f64) -> [[f64; 2]; 2] {
        let (su, cu) = (d1 - d2).sin_cos();
        let j12 = self.k1 * (self.a1 * cu + self.d1 * su);
        let j21 = self.k2 * (self.a2 * cu - self.d2 * su);
        [
            [-j12 - self.k1 * self.b1 * d1.cos(), j12],
            [j21, -j21 - self.k2 * self.b2 * d2.cos()],
        ]
    }
}

fn gfm_fields(c: &InverterConfig) -> (f64, f64, f64) {
    match *c {
        InverterConfig::Gfm { k_gfm, p_ref, v_mag } => (k_gfm, p_ref, v_mag),
        _ => unreachable!("slot is not GFM in this orientation"),
    }
}

fn pll_fields(c: &InverterConfig) -> (f64, f64) {
    match *c {
        InverterConfig::Gfl { k_pll, i_d, .. } | InverterConfig::Gsp { k_pll, i_d, .. } => (k_pll, i_d),
        _ => unreachable!("slot is not PLL-based in this orientation"),
    }
}

fn tvc_fields(c: &InverterConfig) -> (f64, f64) {
    match *c {
        InverterConfig::Gsp { m_q, v_ref, .. } => (m_q, v_ref),
        _ => unreachable!("slot is not GSP in this orientation"),
    }
}

/// Parameters of a canonically oriented system, unpacked for the right-hand sides.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Unpacked {
    pub combo: Combination,
    pub swapped: bool,
    pub net: NetworkParams,
    pub imp: DerivedImpedances,
    pub sys: TwoInverterSystem,
}

impl Unpacked {
    pub fn new(sys: &TwoInverterSystem) -> Result<Self> {
        sys.ibr1.validate()?;
        sys.ibr2.validate()?;
        let (combo, swapped, canon) = sys.canonical()?;
        Ok(Unpacked {
            combo,
            swapped,
            net: canon.network,
            imp: derive_impedances(&canon.network)?,
            sys: canon,
        })
    }

    pub fn gfm1(&self) -> (f64, f64, f64) {
        gfm_fields(&self.sys.ibr1)
    }
    pub fn gfm2(&self) -> (f64, f64, f64) {
        gfm_fields(&self.sys.ibr2)
    }
    pub fn pll1(&self) -> (f64, f64) {
        pll_fields(&self.sys.ibr1)
    }
    pub fn pll2(&self) -> (f64, f64) {
        pll_fields(&self.sys.ibr2)
    }
    pub fn tvc1(&self) -> (f64, f64) {
        tvc_fields(&self.sys.ibr1)
    }
    pub fn tvc2(&self) -> (f64, f64) {
        tvc_fields(&self.sys.ibr2)
    }

    /// Canonical-orientation coefficients (GSP combinations in their
    /// perfect-voltage-control, fast-partner limit).
    pub fn coefficients(&self) -> GeneralizedCoefficients {
        let NetworkParams { x2, xg, ug, .. } = self.net;
        let z = &self.imp;
        match self.combo {
            Combination::GfmGfm => {
                let (k1, p1, v1) = self.gfm1();
                let (k2, p2, v2) = self.gfm2();
                GeneralizedCoefficients {
                    k1,
                    a1: v1 * v2 / z.x_d12,
                    b1: v1 * ug / z.x_dg1,
                    c1: p1,
                    d1: 0.0,
                    k2,
                    a2: v1 * v2 / z.x_d12,
                    b2: v2 * ug / z.x_dg2,
                    c2: p2,
                    d2: 0.0,
                }
            }
            Combination::GflGfm => {
                let (k1, i1) = self.pll1();
                let (k2, p, v2) = self.gfm2();
                GeneralizedCoefficients {
                    k1,
                    a1: xg * v2 / z.x_2sum,
                    b1: x2 * ug / z.x_2sum,
                    c1: z.x_1p2g * i1,
                    d1: 0.0,
                    k2,
                    a2: 0.0,
                    b2: ug * v2 / z.x_2sum,
                    c2: p,
                    d2: xg * i1 * v2 / z.x_2sum,
                }
            }
            Combination::GflGfl => {
                let (k1, i1) = self.pll1();
                let (k2, i2) = self.pll2();
                GeneralizedCoefficients {
                    k1,
                    a1: 0.0,
                    b1: ug,
                    c1: z.x_1sum * i1,
                    d1: xg * i2,
                    k2,
                    a2: 0.0,
                    b2: ug,
                    c2: z.x_2sum * i2,
                    d2: xg * i1,
                }
            }
            Combination::GflGsp => {
                let (k1, i1) = self.pll1();
                let (k2, i2) = self.pll2();
                let (_, v_ref) = self.tvc2();
                GeneralizedCoefficients {
                    k1,
                    a1: xg * v_ref / z.x_2sum,
                    b1: x2 * ug / z.x_2sum,
                    c1: z.x_1p2g * i1,
                    d1: 0.0,
                    k2,
                    a2: 0.0,
                    b2: ug,
                    c2: z.x_2sum * i2,
                    d2: xg * i1,
                }
            }
            Combination::GspGfm => {
                let (k1, i1) = self.pll1();
                let (_, v_ref) = self.tvc1();
                let (k2, p, v2) = self.gfm2();
                GeneralizedCoefficients {
                    k1,
                    a1: xg * v2 / z.x_2sum,
                    b1: x2 * ug / z.x_2sum,
                    c1: z.x_1p2g * i1,
                    d1: 0.0,
                    k2,
                    a2: v_ref * v2 / z.x_d12,
                    b2: v2 * ug / z.x_dg2,
                    c2: p,
                    d2: 0.0,
                }
            }
        }
    }
}

/// Generalized-form coefficients of `sys` in its own slot order.
///
/// Combinations with a GSP unit (`m_q > 0`) return the limit form with ideal
/// voltage control and a fast partner PLL; the exact coupled dynamics are in
/// [`crate::dynamics`]. A GSP unit with `m_q = 0` maps exactly like GFL.
pub fn to_generalized(sys: &TwoInverterSystem) -> Result<GeneralizedCoefficients> {
    let u = Unpacked::new(sys)?;
    let c = u.coefficients();
    Ok(if u.swapped { c.swapped() } else { c })
}

fn default_xg_factor() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FaultKind {
    /// Fault to ground on one of the two parallel grid circuits.
    LineFault {
        /// Distance from the infinite bus as a fraction of the circuit.
        position_frac: f64,
        r_fault: f64,
        #[serde(default = "default_xg_factor")]
        post_fault_xg_factor: f64,
    },
    /// Remote voltage sag at the infinite bus.
    VoltageSag { ug_during: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultSpec {
    #[serde(flatten)]
    pub kind: FaultKind,
    #[serde(default)]
    pub t_start: f64,
}

impl FaultSpec {
    pub fn line(position_frac: f64, r_fault: f64) -> Self {
        FaultSpec {
            kind: FaultKind::LineFault { position_frac, r_fault, post_fault_xg_factor: 2.0 },
            t_start: 0.0,
        }
    }

    pub fn voltage_sag(ug_during: f64) -> Self {
        FaultSpec { kind: FaultKind::VoltageSag { ug_during }, t_start: 0.0 }
    }

    pub fn validate(&self, net: &NetworkParams) -> Result<()> {
        match self.kind {
            FaultKind::LineFault { position_frac, r_fault, post_fault_xg_factor } => {
                if !(0.0..=1.0).contains(&position_frac) {
                    return Err(invalid("position_frac must lie in [0, 1]"));
                }
                if !(r_fault.is_finite() && r_fault > 0.0) {
                    return Err(invalid("r_fault must be finite and > 0"));
                }
                if !(post_fault_xg_factor.is_finite() && post_fault_xg_factor > 0.0) {
                    return Err(invalid("post_fault_xg_factor must be finite and > 0"));
                }
            }
            FaultKind::VoltageSag { ug_during } => {
                if !(ug_during >= 0.0 && ug_during <= net.ug) {
                    return Err(invalid("ug_during must lie in [0, ug]"));
                }
            }
        }
        if !self.t_start.is_finite() {
            return Err(invalid("t_start must be finite"));
        }
        Ok(())
    }
}

/// Thevenin equivalent (voltage, impedance) of the faulted grid seen from the
/// common bus. The pre-fault grid line is two parallel circuits of
/// `factor * xg`; the fault sits on one of them at `position_frac` from the
/// infinite bus.
pub fn faulted_grid_thevenin(
    xg: f64,
    ug: f64,
    factor: f64,
    position_frac: f64,
    r_fault: f64,
) -> (Complex64, Complex64) {
    let j = Complex64::i();
    let x_circuit = factor * xg;
    let z_healthy = j * x_circuit;
    let z_near = j * (x_circuit * position_frac);
    let z_far = j * (x_circuit * (1.0 - position_frac));
    let rf = Complex64::new(r_fault, 0.0);
    let u = Complex64::new(ug, 0.0);
    // Faulted circuit reduced at the fault node, then through the far section.
    let v_fault = u * rf / (rf + z_near);
    let z_fault = rf * z_near / (rf + z_near);
    let z_faulted = z_fault + z_far;
    let z = z_healthy * z_faulted / (z_healthy + z_faulted);
    let v = (u / z_healthy + v_fault / z_faulted) * z;
    (v, z)
}

/// Fault-on and post-fault systems for a fault applied to `sys`.
pub fn apply_fault(
    sys: &TwoInverterSystem,
    spec: &FaultSpec,
) -> Result<(TwoInverterSystem, TwoInverterSystem)> {
    sys.network.validate()?;
    spec.validate(&sys.network)?;
    let net = sys.network;
    match spec.kind {
        FaultKind::LineFault { position_frac, r_fault, post_fault_xg_factor } => {
            let (v, z) = faulted_grid_thevenin(net.xg, net.ug, post_fault_xg_factor, position_frac, r_fault);
            if z.norm() < 1e-9 || z.im <= 0.0 {
                return Err(Error::DegenerateFault(z.norm()));
            }
            let fault_on = sys.with_network(NetworkParams { xg: z.im, ug: v.norm(), ..net });
            let post = sys.with_network(NetworkParams { xg: post_fault_xg_factor * net.xg, ..net });
            Ok((fault_on, post))
        }
        FaultKind::VoltageSag { ug_during } => {
            let fault_on = sys.with_network(NetworkParams { ug: ug_during, ..net });
            Ok((fault_on, *sys))
        }
    }
}
