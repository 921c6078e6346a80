//! Right-hand sides of the reduced models and the time integrators.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::Mat2;
use crate::network::{Combination, GeneralizedCoefficients, TwoInverterSystem, Unpacked};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State2 {
    pub d1: f64,
    pub d2: f64,
}

impl State2 {
    pub fn new(d1: f64, d2: f64) -> Self {
        State2 { d1, d2 }
    }
    pub fn to_array(self) -> [f64; 2] {
        [self.d1, self.d2]
    }
}

impl From<[f64; 2]> for State2 {
    fn from(a: [f64; 2]) -> Self {
        State2 { d1: a[0], d2: a[1] }
    }
}

/// Angles plus the PI-PLL integral states (`z = ∫ V_q dt`; zero for GFM slots).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State4 {
    pub d1: f64,
    pub z1: f64,
    pub d2: f64,
    pub z2: f64,
}

impl State4 {
    pub fn to_array(self) -> [f64; 4] {
        [self.d1, self.z1, self.d2, self.z2]
    }
}

impl From<[f64; 4]> for State4 {
    fn from(a: [f64; 4]) -> Self {
        State4 { d1: a[0], z1: a[1], d2: a[2], z2: a[3] }
    }
}

impl From<State2> for State4 {
    fn from(s: State2) -> Self {
        State4 { d1: s.d1, z1: 0.0, d2: s.d2, z2: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RhsMode {
    /// Complete coupled equations, including the voltage-control feedback of GSP units.
    #[default]
    Exact,
    /// Generalized two-angle form.
    Generalized,
    /// Exact angles plus PI-PLL integral states.
    FullOrder,
}

pub trait VectorField<const N: usize> {
    fn eval(&self, x: &[f64; N]) -> [f64; N];
}

impl<const N: usize, F: Fn(&[f64; N]) -> [f64; N]> VectorField<N> for F {
    fn eval(&self, x: &[f64; N]) -> [f64; N] {
        self(x)
    }
}

/// A system compiled for fast evaluation in a given mode.
#[derive(Debug, Clone, Copy)]
pub struct Model {
    u: Unpacked,
    coeffs: GeneralizedCoefficients,
    mode: RhsMode,
    // Per user slot.
    gain: [f64; 2],
    k_i: [f64; 2],
    pll: [bool; 2],
    omega_limit: [Option<f64>; 2],
}

impl Model {
    pub fn new(sys: &TwoInverterSystem, mode: RhsMode) -> Result<Self> {
        let u = Unpacked::new(sys)?;
        let slots = [sys.ibr1, sys.ibr2];
        Ok(Model {
            u,
            coeffs: u.coefficients(),
            mode,
            gain: slots.map(|c| c.gain()),
            k_i: slots.map(|c| c.k_i()),
            pll: slots.map(|c| c.is_pll()),
            omega_limit: slots.map(|c| c.omega_limit()),
        })
    }

    pub fn mode(&self) -> RhsMode {
        self.mode
    }

    pub fn combination(&self) -> Combination {
        self.u.combo
    }

    pub fn gains(&self) -> [f64; 2] {
        self.gain
    }

    /// Generalized coefficients in user slot order.
    pub fn coefficients(&self) -> GeneralizedCoefficients {
        if self.u.swapped {
            self.coeffs.swapped()
        } else {
            self.coeffs
        }
    }

    fn canon(&self, x: [f64; 2]) -> [f64; 2] {
        if self.u.swapped {
            [x[1], x[0]]
        } else {
            x
        }
    }

    /// Angle derivatives. In `FullOrder` mode this is the reduced part (`k_pll V_q`).
    pub fn rhs(&self, x: [f64; 2]) -> [f64; 2] {
        let c = self.canon(x);
        let r = match self.mode {
            RhsMode::Generalized => self.coeffs.rhs(c[0], c[1]),
            RhsMode::Exact | RhsMode::FullOrder => self.exact(c[0], c[1]),
        };
        self.canon(r)
    }

    pub fn jacobian(&self, x: [f64; 2]) -> Mat2 {
        let c = self.canon(x);
        let j = match self.mode {
            RhsMode::Generalized => self.coeffs.jacobian(c[0], c[1]),
            RhsMode::Exact | RhsMode::FullOrder => self.exact_jacobian(c[0], c[1]),
        };
        if self.u.swapped {
            [[j[1][1], j[1][0]], [j[0][1], j[0][0]]]
        } else {
            j
        }
    }

    /// Full-order derivative `(d1, z1, d2, z2)`.
    pub fn rhs4(&self, x: [f64; 4]) -> [f64; 4] {
        let f = self.rhs([x[0], x[2]]);
        let z = [x[1], x[3]];
        let mut out = [0.0; 4];
        for i in 0..2 {
            if self.pll[i] {
                let vq = f[i] / self.gain[i];
                let mut dd = f[i] + self.k_i[i] * z[i];
                if let Some(w) = self.omega_limit[i] {
                    dd = dd.max(-w).min(w);
                }
                out[2 * i] = dd;
                out[2 * i + 1] = vq;
            } else {
                out[2 * i] = f[i];
            }
        }
        out
    }

    fn exact(&self, d1: f64, d2: f64) -> [f64; 2] {
        match self.u.combo {
            Combination::GflGsp => self.gfl_gsp(d1, d2).0,
            Combination::GspGfm => self.gsp_gfm(d1, d2).0,
            _ => self.coeffs.rhs(d1, d2),
        }
    }

    fn exact_jacobian(&self, d1: f64, d2: f64) -> Mat2 {
        match self.u.combo {
            Combination::GflGsp => self.gfl_gsp(d1, d2).1,
            Combination::GspGfm => self.gsp_gfm(d1, d2).1,
            _ => self.coeffs.jacobian(d1, d2),
        }
    }

    // GFL in slot 1, GSP in slot 2. The GSP reactive current enters the GFL
    // q-axis voltage through the grid reactance.
    fn gfl_gsp(&self, d1: f64, d2: f64) -> ([f64; 2], Mat2) {
        let net = self.u.net;
        let z = &self.u.imp;
        let (k1, i1) = self.u.pll1();
        let (k2, i2) = self.u.pll2();
        let (mq, v_ref) = self.u.tvc2();
        let xg = net.xg;
        let ug = net.ug;
        let alpha = mq * z.x_2sum / (1.0 + mq * z.x_2sum);
        let r = xg / z.x_2sum;
        let (su, cu) = (d1 - d2).sin_cos();
        let (s1, c1) = d1.sin_cos();
        let (s2, c2) = d2.sin_cos();

        // q = X2sum * I2q
        let q = alpha * (ug * c2 - xg * i1 * su - v_ref);
        let q_1 = -alpha * xg * i1 * cu;
        let q_2 = alpha * (-ug * s2 + xg * i1 * cu);

        let f1 = z.x_1sum * i1 + xg * i2 * cu - ug * s1 + r * q * su;
        let f2 = z.x_2sum * i2 + xg * i1 * cu - ug * s2;
        let j11 = -xg * i2 * su - ug * c1 + r * (q_1 * su + q * cu);
        let j12 = xg * i2 * su + r * (q_2 * su - q * cu);
        let j21 = -xg * i1 * su;
        let j22 = xg * i1 * su - ug * c2;
        ([k1 * f1, k2 * f2], [[k1 * j11, k1 * j12], [k2 * j21, k2 * j22]])
    }

    // GSP in slot 1, GFM in slot 2. The GSP reactive current changes the
    // active power delivered by the GFM unit.
    fn gsp_gfm(&self, d1: f64, d2: f64) -> ([f64; 2], Mat2) {
        let net = self.u.net;
        let z = &self.u.imp;
        let (_, i1) = self.u.pll1();
        let (mq, v_ref) = self.u.tvc1();
        let (k2, p, v2) = self.u.gfm2();
        let (xg, x2, ug) = (net.xg, net.x2, net.ug);
        let alpha = mq * z.x_1p2g / (1.0 + mq * z.x_1p2g);
        let r = xg / z.x_2sum;
        let (su, cu) = (d1 - d2).sin_cos();
        let (s1, c1) = d1.sin_cos();
        let (s2, c2) = d2.sin_cos();

        let w = r * v2 * cu + (x2 / z.x_2sum) * ug * c1 - v_ref;
        let iq = alpha * w / z.x_1p2g;
        let iq_1 = alpha / z.x_1p2g * (-r * v2 * su - (x2 / z.x_2sum) * ug * s1);
        let iq_2 = alpha / z.x_1p2g * (r * v2 * su);

        let c = &self.coeffs;
        let a = xg * i1 * v2 / z.x_2sum;
        let b = ug * v2 / z.x_2sum;
        let f2 = p + a * cu - b * s2 - r * v2 * iq * su;
        let j21 = -a * su - r * v2 * (iq_1 * su + iq * cu);
        let j22 = a * su - b * c2 - r * v2 * (iq_2 * su - iq * cu);
        let f1 = c.rhs(d1, d2)[0];
        let j1 = c.jacobian(d1, d2)[0];
        ([f1, k2 * f2], [j1, [k2 * j21, k2 * j22]])
    }
}

impl VectorField<2> for Model {
    fn eval(&self, x: &[f64; 2]) -> [f64; 2] {
        self.rhs(*x)
    }
}

impl VectorField<4> for Model {
    fn eval(&self, x: &[f64; 4]) -> [f64; 4] {
        self.rhs4(*x)
    }
}

/// One-shot evaluation of the angle derivatives.
pub fn rhs(sys: &TwoInverterSystem, mode: RhsMode, state: State2) -> Result<State2> {
    Ok(Model::new(sys, mode)?.rhs(state.to_array()).into())
}

/// One-shot evaluation of the full-order derivative.
pub fn rhs_full(sys: &TwoInverterSystem, state: State4) -> Result<State4> {
    Ok(Model::new(sys, RhsMode::FullOrder)?.rhs4(state.to_array()).into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    Rk4Fixed,
    #[default]
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSettings {
    pub method: Method,
    /// Fixed step (RK4) or initial step (RK45).
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_max: f64,
    /// Arc length cap in the angle plane.
    #[serde(with = "unbounded")]
    pub max_arc_length: f64,
    /// Half-width of the angle box around the reference point.
    #[serde(with = "unbounded")]
    pub domain_box: f64,
    pub max_step: f64,
    /// Upper bound on the angle-plane distance covered by one step.
    #[serde(with = "unbounded")]
    pub max_step_arc: f64,
    /// Time resolution of event refinement; defaults to `dt * 1e-3`.
    pub event_tol: Option<f64>,
}

/// `null` stands for an infinite limit.
mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            method: Method::Rk45Adaptive,
            dt: 1e-3,
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_max: 10.0,
            max_arc_length: 50.0,
            domain_box: core::f64::consts::PI,
            max_step: 0.05,
            max_step_arc: f64::INFINITY,
            event_tol: None,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && !v.is_nan();
        if !(pos(self.dt) && self.dt.is_finite()) {
            return Err(invalid("dt must be finite and > 0"));
        }
        if !(pos(self.rel_tol) && pos(self.abs_tol)) {
            return Err(invalid("tolerances must be > 0"));
        }
        if !(pos(self.t_max) && pos(self.max_arc_length) && pos(self.domain_box)) {
            return Err(invalid("t_max, max_arc_length and domain_box must be > 0"));
        }
        if !(pos(self.max_step) && pos(self.max_step_arc)) {
            return Err(invalid("step limits must be > 0"));
        }
        if let Some(e) = self.event_tol {
            if !pos(e) {
                return Err(invalid("event_tol must be > 0"));
            }
        }
        Ok(())
    }

    /// The same settings with tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        IntegratorSettings {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }

    fn event_resolution(&self) -> f64 {
        self.event_tol.unwrap_or(self.dt * 1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Crossing {
    Rising,
    Falling,
    Either,
}

pub struct Event<'a, const N: usize> {
    pub func: &'a dyn Fn(f64, &[f64; N]) -> f64,
    pub crossing: Crossing,
}

impl<const N: usize> Event<'_, N> {
    fn triggered(&self, g0: f64, g1: f64) -> bool {
        match self.crossing {
            Crossing::Rising => g0 < 0.0 && g1 >= 0.0,
            Crossing::Falling => g0 > 0.0 && g1 <= 0.0,
            Crossing::Either => (g0 < 0.0 && g1 >= 0.0) || (g0 > 0.0 && g1 <= 0.0),
        }
    }
}

/// Options of a single integration run.
pub struct Run<'a, const N: usize> {
    pub direction: Direction,
    /// Centre of the domain box; the starting angles when absent.
    pub box_center: Option<[f64; 2]>,
    pub events: &'a [Event<'a, N>],
    /// Called after every accepted step; returning true ends the run.
    pub stop: Option<&'a dyn Fn(f64, &[f64; N]) -> bool>,
}

impl<const N: usize> Run<'_, N> {
    pub fn new(direction: Direction) -> Self {
        Run { direction, box_center: None, events: &[], stop: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    TimeLimit,
    ArcLengthCap,
    DomainExit,
    Event(usize),
    Stopped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<const N: usize> {
    /// `(t, state)`; `t` is negative for backward runs.
    pub samples: Vec<(f64, [f64; N])>,
    pub termination: Termination,
}

impl<const N: usize> Trajectory<N> {
    pub fn last(&self) -> (f64, [f64; N]) {
        *self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn states(&self) -> impl Iterator<Item = [f64; N]> + '_ {
        self.samples.iter().map(|s| s.1)
    }
}

pub(crate) fn angles<const N: usize>(x: &[f64; N]) -> [f64; 2] {
    match N {
        1 => [x[0], 0.0],
        4 => [x[0], x[2]],
        _ => [x[0], x[1]],
    }
}

fn axpy<const N: usize>(x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *x;
    for (c, k) in terms {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

struct Signed<'a, F, const N: usize> {
    f: &'a F,
    sign: f64,
}

impl<F: VectorField<N>, const N: usize> Signed<'_, F, N> {
    fn eval(&self, x: &[f64; N]) -> [f64; N] {
        let mut v = self.f.eval(x);
        if self.sign < 0.0 {
            for e in v.iter_mut() {
                *e = -*e;
            }
        }
        v
    }
}

fn rk4_step<F: VectorField<N>, const N: usize>(f: &Signed<F, N>, x: &[f64; N], k1: &[f64; N], h: f64) -> [f64; N] {
    let k2 = f.eval(&axpy(x, h, &[(0.5, k1)]));
    let k3 = f.eval(&axpy(x, h, &[(0.5, &k2)]));
    let k4 = f.eval(&axpy(x, h, &[(1.0, &k3)]));
    axpy(x, h, &[(1.0 / 6.0, k1), (1.0 / 3.0, &k2), (1.0 / 3.0, &k3), (1.0 / 6.0, &k4)])
}

// Dormand-Prince 5(4). Returns the fifth-order solution, its derivative (FSAL)
// and the embedded error estimate.
fn dp_step<F: VectorField<N>, const N: usize>(
    f: &Signed<F, N>,
    x: &[f64; N],
    k1: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N], [f64; N]) {
    let k2 = f.eval(&axpy(x, h, &[(1.0 / 5.0, k1)]));
    let k3 = f.eval(&axpy(x, h, &[(3.0 / 40.0, k1), (9.0 / 40.0, &k2)]));
    let k4 = f.eval(&axpy(x, h, &[(44.0 / 45.0, k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]));
    let k5 = f.eval(&axpy(
        x,
        h,
        &[
            (19372.0 / 6561.0, k1),
            (-25360.0 / 2187.0, &k2),
            (64448.0 / 6561.0, &k3),
            (-212.0 / 729.0, &k4),
        ],
    ));
    let k6 = f.eval(&axpy(
        x,
        h,
        &[
            (9017.0 / 3168.0, k1),
            (-355.0 / 33.0, &k2),
            (46732.0 / 5247.0, &k3),
            (49.0 / 176.0, &k4),
            (-5103.0 / 18656.0, &k5),
        ],
    ));
    let y = axpy(
        x,
        h,
        &[
            (35.0 / 384.0, k1),
            (500.0 / 1113.0, &k3),
            (125.0 / 192.0, &k4),
            (-2187.0 / 6784.0, &k5),
            (11.0 / 84.0, &k6),
        ],
    );
    let k7 = f.eval(&y);
    const E: [f64; 7] = [
        35.0 / 384.0 - 5179.0 / 57600.0,
        0.0,
        500.0 / 1113.0 - 7571.0 / 16695.0,
        125.0 / 192.0 - 393.0 / 640.0,
        -2187.0 / 6784.0 + 92097.0 / 339200.0,
        11.0 / 84.0 - 187.0 / 2100.0,
        -1.0 / 40.0,
    ];
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E[0] * k1[i] + E[2] * k3[i] + E[3] * k4[i] + E[4] * k5[i] + E[5] * k6[i] + E[6] * k7[i]);
    }
    (y, k7, err)
}

fn finite<const N: usize>(x: &[f64; N]) -> bool {
    x.iter().all(|v| v.is_finite())
}

fn failure<const N: usize>(time: f64, samples: &[(f64, [f64; N])]) -> Error {
    Error::IntegrationFailed {
        time,
        partial: samples.iter().map(|(t, x)| (*t, x.to_vec())).collect(),
    }
}

/// Single steps of a chosen method, for callers that drive their own loop.
pub struct Stepper<'a, F, const N: usize> {
    f: Signed<'a, F, N>,
    method: Method,
}

impl<'a, F: VectorField<N>, const N: usize> Stepper<'a, F, N> {
    pub fn new(f: &'a F, method: Method, direction: Direction) -> Self {
        let sign = if direction == Direction::Forward { 1.0 } else { -1.0 };
        Stepper { f: Signed { f, sign }, method }
    }

    /// Advances `x` by `h` (in the run direction) without error control.
    pub fn step(&self, x: &[f64; N], h: f64) -> [f64; N] {
        let k1 = self.f.eval(x);
        match self.method {
            Method::Rk4Fixed => rk4_step(&self.f, x, &k1, h),
            Method::Rk45Adaptive => dp_step(&self.f, x, &k1, h).0,
        }
    }
}

/// Integrates `field` from `x0` with no events.
pub fn integrate<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    settings: &IntegratorSettings,
    direction: Direction,
) -> Result<Trajectory<N>> {
    integrate_with(field, x0, settings, &Run::new(direction))
}

/// Integrates `field` from `x0` until `t_max`, the arc-length cap, exit from the
/// domain box, a triggered event or the stop callback, whichever comes first.
/// Event and box-exit times are refined by bisection.
pub fn integrate_with<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    settings: &IntegratorSettings,
    run: &Run<N>,
) -> Result<Trajectory<N>> {
    settings.validate()?;
    if !finite(&x0) {
        return Err(invalid("initial state must be finite"));
    }
    let stepper = Stepper::new(field, settings.method, run.direction);
    let sgn = if run.direction == Direction::Forward { 1.0 } else { -1.0 };
    let center = run.box_center.unwrap_or_else(|| angles(&x0));
    let hw = settings.domain_box;
    let box_g = |x: &[f64; N]| {
        let a = angles(x);
        (a[0] - center[0]).abs().max((a[1] - center[1]).abs()) - hw
    };
    let ev_res = settings.event_resolution();

    let mut samples: Vec<(f64, [f64; N])> = Vec::new();
    samples.push((0.0, x0));
    let mut tau = 0.0;
    let mut x = x0;
    let mut k = stepper.f.eval(&x);
    if !finite(&k) {
        return Err(failure(0.0, &samples));
    }
    let mut arc = 0.0;
    let mut h = settings.dt.min(settings.t_max);
    let mut g_prev: Vec<f64> = run.events.iter().map(|e| (e.func)(0.0, &x)).collect();
    let mut box_prev = box_g(&x);
    if box_prev > 0.0 {
        return Ok(Trajectory { samples, termination: Termination::DomainExit });
    }

    loop {
        let remaining = settings.t_max - tau;
        if remaining <= 1e-15 * settings.t_max.max(1.0) {
            return Ok(Trajectory { samples, termination: Termination::TimeLimit });
        }
        let (x_new, k_new, h_used) = match settings.method {
            Method::Rk4Fixed => {
                let h_try = settings.dt.min(remaining);
                let y = rk4_step(&stepper.f, &x, &k, h_try);
                if !finite(&y) {
                    return Err(failure(sgn * tau, &samples));
                }
                let ky = stepper.f.eval(&y);
                (y, ky, h_try)
            }
            Method::Rk45Adaptive => {
                let speed = {
                    let a = angles(&k);
                    a[0].hypot(a[1])
                };
                let arc_cap = if speed > 0.0 { settings.max_step_arc / speed } else { f64::INFINITY };
                let mut h_try = h.min(remaining).min(settings.max_step).min(arc_cap);
                loop {
                    if h_try < 1e-13 * tau.abs().max(1.0) {
                        return Err(failure(sgn * tau, &samples));
                    }
                    let (y, ky, err) = dp_step(&stepper.f, &x, &k, h_try);
                    let mut en = 0.0;
                    for i in 0..N {
                        let sc = settings.abs_tol + settings.rel_tol * x[i].abs().max(y[i].abs());
                        en += (err[i] / sc) * (err[i] / sc);
                    }
                    en = (en / N as f64).sqrt();
                    if en.is_finite() && en <= 1.0 && finite(&ky) {
                        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).min(5.0).max(0.2) };
                        h = h_try * fac;
                        break (y, ky, h_try);
                    }
                    let fac = if en.is_finite() { (0.9 * en.powf(-0.25)).max(0.1).min(0.5) } else { 0.1 };
                    h_try *= fac;
                }
            }
        };

        // Events and box exit, refined by bisection on the step fraction.
        let g_new: Vec<f64> = run
            .events
            .iter()
            .map(|e| (e.func)(sgn * (tau + h_used), &x_new))
            .collect();
        let box_new = box_g(&x_new);
        let fired: Option<usize> = run
            .events
            .iter()
            .enumerate()
            .find(|(i, e)| e.triggered(g_prev[*i], g_new[*i]))
            .map(|(i, _)| i);
        let exits = box_prev <= 0.0 && box_new > 0.0;
        if fired.is_some() || exits {
            // Earliest of the candidates on this step.
            let mut best: Option<(f64, [f64; N], Termination)> = None;
            let mut consider = |check: &dyn Fn(f64, &[f64; N]) -> bool, term: Termination| {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                let mut x_hi = x_new;
                while (hi - lo) * h_used > ev_res {
                    let mid = 0.5 * (lo + hi);
                    let xm = stepper.step(&x, mid * h_used);
                    if check(tau + mid * h_used, &xm) {
                        hi = mid;
                        x_hi = xm;
                    } else {
                        lo = mid;
                    }
                }
                if best.as_ref().map_or(true, |b| hi < b.0) {
                    best = Some((hi, x_hi, term));
                }
            };
            for (i, e) in run.events.iter().enumerate() {
                if e.triggered(g_prev[i], g_new[i]) {
                    let g0 = g_prev[i];
                    let check = |t: f64, xm: &[f64; N]| e.triggered(g0, (e.func)(sgn * t, xm));
                    consider(&check, Termination::Event(i));
                }
            }
            if exits {
                consider(&|_, xm: &[f64; N]| box_g(xm) > 0.0, Termination::DomainExit);
            }
            let (frac, xe, term) = best.expect("at least one candidate");
            samples.push((sgn * (tau + frac * h_used), xe));
            return Ok(Trajectory { samples, termination: term });
        }

        let a0 = angles(&x);
        let a1 = angles(&x_new);
        arc += (a1[0] - a0[0]).hypot(a1[1] - a0[1]);
        tau += h_used;
        x = x_new;
        k = k_new;
        g_prev = g_new;
        box_prev = box_new;
        samples.push((sgn * tau, x));
        if arc >= settings.max_arc_length {
            return Ok(Trajectory { samples, termination: Termination::ArcLengthCap });
        }
        if let Some(stop) = run.stop {
            if stop(sgn * tau, &x) {
                return Ok(Trajectory { samples, termination: Termination::Stopped });
            }
        }
    }
}

/// State reached after integrating `field` forward for `duration` (ignores the domain box).
pub fn flow<F: VectorField<N>, const N: usize>(
    field: &F,
    x0: [f64; N],
    duration: f64,
    settings: &IntegratorSettings,
) -> Result<[f64; N]> {
    if duration <= 0.0 {
        return Ok(x0);
    }
    let s = IntegratorSettings {
        t_max: duration,
        domain_box: f64::INFINITY,
        max_arc_length: f64::INFINITY,
        ..*settings
    };
    Ok(integrate(field, x0, &s, Direction::Forward)?.last().1)
}

/// Result of comparing the reduced model with the full-order PI-PLL model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullOrderCheck {
    pub max_deviation: f64,
    pub reduced_final: State2,
    pub full_final: State4,
}

/// Integrates the reduced (exact) and full-order models through consecutive
/// phases `(system, duration)` from the same initial angles and returns the
/// largest angle deviation. PLL integral gains are set to `k_i_ratio * k_pll`.
pub fn reduced_vs_full_check(
    phases: &[(TwoInverterSystem, f64)],
    x0: State2,
    k_i_ratio: f64,
    settings: &IntegratorSettings,
) -> Result<FullOrderCheck> {
    if phases.is_empty() {
        return Err(invalid("at least one phase required"));
    }
    if !phases.iter().any(|(s, _)| s.ibr1.is_pll() || s.ibr2.is_pll()) {
        return Err(Error::NotApplicable("no PLL-based inverter".into()));
    }
    if !(k_i_ratio >= 0.0 && k_i_ratio.is_finite()) {
        return Err(invalid("k_i_ratio must be finite and >= 0"));
    }
    let dt = settings.dt.min(1e-4);
    let mut red = x0.to_array();
    let mut full = State4::from(x0).to_array();
    let mut dev: f64 = 0.0;
    for (sys, duration) in phases {
        let with_ki = |c: crate::network::InverterConfig| c.with_k_i(k_i_ratio * c.gain());
        let full_sys = TwoInverterSystem { ibr1: with_ki(sys.ibr1), ibr2: with_ki(sys.ibr2), ..*sys };
        let reduced = Model::new(sys, RhsMode::Exact)?;
        let fullm = Model::new(&full_sys, RhsMode::FullOrder)?;
        let n = (duration / dt).ceil().max(1.0) as usize;
        let h = duration / n as f64;
        let sr = Stepper::new(&reduced, Method::Rk4Fixed, Direction::Forward);
        let sf = Stepper::new(&fullm, Method::Rk4Fixed, Direction::Forward);
        for _ in 0..n {
            red = sr.step(&red, h);
            full = sf.step(&full, h);
            if !(finite(&red) && finite(&full)) {
                return Err(Error::IntegrationFailed { time: 0.0, partial: Vec::new() });
            }
            dev = dev.max((red[0] - full[0]).abs()).max((red[1] - full[2]).abs());
        }
    }
    Ok(FullOrderCheck {
        max_deviation: dev,
        reduced_final: red.into(),
        full_final: full.into(),
    })
}
