//! Critical clearing radius and time, bisection CCT, clearing angles and the
//! local Lyapunov estimate.

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dynamics::{flow, integrate_with, Crossing, Direction, Event, IntegratorSettings, Model, Run, Termination};
use crate::equilibria::{Equilibrium, EquilibriumKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, Mat2};
use crate::manifold::{contains, point_segment_distance, DoaBoundary, Point};
use crate::network::GeneralizedCoefficients;

/// Shortest distance from the SEP to the manifold part of the boundary.
pub fn ccr(doa: &DoaBoundary) -> f64 {
    let c = doa.sep.state.to_array();
    doa.segments()
        .filter(|s| !s.2)
        .map(|(a, b, _)| point_segment_distance(c, a, b))
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TccrOutcome {
    /// Infinite when the fault-on trajectory never leaves the disk.
    pub t_ccr: f64,
    /// The fault-on trajectory starts outside the disk.
    pub started_outside: bool,
    /// Started outside and never entered: no clearing margin at all.
    pub zero_margin: bool,
}

/// First time the fault-on trajectory from `x0` leaves the closed disk of
/// radius `radius` around `center`. A trajectory starting outside the disk
/// counts from its first entry; if it never enters the result is zero.
pub fn t_ccr(fault_on: &Model, x0: Point, center: Point, radius: f64, settings: &IntegratorSettings) -> Result<TccrOutcome> {
    if !(radius >= 0.0) {
        return Err(invalid("radius must be >= 0"));
    }
    let s = IntegratorSettings {
        domain_box: f64::INFINITY,
        max_arc_length: f64::INFINITY,
        ..*settings
    };
    let g = |_: f64, x: &Point| (x[0] - center[0]).hypot(x[1] - center[1]) - radius;
    let outside = g(0.0, &x0) > 0.0;
    let (mut t0, mut x) = (0.0, x0);
    if outside {
        let events = [Event { func: &g, crossing: Crossing::Falling }];
        let run = Run { events: &events, ..Run::new(Direction::Forward) };
        let tr = integrate_with(fault_on, x0, &s, &run)?;
        if tr.termination != Termination::Event(0) {
            return Ok(TccrOutcome { t_ccr: 0.0, started_outside: true, zero_margin: true });
        }
        (t0, x) = tr.last();
    }
    let events = [Event { func: &g, crossing: Crossing::Rising }];
    let run = Run { events: &events, ..Run::new(Direction::Forward) };
    let rest = IntegratorSettings { t_max: s.t_max - t0, ..s };
    if rest.t_max <= 0.0 {
        return Ok(TccrOutcome { t_ccr: f64::INFINITY, started_outside: outside, zero_margin: false });
    }
    let tr = integrate_with(fault_on, x, &rest, &run)?;
    let t = if tr.termination == Termination::Event(0) { t0 + tr.last().0 } else { f64::INFINITY };
    Ok(TccrOutcome { t_ccr: t, started_outside: outside, zero_margin: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CctOutcome {
    pub cct: f64,
    /// False when the state at `t_hi` is still inside the basin.
    pub bracketed: bool,
}

/// Longest fault duration (to 1e-6 s) for which the fault-on state lies in the
/// post-fault basin.
pub fn cct_bisection(
    fault_on: &Model,
    x0: Point,
    post_doa: &DoaBoundary,
    settings: &IntegratorSettings,
    t_hi: f64,
) -> Result<CctOutcome> {
    if !(t_hi > 0.0 && t_hi.is_finite()) {
        return Err(invalid("t_hi must be finite and > 0"));
    }
    let stable = |t: f64| -> Result<bool> {
        let x = flow(fault_on, x0, t, settings)?;
        let m = contains(post_doa, x);
        Ok(m.inside && !m.wrapped)
    };
    if stable(t_hi)? {
        return Ok(CctOutcome { cct: t_hi, bracketed: false });
    }
    if !stable(0.0)? {
        return Ok(CctOutcome { cct: 0.0, bracketed: true });
    }
    let (mut lo, mut hi) = (0.0, t_hi);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CctOutcome { cct: lo, bracketed: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cca {
    /// Largest boundary angle minus the SEP angle, per axis.
    pub proj: [f64; 2],
    /// Bounding rectangle of the polygon, `(min, max)`.
    pub rect: (Point, Point),
    /// Scalar clearing angle with the partner frozen at its SEP angle.
    pub decoupled: [Option<f64>; 2],
}

pub fn cca(doa: &DoaBoundary, coeffs: &GeneralizedCoefficients) -> Cca {
    let sep = doa.sep.state.to_array();
    let (lo, hi) = doa.extent();
    let (su, cu) = (sep[0] - sep[1]).sin_cos();
    let c_eff = [
        coeffs.c1 - coeffs.a1 * su + coeffs.d1 * cu,
        coeffs.c2 + coeffs.a2 * su + coeffs.d2 * cu,
    ];
    let b = [coeffs.b1, coeffs.b2];
    let decoupled = [0, 1].map(|i| {
        let r = c_eff[i] / b[i];
        if b[i] == 0.0 || !(r.abs() <= 1.0) {
            None
        } else {
            Some(core::f64::consts::PI - r.asin() - sep[i])
        }
    });
    Cca {
        proj: [hi[0] - sep[0], hi[1] - sep[1]],
        rect: (lo, hi),
        decoupled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Solution of `JᵀP + PJ = -I`.
    pub p: Mat2,
    /// Level `c` of the ellipse `xᵀPx ≤ c` around the SEP.
    pub level: f64,
    /// The level was limited by the window rather than by `V' < 0`.
    pub capped: bool,
}

impl LyapunovEstimate {
    pub fn value(&self, sep: Point, x: Point) -> f64 {
        let y = [x[0] - sep[0], x[1] - sep[1]];
        let py = linalg::mul_vec(&self.p, y);
        y[0] * py[0] + y[1] * py[1]
    }

    /// `n` points on the boundary of the ellipse.
    pub fn boundary(&self, sep: Point, n: usize) -> alloc::vec::Vec<Point> {
        let axes = ellipse_axes(&self.p);
        (0..n)
            .map(|i| {
                let th = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
                ellipse_point(&axes, sep, self.level, th)
            })
            .collect()
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// `P` with `JᵀP + PJ = -I`.
pub fn lyapunov_matrix(j: &Mat2) -> Option<Mat2> {
    let a = [
        [2.0 * j[0][0], 2.0 * j[1][0], 0.0],
        [j[0][1], j[0][0] + j[1][1], j[1][0]],
        [0.0, 2.0 * j[0][1], 2.0 * j[1][1]],
    ];
    let p = solve3(a, [-1.0, 0.0, -1.0])?;
    Some([[p[0], p[1]], [p[1], p[2]]])
}

// Principal axes of P scaled by 1/sqrt(eigenvalue).
fn ellipse_axes(p: &Mat2) -> [[f64; 2]; 2] {
    let e = linalg::eigen(p);
    let v1 = e.vectors[0];
    let v2 = [-v1[1], v1[0]];
    let l1 = e.re[0];
    let l2 = p[0][0] + p[1][1] - l1;
    [
        [v1[0] / l1.sqrt(), v1[1] / l1.sqrt()],
        [v2[0] / l2.sqrt(), v2[1] / l2.sqrt()],
    ]
}

fn ellipse_point(axes: &[[f64; 2]; 2], sep: Point, c: f64, th: f64) -> Point {
    let r = c.sqrt();
    let (s, co) = th.sin_cos();
    [
        sep[0] + r * (co * axes[0][0] + s * axes[1][0]),
        sep[1] + r * (co * axes[0][1] + s * axes[1][1]),
    ]
}

/// Quadratic Lyapunov estimate of the basin: the largest ellipse
/// `xᵀPx ≤ c` on whose sampled boundaries `V' < 0`, capped at the window.
pub fn local_lyapunov_estimate(
    model: &Model,
    sep: &Equilibrium,
    sample_count: usize,
    half_width: f64,
) -> Result<LyapunovEstimate> {
    if sep.kind != EquilibriumKind::Sep {
        return Err(Error::NotApplicable("equilibrium is not stable".into()));
    }
    let c0 = sep.state.to_array();
    let j = model.jacobian(c0);
    if !(j[0][0] + j[1][1] < 0.0 && linalg::det(&j) > 0.0) {
        return Err(Error::NotApplicable("Jacobian is not Hurwitz".into()));
    }
    let p = lyapunov_matrix(&j).ok_or_else(|| Error::NotApplicable("singular Lyapunov equation".into()))?;
    if !(p[0][0] > 0.0 && linalg::det(&p) > 0.0) {
        return Err(Error::NotApplicable("Lyapunov solution is not positive definite".into()));
    }
    let n = sample_count.max(8);
    let axes = ellipse_axes(&p);
    let det_p = linalg::det(&p);
    let c_max = half_width * half_width / (p[1][1] / det_p).max(p[0][0] / det_p);
    let decreasing = |c: f64| {
        (0..n).all(|i| {
            let th = 2.0 * core::f64::consts::PI * i as f64 / n as f64;
            let x = ellipse_point(&axes, c0, c, th);
            let y = [x[0] - c0[0], x[1] - c0[1]];
            let f = model.rhs(x);
            let pf = linalg::mul_vec(&p, f);
            2.0 * (y[0] * pf[0] + y[1] * pf[1]) < 0.0
        })
    };
    let grid = 64;
    let mut lo = 0.0;
    for k in 1..=grid {
        let c = c_max * (k as f64 / grid as f64).powi(2);
        if !decreasing(c) {
            let mut hi = c;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if decreasing(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(LyapunovEstimate { p, level: lo, capped: false });
        }
        lo = c;
    }
    Ok(LyapunovEstimate { p, level: c_max, capped: true })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub ccr: f64,
    pub t_ccr: f64,
    pub zero_margin: bool,
    pub cct: Option<f64>,
    pub cct_bracketed: Option<bool>,
    pub cca_proj: Option<[f64; 2]>,
    pub cca_decoupled: Option<[Option<f64>; 2]>,
    pub lyapunov_level: Option<f64>,
}
