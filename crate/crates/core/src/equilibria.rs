//! Equilibrium search, classification and the energy function of cosine-free systems.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, RhsMode, State2};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat2};
use crate::network::{GeneralizedCoefficients, TwoInverterSystem};

pub const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EquilibriumKind {
    #[serde(rename = "SEP")]
    Sep,
    #[serde(rename = "Type1UEP")]
    Type1,
    #[serde(rename = "Type2UEP")]
    Type2,
    NonHyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub state: State2,
    pub eig_re: [f64; 2],
    pub eig_im: [f64; 2],
    pub eigenvectors: [[f64; 2]; 2],
    pub kind: EquilibriumKind,
}

impl Equilibrium {
    /// Classifies `state` with the model Jacobian.
    pub fn classify(model: &Model, state: [f64; 2]) -> Self {
        let e = linalg::eigen(&model.jacobian(state));
        let k = model.gains();
        let tol = 1e-6 * k[0].max(k[1]);
        let kind = if e.re.iter().any(|r| r.abs() < tol) {
            EquilibriumKind::NonHyperbolic
        } else {
            match e.re.iter().filter(|r| **r > 0.0).count() {
                0 => EquilibriumKind::Sep,
                1 => EquilibriumKind::Type1,
                _ => EquilibriumKind::Type2,
            }
        };
        Equilibrium {
            state: state.into(),
            eig_re: e.re,
            eig_im: e.im,
            eigenvectors: e.vectors,
            kind,
        }
    }

    /// Stable eigenvector of a type-1 point.
    pub fn stable_direction(&self) -> [f64; 2] {
        self.eigenvectors[0]
    }

    /// Unstable eigenvector of a type-1 point.
    pub fn unstable_direction(&self) -> [f64; 2] {
        self.eigenvectors[1]
    }

    /// Copy translated by whole turns.
    pub fn shifted(&self, n1: i32, n2: i32) -> Self {
        Equilibrium {
            state: State2::new(self.state.d1 + TWO_PI * n1 as f64, self.state.d2 + TWO_PI * n2 as f64),
            ..*self
        }
    }
}

/// `x` modulo 2π in [0, 2π).
pub(crate) fn rem_turn(x: f64) -> f64 {
    let r = x - TWO_PI * (x / TWO_PI).floor();
    if r >= TWO_PI {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into [-π, π).
pub fn wrap(a: f64) -> f64 {
    let r = rem_turn(a + PI) - PI;
    if r >= PI {
        r - TWO_PI
    } else {
        r
    }
}

pub(crate) fn inf_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton iteration; returns the root when the residual drops below 1e-10.
pub fn newton(model: &Model, seed: [f64; 2]) -> Option<[f64; 2]> {
    let mut x = seed;
    let mut f = model.rhs(x);
    let mut phi = 0.5 * (f[0] * f[0] + f[1] * f[1]);
    let mut polish = 0;
    for _ in 0..50 {
        if inf_norm(f) < 1e-10 {
            polish += 1;
            if polish > 2 || inf_norm(f) == 0.0 {
                break;
            }
        }
        let j = model.jacobian(x);
        let p = linalg::solve(&j, [-f[0], -f[1]])?;
        let mut lambda = 1.0;
        loop {
            let xn = [x[0] + lambda * p[0], x[1] + lambda * p[1]];
            let fnew = model.rhs(xn);
            let phin = 0.5 * (fnew[0] * fnew[0] + fnew[1] * fnew[1]);
            if phin <= (1.0 - 2e-4 * lambda) * phi || (inf_norm(f) < 1e-10 && phin <= phi) {
                x = xn;
                f = fnew;
                phi = phin;
                break;
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                return if inf_norm(f) < 1e-10 { Some(x) } else { None };
            }
        }
    }
    if inf_norm(f) < 1e-10 && x[0].is_finite() && x[1].is_finite() {
        Some(x)
    } else {
        None
    }
}

/// All equilibria of `sys` on [-π, π)², seeded from a 24 x 24 grid.
pub fn find_equilibria(sys: &TwoInverterSystem, mode: RhsMode) -> Result<Vec<Equilibrium>> {
    if mode == RhsMode::FullOrder {
        return Err(Error::NotApplicable("equilibria are computed on two-angle modes".into()));
    }
    Ok(find_equilibria_grid(&Model::new(sys, mode)?, 24))
}

pub fn find_equilibria_grid(model: &Model, n: usize) -> Vec<Equilibrium> {
    let mut roots: Vec<[f64; 2]> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let seed = [
                -PI + TWO_PI * i as f64 / n as f64,
                -PI + TWO_PI * j as f64 / n as f64,
            ];
            let Some(r) = newton(model, seed) else { continue };
            let r = [wrap(r[0]), wrap(r[1])];
            let dup = roots.iter().any(|q| {
                wrap(q[0] - r[0]).abs() < 1e-6 && wrap(q[1] - r[1]).abs() < 1e-6
            });
            if !dup {
                roots.push(r);
            }
        }
    }
    let mut out: Vec<Equilibrium> = roots.into_iter().map(|r| Equilibrium::classify(model, r)).collect();
    out.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then(a.state.d1.total_cmp(&b.state.d1))
            .then(a.state.d2.total_cmp(&b.state.d2))
    });
    out
}

pub fn jacobian(sys: &TwoInverterSystem, mode: RhsMode, state: State2) -> Result<Mat2> {
    Ok(Model::new(sys, mode)?.jacobian(state.to_array()))
}

/// First stable equilibrium in the list.
pub fn first_sep(eqs: &[Equilibrium]) -> Option<Equilibrium> {
    eqs.iter().copied().find(|e| e.kind == EquilibriumKind::Sep)
}

/// Coefficients of
/// `V = -c1 d1 - c2 d2 + λ(1 - cos(d1 - d2)) + b1(1 - cos d1) + b2(1 - cos d2)`
/// with `d_i' = -μ_i ∂V/∂d_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub b1: f64,
    pub b2: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl EnergyTerms {
    pub fn value(&self, d1: f64, d2: f64) -> f64 {
        -self.c1 * d1 - self.c2 * d2
            + self.lambda * (1.0 - (d1 - d2).cos())
            + self.b1 * (1.0 - d1.cos())
            + self.b2 * (1.0 - d2.cos())
    }

    pub fn gradient(&self, d1: f64, d2: f64) -> [f64; 2] {
        let su = (d1 - d2).sin();
        [
            -self.c1 + self.lambda * su + self.b1 * d1.sin(),
            -self.c2 - self.lambda * su + self.b2 * d2.sin(),
        ]
    }

    /// `V' = -μ1 (∂1 V)² - μ2 (∂2 V)²`
    pub fn derivative(&self, d1: f64, d2: f64) -> f64 {
        let g = self.gradient(d1, d2);
        -self.mu1 * g[0] * g[0] - self.mu2 * g[1] * g[1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFunction {
    pub exists: bool,
    pub terms: Option<EnergyTerms>,
}

pub fn energy_function(c: &GeneralizedCoefficients) -> EnergyFunction {
    let tiny = |v: f64| v.abs() < 1e-12;
    let cosine_free = tiny(c.d1) && tiny(c.d2);
    let terms = if cosine_free && c.a1 > 0.0 && c.a2 > 0.0 {
        Some(EnergyTerms {
            c1: c.c1 / c.a1,
            c2: c.c2 / c.a2,
            lambda: 1.0,
            b1: c.b1 / c.a1,
            b2: c.b2 / c.a2,
            mu1: c.k1 * c.a1,
            mu2: c.k2 * c.a2,
        })
    } else if cosine_free && tiny(c.a1) && tiny(c.a2) {
        Some(EnergyTerms {
            c1: c.c1,
            c2: c.c2,
            lambda: 0.0,
            b1: c.b1,
            b2: c.b2,
            mu1: c.k1,
            mu2: c.k2,
        })
    } else {
        None
    };
    EnergyFunction { exists: terms.is_some(), terms }
}
