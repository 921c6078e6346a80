//! Forward-simulation check of DOA membership.

use inverter_doa_core::manifold::{contains, DoaBoundary, Point};
use inverter_doa_core::{integrate_with, Direction, IntegratorSettings, Model, Run, Termination};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasinSummary {
    pub samples: usize,
    /// Samples skipped because they lie within the boundary band.
    pub excluded: usize,
    pub agree: usize,
    pub fraction: f64,
}

/// `n × n` grid over the square of half-width `hw` around `center`.
pub fn grid_samples(center: Point, hw: f64, n: usize) -> Vec<Point> {
    let step = 2.0 * hw / (n - 1) as f64;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| [center[0] - hw + i as f64 * step, center[1] - hw + j as f64 * step]))
        .collect()
}

pub fn random_samples(center: Point, hw: f64, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| [center[0] + rng.random_range(-hw..hw), center[1] + rng.random_range(-hw..hw)])
        .collect()
}

/// Whether the forward trajectory from `x0` settles on `sep` itself (not on a
/// copy shifted by whole turns).
pub fn converges_to(model: &Model, x0: Point, sep: Point, t_max: f64) -> bool {
    let s = IntegratorSettings {
        t_max,
        domain_box: f64::INFINITY,
        max_arc_length: f64::INFINITY,
        ..Default::default()
    };
    let near = |_: f64, x: &Point| (x[0] - sep[0]).hypot(x[1] - sep[1]) < 1e-3;
    let run = Run { stop: Some(&near), ..Run::new(Direction::Forward) };
    match integrate_with(model, x0, &s, &run) {
        Ok(tr) => tr.termination == Termination::Stopped,
        Err(_) => false,
    }
}

/// Fraction of samples, outside a band of width `band` around the boundary,
/// on which polygon membership agrees with the simulated outcome.
pub fn basin_agreement(model: &Model, doa: &DoaBoundary, samples: &[Point], band: f64) -> BasinSummary {
    let sep = doa.sep.state.to_array();
    let mut excluded = 0;
    let mut agree = 0;
    for &p in samples {
        if doa.distance_to_boundary(doa.reduce(p).0) < band {
            excluded += 1;
            continue;
        }
        let m = contains(doa, p);
        let inside = m.inside && !m.wrapped;
        if inside == converges_to(model, p, sep, 40.0) {
            agree += 1;
        }
    }
    let used = samples.len() - excluded;
    BasinSummary {
        samples: samples.len(),
        excluded,
        agree,
        fraction: if used > 0 { agree as f64 / used as f64 } else { 1.0 },
    }
}
