//! Stable-manifold tracing, assembly of the domain of attraction on the
//! fundamental window, membership tests and rotating limit cycles.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    angles, integrate_with, Crossing, Direction, Event, IntegratorSettings, Model, Run, Termination,
};
use crate::equilibria::{newton, rem_turn, wrap, Equilibrium, EquilibriumKind, TWO_PI};
use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchEnd {
    DomainExit,
    ArcLengthCap,
    ConvergedToEquilibrium,
    ClosedLoop,
    TimeLimit,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldBranch {
    /// The saddle (possibly a 2π copy) the branch leaves from.
    pub source: Equilibrium,
    /// Side of the stable eigenvector, +1 or -1.
    pub direction: i8,
    pub polyline: Vec<Point>,
    pub termination: BranchEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaBoundary {
    pub sep: Equilibrium,
    pub branches: Vec<ManifoldBranch>,
    /// Closed polygon without the repeated first point.
    pub closed_polygon: Vec<Point>,
    /// `splice[i]` marks the segment from vertex `i` to vertex `i + 1` (cyclic)
    /// as a piece of the window edge rather than of a manifold.
    pub splice: Vec<bool>,
    pub is_bounded: bool,
    pub half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub inside: bool,
    pub on_boundary: bool,
    /// The point was outside the window and was reduced by whole turns.
    pub wrapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCycle {
    /// One period; unwrapped angles.
    pub polyline: Vec<Point>,
    pub period: f64,
    pub winding: (i32, i32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoaOptions {
    pub epsilon: f64,
    pub half_width: f64,
    /// Extra distance beyond the window within which saddle copies are traced.
    pub margin: f64,
    pub settings: IntegratorSettings,
}

impl Default for DoaOptions {
    fn default() -> Self {
        DoaOptions {
            epsilon: 1e-4,
            half_width: PI,
            margin: 1.0,
            settings: IntegratorSettings { t_max: 60.0, max_step_arc: 0.02, ..Default::default() },
        }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn speed(model: &Model, x: Point) -> f64 {
    let f = model.rhs(x);
    f[0].hypot(f[1])
}

fn snap_to_source(model: &Model, x: Point) -> Option<Point> {
    let r = newton(model, x)?;
    if dist(r, x) > 1e-2 {
        return None;
    }
    match Equilibrium::classify(model, r).kind {
        EquilibriumKind::Type2 | EquilibriumKind::NonHyperbolic => Some(r),
        _ => None,
    }
}

/// Traces both branches of the stable manifold of every type-1 point in
/// reverse time, inside the box of `settings.domain_box` around `center`.
pub fn trace_stable_manifolds(
    model: &Model,
    ueps: &[Equilibrium],
    epsilon: f64,
    settings: &IntegratorSettings,
    center: Point,
) -> Result<Vec<ManifoldBranch>> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(invalid("epsilon must lie in [1e-6, 1e-3]"));
    }
    if ueps.iter().any(|e| e.kind != EquilibriumKind::Type1) {
        return Err(invalid("manifold sources must be type-1 equilibria"));
    }
    let s = IntegratorSettings {
        max_step_arc: if settings.max_step_arc.is_finite() { settings.max_step_arc } else { 0.02 },
        ..*settings
    };
    let k = model.gains();
    let slow = 1e-3 * k[0].max(k[1]);
    let mut out = Vec::with_capacity(2 * ueps.len());
    for uep in ueps {
        let p = uep.state.to_array();
        let v = uep.stable_direction();
        for dir in [1i8, -1] {
            let x0 = [p[0] + dir as f64 * epsilon * v[0], p[1] + dir as f64 * epsilon * v[1]];
            let stop = |_: f64, x: &Point| {
                (speed(model, *x) < slow && snap_to_source(model, *x).is_some())
                    || dist(*x, p) < 0.1 * epsilon
            };
            let run = Run {
                box_center: Some(center),
                stop: Some(&stop),
                ..Run::new(Direction::Backward)
            };
            let branch = match integrate_with(model, x0, &s, &run) {
                Ok(tr) => {
                    let mut poly: Vec<Point> = tr.states().collect();
                    let termination = match tr.termination {
                        Termination::DomainExit => BranchEnd::DomainExit,
                        Termination::ArcLengthCap => BranchEnd::ArcLengthCap,
                        Termination::TimeLimit | Termination::Event(_) => BranchEnd::TimeLimit,
                        Termination::Stopped => {
                            let last = *poly.last().unwrap();
                            if dist(last, p) < 0.1 * epsilon {
                                BranchEnd::ClosedLoop
                            } else {
                                let r = snap_to_source(model, last).unwrap_or(last);
                                poly.push(r);
                                BranchEnd::ConvergedToEquilibrium
                            }
                        }
                    };
                    ManifoldBranch { source: *uep, direction: dir, polyline: poly, termination }
                }
                Err(Error::IntegrationFailed { partial, .. }) => ManifoldBranch {
                    source: *uep,
                    direction: dir,
                    polyline: partial.iter().map(|(_, x)| [x[0], x[1]]).collect(),
                    termination: BranchEnd::Failed,
                },
                Err(e) => return Err(e),
            };
            out.push(branch);
        }
    }
    Ok(out)
}

/// True when a side of the unstable manifold of `saddle` flows into `sep`
/// itself (not a 2π copy of it).
pub fn is_boundary_saddle(
    model: &Model,
    saddle: &Equilibrium,
    sep: Point,
    epsilon: f64,
    settings: &IntegratorSettings,
) -> bool {
    let p = saddle.state.to_array();
    let v = saddle.unstable_direction();
    let s = IntegratorSettings {
        t_max: settings.t_max.max(60.0),
        domain_box: f64::INFINITY,
        max_arc_length: 400.0,
        max_step_arc: f64::INFINITY,
        ..*settings
    };
    for dir in [1.0, -1.0] {
        let x0 = [p[0] + dir * epsilon * v[0], p[1] + dir * epsilon * v[1]];
        let stop = |_: f64, x: &Point| dist(*x, sep) < 1e-3 || speed(model, *x) < 1e-7;
        let run = Run { stop: Some(&stop), ..Run::new(Direction::Forward) };
        if let Ok(tr) = integrate_with(model, x0, &s, &run) {
            if dist(tr.last().1, sep) < 1e-3 {
                return true;
            }
        }
    }
    false
}

/// Type-1 points (and their 2π copies near the window) whose stable manifolds
/// bound the basin of `sep`.
pub fn boundary_saddles(
    model: &Model,
    sep: &Equilibrium,
    equilibria: &[Equilibrium],
    opts: &DoaOptions,
) -> Vec<Equilibrium> {
    let c = sep.state.to_array();
    let reach = opts.half_width + opts.margin;
    let mut out = Vec::new();
    for e in equilibria.iter().filter(|e| e.kind == EquilibriumKind::Type1) {
        for n1 in -2..=2 {
            for n2 in -2..=2 {
                let q = e.shifted(n1, n2);
                let s = q.state.to_array();
                if (s[0] - c[0]).abs().max((s[1] - c[1]).abs()) > reach {
                    continue;
                }
                if is_boundary_saddle(model, &q, c, opts.epsilon, &opts.settings) {
                    out.push(q);
                }
            }
        }
    }
    out
}

/// Finds the boundary saddles, traces their stable manifolds and assembles the
/// domain of attraction of `sep`.
pub fn compute_doa(
    model: &Model,
    sep: &Equilibrium,
    equilibria: &[Equilibrium],
    opts: &DoaOptions,
) -> Result<DoaBoundary> {
    if sep.kind != EquilibriumKind::Sep {
        return Err(invalid("DOA requires a stable equilibrium"));
    }
    let saddles = boundary_saddles(model, sep, equilibria, opts);
    // One extra turn lets branches reach sources that sit at 2π copies.
    let s = IntegratorSettings {
        domain_box: opts.half_width + opts.margin + PI,
        ..opts.settings
    };
    let branches = trace_stable_manifolds(model, &saddles, opts.epsilon, &s, sep.state.to_array())?;
    assemble_doa(sep, branches, opts.half_width)
}

// Liang-Barsky clipping of segment a-b against the box; returns the inside
// parameter interval.
fn clip_segment(a: Point, b: Point, c: Point, h: f64) -> Option<(f64, f64)> {
    let d = [b[0] - a[0], b[1] - a[1]];
    let mut t0: f64 = 0.0;
    let mut t1: f64 = 1.0;
    for i in 0..2 {
        for (p, q) in [(-d[i], a[i] - (c[i] - h)), (d[i], (c[i] + h) - a[i])] {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
    }
    if t0 <= t1 {
        Some((t0, t1))
    } else {
        None
    }
}

fn lerp(a: Point, b: Point, t: f64) -> Point {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

struct Piece {
    pts: Vec<Point>,
    start_on_box: bool,
    end_on_box: bool,
}

fn clip_polyline(pts: &[Point], c: Point, h: f64) -> Vec<Piece> {
    let mut out: Vec<Piece> = Vec::new();
    let mut cur: Option<Piece> = None;
    if pts.len() == 1 {
        if (pts[0][0] - c[0]).abs().max((pts[0][1] - c[1]).abs()) <= h {
            return vec![Piece { pts: pts.to_vec(), start_on_box: false, end_on_box: false }];
        }
        return out;
    }
    for w in pts.windows(2) {
        let Some((t0, t1)) = clip_segment(w[0], w[1], c, h) else {
            continue;
        };
        let p0 = lerp(w[0], w[1], t0);
        let p1 = lerp(w[0], w[1], t1);
        match cur.as_mut() {
            Some(piece) if t0 == 0.0 => piece.pts.push(p1),
            _ => {
                if let Some(done) = cur.take() {
                    out.push(done);
                }
                cur = Some(Piece { pts: vec![p0, p1], start_on_box: t0 > 0.0, end_on_box: false });
            }
        }
        if t1 < 1.0 {
            let mut done = cur.take().unwrap();
            done.end_on_box = true;
            out.push(done);
        }
    }
    if let Some(done) = cur.take() {
        out.push(done);
    }
    out.retain(|p| p.pts.len() >= 2 && dist(p.pts[0], *p.pts.last().unwrap()) + polyline_length(&p.pts) > 0.0);
    out
}

fn polyline_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| dist(w[0], w[1])).sum()
}

// Counter-clockwise perimeter coordinate starting at the lower-left corner.
fn perimeter_param(p: Point, c: Point, h: f64) -> f64 {
    let x = p[0] - c[0];
    let y = p[1] - c[1];
    let sides = [(y + h).abs(), (x - h).abs(), (y - h).abs(), (x + h).abs()];
    let side = (0..4).min_by(|a, b| sides[*a].total_cmp(&sides[*b])).unwrap();
    match side {
        0 => x + h,
        1 => 2.0 * h + (y + h),
        2 => 4.0 * h + (h - x),
        _ => 6.0 * h + (h - y),
    }
}

struct HalfEdge {
    pts: Vec<Point>,
    from: usize,
    to: usize,
    splice: bool,
    twin: usize,
}

/// Direction from the first point to where the polyline first reaches
/// distance `r` from it, or to its farthest point if it never does.
fn direction_at(pts: &[Point], r: f64) -> Point {
    let p0 = pts[0];
    for w in pts.windows(2) {
        let (da, db) = (dist(w[0], p0), dist(w[1], p0));
        if db >= r {
            let t = if db > da { ((r - da) / (db - da)).clamp(0.0, 1.0) } else { 1.0 };
            return [w[0][0] + t * (w[1][0] - w[0][0]) - p0[0], w[0][1] + t * (w[1][1] - w[0][1]) - p0[1]];
        }
    }
    let q = pts.iter().copied().max_by(|a, b| dist(*a, p0).total_cmp(&dist(*b, p0))).unwrap_or(p0);
    [q[0] - p0[0], q[1] - p0[1]]
}

const TIE: f64 = 1e-3;

/// For two polylines leaving the same point, whether `a` lies clockwise of
/// `b` where it first moves away from it; `None` if they never separate.
fn clockwise_of(a: &[Point], b: &[Point]) -> Option<bool> {
    for p in a {
        let (k, d) = b
            .windows(2)
            .enumerate()
            .map(|(k, w)| (k, point_segment_distance(*p, w[0], w[1])))
            .min_by(|x, y| x.1.total_cmp(&y.1))?;
        if d > 1e-4 {
            let (u, v) = (b[k], b[k + 1]);
            return Some(cross([v[0] - u[0], v[1] - u[1]], [p[0] - u[0], p[1] - u[1]]) < 0.0);
        }
    }
    None
}

fn reach(pts: &[Point]) -> f64 {
    pts.iter().map(|p| dist(*p, pts[0])).fold(0.0, f64::max)
}

/// Whether every point of `a` lies within `tol` of the polyline `b`.
fn shadows(a: &[Point], b: &[Point], tol: f64) -> bool {
    a.iter().all(|p| b.windows(2).any(|w| point_segment_distance(*p, w[0], w[1]) < tol))
}

fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// Assembles the closed boundary of the basin of `sep` on the window
/// `sep ± half_width` from traced manifold branches, closing along the window
/// edges where branches leave it.
pub fn assemble_doa(sep: &Equilibrium, branches: Vec<ManifoldBranch>, half_width: f64) -> Result<DoaBoundary> {
    if sep.kind != EquilibriumKind::Sep {
        return Err(invalid("DOA requires a stable equilibrium"));
    }
    let c = sep.state.to_array();
    let h = half_width;

    // Chains: the two branches of one saddle joined through the saddle, with
    // flags marking ends that stop at an equilibrium.
    let mut chains: Vec<(Vec<Point>, bool, bool)> = Vec::new();
    let mut sources: Vec<Point> = Vec::new();
    let mut used = vec![false; branches.len()];
    for i in 0..branches.len() {
        if used[i] || branches[i].polyline.is_empty() {
            continue;
        }
        used[i] = true;
        let src = branches[i].source.state.to_array();
        let partner = (i + 1..branches.len())
            .find(|&j| !used[j] && branches[j].source.state.to_array() == src && !branches[j].polyline.is_empty());
        let converged = |b: &ManifoldBranch| b.termination == BranchEnd::ConvergedToEquilibrium;
        let mut chain: Vec<Point> = branches[i].polyline.iter().rev().copied().collect();
        chain.push(src);
        let mut end_fixed = true;
        if let Some(j) = partner {
            used[j] = true;
            chain.extend(branches[j].polyline.iter().copied());
            end_fixed = converged(&branches[j]);
        }
        chains.push((chain, converged(&branches[i]), end_fixed));
        sources.push(src);
    }

    // Graph vertices and edges.
    let mut verts: Vec<Point> = Vec::new();
    let mut on_box: Vec<bool> = Vec::new();
    let vertex = |p: Point, boundary: bool, verts: &mut Vec<Point>, on_box: &mut Vec<bool>| -> usize {
        if let Some(i) = verts.iter().position(|q| dist(*q, p) < 1e-6) {
            on_box[i] |= boundary;
            return i;
        }
        verts.push(p);
        on_box.push(boundary);
        verts.len() - 1
    };
    let mut edges: Vec<(Vec<Point>, bool)> = Vec::new();
    let mut ends: Vec<(usize, usize)> = Vec::new();
    // A chain ending at an equilibrium whose 2π copy lies in the window is also
    // added shifted, so that the boundary continues through that copy. Shifted
    // pieces must end on the window edge or at the equilibrium; a truncated end
    // moved into the window would leave a slit.
    let inside = |p: Point| (p[0] - c[0]).abs() < h && (p[1] - c[1]).abs() < h;
    for ((chain, start_fixed, end_fixed), src) in chains.iter().zip(&sources) {
        for (i, j) in (-1..=1).flat_map(|i| (-1..=1).map(move |j| (i, j))) {
            let s = [i as f64 * TWO_PI, j as f64 * TWO_PI];
            let copy: Vec<Point> = chain.iter().map(|p| [p[0] + s[0], p[1] + s[1]]).collect();
            let (first, last) = (copy[0], copy[copy.len() - 1]);
            if (i, j) != (0, 0) {
                let moved = [src[0] + s[0], src[1] + s[1]];
                let anchored = (*start_fixed && inside(first)) || (*end_fixed && inside(last));
                if !anchored || sources.iter().any(|q| dist(*q, moved) < 1e-6) {
                    continue;
                }
            }
            for piece in clip_polyline(&copy, c, h) {
                let p0 = piece.pts[0];
                let p1 = piece.pts[piece.pts.len() - 1];
                let loose = (!piece.start_on_box && p0 == first && !start_fixed) || (!piece.end_on_box && p1 == last && !end_fixed);
                if (i, j) != (0, 0) && loose {
                    continue;
                }
                let a = vertex(p0, piece.start_on_box, &mut verts, &mut on_box);
                let b = vertex(p1, piece.end_on_box, &mut verts, &mut on_box);
                ends.push((a, b));
                edges.push((piece.pts, false));
            }
        }
    }
    // Curves that coincide within the window (stable manifolds of different
    // saddle copies leaving one source along its slow direction) bound only a
    // sliver; one of them is kept.
    let mut keep = vec![true; edges.len()];
    for j in 0..edges.len() {
        for i in 0..j {
            if !keep[i] {
                continue;
            }
            let (a, b) = (ends[i], ends[j]);
            let near = |u: usize, v: usize| dist(verts[u], verts[v]) < 1e-3;
            let same_ends = (near(a.0, b.0) && near(a.1, b.1)) || (near(a.0, b.1) && near(a.1, b.0));
            if same_ends && shadows(&edges[j].0, &edges[i].0, 1e-3) && shadows(&edges[i].0, &edges[j].0, 1e-3) {
                keep[j] = false;
                break;
            }
        }
    }
    let (mut edges, mut ends): (Vec<_>, Vec<_>) = edges.into_iter().zip(ends).zip(keep).filter(|(_, k)| *k).map(|(e, _)| e).unzip();
    for corner in [[-h, -h], [h, -h], [h, h], [-h, h]] {
        vertex([c[0] + corner[0], c[1] + corner[1]], true, &mut verts, &mut on_box);
    }
    let mut perim: Vec<(f64, usize)> = (0..verts.len())
        .filter(|&i| on_box[i])
        .map(|i| (perimeter_param(verts[i], c, h), i))
        .collect();
    perim.sort_by(|a, b| a.0.total_cmp(&b.0));
    for k in 0..perim.len() {
        let a = perim[k].1;
        let b = perim[(k + 1) % perim.len()].1;
        if a != b {
            ends.push((a, b));
            edges.push((vec![verts[a], verts[b]], true));
        }
    }

    let mut half: Vec<HalfEdge> = Vec::with_capacity(2 * edges.len());
    for ((pts, splice), (a, b)) in edges.into_iter().zip(ends) {
        let n = half.len();
        let mut rev = pts.clone();
        rev.reverse();
        half.push(HalfEdge { pts, from: a, to: b, splice, twin: n + 1 });
        half.push(HalfEdge { pts: rev, from: b, to: a, splice, twin: n });
    }

    // Nearest edge hit by a ray from the SEP.
    let ray = [0.1234f64.cos(), 0.1234f64.sin()];
    let mut hit: Option<(f64, usize, Point, Point)> = None;
    for (i, he) in half.iter().enumerate().step_by(2) {
        for w in he.pts.windows(2) {
            let d = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
            let den = cross(ray, d);
            if den.abs() < 1e-300 {
                continue;
            }
            let ac = [w[0][0] - c[0], w[0][1] - c[1]];
            let t = cross(ac, d) / den;
            let s = cross(ac, ray) / den;
            if t > 0.0 && (0.0..=1.0).contains(&s) && hit.map_or(true, |h| t < h.0) {
                hit = Some((t, i, d, w[0]));
            }
        }
    }
    let (_, e0, d, a) = hit.ok_or(Error::OpenBasin)?;
    // Face on the left of the walk.
    let to_sep = [c[0] - a[0], c[1] - a[1]];
    let start = if cross(d, to_sep) > 0.0 { e0 } else { half[e0].twin };

    let mut out_of: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (i, he) in half.iter().enumerate() {
        out_of[he.from].push(i);
    }
    // Outgoing edges are ordered by their direction at a common radius, large
    // enough to separate curves that leave a vertex along a shared tangent.
    let radius: Vec<f64> = out_of
        .iter()
        .map(|es| es.iter().filter(|&&e| !half[e].splice).map(|&e| 0.999 * reach(&half[e].pts)).fold(1.0, f64::min))
        .collect();
    let mut poly: Vec<Point> = Vec::new();
    let mut splice: Vec<bool> = Vec::new();
    let mut cur = start;
    let mut steps = 0;
    loop {
        let he = &half[cur];
        for p in &he.pts[..he.pts.len() - 1] {
            poly.push(*p);
            splice.push(he.splice);
        }
        let mut rev_pts = he.pts.clone();
        rev_pts.reverse();
        let r = radius[he.to];
        let back = direction_at(&rev_pts, r);
        let back_angle = back[1].atan2(back[0]);
        let next = out_of[he.to]
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let turn = |e: usize| {
                    if e == he.twin {
                        return TWO_PI;
                    }
                    let d = direction_at(&half[e].pts, r);
                    let cw = rem_turn(back_angle - d[1].atan2(d[0]));
                    if cw.abs() < TIE || cw > TWO_PI - TIE {
                        return if clockwise_of(&half[e].pts, &rev_pts) == Some(true) { 0.5 * TIE } else { TWO_PI - 0.5 * TIE };
                    }
                    if cw <= 0.0 {
                        TWO_PI
                    } else {
                        cw
                    }
                };
                let (ta, tb) = (turn(a), turn(b));
                if a != he.twin && b != he.twin && (ta - tb).abs() < TIE {
                    match clockwise_of(&half[a].pts, &half[b].pts) {
                        Some(true) => return core::cmp::Ordering::Greater,
                        Some(false) => return core::cmp::Ordering::Less,
                        None => {}
                    }
                }
                ta.total_cmp(&tb)
            })
            .ok_or(Error::OpenBasin)?;
        cur = next;
        steps += 1;
        if cur == start {
            break;
        }
        if steps > half.len() + 1 {
            return Err(Error::OpenBasin);
        }
    }

    // Drop repeated points.
    let mut cp: Vec<Point> = Vec::with_capacity(poly.len());
    let mut cs: Vec<bool> = Vec::with_capacity(poly.len());
    for (p, s) in poly.into_iter().zip(splice) {
        if cp.last().map_or(false, |q| dist(*q, p) < 1e-12) {
            *cs.last_mut().unwrap() = s;
            continue;
        }
        cp.push(p);
        cs.push(s);
    }
    if cp.len() >= 2 && dist(cp[0], *cp.last().unwrap()) < 1e-12 {
        cp.pop();
        cs.pop();
    }
    if cp.len() < 3 || signed_area(&cp) <= 0.0 || !point_in_polygon(&cp, c) {
        return Err(Error::OpenBasin);
    }
    let is_bounded = !cs.iter().any(|s| *s);
    Ok(DoaBoundary {
        sep: *sep,
        branches,
        closed_polygon: cp,
        splice: cs,
        is_bounded,
        half_width,
    })
}

pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        * 0.5
}

pub fn point_in_polygon(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).max(0.0).min(1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

impl DoaBoundary {
    /// Segments of the polygon as `(a, b, splice)`.
    pub fn segments(&self) -> impl Iterator<Item = (Point, Point, bool)> + '_ {
        let n = self.closed_polygon.len();
        (0..n).map(move |i| (self.closed_polygon[i], self.closed_polygon[(i + 1) % n], self.splice[i]))
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.segments()
            .map(|(a, b, _)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// Reduces `p` into the window around the SEP by whole turns.
    pub fn reduce(&self, p: Point) -> (Point, bool) {
        let c = self.sep.state.to_array();
        let r = [c[0] + wrap(p[0] - c[0]), c[1] + wrap(p[1] - c[1])];
        let wrapped = (r[0] - p[0]).abs() > 1e-12 || (r[1] - p[1]).abs() > 1e-12;
        (r, wrapped)
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.closed_polygon)
    }

    /// Bounding box `(min, max)` of the polygon.
    pub fn extent(&self) -> (Point, Point) {
        self.closed_polygon.iter().fold(
            ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
            |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
        )
    }
}

/// Membership of `point` after reduction to the window; points within 1e-9
/// of the polygon are reported as boundary points, not inside.
pub fn contains(doa: &DoaBoundary, point: Point) -> Membership {
    let (p, wrapped) = doa.reduce(point);
    if doa.distance_to_boundary(p) < 1e-9 {
        return Membership { inside: false, on_boundary: true, wrapped };
    }
    Membership { inside: point_in_polygon(&doa.closed_polygon, p), on_boundary: false, wrapped }
}

/// Symmetric Hausdorff distance between two polylines (closed polygons are
/// closed implicitly).
pub fn hausdorff(a: &[Point], b: &[Point]) -> f64 {
    fn directed(a: &[Point], b: &[Point]) -> f64 {
        let n = b.len();
        a.iter()
            .map(|p| {
                (0..n)
                    .map(|i| point_segment_distance(*p, b[i], b[(i + 1) % n]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed(a, b).max(directed(b, a))
}

/// Follows the forward trajectory from `seed` and returns one period of the
/// rotating orbit it settles on, using crossings of `d1 = seed.d1 + 2πn`.
/// Returns `None` if the trajectory comes to rest or no recurrence is found
/// within `settings.t_max`.
pub fn detect_limit_cycle(model: &Model, seed: Point, settings: &IntegratorSettings) -> Result<Option<LimitCycle>> {
    let s = IntegratorSettings {
        domain_box: f64::INFINITY,
        max_arc_length: f64::INFINITY,
        event_tol: Some(1e-11),
        ..*settings
    };
    let k = model.gains();
    let rest = 1e-8 * k[0].max(k[1]);
    let mut x = seed;
    let mut t = 0.0;
    let mut target = seed[0] + TWO_PI;
    let mut crossings: Vec<(f64, Point)> = Vec::new();
    while t < settings.t_max {
        let tg = target;
        let g = move |_: f64, y: &Point| y[0] - tg;
        let events = [Event { func: &g, crossing: Crossing::Rising }];
        let stop = |_: f64, y: &Point| speed(model, *y) < rest;
        let run = Run { events: &events, stop: Some(&stop), ..Run::new(Direction::Forward) };
        let leg_settings = IntegratorSettings { t_max: settings.t_max - t, ..s };
        let tr = integrate_with(model, x, &leg_settings, &run)?;
        let (dt, end) = tr.last();
        match tr.termination {
            Termination::Event(_) => {}
            _ => return Ok(None),
        }
        t += dt;
        x = end;
        crossings.push((t, end));
        let leg: Vec<Point> = tr.states().collect();
        let n = crossings.len();
        if n >= 3 {
            let (t0, _) = crossings[n - 3];
            let (t1, p1) = crossings[n - 2];
            let (t2, p2) = crossings[n - 1];
            let same_state = wrap(p2[1] - p1[1]).abs() < 1e-5;
            let same_period = ((t2 - t1) - (t1 - t0)).abs() < 1e-5;
            if same_state && same_period {
                let winding = (
                    ((p2[0] - p1[0]) / TWO_PI).round() as i32,
                    ((p2[1] - p1[1]) / TWO_PI).round() as i32,
                );
                return Ok(Some(LimitCycle { polyline: leg, period: t2 - t1, winding }));
            }
        }
        target += TWO_PI;
    }
    Ok(None)
}

/// The angle part of a state of any supported dimension.
pub fn angle_point<const N: usize>(x: &[f64; N]) -> Point {
    angles(x)
}
