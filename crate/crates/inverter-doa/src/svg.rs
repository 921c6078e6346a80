//! Static SVG phase portraits. Every drawn layer is also returned as CSV.

use std::f64::consts::PI;
use std::fmt::Write as _;

use inverter_doa_core::equilibria::TWO_PI;
use inverter_doa_core::manifold::Point;
use inverter_doa_core::EquilibriumKind;

use crate::export::{fmt12, outcome_label, points_csv, trajectory_csv};
use crate::run::PointResult;

const SIZE: f64 = 560.0;
const MARGIN: f64 = 64.0;

pub struct Portrait {
    pub svg: String,
    /// `(layer name, csv body)`
    pub layers: Vec<(String, String)>,
}

/// Splits a path into runs that stay inside the window around `c` after
/// reduction by whole turns.
fn wrapped_runs(pts: impl Iterator<Item = Point>, c: Point) -> Vec<Vec<Point>> {
    let red = |v: f64, c: f64| c + (v - c + PI).rem_euclid(TWO_PI) - PI;
    let mut runs: Vec<Vec<Point>> = Vec::new();
    let mut last: Option<Point> = None;
    for p in pts {
        let q = [red(p[0], c[0]), red(p[1], c[1])];
        match last {
            Some(l) if (q[0] - l[0]).abs() < PI && (q[1] - l[1]).abs() < PI => runs.last_mut().unwrap().push(q),
            _ => runs.push(vec![q]),
        }
        last = Some(q);
    }
    runs
}

fn coords(pts: &[Point]) -> String {
    let mut s = String::new();
    for p in pts {
        let _ = write!(s, "{},{} ", fmt12(p[0]), fmt12(p[1]));
    }
    s.trim_end().to_string()
}

/// Presentation attributes per layer; widths are in pixels and converted to
/// data units with the scale `s`.
fn style(class: &str, s: f64) -> String {
    let (fill, stroke, width, dash) = match class {
        "doa" => ("#d0d0d0", "#606060", 1.0, None),
        "branch" => ("none", "#1f5fbf", 1.2, None),
        "ccr" => ("none", "black", 1.2, Some((6.0, 4.0))),
        "fault" => ("none", "#c02020", 1.5, None),
        "post" => ("none", "#208040", 1.2, None),
        "spo" => ("none", "#8030a0", 1.5, Some((3.0, 3.0))),
        _ => ("none", "black", 1.2, None),
    };
    let mut a = format!(r#"class="{class}" fill="{fill}" stroke="{stroke}" stroke-width="{}""#, fmt12(width / s));
    if let Some((on, off)) = dash {
        let _ = write!(a, r#" stroke-dasharray="{} {}""#, fmt12(on / s), fmt12(off / s));
    }
    a
}

fn polyline(out: &mut String, class: &str, pts: &[Point], s: f64) {
    let _ = writeln!(out, r#"<polyline {} points="{}"/>"#, style(class, s), coords(pts));
}

pub fn render(p: &PointResult) -> Portrait {
    let center = p
        .post_sep
        .or(p.pre_sep)
        .map_or([0.0, 0.0], |s| s.to_array());
    let hw = PI;
    let s = SIZE / (2.0 * hw);
    let tx = MARGIN - (center[0] - hw) * s;
    let ty = MARGIN + (center[1] + hw) * s;
    let full = SIZE + 2.0 * MARGIN;
    let mut layers = Vec::new();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}" font-family="sans-serif" font-size="13">"#
    );
    let _ = writeln!(
        svg,
        r#"<clipPath id="window"><rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}"/></clipPath>"#
    );
    let _ = writeln!(svg, r#"<g clip-path="url(#window)"><g transform="matrix({s} 0 0 {} {tx} {ty})">"#, -s);

    if let Some(d) = &p.artifacts.doa {
        let mut pts = d.closed_polygon.clone();
        pts.extend(d.closed_polygon.first().copied());
        let _ = writeln!(svg, r#"<polygon {} points="{}"/>"#, style("doa", s), coords(&pts));
        layers.push(("doa".to_string(), points_csv(&pts)));
        let mut csv = String::from("branch,delta1,delta2\n");
        for (k, b) in d.branches.iter().enumerate() {
            polyline(&mut svg, "branch", &b.polyline, s);
            for q in &b.polyline {
                let _ = writeln!(csv, "{k},{},{}", fmt12(q[0]), fmt12(q[1]));
            }
        }
        layers.push(("branches".to_string(), csv));
    }
    if let (Some(r), Some(sep)) = (&p.report, p.post_sep) {
        let _ = writeln!(svg, r#"<circle {} cx="{}" cy="{}" r="{}"/>"#, style("ccr", s), fmt12(sep.d1), fmt12(sep.d2), fmt12(r.ccr));
        let circle: Vec<Point> = (0..=180)
            .map(|k| {
                let a = TWO_PI * k as f64 / 180.0;
                [sep.d1 + r.ccr * a.cos(), sep.d2 + r.ccr * a.sin()]
            })
            .collect();
        layers.push(("ccr".to_string(), points_csv(&circle)));
    }
    if !p.artifacts.fault_on_trajectory.is_empty() {
        let tr = &p.artifacts.fault_on_trajectory;
        for run in wrapped_runs(tr.iter().map(|s| s.1), center) {
            polyline(&mut svg, "fault", &run, s);
        }
        layers.push(("fault_on".to_string(), trajectory_csv(tr)));
    }
    for (k, tr) in p.artifacts.clearing_trajectories.iter().enumerate() {
        for run in wrapped_runs(tr.iter().map(|s| s.1), center) {
            polyline(&mut svg, "post", &run, s);
        }
        layers.push((format!("post_{k}"), trajectory_csv(tr)));
    }
    if let Some(c) = &p.artifacts.limit_cycle {
        for run in wrapped_runs(c.polyline.iter().copied(), center) {
            polyline(&mut svg, "spo", &run, s);
        }
        layers.push(("spo".to_string(), points_csv(&c.polyline)));
    }

    // Equilibria and their whole-turn copies inside the window.
    let eqs = if p.post_sep.is_some() { &p.equilibria.postfault } else { &p.equilibria.prefault };
    let mut csv = String::from("delta1,delta2,kind\n");
    let r = 0.07;
    let eq = format!(r#"class="eq" stroke="black" stroke-width="{}""#, fmt12(1.2 / s));
    for e in eqs {
        for n1 in -1..=1 {
            for n2 in -1..=1 {
                let q = e.shifted(n1, n2).state;
                if (q.d1 - center[0]).abs() > hw || (q.d2 - center[1]).abs() > hw {
                    continue;
                }
                let (x, y) = (fmt12(q.d1), fmt12(q.d2));
                let (kind, glyph) = match e.kind {
                    EquilibriumKind::Sep => ("sep", format!(r#"<circle {eq} cx="{x}" cy="{y}" r="{r}" fill="black"/>"#)),
                    EquilibriumKind::Type1 => (
                        "type1",
                        format!(
                            r#"<circle {eq} cx="{x}" cy="{y}" r="{r}" fill="white"/><path d="M {} {y} A {r} {r} 0 0 0 {} {y} Z" fill="black"/>"#,
                            fmt12(q.d1 - r),
                            fmt12(q.d1 + r)
                        ),
                    ),
                    EquilibriumKind::Type2 => ("type2", format!(r#"<circle {eq} cx="{x}" cy="{y}" r="{r}" fill="white"/>"#)),
                    EquilibriumKind::NonHyperbolic => (
                        "nonhyperbolic",
                        format!(r#"<circle {eq} cx="{x}" cy="{y}" r="{r}" fill="gray"/>"#),
                    ),
                };
                svg.push_str(&glyph);
                svg.push('\n');
                let _ = writeln!(csv, "{x},{y},{kind}");
            }
        }
    }
    layers.push(("equilibria".to_string(), csv));
    svg.push_str("</g></g>\n");

    // Frame, ticks and labels in pixel space.
    let _ = writeln!(svg, r#"<rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#);
    let ticks = |c: f64| {
        let lo = ((c - hw) / (PI / 2.0)).ceil() as i32;
        let hi = ((c + hw) / (PI / 2.0)).floor() as i32;
        (lo..=hi).map(|k| k as f64 * PI / 2.0).collect::<Vec<_>>()
    };
    for v in ticks(center[0]) {
        let px = tx + v * s;
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{b:.2}" x2="{px:.2}" y2="{b2:.2}" stroke="black"/><text x="{px:.2}" y="{t:.2}" text-anchor="middle">{v:.2}</text>"#,
            b = MARGIN + SIZE,
            b2 = MARGIN + SIZE + 6.0,
            t = MARGIN + SIZE + 22.0
        );
    }
    for v in ticks(center[1]) {
        let py = ty - v * s;
        let _ = writeln!(
            svg,
            r#"<line x1="{a:.2}" y1="{py:.2}" x2="{MARGIN}" y2="{py:.2}" stroke="black"/><text x="{t:.2}" y="{py:.2}" text-anchor="end" dominant-baseline="middle">{v:.2}</text>"#,
            a = MARGIN - 6.0,
            t = MARGIN - 10.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">δ1 (rad)</text>"#,
        MARGIN + SIZE / 2.0,
        full - 14.0
    );
    let _ = writeln!(
        svg,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">δ2 (rad)</text>"#,
        MARGIN + SIZE / 2.0
    );
    if p.post_sep.is_none() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="18">no stable equilibrium ({})</text>"#,
            MARGIN + SIZE / 2.0,
            MARGIN / 2.0,
            outcome_label(&p.outcome)
        );
    }
    svg.push_str("</svg>\n");
    Portrait { svg, layers }
}
