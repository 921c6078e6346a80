//! CSV and JSON writers for study results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use inverter_doa_core::manifold::Point;
use inverter_doa_core::pipeline::Outcome;

use crate::error::{Error, Result};
use crate::run::{PointResult, StudyResult};

/// Shortest decimal form of `v` rounded to 12 significant digits.
pub fn fmt12(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { String::new() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{v:.11e}").parse().expect("float round-trips");
    format!("{rounded:?}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt12).unwrap_or_default()
}

pub fn trajectory_csv(samples: &[(f64, Point)]) -> String {
    let mut s = String::from("t,delta1,delta2\n");
    for (t, x) in samples {
        let _ = writeln!(s, "{},{},{}", fmt12(*t), fmt12(x[0]), fmt12(x[1]));
    }
    s
}

pub fn points_csv(points: &[Point]) -> String {
    let mut s = String::from("delta1,delta2\n");
    for p in points {
        let _ = writeln!(s, "{},{}", fmt12(p[0]), fmt12(p[1]));
    }
    s
}

/// Polygon with the first vertex repeated at the end.
pub fn doa_csv(p: &PointResult) -> Option<String> {
    let d = p.artifacts.doa.as_ref()?;
    let mut pts = d.closed_polygon.clone();
    pts.extend(d.closed_polygon.first().copied());
    Some(points_csv(&pts))
}

pub fn outcome_label(o: &Outcome) -> &'static str {
    match o {
        Outcome::Ok => "ok",
        Outcome::NoPrefaultSep => "no_prefault_sep",
        Outcome::NoPostfaultSep => "no_postfault_sep",
        Outcome::OpenBasin => "open_basin",
        Outcome::NumericalFailure(_) => "numerical_failure",
    }
}

pub fn sweep_summary_csv(r: &StudyResult) -> String {
    let mut s = String::from("sweep_value,ccr,t_ccr,cct,sep_d1,sep_d2,outcome\n");
    for p in &r.points {
        let rep = p.report.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            opt(p.sweep_value),
            opt(rep.map(|r| r.ccr)),
            opt(rep.map(|r| r.t_ccr)),
            opt(rep.and_then(|r| r.cct)),
            opt(p.post_sep.map(|x| x.d1)),
            opt(p.post_sep.map(|x| x.d2)),
            outcome_label(&p.outcome)
        );
    }
    s
}

pub fn report_json(r: &StudyResult) -> String {
    serde_json::to_string_pretty(r).expect("report serializes")
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes the report and per-point CSV files into `dir` and returns the paths.
pub fn write_study(r: &StudyResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![write(dir, "report.json", &report_json(r))?];
    for p in &r.points {
        let i = p.index;
        if let Some(csv) = doa_csv(p) {
            files.push(write(dir, &format!("doa_{i}.csv"), &csv)?);
        }
        if !p.artifacts.fault_on_trajectory.is_empty() {
            files.push(write(dir, &format!("trajectory_{i}.csv"), &trajectory_csv(&p.artifacts.fault_on_trajectory))?);
        }
        for (k, tr) in p.artifacts.clearing_trajectories.iter().enumerate() {
            files.push(write(dir, &format!("trajectory_{i}_{k}.csv"), &trajectory_csv(tr))?);
        }
        if let Some(c) = &p.artifacts.limit_cycle {
            files.push(write(dir, &format!("cycle_{i}.csv"), &points_csv(&c.polyline))?);
        }
    }
    files.push(write(dir, "sweep_summary.csv", &sweep_summary_csv(r))?);
    if let Some(c) = &r.convergence {
        let mut s = String::from("m_q,hausdorff,outcome\n");
        for row in c {
            let _ = writeln!(s, "{},{},{}", fmt12(row.m_q), opt(row.hausdorff), outcome_label(&row.outcome));
        }
        files.push(write(dir, "convergence.csv", &s)?);
    }
    Ok(files)
}
