use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use inverter_doa::export::{doa_csv, fmt12, outcome_label, report_json, trajectory_csv, write_study};
use inverter_doa::run::{default_workers, simulate};
use inverter_doa::svg::render;
use inverter_doa::{run_point, run_study, Error, PointResult, Study};
use inverter_doa_core::pipeline::{AnalysisFlags, Outcome};
use serde_json::json;

#[derive(Parser)]
#[command(name = "inverter-doa", version, about = "Domains of attraction and clearing metrics for two-inverter systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Study file (JSON).
    #[arg(long, global = true)]
    study: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a study field, e.g. `network.xg=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Sweep worker threads (default: INVERTER_DOA_WORKERS or all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for random basin-oracle samples; enables the check if it is off.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Equilibria of the pre-fault, fault-on and post-fault systems.
    Equilibria,
    /// Post-fault domain of attraction.
    Doa,
    /// Critical clearing radius, its clearing time and the CCT.
    Ccr,
    /// Fault-on then post-fault trajectory.
    Simulate {
        /// Fault duration (default: first configured clearing time).
        #[arg(long)]
        t_clear: Option<f64>,
        /// Post-fault horizon (default: outputs.post_fault_horizon).
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Full study, written to --out.
    Study,
    /// Like `study`, but the study must contain a sweep.
    Sweep,
    /// SVG phase portrait plus CSV layers, written to --out.
    Portrait,
}

fn load(cli: &Cli) -> Result<Study, Error> {
    let path = cli.study.as_ref().ok_or_else(|| Error::Study("--study <file> is required".into()))?;
    let mut s = Study::load_with_overrides(path, &cli.overrides)?;
    if s.name.is_empty() {
        s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    }
    if let Some(seed) = cli.seed {
        s.analysis.seed = Some(seed);
        if s.analysis.basin_samples == 0 {
            s.analysis.basin_samples = 41 * 41;
        }
    }
    Ok(s)
}

fn single(study: &Study, flags: AnalysisFlags) -> Result<PointResult, Error> {
    let mut s = study.clone();
    s.analysis.flags = flags;
    s.sweep = None;
    let p = s.points()?.remove(0);
    run_point(&s, &p)
}

fn code(o: &Outcome) -> u8 {
    match o {
        Outcome::NoPrefaultSep | Outcome::NoPostfaultSep => 2,
        Outcome::NumericalFailure(_) => 3,
        Outcome::Ok | Outcome::OpenBasin => 0,
    }
}

fn out_dir(cli: &Cli, study: &Study) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from(format!("{}_out", study.name)))
}

fn write_file(path: PathBuf, body: &str) -> Result<PathBuf, Error> {
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let study = load(cli)?;
    let off = AnalysisFlags { doa: false, ccr: false, t_ccr: false, cct: false, cca: false, lyapunov: false, spo: false, full_order_check: false };
    match &cli.command {
        Command::Equilibria => {
            let p = single(&study, off)?;
            let doc = json!({
                "outcome": p.outcome,
                "pre_sep": p.pre_sep,
                "post_sep": p.post_sep,
                "equilibria": p.equilibria,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(code(&p.outcome))
        }
        Command::Doa => {
            let p = single(&study, AnalysisFlags { doa: true, ..off })?;
            if let (Some(dir), Some(csv)) = (&cli.out, doa_csv(&p)) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                write_file(dir.join("doa_0.csv"), &csv)?;
            }
            if cli.format == Format::Csv {
                print!("{}", doa_csv(&p).unwrap_or_default());
            } else {
                let d = p.artifacts.doa.as_ref();
                let doc = json!({
                    "outcome": p.outcome,
                    "sep": p.post_sep,
                    "summary": p.doa,
                    "polygon": d.map(|d| &d.closed_polygon),
                    "branches": d.map(|d| d.branches.iter().map(|b| json!({
                        "source": b.source.state,
                        "direction": b.direction,
                        "termination": b.termination,
                        "points": b.polyline,
                    })).collect::<Vec<_>>()),
                });
                println!("{}", serde_json::to_string_pretty(&doc)?);
            }
            Ok(code(&p.outcome))
        }
        Command::Ccr => {
            let f = study.analysis.flags;
            let p = single(&study, AnalysisFlags { doa: true, ccr: true, t_ccr: true, cct: f.cct, cca: f.cca, lyapunov: f.lyapunov, ..off })?;
            let r = p.report.as_ref();
            let doc = json!({
                "outcome": p.outcome,
                "ccr": r.map(|r| r.ccr),
                "t_ccr": r.map(|r| r.t_ccr),
                "zero_margin": r.map(|r| r.zero_margin),
                "cct": r.and_then(|r| r.cct),
                "cca": r.and_then(|r| r.cca_proj),
                "lyapunov_level": r.and_then(|r| r.lyapunov_level),
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(code(&p.outcome))
        }
        Command::Simulate { t_clear, horizon } => {
            let tc = t_clear
                .or_else(|| study.outputs.clearing_times.first().copied())
                .ok_or_else(|| Error::Study("give --t-clear or outputs.clearing_times".into()))?;
            let horizon = horizon.unwrap_or(study.outputs.post_fault_horizon);
            let p = single(&study, off)?;
            if p.pre_sep.is_none() || p.post_sep.is_none() {
                println!("{}", serde_json::to_string_pretty(&json!({ "outcome": p.outcome }))?);
                return Ok(code(&p.outcome));
            }
            let samples = simulate(&p, tc, horizon, &study)?;
            if cli.format == Format::Csv {
                print!("{}", trajectory_csv(&samples));
            } else {
                let rows: Vec<_> = samples.iter().map(|(t, x)| [*t, x[0], x[1]]).collect();
                let doc = json!({ "outcome": p.outcome, "clearing_time": tc, "columns": ["t", "delta1", "delta2"], "samples": rows });
                println!("{}", serde_json::to_string(&doc)?);
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                write_file(dir.join("trajectory_0.csv"), &trajectory_csv(&samples))?;
            }
            Ok(code(&p.outcome))
        }
        Command::Study | Command::Sweep | Command::Portrait => {
            if matches!(cli.command, Command::Sweep) && study.sweep.is_none() {
                return Err(Error::Study("`sweep` needs a sweep block; use `study` for a single scenario".into()));
            }
            if matches!(cli.command, Command::Portrait) && !study.analysis.flags.doa {
                return Err(Error::Missing {
                    what: "the DOA layer".into(),
                    hint: "set analysis.doa = true (the `doa` subcommand computes it alone)".into(),
                });
            }
            let workers = cli.workers.unwrap_or_else(default_workers);
            let r = run_study(&study, workers)?;
            let dir = out_dir(cli, &study);
            let mut files = write_study(&r, &dir)?;
            if matches!(cli.command, Command::Portrait) {
                for p in &r.points {
                    let portrait = render(p);
                    files.push(write_file(dir.join(format!("portrait_{}.svg", p.index)), &portrait.svg)?);
                    for (name, csv) in &portrait.layers {
                        files.push(write_file(dir.join(format!("portrait_{}_{name}.csv", p.index)), csv)?);
                    }
                }
            }
            if cli.format == Format::Csv {
                print!("{}", inverter_doa::export::sweep_summary_csv(&r));
            } else {
                println!("{}", report_json(&r));
            }
            for p in &r.points {
                let r = p.report.as_ref();
                eprintln!(
                    "point {}: {} ccr={} t_ccr={}",
                    p.index,
                    outcome_label(&p.outcome),
                    r.map(|r| fmt12(r.ccr)).unwrap_or_default(),
                    r.map(|r| fmt12(r.t_ccr)).unwrap_or_default()
                );
            }
            eprintln!("wrote {} files to {}", files.len(), dir.display());
            Ok(if r.points.len() == 1 { code(&r.points[0].outcome) } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            let numerical = matches!(e, Error::Core(inverter_doa_core::Error::IntegrationFailed { .. }));
            ExitCode::from(if numerical { 3 } else { 1 })
        }
    }
}
