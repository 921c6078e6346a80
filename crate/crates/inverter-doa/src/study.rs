//! Study files: parsing, `--set` overrides and sweep-point resolution.

use std::path::Path;

use inverter_doa_core::manifold::DoaOptions;
use inverter_doa_core::pipeline::{location_system, match_gsp_gain, AnalysisFlags, AnalysisOptions};
use inverter_doa_core::{FaultSpec, InverterConfig, IntegratorSettings, NetworkParams, RhsMode, TwoInverterSystem};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    #[serde(default)]
    pub name: String,
    pub ibr1: InverterConfig,
    pub ibr2: InverterConfig,
    pub network: NetworkParams,
    pub fault: FaultSpec,
    /// Settings for fault-on and post-fault simulations.
    #[serde(default = "default_solver")]
    pub solver: IntegratorSettings,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub outputs: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSpec>,
}

fn default_solver() -> IntegratorSettings {
    AnalysisOptions::default().settings
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisSection {
    #[serde(flatten)]
    pub flags: AnalysisFlags,
    pub mode: RhsMode,
    pub manifold: DoaOptions,
    pub equilibrium_grid: usize,
    pub cct_t_hi: f64,
    pub lyapunov_samples: usize,
    pub k_i_ratio: f64,
    pub full_order_horizon: f64,
    pub spo_t_max: f64,
    /// When set, every GSP unit gets `k_pll = value / (x_own + xg)` on the
    /// post-fault network.
    pub match_gsp_gain: Option<f64>,
    /// Basin-oracle check: samples per point (0 disables it).
    pub basin_samples: usize,
    /// Seed for random basin samples; without it a regular grid is used.
    pub seed: Option<u64>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        AnalysisSection {
            flags: o.flags,
            mode: o.mode,
            manifold: o.doa,
            equilibrium_grid: o.equilibrium_grid,
            cct_t_hi: o.cct_t_hi,
            lyapunov_samples: o.lyapunov_samples,
            k_i_ratio: o.k_i_ratio,
            full_order_horizon: o.full_order_horizon,
            spo_t_max: o.spo_t_max,
            match_gsp_gain: None,
            basin_samples: 0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    /// Fault durations for which post-fault trajectories are simulated.
    pub clearing_times: Vec<f64>,
    pub post_fault_horizon: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { clearing_times: Vec::new(), post_fault_horizon: 3.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepSpec {
    /// Sets one scalar study field, addressed by a dotted path.
    Parameter { parameter: String, values: Vec<f64> },
    /// Moves the connection point: `x1 = position`, post-fault grid reactance `total_x - position`.
    Location {
        positions: Vec<f64>,
        #[serde(default = "default_total_x")]
        total_x: f64,
    },
}

fn default_total_x() -> f64 {
    1.1
}

/// Compares the GSP unit at several droop values with a GFM replacement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSpec {
    pub reference: InverterConfig,
    pub m_q: Vec<f64>,
}

/// A fully resolved sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyPoint {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub system: TwoInverterSystem,
    pub fault: FaultSpec,
}

impl Study {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Study::from_json(&text)
    }

    /// Loads a study and applies `key=value` overrides.
    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self> {
        let s = Study::load(path)?;
        s.with_overrides(overrides)
    }

    /// The study with every default filled in, as a JSON tree.
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("study serializes")
    }

    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut v = self.to_value();
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| Error::Override(format!("expected key=value, got `{o}`")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut v, key.trim(), value)?;
        }
        Ok(serde_json::from_value(v)?)
    }

    /// SHA-256 of the resolved study, used as provenance.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.to_value()).expect("study serializes")))
    }

    pub fn options(&self) -> AnalysisOptions {
        let a = &self.analysis;
        AnalysisOptions {
            mode: a.mode,
            flags: a.flags,
            doa: a.manifold,
            settings: self.solver,
            equilibrium_grid: a.equilibrium_grid,
            cct_t_hi: a.cct_t_hi,
            lyapunov_samples: a.lyapunov_samples,
            k_i_ratio: a.k_i_ratio,
            full_order_horizon: a.full_order_horizon,
            spo_t_max: a.spo_t_max,
        }
    }

    pub fn system(&self) -> TwoInverterSystem {
        TwoInverterSystem::new(self.ibr1, self.ibr2, self.network)
    }

    pub fn validate(&self) -> Result<()> {
        self.system().validate()?;
        self.fault.validate(&self.network)?;
        self.solver.validate()?;
        if self.outputs.clearing_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Study("clearing times must be finite and >= 0".into()));
        }
        let f = &self.analysis.flags;
        if (f.ccr || f.t_ccr || f.cct || f.cca || f.spo) && !f.doa {
            return Err(Error::Study("ccr, t_ccr, cct, cca and spo need analysis.doa = true".into()));
        }
        match &self.sweep {
            Some(SweepSpec::Parameter { parameter, values }) => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Study("sweep values must be finite".into()));
                }
                match get_path(&self.to_value(), parameter) {
                    Some(Value::Number(_)) => {}
                    _ => return Err(Error::Study(format!("sweep parameter `{parameter}` is not a scalar study field"))),
                }
            }
            Some(SweepSpec::Location { positions, total_x }) => {
                if let Some(p) = positions.iter().find(|p| !(**p > 0.0 && **p < *total_x)) {
                    return Err(Error::Study(format!("location {p} outside (0, {total_x})")));
                }
            }
            None => {}
        }
        Ok(())
    }

    /// Resolves the sweep into independent points (a single point without a sweep).
    pub fn points(&self) -> Result<Vec<StudyPoint>> {
        self.validate()?;
        let base = self.to_value();
        let mut out = Vec::new();
        match &self.sweep {
            None => out.push(self.point(0, None, self.system())?),
            Some(SweepSpec::Parameter { parameter, values }) => {
                for (i, &x) in values.iter().enumerate() {
                    let mut v = base.clone();
                    set_path(&mut v, parameter, x.into())?;
                    let s: Study = serde_json::from_value(v)?;
                    out.push(s.point(i, Some(x), s.system())?);
                }
            }
            Some(SweepSpec::Location { positions, total_x }) => {
                for (i, &x1) in positions.iter().enumerate() {
                    let sys = location_system(&self.system(), &self.fault, x1, *total_x)?;
                    out.push(self.point(i, Some(x1), sys)?);
                }
            }
        }
        Ok(out)
    }

    fn point(&self, index: usize, sweep_value: Option<f64>, mut system: TwoInverterSystem) -> Result<StudyPoint> {
        if let Some(k) = self.analysis.match_gsp_gain {
            system = match_gsp_gain(&system, &self.fault, k)?;
        }
        system.validate()?;
        self.fault.validate(&system.network)?;
        Ok(StudyPoint { index, sweep_value, system, fault: self.fault })
    }
}

fn get_path<'a>(v: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(v, |cur, k| match cur {
        Value::Object(m) => m.get(k),
        Value::Array(a) => k.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

/// Replaces an existing leaf. Unknown keys are rejected so that a typo never
/// silently leaves the study unchanged; `null` leaves (unset options) may be set.
fn set_path(v: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut cur = v;
    for k in path.split('.') {
        cur = match cur {
            Value::Object(m) => m.get_mut(k),
            Value::Array(a) => k.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| Error::Override(format!("unknown study field `{path}`")))?;
    }
    if cur.is_object() || cur.is_array() {
        return Err(Error::Override(format!("`{path}` is not a scalar field")));
    }
    *cur = value;
    Ok(())
}
