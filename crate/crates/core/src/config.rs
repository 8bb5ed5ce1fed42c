//! JSON run configuration: parsing, boundary validation, unit resolution and
//! the shipped presets.
//!
//! A configuration is *resolved* once its medium is expressed in internal
//! units, optical-depth overrides are folded in and every section has been
//! validated. Resolved configurations are fixed points of [`RunConfig::resolve`].

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ParamError};
use crate::linear_response::{log_space, ResponseModel};
use crate::maxwell_bloch::{SolverMode, TraceNormalization};
use crate::medium::{AtomicMedium, SiMedium, UnitSystem};
use crate::protocol::{Edge, StorageSequence};

/// How the medium and the sequence times are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    /// Rates in Γ0, times in 1/Γ0, lengths in cell lengths.
    #[default]
    Gamma0,
    /// `medium_si` in SI; sequence times in µs.
    Si,
}

impl Units {
    pub fn parse(name: &str) -> Result<Self, ConfigError> {
        match name {
            "gamma0" => Ok(Units::Gamma0),
            "si" => Ok(Units::Si),
            other => Err(ConfigError::Parse(format!("unknown unit system `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DispersionConfig {
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub model: ResponseModel,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            s_min: 1e-3,
            s_max: 1e3,
            points: 121,
            model: ResponseModel::Simplified,
        }
    }
}

impl DispersionConfig {
    pub fn s_values(&self) -> Vec<f64> {
        log_space(self.s_min, self.s_max, self.points)
    }
}

/// Frequencies are in units of the local CPO linewidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseConfig {
    pub s_values: Vec<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
    pub model: ResponseModel,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        ResponseConfig {
            s_values: vec![0.1, 1.0, 10.0],
            omega_min: 1e-3,
            omega_max: 10.0,
            points: 41,
            model: ResponseModel::Full,
        }
    }
}

impl ResponseConfig {
    pub fn omegas(&self) -> Vec<f64> {
        log_space(self.omega_min, self.omega_max, self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepthSweepConfig {
    pub depths: Vec<f64>,
    pub s_in: Vec<f64>,
}

impl Default for DepthSweepConfig {
    fn default() -> Self {
        DepthSweepConfig {
            depths: vec![0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0],
            s_in: vec![0.1, 0.3, 1.0],
        }
    }
}

/// Switching times are in units of 1/Δ_CPO at the cell entrance. An empty
/// `s_in` list sweeps the sequence's own saturation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchSweepConfig {
    pub tau_over_inv_dcpo: Vec<f64>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub s_in: Vec<f64>,
}

impl Default for SwitchSweepConfig {
    fn default() -> Self {
        SwitchSweepConfig {
            tau_over_inv_dcpo: log_space(0.01, 10.0, 9),
            edges: vec![Edge::Storage, Edge::Retrieval],
            s_in: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub normalization: TraceNormalization,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            normalization: TraceNormalization::Raw,
        }
    }
}

/// Write/store/retrieve sequence used when the configuration gives none.
pub fn default_sequence() -> StorageSequence {
    StorageSequence {
        s_in: 0.2,
        cut: 60.0,
        storage: 20.0,
        tau_storage: 0.0,
        tau_retrieval: 0.0,
        pulse_fwhm: 20.0,
        signal_ratio: 1e-3,
        tail: 400.0,
        dt: 0.02,
        n_z: 33,
        mode: SolverMode::CoherenceEliminated,
    }
}

fn default_gamma0_si() -> f64 {
    UnitSystem::default().gamma0_si
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub units: Units,
    /// Γ0 in s⁻¹, used to label time output in µs.
    #[serde(default = "default_gamma0_si")]
    pub gamma0_si: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<AtomicMedium>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium_si: Option<SiMedium>,
    /// Rescales η to reach this optical depth ηL/Γ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optical_depth: Option<f64>,
    #[serde(default = "default_sequence")]
    pub sequence: StorageSequence,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub response: ResponseConfig,
    #[serde(default)]
    pub sweep_depth: DepthSweepConfig,
    #[serde(default)]
    pub sweep_switch: SwitchSweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            units: Units::Gamma0,
            gamma0_si: default_gamma0_si(),
            medium: None,
            medium_si: None,
            optical_depth: None,
            sequence: default_sequence(),
            dispersion: DispersionConfig::default(),
            response: ResponseConfig::default(),
            sweep_depth: DepthSweepConfig::default(),
            sweep_switch: SwitchSweepConfig::default(),
            output: OutputConfig::default(),
            workers: None,
        }
    }
}

pub const PRESET_NAMES: [&str; 4] = ["he_star_fig2", "he_star_fig3", "he_star_figS1a", "he_star_figS1b"];

pub fn preset_source(name: &str) -> Result<&'static str, ConfigError> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    match name {
        "he_star_fig2" => Ok(include_str!("../presets/he_star_fig2.json")),
        "he_star_fig3" => Ok(include_str!("../presets/he_star_fig3.json")),
        "he_star_figS1a" => Ok(include_str!("../presets/he_star_figS1a.json")),
        "he_star_figS1b" => Ok(include_str!("../presets/he_star_figS1b.json")),
        other => Err(ConfigError::UnknownPreset(other.into())),
    }
}

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    RunConfig::from_json(preset_source(name)?)
}

fn invalid(msg: String) -> ConfigError {
    ConfigError::Param(ParamError::Invalid(msg))
}

fn check_positive(name: &'static str, values: &[f64]) -> Result<(), ConfigError> {
    match values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        Some(&v) => Err(ParamError::range(name, "finite and > 0", v).into()),
        None if values.is_empty() => Err(invalid(format!("{name} must not be empty"))),
        None => Ok(()),
    }
}

fn check_span(name: &'static str, lo: f64, hi: f64, points: usize) -> Result<(), ConfigError> {
    check_positive(name, &[lo, hi])?;
    if hi < lo || points == 0 || (points == 1 && hi != lo) {
        return Err(invalid(format!(
            "{name}: need 0 < min <= max and at least two points for a range, got [{lo}, {hi}] with {points}"
        )));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("configuration serializes");
        s.push('\n');
        s
    }

    /// The medium in internal units; valid only on a resolved configuration.
    pub fn medium(&self) -> AtomicMedium {
        self.medium.unwrap_or_else(AtomicMedium::he_star)
    }

    pub fn unit_system(&self) -> UnitSystem {
        UnitSystem {
            gamma0_si: self.gamma0_si,
        }
    }

    /// Converts to internal units and validates every section.
    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let mut out = self.clone();
        let mut medium = match self.units {
            Units::Gamma0 => {
                if self.medium_si.is_some() {
                    return Err(invalid("medium_si given with units = gamma0".into()));
                }
                if !(self.gamma0_si.is_finite() && self.gamma0_si > 0.0) {
                    return Err(ParamError::range("gamma0_si", "finite and > 0", self.gamma0_si).into());
                }
                self.medium.unwrap_or_else(AtomicMedium::he_star)
            }
            Units::Si => {
                let si = self
                    .medium_si
                    .ok_or_else(|| invalid("units = si requires medium_si".into()))?;
                if self.medium.is_some() {
                    return Err(invalid("give either medium or medium_si, not both".into()));
                }
                let (medium, units) = si.to_internal()?;
                out.gamma0_si = units.gamma0_si;
                let seq = &mut out.sequence;
                for t in [
                    &mut seq.cut,
                    &mut seq.storage,
                    &mut seq.tau_storage,
                    &mut seq.tau_retrieval,
                    &mut seq.pulse_fwhm,
                    &mut seq.tail,
                    &mut seq.dt,
                ] {
                    *t = units.us_to_time(*t);
                }
                medium
            }
        };
        medium.validate()?;
        if let Some(depth) = self.optical_depth {
            check_positive("optical_depth", &[depth])?;
            medium = medium.with_optical_depth(depth);
            medium.validate()?;
        }
        out.units = Units::Gamma0;
        out.medium = Some(medium);
        out.medium_si = None;
        out.optical_depth = None;

        let seq = &out.sequence;
        seq.validate()?;
        let grid = seq.grid();
        grid.validate()?;
        let peak = seq.drive_level(&medium) * (1.0 + seq.signal_ratio);
        grid.check_step(&medium, peak).map_err(|e| invalid(e.to_string()))?;

        let d = &out.dispersion;
        check_span("dispersion.s", d.s_min, d.s_max, d.points)?;
        let r = &out.response;
        check_positive("response.s_values", &r.s_values)?;
        check_span("response.omega", r.omega_min, r.omega_max, r.points)?;
        check_positive("sweep_depth.depths", &out.sweep_depth.depths)?;
        check_positive("sweep_depth.s_in", &out.sweep_depth.s_in)?;
        let sw = &out.sweep_switch;
        if let Some(&t) = sw.tau_over_inv_dcpo.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(ParamError::range("sweep_switch.tau_over_inv_dcpo", "finite and >= 0", t).into());
        }
        if sw.tau_over_inv_dcpo.is_empty() || sw.edges.is_empty() {
            return Err(invalid("sweep_switch needs switching times and edges".into()));
        }
        if !sw.s_in.is_empty() {
            check_positive("sweep_switch.s_in", &sw.s_in)?;
        }
        if out.output.dir.is_empty() {
            return Err(invalid("output.dir must not be empty".into()));
        }
        if out.workers == Some(0) {
            return Err(ParamError::range("workers", ">= 1", 0.0).into());
        }
        Ok(out)
    }
}
