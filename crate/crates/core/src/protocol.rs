//! Write/store/retrieve orchestration, the storage efficiency and the two
//! efficiency sweeps (optical depth and switching time).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NumericError, ParamError};
use crate::maxwell_bloch::{run_sequence, RunOptions, RunTraces, SimGrid, SolverMode};
use crate::medium::{cpo_linewidth, AtomicMedium};
use crate::pulse::{ramp_duration, DriveProfile, PulseShape, SignalPulse};
use crate::quadrature::QuadratureVector;
use crate::steady_state::{depleted_saturation_exact, drive_for_saturation};

/// Trailing power, relative to the retrieved peak, above which the
/// retrieval window is considered truncated.
pub const WINDOW_TOLERANCE: f64 = 1e-4;

/// Timing, pulse and grid of one storage experiment (internal units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageSequence {
    /// Drive saturation at the cell entrance.
    pub s_in: f64,
    /// Start of the storage (switch-off) edge.
    pub cut: f64,
    /// Dark time between the end of the storage edge and the start of the
    /// retrieval edge.
    pub storage: f64,
    pub tau_storage: f64,
    pub tau_retrieval: f64,
    /// Intensity FWHM of the rising-exponential signal.
    pub pulse_fwhm: f64,
    /// Peak signal Rabi frequency over the drive Rabi frequency.
    pub signal_ratio: f64,
    /// Simulated time after the retrieval edge has completed.
    pub tail: f64,
    pub dt: f64,
    pub n_z: usize,
    #[serde(default)]
    pub mode: SolverMode,
}

impl StorageSequence {
    pub fn validate(&self) -> Result<(), ParamError> {
        let positive = [
            ("s_in", self.s_in),
            ("pulse_fwhm", self.pulse_fwhm),
            ("signal_ratio", self.signal_ratio),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ParamError::range(name, "finite and > 0", v));
            }
        }
        let non_negative = [
            ("cut", self.cut),
            ("storage", self.storage),
            ("tau_storage", self.tau_storage),
            ("tau_retrieval", self.tau_retrieval),
            ("tail", self.tail),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ParamError::range(name, "finite and >= 0", v));
            }
        }
        if self.signal_ratio > 0.1 {
            return Err(ParamError::range("signal_ratio", "<= 0.1 (weak signal)", self.signal_ratio));
        }
        Ok(())
    }

    /// Drive switch-on of the retrieve phase; the dark time starts once the
    /// storage edge has fully ramped down.
    pub fn retrieve_time(&self) -> f64 {
        self.cut + ramp_duration(self.tau_storage) + self.storage
    }

    pub fn drive_level(&self, medium: &AtomicMedium) -> f64 {
        drive_for_saturation(medium, self.s_in)
    }

    pub fn drive(&self, medium: &AtomicMedium) -> DriveProfile {
        DriveProfile::write_store_retrieve(
            self.drive_level(medium),
            self.cut,
            self.retrieve_time(),
            self.tau_storage,
            self.tau_retrieval,
        )
    }

    /// Pure Q⊥ rising exponential that follows the drive's storage edge.
    pub fn signal(&self, medium: &AtomicMedium) -> SignalPulse {
        let shape = PulseShape::rising_exponential(self.cut, self.pulse_fwhm, self.tau_storage);
        SignalPulse::q_perp(shape, self.signal_ratio * self.drive_level(medium))
    }

    pub fn t_end(&self) -> f64 {
        self.retrieve_time() + ramp_duration(self.tau_retrieval) + self.tail
    }

    pub fn grid(&self) -> SimGrid {
        SimGrid::covering(self.t_end(), self.dt, self.n_z, self.mode)
    }

    /// CPO linewidth γt + |Ω_D|²/Γ at the entrance.
    pub fn entrance_linewidth(&self, medium: &AtomicMedium) -> f64 {
        cpo_linewidth(medium, self.drive_level(medium))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageResult {
    pub traces: RunTraces,
    pub efficiency: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub optical_depth: f64,
    pub cut_time: f64,
    pub storage_duration: f64,
    pub retrieve_time: f64,
}

/// Unit vector along the summed input quadratures, the eigen-quadrature the
/// retrieved power is projected on.
pub fn input_direction(signal_in: &[QuadratureVector]) -> Option<[f64; 4]> {
    let mut sum = [0.0; 4];
    for q in signal_in {
        for (acc, v) in sum.iter_mut().zip(q.as_array()) {
            *acc += v;
        }
    }
    let norm = sum.iter().map(|v| v * v).sum::<f64>().sqrt();
    (norm > 0.0).then(|| sum.map(|v| v / norm))
}

fn trapezoid(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return 0.0;
    }
    dt * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
}

/// e = ∫_T (u·S_out)² dt / ∫ |S_in|² dt on uniformly sampled traces.
pub fn efficiency_of(
    signal_in: &[QuadratureVector],
    signal_out: &[QuadratureVector],
    dt: f64,
    retrieve_time: f64,
) -> Result<f64, NumericError> {
    let u = input_direction(signal_in)
        .ok_or_else(|| ParamError::Invalid("input pulse carries no energy".into()))?;
    let denominator = trapezoid(signal_in.iter().map(|q| q.norm_sqr()), dt);
    let start = ((retrieve_time / dt).ceil() as usize).min(signal_out.len());
    let power: Vec<f64> = signal_out[start..]
        .iter()
        .map(|q| q.as_array().iter().zip(&u).map(|(a, b)| a * b).sum::<f64>().powi(2))
        .collect();
    let peak = power.iter().fold(0.0f64, |m, &p| m.max(p));
    if peak == 0.0 {
        return Ok(0.0);
    }
    let ratio = power.last().copied().unwrap_or(0.0) / peak;
    if ratio > WINDOW_TOLERANCE {
        return Err(NumericError::Window { ratio });
    }
    Ok(trapezoid(power.into_iter(), dt) / denominator)
}

pub fn efficiency(traces: &RunTraces, retrieve_time: f64) -> Result<f64, NumericError> {
    efficiency_of(&traces.signal_in, &traces.signal_out, traces.dt, retrieve_time)
}

/// Runs one storage sequence and evaluates its efficiency.
pub fn run_storage(
    medium: &AtomicMedium,
    sequence: &StorageSequence,
    opts: &RunOptions,
) -> Result<StorageResult, NumericError> {
    sequence.validate()?;
    let traces = run_sequence(
        medium,
        &sequence.drive(medium),
        &sequence.signal(medium),
        &sequence.grid(),
        opts,
    )?;
    let e = efficiency(&traces, sequence.retrieve_time())?;
    Ok(StorageResult {
        traces,
        efficiency: e,
        s_in: sequence.s_in,
        s_out: depleted_saturation_exact(medium, sequence.s_in, medium.length),
        optical_depth: medium.optical_depth(),
        cut_time: sequence.cut,
        storage_duration: sequence.storage,
        retrieve_time: sequence.retrieve_time(),
    })
}

fn efficiency_only(medium: &AtomicMedium, sequence: &StorageSequence) -> Result<f64, NumericError> {
    run_storage(medium, sequence, &RunOptions::default()).map(|r| r.efficiency)
}

fn in_pool<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> T {
    match workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(job),
            Err(e) => {
                log::warn!("could not build a {n}-thread pool ({e}); using the global pool");
                job()
            }
        },
        None => job(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthPoint {
    pub depth: f64,
    pub s_in: f64,
    pub s_out: f64,
    pub efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Efficiency on the grid depth × s_in (row-major in s_in, then depth).
/// Failed points carry NaN and the error message.
pub fn sweep_depth(
    medium: &AtomicMedium,
    base: &StorageSequence,
    depths: &[f64],
    s_in_values: &[f64],
    workers: Option<usize>,
) -> Vec<DepthPoint> {
    let jobs: Vec<(f64, f64)> = s_in_values
        .iter()
        .flat_map(|&s| depths.iter().map(move |&d| (s, d)))
        .collect();
    in_pool(workers, || {
        jobs.par_iter()
            .map(|&(s_in, depth)| {
                let m = medium.with_optical_depth(depth);
                let seq = StorageSequence { s_in, ..*base };
                let s_out = depleted_saturation_exact(&m, s_in, m.length);
                let (efficiency, error) = match efficiency_only(&m, &seq) {
                    Ok(e) => (e, None),
                    Err(e) => {
                        log::warn!("depth {depth}, s_in {s_in}: {e}");
                        (f64::NAN, Some(e.to_string()))
                    }
                };
                DepthPoint {
                    depth,
                    s_in,
                    s_out,
                    efficiency,
                    error,
                }
            })
            .collect()
    })
}

pub const DEPTH_HEADER: &str = "depth,s_in,s_out,efficiency";

pub fn write_depth_csv<W: Write>(points: &[DepthPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DEPTH_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.depth, p.s_in, p.s_out, p.efficiency)?;
    }
    Ok(())
}

/// Drive edge(s) whose switching time is swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Storage,
    Retrieval,
    Both,
}

impl Edge {
    pub fn name(self) -> &'static str {
        match self {
            Edge::Storage => "storage",
            Edge::Retrieval => "retrieval",
            Edge::Both => "both",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchPoint {
    /// τ_sw in units of 1/Δ_CPO at the entrance.
    pub tau_sw_over_inv_dcpo: f64,
    pub edge: Edge,
    pub efficiency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Efficiency against the switching time of the selected edge(s); the other
/// edge keeps the base sequence's value.
pub fn sweep_switch(
    medium: &AtomicMedium,
    base: &StorageSequence,
    tau_values: &[f64],
    edge: Edge,
    workers: Option<usize>,
) -> Vec<SwitchPoint> {
    let unit = 1.0 / base.entrance_linewidth(medium);
    in_pool(workers, || {
        tau_values
            .par_iter()
            .map(|&x| {
                let tau = x * unit;
                let mut seq = *base;
                if matches!(edge, Edge::Storage | Edge::Both) {
                    seq.tau_storage = tau;
                }
                if matches!(edge, Edge::Retrieval | Edge::Both) {
                    seq.tau_retrieval = tau;
                }
                let (efficiency, error) = match efficiency_only(medium, &seq) {
                    Ok(e) => (e, None),
                    Err(e) => {
                        log::warn!("tau_sw {x}/dcpo ({}): {e}", edge.name());
                        (f64::NAN, Some(e.to_string()))
                    }
                };
                SwitchPoint {
                    tau_sw_over_inv_dcpo: x,
                    edge,
                    efficiency,
                    error,
                }
            })
            .collect()
    })
}

pub const SWITCH_HEADER: &str = "tau_sw_over_inv_dcpo,edge,efficiency";

pub fn write_switch_csv<W: Write>(points: &[SwitchPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SWITCH_HEADER}")?;
    for p in points {
        writeln!(out, "{},{},{}", p.tau_sw_over_inv_dcpo, p.edge.name(), p.efficiency)?;
    }
    Ok(())
}
