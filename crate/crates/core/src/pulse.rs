//! Time envelopes of the driving and signal fields.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::ParamError;
use crate::quadrature::QuadratureVector;

/// C¹ ramp 3x² − 2x³ on [0, 1], clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Fraction of the smoothstep duration spent between the 10% and 90% levels.
pub fn smoothstep_10_90_fraction() -> f64 {
    // root of 2x³ − 3x² + 0.1 in (0, 0.5); the 90% point is its mirror image.
    let mut x = 0.2;
    for _ in 0..50 {
        let f = 2.0 * x * x * x - 3.0 * x * x + 0.1;
        let df = 6.0 * x * x - 6.0 * x;
        x -= f / df;
    }
    1.0 - 2.0 * x
}

/// Total ramp duration producing a 10–90% switching time `tau_sw`.
pub fn ramp_duration(tau_sw: f64) -> f64 {
    tau_sw / smoothstep_10_90_fraction()
}

/// A level change of the drive, starting at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub time: f64,
    pub level: f64,
    /// 10–90% switching time of this edge; falls back to the profile default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_sw: Option<f64>,
}

/// Real, non-negative driving Rabi frequency Ω_D(t) built from a schedule of
/// smoothstep-ramped level changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProfile {
    pub tau_sw: f64,
    pub schedule: Vec<Breakpoint>,
}

impl DriveProfile {
    pub fn new(tau_sw: f64, schedule: Vec<Breakpoint>) -> Result<Self, ParamError> {
        let profile = DriveProfile { tau_sw, schedule };
        profile.validate()?;
        Ok(profile)
    }

    pub fn constant(level: f64) -> Self {
        DriveProfile {
            tau_sw: 0.0,
            schedule: vec![Breakpoint {
                time: 0.0,
                level,
                tau_sw: None,
            }],
        }
    }

    /// On from t = 0, switched off at `cut`, back on at `retrieve`.
    pub fn write_store_retrieve(
        level: f64,
        cut: f64,
        retrieve: f64,
        tau_storage: f64,
        tau_retrieval: f64,
    ) -> Self {
        DriveProfile {
            tau_sw: tau_storage,
            schedule: vec![
                Breakpoint {
                    time: 0.0,
                    level,
                    tau_sw: None,
                },
                Breakpoint {
                    time: cut,
                    level: 0.0,
                    tau_sw: Some(tau_storage),
                },
                Breakpoint {
                    time: retrieve,
                    level,
                    tau_sw: Some(tau_retrieval),
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.tau_sw.is_finite() && self.tau_sw >= 0.0) {
            return Err(ParamError::range("tau_sw", ">= 0", self.tau_sw));
        }
        if self.schedule.is_empty() {
            return Err(ParamError::Invalid("drive schedule is empty".into()));
        }
        for (k, bp) in self.schedule.iter().enumerate() {
            if !(bp.level.is_finite() && bp.level >= 0.0) {
                return Err(ParamError::range("drive level", "finite and >= 0", bp.level));
            }
            if let Some(tau) = bp.tau_sw {
                if !(tau.is_finite() && tau >= 0.0) {
                    return Err(ParamError::range("tau_sw", ">= 0", tau));
                }
            }
            if k > 0 && bp.time < self.schedule[k - 1].time {
                return Err(ParamError::Invalid("drive schedule must be time-ordered".into()));
            }
        }
        Ok(())
    }

    fn edge_tau(&self, bp: &Breakpoint) -> f64 {
        bp.tau_sw.unwrap_or(self.tau_sw)
    }

    pub fn level(&self, t: f64) -> f64 {
        let mut level = self.schedule[0].level;
        for bp in &self.schedule[1..] {
            if t < bp.time {
                break;
            }
            let ramp = ramp_duration(self.edge_tau(bp));
            let w = if ramp > 0.0 {
                smoothstep((t - bp.time) / ramp)
            } else {
                1.0
            };
            level += (bp.level - level) * w;
        }
        level
    }

    pub fn peak(&self) -> f64 {
        self.schedule.iter().map(|b| b.level).fold(0.0, f64::max)
    }

    /// Start time of the last switch-on edge, if any.
    pub fn last_switch_on(&self) -> Option<f64> {
        self.schedule
            .windows(2)
            .filter(|w| w[1].level > w[0].level)
            .map(|w| w[1].time)
            .last()
    }

    /// Start time of the first switch-off edge, if any.
    pub fn first_switch_off(&self) -> Option<f64> {
        self.schedule
            .windows(2)
            .find(|w| w[1].level < w[0].level)
            .map(|w| w[1].time)
    }

    /// Circular components Ω_D^± = Ω_D/√2.
    pub fn circular(&self, t: f64) -> (Complex64, Complex64) {
        let half = Complex64::new(self.level(t) * FRAC_1_SQRT_2, 0.0);
        (half, half)
    }
}

/// Real temporal shape of the signal envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    Zero,
    /// e^{(t−cut)/time_constant} on [cut − window, cut], then a smoothstep
    /// ramp to zero of 10–90% duration `cut_tau_sw`.
    RisingExponential {
        cut: f64,
        window: f64,
        time_constant: f64,
        cut_tau_sw: f64,
    },
    Gaussian { center: f64, width: f64 },
}

impl PulseShape {
    /// Rising exponential whose intensity FWHM is `fwhm`, opened six time
    /// constants before the cut (intensity e⁻¹² at the window edge).
    pub fn rising_exponential(cut: f64, fwhm: f64, cut_tau_sw: f64) -> Self {
        let time_constant = 2.0 * fwhm / std::f64::consts::LN_2;
        PulseShape::RisingExponential {
            cut,
            window: 6.0 * time_constant,
            time_constant,
            cut_tau_sw,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            PulseShape::Zero => 0.0,
            PulseShape::RisingExponential {
                cut,
                window,
                time_constant,
                cut_tau_sw,
            } => {
                if t < cut - window {
                    0.0
                } else if t <= cut {
                    ((t - cut) / time_constant).exp()
                } else {
                    let ramp = ramp_duration(cut_tau_sw);
                    if ramp > 0.0 {
                        1.0 - smoothstep((t - cut) / ramp)
                    } else {
                        0.0
                    }
                }
            }
            PulseShape::Gaussian { center, width } => {
                let x = (t - center) / width;
                (-0.5 * x * x).exp()
            }
        }
    }
}

/// Weak signal Ω(t) = amplitude · shape(t) · e^{−iδt} with polarization angle α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalPulse {
    pub shape: PulseShape,
    pub amplitude: Complex64,
    pub alpha: f64,
    #[serde(default)]
    pub delta: f64,
}

impl SignalPulse {
    /// A pure Q⊥ eigenmode: polarized along e⊥ with Q⊥(t) = amplitude · shape(t).
    pub fn q_perp(shape: PulseShape, amplitude: f64) -> Self {
        SignalPulse {
            shape,
            amplitude: Complex64::new(0.0, -amplitude),
            alpha: FRAC_PI_2,
            delta: 0.0,
        }
    }

    pub fn none() -> Self {
        SignalPulse {
            shape: PulseShape::Zero,
            amplitude: Complex64::new(0.0, 0.0),
            alpha: 0.0,
            delta: 0.0,
        }
    }

    pub fn omega_s(&self, t: f64) -> Complex64 {
        let rot = Complex64::from_polar(1.0, -self.delta * t);
        self.amplitude * self.shape.value(t) * rot
    }

    /// Circular components Ω^± = Ω e^{∓iα}/√2.
    pub fn circular(&self, t: f64) -> (Complex64, Complex64) {
        let omega = self.omega_s(t) * FRAC_1_SQRT_2;
        (
            omega * Complex64::from_polar(1.0, -self.alpha),
            omega * Complex64::from_polar(1.0, self.alpha),
        )
    }

    pub fn quadratures(&self, t: f64) -> QuadratureVector {
        let (p, m) = self.circular(t);
        crate::quadrature::quadratures_from_fields(p, m)
    }

    /// True when the weak-signal assumption holds (peak ratio ≤ 0.1).
    pub fn is_weak(&self, drive_peak: f64, samples: &[f64]) -> bool {
        let peak = samples
            .iter()
            .map(|&t| self.omega_s(t).norm())
            .fold(0.0, f64::max);
        peak <= 0.1 * drive_peak
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_ninety_fraction() {
        let f = smoothstep_10_90_fraction();
        let x10 = (1.0 - f) / 2.0;
        assert!((smoothstep(x10) - 0.1).abs() < 1e-12);
        assert!((smoothstep(1.0 - x10) - 0.9).abs() < 1e-12);
    }

    #[test]
    fn schedule_levels() {
        let d = DriveProfile::write_store_retrieve(4.0, 10.0, 20.0, 1.0, 0.0);
        assert_eq!(d.level(5.0), 4.0);
        assert_eq!(d.level(15.0), 0.0);
        assert_eq!(d.level(20.0), 4.0);
        let mid = d.level(10.0 + 0.5 * ramp_duration(1.0));
        assert!((mid - 2.0).abs() < 1e-12);
        assert_eq!(d.first_switch_off(), Some(10.0));
        assert_eq!(d.last_switch_on(), Some(20.0));
        assert!(d.validate().is_ok());
    }

    #[test]
    fn rejects_negative_level() {
        let r = DriveProfile::new(
            0.0,
            vec![Breakpoint {
                time: 0.0,
                level: -1.0,
                tau_sw: None,
            }],
        );
        assert!(r.is_err());
    }

    #[test]
    fn q_perp_signal_quadratures() {
        let s = SignalPulse::q_perp(PulseShape::Gaussian { center: 0.0, width: 1.0 }, 0.3);
        let q = s.quadratures(0.0);
        assert!((q.q_perp - 0.3).abs() < 1e-15);
        assert!(q.p_perp.abs() < 1e-15 && q.p_par.abs() < 1e-15 && q.q_par.abs() < 1e-15);
    }

    #[test]
    fn rising_exponential_shape() {
        let shape = PulseShape::RisingExponential {
            cut: 10.0,
            window: 4.0,
            time_constant: 1.0,
            cut_tau_sw: 0.0,
        };
        assert_eq!(shape.value(5.0), 0.0);
        assert!((shape.value(10.0) - 1.0).abs() < 1e-15);
        assert!((shape.value(8.0) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(shape.value(10.01), 0.0);
    }

    #[test]
    fn rising_exponential_fwhm() {
        let shape = PulseShape::rising_exponential(100.0, 20.0, 0.0);
        let half = 100.0 - 20.0;
        let intensity = shape.value(half).powi(2);
        assert!((intensity - 0.5).abs() < 1e-12);
    }
}
