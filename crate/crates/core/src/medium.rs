//! Physical parameters of the Λ medium and the unit system.
//!
//! Internally all rates are expressed in units of the excited-state decay
//! rate Γ0 (so `gamma0 == 1` for media built from SI input), times in 1/Γ0 and
//! lengths in units of the reference cell length.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT_SI: f64 = 299_792_458.0;

/// Rate constants and coupling strength of the Λ system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomicMedium {
    /// Total spontaneous decay rate of the excited state, Γ0.
    pub gamma0: f64,
    /// Optical coherence decay rate Γ (Doppler width).
    pub gamma_opt: f64,
    /// Transit loss rate γt.
    pub gamma_t: f64,
    /// Raman coherence decay rate γR.
    pub gamma_r: f64,
    /// Zeeman half-splitting Δz.
    pub delta_z: f64,
    /// Atom-field coupling η (rate per unit length).
    pub eta: f64,
    /// Cell length L.
    pub length: f64,
    /// Speed of light in internal units (lengths per 1/Γ0).
    pub light_speed: f64,
}

impl AtomicMedium {
    pub fn new(
        gamma0: f64,
        gamma_opt: f64,
        gamma_t: f64,
        gamma_r: f64,
        delta_z: f64,
        eta: f64,
        length: f64,
        light_speed: f64,
    ) -> Result<Self, ParamError> {
        let medium = AtomicMedium {
            gamma0,
            gamma_opt,
            gamma_t,
            gamma_r,
            delta_z,
            eta,
            length,
            light_speed,
        };
        medium.validate()?;
        Ok(medium)
    }

    /// Metastable helium at room temperature in a 6 cm cell:
    /// Γ/Γ0 = 500, γt/Γ0 = 0.01, ηc/2Γ² = 1, Γ0 = 10⁷ s⁻¹.
    pub fn he_star() -> Self {
        let units = UnitSystem::default();
        let gamma_opt = 500.0;
        let light_speed = units.light_speed(0.06);
        AtomicMedium {
            gamma0: 1.0,
            gamma_opt,
            gamma_t: 0.01,
            gamma_r: 0.01,
            delta_z: 5.0,
            eta: 2.0 * gamma_opt * gamma_opt / light_speed,
            length: 1.0,
            light_speed,
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let fields = [
            ("gamma0", self.gamma0),
            ("gamma_opt", self.gamma_opt),
            ("gamma_t", self.gamma_t),
            ("gamma_r", self.gamma_r),
            ("delta_z", self.delta_z),
            ("eta", self.eta),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value >= 0.0) {
                return Err(ParamError::range(name, "finite and >= 0", value));
            }
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(ParamError::range("length", "> 0", self.length));
        }
        if !(self.light_speed.is_finite() && self.light_speed > 0.0) {
            return Err(ParamError::range("light_speed", "> 0", self.light_speed));
        }
        if !(self.gamma_t < self.gamma0 && self.gamma0 < self.gamma_opt) {
            return Err(ParamError::RateOrdering {
                gamma_t: self.gamma_t,
                gamma0: self.gamma0,
                gamma_opt: self.gamma_opt,
            });
        }
        Ok(())
    }

    /// Drive-independent optical depth ηL/Γ (twice the unsaturated
    /// amplitude absorption over the cell).
    pub fn optical_depth(&self) -> f64 {
        self.eta * self.length / self.gamma_opt
    }

    /// Same medium with η rescaled to reach the requested optical depth.
    pub fn with_optical_depth(&self, depth: f64) -> Self {
        AtomicMedium {
            eta: depth * self.gamma_opt / self.length,
            ..*self
        }
    }

    /// The dimensionless group ηc/2Γ².
    pub fn coupling_ratio(&self) -> f64 {
        self.eta * self.light_speed / (2.0 * self.gamma_opt * self.gamma_opt)
    }

    /// √(ηc/8), the matter weight in the populariton.
    pub fn populariton_weight(&self) -> f64 {
        (self.eta * self.light_speed / 8.0).sqrt()
    }

    /// Saturation parameter at which the antisymmetric CPO gain changes sign
    /// in the γt ≪ Γ0 approximation, 3γt/Γ0.
    pub fn cpo_threshold(&self) -> f64 {
        3.0 * self.gamma_t / self.gamma0
    }
}

/// Saturation-broadened CPO linewidth γt + |Ω_D|²/Γ.
pub fn cpo_linewidth(medium: &AtomicMedium, omega_d: f64) -> f64 {
    medium.gamma_t + omega_d * omega_d / medium.gamma_opt
}

/// Conversion between SI quantities and the internal Γ0-based units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    /// Γ0 in s⁻¹.
    pub gamma0_si: f64,
}

impl Default for UnitSystem {
    fn default() -> Self {
        UnitSystem { gamma0_si: 1.0e7 }
    }
}

impl UnitSystem {
    pub fn time_to_us(&self, t: f64) -> f64 {
        t / self.gamma0_si * 1.0e6
    }

    pub fn us_to_time(&self, t_us: f64) -> f64 {
        t_us * 1.0e-6 * self.gamma0_si
    }

    pub fn rate_from_si(&self, rate: f64) -> f64 {
        rate / self.gamma0_si
    }

    /// Speed of light in cell lengths per 1/Γ0 for a cell of `length_m` metres.
    pub fn light_speed(&self, length_m: f64) -> f64 {
        SPEED_OF_LIGHT_SI / (length_m * self.gamma0_si)
    }
}

/// Medium parameters in SI units (rates in s⁻¹, η in s⁻¹·m⁻¹, length in m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiMedium {
    pub gamma0: f64,
    pub gamma_opt: f64,
    pub gamma_t: f64,
    pub gamma_r: f64,
    pub delta_z: f64,
    pub eta: f64,
    pub length: f64,
}

impl SiMedium {
    /// Converts to internal units; lengths become fractions of the cell.
    pub fn to_internal(&self) -> Result<(AtomicMedium, UnitSystem), ParamError> {
        if !(self.gamma0.is_finite() && self.gamma0 > 0.0) {
            return Err(ParamError::range("gamma0", "> 0 in SI input", self.gamma0));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(ParamError::range("length", "> 0", self.length));
        }
        let units = UnitSystem {
            gamma0_si: self.gamma0,
        };
        let medium = AtomicMedium::new(
            1.0,
            units.rate_from_si(self.gamma_opt),
            units.rate_from_si(self.gamma_t),
            units.rate_from_si(self.gamma_r),
            units.rate_from_si(self.delta_z),
            self.eta * self.length / self.gamma0,
            1.0,
            units.light_speed(self.length),
        )?;
        Ok((medium, units))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn he_star_ratios() {
        let m = AtomicMedium::he_star();
        m.validate().unwrap();
        assert!((m.coupling_ratio() - 1.0).abs() < 1e-12);
        assert!((m.gamma_opt / m.gamma0 - 500.0).abs() < 1e-12);
        // 2ΓL/c for a 6 cm cell
        assert!((m.optical_depth() - 2.0 * 5.0e9 * 0.06 / SPEED_OF_LIGHT_SI).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_ordering() {
        let mut m = AtomicMedium::he_star();
        m.gamma_t = 2.0;
        assert!(matches!(m.validate(), Err(ParamError::RateOrdering { .. })));
        m = AtomicMedium::he_star();
        m.gamma_opt = 0.5;
        assert!(m.validate().is_err());
        m = AtomicMedium::he_star();
        m.eta = -1.0;
        assert!(m.validate().is_err());
        m = AtomicMedium::he_star();
        m.length = 0.0;
        assert!(m.validate().is_err());
    }

    #[test]
    fn linewidth_examples() {
        let m = AtomicMedium::he_star();
        assert_eq!(cpo_linewidth(&m, 0.0), m.gamma_t);
        assert!((cpo_linewidth(&m, 5f64.sqrt()) - 0.02).abs() < 1e-15);
        let strong = AtomicMedium {
            gamma_t: 1e-6,
            ..m
        };
        let a = cpo_linewidth(&strong, 10.0);
        let b = cpo_linewidth(&strong, 200f64.sqrt());
        assert!((b / a - 2.0).abs() < 1e-4);
    }

    #[test]
    fn si_round_trip() {
        let si = SiMedium {
            gamma0: 1.0e7,
            gamma_opt: 5.0e9,
            gamma_t: 1.0e5,
            gamma_r: 1.0e5,
            delta_z: 5.0e7,
            eta: 2.0 * 5.0e9 * 5.0e9 / SPEED_OF_LIGHT_SI,
            length: 0.06,
        };
        let (m, units) = si.to_internal().unwrap();
        let reference = AtomicMedium::he_star();
        assert!((m.gamma_opt - reference.gamma_opt).abs() < 1e-9);
        assert!((m.coupling_ratio() - 1.0).abs() < 1e-12);
        assert!((m.optical_depth() - reference.optical_depth()).abs() < 1e-12);
        assert!((units.time_to_us(10.0) - 1.0).abs() < 1e-12);
    }
}
