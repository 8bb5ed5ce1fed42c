//! Five-variable optical Bloch equations of the Λ system in the frame
//! rotating at the drive carrier.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::medium::AtomicMedium;

/// Density-matrix variables at one grid point. The excited population is
/// fixed by trace closure, ρ_ee = 1 − ρ₁₁ − ρ₋₁₋₁.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochState {
    /// ρ̃_{e,1}, driven by the σ− component Ω⁻.
    pub coh_e1: Complex64,
    /// ρ̃_{e,−1}, driven by the σ+ component Ω⁺.
    pub coh_em1: Complex64,
    /// Raman coherence ρ̃_{1,−1}.
    pub coh_raman: Complex64,
    pub pop_p1: f64,
    pub pop_m1: f64,
}

impl BlochState {
    /// Ground-state equipartition with no coherences.
    pub fn equilibrium() -> Self {
        BlochState {
            pop_p1: 0.5,
            pop_m1: 0.5,
            ..Default::default()
        }
    }

    pub fn pop_excited(&self) -> f64 {
        1.0 - self.pop_p1 - self.pop_m1
    }

    /// Ground-population difference ρ₁₁ − ρ₋₁₋₁.
    pub fn rho_delta(&self) -> f64 {
        self.pop_p1 - self.pop_m1
    }

    /// Ground-population sum ρ₁₁ + ρ₋₁₋₁.
    pub fn rho_sigma(&self) -> f64 {
        self.pop_p1 + self.pop_m1
    }

    pub fn max_norm(&self) -> f64 {
        [
            self.coh_e1.norm(),
            self.coh_em1.norm(),
            self.coh_raman.norm(),
            self.pop_p1.abs(),
            self.pop_m1.abs(),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coh_e1.is_finite()
            && self.coh_em1.is_finite()
            && self.coh_raman.is_finite()
            && self.pop_p1.is_finite()
            && self.pop_m1.is_finite()
    }

    /// Checks populations in [0, 1] and the Cauchy–Schwarz bounds on every
    /// coherence, each up to `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        let ee = self.pop_excited();
        self.pop_p1 >= -tol
            && self.pop_m1 >= -tol
            && ee >= -tol
            && self.pop_p1 + self.pop_m1 <= 1.0 + tol
            && self.coh_raman.norm_sqr() <= self.pop_p1 * self.pop_m1 + tol
            && self.coh_e1.norm_sqr() <= ee.max(0.0) * self.pop_p1 + tol
            && self.coh_em1.norm_sqr() <= ee.max(0.0) * self.pop_m1 + tol
    }
}

impl Add for BlochState {
    type Output = BlochState;
    fn add(self, o: BlochState) -> BlochState {
        BlochState {
            coh_e1: self.coh_e1 + o.coh_e1,
            coh_em1: self.coh_em1 + o.coh_em1,
            coh_raman: self.coh_raman + o.coh_raman,
            pop_p1: self.pop_p1 + o.pop_p1,
            pop_m1: self.pop_m1 + o.pop_m1,
        }
    }
}

impl Mul<f64> for BlochState {
    type Output = BlochState;
    fn mul(self, k: f64) -> BlochState {
        BlochState {
            coh_e1: self.coh_e1 * k,
            coh_em1: self.coh_em1 * k,
            coh_raman: self.coh_raman * k,
            pop_p1: self.pop_p1 * k,
            pop_m1: self.pop_m1 * k,
        }
    }
}

/// Options for the generalized right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsOptions {
    /// Detuning Δ_D of the carrier from the atomic resonance.
    pub detuning: f64,
    /// Evolve the Raman coherence; when false it is held at zero.
    pub raman: bool,
    /// Apply the Zeeman shifts ±Δz to the optical coherences.
    pub zeeman_on_optical: bool,
}

impl Default for RhsOptions {
    fn default() -> Self {
        RhsOptions {
            detuning: 0.0,
            raman: true,
            zeeman_on_optical: true,
        }
    }
}

/// Time derivative of the atomic state for total circular field components
/// (Ω⁺, Ω⁻) with resonant carrier.
pub fn bloch_rhs(
    state: &BlochState,
    omega_plus: Complex64,
    omega_minus: Complex64,
    medium: &AtomicMedium,
) -> BlochState {
    bloch_rhs_with(state, omega_plus, omega_minus, medium, RhsOptions::default())
}

pub fn bloch_rhs_with(
    state: &BlochState,
    omega_plus: Complex64,
    omega_minus: Complex64,
    medium: &AtomicMedium,
    opts: RhsOptions,
) -> BlochState {
    let i = Complex64::i();
    let (p1, m1) = (state.pop_p1, state.pop_m1);
    let raman = if opts.raman {
        state.coh_raman
    } else {
        Complex64::new(0.0, 0.0)
    };
    let zeeman = if opts.zeeman_on_optical {
        medium.delta_z
    } else {
        0.0
    };
    let e1 = state.coh_e1;
    let em1 = state.coh_em1;

    let d_e1 = -Complex64::new(medium.gamma_opt, -(opts.detuning + zeeman)) * e1
        - i * (1.0 - 2.0 * p1 - m1) * omega_minus
        + i * raman.conj() * omega_plus;
    let d_em1 = -Complex64::new(medium.gamma_opt, -(opts.detuning - zeeman)) * em1
        + i * raman * omega_minus
        - i * (1.0 - p1 - 2.0 * m1) * omega_plus;
    let d_raman = if opts.raman {
        -Complex64::new(medium.gamma_r, 2.0 * medium.delta_z) * raman
            + i * (em1 * omega_minus.conj() - e1.conj() * omega_plus)
    } else {
        Complex64::new(0.0, 0.0)
    };
    let feed = 0.5 * (medium.gamma0 + medium.gamma_t);
    let half = 0.5 * medium.gamma0;
    // −i(ρ*Ω − ρΩ*) = 2 Im(ρ* Ω)
    let pump_p1 = 2.0 * (e1.conj() * omega_minus).im;
    let pump_m1 = 2.0 * (em1.conj() * omega_plus).im;
    let d_p1 = -(medium.gamma_t + half) * p1 - half * m1 + pump_p1 + feed;
    let d_m1 = -(medium.gamma_t + half) * m1 - half * p1 + pump_m1 + feed;

    BlochState {
        coh_e1: d_e1,
        coh_em1: d_em1,
        coh_raman: d_raman,
        pop_p1: d_p1,
        pop_m1: d_m1,
    }
}

/// Optical coherences with ∂t = 0 for the given populations, Raman coherence
/// and fields: (ρ̃_{e1}, ρ̃_{e−1}).
pub fn quasi_static_coherences(
    state: &BlochState,
    omega_plus: Complex64,
    omega_minus: Complex64,
    medium: &AtomicMedium,
) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let (p1, m1) = (state.pop_p1, state.pop_m1);
    let raman = state.coh_raman;
    let e1 = (-i * (1.0 - 2.0 * p1 - m1) * omega_minus + i * raman.conj() * omega_plus)
        / Complex64::new(medium.gamma_opt, -medium.delta_z);
    let em1 = (i * raman * omega_minus - i * (1.0 - p1 - 2.0 * m1) * omega_plus)
        / Complex64::new(medium.gamma_opt, medium.delta_z);
    (e1, em1)
}

/// Classical fourth-order Runge–Kutta step with fields sampled at the start,
/// midpoint and end of the step.
pub fn rk4_step(
    state: &BlochState,
    fields: [(Complex64, Complex64); 3],
    dt: f64,
    medium: &AtomicMedium,
    opts: RhsOptions,
) -> BlochState {
    let f = |s: &BlochState, (p, m): (Complex64, Complex64)| bloch_rhs_with(s, p, m, medium, opts);
    let k1 = f(state, fields[0]);
    let k2 = f(&(*state + k1 * (0.5 * dt)), fields[1]);
    let k3 = f(&(*state + k2 * (0.5 * dt)), fields[1]);
    let k4 = f(&(*state + k3 * dt), fields[2]);
    *state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn equilibrium_is_fixed_point_without_fields() {
        let m = AtomicMedium::he_star();
        let d = bloch_rhs(&BlochState::equilibrium(), zero(), zero(), &m);
        assert!(d.max_norm() < 1e-15);
    }

    #[test]
    fn trace_rate_matches_transit_balance() {
        let m = AtomicMedium::he_star();
        let s = BlochState {
            coh_e1: Complex64::new(0.01, 0.02),
            coh_em1: Complex64::new(-0.01, 0.03),
            coh_raman: Complex64::new(0.05, -0.01),
            pop_p1: 0.4,
            pop_m1: 0.35,
        };
        let d = bloch_rhs(&s, Complex64::new(1.0, 0.5), Complex64::new(2.0, -0.3), &m);
        // dρee/dt from the excited-state balance: loss Γ0+γt, gain from pumping.
        let pump = 2.0 * (s.coh_e1.conj() * Complex64::new(2.0, -0.3)).im
            + 2.0 * (s.coh_em1.conj() * Complex64::new(1.0, 0.5)).im;
        let d_ee = -(m.gamma0 + m.gamma_t) * s.pop_excited() - pump;
        let d_trace = d.pop_p1 + d.pop_m1 + d_ee;
        let trace = 1.0;
        assert!((d_trace - m.gamma_t * (1.0 - trace)).abs() < 1e-12);
    }

    #[test]
    fn quasi_static_zeroes_coherence_derivative() {
        let m = AtomicMedium::he_star();
        let mut s = BlochState {
            coh_raman: Complex64::new(0.01, 0.02),
            pop_p1: 0.42,
            pop_m1: 0.4,
            ..Default::default()
        };
        let (p, mi) = (Complex64::new(3.0, 0.2), Complex64::new(2.5, -0.1));
        let (e1, em1) = quasi_static_coherences(&s, p, mi, &m);
        s.coh_e1 = e1;
        s.coh_em1 = em1;
        let d = bloch_rhs(&s, p, mi, &m);
        assert!(d.coh_e1.norm() < 1e-12 && d.coh_em1.norm() < 1e-12);
    }
}
