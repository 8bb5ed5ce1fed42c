//! Drive-only (zeroth-order) steady state of the Λ system and drive depletion
//! along the cell.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{rk4_step, BlochState, RhsOptions};
use crate::error::NumericError;
use crate::medium::AtomicMedium;

/// Saturation parameter s = 3|Ω_D|²/((γt+Γ0)Γ).
pub fn saturation(medium: &AtomicMedium, omega_d: f64) -> f64 {
    3.0 * omega_d * omega_d / ((medium.gamma_t + medium.gamma0) * medium.gamma_opt)
}

/// Drive Rabi frequency |Ω_D| producing saturation `s`.
pub fn drive_for_saturation(medium: &AtomicMedium, s: f64) -> f64 {
    (s * (medium.gamma_t + medium.gamma0) * medium.gamma_opt / 3.0).sqrt()
}

/// Common steady-state values of both arms under resonant linear driving.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub s: f64,
    /// ρ̃_{e±1}, identical on both arms.
    pub coh_e: Complex64,
    /// ρ_{±1±1}, identical on both arms.
    pub pop: f64,
    /// False when the Zeeman splitting is too small to neglect the Raman
    /// coherence: Δz ≤ 10(γR + |Ω_D|²/Γ).
    pub raman_negligible: bool,
}

impl SaturationPoint {
    pub fn as_bloch_state(&self) -> BlochState {
        BlochState {
            coh_e1: self.coh_e,
            coh_em1: self.coh_e,
            coh_raman: Complex64::new(0.0, 0.0),
            pop_p1: self.pop,
            pop_m1: self.pop,
        }
    }
}

pub fn raman_negligible(medium: &AtomicMedium, omega_d: f64) -> bool {
    medium.delta_z > 10.0 * (medium.gamma_r + omega_d * omega_d / medium.gamma_opt)
}

/// Closed-form steady state: ρ̃_{e±1} = iΩ_D⁻/(2Γ(1+s)), ρ_{±1±1} = (1/2 + s/3)/(1+s).
pub fn steady_state_analytic(medium: &AtomicMedium, omega_d: f64) -> SaturationPoint {
    let s = saturation(medium, omega_d);
    let omega_minus = omega_d * std::f64::consts::FRAC_1_SQRT_2;
    let raman_ok = raman_negligible(medium, omega_d);
    if !raman_ok {
        log::warn!(
            "Zeeman splitting {} too small for Raman-free steady state at drive {}",
            medium.delta_z,
            omega_d
        );
    }
    SaturationPoint {
        s,
        coh_e: Complex64::new(0.0, omega_minus / (2.0 * medium.gamma_opt * (1.0 + s))),
        pop: (0.5 + s / 3.0) / (1.0 + s),
        raman_negligible: raman_ok,
    }
}

/// Which terms the time-integration oracle keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleModel {
    /// All five variables with Zeeman, Raman decay and drive detuning terms.
    Full,
    /// The approximations behind the closed form: Raman coherence held at
    /// zero and Zeeman shifts dropped from the optical coherences.
    Reduced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub model: OracleModel,
    pub detuning: f64,
    pub t_max: f64,
    pub tol: f64,
}

impl OracleOptions {
    pub fn full(t_max: f64, tol: f64) -> Self {
        OracleOptions {
            model: OracleModel::Full,
            detuning: 0.0,
            t_max,
            tol,
        }
    }

    pub fn reduced(t_max: f64, tol: f64) -> Self {
        OracleOptions {
            model: OracleModel::Reduced,
            ..OracleOptions::full(t_max, tol)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub state: BlochState,
    pub t_final: f64,
    pub residual: f64,
}

impl OracleResult {
    /// Arm-averaged view comparable with [`steady_state_analytic`].
    pub fn saturation_point(&self, medium: &AtomicMedium, omega_d: f64) -> SaturationPoint {
        SaturationPoint {
            s: saturation(medium, omega_d),
            coh_e: (self.state.coh_e1 + self.state.coh_em1) * 0.5,
            pop: 0.5 * self.state.rho_sigma(),
            raman_negligible: self.state.coh_raman.norm() < 1e-6,
        }
    }
}

/// Integrates the zeroth-order OBE from ground-state equipartition with
/// fixed-step RK4 (step ≤ 0.1/Γ) until the max-norm of the derivative falls
/// below `tol`.
pub fn steady_state_oracle(
    medium: &AtomicMedium,
    omega_d: f64,
    opts: OracleOptions,
) -> Result<OracleResult, NumericError> {
    let rhs_opts = RhsOptions {
        detuning: opts.detuning,
        raman: opts.model == OracleModel::Full,
        zeeman_on_optical: opts.model == OracleModel::Full,
    };
    let fastest = medium
        .gamma_opt
        .max(omega_d)
        .max(2.0 * medium.delta_z)
        .max(opts.detuning.abs());
    let dt = 0.1 / fastest;
    let half = Complex64::new(omega_d * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let fields = [(half, half); 3];
    let mut state = BlochState::equilibrium();
    let mut t = 0.0;
    let check_every = ((1.0 / medium.gamma_opt) / dt).ceil().max(1.0) as usize * 10;
    let mut step = 0usize;
    let mut residual = f64::INFINITY;
    while t < opts.t_max {
        state = rk4_step(&state, fields, dt, medium, rhs_opts);
        t += dt;
        step += 1;
        if step % check_every == 0 {
            let d = crate::bloch::bloch_rhs_with(&state, half, half, medium, rhs_opts);
            residual = d.max_norm();
            if residual < opts.tol {
                return Ok(OracleResult {
                    state,
                    t_final: t,
                    residual,
                });
            }
        }
    }
    Err(NumericError::NonConvergence {
        t_max: opts.t_max,
        tol: opts.tol,
        residual,
    })
}

fn depletion_rate(medium: &AtomicMedium, s: f64) -> f64 {
    -(medium.eta / medium.gamma_opt) * s / (1.0 + s)
}

/// Saturation profile s(z) on `n_z` uniform points over [0, L] from
/// ∂z s = −(η/Γ) s/(1+s), integrated with classical RK4.
pub fn drive_depletion(medium: &AtomicMedium, s_in: f64, n_z: usize) -> Vec<f64> {
    assert!(n_z >= 2, "need at least two grid points");
    assert!(s_in >= 0.0, "saturation must be non-negative");
    let h = medium.length / (n_z - 1) as f64;
    let mut out = Vec::with_capacity(n_z);
    let mut s = s_in;
    out.push(s);
    for _ in 1..n_z {
        let k1 = depletion_rate(medium, s);
        let k2 = depletion_rate(medium, s + 0.5 * h * k1);
        let k3 = depletion_rate(medium, s + 0.5 * h * k2);
        let k4 = depletion_rate(medium, s + h * k3);
        s = (s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)).max(0.0);
        out.push(s);
    }
    out
}

/// Output saturation s(L) solving ln s + s = ln s_in + s_in − ηL/Γ by Newton
/// iteration on the separable integral.
pub fn depleted_saturation_exact(medium: &AtomicMedium, s_in: f64, z: f64) -> f64 {
    if s_in == 0.0 {
        return 0.0;
    }
    let target = s_in.ln() + s_in - medium.eta * z / medium.gamma_opt;
    // solve u + e^u = target for u = ln s
    let mut u = target.min(s_in.ln());
    for _ in 0..100 {
        let f = u + u.exp() - target;
        let step = f / (1.0 + u.exp());
        u -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    u.exp()
}

/// Input saturation that depletes to `s_out` at the cell exit.
pub fn input_for_output_saturation(medium: &AtomicMedium, s_out: f64) -> f64 {
    let target = s_out.ln() + s_out + medium.eta * medium.length / medium.gamma_opt;
    let mut u = target.min(50.0).max(s_out.ln());
    for _ in 0..200 {
        let f = u + u.exp() - target;
        let step = f / (1.0 + u.exp());
        u -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    u.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_examples() {
        let m = AtomicMedium::he_star();
        assert_eq!(saturation(&m, 0.0), 0.0);
        let s = saturation(&m, 16.835f64.sqrt());
        assert!((s - 0.1).abs() < 1e-4, "{s}");
        assert!(saturation(&m, 3.0) > saturation(&m, 2.0));
        let w = drive_for_saturation(&m, 0.37);
        assert!((saturation(&m, w) - 0.37).abs() < 1e-14);
    }

    #[test]
    fn analytic_limits() {
        let m = AtomicMedium::he_star();
        let p0 = steady_state_analytic(&m, 0.0);
        assert_eq!(p0.pop, 0.5);
        let w = drive_for_saturation(&m, 1.0);
        let p1 = steady_state_analytic(&m, w);
        assert!((p1.pop - 5.0 / 12.0).abs() < 1e-14);
        let expected = w * std::f64::consts::FRAC_1_SQRT_2 / (2.0 * m.gamma_opt * 2.0);
        assert!((p1.coh_e.im - expected).abs() < 1e-15 && p1.coh_e.re == 0.0);
        let big = steady_state_analytic(&m, drive_for_saturation(&m, 1e9));
        assert!((big.pop - 1.0 / 3.0).abs() < 1e-8);
        for s in [0.0, 0.1, 1.0, 10.0, 1e4] {
            let p = steady_state_analytic(&m, drive_for_saturation(&m, s));
            assert!(p.pop >= 1.0 / 3.0 - 1e-15 && p.pop <= 0.5);
            let ee = 1.0 - 2.0 * p.pop;
            assert!((2.0 * p.pop + ee - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn oracle_zero_drive() {
        let m = AtomicMedium::he_star();
        let r = steady_state_oracle(&m, 0.0, OracleOptions::full(10.0, 1e-13)).unwrap();
        assert_eq!(r.state, BlochState::equilibrium());
    }

    #[test]
    fn oracle_nonconvergence_reported() {
        let m = AtomicMedium::he_star();
        let w = drive_for_saturation(&m, 1.0);
        let r = steady_state_oracle(&m, w, OracleOptions::full(0.01, 1e-14));
        assert!(matches!(r, Err(NumericError::NonConvergence { .. })));
    }

    #[test]
    fn oracle_full_model_close_to_analytic_at_default_zeeman() {
        let m = AtomicMedium::he_star();
        let w = drive_for_saturation(&m, 0.1);
        let r = steady_state_oracle(&m, w, OracleOptions::full(4000.0, 1e-11)).unwrap();
        let a = steady_state_analytic(&m, w);
        assert!(a.raman_negligible);
        assert!(r.state.is_physical(1e-12));
        assert!((r.state.pop_p1 - a.pop).abs() / a.pop < 1e-3);
        assert!((r.state.coh_e1 - a.coh_e).norm() / a.coh_e.norm() < 0.02);
    }

    #[test]
    fn oracle_departs_from_analytic_without_zeeman() {
        let m = AtomicMedium {
            delta_z: 0.0,
            gamma_r: 1e-3,
            ..AtomicMedium::he_star()
        };
        let w = drive_for_saturation(&m, 0.1);
        let a = steady_state_analytic(&m, w);
        assert!(!a.raman_negligible);
        let r = steady_state_oracle(&m, w, OracleOptions::full(5000.0, 1e-11)).unwrap();
        assert!(r.state.coh_raman.norm() > 0.1);
        assert!((r.state.pop_p1 - a.pop).abs() / a.pop > 0.01);
    }

    #[test]
    fn depletion_examples() {
        let none = AtomicMedium {
            eta: 0.0,
            ..AtomicMedium::he_star()
        };
        assert!(drive_depletion(&none, 0.3, 11).iter().all(|&s| s == 0.3));

        let m = AtomicMedium::he_star();
        let small = drive_depletion(&m, 1e-6, 101);
        let depth = m.eta * m.length / m.gamma_opt;
        assert!((small[100] / (1e-6 * (-depth).exp()) - 1.0).abs() < 1e-5);

        let half = m.with_optical_depth(0.5);
        let prof = drive_depletion(&half, 1.0, 65);
        let s_l = prof[64];
        // separable integral: ln s + s = 1 − 0.5
        assert!((s_l.ln() + s_l - 0.5).abs() < 1e-9);
        assert!((s_l - depleted_saturation_exact(&half, 1.0, 1.0)).abs() < 1e-9);
        assert!(prof.windows(2).all(|w| w[1] <= w[0] && w[1] >= 0.0));
    }

    #[test]
    fn depletion_step_halving() {
        let m = AtomicMedium::he_star();
        let exact = depleted_saturation_exact(&m, 0.5, 1.0);
        let e1 = (drive_depletion(&m, 0.5, 9)[8] - exact).abs();
        let e2 = (drive_depletion(&m, 0.5, 17)[16] - exact).abs();
        assert!(e2 < e1 / 10.0, "{e1} {e2}");
    }

    #[test]
    fn input_for_output_inverts_depletion() {
        let m = AtomicMedium::he_star();
        let s_in = input_for_output_saturation(&m, 0.03);
        assert!((depleted_saturation_exact(&m, s_in, 1.0) - 0.03).abs() < 1e-12);
    }
}
