//! Signal-field quadratures in the (e∥, e⊥) basis.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Index of each quadrature inside the 4-vector S = (P⊥, P∥, Q⊥, Q∥).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    PPerp = 0,
    PPar = 1,
    QPerp = 2,
    QPar = 3,
}

impl Quadrature {
    pub const ALL: [Quadrature; 4] = [
        Quadrature::PPerp,
        Quadrature::PPar,
        Quadrature::QPerp,
        Quadrature::QPar,
    ];
}

/// Real quadratures of the signal Rabi frequency at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadratureVector {
    pub p_perp: f64,
    pub p_par: f64,
    pub q_perp: f64,
    pub q_par: f64,
}

impl QuadratureVector {
    pub fn new(p_perp: f64, p_par: f64, q_perp: f64, q_par: f64) -> Self {
        QuadratureVector {
            p_perp,
            p_par,
            q_perp,
            q_par,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.p_perp, self.p_par, self.q_perp, self.q_par]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        QuadratureVector::new(a[0], a[1], a[2], a[3])
    }

    pub fn get(&self, q: Quadrature) -> f64 {
        self.as_array()[q as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.as_array().iter().map(|x| x * x).sum()
    }

    pub fn dot(&self, other: &QuadratureVector) -> f64 {
        self.as_array()
            .iter()
            .zip(other.as_array())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Parallel and orthogonal complex components (Ω∥, Ω⊥).
    pub fn components(&self) -> (Complex64, Complex64) {
        (
            Complex64::new(self.p_par, self.q_par),
            Complex64::new(self.p_perp, self.q_perp),
        )
    }
}

/// Ω∥ = (Ω⁺+Ω⁻)/√2 and Ω⊥ = (Ω⁺−Ω⁻)/(i√2).
pub fn linear_components(omega_plus: Complex64, omega_minus: Complex64) -> (Complex64, Complex64) {
    let par = (omega_plus + omega_minus) * FRAC_1_SQRT_2;
    let perp = (omega_plus - omega_minus) * Complex64::new(0.0, -FRAC_1_SQRT_2);
    (par, perp)
}

/// Inverse of [`linear_components`].
pub fn circular_components(par: Complex64, perp: Complex64) -> (Complex64, Complex64) {
    let i_perp = Complex64::i() * perp;
    ((par + i_perp) * FRAC_1_SQRT_2, (par - i_perp) * FRAC_1_SQRT_2)
}

pub fn quadratures_from_fields(omega_plus: Complex64, omega_minus: Complex64) -> QuadratureVector {
    let (par, perp) = linear_components(omega_plus, omega_minus);
    QuadratureVector {
        p_perp: perp.re,
        p_par: par.re,
        q_perp: perp.im,
        q_par: par.im,
    }
}

pub fn fields_from_quadratures(q: &QuadratureVector) -> (Complex64, Complex64) {
    let (par, perp) = q.components();
    circular_components(par, perp)
}

/// Frequency-domain quadratures from the spectrum of one linear component
/// evaluated at +ω and −ω: returns (P(ω), Q(ω)).
pub fn spectral_quadratures(at_omega: Complex64, at_minus_omega: Complex64) -> (Complex64, Complex64) {
    let conj = at_minus_omega.conj();
    let p = (at_omega + conj) * 0.5;
    let q = (at_omega - conj) / Complex64::new(0.0, 2.0);
    (p, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_4, SQRT_2};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn linear_polarization_along_drive() {
        let q = quadratures_from_fields(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert!((q.p_par - 1.0).abs() < 1e-15);
        assert!(q.p_perp.abs() < 1e-15 && q.q_perp.abs() < 1e-15 && q.q_par.abs() < 1e-15);
    }

    #[test]
    fn pure_q_perp() {
        // Ω⊥ = i requires Ω⁺ = −1/√2, Ω⁻ = 1/√2.
        let q = quadratures_from_fields(c(-FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert!((q.q_perp - 1.0).abs() < 1e-15);
        assert!(q.p_perp.abs() < 1e-15 && q.p_par.abs() < 1e-15 && q.q_par.abs() < 1e-15);
        // (i, −i)/√2 gives a real Ω⊥, i.e. a pure P⊥.
        let q = quadratures_from_fields(c(0.0, FRAC_1_SQRT_2), c(0.0, -FRAC_1_SQRT_2));
        assert!((q.p_perp - 1.0).abs() < 1e-15);
        assert!(q.q_perp.abs() < 1e-15 && q.p_par.abs() < 1e-15 && q.q_par.abs() < 1e-15);
    }

    #[test]
    fn quarter_angle_polarization() {
        let plus = Complex64::from_polar(1.0, -FRAC_PI_4) / SQRT_2;
        let minus = Complex64::from_polar(1.0, FRAC_PI_4) / SQRT_2;
        let q = quadratures_from_fields(plus, minus);
        // Ω∥ = cos(π/4), Ω⊥ = −sin(π/4)
        assert!((q.p_par - FRAC_PI_4.cos()).abs() < 1e-15);
        assert!((q.p_perp + FRAC_PI_4.sin()).abs() < 1e-15);
        assert!(q.q_par.abs() < 1e-15 && q.q_perp.abs() < 1e-15);
        let (p2, m2) = fields_from_quadratures(&q);
        assert!((p2 - plus).norm() < 1e-15 && (m2 - minus).norm() < 1e-15);
    }

    #[test]
    fn spectral_quadratures_of_real_signal() {
        // Ω∥(t) = a cos(ωt) real → P(ω) = a/2, Q(ω) = 0.
        let (p, q) = spectral_quadratures(c(0.5, 0.0), c(0.5, 0.0));
        assert!((p - c(0.5, 0.0)).norm() < 1e-15);
        assert!(q.norm() < 1e-15);
        // Ω∥(t) = i a cos(ωt) → pure Q.
        let (p, q) = spectral_quadratures(c(0.0, 0.5), c(0.0, 0.5));
        assert!(p.norm() < 1e-15);
        assert!((q - c(0.5, 0.0)).norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn round_trip_and_norm(a in -10.0..10.0f64, b in -10.0..10.0f64, x in -10.0..10.0f64, y in -10.0..10.0f64) {
            let plus = c(a, b);
            let minus = c(x, y);
            let q = quadratures_from_fields(plus, minus);
            let (p2, m2) = fields_from_quadratures(&q);
            prop_assert!((p2 - plus).norm() < 1e-12);
            prop_assert!((m2 - minus).norm() < 1e-12);
            let circ = plus.norm_sqr() + minus.norm_sqr();
            prop_assert!((q.norm_sqr() - circ).abs() < 1e-10 * (1.0 + circ));
        }
    }
}
