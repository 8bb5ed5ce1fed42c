//! First-order response of the driven medium to a weak signal and the
//! propagation of the four signal quadratures.
//!
//! Frequency-domain quantities use the convention ∂t → +iω, so a quadrature
//! travelling at group velocity v with gain γ obeys ∂z S(ω) = (γ − iω/v) S(ω).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::NumericError;
use crate::medium::{cpo_linewidth, AtomicMedium};
use crate::quadrature::QuadratureVector;
use crate::steady_state::drive_for_saturation;

/// Which closed forms to use for the coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseModel {
    /// Forms consistent with the exact Fourier-domain response, retaining
    /// the γt and Γ0 corrections.
    Full,
    /// The γt ≪ Γ0 ≪ Γ forms used for plotting.
    Simplified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpoCoefficients {
    pub beta_delta: f64,
    pub beta_sigma: f64,
    /// Saturated absorption coefficient η/(2Γ(1+s)).
    pub g: f64,
}

pub fn coefficients(medium: &AtomicMedium, s: f64, model: ResponseModel) -> CpoCoefficients {
    let threshold = match model {
        ResponseModel::Full => 3.0 * medium.gamma_t / (medium.gamma0 + medium.gamma_t),
        ResponseModel::Simplified => 3.0 * medium.gamma_t / medium.gamma0,
    };
    let beta_delta = if s == 0.0 { 0.0 } else { s / (threshold + s) };
    CpoCoefficients {
        beta_delta,
        beta_sigma: s / (1.0 + s),
        g: medium.eta / (2.0 * medium.gamma_opt * (1.0 + s)),
    }
}

/// Saturation at which the Q⊥ gain changes sign (βΔ = 1/2).
pub fn gain_threshold(medium: &AtomicMedium, model: ResponseModel) -> f64 {
    match model {
        ResponseModel::Full => 3.0 * medium.gamma_t / (medium.gamma0 + medium.gamma_t),
        ResponseModel::Simplified => 3.0 * medium.gamma_t / medium.gamma0,
    }
}

/// Susceptibilities (χΔ, χΣ) with ρΔ⁽¹⁾ = χΔ·Q⊥ and ρΣ⁽¹⁾ = χΣ·P∥.
pub type ResponsePair = (Complex64, Complex64);

/// Exact Fourier-domain population response of the first-order OBE.
pub fn exact_response(medium: &AtomicMedium, s: f64, omega: f64) -> ResponsePair {
    let drive = drive_for_saturation(medium, s);
    let i = Complex64::i();
    let (gamma, gt, g0) = (medium.gamma_opt, medium.gamma_t, medium.gamma0);
    let numerator = Complex64::new(2.0, omega / gamma);
    let optical = Complex64::new(1.0, omega / gamma);

    let den_delta = (1.0 + i * omega / gt) * optical + drive * drive / (gt * gamma);
    let chi_delta = -numerator / den_delta * (drive / ((1.0 + s) * gt * gamma));

    let den_sigma = optical * (1.0 + i * omega / (gt + g0)) + s;
    let chi_sigma = -numerator / den_sigma * (drive / ((1.0 + s) * (gt + g0) * gamma));
    (chi_delta, chi_sigma)
}

/// First-order (in ω) expansion of the population response.
pub fn adiabatic_response(
    medium: &AtomicMedium,
    s: f64,
    omega: f64,
    model: ResponseModel,
) -> ResponsePair {
    let drive = drive_for_saturation(medium, s);
    if drive == 0.0 {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let c = coefficients(medium, s, model);
    let gamma = medium.gamma_opt;
    let w2 = drive * drive;
    let (lag_delta, lag_sigma) = match model {
        ResponseModel::Full => (
            1.0 / (2.0 * gamma) - c.beta_delta * (gamma + medium.gamma_t) / w2,
            1.0 / (2.0 * gamma)
                - c.beta_sigma * (gamma + medium.gamma0 + medium.gamma_t) / (3.0 * w2),
        ),
        ResponseModel::Simplified => (
            1.0 / (2.0 * gamma) - c.beta_delta * gamma / w2,
            1.0 / (2.0 * gamma) - c.beta_sigma * gamma / (3.0 * w2),
        ),
    };
    let chi_delta = -2.0 * c.beta_delta / ((1.0 + s) * drive) * Complex64::new(1.0, omega * lag_delta);
    let chi_sigma =
        -2.0 * c.beta_sigma / (3.0 * (1.0 + s) * drive) * Complex64::new(1.0, omega * lag_sigma);
    (chi_delta, chi_sigma)
}

/// Exact (all orders in ω) propagation generators of (P⊥, P∥, Q⊥, Q∥) in the
/// lab frame.
pub fn exact_transfer(medium: &AtomicMedium, s: f64, omega: f64) -> [Complex64; 4] {
    let drive = drive_for_saturation(medium, s);
    let (chi_delta, chi_sigma) = exact_response(medium, s, omega);
    let optical = Complex64::new(medium.gamma_opt, omega);
    let prefactor = -medium.eta / (2.0 * optical);
    let vacuum = Complex64::new(0.0, -omega / medium.light_speed);
    let bare = 1.0 / (1.0 + s);
    let uncoupled = prefactor * bare + vacuum;
    [
        uncoupled,
        prefactor * (bare + 3.0 * drive * chi_sigma) + vacuum,
        prefactor * (bare + drive * chi_delta) + vacuum,
        uncoupled,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupVelocities {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

/// Inverse group velocities (1/v1, 1/v2, 1/v3).
pub fn inverse_group_velocities(medium: &AtomicMedium, s: f64, model: ResponseModel) -> [f64; 3] {
    let c = coefficients(medium, s, model);
    let (gamma, gt, g0) = (medium.gamma_opt, medium.gamma_t, medium.gamma0);
    let inv_c = 1.0 / medium.light_speed;
    let k = medium.eta / (2.0 * gamma * gamma * (1.0 + s));
    let threshold = gain_threshold(medium, model);
    match model {
        ResponseModel::Full => {
            // 2β²Γ(Γ+γt)/|Ω|² and 2β²Γ(Γ+Γ0+γt)/3|Ω|², written to stay finite at s = 0
            let delta_term =
                6.0 * s * (gamma + gt) / ((s + threshold).powi(2) * (gt + g0));
            let sigma_term = 2.0 * s * (gamma + g0 + gt) / ((1.0 + s).powi(2) * (gt + g0));
            [
                inv_c - k,
                inv_c + k * (sigma_term + c.beta_sigma - 1.0),
                inv_c + k * (delta_term + c.beta_delta - 1.0),
            ]
        }
        ResponseModel::Simplified => {
            let delta_term = 6.0 * s * gamma / ((s + threshold).powi(2) * g0);
            let sigma_term = 2.0 * s * gamma / ((1.0 + s).powi(2) * g0);
            [
                inv_c - k,
                inv_c + k * (sigma_term - c.beta_sigma - 1.0),
                inv_c + k * (delta_term - c.beta_delta - 1.0),
            ]
        }
    }
}

pub fn group_velocities(medium: &AtomicMedium, s: f64, model: ResponseModel) -> GroupVelocities {
    let [a, b, c] = inverse_group_velocities(medium, s, model);
    GroupVelocities {
        v1: 1.0 / a,
        v2: 1.0 / b,
        v3: 1.0 / c,
    }
}

/// Reduced slow-light velocity s(1+s)Γ0Γ/3η of the Q⊥ mode.
pub fn v3_reduced(medium: &AtomicMedium, s: f64) -> f64 {
    s * (1.0 + s) * medium.gamma0 * medium.gamma_opt / (3.0 * medium.eta)
}

/// Diagonal propagation generator at one (s, ω), ordered (P⊥, P∥, Q⊥, Q∥).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub diag: [Complex64; 4],
}

impl TransferMatrix {
    /// Real parts: local gain per unit length of each quadrature.
    pub fn gains(&self) -> [f64; 4] {
        self.diag.map(|d| d.re)
    }

    /// Full 4×4 form; off-diagonal entries are zero.
    pub fn to_dense(&self) -> [[Complex64; 4]; 4] {
        let mut m = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (k, d) in self.diag.iter().enumerate() {
            m[k][k] = *d;
        }
        m
    }
}

pub fn transfer_matrix(medium: &AtomicMedium, s: f64, omega: f64, model: ResponseModel) -> TransferMatrix {
    let c = coefficients(medium, s, model);
    let inv_v = inverse_group_velocities(medium, s, model);
    let entry = |gain: f64, inv: f64| Complex64::new(gain, -omega * inv);
    TransferMatrix {
        diag: [
            entry(-c.g, inv_v[0]),
            entry((2.0 * c.beta_sigma - 1.0) * c.g, inv_v[1]),
            entry((2.0 * c.beta_delta - 1.0) * c.g, inv_v[2]),
            entry(-c.g, inv_v[0]),
        ],
    }
}

/// Spectrum of the four quadratures on a uniform time grid (DFT bins in
/// rustfft order).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureSpectrum {
    pub dt: f64,
    pub bins: Vec<[Complex64; 4]>,
}

impl QuadratureSpectrum {
    pub fn from_traces(traces: &[QuadratureVector], dt: f64) -> Self {
        let n = traces.len();
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(n);
        let mut bins = vec![[Complex64::new(0.0, 0.0); 4]; n];
        for q in 0..4 {
            let mut buf: Vec<Complex64> = traces
                .iter()
                .map(|v| Complex64::new(v.as_array()[q], 0.0))
                .collect();
            fft.process(&mut buf);
            for (b, x) in bins.iter_mut().zip(buf) {
                b[q] = x;
            }
        }
        QuadratureSpectrum { dt, bins }
    }

    pub fn to_traces(&self) -> Vec<QuadratureVector> {
        let n = self.bins.len();
        let mut planner = FftPlanner::<f64>::new();
        let ifft = planner.plan_fft_inverse(n);
        let mut out = vec![[0.0; 4]; n];
        for q in 0..4 {
            let mut buf: Vec<Complex64> = self.bins.iter().map(|b| b[q]).collect();
            ifft.process(&mut buf);
            for (o, x) in out.iter_mut().zip(buf) {
                o[q] = x.re / n as f64;
            }
        }
        out.into_iter().map(QuadratureVector::from_array).collect()
    }

    /// Angular frequency of bin `k`.
    pub fn omega(&self, k: usize) -> f64 {
        let n = self.bins.len();
        let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        2.0 * PI * kk / (n as f64 * self.dt)
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Fraction of the total power in the top 10% of the band.
    pub fn near_nyquist_fraction(&self) -> f64 {
        let cutoff = 0.9 * self.nyquist();
        let mut total = 0.0;
        let mut high = 0.0;
        for (k, b) in self.bins.iter().enumerate() {
            let p: f64 = b.iter().map(|x| x.norm_sqr()).sum();
            total += p;
            if self.omega(k).abs() >= cutoff {
                high += p;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            high / total
        }
    }
}

/// Which propagation generator to integrate along z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferKind {
    Adiabatic(ResponseModel),
    Exact,
}

/// Reference frame of the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Lab,
    /// Local time t − z/c.
    Retarded,
}

fn generator(medium: &AtomicMedium, s: f64, omega: f64, kind: TransferKind, frame: Frame) -> [Complex64; 4] {
    let mut d = match kind {
        TransferKind::Adiabatic(model) => transfer_matrix(medium, s, omega, model).diag,
        TransferKind::Exact => exact_transfer(medium, s, omega),
    };
    if frame == Frame::Retarded {
        let shift = Complex64::new(0.0, omega / medium.light_speed);
        for x in d.iter_mut() {
            *x += shift;
        }
    }
    d
}

/// ∫₀^{z_span} T(s(z), ω) dz by the trapezoid rule on the uniform grid of
/// `s_profile`.
pub fn integrated_generator(
    medium: &AtomicMedium,
    s_profile: &[f64],
    z_span: f64,
    omega: f64,
    kind: TransferKind,
    frame: Frame,
) -> [Complex64; 4] {
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    if s_profile.len() < 2 || z_span == 0.0 {
        return acc;
    }
    let h = z_span / (s_profile.len() - 1) as f64;
    let last = s_profile.len() - 1;
    for (j, &s) in s_profile.iter().enumerate() {
        let w = if j == 0 || j == last { 0.5 * h } else { h };
        let t = generator(medium, s, omega, kind, frame);
        for q in 0..4 {
            acc[q] += t[q] * w;
        }
    }
    acc
}

/// Propagates an input quadrature spectrum through a cell of length `z_span`
/// with saturation profile `s_profile` (uniform z grid).
pub fn propagate_linear(
    medium: &AtomicMedium,
    s_profile: &[f64],
    z_span: f64,
    input: &QuadratureSpectrum,
    kind: TransferKind,
    frame: Frame,
) -> Result<QuadratureSpectrum, NumericError> {
    let fraction = input.near_nyquist_fraction();
    if fraction > 1e-6 {
        return Err(NumericError::Aliasing { fraction });
    }
    let n = input.bins.len();
    let bins = input
        .bins
        .par_iter()
        .enumerate()
        .map(|(k, b)| {
            let omega = input.omega(k);
            let mut integral = integrated_generator(medium, s_profile, z_span, omega, kind, frame);
            if n % 2 == 0 && k == n / 2 {
                // keep the Nyquist bin real-valued so the output stays real
                for x in integral.iter_mut() {
                    x.im = 0.0;
                }
            }
            let mut out = *b;
            for q in 0..4 {
                out[q] = b[q] * integral[q].exp();
            }
            out
        })
        .collect();
    Ok(QuadratureSpectrum { dt: input.dt, bins })
}

/// One row of the group-velocity / gain scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub s: f64,
    pub v1_over_c: f64,
    pub v2_over_c: f64,
    pub v3_over_c: f64,
    pub gain_pperp: f64,
    pub gain_ppar: f64,
    pub gain_qperp: f64,
    pub beta_delta: f64,
    pub beta_sigma: f64,
    /// The v1 denominator vanishes here (|c/v1| < 1e−6).
    pub singular: bool,
}

impl DispersionRow {
    /// Transmission exp(gain·L) over the cell for (P⊥, P∥, Q⊥).
    pub fn transmission(&self, length: f64) -> [f64; 3] {
        [
            (self.gain_pperp * length).exp(),
            (self.gain_ppar * length).exp(),
            (self.gain_qperp * length).exp(),
        ]
    }
}

pub fn dispersion_scan(medium: &AtomicMedium, s_values: &[f64], model: ResponseModel) -> Vec<DispersionRow> {
    s_values
        .iter()
        .map(|&s| {
            let c = coefficients(medium, s, model);
            let inv = inverse_group_velocities(medium, s, model);
            let c_over_v1 = inv[0] * medium.light_speed;
            DispersionRow {
                s,
                v1_over_c: 1.0 / c_over_v1,
                v2_over_c: 1.0 / (inv[1] * medium.light_speed),
                v3_over_c: 1.0 / (inv[2] * medium.light_speed),
                gain_pperp: -c.g,
                gain_ppar: (2.0 * c.beta_sigma - 1.0) * c.g,
                gain_qperp: (2.0 * c.beta_delta - 1.0) * c.g,
                beta_delta: c.beta_delta,
                beta_sigma: c.beta_sigma,
                singular: c_over_v1.abs() < 1e-6,
            }
        })
        .collect()
}

pub const DISPERSION_HEADER: &str =
    "s,v1_over_c,v2_over_c,v3_over_c,gain_pperp,gain_ppar,gain_qperp,beta_delta,beta_sigma";

pub fn dispersion_csv(rows: &[DispersionRow]) -> String {
    let mut out = String::from(DISPERSION_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.s,
            r.v1_over_c,
            r.v2_over_c,
            r.v3_over_c,
            r.gain_pperp,
            r.gain_ppar,
            r.gain_qperp,
            r.beta_delta,
            r.beta_sigma
        ));
    }
    out
}

/// Exact and adiabatic susceptibilities at one (s, ω) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub s: f64,
    pub omega_over_dcpo: f64,
    pub exact: ResponsePair,
    pub adiabatic: ResponsePair,
}

impl ResponseRow {
    /// Relative deviation |adiabatic − exact|/|exact| for (χΔ, χΣ).
    pub fn relative_error(&self) -> (f64, f64) {
        let rel = |a: Complex64, e: Complex64| (a - e).norm() / e.norm();
        (rel(self.adiabatic.0, self.exact.0), rel(self.adiabatic.1, self.exact.1))
    }
}

/// Response comparison on a grid of frequencies given in units of the local
/// CPO linewidth.
pub fn response_scan(
    medium: &AtomicMedium,
    s_values: &[f64],
    omegas_over_dcpo: &[f64],
    model: ResponseModel,
) -> Vec<ResponseRow> {
    let mut rows = Vec::with_capacity(s_values.len() * omegas_over_dcpo.len());
    for &s in s_values {
        let dcpo = cpo_linewidth(medium, drive_for_saturation(medium, s));
        for &x in omegas_over_dcpo {
            let omega = x * dcpo;
            rows.push(ResponseRow {
                s,
                omega_over_dcpo: x,
                exact: exact_response(medium, s, omega),
                adiabatic: adiabatic_response(medium, s, omega, model),
            });
        }
    }
    rows
}

pub const RESPONSE_HEADER: &str = "s,omega_over_dcpo,exact_delta_re,exact_delta_im,exact_sigma_re,exact_sigma_im,\
adiabatic_delta_re,adiabatic_delta_im,adiabatic_sigma_re,adiabatic_sigma_im,rel_error_delta,rel_error_sigma";

pub fn response_csv(rows: &[ResponseRow]) -> String {
    let mut out = String::from(RESPONSE_HEADER);
    out.push('\n');
    for r in rows {
        let (ed, es) = r.relative_error();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.s,
            r.omega_over_dcpo,
            r.exact.0.re,
            r.exact.0.im,
            r.exact.1.re,
            r.exact.1.im,
            r.adiabatic.0.re,
            r.adiabatic.0.im,
            r.adiabatic.1.re,
            r.adiabatic.1.im,
            ed,
            es
        ));
    }
    out
}

/// `n` log-spaced values over [lo, hi].
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Location and value of the minimum of v3(s) inside [lo, hi] (golden
/// section on ln s).
pub fn v3_minimum(medium: &AtomicMedium, model: ResponseModel, lo: f64, hi: f64) -> (f64, f64) {
    let v3 = |ln_s: f64| 1.0 / inverse_group_velocities(medium, ln_s.exp(), model)[2];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (v3(x1), v3(x2));
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = v3(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = v3(x2);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x.exp(), v3(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureVector;
    use crate::steady_state::drive_depletion;

    fn he() -> AtomicMedium {
        AtomicMedium::he_star()
    }

    #[test]
    fn coefficient_examples() {
        let m = he();
        let c0 = coefficients(&m, 0.0, ResponseModel::Full);
        assert_eq!((c0.beta_delta, c0.beta_sigma), (0.0, 0.0));
        assert!((c0.g - m.eta / (2.0 * m.gamma_opt)).abs() < 1e-12);

        let simple = coefficients(&m, 0.1, ResponseModel::Simplified);
        assert!((simple.beta_delta - 0.1 / 0.13).abs() < 1e-12);
        assert!((simple.beta_sigma - 0.1 / 1.1).abs() < 1e-12);
        let full = coefficients(&m, 0.1, ResponseModel::Full);
        assert!((full.beta_delta - 0.1 / (0.1 + 0.03 / 1.01)).abs() < 1e-12);

        let big = coefficients(&m, 1e12, ResponseModel::Full);
        assert!((big.beta_delta - 1.0).abs() < 1e-10 && (big.beta_sigma - 1.0).abs() < 1e-10);
        assert!(big.g < 1e-9);
        for s in [0.0, 1e-3, 0.1, 1.0, 1e3] {
            let c = coefficients(&m, s, ResponseModel::Full);
            assert!((0.0..=1.0).contains(&c.beta_delta) && (0.0..=1.0).contains(&c.beta_sigma));
            assert!(c.g > 0.0);
        }
    }

    #[test]
    fn static_limit_matches_adiabatic() {
        let m = he();
        for s in [0.01, 0.1, 1.0, 10.0] {
            let (ed, es) = exact_response(&m, s, 0.0);
            let (ad, as_) = adiabatic_response(&m, s, 0.0, ResponseModel::Full);
            assert!((ed - ad).norm() / ad.norm() < 1e-12, "s={s}");
            assert!((es - as_).norm() / as_.norm() < 1e-12, "s={s}");
            assert!(ed.re < 0.0 && ed.im == 0.0);
        }
    }

    #[test]
    fn high_frequency_rolloff() {
        let m = he();
        let (d0, _) = exact_response(&m, 0.1, 0.0);
        let (d, s) = exact_response(&m, 0.1, 1e7);
        assert!(d.norm() < 1e-6 * d0.norm());
        assert!(s.norm() < 1e-6);
    }

    #[test]
    fn adiabatic_error_at_tenth_linewidth() {
        let m = he();
        let s = 0.1;
        let w = 0.1 * cpo_linewidth(&m, drive_for_saturation(&m, s));
        let (e, _) = exact_response(&m, s, w);
        let (a, _) = adiabatic_response(&m, s, w, ResponseModel::Full);
        let (e0, _) = exact_response(&m, s, 0.0);
        assert!((e - a).norm() / e0.norm() < 0.02);
    }

    #[test]
    fn linear_coefficient_matches_finite_difference() {
        let m = he();
        for s in [0.05, 0.1, 1.0, 10.0] {
            let h = 1e-5 * cpo_linewidth(&m, drive_for_saturation(&m, s));
            let (ep, sp) = exact_response(&m, s, h);
            let (em, sm) = exact_response(&m, s, -h);
            let d_exact = (ep - em) / (2.0 * h);
            let ds_exact = (sp - sm) / (2.0 * h);
            let (a1, b1) = adiabatic_response(&m, s, 1.0, ResponseModel::Full);
            let (a0, b0) = adiabatic_response(&m, s, 0.0, ResponseModel::Full);
            let d_adiabatic = a1 - a0;
            let ds_adiabatic = b1 - b0;
            assert!((d_exact - d_adiabatic).norm() / d_adiabatic.norm() < 1e-6, "s={s}");
            assert!((ds_exact - ds_adiabatic).norm() / ds_adiabatic.norm() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn strong_drive_lag_tends_to_optical_delay() {
        let m = he();
        let s = 1e8;
        let drive = drive_for_saturation(&m, s);
        let (a1, _) = adiabatic_response(&m, s, 1.0, ResponseModel::Full);
        let (a0, _) = adiabatic_response(&m, s, 0.0, ResponseModel::Full);
        let lag = ((a1 - a0) / a0).im;
        assert!((lag * 2.0 * m.gamma_opt - 1.0).abs() < 1e-3, "{lag} {drive}");
    }

    #[test]
    fn adiabatic_error_scales_quadratically() {
        let m = he();
        let s = 0.1;
        let dcpo = cpo_linewidth(&m, drive_for_saturation(&m, s));
        let (e0, _) = exact_response(&m, s, 0.0);
        let err = |x: f64| {
            let (e, _) = exact_response(&m, s, x * dcpo);
            let (a, _) = adiabatic_response(&m, s, x * dcpo, ResponseModel::Full);
            (e - a).norm() / e0.norm()
        };
        let xs = log_space(0.01, 0.3, 12);
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x.ln(), err(x).ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 2.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn full_transfer_is_first_order_of_exact_transfer() {
        let m = he();
        for s in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let t0 = exact_transfer(&m, s, 0.0);
            let tm = transfer_matrix(&m, s, 0.0, ResponseModel::Full);
            for q in 0..4 {
                assert!((t0[q] - tm.diag[q]).norm() < 1e-12 * (1.0 + t0[q].norm()), "s={s} q={q}");
                assert_eq!(t0[q].im, 0.0);
            }
            let h = 1e-6 * cpo_linewidth(&m, drive_for_saturation(&m, s));
            let tp = exact_transfer(&m, s, h);
            let tn = exact_transfer(&m, s, -h);
            let inv = inverse_group_velocities(&m, s, ResponseModel::Full);
            let fd = |q: usize| -((tp[q] - tn[q]) / (2.0 * h)).im;
            for (q, k) in [(0, 0), (1, 1), (2, 2), (3, 0)] {
                assert!((fd(q) - inv[k]).abs() < 1e-6 * inv[k].abs(), "s={s} q={q} {} {}", fd(q), inv[k]);
            }
        }
    }

    #[test]
    fn transfer_examples() {
        let m = he();
        let t = transfer_matrix(&m, 0.1, 0.0, ResponseModel::Simplified);
        let c = coefficients(&m, 0.1, ResponseModel::Simplified);
        assert!((t.diag[2].re / c.g - (2.0 * 0.1 / 0.13 - 1.0)).abs() < 1e-12);
        assert!((t.diag[2].re / c.g - 0.538).abs() < 1e-3);
        assert!((t.diag[0].re + c.g).abs() < 1e-15);
        assert_eq!(t.diag[0], t.diag[3]);

        let v = group_velocities(&m, 0.1, ResponseModel::Simplified);
        let reduced = v3_reduced(&m, 0.1);
        // the reduced form drops βΔ² from the leading term; βΔ(0.1) ≈ 0.77 here
        let leading = reduced / c.beta_delta.powi(2);
        assert!((v.v3 / leading - 1.0).abs() < 0.1, "{} {}", v.v3, leading);
        let v_one = group_velocities(&m, 1.0, ResponseModel::Simplified).v3;
        assert!((v_one / v3_reduced(&m, 1.0) - 1.0).abs() < 0.1);
        assert!((reduced / m.light_speed - 0.1 * 1.1 / 500.0 / 6.0).abs() < 1e-9);

        let w = 0.7;
        let far = transfer_matrix(&m, 1e12, w, ResponseModel::Full);
        for d in far.diag {
            assert!((d - Complex64::new(0.0, -w / m.light_speed)).norm() < 1e-9);
        }
        let dense = t.to_dense();
        assert_eq!(dense[0][1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn transfer_imaginary_parts_are_odd() {
        let m = he();
        for model in [ResponseModel::Full, ResponseModel::Simplified] {
            let a = transfer_matrix(&m, 0.3, 0.02, model);
            let b = transfer_matrix(&m, 0.3, -0.02, model);
            for q in 0..4 {
                assert_eq!(a.diag[q].re, b.diag[q].re);
                assert_eq!(a.diag[q].im, -b.diag[q].im);
            }
        }
    }

    #[test]
    fn dispersion_regimes() {
        let m = he();
        let s_values = log_space(1e-3, 1e3, 121);
        let rows = dispersion_scan(&m, &s_values, ResponseModel::Simplified);
        let thr = gain_threshold(&m, ResponseModel::Simplified);
        for r in &rows {
            if r.s < thr * 0.999 {
                assert!(r.gain_qperp < 0.0);
            } else if r.s > thr * 1.001 && r.s < 1.0 {
                assert!(r.gain_qperp > 0.0);
                assert!(r.v3_over_c < 1e-2, "s={} v3/c={}", r.s, r.v3_over_c);
            }
            assert!(r.gain_pperp < 0.0);
            if !r.singular {
                assert!(r.v1_over_c > 1.0 || r.v1_over_c < 0.0);
            }
        }
        let last = rows.last().unwrap();
        assert!((last.v3_over_c - 1.0).abs() < 0.05 && (last.v1_over_c - 1.0).abs() < 0.05);
        assert!(last.transmission(m.length).iter().all(|&t| t > 0.99));
        let at_thr = coefficients(&m, thr, ResponseModel::Simplified);
        assert!((at_thr.beta_delta - 0.5).abs() < 1e-15);
        assert!(((2.0 * at_thr.beta_delta - 1.0) * at_thr.g).abs() < 1e-15);
        let csv = dispersion_csv(&rows[..2]);
        assert!(csv.starts_with(DISPERSION_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn v3_minimum_location() {
        let m = he();
        let (s_min, v_min) = v3_minimum(&m, ResponseModel::Simplified, 1e-3, 100.0);
        // ignoring the O(β) bracket terms, d/ds[s/((1+s)(s+x)²)] = 0 gives
        // 2s² + s − x = 0 with x = 3γt/Γ0
        let x = gain_threshold(&m, ResponseModel::Simplified);
        let approx = ((1.0 + 8.0 * x).sqrt() - 1.0) / 4.0;
        assert!((s_min / approx - 1.0).abs() < 0.01, "{s_min} {approx}");
        for s in [1e-3, 0.01, 0.1, 1.0] {
            assert!(group_velocities(&m, s, ResponseModel::Simplified).v3 >= v_min);
        }
    }

    fn gaussian_traces(n: usize, dt: f64, center: f64, width: f64, axis: usize) -> Vec<QuadratureVector> {
        (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let mut a = [0.0; 4];
                a[axis] = (-0.5 * ((t - center) / width).powi(2)).exp();
                QuadratureVector::from_array(a)
            })
            .collect()
    }

    #[test]
    fn zero_length_is_identity() {
        let m = he();
        let tr = gaussian_traces(256, 0.5, 64.0, 8.0, 2);
        let spec = QuadratureSpectrum::from_traces(&tr, 0.5);
        let out = propagate_linear(&m, &[0.1, 0.05], 0.0, &spec, TransferKind::Exact, Frame::Lab).unwrap();
        for (a, b) in out.to_traces().iter().zip(&tr) {
            for q in 0..4 {
                assert!((a.as_array()[q] - b.as_array()[q]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenmodes_stay_closed() {
        let m = he();
        let profile = drive_depletion(&m, 0.5, 33);
        for axis in 0..4 {
            let tr = gaussian_traces(512, 0.5, 100.0, 12.0, axis);
            let spec = QuadratureSpectrum::from_traces(&tr, 0.5);
            for kind in [TransferKind::Exact, TransferKind::Adiabatic(ResponseModel::Full)] {
                let out = propagate_linear(&m, &profile, m.length, &spec, kind, Frame::Lab).unwrap();
                let traces = out.to_traces();
                let main: f64 = traces.iter().map(|v| v.as_array()[axis].powi(2)).sum();
                let leak: f64 = traces
                    .iter()
                    .map(|v| v.norm_sqr() - v.as_array()[axis].powi(2))
                    .sum();
                assert!(leak <= 1e-24 * main.max(1.0), "axis {axis} leak {leak}");
            }
        }
    }

    #[test]
    fn monochromatic_q_perp_scaling() {
        let m = he();
        let profile = drive_depletion(&m, 0.5, 33);
        let n = 256;
        let dt = 1.0;
        let mut spec = QuadratureSpectrum {
            dt,
            bins: vec![[Complex64::new(0.0, 0.0); 4]; n],
        };
        spec.bins[3][2] = Complex64::new(1.0, 0.0);
        spec.bins[n - 3][2] = Complex64::new(1.0, 0.0);
        let kind = TransferKind::Adiabatic(ResponseModel::Full);
        let out = propagate_linear(&m, &profile, m.length, &spec, kind, Frame::Lab).unwrap();
        let w = spec.omega(3);
        let expected = integrated_generator(&m, &profile, m.length, w, kind, Frame::Lab)[2].exp();
        assert!((out.bins[3][2] - expected).norm() < 1e-12);
        assert!((out.bins[n - 3][2] - expected.conj()).norm() < 1e-12);
        assert_eq!(out.bins[3][0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn pulse_delay_matches_group_velocity() {
        let m = he();
        let n_z = 65;
        let profile = drive_depletion(&m, 1.0, n_z);
        let h = m.length / (n_z - 1) as f64;
        let inv_v3: Vec<f64> = profile
            .iter()
            .map(|&s| inverse_group_velocities(&m, s, ResponseModel::Full)[2])
            .collect();
        let delay: f64 = inv_v3.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum();
        let dt = 0.25;
        let n = 4096;
        let width = 40.0;
        let tr = gaussian_traces(n, dt, 200.0, width, 2);
        let spec = QuadratureSpectrum::from_traces(&tr, dt);
        let kind = TransferKind::Adiabatic(ResponseModel::Full);
        let out = propagate_linear(&m, &profile, m.length, &spec, kind, Frame::Lab)
            .unwrap()
            .to_traces();
        let peak = |v: &[QuadratureVector]| {
            let (k, _) = v
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.q_perp.partial_cmp(&b.1.q_perp).unwrap())
                .unwrap();
            let (a, b, c) = (v[k - 1].q_perp, v[k].q_perp, v[k + 1].q_perp);
            (k as f64 + 0.5 * (a - c) / (a - 2.0 * b + c)) * dt
        };
        let measured = peak(&out) - peak(&tr);
        assert!((measured / delay - 1.0).abs() < 0.05, "{measured} {delay}");
    }

    #[test]
    fn aliasing_detected() {
        let m = he();
        let tr: Vec<QuadratureVector> = (0..64)
            .map(|k| QuadratureVector::new(0.0, 0.0, if k % 2 == 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        let spec = QuadratureSpectrum::from_traces(&tr, 1.0);
        let r = propagate_linear(&m, &[0.1, 0.1], 1.0, &spec, TransferKind::Exact, Frame::Lab);
        assert!(matches!(r, Err(NumericError::Aliasing { .. })));
    }

    #[test]
    fn spectrum_symmetry_preserved() {
        let m = he();
        let profile = drive_depletion(&m, 0.5, 17);
        let tr = gaussian_traces(256, 1.0, 128.0, 10.0, 2);
        let spec = QuadratureSpectrum::from_traces(&tr, 1.0);
        let out = propagate_linear(&m, &profile, m.length, &spec, TransferKind::Exact, Frame::Lab).unwrap();
        let n = out.bins.len();
        for k in 1..n / 2 {
            assert!((out.bins[k][2] - out.bins[n - k][2].conj()).norm() < 1e-10);
        }
    }
}
