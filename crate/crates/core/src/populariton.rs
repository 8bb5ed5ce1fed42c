//! Populariton quasi-particles: light–matter superpositions of a signal
//! quadrature and the CPO population mode it drives.

use serde::{Deserialize, Serialize};

use crate::error::{NumericError, ParamError};
use crate::linear_response::{coefficients, group_velocities, ResponseModel};
use crate::maxwell_bloch::{RunTraces, ZSlice};
use crate::medium::AtomicMedium;
use crate::steady_state::saturation;

/// Prefactor convention on the light part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// cosΘ · Q⊥ for the antisymmetric mode.
    #[default]
    Bare,
    /// cosΘ/(1+s) · Q⊥, valid for any s in the adiabatic window.
    SaturationWeighted,
}

/// Which CPO mode the populariton is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// (Q⊥, ρΔ)
    #[default]
    Antisymmetric,
    /// (P∥, ρΣ)
    Symmetric,
}

/// tan Θ = √(ηc/2)/|Ω_D|; Θ = π/2 for a vanishing drive.
pub fn mixing_angle(medium: &AtomicMedium, omega_d: f64) -> f64 {
    (0.5 * medium.eta * medium.light_speed).sqrt().atan2(omega_d.abs())
}

/// Light–matter combination for the given mode and normalization. `light` is
/// Q⊥ (or P∥) and `matter` is ρΔ (or ρΣ) at first order in the signal.
pub fn compose(
    medium: &AtomicMedium,
    light: f64,
    matter: f64,
    theta: f64,
    s: f64,
    normalization: Normalization,
    mode: Mode,
) -> f64 {
    let light_weight = match normalization {
        Normalization::Bare => 1.0,
        Normalization::SaturationWeighted => 1.0 / (1.0 + s),
    };
    let matter_weight = match mode {
        Mode::Antisymmetric => 1.0,
        Mode::Symmetric => 3.0,
    };
    let (sin, cos) = theta.sin_cos();
    light_weight * cos * light - matter_weight * medium.populariton_weight() * sin * matter
}

/// Time window and conventions for a transport check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportOptions {
    /// Steady-drive interval used for the residual and the fits.
    pub window: (f64, f64),
    /// Drive-off interval used for the storage decay fit, if any.
    #[serde(default)]
    pub storage: Option<(f64, f64)>,
    #[serde(default)]
    pub normalization: Normalization,
    /// Samples whose |P| is below this fraction of the window peak are
    /// excluded from the fits and the residual.
    #[serde(default = "default_floor")]
    pub floor: f64,
    #[serde(default)]
    pub law: TransportLaw,
}

/// Gain term of the populariton transport law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportLaw {
    /// g(1 + sin²Θ), the small-s form.
    SmallSaturation,
    /// g(1 + sin²Θ + 2βΣ), which keeps the drive-depletion term at any s.
    #[default]
    WithDepletion,
}

fn default_floor() -> f64 {
    1e-3
}

impl TransportOptions {
    pub fn writing(window: (f64, f64)) -> Self {
        TransportOptions {
            window,
            storage: None,
            normalization: Normalization::Bare,
            floor: default_floor(),
            law: TransportLaw::default(),
        }
    }
}

/// Residual of a transport law on simulated data plus least-squares fits of
/// ∂zX = −a·∂tX + b·X, with 1/v = a + 1/c in the lab frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    /// ‖R‖₂ divided by the largest of the three term norms.
    pub residual: f64,
    pub fitted_velocity: f64,
    pub predicted_velocity: f64,
    pub fitted_gain: f64,
    pub predicted_gain: f64,
    /// Saturation range over the window.
    pub s_min: f64,
    pub s_max: f64,
    pub samples: usize,
    pub storage_decay_rate: Option<f64>,
    /// Largest |light part| / |P| with the drive off.
    pub storage_light_fraction: Option<f64>,
}

/// Per-sample terms (∂zX, ∂tX, X) and the law's coefficients (a, b) at the
/// midpoint between two recorded slices.
struct Sample {
    dz: f64,
    dt: f64,
    x: f64,
    a: f64,
    b: f64,
}

fn collect<F, G>(
    traces: &RunTraces,
    medium: &AtomicMedium,
    opts: &TransportOptions,
    value: F,
    law: G,
) -> Result<(Vec<Sample>, f64, f64), NumericError>
where
    F: Fn(&ZSlice, usize) -> f64,
    G: Fn(f64) -> (f64, f64),
{
    let slices = &traces.slices;
    if slices.len() < 2 {
        return Err(ParamError::Invalid("transport checks need at least two recorded slices".into()).into());
    }
    let dt = traces.dt;
    let n_t = traces.drive_in.len();
    let k0 = ((opts.window.0 / dt).ceil() as usize).max(1);
    let k1 = ((opts.window.1 / dt).floor() as usize).min(n_t - 2);
    let mut raw = Vec::new();
    let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for pair in slices.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let h = hi.z - lo.z;
        for k in k0..=k1 {
            let mid = |f: &dyn Fn(&ZSlice, usize) -> f64, k: usize| 0.5 * (f(lo, k) + f(hi, k));
            let x = mid(&value, k);
            let dz = (value(hi, k) - value(lo, k)) / h;
            let dtx = (mid(&value, k + 1) - mid(&value, k - 1)) / (2.0 * dt);
            let drive = 0.5 * (lo.drive[k] + hi.drive[k]);
            let s = saturation(medium, drive);
            s_min = s_min.min(s);
            s_max = s_max.max(s);
            let (a, b) = law(drive);
            raw.push(Sample { dz, dt: dtx, x, a, b });
        }
    }
    let peak = raw.iter().fold(0.0f64, |m, r| m.max(r.x.abs()));
    let kept = raw.into_iter().filter(|r| r.x.abs() >= opts.floor * peak).collect();
    Ok((kept, s_min, s_max))
}

fn report_from(samples: &[Sample], medium: &AtomicMedium, s_min: f64, s_max: f64) -> TransportReport {
    let norm = |f: &dyn Fn(&Sample) -> f64| samples.iter().map(|r| f(r).powi(2)).sum::<f64>().sqrt();
    let residual = norm(&|r| r.dz + r.a * r.dt - r.b * r.x);
    let scale = norm(&|r| r.dz).max(norm(&|r| r.a * r.dt)).max(norm(&|r| r.b * r.x));

    // least squares for ∂zX = −a ∂tX + b X
    let (mut stt, mut stx, mut sxx, mut stz, mut sxz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut a_num, mut a_den, mut b_num, mut b_den) = (0.0, 0.0, 0.0, 0.0);
    for r in samples {
        stt += r.dt * r.dt;
        stx += r.dt * r.x;
        sxx += r.x * r.x;
        stz += r.dt * r.dz;
        sxz += r.x * r.dz;
        a_num += r.a * r.dt * r.dt;
        a_den += r.dt * r.dt;
        b_num += r.b * r.x * r.x;
        b_den += r.x * r.x;
    }
    let det = stt * sxx - stx * stx;
    let fit_a = -(stz * sxx - sxz * stx) / det;
    let fit_b = (stt * sxz - stx * stz) / det;
    let inv_c = 1.0 / medium.light_speed;
    TransportReport {
        residual: if scale > 0.0 { residual / scale } else { 0.0 },
        fitted_velocity: 1.0 / (fit_a + inv_c),
        predicted_velocity: 1.0 / (a_num / a_den + inv_c),
        fitted_gain: fit_b,
        predicted_gain: b_num / b_den,
        s_min,
        s_max,
        samples: samples.len(),
        storage_decay_rate: None,
        storage_light_fraction: None,
    }
}

fn populariton_value(medium: &AtomicMedium, slice: &ZSlice, k: usize, normalization: Normalization) -> f64 {
    let drive = slice.drive[k];
    compose(
        medium,
        slice.signal[k].q_perp,
        slice.rho_delta[k],
        mixing_angle(medium, drive),
        saturation(medium, drive),
        normalization,
        Mode::Antisymmetric,
    )
}

/// Exponential decay rate of |P| fitted by least squares on ln|P(L, t)|.
fn storage_fit(
    traces: &RunTraces,
    medium: &AtomicMedium,
    storage: (f64, f64),
    normalization: Normalization,
) -> (f64, f64) {
    let last = traces.slices.last().expect("checked by caller");
    let dt = traces.dt;
    let k0 = (storage.0 / dt).ceil() as usize;
    let k1 = ((storage.1 / dt).floor() as usize).min(last.drive.len() - 1);
    let (mut n, mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut light = 0.0f64;
    for k in k0..=k1 {
        let p = populariton_value(medium, last, k, normalization);
        let theta = mixing_angle(medium, last.drive[k]);
        let lw = match normalization {
            Normalization::Bare => 1.0,
            Normalization::SaturationWeighted => 1.0 / (1.0 + saturation(medium, last.drive[k])),
        };
        let light_part = lw * theta.cos() * last.signal[k].q_perp;
        light = light.max(light_part.abs() / p.abs());
        let t = k as f64 * dt;
        let y = p.abs().ln();
        n += 1.0;
        st += t;
        sy += y;
        stt += t * t;
        sty += t * y;
    }
    let slope = (n * sty - st * sy) / (n * stt - st * st);
    (-slope, light)
}

fn check_validity(s_min: f64, s_max: f64) -> Result<(), NumericError> {
    if s_min < 0.1 {
        return Err(NumericError::Validity { s: s_min });
    }
    if s_max > 10.0 {
        return Err(NumericError::Validity { s: s_max });
    }
    Ok(())
}

/// Residual of (∂z + (2 − cos⁴Θ)/v3 ∂t) P = g(1 + sin²Θ [+ 2βΣ]) P on the
/// recorded slices, with Θ, v3 and g = η/(2Γ(1+s)) evaluated from the local
/// drive.
pub fn check_transport(
    traces: &RunTraces,
    medium: &AtomicMedium,
    opts: &TransportOptions,
) -> Result<TransportReport, NumericError> {
    let inv_c = 1.0 / medium.light_speed;
    let law = |drive: f64| {
        let s = saturation(medium, drive);
        let theta = mixing_angle(medium, drive);
        let v3 = group_velocities(medium, s, ResponseModel::Full).v3;
        let g = medium.eta / (2.0 * medium.gamma_opt * (1.0 + s));
        let depletion = match opts.law {
            TransportLaw::SmallSaturation => 0.0,
            TransportLaw::WithDepletion => 2.0 * s / (1.0 + s),
        };
        // retarded frame: ∂z|lab = ∂z|ret − (1/c)∂t
        (
            (2.0 - theta.cos().powi(4)) / v3 - inv_c,
            g * (1.0 + theta.sin().powi(2) + depletion),
        )
    };
    let norm = opts.normalization;
    let (samples, s_min, s_max) = collect(
        traces,
        medium,
        opts,
        |sl, k| populariton_value(medium, sl, k, norm),
        law,
    )?;
    check_validity(s_min, s_max)?;
    let mut report = report_from(&samples, medium, s_min, s_max);
    if let Some(storage) = opts.storage {
        let (rate, light) = storage_fit(traces, medium, storage, norm);
        report.storage_decay_rate = Some(rate);
        report.storage_light_fraction = Some(light);
    }
    Ok(report)
}

/// Residual of (c∂z + ∂t − cG)Q⊥ = (ηcβΔ/2|Ω_D|) ∂tρΔ with G = (2βΔ − 1)g the
/// local Q⊥ gain; for βΔ = 1 this is the bare slow-light equation of Q⊥.
pub fn q_perp_transport_residual(
    traces: &RunTraces,
    medium: &AtomicMedium,
    opts: &TransportOptions,
) -> Result<TransportReport, NumericError> {
    let slices = &traces.slices;
    if slices.len() < 2 {
        return Err(ParamError::Invalid("transport checks need at least two recorded slices".into()).into());
    }
    let dt = traces.dt;
    let n_t = traces.drive_in.len();
    let k0 = ((opts.window.0 / dt).ceil() as usize).max(1);
    let k1 = ((opts.window.1 / dt).floor() as usize).min(n_t - 2);
    let mut samples = Vec::new();
    let (mut s_min, mut s_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for pair in slices.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let h = hi.z - lo.z;
        for k in k0..=k1 {
            let q = |k: usize| 0.5 * (lo.signal[k].q_perp + hi.signal[k].q_perp);
            let rho = |k: usize| 0.5 * (lo.rho_delta[k] + hi.rho_delta[k]);
            let drive = 0.5 * (lo.drive[k] + hi.drive[k]);
            if drive <= 0.0 {
                continue;
            }
            let s = saturation(medium, drive);
            s_min = s_min.min(s);
            s_max = s_max.max(s);
            let c = coefficients(medium, s, ResponseModel::Full);
            let gain = (2.0 * c.beta_delta - 1.0) * c.g;
            let source = medium.eta * c.beta_delta / (2.0 * drive) * (rho(k + 1) - rho(k - 1)) / (2.0 * dt);
            // stored as ∂zX + a∂tX − bX with a = 0 and the source folded into b·x
            samples.push(Sample {
                dz: (hi.signal[k].q_perp - lo.signal[k].q_perp) / h,
                dt: source,
                x: q(k),
                a: -1.0,
                b: gain,
            });
        }
    }
    let peak = samples.iter().fold(0.0f64, |m, r| m.max(r.x.abs()));
    let kept: Vec<Sample> = samples.into_iter().filter(|r| r.x.abs() >= opts.floor * peak).collect();
    let norm = |f: &dyn Fn(&Sample) -> f64| kept.iter().map(|r| f(r).powi(2)).sum::<f64>().sqrt();
    let residual = norm(&|r| r.dz - r.dt - r.b * r.x);
    let scale = norm(&|r| r.dz).max(norm(&|r| r.dt)).max(norm(&|r| r.b * r.x));
    let gain_num: f64 = kept.iter().map(|r| r.b * r.x * r.x).sum();
    let gain_den: f64 = kept.iter().map(|r| r.x * r.x).sum();
    let fit_num: f64 = kept.iter().map(|r| (r.dz - r.dt) * r.x).sum();
    Ok(TransportReport {
        residual: if scale > 0.0 { residual / scale } else { 0.0 },
        fitted_velocity: f64::NAN,
        predicted_velocity: f64::NAN,
        fitted_gain: if gain_den > 0.0 { fit_num / gain_den } else { 0.0 },
        predicted_gain: if gain_den > 0.0 { gain_num / gain_den } else { 0.0 },
        s_min,
        s_max,
        samples: kept.len(),
        storage_decay_rate: None,
        storage_light_fraction: None,
    })
}
