//! Cross-module oracle checks shared by the `validate` command.

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::NumericError;
use crate::linear_response::{
    adiabatic_response, dispersion_scan, exact_response, gain_threshold, inverse_group_velocities, log_space,
    propagate_linear, Frame, QuadratureSpectrum, ResponseModel, TransferKind,
};
use crate::maxwell_bloch::{run_sequence, RunOptions, RunTraces, SimGrid, SolverMode, PHYSICAL_TOL};
use crate::medium::{cpo_linewidth, AtomicMedium};
use crate::pulse::{DriveProfile, PulseShape, SignalPulse};
use crate::quadrature::QuadratureVector;
use crate::steady_state::{drive_depletion, drive_for_saturation, steady_state_analytic, steady_state_oracle, OracleOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Worst relative deviation of the reduced-model oracle from the closed form.
pub fn steady_state_deviation(medium: &AtomicMedium, s: f64) -> Result<f64, NumericError> {
    let w = drive_for_saturation(medium, s);
    let a = steady_state_analytic(medium, w);
    let r = steady_state_oracle(medium, w, OracleOptions::reduced(2.0e4, 1e-12))?;
    let p = r.saturation_point(medium, w);
    Ok(((p.pop - a.pop).abs() / a.pop).max((p.coh_e - a.coh_e).norm() / a.coh_e.norm()))
}

/// Relative error of the adiabatic χΔ against the exact form at ω = x·Δ_CPO.
pub fn adiabatic_error(medium: &AtomicMedium, s: f64, x: f64, model: ResponseModel) -> f64 {
    let dcpo = cpo_linewidth(medium, drive_for_saturation(medium, s));
    let e = exact_response(medium, s, x * dcpo).0;
    let a = adiabatic_response(medium, s, x * dcpo, model).0;
    (a - e).norm() / e.norm()
}

/// Least-squares slope of ln y against ln x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// A weak Gaussian Q⊥ pulse on a constant drive, propagated by Maxwell–Bloch
/// and by the exact linear transfer over the depleted drive profile.
#[derive(Debug, Clone)]
pub struct WeakPulseComparison {
    pub traces: RunTraces,
    pub linear_out: Vec<QuadratureVector>,
    /// ‖MB − linear‖₂/‖linear‖₂ of the exit Q⊥ trace.
    pub relative_l2: f64,
    /// Lab-frame delay of the exit intensity centroid.
    pub delay: f64,
    /// ∫dz/v3 over the drive profile.
    pub predicted_delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakPulseSetup {
    pub s_in: f64,
    pub width: f64,
    pub ratio: f64,
    pub dt: f64,
    pub n_z: usize,
}

impl WeakPulseSetup {
    pub fn new(s_in: f64, width: f64) -> Self {
        WeakPulseSetup {
            s_in,
            width,
            ratio: 1e-3,
            dt: 0.02,
            n_z: 33,
        }
    }
}

fn q_perp(traces: &[QuadratureVector]) -> Vec<f64> {
    traces.iter().map(|q| q.q_perp).collect()
}

fn centroid(values: &[f64], dt: f64) -> f64 {
    let w: f64 = values.iter().map(|v| v * v).sum();
    values.iter().enumerate().map(|(k, v)| k as f64 * dt * v * v).sum::<f64>() / w
}

pub fn weak_pulse_vs_linear(medium: &AtomicMedium, setup: WeakPulseSetup) -> Result<WeakPulseComparison, NumericError> {
    let level = drive_for_saturation(medium, setup.s_in);
    let profile = drive_depletion(medium, setup.s_in, setup.n_z);
    let h = medium.length / (setup.n_z - 1) as f64;
    let inv_v3: Vec<f64> = profile
        .iter()
        .map(|&s| inverse_group_velocities(medium, s, ResponseModel::Full)[2])
        .collect();
    let predicted_delay =
        h * (inv_v3.iter().sum::<f64>() - 0.5 * (inv_v3[0] + inv_v3[setup.n_z - 1]));

    let center = 5.0 * setup.width;
    let t_end = center + 5.0 * setup.width + 2.0 * predicted_delay.max(0.0);
    let grid = SimGrid::covering(t_end, setup.dt, setup.n_z, SolverMode::CoherenceEliminated);
    let signal = SignalPulse::q_perp(
        PulseShape::Gaussian {
            center,
            width: setup.width,
        },
        setup.ratio * level,
    );
    let traces = run_sequence(
        medium,
        &DriveProfile::constant(level),
        &signal,
        &grid,
        &RunOptions::default(),
    )?;

    let spectrum = QuadratureSpectrum::from_traces(&traces.signal_in, traces.dt);
    let linear_out = propagate_linear(
        medium,
        &profile,
        medium.length,
        &spectrum,
        TransferKind::Exact,
        Frame::Retarded,
    )?
    .to_traces();

    let (mb, lin) = (q_perp(&traces.signal_out), q_perp(&linear_out));
    let diff: f64 = mb.iter().zip(&lin).map(|(a, b)| (a - b) * (a - b)).sum();
    let norm: f64 = lin.iter().map(|b| b * b).sum();
    let delay = centroid(&mb, traces.dt) - centroid(&q_perp(&traces.signal_in), traces.dt)
        + medium.length / medium.light_speed;
    Ok(WeakPulseComparison {
        traces,
        linear_out,
        relative_l2: (diff / norm).sqrt(),
        delay,
        predicted_delay,
    })
}

/// The quick invariant suite: every check runs in seconds.
pub fn run_suite(config: &RunConfig) -> Vec<Check> {
    let m = config.medium();
    let mut checks = Vec::new();

    let mut worst = 0.0f64;
    let mut failure = None;
    for s in [0.01, 0.1, 1.0, 10.0] {
        match steady_state_deviation(&m, s) {
            Ok(d) => worst = worst.max(d),
            Err(e) => failure = Some(e.to_string()),
        }
    }
    checks.push(match failure {
        Some(e) => Check::new("steady_state_oracle", false, e),
        None => Check::new(
            "steady_state_oracle",
            worst < 1e-8,
            format!("max relative deviation {worst:e} (tolerance 1e-8)"),
        ),
    });

    let xs = log_space(0.01, 0.3, 12);
    let errs: Vec<f64> = xs.iter().map(|&x| adiabatic_error(&m, 0.1, x, ResponseModel::Full)).collect();
    let slope = log_log_slope(&xs, &errs);
    let at_tenth = adiabatic_error(&m, 0.1, 0.1, ResponseModel::Full);
    checks.push(Check::new(
        "adiabatic_error_scaling",
        (slope - 2.0).abs() <= 0.2 && at_tenth < 0.02,
        format!("slope {slope} (2 ± 0.2), error at 0.1 Δ_CPO {at_tenth:e} (< 0.02)"),
    ));

    let threshold = gain_threshold(&m, ResponseModel::Simplified);
    let rows = dispersion_scan(&m, &[threshold], ResponseModel::Simplified);
    let amplifying = dispersion_scan(&m, &log_space(threshold * 1.01, 99.0, 40), ResponseModel::Simplified)
        .iter()
        .all(|r| r.gain_qperp > 0.0);
    checks.push(Check::new(
        "q_perp_gain_threshold",
        rows[0].gain_qperp.abs() < 1e-12 && amplifying,
        format!("gain at 3γt/Γ0 = {:e}, amplifying above: {amplifying}", rows[0].gain_qperp),
    ));

    let setup = WeakPulseSetup::new(1.0, 60.0);
    match (weak_pulse_vs_linear(&m, setup), weak_pulse_vs_linear(&m, setup)) {
        (Ok(a), Ok(b)) => {
            let delay_err = (a.delay - a.predicted_delay).abs() / a.predicted_delay;
            checks.push(Check::new(
                "weak_pulse_linearization",
                a.relative_l2 < 0.03 && delay_err < 0.05,
                format!(
                    "relative L2 {:e} (< 0.03), delay {} vs {} (< 5%)",
                    a.relative_l2, a.delay, a.predicted_delay
                ),
            ));
            checks.push(Check::new(
                "conservation",
                a.traces.max_trace_drift < PHYSICAL_TOL && a.traces.unphysical_points == 0,
                format!(
                    "trace drift {:e}, unphysical points {}",
                    a.traces.max_trace_drift, a.traces.unphysical_points
                ),
            ));
            checks.push(Check::new(
                "determinism",
                a.traces == b.traces,
                "two identical runs compared bitwise".into(),
            ));
        }
        (Err(e), _) | (_, Err(e)) => {
            checks.push(Check::new("weak_pulse_linearization", false, e.to_string()))
        }
    }

    let round_trip = RunConfig::from_json(&config.to_json()).map(|c| &c == config);
    checks.push(Check::new(
        "config_round_trip",
        round_trip == Ok(true),
        "resolved configuration re-parsed".into(),
    ));
    checks
}
