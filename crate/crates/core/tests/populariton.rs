use cpo_storage::maxwell_bloch::{run_sequence, RunOptions, RunTraces, SimGrid, SolverMode};
use cpo_storage::populariton::{check_transport, q_perp_transport_residual, TransportOptions};
use cpo_storage::pulse::{DriveProfile, PulseShape, SignalPulse};
use cpo_storage::steady_state::drive_for_saturation;
use cpo_storage::{AtomicMedium, NumericError};

/// Writes a Gaussian Q⊥ pulse and switches the drive off 100 time units
/// before the end of the run.
fn write_then_store(medium: &AtomicMedium, s_in: f64, width: f64) -> (RunTraces, f64) {
    let level = drive_for_saturation(medium, s_in);
    let t_end = 12.0 * width;
    let drive = DriveProfile::write_store_retrieve(level, t_end - 100.0, t_end + 100.0, 0.0, 0.0);
    let signal = SignalPulse::q_perp(
        PulseShape::Gaussian {
            center: 5.0 * width,
            width,
        },
        1e-3 * level,
    );
    let grid = SimGrid::covering(t_end, 0.02, 33, SolverMode::CoherenceEliminated);
    let opts = RunOptions {
        record_stride: 2,
        ..RunOptions::default()
    };
    (run_sequence(medium, &drive, &signal, &grid, &opts).unwrap(), t_end)
}

#[test]
fn populariton_transport_and_storage() {
    let m = AtomicMedium::he_star().with_optical_depth(2.0);
    let width = 60.0;
    let (traces, t_end) = write_then_store(&m, 3.0, width);
    let mut opts = TransportOptions::writing((width, t_end - 110.0));
    opts.storage = Some((t_end - 90.0, t_end - 5.0));
    let report = check_transport(&traces, &m, &opts).unwrap();
    assert!(report.residual < 0.1, "{report:?}");
    assert!(report.s_min >= 0.1 && report.s_max <= 10.0);
    let rate = report.storage_decay_rate.unwrap();
    assert!((rate / m.gamma_t - 1.0).abs() < 0.05, "decay rate {rate}");
    assert!(report.storage_light_fraction.unwrap() < 1e-10);
    assert!((report.fitted_velocity / report.predicted_velocity - 1.0).abs() < 0.1);
}

#[test]
fn q_perp_slow_light_equation_holds_while_writing() {
    let m = AtomicMedium::he_star().with_optical_depth(2.0);
    let width = 60.0;
    let (traces, t_end) = write_then_store(&m, 3.0, width);
    let report = q_perp_transport_residual(&traces, &m, &TransportOptions::writing((width, t_end - 110.0))).unwrap();
    assert!(report.residual < 0.1, "{report:?}");
}

#[test]
fn low_saturation_is_outside_the_validity_window() {
    let m = AtomicMedium::he_star().with_optical_depth(2.0);
    let (traces, t_end) = write_then_store(&m, 0.05, 40.0);
    let r = check_transport(&traces, &m, &TransportOptions::writing((40.0, t_end - 110.0)));
    assert!(matches!(r, Err(NumericError::Validity { .. })), "{r:?}");
}
