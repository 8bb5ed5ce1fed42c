//! Nonperturbative z–t solver for the drive and signal fields coupled to the
//! five-variable atomic state.
//!
//! The fields obey ∂z Ω^± = iη ρ̃_{e∓1} in the retarded frame τ = t − z/c.
//! Every column in z is integrated in τ with RK4, and the field is marched
//! in z with a Heun predictor/corrector. Each run marches a drive-only
//! reference alongside the drive + signal run so the signal part of the
//! field and of the atomic response is available at every z.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{bloch_rhs, quasi_static_coherences, BlochState};
use crate::error::{NumericError, ParamError};
use crate::medium::{AtomicMedium, UnitSystem};
use crate::populariton::{compose, mixing_angle, Mode, Normalization};
use crate::pulse::{DriveProfile, SignalPulse};
use crate::quadrature::{quadratures_from_fields, QuadratureVector};
use crate::steady_state::saturation;

type Field = (Complex64, Complex64);

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Atomic time integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    /// All five variables integrated explicitly; needs dt < 0.1/Γ.
    FullStiff,
    /// Optical coherences slaved to their algebraic quasi-steady values.
    #[default]
    CoherenceEliminated,
}

impl SolverMode {
    fn name(self) -> &'static str {
        match self {
            SolverMode::FullStiff => "full-stiff",
            SolverMode::CoherenceEliminated => "coherence-eliminated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub n_z: usize,
    pub n_t: usize,
    pub dt: f64,
    #[serde(default)]
    pub mode: SolverMode,
}

impl SimGrid {
    /// Grid with time samples k·dt covering [0, t_end].
    pub fn covering(t_end: f64, dt: f64, n_z: usize, mode: SolverMode) -> Self {
        SimGrid {
            n_z,
            n_t: (t_end / dt).ceil() as usize + 1,
            dt,
            mode,
        }
    }

    pub fn z_step(&self, medium: &AtomicMedium) -> f64 {
        medium.length / (self.n_z - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_t - 1)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n_z < 16 {
            return Err(ParamError::range("n_z", ">= 16", self.n_z as f64));
        }
        if self.n_t < 4 {
            return Err(ParamError::range("n_t", ">= 4", self.n_t as f64));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ParamError::range("dt", "finite and > 0", self.dt));
        }
        Ok(())
    }

    /// Largest admissible step for the given peak total Rabi frequency.
    pub fn step_bound(&self, medium: &AtomicMedium, peak_field: f64) -> f64 {
        match self.mode {
            SolverMode::FullStiff => 0.1 / medium.gamma_opt,
            SolverMode::CoherenceEliminated => {
                let pumping = peak_field * peak_field / medium.gamma_opt;
                let bound = 0.05 / medium.gamma0.max(pumping);
                // the Raman coherence still rotates at 2Δz
                if medium.delta_z > 0.0 {
                    bound.min(0.5 / medium.delta_z)
                } else {
                    bound
                }
            }
        }
    }

    pub fn check_step(&self, medium: &AtomicMedium, peak_field: f64) -> Result<(), NumericError> {
        let bound = self.step_bound(medium, peak_field);
        if self.dt >= bound {
            return Err(NumericError::StepTooLarge {
                dt: self.dt,
                bound,
                mode: self.mode.name(),
            });
        }
        Ok(())
    }
}

/// Right-hand side with the optical coherences replaced by their
/// quasi-static values; the returned coherence derivatives are zero.
pub fn eliminated_rhs(state: &BlochState, plus: Complex64, minus: Complex64, medium: &AtomicMedium) -> BlochState {
    let mut s = *state;
    let (e1, em1) = quasi_static_coherences(&s, plus, minus, medium);
    s.coh_e1 = e1;
    s.coh_em1 = em1;
    let mut d = bloch_rhs(&s, plus, minus, medium);
    d.coh_e1 = ZERO;
    d.coh_em1 = ZERO;
    d
}

fn rhs(mode: SolverMode, state: &BlochState, f: Field, medium: &AtomicMedium) -> BlochState {
    match mode {
        SolverMode::FullStiff => bloch_rhs(state, f.0, f.1, medium),
        SolverMode::CoherenceEliminated => eliminated_rhs(state, f.0, f.1, medium),
    }
}

fn slave(state: &mut BlochState, f: Field, medium: &AtomicMedium) {
    let (e1, em1) = quasi_static_coherences(state, f.0, f.1, medium);
    state.coh_e1 = e1;
    state.coh_em1 = em1;
}

/// Advances one RK4 step with fields at the start, midpoint and end of the
/// step. `at` is the (z, t) index used to locate a stability failure.
pub fn step_atoms(
    state: &BlochState,
    fields: [Field; 3],
    dt: f64,
    mode: SolverMode,
    medium: &AtomicMedium,
    at: (usize, usize),
) -> Result<BlochState, NumericError> {
    let k1 = rhs(mode, state, fields[0], medium);
    let k2 = rhs(mode, &(*state + k1 * (0.5 * dt)), fields[1], medium);
    let k3 = rhs(mode, &(*state + k2 * (0.5 * dt)), fields[1], medium);
    let k4 = rhs(mode, &(*state + k3 * dt), fields[2], medium);
    let mut next = *state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if mode == SolverMode::CoherenceEliminated {
        slave(&mut next, fields[2], medium);
    }
    let norm = next.max_norm();
    if !next.is_finite() || norm > 10.0 {
        return Err(NumericError::Stability {
            z_index: at.0,
            t_index: at.1,
            norm,
        });
    }
    Ok(next)
}

fn pack(s: &BlochState, mode: SolverMode) -> Vec<f64> {
    let mut v = vec![s.coh_raman.re, s.coh_raman.im, s.pop_p1, s.pop_m1];
    if mode == SolverMode::FullStiff {
        v.extend([s.coh_e1.re, s.coh_e1.im, s.coh_em1.re, s.coh_em1.im]);
    }
    v
}

fn unpack(v: &[f64]) -> BlochState {
    let mut s = BlochState {
        coh_raman: Complex64::new(v[0], v[1]),
        pop_p1: v[2],
        pop_m1: v[3],
        ..Default::default()
    };
    if v.len() == 8 {
        s.coh_e1 = Complex64::new(v[4], v[5]);
        s.coh_em1 = Complex64::new(v[6], v[7]);
    }
    s
}

/// Exact fixed point of the atomic equations for constant fields.
///
/// Both right-hand sides are affine in the real state variables, so the
/// fixed point is the solution of one small linear system.
pub fn stationary_state(medium: &AtomicMedium, field: Field, mode: SolverMode) -> BlochState {
    let n = if mode == SolverMode::FullStiff { 8 } else { 4 };
    let eval = |x: &[f64]| pack(&rhs(mode, &unpack(x), field, medium), mode);
    let b = eval(&vec![0.0; n]);
    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        let col = eval(&x);
        for i in 0..n {
            a[(i, j)] = col[i] - b[i];
        }
    }
    let rhs_vec = DVector::from_iterator(n, b.iter().map(|v| -v));
    let mut state = match a.lu().solve(&rhs_vec) {
        Some(x) => unpack(x.as_slice()),
        None => BlochState::equilibrium(),
    };
    if mode == SolverMode::CoherenceEliminated {
        slave(&mut state, field, medium);
    }
    state
}

/// Midpoint samples of a uniformly sampled field by cubic interpolation,
/// centred in the interior and one-sided in the first and last intervals.
fn midpoints(fields: &[Field]) -> Vec<Field> {
    let n = fields.len();
    let cubic = |idx: [usize; 4], w: [f64; 4]| {
        let mut out = (ZERO, ZERO);
        for (&i, &wi) in idx.iter().zip(&w) {
            out.0 += fields[i].0 * wi;
            out.1 += fields[i].1 * wi;
        }
        out
    };
    (0..n - 1)
        .map(|k| {
            if n < 4 {
                ((fields[k].0 + fields[k + 1].0) * 0.5, (fields[k].1 + fields[k + 1].1) * 0.5)
            } else if k == 0 {
                cubic([0, 1, 2, 3], [5.0 / 16.0, 15.0 / 16.0, -5.0 / 16.0, 1.0 / 16.0])
            } else if k + 2 == n {
                cubic([n - 4, n - 3, n - 2, n - 1], [1.0 / 16.0, -5.0 / 16.0, 15.0 / 16.0, 5.0 / 16.0])
            } else {
                cubic([k - 1, k, k + 1, k + 2], [-1.0 / 16.0, 9.0 / 16.0, 9.0 / 16.0, -1.0 / 16.0])
            }
        })
        .collect()
}

/// Integrates one z column over the full time grid, starting from the
/// stationary state of the first field sample.
pub fn solve_column(
    fields: &[Field],
    grid: &SimGrid,
    medium: &AtomicMedium,
    z_index: usize,
) -> Result<Vec<BlochState>, NumericError> {
    let mids = midpoints(fields);
    let mut atoms = Vec::with_capacity(fields.len());
    let mut state = stationary_state(medium, fields[0], grid.mode);
    atoms.push(state);
    for k in 0..fields.len() - 1 {
        state = step_atoms(
            &state,
            [fields[k], mids[k], fields[k + 1]],
            grid.dt,
            grid.mode,
            medium,
            (z_index, k + 1),
        )?;
        atoms.push(state);
    }
    Ok(atoms)
}

/// ∂z Ω^± = iη ρ̃_{e∓1} for every time sample.
pub fn field_derivative(atoms: &[BlochState], medium: &AtomicMedium) -> Vec<Field> {
    let i_eta = Complex64::new(0.0, medium.eta);
    atoms.iter().map(|a| (i_eta * a.coh_em1, i_eta * a.coh_e1)).collect()
}

/// Marches one z step with the Heun predictor/corrector and returns the
/// field column at z + Δz together with its atomic solution.
pub fn propagate_fields(
    fields: &[Field],
    atoms: &[BlochState],
    grid: &SimGrid,
    medium: &AtomicMedium,
    z_index: usize,
) -> Result<(Vec<Field>, Vec<BlochState>), NumericError> {
    let h = grid.z_step(medium);
    let d0 = field_derivative(atoms, medium);
    let predicted: Vec<Field> = fields
        .iter()
        .zip(&d0)
        .map(|(f, d)| (f.0 + d.0 * h, f.1 + d.1 * h))
        .collect();
    let atoms_p = solve_column(&predicted, grid, medium, z_index + 1)?;
    let d1 = field_derivative(&atoms_p, medium);
    let next: Vec<Field> = fields
        .iter()
        .zip(d0.iter().zip(&d1))
        .map(|(f, (a, b))| (f.0 + (a.0 + b.0) * (0.5 * h), f.1 + (a.1 + b.1) * (0.5 * h)))
        .collect();
    let atoms_next = solve_column(&next, grid, medium, z_index + 1)?;
    Ok((next, atoms_next))
}

fn amplitude(f: Field) -> f64 {
    (f.0.norm_sqr() + f.1.norm_sqr()).sqrt()
}

/// Signal part of the field and atomic response at one recorded z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSlice {
    pub z: f64,
    pub signal: Vec<QuadratureVector>,
    /// Drive amplitude |Ω_D(z, t)| of the reference run.
    pub drive: Vec<f64>,
    pub rho_delta: Vec<f64>,
    /// ρΣ of the signal run minus that of the reference run.
    pub rho_sigma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Record every `record_stride`-th z column (0 records none).
    pub record_stride: usize,
    pub normalization: Normalization,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_stride: 0,
            normalization: Normalization::Bare,
        }
    }
}

/// Entrance/exit traces of one storage sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTraces {
    pub dt: f64,
    pub drive_in: Vec<f64>,
    pub drive_out: Vec<f64>,
    pub signal_in: Vec<QuadratureVector>,
    pub signal_out: Vec<QuadratureVector>,
    /// First-order ρΔ at the exit (signal run minus reference run).
    pub rho_delta_out: Vec<f64>,
    pub populariton_out: Vec<f64>,
    pub slices: Vec<ZSlice>,
    /// Largest |trace − 1| over all grid points of both runs.
    pub max_trace_drift: f64,
    /// Number of grid points failing the population and Cauchy–Schwarz bounds.
    pub unphysical_points: usize,
}

impl RunTraces {
    pub fn times(&self) -> Vec<f64> {
        (0..self.drive_in.len()).map(|k| k as f64 * self.dt).collect()
    }
}

/// Tolerance for the positivity audit of stored states.
pub const PHYSICAL_TOL: f64 = 1e-9;

struct Audit {
    drift: f64,
    bad: usize,
}

impl Audit {
    fn scan(&mut self, atoms: &[BlochState]) {
        for a in atoms {
            let trace = a.pop_p1 + a.pop_m1 + a.pop_excited();
            self.drift = self.drift.max((trace - 1.0).abs());
            if !a.is_physical(PHYSICAL_TOL) {
                self.bad += 1;
            }
        }
    }
}

fn slice(z: f64, total: &[Field], reference: &[Field], atoms: &[BlochState], ref_atoms: &[BlochState]) -> ZSlice {
    ZSlice {
        z,
        signal: total
            .iter()
            .zip(reference)
            .map(|(t, r)| quadratures_from_fields(t.0 - r.0, t.1 - r.1))
            .collect(),
        drive: reference.iter().map(|&r| amplitude(r)).collect(),
        rho_delta: atoms.iter().map(|a| a.rho_delta()).collect(),
        rho_sigma: atoms
            .iter()
            .zip(ref_atoms)
            .map(|(a, r)| a.rho_sigma() - r.rho_sigma())
            .collect(),
    }
}

/// Runs the full write/store/retrieve sequence.
pub fn run_sequence(
    medium: &AtomicMedium,
    drive: &DriveProfile,
    signal: &SignalPulse,
    grid: &SimGrid,
    opts: &RunOptions,
) -> Result<RunTraces, NumericError> {
    medium.validate()?;
    drive.validate()?;
    grid.validate()?;
    let times: Vec<f64> = (0..grid.n_t).map(|k| grid.time(k)).collect();
    let reference_in: Vec<Field> = times.iter().map(|&t| drive.circular(t)).collect();
    let total_in: Vec<Field> = times
        .iter()
        .zip(&reference_in)
        .map(|(&t, d)| {
            let s = signal.circular(t);
            (d.0 + s.0, d.1 + s.1)
        })
        .collect();
    let peak = total_in.iter().map(|&f| amplitude(f)).fold(0.0, f64::max);
    grid.check_step(medium, peak)?;

    let mut audit = Audit { drift: 0.0, bad: 0 };
    let h = grid.z_step(medium);
    let (mut ref_f, mut tot_f) = (reference_in.clone(), total_in.clone());
    let (ra, ta) = rayon::join(
        || solve_column(&ref_f, grid, medium, 0),
        || solve_column(&tot_f, grid, medium, 0),
    );
    let (mut ref_a, mut tot_a) = (ra?, ta?);
    let mut slices = Vec::new();
    for iz in 0..grid.n_z {
        audit.scan(&ref_a);
        audit.scan(&tot_a);
        if opts.record_stride > 0 && (iz % opts.record_stride == 0 || iz == grid.n_z - 1) {
            slices.push(slice(iz as f64 * h, &tot_f, &ref_f, &tot_a, &ref_a));
        }
        if iz + 1 == grid.n_z {
            break;
        }
        let (r, t) = rayon::join(
            || propagate_fields(&ref_f, &ref_a, grid, medium, iz),
            || propagate_fields(&tot_f, &tot_a, grid, medium, iz),
        );
        (ref_f, ref_a) = r?;
        (tot_f, tot_a) = t?;
    }

    let signal_in: Vec<QuadratureVector> = times.iter().map(|&t| signal.quadratures(t)).collect();
    let signal_out: Vec<QuadratureVector> = tot_f
        .iter()
        .zip(&ref_f)
        .map(|(t, r)| quadratures_from_fields(t.0 - r.0, t.1 - r.1))
        .collect();
    let drive_out: Vec<f64> = ref_f.iter().map(|&f| amplitude(f)).collect();
    let rho_delta_out: Vec<f64> = tot_a
        .iter()
        .zip(&ref_a)
        .map(|(t, r)| t.rho_delta() - r.rho_delta())
        .collect();
    let populariton_out = drive_out
        .iter()
        .zip(signal_out.iter().zip(&rho_delta_out))
        .map(|(&d, (q, &rho))| {
            let s = saturation(medium, d);
            compose(
                medium,
                q.q_perp,
                rho,
                mixing_angle(medium, d),
                s,
                opts.normalization,
                Mode::Antisymmetric,
            )
        })
        .collect();
    Ok(RunTraces {
        dt: grid.dt,
        drive_in: reference_in.iter().map(|&f| amplitude(f)).collect(),
        drive_out,
        signal_in,
        signal_out,
        rho_delta_out,
        populariton_out,
        slices,
        max_trace_drift: audit.drift,
        unphysical_points: audit.bad,
    })
}

/// How trace amplitudes are scaled in the CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceNormalization {
    /// Rabi frequencies in units of Γ0, populations as is.
    #[default]
    Raw,
    /// Each column divided by its own peak magnitude.
    Peak,
}

pub const TRACE_HEADER: &str =
    "t_us,drive_in,drive_out,signal_in_abs,signal_out_abs,rho_delta_out,populariton_out";

pub fn write_traces_csv<W: Write>(
    traces: &RunTraces,
    units: &UnitSystem,
    normalization: TraceNormalization,
    mut out: W,
) -> std::io::Result<()> {
    let signal_in: Vec<f64> = traces.signal_in.iter().map(|q| q.norm_sqr().sqrt()).collect();
    let signal_out: Vec<f64> = traces.signal_out.iter().map(|q| q.norm_sqr().sqrt()).collect();
    let mut cols = [
        traces.drive_in.clone(),
        traces.drive_out.clone(),
        signal_in,
        signal_out,
        traces.rho_delta_out.clone(),
        traces.populariton_out.clone(),
    ];
    if normalization == TraceNormalization::Peak {
        for c in cols.iter_mut() {
            let peak = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak > 0.0 {
                c.iter_mut().for_each(|v| *v /= peak);
            }
        }
    }
    writeln!(out, "{TRACE_HEADER}")?;
    for k in 0..traces.drive_in.len() {
        write!(out, "{}", units.time_to_us(k as f64 * traces.dt))?;
        for c in &cols {
            write!(out, ",{}", c[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
