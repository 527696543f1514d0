//! State propagation, trace-distance curves, reset-time extraction, and the
//! speedup/robustness metrics built on them.
//!
//! Three propagation backends with increasing generality:
//! spectral (fast, needs a non-defective decomposition), matrix exponential
//! (always available), and a fixed-step RK4 integrator for time-dependent
//! generators. The reset time uses last-crossing semantics: the earliest
//! time after which the curve stays below epsilon, which handles the damped
//! oscillations of non-Markovian curves and reduces to the first crossing on
//! monotone ones.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};
use crate::liouvillian::{SpectralDecomposition, Superoperator, ZERO_EIGENVALUE_TOL};
use crate::models::TimeDependentGenerator;
use crate::protocol::{apply_gate, AncillaState, ControlledGate};
use crate::state::{
    devectorize, partial_trace_matrix, trace_distance_matrix, vectorize_matrix, DensityMatrix,
};

/// A sampled trace-distance-to-target curve.
#[derive(Debug, Clone)]
pub struct TraceDistanceCurve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Free-form description of model and initial state.
    pub label: String,
}

impl TraceDistanceCurve {
    pub fn new(times: Vec<f64>, values: Vec<f64>, label: String) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "times and values lengths differ".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(
                "times must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "distance values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self {
            times,
            values,
            label,
        })
    }
}

/// One speedup measurement: reset times with and without the gate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SpeedupRecord {
    pub t_plain: f64,
    pub t_gated: f64,
    pub speedup: f64,
    pub epsilon: f64,
    /// Magnitude of the slowest-mode-group overlap before the gate.
    pub overlap_l2_before: f64,
    /// The same overlap after the gate.
    pub overlap_l2_after: f64,
    /// Finite-epsilon analytic estimate from the mode amplitudes.
    pub estimate: f64,
}

/// Expansion coefficients of vec(rho0) in the eigenbasis, c_k = <<l_k|rho0>>.
pub fn mode_coefficients(dec: &SpectralDecomposition, rho0: &DensityMatrix) -> Result<Vec<C64>> {
    if rho0.dim() != dec.d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs decomposition {}",
            rho0.dim(),
            dec.d
        )));
    }
    let v = vectorize_matrix(rho0.matrix());
    Ok(dec
        .left_vectors
        .iter()
        .map(|l| l.vec.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum())
        .collect())
}

/// Spectral propagation: rho(t) = sum_k e^{lambda_k t} c_k r_k.
pub fn propagate(
    dec: &SpectralDecomposition,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    if dec.defective {
        return Err(Error::DefectiveDecomposition);
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter("t must be nonnegative".into()));
    }
    let coeffs = mode_coefficients(dec, rho0)?;
    let n = dec.d * dec.d;
    let mut out: CVec = ndarray::Array1::zeros(n);
    for (k, c) in coeffs.iter().enumerate() {
        let w = c * (dec.eigenvalues[k] * t).exp();
        if w.norm() == 0.0 {
            continue;
        }
        out.zip_mut_with(&dec.right_vectors[k].vec, |o, &r| *o += w * r);
    }
    DensityMatrix::from_propagation(devectorize(&out, dec.d)?, rho0.dims().to_vec(), 1e-9)
}

/// Exponential propagation: rho(t) = unvec(e^{L t} vec(rho0)).
pub fn propagate_expm(l: &Superoperator, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if rho0.dim() != l.d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs superoperator {}",
            rho0.dim(),
            l.d
        )));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter("t must be nonnegative".into()));
    }
    let prop = linalg::matrix_exponential(&l.mat.mapv(|z| z * t));
    let out = prop.dot(&vectorize_matrix(rho0.matrix()));
    DensityMatrix::from_propagation(devectorize(&out, l.d)?, rho0.dims().to_vec(), 1e-9)
}

fn rk4_run(gen: &TimeDependentGenerator, v0: &CVec, t_grid: &[f64], h: f64) -> Vec<CVec> {
    let mut out = Vec::with_capacity(t_grid.len());
    let mut v = v0.clone();
    let mut t = 0.0;
    let step = |v: &CVec, t: f64, h: f64| -> CVec {
        let k1 = gen.at(t).mat.dot(v);
        let k2 = gen.at(t + h / 2.0).mat.dot(&(v + &k1.mapv(|z| z * (h / 2.0))));
        let k3 = gen.at(t + h / 2.0).mat.dot(&(v + &k2.mapv(|z| z * (h / 2.0))));
        let k4 = gen.at(t + h).mat.dot(&(v + &k3.mapv(|z| z * h)));
        v + &(k1 + k2.mapv(|z| z * 2.0) + k3.mapv(|z| z * 2.0) + k4).mapv(|z| z * (h / 6.0))
    };
    for &target in t_grid {
        while t < target - 1e-15 {
            let dt = h.min(target - t);
            v = step(&v, t, dt);
            t += dt;
        }
        out.push(v.clone());
    }
    out
}

/// Fixed-step RK4 integration of a time-dependent generator, sampled on
/// `t_grid` (increasing from >= 0). The step obeys both the dissipative and
/// the oscillatory scale; a step-halving self-check at the final sample must
/// agree to 1e-8 or the call fails.
pub fn propagate_time_dependent(
    gen: &TimeDependentGenerator,
    rho0: &DensityMatrix,
    t_grid: &[f64],
) -> Result<Vec<DensityMatrix>> {
    if rho0.dim() != gen.d {
        return Err(Error::DimensionMismatch(format!(
            "state dimension {} vs generator {}",
            rho0.dim(),
            gen.d
        )));
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "t_grid must be increasing and nonnegative".into(),
        ));
    }
    let h_rate = 1e-3 / gen.max_rate;
    let h_freq = if gen.max_frequency > 0.0 {
        std::f64::consts::TAU / (40.0 * gen.max_frequency)
    } else {
        f64::INFINITY
    };
    let h = h_rate.min(h_freq);

    let v0 = vectorize_matrix(rho0.matrix());
    let coarse = rk4_run(gen, &v0, t_grid, h);
    let t_end = [*t_grid.last().unwrap()];
    let fine_end = rk4_run(gen, &v0, &t_end, h / 2.0);
    let deviation = coarse
        .last()
        .unwrap()
        .iter()
        .zip(fine_end[0].iter())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if deviation >= 1e-8 {
        return Err(Error::StepCheckFailed { deviation });
    }
    coarse
        .into_iter()
        .map(|v| {
            DensityMatrix::from_propagation(devectorize(&v, gen.d)?, rho0.dims().to_vec(), 1e-7)
        })
        .collect()
}

/// Whether the distance is measured on the full state or a reduced one.
#[derive(Debug, Clone)]
pub enum DistanceScope {
    Joint,
    /// Partial-trace onto `keep` of a state with tensor factors `dims`.
    Marginal { dims: Vec<usize>, keep: Vec<usize> },
}

/// Evaluates D(rho(t), target) cheaply at arbitrary t by precompressing the
/// decaying eigenmodes (optionally partial-traced) once per initial state.
pub struct DistanceEvaluator {
    rates: Vec<C64>,
    weights: Vec<C64>,
    mats: Vec<CMat>,
    dim: usize,
}

impl DistanceEvaluator {
    /// `target` must share the steady state's stationary coefficient (for
    /// reset problems it is the steady state itself, so only decaying modes
    /// contribute to the difference).
    pub fn new(
        dec: &SpectralDecomposition,
        rho0: &DensityMatrix,
        target: &DensityMatrix,
        scope: &DistanceScope,
    ) -> Result<Self> {
        if dec.defective {
            return Err(Error::DefectiveDecomposition);
        }
        let c0 = mode_coefficients(dec, rho0)?;
        let ct = mode_coefficients(dec, target)?;
        let mut rates = Vec::new();
        let mut weights = Vec::new();
        let mut mats = Vec::new();
        let mut dim = 0;
        for k in 0..c0.len() {
            let w = c0[k] - ct[k];
            if w.norm() < 1e-15 {
                continue;
            }
            let full = devectorize(&dec.right_vectors[k].vec, dec.d)?;
            let m = match scope {
                DistanceScope::Joint => full,
                DistanceScope::Marginal { dims, keep } => {
                    partial_trace_matrix(&full, dims, keep)?
                }
            };
            dim = m.nrows();
            rates.push(dec.eigenvalues[k]);
            weights.push(w);
            mats.push(m);
        }
        Ok(Self {
            rates,
            weights,
            mats,
            dim,
        })
    }

    /// Trace distance at time t.
    pub fn distance(&self, t: f64) -> Result<f64> {
        if self.mats.is_empty() {
            return Ok(0.0);
        }
        let mut diff: CMat = ndarray::Array2::zeros((self.dim, self.dim));
        for ((lam, w), m) in self.rates.iter().zip(&self.weights).zip(&self.mats) {
            let f = w * (lam * t).exp();
            diff.zip_mut_with(m, |o, &x| *o += f * x);
        }
        // Conjugate eigenmode pairs make this Hermitian up to roundoff.
        let herm = (&diff + &linalg::dagger(&diff)).mapv(|z| z * 0.5);
        trace_distance_matrix(&herm)
    }

    /// Slowest decay rate present with nonnegligible weight.
    pub fn slowest_rate(&self) -> Option<f64> {
        self.rates
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| w.norm() > 1e-13)
            .map(|(l, _)| l.re.abs())
            .filter(|r| *r > ZERO_EIGENVALUE_TOL)
            .min_by(f64::total_cmp)
    }
}

/// Crossing semantics for reset-time extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrossingMode {
    /// Earliest time after which every sample is below epsilon (default).
    Last,
    /// First sample-to-sample downward crossing (diagnostic).
    First,
}

fn interpolate_crossing(t0: f64, v0: f64, t1: f64, v1: f64, eps: f64) -> f64 {
    // Log-linear in value: exact for exponential decay between samples.
    let floor = 1e-300;
    let (lv0, lv1, le) = (v0.max(floor).ln(), v1.max(floor).ln(), eps.ln());
    if (lv1 - lv0).abs() < 1e-300 {
        return t1;
    }
    t0 + (t1 - t0) * (le - lv0) / (lv1 - lv0)
}

/// Reset time of a sampled curve: smallest t* with D(t) < epsilon for all
/// sampled t >= t* (see CrossingMode for the diagnostic alternative).
pub fn reset_time_with_mode(
    curve: &TraceDistanceCurve,
    epsilon: f64,
    mode: CrossingMode,
) -> Result<f64> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidParameter("epsilon must be positive".into()));
    }
    let (t, v) = (&curve.times, &curve.values);
    if *v.last().unwrap() >= epsilon {
        return Err(Error::CurveNeverSettles {
            final_value: *v.last().unwrap(),
        });
    }
    let crossing_index = match mode {
        CrossingMode::Last => v.iter().rposition(|&x| x >= epsilon),
        CrossingMode::First => v.iter().position(|&x| x < epsilon).map(|i| i.wrapping_sub(1)),
    };
    match crossing_index {
        None | Some(usize::MAX) => Ok(t[0]),
        Some(i) => Ok(interpolate_crossing(t[i], v[i], t[i + 1], v[i + 1], epsilon)),
    }
}

pub fn reset_time(curve: &TraceDistanceCurve, epsilon: f64) -> Result<f64> {
    reset_time_with_mode(curve, epsilon, CrossingMode::Last)
}

/// Exponential envelope fit over the curve's local maxima: least-squares
/// amplitude and decay rate of a * exp(-r t) through the peaks (all positive
/// samples if the curve is monotone). Diagnostic companion to the direct
/// crossing-based reset time.
pub fn envelope_fit(curve: &TraceDistanceCurve) -> Result<(f64, f64)> {
    let (t, v) = (&curve.times, &curve.values);
    let n = v.len();
    let mut peaks: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| v[i] > 0.0 && v[i] >= v[i - 1] && v[i] >= v[i + 1])
        .collect();
    if peaks.len() < 2 {
        peaks = (0..n).filter(|&i| v[i] > 0.0).collect();
    }
    if peaks.len() < 2 {
        return Err(Error::InvalidParameter(
            "envelope fit needs at least two positive samples".into(),
        ));
    }
    // Least squares of ln v = ln a - r t over the peak set.
    let m = peaks.len() as f64;
    let (mut st, mut sy, mut stt, mut sty) = (0.0, 0.0, 0.0, 0.0);
    for &i in &peaks {
        let (x, y) = (t[i], v[i].ln());
        st += x;
        sy += y;
        stt += x * x;
        sty += x * y;
    }
    let denom = m * stt - st * st;
    if denom.abs() < 1e-300 {
        return Err(Error::VanishingDenominator("envelope fit"));
    }
    let slope = (m * sty - st * sy) / denom;
    let intercept = (sy - slope * st) / m;
    Ok((intercept.exp(), -slope))
}

/// Logarithmically spaced grid, endpoints included.
pub fn log_grid(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && n >= 2);
    let (a, b) = (t_min.ln(), t_max.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Reset time straight from a distance evaluator: coarse scan on `grid`,
/// then local refinement of the last crossing on a dense linear sub-grid.
pub fn reset_time_from_evaluator(
    eval: &DistanceEvaluator,
    grid: &[f64],
    epsilon: f64,
) -> Result<f64> {
    let values: Vec<f64> = grid.iter().map(|&t| eval.distance(t)).collect::<Result<_>>()?;
    let last = values
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty time grid".into()))?;
    if *last >= epsilon {
        return Err(Error::CurveNeverSettles { final_value: *last });
    }
    let Some(i) = values.iter().rposition(|&x| x >= epsilon) else {
        return Ok(grid[0]);
    };
    // Refine within [t_i, t_{i+1}] on a dense linear grid; the envelope may
    // oscillate within the bracket, so search for the last crossing again.
    let (mut t0, mut t1) = (grid[i], grid[i + 1]);
    let (mut v0, mut v1) = (values[i], values[i + 1]);
    for _ in 0..3 {
        let n = 32;
        let ts: Vec<f64> = (0..=n)
            .map(|k| t0 + (t1 - t0) * k as f64 / n as f64)
            .collect();
        let vs: Vec<f64> = ts.iter().map(|&t| eval.distance(t)).collect::<Result<_>>()?;
        let Some(j) = vs.iter().rposition(|&x| x >= epsilon) else {
            break;
        };
        if j + 1 > n {
            break;
        }
        (t0, t1, v0, v1) = (ts[j], ts[j + 1], vs[j], vs[j + 1]);
    }
    Ok(interpolate_crossing(t0, v0, t1, v1, epsilon))
}

/// Options for a speedup measurement.
#[derive(Debug, Clone)]
pub struct SpeedupOptions {
    pub epsilon: f64,
    /// Coarse scan grid (log-spaced recommended).
    pub grid: Vec<f64>,
    pub scope: DistanceScope,
}

impl SpeedupOptions {
    pub fn markovian(epsilon: f64) -> Self {
        // Reach far enough for epsilon down to ~1e-7 at unit rates.
        Self {
            epsilon,
            grid: log_grid(1e-3, 60.0, 1200),
            scope: DistanceScope::Joint,
        }
    }
}

/// Overlap magnitude of a state with the slowest decaying eigenvalue group
/// (l2 norm over the group's left-eigenvector coefficients).
pub fn slow_mode_overlap(dec: &SpectralDecomposition, rho: &DensityMatrix) -> Result<f64> {
    let coeffs = mode_coefficients(dec, rho)?;
    let group = dec.slow_group(1e-9);
    Ok(group
        .iter()
        .map(|&k| coeffs[k].norm_sqr())
        .sum::<f64>()
        .sqrt())
}

/// Amplitude-aware finite-epsilon speedup estimate,
/// (r3/r2) * (ln eps - ln a2) / (ln eps - ln a3), where a2 and a3 are the
/// slow-group amplitudes of the plain and gated states.
fn finite_epsilon_estimate(
    dec: &SpectralDecomposition,
    plain: &DensityMatrix,
    gated: &DensityMatrix,
    epsilon: f64,
) -> Result<f64> {
    let rates = dec.distinct_decay_rates(1e-9);
    let (Some(&r2), Some(&r3)) = (rates.get(1), rates.get(2)) else {
        return Err(Error::NoDecay);
    };
    let coeffs_plain = mode_coefficients(dec, plain)?;
    let coeffs_gated = mode_coefficients(dec, gated)?;
    let group_amp = |coeffs: &[C64], rate: f64| -> f64 {
        dec.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.norm() >= ZERO_EIGENVALUE_TOL && (l.re.abs() - rate).abs() <= 1e-9)
            .map(|(k, _)| coeffs[k].norm_sqr())
            .sum::<f64>()
            .sqrt()
    };
    let a2 = group_amp(&coeffs_plain, r2);
    let a3 = group_amp(&coeffs_gated, r3);
    if a2 < 1e-14 || a3 < 1e-14 {
        return Err(Error::VanishingDenominator("finite_epsilon_estimate"));
    }
    let num = epsilon.ln() - a2.ln();
    let den = epsilon.ln() - a3.ln();
    if den.abs() < 1e-14 {
        return Err(Error::VanishingDenominator("finite_epsilon_estimate"));
    }
    Ok((r3 / r2) * num / den)
}

/// Full speedup measurement from prepared joint initial states: reset time
/// of `plain` over reset time of `gated`, both measured to the steady state.
pub fn speedup_from_states(
    dec: &SpectralDecomposition,
    plain: &DensityMatrix,
    gated: &DensityMatrix,
    opts: &SpeedupOptions,
) -> Result<SpeedupRecord> {
    let target = crate::liouvillian::steady_state(dec)?;
    let eval_plain = DistanceEvaluator::new(dec, plain, &target, &opts.scope)?;
    let eval_gated = DistanceEvaluator::new(dec, gated, &target, &opts.scope)?;
    let t_plain = reset_time_from_evaluator(&eval_plain, &opts.grid, opts.epsilon)?;
    let t_gated = reset_time_from_evaluator(&eval_gated, &opts.grid, opts.epsilon)?;
    if t_gated <= 0.0 {
        return Err(Error::VanishingDenominator("speedup"));
    }
    let estimate = finite_epsilon_estimate(dec, plain, gated, opts.epsilon).unwrap_or(f64::NAN);
    Ok(SpeedupRecord {
        t_plain,
        t_gated,
        speedup: t_plain / t_gated,
        epsilon: opts.epsilon,
        overlap_l2_before: slow_mode_overlap(dec, plain)?,
        overlap_l2_after: slow_mode_overlap(dec, gated)?,
        estimate,
    })
}

/// Speedup for a system qubit + diagonal-ancilla protocol on a two-qubit
/// model: the plain run uses rho1 (x) rho2, the gated run applies the
/// entangling gate at t = 0+.
pub fn speedup(
    dec: &SpectralDecomposition,
    rho1: &DensityMatrix,
    ancilla: &AncillaState,
    gate: &ControlledGate,
    opts: &SpeedupOptions,
) -> Result<SpeedupRecord> {
    let joint = rho1.tensor(&ancilla.density()?);
    let gated = apply_gate(gate, &joint)?;
    speedup_from_states(dec, &joint, &gated, opts)
}

/// Control-robustness ratio R = t(eps, exactly gated) / t(eps, perturbed
/// gate), averaged over `n_states` Haar-random system states.
pub fn robustness(
    dec: &SpectralDecomposition,
    ancilla: &AncillaState,
    exact: &ControlledGate,
    perturbed: &ControlledGate,
    epsilon: f64,
    grid: &[f64],
    scope: &DistanceScope,
    n_states: u64,
    seed: u64,
) -> Result<f64> {
    let target = crate::liouvillian::steady_state(dec)?;
    let mut acc = 0.0;
    for k in 0..n_states {
        let (rho1, _, _) = crate::haar::haar_state(seed, k);
        let joint = rho1.tensor(&ancilla.density()?);
        let state_exact = apply_gate(exact, &joint)?;
        let state_err = apply_gate(perturbed, &joint)?;
        let t_exact = reset_time_from_evaluator(
            &DistanceEvaluator::new(dec, &state_exact, &target, scope)?,
            grid,
            epsilon,
        )?;
        let t_err = reset_time_from_evaluator(
            &DistanceEvaluator::new(dec, &state_err, &target, scope)?,
            grid,
            epsilon,
        )?;
        if t_err <= 0.0 {
            return Err(Error::VanishingDenominator("robustness"));
        }
        acc += t_exact / t_err;
    }
    Ok(acc / n_states as f64)
}
