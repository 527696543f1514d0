//! Concrete noise models: Davies maps with dephasing, finite-temperature
//! variants, the qubit-TLS embedding of non-Markovian phase noise, its
//! time-local (Redfield) reduction, and the associated closed-form
//! predictions for decay rates and reset speedups.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{kron_all, CMat};
use crate::liouvillian::{JumpTerm, LindbladSpec};
use crate::state::qubit::{identity, sigma_minus, sigma_plus, sigma_x, sigma_z};
use crate::state::DensityMatrix;

/// Zero-temperature amplitude damping plus pure dephasing on each qubit.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MarkovParams {
    pub omega_q: f64,
    pub gamma1: f64,
    pub gamma_phi: f64,
}

impl MarkovParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma1 < 0.0 || self.gamma_phi < 0.0 {
            return Err(Error::InvalidParameter("negative rate".into()));
        }
        Ok(())
    }

    /// Decay rate of single-qubit coherences, 1/T2 = Gamma_1/2 + Gamma_phi.
    pub fn t2_rate(&self) -> f64 {
        self.gamma1 / 2.0 + self.gamma_phi
    }
}

/// Finite-temperature damping with detailed-balanced up/down rates.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct ThermalParams {
    pub omega: f64,
    /// Bare coupling; downward rate is gamma*(nbar+1), upward gamma*nbar.
    pub gamma: f64,
    pub nbar: f64,
    pub gamma_phi: f64,
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if self.gamma < 0.0 || self.nbar < 0.0 || self.gamma_phi < 0.0 {
            return Err(Error::InvalidParameter("negative rate".into()));
        }
        Ok(())
    }
}

/// Qubit coupled to a damped two-level system through sigma_z (x) sigma_x.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingParams {
    pub omega_q: f64,
    pub omega_t: f64,
    pub nu_zx: f64,
    pub gamma1: f64,
    pub gamma_phi: f64,
    pub kappa: f64,
}

impl EmbeddingParams {
    pub fn validate(&self) -> Result<()> {
        if self.nu_zx < 0.0 || self.gamma1 < 0.0 || self.gamma_phi < 0.0 || self.kappa < 0.0 {
            return Err(Error::InvalidParameter("negative rate".into()));
        }
        Ok(())
    }

    /// Markovian part seen by the qubit alone.
    pub fn markov(&self) -> MarkovParams {
        MarkovParams {
            omega_q: self.omega_q,
            gamma1: self.gamma1,
            gamma_phi: self.gamma_phi,
        }
    }
}

/// Embed `op` on subsystem `which` of `n` qubits (or qubit-like sites).
fn on_site(op: &CMat, which: usize, n: usize) -> CMat {
    let eye = identity(2);
    let factors: Vec<&CMat> = (0..n).map(|k| if k == which { op } else { &eye }).collect();
    kron_all(&factors)
}

/// Two independent qubits, each with energy splitting omega_q, amplitude
/// damping Gamma_1 and pure dephasing Gamma_phi.
pub fn two_qubit_markovian(p: &MarkovParams) -> Result<LindbladSpec> {
    p.validate()?;
    let sz = sigma_z();
    let h = on_site(&sz, 0, 2).mapv(|z| z * p.omega_q) + on_site(&sz, 1, 2).mapv(|z| z * p.omega_q);
    let mut jumps = Vec::new();
    for q in 0..2 {
        jumps.push(JumpTerm::new(on_site(&sigma_minus(), q, 2), p.gamma1)?);
        jumps.push(JumpTerm::new(on_site(&sz, q, 2), p.gamma_phi / 2.0)?);
    }
    LindbladSpec::new(h, jumps, vec![2, 2])
}

/// Finite-temperature version: per-qubit jumps sigma_- at gamma(nbar+1),
/// sigma_+ at gamma*nbar, sigma_z at Gamma_phi/2.
pub fn two_qubit_thermal(p: &ThermalParams) -> Result<LindbladSpec> {
    p.validate()?;
    let sz = sigma_z();
    let h = on_site(&sz, 0, 2).mapv(|z| z * p.omega) + on_site(&sz, 1, 2).mapv(|z| z * p.omega);
    let mut jumps = Vec::new();
    for q in 0..2 {
        jumps.push(JumpTerm::new(
            on_site(&sigma_minus(), q, 2),
            p.gamma * (p.nbar + 1.0),
        )?);
        jumps.push(JumpTerm::new(on_site(&sigma_plus(), q, 2), p.gamma * p.nbar)?);
        jumps.push(JumpTerm::new(on_site(&sz, q, 2), p.gamma_phi / 2.0)?);
    }
    LindbladSpec::new(h, jumps, vec![2, 2])
}

/// Asymptotic reset speedup at finite temperature,
/// 2(2nbar+1) / [(2nbar+1) + 2*Gamma_phi/gamma]; bounded above by 2.
pub fn thermal_speedup(p: &ThermalParams) -> Result<f64> {
    p.validate()?;
    if p.gamma == 0.0 {
        return Err(Error::InvalidParameter(
            "thermal speedup undefined for gamma = 0".into(),
        ));
    }
    let n2 = 2.0 * p.nbar + 1.0;
    Ok(2.0 * n2 / (n2 + 2.0 * p.gamma_phi / p.gamma))
}

/// Qubit(s) coupled to individually damped TLSs. For `n_qubits = 2` the
/// subsystem order is (q1, q2, TLS1, TLS2), dims [2,2,2,2].
pub fn embedding_model(p: &EmbeddingParams, n_qubits: usize) -> Result<LindbladSpec> {
    p.validate()?;
    if !(n_qubits == 1 || n_qubits == 2) {
        return Err(Error::InvalidParameter(format!(
            "embedding model supports 1 or 2 qubits, got {n_qubits}"
        )));
    }
    let n = 2 * n_qubits;
    let (sz, sx, sm) = (sigma_z(), sigma_x(), sigma_minus());
    let mut h: CMat = Array2::zeros((1 << n, 1 << n));
    let mut jumps = Vec::new();
    for q in 0..n_qubits {
        let tls = n_qubits + q;
        h = h + on_site(&sz, q, n).mapv(|z| z * p.omega_q)
            + on_site(&sz, tls, n).mapv(|z| z * p.omega_t)
            + on_site(&sz, q, n).dot(&on_site(&sx, tls, n)).mapv(|z| z * p.nu_zx);
        jumps.push(JumpTerm::new(on_site(&sm, q, n), p.gamma1)?);
        jumps.push(JumpTerm::new(on_site(&sz, q, n), p.gamma_phi / 2.0)?);
        jumps.push(JumpTerm::new(on_site(&sm, tls, n), p.kappa)?);
    }
    LindbladSpec::new(h, jumps, vec![2; n])
}

/// The reduced qubit dynamics shows damped oscillations (underdamped TLS
/// backaction) exactly when 4 nu_zx^2 > kappa^2 / 16.
pub fn is_non_markovian(p: &EmbeddingParams) -> bool {
    4.0 * p.nu_zx * p.nu_zx > p.kappa * p.kappa / 16.0
}

/// Instantaneous dephasing rate of the time-local reduced qubit generator:
/// Gamma_phi/2 plus the TLS-induced transient.
pub fn redfield_dephasing_rate(t: f64, p: &EmbeddingParams) -> f64 {
    let (k, w) = (p.kappa, p.omega_t);
    let denom = k * k / 4.0 + 4.0 * w * w;
    let bracket = -k * (-k * t).exp()
        + (-k * t / 2.0).exp() * (k * (2.0 * w * t).cos() + 4.0 * w * (2.0 * w * t).sin());
    p.gamma_phi / 2.0 + p.nu_zx * p.nu_zx / denom * bracket
}

/// A time-dependent single-qubit generator: the matrix at time `t` together
/// with the highest angular frequency it contains (for integrator step
/// selection).
pub struct TimeDependentGenerator {
    build: Box<dyn Fn(f64) -> crate::liouvillian::Superoperator + Send + Sync>,
    pub max_frequency: f64,
    /// Fastest dissipative rate, used for integrator step selection.
    pub max_rate: f64,
    pub d: usize,
}

impl TimeDependentGenerator {
    pub fn new(
        build: Box<dyn Fn(f64) -> crate::liouvillian::Superoperator + Send + Sync>,
        max_frequency: f64,
        max_rate: f64,
        d: usize,
    ) -> Self {
        Self {
            build,
            max_frequency,
            max_rate,
            d,
        }
    }

    pub fn at(&self, t: f64) -> crate::liouvillian::Superoperator {
        (self.build)(t)
    }
}

/// Time-local reduced generator of the qubit in the embedding model.
pub fn redfield_generator(p: &EmbeddingParams) -> Result<TimeDependentGenerator> {
    p.validate()?;
    let p = *p;
    let build = move |t: f64| {
        let rate = redfield_dephasing_rate(t, &p);
        // A negative transient rate is the non-Markovian signature; the
        // builder requires rates >= 0, so assemble the generator directly.
        let spec = LindbladSpec::new(
            sigma_z().mapv(|z| z * p.omega_q),
            vec![JumpTerm::new(sigma_minus(), p.gamma1).expect("gamma1 >= 0")],
            vec![2],
        )
        .expect("well-formed single-qubit spec");
        let mut sup = crate::liouvillian::build_liouvillian(&spec);
        let dephasing = crate::liouvillian::build_liouvillian(
            &LindbladSpec::new(Array2::zeros((2, 2)), vec![JumpTerm::new(sigma_z(), 1.0).unwrap()], vec![2])
                .unwrap(),
        );
        sup.mat = sup.mat + dephasing.mat.mapv(|z| z * rate);
        sup
    };
    Ok(TimeDependentGenerator {
        build: Box::new(build),
        max_frequency: (2.0 * p.omega_t).abs().max((2.0 * p.omega_q).abs()).max(p.kappa),
        max_rate: p.gamma1.max(p.gamma_phi).max(p.kappa).max(1e-12),
        d: 2,
    })
}

/// Instantaneous reset speedup of the time-local reduced generator.
pub fn redfield_speedup(t: f64, p: &EmbeddingParams) -> Result<f64> {
    p.validate()?;
    if t < 0.0 {
        return Err(Error::InvalidParameter("t must be nonnegative".into()));
    }
    let (k, w, nu) = (p.kappa, p.omega_t, p.nu_zx);
    let c = k * k + 16.0 * w * w;
    let num = (2.0 * p.gamma1 * c).abs();
    let den = -(p.gamma1 + 2.0 * p.gamma_phi) * c
        + 16.0 * nu * nu
            * (-k * t / 2.0).exp()
            * (k * ((-k * t / 2.0).exp() - (2.0 * w * t).cos()) - 4.0 * w * (2.0 * w * t).sin());
    if den.abs() < 1e-14 {
        return Err(Error::VanishingDenominator("redfield_speedup"));
    }
    Ok(num / den.abs())
}

/// Asymptotic embedding speedup: the fourth-order small-parameter expansion
/// and its leading simplification (T2/T1)/(1 + kappa*T2/2).
#[derive(Debug, Clone, Copy)]
pub struct EmbeddingSpeedup {
    pub fourth_order: f64,
    pub simplified: f64,
}

pub fn embedding_speedup(p: &EmbeddingParams) -> Result<EmbeddingSpeedup> {
    p.validate()?;
    if p.omega_t == 0.0 {
        return Err(Error::InvalidParameter(
            "embedding speedup requires omega_t != 0".into(),
        ));
    }
    let (k, w, nu) = (p.kappa, p.omega_t, p.nu_zx);
    let (n2, n4) = (nu * nu, nu.powi(4));
    let (w2, w4, w6) = (w * w, w.powi(4), w.powi(6));
    let den4 = k.powi(3) * n4 / (8.0 * w6) - k * n2 * (k * k + 16.0 * n2) / (32.0 * w4)
        + k * n2 / (2.0 * w2)
        - (p.gamma1 + 2.0 * p.gamma_phi + k);
    if den4.abs() < 1e-14 {
        return Err(Error::VanishingDenominator("embedding_speedup"));
    }
    let fourth_order = (2.0 * p.gamma1).abs() / den4.abs();

    let t2 = 1.0 / (p.gamma1 / 2.0 + p.gamma_phi);
    let t2_over_t1 = p.gamma1 * t2;
    let simple_den = 1.0 + k * t2 / 2.0;
    if simple_den.abs() < 1e-14 {
        return Err(Error::VanishingDenominator("embedding_speedup"));
    }
    Ok(EmbeddingSpeedup {
        fourth_order,
        simplified: t2_over_t1 / simple_den,
    })
}

/// Coherence decay factor of the analytic reduced-qubit solution.
pub fn redfield_lambda(t: f64, p: &EmbeddingParams, delta: f64) -> C64 {
    let (k, w, nu) = (p.kappa, p.omega_t, p.nu_zx);
    let n2 = nu * nu;
    let c = k * k + 16.0 * w * w;
    let linear = C64::new(p.gamma1 + 2.0 * p.gamma_phi, 4.0 * w - 4.0 * delta) * t;
    let numer = C64::new(
        16.0 * (1.0 + (-k * t).exp()) * n2 - 32.0 * (-k * t / 2.0).exp() * n2 * (2.0 * w * t).cos(),
        0.0,
    ) + linear * c;
    (-numer / (2.0 * c)).exp()
}

/// Closed-form single-qubit state under the embedding-induced dephasing:
/// populations relax at Gamma_1, the coherence is multiplied by Lambda(t).
pub fn analytic_redfield_state(
    t: f64,
    rho0: &DensityMatrix,
    p: &EmbeddingParams,
    delta: f64,
) -> Result<DensityMatrix> {
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch("expected a single qubit".into()));
    }
    if t < 0.0 {
        return Err(Error::InvalidParameter("t must be nonnegative".into()));
    }
    let m = rho0.matrix();
    let decay = (-p.gamma1 * t).exp();
    let lam = redfield_lambda(t, p, delta);
    let mut out: CMat = Array2::zeros((2, 2));
    out[[0, 0]] = m[[0, 0]] + m[[1, 1]] * (1.0 - decay);
    out[[1, 1]] = m[[1, 1]] * decay;
    out[[0, 1]] = lam * m[[0, 1]];
    out[[1, 0]] = out[[0, 1]].conj();
    DensityMatrix::from_propagation(out, vec![2], 1e-12)
}

/// Phenomenological two-rate model used to reconstruct measured evolutions
/// from fitted T1 and T2.
pub fn t1t2_fit_model(
    t: f64,
    rho0: &DensityMatrix,
    t1: f64,
    t2: f64,
) -> Result<DensityMatrix> {
    if t1 <= 0.0 || t2 <= 0.0 {
        return Err(Error::InvalidParameter("T1 and T2 must be positive".into()));
    }
    if rho0.dim() != 2 {
        return Err(Error::DimensionMismatch("expected a single qubit".into()));
    }
    let m = rho0.matrix();
    let decay = (-t / t1).exp();
    let mut out: CMat = Array2::zeros((2, 2));
    out[[0, 0]] = m[[0, 0]] + m[[1, 1]] * (1.0 - decay);
    out[[1, 1]] = m[[1, 1]] * decay;
    out[[0, 1]] = m[[0, 1]] * (-t / t2).exp();
    out[[1, 0]] = out[[0, 1]].conj();
    DensityMatrix::from_propagation(out, vec![2], 1e-12)
}

/// Eigenvalues of the single-pair embedding that continue from the bare
/// qubit modes, identified by a coupling homotopy: ramp nu_zx from 0 to its
/// final value in `steps` increments, matching each tracked eigenvalue to
/// its nearest neighbor at every step.
pub fn qubit_mode_eigenvalues(p: &EmbeddingParams, steps: usize) -> Result<Vec<C64>> {
    p.validate()?;
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    let t2 = p.gamma1 / 2.0 + p.gamma_phi;
    // Decoupled limit: the qubit spectrum tensored with the TLS steady
    // sector is exactly the bare qubit spectrum.
    let mut tracked = vec![
        C64::new(0.0, 0.0),
        C64::new(-p.gamma1, 0.0),
        C64::new(-t2, 2.0 * p.omega_q),
        C64::new(-t2, -2.0 * p.omega_q),
    ];
    for s in 1..=steps {
        let mut q = *p;
        q.nu_zx = p.nu_zx * s as f64 / steps as f64;
        let dec = crate::liouvillian::spectral_decompose(&crate::liouvillian::build_liouvillian(
            &embedding_model(&q, 1)?,
        ))?;
        tracked = tracked
            .iter()
            .map(|t| {
                dec.eigenvalues
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - t).norm().total_cmp(&(b - t).norm()))
                    .expect("nonempty spectrum")
            })
            .collect();
    }
    Ok(tracked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::{
        asymptotic_speedup, build_liouvillian, spectral_decompose, steady_state,
    };
    use crate::state::qubit::c;
    use crate::state::partial_trace;

    fn davies() -> MarkovParams {
        MarkovParams {
            omega_q: 1.0,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
        }
    }

    #[test]
    fn markovian_t2_rate_from_spectrum() {
        let p = davies();
        let dec = spectral_decompose(&build_liouvillian(&two_qubit_markovian(&p).unwrap())).unwrap();
        // Slowest nonzero decay rate is the single-qubit coherence rate.
        let rates = dec.distinct_decay_rates(1e-9);
        assert!((rates[1] - p.t2_rate()).abs() < 1e-10);
        assert!((rates[1] - 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn markovian_dephasing_free_boundary() {
        // Gamma_phi = 0 puts the coherence rate at Gamma_1/2, i.e. T2 = 2 T1.
        let p = MarkovParams {
            omega_q: 1.0,
            gamma1: 0.8,
            gamma_phi: 0.0,
        };
        let dec = spectral_decompose(&build_liouvillian(&two_qubit_markovian(&p).unwrap())).unwrap();
        let rates = dec.distinct_decay_rates(1e-9);
        assert!((rates[1] - p.gamma1 / 2.0).abs() < 1e-10);
    }

    #[test]
    fn markovian_asymptotic_speedup() {
        let dec =
            spectral_decompose(&build_liouvillian(&two_qubit_markovian(&davies()).unwrap())).unwrap();
        assert!((asymptotic_speedup(&dec).unwrap() - 1.5).abs() < 1e-9);
    }

    #[test]
    fn thermal_reduces_to_markovian_at_zero_temperature() {
        let tp = ThermalParams {
            omega: 1.0,
            gamma: 1.0,
            nbar: 0.0,
            gamma_phi: 1.0 / 6.0,
        };
        let a = build_liouvillian(&two_qubit_thermal(&tp).unwrap());
        let b = build_liouvillian(&two_qubit_markovian(&davies()).unwrap());
        assert!(crate::linalg::max_abs_diff(&a.mat, &b.mat) <= 1e-14);
    }

    #[test]
    fn thermal_t1_rate_and_steady_population() {
        let tp = ThermalParams {
            omega: 1.0,
            gamma: 0.7,
            nbar: 0.4,
            gamma_phi: 0.2,
        };
        let dec = spectral_decompose(&build_liouvillian(&two_qubit_thermal(&tp).unwrap())).unwrap();
        let t1_rate = tp.gamma * (2.0 * tp.nbar + 1.0);
        let found = dec
            .eigenvalues
            .iter()
            .any(|l| l.im.abs() < 1e-9 && (l.re + t1_rate).abs() < 1e-9);
        assert!(found, "missing population eigenvalue at -{t1_rate}");

        let ss = steady_state(&dec).unwrap().with_dims(vec![2, 2]).unwrap();
        let q = partial_trace(&ss, &[0]).unwrap();
        let expect = tp.nbar / (2.0 * tp.nbar + 1.0);
        assert!((q.matrix()[[1, 1]].re - expect).abs() < 1e-10);
    }

    #[test]
    fn thermal_speedup_examples() {
        let mk = |nbar: f64, gamma_phi: f64| ThermalParams {
            omega: 1.0,
            gamma: 1.0,
            nbar,
            gamma_phi,
        };
        assert!((thermal_speedup(&mk(0.0, 0.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((thermal_speedup(&mk(3.7, 0.0)).unwrap() - 2.0).abs() < 1e-12);
        assert!((thermal_speedup(&mk(0.0, 1.0 / 6.0)).unwrap() - 1.5).abs() < 1e-12);
        // Monotone in nbar at fixed gamma, gamma_phi > 0.
        let mut prev = 0.0;
        for k in 0..20 {
            let s = thermal_speedup(&mk(0.3 * k as f64, 0.25)).unwrap();
            assert!(s > prev && s <= 2.0);
            prev = s;
        }
        let mut zero = mk(0.0, 0.1);
        zero.gamma = 0.0;
        assert!(thermal_speedup(&zero).is_err());
    }

    fn emb(nu: f64, kappa: f64, omega_t: f64) -> EmbeddingParams {
        EmbeddingParams {
            omega_q: 1.0,
            omega_t,
            nu_zx: nu,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
            kappa,
        }
    }

    #[test]
    fn embedding_decoupled_limit_contains_markov_spectrum() {
        let p = emb(0.0, 0.3, 2.0);
        let dec = spectral_decompose(&build_liouvillian(&embedding_model(&p, 1).unwrap())).unwrap();
        // At nu = 0 the qubit spectrum {0, -G1, -(G1/2+Gphi) +- 2i w} must
        // appear among the 16 embedding eigenvalues.
        let qubit = [
            c(0.0, 0.0),
            c(-p.gamma1, 0.0),
            c(-(p.gamma1 / 2.0 + p.gamma_phi), 2.0 * p.omega_q),
            c(-(p.gamma1 / 2.0 + p.gamma_phi), -2.0 * p.omega_q),
        ];
        for q in qubit {
            assert!(
                dec.eigenvalues.iter().any(|l| (l - q).norm() < 1e-9),
                "missing {q}"
            );
        }
    }

    #[test]
    fn embedding_slow_coherence_rate_small_xi() {
        // xi small: slowest qubit-coherence rate approx G1/2 + Gphi + kappa/2.
        let p = emb(0.2, 0.05, 40.0);
        let dec = spectral_decompose(&build_liouvillian(&embedding_model(&p, 1).unwrap())).unwrap();
        let expect = p.gamma1 / 2.0 + p.gamma_phi + p.kappa / 2.0;
        let best = dec
            .eigenvalues
            .iter()
            .filter(|l| l.im.abs() > 1.0) // coherence modes rotate at ~2 omega_q
            .map(|l| (l.re.abs() - expect).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(best < 5e-3, "deviation {best}");
    }

    #[test]
    fn non_markovian_predicate() {
        assert!(is_non_markovian(&emb(2.0, 0.1, 2.0)));
        assert!(!is_non_markovian(&emb(0.01, 1.0, 2.0)));
        // Boundary: 4 nu^2 = kappa^2/16 is not strictly greater.
        assert!(!is_non_markovian(&emb(0.125, 1.0, 2.0)));
        assert!(is_non_markovian(&emb(0.1250001, 1.0, 2.0)));
    }

    #[test]
    fn redfield_rate_endpoints() {
        let p = emb(2.0, 0.1, 2.0);
        assert!((redfield_dephasing_rate(0.0, &p) - p.gamma_phi / 2.0).abs() < 1e-12);
        assert!(
            (redfield_dephasing_rate(100.0 / p.kappa, &p) - p.gamma_phi / 2.0).abs() < 1e-10
        );
    }

    #[test]
    fn redfield_rate_dips_negative_when_non_markovian() {
        let p = emb(2.0, 0.1, 2.0);
        let min = (0..4000)
            .map(|k| redfield_dephasing_rate(k as f64 * 2.5e-3, &p))
            .fold(f64::INFINITY, f64::min);
        assert!(min < 0.0, "expected a transient negative rate, min {min}");
    }

    #[test]
    fn redfield_speedup_limits_and_spectral_oracle() {
        let p = emb(0.4, 0.3, 2.0);
        let t2_over_t1 = 2.0 * p.gamma1 / (p.gamma1 + 2.0 * p.gamma_phi);
        assert!((redfield_speedup(1e6, &p).unwrap() - t2_over_t1).abs() < 1e-9);
        let p0 = emb(0.0, 0.3, 2.0);
        for t in [0.0, 0.7, 3.0] {
            assert!((redfield_speedup(t, &p0).unwrap() - t2_over_t1).abs() < 1e-12);
        }
        // Oracle: eigenvalues of the instantaneous 4x4 generator.
        let gen = redfield_generator(&p).unwrap();
        for t in [0.0, 0.3, 1.1, 2.9, 7.0] {
            let dec = spectral_decompose(&gen.at(t)).unwrap();
            let rates = dec.distinct_decay_rates(1e-9);
            let ratio = rates[2] / rates[1];
            assert!(
                (redfield_speedup(t, &p).unwrap() - ratio).abs() < 1e-9,
                "t = {t}"
            );
        }
    }

    #[test]
    fn embedding_speedup_values() {
        // Markovian recovery as kappa -> 0.
        let s = embedding_speedup(&emb(0.2, 1e-9, 40.0)).unwrap();
        assert!((s.fourth_order - 1.5).abs() < 1e-6);
        assert!((s.simplified - 1.5).abs() < 1e-6);
        // kappa/nu = 0.05 ensemble: simplified formula gives 1.395.
        let s = embedding_speedup(&emb(2.0, 0.1, 2.0)).unwrap();
        assert!((s.simplified - 1.5 / 1.075).abs() < 1e-12);
        assert!((s.simplified - 1.39).abs() < 0.01);
    }

    #[test]
    fn embedding_speedup_matches_spectrum_small_xi() {
        // Oracle: qubit-coherence modes of the full 16-dim embedding.
        let p = emb(0.2, 0.05, 40.0);
        let dec = spectral_decompose(&build_liouvillian(&embedding_model(&p, 1).unwrap())).unwrap();
        // Qubit coherence modes rotate at ~2 omega_q; the qubit population
        // mode is the real eigenvalue near -Gamma_1. Their rate ratio is the
        // spectral speedup the closed form approximates.
        let coherence_rate = dec
            .eigenvalues
            .iter()
            .filter(|l| (l.im.abs() - 2.0 * p.omega_q).abs() < 1.0)
            .map(|l| l.re.abs())
            .fold(f64::INFINITY, f64::min);
        let population_rate = dec
            .eigenvalues
            .iter()
            .filter(|l| l.im.abs() < 1e-6)
            .map(|l| l.re.abs())
            .min_by(|a, b| (a - p.gamma1).abs().total_cmp(&(b - p.gamma1).abs()))
            .unwrap();
        let spectral = population_rate / coherence_rate;
        let s = embedding_speedup(&p).unwrap();
        assert!(
            (s.fourth_order - spectral).abs() / spectral < 0.05,
            "fourth order {} vs spectral {spectral}",
            s.fourth_order
        );
    }

    #[test]
    fn analytic_state_endpoints_and_trace_distance() {
        let p = emb(0.2, 0.05, 40.0);
        let rho0 = crate::state::qubit::bloch_state(1.2, 0.3);
        let at0 = analytic_redfield_state(0.0, &rho0, &p, p.omega_t - p.omega_q).unwrap();
        assert!(crate::linalg::max_abs_diff(at0.matrix(), rho0.matrix()) < 1e-12);

        for t in [0.2, 1.0, 3.0] {
            let st = analytic_redfield_state(t, &rho0, &p, p.omega_t - p.omega_q).unwrap();
            let ground = crate::state::qubit::ground();
            let d = crate::state::trace_distance(&st, &ground).unwrap();
            let lam = redfield_lambda(t, &p, p.omega_t - p.omega_q);
            let m = rho0.matrix();
            let expect = ((lam * m[[0, 1]]).norm_sqr()
                + (-2.0 * p.gamma1 * t).exp() * m[[1, 1]].re.powi(2))
            .sqrt();
            assert!((d - expect).abs() < 1e-12, "t = {t}");
        }
    }

    #[test]
    fn t1t2_fit_examples() {
        let rho0 = crate::state::qubit::bloch_state(std::f64::consts::FRAC_PI_2, 0.0);
        // Fixed point.
        let g = crate::state::qubit::ground();
        let gt = t1t2_fit_model(4.2, &g, 1.0, 1.47).unwrap();
        assert!(crate::linalg::max_abs_diff(gt.matrix(), g.matrix()) < 1e-14);
        // Coherence and excited population decay at the nominal rates.
        let (t1, t2) = (1.0, 1.47);
        let st = t1t2_fit_model(2.0, &rho0, t1, t2).unwrap();
        let m0 = rho0.matrix();
        assert!((st.matrix()[[0, 1]] - m0[[0, 1]] * (-2.0 / t2).exp()).norm() < 1e-14);
        assert!((st.matrix()[[1, 1]] - m0[[1, 1]] * (-2.0_f64 / t1).exp()).norm() < 1e-14);
    }

    #[test]
    fn homotopy_tracks_bare_qubit_modes_at_weak_coupling() {
        let p = EmbeddingParams {
            omega_q: 1.0,
            omega_t: 1.0,
            nu_zx: 1e-4,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
            kappa: 0.1,
        };
        let tracked = qubit_mode_eigenvalues(&p, 4).unwrap();
        let t2 = p.gamma1 / 2.0 + p.gamma_phi;
        let bare = [
            C64::new(0.0, 0.0),
            C64::new(-p.gamma1, 0.0),
            C64::new(-t2, 2.0 * p.omega_q),
            C64::new(-t2, -2.0 * p.omega_q),
        ];
        // Perturbative shifts are O(nu^2) = 1e-8.
        for (got, want) in tracked.iter().zip(&bare) {
            assert!((got - want).norm() < 1e-6, "got {got}, want {want}");
        }
    }

    #[test]
    fn homotopy_tracks_hybridized_coherence_branch() {
        // Strong coupling: the qubit coherence hybridizes with TLS sectors
        // and its decay rate grows beyond the bare 1/T2 (bounded by the
        // fully relaxed TLS branch at 1/T2 + kappa). The tracked values must
        // be actual eigenvalues, stable in the step count, and come in a
        // conjugate pair.
        let p = EmbeddingParams {
            omega_q: 1.0,
            omega_t: 2.0,
            nu_zx: 2.0,
            gamma1: 1.0,
            gamma_phi: 1.0 / 6.0,
            kappa: 0.1,
        };
        let tracked = qubit_mode_eigenvalues(&p, 40).unwrap();
        let again = qubit_mode_eigenvalues(&p, 120).unwrap();
        let dec = spectral_decompose(&build_liouvillian(&embedding_model(&p, 1).unwrap())).unwrap();
        let t2 = p.gamma1 / 2.0 + p.gamma_phi;
        assert!(tracked[0].norm() < 1e-9);
        assert!((tracked[1].re + p.gamma1).abs() < 1e-6);
        assert!((tracked[2] - tracked[3].conj()).norm() < 1e-9);
        for (a, b) in tracked.iter().zip(&again) {
            assert!((a - b).norm() < 1e-9, "tracking unstable: {a} vs {b}");
        }
        for coh in &tracked[2..] {
            assert!(
                dec.eigenvalues.iter().any(|l| (l - coh).norm() < 1e-9),
                "not an eigenvalue: {coh}"
            );
            let rate = -coh.re;
            assert!(rate > t2 + 1e-3 && rate < t2 + p.kappa + 1e-9, "rate {rate}");
        }
    }
}
