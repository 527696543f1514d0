//! Randomized property tests for the structural invariants that must hold
//! for every valid input, not just the hand-picked fixtures.

use mpemba_core::liouvillian::{build_liouvillian, spectral_decompose, JumpTerm, LindbladSpec};
use mpemba_core::protocol::{kappa, AncillaState, ControlledGate};
use mpemba_core::state::{
    devectorize, partial_trace, qubit, trace_distance, vectorize, DensityMatrix,
};
use mpemba_core::{dynamics, linalg};
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

/// Random density matrix of dimension `d` from a Gaussian-entry factor.
fn density(d: usize) -> impl Strategy<Value = DensityMatrix> {
    proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), d * d).prop_map(move |entries| {
        let a = Array2::from_shape_fn((d, d), |(i, j)| {
            let (re, im) = entries[i * d + j];
            C64::new(re, im)
        });
        // A A^dag is positive semidefinite; the identity shim keeps the
        // trace away from zero for near-singular draws.
        let mut m = a.dot(&linalg::dagger(&a));
        for i in 0..d {
            m[[i, i]] += C64::new(1e-3, 0.0);
        }
        let tr = linalg::trace(&m);
        DensityMatrix::new(m.mapv(|z| z / tr), vec![d]).expect("positive by construction")
    })
}

/// Random 2x2 unitary via the exponential of a skew-Hermitian matrix.
fn unitary2() -> impl Strategy<Value = Array2<C64>> {
    (
        -3.0f64..3.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
    )
        .prop_map(|(a, b, c, d, e)| {
            let h = ndarray::array![
                [C64::new(a, 0.0), C64::new(b, c)],
                [C64::new(b, -c), C64::new(d, 0.0)]
            ];
            linalg::matrix_exponential(&h.mapv(|z| z * C64::new(0.0, e.signum())))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vectorize_devectorize_roundtrip(rho in density(4)) {
        let v = vectorize(&rho);
        let m = devectorize(&v.vec, v.d).unwrap();
        prop_assert!(linalg::max_abs_diff(&m, rho.matrix()) == 0.0);
    }

    #[test]
    fn trace_distance_is_a_metric(a in density(3), b in density(3), c in density(3)) {
        let dab = trace_distance(&a, &b).unwrap();
        let dba = trace_distance(&b, &a).unwrap();
        let dac = trace_distance(&a, &c).unwrap();
        let dcb = trace_distance(&c, &b).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&dab));
        prop_assert!((dab - dba).abs() < 1e-12);
        prop_assert!(dab <= dac + dcb + 1e-10);
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-12);
    }

    #[test]
    fn partial_trace_of_product_recovers_factor(a in density(2), b in density(3)) {
        let joint = a.tensor(&b);
        let left = partial_trace(&joint, &[0]).unwrap();
        let right = partial_trace(&joint, &[1]).unwrap();
        prop_assert!(linalg::max_abs_diff(left.matrix(), a.matrix()) < 1e-12);
        prop_assert!(linalg::max_abs_diff(right.matrix(), b.matrix()) < 1e-12);
    }

    #[test]
    fn coherence_factor_is_bounded(p0 in 0.0f64..=1.0, v0 in unitary2(), v1 in unitary2()) {
        let ancilla = AncillaState::diagonal(p0).unwrap();
        let gate = ControlledGate::new(v0, v1).unwrap();
        prop_assert!(kappa(&ancilla, &gate).unwrap().norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn haar_sampler_reproducible(seed in any::<u64>(), index in 0u64..1000) {
        let (a, ta, pa) = mpemba_core::haar::haar_state(seed, index);
        let (b, tb, pb) = mpemba_core::haar::haar_state(seed, index);
        prop_assert!(ta == tb && pa == pb);
        prop_assert!(linalg::max_abs_diff(a.matrix(), b.matrix()) == 0.0);
    }
}

proptest! {
    // Each case runs a full eigendecomposition; keep the count modest.
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn random_lindbladian_is_trace_preserving_and_contractive(
        h_entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
        l_entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9),
        rate in 0.01f64..2.0,
        rho in density(3),
        t in 0.01f64..5.0,
    ) {
        let raw = Array2::from_shape_fn((3, 3), |(i, j)| {
            let (re, im) = h_entries[i * 3 + j];
            C64::new(re, im)
        });
        let h = (&raw + &linalg::dagger(&raw)).mapv(|z| z / 2.0);
        let l = Array2::from_shape_fn((3, 3), |(i, j)| {
            let (re, im) = l_entries[i * 3 + j];
            C64::new(re, im)
        });
        let spec = LindbladSpec::new(h, vec![JumpTerm::new(l, rate).unwrap()], vec![3]).unwrap();
        let sup = build_liouvillian(&spec);

        // The identity is a left null vector (trace preservation) ...
        let d2 = sup.mat.nrows();
        let d = (d2 as f64).sqrt() as usize;
        let mut id_vec = ndarray::Array1::zeros(d2);
        for i in 0..d {
            id_vec[i + d * i] = C64::new(1.0, 0.0);
        }
        let residual = id_vec.dot(&sup.mat);
        prop_assert!(residual.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);

        // ... every eigenvalue sits in the closed left half-plane ...
        let dec = spectral_decompose(&sup).unwrap();
        for ev in &dec.eigenvalues {
            prop_assert!(ev.re < 1e-9, "eigenvalue {ev} in right half-plane");
        }

        // ... and propagation keeps the state physical.
        let out = dynamics::propagate_expm(&sup, &rho, t).unwrap();
        prop_assert!((linalg::trace(out.matrix()).re - 1.0).abs() < 1e-9);
        let evs = linalg::eigvalsh(out.matrix()).unwrap();
        prop_assert!(evs.iter().all(|x| *x > -1e-9));
    }

    #[test]
    fn gate_conjugation_preserves_spectrum(rho1 in density(2), p0 in 0.0f64..=1.0) {
        let joint = rho1.tensor(&AncillaState::diagonal(p0).unwrap().density().unwrap());
        let gated = mpemba_core::protocol::apply_gate(&mpemba_core::protocol::cry_pi(), &joint).unwrap();
        let mut before = linalg::eigvalsh(joint.matrix()).unwrap();
        let mut after = linalg::eigvalsh(gated.matrix()).unwrap();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (x, y) in before.iter().zip(&after) {
            prop_assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn exponential_curve_reset_time_is_exact(
        rate in 0.05f64..3.0,
        amp in 0.2f64..1.0,
        epsilon in 1e-6f64..1e-2,
    ) {
        // D(t) = amp * exp(-rate t) crosses epsilon at ln(amp/eps)/rate; the
        // log-linear crossing interpolation must recover it exactly.
        let times = dynamics::log_grid(1e-3, 40.0 / rate, 400);
        let values: Vec<f64> = times.iter().map(|t| amp * (-rate * t).exp()).collect();
        let curve = dynamics::TraceDistanceCurve::new(times, values, "exp".to_string()).unwrap();
        let t = dynamics::reset_time(&curve, epsilon).unwrap();
        let expect = ((amp / epsilon).ln() / rate).max(1e-3);
        prop_assert!((t - expect).abs() < 1e-9 * expect.max(1.0), "t={t} expect={expect}");
    }
}

/// The slanted-plane example from the gate algebra: a diagonal ancilla and a
/// sigma_z-like branch contrast give kappa = 0 regardless of populations.
#[test]
fn kappa_vanishes_for_traceless_diagonal_contrast() {
    let gate = ControlledGate::new(qubit::identity(2), {
        let mut m = qubit::identity(2);
        m[[1, 1]] = C64::new(-1.0, 0.0);
        m
    })
    .unwrap();
    let anc = AncillaState::diagonal(0.5).unwrap();
    assert!(kappa(&anc, &gate).unwrap().norm() < 1e-15);
}
