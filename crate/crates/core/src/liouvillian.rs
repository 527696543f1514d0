//! Vectorized Liouvillian superoperators and their spectral decompositions.
//!
//! With column stacking, the generator
//! `d rho/dt = -i[H, rho] + sum_l rate_l (L rho L^dag - {L^dag L, rho}/2)`
//! becomes the matrix
//! `-i (I x H) + i (H^T x I)
//!  + sum_l rate_l [ conj(L) x L - (I x L^dag L)/2 - ((L^dag L)^T x I)/2 ]`
//! acting on `vec(rho)` (`x` denotes the Kronecker product, left factor on
//! the column index).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, kron, CMat};
use crate::state::{devectorize, DensityMatrix, VectorizedState};

pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;
pub const DEFECTIVE_CONDITION_LIMIT: f64 = 1e10;

/// A jump operator together with its nonnegative rate.
#[derive(Debug, Clone)]
pub struct JumpTerm {
    pub operator: CMat,
    pub rate: f64,
}

impl JumpTerm {
    pub fn new(operator: CMat, rate: f64) -> Result<Self> {
        if rate < 0.0 {
            return Err(Error::InvalidParameter(format!("negative rate {rate}")));
        }
        Ok(Self { operator, rate })
    }
}

/// Declarative Lindblad generator: Hamiltonian, jump terms, subsystem dims.
#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub hamiltonian: CMat,
    pub jumps: Vec<JumpTerm>,
    pub dims: Vec<usize>,
}

impl LindbladSpec {
    pub fn new(hamiltonian: CMat, jumps: Vec<JumpTerm>, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if hamiltonian.nrows() != d || hamiltonian.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "hamiltonian is {}x{}, dims {:?} give d = {d}",
                hamiltonian.nrows(),
                hamiltonian.ncols(),
                dims
            )));
        }
        if !linalg::is_hermitian(&hamiltonian, 1e-12) {
            return Err(Error::InvalidParameter("hamiltonian not Hermitian".into()));
        }
        for j in &jumps {
            if j.operator.nrows() != d || j.operator.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "jump operator is {}x{}, expected {d}x{d}",
                    j.operator.nrows(),
                    j.operator.ncols()
                )));
            }
        }
        Ok(Self {
            hamiltonian,
            jumps,
            dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Right-hand side of the master equation applied directly to a matrix;
    /// the independent oracle for the vectorized builder.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let i = C64::new(0.0, 1.0);
        let h = &self.hamiltonian;
        let mut out = (h.dot(rho) - rho.dot(h)).mapv(|z| z * (-i));
        for j in &self.jumps {
            let l = &j.operator;
            let ld = linalg::dagger(l);
            let ldl = ld.dot(l);
            let term = l.dot(rho).dot(&ld)
                - (ldl.dot(rho) + rho.dot(&ldl)).mapv(|z| z * 0.5);
            out = out + term.mapv(|z| z * j.rate);
        }
        out
    }
}

/// Dense d^2 x d^2 matrix acting on vectorized states.
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub mat: CMat,
    pub d: usize,
}

impl Superoperator {
    pub fn apply_to_matrix(&self, rho: &CMat) -> CMat {
        let v = crate::state::vectorize_matrix(rho);
        let out = self.mat.dot(&v);
        devectorize(&out, self.d).expect("superoperator dimension is d^2")
    }
}

/// Build the vectorized Liouvillian matrix for a Lindblad specification.
pub fn build_liouvillian(spec: &LindbladSpec) -> Superoperator {
    let d = spec.dim();
    let eye: CMat = Array2::eye(d);
    let i = C64::new(0.0, 1.0);
    let h = &spec.hamiltonian;

    let mut m = kron(&eye, h).mapv(|z| z * (-i)) + kron(&h.t().to_owned(), &eye).mapv(|z| z * i);
    for j in &spec.jumps {
        let l = &j.operator;
        let ld = linalg::dagger(l);
        let ldl = ld.dot(l);
        let diss = kron(&l.mapv(|z| z.conj()), l)
            - kron(&eye, &ldl).mapv(|z| z * 0.5)
            - kron(&ldl.t().to_owned(), &eye).mapv(|z| z * 0.5);
        m = m + diss.mapv(|z| z * j.rate);
    }
    Superoperator { mat: m, d }
}

/// Sorted eigenvalues with biorthonormal left/right eigenvector pairs.
///
/// Ordering: the zero eigenvalue first, then ascending |Re|, ties broken by
/// ascending Im, then ascending |Im|. Left vectors are stored so that
/// `overlap(l_k, rho) = l_k^dag vec(rho)` and `l_j^dag r_k = delta_jk`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    pub right_vectors: Vec<VectorizedState>,
    pub left_vectors: Vec<VectorizedState>,
    pub defective: bool,
    pub d: usize,
}

pub fn spectral_decompose(l: &Superoperator) -> Result<SpectralDecomposition> {
    let n = l.mat.nrows();
    if n != l.mat.ncols() {
        return Err(Error::DimensionMismatch("superoperator not square".into()));
    }
    let eig = linalg::eig_full(&l.mat)?;
    let defective = !eig.condition.is_finite() || eig.condition > DEFECTIVE_CONDITION_LIMIT;

    // Sort: zero mode first, then ascending |Re|, Im, |Im|.
    let mut order: Vec<usize> = (0..n).collect();
    let key = |k: usize| {
        let lam = eig.values[k];
        let zero = lam.norm() < ZERO_EIGENVALUE_TOL;
        (
            !zero,
            ordered_float(lam.re.abs()),
            ordered_float(lam.im),
            ordered_float(lam.im.abs()),
        )
    };
    order.sort_by(|&a, &b| key(a).cmp(&key(b)).then(a.cmp(&b)));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut right_vectors = Vec::with_capacity(n);
    let mut left_vectors = Vec::with_capacity(n);
    for &k in &order {
        eigenvalues.push(eig.values[k]);
        right_vectors.push(VectorizedState {
            vec: eig.vectors.column(k).to_owned(),
            d: l.d,
        });
        // Row k of V^{-1} satisfies row . r_j = delta_kj; store its conjugate
        // so the overlap convention l^dag v applies.
        left_vectors.push(VectorizedState {
            vec: eig.vectors_inv.row(k).mapv(|z| z.conj()),
            d: l.d,
        });
    }

    // Rescale the stationary pair so that devectorize(r_1) has unit trace
    // and l_1 is the vectorized identity.
    if eigenvalues
        .first()
        .is_some_and(|lam| lam.norm() < ZERO_EIGENVALUE_TOL)
    {
        let r1 = devectorize(&right_vectors[0].vec, l.d)?;
        let tr = linalg::trace(&r1);
        if tr.norm() > 1e-12 {
            let c = C64::new(1.0, 0.0) / tr;
            right_vectors[0].vec.mapv_inplace(|z| z * c);
            let cc = tr.conj();
            left_vectors[0].vec.mapv_inplace(|z| z * cc);
        }
    }

    Ok(SpectralDecomposition {
        eigenvalues,
        right_vectors,
        left_vectors,
        defective,
        d: l.d,
    })
}

fn ordered_float(x: f64) -> ordered_key::F64Key {
    ordered_key::F64Key(x)
}

mod ordered_key {
    #[derive(PartialEq)]
    pub struct F64Key(pub f64);
    impl Eq for F64Key {}
    impl PartialOrd for F64Key {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for F64Key {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }
}

impl SpectralDecomposition {
    /// Indices of eigenvalues within `tol` of zero.
    pub fn zero_modes(&self, tol: f64) -> Vec<usize> {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.norm() < tol)
            .map(|(k, _)| k)
            .collect()
    }

    /// Distinct decay rates |Re(lambda)| in ascending order, grouped within
    /// `tol` (the zero rate of the steady state is included first).
    pub fn distinct_decay_rates(&self, tol: f64) -> Vec<f64> {
        let mut rates: Vec<f64> = self.eigenvalues.iter().map(|l| l.re.abs()).collect();
        rates.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::new();
        for r in rates {
            match out.last() {
                Some(&last) if (r - last).abs() <= tol => {}
                _ => out.push(r),
            }
        }
        out
    }

    /// Indices of the slowest nonzero eigenvalue group (|Re| equal within tol).
    pub fn slow_group(&self, tol: f64) -> Vec<usize> {
        let rates = self.distinct_decay_rates(tol);
        let Some(&slow) = rates.get(1) else {
            return Vec::new();
        };
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, l)| l.norm() >= ZERO_EIGENVALUE_TOL && (l.re.abs() - slow).abs() <= tol)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Steady state from the stationary right eigenvector, Hermitized and
/// rescaled to unit trace.
pub fn steady_state(dec: &SpectralDecomposition) -> Result<DensityMatrix> {
    let zeros = dec.zero_modes(ZERO_EIGENVALUE_TOL);
    if zeros.is_empty() {
        return Err(Error::Eigensolver(
            "no eigenvalue within tolerance of zero".into(),
        ));
    }
    if zeros.len() > 1 {
        return Err(Error::DegenerateSteadyState {
            multiplicity: zeros.len(),
        });
    }
    let m = devectorize(&dec.right_vectors[zeros[0]].vec, dec.d)?;
    let herm = (&m + &linalg::dagger(&m)).mapv(|z| z * 0.5);
    let tr = linalg::trace(&herm);
    DensityMatrix::new(herm.mapv(|z| z / tr), vec![dec.d])
}

/// Conjugate-linear inner product of a left eigenvector with vec(rho).
pub fn overlap(left: &VectorizedState, rho: &DensityMatrix) -> Result<C64> {
    if left.d != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "left vector d = {}, state d = {}",
            left.d,
            rho.dim()
        )));
    }
    let v = crate::state::vectorize_matrix(rho.matrix());
    Ok(left
        .vec
        .iter()
        .zip(v.iter())
        .map(|(l, x)| l.conj() * x)
        .sum())
}

/// Fraction of a right eigenvector's weight on diagonal entries of its
/// devectorized matrix; distinguishes population from coherence modes.
pub fn diagonal_weight(right: &VectorizedState) -> f64 {
    let d = right.d;
    let total: f64 = right.vec.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let diag: f64 = (0..d).map(|i| right.vec[i + d * i].norm_sqr()).sum();
    diag / total
}

/// Asymptotic Mpemba speedup: the ratio of the next-slowest distinct decay
/// rate to the slowest one, or 1 when the slowest mode is a population mode
/// (which a coherence-scrambling gate cannot suppress).
pub fn asymptotic_speedup(dec: &SpectralDecomposition) -> Result<f64> {
    if dec.eigenvalues.len() < 3 {
        return Err(Error::InvalidParameter(
            "need at least 3 eigenvalues".into(),
        ));
    }
    let rates = dec.distinct_decay_rates(1e-9);
    let Some(&r2) = rates.get(1) else {
        return Err(Error::NoDecay);
    };
    if r2 < ZERO_EIGENVALUE_TOL {
        return Err(Error::NoDecay);
    }
    let slow = dec.slow_group(1e-9);
    let population_mode = slow
        .iter()
        .any(|&k| diagonal_weight(&dec.right_vectors[k]) > 1.0 - 1e-8);
    if population_mode {
        return Ok(1.0);
    }
    let Some(&r3) = rates.get(2) else {
        return Err(Error::NoDecay);
    };
    Ok(r3 / r2)
}
