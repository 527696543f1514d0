//! Density matrices, vectorization, and the standard state functionals.
//!
//! Vectorization uses column stacking throughout: `vec[i + d*j] = rho[i, j]`,
//! so that `vec(A rho B^dag) = kron(conj(B), A) vec(rho)`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec};

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = -1e-10;

/// Dense density matrix together with the tensor-factor dimensions of its
/// Hilbert space.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMat,
    dims: Vec<usize>,
}

impl DensityMatrix {
    /// Validating constructor: Hermitian to 1e-12, unit trace to 1e-12,
    /// positive semidefinite down to -1e-10.
    pub fn new(mat: CMat, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{} but subsystem dims {:?} give d = {}",
                mat.nrows(),
                mat.ncols(),
                dims,
                d
            )));
        }
        if !mat.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        if !linalg::is_hermitian(&mat, HERMITICITY_TOL) {
            return Err(Error::InvalidState("not Hermitian".into()));
        }
        let tr = linalg::trace(&mat);
        if (tr - C64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace = {tr}")));
        }
        let min_eig = linalg::eigvalsh(&mat)?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min_eig < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("min eigenvalue = {min_eig:e}")));
        }
        Ok(Self { mat, dims })
    }

    /// Construct from a propagated matrix: symmetrize and renormalize the
    /// trace, but skip the full positivity eigencheck (hot path).
    pub fn from_propagation(mat: CMat, dims: Vec<usize>, symmetrize_tol: f64) -> Result<Self> {
        let herm_dev = linalg::max_abs_diff(&mat, &linalg::dagger(&mat));
        if herm_dev > symmetrize_tol {
            return Err(Error::InvalidState(format!(
                "propagated state deviates from Hermiticity by {herm_dev:e}"
            )));
        }
        let sym = (&mat + &linalg::dagger(&mat)).mapv(|z| z * 0.5);
        let tr = linalg::trace(&sym);
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-6 {
            return Err(Error::InvalidState(format!("propagated trace = {tr}")));
        }
        let renorm = sym.mapv(|z| z / tr);
        Ok(Self {
            mat: renorm,
            dims,
        })
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Reinterpret the tensor-factor structure without touching the data.
    pub fn with_dims(mut self, dims: Vec<usize>) -> Result<Self> {
        let d: usize = dims.iter().product();
        if d != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "dims {:?} do not match dimension {}",
                dims,
                self.dim()
            )));
        }
        self.dims = dims;
        Ok(self)
    }

    /// Pure state |psi><psi| from an (unnormalized) amplitude vector.
    pub fn pure(psi: &CVec, dims: Vec<usize>) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let mat = Array2::from_shape_fn((psi.len(), psi.len()), |(i, j)| {
            psi[i] * psi[j].conj() / norm2
        });
        Self::new(mat, dims)
    }

    /// Tensor product of two states.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let mat = linalg::kron(&self.mat, &other.mat);
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        DensityMatrix { mat, dims }
    }
}

/// Column-stacked d^2 vector of a d x d matrix.
#[derive(Debug, Clone)]
pub struct VectorizedState {
    pub vec: CVec,
    pub d: usize,
}

pub fn vectorize_matrix(m: &CMat) -> CVec {
    let d = m.nrows();
    Array1::from_shape_fn(d * d, |k| m[[k % d, k / d]])
}

pub fn vectorize(rho: &DensityMatrix) -> VectorizedState {
    VectorizedState {
        vec: vectorize_matrix(rho.matrix()),
        d: rho.dim(),
    }
}

pub fn devectorize(v: &CVec, d: usize) -> Result<CMat> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} cannot devectorize to {d}x{d}",
            v.len()
        )));
    }
    Ok(Array2::from_shape_fn((d, d), |(i, j)| v[i + d * j]))
}

/// Reduced state over the kept subsystems (ascending original order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[usize]) -> Result<DensityMatrix> {
    let dims = rho.dims().to_vec();
    let out = partial_trace_matrix(rho.matrix(), &dims, keep)?;
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let new_dims: Vec<usize> = keep_sorted.iter().map(|&i| dims[i]).collect();
    Ok(DensityMatrix {
        mat: out,
        dims: new_dims,
    })
}

/// Partial trace of an arbitrary (not necessarily Hermitian) operator.
pub fn partial_trace_matrix(mat: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let n = dims.len();
    if keep.is_empty() {
        return Err(Error::InvalidSubsystem { index: 0, count: n });
    }
    for &k in keep {
        if k >= n {
            return Err(Error::InvalidSubsystem { index: k, count: n });
        }
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();

    let traced: Vec<usize> = (0..n).filter(|i| !keep_sorted.contains(i)).collect();
    let dk: usize = keep_sorted.iter().map(|&i| dims[i]).product();
    let dt: usize = traced.iter().map(|&i| dims[i]).product();

    // Strides of each subsystem index in the flattened basis label.
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    // Map a flat index over a subsystem subset to its full basis label.
    let unflatten = |flat: usize, subs: &[usize]| -> usize {
        let mut rem = flat;
        let mut label = 0usize;
        for (pos, &s) in subs.iter().enumerate() {
            let size: usize = subs[pos + 1..].iter().map(|&x| dims[x]).product();
            label += (rem / size) * strides[s];
            rem %= size;
        }
        label
    };

    let mut out: CMat = Array2::zeros((dk, dk));
    for a in 0..dk {
        let la = unflatten(a, &keep_sorted);
        for b in 0..dk {
            let lb = unflatten(b, &keep_sorted);
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                let lt = unflatten(t, &traced);
                acc += mat[[la + lt, lb + lt]];
            }
            out[[a, b]] = acc;
        }
    }
    Ok(out)
}

/// Trace distance between two operators of equal dimension:
/// half the sum of singular values of their difference.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = a.matrix() - b.matrix();
    trace_distance_matrix(&diff)
}

/// Trace distance from a raw (Hermitian) difference matrix.
pub fn trace_distance_matrix(diff: &CMat) -> Result<f64> {
    // Differences of density matrices are Hermitian, so singular values are
    // absolute eigenvalues; zheev is faster and more stable than SVD here.
    if linalg::is_hermitian(diff, 1e-10) {
        let h = (diff + &linalg::dagger(diff)).mapv(|z| z * 0.5);
        Ok(linalg::eigvalsh(&h)?.iter().map(|l| l.abs()).sum::<f64>() / 2.0)
    } else {
        Ok(linalg::singular_values(diff)?.iter().sum::<f64>() / 2.0)
    }
}

/// Tr(rho^2).
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Sum of absolute values of all off-diagonal entries (computational basis).
pub fn l1_coherence(rho: &DensityMatrix) -> f64 {
    let m = rho.matrix();
    let mut acc = 0.0;
    for ((i, j), z) in m.indexed_iter() {
        if i != j {
            acc += z.norm();
        }
    }
    acc
}

/// Standard qubit operators and basis states.
pub mod qubit {
    use super::*;

    pub fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub fn identity(d: usize) -> CMat {
        Array2::eye(d)
    }

    pub fn sigma_x() -> CMat {
        ndarray::array![[c(0., 0.), c(1., 0.)], [c(1., 0.), c(0., 0.)]]
    }

    pub fn sigma_y() -> CMat {
        ndarray::array![[c(0., 0.), c(0., -1.)], [c(0., 1.), c(0., 0.)]]
    }

    pub fn sigma_z() -> CMat {
        ndarray::array![[c(1., 0.), c(0., 0.)], [c(0., 0.), c(-1., 0.)]]
    }

    pub fn sigma_minus() -> CMat {
        // |0><1|: lowers the excited state.
        ndarray::array![[c(0., 0.), c(1., 0.)], [c(0., 0.), c(0., 0.)]]
    }

    pub fn sigma_plus() -> CMat {
        ndarray::array![[c(0., 0.), c(0., 0.)], [c(1., 0.), c(0., 0.)]]
    }

    /// Computational basis projector |k><k| in dimension d.
    pub fn projector(k: usize, d: usize) -> CMat {
        let mut m: CMat = Array2::zeros((d, d));
        m[[k, k]] = c(1., 0.);
        m
    }

    pub fn ground() -> DensityMatrix {
        DensityMatrix::new(projector(0, 2), vec![2]).unwrap()
    }

    pub fn excited() -> DensityMatrix {
        DensityMatrix::new(projector(1, 2), vec![2]).unwrap()
    }

    pub fn plus() -> DensityMatrix {
        let psi = ndarray::array![c(1., 0.), c(1., 0.)];
        DensityMatrix::pure(&psi, vec![2]).unwrap()
    }

    /// Bloch-sphere pure state cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
    pub fn bloch_state(theta: f64, phi: f64) -> DensityMatrix {
        let psi = ndarray::array![
            c((theta / 2.0).cos(), 0.0),
            C64::from_polar((theta / 2.0).sin(), phi)
        ];
        DensityMatrix::pure(&psi, vec![2]).unwrap()
    }

    /// Diagonal single-qubit state with ground population p0 plus an
    /// off-diagonal element.
    pub fn mixed(p0: f64, coherence: C64) -> Result<DensityMatrix> {
        let m = ndarray::array![[c(p0, 0.0), coherence], [coherence.conj(), c(1.0 - p0, 0.0)]];
        DensityMatrix::new(m, vec![2])
    }

    /// Ground state of an n-fold tensor product of qubits.
    pub fn ground_n(n: usize) -> DensityMatrix {
        let d = 1usize << n;
        DensityMatrix::new(projector(0, d), vec![2; n]).unwrap()
    }
}
