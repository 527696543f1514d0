//! Dense complex linear-algebra primitives shared by all other modules.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Inverse, SVD};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub type CMat = Array2<C64>;
pub type CVec = Array1<C64>;

pub fn dagger(m: &CMat) -> CMat {
    m.t().mapv(|z| z.conj())
}

/// Max-norm of the entrywise difference.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    max_abs_diff(m, &dagger(m)) <= tol
}

pub fn is_unitary(m: &CMat, tol: f64) -> bool {
    let eye: CMat = Array2::eye(m.nrows());
    max_abs_diff(&dagger(m).dot(m), &eye) <= tol
}

pub fn trace(m: &CMat) -> C64 {
    m.diag().sum()
}

/// Kronecker product, dimension (rows_a * rows_b) x (cols_a * cols_b).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[[i, j]];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
            block.zip_mut_with(b, |o, &bv| *o = aij * bv);
        }
    }
    out
}

/// Kronecker product of several factors, left to right.
pub fn kron_all(factors: &[&CMat]) -> CMat {
    let mut out = factors[0].clone();
    for f in &factors[1..] {
        out = kron(&out, f);
    }
    out
}

/// 1-norm (max absolute column sum), used for exponential scaling.
fn one_norm(m: &CMat) -> f64 {
    let mut best = 0.0_f64;
    for j in 0..m.ncols() {
        let s: f64 = m.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

// Pade(13) coefficients from Higham's scaling-and-squaring method.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Matrix exponential via scaling-and-squaring with Pade(13).
pub fn matrix_exponential(m: &CMat) -> CMat {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "matrix_exponential requires a square matrix");
    if n == 0 {
        return Array2::zeros((0, 0));
    }

    let theta13 = 5.371920351148152_f64;
    let norm = one_norm(m);
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil() as u32
    } else {
        0
    };
    let a = m.mapv(|z| z / C64::new((1u64 << s) as f64, 0.0));

    let eye: CMat = Array2::eye(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let b = &PADE13;
    let u_inner = a6.mapv(|z| z * b[13])
        + a4.mapv(|z| z * b[11])
        + a2.mapv(|z| z * b[9]);
    let u = a.dot(
        &(a6.dot(&u_inner)
            + a6.mapv(|z| z * b[7])
            + a4.mapv(|z| z * b[5])
            + a2.mapv(|z| z * b[3])
            + eye.mapv(|z| z * b[1])),
    );
    let v_inner = a6.mapv(|z| z * b[12])
        + a4.mapv(|z| z * b[10])
        + a2.mapv(|z| z * b[8]);
    let v = a6.dot(&v_inner)
        + a6.mapv(|z| z * b[6])
        + a4.mapv(|z| z * b[4])
        + a2.mapv(|z| z * b[2])
        + eye.mapv(|z| z * b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = solve(&q, &p);
    for _ in 0..s {
        r = r.dot(&r);
    }
    r
}

/// Solve QX = P for X via inversion; matrices here are small and well scaled.
fn solve(q: &CMat, p: &CMat) -> CMat {
    let qi = q.inv().expect("Pade denominator is nonsingular");
    qi.dot(p)
}

pub struct EigResult {
    pub values: CVec,
    /// Right eigenvectors as columns.
    pub vectors: CMat,
    /// Inverse of the eigenvector matrix (rows are unnormalized left eigenvectors).
    pub vectors_inv: CMat,
    /// 2-norm condition number of the eigenvector matrix.
    pub condition: f64,
}

/// Dense nonsymmetric eigendecomposition (LAPACK zgeev) plus the eigenvector
/// matrix inverse, which provides a biorthonormal left basis even in the
/// presence of degenerate eigenvalues.
pub fn eig_full(m: &CMat) -> Result<EigResult> {
    let (values, vectors) = m
        .eig()
        .map_err(|e| Error::Eigensolver(format!("zgeev failed: {e}")))?;
    let svals = vectors
        .svd(false, false)
        .map_err(|e| Error::Eigensolver(format!("svd failed: {e}")))?
        .1;
    let smax = svals.iter().cloned().fold(0.0, f64::max);
    let smin = svals.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let vectors_inv = vectors
        .inv()
        .map_err(|e| Error::Eigensolver(format!("eigenvector matrix inversion failed: {e}")))?;
    Ok(EigResult {
        values,
        vectors,
        vectors_inv,
        condition,
    })
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn eigvalsh(m: &CMat) -> Result<Vec<f64>> {
    use ndarray_linalg::{Eigh, UPLO};
    let (vals, _) = m
        .eigh(UPLO::Lower)
        .map_err(|e| Error::Eigensolver(format!("zheev failed: {e}")))?;
    Ok(vals.to_vec())
}

/// Singular values, descending.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    let (_, s, _) = m
        .svd(false, false)
        .map_err(|e| Error::Eigensolver(format!("svd failed: {e}")))?;
    Ok(s.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_mat(n: usize, seed: u64) -> CMat {
        // Small deterministic LCG; good enough for test fixtures.
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        Array2::from_shape_fn((n, n), |_| c(next(), next()))
    }

    #[test]
    fn kron_identity() {
        let i2: CMat = Array2::eye(2);
        let i4: CMat = Array2::eye(4);
        assert_eq!(kron(&i2, &i2), i4);
    }

    #[test]
    fn kron_sigma_z_identity_diagonal() {
        let sz = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let i2: CMat = Array2::eye(2);
        let k = kron(&sz, &i2);
        let diag: Vec<f64> = k.diag().iter().map(|z| z.re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn kron_mixed_product_rule() {
        // kron(A,B) kron(C,D) = kron(AC, BD), oracle: brute-force products.
        let (a, b, cc, d) = (random_mat(2, 1), random_mat(2, 2), random_mat(2, 3), random_mat(2, 4));
        let lhs = kron(&a, &b).dot(&kron(&cc, &d));
        let rhs = kron(&a.dot(&cc), &b.dot(&d));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn kron_associative() {
        let (a, b, cc) = (random_mat(2, 5), random_mat(3, 6), random_mat(2, 7));
        let lhs = kron(&kron(&a, &b), &cc);
        let rhs = kron(&a, &kron(&b, &cc));
        assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn expm_zero_is_identity() {
        let z: CMat = Array2::zeros((4, 4));
        let eye: CMat = Array2::eye(4);
        assert!(max_abs_diff(&matrix_exponential(&z), &eye) < 1e-15);
    }

    #[test]
    fn expm_diagonal() {
        let lambdas = [c(0.3, 0.0), c(-1.2, 0.5), c(0.0, -2.0)];
        let mut m: CMat = Array2::zeros((3, 3));
        for (i, l) in lambdas.iter().enumerate() {
            m[[i, i]] = *l;
        }
        let e = matrix_exponential(&m);
        for (i, l) in lambdas.iter().enumerate() {
            assert!((e[[i, i]] - l.exp()).norm() < 1e-14);
        }
    }

    #[test]
    fn expm_matches_taylor_series() {
        // Oracle: truncated Taylor series to order 30 on a norm-bounded matrix.
        let mut m = random_mat(8, 42);
        let n = one_norm(&m);
        m.mapv_inplace(|z| z / c(n, 0.0));

        let mut taylor: CMat = Array2::eye(8);
        let mut term: CMat = Array2::eye(8);
        for k in 1..=30 {
            term = term.dot(&m).mapv(|z| z / c(k as f64, 0.0));
            taylor = taylor + &term;
        }
        assert!(max_abs_diff(&matrix_exponential(&m), &taylor) < 1e-12);
    }

    #[test]
    fn eig_reconstructs() {
        let m = random_mat(6, 9);
        let e = eig_full(&m).unwrap();
        let mut lam: CMat = Array2::zeros((6, 6));
        for i in 0..6 {
            lam[[i, i]] = e.values[i];
        }
        let rebuilt = e.vectors.dot(&lam).dot(&e.vectors_inv);
        assert!(max_abs_diff(&rebuilt, &m) < 1e-10);
        assert!(e.condition < 1e6);
    }
}
