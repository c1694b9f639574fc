//! Dense complex linear algebra used by every other module.
//!
//! Matrices are plain `nalgebra` dense matrices of `Complex64`. The routines
//! here validate shape and finiteness on entry, so callers can rely on the
//! outputs without re-checking.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Absolute max-entry tolerance for Hermiticity.
pub const HERMITIAN_TOL: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    DMatrix::identity(dim, dim)
}

pub fn zeros(dim: usize) -> ComplexMatrix {
    DMatrix::zeros(dim, dim)
}

pub fn diag_real(values: &[f64]) -> ComplexMatrix {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| c(v, 0.0)),
    ))
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

pub fn hermiticity_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// `max |U^dagger U - 1|`.
pub fn unitarity_residual(u: &ComplexMatrix) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}

pub fn check_square(m: &ComplexMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V diag(f(values)) V^dagger`.
    pub fn apply<F>(&self, f: F) -> ComplexMatrix
    where
        F: Fn(f64) -> Complex64,
    {
        let v = &self.vectors;
        let n = v.nrows();
        let mut scaled = v.clone();
        for (j, &e) in self.values.iter().enumerate() {
            let fe = f(e);
            for i in 0..n {
                scaled[(i, j)] *= fe;
            }
        }
        scaled * v.adjoint()
    }

    /// `exp(i * theta * M)`.
    pub fn exp_i(&self, theta: f64) -> ComplexMatrix {
        self.apply(|e| Complex64::from_polar(1.0, theta * e))
    }
}

pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    check_square(m)?;
    let deviation = hermiticity_deviation(m);
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(HermitianEig {
            values: Vec::new(),
            vectors: zeros(0),
        });
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps ties in original index order
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianEig { values, vectors })
}

/// Spectral calculus `f(H)` for Hermitian `H`.
pub fn matrix_function<F>(h: &ComplexMatrix, f: F) -> Result<ComplexMatrix>
where
    F: Fn(f64) -> Complex64,
{
    Ok(hermitian_eig(h)?.apply(f))
}

/// General matrix exponential (scaling and squaring with Pade approximants).
pub fn expm(m: &ComplexMatrix) -> ComplexMatrix {
    m.exp()
}

/// Determinant as log-modulus plus phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub log_modulus: f64,
    pub phase: f64,
    /// False when `phase` is the principal value in (-pi, pi]; true when it
    /// has been accumulated along a path and may lie outside that interval.
    pub continued: bool,
}

impl LogDet {
    pub const ONE: LogDet = LogDet {
        log_modulus: 0.0,
        phase: 0.0,
        continued: false,
    };

    pub fn value(&self) -> Complex64 {
        Complex64::from_polar(self.log_modulus.exp(), self.phase)
    }

    pub fn ln(&self) -> Complex64 {
        c(self.log_modulus, self.phase)
    }

    /// Sum of logarithms, i.e. the log-determinant of a direct sum.
    pub fn combine(&self, other: &LogDet) -> LogDet {
        LogDet {
            log_modulus: self.log_modulus + other.log_modulus,
            phase: self.phase + other.phase,
            continued: true,
        }
    }

    pub fn principal(&self) -> LogDet {
        LogDet {
            log_modulus: self.log_modulus,
            phase: wrap_phase(self.phase),
            continued: false,
        }
    }
}

/// Maps an angle into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// LU with partial pivoting, accumulating `log|u_kk|` and `arg u_kk` per pivot.
pub fn log_det(m: &ComplexMatrix) -> Result<LogDet> {
    check_square(m)?;
    let n = m.nrows();
    let mut a = m.clone();
    let mut log_modulus = 0.0;
    let mut phase = 0.0;
    for k in 0..n {
        let mut piv = k;
        let mut best = a[(k, k)].norm();
        for i in (k + 1)..n {
            let v = a[(i, k)].norm();
            if v > best {
                best = v;
                piv = i;
            }
        }
        if best < f64::MIN_POSITIVE {
            return Err(Error::SingularMatrix { pivot: k });
        }
        if piv != k {
            a.swap_rows(k, piv);
            phase += PI;
        }
        let p = a[(k, k)];
        log_modulus += best.ln();
        phase += p.arg();
        let inv = p.inv();
        for i in (k + 1)..n {
            let factor = a[(i, k)] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in (k + 1)..n {
                let t = a[(k, j)];
                a[(i, j)] -= factor * t;
            }
        }
    }
    Ok(LogDet {
        log_modulus,
        phase: wrap_phase(phase),
        continued: false,
    })
}

/// Sum of singular values.
pub fn trace_norm(m: &ComplexMatrix) -> Result<f64> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(m.singular_values().iter().sum())
}

/// Largest singular value.
pub fn operator_norm(m: &ComplexMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a: f64, &b| a.max(b))
}

/// Square root of a positive semidefinite Hermitian matrix (negative
/// eigenvalues from roundoff are clamped to zero).
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    matrix_function(m, |e| c(e.max(0.0).sqrt(), 0.0))
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}
