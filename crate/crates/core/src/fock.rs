//! Brute-force second quantization on the full fermionic Fock space.
//!
//! Basis states are occupation bitmasks over the `d` single-particle modes,
//! ordered by integer value. A mask `S = {s_1 < ... < s_n}` stands for
//! `c†_{s_1} ... c†_{s_n} |0>`, so creating a particle in mode `i` picks up
//! the sign `(-1)^{#occupied modes below i}`.
//!
//! Everything here is dense and exponential in `d`. It is the reference the
//! determinant formulas are checked against, not a production path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::ops::Mul;

use crate::counting::CountingDistribution;
use crate::error::{Error, Result};
use crate::linalg::{self, c, check_square, hermitian_eig, ComplexMatrix, HermitianEig};
use crate::model::{QuantumModel, CLAMP_WINDOW};

/// Largest single-particle dimension for Fock operators.
pub const MAX_FOCK_DIM: usize = 14;
/// Largest single-particle dimension for the counting oracle.
pub const MAX_ORACLE_DIM: usize = 12;
/// Histories whose initial weight is below this are skipped.
pub const HISTORY_CUTOFF: f64 = 1e-14;

/// The occupation-number basis of `F(C^d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FockBasis {
    pub dim: usize,
}

impl FockBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim > MAX_FOCK_DIM {
            return Err(Error::DimensionTooLarge {
                dim,
                max: MAX_FOCK_DIM,
            });
        }
        Ok(FockBasis { dim })
    }

    pub fn size(&self) -> usize {
        1 << self.dim
    }

    /// Masks with exactly `n` particles, ascending.
    pub fn sector(&self, n: usize) -> Vec<usize> {
        (0..self.size())
            .filter(|m| m.count_ones() as usize == n)
            .collect()
    }
}

/// Sign of moving an operator on mode `i` past the occupied modes below it.
fn parity_below(mask: usize, i: usize) -> f64 {
    if (mask & ((1 << i) - 1)).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Dense operator on Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub dim: usize,
    pub matrix: ComplexMatrix,
}

impl FockOperator {
    pub fn identity(basis: FockBasis) -> Self {
        FockOperator {
            dim: basis.dim,
            matrix: linalg::identity(basis.size()),
        }
    }

    pub fn adjoint(&self) -> Self {
        FockOperator {
            dim: self.dim,
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.matrix)
    }

    /// `exp(i theta A)` for Hermitian `A`.
    pub fn exp_i(&self, theta: f64) -> Result<Self> {
        Ok(FockOperator {
            dim: self.dim,
            matrix: hermitian_eig(&self.matrix)?.exp_i(theta),
        })
    }
}

impl Mul for &FockOperator {
    type Output = FockOperator;

    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator {
            dim: self.dim,
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

/// Creation operator `c†_i`.
pub fn creation(dim: usize, mode: usize) -> Result<FockOperator> {
    let basis = FockBasis::new(dim)?;
    if mode >= dim {
        return Err(Error::invalid("mode", format!("{mode} >= {dim}")));
    }
    let mut m = linalg::zeros(basis.size());
    for s in 0..basis.size() {
        if s & (1 << mode) == 0 {
            m[(s | (1 << mode), s)] = c(parity_below(s, mode), 0.0);
        }
    }
    Ok(FockOperator { dim, matrix: m })
}

fn small_det(m: &ComplexMatrix) -> Complex64 {
    let n = m.nrows();
    if n == 0 {
        return c(1.0, 0.0);
    }
    let mut a = m.clone();
    let mut det = c(1.0, 0.0);
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&x, &y| a[(x, k)].norm().total_cmp(&a[(y, k)].norm()))
            .unwrap();
        if a[(piv, k)].norm() == 0.0 {
            return c(0.0, 0.0);
        }
        if piv != k {
            a.swap_rows(k, piv);
            det = -det;
        }
        let p = a[(k, k)];
        det *= p;
        for i in (k + 1)..n {
            let f = a[(i, k)] / p;
            for j in (k + 1)..n {
                let t = a[(k, j)];
                a[(i, j)] -= f * t;
            }
        }
    }
    det
}

/// Multiplicative second quantization `Γ(M) = M ⊗ ... ⊗ M` on each
/// antisymmetric sector; matrix elements are minors `det M[S', S]`.
pub fn gamma(m: &ComplexMatrix) -> Result<FockOperator> {
    check_square(m)?;
    let basis = FockBasis::new(m.nrows())?;
    let d = basis.dim;
    let mut out = linalg::zeros(basis.size());
    out[(0, 0)] = c(1.0, 0.0);
    for n in 1..=d {
        let masks = basis.sector(n);
        let modes: Vec<Vec<usize>> = masks
            .iter()
            .map(|&s| (0..d).filter(|&i| s & (1 << i) != 0).collect())
            .collect();
        for (a, rows) in modes.iter().enumerate() {
            for (b, cols) in modes.iter().enumerate() {
                let minor = DMatrix::from_fn(n, n, |i, j| m[(rows[i], cols[j])]);
                out[(masks[a], masks[b])] = small_det(&minor);
            }
        }
    }
    Ok(FockOperator {
        dim: d,
        matrix: out,
    })
}

/// Additive second quantization `dΓ(A) = Σ_ij A_ij c†_i c_j`.
pub fn dgamma(a: &ComplexMatrix) -> Result<FockOperator> {
    check_square(a)?;
    let basis = FockBasis::new(a.nrows())?;
    let d = basis.dim;
    let mut out = linalg::zeros(basis.size());
    for s in 0..basis.size() {
        for j in (0..d).filter(|&j| s & (1 << j) != 0) {
            let removed = s & !(1 << j);
            let sign_j = parity_below(s, j);
            for i in (0..d).filter(|&i| removed & (1 << i) == 0) {
                let aij = a[(i, j)];
                if aij == c(0.0, 0.0) {
                    continue;
                }
                let sign = sign_j * parity_below(removed, i);
                out[(removed | (1 << i), s)] += aij * sign;
            }
        }
    }
    Ok(FockOperator {
        dim: d,
        matrix: out,
    })
}

/// Quasi-free many-body state with one-particle density matrix `rho`,
/// built mode by mode as `ν' |0><0| + ν |1><1|` in the eigenbasis of `rho`.
pub fn many_body_state(rho: &ComplexMatrix) -> Result<FockOperator> {
    let eig = hermitian_eig(rho)?;
    FockBasis::new(rho.nrows())?;
    let (min, max) = eig
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    if min < -CLAMP_WINDOW || max > 1.0 + CLAMP_WINDOW {
        return Err(Error::SpectrumOutOfRange { min, max });
    }
    let occupations: Vec<f64> = eig.values.iter().map(|e| e.clamp(0.0, 1.0)).collect();
    let basis = FockBasis::new(rho.nrows())?;
    let weights: Vec<f64> = (0..basis.size())
        .map(|s| {
            occupations
                .iter()
                .enumerate()
                .map(|(i, &nu)| if s & (1 << i) != 0 { nu } else { 1.0 - nu })
                .product()
        })
        .collect();
    let g = gamma(&eig.vectors)?;
    let mut scaled = g.matrix.clone();
    for (j, w) in weights.iter().enumerate() {
        for i in 0..basis.size() {
            scaled[(i, j)] *= *w;
        }
    }
    Ok(FockOperator {
        dim: basis.dim,
        matrix: scaled * g.matrix.adjoint(),
    })
}

/// A model lifted to Fock space in a basis where `Q` is diagonal.
pub struct FockModel {
    basis: FockBasis,
    gamma_u: ComplexMatrix,
    state: ComplexMatrix,
    /// Lead charge of every basis state.
    charges: Vec<usize>,
    max_charge: usize,
}

impl FockModel {
    pub fn new(model: &QuantumModel) -> Result<Self> {
        let d = model.dim();
        if d > MAX_ORACLE_DIM {
            return Err(Error::DimensionTooLarge {
                dim: d,
                max: MAX_ORACLE_DIM,
            });
        }
        let q = model.q();
        let (w, qdiag) = if is_diagonal(&q) {
            (
                linalg::identity(d),
                (0..d).map(|i| q[(i, i)].re).collect::<Vec<_>>(),
            )
        } else {
            let HermitianEig { values, vectors } = hermitian_eig(&q)?;
            (vectors, values)
        };
        let mut qmask = 0usize;
        for (i, &e) in qdiag.iter().enumerate() {
            if (e - 1.0).abs() <= 1e-10 {
                qmask |= 1 << i;
            } else if e.abs() > 1e-10 {
                return Err(Error::NonIntegerSpectrum { eigenvalue: e });
            }
        }
        let u = w.adjoint() * model.u() * &w;
        let rho = w.adjoint() * model.rho() * &w;
        let rho = (&rho + rho.adjoint()).scale(0.5);
        let basis = FockBasis::new(d)?;
        let charges: Vec<usize> = (0..basis.size())
            .map(|s| (s & qmask).count_ones() as usize)
            .collect();
        Ok(FockModel {
            basis,
            gamma_u: gamma(&u)?.matrix,
            state: many_body_state(&rho)?.matrix,
            max_charge: qmask.count_ones() as usize,
            charges,
        })
    }

    fn phases(&self, theta: f64) -> Vec<Complex64> {
        self.charges
            .iter()
            .map(|&n| Complex64::from_polar(1.0, theta * n as f64))
            .collect()
    }

    /// `D X D'` for diagonal phase vectors.
    fn sandwich(left: &[Complex64], x: &ComplexMatrix, right: &[Complex64]) -> ComplexMatrix {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| left[i] * x[(i, j)] * right[j])
    }

    /// Probability of each history `(initial charge i, final charge j)`.
    pub fn joint_probabilities(&self) -> Vec<Vec<f64>> {
        let r = self.max_charge;
        let size = self.basis.size();
        let mut joint = vec![vec![0.0; r + 1]; r + 1];
        for (i, row) in joint.iter_mut().enumerate() {
            let idx: Vec<usize> = (0..size).filter(|&s| self.charges[s] == i).collect();
            let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.state[(idx[a], idx[b])]);
            if linalg::trace(&block).re < HISTORY_CUTOFF {
                continue;
            }
            let cols = DMatrix::from_fn(size, idx.len(), |a, b| self.gamma_u[(a, idx[b])]);
            let evolved = &cols * &block;
            for a in 0..size {
                let mut acc = c(0.0, 0.0);
                for b in 0..idx.len() {
                    acc += evolved[(a, b)] * cols[(a, b)].conj();
                }
                row[self.charges[a]] += acc.re;
            }
        }
        joint
    }

    /// Two-measurement generating function, with collapse at the first
    /// measurement.
    pub fn chi_two_measurement(&self, lambda: f64) -> Complex64 {
        let joint = self.joint_probabilities();
        let mut chi = c(0.0, 0.0);
        for (i, row) in joint.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                chi += p * Complex64::from_polar(1.0, lambda * (j as f64 - i as f64));
            }
        }
        chi
    }

    pub fn distribution(&self) -> CountingDistribution {
        let joint = self.joint_probabilities();
        let r = self.max_charge as i64;
        let mut p = vec![0.0; (2 * r + 1) as usize];
        for (i, row) in joint.iter().enumerate() {
            for (j, &w) in row.iter().enumerate() {
                p[(j as i64 - i as i64 + r) as usize] += w;
            }
        }
        CountingDistribution::new(-r, 1.0, p)
    }

    /// `Tr(Γ(U)† e^{iλN} Γ(U) e^{-iλN} ϱ)`, the two-measurement formula
    /// without collapse.
    pub fn chi_without_collapse(&self, lambda: f64) -> Complex64 {
        let fwd = self.phases(lambda);
        let back = self.phases(-lambda);
        let ones = vec![c(1.0, 0.0); fwd.len()];
        let mid = Self::sandwich(&fwd, &self.gamma_u, &ones);
        let op = self.gamma_u.adjoint() * mid;
        let op = Self::sandwich(&ones, &op, &back);
        linalg::trace(&(op * &self.state))
    }

    /// Spin-coupled counting: `Tr(e^{-iλN/2} Γ(U)† e^{iλN} Γ(U) e^{-iλN/2} ϱ)`.
    pub fn chi_spin_coupling(&self, lambda: f64) -> Complex64 {
        let half = self.phases(-lambda / 2.0);
        let full = self.phases(lambda);
        let ones = vec![c(1.0, 0.0); full.len()];
        let mid = self.gamma_u.adjoint() * Self::sandwich(&full, &self.gamma_u, &ones);
        let op = Self::sandwich(&half, &mid, &half);
        linalg::trace(&(op * &self.state))
    }

    /// Single measurement of `dΓ(U† Q U - Q)`.
    pub fn chi_single_measurement(&self, lambda: f64) -> Result<Complex64> {
        let n: Vec<Complex64> = self.charges.iter().map(|&q| c(q as f64, 0.0)).collect();
        let ones = vec![c(1.0, 0.0); n.len()];
        let nq = Self::sandwich(&n, &self.gamma_u, &ones);
        let transmitted =
            self.gamma_u.adjoint() * nq - DMatrix::from_diagonal(&nalgebra::DVector::from_vec(n));
        let e = hermitian_eig(&transmitted)?.exp_i(lambda);
        Ok(linalg::trace(&(e * &self.state)))
    }
}

fn is_diagonal(m: &ComplexMatrix) -> bool {
    let n = m.nrows();
    (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == c(0.0, 0.0)))
}

/// Exact generating function of the two-measurement protocol on Fock space.
pub fn chi_oracle(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Ok(FockModel::new(model)?.chi_two_measurement(lambda))
}

/// Exact transfer distribution of the two-measurement protocol.
pub fn distribution_oracle(model: &QuantumModel) -> Result<CountingDistribution> {
    Ok(FockModel::new(model)?.distribution())
}
