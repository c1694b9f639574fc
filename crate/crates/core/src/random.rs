//! Seeded random matrices for property tests and synthetic models.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn random_matrix<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_matrix(rng, dim);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-distributed unitary: QR of a complex Gaussian matrix with the
/// diagonal of R made positive.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> ComplexMatrix {
    let g = random_matrix(rng, dim);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    q
}
