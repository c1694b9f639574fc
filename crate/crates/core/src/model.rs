//! Single-particle transport models: an evolution `U`, a one-particle
//! density matrix `rho` and a lead-charge observable `Q` on one Hilbert space.
//!
//! A model is stored as a direct sum of independent sectors. Two modes belong
//! to the same sector whenever any of `U`, `rho` or `Q` couples them, so every
//! determinant formula factorizes over sectors. Dense models without structure
//! form a single sector; the scattering builders produce many small ones.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, check_square, commutator, hermitian_eig, hermiticity_deviation, identity, max_abs,
    max_abs_diff, unitarity_residual, ComplexMatrix,
};
use crate::random::haar_unitary;

pub const UNITARITY_TOL: f64 = 1e-10;
pub const PROJECTION_TOL: f64 = 1e-10;
pub const COMMUTING_TOL: f64 = 1e-10;
/// Eigenvalues of `rho` within this distance outside [0, 1] are clamped.
pub const CLAMP_WINDOW: f64 = 1e-12;
/// Minimum distance between the chemical potential and the spectrum.
pub const FERMI_GAP_TOL: f64 = 1e-9;

/// One block of a direct-sum model.
#[derive(Debug, Clone, PartialEq)]
pub struct Sector {
    /// Global mode indices, ascending.
    pub modes: Vec<usize>,
    pub u: ComplexMatrix,
    pub rho: ComplexMatrix,
    pub q: ComplexMatrix,
}

impl Sector {
    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// `1 - rho`.
    pub fn rho_prime(&self) -> ComplexMatrix {
        identity(self.dim()) - &self.rho
    }

    /// `U^dagger X U`.
    pub fn conjugate(&self, x: &ComplexMatrix) -> ComplexMatrix {
        self.u.adjoint() * x * &self.u
    }

    /// `Q_U - Q`, the transmitted-charge operator.
    pub fn delta_q(&self) -> ComplexMatrix {
        self.conjugate(&self.q) - &self.q
    }

    pub fn commutator_norm(&self) -> f64 {
        max_abs(&commutator(&self.q, &self.rho))
    }
}

/// `(U, rho, Q)` with cached structural flags.
#[derive(Debug, Clone)]
pub struct QuantumModel {
    dim: usize,
    sectors: Vec<Sector>,
    commutator_norm: f64,
    q_projection: bool,
    pure: bool,
}

impl QuantumModel {
    /// Builds a model from dense matrices, splitting it into sectors.
    ///
    /// Only shapes and finiteness are enforced here; physical validity is
    /// reported by [`QuantumModel::validate`].
    pub fn new(u: ComplexMatrix, rho: ComplexMatrix, q: ComplexMatrix) -> Result<Self> {
        check_square(&u)?;
        check_square(&rho)?;
        check_square(&q)?;
        let dim = u.nrows();
        if dim == 0 {
            return Err(Error::invalid("dim", "model dimension must be positive"));
        }
        for m in [&rho, &q] {
            if m.nrows() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: m.nrows(),
                });
            }
        }
        let rho = clamp_occupations(rho);
        let sectors = split_sectors(&u, &rho, &q);
        Self::assemble(dim, sectors)
    }

    /// Builds a model from explicit sectors whose modes partition `0..dim`.
    pub fn from_sectors(dim: usize, sectors: Vec<Sector>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for s in &sectors {
            for m in [&s.u, &s.rho, &s.q] {
                check_square(m)?;
                if m.nrows() != s.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: s.dim(),
                        found: m.nrows(),
                    });
                }
            }
            for &mode in &s.modes {
                if mode >= dim || seen[mode] {
                    return Err(Error::invalid(
                        "sectors",
                        format!("mode {mode} out of range or repeated"),
                    ));
                }
                seen[mode] = true;
            }
        }
        if dim == 0 || seen.iter().any(|&s| !s) {
            return Err(Error::invalid("sectors", "sectors must cover every mode"));
        }
        Self::assemble(dim, sectors)
    }

    fn assemble(dim: usize, mut sectors: Vec<Sector>) -> Result<Self> {
        sectors.sort_by_key(|s| s.modes[0]);
        let commutator_norm = sectors
            .iter()
            .map(Sector::commutator_norm)
            .fold(0.0, f64::max);
        let q_projection = sectors.iter().all(|s| {
            hermiticity_deviation(&s.q) <= PROJECTION_TOL
                && max_abs_diff(&(&s.q * &s.q), &s.q) <= PROJECTION_TOL
        });
        let pure = sectors
            .iter()
            .all(|s| max_abs_diff(&(&s.rho * &s.rho), &s.rho) <= PROJECTION_TOL);
        Ok(QuantumModel {
            dim,
            sectors,
            commutator_norm,
            q_projection,
            pure,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    /// `max |[Q, rho]|`.
    pub fn commutator_norm(&self) -> f64 {
        self.commutator_norm
    }

    /// Whether the state commutes with the lead charge (no collapse at the
    /// first measurement).
    pub fn is_commuting(&self) -> bool {
        self.commutator_norm <= COMMUTING_TOL
    }

    pub fn q_is_projection(&self) -> bool {
        self.q_projection
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    fn dense(&self, pick: impl Fn(&Sector) -> &ComplexMatrix) -> ComplexMatrix {
        let mut out = linalg::zeros(self.dim);
        for s in &self.sectors {
            let m = pick(s);
            for (a, &i) in s.modes.iter().enumerate() {
                for (b, &j) in s.modes.iter().enumerate() {
                    out[(i, j)] = m[(a, b)];
                }
            }
        }
        out
    }

    pub fn u(&self) -> ComplexMatrix {
        self.dense(|s| &s.u)
    }

    pub fn rho(&self) -> ComplexMatrix {
        self.dense(|s| &s.rho)
    }

    pub fn q(&self) -> ComplexMatrix {
        self.dense(|s| &s.q)
    }

    /// The same evolution and charge with `rho` replaced by `1 - rho`.
    pub fn particle_hole(&self) -> QuantumModel {
        let sectors = self
            .sectors
            .iter()
            .map(|s| Sector {
                rho: s.rho_prime(),
                ..s.clone()
            })
            .collect();
        Self::assemble(self.dim, sectors).expect("sector shapes unchanged")
    }

    /// `tr(rho Q)`.
    pub fn lead_occupation(&self) -> f64 {
        self.sectors
            .iter()
            .map(|s| linalg::trace(&(&s.rho * &s.q)).re)
            .sum()
    }

    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport {
            unitarity_residual: 0.0,
            rho_hermiticity: 0.0,
            rho_min_eigenvalue: f64::INFINITY,
            rho_max_eigenvalue: f64::NEG_INFINITY,
            q_hermiticity: 0.0,
            q_projection_residual: 0.0,
            commutator_norm: self.commutator_norm,
            unitary: true,
            rho_bounded: true,
            q_hermitian: true,
            q_projection: true,
            commuting: true,
        };
        for s in &self.sectors {
            r.unitarity_residual = r.unitarity_residual.max(unitarity_residual(&s.u));
            r.rho_hermiticity = r.rho_hermiticity.max(hermiticity_deviation(&s.rho));
            let sym = (&s.rho + s.rho.adjoint()).scale(0.5);
            for e in SymmetricEigen::new(sym).eigenvalues.iter() {
                r.rho_min_eigenvalue = r.rho_min_eigenvalue.min(*e);
                r.rho_max_eigenvalue = r.rho_max_eigenvalue.max(*e);
            }
            r.q_hermiticity = r.q_hermiticity.max(hermiticity_deviation(&s.q));
            r.q_projection_residual = r
                .q_projection_residual
                .max(max_abs_diff(&(&s.q * &s.q), &s.q));
        }
        r.unitary = r.unitarity_residual <= UNITARITY_TOL;
        r.rho_bounded = r.rho_hermiticity <= linalg::HERMITIAN_TOL
            && r.rho_min_eigenvalue >= -CLAMP_WINDOW
            && r.rho_max_eigenvalue <= 1.0 + CLAMP_WINDOW;
        r.q_hermitian = r.q_hermiticity <= linalg::HERMITIAN_TOL;
        r.q_projection = r.q_projection_residual <= PROJECTION_TOL;
        r.commuting = r.commutator_norm <= COMMUTING_TOL;
        r
    }

    /// Errors unless `U` is unitary, `0 <= rho <= 1` and `Q` is Hermitian.
    pub fn ensure_valid(&self) -> Result<()> {
        let r = self.validate();
        if !r.q_hermitian {
            return Err(Error::NotHermitian {
                deviation: r.q_hermiticity,
            });
        }
        if !r.rho_bounded {
            if r.rho_hermiticity > linalg::HERMITIAN_TOL {
                return Err(Error::NotHermitian {
                    deviation: r.rho_hermiticity,
                });
            }
            return Err(Error::SpectrumOutOfRange {
                min: r.rho_min_eigenvalue,
                max: r.rho_max_eigenvalue,
            });
        }
        if !r.unitary {
            return Err(Error::invalid(
                "U",
                format!("not unitary (residual {:e})", r.unitarity_residual),
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            dim: self.dim,
            u: flatten(&self.u()),
            rho: flatten(&self.rho()),
            q: flatten(&self.q()),
        }
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        let u = unflatten(json.dim, &json.u, "U")?;
        let rho = unflatten(json.dim, &json.rho, "rho")?;
        let q = unflatten(json.dim, &json.q, "Q")?;
        QuantumModel::new(u, rho, q)
    }
}

/// Per-invariant residuals with pass/fail flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub unitarity_residual: f64,
    pub rho_hermiticity: f64,
    pub rho_min_eigenvalue: f64,
    pub rho_max_eigenvalue: f64,
    pub q_hermiticity: f64,
    pub q_projection_residual: f64,
    pub commutator_norm: f64,
    pub unitary: bool,
    pub rho_bounded: bool,
    pub q_hermitian: bool,
    pub q_projection: bool,
    pub commuting: bool,
}

impl ValidationReport {
    /// All invariants hold, including the projection and commuting claims.
    pub fn all_pass(&self) -> bool {
        self.unitary && self.rho_bounded && self.q_hermitian && self.q_projection && self.commuting
    }
}

/// Serialized model: complex entries as `[re, im]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelJson {
    pub dim: usize,
    #[serde(rename = "U")]
    pub u: Vec<[f64; 2]>,
    pub rho: Vec<[f64; 2]>,
    #[serde(rename = "Q")]
    pub q: Vec<[f64; 2]>,
}

fn flatten(m: &ComplexMatrix) -> Vec<[f64; 2]> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let z = m[(i, j)];
            out.push([z.re, z.im]);
        }
    }
    out
}

fn unflatten(dim: usize, entries: &[[f64; 2]], name: &'static str) -> Result<ComplexMatrix> {
    if entries.len() != dim * dim {
        return Err(Error::invalid(
            name,
            format!("expected {} entries, found {}", dim * dim, entries.len()),
        ));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        let [re, im] = entries[i * dim + j];
        c(re, im)
    }))
}

fn clamp_occupations(rho: ComplexMatrix) -> ComplexMatrix {
    if hermiticity_deviation(&rho) > linalg::HERMITIAN_TOL {
        return rho;
    }
    let Ok(eig) = hermitian_eig(&rho) else {
        return rho;
    };
    let needs_clamp = eig
        .values
        .iter()
        .any(|&e| (-CLAMP_WINDOW..0.0).contains(&e) || (e > 1.0 && e <= 1.0 + CLAMP_WINDOW));
    let out_of_window = eig
        .values
        .iter()
        .any(|&e| !(-CLAMP_WINDOW..=1.0 + CLAMP_WINDOW).contains(&e));
    if needs_clamp && !out_of_window {
        eig.apply(|e| c(e.clamp(0.0, 1.0), 0.0))
    } else {
        rho
    }
}

/// Connected components of the coupling graph of `U`, `rho` and `Q`.
fn split_sectors(u: &ComplexMatrix, rho: &ComplexMatrix, q: &ComplexMatrix) -> Vec<Sector> {
    let n = u.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let zero = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j && (u[(i, j)] != zero || rho[(i, j)] != zero || q[(i, j)] != zero) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot[root] == usize::MAX {
            slot[root] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[root]].push(i);
    }
    groups
        .into_iter()
        .map(|modes| {
            let sub = |m: &ComplexMatrix| {
                DMatrix::from_fn(modes.len(), modes.len(), |a, b| m[(modes[a], modes[b])])
            };
            Sector {
                u: sub(u),
                rho: sub(rho),
                q: sub(q),
                modes,
            }
        })
        .collect()
}

/// Thermal occupation `(1 + exp(beta (H - mu)))^{-1}`.
pub fn fermi_dirac(h: &ComplexMatrix, beta: f64, mu: f64) -> Result<ComplexMatrix> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta", "must be finite and positive"));
    }
    let eig = hermitian_eig(h)?;
    Ok(eig.apply(|e| c(fermi(beta * (e - mu)), 0.0)))
}

/// Logistic function `1 / (1 + e^x)` without overflow.
pub fn fermi(x: f64) -> f64 {
    if x > 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Projection onto the eigenvectors of `H` with eigenvalue below `mu`.
pub fn fermi_sea(h: &ComplexMatrix, mu: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    if let Some(&e) = eig.values.iter().find(|&&e| (e - mu).abs() < FERMI_GAP_TOL) {
        return Err(Error::DegenerateFermiLevel {
            eigenvalue: e,
            mu,
            tolerance: FERMI_GAP_TOL,
        });
    }
    Ok(eig.apply(|e| c(if e <= mu { 1.0 } else { 0.0 }, 0.0)))
}

/// Families of synthetic models used by property tests and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Diagonal 0/1 occupations in the lead basis.
    PureCommuting,
    /// Diagonal occupations in (0, 1) in the lead basis.
    MixedCommuting,
    /// Occupations in (0, 1) in a Haar-random basis.
    MixedGeneral,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pure-commuting" => Ok(ModelKind::PureCommuting),
            "mixed-commuting" => Ok(ModelKind::MixedCommuting),
            "mixed-general" => Ok(ModelKind::MixedGeneral),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

/// Deterministic random model: Haar `U`, diagonal 0/1 projection `Q`.
pub fn random_model(seed: u64, dim: usize, kind: ModelKind) -> Result<QuantumModel> {
    if dim < 2 {
        return Err(Error::invalid("dim", "random models need dim >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(&mut rng, dim);

    let rank = rng.random_range(1..dim);
    let mut modes: Vec<usize> = (0..dim).collect();
    modes.shuffle(&mut rng);
    let mut qdiag = vec![0.0; dim];
    for &m in &modes[..rank] {
        qdiag[m] = 1.0;
    }
    let q = linalg::diag_real(&qdiag);

    let rho = match kind {
        ModelKind::PureCommuting => {
            let occ: Vec<f64> = (0..dim)
                .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            linalg::diag_real(&occ)
        }
        ModelKind::MixedCommuting => {
            let occ: Vec<f64> = (0..dim).map(|_| open_unit(&mut rng)).collect();
            linalg::diag_real(&occ)
        }
        ModelKind::MixedGeneral => {
            let occ: Vec<f64> = (0..dim).map(|_| open_unit(&mut rng)).collect();
            let v = haar_unitary(&mut rng, dim);
            let r = &v * linalg::diag_real(&occ) * v.adjoint();
            (&r + r.adjoint()).scale(0.5)
        }
    };
    QuantumModel::new(u, rho, q)
}

fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let x: f64 = rng.random();
        if x > 0.0 {
            return x;
        }
    }
}
