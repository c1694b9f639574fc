//! Generating functions of transferred charge as single-particle
//! determinants, their phase-continuous logarithm, cumulants, transfer
//! distributions and the thermal/shot split of the noise.
//!
//! All five protocols share the form `χ(λ) = det(ρ' + Y(λ) ρ)` (or a
//! variant of it), evaluated sector by sector: for a direct-sum model the
//! determinant is the product of the sector determinants.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{
    self, c, expm, hermitian_eig, hermiticity_deviation, log_det, wrap_phase, ComplexMatrix,
    HermitianEig, LogDet,
};
use crate::model::{QuantumModel, Sector};
use crate::partitions;

/// Tolerance below which a distribution entry counts as negative.
pub const NEGATIVITY_TOL: f64 = 1e-9;
/// Base step of the local finite-difference grid around `λ = 0`.
pub const LOCAL_STEP: f64 = 1e-2;
/// Number of local grid points on each side of `λ = 0`.
pub const LOCAL_HALF_WIDTH: usize = 96;
pub const MAX_CUMULANT_ORDER: usize = 6;
/// Richardson levels (steps `h, 2h, 4h, 8h`).
const RICHARDSON_LEVELS: usize = 4;
/// Relative error estimate above which extrapolation is declared unconverged.
const RICHARDSON_TOL: f64 = 1e-3;

/// Counting protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Two measurements of the lead charge, state commuting with the charge:
    /// `det(ρ' + e^{iλQ_U} e^{-iλQ} ρ)`.
    LesLev,
    /// Phase-regularized determinant, stable under energy cutoffs.
    Regularized,
    /// One measurement of `U†QU - Q`.
    SingleMeasurement,
    /// Two measurements including the collapse at the first one.
    Collapse,
    /// Counting field read out from a coupled spin precession.
    SpinCoupling,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::LesLev,
        Variant::Regularized,
        Variant::SingleMeasurement,
        Variant::Collapse,
        Variant::SpinCoupling,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Variant::LesLev => "les-lev",
            Variant::Regularized => "regularized",
            Variant::SingleMeasurement => "single-measurement",
            Variant::Collapse => "collapse",
            Variant::SpinCoupling => "spin-coupling",
        }
    }

    /// Period of `χ` in `λ` when the charge has integer spectrum.
    pub fn period(&self) -> f64 {
        match self {
            Variant::SpinCoupling => 4.0 * PI,
            _ => 2.0 * PI,
        }
    }

    /// `χ(λ)` for this protocol.
    pub fn chi(&self, model: &QuantumModel, lambda: f64) -> Result<Complex64> {
        ChiEvaluator::new(model, *self)?.chi(lambda)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// `exp(iθX)` for a fixed matrix `X`, via the spectral route when `X` is
/// Hermitian and Pade otherwise.
#[derive(Debug, Clone)]
enum Exponent {
    Hermitian(HermitianEig),
    General(ComplexMatrix),
}

impl Exponent {
    fn new(x: ComplexMatrix) -> Result<Self> {
        if hermiticity_deviation(&x) <= linalg::HERMITIAN_TOL {
            Ok(Exponent::Hermitian(hermitian_eig(&x)?))
        } else {
            Ok(Exponent::General(x))
        }
    }

    fn exp_i(&self, theta: f64) -> ComplexMatrix {
        match self {
            Exponent::Hermitian(e) => e.exp_i(theta),
            Exponent::General(x) => expm(&x.map(|z| z * c(0.0, theta))),
        }
    }
}

/// Precomputed per-sector data for one protocol.
#[derive(Debug, Clone)]
struct SectorKernel {
    rho: ComplexMatrix,
    rho_prime: ComplexMatrix,
    kind: KernelKind,
}

#[derive(Debug, Clone)]
enum KernelKind {
    /// Exponents of `Q_U` and `Q`.
    Charges {
        q_u: Exponent,
        q: Exponent,
    },
    Regularized {
        rho_u_q_u: Exponent,
        rho_q: Exponent,
        rho_prime_u_q_u: Exponent,
        rho_prime_q: Exponent,
    },
    Transmitted {
        delta_q: Exponent,
    },
}

impl SectorKernel {
    fn new(s: &Sector, variant: Variant) -> Result<Self> {
        let rho = s.rho.clone();
        let rho_prime = s.rho_prime();
        let kind = match variant {
            Variant::LesLev | Variant::Collapse | Variant::SpinCoupling => KernelKind::Charges {
                q_u: Exponent::new(s.conjugate(&s.q))?,
                q: Exponent::new(s.q.clone())?,
            },
            Variant::Regularized => {
                let q_u = s.conjugate(&s.q);
                KernelKind::Regularized {
                    rho_u_q_u: Exponent::new(s.conjugate(&rho) * &q_u)?,
                    rho_q: Exponent::new(&rho * &s.q)?,
                    rho_prime_u_q_u: Exponent::new(s.conjugate(&rho_prime) * &q_u)?,
                    rho_prime_q: Exponent::new(&rho_prime * &s.q)?,
                }
            }
            Variant::SingleMeasurement => KernelKind::Transmitted {
                delta_q: Exponent::new(s.delta_q())?,
            },
        };
        Ok(SectorKernel {
            rho,
            rho_prime,
            kind,
        })
    }

    /// The matrix whose determinant is the sector's contribution; `tau` is
    /// only used by the collapse protocol.
    fn matrix(&self, variant: Variant, lambda: f64, tau: f64) -> ComplexMatrix {
        match (&self.kind, variant) {
            (KernelKind::Charges { q_u, q }, Variant::LesLev) => {
                &self.rho_prime + q_u.exp_i(lambda) * q.exp_i(-lambda) * &self.rho
            }
            (KernelKind::Charges { q_u, q }, Variant::Collapse) => {
                &self.rho_prime
                    + q.exp_i(tau) * q_u.exp_i(lambda) * q.exp_i(-(lambda + tau)) * &self.rho
            }
            (KernelKind::Charges { q_u, q }, Variant::SpinCoupling) => {
                let half = q.exp_i(-lambda / 2.0);
                &self.rho_prime + &half * q_u.exp_i(lambda) * &half * &self.rho
            }
            (
                KernelKind::Regularized {
                    rho_u_q_u,
                    rho_q,
                    rho_prime_u_q_u,
                    rho_prime_q,
                },
                _,
            ) => {
                rho_u_q_u.exp_i(-lambda) * &self.rho_prime * rho_q.exp_i(lambda)
                    + rho_prime_u_q_u.exp_i(lambda) * &self.rho * rho_prime_q.exp_i(-lambda)
            }
            (KernelKind::Transmitted { delta_q }, _) => {
                &self.rho_prime + delta_q.exp_i(lambda) * &self.rho
            }
            _ => unreachable!("kernel built for a different variant"),
        }
    }
}

/// Evaluates one protocol's generating function on one model, caching the
/// eigen-decompositions that do not depend on `λ`.
#[derive(Debug, Clone)]
pub struct ChiEvaluator {
    variant: Variant,
    dim: usize,
    kernels: Vec<SectorKernel>,
}

impl ChiEvaluator {
    /// Checks the protocol's preconditions: a valid model, a commuting state
    /// for `LesLev`, and a projection charge for `Collapse`.
    pub fn new(model: &QuantumModel, variant: Variant) -> Result<Self> {
        if variant == Variant::LesLev && !model.is_commuting() {
            return Err(Error::NonCommutingState {
                deviation: model.commutator_norm(),
            });
        }
        Self::unchecked(model, variant)
    }

    /// Like [`ChiEvaluator::new`] but evaluates the determinant even when the
    /// state does not commute with the charge, where it no longer has a
    /// counting interpretation.
    pub fn unchecked(model: &QuantumModel, variant: Variant) -> Result<Self> {
        model.ensure_valid()?;
        if variant == Variant::Collapse && !model.q_is_projection() {
            return Err(non_integer_charge(model));
        }
        let kernels = model
            .sectors()
            .iter()
            .map(|s| SectorKernel::new(s, variant))
            .collect::<Result<Vec<_>>>()?;
        Ok(ChiEvaluator {
            variant,
            dim: model.dim(),
            kernels,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Per-sector log-determinants (one entry for the collapse protocol,
    /// whose Fourier sum couples the sectors).
    pub fn log_parts(&self, lambda: f64) -> Result<Vec<LogDet>> {
        if self.variant == Variant::Collapse {
            return Ok(vec![self.collapse(lambda)?]);
        }
        self.kernels
            .iter()
            .map(|k| log_det(&k.matrix(self.variant, lambda, 0.0)))
            .collect()
    }

    fn collapse(&self, lambda: f64) -> Result<LogDet> {
        // integrand is a trigonometric polynomial in tau of degree <= dim
        let points = self.dim + 1;
        let mut sum = c(0.0, 0.0);
        for k in 0..points {
            let tau = 2.0 * PI * k as f64 / points as f64;
            let mut total = LogDet::ONE;
            for kernel in &self.kernels {
                total = total.combine(&log_det(&kernel.matrix(self.variant, lambda, tau))?);
            }
            sum += total.value();
        }
        sum /= points as f64;
        if sum.norm() < f64::MIN_POSITIVE {
            return Err(Error::SingularMatrix { pivot: 0 });
        }
        Ok(LogDet {
            log_modulus: sum.norm().ln(),
            phase: sum.arg(),
            continued: false,
        })
    }

    pub fn log_det(&self, lambda: f64) -> Result<LogDet> {
        Ok(self
            .log_parts(lambda)?
            .iter()
            .fold(LogDet::ONE, |acc, p| acc.combine(p)))
    }

    pub fn chi(&self, lambda: f64) -> Result<Complex64> {
        Ok(self.log_det(lambda)?.value())
    }
}

fn non_integer_charge(model: &QuantumModel) -> Error {
    let eigenvalue = model
        .sectors()
        .iter()
        .filter_map(|s| hermitian_eig(&s.q).ok())
        .flat_map(|e| e.values)
        .find(|e| e.abs() > 1e-10 && (e - 1.0).abs() > 1e-10)
        .unwrap_or(f64::NAN);
    Error::NonIntegerSpectrum { eigenvalue }
}

/// Levitov-Lesovik determinant; requires `[Q, ρ] = 0`.
pub fn chi_les_lev(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Variant::LesLev.chi(model, lambda)
}

/// Regularized determinant
/// `det(e^{-iλρ_U Q_U} ρ' e^{iλρQ} + e^{iλρ'_U Q_U} ρ e^{-iλρ'Q})`.
pub fn chi_regularized(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Variant::Regularized.chi(model, lambda)
}

/// Single measurement of the transmitted charge: `det(ρ' + e^{iλ(U†QU-Q)} ρ)`.
pub fn chi_single_measurement(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Variant::SingleMeasurement.chi(model, lambda)
}

/// Two measurements with collapse:
/// `(1/M) Σ_k det(ρ' + e^{iτ_k Q} U† e^{iλQ} U e^{-i(λ+τ_k)Q} ρ)`.
pub fn chi_collapse(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Variant::Collapse.chi(model, lambda)
}

/// Spin-coupled protocol: `det(ρ' + e^{-iλQ/2} U† e^{iλQ} U e^{-iλQ/2} ρ)`.
pub fn chi_spin_coupling(model: &QuantumModel, lambda: f64) -> Result<Complex64> {
    Variant::SpinCoupling.chi(model, lambda)
}

/// Anything that yields `log χ(λ)` as a list of independently continuous
/// parts (their sum is `log χ`).
pub trait LogChiSource: Sync {
    fn log_parts(&self, lambda: f64) -> Result<Vec<Complex64>>;
}

impl LogChiSource for ChiEvaluator {
    fn log_parts(&self, lambda: f64) -> Result<Vec<Complex64>> {
        Ok(ChiEvaluator::log_parts(self, lambda)?
            .iter()
            .map(LogDet::ln)
            .collect())
    }
}

/// Wraps a closed-form `χ`.
pub struct ClosedForm<F>(pub F);

impl<F> LogChiSource for ClosedForm<F>
where
    F: Fn(f64) -> Complex64 + Sync,
{
    fn log_parts(&self, lambda: f64) -> Result<Vec<Complex64>> {
        let z = (self.0)(lambda);
        if z.norm() < f64::MIN_POSITIVE {
            return Err(Error::UnwrapFailure {
                lambda,
                reason: "generating function vanishes".into(),
            });
        }
        Ok(vec![z.ln()])
    }
}

/// `log χ` on the fine symmetric grid `λ_j = j·LOCAL_STEP`, `|j| <= LOCAL_HALF_WIDTH`,
/// continued from `λ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalLogGrid {
    pub step: f64,
    /// Index `j + LOCAL_HALF_WIDTH` holds `log χ(j·step)`.
    pub log_values: Vec<Complex64>,
}

impl LocalLogGrid {
    pub fn sample<S: LogChiSource + ?Sized>(source: &S) -> Result<Self> {
        let n = LOCAL_HALF_WIDTH as i64;
        let raw: Vec<Vec<Complex64>> = (-n..=n)
            .into_par_iter()
            .map(|j| source.log_parts(j as f64 * LOCAL_STEP))
            .collect::<Result<_>>()?;
        let center = LOCAL_HALF_WIDTH;
        let parts = raw[center].len();
        let mut total = vec![c(0.0, 0.0); raw.len()];
        for p in 0..parts {
            let mut cont = vec![c(0.0, 0.0); raw.len()];
            cont[center] = c(raw[center][p].re, wrap_phase(raw[center][p].im));
            for dir in [1i64, -1] {
                let mut prev = center;
                for step in 1..=LOCAL_HALF_WIDTH {
                    let idx = (center as i64 + dir * step as i64) as usize;
                    let d = wrap_phase(raw[idx][p].im - raw[prev][p].im);
                    if d.abs() > PI / 2.0 {
                        return Err(Error::UnwrapFailure {
                            lambda: (idx as f64 - center as f64) * LOCAL_STEP,
                            reason: format!("phase jump {d:.3} on the local grid"),
                        });
                    }
                    cont[idx] = c(raw[idx][p].re, cont[prev].im + d);
                    prev = idx;
                }
            }
            for (t, v) in total.iter_mut().zip(cont) {
                *t += v;
            }
        }
        Ok(LocalLogGrid {
            step: LOCAL_STEP,
            log_values: total,
        })
    }

    fn at(&self, j: i64) -> Complex64 {
        self.log_values[(j + LOCAL_HALF_WIDTH as i64) as usize]
    }
}

/// Samples of `χ` on a uniform grid over one period, with the logarithm
/// continued from `λ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiSamples {
    pub variant: Option<Variant>,
    /// Length of the sampled interval `[0, period)`.
    pub period: f64,
    /// Whether the transferred charge lives on the lattice `(2π/period)·Z`.
    pub lattice: bool,
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub log_values: Vec<Complex64>,
    pub local: LocalLogGrid,
}

impl ChiSamples {
    /// Samples an arbitrary source; `lattice` asserts the charge spectrum.
    pub fn from_source<S: LogChiSource + ?Sized>(
        source: &S,
        grid_size: usize,
        period: f64,
        lattice: bool,
    ) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::GridTooCoarse {
                size: grid_size,
                required: 2,
            });
        }
        let lambdas: Vec<f64> = (0..grid_size)
            .map(|k| period * k as f64 / grid_size as f64)
            .collect();
        let step = period / grid_size as f64;
        let raw: Vec<Vec<Complex64>> = lambdas
            .par_iter()
            .map(|&l| source.log_parts(l))
            .collect::<Result<_>>()?;
        let mids: Vec<Vec<Complex64>> = lambdas[..grid_size - 1]
            .par_iter()
            .map(|&l| source.log_parts(l + step / 2.0))
            .collect::<Result<_>>()?;
        let initial: Complex64 = raw[0].iter().sum();
        if initial.norm() > 1e-8 {
            return Err(Error::invalid(
                "model",
                format!("chi(0) = exp({initial}) differs from 1"),
            ));
        }
        let log_values = unwrap_parts(&lambdas, &raw, &mids)?;
        let mut values: Vec<Complex64> = log_values.iter().map(|z| z.exp()).collect();
        values[0] = c(1.0, 0.0);
        let mut log_values = log_values;
        log_values[0] = c(0.0, 0.0);
        Ok(ChiSamples {
            variant: None,
            period,
            lattice,
            lambdas,
            values,
            log_values,
            local: LocalLogGrid::sample(source)?,
        })
    }

    pub fn charge_step(&self) -> f64 {
        2.0 * PI / self.period
    }
}

/// Nearest-branch continuation of each part, checked against the interval
/// midpoints: a step is accepted only if both half steps stay below π/2 in
/// phase and add up to the direct step.
fn unwrap_parts(
    lambdas: &[f64],
    raw: &[Vec<Complex64>],
    mids: &[Vec<Complex64>],
) -> Result<Vec<Complex64>> {
    let n = raw.len();
    let parts = raw[0].len();
    let mut total = vec![c(0.0, 0.0); n];
    for p in 0..parts {
        let mut phase = wrap_phase(raw[0][p].im);
        total[0] += c(raw[0][p].re, phase);
        for k in 0..n - 1 {
            let (a, m, b) = (raw[k][p].im, mids[k][p].im, raw[k + 1][p].im);
            let h1 = wrap_phase(m - a);
            let h2 = wrap_phase(b - m);
            let direct = wrap_phase(b - a);
            if h1.abs() > PI / 2.0 || h2.abs() > PI / 2.0 || (h1 + h2 - direct).abs() > 1e-9 {
                return Err(Error::UnwrapFailure {
                    lambda: lambdas[k],
                    reason: format!("phase moves by {:.3} over one grid step", h1 + h2),
                });
            }
            phase += h1 + h2;
            total[k + 1] += c(raw[k + 1][p].re, phase);
        }
    }
    Ok(total)
}

/// Samples a protocol on `grid_size` points over its period.
///
/// Requires `grid_size >= (2·d + 2)·period/2π` where `d` is the largest
/// block whose log is continued: a sector, or the whole model for collapse.
/// [`distribution`] needs the full `dim` instead.
pub fn sample_chi(model: &QuantumModel, variant: Variant, grid_size: usize) -> Result<ChiSamples> {
    let period = variant.period();
    // the log is continued part by part; collapse has a single part
    let part_dim = match variant {
        Variant::Collapse => model.dim(),
        _ => model.sectors().iter().map(|s| s.dim()).max().unwrap_or(0),
    };
    let required = ((2 * part_dim + 2) as f64 * period / (2.0 * PI)).round() as usize;
    if grid_size < required {
        return Err(Error::GridTooCoarse {
            size: grid_size,
            required,
        });
    }
    let eval = ChiEvaluator::new(model, variant)?;
    let lattice = model.q_is_projection() && variant != Variant::SingleMeasurement;
    let mut s = ChiSamples::from_source(&eval, grid_size, period, lattice)?;
    s.variant = Some(variant);
    Ok(s)
}

/// How a cumulant vector was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CumulantMethod {
    FiniteDifference,
    Distribution,
    TraceFormula,
}

/// First `k_max` cumulants `⟨⟨n^k⟩⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantVector {
    pub values: Vec<f64>,
    pub method: CumulantMethod,
    /// Richardson error estimates (finite-difference method only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_estimates: Vec<f64>,
}

impl CumulantVector {
    pub fn new(values: Vec<f64>, method: CumulantMethod) -> Self {
        CumulantVector {
            values,
            method,
            error_estimates: Vec::new(),
        }
    }

    pub fn k_max(&self) -> usize {
        self.values.len()
    }

    /// `κ_k`, 1-based.
    pub fn get(&self, k: usize) -> f64 {
        self.values[k - 1]
    }
}

// Central differences of second order on the minimal stencil, offsets -r..=r.
const STENCILS: [&[f64]; MAX_CUMULANT_ORDER] = [
    &[-0.5, 0.0, 0.5],
    &[1.0, -2.0, 1.0],
    &[-0.5, 1.0, 0.0, -1.0, 0.5],
    &[1.0, -4.0, 6.0, -4.0, 1.0],
    &[-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5],
    &[1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0],
];

/// Step multiplier (in units of `LOCAL_STEP`) for the smallest Richardson
/// step of each order; higher derivatives need larger steps against roundoff.
fn step_multiplier(order: usize) -> usize {
    match order {
        1 | 2 => 1,
        3 => 2,
        _ => 4,
    }
}

fn finite_difference(local: &LocalLogGrid, order: usize, spacing: usize) -> Complex64 {
    let weights = STENCILS[order - 1];
    let r = (weights.len() / 2) as i64;
    let h = local.step * spacing as f64;
    let mut acc = c(0.0, 0.0);
    for (m, &w) in (-r..=r).zip(weights) {
        if w != 0.0 {
            acc += local.at(m * spacing as i64) * w;
        }
    }
    acc / h.powi(order as i32)
}

/// Cumulants from derivatives of the continued `log χ` at zero.
pub fn cumulants_from_chi(samples: &ChiSamples, k_max: usize) -> Result<CumulantVector> {
    cumulants_from_local(&samples.local, k_max)
}

/// `κ_k = (-i d/dλ)^k log χ(0)` by central differences with steps
/// `h, 2h, 4h, 8h` and Richardson extrapolation in `h²`.
pub fn cumulants_from_local(local: &LocalLogGrid, k_max: usize) -> Result<CumulantVector> {
    if k_max == 0 || k_max > MAX_CUMULANT_ORDER {
        return Err(Error::invalid(
            "k_max",
            format!("must be in 1..={MAX_CUMULANT_ORDER}"),
        ));
    }
    let mut values = Vec::with_capacity(k_max);
    let mut errors = Vec::with_capacity(k_max);
    for order in 1..=k_max {
        let base = step_multiplier(order);
        let mut table: Vec<Complex64> = (0..RICHARDSON_LEVELS)
            .map(|l| finite_difference(local, order, base << l))
            .collect();
        let mut previous = table[0];
        for m in 1..RICHARDSON_LEVELS {
            previous = table[0];
            let factor = 4f64.powi(m as i32);
            table = table
                .windows(2)
                .map(|w| (w[0] * factor - w[1]) / (factor - 1.0))
                .collect();
        }
        let derivative = table[0];
        let rotate = c(0.0, -1.0).powu(order as u32);
        let kappa = (rotate * derivative).re;
        let estimate = (derivative - previous).norm();
        if !estimate.is_finite() || estimate > RICHARDSON_TOL * kappa.abs().max(1.0) {
            return Err(Error::StepUnderflow { order, estimate });
        }
        values.push(kappa);
        errors.push(estimate);
    }
    Ok(CumulantVector {
        values,
        method: CumulantMethod::FiniteDifference,
        error_estimates: errors,
    })
}

/// Cumulants of a protocol on a model, straight from the local grid.
pub fn cumulants(model: &QuantumModel, variant: Variant, k_max: usize) -> Result<CumulantVector> {
    let eval = ChiEvaluator::new(model, variant)?;
    cumulants_from_local(&LocalLogGrid::sample(&eval)?, k_max)
}

/// Probabilities (or quasiprobabilities) of transferring `n·charge_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingDistribution {
    pub n_min: i64,
    pub n_max: i64,
    pub charge_step: f64,
    pub p: Vec<f64>,
    /// Set when some entry is below `-NEGATIVITY_TOL`.
    pub quasi: bool,
    /// Largest discarded imaginary part.
    pub imaginary_residue: f64,
}

impl CountingDistribution {
    pub fn new(n_min: i64, charge_step: f64, p: Vec<f64>) -> Self {
        let quasi = p.iter().any(|&x| x < -NEGATIVITY_TOL);
        CountingDistribution {
            n_min,
            n_max: n_min + p.len() as i64 - 1,
            charge_step,
            p,
            quasi,
            imaginary_residue: 0.0,
        }
    }

    /// Entry for lattice index `n` (zero outside the stored range).
    pub fn probability(&self, n: i64) -> f64 {
        if n < self.n_min || n > self.n_max {
            0.0
        } else {
            self.p[(n - self.n_min) as usize]
        }
    }

    pub fn charges(&self) -> impl Iterator<Item = f64> + '_ {
        (self.n_min..=self.n_max).map(move |n| n as f64 * self.charge_step)
    }

    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn min_entry(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Raw moments `⟨n^k⟩`, `k = 1..=k_max`.
    pub fn moments(&self, k_max: usize) -> Vec<f64> {
        (1..=k_max)
            .map(|k| {
                self.charges()
                    .zip(&self.p)
                    .map(|(q, &p)| p * q.powi(k as i32))
                    .sum()
            })
            .collect()
    }

    pub fn cumulants(&self, k_max: usize) -> Result<CumulantVector> {
        let kappa = partitions::moments_to_cumulants(&self.moments(k_max))?;
        Ok(CumulantVector::new(kappa, CumulantMethod::Distribution))
    }
}

/// Inverse discrete Fourier transform of the samples.
pub fn distribution_from_chi(samples: &ChiSamples) -> Result<CountingDistribution> {
    if !samples.lattice {
        return Err(Error::NonIntegerSpectrum {
            eigenvalue: f64::NAN,
        });
    }
    Ok(distribution_from_values(
        &samples.values,
        samples.charge_step(),
    ))
}

/// `p_n = (1/M) Σ_k χ_k e^{-2πikn/M}` for `χ_k` sampled uniformly over one
/// period, with `n` centred on zero.
pub fn distribution_from_values(values: &[Complex64], charge_step: f64) -> CountingDistribution {
    let m = values.len() as i64;
    let n_min = -(m - 1) / 2;
    let n_max = m / 2;
    let mut p = Vec::with_capacity(m as usize);
    let mut residue: f64 = 0.0;
    for n in n_min..=n_max {
        let mut acc = c(0.0, 0.0);
        for (k, v) in values.iter().enumerate() {
            let angle = -2.0 * PI * ((k as i64 * n).rem_euclid(m)) as f64 / m as f64;
            acc += v * Complex64::from_polar(1.0, angle);
        }
        acc /= m as f64;
        residue = residue.max(acc.im.abs());
        p.push(acc.re);
    }
    let mut dist = CountingDistribution::new(n_min, charge_step, p);
    dist.imaginary_residue = residue;
    dist
}

/// Transfer distribution of a protocol from `grid_size` samples of `χ`.
///
/// Unlike [`sample_chi`] this never continues the logarithm, so zeros of
/// `χ` on the grid are harmless.
pub fn distribution(
    model: &QuantumModel,
    variant: Variant,
    grid_size: usize,
) -> Result<CountingDistribution> {
    let period = variant.period();
    let required = ((2 * model.dim() + 2) as f64 * period / (2.0 * PI)).round() as usize;
    if grid_size < required {
        return Err(Error::GridTooCoarse {
            size: grid_size,
            required,
        });
    }
    if !model.q_is_projection() {
        return Err(non_integer_charge(model));
    }
    if variant == Variant::SingleMeasurement {
        return Err(Error::NonIntegerSpectrum {
            eigenvalue: f64::NAN,
        });
    }
    let eval = ChiEvaluator::new(model, variant)?;
    let values = (0..grid_size)
        .into_par_iter()
        .map(|k| eval.chi(period * k as f64 / grid_size as f64))
        .collect::<Result<Vec<_>>>()?;
    Ok(distribution_from_values(&values, 2.0 * PI / period))
}

/// Mean transferred charge as `tr ρ(Q_U - Q)` and as `tr (ρ - ρ_U) Q_U`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanCharge {
    pub naive: f64,
    pub regularized: f64,
}

pub fn mean_charge(model: &QuantumModel) -> MeanCharge {
    let mut naive = 0.0;
    let mut regularized = 0.0;
    for s in model.sectors() {
        let q_u = s.conjugate(&s.q);
        naive += linalg::trace(&(&s.rho * (&q_u - &s.q))).re;
        regularized += linalg::trace(&((&s.rho - s.conjugate(&s.rho)) * &q_u)).re;
    }
    MeanCharge { naive, regularized }
}

/// `⟨⟨Q²⟩⟩` split into the source (thermal) and transmission (shot) terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSplit {
    /// `tr(ρρ'(ΔQ)²)`.
    pub thermal: f64,
    /// `½ tr((i[ΔQ, ρ])²)`.
    pub shot: f64,
}

impl NoiseSplit {
    pub fn total(&self) -> f64 {
        self.thermal + self.shot
    }
}

pub fn noise_split(model: &QuantumModel) -> NoiseSplit {
    let mut thermal = 0.0;
    let mut shot = 0.0;
    for s in model.sectors() {
        let dq = s.delta_q();
        thermal += linalg::trace(&(&s.rho * s.rho_prime() * &dq * &dq)).re;
        let comm = (&dq * &s.rho - &s.rho * &dq).map(|z| z * c(0.0, 1.0));
        shot += 0.5 * linalg::trace(&(&comm * &comm)).re;
    }
    NoiseSplit { thermal, shot }
}

/// `tr ρ ΔQ (1 - ρ) ΔQ`.
pub fn noise_trace_formula(model: &QuantumModel) -> f64 {
    model
        .sectors()
        .iter()
        .map(|s| {
            let dq = s.delta_q();
            linalg::trace(&(&s.rho * &dq * s.rho_prime() * &dq)).re
        })
        .sum()
}

/// First two cumulants from the trace formulas.
pub fn trace_formula_cumulants(model: &QuantumModel) -> CumulantVector {
    CumulantVector::new(
        vec![mean_charge(model).regularized, noise_trace_formula(model)],
        CumulantMethod::TraceFormula,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;

    use crate::model::{random_model, ModelKind};
    use crate::scattering::{build_two_circle, ScatteringMatrix, TwoCircleSpec};

    fn two_mode(t2: f64) -> QuantumModel {
        let (t, r) = (t2.sqrt(), (1.0 - t2).sqrt());
        let u = DMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(-t, 0.0), c(t, 0.0), c(r, 0.0)]);
        QuantumModel::new(
            u,
            linalg::diag_real(&[1.0, 0.0]),
            linalg::diag_real(&[0.0, 1.0]),
        )
        .unwrap()
    }

    fn still(seed: u64, kind: ModelKind) -> QuantumModel {
        let m = random_model(seed, 4, kind).unwrap();
        QuantumModel::new(linalg::identity(4), m.rho(), m.q()).unwrap()
    }

    fn binomial(t2: f64, n: i32) -> impl Fn(f64) -> Complex64 {
        move |l| (c(1.0 - t2, 0.0) + Complex64::from_polar(t2, l)).powi(n)
    }

    #[test]
    fn trivial_evolution_gives_one() {
        for variant in Variant::ALL {
            let model = still(1, ModelKind::MixedCommuting);
            for &l in &[0.0, 0.7, 2.0, -1.3] {
                let chi = variant.chi(&model, l).unwrap();
                assert!((chi - c(1.0, 0.0)).norm() < 1e-12, "{variant} {l}");
            }
        }
    }

    #[test]
    fn two_mode_transfer_is_bernoulli() {
        let model = two_mode(0.3);
        for &l in &[0.0, 0.5, 3.0] {
            let expected = binomial(0.3, 1)(l);
            for variant in [
                Variant::LesLev,
                Variant::Regularized,
                Variant::Collapse,
                Variant::SpinCoupling,
            ] {
                assert!(
                    (variant.chi(&model, l).unwrap() - expected).norm() < 1e-12,
                    "{variant}"
                );
            }
        }
    }

    #[test]
    fn chi_at_zero_is_one() {
        for seed in 0..5 {
            let m = random_model(seed, 6, ModelKind::MixedCommuting).unwrap();
            for variant in Variant::ALL {
                assert!((variant.chi(&m, 0.0).unwrap() - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn les_lev_requires_commuting_state() {
        let m = random_model(2, 4, ModelKind::MixedGeneral).unwrap();
        assert!(matches!(
            chi_les_lev(&m, 0.3),
            Err(Error::NonCommutingState { .. })
        ));
        assert!(chi_regularized(&m, 0.3).is_ok());
        assert!(ChiEvaluator::unchecked(&m, Variant::LesLev).is_ok());
    }

    #[test]
    fn collapse_requires_integer_charge() {
        let m = random_model(2, 3, ModelKind::PureCommuting).unwrap();
        let bad = QuantumModel::new(m.u(), m.rho(), m.q().scale(0.5)).unwrap();
        assert!(matches!(
            chi_collapse(&bad, 0.3),
            Err(Error::NonIntegerSpectrum { .. })
        ));
    }

    #[test]
    fn spin_coupling_is_hermitian_in_lambda() {
        let m = random_model(4, 5, ModelKind::MixedGeneral).unwrap();
        for &l in &[0.4, 1.9] {
            let a = chi_spin_coupling(&m, l).unwrap();
            let b = chi_spin_coupling(&m, -l).unwrap();
            assert!((a - b.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn first_two_single_measurement_cumulants_agree() {
        let model = two_mode(0.3);
        let a = cumulants(&model, Variant::LesLev, 2).unwrap();
        let b = cumulants(&model, Variant::SingleMeasurement, 2).unwrap();
        assert_abs_diff_eq!(a.get(1), b.get(1), epsilon = 1e-8);
        assert_abs_diff_eq!(a.get(2), b.get(2), epsilon = 1e-8);
    }

    #[test]
    fn binomial_cumulants_by_finite_differences() {
        let (t2, n) = (0.3, 10);
        let local = LocalLogGrid::sample(&ClosedForm(binomial(t2, n))).unwrap();
        let k = cumulants_from_local(&local, 4).unwrap();
        let nf = n as f64;
        let expected = [
            nf * t2,
            nf * t2 * (1.0 - t2),
            nf * t2 * (1.0 - t2) * (1.0 - 2.0 * t2),
            nf * t2 * (1.0 - t2) * (1.0 - 6.0 * t2 * (1.0 - t2)),
        ];
        for (got, want) in k.values.iter().zip(expected) {
            assert!((got - want).abs() <= 1e-6 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn poisson_cumulants_all_equal_rate() {
        let rate = 2.5;
        let local = LocalLogGrid::sample(&ClosedForm(move |l: f64| {
            (c(l.cos() - 1.0, l.sin()) * rate).exp()
        }))
        .unwrap();
        let k = cumulants_from_local(&local, 4).unwrap();
        for v in &k.values {
            assert!((v - rate).abs() <= 1e-6 * rate, "{v}");
        }
    }

    #[test]
    fn distribution_of_trivial_and_binomial() {
        let s = ChiSamples::from_source(&ClosedForm(|_| c(1.0, 0.0)), 16, 2.0 * PI, true).unwrap();
        let d = distribution_from_chi(&s).unwrap();
        assert_abs_diff_eq!(d.probability(0), 1.0, epsilon = 1e-14);
        assert!(d
            .p
            .iter()
            .enumerate()
            .all(|(i, &p)| i as i64 + d.n_min == 0 || p.abs() < 1e-14));

        let s = ChiSamples::from_source(&ClosedForm(binomial(0.4, 5)), 64, 2.0 * PI, true).unwrap();
        let d = distribution_from_chi(&s).unwrap();
        let choose = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        for (n, w) in choose.iter().enumerate() {
            let want = w * 0.4f64.powi(n as i32) * 0.6f64.powi(5 - n as i32);
            assert_abs_diff_eq!(d.probability(n as i64), want, epsilon = 1e-13);
        }
        assert!(!d.quasi);
        assert!(d.imaginary_residue < 1e-13);
    }

    #[test]
    fn distribution_through_a_zero_of_chi() {
        let values: Vec<Complex64> = (0..16)
            .map(|k| binomial(0.5, 5)(2.0 * PI * k as f64 / 16.0))
            .collect();
        let d = distribution_from_values(&values, 1.0);
        let choose = [1.0, 5.0, 10.0, 10.0, 5.0, 1.0];
        for (n, w) in choose.iter().enumerate() {
            assert_abs_diff_eq!(d.probability(n as i64), w / 32.0, epsilon = 1e-14);
        }
        let m = two_mode(0.5);
        let d = distribution(&m, Variant::Collapse, 8).unwrap();
        assert_abs_diff_eq!(d.probability(0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(d.probability(1), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn unwrap_detects_unresolved_winding() {
        // e^{40iλ} moves by ~3.9 rad per step on a 64-point grid
        let fast = ClosedForm(|l: f64| Complex64::from_polar(1.0, 40.0 * l));
        assert!(matches!(
            ChiSamples::from_source(&fast, 64, 2.0 * PI, true),
            Err(Error::UnwrapFailure { .. })
        ));
        let s = ChiSamples::from_source(&fast, 256, 2.0 * PI, true).unwrap();
        let last = *s.lambdas.last().unwrap();
        assert_abs_diff_eq!(s.log_values.last().unwrap().im, 40.0 * last, epsilon = 1e-9);
    }

    #[test]
    fn sample_chi_requires_fine_enough_grid() {
        let m = random_model(3, 6, ModelKind::PureCommuting).unwrap();
        assert!(matches!(
            sample_chi(&m, Variant::LesLev, 13),
            Err(Error::GridTooCoarse { required: 14, .. })
        ));
        assert!(sample_chi(&m, Variant::LesLev, 14).is_ok());
        assert!(matches!(
            sample_chi(&m, Variant::SpinCoupling, 14),
            Err(Error::GridTooCoarse { required: 28, .. })
        ));
        let tc = build_two_circle(&TwoCircleSpec::new(
            ScatteringMatrix::from_transmission(0.3).unwrap(),
            2.0 * PI,
            9.5,
            -0.5,
            12.7,
        ))
        .unwrap();
        assert!(sample_chi(&tc, Variant::Regularized, 8).is_ok());
        assert!(distribution(&tc, Variant::Regularized, 64).is_err());
    }

    #[test]
    fn trivial_model_samples_are_one() {
        let m = still(5, ModelKind::PureCommuting);
        let s = sample_chi(&m, Variant::Regularized, 32).unwrap();
        assert!(s.values.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn mean_and_noise_of_trivial_model_vanish() {
        let m = still(6, ModelKind::MixedCommuting);
        let mean = mean_charge(&m);
        assert_abs_diff_eq!(mean.naive, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mean.regularized, 0.0, epsilon = 1e-14);
        let split = noise_split(&m);
        assert_abs_diff_eq!(split.thermal, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(split.shot, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn thermal_noise_vanishes_for_pure_states() {
        let m = random_model(7, 6, ModelKind::PureCommuting).unwrap();
        let split = noise_split(&m);
        assert!(split.thermal.abs() < 1e-10);
        assert!((split.total() - noise_trace_formula(&m)).abs() < 1e-10);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(
                serde_json::to_string(&v).unwrap(),
                format!("\"{}\"", v.name())
            );
        }
        assert!(matches!(
            "nope".parse::<Variant>(),
            Err(Error::UnknownKind(_))
        ));
    }
}
