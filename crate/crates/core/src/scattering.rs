//! Two leads as circles of circumference `T` joined by an energy-independent
//! scattering matrix, plus the closed-form laws used as references.
//!
//! Momenta live on `(2π/T)·Z ∩ [-Λ, Λ]`. Each momentum gives a 2×2 sector
//! (left mode, right mode); the left modes are numbered first. The lead
//! charge `Q` counts particles in the right circle.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{c, diag_real, unitarity_residual, ComplexMatrix};
use crate::model::{fermi, QuantumModel, Sector, FERMI_GAP_TOL};

pub const SCATTERING_UNITARITY_TOL: f64 = 1e-12;
/// Tail containment of the thermal state: `Λ >= max|μ| + THERMAL_TAIL/β`.
pub const THERMAL_TAIL: f64 = 10.0;

/// `S = [[r, t'], [t, r']]` acting on (left, right) amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatteringMatrix {
    pub r: Complex64,
    pub t: Complex64,
    pub r_prime: Complex64,
    pub t_prime: Complex64,
}

impl ScatteringMatrix {
    pub fn new(r: Complex64, t: Complex64, r_prime: Complex64, t_prime: Complex64) -> Result<Self> {
        let s = ScatteringMatrix {
            r,
            t,
            r_prime,
            t_prime,
        };
        s.check()?;
        Ok(s)
    }

    /// Real amplitudes `r = r' = sqrt(1 - T)`, `t = -t' = sqrt(T)`.
    pub fn from_transmission(transmission: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmission) {
            return Err(Error::invalid("transmission", "must lie in [0, 1]"));
        }
        let (r, t) = ((1.0 - transmission).sqrt(), transmission.sqrt());
        Self::new(c(r, 0.0), c(t, 0.0), c(r, 0.0), c(-t, 0.0))
    }

    pub fn identity() -> Self {
        Self::from_transmission(0.0).unwrap()
    }

    pub fn matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_row_slice(2, 2, &[self.r, self.t_prime, self.t, self.r_prime])
    }

    pub fn check(&self) -> Result<()> {
        let m = self.matrix();
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let residual = unitarity_residual(&m);
        if residual > SCATTERING_UNITARITY_TOL {
            return Err(Error::invalid(
                "S",
                format!("scattering matrix is not unitary (residual {residual:.3e})"),
            ));
        }
        Ok(())
    }

    /// `|t|²`.
    pub fn transmission(&self) -> f64 {
        self.t.norm_sqr()
    }

    /// `G = |t|²/2π` with `e = ħ = 1`.
    pub fn conductance(&self) -> f64 {
        self.transmission() / (2.0 * PI)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoCircleSpec {
    #[serde(rename = "S")]
    pub s: ScatteringMatrix,
    /// Circumference, equal to the turn time at unit velocity.
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "mu_L")]
    pub mu_l: f64,
    #[serde(rename = "mu_R")]
    pub mu_r: f64,
    pub cutoff: f64,
}

impl TwoCircleSpec {
    pub fn new(s: ScatteringMatrix, period: f64, mu_l: f64, mu_r: f64, cutoff: f64) -> Self {
        TwoCircleSpec {
            s,
            period,
            mu_l,
            mu_r,
            cutoff,
        }
    }

    pub fn with_cutoff(&self, cutoff: f64) -> Self {
        TwoCircleSpec { cutoff, ..*self }
    }

    /// Bias `V = μ_L - μ_R`; positive bias moves charge into the right lead.
    pub fn bias(&self) -> f64 {
        self.mu_l - self.mu_r
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Momenta `2πj/T` with `|p| <= Λ`, ascending.
    pub fn momenta(&self) -> Vec<f64> {
        let jmax = (self.cutoff / self.spacing() + 1e-12).floor() as i64;
        (-jmax..=jmax).map(|j| j as f64 * self.spacing()).collect()
    }

    fn check(&self) -> Result<()> {
        self.s.check()?;
        for (name, v) in [
            ("T", self.period),
            ("mu_L", self.mu_l),
            ("mu_R", self.mu_r),
            ("cutoff", self.cutoff),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.period <= 0.0 {
            return Err(Error::invalid("T", "must be positive"));
        }
        let required = self.mu_l.abs().max(self.mu_r.abs());
        if self.cutoff <= required {
            return Err(Error::CutoffTooSmall {
                cutoff: self.cutoff,
                required,
            });
        }
        Ok(())
    }
}

/// Signed number of grid momenta between the chemical potentials:
/// `#{p | μ_R < p <= μ_L} - #{p | μ_L < p <= μ_R}`.
pub fn window_count(spec: &TwoCircleSpec) -> i64 {
    let (lo, hi) = (spec.mu_l.min(spec.mu_r), spec.mu_l.max(spec.mu_r));
    let n = spec
        .momenta()
        .iter()
        .filter(|&&p| lo < p && p <= hi)
        .count() as i64;
    if spec.mu_l >= spec.mu_r {
        n
    } else {
        -n
    }
}

fn assemble(spec: &TwoCircleSpec, occupation: impl Fn(f64, f64) -> f64) -> Result<QuantumModel> {
    let momenta = spec.momenta();
    let n = momenta.len();
    let u = spec.s.matrix();
    let q = diag_real(&[0.0, 1.0]);
    let sectors = momenta
        .iter()
        .enumerate()
        .map(|(i, &p)| Sector {
            modes: vec![i, n + i],
            u: u.clone(),
            rho: diag_real(&[occupation(spec.mu_l, p), occupation(spec.mu_r, p)]),
            q: q.clone(),
        })
        .collect();
    QuantumModel::from_sectors(2 * n, sectors)
}

/// Zero-temperature two-circle model, `ρ_i = θ(μ_i - p)`.
pub fn build_two_circle(spec: &TwoCircleSpec) -> Result<QuantumModel> {
    spec.check()?;
    for &p in &spec.momenta() {
        for mu in [spec.mu_l, spec.mu_r] {
            if (p - mu).abs() < FERMI_GAP_TOL * p.abs().max(1.0) {
                return Err(Error::DegenerateFermiLevel {
                    eigenvalue: p,
                    mu,
                    tolerance: FERMI_GAP_TOL,
                });
            }
        }
    }
    if window_count(spec) == 0 {
        return Err(Error::EmptyWindow {
            lower: spec.mu_l.min(spec.mu_r),
            upper: spec.mu_l.max(spec.mu_r),
        });
    }
    assemble(spec, |mu, p| if p < mu { 1.0 } else { 0.0 })
}

/// Two-circle model with Fermi-Dirac occupations at inverse temperature `beta`.
pub fn thermal_two_circle(spec: &TwoCircleSpec, beta: f64) -> Result<QuantumModel> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid("beta", "must be finite and positive"));
    }
    spec.check()?;
    let required = spec.mu_l.abs().max(spec.mu_r.abs()) + THERMAL_TAIL / beta;
    if spec.cutoff < required {
        return Err(Error::CutoffTooSmall {
            cutoff: spec.cutoff,
            required,
        });
    }
    assemble(spec, |mu, p| fermi(beta * (p - mu)))
}

/// `(1 - p + p e^{iλ})^N`.
pub fn binomial_chi(p: f64, n: u32, lambda: f64) -> Complex64 {
    (c(1.0 - p, 0.0) + Complex64::from_polar(p, lambda)).powu(n)
}

/// `exp(rate (e^{iλ} - 1))`.
pub fn poisson_chi(rate: f64, lambda: f64) -> Complex64 {
    (c(lambda.cos() - 1.0, lambda.sin()) * rate).exp()
}

/// Classic closed-form noise laws (`e = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseReference {
    /// Thermal noise per unit time, `2G/β`.
    JohnsonNyquist { conductance: f64, beta: f64 },
    /// Classical shot noise `⟨Q⟩`.
    Schottky { mean_charge: f64 },
    /// Quantum shot noise `⟨Q⟩(1 - |t|²)`.
    LesovikKhlus { mean_charge: f64, transmission: f64 },
}

impl NoiseReference {
    pub fn value(&self) -> f64 {
        match *self {
            NoiseReference::JohnsonNyquist { conductance, beta } => 2.0 * conductance / beta,
            NoiseReference::Schottky { mean_charge } => mean_charge,
            NoiseReference::LesovikKhlus {
                mean_charge,
                transmission,
            } => mean_charge * (1.0 - transmission),
        }
    }
}

/// Which closed-form law to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    JohnsonNyquist,
    Schottky,
    LesovikKhlus,
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "johnson-nyquist" => Ok(NoiseKind::JohnsonNyquist),
            "schottky" => Ok(NoiseKind::Schottky),
            "lesovik-khlus" => Ok(NoiseKind::LesovikKhlus),
            other => Err(Error::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            NoiseKind::JohnsonNyquist => "johnson-nyquist",
            NoiseKind::Schottky => "schottky",
            NoiseKind::LesovikKhlus => "lesovik-khlus",
        })
    }
}

/// Evaluates a named law with parameters `G`/`beta`, `mean_charge` and
/// `transmission`.
pub fn reference_noise(kind: &str, params: &BTreeMap<String, f64>) -> Result<f64> {
    let kind: NoiseKind = kind.parse()?;
    let get = |name: &'static str| {
        params
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(name, format!("missing for {kind}")))
    };
    let reference = match kind {
        NoiseKind::JohnsonNyquist => NoiseReference::JohnsonNyquist {
            conductance: get("G")?,
            beta: get("beta")?,
        },
        NoiseKind::Schottky => NoiseReference::Schottky {
            mean_charge: get("mean_charge")?,
        },
        NoiseKind::LesovikKhlus => NoiseReference::LesovikKhlus {
            mean_charge: get("mean_charge")?,
            transmission: get("transmission")?,
        },
    };
    Ok(reference.value())
}
