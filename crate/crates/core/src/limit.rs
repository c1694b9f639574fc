//! Behaviour of the generating functions as the energy cutoff is removed:
//! the finite-dimensional phase identity, trace-class diagnostics and
//! cutoff sweeps of the two-circle model.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::counting::{ChiEvaluator, Variant};
use crate::error::{Error, Result};
use crate::linalg::{self, psd_sqrt, trace_norm};
use crate::model::QuantumModel;
use crate::scattering::{build_two_circle, thermal_two_circle, TwoCircleSpec};

pub const DEFAULT_PROBES: [f64; 4] = [PI / 4.0, PI / 2.0, PI, 3.0 * PI / 2.0];

/// `tr(ρ_U Q_U - ρQ)`, zero in finite dimension up to roundoff.
pub fn trace_shift(model: &QuantumModel) -> f64 {
    model
        .sectors()
        .iter()
        .map(|s| {
            let rq = &s.rho * &s.q;
            linalg::trace(&(s.conjugate(&rq) - rq)).re
        })
        .sum()
}

/// Largest `|χ_reg(λ) e^{iλ tr(ρ_U Q_U - ρQ)} - χ_LL(λ)|` over the probes.
///
/// The two determinants agree only when the state commutes with the charge.
pub fn regularization_identity_check(model: &QuantumModel, probes: &[f64]) -> Result<f64> {
    let reg = ChiEvaluator::new(model, Variant::Regularized)?;
    let naive = ChiEvaluator::new(model, Variant::LesLev)?;
    let shift = trace_shift(model);
    probes.iter().try_fold(0.0f64, |worst, &l| {
        let lhs = reg.chi(l)? * Complex64::from_polar(1.0, l * shift);
        Ok(worst.max((lhs - naive.chi(l)?).norm()))
    })
}

/// Trace norms controlling the infinite-volume limit:
/// `d_rho = ‖ρ - UρU†‖₁`,
/// `d_sqrt = ‖ρ^{1/2} - Uρ^{1/2}U†‖₁ + ‖ρ'^{1/2} - Uρ'^{1/2}U†‖₁`,
/// `d_mix = ‖(ρρ')^{1/2} Q‖₁`, `d_noise = ‖(U†QU - Q)(ρρ')^{1/2}‖₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceClassDiagnostics {
    pub d_rho: f64,
    pub d_sqrt: f64,
    pub d_mix: f64,
    pub d_noise: f64,
}

pub fn trace_class_diagnostics(model: &QuantumModel) -> Result<TraceClassDiagnostics> {
    let mut d = TraceClassDiagnostics {
        d_rho: 0.0,
        d_sqrt: 0.0,
        d_mix: 0.0,
        d_noise: 0.0,
    };
    for s in model.sectors() {
        let forward = |x: &linalg::ComplexMatrix| &s.u * x * s.u.adjoint();
        let rho_prime = s.rho_prime();
        d.d_rho += trace_norm(&(&s.rho - forward(&s.rho)))?;
        let a = psd_sqrt(&s.rho)?;
        let b = psd_sqrt(&rho_prime)?;
        d.d_sqrt += trace_norm(&(&a - forward(&a)))? + trace_norm(&(&b - forward(&b)))?;
        let mix = psd_sqrt(&(&s.rho * &rho_prime))?;
        d.d_mix += trace_norm(&(&mix * &s.q))?;
        d.d_noise += trace_norm(&(s.delta_q() * &mix))?;
    }
    Ok(d)
}

/// Family of models to sweep over the cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum SweepSpec {
    Pure { spec: TwoCircleSpec },
    Thermal { spec: TwoCircleSpec, beta: f64 },
}

impl SweepSpec {
    pub fn spec(&self) -> &TwoCircleSpec {
        match self {
            SweepSpec::Pure { spec } | SweepSpec::Thermal { spec, .. } => spec,
        }
    }

    pub fn build(&self, cutoff: f64) -> Result<QuantumModel> {
        match self {
            SweepSpec::Pure { spec } => build_two_circle(&spec.with_cutoff(cutoff)),
            SweepSpec::Thermal { spec, beta } => {
                thermal_two_circle(&spec.with_cutoff(cutoff), *beta)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub cutoff: f64,
    pub dim: usize,
    pub chi_reg: Vec<Complex64>,
    pub chi_naive: Vec<Complex64>,
    /// `tr ρQ`.
    pub lead_occupation: f64,
    /// `tr(ρ_U Q_U - ρQ)`.
    pub trace_shift: f64,
    pub identity_deviation: f64,
    pub diagnostics: TraceClassDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub probes: Vec<f64>,
    pub records: Vec<SweepRecord>,
}

impl SweepReport {
    pub fn cutoffs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.cutoff).collect()
    }

    /// Largest change of `χ_reg` at any probe relative to the first cutoff.
    pub fn chi_drift(&self) -> f64 {
        let first = &self.records[0].chi_reg;
        self.records
            .iter()
            .flat_map(|r| r.chi_reg.iter().zip(first).map(|(a, b)| (a - b).norm()))
            .fold(0.0, f64::max)
    }

    pub fn occupation_strictly_increasing(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].lead_occupation > w[0].lead_occupation)
    }

    pub fn max_identity_deviation(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.identity_deviation)
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v["fcs-schema"] = 1.into();
        v
    }

    /// One row per cutoff.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = [
            "cutoff",
            "dim",
            "lead_occupation",
            "trace_shift",
            "identity_deviation",
            "d_rho",
            "d_sqrt",
            "d_mix",
            "d_noise",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for name in ["chi_reg", "chi_naive"] {
            for i in 0..self.probes.len() {
                header.push(format!("re_{name}_{i}"));
                header.push(format!("im_{name}_{i}"));
            }
        }
        w.write_record(&header).map_err(csv_error)?;
        for r in &self.records {
            let d = &r.diagnostics;
            let mut row: Vec<String> = vec![r.cutoff.to_string(), r.dim.to_string()];
            row.extend(
                [
                    r.lead_occupation,
                    r.trace_shift,
                    r.identity_deviation,
                    d.d_rho,
                    d.d_sqrt,
                    d.d_mix,
                    d.d_noise,
                ]
                .iter()
                .map(f64::to_string),
            );
            for z in r.chi_reg.iter().chain(&r.chi_naive) {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()
            .map_err(|e| Error::invalid("output", e.to_string()))?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid("output", e.to_string())
}

/// Builds the model at each cutoff (in parallel) and records the
/// generating functions at the probes together with the diagnostics.
pub fn cutoff_sweep(sweep: &SweepSpec, cutoffs: &[f64], probes: &[f64]) -> Result<SweepReport> {
    if cutoffs.is_empty() {
        return Err(Error::invalid("cutoffs", "need at least one cutoff"));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("cutoffs", "must be strictly ascending"));
    }
    let records = cutoffs
        .par_iter()
        .map(|&cutoff| {
            let model = sweep.build(cutoff)?;
            let reg = ChiEvaluator::new(&model, Variant::Regularized)?;
            let naive = ChiEvaluator::new(&model, Variant::LesLev)?;
            let chi_reg = probes
                .iter()
                .map(|&l| reg.chi(l))
                .collect::<Result<Vec<_>>>()?;
            let chi_naive = probes
                .iter()
                .map(|&l| naive.chi(l))
                .collect::<Result<Vec<_>>>()?;
            let shift = trace_shift(&model);
            let identity_deviation = chi_reg
                .iter()
                .zip(&chi_naive)
                .zip(probes)
                .map(|((r, n), &l)| (r * Complex64::from_polar(1.0, l * shift) - n).norm())
                .fold(0.0, f64::max);
            Ok(SweepRecord {
                cutoff,
                dim: model.dim(),
                chi_reg,
                chi_naive,
                lead_occupation: model.lead_occupation(),
                trace_shift: shift,
                identity_deviation,
                diagnostics: trace_class_diagnostics(&model)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = SweepReport {
        probes: probes.to_vec(),
        records,
    };
    let finite = report.records.iter().all(|r| {
        r.chi_reg
            .iter()
            .chain(&r.chi_naive)
            .all(|z| z.re.is_finite() && z.im.is_finite())
            && [r.lead_occupation, r.trace_shift, r.identity_deviation]
                .iter()
                .all(|x| x.is_finite())
    });
    if !finite {
        return Err(Error::NonFinite);
    }
    Ok(report)
}
