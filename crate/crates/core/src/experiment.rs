//! Reproducible experiments described by a single JSON document.
//!
//! ```json
//! {
//!   "experiment": "two-circle",
//!   "model": {"two_circle": {"S": {...}, "T": 6.283185307179586,
//!             "mu_L": 5.5, "mu_R": -4.5, "cutoff": 5.6}},
//!   "variant": "regularized",
//!   "grid_size": 64,
//!   "output_dir": "results"
//! }
//! ```
//!
//! Every JSON artifact carries `"fcs-schema": 1`. Files are written to a
//! temporary file in the output directory and renamed into place.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::counting::{
    cumulants, distribution, mean_charge, noise_split, noise_trace_formula, sample_chi,
    trace_formula_cumulants, ChiEvaluator, ChiSamples, CountingDistribution, Variant,
};
use crate::error::Error;
use crate::fock::{FockModel, MAX_ORACLE_DIM};
use crate::limit::{
    cutoff_sweep, regularization_identity_check, trace_class_diagnostics, trace_shift, SweepSpec,
    DEFAULT_PROBES,
};
use crate::model::{random_model, ModelJson, ModelKind, QuantumModel};
use crate::scattering::{
    binomial_chi, build_two_circle, thermal_two_circle, window_count, NoiseReference, TwoCircleSpec,
};

pub const SCHEMA_VERSION: u32 = 1;
/// Agreement required by the oracle check.
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Chi,
    Cumulants,
    Distribution,
    TwoCircle,
    NoiseSplit,
    Sweep,
    Diagnostics,
    OracleCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    pub seed: u64,
    pub dim: usize,
    pub kind: ModelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub spec: TwoCircleSpec,
    pub beta: f64,
}

/// Where the model comes from; exactly one source per config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Inline(ModelJson),
    TwoCircle(TwoCircleSpec),
    ThermalTwoCircle(ThermalSpec),
    Random(RandomSpec),
}

impl ModelSource {
    pub fn build(&self) -> Result<QuantumModel, Error> {
        match self {
            ModelSource::Inline(json) => QuantumModel::from_json(json),
            ModelSource::TwoCircle(spec) => build_two_circle(spec),
            ModelSource::ThermalTwoCircle(t) => thermal_two_circle(&t.spec, t.beta),
            ModelSource::Random(r) => random_model(r.seed, r.dim, r.kind),
        }
    }
}

fn default_grid() -> usize {
    64
}

fn default_k_max() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelSource,
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Cutoffs for `sweep`.
    #[serde(default)]
    pub cutoffs: Vec<f64>,
    /// Probe counting fields for `sweep` and `diagnostics`.
    #[serde(default)]
    pub probes: Option<Vec<f64>>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

/// Why a run stopped; maps onto the process exit code.
#[derive(Debug)]
pub enum RunError {
    Validation { field: String, message: String },
    Numerical(Error),
    Io { path: PathBuf, message: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } => 1,
            RunError::Validation { .. } => 2,
            RunError::Numerical(_) => 3,
        }
    }

    fn validation(field: &str, message: impl Into<String>) -> Self {
        RunError::Validation {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Machine-readable record for the diagnostic stream.
    pub fn record(&self) -> Value {
        let error = match self {
            RunError::Validation { field, message } => json!({
                "kind": "validation", "field": field, "message": message,
            }),
            RunError::Numerical(e) => json!({
                "kind": "numerical", "code": e.code(), "message": e.to_string(),
            }),
            RunError::Io { path, message } => json!({
                "kind": "io", "path": path.display().to_string(), "message": message,
            }),
        };
        json!({"fcs-schema": SCHEMA_VERSION, "error": error})
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Validation { field, message } => write!(f, "invalid `{field}`: {message}"),
            RunError::Numerical(e) => write!(f, "{e}"),
            RunError::Io { path, message } => write!(f, "{}: {message}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            return RunError::Numerical(e);
        }
        let field = match &e {
            Error::InvalidParameter { name, .. } => name.to_string(),
            Error::UnknownKind(_) => "kind".to_string(),
            Error::GridTooCoarse { .. } => "grid_size".to_string(),
            Error::KTooLarge { .. } => "k_max".to_string(),
            Error::NonCommutingState { .. } | Error::NonIntegerSpectrum { .. } => {
                "variant".to_string()
            }
            _ => "model".to_string(),
        };
        RunError::Validation {
            field,
            message: e.to_string(),
        }
    }
}

/// Parses a config; serde errors name the offending field when they can.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let message = e.inner().to_string();
        let path = e.path().to_string();
        let field = if path != "." {
            path
        } else {
            message.split('`').nth(1).unwrap_or("config").to_string()
        };
        RunError::Validation { field, message }
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

impl ExperimentConfig {
    /// The protocol this run uses, after defaults.
    pub fn resolved_variant(&self, model: &QuantumModel) -> Variant {
        self.variant.unwrap_or(match self.experiment {
            ExperimentKind::OracleCheck if !model.is_commuting() => Variant::Collapse,
            ExperimentKind::OracleCheck => Variant::LesLev,
            _ => Variant::Regularized,
        })
    }

    /// Static checks plus model construction and validation.
    pub fn validate(&self) -> Result<QuantumModel, RunError> {
        if self.k_max == 0 || self.k_max > crate::counting::MAX_CUMULANT_ORDER {
            return Err(RunError::validation(
                "k_max",
                format!("must be in 1..={}", crate::counting::MAX_CUMULANT_ORDER),
            ));
        }
        if let Some(probes) = &self.probes {
            if probes.is_empty() || probes.iter().any(|p| !p.is_finite()) {
                return Err(RunError::validation("probes", "need finite probe values"));
            }
        }
        let two_circle = matches!(
            self.model,
            ModelSource::TwoCircle(_) | ModelSource::ThermalTwoCircle(_)
        );
        match self.experiment {
            ExperimentKind::TwoCircle if !matches!(self.model, ModelSource::TwoCircle(_)) => {
                return Err(RunError::validation(
                    "model",
                    "two-circle needs a two_circle model",
                ));
            }
            ExperimentKind::Sweep if !two_circle => {
                return Err(RunError::validation(
                    "model",
                    "sweep needs a two-circle model",
                ));
            }
            ExperimentKind::Sweep if self.cutoffs.is_empty() => {
                return Err(RunError::validation("cutoffs", "sweep needs cutoffs"));
            }
            _ => {}
        }
        let model = self.model.build()?;
        model.ensure_valid()?;
        let variant = self.resolved_variant(&model);
        match self.experiment {
            ExperimentKind::TwoCircle | ExperimentKind::Sweep
                if variant != Variant::Regularized =>
            {
                return Err(RunError::validation(
                    "variant",
                    "this experiment uses the regularized determinant",
                ));
            }
            ExperimentKind::OracleCheck => {
                if model.dim() > MAX_ORACLE_DIM {
                    return Err(RunError::validation(
                        "model",
                        format!("oracle check needs dim <= {MAX_ORACLE_DIM}"),
                    ));
                }
                if variant == Variant::LesLev && !model.is_commuting() {
                    return Err(RunError::validation(
                        "variant",
                        "les-lev needs a state commuting with the charge; use collapse",
                    ));
                }
            }
            ExperimentKind::Distribution if variant == Variant::SingleMeasurement => {
                return Err(RunError::validation(
                    "variant",
                    "single-measurement charge is not integer valued",
                ));
            }
            _ => {}
        }
        if variant == Variant::LesLev && !model.is_commuting() {
            return Err(RunError::validation(
                "variant",
                "les-lev needs [Q, rho] = 0",
            ));
        }
        if variant == Variant::Collapse && !model.q_is_projection() {
            return Err(RunError::validation(
                "variant",
                "collapse needs a projection charge",
            ));
        }
        Ok(model)
    }
}

/// Files written by a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: ExperimentKind,
    pub artifacts: Vec<PathBuf>,
}

struct Writer {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: PathBuf) -> Result<Self, RunError> {
        fs::create_dir_all(&dir).map_err(|e| RunError::Io {
            path: dir.clone(),
            message: e.to_string(),
        })?;
        Ok(Writer {
            dir,
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let io = |e: std::io::Error| RunError::Io {
            path: path.clone(),
            message: e.to_string(),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(bytes).map_err(io)?;
        tmp.as_file().sync_all().map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        self.written.push(path);
        Ok(())
    }

    fn json(&mut self, name: &str, mut value: Value) -> Result<(), RunError> {
        value["fcs-schema"] = SCHEMA_VERSION.into();
        let mut text = serde_json::to_string_pretty(&value).expect("json value serializes");
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), RunError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| RunError::Io {
            path: self.dir.join(name),
            message: e.to_string(),
        };
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Io {
            path: self.dir.join(name),
            message: e.to_string(),
        })?;
        self.put(name, &bytes)
    }
}

fn chi_rows(s: &ChiSamples) -> Vec<Vec<String>> {
    s.lambdas
        .iter()
        .zip(&s.values)
        .zip(&s.log_values)
        .map(|((l, v), g)| {
            vec![
                l.to_string(),
                v.re.to_string(),
                v.im.to_string(),
                g.re.to_string(),
                g.im.to_string(),
            ]
        })
        .collect()
}

const CHI_HEADER: [&str; 5] = ["lambda", "re_chi", "im_chi", "re_log_chi", "im_log_chi"];

fn distribution_rows(d: &CountingDistribution) -> Vec<Vec<String>> {
    d.charges()
        .zip(&d.p)
        .map(|(q, p)| {
            vec![
                q.to_string(),
                p.to_string(),
                (*p < -crate::counting::NEGATIVITY_TOL).to_string(),
            ]
        })
        .collect()
}

/// Runs an experiment; `out` overrides the configured output directory.
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary, RunError> {
    let model = config.validate()?;
    let variant = config.resolved_variant(&model);
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let mut w = Writer::new(dir)?;
    let probes = config
        .probes
        .clone()
        .unwrap_or_else(|| DEFAULT_PROBES.to_vec());

    match config.experiment {
        ExperimentKind::Chi => {
            let s = sample_chi(&model, variant, config.grid_size)?;
            w.csv("chi.csv", &CHI_HEADER, chi_rows(&s))?;
            w.json(
                "chi.json",
                json!({"variant": variant, "grid_size": config.grid_size, "period": s.period, "dim": model.dim()}),
            )?;
        }
        ExperimentKind::Cumulants => {
            let k = cumulants(&model, variant, config.k_max)?;
            w.json(
                "cumulants.json",
                json!({
                    "variant": variant,
                    "cumulants": k,
                    "trace_formula": trace_formula_cumulants(&model),
                }),
            )?;
        }
        ExperimentKind::Distribution => {
            let d = distribution(&model, variant, config.grid_size)?;
            w.csv(
                "distribution.csv",
                &["n", "p_n", "quasi_flag"],
                distribution_rows(&d),
            )?;
            w.json(
                "distribution.json",
                json!({
                    "variant": variant,
                    "grid_size": config.grid_size,
                    "charge_step": d.charge_step,
                    "total": d.total(),
                    "min_entry": d.min_entry(),
                    "quasi": d.quasi,
                    "imaginary_residue": d.imaginary_residue,
                }),
            )?;
        }
        ExperimentKind::TwoCircle => {
            let ModelSource::TwoCircle(spec) = &config.model else {
                unreachable!("checked in validate")
            };
            let s = sample_chi(&model, variant, config.grid_size)?;
            let n = window_count(spec);
            let t2 = spec.s.transmission();
            let deviation = s
                .lambdas
                .iter()
                .zip(&s.values)
                .map(|(&l, v)| {
                    let reference = if n >= 0 {
                        binomial_chi(t2, n as u32, l)
                    } else {
                        binomial_chi(t2, n.unsigned_abs() as u32, -l)
                    };
                    (v - reference).norm()
                })
                .fold(0.0, f64::max);
            let mean = mean_charge(&model);
            let noise = noise_trace_formula(&model);
            w.csv("chi.csv", &CHI_HEADER, chi_rows(&s))?;
            w.json(
                "two-circle.json",
                json!({
                    "window_count": n,
                    "transmission": t2,
                    "conductance": spec.s.conductance(),
                    "bias": spec.bias(),
                    "max_binomial_deviation": deviation,
                    "mean_charge": mean.regularized,
                    "ohm_current": spec.s.conductance() * 2.0 * PI * n as f64 / spec.period,
                    "noise": noise,
                    "lesovik_khlus": NoiseReference::LesovikKhlus { mean_charge: mean.regularized, transmission: t2 }.value(),
                }),
            )?;
        }
        ExperimentKind::NoiseSplit => {
            let split = noise_split(&model);
            w.json(
                "noise-split.json",
                json!({
                    "thermal": split.thermal,
                    "shot": split.shot,
                    "total": split.total(),
                    "trace_formula": noise_trace_formula(&model),
                }),
            )?;
        }
        ExperimentKind::Sweep => {
            let sweep = match &config.model {
                ModelSource::TwoCircle(spec) => SweepSpec::Pure { spec: *spec },
                ModelSource::ThermalTwoCircle(t) => SweepSpec::Thermal {
                    spec: t.spec,
                    beta: t.beta,
                },
                _ => unreachable!("checked in validate"),
            };
            let report = cutoff_sweep(&sweep, &config.cutoffs, &probes)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            w.put("sweep.csv", &buf)?;
            let mut v = report.to_json();
            v["chi_drift"] = report.chi_drift().into();
            v["occupation_strictly_increasing"] = report.occupation_strictly_increasing().into();
            v["max_identity_deviation"] = report.max_identity_deviation().into();
            w.json("sweep.json", v)?;
        }
        ExperimentKind::Diagnostics => {
            let identity = if model.is_commuting() {
                Some(regularization_identity_check(&model, &probes)?)
            } else {
                None
            };
            let mean = mean_charge(&model);
            w.json(
                "diagnostics.json",
                json!({
                    "validation": model.validate(),
                    "trace_class": trace_class_diagnostics(&model)?,
                    "trace_shift": trace_shift(&model),
                    "identity_deviation": identity,
                    "mean_charge": {"naive": mean.naive, "regularized": mean.regularized},
                }),
            )?;
        }
        ExperimentKind::OracleCheck => {
            let fock = FockModel::new(&model)?;
            let eval = ChiEvaluator::new(&model, variant)?;
            let period = variant.period();
            let deviation = (0..config.grid_size)
                .map(|k| {
                    let l = period * k as f64 / config.grid_size as f64;
                    let v = eval.chi(l)?;
                    let reference = match variant {
                        Variant::LesLev if model.is_commuting() => fock.chi_two_measurement(l),
                        Variant::Collapse => fock.chi_two_measurement(l),
                        Variant::LesLev => fock.chi_without_collapse(l),
                        Variant::Regularized => fock.chi_two_measurement(l),
                        Variant::SpinCoupling => fock.chi_spin_coupling(l),
                        Variant::SingleMeasurement => fock.chi_single_measurement(l)?,
                    };
                    Ok((v - reference).norm())
                })
                .collect::<Result<Vec<f64>, Error>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let passed = deviation <= ORACLE_TOL;
            w.json(
                "oracle-check.json",
                json!({
                    "variant": variant,
                    "dim": model.dim(),
                    "grid_size": config.grid_size,
                    "max_deviation": deviation,
                    "tolerance": ORACLE_TOL,
                    "passed": passed,
                    "report": if passed { format!("max deviation {deviation:e} <= {ORACLE_TOL:e}") } else { format!("max deviation {deviation:e} > {ORACLE_TOL:e}") },
                }),
            )?;
            if !passed {
                return Err(RunError::Numerical(Error::invalid(
                    "oracle",
                    format!("determinant and Fock-space results differ by {deviation:e}"),
                )));
            }
        }
    }
    Ok(RunSummary {
        experiment: config.experiment,
        artifacts: w.written,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_field() {
        let e = parse_config(r#"{"experiment": "chi", "model": {"random": {"seed": 1, "dim": 4, "kind": "pure-commuting"}}, "grid": 3}"#).unwrap_err();
        match e {
            RunError::Validation { field, .. } => assert_eq!(field, "grid"),
            other => panic!("{other:?}"),
        }
        let e = parse_config(
            r#"{"model": {"random": {"seed": 1, "dim": 4, "kind": "pure-commuting"}}}"#,
        )
        .unwrap_err();
        assert!(matches!(e, RunError::Validation { ref field, .. } if field == "experiment"));
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn validation_rejects_incompatible_variants() {
        let c = parse_config(r#"{"experiment": "chi", "variant": "les-lev", "model": {"random": {"seed": 1, "dim": 4, "kind": "mixed-general"}}}"#).unwrap();
        assert!(
            matches!(c.validate(), Err(RunError::Validation { ref field, .. }) if field == "variant")
        );
        let c = parse_config(r#"{"experiment": "sweep", "model": {"random": {"seed": 1, "dim": 4, "kind": "mixed-general"}}}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn oracle_default_variant_follows_commutation() {
        let c = parse_config(r#"{"experiment": "oracle-check", "model": {"random": {"seed": 1, "dim": 4, "kind": "mixed-general"}}}"#).unwrap();
        let m = c.validate().unwrap();
        assert_eq!(c.resolved_variant(&m), Variant::Collapse);
    }
}
