//! Run configurations.
//!
//! Every command is driven by one of these structs. Values resolve in three
//! layers: struct defaults, then an optional JSON config file, then explicit
//! command-line flags. The fully resolved struct is validated before any
//! work starts and written to `config.resolved.json` in the run directory,
//! so a run can always be reproduced from its artifacts alone.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use plumeop_core::synthfire::GeneratorConfig;
use plumeop_core::{Error, Result};

/// Loads a config struct from a JSON file. Unknown keys are rejected so a
/// typo cannot silently fall back to a default.
pub fn load_config<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path.as_ref())?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("config file {}: {e}", path.as_ref().display())))
}

/// Writes the resolved config into the run directory, creating it if needed.
pub fn write_resolved<T: Serialize>(out: impl AsRef<Path>, config: &T) -> Result<()> {
    fs::create_dir_all(out.as_ref())?;
    let text = serde_json::to_string_pretty(config).map_err(Error::from)?;
    fs::write(out.as_ref().join("config.resolved.json"), text)?;
    Ok(())
}

fn check_fractions(fractions: (f64, f64, f64)) -> Result<()> {
    let (a, b, c) = fractions;
    let sum = a + b + c;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split fractions must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    Ok(())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    Ok(())
}

fn check_part(part: &str) -> Result<()> {
    match part {
        "train" | "validation" | "test" => Ok(()),
        other => Err(Error::InvalidInput(format!(
            "unknown dataset part '{other}' (expected train|validation|test)"
        ))),
    }
}

/// Operator family to fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Linear,
    Quadratic,
}

/// QoI estimator variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum QoiEstimator {
    Full,
    Reduced,
    Surrogate,
}

/// Hyperparameter axis a sweep walks over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Beta,
    Energy,
    Lambda,
    GpLengthscale,
}

/// GP baseline input representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GpVariant {
    /// Kernel on raw input fields, outputs regressed pixelwise.
    Images,
    /// Kernel on reduced input coefficients, outputs regressed in the
    /// reduced output space and decoded.
    Coeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub generator: GeneratorConfig,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            out: PathBuf::from("runs/dataset"),
            seed: 0,
            generator: GeneratorConfig::default(),
        }
    }
}

impl GenerateConfig {
    pub fn validate(&self) -> Result<()> {
        self.generator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    /// Seed for the fire-level split shuffle.
    pub seed: u64,
    pub split_fractions: (f64, f64, f64),
    pub kind: OperatorKind,
    /// Energy fraction for rank selection; ignored for a basis whose
    /// explicit rank is set.
    pub energy: f64,
    pub rank_in: Option<usize>,
    pub rank_out: Option<usize>,
    /// Ridge weight for quadratic fits.
    pub lambda: f64,
    /// Clamp decoded predictions at zero.
    pub clamp_nonneg: bool,
    /// Fit against `ln(g + 1)` instead of raw smoke fields.
    pub log_transform: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            manifest: PathBuf::from("runs/dataset/manifest.json"),
            out: PathBuf::from("runs/fit"),
            seed: 0,
            split_fractions: (0.6, 0.2, 0.2),
            kind: OperatorKind::Linear,
            energy: 0.95,
            rank_in: None,
            rank_out: None,
            lambda: 1e5,
            clamp_nonneg: true,
            log_transform: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        check_fractions(self.split_fractions)?;
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "energy fraction must lie in (0, 1], got {}",
                self.energy
            )));
        }
        if self.rank_in == Some(0) || self.rank_out == Some(0) {
            return Err(Error::InvalidInput(
                "explicit ranks must be positive".into(),
            ));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidInput(format!(
                "ridge weight must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub manifest: PathBuf,
    /// Model directory written by `fit`.
    pub model: PathBuf,
    /// `split.json` written by `fit`.
    pub split: PathBuf,
    pub out: PathBuf,
    pub part: String,
    pub beta: f64,
    pub n_thresholds: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            manifest: PathBuf::from("runs/dataset/manifest.json"),
            model: PathBuf::from("runs/fit/model"),
            split: PathBuf::from("runs/fit/split.json"),
            out: PathBuf::from("runs/evaluate"),
            part: "test".into(),
            beta: 0.95,
            n_thresholds: 256,
        }
    }
}

impl EvaluateConfig {
    pub fn validate(&self) -> Result<()> {
        check_part(&self.part)?;
        check_beta(self.beta)?;
        if self.n_thresholds < 4 {
            return Err(Error::InvalidInput(format!(
                "need at least 4 thresholds, got {}",
                self.n_thresholds
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoiConfig {
    pub manifest: PathBuf,
    pub split: PathBuf,
    pub out: PathBuf,
    pub estimator: QoiEstimator,
    /// Required for the surrogate estimator; the model must have been fit
    /// with `log_transform` so predictions live in QoI space.
    pub model: Option<PathBuf>,
    /// Energy fraction for the reduced estimator's basis.
    pub energy: f64,
    /// Sample-count schedule; empty means 5%, 10%, 25%, 50%, and 100% of
    /// the holdout fires.
    pub m_prime: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for QoiConfig {
    fn default() -> Self {
        QoiConfig {
            manifest: PathBuf::from("runs/dataset/manifest.json"),
            split: PathBuf::from("runs/fit/split.json"),
            out: PathBuf::from("runs/qoi"),
            estimator: QoiEstimator::Full,
            model: None,
            energy: 0.95,
            m_prime: Vec::new(),
            repetitions: 20,
            seed: 0,
        }
    }
}

impl QoiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::InvalidInput("need at least one repetition".into()));
        }
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "energy fraction must lie in (0, 1], got {}",
                self.energy
            )));
        }
        if self.m_prime.iter().any(|&m| m == 0) {
            return Err(Error::InvalidInput("sample counts must be positive".into()));
        }
        if self.estimator == QoiEstimator::Surrogate && self.model.is_none() {
            return Err(Error::InvalidInput(
                "surrogate estimator needs a model path".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
    pub out: PathBuf,
    /// Fit settings shared by every grid point; sweeps score on the
    /// validation part only.
    pub base: FitConfig,
    pub beta: f64,
    pub n_thresholds: usize,
    /// GP settings, used only for the gp_lengthscale axis.
    pub gp: GpSweepSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpSweepSettings {
    pub variant: GpVariant,
    pub subsample: usize,
    pub noise: f64,
}

impl Default for GpSweepSettings {
    fn default() -> Self {
        GpSweepSettings {
            variant: GpVariant::Coeffs,
            subsample: 500,
            noise: 1e-8,
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            axis: SweepAxis::Beta,
            grid: Vec::new(),
            out: PathBuf::from("runs/sweep"),
            base: FitConfig::default(),
            beta: 0.95,
            n_thresholds: 256,
            gp: GpSweepSettings::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        check_beta(self.beta)?;
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("sweep grid must not be empty".into()));
        }
        for &v in &self.grid {
            if !v.is_finite() {
                return Err(Error::InvalidInput(
                    "sweep grid values must be finite".into(),
                ));
            }
            match self.axis {
                SweepAxis::Beta => check_beta(v)?,
                SweepAxis::Energy => {
                    if !(v > 0.0 && v <= 1.0) {
                        return Err(Error::InvalidInput(format!(
                            "energy grid value {v} outside (0, 1]"
                        )));
                    }
                }
                SweepAxis::Lambda => {
                    if v < 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "ridge grid value {v} is negative"
                        )));
                    }
                }
                SweepAxis::GpLengthscale => {
                    if !(v > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "length-scale grid value {v} is not positive"
                        )));
                    }
                }
            }
        }
        if self.axis == SweepAxis::Lambda && self.base.kind != OperatorKind::Quadratic {
            return Err(Error::InvalidInput(
                "the lambda axis requires a quadratic base fit".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub split_fractions: (f64, f64, f64),
    pub variant: GpVariant,
    /// Training pairs kept after random subsampling.
    pub subsample: usize,
    /// Length-scale grid; a single value skips the tuning loop. Candidates
    /// should bracket the typical pairwise distance of the chosen input
    /// representation, hence the wide geometric default.
    pub length_scales: Vec<f64>,
    pub noise: f64,
    /// Energy fraction for the coeffs variant's bases.
    pub energy: f64,
    pub part: String,
    pub beta: f64,
    pub n_thresholds: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            manifest: PathBuf::from("runs/dataset/manifest.json"),
            out: PathBuf::from("runs/gp"),
            seed: 0,
            split_fractions: (0.6, 0.2, 0.2),
            variant: GpVariant::Coeffs,
            subsample: 500,
            length_scales: vec![1e-1, 1e0, 1e1, 1e2, 1e3, 1e4],
            noise: 1e-8,
            energy: 0.95,
            part: "test".into(),
            beta: 0.95,
            n_thresholds: 256,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Result<()> {
        check_fractions(self.split_fractions)?;
        check_part(&self.part)?;
        check_beta(self.beta)?;
        if self.subsample == 0 {
            return Err(Error::InvalidInput("subsample must be positive".into()));
        }
        if self.length_scales.is_empty() {
            return Err(Error::InvalidInput(
                "length-scale grid must not be empty".into(),
            ));
        }
        if self
            .length_scales
            .iter()
            .any(|&l| !(l > 0.0) || !l.is_finite())
        {
            return Err(Error::InvalidInput(
                "length scales must be positive and finite".into(),
            ));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise variance must be non-negative, got {}",
                self.noise
            )));
        }
        if !(self.energy > 0.0 && self.energy <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "energy fraction must lie in (0, 1], got {}",
                self.energy
            )));
        }
        Ok(())
    }
}
