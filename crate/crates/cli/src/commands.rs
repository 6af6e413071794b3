//! Subcommand implementations.
//!
//! Commands communicate through files: `generate` writes a dataset manifest,
//! `fit` writes a model directory plus the fire-level split it trained
//! under, and the downstream commands consume both. Every run directory gets
//! `config.resolved.json` (the exact inputs) and `timings.json` (wall
//! clocks). Timings are the only non-deterministic artifact, which is why
//! they live in their own file: everything else is byte-stable for a fixed
//! resolved config.
//!
//! Two leakage rules hold everywhere: bases and models are fit on training
//! columns only, and the smoke threshold `tau` always comes from validation
//! outputs, even when scoring the test part.

use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use plumeop_core::baselines::{gp_fit, gp_predict, tune_length_scale, GpModel};
use plumeop_core::evalqoi::{
    classification_report, qoi_full_mc, qoi_reduced_mc, qoi_surrogate, relative_frobenius_error,
    smoke_threshold, write_report_csv, write_roc_csv, ClassificationReport, ReportSummary,
};
use plumeop_core::mlop::{fit_linear_closed_form, fit_quadratic, OutputTransform, SurrogateModel};
use plumeop_core::reduction::{pod_basis, save_basis, RankSpec, ReducedBasis};
use plumeop_core::synthfire::generate_dataset;
use plumeop_core::tensorio::{
    final_time_indices, load_dataset, save_dataset, split_by_fire, write_matrix, DatasetSplit,
    SnapshotMatrix,
};
use plumeop_core::{Error, Result};

use crate::config::{
    write_resolved, EvaluateConfig, FitConfig, GenerateConfig, GpConfig, OperatorKind, QoiConfig,
    QoiEstimator, SweepAxis, SweepConfig,
};

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    fs::write(path, text)?;
    Ok(())
}

fn write_timings(out: &Path, entries: &[(&str, f64)]) -> Result<()> {
    let mut map = serde_json::Map::new();
    for &(name, seconds) in entries {
        map.insert(format!("{name}_seconds"), serde_json::json!(seconds));
    }
    write_json(out.join("timings.json"), &serde_json::Value::Object(map))
}

fn write_csv(path: impl AsRef<Path>, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Generates the synthetic dataset and writes it under the run directory.
pub fn cmd_generate(config: &GenerateConfig) -> Result<()> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let start = Instant::now();
    let (inputs, outputs) = generate_dataset(&config.generator, config.seed)?;
    let generate_seconds = start.elapsed().as_secs_f64();
    save_dataset(config.out.join("manifest.json"), &inputs, &outputs)?;
    write_timings(&config.out, &[("generate", generate_seconds)])?;
    Ok(())
}

/// Deterministic numbers recorded by `fit`.
#[derive(Debug, Clone, Serialize)]
pub struct FitMetrics {
    pub kind: String,
    pub rank_in: usize,
    pub rank_out: usize,
    pub lambda: Option<f64>,
    pub log_transform: bool,
    pub clamp_nonneg: bool,
    pub theta_norm: f64,
    /// Relative Frobenius error of training predictions in the space the
    /// model was fit in (log space for log-transformed fits).
    pub train_rel_err: f64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
}

fn rank_spec(explicit: Option<usize>, energy: f64) -> RankSpec {
    match explicit {
        Some(r) => RankSpec::Fixed(r),
        None => RankSpec::EnergyFraction(energy),
    }
}

fn transform_outputs(data: &DMatrix<f64>, log_transform: bool) -> DMatrix<f64> {
    if log_transform {
        data.map(|v| v.ln_1p())
    } else {
        data.clone()
    }
}

fn fit_surrogate(
    input_basis: &ReducedBasis,
    output_basis: &ReducedBasis,
    kind: OperatorKind,
    lambda: f64,
    clamp_nonneg: bool,
    transform: OutputTransform,
) -> Result<SurrogateModel> {
    Ok(match kind {
        OperatorKind::Linear => SurrogateModel::Linear(fit_linear_closed_form(
            input_basis,
            output_basis,
            clamp_nonneg,
            transform,
        )?),
        OperatorKind::Quadratic => SurrogateModel::Quadratic(fit_quadratic(
            input_basis,
            output_basis,
            lambda,
            clamp_nonneg,
            transform,
        )?),
    })
}

/// Splits the dataset, builds train-only bases, fits the operator, and
/// writes `model/`, `split.json`, and the fit metrics.
pub fn cmd_fit(config: &FitConfig) -> Result<FitMetrics> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let (inputs, outputs) = load_dataset(&config.manifest)?;
    let split = split_by_fire(&inputs.labels, config.split_fractions, config.seed)?;
    write_json(config.out.join("split.json"), &split)?;

    let train_inputs = inputs.select_columns(&split.train)?;
    let train_outputs = outputs.select_columns(&split.train)?;
    let train_out_data = transform_outputs(&train_outputs.data, config.log_transform);
    let transform = if config.log_transform {
        OutputTransform::Log1p
    } else {
        OutputTransform::Identity
    };

    let basis_start = Instant::now();
    let input_basis = pod_basis(&train_inputs.data, rank_spec(config.rank_in, config.energy))?;
    let output_basis = pod_basis(&train_out_data, rank_spec(config.rank_out, config.energy))?;
    let basis_seconds = basis_start.elapsed().as_secs_f64();

    let fit_start = Instant::now();
    let model = fit_surrogate(
        &input_basis,
        &output_basis,
        config.kind,
        config.lambda,
        config.clamp_nonneg,
        transform,
    )?;
    let fit_seconds = fit_start.elapsed().as_secs_f64();

    model.save(config.out.join("model"))?;

    let train_preds = model.predict(&train_inputs.data)?;
    let train_rel_err = relative_frobenius_error(&train_preds, &train_out_data)?;
    let metrics = FitMetrics {
        kind: model.kind().to_string(),
        rank_in: input_basis.rank(),
        rank_out: output_basis.rank(),
        lambda: match config.kind {
            OperatorKind::Quadratic => Some(config.lambda),
            OperatorKind::Linear => None,
        },
        log_transform: config.log_transform,
        clamp_nonneg: config.clamp_nonneg,
        theta_norm: model.theta().norm(),
        train_rel_err,
        n_train: split.train.len(),
        n_validation: split.validation.len(),
        n_test: split.test.len(),
    };
    write_json(config.out.join("metrics.json"), &metrics)?;
    write_timings(
        &config.out,
        &[("basis", basis_seconds), ("fit", fit_seconds)],
    )?;
    Ok(metrics)
}

fn load_split(path: &Path, labels_len: usize) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path)?;
    let split: DatasetSplit = serde_json::from_str(&text).map_err(Error::from)?;
    let max = split
        .train
        .iter()
        .chain(&split.validation)
        .chain(&split.test)
        .copied()
        .max();
    if let Some(max) = max {
        if max >= labels_len {
            return Err(Error::InvalidInput(format!(
                "split references snapshot {max} but the dataset has {labels_len}"
            )));
        }
    }
    Ok(split)
}

/// Maps model-space predictions back to physical smoke concentrations.
fn to_physical(preds: &DMatrix<f64>, transform: OutputTransform) -> DMatrix<f64> {
    match transform {
        OutputTransform::Identity => preds.clone(),
        OutputTransform::Log1p => preds.map(|v| v.exp_m1().max(0.0)),
    }
}

/// Scores a prediction matrix on one dataset part. `tau` must come from
/// validation outputs; this helper only assembles the report.
fn score_part(
    preds_data: DMatrix<f64>,
    part_obs: &SnapshotMatrix,
    tau: f64,
    beta: f64,
    n_thresholds: usize,
) -> Result<(ReportSummary, ClassificationReport)> {
    let preds = SnapshotMatrix::new(part_obs.grid, preds_data, part_obs.labels.clone())?;
    let report = classification_report(&preds, part_obs, tau, n_thresholds)?;
    let mut summary = ReportSummary::from_report(&report, beta);
    summary.overall_rel_err = Some(relative_frobenius_error(&preds.data, &part_obs.data)?);
    Ok((summary, report))
}

/// Evaluates a fitted model on one part of the dataset.
pub fn cmd_evaluate(config: &EvaluateConfig) -> Result<ReportSummary> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let (inputs, outputs) = load_dataset(&config.manifest)?;
    let model = SurrogateModel::load(&config.model)?;
    let split = load_split(&config.split, inputs.labels.len())?;
    split.validate(&inputs.labels)?;

    let part_indices = split.part(&config.part)?;
    if part_indices.is_empty() {
        return Err(Error::InvalidInput(format!(
            "part '{}' has no snapshots",
            config.part
        )));
    }

    // tau from validation outputs regardless of the scored part.
    let tau_start = Instant::now();
    let val_outputs = outputs.select_columns(&split.validation)?;
    let tau = smoke_threshold(&val_outputs.data, config.beta)?;
    let tau_seconds = tau_start.elapsed().as_secs_f64();

    let part_inputs = inputs.select_columns(part_indices)?;
    let part_outputs = outputs.select_columns(part_indices)?;
    let predict_start = Instant::now();
    let preds = to_physical(&model.predict(&part_inputs.data)?, model.output_transform());
    let predict_seconds = predict_start.elapsed().as_secs_f64();

    let report_start = Instant::now();
    let (summary, report) =
        score_part(preds, &part_outputs, tau, config.beta, config.n_thresholds)?;
    let report_seconds = report_start.elapsed().as_secs_f64();

    summary.save(config.out.join("report.json"))?;
    write_report_csv(config.out.join("report.csv"), &report)?;
    write_roc_csv(config.out.join("roc.csv"), &report)?;
    write_timings(
        &config.out,
        &[
            ("tau", tau_seconds),
            ("predict", predict_seconds),
            ("report", report_seconds),
        ],
    )?;
    Ok(summary)
}

/// Default sample-count schedule: 5%, 10%, 25%, 50%, 100% of the holdout.
fn default_schedule(holdout: usize) -> Vec<usize> {
    let mut schedule: Vec<usize> = [0.05, 0.1, 0.25, 0.5, 1.0]
        .iter()
        .map(|f| ((holdout as f64 * f).round() as usize).clamp(1, holdout))
        .collect();
    schedule.dedup();
    schedule
}

/// QoI convergence study on the holdout fires' final-time snapshots.
pub fn cmd_qoi(config: &QoiConfig) -> Result<()> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let (inputs, outputs) = load_dataset(&config.manifest)?;
    let split = load_split(&config.split, inputs.labels.len())?;
    split.validate(&inputs.labels)?;

    // Holdout = test part, restricted to each fire's final checkpoint: the
    // QoI is a final-time quantity.
    let test_inputs = inputs.select_columns(&split.test)?;
    let test_outputs = outputs.select_columns(&split.test)?;
    let final_idx = final_time_indices(&test_outputs.labels);
    let holdout_inputs = test_inputs.select_columns(&final_idx)?;
    let holdout_outputs = test_outputs.select_columns(&final_idx)?;
    let h = holdout_outputs.n_snapshots();

    let schedule = if config.m_prime.is_empty() {
        default_schedule(h)
    } else {
        let mut s = config.m_prime.clone();
        s.sort_unstable();
        s.dedup();
        if *s.last().unwrap() > h {
            return Err(Error::InvalidInput(format!(
                "sample count {} exceeds the {h} holdout snapshots",
                s.last().unwrap()
            )));
        }
        s
    };

    // Reference: full MC over the entire holdout.
    let reference = qoi_full_mc(&holdout_outputs, h)?;
    let ref_norm = reference.values.norm();
    if !(ref_norm > 0.0) {
        return Err(Error::InvalidInput(
            "holdout QoI reference is identically zero".into(),
        ));
    }

    // Estimator-specific state, built from training data only.
    let reduced_basis = match config.estimator {
        QoiEstimator::Reduced => {
            let train_outputs = outputs.select_columns(&split.train)?;
            let transformed = train_outputs.data.map(|v| v.ln_1p());
            Some(pod_basis(
                &transformed,
                RankSpec::EnergyFraction(config.energy),
            )?)
        }
        _ => None,
    };
    let model = match config.estimator {
        QoiEstimator::Surrogate => {
            let path = config.model.as_ref().expect("validated");
            Some(SurrogateModel::load(path)?)
        }
        _ => None,
    };

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); schedule.len()];
    let mut order: Vec<usize> = (0..h).collect();
    for _rep in 0..config.repetitions {
        order.shuffle(&mut rng);
        let shuffled_inputs = holdout_inputs.select_columns(&order)?;
        let shuffled_outputs = holdout_outputs.select_columns(&order)?;
        for (slot, &m_prime) in schedule.iter().enumerate() {
            let estimate = match config.estimator {
                QoiEstimator::Full => qoi_full_mc(&shuffled_outputs, m_prime)?,
                QoiEstimator::Reduced => qoi_reduced_mc(
                    &shuffled_outputs,
                    reduced_basis.as_ref().expect("built above"),
                    m_prime,
                )?,
                QoiEstimator::Surrogate => qoi_surrogate(
                    &shuffled_inputs,
                    model.as_ref().expect("loaded above"),
                    m_prime,
                )?,
            };
            errors[slot].push((estimate.values - &reference.values).norm() / ref_norm);
        }
    }
    let qoi_seconds = start.elapsed().as_secs_f64();

    let estimator_name = match config.estimator {
        QoiEstimator::Full => "full",
        QoiEstimator::Reduced => "reduced",
        QoiEstimator::Surrogate => "surrogate",
    };
    let rows: Vec<Vec<String>> = schedule
        .iter()
        .zip(&errors)
        .map(|(&m_prime, errs)| {
            let (median, q25, q75) = plumeop_core::evalqoi::median_and_quartiles(errs);
            vec![
                estimator_name.to_string(),
                m_prime.to_string(),
                format!("{median}"),
                format!("{q25}"),
                format!("{q75}"),
            ]
        })
        .collect();
    write_csv(
        config.out.join("qoi.csv"),
        "estimator,m_prime,median_rel_err,rel_err_q25,rel_err_q75",
        &rows,
    )?;
    write_timings(&config.out, &[("qoi", qoi_seconds)])?;
    Ok(())
}

/// One fitted-and-scored grid point of a sweep.
struct SweepRow {
    value: f64,
    tau: f64,
    median_auc: f64,
    median_iou: f64,
    median_rel_err: f64,
    theta_norm: f64,
}

fn fit_and_score_validation(
    inputs: &SnapshotMatrix,
    outputs: &SnapshotMatrix,
    split: &DatasetSplit,
    fit: &FitConfig,
    beta: f64,
    n_thresholds: usize,
) -> Result<(f64, ReportSummary)> {
    let train_inputs = inputs.select_columns(&split.train)?;
    let train_outputs = outputs.select_columns(&split.train)?;
    let train_out_data = transform_outputs(&train_outputs.data, fit.log_transform);
    let transform = if fit.log_transform {
        OutputTransform::Log1p
    } else {
        OutputTransform::Identity
    };
    let input_basis = pod_basis(&train_inputs.data, rank_spec(fit.rank_in, fit.energy))?;
    let output_basis = pod_basis(&train_out_data, rank_spec(fit.rank_out, fit.energy))?;
    let model = fit_surrogate(
        &input_basis,
        &output_basis,
        fit.kind,
        fit.lambda,
        fit.clamp_nonneg,
        transform,
    )?;

    let val_inputs = inputs.select_columns(&split.validation)?;
    let val_outputs = outputs.select_columns(&split.validation)?;
    let tau = smoke_threshold(&val_outputs.data, beta)?;
    let preds = to_physical(&model.predict(&val_inputs.data)?, model.output_transform());
    let (summary, _) = score_part(preds, &val_outputs, tau, beta, n_thresholds)?;
    Ok((model.theta().norm(), summary))
}

/// Hyperparameter sweep scored on the validation part.
pub fn cmd_sweep(config: &SweepConfig) -> Result<()> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let (inputs, outputs) = load_dataset(&config.base.manifest)?;
    let split = split_by_fire(
        &inputs.labels,
        config.base.split_fractions,
        config.base.seed,
    )?;

    let start = Instant::now();
    let mut rows = Vec::with_capacity(config.grid.len());
    for &value in &config.grid {
        let row = match config.axis {
            SweepAxis::Beta => {
                let (theta_norm, summary) = fit_and_score_validation(
                    &inputs,
                    &outputs,
                    &split,
                    &config.base,
                    value,
                    config.n_thresholds,
                )?;
                SweepRow {
                    value,
                    tau: summary.tau,
                    median_auc: summary.median_auc,
                    median_iou: summary.median_iou,
                    median_rel_err: summary.median_rel_err,
                    theta_norm,
                }
            }
            SweepAxis::Energy => {
                let mut fit = config.base.clone();
                fit.energy = value;
                fit.rank_in = None;
                fit.rank_out = None;
                let (theta_norm, summary) = fit_and_score_validation(
                    &inputs,
                    &outputs,
                    &split,
                    &fit,
                    config.beta,
                    config.n_thresholds,
                )?;
                SweepRow {
                    value,
                    tau: summary.tau,
                    median_auc: summary.median_auc,
                    median_iou: summary.median_iou,
                    median_rel_err: summary.median_rel_err,
                    theta_norm,
                }
            }
            SweepAxis::Lambda => {
                let mut fit = config.base.clone();
                fit.lambda = value;
                let (theta_norm, summary) = fit_and_score_validation(
                    &inputs,
                    &outputs,
                    &split,
                    &fit,
                    config.beta,
                    config.n_thresholds,
                )?;
                SweepRow {
                    value,
                    tau: summary.tau,
                    median_auc: summary.median_auc,
                    median_iou: summary.median_iou,
                    median_rel_err: summary.median_rel_err,
                    theta_norm,
                }
            }
            SweepAxis::GpLengthscale => {
                let (weights_norm, summary) =
                    gp_score_validation(&inputs, &outputs, &split, config, value)?;
                SweepRow {
                    value,
                    tau: summary.tau,
                    median_auc: summary.median_auc,
                    median_iou: summary.median_iou,
                    median_rel_err: summary.median_rel_err,
                    theta_norm: weights_norm,
                }
            }
        };
        rows.push(row);
    }
    let sweep_seconds = start.elapsed().as_secs_f64();

    let axis_name = match config.axis {
        SweepAxis::Beta => "beta",
        SweepAxis::Energy => "energy",
        SweepAxis::Lambda => "lambda",
        SweepAxis::GpLengthscale => "gp_lengthscale",
    };
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                axis_name.to_string(),
                format!("{}", r.value),
                format!("{}", r.tau),
                format!("{}", r.median_auc),
                format!("{}", r.median_iou),
                format!("{}", r.median_rel_err),
                format!("{}", r.theta_norm),
            ]
        })
        .collect();
    write_csv(
        config.out.join("sweep.csv"),
        "axis,value,tau,median_auc,median_iou,median_rel_err,theta_norm",
        &csv_rows,
    )?;
    write_timings(&config.out, &[("sweep", sweep_seconds)])?;
    Ok(())
}

/// Deterministic train-pair subsample: shuffle the training indices with the
/// seed, keep the first `k`, and restore index order so column order never
/// depends on the shuffle.
fn subsample_indices(train: &[usize], k: usize, seed: u64) -> Vec<usize> {
    if train.len() <= k {
        return train.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = train.to_vec();
    shuffled.shuffle(&mut rng);
    let mut kept = shuffled[..k].to_vec();
    kept.sort_unstable();
    kept
}

/// GP pipeline pieces shared by `cmd_baseline_gp` and the length-scale
/// sweep axis: fit at one length scale, score the validation part.
fn gp_score_validation(
    inputs: &SnapshotMatrix,
    outputs: &SnapshotMatrix,
    split: &DatasetSplit,
    config: &SweepConfig,
    length_scale: f64,
) -> Result<(f64, ReportSummary)> {
    let gp_cfg = GpConfig {
        manifest: config.base.manifest.clone(),
        out: config.out.clone(),
        seed: config.base.seed,
        split_fractions: config.base.split_fractions,
        variant: config.gp.variant,
        subsample: config.gp.subsample,
        length_scales: vec![length_scale],
        noise: config.gp.noise,
        energy: config.base.energy,
        part: "validation".into(),
        beta: config.beta,
        n_thresholds: config.n_thresholds,
    };
    let (model, bases) = gp_fit_pipeline(inputs, outputs, split, &gp_cfg, length_scale)?;
    let (summary, _) = gp_evaluate_part(inputs, outputs, split, &gp_cfg, &model, &bases)?;
    Ok((model.weights.norm(), summary))
}

type GpBases = Option<(ReducedBasis, ReducedBasis)>;

fn gp_fit_pipeline(
    inputs: &SnapshotMatrix,
    outputs: &SnapshotMatrix,
    split: &DatasetSplit,
    config: &GpConfig,
    length_scale: f64,
) -> Result<(GpModel, GpBases)> {
    let kept = subsample_indices(&split.train, config.subsample, config.seed);
    let train_inputs = inputs.select_columns(&kept)?;
    let train_outputs = outputs.select_columns(&kept)?;
    match config.variant {
        crate::config::GpVariant::Images => {
            let model = gp_fit(
                &train_inputs.data,
                &train_outputs.data,
                length_scale,
                config.noise,
            )?;
            Ok((model, None))
        }
        crate::config::GpVariant::Coeffs => {
            let input_basis =
                pod_basis(&train_inputs.data, RankSpec::EnergyFraction(config.energy))?;
            let output_basis =
                pod_basis(&train_outputs.data, RankSpec::EnergyFraction(config.energy))?;
            let a = input_basis.encode(&train_inputs.data)?;
            let b = output_basis.encode(&train_outputs.data)?;
            let model = gp_fit(&a, &b, length_scale, config.noise)?;
            Ok((model, Some((input_basis, output_basis))))
        }
    }
}

fn gp_predict_physical(
    model: &GpModel,
    bases: &GpBases,
    query_fields: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let mut preds = match bases {
        None => gp_predict(model, query_fields)?,
        Some((input_basis, output_basis)) => {
            let coeffs = input_basis.encode(query_fields)?;
            output_basis.decode(&gp_predict(model, &coeffs)?)?
        }
    };
    // Smoke is non-negative; the GP posterior mean is not.
    for v in preds.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(preds)
}

fn gp_evaluate_part(
    inputs: &SnapshotMatrix,
    outputs: &SnapshotMatrix,
    split: &DatasetSplit,
    config: &GpConfig,
    model: &GpModel,
    bases: &GpBases,
) -> Result<(ReportSummary, ClassificationReport)> {
    let val_outputs = outputs.select_columns(&split.validation)?;
    let tau = smoke_threshold(&val_outputs.data, config.beta)?;
    let part_indices = split.part(&config.part)?;
    if part_indices.is_empty() {
        return Err(Error::InvalidInput(format!(
            "part '{}' has no snapshots",
            config.part
        )));
    }
    let part_inputs = inputs.select_columns(part_indices)?;
    let part_outputs = outputs.select_columns(part_indices)?;
    let preds = gp_predict_physical(model, bases, &part_inputs.data)?;
    score_part(preds, &part_outputs, tau, config.beta, config.n_thresholds)
}

#[derive(Serialize)]
struct GpDescriptor {
    variant: String,
    length_scale: f64,
    noise: f64,
    n_train_pairs: usize,
    energy: Option<f64>,
}

/// Gaussian-process baseline: subsample training pairs, tune the length
/// scale on validation pairs, evaluate with the classification pipeline.
pub fn cmd_baseline_gp(config: &GpConfig) -> Result<ReportSummary> {
    config.validate()?;
    write_resolved(&config.out, config)?;
    let (inputs, outputs) = load_dataset(&config.manifest)?;
    let split = split_by_fire(&inputs.labels, config.split_fractions, config.seed)?;
    write_json(config.out.join("split.json"), &split)?;

    // Length-scale tuning compares validation-pair errors in the variant's
    // regression space (fields for images, coefficients for coeffs).
    let tune_start = Instant::now();
    let kept = subsample_indices(&split.train, config.subsample, config.seed);
    let train_inputs = inputs.select_columns(&kept)?;
    let train_outputs = outputs.select_columns(&kept)?;
    let val_inputs = inputs.select_columns(&split.validation)?;
    let val_outputs = outputs.select_columns(&split.validation)?;

    let (best, trials) = match config.variant {
        crate::config::GpVariant::Images => tune_length_scale(
            &train_inputs.data,
            &train_outputs.data,
            &val_inputs.data,
            &val_outputs.data,
            &config.length_scales,
            config.noise,
        )?,
        crate::config::GpVariant::Coeffs => {
            let input_basis =
                pod_basis(&train_inputs.data, RankSpec::EnergyFraction(config.energy))?;
            let output_basis =
                pod_basis(&train_outputs.data, RankSpec::EnergyFraction(config.energy))?;
            tune_length_scale(
                &input_basis.encode(&train_inputs.data)?,
                &output_basis.encode(&train_outputs.data)?,
                &input_basis.encode(&val_inputs.data)?,
                &output_basis.encode(&val_outputs.data)?,
                &config.length_scales,
                config.noise,
            )?
        }
    };
    let tuning_seconds = tune_start.elapsed().as_secs_f64();

    let trial_rows: Vec<Vec<String>> = trials
        .iter()
        .map(|t| {
            vec![
                format!("{}", t.length_scale),
                format!("{}", t.validation_error),
            ]
        })
        .collect();
    write_csv(
        config.out.join("gp_trials.csv"),
        "length_scale,validation_error",
        &trial_rows,
    )?;

    let fit_start = Instant::now();
    let (model, bases) = gp_fit_pipeline(&inputs, &outputs, &split, config, best)?;
    let fit_seconds = fit_start.elapsed().as_secs_f64();

    let gp_dir = config.out.join("gp");
    fs::create_dir_all(&gp_dir)?;
    write_matrix(gp_dir.join("train_inputs.mat"), &model.train_inputs)?;
    write_matrix(gp_dir.join("weights.mat"), &model.weights)?;
    if let Some((input_basis, output_basis)) = &bases {
        save_basis(gp_dir.join("input_basis"), input_basis)?;
        save_basis(gp_dir.join("output_basis"), output_basis)?;
    }
    write_json(
        gp_dir.join("gp.json"),
        &GpDescriptor {
            variant: match config.variant {
                crate::config::GpVariant::Images => "images".into(),
                crate::config::GpVariant::Coeffs => "coeffs".into(),
            },
            length_scale: model.length_scale,
            noise: model.noise,
            n_train_pairs: model.train_inputs.ncols(),
            energy: match config.variant {
                crate::config::GpVariant::Coeffs => Some(config.energy),
                crate::config::GpVariant::Images => None,
            },
        },
    )?;

    let eval_start = Instant::now();
    let (summary, report) = gp_evaluate_part(&inputs, &outputs, &split, config, &model, &bases)?;
    let eval_seconds = eval_start.elapsed().as_secs_f64();
    summary.save(config.out.join("report.json"))?;
    write_report_csv(config.out.join("report.csv"), &report)?;
    write_roc_csv(config.out.join("roc.csv"), &report)?;
    write_timings(
        &config.out,
        &[
            ("tuning", tuning_seconds),
            ("fit", fit_seconds),
            ("evaluate", eval_seconds),
        ],
    )?;
    Ok(summary)
}
