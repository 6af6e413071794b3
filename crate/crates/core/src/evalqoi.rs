//! Classification metrics, error norms, and Monte Carlo estimators for the
//! log-exposure quantity of interest.
//!
//! Classification treats each snapshot as a segmentation problem: the
//! observation mask is `obs > tau` for a dataset-level threshold `tau`
//! chosen from validation data, and the prediction is swept over thresholds
//! `alpha` to trace a ROC curve (predicted-positive means `pred > alpha`,
//! strictly). AUC is the trapezoidal integral of TPR against FPR, and IoU is
//! evaluated at the curve point nearest `(0, 1)`.
//!
//! The QoI is the pixelwise expectation of `ln(g + 1)` over fires, estimated
//! three ways: full Monte Carlo on the smoke fields, Monte Carlo on their
//! projection onto a reduced basis, and Monte Carlo on surrogate predictions.
//! All three average over the first `m_prime` columns of their input; callers
//! shuffle columns beforehand, so subsampling stays outside this module.

use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::mlop::{OutputTransform, SurrogateModel};
use crate::par;
use crate::reduction::ReducedBasis;
use crate::tensorio::{Grid2D, SnapshotMatrix};
use crate::{Error, Result};

/// ROC curve samples ordered by descending threshold, so FPR and TPR are
/// non-decreasing along the vectors. The first point is `(0, 0)` and the
/// last, taken at a sentinel threshold of negative infinity, is `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    /// Set when the curve is the two-point convention for an empty or full
    /// observation mask or constant predictions.
    pub degenerate: bool,
}

/// Per-snapshot classification and error metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMetrics {
    pub fire_id: u64,
    pub time_index: u32,
    pub condition: String,
    pub auc: f64,
    pub iou_at_best: f64,
    pub best_threshold: f64,
    pub rel_err: f64,
    pub degenerate: bool,
}

/// Test-set classification summary. Scalar fields are medians of the
/// per-snapshot values (the headline numbers are median AUC and median IoU).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub auc: f64,
    pub best_threshold: f64,
    pub iou_at_best: f64,
    pub tau: f64,
    pub per_snapshot: Vec<SnapshotMetrics>,
    /// One curve per snapshot, aligned with `per_snapshot`.
    pub curves: Vec<RocCurve>,
}

/// Pixelwise QoI estimate on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiField {
    pub grid: Grid2D,
    pub values: DVector<f64>,
}

/// Smoke threshold `tau` from validation outputs.
///
/// Candidates are the distinct positive pixel values plus zero. For a
/// candidate `t`, each snapshot that has any positive pixels contributes the
/// fraction of its positive pixels strictly above `t`; `tau` is the largest
/// candidate whose mean fraction exceeds `beta`. Zero always qualifies (the
/// fraction is then 1), so the search cannot come up empty.
pub fn smoke_threshold(outputs: &DMatrix<f64>, beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "beta must lie in (0, 1), got {beta}"
        )));
    }
    // Sorted positive pixels per snapshot; snapshots without positives are
    // excluded from the mean.
    let mut per_snapshot: Vec<Vec<f64>> = Vec::new();
    for col in outputs.column_iter() {
        let mut pos: Vec<f64> = col.iter().copied().filter(|&v| v > 0.0).collect();
        if !pos.is_empty() {
            pos.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
            per_snapshot.push(pos);
        }
    }
    if per_snapshot.is_empty() {
        return Err(Error::InvalidInput(
            "all snapshots are identically zero; no threshold exists".into(),
        ));
    }

    let mut candidates: Vec<f64> = per_snapshot.iter().flatten().copied().collect();
    candidates.push(0.0);
    candidates.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite pixels"));
    candidates.dedup();

    // Sweep candidates in ascending order, keeping per-snapshot cursors to
    // the first pixel strictly above the candidate. The mean fraction is
    // maintained incrementally, so the whole search is linear in the pixel
    // count plus the candidate count.
    let s = per_snapshot.len() as f64;
    let mut cursors = vec![0usize; per_snapshot.len()];
    let mut mean_frac = 1.0;
    let mut best = f64::NEG_INFINITY;
    for &t in &candidates {
        for (j, pos) in per_snapshot.iter().enumerate() {
            let total = pos.len() as f64;
            let mut k = cursors[j];
            while k < pos.len() && pos[k] <= t {
                k += 1;
            }
            if k != cursors[j] {
                mean_frac -= (k - cursors[j]) as f64 / total / s;
                cursors[j] = k;
            }
        }
        if mean_frac > beta {
            best = t;
        }
    }
    debug_assert!(best >= 0.0, "tau = 0 always satisfies the criterion");
    Ok(best)
}

/// Exact ROC of one prediction against one observation mask.
///
/// The threshold grid is the distinct positive prediction values swept
/// downward, then zero, then a negative-infinity sentinel that forces the
/// `(1, 1)` endpoint. If the grid exceeds `n_thresholds` points it is
/// subsampled uniformly by index (quantiles of the distinct values), always
/// keeping the extremes. Degenerate cases (observation mask empty or full,
/// or constant predictions) return the two-point convention curve with the
/// `degenerate` flag set.
pub fn roc(pred: &[f64], obs_mask: &[bool], n_thresholds: usize) -> Result<RocCurve> {
    if pred.len() != obs_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "prediction length {} != mask length {}",
            pred.len(),
            obs_mask.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("empty prediction".into()));
    }
    if n_thresholds < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 thresholds, got {n_thresholds}"
        )));
    }
    let positives = obs_mask.iter().filter(|&&m| m).count();
    let negatives = obs_mask.len() - positives;
    let constant = pred.iter().all(|&v| v == pred[0]);
    if positives == 0 || negatives == 0 || constant {
        return Ok(RocCurve {
            thresholds: vec![f64::INFINITY, f64::NEG_INFINITY],
            fpr: vec![0.0, 1.0],
            tpr: vec![0.0, 1.0],
            degenerate: true,
        });
    }

    let mut grid: Vec<f64> = pred.iter().copied().filter(|&v| v > 0.0).collect();
    grid.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite predictions"));
    grid.dedup();
    // Budget for the positive values so the final grid, including the zero
    // and sentinel points added below, stays within `n_thresholds` (with a
    // floor of one positive point, which keeps the `(0, 0)` start).
    let keep = n_thresholds.saturating_sub(2).max(1);
    if grid.len() > keep {
        let last = grid.len() - 1;
        let mut sub = Vec::with_capacity(keep);
        if keep == 1 {
            sub.push(grid[0]);
        } else {
            for i in 0..keep {
                sub.push(grid[i * last / (keep - 1)]);
            }
        }
        sub.dedup();
        grid = sub;
    }
    grid.push(0.0);
    grid.dedup();
    grid.push(f64::NEG_INFINITY);

    let mut fpr = Vec::with_capacity(grid.len());
    let mut tpr = Vec::with_capacity(grid.len());
    for &alpha in &grid {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (&v, &m) in pred.iter().zip(obs_mask.iter()) {
            if v > alpha {
                if m {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        fpr.push(fp as f64 / negatives as f64);
        tpr.push(tp as f64 / positives as f64);
    }
    Ok(RocCurve {
        thresholds: grid,
        fpr,
        tpr,
        degenerate: false,
    })
}

/// Trapezoidal area under the curve, integrating TPR against FPR.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for i in 1..curve.fpr.len() {
        area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
    }
    area
}

/// Index of the curve sample nearest `(0, 1)`. Ties break toward the larger
/// threshold, i.e. the earlier sample.
pub fn best_threshold_index(curve: &RocCurve) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for i in 0..curve.fpr.len() {
        let d = curve.fpr[i] * curve.fpr[i] + (curve.tpr[i] - 1.0) * (curve.tpr[i] - 1.0);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Intersection over union `TP / (TP + FP + FN)`; two empty masks score 1
/// (no observed and no predicted smoke is a perfect match).
pub fn iou(pred_mask: &[bool], obs_mask: &[bool]) -> Result<f64> {
    if pred_mask.len() != obs_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "mask lengths differ: {} vs {}",
            pred_mask.len(),
            obs_mask.len()
        )));
    }
    let mut tp = 0usize;
    let mut union = 0usize;
    for (&p, &o) in pred_mask.iter().zip(obs_mask.iter()) {
        if p && o {
            tp += 1;
        }
        if p || o {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(tp as f64 / union as f64)
}

/// `||pred - truth||_F / ||truth||_F`.
pub fn relative_frobenius_error(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::DimensionMismatch(format!(
            "shapes differ: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let denom = truth.norm();
    if !(denom > 0.0) {
        return Err(Error::InvalidInput(
            "reference matrix has zero norm; relative error undefined".into(),
        ));
    }
    Ok((pred - truth).norm() / denom)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (h - lo as f64)
}

/// Median and quartiles of a sample (linear interpolation between order
/// statistics).
pub fn median_and_quartiles(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("comparable metric values"));
    (
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.75),
    )
}

/// Scores predictions against observations snapshot by snapshot.
///
/// The observation mask for every snapshot is `obs > tau`. Each snapshot
/// gets its own ROC/AUC, the best threshold on its curve, IoU at that
/// threshold, and a relative L2 error; report scalars are medians. Snapshots
/// are processed in parallel but assembled by index, so the report does not
/// depend on scheduling.
pub fn classification_report(
    preds: &SnapshotMatrix,
    obs: &SnapshotMatrix,
    tau: f64,
    n_thresholds: usize,
) -> Result<ClassificationReport> {
    if preds.data.shape() != obs.data.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction shape {:?} != observation shape {:?}",
            preds.data.shape(),
            obs.data.shape()
        )));
    }
    if preds.labels != obs.labels {
        return Err(Error::InvalidInput(
            "prediction and observation labels are not aligned".into(),
        ));
    }
    if !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "tau must be non-negative, got {tau}"
        )));
    }

    let n = preds.n_snapshots();
    let results = par::try_map_indexed(n, |j| -> Result<(SnapshotMetrics, RocCurve)> {
        let p: Vec<f64> = preds.data.column(j).iter().copied().collect();
        let o: Vec<f64> = obs.data.column(j).iter().copied().collect();
        let obs_mask: Vec<bool> = o.iter().map(|&v| v > tau).collect();
        let curve = roc(&p, &obs_mask, n_thresholds)?;
        let a = auc(&curve);
        let bi = best_threshold_index(&curve);
        let alpha = curve.thresholds[bi];
        let pred_mask: Vec<bool> = p.iter().map(|&v| v > alpha).collect();
        let iou_at_best = iou(&pred_mask, &obs_mask)?;
        let diff_norm: f64 = p
            .iter()
            .zip(o.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let obs_norm: f64 = o.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_err = if obs_norm > 0.0 {
            diff_norm / obs_norm
        } else if diff_norm == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let label = &preds.labels[j];
        Ok((
            SnapshotMetrics {
                fire_id: label.fire_id,
                time_index: label.time_index,
                condition: label.condition.clone(),
                auc: a,
                iou_at_best,
                best_threshold: alpha,
                rel_err,
                degenerate: curve.degenerate,
            },
            curve,
        ))
    })?;

    let (per_snapshot, curves): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let aucs: Vec<f64> = per_snapshot.iter().map(|s| s.auc).collect();
    let ious: Vec<f64> = per_snapshot.iter().map(|s| s.iou_at_best).collect();
    let alphas: Vec<f64> = per_snapshot.iter().map(|s| s.best_threshold).collect();
    Ok(ClassificationReport {
        auc: median_and_quartiles(&aucs).0,
        best_threshold: median_and_quartiles(&alphas).0,
        iou_at_best: median_and_quartiles(&ious).0,
        tau,
        per_snapshot,
        curves,
    })
}

/// JSON-facing summary of a [`ClassificationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub beta: f64,
    pub tau: f64,
    pub n_snapshots: usize,
    pub n_degenerate: usize,
    pub median_auc: f64,
    pub auc_q25: f64,
    pub auc_q75: f64,
    pub median_iou: f64,
    pub iou_q25: f64,
    pub iou_q75: f64,
    pub median_best_threshold: f64,
    pub median_rel_err: f64,
    pub rel_err_q25: f64,
    pub rel_err_q75: f64,
    /// Relative Frobenius error over the whole prediction matrix; filled by
    /// callers that hold the matrices.
    pub overall_rel_err: Option<f64>,
}

impl ReportSummary {
    pub fn from_report(report: &ClassificationReport, beta: f64) -> Self {
        let aucs: Vec<f64> = report.per_snapshot.iter().map(|s| s.auc).collect();
        let ious: Vec<f64> = report.per_snapshot.iter().map(|s| s.iou_at_best).collect();
        let errs: Vec<f64> = report.per_snapshot.iter().map(|s| s.rel_err).collect();
        let (median_auc, auc_q25, auc_q75) = median_and_quartiles(&aucs);
        let (median_iou, iou_q25, iou_q75) = median_and_quartiles(&ious);
        let (median_rel_err, rel_err_q25, rel_err_q75) = median_and_quartiles(&errs);
        ReportSummary {
            beta,
            tau: report.tau,
            n_snapshots: report.per_snapshot.len(),
            n_degenerate: report.per_snapshot.iter().filter(|s| s.degenerate).count(),
            median_auc,
            auc_q25,
            auc_q75,
            median_iou,
            iou_q25,
            iou_q75,
            median_best_threshold: report.best_threshold,
            median_rel_err,
            rel_err_q25,
            rel_err_q75,
            overall_rel_err: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }
}

/// Writes per-snapshot metric rows. Floats use the shortest round-trip
/// representation, so parsing the CSV recovers them exactly.
pub fn write_report_csv(path: impl AsRef<Path>, report: &ClassificationReport) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "fire_id,time_index,condition,auc,iou,best_threshold,rel_err,degenerate"
    )?;
    for s in &report.per_snapshot {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.fire_id,
            s.time_index,
            s.condition,
            s.auc,
            s.iou_at_best,
            s.best_threshold,
            s.rel_err,
            s.degenerate
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every snapshot's ROC samples for external plotting.
pub fn write_roc_csv(path: impl AsRef<Path>, report: &ClassificationReport) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    writeln!(w, "snapshot,fire_id,time_index,threshold,fpr,tpr")?;
    for (j, curve) in report.curves.iter().enumerate() {
        let label = &report.per_snapshot[j];
        for i in 0..curve.thresholds.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                j, label.fire_id, label.time_index, curve.thresholds[i], curve.fpr[i], curve.tpr[i]
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn check_subset(m: usize, m_prime: usize) -> Result<()> {
    if m_prime == 0 || m_prime > m {
        return Err(Error::InvalidInput(format!(
            "subset size {m_prime} out of range for {m} snapshots"
        )));
    }
    Ok(())
}

/// Full Monte Carlo estimator: pixelwise mean of `ln(g + 1)` over the first
/// `m_prime` columns. Callers shuffle columns to randomize the subset.
pub fn qoi_full_mc(final_smoke: &SnapshotMatrix, m_prime: usize) -> Result<QoiField> {
    check_subset(final_smoke.n_snapshots(), m_prime)?;
    if final_smoke.data.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "smoke fields must be non-negative".into(),
        ));
    }
    let n = final_smoke.data.nrows();
    let mut values = DVector::zeros(n);
    for j in 0..m_prime {
        for i in 0..n {
            values[i] += final_smoke.data[(i, j)].ln_1p();
        }
    }
    values /= m_prime as f64;
    Ok(QoiField {
        grid: final_smoke.grid,
        values,
    })
}

/// Reduced Monte Carlo estimator: mean of the basis projection of
/// `ln(g + 1)` over the first `m_prime` columns. The basis must have been
/// built on the transformed snapshots; projection is encode-then-decode, so
/// the basis mean is handled exactly as in reconstruction.
pub fn qoi_reduced_mc(
    final_smoke: &SnapshotMatrix,
    output_basis: &ReducedBasis,
    m_prime: usize,
) -> Result<QoiField> {
    check_subset(final_smoke.n_snapshots(), m_prime)?;
    if final_smoke.data.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidInput(
            "smoke fields must be non-negative".into(),
        ));
    }
    let transformed = final_smoke.data.columns(0, m_prime).map(|v| v.ln_1p());
    let projected = output_basis.decode(&output_basis.encode(&transformed)?)?;
    let mut values = DVector::zeros(projected.nrows());
    for col in projected.column_iter() {
        values += col;
    }
    values /= m_prime as f64;
    Ok(QoiField {
        grid: final_smoke.grid,
        values,
    })
}

/// Surrogate estimator: mean of model predictions over the first `m_prime`
/// input fields. The model must have been trained on `ln(g + 1)` outputs so
/// its predictions live in QoI space already.
pub fn qoi_surrogate(
    fires: &SnapshotMatrix,
    model: &SurrogateModel,
    m_prime: usize,
) -> Result<QoiField> {
    check_subset(fires.n_snapshots(), m_prime)?;
    if model.output_transform() != OutputTransform::Log1p {
        return Err(Error::InvalidInput(
            "surrogate QoI estimation needs a model trained on log-transformed outputs".into(),
        ));
    }
    let preds = model.predict(&fires.data.columns(0, m_prime).into_owned())?;
    let mut values = DVector::zeros(preds.nrows());
    for col in preds.column_iter() {
        values += col;
    }
    values /= m_prime as f64;
    Ok(QoiField {
        grid: fires.grid,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensorio::SnapshotLabel;
    use approx::assert_abs_diff_eq;

    fn snapshot_matrix(grid: Grid2D, data: DMatrix<f64>) -> SnapshotMatrix {
        let labels = (0..data.ncols())
            .map(|j| SnapshotLabel {
                fire_id: j as u64,
                time_index: 0,
                condition: "medium".into(),
            })
            .collect();
        SnapshotMatrix::new(grid, data, labels).unwrap()
    }

    #[test]
    fn smoke_threshold_enumeration_example() {
        // One snapshot, positives {1,2,3,4}: above 1 -> 3/4 > 0.5, above 2
        // -> 2/4 which is not strictly greater, so tau = 1.
        let m = DMatrix::from_column_slice(5, 1, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(smoke_threshold(&m, 0.5).unwrap(), 1.0);
        // beta near 0: every candidate except the max keeps the fraction
        // positive, so tau is the second-largest distinct positive value.
        assert_eq!(smoke_threshold(&m, 1e-9).unwrap(), 3.0);
        // beta near 1 forces tau to 0.
        assert_eq!(smoke_threshold(&m, 0.999).unwrap(), 0.0);
    }

    #[test]
    fn smoke_threshold_excludes_empty_snapshots_and_errors_on_all_zero() {
        let m = DMatrix::from_column_slice(
            4,
            2,
            &[
                0.0, 0.0, 0.0, 0.0, // snapshot with no smoke: excluded
                0.0, 2.0, 4.0, 8.0,
            ],
        );
        // Only the second snapshot counts: above 2 -> 2/3 > 0.6.
        assert_eq!(smoke_threshold(&m, 0.6).unwrap(), 2.0);
        let zeros = DMatrix::zeros(4, 2);
        assert!(smoke_threshold(&zeros, 0.5).is_err());
        assert!(smoke_threshold(&m, 0.0).is_err());
        assert!(smoke_threshold(&m, 1.0).is_err());
    }

    #[test]
    fn smoke_threshold_monotone_in_beta() {
        let m = DMatrix::from_fn(50, 3, |i, j| ((i * 7 + j * 13) % 11) as f64 / 3.0);
        let mut prev = f64::INFINITY;
        for beta in [0.05, 0.25, 0.5, 0.75, 0.95] {
            let tau = smoke_threshold(&m, beta).unwrap();
            assert!(tau <= prev, "tau grew from {prev} to {tau} at beta {beta}");
            prev = tau;
        }
    }

    #[test]
    fn roc_separable_hits_top_left_and_auc_is_one() {
        let pred = [0.1, 0.2, 0.9, 0.8, 0.0];
        let mask = [false, false, true, true, false];
        let curve = roc(&pred, &mask, 64).unwrap();
        assert!(!curve.degenerate);
        assert_eq!(curve.fpr[0], 0.0);
        assert_eq!(curve.tpr[0], 0.0);
        assert_eq!(*curve.fpr.last().unwrap(), 1.0);
        assert_eq!(*curve.tpr.last().unwrap(), 1.0);
        // Separable data passes through (0, 1).
        assert!(curve
            .fpr
            .iter()
            .zip(curve.tpr.iter())
            .any(|(&f, &t)| f == 0.0 && t == 1.0));
        assert_eq!(auc(&curve), 1.0);
        // Monotone in both coordinates as alpha decreases.
        for i in 1..curve.fpr.len() {
            assert!(curve.fpr[i] >= curve.fpr[i - 1]);
            assert!(curve.tpr[i] >= curve.tpr[i - 1]);
        }
    }

    #[test]
    fn roc_constant_or_empty_mask_degenerates() {
        let mask = [true, false, true];
        let curve = roc(&[0.5, 0.5, 0.5], &mask, 16).unwrap();
        assert!(curve.degenerate);
        assert_eq!(curve.fpr, vec![0.0, 1.0]);
        assert_eq!(curve.tpr, vec![0.0, 1.0]);
        assert_eq!(auc(&curve), 0.5);
        let empty = [false, false, false];
        assert!(roc(&[0.1, 0.2, 0.3], &empty, 16).unwrap().degenerate);
        let full = [true, true, true];
        assert!(roc(&[0.1, 0.2, 0.3], &full, 16).unwrap().degenerate);
        assert!(roc(&[0.1, 0.2], &mask, 16).is_err());
    }

    #[test]
    fn auc_hand_computed_trapezoids() {
        let curve = RocCurve {
            thresholds: vec![3.0, 2.0, 1.0, f64::NEG_INFINITY],
            fpr: vec![0.0, 0.25, 0.5, 1.0],
            tpr: vec![0.0, 0.75, 0.75, 1.0],
            degenerate: false,
        };
        // Areas: 0.25*(0+0.75)/2 + 0.25*(0.75+0.75)/2 + 0.5*(0.75+1)/2.
        let expected = 0.09375 + 0.1875 + 0.4375;
        assert_abs_diff_eq!(auc(&curve), expected, epsilon = 1e-15);
        let diagonal = RocCurve {
            thresholds: vec![1.0, f64::NEG_INFINITY],
            fpr: vec![0.0, 1.0],
            tpr: vec![0.0, 1.0],
            degenerate: false,
        };
        assert_eq!(auc(&diagonal), 0.5);
    }

    #[test]
    fn roc_grid_capping_keeps_extremes() {
        let pred: Vec<f64> = (1..=1000).map(|i| i as f64 / 100.0).collect();
        let mask: Vec<bool> = (0..1000).map(|i| i >= 500).collect();
        let curve = roc(&pred, &mask, 64).unwrap();
        assert!(curve.thresholds.len() <= 64 + 2);
        assert_eq!(curve.fpr[0], 0.0);
        assert_eq!(curve.tpr[0], 0.0);
        assert_eq!(*curve.fpr.last().unwrap(), 1.0);
        assert_eq!(*curve.tpr.last().unwrap(), 1.0);
        assert_eq!(curve.thresholds[0], 10.0);
    }

    #[test]
    fn iou_examples() {
        assert_eq!(
            iou(&[true, true, false], &[true, false, true]).unwrap(),
            1.0 / 3.0
        );
        assert_eq!(iou(&[true, false], &[true, false]).unwrap(), 1.0);
        assert_eq!(iou(&[false, false], &[false, false]).unwrap(), 1.0);
        assert!(iou(&[true], &[true, false]).is_err());
    }

    #[test]
    fn relative_error_examples() {
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(relative_frobenius_error(&t, &t).unwrap(), 0.0);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(relative_frobenius_error(&zero, &t).unwrap(), 1.0);
        let double = &t * 2.0;
        assert_abs_diff_eq!(
            relative_frobenius_error(&double, &t).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        assert!(relative_frobenius_error(&t, &zero).is_err());
    }

    #[test]
    fn perfect_predictions_score_perfect_medians() {
        let grid = Grid2D::new(3, 3, 1.0, 1.0).unwrap();
        let data = DMatrix::from_fn(9, 4, |i, j| ((i + 2 * j) % 5) as f64);
        let obs = snapshot_matrix(grid, data.clone());
        let preds = snapshot_matrix(grid, data);
        let report = classification_report(&preds, &obs, 1.0, 64).unwrap();
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.iou_at_best, 1.0);
        assert_eq!(report.per_snapshot.len(), 4);
        assert!(report.per_snapshot.iter().all(|s| s.rel_err == 0.0));
    }

    #[test]
    fn zero_predictions_fall_back_to_degenerate_convention() {
        let grid = Grid2D::new(2, 2, 1.0, 1.0).unwrap();
        let obs = snapshot_matrix(grid, DMatrix::from_fn(4, 3, |i, _| i as f64));
        let preds = snapshot_matrix(grid, DMatrix::zeros(4, 3));
        let report = classification_report(&preds, &obs, 0.5, 64).unwrap();
        assert_eq!(report.auc, 0.5);
        assert!(report.per_snapshot.iter().all(|s| s.degenerate));
        // Both corners of the two-point curve sit at distance 1 from (0,1);
        // the tie breaks toward the larger threshold, the (0,0) corner, where
        // nothing is predicted positive: IoU = 0.
        assert_eq!(report.iou_at_best, 0.0);
    }

    #[test]
    fn report_files_written_and_parse_back() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(2, 3, 1.0, 1.0).unwrap();
        let obs = snapshot_matrix(grid, DMatrix::from_fn(6, 3, |i, j| (i * j) as f64 / 3.0));
        let preds = snapshot_matrix(grid, DMatrix::from_fn(6, 3, |i, j| (i * j) as f64 / 3.1));
        let report = classification_report(&preds, &obs, 0.1, 32).unwrap();

        let csv_path = dir.path().join("report.csv");
        write_report_csv(&csv_path, &report).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "fire_id,time_index,condition,auc,iou,best_threshold,rel_err,degenerate"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        // Shortest round-trip float printing parses back exactly.
        assert_eq!(first[3].parse::<f64>().unwrap(), report.per_snapshot[0].auc);

        write_roc_csv(dir.path().join("roc.csv"), &report).unwrap();
        let mut summary = ReportSummary::from_report(&report, 0.95);
        summary.overall_rel_err = Some(relative_frobenius_error(&preds.data, &obs.data).unwrap());
        summary.save(dir.path().join("report.json")).unwrap();
        let parsed: ReportSummary =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
                .unwrap();
        assert_eq!(parsed, summary);
    }

    #[test]
    fn qoi_full_mc_matches_scalar_loop() {
        let grid = Grid2D::new(2, 2, 1.0, 1.0).unwrap();
        let data = DMatrix::from_fn(4, 5, |i, j| (i as f64 + 1.0) * (j as f64 + 0.5));
        let smoke = snapshot_matrix(grid, data.clone());
        let q = qoi_full_mc(&smoke, 3).unwrap();
        for i in 0..4 {
            let mut acc = 0.0;
            for j in 0..3 {
                acc += (data[(i, j)] + 1.0).ln();
            }
            assert_abs_diff_eq!(q.values[i], acc / 3.0, epsilon = 1e-12);
        }
        // g = 0 -> Q = 0; single snapshot -> exactly ln(g + 1).
        let zero = snapshot_matrix(grid, DMatrix::zeros(4, 2));
        assert_eq!(qoi_full_mc(&zero, 2).unwrap().values, DVector::zeros(4));
        let single = qoi_full_mc(&smoke, 1).unwrap();
        for i in 0..4 {
            assert_eq!(single.values[i], data[(i, 0)].ln_1p());
        }
        assert!(qoi_full_mc(&smoke, 6).is_err());
        assert!(qoi_full_mc(&smoke, 0).is_err());
    }

    #[test]
    fn qoi_reduced_equals_full_at_complete_rank() {
        let grid = Grid2D::new(2, 3, 1.0, 1.0).unwrap();
        let data = DMatrix::from_fn(6, 8, |i, j| ((i * 5 + j * 3) % 7) as f64 + 0.1);
        let smoke = snapshot_matrix(grid, data);
        let transformed = smoke.data.map(|v| v.ln_1p());
        let basis = crate::reduction::pod_basis(
            &transformed,
            crate::reduction::RankSpec::EnergyFraction(1.0),
        )
        .unwrap();
        let full = qoi_full_mc(&smoke, 8).unwrap();
        let reduced = qoi_reduced_mc(&smoke, &basis, 8).unwrap();
        assert!((full.values - reduced.values).norm() < 1e-10);
    }

    #[test]
    fn qoi_surrogate_requires_log_outputs() {
        let data = DMatrix::from_fn(12, 10, |i, j| ((i + j) % 4) as f64);
        let basis =
            crate::reduction::pod_basis(&data, crate::reduction::RankSpec::Fixed(3)).unwrap();
        let lin =
            crate::mlop::fit_linear_closed_form(&basis, &basis, false, OutputTransform::Identity)
                .unwrap();
        let grid = Grid2D::new(3, 4, 1.0, 1.0).unwrap();
        let fires = snapshot_matrix(grid, data);
        let err = qoi_surrogate(&fires, &SurrogateModel::Linear(lin), 4).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "got {err:?}");
    }
}
