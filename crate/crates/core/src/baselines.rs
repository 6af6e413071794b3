//! Gaussian-process regression baseline.
//!
//! A plain GP with a squared-exponential kernel, fit either directly on
//! flattened fields or on reduced coefficients. It exists to calibrate the
//! operator models against a standard nonparametric regressor; nothing here
//! is tuned for large training sets, so callers subsample snapshots first.

use nalgebra::{DMatrix, DVectorView};

use crate::par;
use crate::{Error, Result};

/// Jitter escalation ceiling for the Cholesky factorization of the kernel
/// matrix. If the factorization still fails here, the fit is abandoned.
pub const MAX_JITTER: f64 = 1e-4;

/// Squared-exponential kernel `exp(-||a - b||^2 / (2 l^2))`.
///
/// Values lie in `(0, 1]` with `k(a, a) = 1`.
pub fn rbf_kernel(a: DVectorView<f64>, b: DVectorView<f64>, length_scale: f64) -> Result<f64> {
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(Error::InvalidInput(format!(
            "kernel length scale must be positive and finite, got {length_scale}"
        )));
    }
    let mut sq = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        sq += d * d;
    }
    Ok((-sq / (2.0 * length_scale * length_scale)).exp())
}

/// GP posterior mean predictor over vector-valued targets.
///
/// `train_inputs` is `d_in x m` (one training point per column) and `weights`
/// is `m x d_out`, so a query column `q` predicts
/// `y(q) = weights^T k(q, train)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GpModel {
    pub train_inputs: DMatrix<f64>,
    pub weights: DMatrix<f64>,
    pub length_scale: f64,
    /// Diagonal noise actually used after jitter escalation.
    pub noise: f64,
}

/// Fits the GP posterior mean: solves `(K + noise I) W = Y^T` by Cholesky.
///
/// `noise` is the requested noise variance; it is floored at `1e-10` and
/// multiplied by 10 (up to [`MAX_JITTER`]) whenever the factorization fails,
/// which happens for near-duplicate training points at large length scales.
pub fn gp_fit(
    train_inputs: &DMatrix<f64>,
    train_outputs: &DMatrix<f64>,
    length_scale: f64,
    noise: f64,
) -> Result<GpModel> {
    if train_inputs.ncols() == 0 {
        return Err(Error::InvalidInput(
            "gp fit needs at least one training point".into(),
        ));
    }
    if train_outputs.ncols() != train_inputs.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "gp fit: {} input columns vs {} output columns",
            train_inputs.ncols(),
            train_outputs.ncols()
        )));
    }
    if !(noise >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise variance must be non-negative, got {noise}"
        )));
    }
    let m = train_inputs.ncols();
    let kernel_rows = par::try_map_indexed(m, |i| -> Result<Vec<f64>> {
        let mut row = vec![0.0; m];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = rbf_kernel(train_inputs.column(i), train_inputs.column(j), length_scale)?;
        }
        Ok(row)
    })?;
    let k = DMatrix::from_fn(m, m, |i, j| kernel_rows[i][j]);

    let mut jitter = noise.max(1e-10);
    let chol = loop {
        let mut kj = k.clone();
        for i in 0..m {
            kj[(i, i)] += jitter;
        }
        match nalgebra::Cholesky::new(kj) {
            Some(c) => break c,
            None => {
                jitter *= 10.0;
                if jitter > MAX_JITTER {
                    return Err(Error::Numerical(format!(
                        "kernel matrix not factorizable even at jitter {MAX_JITTER}"
                    )));
                }
            }
        }
    };
    let weights = chol.solve(&train_outputs.transpose());
    Ok(GpModel {
        train_inputs: train_inputs.clone(),
        weights,
        length_scale,
        noise: jitter,
    })
}

/// Posterior mean at query columns: returns `d_out x k`.
pub fn gp_predict(model: &GpModel, queries: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if queries.nrows() != model.train_inputs.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "query dimension {} != training dimension {}",
            queries.nrows(),
            model.train_inputs.nrows()
        )));
    }
    let m = model.train_inputs.ncols();
    let k = queries.ncols();
    let rows = par::try_map_indexed(k, |q| -> Result<Vec<f64>> {
        let mut row = vec![0.0; m];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = rbf_kernel(
                queries.column(q),
                model.train_inputs.column(j),
                model.length_scale,
            )?;
        }
        Ok(row)
    })?;
    let kq = DMatrix::from_fn(k, m, |i, j| rows[i][j]);
    Ok((kq * &model.weights).transpose())
}

/// One grid point of a length-scale search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthScaleTrial {
    pub length_scale: f64,
    pub validation_error: f64,
}

/// Deterministic grid search for the kernel length scale.
///
/// Fits one GP per candidate, scores relative Frobenius error on the
/// validation pairs, and returns the best candidate along with all trials.
/// Ties break toward the smaller length scale (candidates are scanned in
/// ascending order with a strict improvement test).
pub fn tune_length_scale(
    train_inputs: &DMatrix<f64>,
    train_outputs: &DMatrix<f64>,
    val_inputs: &DMatrix<f64>,
    val_outputs: &DMatrix<f64>,
    candidates: &[f64],
    noise: f64,
) -> Result<(f64, Vec<LengthScaleTrial>)> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("empty length-scale grid".into()));
    }
    let mut grid: Vec<f64> = candidates.to_vec();
    for &l in &grid {
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidInput(format!(
                "length-scale candidates must be positive and finite, got {l}"
            )));
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite candidates"));
    grid.dedup();

    let val_norm = val_outputs.norm();
    if !(val_norm > 0.0) {
        return Err(Error::InvalidInput(
            "validation outputs are identically zero; relative error undefined".into(),
        ));
    }
    let mut trials = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, f64)> = None;
    for &l in &grid {
        let model = gp_fit(train_inputs, train_outputs, l, noise)?;
        let pred = gp_predict(&model, val_inputs)?;
        let err = (&pred - val_outputs).norm() / val_norm;
        trials.push(LengthScaleTrial {
            length_scale: l,
            validation_error: err,
        });
        if best.map_or(true, |(_, be)| err < be) {
            best = Some((l, err));
        }
    }
    Ok((best.expect("non-empty grid").0, trials))
}
