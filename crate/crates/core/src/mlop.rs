//! Multilinear operator fitting between reduced bases.
//!
//! An operator maps input-basis coefficients to output-basis coefficients
//! through a polynomial feature map that is linear in the unknown weights:
//!
//! * linear: `b = theta * a` with `theta` of shape `r_out x r`;
//! * quadratic: `b = theta * phi(a)` where `phi(a)` stacks the `r` monomials
//!   `a_j` and the `r (r + 1) / 2` distinct products `a_j a_l` (`j <= l`).
//!
//! There is deliberately no constant feature: an identically zero input field
//! (no fire) must map to the zero coefficient vector, i.e. to the training
//! mean of the outputs, and a constant term would break that.
//!
//! For the linear map trained on the same snapshots the bases came from, the
//! least-squares solution has a closed form. Writing the input SVD as
//! `X = U S V^T` and the output SVD as `Y = W T Z^T`, the training
//! coefficients are `A = S V^T` and `B = T Z^T`, and minimizing
//! `sum_m ||b^(m) - theta a^(m)||^2` gives the normal equations
//! `theta (A A^T) = B A^T`. Orthonormality of `V` makes `A A^T = S^2`
//! diagonal, so `theta = T Z^T V S^{-1}`. [`fit_linear_closed_form`]
//! implements that product; [`fit_linear_gram`] solves the same normal
//! equations numerically and exists to cross-check the algebra and to handle
//! coefficient pairs that do not come from an SVD of the training set.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::reduction::{load_basis, save_basis, ReducedBasis};
use crate::tensorio::{read_matrix, write_matrix};
use crate::{Error, Result};

/// Relative condition number limit for normal-equation and least-squares
/// solves. Beyond this the solution is numerically meaningless.
pub const MAX_CONDITION: f64 = 1e12;

/// Space the model's output fields live in. Purely descriptive: the model
/// never applies the transform, it records what its training outputs were.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputTransform {
    Identity,
    Log1p,
}

impl std::fmt::Display for OutputTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutputTransform::Identity => write!(f, "identity"),
            OutputTransform::Log1p => write!(f, "log1p"),
        }
    }
}

/// Linear coefficient-to-coefficient operator between two bases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperatorModel {
    pub input_basis: ReducedBasis,
    pub output_basis: ReducedBasis,
    /// `r_out x r` weight matrix.
    pub theta: DMatrix<f64>,
    /// Clamp decoded fields at zero (smoke concentrations are non-negative).
    pub clamp_nonneg: bool,
    pub output_transform: OutputTransform,
}

/// Quadratic operator: linear plus pairwise products of input coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticOperatorModel {
    pub input_basis: ReducedBasis,
    pub output_basis: ReducedBasis,
    /// `r_out x (r + r (r + 1) / 2)` weight matrix.
    pub theta: DMatrix<f64>,
    /// Ridge weight used in the fit, kept for provenance.
    pub lambda: f64,
    pub clamp_nonneg: bool,
    pub output_transform: OutputTransform,
}

/// Either operator kind, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub enum SurrogateModel {
    Linear(LinearOperatorModel),
    Quadratic(QuadraticOperatorModel),
}

/// Normal equations of a least-squares coefficient fit, averaged over
/// snapshots: `gram = A A^T / M`, `cross = A B^T / M` for input coefficients
/// `A` (`r x M`) and output coefficients `B` (`r_out x M`).
#[derive(Debug, Clone)]
pub struct GramSystem {
    pub gram: DMatrix<f64>,
    pub cross: DMatrix<f64>,
}

impl GramSystem {
    /// Builds the system from per-snapshot coefficient columns.
    pub fn from_coefficients(
        input_coeffs: &DMatrix<f64>,
        output_coeffs: &DMatrix<f64>,
    ) -> Result<Self> {
        let m = input_coeffs.ncols();
        if output_coeffs.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "input has {m} snapshots, output has {}",
                output_coeffs.ncols()
            )));
        }
        if m < input_coeffs.nrows() {
            return Err(Error::InvalidInput(format!(
                "underdetermined fit: {m} snapshots for {} coefficients",
                input_coeffs.nrows()
            )));
        }
        let scale = 1.0 / m as f64;
        let gram = input_coeffs * input_coeffs.transpose() * scale;
        let cross = input_coeffs * output_coeffs.transpose() * scale;
        Ok(GramSystem { gram, cross })
    }

    /// Solves `theta gram = cross^T` for `theta` (`r_out x r`) by Cholesky,
    /// guarding against ill-conditioning.
    pub fn solve(&self) -> Result<DMatrix<f64>> {
        let eig = self.gram.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        let lmin = eig.eigenvalues.min();
        if !(lmin > 0.0) || lmax / lmin > MAX_CONDITION {
            return Err(Error::Numerical(format!(
                "gram matrix ill-conditioned (eigenvalue range {lmin:.3e}..{lmax:.3e}); reduce the rank"
            )));
        }
        let chol = nalgebra::Cholesky::new(self.gram.clone()).ok_or_else(|| {
            Error::Numerical("cholesky factorization of gram matrix failed".into())
        })?;
        let theta_t = chol.solve(&self.cross);
        Ok(theta_t.transpose())
    }
}

fn check_aligned(input_basis: &ReducedBasis, output_basis: &ReducedBasis) -> Result<()> {
    if input_basis.n_train() != output_basis.n_train() {
        return Err(Error::DimensionMismatch(format!(
            "bases trained on different snapshot counts: {} vs {}",
            input_basis.n_train(),
            output_basis.n_train()
        )));
    }
    Ok(())
}

/// Closed-form linear fit `theta = T Z^T V S^{-1}` on the training snapshots
/// both bases were built from (their columns must be aligned).
pub fn fit_linear_closed_form(
    input_basis: &ReducedBasis,
    output_basis: &ReducedBasis,
    clamp_nonneg: bool,
    output_transform: OutputTransform,
) -> Result<LinearOperatorModel> {
    check_aligned(input_basis, output_basis)?;
    let mut theta = output_basis.right_factors.transpose() * &input_basis.right_factors;
    for (i, mut row) in theta.row_iter_mut().enumerate() {
        row *= output_basis.sing_vals[i];
    }
    for (j, mut col) in theta.column_iter_mut().enumerate() {
        // Basis invariant guarantees sing_vals > 0.
        col /= input_basis.sing_vals[j];
    }
    Ok(LinearOperatorModel {
        input_basis: input_basis.clone(),
        output_basis: output_basis.clone(),
        theta,
        clamp_nonneg,
        output_transform,
    })
}

/// Linear fit through the explicit normal equations. Agrees with
/// [`fit_linear_closed_form`] to solver precision.
pub fn fit_linear_gram(
    input_basis: &ReducedBasis,
    output_basis: &ReducedBasis,
    clamp_nonneg: bool,
    output_transform: OutputTransform,
) -> Result<LinearOperatorModel> {
    check_aligned(input_basis, output_basis)?;
    let a = input_basis.training_coefficients();
    let b = output_basis.training_coefficients();
    let system = GramSystem::from_coefficients(&a, &b)?;
    let theta = system.solve()?;
    Ok(LinearOperatorModel {
        input_basis: input_basis.clone(),
        output_basis: output_basis.clone(),
        theta,
        clamp_nonneg,
        output_transform,
    })
}

/// Number of quadratic features for `r` input coefficients.
pub fn quadratic_feature_count(r: usize) -> usize {
    r + r * (r + 1) / 2
}

/// Builds the monomial feature matrix for quadratic fits.
///
/// `coeffs` holds one sample per row (`k x r`); the result is
/// `k x (r + r (r + 1) / 2)` with columns ordered as the `r` linear terms
/// `a_1 .. a_r` followed by products `a_j a_l` for `j <= l` in lexicographic
/// order: `a_1 a_1, a_1 a_2, .., a_1 a_r, a_2 a_2, .., a_r a_r`.
pub fn build_interaction_matrix(coeffs: &DMatrix<f64>) -> DMatrix<f64> {
    let k = coeffs.nrows();
    let r = coeffs.ncols();
    let mut feats = DMatrix::zeros(k, quadratic_feature_count(r));
    feats.columns_mut(0, r).copy_from(coeffs);
    let mut c = r;
    for j in 0..r {
        for l in j..r {
            for s in 0..k {
                feats[(s, c)] = coeffs[(s, j)] * coeffs[(s, l)];
            }
            c += 1;
        }
    }
    feats
}

/// Ridge-regularized quadratic fit on the bases' training snapshots.
///
/// Solves `(F^T F + lambda I) theta^T = F^T B` where `F` is the interaction
/// matrix of the training input coefficients and `B` the training output
/// coefficients (samples as rows). With `lambda = 0` the unregularized
/// least-squares problem is solved by SVD and must be overdetermined and
/// well-conditioned.
pub fn fit_quadratic(
    input_basis: &ReducedBasis,
    output_basis: &ReducedBasis,
    lambda: f64,
    clamp_nonneg: bool,
    output_transform: OutputTransform,
) -> Result<QuadraticOperatorModel> {
    check_aligned(input_basis, output_basis)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidInput(format!(
            "ridge weight must be finite and non-negative, got {lambda}"
        )));
    }
    let a = input_basis.training_coefficients().transpose();
    let b = output_basis.training_coefficients().transpose();
    let feats = build_interaction_matrix(&a);
    let m = feats.nrows();
    let f = feats.ncols();

    let theta_t = if lambda > 0.0 {
        let mut h = feats.transpose() * &feats;
        for i in 0..f {
            h[(i, i)] += lambda;
        }
        let chol = nalgebra::Cholesky::new(h).ok_or_else(|| {
            Error::Numerical("cholesky factorization of ridge system failed".into())
        })?;
        chol.solve(&(feats.transpose() * &b))
    } else {
        if m < f {
            return Err(Error::InvalidInput(format!(
                "underdetermined quadratic fit: {m} snapshots for {f} features; use a ridge weight or reduce the rank"
            )));
        }
        let svd = feats.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 0.0) || smax / smin > MAX_CONDITION {
            return Err(Error::Numerical(format!(
                "quadratic feature matrix ill-conditioned (singular values {smin:.3e}..{smax:.3e}); use a ridge weight"
            )));
        }
        svd.solve(&b, 0.0)
            .map_err(|e| Error::Numerical(format!("least-squares solve failed: {e}")))?
    };

    Ok(QuadraticOperatorModel {
        input_basis: input_basis.clone(),
        output_basis: output_basis.clone(),
        theta: theta_t.transpose(),
        lambda,
        clamp_nonneg,
        output_transform,
    })
}

fn clamp_nonneg_in_place(fields: &mut DMatrix<f64>) {
    for v in fields.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

impl LinearOperatorModel {
    /// Full-field prediction: encode, apply `theta`, decode, clamp.
    ///
    /// The clamp acts on decoded fields, not on coefficients; negative
    /// coefficient values are meaningful, negative concentrations are not.
    pub fn predict(&self, fields: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let coeffs = self.input_basis.encode(fields)?;
        let out_coeffs = &self.theta * coeffs;
        let mut out = self.output_basis.decode(&out_coeffs)?;
        if self.clamp_nonneg {
            clamp_nonneg_in_place(&mut out);
        }
        Ok(out)
    }
}

impl QuadraticOperatorModel {
    pub fn predict(&self, fields: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let coeffs = self.input_basis.encode(fields)?;
        let feats = build_interaction_matrix(&coeffs.transpose());
        let out_coeffs = &self.theta * feats.transpose();
        let mut out = self.output_basis.decode(&out_coeffs)?;
        if self.clamp_nonneg {
            clamp_nonneg_in_place(&mut out);
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelDescriptor {
    kind: String,
    rank_in: usize,
    rank_out: usize,
    lambda: Option<f64>,
    clamp_nonneg: bool,
    output_transform: OutputTransform,
    theta: String,
    input_basis: String,
    output_basis: String,
}

impl SurrogateModel {
    pub fn predict(&self, fields: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            SurrogateModel::Linear(m) => m.predict(fields),
            SurrogateModel::Quadratic(m) => m.predict(fields),
        }
    }

    pub fn theta(&self) -> &DMatrix<f64> {
        match self {
            SurrogateModel::Linear(m) => &m.theta,
            SurrogateModel::Quadratic(m) => &m.theta,
        }
    }

    pub fn input_basis(&self) -> &ReducedBasis {
        match self {
            SurrogateModel::Linear(m) => &m.input_basis,
            SurrogateModel::Quadratic(m) => &m.input_basis,
        }
    }

    pub fn output_basis(&self) -> &ReducedBasis {
        match self {
            SurrogateModel::Linear(m) => &m.output_basis,
            SurrogateModel::Quadratic(m) => &m.output_basis,
        }
    }

    pub fn output_transform(&self) -> OutputTransform {
        match self {
            SurrogateModel::Linear(m) => m.output_transform,
            SurrogateModel::Quadratic(m) => m.output_transform,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SurrogateModel::Linear(_) => "linear",
            SurrogateModel::Quadratic(_) => "quadratic",
        }
    }

    /// Persists the model as a directory: weight matrix, both bases, and a
    /// JSON descriptor.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_matrix(dir.join("theta.mat"), self.theta())?;
        save_basis(dir.join("input_basis"), self.input_basis())?;
        save_basis(dir.join("output_basis"), self.output_basis())?;
        let desc = ModelDescriptor {
            kind: self.kind().to_string(),
            rank_in: self.input_basis().rank(),
            rank_out: self.output_basis().rank(),
            lambda: match self {
                SurrogateModel::Linear(_) => None,
                SurrogateModel::Quadratic(m) => Some(m.lambda),
            },
            clamp_nonneg: match self {
                SurrogateModel::Linear(m) => m.clamp_nonneg,
                SurrogateModel::Quadratic(m) => m.clamp_nonneg,
            },
            output_transform: self.output_transform(),
            theta: "theta.mat".into(),
            input_basis: "input_basis".into(),
            output_basis: "output_basis".into(),
        };
        let file = File::create(dir.join("model.json"))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &desc)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<SurrogateModel> {
        let dir = dir.as_ref();
        let file = File::open(dir.join("model.json"))?;
        let desc: ModelDescriptor = serde_json::from_reader(BufReader::new(file))?;
        let theta = read_matrix(dir.join(&desc.theta))?;
        let input_basis = load_basis(dir.join(&desc.input_basis))?;
        let output_basis = load_basis(dir.join(&desc.output_basis))?;
        if theta.nrows() != output_basis.rank() {
            return Err(Error::Format(format!(
                "theta has {} rows but output basis rank is {}",
                theta.nrows(),
                output_basis.rank()
            )));
        }
        match desc.kind.as_str() {
            "linear" => {
                if theta.ncols() != input_basis.rank() {
                    return Err(Error::Format(format!(
                        "linear theta has {} columns but input basis rank is {}",
                        theta.ncols(),
                        input_basis.rank()
                    )));
                }
                Ok(SurrogateModel::Linear(LinearOperatorModel {
                    input_basis,
                    output_basis,
                    theta,
                    clamp_nonneg: desc.clamp_nonneg,
                    output_transform: desc.output_transform,
                }))
            }
            "quadratic" => {
                let expected = quadratic_feature_count(input_basis.rank());
                if theta.ncols() != expected {
                    return Err(Error::Format(format!(
                        "quadratic theta has {} columns, expected {expected}",
                        theta.ncols()
                    )));
                }
                Ok(SurrogateModel::Quadratic(QuadraticOperatorModel {
                    input_basis,
                    output_basis,
                    theta,
                    lambda: desc.lambda.unwrap_or(0.0),
                    clamp_nonneg: desc.clamp_nonneg,
                    output_transform: desc.output_transform,
                }))
            }
            other => Err(Error::Format(format!("unknown model kind '{other}'"))),
        }
    }
}

/// Mean field of a basis expressed in its own coefficient space is zero;
/// exposed as a helper for tests that need the zero-input property.
pub fn zero_input_prediction(model: &SurrogateModel) -> Result<DVector<f64>> {
    let n = model.input_basis().field_len();
    let zero = DMatrix::zeros(n, 1);
    let out = model.predict(&zero)?;
    Ok(out.column(0).into_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduction::{pod_basis, truncated_svd, RankSpec};
    use nalgebra::DVector;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn aligned_bases(n: usize, m: usize, r: usize, seed: u64) -> (ReducedBasis, ReducedBasis) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_matrix(n, m, &mut rng);
        let y = random_matrix(n, m, &mut rng);
        (
            pod_basis(&x, RankSpec::Fixed(r)).unwrap(),
            pod_basis(&y, RankSpec::Fixed(r)).unwrap(),
        )
    }

    #[test]
    fn closed_form_matches_gram_solve() {
        let (bi, bo) = aligned_bases(60, 30, 7, 11);
        let cf = fit_linear_closed_form(&bi, &bo, false, OutputTransform::Identity).unwrap();
        let gr = fit_linear_gram(&bi, &bo, false, OutputTransform::Identity).unwrap();
        let rel = (&cf.theta - &gr.theta).norm() / cf.theta.norm();
        assert!(rel < 1e-7, "relative difference {rel}");
    }

    #[test]
    fn interaction_matrix_layout() {
        // Two samples, r = 3; expected column order is a1, a2, a3, a1a1,
        // a1a2, a1a3, a2a2, a2a3, a3a3.
        let coeffs = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]);
        let feats = build_interaction_matrix(&coeffs);
        assert_eq!(feats.ncols(), quadratic_feature_count(3));
        let expected_row0 = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 4.0, 6.0, 9.0];
        let expected_row1 = [-1.0, 0.5, 2.0, 1.0, -0.5, -2.0, 0.25, 1.0, 4.0];
        for (c, &e) in expected_row0.iter().enumerate() {
            assert_eq!(feats[(0, c)], e);
        }
        for (c, &e) in expected_row1.iter().enumerate() {
            assert_eq!(feats[(1, c)], e);
        }
    }

    #[test]
    fn linear_map_recovered_exactly_from_its_own_data() {
        // Build outputs as an exact linear image of rank-limited inputs, with
        // the output basis constructed on raw (zero-mean by construction)
        // data so no constant offset enters.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, m, r) = (50, 24, 5);
        let coeffs = random_matrix(r, m, &mut rng);
        let modes_in = {
            let raw = random_matrix(n, r, &mut rng);
            raw.qr().q()
        };
        let x = &modes_in * &coeffs;
        let theta_true = random_matrix(r, r, &mut rng);
        let modes_out = {
            let raw = random_matrix(n, r, &mut rng);
            raw.qr().q()
        };
        let y = &modes_out * (&theta_true * &coeffs);

        let bi = truncated_svd(&x, r, DVector::zeros(n)).unwrap();
        let bo = truncated_svd(&y, r, DVector::zeros(n)).unwrap();
        let model = fit_linear_closed_form(&bi, &bo, false, OutputTransform::Identity).unwrap();
        let pred = model.predict(&x).unwrap();
        let rel = (&pred - &y).norm() / y.norm();
        assert!(rel < 1e-9, "relative error {rel}");
    }

    #[test]
    fn ridge_norm_non_increasing_in_lambda() {
        let (bi, bo) = aligned_bases(40, 30, 4, 17);
        let lambdas = [1e-2, 1.0, 1e2, 1e4, 1e6];
        let mut prev = f64::INFINITY;
        for &l in &lambdas {
            let m = fit_quadratic(&bi, &bo, l, false, OutputTransform::Identity).unwrap();
            let norm = m.theta.norm();
            assert!(
                norm <= prev * (1.0 + 1e-12),
                "theta norm grew from {prev} to {norm} at lambda {l}"
            );
            prev = norm;
        }
    }

    #[test]
    fn quadratic_rejects_bad_lambda_and_underdetermined() {
        let (bi, bo) = aligned_bases(40, 30, 4, 23);
        assert!(fit_quadratic(&bi, &bo, -1.0, false, OutputTransform::Identity).is_err());
        assert!(fit_quadratic(&bi, &bo, f64::NAN, false, OutputTransform::Identity).is_err());
        // r = 6 gives 27 features but only 20 snapshots: fine with ridge,
        // rejected without.
        let (bi, bo) = aligned_bases(80, 20, 6, 29);
        assert!(fit_quadratic(&bi, &bo, 0.0, false, OutputTransform::Identity).is_err());
        assert!(fit_quadratic(&bi, &bo, 1.0, false, OutputTransform::Identity).is_ok());
    }

    #[test]
    fn clamp_applies_to_decoded_fields() {
        let (bi, bo) = aligned_bases(30, 25, 3, 31);
        let unclamped = fit_linear_closed_form(&bi, &bo, false, OutputTransform::Identity).unwrap();
        let clamped = fit_linear_closed_form(&bi, &bo, true, OutputTransform::Identity).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let x = random_matrix(30, 8, &mut rng);
        let raw = unclamped.predict(&x).unwrap();
        let clm = clamped.predict(&x).unwrap();
        assert!(
            raw.iter().any(|&v| v < 0.0),
            "test needs negative raw output"
        );
        assert!(clm.iter().all(|&v| v >= 0.0));
        for (a, b) in raw.iter().zip(clm.iter()) {
            assert_eq!(a.max(0.0), *b);
        }
    }

    #[test]
    fn model_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let (bi, bo) = aligned_bases(35, 30, 4, 37);
        let lin = SurrogateModel::Linear(
            fit_linear_closed_form(&bi, &bo, true, OutputTransform::Log1p).unwrap(),
        );
        lin.save(dir.path().join("lin")).unwrap();
        assert_eq!(lin, SurrogateModel::load(dir.path().join("lin")).unwrap());

        let quad = SurrogateModel::Quadratic(
            fit_quadratic(&bi, &bo, 1e5, true, OutputTransform::Identity).unwrap(),
        );
        quad.save(dir.path().join("quad")).unwrap();
        assert_eq!(quad, SurrogateModel::load(dir.path().join("quad")).unwrap());
    }

    #[test]
    fn gram_system_guards_shapes_and_conditioning() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let b = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
        // Rows of `a` are linearly dependent: singular gram matrix.
        let sys = GramSystem::from_coefficients(&a, &b).unwrap();
        let err = sys.solve().unwrap_err();
        assert!(err.is_numerical(), "got {err:?}");
        // More coefficients than snapshots.
        let tall = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        assert!(GramSystem::from_coefficients(&tall, &out).is_err());
    }
}
