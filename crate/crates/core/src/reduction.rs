//! Truncated POD/PCA bases for snapshot matrices.
//!
//! A basis is built from the thin SVD of a mean-centered snapshot matrix
//! `X = U S V^T` (`X` is `N x M`, one snapshot per column). The first `r`
//! left singular vectors are the modes; encoding projects a field onto them
//! and decoding reconstructs `mean + modes * coeffs`. Both the truncated and
//! the full singular value spectra are kept: rank selection and energy
//! diagnostics need the full spectrum, operator fitting needs the truncated
//! factors.
//!
//! Sign convention: each mode is flipped so that its entry of largest
//! magnitude is non-negative (ties broken toward the lowest index), with the
//! matching right factor column flipped alongside. This makes bases unique
//! and runs reproducible regardless of the eigensolver's sign choices.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::tensorio::{read_matrix, write_matrix};
use crate::{Error, Result};

/// Truncated POD basis of rank `r` over fields of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBasis {
    /// Training mean field, length `n`. Zero when the basis was built on
    /// uncentered data.
    pub mean: DVector<f64>,
    /// Orthonormal modes, `n x r`.
    pub modes: DMatrix<f64>,
    /// Leading singular values, length `r`, strictly positive, descending.
    pub sing_vals: DVector<f64>,
    /// Right singular factors of the training matrix, `m x r`.
    pub right_factors: DMatrix<f64>,
    /// Full spectrum of the training matrix, length `min(n, m)`, descending.
    pub full_sing_vals: DVector<f64>,
}

/// How to pick the truncation rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RankSpec {
    Fixed(usize),
    /// Smallest rank whose cumulative singular value sum reaches this
    /// fraction of the total. See [`choose_rank`].
    EnergyFraction(f64),
}

/// Splits a snapshot matrix into its column mean and the centered matrix.
pub fn mean_center(data: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let m = data.ncols() as f64;
    let mean = DVector::from_fn(data.nrows(), |i, _| data.row(i).sum() / m);
    let mut centered = data.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    (centered, mean)
}

/// Smallest `r` such that the cumulative sum of the leading `r` singular
/// values reaches `fraction` of the total sum.
///
/// With `fraction = 1.0` this is the count of strictly positive singular
/// values (a tiny relative slack absorbs rounding in the cumulative sum).
pub fn choose_rank(sing_vals: &[f64], fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "energy fraction must lie in (0, 1], got {fraction}"
        )));
    }
    if sing_vals.is_empty() {
        return Err(Error::InvalidInput("empty singular value list".into()));
    }
    let total: f64 = sing_vals.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(
            "all singular values are zero; no energy to capture".into(),
        ));
    }
    let target = fraction * total - 1e-12 * total;
    let mut cum = 0.0;
    for (i, &s) in sing_vals.iter().enumerate() {
        cum += s;
        if cum >= target {
            return Ok(i + 1);
        }
    }
    Ok(sing_vals.len())
}

struct EconomySvd {
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    /// Full spectrum, descending, clamped to be non-negative.
    sing: DVector<f64>,
    /// Numerical rank: count of singular values above the noise cutoff.
    rank: usize,
}

/// Thin SVD with all singular values and numerical-rank left/right factors.
///
/// When the matrix is tall and skinny (`4m <= n`) the Gram route is used:
/// eigendecomposition of `X^T X` followed by `U = X V S^{-1}` and a
/// Gram-Schmidt polish of `U`. Otherwise the direct bidiagonalization SVD
/// is tried first and verified by reconstruction: it can silently
/// misconverge on matrices with a hard rank cliff (orthonormal factors
/// whose product does not reproduce the matrix), in which case the Gram
/// route is used as the fallback.
fn economy_svd(x: &DMatrix<f64>) -> Result<EconomySvd> {
    let (n, m) = (x.nrows(), x.ncols());
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("cannot decompose empty matrix".into()));
    }

    let (mut u, mut v, sing, rank) = if 4 * m <= n {
        gram_route(x)?
    } else {
        direct_route_with_fallback(x)?
    };
    debug_assert_eq!(rank, u.ncols());
    // Joint sign fix keeps u * diag(s) * v^T unchanged.
    for j in 0..rank {
        let col = u.column(j);
        let mut lead = 0;
        for i in 1..col.len() {
            if col[i].abs() > col[lead].abs() {
                lead = i;
            }
        }
        if col[lead] < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }

    Ok(EconomySvd { u, v, sing, rank })
}

fn numerical_rank(sing: &DVector<f64>, n: usize, m: usize) -> usize {
    let smax = if sing.is_empty() { 0.0 } else { sing[0] };
    let tol = smax * f64::EPSILON * (n.max(m) as f64);
    sing.iter().take_while(|&&s| s > tol).count()
}

/// Rank cutoff for the Gram route. Squaring the matrix squares its condition
/// number, so singular values below `smax * sqrt(eps * dim)` are
/// eigen-noise of the Gram matrix rather than data and must not be invited
/// into the factors.
fn gram_numerical_rank(sing: &DVector<f64>, n: usize, m: usize) -> usize {
    let smax = if sing.is_empty() { 0.0 } else { sing[0] };
    let tol = smax * (f64::EPSILON * (n.max(m) as f64)).sqrt();
    sing.iter().take_while(|&&s| s > tol).count()
}

/// SVD via the eigendecomposition of the smaller Gram matrix (`X^T X` when
/// the matrix is tall, `X X^T` when it is wide). The factor on the other
/// side is recovered as `X V S^{-1}` (resp. `X^T U S^{-1}`) and polished
/// with Gram-Schmidt to restore orthonormality at the 1e-10 level.
fn gram_route(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>, usize)> {
    let (n, m) = (x.nrows(), x.ncols());
    let sort_desc = |eigenvalues: &DVector<f64>| -> Vec<usize> {
        let mut order: Vec<usize> = (0..eigenvalues.len()).collect();
        order.sort_by(|&a, &b| {
            eigenvalues[b]
                .partial_cmp(&eigenvalues[a])
                .expect("eigenvalues of a real symmetric matrix are finite")
        });
        order
    };
    if m <= n {
        let eig = (x.transpose() * x).symmetric_eigen();
        let order = sort_desc(&eig.eigenvalues);
        let sing = DVector::from_fn(m, |i, _| eig.eigenvalues[order[i]].max(0.0).sqrt());
        let rank = gram_numerical_rank(&sing, n, m);
        let v = DMatrix::from_fn(m, rank, |i, j| eig.eigenvectors[(i, order[j])]);
        let mut u = x * &v;
        for j in 0..rank {
            u.column_mut(j).scale_mut(1.0 / sing[j]);
        }
        gram_schmidt_polish(&mut u)?;
        Ok((u, v, sing, rank))
    } else {
        let eig = (x * x.transpose()).symmetric_eigen();
        let order = sort_desc(&eig.eigenvalues);
        let sing = DVector::from_fn(n, |i, _| eig.eigenvalues[order[i]].max(0.0).sqrt());
        let rank = gram_numerical_rank(&sing, n, m);
        let u = DMatrix::from_fn(n, rank, |i, j| eig.eigenvectors[(i, order[j])]);
        let mut v = x.transpose() * &u;
        for j in 0..rank {
            v.column_mut(j).scale_mut(1.0 / sing[j]);
        }
        gram_schmidt_polish(&mut v)?;
        Ok((u, v, sing, rank))
    }
}

/// Direct bidiagonalization SVD, verified by reconstructing the matrix from
/// the rank-truncated factors. The bidiagonal iteration can misconverge on
/// matrices whose spectrum drops abruptly to zero, returning orthonormal
/// factors (and a slightly wrong leading singular value) whose product does
/// not reproduce the input; when the relative reconstruction residual
/// exceeds 1e-10 the Gram route is used instead.
fn direct_route_with_fallback(
    x: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>, usize)> {
    let (n, m) = (x.nrows(), x.ncols());
    let svd = x.clone().svd(true, true);
    let sing = svd.singular_values.map(|s| s.max(0.0));
    let u_full = svd.u.expect("u requested");
    let v_full = svd.v_t.expect("v_t requested").transpose();
    let rank = numerical_rank(&sing, n, m);
    let u = u_full.columns(0, rank).into_owned();
    let v = v_full.columns(0, rank).into_owned();

    let x_norm = x.norm();
    if x_norm > 0.0 {
        let mut scaled = u.clone();
        for j in 0..rank {
            scaled.column_mut(j).scale_mut(sing[j]);
        }
        let residual = (scaled * v.transpose() - x).norm() / x_norm;
        if !(residual <= 1e-10) {
            return gram_route(x);
        }
    }
    Ok((u, v, sing, rank))
}

/// Two passes of modified Gram-Schmidt over the columns of `u`. Input columns
/// are expected to be near-orthonormal already; this drives the Gram matrix
/// to identity at machine precision.
fn gram_schmidt_polish(u: &mut DMatrix<f64>) -> Result<()> {
    for _ in 0..2 {
        for j in 0..u.ncols() {
            for k in 0..j {
                let proj = u.column(k).dot(&u.column(j));
                let uk = u.column(k).into_owned();
                u.column_mut(j).axpy(-proj, &uk, 1.0);
            }
            let norm = u.column(j).norm();
            if norm < 1e-300 {
                return Err(Error::Numerical(
                    "gram-schmidt polish hit a dependent column; rank estimate too high".into(),
                ));
            }
            u.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    Ok(())
}

/// Rank-`r` truncated SVD of an (already centered) snapshot matrix.
///
/// `mean` is stored in the basis and used by [`ReducedBasis::encode`] and
/// [`ReducedBasis::decode`]; pass the vector returned by [`mean_center`], or
/// zeros to build a basis on raw data.
pub fn truncated_svd(
    centered: &DMatrix<f64>,
    r: usize,
    mean: DVector<f64>,
) -> Result<ReducedBasis> {
    if mean.len() != centered.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "mean length {} != field length {}",
            mean.len(),
            centered.nrows()
        )));
    }
    if r == 0 {
        return Err(Error::InvalidInput("rank must be at least 1".into()));
    }
    let econ = economy_svd(centered)?;
    if r > econ.rank {
        return Err(Error::InvalidInput(format!(
            "requested rank {r} exceeds numerical rank {}",
            econ.rank
        )));
    }
    Ok(ReducedBasis {
        mean,
        modes: econ.u.columns(0, r).into_owned(),
        sing_vals: DVector::from_fn(r, |i, _| econ.sing[i]),
        right_factors: econ.v.columns(0, r).into_owned(),
        full_sing_vals: econ.sing,
    })
}

/// Centers `data`, decomposes it, and truncates per `rank`.
pub fn pod_basis(data: &DMatrix<f64>, rank: RankSpec) -> Result<ReducedBasis> {
    let (centered, mean) = mean_center(data);
    pod_basis_with_mean(&centered, mean, rank)
}

/// As [`pod_basis`] but on pre-centered data with an explicit mean.
pub fn pod_basis_with_mean(
    centered: &DMatrix<f64>,
    mean: DVector<f64>,
    rank: RankSpec,
) -> Result<ReducedBasis> {
    let r = match rank {
        RankSpec::Fixed(r) => r,
        RankSpec::EnergyFraction(f) => {
            // Rank selection needs the spectrum; reuse one decomposition by
            // choosing against the full spectrum, then truncating.
            let probe = economy_svd(centered)?;
            let r = choose_rank(probe.sing.as_slice(), f)?;
            let r = r.min(probe.rank);
            if r == 0 {
                return Err(Error::InvalidInput(
                    "matrix has numerical rank 0; no basis to build".into(),
                ));
            }
            return Ok(ReducedBasis {
                mean,
                modes: probe.u.columns(0, r).into_owned(),
                sing_vals: DVector::from_fn(r, |i, _| probe.sing[i]),
                right_factors: probe.v.columns(0, r).into_owned(),
                full_sing_vals: probe.sing,
            });
        }
    };
    truncated_svd(centered, r, mean)
}

impl ReducedBasis {
    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn field_len(&self) -> usize {
        self.modes.nrows()
    }

    /// Number of training snapshots the basis was built from.
    pub fn n_train(&self) -> usize {
        self.right_factors.nrows()
    }

    /// Projects fields (`n x k`, one per column) onto the basis: coefficients
    /// are `modes^T (fields - mean)`, returned as `r x k`.
    pub fn encode(&self, fields: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if fields.nrows() != self.field_len() {
            return Err(Error::DimensionMismatch(format!(
                "field length {} != basis field length {}",
                fields.nrows(),
                self.field_len()
            )));
        }
        let mut centered = fields.clone();
        for mut col in centered.column_iter_mut() {
            col -= &self.mean;
        }
        // tr_mul computes modes^T * centered without materializing the
        // transpose; encode sits on the per-prediction hot path.
        Ok(self.modes.tr_mul(&centered))
    }

    /// Reconstructs fields from coefficients: `mean + modes * coeffs`.
    pub fn decode(&self, coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if coeffs.nrows() != self.rank() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient rows {} != basis rank {}",
                coeffs.nrows(),
                self.rank()
            )));
        }
        let mut fields = &self.modes * coeffs;
        for mut col in fields.column_iter_mut() {
            col += &self.mean;
        }
        Ok(fields)
    }

    /// Training snapshot coefficients `S V^T` (`r x m`), recovered from the
    /// stored factors without touching the training data.
    pub fn training_coefficients(&self) -> DMatrix<f64> {
        let mut coeffs = self.right_factors.transpose();
        for (i, mut row) in coeffs.row_iter_mut().enumerate() {
            row *= self.sing_vals[i];
        }
        coeffs
    }

    /// Squared Frobenius norm of the training residual at truncation rank
    /// `r`, i.e. the energy in the discarded singular values.
    pub fn truncation_energy(&self, r: usize) -> Result<f64> {
        if r > self.full_sing_vals.len() {
            return Err(Error::InvalidInput(format!(
                "rank {r} exceeds spectrum length {}",
                self.full_sing_vals.len()
            )));
        }
        Ok(self.full_sing_vals.iter().skip(r).map(|s| s * s).sum())
    }
}

#[derive(Serialize, Deserialize)]
struct BasisDescriptor {
    field_len: usize,
    rank: usize,
    n_train: usize,
    mean: String,
    modes: String,
    sing_vals: String,
    right_factors: String,
    full_sing_vals: String,
}

/// Persists a basis as a directory of matrix files plus a JSON descriptor.
pub fn save_basis(dir: impl AsRef<Path>, basis: &ReducedBasis) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_matrix(
        dir.join("mean.mat"),
        &DMatrix::from_column_slice(basis.mean.len(), 1, basis.mean.as_slice()),
    )?;
    write_matrix(dir.join("modes.mat"), &basis.modes)?;
    write_matrix(
        dir.join("sing_vals.mat"),
        &DMatrix::from_column_slice(basis.sing_vals.len(), 1, basis.sing_vals.as_slice()),
    )?;
    write_matrix(dir.join("right_factors.mat"), &basis.right_factors)?;
    write_matrix(
        dir.join("full_sing_vals.mat"),
        &DMatrix::from_column_slice(
            basis.full_sing_vals.len(),
            1,
            basis.full_sing_vals.as_slice(),
        ),
    )?;
    let desc = BasisDescriptor {
        field_len: basis.field_len(),
        rank: basis.rank(),
        n_train: basis.n_train(),
        mean: "mean.mat".into(),
        modes: "modes.mat".into(),
        sing_vals: "sing_vals.mat".into(),
        right_factors: "right_factors.mat".into(),
        full_sing_vals: "full_sing_vals.mat".into(),
    };
    let file = File::create(dir.join("basis.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &desc)?;
    Ok(())
}

/// Loads a basis saved by [`save_basis`].
pub fn load_basis(dir: impl AsRef<Path>) -> Result<ReducedBasis> {
    let dir = dir.as_ref();
    let file = File::open(dir.join("basis.json"))?;
    let desc: BasisDescriptor = serde_json::from_reader(BufReader::new(file))?;
    let mean = read_matrix(dir.join(&desc.mean))?;
    let modes = read_matrix(dir.join(&desc.modes))?;
    let sing_vals = read_matrix(dir.join(&desc.sing_vals))?;
    let right_factors = read_matrix(dir.join(&desc.right_factors))?;
    let full_sing_vals = read_matrix(dir.join(&desc.full_sing_vals))?;
    if modes.nrows() != desc.field_len
        || modes.ncols() != desc.rank
        || mean.nrows() != desc.field_len
        || mean.ncols() != 1
        || sing_vals.nrows() != desc.rank
        || right_factors.nrows() != desc.n_train
        || right_factors.ncols() != desc.rank
    {
        return Err(Error::Format(format!(
            "basis files in {} do not match descriptor",
            dir.display()
        )));
    }
    Ok(ReducedBasis {
        mean: DVector::from_column_slice(mean.as_slice()),
        modes,
        sing_vals: DVector::from_column_slice(sing_vals.as_slice()),
        right_factors,
        full_sing_vals: DVector::from_column_slice(full_sing_vals.as_slice()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0))
    }

    fn assert_basis_invariants(b: &ReducedBasis) {
        // Orthonormal modes.
        let gram = b.modes.transpose() * &b.modes;
        let eye = DMatrix::<f64>::identity(b.rank(), b.rank());
        assert!((gram - eye).norm() < 1e-10);
        // Positive, descending singular values.
        for i in 0..b.rank() {
            assert!(b.sing_vals[i] > 0.0);
            if i > 0 {
                assert!(b.sing_vals[i] <= b.sing_vals[i - 1] * (1.0 + 1e-12));
            }
        }
        // Sign convention.
        for j in 0..b.rank() {
            let col = b.modes.column(j);
            let mut lead = 0;
            for i in 1..col.len() {
                if col[i].abs() > col[lead].abs() {
                    lead = i;
                }
            }
            assert!(col[lead] >= 0.0);
        }
    }

    #[test]
    fn both_svd_routes_satisfy_invariants_and_reconstruct() {
        // Wide-ish matrix takes the direct route, tall one the Gram route.
        for (n, m, seed) in [(40, 30, 1u64), (400, 25, 2u64)] {
            let data = random_matrix(n, m, seed);
            let (centered, mean) = mean_center(&data);
            let r = m - 5;
            let basis = truncated_svd(&centered, r, mean).unwrap();
            assert_basis_invariants(&basis);
            // Reconstruction error matches discarded energy.
            let approx_mat = &basis.modes
                * DMatrix::from_diagonal(&basis.sing_vals)
                * basis.right_factors.transpose();
            let resid = (&centered - approx_mat).norm_squared();
            let expected = basis.truncation_energy(r).unwrap();
            assert_abs_diff_eq!(resid, expected, epsilon = 1e-8 * centered.norm_squared());
            // Energy identity over the full spectrum.
            let total: f64 = basis.full_sing_vals.iter().map(|s| s * s).sum();
            assert_abs_diff_eq!(
                total,
                centered.norm_squared(),
                epsilon = 1e-8 * centered.norm_squared()
            );
        }
    }

    #[test]
    fn encode_decode_are_projections() {
        let data = random_matrix(50, 20, 3);
        let basis = pod_basis(&data, RankSpec::Fixed(8)).unwrap();
        let coeffs = basis.encode(&data).unwrap();
        let recon = basis.decode(&coeffs).unwrap();
        // Projection is idempotent: encoding the reconstruction returns the
        // same coefficients.
        let coeffs2 = basis.encode(&recon).unwrap();
        assert!((coeffs - coeffs2).norm() < 1e-10);
    }

    #[test]
    fn choose_rank_boundaries() {
        let s = [4.0, 3.0, 2.0, 1.0]; // total 10
        assert_eq!(choose_rank(&s, 0.4).unwrap(), 1);
        assert_eq!(choose_rank(&s, 0.41).unwrap(), 2);
        assert_eq!(choose_rank(&s, 0.7).unwrap(), 2);
        assert_eq!(choose_rank(&s, 0.9).unwrap(), 3);
        assert_eq!(choose_rank(&s, 1.0).unwrap(), 4);
        // fraction = 1 with trailing zeros: only positive values count.
        assert_eq!(choose_rank(&[2.0, 1.0, 0.0, 0.0], 1.0).unwrap(), 2);
        assert!(choose_rank(&s, 0.0).is_err());
        assert!(choose_rank(&s, 1.1).is_err());
        assert!(choose_rank(&[0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn rank_request_beyond_numerical_rank_errors() {
        // Rank-3 matrix by construction.
        let a = random_matrix(30, 3, 4);
        let b = random_matrix(3, 10, 5);
        let low_rank = a * b;
        let err = truncated_svd(&low_rank, 5, DVector::zeros(30)).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "got {err:?}");
        assert!(truncated_svd(&low_rank, 3, DVector::zeros(30)).is_ok());
    }

    #[test]
    fn energy_rank_selection_matches_manual_choice() {
        let data = random_matrix(60, 25, 6);
        let basis = pod_basis(&data, RankSpec::EnergyFraction(0.8)).unwrap();
        let manual = choose_rank(basis.full_sing_vals.as_slice(), 0.8).unwrap();
        assert_eq!(basis.rank(), manual);
    }

    #[test]
    fn basis_roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let data = random_matrix(45, 12, 7);
        let basis = pod_basis(&data, RankSpec::Fixed(6)).unwrap();
        save_basis(dir.path().join("basis"), &basis).unwrap();
        let back = load_basis(dir.path().join("basis")).unwrap();
        assert_eq!(basis, back);
    }
}
