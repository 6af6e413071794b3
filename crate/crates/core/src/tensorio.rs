//! Snapshot tensors, their on-disk format, and dataset manifests.
//!
//! Fields live on a uniform 2D grid and are flattened column-by-column into
//! vectors of length `nx * ny` (cell `(ix, iy)` maps to flat index
//! `iy * nx + ix`). A dataset is a pair of snapshot matrices, inputs and
//! outputs, whose columns are aligned: column `m` of both matrices belongs to
//! the same `(fire_id, time_index)`.
//!
//! Matrices are stored in a little binary container (`MLOPMAT1`): an 8-byte
//! ASCII magic, row and column counts as little-endian `u64`, then the
//! payload as row-major little-endian `f64`. Reads and writes are bit-exact
//! inverses of each other; non-finite values are rejected on both sides so a
//! well-formed file never contains them.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Magic bytes identifying the binary matrix container.
pub const MATRIX_MAGIC: &[u8; 8] = b"MLOPMAT1";

/// Uniform Cartesian grid with `nx * ny` cells of size `dx * dy` (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidInput(format!(
                "grid must have at least one cell per axis, got {nx}x{ny}"
            )));
        }
        if !(dx.is_finite() && dy.is_finite()) || dx <= 0.0 || dy <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "grid spacings must be positive and finite, got dx={dx}, dy={dy}"
            )));
        }
        Ok(Self { nx, ny, dx, dy })
    }

    pub fn cell_count(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat index of cell `(ix, iy)`.
    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        debug_assert!(ix < self.nx && iy < self.ny);
        iy * self.nx + ix
    }
}

/// Provenance of one snapshot column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotLabel {
    pub fire_id: u64,
    pub time_index: u32,
    /// Free-form scenario condition tag, e.g. an emission regime name.
    pub condition: String,
}

/// A labeled snapshot matrix: `cell_count x n_snapshots`, one column per
/// snapshot, with `labels[m]` describing column `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    pub grid: Grid2D,
    pub data: DMatrix<f64>,
    pub labels: Vec<SnapshotLabel>,
}

impl SnapshotMatrix {
    /// Validates shape consistency and finiteness of the entries.
    pub fn new(grid: Grid2D, data: DMatrix<f64>, labels: Vec<SnapshotLabel>) -> Result<Self> {
        if data.nrows() != grid.cell_count() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot rows {} != grid cell count {}",
                data.nrows(),
                grid.cell_count()
            )));
        }
        if data.ncols() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot columns {} != label count {}",
                data.ncols(),
                labels.len()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidInput(
                "snapshot matrix must contain at least one snapshot".into(),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "snapshot matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { grid, data, labels })
    }

    pub fn n_snapshots(&self) -> usize {
        self.data.ncols()
    }

    /// New matrix with the given columns, in the given order.
    pub fn select_columns(&self, indices: &[usize]) -> Result<SnapshotMatrix> {
        for &i in indices {
            if i >= self.n_snapshots() {
                return Err(Error::InvalidInput(format!(
                    "column index {i} out of range for {} snapshots",
                    self.n_snapshots()
                )));
            }
        }
        let data = self.data.select_columns(indices);
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        SnapshotMatrix::new(self.grid, data, labels)
    }
}

/// Keeps only snapshots whose label satisfies `pred`, preserving column order.
pub fn filter_snapshots<F>(matrix: &SnapshotMatrix, mut pred: F) -> Result<SnapshotMatrix>
where
    F: FnMut(&SnapshotLabel) -> bool,
{
    let keep: Vec<usize> = matrix
        .labels
        .iter()
        .enumerate()
        .filter(|(_, l)| pred(l))
        .map(|(i, _)| i)
        .collect();
    if keep.is_empty() {
        return Err(Error::InvalidInput("filter removed every snapshot".into()));
    }
    matrix.select_columns(&keep)
}

/// Column indices of the final-time snapshot of each fire (the column with
/// the largest `time_index` per `fire_id`), in ascending column order.
pub fn final_time_indices(labels: &[SnapshotLabel]) -> Vec<usize> {
    let mut best: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        match best.get(&l.fire_id) {
            Some(&j) if labels[j].time_index >= l.time_index => {}
            _ => {
                best.insert(l.fire_id, i);
            }
        }
    }
    let mut out: Vec<usize> = best.into_values().collect();
    out.sort_unstable();
    out
}

/// Disjoint train/validation/test column indices over one labeled dataset.
///
/// Invariant: the three parts partition `0..n_snapshots` and every fire's
/// snapshots land in exactly one part, so no fire leaks across parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplit {
    /// Checks the partition and no-leakage invariants against `labels`.
    pub fn validate(&self, labels: &[SnapshotLabel]) -> Result<()> {
        let mut seen = vec![false; labels.len()];
        let mut fire_part: BTreeMap<u64, u8> = BTreeMap::new();
        for (part_id, part) in [&self.train, &self.validation, &self.test]
            .into_iter()
            .enumerate()
        {
            for &i in part {
                if i >= labels.len() {
                    return Err(Error::InvalidInput(format!(
                        "split index {i} out of range for {} snapshots",
                        labels.len()
                    )));
                }
                if seen[i] {
                    return Err(Error::InvalidInput(format!(
                        "split assigns snapshot {i} to more than one part"
                    )));
                }
                seen[i] = true;
                let fire = labels[i].fire_id;
                match fire_part.get(&fire) {
                    None => {
                        fire_part.insert(fire, part_id as u8);
                    }
                    Some(&p) if p == part_id as u8 => {}
                    Some(_) => {
                        return Err(Error::InvalidInput(format!(
                            "fire {fire} leaks across split parts"
                        )));
                    }
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidInput(
                "split does not cover every snapshot".into(),
            ));
        }
        Ok(())
    }

    pub fn part(&self, name: &str) -> Result<&[usize]> {
        match name {
            "train" => Ok(&self.train),
            "validation" => Ok(&self.validation),
            "test" => Ok(&self.test),
            other => Err(Error::InvalidInput(format!(
                "unknown split part '{other}' (expected train|validation|test)"
            ))),
        }
    }
}

/// Splits snapshots into train/validation/test by whole fires.
///
/// Fires are shuffled with a seeded generator, then assigned greedily in
/// shuffled order: each fire goes to the first part whose snapshot count has
/// not yet reached its target share. With fires of comparable size the part
/// sizes land within one fire of the requested fractions. All snapshots of a
/// fire always end up in the same part.
pub fn split_by_fire(
    labels: &[SnapshotLabel],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (ft, fv, fe) = fractions;
    for f in [ft, fv, fe] {
        if !f.is_finite() || f <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "split fractions must be positive, got {fractions:?}"
            )));
        }
    }
    if (ft + fv + fe - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split fractions must sum to 1, got {fractions:?}"
        )));
    }

    // BTreeMap gives a deterministic fire order before shuffling.
    let mut by_fire: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_fire.entry(l.fire_id).or_default().push(i);
    }
    if by_fire.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 distinct fires to split, got {}",
            by_fire.len()
        )));
    }

    let mut fire_ids: Vec<u64> = by_fire.keys().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fire_ids.shuffle(&mut rng);

    let total = labels.len() as f64;
    let targets = [ft * total, fv * total, fe * total];
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut counts = [0.0f64; 3];
    let mut part = 0usize;
    for fire in fire_ids {
        while part < 2 && counts[part] >= targets[part] {
            part += 1;
        }
        let cols = &by_fire[&fire];
        counts[part] += cols.len() as f64;
        parts[part].extend_from_slice(cols);
    }
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidInput(
            "too few fires to populate every split part; add fires or adjust fractions".into(),
        ));
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let [train, validation, test] = parts;
    let split = DatasetSplit {
        train,
        validation,
        test,
    };
    split.validate(labels)?;
    Ok(split)
}

/// Writes a dense matrix in the `MLOPMAT1` container.
pub fn write_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "refusing to write non-finite matrix entries".into(),
        ));
    }
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            w.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a matrix written by [`write_matrix`]. Bit-exact inverse.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic {:?}, expected {:?}",
            path.display(),
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MATRIX_MAGIC)
        )));
    }

    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    let rows = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf)
        .map_err(|_| Error::Format(format!("{}: truncated header", path.display())))?;
    let cols = u64::from_le_bytes(u64buf);

    let rows: usize = rows
        .try_into()
        .map_err(|_| Error::Format(format!("{}: row count overflows usize", path.display())))?;
    let cols: usize = cols
        .try_into()
        .map_err(|_| Error::Format(format!("{}: column count overflows usize", path.display())))?;
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .ok_or_else(|| Error::Format(format!("{}: matrix size overflows", path.display())))?
        / 8;

    let mut payload = vec![0u8; count * 8];
    r.read_exact(&mut payload).map_err(|_| {
        Error::Format(format!(
            "{}: truncated payload, expected {rows}x{cols} entries",
            path.display()
        ))
    })?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after {rows}x{cols} payload",
            path.display()
        )));
    }

    let mut values = Vec::with_capacity(count);
    for chunk in payload.chunks_exact(8) {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::Format(format!(
                "{}: non-finite entry in payload",
                path.display()
            )));
        }
        values.push(v);
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// JSON manifest tying a grid, two matrix files, and per-column labels
/// together. Matrix paths are resolved relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub grid: Grid2D,
    pub inputs: String,
    pub outputs: String,
    pub labels: Vec<SnapshotLabel>,
}

impl DatasetManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = File::create(path.as_ref())?;
        serde_json::to_writer_pretty(BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        let manifest: DatasetManifest = serde_json::from_reader(BufReader::new(file))?;
        Ok(manifest)
    }
}

/// Writes both matrices next to `manifest_path` and the manifest itself.
pub fn save_dataset(
    manifest_path: impl AsRef<Path>,
    inputs: &SnapshotMatrix,
    outputs: &SnapshotMatrix,
) -> Result<()> {
    let manifest_path = manifest_path.as_ref();
    if inputs.labels != outputs.labels {
        return Err(Error::InvalidInput(
            "input and output snapshot labels differ".into(),
        ));
    }
    if inputs.grid != outputs.grid {
        return Err(Error::DimensionMismatch(
            "input and output grids differ".into(),
        ));
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    write_matrix(dir.join("inputs.mat"), &inputs.data)?;
    write_matrix(dir.join("outputs.mat"), &outputs.data)?;
    let manifest = DatasetManifest {
        grid: inputs.grid,
        inputs: "inputs.mat".into(),
        outputs: "outputs.mat".into(),
        labels: inputs.labels.clone(),
    };
    manifest.save(manifest_path)
}

/// Loads the `(inputs, outputs)` pair described by a manifest.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<(SnapshotMatrix, SnapshotMatrix)> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let dir: PathBuf = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .to_path_buf();
    let inputs = read_matrix(dir.join(&manifest.inputs))?;
    let outputs = read_matrix(dir.join(&manifest.outputs))?;
    let inputs = SnapshotMatrix::new(manifest.grid, inputs, manifest.labels.clone())?;
    let outputs = SnapshotMatrix::new(manifest.grid, outputs, manifest.labels)?;
    Ok((inputs, outputs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(fire_id: u64, time_index: u32) -> SnapshotLabel {
        SnapshotLabel {
            fire_id,
            time_index,
            condition: "medium".into(),
        }
    }

    #[test]
    fn matrix_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mat");
        let m = DMatrix::from_fn(7, 3, |i, j| {
            (i as f64 + 1.0) / (j as f64 + 3.0) * if (i + j) % 2 == 0 { 1.0 } else { -1.0 }
        });
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn read_rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.mat");
        std::fs::write(&path, b"NOTMAGIC\x01\x00\x00\x00\x00\x00\x00\x00").unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn read_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.mat");
        // Header claims 10x10 but only 50 values follow.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MATRIX_MAGIC);
        bytes.extend_from_slice(&10u64.to_le_bytes());
        bytes.extend_from_slice(&10u64.to_le_bytes());
        for i in 0..50 {
            bytes.extend_from_slice(&(i as f64).to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        let err = read_matrix(&path).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("truncated"), "{msg}"),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn read_rejects_size_overflow() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("huge.mat");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MATRIX_MAGIC);
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        bytes.extend_from_slice(&u64::MAX.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = read_matrix(&path).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn write_rejects_non_finite() {
        let dir = tempfile::tempdir().unwrap();
        let m = DMatrix::from_element(2, 2, f64::NAN);
        let err = write_matrix(dir.path().join("nan.mat"), &m).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)), "got {err:?}");
    }

    #[test]
    fn split_respects_fire_boundaries_and_fractions() {
        // 10 fires x 10 snapshots, the worked reference case.
        let mut labels = Vec::new();
        for fire in 0..10u64 {
            for t in 0..10u32 {
                labels.push(label(fire, t));
            }
        }
        let split = split_by_fire(&labels, (0.45, 0.10, 0.45), 7).unwrap();
        split.validate(&labels).unwrap();
        // Greedy assignment by whole fires: each part within one fire (10
        // snapshots) of its target.
        assert!((split.train.len() as i64 - 45).unsigned_abs() <= 10);
        assert!((split.validation.len() as i64 - 10).unsigned_abs() <= 10);
        assert!((split.test.len() as i64 - 45).unsigned_abs() <= 10);
        // Determinism for a fixed seed.
        let again = split_by_fire(&labels, (0.45, 0.10, 0.45), 7).unwrap();
        assert_eq!(split, again);
        // A different seed reshuffles fires.
        let other = split_by_fire(&labels, (0.45, 0.10, 0.45), 8).unwrap();
        assert_ne!(split, other);
    }

    #[test]
    fn split_rejects_bad_fractions_and_few_fires() {
        let labels: Vec<_> = (0..30).map(|i| label(i / 10, (i % 10) as u32)).collect();
        assert!(split_by_fire(&labels, (0.5, 0.5, 0.5), 0).is_err());
        assert!(split_by_fire(&labels, (0.5, -0.1, 0.6), 0).is_err());
        assert!(split_by_fire(&labels, (0.5, 0.0, 0.5), 0).is_err());
        let two_fires: Vec<_> = (0..20).map(|i| label(i / 10, (i % 10) as u32)).collect();
        assert!(split_by_fire(&two_fires, (0.45, 0.10, 0.45), 0).is_err());
    }

    #[test]
    fn filter_preserves_order_and_alignment() {
        let grid = Grid2D::new(2, 2, 1.0, 1.0).unwrap();
        let labels: Vec<_> = (0..6).map(|i| label(i / 3, (i % 3) as u32)).collect();
        let data = DMatrix::from_fn(4, 6, |i, j| (i * 10 + j) as f64);
        let m = SnapshotMatrix::new(grid, data, labels).unwrap();
        let kept = filter_snapshots(&m, |l| l.time_index == 2).unwrap();
        assert_eq!(kept.n_snapshots(), 2);
        assert_eq!(kept.labels[0].fire_id, 0);
        assert_eq!(kept.labels[1].fire_id, 1);
        assert_eq!(kept.data.column(0), m.data.column(2));
        assert_eq!(kept.data.column(1), m.data.column(5));
    }

    #[test]
    fn final_time_picks_max_time_index_per_fire() {
        let labels = vec![
            label(3, 0),
            label(3, 4),
            label(1, 2),
            label(3, 1),
            label(1, 0),
        ];
        assert_eq!(final_time_indices(&labels), vec![1, 2]);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid2D::new(3, 2, 5.0, 4.0).unwrap();
        let labels: Vec<_> = (0..4).map(|i| label(i / 2, (i % 2) as u32)).collect();
        let inputs = SnapshotMatrix::new(
            grid,
            DMatrix::from_fn(6, 4, |i, j| (i + j) as f64),
            labels.clone(),
        )
        .unwrap();
        let outputs =
            SnapshotMatrix::new(grid, DMatrix::from_fn(6, 4, |i, j| (i * j) as f64), labels)
                .unwrap();
        let manifest_path = dir.path().join("dataset.json");
        save_dataset(&manifest_path, &inputs, &outputs).unwrap();
        let (i2, o2) = load_dataset(&manifest_path).unwrap();
        assert_eq!(inputs, i2);
        assert_eq!(outputs, o2);
    }
}
