//! Wall-time comparison of the data-parallel hot paths against a
//! single-thread baseline.
//!
//! Every parallel loop in the crate is an index-ordered map (see `par`), so
//! results are bitwise identical across thread counts; these benchmarks
//! measure the speedup only. The single-thread variant runs the same code
//! inside a one-thread rayon pool, which is how the crate behaves when built
//! with `--no-default-features`.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plumeop_core::baselines::{gp_fit, gp_predict};
use plumeop_core::evalqoi::classification_report;
use plumeop_core::synthfire::{generate_dataset, GeneratorConfig};
use plumeop_core::tensorio::{Grid2D, SnapshotLabel, SnapshotMatrix};

fn single_thread_pool() -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("building a one-thread pool")
}

fn bench_generate_dataset(c: &mut Criterion) {
    let config = GeneratorConfig {
        n_fires: 4,
        ..GeneratorConfig::default()
    };
    let pool = single_thread_pool();

    let mut group = c.benchmark_group("generate_dataset_4_fires");
    group.sample_size(10);
    group.bench_function("single_thread", |b| {
        b.iter(|| pool.install(|| black_box(generate_dataset(black_box(&config), 7).unwrap())))
    });
    group.bench_function("all_threads", |b| {
        b.iter(|| black_box(generate_dataset(black_box(&config), 7).unwrap()))
    });
    group.finish();
}

fn synthetic_snapshots(seed: u64, cells: usize, snaps: usize) -> (SnapshotMatrix, SnapshotMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = Grid2D {
        nx: cells / 50,
        ny: 50,
        dx: 10.0,
        dy: 10.0,
    };
    let labels: Vec<SnapshotLabel> = (0..snaps)
        .map(|j| SnapshotLabel {
            fire_id: (j / 5) as u64,
            time_index: (j % 5) as u32,
            condition: "bench".to_string(),
        })
        .collect();
    let base = DMatrix::from_fn(grid.cell_count(), snaps, |_, _| rng.random_range(0.0..2.0));
    let noisy = base.map(|v| (v + rng.random_range(-0.2..0.2_f64)).max(0.0));
    (
        SnapshotMatrix::new(grid, noisy, labels.clone()).unwrap(),
        SnapshotMatrix::new(grid, base, labels).unwrap(),
    )
}

fn bench_classification_report(c: &mut Criterion) {
    let (preds, obs) = synthetic_snapshots(11, 4000, 80);
    let pool = single_thread_pool();

    let mut group = c.benchmark_group("classification_report_80_snapshots");
    group.sample_size(20);
    group.bench_function("single_thread", |b| {
        b.iter(|| {
            pool.install(|| {
                black_box(
                    classification_report(black_box(&preds), black_box(&obs), 0.15, 256).unwrap(),
                )
            })
        })
    });
    group.bench_function("all_threads", |b| {
        b.iter(|| {
            black_box(classification_report(black_box(&preds), black_box(&obs), 0.15, 256).unwrap())
        })
    });
    group.finish();
}

fn bench_gp_kernel(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (dim, m_train, m_query) = (4000, 120, 48);
    let train_x = DMatrix::from_fn(dim, m_train, |_, _| rng.random_range(-1.0..1.0));
    let train_y = DMatrix::from_fn(6, m_train, |_, _| rng.random_range(-1.0..1.0));
    let queries = DMatrix::from_fn(dim, m_query, |_, _| rng.random_range(-1.0..1.0));
    let pool = single_thread_pool();

    let mut group = c.benchmark_group("gp_field_kernel_120_points");
    group.sample_size(20);
    group.bench_function("single_thread", |b| {
        b.iter(|| {
            pool.install(|| {
                let model = gp_fit(black_box(&train_x), &train_y, 50.0, 1e-8).unwrap();
                black_box(gp_predict(&model, black_box(&queries)).unwrap())
            })
        })
    });
    group.bench_function("all_threads", |b| {
        b.iter(|| {
            let model = gp_fit(black_box(&train_x), &train_y, 50.0, 1e-8).unwrap();
            black_box(gp_predict(&model, black_box(&queries)).unwrap())
        })
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_generate_dataset,
    bench_classification_report,
    bench_gp_kernel
);
criterion_main!(benches);
