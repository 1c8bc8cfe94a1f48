use super::*;
use crate::model::measurement::ring;
use crate::model::{CvStrategy, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_setup() -> (Grid2D, MeasurementConfig, FrequencySet) {
    let grid = Grid2D::from_bounds(-0.02, 0.02, -0.02, 0.02, 5e-3).unwrap();
    let m = MeasurementConfig::ring_with_arc(ring(0.72, 3, 0.0, 120.0), ring(0.76, 12, 0.0, 30.0), Some((60.0, 300.0)))
        .unwrap()
        .split_cv(2, CvStrategy::EveryKth)
        .unwrap();
    let f = FrequencySet::new(vec![2e9, 3e9]).unwrap();
    (grid, m, f)
}

fn small_op() -> SensingOperator {
    let (g, m, f) = small_setup();
    build_sensing_greens(&g, &m, &f, &BackgroundModel::free_space()).unwrap()
}

fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_blocks(op: &SensingOperator, seed: u64) -> Vec<Mat<c64>> {
    let (nq, np) = (op.measurement().n_receivers(), op.measurement().n_sources());
    (0..op.freqs().len()).map(|i| random_mat(nq, np, seed + i as u64)).collect()
}

fn inner(a: &[Mat<c64>], b: &[Mat<c64>]) -> c64 {
    let mut s = c64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        for p in 0..x.ncols() {
            for q in 0..x.nrows() {
                s += x[(q, p)].conj() * y[(q, p)];
            }
        }
    }
    s
}

#[test]
fn far_entries_decay_like_inverse_square_root() {
    let grid = Grid2D::from_bounds(-0.01, 0.01, -0.01, 0.01, 5e-3).unwrap();
    let c = grid.center(0);
    let m = MeasurementConfig::full(vec![Point::new(2.0, 0.0)], vec![Point::new(c.x + 0.5, c.y), Point::new(c.x + 2.0, c.y)])
        .unwrap();
    let f = FrequencySet::new(vec![4e9]).unwrap();
    let op = build_sensing_greens(&grid, &m, &f, &BackgroundModel::free_space()).unwrap();
    let ratio = op.kernels()[0][(1, 0)].norm() / op.kernels()[0][(0, 0)].norm();
    assert!((ratio - 0.5).abs() <= 0.025, "{ratio}");
}

#[test]
fn equidistant_receivers_see_equal_entries() {
    let grid = Grid2D::from_bounds(-0.01, 0.01, -0.01, 0.01, 5e-3).unwrap();
    let c = grid.center(5);
    let m = MeasurementConfig::full(
        vec![Point::new(2.0, 0.0)],
        vec![Point::new(c.x + 0.3, c.y), Point::new(c.x, c.y - 0.3)],
    )
    .unwrap();
    let op = build_sensing_greens(&grid, &m, &FrequencySet::new(vec![4e9]).unwrap(), &BackgroundModel::free_space()).unwrap();
    let k = &op.kernels()[0];
    assert!((k[(0, 5)] - k[(1, 5)]).norm() <= 1e-14 * k[(0, 5)].norm());
}

#[test]
fn receiver_inside_grid_is_rejected() {
    let (g, _, f) = small_setup();
    let m = MeasurementConfig::full(vec![Point::new(1.0, 0.0)], vec![Point::new(0.5, 0.0), Point::new(0.001, 0.0)]).unwrap();
    let e = build_sensing_greens(&g, &m, &f, &BackgroundModel::free_space()).unwrap_err();
    assert!(matches!(e, Error::ReceiverInsideGrid { index: 1 }));
}

#[test]
fn forward_of_zero_is_zero() {
    let op = small_op();
    let j = Mat::<c64>::zeros(op.n_cells(), op.n_columns());
    assert_eq!(blocks_norm(&op.apply_forward(j.as_ref(), RowSelection::All).unwrap()), 0.0);
}

#[test]
fn single_cell_source_returns_kernel_column() {
    let op = small_op();
    let mut j = Mat::<c64>::zeros(op.n_cells(), op.n_columns());
    let (n, p, i) = (7, 1, 1);
    let a = c64::new(0.5, -2.0);
    j[(n, op.column_index(p, i))] = a;
    let y = op.apply_forward(j.as_ref(), RowSelection::All).unwrap();
    let phi = op.phi(p, i);
    for (r, &q) in op.measurement().active(p).iter().enumerate() {
        assert_eq!(y[i][(q, p)], phi[(r, n)] * a);
    }
    assert_eq!(blocks_norm(&y[..1]), 0.0);
}

#[test]
fn forward_matches_triple_loop() {
    let op = small_op();
    let j = random_mat(op.n_cells(), op.n_columns(), 3);
    for rows in [RowSelection::All, RowSelection::Recon, RowSelection::Cv] {
        let y = op.apply_forward(j.as_ref(), rows).unwrap();
        let m = op.measurement();
        for i in 0..op.freqs().len() {
            for p in 0..m.n_sources() {
                for q in 0..m.n_receivers() {
                    let mut s = c64::new(0.0, 0.0);
                    if m.role(p, q).is_some_and(|r| rows.accepts(r)) {
                        for n in 0..op.n_cells() {
                            s += op.kernels()[i][(q, n)] * j[(n, op.column_index(p, i))];
                        }
                    }
                    assert!((y[i][(q, p)] - s).norm() <= 1e-12 * (1.0 + s.norm()));
                }
            }
        }
    }
}

#[test]
fn adjoint_identity() {
    let op = small_op();
    for seed in 0..5 {
        let j = random_mat(op.n_cells(), op.n_columns(), 10 + seed);
        let r = random_blocks(&op, 100 + seed);
        for rows in [RowSelection::All, RowSelection::Recon, RowSelection::Cv] {
            let lhs = inner(&op.apply_forward(j.as_ref(), rows).unwrap(), &r);
            let g = op.apply_adjoint(&r, rows).unwrap();
            let mut rhs = c64::new(0.0, 0.0);
            for c in 0..j.ncols() {
                for n in 0..j.nrows() {
                    rhs += j[(n, c)].conj() * g[(n, c)];
                }
            }
            assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-300), "{lhs} {rhs}");
        }
    }
}

#[test]
fn unit_residual_gives_conjugate_row() {
    let op = small_op();
    let (p, i) = (2, 0);
    let q = op.measurement().active(p)[3];
    let mut r: Vec<Mat<c64>> = random_blocks(&op, 0).iter().map(|b| Mat::zeros(b.nrows(), b.ncols())).collect();
    r[i][(q, p)] = c64::new(1.0, 0.0);
    let g = op.apply_adjoint(&r, RowSelection::All).unwrap();
    for n in 0..op.n_cells() {
        assert_eq!(g[(n, op.column_index(p, i))], op.kernels()[i][(q, n)].conj());
    }
    assert_eq!(op.apply_adjoint(&r.iter().map(|b| b * faer::Scale(c64::new(0.0, 0.0))).collect::<Vec<_>>(), RowSelection::All).unwrap().norm_l2(), 0.0);
}

#[test]
fn unmeasured_residual_entries_are_ignored() {
    let op = small_op();
    let m = op.measurement();
    let q = (0..m.n_receivers()).find(|&q| m.role(0, q).is_none()).unwrap();
    let mut r: Vec<Mat<c64>> = random_blocks(&op, 0).iter().map(|b| Mat::zeros(b.nrows(), b.ncols())).collect();
    r[0][(q, 0)] = c64::new(1.0, 0.0);
    assert_eq!(op.apply_adjoint(&r, RowSelection::All).unwrap().norm_l2(), 0.0);
}

#[test]
fn dimension_checks() {
    let op = small_op();
    let j = Mat::<c64>::zeros(op.n_cells(), op.n_columns() - 1);
    assert_eq!(op.apply_forward(j.as_ref(), RowSelection::All).unwrap_err().code(), "DIM_MISMATCH");
    let r = vec![Mat::<c64>::zeros(2, 2)];
    assert_eq!(op.apply_adjoint(&r, RowSelection::All).unwrap_err().code(), "DIM_MISMATCH");
}

#[test]
fn forward_is_linear() {
    let op = small_op();
    let j = random_mat(op.n_cells(), op.n_columns(), 5);
    let y1 = op.apply_forward(j.as_ref(), RowSelection::All).unwrap();
    let j2 = &j * faer::Scale(c64::new(2.0, 0.0));
    let y2 = op.apply_forward(j2.as_ref(), RowSelection::All).unwrap();
    for (a, b) in y1.iter().zip(&y2) {
        assert!((a * faer::Scale(c64::new(2.0, 0.0)) - b).norm_l2() <= 1e-12 * b.norm_l2());
    }
}

#[test]
fn cache_round_trip_and_rejections() {
    let op = small_op();
    let (g, m, f) = small_setup();
    let key = cache_key(&g, m.receivers(), &f, &BackgroundModel::free_space(), "greens");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("op.bin");
    save_kernels(&path, &key, op.kernels()).unwrap();
    let back = load_kernels(&path, &key).unwrap().unwrap();
    assert_eq!(back, op.kernels());
    assert!(load_kernels(&path, "other").unwrap().is_none());

    let mut bytes = std::fs::read(&path).unwrap();
    let last = bytes.len() - 3;
    bytes[last] ^= 0x40;
    std::fs::write(&path, &bytes).unwrap();
    assert_eq!(load_kernels(&path, &key).unwrap_err().code(), "CORRUPT_RECORD");

    std::fs::write(&path, b"GMMVOP/9\n{}\n").unwrap();
    assert_eq!(load_kernels(&path, &key).unwrap_err().code(), "VERSION_MISMATCH");
    let key2 = cache_key(&g, m.receivers(), &f, &BackgroundModel::free_space(), "fdfd");
    assert_ne!(key, key2);
}

fn column_errors(a: &SensingOperator, b: &SensingOperator) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.freqs().len() {
        for p in 0..a.measurement().n_sources() {
            let (x, y) = (a.phi(p, i), b.phi(p, i));
            for n in 0..x.ncols() {
                let e = (x.col(n) - y.col(n)).norm_l2() / y.col(n).norm_l2();
                worst = worst.max(e);
            }
        }
    }
    worst
}

#[test]
fn fdfd_route_agrees_with_greens_functions() {
    let (g, m, f) = small_setup();
    let bg = BackgroundModel::free_space();
    let facts = background_factorizations(&g, &bg, &f, &crate::model::SimulationSettings::default(), 1).unwrap();
    let fd = build_sensing_fdfd(&facts, &g, &m, &f, &bg).unwrap();
    let an = build_sensing_greens(&g, &m, &f, &bg).unwrap();
    let err = column_errors(&fd, &an);
    assert!(err <= 0.05, "{err}");
}

#[test]
fn fdfd_route_rejects_misaligned_grids() {
    let (g, m, f) = small_setup();
    let bg = BackgroundModel::free_space();
    let facts = background_factorizations(&g, &bg, &f, &crate::model::SimulationSettings::default(), 1).unwrap();
    let other = Grid2D::from_bounds(-0.025, 0.025, -0.025, 0.025, 5e-3).unwrap();
    let e = build_sensing_fdfd(&facts, &other, &m, &f, &bg).unwrap_err();
    assert_eq!(e.code(), "GRID_MISMATCH");
    assert!(background_factorizations(&g, &bg, &f, &crate::model::SimulationSettings::default(), 2).is_err());
}
