use super::*;
use crate::model::{rasterize_scene, BackgroundModel, Material, SceneSpec, Shape};
use faer::Mat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> Grid2D {
    Grid2D::new(0.0, 0.0, 1e-3, n, n).unwrap()
}

fn random_j(rows: usize, cols: usize, seed: u64) -> Mat<c64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Mat::from_fn(rows, cols, |_, _| c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn line(values: Vec<f64>) -> ImageField {
    ImageField::new(Grid2D::new(0.0, 0.0, 1.0, values.len(), 1).unwrap(), values, ImageKind::Gmmv).unwrap()
}

#[test]
fn gmmv_image_examples() {
    let g = grid(4);
    let zero = gmmv_image(&g, Mat::<c64>::zeros(16, 3).as_ref()).unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));
    assert_eq!(to_db(&zero).unwrap_err().code(), "ALL_ZERO_IMAGE");

    let mut j = Mat::<c64>::zeros(16, 3);
    j[(5, 0)] = c64::new(1.0, 1.0);
    j[(5, 2)] = c64::new(0.0, -3.0);
    let img = gmmv_image(&g, j.as_ref()).unwrap();
    for (n, v) in img.values.iter().enumerate() {
        assert_eq!(*v, if n == 5 { 11.0 } else { 0.0 });
    }
}

#[test]
fn gmmv_image_matches_double_sum() {
    let g = grid(5);
    let j = random_j(25, 6, 4);
    let img = gmmv_image(&g, j.as_ref()).unwrap();
    for n in 0..25 {
        let mut s = 0.0;
        for c in 0..6 {
            s += j[(n, c)].re.powi(2) + j[(n, c)].im.powi(2);
        }
        assert!((img.values[n] - s).abs() <= 1e-12 * s);
    }
    let mut perm = Mat::<c64>::zeros(25, 6);
    for c in 0..6 {
        perm.col_mut(c).copy_from(j.col(5 - c));
    }
    let p = gmmv_image(&g, perm.as_ref()).unwrap();
    for (a, b) in p.values.iter().zip(&img.values) {
        assert!((a - b).abs() <= 1e-14 * b);
    }
}

#[test]
fn db_examples() {
    let d = to_db(&line(vec![1.0, 0.1, 0.01])).unwrap();
    for (v, w) in d.values.iter().zip([0.0, -10.0, -20.0]) {
        assert!((v - w).abs() < 1e-12);
    }
    assert!(to_db(&line(vec![3.0; 4])).unwrap().values.iter().all(|&v| v == 0.0));
}

proptest! {
    #[test]
    fn db_is_scale_invariant(vals in proptest::collection::vec(0.0f64..10.0, 2..20), c in 1e-6f64..1e6) {
        prop_assume!(vals.iter().any(|&v| v > 0.0));
        let a = to_db(&line(vals.clone())).unwrap();
        let b = to_db(&line(vals.iter().map(|v| v * c).collect())).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(x == y || (x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn threshold_examples() {
    let d = to_db(&line(vec![0.2, 1.0, 0.05, 1.0])).unwrap();
    let peak = threshold_support(&d, 0.0);
    assert_eq!(peak, vec![false, true, false, true]);
    assert!(threshold_support(&d, f64::NEG_INFINITY).iter().all(|&b| b));
    assert!(threshold_support(&d, -10.0)[d.argmax()]);
}

#[test]
fn four_connectivity_keeps_diagonal_cells_apart() {
    let g = grid(3);
    let mut m = vec![false; 9];
    m[g.flatten(0, 0)] = true;
    m[g.flatten(1, 1)] = true;
    m[g.flatten(2, 1)] = true;
    let b = blobs(&g, &m);
    assert_eq!(b.len(), 2);
    assert_eq!(b[1], vec![g.flatten(1, 1), g.flatten(2, 1)]);
}

fn disk_truth(g: &Grid2D) -> ContrastMap {
    let mut s = SceneSpec::default();
    s.push(
        Shape::Circle {
            center: Point::new(0.01, 0.01),
            radius: 0.004,
        },
        Material::dielectric(2.0),
    );
    rasterize_scene(&s, g, BackgroundModel::free_space()).unwrap()
}

#[test]
fn metrics_for_exact_and_disjoint_masks() {
    let g = grid(20);
    let truth = disk_truth(&g);
    let t = truth.support();
    let img = ImageField::new(g, t.iter().map(|&b| if b { 1.0 } else { 1e-3 }).collect(), ImageKind::Gmmv).unwrap();
    let d = to_db(&img).unwrap();
    let m = support_metrics(&t, &truth, &d, 0.002).unwrap();
    assert_eq!(m.jaccard, 1.0);
    assert_eq!(m.blobs.len(), 1);
    assert!(m.blobs[0].centroid_error < 1e-15);
    assert!((m.mean_exterior_db + 30.0).abs() < 1e-9);
    assert!(m.peak_sidelobe_db <= 0.0);

    let disjoint: Vec<bool> = t.iter().map(|b| !b).collect();
    let m = support_metrics(&disjoint, &truth, &d, 0.002).unwrap();
    assert_eq!(m.jaccard, 0.0);
    assert_eq!(m, support_metrics(&disjoint, &truth, &d, 0.002).unwrap());

    let other = ImageField::new(grid(10), vec![1.0; 100], ImageKind::Lsm).unwrap();
    let e = support_metrics(&t, &truth, &to_db(&other).unwrap(), 0.002).unwrap_err();
    assert_eq!(e.code(), "GRID_MISMATCH");
}

#[test]
fn zeros_are_clamped_in_exterior_level() {
    let g = grid(20);
    let truth = disk_truth(&g);
    let t = truth.support();
    let img = ImageField::new(g, t.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(), ImageKind::Gmmv).unwrap();
    let m = support_metrics(&t, &truth, &to_db(&img).unwrap(), 0.002).unwrap();
    assert_eq!(m.mean_exterior_db, METRIC_FLOOR_DB);
}

#[test]
fn dilation_reaches_the_given_radius() {
    let g = grid(9);
    let mut m = vec![false; 81];
    m[g.flatten(4, 4)] = true;
    let d = dilate(&g, &m, 2e-3);
    assert_eq!(d.iter().filter(|&&b| b).count(), 13);
}

#[test]
fn csv_round_trip_and_shape() {
    let g = Grid2D::new(-0.075, -0.075, 2.5e-3, 60, 60).unwrap();
    let j = random_j(3600, 2, 9);
    let img = gmmv_image(&g, j.as_ref()).unwrap();
    let text = csv_grid_string(&img);
    assert_eq!(text.lines().count(), 61);
    let (g2, v) = parse_csv_grid(&text).unwrap();
    assert!(g2.same_as(&g));
    for (a, b) in v.iter().zip(&img.values) {
        assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-300));
    }
    assert_eq!(text, csv_grid_string(&img));
}

#[test]
fn pgm_of_constant_image_is_constant() {
    let img = line(vec![2.0; 6]);
    let bytes = pgm8_bytes(&img, DISPLAY_FLOOR_DB).unwrap();
    let header = b"P5\n6 1\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert!(bytes[header.len()..].iter().all(|&b| b == 255));
    let ramp = pgm8_bytes(&line(vec![1.0, 10f64.powf(-2.5), 1e-9]), DISPLAY_FLOOR_DB).unwrap();
    assert_eq!(&ramp[header.len()..], &[255, 0, 0]);
}

#[test]
fn export_writes_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let img = gmmv_image(&grid(4), random_j(16, 1, 2).as_ref()).unwrap();
    for (fmt, name) in [(ExportFormat::CsvGrid, "a.csv"), (ExportFormat::Pgm8, "a.pgm")] {
        let p = dir.path().join(name);
        export_field(&img, &p, fmt).unwrap();
        let first = std::fs::read(&p).unwrap();
        export_field(&img, &p, fmt).unwrap();
        assert_eq!(first, std::fs::read(&p).unwrap());
    }
    let e = export_field(&img, dir.path().join("missing/x.csv"), ExportFormat::CsvGrid).unwrap_err();
    assert_eq!(e.code(), "IO_ERROR");
}
