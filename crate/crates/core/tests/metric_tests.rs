use anosov_lab::da::{BlowupProfile, DaMap, DaMode, Deck};
use anosov_lab::metric::{
    length, verify_isometry, BlownUpMetric, Metric, Point3, Polyline3, SolvMetric,
};
use approx::assert_relative_eq;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn default_map() -> DaMap {
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let profile = BlowupProfile { r1: 0.06, r2: 0.40, theta0: 1.2 * lambda, ramp: 0.2 };
    DaMap::new([[2, 1], [1, 1]], profile, DaMode::Source).expect("default map")
}

fn sample_points(seed: u64, n: usize) -> Vec<(Point3, Vector3<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let p = Point3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..2.0),
            );
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            (p, v)
        })
        .collect()
}

#[test]
fn solv_tensor_oracle() {
    // diag(lambda^{-2t}, lambda^{2t}, 1).
    let m = SolvMetric { lambda: std::f64::consts::E };
    let g = m.tensor(Point3::new(0.3, -0.7, 0.5));
    assert_relative_eq!(g[(0, 0)], (-1.0f64).exp(), max_relative = 1e-14);
    assert_relative_eq!(g[(1, 1)], 1.0f64.exp(), max_relative = 1e-14);
    assert_relative_eq!(g[(2, 2)], 1.0, max_relative = 1e-14);
    assert!(g[(0, 1)].abs() + g[(0, 2)].abs() + g[(1, 2)].abs() < 1e-15);
}

#[test]
fn vertical_lines_have_unit_speed() {
    // Vertical segments measure exactly their parameter length, in both the
    // model metric and the pulled-back metric.
    let solv = SolvMetric { lambda: (3.0 + 5.0_f64.sqrt()) / 2.0 };
    let pulled = BlownUpMetric::new(default_map());
    for (x, y, t0, t1) in [(0.0, 0.0, 0.0, 2.0), (0.3, -0.4, -1.0, 2.5), (0.07, 0.01, 0.2, 7.2)] {
        let path = Polyline3::new(vec![Point3::new(x, y, t0), Point3::new(x, y, t1)]);
        assert_relative_eq!(length(&path, &solv), t1 - t0, max_relative = 1e-9);
        assert_relative_eq!(length(&path, &pulled), t1 - t0, max_relative = 1e-7);
    }
}

#[test]
fn horizontal_unstable_segment_oracle() {
    // A y-segment at level t has model length lambda^t |dy|.
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let solv = SolvMetric { lambda };
    for (t, dy) in [(0.0, 1.0), (1.5, 0.25), (-2.0, 3.0)] {
        let path = Polyline3::new(vec![
            Point3::new(0.2, 0.0, t),
            Point3::new(0.2, dy, t),
        ]);
        assert_relative_eq!(length(&path, &solv), lambda.powf(t) * dy, max_relative = 1e-9);
    }
}

#[test]
fn pullback_agrees_with_solv_outside_slabs() {
    // Away from every blow-up slab the pulled-back metric is the model one.
    let da = default_map();
    let lambda = da.lambda();
    let pulled = BlownUpMetric::new(da);
    let solv = SolvMetric { lambda };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 200 {
        let p = Point3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.0..1.0),
        );
        if pulled.in_blowup_slab(p) {
            continue;
        }
        let a = pulled.tensor(p);
        let b = solv.tensor(p);
        assert!((a - b).norm() < 1e-9 * b.norm(), "tensors differ at {p:?}");
        checked += 1;
    }
}

#[test]
fn tensor_is_positive_definite() {
    // Cholesky must succeed on a large sample: the pullback never degenerates.
    let pulled = BlownUpMetric::new(default_map());
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10_000 {
        let p = Point3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-3.0..3.0),
        );
        let g = pulled.tensor(p);
        assert!(
            nalgebra::Cholesky::new(g).is_some(),
            "tensor not positive definite at {p:?}"
        );
    }
}

#[test]
fn deck_transformations_are_isometries() {
    let da = default_map();
    let pulled = BlownUpMetric::new(da.clone());
    let samples = sample_points(5, 1000);
    for g in [Deck::Gamma, Deck::E1, Deck::E2] {
        let da2 = da.clone();
        let map = move |q: Point3| da2.deck_apply(g, q);
        let residual = verify_isometry(&map, &pulled, &samples);
        assert!(residual < 1e-5, "deck residual {residual} for {g:?}");
    }
}

#[test]
fn model_dilations_are_isometries() {
    // mu_a: (x, y, t) -> (lambda^a x, lambda^{-a} y, t + a) preserves the
    // model metric for every a.
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let solv = SolvMetric { lambda };
    let samples = sample_points(9, 1000);
    for a in [-1.0, 0.37, 2.0] {
        let map = move |q: Point3| {
            Point3::new(lambda.powf(a) * q.x, lambda.powf(-a) * q.y, q.t + a)
        };
        let residual = verify_isometry(&map, &solv, &samples);
        assert!(residual < 1e-6, "dilation residual {residual} at a = {a}");
    }
}

#[test]
fn cross_check_discrepancy_is_reported_not_zero() {
    // The alternative construction differs inside the slabs; the discrepancy
    // is finite and vanishes outside.
    let pulled = BlownUpMetric::new(default_map());
    let outside = Point3::new(0.5, 0.5, 0.5);
    if !pulled.in_blowup_slab(outside) {
        assert!(pulled.construction_discrepancy(outside) < 1e-9);
    }
    let inside = Point3::new(0.03, 0.0, 0.5);
    let d = pulled.construction_discrepancy(inside);
    assert!(d.is_finite());
}

#[test]
fn segment_quadrature_converges() {
    // Splitting every segment in two changes the result below relative 1e-6.
    let pulled = BlownUpMetric::new(default_map());
    let coarse = Polyline3::new(vec![
        Point3::new(-0.4, -0.3, 0.0),
        Point3::new(0.2, 0.5, 1.3),
    ]);
    let mut mid = coarse.points.clone();
    let a = coarse.points[0].to_vector();
    let b = coarse.points[1].to_vector();
    mid.insert(1, Point3::from_vector(0.5 * (a + b)));
    let fine = Polyline3::new(mid);
    let l0 = length(&coarse, &pulled);
    let l1 = length(&fine, &pulled);
    assert!((l0 - l1).abs() < 1e-6 * l0.max(1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn length_is_additive_and_symmetric(
        x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, t0 in -1.0f64..1.0,
        x1 in -1.0f64..1.0, y1 in -1.0f64..1.0, t1 in -1.0f64..1.0,
    ) {
        let pulled = BlownUpMetric::new(default_map());
        let p = Point3::new(x0, y0, t0);
        let q = Point3::new(x1, y1, t1);
        let fwd = length(&Polyline3::new(vec![p, q]), &pulled);
        let bwd = length(&Polyline3::new(vec![q, p]), &pulled);
        prop_assert!((fwd - bwd).abs() < 1e-7 * fwd.max(1e-12));
    }

    #[test]
    fn quad_matches_tensor(
        x in -1.0f64..1.0, y in -1.0f64..1.0, t in -1.0f64..1.0,
        vx in -1.0f64..1.0, vy in -1.0f64..1.0, vt in -1.0f64..1.0,
    ) {
        let pulled = BlownUpMetric::new(default_map());
        let p = Point3::new(x, y, t);
        let v = Vector3::new(vx, vy, vt);
        let direct = pulled.quad(p, v);
        let via_tensor = (v.transpose() * pulled.tensor(p) * v)[(0, 0)];
        prop_assert!((direct - via_tensor).abs() < 1e-10 * via_tensor.abs().max(1e-12));
    }
}
