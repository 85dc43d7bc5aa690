use anosov_lab::da::{BlowupProfile, DaMap, DaMode};
use anosov_lab::dist::{
    calibrate_kappa, grid_distance, refine_path, yt_distance, DomainBox, YtSolver, YtTarget,
    KAPPA,
};
use anosov_lab::metric::{length, BlownUpMetric, Point3, Polyline3, SolvMetric};
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn default_metric() -> BlownUpMetric {
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let profile = BlowupProfile { r1: 0.06, r2: 0.40, theta0: 1.2 * lambda, ramp: 0.2 };
    BlownUpMetric::new(DaMap::new([[2, 1], [1, 1]], profile, DaMode::Source).unwrap())
}

#[test]
fn yt_distance_anchor_oracle() {
    // Unit-separated points on a horocycle at lambda = e:
    // d = arccosh(3/2) = 0.96242365.
    let p = Point3::new(0.0, 0.0, 0.0);
    let q = Point3::new(0.0, 1.0, 0.0);
    let d = yt_distance(p, q, std::f64::consts::E);
    assert_relative_eq!(d, 1.5f64.acosh(), max_relative = 1e-12);
    assert_relative_eq!(d, 0.9624236501192069, max_relative = 1e-10);
}

#[test]
fn yt_distance_vertical_oracle() {
    // Points on the same vertical line are joined by the flow line.
    for lambda in [std::f64::consts::E, (3.0 + 5.0_f64.sqrt()) / 2.0] {
        let p = Point3::new(0.0, 0.4, 0.0);
        let q = Point3::new(0.0, 0.4, 3.0);
        // The hyperbolic distance between (y, t) levels is at least |dt| but
        // equals it only at dy = 0 after the w-substitution.
        let d = yt_distance(p, q, lambda);
        assert_relative_eq!(d, 3.0, max_relative = 1e-9);
    }
}

#[test]
fn yt_distance_symmetry_and_triangle() {
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..200 {
        let p = Point3::new(0.0, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let q = Point3::new(0.0, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let r = Point3::new(0.0, rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let dpq = yt_distance(p, q, lambda);
        let dqp = yt_distance(q, p, lambda);
        assert_relative_eq!(dpq, dqp, max_relative = 1e-10);
        let dqr = yt_distance(q, r, lambda);
        let dpr = yt_distance(p, r, lambda);
        assert!(dpr <= dpq + dqr + 1e-9, "triangle inequality violated");
    }
}

#[test]
fn grid_matches_closed_form_within_band() {
    // The 3-D solver against the closed form on the model metric.
    let lambda = std::f64::consts::E;
    let metric = SolvMetric { lambda };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..6 {
        let p = Point3::new(0.0, rng.gen_range(-0.8..0.8), rng.gen_range(-0.5..0.5));
        let q = Point3::new(0.0, rng.gen_range(-0.8..0.8), rng.gen_range(-0.5..0.5));
        let exact = yt_distance(p, q, lambda);
        if exact < 0.3 {
            continue;
        }
        let bbox = DomainBox::around(p, q, Point3::new(0.3, 1.0, exact + 0.5));
        let got = grid_distance(p, q, &metric, bbox, 0.05, None).unwrap();
        let rel = (got.value - exact).abs() / exact;
        assert!(rel <= KAPPA, "relative error {rel} above the calibrated band");
        assert!(got.lower_bound <= exact + 1e-9);
        assert!(got.upper_bound >= exact - 1e-9 || got.value >= exact * (1.0 - KAPPA));
    }
}

#[test]
fn grid_bounds_bracket_value() {
    let metric = default_metric();
    let p = Point3::new(0.1, -0.2, 0.0);
    let q = Point3::new(0.3, 0.4, 1.2);
    let bbox = DomainBox::around(p, q, Point3::new(0.6, 0.6, 0.8));
    let d = grid_distance(p, q, &metric, bbox, 0.08, None).unwrap();
    assert!(d.lower_bound <= d.value && d.value <= d.upper_bound + 1e-12);
    // The witness joins the true endpoints and realizes the reported value.
    let wlen = length(&d.witness, &metric);
    assert_relative_eq!(wlen, d.value, max_relative = 1e-6);
    let w0 = d.witness.points.first().unwrap().to_vector();
    let w1 = d.witness.points.last().unwrap().to_vector();
    assert!((w0 - p.to_vector()).norm() < 1e-12);
    assert!((w1 - q.to_vector()).norm() < 1e-12);
}

#[test]
fn yt_solver_agrees_with_closed_form() {
    let lambda = (3.0 + 5.0_f64.sqrt()) / 2.0;
    let solver = YtSolver::new(lambda, (-1.5, 1.5), (-1.5, 1.5), 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let (y0, t0) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (y1, t1) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let exact = yt_distance(
            Point3::new(0.0, y0, t0),
            Point3::new(0.0, y1, t1),
            lambda,
        );
        if exact < 0.2 {
            continue;
        }
        let got = solver
            .distance(y0, t0, &YtTarget::Point(y1, t1))
            .unwrap();
        let rel = (got.value - exact).abs() / exact;
        assert!(rel <= KAPPA, "2-D solver error {rel}");
    }
}

#[test]
fn refine_path_never_lengthens() {
    let metric = default_metric();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..5 {
        let mut points = Vec::new();
        for k in 0..=8 {
            let s = k as f64 / 8.0;
            points.push(Point3::new(
                s + 0.1 * rng.gen_range(-1.0..1.0),
                0.2 * rng.gen_range(-1.0..1.0),
                s,
            ));
        }
        let path = Polyline3::new(points);
        let before = length(&path, &metric);
        let refined = refine_path(&path, &metric);
        let after = length(&refined, &metric);
        assert!(after <= before + 1e-9, "refinement lengthened the path");
        // Endpoints are fixed.
        let p0 = path.points.first().unwrap().to_vector();
        let r0 = refined.points.first().unwrap().to_vector();
        assert!((p0 - r0).norm() < 1e-15);
    }
}

#[test]
fn kappa_calibration_holds_on_model_pairs() {
    // The worst measured relative error justifies the pinned band.
    let lambda = std::f64::consts::E;
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let mut pairs = Vec::new();
    while pairs.len() < 5 {
        let p = Point3::new(0.0, rng.gen_range(-0.7..0.7), rng.gen_range(-0.4..0.4));
        let q = Point3::new(0.0, rng.gen_range(-0.7..0.7), rng.gen_range(-0.4..0.4));
        if yt_distance(p, q, lambda) > 0.4 {
            pairs.push((p, q));
        }
    }
    let worst = calibrate_kappa(lambda, 0.05, &pairs).unwrap();
    assert!(worst <= KAPPA, "calibration {worst} exceeds the pinned band");
}

#[test]
fn out_of_box_endpoint_is_an_error() {
    let metric = SolvMetric { lambda: 2.0 };
    let p = Point3::new(0.0, 0.0, 0.0);
    let q = Point3::new(0.0, 5.0, 0.0);
    let bbox = DomainBox::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0));
    assert!(grid_distance(p, q, &metric, bbox, 0.1, None).is_err());
}
