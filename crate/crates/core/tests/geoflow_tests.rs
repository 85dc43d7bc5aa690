use anosov_lab::geoflow::{
    base_length, flow_trajectory, h2_geodesic, sasaki_length, transfer_constants,
    verify_flowline_minimality, TangentCurve, TangentPoint,
};
use approx::assert_relative_eq;
use nalgebra::Vector2;

#[test]
fn vertical_geodesic_oracle() {
    // From (0, 1) straight up: y(T) = e^T, unit speed throughout.
    let p = Vector2::new(0.0, 1.0);
    let v = Vector2::new(0.0, 1.0);
    for t in [0.5, 1.0, 3.0] {
        let g = h2_geodesic(p, v, t);
        assert!(g.p.x.abs() < 1e-12);
        assert_relative_eq!(g.p.y, t.exp(), max_relative = 1e-12);
        // Unit speed: |v| / y = 1.
        assert_relative_eq!(g.v.norm() / g.p.y, 1.0, max_relative = 1e-12);
    }
}

#[test]
fn semicircle_geodesic_oracle() {
    // From (0, 1) horizontally: the unit semicircle; endpoints tend to +-1.
    let p = Vector2::new(0.0, 1.0);
    let v = Vector2::new(1.0, 0.0);
    let g = h2_geodesic(p, v, 8.0);
    assert!((g.p.x - 1.0).abs() < 1e-3, "forward endpoint {:?}", g.p);
    assert!(g.p.y < 1e-3);
    let gb = h2_geodesic(p, -v, 8.0);
    assert!((gb.p.x + 1.0).abs() < 1e-3);
    // The orbit stays on the unit circle.
    for t in [0.3, 1.0, 2.5] {
        let gt = h2_geodesic(p, v, t);
        assert_relative_eq!(gt.p.norm(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(gt.v.norm() / gt.p.y, 1.0, max_relative = 1e-10);
    }
}

#[test]
fn geodesic_is_additive_in_time() {
    let p = Vector2::new(0.3, 0.8);
    let v = Vector2::new(0.6, -0.2);
    let a = h2_geodesic(p, v, 1.7);
    let b = h2_geodesic(a.p, a.v, 0.8);
    let c = h2_geodesic(p, v, 2.5);
    assert!((b.p - c.p).norm() < 1e-9);
    assert!((b.v - c.v).norm() < 1e-9);
}

#[test]
fn flow_trajectory_base_length_is_time() {
    // The base projection of the geodesic flow line has hyperbolic length T.
    let traj = flow_trajectory(Vector2::new(0.1, 1.2), Vector2::new(0.5, 0.5), 3.0, 400);
    assert_relative_eq!(base_length(&traj), 3.0, max_relative = 1e-5);
    // The fiber component is parallel, so the bundle length equals the base
    // length for the flow line.
    assert_relative_eq!(sasaki_length(&traj), base_length(&traj), max_relative = 1e-4);
}

#[test]
fn zero_amplitude_competitors_tie_exactly() {
    let report = verify_flowline_minimality(
        Vector2::new(0.0, 1.0),
        Vector2::new(0.4, 0.6),
        3.0,
        20,
        0.0,
        99,
    );
    assert!(report.min_margin.abs() < 1e-8);
    assert!(report.all_at_least_flow || report.min_margin > -1e-8);
}

#[test]
fn flow_line_beats_perturbed_competitors() {
    // 100 competitors each on 5 trajectories at T = 3.
    let starts = [
        (Vector2::new(0.0, 1.0), Vector2::new(0.0, 1.0)),
        (Vector2::new(0.0, 1.0), Vector2::new(1.0, 0.0)),
        (Vector2::new(0.5, 0.7), Vector2::new(-0.3, 0.8)),
        (Vector2::new(-1.0, 2.0), Vector2::new(0.6, -0.4)),
        (Vector2::new(0.2, 0.5), Vector2::new(0.9, 0.1)),
    ];
    for (i, (p, v)) in starts.iter().enumerate() {
        let report = verify_flowline_minimality(*p, *v, 3.0, 100, 0.05, 7 + i as u64);
        assert!(
            report.all_at_least_flow,
            "competitor beat the flow line at start {i}: margin {}",
            report.min_margin
        );
        assert!(report.median_margin > 0.0);
    }
}

#[test]
fn sasaki_length_dominates_base_length() {
    // Any fiber motion only adds length.
    let traj = flow_trajectory(Vector2::new(0.0, 1.0), Vector2::new(0.3, 0.9), 2.0, 300);
    let mut wobbled = Vec::new();
    for (i, tp) in traj.points.iter().enumerate() {
        let s = i as f64 / (traj.points.len() - 1) as f64;
        let extra = Vector2::new((6.0 * s).sin(), (5.0 * s).cos()) * 0.3 * (std::f64::consts::PI * s).sin();
        wobbled.push(TangentPoint::new(tp.p, tp.v + extra));
    }
    let wobbly = TangentCurve::new(traj.params.clone(), wobbled);
    assert!(sasaki_length(&wobbly) >= base_length(&wobbly) - 1e-12);
    assert!(sasaki_length(&wobbly) > sasaki_length(&traj));
}

#[test]
fn transfer_constants_exact() {
    let (a0, a1) = transfer_constants(2.0, 1.0, 3.0, 1.0).unwrap();
    assert_eq!((a0, a1), (6.0, 4.0));
    assert!(transfer_constants(0.0, 1.0, 1.0, 1.0).is_err());
}
