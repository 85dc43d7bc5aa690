use anosov_lab::config::RunConfig;
use anosov_lab::da::DaMode;
use anosov_lab::glue::{
    cross_orbit_report, delta_disjointness, good_side_coverage, pushed_foliation_angle,
    CrossOrbitParams, GluedManifoldModel, GluingMap, Pairing,
};
use anosov_lab::metric::BlownUpMetric;
use anosov_lab::plug::{BoundaryFoliationModel, PlugModel, SurfaceMesh};

fn plugs() -> (PlugModel, PlugModel) {
    let cfg = RunConfig::default();
    (
        cfg.plug(DaMode::Source).unwrap(),
        cfg.plug(DaMode::Sink).unwrap(),
    )
}

#[test]
fn gluing_map_group_identities() {
    let q = GluingMap::quarter_turn();
    assert_eq!(q.m, [[0, -1], [1, 0]]);
    // Inverse round trip on the torus.
    for (u, v) in [(0.1, 0.7), (0.9, 0.2), (0.5, 0.5)] {
        let (a, b) = q.apply(u, v);
        let (u2, v2) = q.inverse_apply(a, b);
        assert!((u2 - u).abs() < 1e-12 && (v2 - v).abs() < 1e-12);
    }
    let id = GluingMap::identity_map();
    assert_eq!(id.apply(0.3, 0.8), (0.3, 0.8));
    // Non-unimodular matrices are rejected.
    assert!(GluingMap::new([[2, 0], [0, 1]], [0.0, 0.0]).is_err());
}

#[test]
fn glued_manifold_needs_matched_boundaries() {
    let (att, rep) = plugs();
    let pairing = Pairing { exit_plug: 1, entrance_plug: 0, omega: GluingMap::quarter_turn() };
    assert!(GluedManifoldModel::new(vec![att.clone(), rep.clone()], vec![pairing]).is_ok());
    // Two attracting plugs cannot be glued: no exit boundary.
    let bad = Pairing { exit_plug: 1, entrance_plug: 0, omega: GluingMap::quarter_turn() };
    assert!(GluedManifoldModel::new(vec![att.clone(), att.clone()], vec![bad]).is_err());
    // An unpaired boundary is rejected.
    assert!(GluedManifoldModel::new(vec![att, rep], vec![]).is_err());
}

#[test]
fn identity_gluing_aligns_fields() {
    // Both tori carry the same boundary foliation, so the identity gluing
    // makes the pushed field tangent to the entrance field: min angle 0.
    let (att, _) = plugs();
    let fol = BoundaryFoliationModel::new(&att);
    let field = move |u: f64, _v: f64| fol.line_field(2.0 * std::f64::consts::PI * u);
    let angle = pushed_foliation_angle(&GluingMap::identity_map(), &field, &field, 64);
    assert!(angle < 1e-9, "identity gluing must align the fields, got {angle}");
}

#[test]
fn quarter_turn_has_tangencies() {
    // The quarter turn maps the circle leaves to horizontal parameter lines,
    // which the entrance foliation's turning leaves touch tangentially: the
    // minimum crossing angle is exactly zero. This is the honest geometric
    // obstruction recorded for the affine gluing family.
    let (att, rep) = plugs();
    let att_fol = BoundaryFoliationModel::new(&att);
    let rep_fol = BoundaryFoliationModel::new(&rep);
    let entrance = move |u: f64, _v: f64| att_fol.line_field(2.0 * std::f64::consts::PI * u);
    let exit = move |u: f64, _v: f64| rep_fol.line_field(2.0 * std::f64::consts::PI * u);
    let a64 = pushed_foliation_angle(&GluingMap::quarter_turn(), &exit, &entrance, 64);
    let a128 = pushed_foliation_angle(&GluingMap::quarter_turn(), &exit, &entrance, 128);
    assert!(a64 < 1e-9 && a128 < 1e-9, "tangency persists under refinement");
}

#[test]
fn quarter_turn_neighborhoods_meet() {
    // Transverse essential circle families always intersect, so the delta
    // neighborhoods cannot be disjoint for the affine quarter turn.
    let (att, rep) = plugs();
    let metric_a = BlownUpMetric::new(att.da().clone());
    let metric_r = BlownUpMetric::new(rep.da().clone());
    let mesh_a = SurfaceMesh::build(&att, &metric_a, 96, 24);
    let mesh_r = SurfaceMesh::build(&rep, &metric_r, 96, 24);
    let omega = GluingMap::quarter_turn();
    assert!(!delta_disjointness(&omega, &mesh_r, &mesh_a, 0.05, 0.05, 0.05, 96));
    assert!(!good_side_coverage(&omega, &mesh_a, &mesh_r, 0.05, 0.05, 96));
}

#[test]
fn shifted_gluing_separates_at_small_delta() {
    // At delta = 0.05 the bad bands cover too much of the torus for any
    // affine gluing to separate them; at delta = 0.01 a quarter shift moves
    // the circles clear of each other, so the checks can distinguish
    // gluings and widths.
    let (att, rep) = plugs();
    let metric_a = BlownUpMetric::new(att.da().clone());
    let metric_r = BlownUpMetric::new(rep.da().clone());
    let mesh_a = SurfaceMesh::build(&att, &metric_a, 96, 24);
    let mesh_r = SurfaceMesh::build(&rep, &metric_r, 96, 24);
    let omega = GluingMap::new([[1, 0], [0, 1]], [0.25, 0.0]).unwrap();
    assert!(delta_disjointness(&omega, &mesh_r, &mesh_a, 0.05, 0.01, 0.01, 96));
    assert!(good_side_coverage(&omega, &mesh_a, &mesh_r, 0.01, 0.01, 96));
    assert!(!delta_disjointness(&omega, &mesh_r, &mesh_a, 0.05, 0.05, 0.05, 96));
}

#[test]
fn cross_orbit_certificate_sandwich() {
    let (att, rep) = plugs();
    let metric_a = BlownUpMetric::new(att.da().clone());
    let metric_r = BlownUpMetric::new(rep.da().clone());
    let mesh = SurfaceMesh::build(&att, &metric_a, 96, 24);
    let omega = GluingMap::quarter_turn();
    let params = CrossOrbitParams {
        t_minus: 5.0,
        t_plus: 5.0,
        yt_h: 0.02,
        delta: 0.05,
        delta_prime: 0.05,
        big_c0: 12.0,
        small_c0: 55.0,
    };
    let cert = cross_orbit_report(
        &att,
        &rep,
        &omega,
        &metric_a,
        &metric_r,
        &mesh,
        &mesh,
        (0.25, 0.25),
        &params,
    )
    .unwrap();
    // The orbit spends t_minus + t_plus in the plugs plus both collars.
    assert!((cert.length - 12.0).abs() < 1e-9);
    assert!(cert.d_lo <= cert.d_hi + 1e-9, "bounds must bracket");
    assert!(cert.d_hi <= cert.length + 1e-9, "the orbit itself is a witness");
    assert!(cert.sandwich_ok && cert.pass);
    // A crossing point bad on both sides is rejected.
    let bad = cross_orbit_report(
        &att,
        &rep,
        &omega,
        &metric_a,
        &metric_r,
        &mesh,
        &mesh,
        (0.01, 0.01),
        &params,
    );
    assert!(bad.is_err());
}
