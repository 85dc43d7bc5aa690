//! Plug gluing along boundary tori: the torus gluing map, the pushed
//! boundary-foliation transversality check, the disjointness of the two bad
//! regions, and length-vs-distance certificates for orbits crossing a torus.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::da::DaMode;
use crate::metric::{length, Metric, Point3, Polyline3};
use crate::plug::{PlugModel, SurfaceMesh, TubeModel};
use crate::qg::{companion_route_bound, QgError};

#[derive(Debug, Error)]
pub enum GlueError {
    #[error("gluing matrix determinant must be +-1, got {0}")]
    BadDeterminant(i64),
    #[error("plug {0} has the wrong mode for its role in the pairing")]
    WrongMode(usize),
    #[error("plug {0} is not paired exactly once")]
    UnpairedBoundary(usize),
    #[error("crossing point lies in the bad region on both sides of the torus")]
    BadBothSides,
    #[error(transparent)]
    Qg(#[from] QgError),
}

/// An affine torus diffeomorphism in the normalized (u, v) parameters of the
/// boundary: x -> M x + shift (mod 1), with M an integer matrix of
/// determinant +-1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GluingMap {
    pub m: [[i64; 2]; 2],
    pub shift: [f64; 2],
}

impl GluingMap {
    pub fn new(m: [[i64; 2]; 2], shift: [f64; 2]) -> Result<Self, GlueError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() != 1 {
            return Err(GlueError::BadDeterminant(det));
        }
        Ok(Self { m, shift })
    }

    /// The quarter-turn gluing of the classical two-plug construction.
    pub fn quarter_turn() -> Self {
        Self { m: [[0, -1], [1, 0]], shift: [0.0, 0.0] }
    }

    pub fn identity_map() -> Self {
        Self { m: [[1, 0], [0, 1]], shift: [0.0, 0.0] }
    }

    pub fn differential(&self) -> Matrix2<f64> {
        Matrix2::new(
            self.m[0][0] as f64,
            self.m[0][1] as f64,
            self.m[1][0] as f64,
            self.m[1][1] as f64,
        )
    }

    pub fn apply(&self, u: f64, v: f64) -> (f64, f64) {
        let w = self.differential() * Vector2::new(u, v) + Vector2::new(self.shift[0], self.shift[1]);
        (w.x.rem_euclid(1.0), w.y.rem_euclid(1.0))
    }

    pub fn inverse_apply(&self, u: f64, v: f64) -> (f64, f64) {
        let det = (self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]) as f64;
        let inv = Matrix2::new(
            self.m[1][1] as f64,
            -self.m[0][1] as f64,
            -self.m[1][0] as f64,
            self.m[0][0] as f64,
        ) / det;
        let w = inv * Vector2::new(u - self.shift[0], v - self.shift[1]);
        (w.x.rem_euclid(1.0), w.y.rem_euclid(1.0))
    }
}

/// One exit-to-entrance identification.
#[derive(Debug, Clone)]
pub struct Pairing {
    pub exit_plug: usize,
    pub entrance_plug: usize,
    pub omega: GluingMap,
}

/// Plugs glued along their boundary tori. Repelling plugs contribute exit
/// boundaries, attracting plugs entrance boundaries, each paired exactly
/// once.
#[derive(Debug, Clone)]
pub struct GluedManifoldModel {
    pub plugs: Vec<PlugModel>,
    pub pairings: Vec<Pairing>,
}

impl GluedManifoldModel {
    pub fn new(plugs: Vec<PlugModel>, pairings: Vec<Pairing>) -> Result<Self, GlueError> {
        let mut exit_count = vec![0usize; plugs.len()];
        let mut entrance_count = vec![0usize; plugs.len()];
        for pairing in &pairings {
            if plugs[pairing.exit_plug].mode != DaMode::Sink {
                return Err(GlueError::WrongMode(pairing.exit_plug));
            }
            if plugs[pairing.entrance_plug].mode != DaMode::Source {
                return Err(GlueError::WrongMode(pairing.entrance_plug));
            }
            exit_count[pairing.exit_plug] += 1;
            entrance_count[pairing.entrance_plug] += 1;
        }
        for (i, plug) in plugs.iter().enumerate() {
            let expected = match plug.mode {
                DaMode::Sink => exit_count[i] == 1 && entrance_count[i] == 0,
                DaMode::Source => entrance_count[i] == 1 && exit_count[i] == 0,
            };
            if !expected {
                return Err(GlueError::UnpairedBoundary(i));
            }
        }
        Ok(Self { plugs, pairings })
    }
}

/// Minimum unsigned crossing angle between the pushed-forward exit line field
/// and the entrance line field over an n x n parameter grid.
pub fn pushed_foliation_angle(
    omega: &GluingMap,
    exit_field: &dyn Fn(f64, f64) -> (f64, f64),
    entrance_field: &dyn Fn(f64, f64) -> (f64, f64),
    n: usize,
) -> f64 {
    let d = omega.differential();
    let mut min_angle = f64::INFINITY;
    for j in 0..n {
        for i in 0..n {
            let u = i as f64 / n as f64;
            let v = j as f64 / n as f64;
            let (eu, ev) = exit_field(u, v);
            let pushed = d * Vector2::new(eu, ev);
            let (u2, v2) = omega.apply(u, v);
            let (su, sv) = entrance_field(u2, v2);
            let ent = Vector2::new(su, sv);
            let cosine = (pushed.dot(&ent) / (pushed.norm() * ent.norm())).abs().min(1.0);
            min_angle = min_angle.min(cosine.acos());
        }
    }
    min_angle
}

// Half-cell safety margin for grid checks on the boundary torus, in surface
// metric units: the metric circumference of each level curve is 2 pi r_tube
// and the flow direction has unit norm.
fn half_cell_margin(r_tube: f64, n: usize) -> f64 {
    0.5 * ((2.0 * PI * r_tube / n as f64).powi(2) + (1.3 / n as f64).powi(2)).sqrt()
}

/// True iff the image under the gluing map of the exit-side delta
/// neighborhood of its circle leaves misses the entrance-side delta-prime
/// neighborhood, checked on an n x n grid with a half-cell margin.
pub fn delta_disjointness(
    omega: &GluingMap,
    exit_mesh: &SurfaceMesh,
    entrance_mesh: &SurfaceMesh,
    r_tube: f64,
    delta: f64,
    delta_prime: f64,
    n: usize,
) -> bool {
    let margin = half_cell_margin(r_tube, n);
    for j in 0..n {
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = (j as f64 + 0.5) / n as f64;
            let exit_bad = exit_mesh.bad_region_test(2.0 * PI * u, v, delta + margin);
            if !exit_bad {
                continue;
            }
            let (u2, v2) = omega.apply(u, v);
            if entrance_mesh.bad_region_test(2.0 * PI * u2, v2, delta_prime + margin) {
                return false;
            }
        }
    }
    true
}

/// True iff every grid point of the gluing torus is outside the bad region
/// on at least one side.
pub fn good_side_coverage(
    omega: &GluingMap,
    entrance_mesh: &SurfaceMesh,
    exit_mesh: &SurfaceMesh,
    delta: f64,
    delta_prime: f64,
    n: usize,
) -> bool {
    for j in 0..n {
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            let v = (j as f64 + 0.5) / n as f64;
            let entrance_bad = entrance_mesh.bad_region_test(2.0 * PI * u, v, delta);
            let (u2, v2) = omega.inverse_apply(u, v);
            let exit_bad = exit_mesh.bad_region_test(2.0 * PI * u2, v2, delta_prime);
            if entrance_bad && exit_bad {
                return false;
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseKind {
    CaseI,
    CaseII,
}

/// Certificate for one orbit crossing the gluing torus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossOrbitCertificate {
    pub case: CaseKind,
    pub t_minus: f64,
    pub t_plus: f64,
    pub length: f64,
    pub d_lo: f64,
    pub d_hi: f64,
    pub big_c0: f64,
    pub small_c0: f64,
    pub sandwich_ok: bool,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CrossOrbitParams {
    pub t_minus: f64,
    pub t_plus: f64,
    pub yt_h: f64,
    pub delta: f64,
    pub delta_prime: f64,
    pub big_c0: f64,
    pub small_c0: f64,
}

// Length of the parameter-line path between two points of the boundary
// torus, measured on the surface; a valid connecting path inside the glued
// manifold.
fn surface_gap(tube: &TubeModel, a: (f64, f64), b: (f64, f64), metric: &dyn Metric) -> f64 {
    let (ua, va) = a;
    let (mut ub, mut vb) = b;
    // Shortest parameter representatives.
    if ub - ua > 0.5 {
        ub -= 1.0;
    } else if ua - ub > 0.5 {
        ub += 1.0;
    }
    if vb - va > 0.5 {
        vb -= 1.0;
    } else if va - vb > 0.5 {
        vb += 1.0;
    }
    let n = 24;
    let mut points = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let s = k as f64 / n as f64;
        let u = ua + s * (ub - ua);
        let v = va + s * (vb - va);
        points.push(tube.surface_point(2.0 * PI * u, v));
    }
    length(&Polyline3::new(points), metric)
}

/// Builds the through-orbit at a crossing point b (entrance-side parameters
/// (u, v)) and certifies its length against the composed constants using a
/// separating-torus lower bound and an explicit witness upper bound.
///
/// The lower bound: any connecting path reaches the attracting torus from q
/// and crosses both unit collars, so its length is at least the one-sided
/// distance plus 2; the one-sided distance is itself bounded below by the
/// 2-D Solv distance of the yt-plane shadow. The upper bound is the shorter
/// of the orbit itself and the companion-route detour through the torus.
#[allow(clippy::too_many_arguments)]
pub fn cross_orbit_report(
    attracting: &PlugModel,
    repelling: &PlugModel,
    omega: &GluingMap,
    att_metric: &dyn Metric,
    rep_metric: &dyn Metric,
    att_mesh: &SurfaceMesh,
    rep_mesh: &SurfaceMesh,
    b_uv: (f64, f64),
    params: &CrossOrbitParams,
) -> Result<CrossOrbitCertificate, GlueError> {
    let (u, v) = b_uv;
    let (u_exit, v_exit) = omega.inverse_apply(u, v);
    let att_bad = att_mesh.bad_region_test(2.0 * PI * u, v, params.delta);
    let rep_bad = rep_mesh.bad_region_test(2.0 * PI * u_exit, v_exit, params.delta_prime);
    if att_bad && rep_bad {
        return Err(GlueError::BadBothSides);
    }

    let b_att = attracting.tube.surface_point(2.0 * PI * u, v);
    let q = attracting.flow(b_att, params.t_plus);
    let b_rep = repelling.tube.surface_point(2.0 * PI * u_exit, v_exit);
    // In the repelling plug's own coordinates the interior also lies forward
    // of the boundary; time reversal is bookkeeping on the glued flow only.
    let q_prime = repelling.flow(b_rep, params.t_minus);

    let collar_total = attracting.collar_thickness + repelling.collar_thickness;
    let orbit_length = params.t_minus + params.t_plus + collar_total;

    let d_att = companion_route_bound(attracting, att_metric, q, params.yt_h)?;
    let d_rep = companion_route_bound(repelling, rep_metric, q_prime, params.yt_h)?;
    let d_lo = d_att.lower_bound.max(d_rep.lower_bound) + collar_total;

    // Witness route: q down to its torus, across the torus to the image of
    // the repelling-side witness endpoint, through the collars, then up to
    // q_prime.
    let z_att = *d_att.witness.points.last().unwrap();
    let z_rep = *d_rep.witness.points.last().unwrap();
    let z_att_uv = yt_trace_params(z_att);
    let z_rep_uv = yt_trace_params(z_rep);
    let z_rep_on_att = omega.apply(z_rep_uv.0, z_rep_uv.1);
    let gap = surface_gap(&attracting.tube, z_att_uv, z_rep_on_att, att_metric);
    let route = d_att.upper_bound + gap + collar_total + d_rep.upper_bound;
    let d_hi = orbit_length.min(route);

    let case = if params.t_plus >= params.t_minus { CaseKind::CaseI } else { CaseKind::CaseII };
    let pass = orbit_length <= params.big_c0 * d_lo + params.small_c0 + 1e-9;
    let sandwich_ok = d_lo <= d_hi + 1e-9;
    Ok(CrossOrbitCertificate {
        case,
        t_minus: params.t_minus,
        t_plus: params.t_plus,
        length: orbit_length,
        d_lo,
        d_hi,
        big_c0: params.big_c0,
        small_c0: params.small_c0,
        sandwich_ok,
        pass,
    })
}

// Torus parameters of a point on the yt-plane trace of the tube boundary.
fn yt_trace_params(z: Point3) -> (f64, f64) {
    let u = if z.y >= 0.0 { 0.25 } else { 0.75 };
    (u, z.t.rem_euclid(1.0))
}
