//! The geodesic flow on the tangent bundle of the hyperbolic plane with the
//! projection-built (Sasaki-type) metric: closed-form geodesics, tangent-curve
//! lengths, flow-line minimality experiments, and the quasi-isometry
//! constant-transfer arithmetic.

use nalgebra::Vector2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeoflowError {
    #[error("constant-transfer inputs must satisfy eta1, eta2, eta3 > 0 and eta4 >= 0")]
    DomainError,
}

/// A point of the tangent bundle of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentPoint {
    pub p: Vector2<f64>,
    pub v: Vector2<f64>,
}

impl TangentPoint {
    pub fn new(p: Vector2<f64>, v: Vector2<f64>) -> Self {
        debug_assert!(p.y > 0.0, "base point must lie in the upper half-plane");
        Self { p, v }
    }

    /// Hyperbolic norm of the fiber vector at the base point.
    pub fn fiber_norm(&self) -> f64 {
        self.v.norm() / self.p.y
    }
}

/// A sampled curve in the tangent bundle.
#[derive(Debug, Clone)]
pub struct TangentCurve {
    pub params: Vec<f64>,
    pub points: Vec<TangentPoint>,
}

impl TangentCurve {
    pub fn new(params: Vec<f64>, points: Vec<TangentPoint>) -> Self {
        debug_assert!(params.len() == points.len() && params.len() >= 2);
        Self { params, points }
    }
}

/// Unit-speed hyperbolic geodesic through (p, v) evaluated at arclength t,
/// together with its velocity: the trajectory of the geodesic flow.
///
/// Closed form: a vertical line when v is vertical, otherwise the semicircle
/// orthogonal to the axis, parametrized as x = xi + R tanh(s), y = R sech(s).
pub fn h2_geodesic(p: Vector2<f64>, v: Vector2<f64>, t: f64) -> TangentPoint {
    debug_assert!(p.y > 0.0 && v.norm() > 0.0);
    if v.x.abs() <= 1e-14 * v.norm() {
        let sigma = v.y.signum();
        let y = p.y * (sigma * t).exp();
        return TangentPoint::new(Vector2::new(p.x, y), Vector2::new(0.0, sigma * y));
    }
    // Center of the orthogonal semicircle through p tangent to v.
    let xi = p.x + p.y * v.y / v.x;
    let r = ((p.x - xi).powi(2) + p.y * p.y).sqrt();
    let s0 = ((p.x - xi) / r).atanh();
    // Velocity in the s-parametrization is y * (sech s, -tanh s); pick the
    // branch direction matching v.
    let dir0 = Vector2::new(1.0 / s0.cosh(), -s0.tanh());
    let sigma = if dir0.dot(&v) >= 0.0 { 1.0 } else { -1.0 };
    let s = s0 + sigma * t;
    let y = r / s.cosh();
    let pt = Vector2::new(xi + r * s.tanh(), y);
    let vel = Vector2::new(sigma * y / s.cosh(), -sigma * y * s.tanh());
    TangentPoint::new(pt, vel)
}

// Covariant derivative of the fiber field along the base path, using the
// upper-half-plane Christoffel symbols.
fn covariant_derivative(
    p: Vector2<f64>,
    pdot: Vector2<f64>,
    v: Vector2<f64>,
    vdot: Vector2<f64>,
) -> Vector2<f64> {
    let y = p.y;
    Vector2::new(
        vdot.x - (pdot.x * v.y + pdot.y * v.x) / y,
        vdot.y + (pdot.x * v.x - pdot.y * v.y) / y,
    )
}

/// Length of a tangent curve under the projection-built metric: quadrature of
/// sqrt(|base velocity|^2 + |covariant fiber derivative|^2), both in the
/// hyperbolic norm, with central differences at the sample nodes.
pub fn sasaki_length(curve: &TangentCurve) -> f64 {
    let n = curve.params.len();
    let mut integrand = vec![0.0; n];
    for i in 0..n {
        let (il, ir) = (i.saturating_sub(1), (i + 1).min(n - 1));
        let dt = curve.params[ir] - curve.params[il];
        let pdot = (curve.points[ir].p - curve.points[il].p) / dt;
        let vdot = (curve.points[ir].v - curve.points[il].v) / dt;
        let here = curve.points[i];
        let dv = covariant_derivative(here.p, pdot, here.v, vdot);
        let y = here.p.y;
        integrand[i] = ((pdot.norm_squared() + dv.norm_squared()).sqrt()) / y;
    }
    let mut total = 0.0;
    for i in 0..n - 1 {
        let dt = curve.params[i + 1] - curve.params[i];
        total += 0.5 * (integrand[i] + integrand[i + 1]) * dt;
    }
    total
}

/// Hyperbolic length of the base projection of a tangent curve.
pub fn base_length(curve: &TangentCurve) -> f64 {
    let n = curve.params.len();
    let mut total = 0.0;
    for i in 0..n - 1 {
        let a = curve.points[i].p;
        let b = curve.points[i + 1].p;
        let mid_y = 0.5 * (a.y + b.y);
        total += (b - a).norm() / mid_y;
    }
    total
}

/// Samples the geodesic-flow trajectory from (p, v) over [0, t_end].
pub fn flow_trajectory(p: Vector2<f64>, v: Vector2<f64>, t_end: f64, n: usize) -> TangentCurve {
    let params: Vec<f64> = (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect();
    let points = params.iter().map(|&t| h2_geodesic(p, v, t)).collect();
    TangentCurve::new(params, points)
}

/// Outcome of the flow-line minimality experiment.
#[derive(Debug, Clone)]
pub struct MinimalityReport {
    pub flow_length: f64,
    pub amplitude: f64,
    pub n_competitors: usize,
    pub min_margin: f64,
    pub median_margin: f64,
    pub all_at_least_flow: bool,
    pub seed: u64,
}

/// Compares the flow trajectory against random same-endpoint competitors in
/// the tangent bundle: smooth perturbations of base and fiber that vanish at
/// both endpoints. Margins are competitor length minus flow length.
pub fn verify_flowline_minimality(
    p: Vector2<f64>,
    v: Vector2<f64>,
    t_end: f64,
    n_competitors: usize,
    amplitude: f64,
    seed: u64,
) -> MinimalityReport {
    let n = 400;
    let flow = flow_trajectory(p, v, t_end, n);
    let flow_length = sasaki_length(&flow);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut margins = Vec::with_capacity(n_competitors);
    for _ in 0..n_competitors {
        // Low-mode sine perturbations, zero at the endpoints in both base and
        // fiber so every competitor shares the flow line's endpoints in TH.
        let coeffs: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut points = Vec::with_capacity(n);
        for (i, &t) in flow.params.iter().enumerate() {
            let u = t / t_end;
            let env = (std::f64::consts::PI * u).sin();
            let bump = |k: usize| (std::f64::consts::PI * u * (k + 1) as f64).sin();
            let base = flow.points[i];
            let dp = Vector2::new(
                amplitude * env * (coeffs[0] * bump(0) + coeffs[1] * bump(1)),
                amplitude * env * (coeffs[2] * bump(0) + coeffs[3] * bump(1)),
            );
            let dv = Vector2::new(
                amplitude * env * (coeffs[4] * bump(0) + coeffs[5] * bump(1)),
                amplitude * env * (coeffs[6] * bump(0) + coeffs[7] * bump(1)),
            );
            let mut q = base.p + dp;
            // Keep competitors inside the half-plane.
            q.y = q.y.max(1e-3);
            points.push(TangentPoint::new(q, base.v + dv));
        }
        let comp = TangentCurve::new(flow.params.clone(), points);
        margins.push(sasaki_length(&comp) - flow_length);
    }
    margins.sort_by(f64::total_cmp);
    let min_margin = margins.first().copied().unwrap_or(0.0);
    let median_margin = margins.get(margins.len() / 2).copied().unwrap_or(0.0);
    MinimalityReport {
        flow_length,
        amplitude,
        n_competitors,
        min_margin,
        median_margin,
        all_at_least_flow: min_margin >= 0.0,
        seed,
    }
}

/// Quasi-isometry constant transfer: (A0, A1) = (e1 e3 / e2, e1 e4 / e2 + e1).
pub fn transfer_constants(
    eta1: f64,
    eta2: f64,
    eta3: f64,
    eta4: f64,
) -> Result<(f64, f64), GeoflowError> {
    if eta1 <= 0.0 || eta2 <= 0.0 || eta3 <= 0.0 || eta4 < 0.0 {
        return Err(GeoflowError::DomainError);
    }
    Ok((eta1 * eta3 / eta2, eta1 * eta4 / eta2 + eta1))
}
