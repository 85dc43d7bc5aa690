//! Metric tensors on R^2 x R: the homogeneous Solv metric and the pullback of
//! the flat horizontal metric under the level family of the blown-up map,
//! plus polyline lengths and numerical isometry checks.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::da::{DaMap, Mat2, Vec2};

/// A point of the suspension's universal cover: eigen horizontal coordinates
/// plus the flow time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn to_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.t)
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

/// Coordinate frame a polyline's vertices are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Stable/unstable eigen coordinates (the native frame of everything here).
    Eigen,
    /// Original integer-lattice coordinates.
    Euclidean,
}

/// Piecewise-linear path, the common currency for lengths and witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline3 {
    pub points: Vec<Point3>,
    pub frame: Frame,
}

impl Polyline3 {
    pub fn new(points: Vec<Point3>) -> Self {
        debug_assert!(points.len() >= 2, "polyline needs at least two vertices");
        debug_assert!(points
            .iter()
            .all(|p| p.x.is_finite() && p.y.is_finite() && p.t.is_finite()));
        Self { points, frame: Frame::Eigen }
    }
}

/// A Riemannian metric given by its tensor in the (x, y, t) frame.
pub trait Metric: Sync {
    fn tensor(&self, q: Point3) -> Matrix3<f64>;

    /// Squared norm of a tangent vector at q.
    fn quad(&self, q: Point3, v: Vector3<f64>) -> f64 {
        (v.transpose() * self.tensor(q) * v)[(0, 0)]
    }

    fn norm(&self, q: Point3, v: Vector3<f64>) -> f64 {
        self.quad(q, v).max(0.0).sqrt()
    }
}

/// lambda^{-2t} dx^2 + lambda^{2t} dy^2 + dt^2.
#[derive(Debug, Clone, Copy)]
pub struct SolvMetric {
    pub lambda: f64,
}

impl Metric for SolvMetric {
    fn tensor(&self, q: Point3) -> Matrix3<f64> {
        let lx = self.lambda.powf(-2.0 * q.t);
        let ly = self.lambda.powf(2.0 * q.t);
        Matrix3::new(lx, 0.0, 0.0, 0.0, ly, 0.0, 0.0, 0.0, 1.0)
    }
}

/// Which construction of the pulled-back metric to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PullbackKind {
    /// Horizontal block = (D eta_s ∘ D Phi^n)^T (D eta_s ∘ D Phi^n) at
    /// s = frac(t), n = floor(t); flow direction unit and orthogonal.
    /// This is the canonical construction.
    LevelFamily,
    /// Pullback of the Solv tensor under H(x,y,s) = (theta^s x, y, s).
    /// Cross-check only: it carries t-x cross terms inside the blow-up slabs.
    HPullback,
}

/// The deck-invariant metric obtained by pulling the flat horizontal metric
/// back through the level family of the blown-up map.
#[derive(Debug, Clone)]
pub struct BlownUpMetric {
    pub da: DaMap,
    pub kind: PullbackKind,
}

impl BlownUpMetric {
    pub fn new(da: DaMap) -> Self {
        Self { da, kind: PullbackKind::LevelFamily }
    }

    pub fn cross_check(da: DaMap) -> Self {
        Self { da, kind: PullbackKind::HPullback }
    }

    /// The 2x2 horizontal Jacobian whose Gram matrix is the horizontal block.
    /// Left-continuous slab convention: t = n + s with n = floor(t), s in [0,1).
    pub fn horizontal_jacobian(&self, q: Point3) -> Mat2 {
        let n = q.t.floor();
        let s = q.t - n;
        let (p_n, jac_n) = self.da.phi_iter_with_jacobian(q.xy(), n as i32);
        self.da.d_eta_s(p_n, s) * jac_n
    }

    /// True if the level-family tensor at q differs from Solv, i.e. the point
    /// sits over a blow-up disk after normalizing to the base slab.
    pub fn in_blowup_slab(&self, q: Point3) -> bool {
        let n = q.t.floor() as i32;
        let p_n = self.da.phi_iter(q.xy(), n);
        let (local, _) = self.da.local_offset(p_n);
        local.norm() < self.da.profile.r2
    }

    fn level_tensor(&self, q: Point3) -> Matrix3<f64> {
        let j = self.horizontal_jacobian(q);
        let g = j.transpose() * j;
        Matrix3::new(
            g[(0, 0)],
            g[(0, 1)],
            0.0,
            g[(1, 0)],
            g[(1, 1)],
            0.0,
            0.0,
            0.0,
            1.0,
        )
    }

    fn h_tensor(&self, q: Point3) -> Matrix3<f64> {
        // H(x, y, s) = (theta(x,y)^s x, y, s), pulled back through the Solv
        // tensor at the image. Only meaningful on the base slab s in [0, 1].
        let s = q.t;
        let p = q.xy();
        let (local, _) = self.da.local_offset(p);
        let r = local.norm();
        let lambda = self.da.lambda();
        let solv = {
            let lx = lambda.powf(-2.0 * s);
            let ly = lambda.powf(2.0 * s);
            Matrix3::new(lx, 0.0, 0.0, 0.0, ly, 0.0, 0.0, 0.0, 1.0)
        };
        if r >= self.da.profile.r2 {
            return solv;
        }
        let d2 = self.da.d_nu_s(p, s);
        let th = self.da.profile.value(r);
        // dH/ds = theta^s ln(theta) x on the first coordinate.
        let dds = th.powf(s) * th.ln() * local.x;
        let j = Matrix3::new(
            d2[(0, 0)],
            d2[(0, 1)],
            dds,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            1.0,
        );
        j.transpose() * solv * j
    }

    /// Max absolute entry difference between the two constructions at q;
    /// nonzero inside slabs, reported by diagnostics but never asserted away.
    pub fn construction_discrepancy(&self, q: Point3) -> f64 {
        let a = self.level_tensor(q);
        let b = self.h_tensor(q);
        (a - b).abs().max()
    }
}

impl Metric for BlownUpMetric {
    fn tensor(&self, q: Point3) -> Matrix3<f64> {
        match self.kind {
            PullbackKind::LevelFamily => self.level_tensor(q),
            PullbackKind::HPullback => self.h_tensor(q),
        }
    }
}

/// Length of one straight segment under the metric, by adaptive bisection of
/// the midpoint rule to a relative tolerance.
fn segment_length(metric: &dyn Metric, a: Point3, b: Point3, tol: f64, depth: u32) -> f64 {
    let va = a.to_vector();
    let vb = b.to_vector();
    let d = vb - va;
    let mid = Point3::from_vector(0.5 * (va + vb));
    let whole = metric.norm(mid, d);
    let m1 = Point3::from_vector(va + 0.25 * d);
    let m2 = Point3::from_vector(va + 0.75 * d);
    let halves = 0.5 * metric.norm(m1, d) + 0.5 * metric.norm(m2, d);
    if depth == 0 || (whole - halves).abs() <= tol * halves.abs() + 1e-300 {
        halves
    } else {
        let c = Point3::from_vector(0.5 * (va + vb));
        segment_length(metric, a, c, tol, depth - 1)
            + segment_length(metric, c, b, tol, depth - 1)
    }
}

/// Riemannian length of a polyline, adaptive quadrature per segment.
pub fn length(path: &Polyline3, metric: &dyn Metric) -> f64 {
    path.points
        .windows(2)
        .map(|w| segment_length(metric, w[0], w[1], 1e-7, 24))
        .sum()
}

/// A map of R^2 x R used for isometry residual checks.
pub trait PointMap {
    fn apply(&self, q: Point3) -> Point3;
}

impl<F: Fn(Point3) -> Point3> PointMap for F {
    fn apply(&self, q: Point3) -> Point3 {
        self(q)
    }
}

/// Max relative isometry residual of `map` over seeded random samples:
/// compares v^T G(p) v with (Jv)^T G(map p) (Jv), J by central differences.
pub fn verify_isometry<M: PointMap>(
    map: &M,
    metric: &dyn Metric,
    samples: &[(Point3, Vector3<f64>)],
) -> f64 {
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for &(p, v) in samples {
        let mut jac = Matrix3::<f64>::zeros();
        for k in 0..3 {
            let mut dp = Vector3::zeros();
            dp[k] = h;
            let plus = map.apply(Point3::from_vector(p.to_vector() + dp)).to_vector();
            let minus = map.apply(Point3::from_vector(p.to_vector() - dp)).to_vector();
            jac.set_column(k, &((plus - minus) / (2.0 * h)));
        }
        let before = metric.quad(p, v);
        let after = metric.quad(map.apply(p), jac * v);
        let denom = before.abs().max(after.abs()).max(1e-12);
        worst = worst.max((before - after).abs() / denom);
    }
    worst
}
