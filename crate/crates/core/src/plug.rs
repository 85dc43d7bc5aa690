//! The suspension flow, the deck-compatible flow-transverse tube around the
//! blown-up orbit, its boundary torus with the Reeb foliation and the two
//! circle leaves, the collar, and the flow-entry quantities measured on it.

use std::f64::consts::PI;

use thiserror::Error;

use crate::da::{DaMap, DaMode, Vec2};
use crate::dist::{grid_distance_to_targets, DistanceResult, DomainBox, GridError};
use crate::metric::{length, Metric, Point3, Polyline3};

#[derive(Debug, Error)]
pub enum PlugError {
    #[error("tube radius {r_tube} must lie in (0, r1 = {r1}) so every level curve stays on the blow-up plateau")]
    TubeTooLarge { r_tube: f64, r1: f64 },
    #[error("the orbit through ({0}, {1}) does not meet the tube boundary in the search window")]
    NoIntersection(f64, f64),
    #[error("point lies on a circle leaf (y = 0): no yt-plane companion exists")]
    OnCircle,
    #[error("collar thickness must be positive, got {0}")]
    BadCollar(f64),
}

/// The deck-compatible tube around the vertical axis orbit.
///
/// The base level curve is a round circle of radius `r_tube` on the blow-up
/// plateau; level t + dt carries the curve shrunk by the linearized inverse
/// map, so level curves strictly shrink in t (the boundary surface is
/// transverse to the vertical flow) and the deck map carries level t + 1
/// exactly onto level t.
#[derive(Debug, Clone)]
pub struct TubeModel {
    pub da: DaMap,
    pub r_tube: f64,
}

impl TubeModel {
    pub fn new(da: DaMap, r_tube: f64) -> Result<Self, PlugError> {
        if !(r_tube > 0.0 && r_tube < da.profile.r1) {
            return Err(PlugError::TubeTooLarge { r_tube, r1: da.profile.r1 });
        }
        Ok(Self { da, r_tube })
    }

    /// Semi-axes (a, b) of the level curve at time t, in the linearization at
    /// the axis: a(t) = r_tube (lambda/theta0)^t, b(t) = r_tube lambda^{-t}.
    /// Exact on the plateau, which contains every level curve for t >= -1.
    pub fn semi_axes(&self, t: f64) -> (f64, f64) {
        let lambda = self.da.lambda();
        let ratio = lambda / self.da.profile.theta0;
        (self.r_tube * ratio.powf(t), self.r_tube * lambda.powf(-t))
    }

    /// Radial gauge of a horizontal point against the level-t curve: < 1
    /// inside the tube, 1 on the boundary, > 1 outside. The query is reduced
    /// to the base slab by the deck map, so the gauge is deck-exact.
    pub fn gauge(&self, xy: Vec2, t: f64) -> f64 {
        let n = t.floor();
        let s = t - n;
        let p = self.da.phi_iter(xy, n as i32);
        let (a, b) = self.semi_axes(s);
        let gx = p.x / a;
        let gy = p.y / b;
        (gx * gx + gy * gy).sqrt()
    }

    /// Boundary surface point at angle parameter theta and level t, obtained
    /// by placing the point on the base-slab level curve and pulling back by
    /// the deck map.
    pub fn surface_point(&self, theta: f64, t: f64) -> Point3 {
        let n = t.floor();
        let s = t - n;
        let (a, b) = self.semi_axes(s);
        let base = Vec2::new(a * theta.cos(), b * theta.sin());
        let p = self.da.phi_iter(base, -(n as i32));
        Point3::new(p.x, p.y, t)
    }

    /// y-coordinate of the surface at (theta, t). The vertical map scales y
    /// linearly everywhere, so this closed form holds at every level.
    pub fn surface_y(&self, theta: f64, t: f64) -> f64 {
        self.r_tube * self.da.lambda().powf(-t) * theta.sin()
    }
}

/// An attracting (or, with time reversed, repelling) plug: the suspension
/// with the open tube removed, plus a product collar at the boundary.
#[derive(Debug, Clone)]
pub struct PlugModel {
    pub tube: TubeModel,
    pub collar_thickness: f64,
    pub mode: DaMode,
}

/// Flow direction along the vertical orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitDirection {
    Forward,
    Backward,
}

impl PlugModel {
    pub fn new(tube: TubeModel, collar_thickness: f64) -> Result<Self, PlugError> {
        if collar_thickness <= 0.0 {
            return Err(PlugError::BadCollar(collar_thickness));
        }
        let mode = tube.da.mode;
        Ok(Self { tube, collar_thickness, mode })
    }

    pub fn da(&self) -> &DaMap {
        &self.tube.da
    }

    /// The suspension flow: move along the vertical line.
    pub fn flow(&self, q: Point3, dt: f64) -> Point3 {
        Point3::new(q.x, q.y, q.t + dt)
    }

    /// First intersection of the vertical orbit through q with the tube
    /// boundary in the given direction. The level curves strictly shrink, so
    /// the gauge along the orbit is monotone and the root unique; it is
    /// bracketed by a coarse scan and bisected to 1e-10 in t. None if the
    /// orbit does not reach the boundary within the search window.
    pub fn first_boundary_hit(
        &self,
        q: Point3,
        direction: OrbitDirection,
    ) -> Option<(Point3, f64)> {
        let g0 = self.tube.gauge(q.xy(), q.t) - 1.0;
        if g0.abs() < 1e-9 {
            return Some((q, 0.0));
        }
        let step = match direction {
            OrbitDirection::Forward => 0.25,
            OrbitDirection::Backward => -0.25,
        };
        let span_steps = 320; // 80 time units
        let mut prev_dt = 0.0;
        let mut prev_g = g0;
        let mut bracket = None;
        for i in 1..=span_steps {
            let dt = step * i as f64;
            let g = self.tube.gauge(q.xy(), q.t + dt) - 1.0;
            if g == 0.0 {
                return Some((self.flow(q, dt), dt));
            }
            if g.signum() != prev_g.signum() {
                bracket = Some((prev_dt, dt));
                break;
            }
            prev_dt = dt;
            prev_g = g;
        }
        let (mut lo, mut hi) = bracket?;
        let g_lo = self.tube.gauge(q.xy(), q.t + lo) - 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let g = self.tube.gauge(q.xy(), q.t + mid) - 1.0;
            if g.signum() == g_lo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() < 1e-10 {
                break;
            }
        }
        let dt = 0.5 * (lo + hi);
        Some((self.flow(q, dt), dt))
    }

    /// Direction from the boundary into the plug: an attracting plug is
    /// entered flowing forward, so the boundary lies in the orbit's past.
    fn entry_direction(&self) -> OrbitDirection {
        match self.mode {
            DaMode::Source => OrbitDirection::Backward,
            DaMode::Sink => OrbitDirection::Forward,
        }
    }

    /// Flow time from the boundary crossing to q along its orbit; equals the
    /// metric length of that flow segment because the flow direction has unit
    /// norm.
    pub fn ell(&self, q: Point3) -> Result<f64, PlugError> {
        let (_, dt) = self
            .first_boundary_hit(q, self.entry_direction())
            .ok_or(PlugError::NoIntersection(q.x, q.y))?;
        Ok(dt.abs())
    }

    /// Boundary circle leaves: the traces of the invariant horizontal axes.
    /// i = 0 is the positive-x circle (theta = 0), i = 1 the negative-x one
    /// (theta = pi); each crosses every level exactly once.
    pub fn boundary_circle(&self, i: usize, t: f64) -> Point3 {
        let theta = if i == 0 { 0.0 } else { PI };
        self.tube.surface_point(theta, t)
    }

    /// The yt-plane companion of a boundary point: the boundary point with
    /// x = 0 on the same horizontal stable line {y = y_q}, together with the
    /// level shift s = t_companion - t_q.
    pub fn stable_companion(&self, q: Point3) -> Result<(Point3, f64), PlugError> {
        if q.y.abs() < 1e-12 {
            return Err(PlugError::OnCircle);
        }
        // On the yt-plane the boundary is |y| = b(t) with b strictly
        // decreasing, so t_companion solves b(t) = |y_q| in closed form.
        let lambda = self.da().lambda();
        let t_bar = (self.tube.r_tube / q.y.abs()).ln() / lambda.ln();
        let companion = Point3::new(0.0, q.y, t_bar);
        Ok((companion, t_bar - q.t))
    }

    /// Horizontal metric separation between the flowed point and its flowed
    /// companion at matched levels; used to exhibit the forward contraction
    /// toward the yt-plane.
    pub fn companion_separation(
        &self,
        q: Point3,
        metric: &dyn Metric,
        t_forward: f64,
    ) -> Result<f64, PlugError> {
        let (q_bar, s) = self.stable_companion(q)?;
        let a = self.flow(q, t_forward + s);
        let b = self.flow(q_bar, t_forward);
        Ok(length(&Polyline3::new(vec![a, b]), metric))
    }

    /// Measured collar crossing length: the maximum over sampled boundary
    /// orbits of the metric length of the collar-thickness flow segment.
    /// With the product collar and unit flow norm this is the thickness.
    pub fn collar_epsilon(&self, metric: &dyn Metric, n_samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n_samples {
            let theta = 2.0 * PI * (i as f64 + 0.5) / n_samples as f64;
            let t = (i as f64 * 0.37).fract();
            let b = self.tube.surface_point(theta, t);
            let seg = Polyline3::new(vec![b, self.flow(b, self.collar_thickness)]);
            worst = worst.max(length(&seg, metric));
        }
        worst
    }

    /// Distance from q to the tube boundary in the full ambient space, as the
    /// minimum grid distance to sampled surface targets inside the box.
    pub fn dist_to_boundary(
        &self,
        q: Point3,
        metric: &dyn Metric,
        bbox: DomainBox,
        h: f64,
        n_theta: usize,
        t_step: f64,
    ) -> Result<DistanceResult, GridError> {
        let mut targets = Vec::new();
        let mut t = bbox.min.t;
        while t <= bbox.max.t {
            for i in 0..n_theta {
                let theta = 2.0 * PI * i as f64 / n_theta as f64;
                let p = self.tube.surface_point(theta, t);
                if bbox.contains(p) {
                    targets.push(p);
                }
            }
            t += t_step;
        }
        grid_distance_to_targets(q, &targets, metric, bbox, h)
    }

    /// A domain box suited to a boundary-distance query from q: spans from
    /// one unit below the orbit's boundary crossing up past q, wide enough
    /// for the tube cross-sections in that range.
    pub fn boundary_query_box(&self, q: Point3) -> DomainBox {
        let t_hit = self
            .first_boundary_hit(q, self.entry_direction())
            .map(|(p, _)| p.t)
            .unwrap_or(q.t - 1.0);
        let t_lo = t_hit.min(q.t) - 1.0;
        let t_hi = t_hit.max(q.t) + 0.5;
        let (a_lo, b_lo) = self.tube.semi_axes(t_lo);
        let x_r = q.x.abs().max(a_lo) + 0.3;
        let y_r = q.y.abs().max(b_lo) + 0.3;
        DomainBox::new(Point3::new(-x_r, -y_r, t_lo), Point3::new(x_r, y_r, t_hi))
    }
}

/// The boundary foliation in torus parameters (theta, t mod 1): leaves are
/// the traces of the horizontal lines {y = c}; the two circles are theta = 0
/// and theta = pi, and every other leaf is a hairpin turning at the yt-plane.
#[derive(Debug, Clone)]
pub struct BoundaryFoliationModel {
    pub lambda: f64,
    pub r_tube: f64,
}

impl BoundaryFoliationModel {
    pub fn new(plug: &PlugModel) -> Self {
        Self { lambda: plug.da().lambda(), r_tube: plug.tube.r_tube }
    }

    /// Unit direction of the leaf through (theta, .) in the normalized
    /// parameter square (u, v) = (theta/2pi, t). Along a leaf y = c with
    /// y = b(t) sin(theta), differentiating gives the t-independent field
    /// (sin(theta) ln(lambda), cos(theta)) up to scale.
    pub fn line_field(&self, theta: f64) -> (f64, f64) {
        let du = theta.sin() * self.lambda.ln() / (2.0 * PI);
        let dv = theta.cos();
        let n = (du * du + dv * dv).sqrt();
        (du / n, dv / n)
    }

    /// Turning level of the leaf y = c: where b(t) = |c|.
    pub fn turning_level(&self, c: f64) -> f64 {
        (self.r_tube / c.abs()).ln() / self.lambda.ln()
    }

    /// Sampled trace of the leaf y = c on the universal-cover surface, as
    /// (theta, t) pairs sweeping through the turning point: theta runs over
    /// one hairpin, t = turning_level at theta = pi/2 (c > 0) or 3pi/2.
    pub fn leaf_trace(&self, c: f64, n: usize) -> Vec<(f64, f64)> {
        assert!(c != 0.0, "circle leaves have no hairpin trace");
        let (lo, hi) = if c > 0.0 { (0.0, PI) } else { (PI, 2.0 * PI) };
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            // Avoid the exact endpoints, where t -> -infinity.
            let theta = lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
            let t = ((self.r_tube * theta.sin().abs()) / c.abs()).ln() / self.lambda.ln();
            out.push((theta, t));
        }
        out
    }

    /// Number of crossings of the yt-plane locus {theta in {pi/2, 3pi/2}}
    /// along the sampled leaf trace.
    pub fn yt_crossings(&self, trace: &[(f64, f64)]) -> usize {
        let mut count = 0;
        for w in trace.windows(2) {
            for locus in [0.5 * PI, 1.5 * PI] {
                if (w[0].0 - locus) * (w[1].0 - locus) < 0.0
                    || w[0].0 == locus
                {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Triangulation-free boundary mesh: an (n_theta x n_t) parameter grid on the
/// torus with 8-neighbor edges weighted by ambient metric chord lengths, plus
/// the multi-source distance field from the two circle leaves.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub n_theta: usize,
    pub n_t: usize,
    pub circle_distance: Vec<f64>,
}

impl SurfaceMesh {
    pub fn build(plug: &PlugModel, metric: &dyn Metric, n_theta: usize, n_t: usize) -> Self {
        let tube = &plug.tube;
        let total = n_theta * n_t;
        let idx = |i: usize, j: usize| (i % n_theta) + n_theta * (j % n_t);
        let mut dist = vec![f64::INFINITY; total];
        let mut heap = std::collections::BinaryHeap::new();
        // Sources: every node of the two circle columns theta = 0, pi.
        for j in 0..n_t {
            for i in [0, n_theta / 2] {
                dist[idx(i, j)] = 0.0;
                heap.push(MeshEntry { cost: 0.0, node: idx(i, j) as u32 });
            }
        }
        let mut done = vec![false; total];
        while let Some(MeshEntry { cost, node }) = heap.pop() {
            let u = node as usize;
            if done[u] {
                continue;
            }
            done[u] = true;
            let (i, j) = (u % n_theta, u / n_theta);
            for dj in -1i64..=1 {
                for di in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let i2 = (i as i64 + di).rem_euclid(n_theta as i64) as usize;
                    let j2_raw = j as i64 + dj;
                    let j2 = j2_raw.rem_euclid(n_t as i64) as usize;
                    let v = idx(i2, j2);
                    if done[v] {
                        continue;
                    }
                    let w = chord_length(tube, metric, i, j, i2, j2_raw, n_theta, n_t);
                    let next = cost + w;
                    if next < dist[v] {
                        dist[v] = next;
                        heap.push(MeshEntry { cost: next, node: v as u32 });
                    }
                }
            }
        }
        Self { n_theta, n_t, circle_distance: dist }
    }

    /// Intrinsic surface distance from the parameter point to the circles,
    /// read from the nearest grid node.
    pub fn circle_distance_at(&self, theta: f64, t: f64) -> f64 {
        let u = (theta / (2.0 * PI)).rem_euclid(1.0);
        let v = t.rem_euclid(1.0);
        let i = ((u * self.n_theta as f64).round() as usize) % self.n_theta;
        let j = ((v * self.n_t as f64).round() as usize) % self.n_t;
        self.circle_distance[i + self.n_theta * j]
    }

    /// True iff the parameter point lies within intrinsic distance delta of a
    /// circle leaf.
    pub fn bad_region_test(&self, theta: f64, t: f64, delta: f64) -> bool {
        self.circle_distance_at(theta, t) < delta
    }

    pub fn max_circle_distance(&self) -> f64 {
        self.circle_distance.iter().copied().fold(0.0, f64::max)
    }
}

// Chord length between two mesh nodes, evaluated on the surface patch in a
// consistent fundamental domain (theta wraps by sampling the surface directly
// from angle parameters; t wraps through the level-1 representative).
#[allow(clippy::too_many_arguments)]
fn chord_length(
    tube: &TubeModel,
    metric: &dyn Metric,
    i: usize,
    j: usize,
    i2: usize,
    j2_raw: i64,
    n_theta: usize,
    n_t: usize,
) -> f64 {
    let theta_a = 2.0 * PI * i as f64 / n_theta as f64;
    // Unwrapped neighbor angle nearest to theta_a.
    let mut theta_b = 2.0 * PI * i2 as f64 / n_theta as f64;
    while theta_b - theta_a > PI {
        theta_b -= 2.0 * PI;
    }
    while theta_a - theta_b > PI {
        theta_b += 2.0 * PI;
    }
    let (ta, tb) = if j2_raw == n_t as i64 {
        (j as f64 / n_t as f64, 1.0)
    } else if j2_raw < 0 {
        (1.0, (n_t - 1) as f64 / n_t as f64)
    } else {
        (j as f64 / n_t as f64, j2_raw as f64 / n_t as f64)
    };
    let a = tube.surface_point(theta_a, ta);
    let b = tube.surface_point(theta_b, tb);
    length(&Polyline3::new(vec![a, b]), metric)
}

struct MeshEntry {
    cost: f64,
    node: u32,
}
impl PartialEq for MeshEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for MeshEntry {}
impl PartialOrd for MeshEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MeshEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.cost.total_cmp(&self.cost).then(self.node.cmp(&other.node))
    }
}
