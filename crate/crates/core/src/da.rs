//! The hyperbolic toral automorphism, the radial blow-up family, the lifted
//! derived-from-Anosov map and the deck transformation group.
//!
//! Everything here works in "eigen coordinates": the plane coordinatized by
//! the stable/unstable eigenbasis of the automorphism, so the linear part acts
//! as diag(1/lambda, lambda). The integer lattice lives in the original
//! Euclidean coordinates; the chart converts between the two.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::Point3;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

#[derive(Debug, Error)]
pub enum DaError {
    #[error("matrix is not a hyperbolic lattice automorphism (need |trace| > 2 and det = 1)")]
    NonHyperbolic,
    #[error("blow-up disks of radius r2 = {r2} overlap across the lattice (min center gap {min_gap})")]
    OverlappingBlowupDisks { r2: f64, min_gap: f64 },
    #[error("invalid blow-up profile: {0}")]
    InvalidProfile(String),
    #[error("theta0 = {theta0} does not exceed lambda = {lambda}: no fixed point on the axis")]
    NoRoot { theta0: f64, lambda: f64 },
}

/// A hyperbolic, area-preserving integer matrix together with its eigendata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeAutomorphism {
    pub m: [[i64; 2]; 2],
    pub lambda: f64,
    pub v_unstable: [f64; 2],
    pub v_stable: [f64; 2],
}

impl LatticeAutomorphism {
    /// Eigen-decomposes an integer matrix with det 1 and |trace| > 2.
    ///
    /// The leading eigenvalue is the root > 1 of t^2 - tr*t + 1; eigenvectors
    /// are unit-normalized with positive first component.
    pub fn eigen_decompose(m: [[i64; 2]; 2]) -> Result<Self, DaError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let tr = m[0][0] + m[1][1];
        if det != 1 || tr.abs() <= 2 {
            return Err(DaError::NonHyperbolic);
        }
        let trf = tr as f64;
        let disc = (trf * trf - 4.0).sqrt();
        // Root of largest modulus; for negative trace this is (tr - disc)/2.
        let lead = if trf > 0.0 { (trf + disc) / 2.0 } else { (trf - disc) / 2.0 };
        let lambda = lead.abs();
        let eigvec = |mu: f64| -> Vec2 {
            // (m - mu I) v = 0; pick the more stable row.
            let a = m[0][0] as f64 - mu;
            let b = m[0][1] as f64;
            let c = m[1][0] as f64;
            let d = m[1][1] as f64 - mu;
            let v = if a.abs() + b.abs() > c.abs() + d.abs() {
                Vec2::new(-b, a)
            } else {
                Vec2::new(-d, c)
            };
            let v = v / v.norm();
            if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
                -v
            } else {
                v
            }
        };
        let v_unstable = eigvec(lead);
        let v_stable = eigvec(1.0 / lead);
        Ok(Self {
            m,
            lambda,
            v_unstable: [v_unstable.x, v_unstable.y],
            v_stable: [v_stable.x, v_stable.y],
        })
    }

    pub fn matrix(&self) -> Mat2 {
        Mat2::new(
            self.m[0][0] as f64,
            self.m[0][1] as f64,
            self.m[1][0] as f64,
            self.m[1][1] as f64,
        )
    }
}

/// Conversion between Euclidean lattice coordinates and eigen coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    /// Euclidean -> eigen.
    pub to_eigen: Mat2,
    /// Eigen -> Euclidean; inverse of `to_eigen`.
    pub from_eigen: Mat2,
}

impl Chart {
    pub fn new(aut: &LatticeAutomorphism) -> Self {
        let from_eigen = Mat2::from_columns(&[
            Vec2::new(aut.v_stable[0], aut.v_stable[1]),
            Vec2::new(aut.v_unstable[0], aut.v_unstable[1]),
        ]);
        let to_eigen = from_eigen
            .try_inverse()
            .expect("eigenbasis of a hyperbolic matrix is nondegenerate");
        Self { to_eigen, from_eigen }
    }
}

/// Radially symmetric C^2 bump: theta0 on |p| <= r1, decaying to 1 at r2.
///
/// The decay runs in log-radius: theta(r) = exp(ln(theta0) * (1 - S(xi))) with
/// xi = ln(r/r1)/ln(r2/r1) and S a C^2 smoothstep whose derivative ramps up
/// over a fraction `ramp` of [0,1], holds a plateau, and ramps down. Keeping
/// max S' low is what keeps r -> r*theta(r) strictly increasing, i.e. the
/// blow-up injective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupProfile {
    pub r1: f64,
    pub r2: f64,
    pub theta0: f64,
    pub ramp: f64,
}

impl BlowupProfile {
    pub fn validate(&self, lambda: f64) -> Result<(), DaError> {
        if !(self.r1 > 0.0 && self.r1 < self.r2) {
            return Err(DaError::InvalidProfile(format!(
                "need 0 < r1 < r2, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        if self.theta0 <= lambda {
            return Err(DaError::InvalidProfile(format!(
                "need theta0 > lambda for a source, got theta0 = {}, lambda = {}",
                self.theta0, lambda
            )));
        }
        if !(self.ramp > 0.0 && self.ramp <= 0.5) {
            return Err(DaError::InvalidProfile(format!(
                "ramp fraction must lie in (0, 0.5], got {}",
                self.ramp
            )));
        }
        // Injectivity of the blow-up: worst case of d/dr (r theta^s) over s in
        // [0,1] is at s = 1, and needs ln(r2/r1) > ln(theta0) * max S'.
        let max_sp = 1.0 / (1.0 - self.ramp);
        if self.r2 / self.r1 <= (self.theta0.ln() * max_sp).exp() {
            return Err(DaError::InvalidProfile(format!(
                "profile too steep: ln(r2/r1) = {:.4} must exceed ln(theta0)/(1-ramp) = {:.4}",
                (self.r2 / self.r1).ln(),
                self.theta0.ln() * max_sp
            )));
        }
        Ok(())
    }

    /// Smoothstep S with trapezoid-shaped derivative, S(0)=0, S(1)=1, C^2.
    fn smoothstep(&self, xi: f64) -> f64 {
        let a = self.ramp;
        let m = 1.0 / (1.0 - a);
        if xi <= 0.0 {
            0.0
        } else if xi >= 1.0 {
            1.0
        } else if xi < a {
            let u = xi / a;
            m * a * (u.powi(3) - 0.5 * u.powi(4))
        } else if xi <= 1.0 - a {
            m * a / 2.0 + m * (xi - a)
        } else {
            let u = (1.0 - xi) / a;
            1.0 - m * a * (u.powi(3) - 0.5 * u.powi(4))
        }
    }

    fn smoothstep_deriv(&self, xi: f64) -> f64 {
        let a = self.ramp;
        let m = 1.0 / (1.0 - a);
        if xi <= 0.0 || xi >= 1.0 {
            0.0
        } else if xi < a {
            let u = xi / a;
            m * (3.0 * u * u - 2.0 * u.powi(3))
        } else if xi <= 1.0 - a {
            m
        } else {
            let u = (1.0 - xi) / a;
            m * (3.0 * u * u - 2.0 * u.powi(3))
        }
    }

    /// theta as a function of the local radius.
    pub fn value(&self, r: f64) -> f64 {
        if r <= self.r1 {
            self.theta0
        } else if r >= self.r2 {
            1.0
        } else {
            let xi = (r / self.r1).ln() / (self.r2 / self.r1).ln();
            (self.theta0.ln() * (1.0 - self.smoothstep(xi))).exp()
        }
    }

    /// d theta / dr.
    pub fn deriv(&self, r: f64) -> f64 {
        if r <= self.r1 || r >= self.r2 {
            0.0
        } else {
            let big_l = (self.r2 / self.r1).ln();
            let xi = (r / self.r1).ln() / big_l;
            -self.value(r) * self.theta0.ln() * self.smoothstep_deriv(xi) / (big_l * r)
        }
    }
}

/// Whether the blown-up fixed point is a source (attracting plug) or a sink
/// (repelling plug). The map formulas are shared; the plug interprets the
/// flag by reversing time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaMode {
    Source,
    Sink,
}

/// Deck transformations of the suspension's universal cover: apply the DA map
/// and drop a level, or translate by a lattice generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Deck {
    Gamma,
    GammaInv,
    E1,
    E1Inv,
    E2,
    E2Inv,
}

/// The blown-up toral map Phi = A ∘ phi with the lift fixing the origin.
#[derive(Debug, Clone)]
pub struct DaMap {
    pub aut: LatticeAutomorphism,
    pub chart: Chart,
    pub profile: BlowupProfile,
    pub mode: DaMode,
}

/// Flat serialization of a `DaMap`; round-trips bit-stably.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaMapSpec {
    pub matrix: [[i64; 2]; 2],
    pub r1: f64,
    pub r2: f64,
    pub theta0: f64,
    pub ramp: f64,
    pub mode: DaMode,
}

impl DaMap {
    pub fn new(
        m: [[i64; 2]; 2],
        profile: BlowupProfile,
        mode: DaMode,
    ) -> Result<Self, DaError> {
        let aut = LatticeAutomorphism::eigen_decompose(m)?;
        profile.validate(aut.lambda)?;
        let chart = Chart::new(&aut);
        // Blow-up disks sit at lattice points; their eigen-coordinate images
        // must not overlap, otherwise "nearest lift" is ambiguous.
        let mut min_gap = f64::INFINITY;
        for i in -2i64..=2 {
            for j in -2i64..=2 {
                if i == 0 && j == 0 {
                    continue;
                }
                let c = chart.to_eigen * Vec2::new(i as f64, j as f64);
                min_gap = min_gap.min(c.norm());
            }
        }
        if min_gap <= 2.0 * profile.r2 {
            return Err(DaError::OverlappingBlowupDisks { r2: profile.r2, min_gap });
        }
        Ok(Self { aut, chart, profile, mode })
    }

    pub fn from_spec(spec: &DaMapSpec) -> Result<Self, DaError> {
        Self::new(
            spec.matrix,
            BlowupProfile {
                r1: spec.r1,
                r2: spec.r2,
                theta0: spec.theta0,
                ramp: spec.ramp,
            },
            spec.mode,
        )
    }

    pub fn to_spec(&self) -> DaMapSpec {
        DaMapSpec {
            matrix: self.aut.m,
            r1: self.profile.r1,
            r2: self.profile.r2,
            theta0: self.profile.theta0,
            ramp: self.profile.ramp,
            mode: self.mode,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.aut.lambda
    }

    /// Offset of `p` from the nearest lattice lift of the blow-up center, in
    /// eigen coordinates, together with that center.
    pub fn local_offset(&self, p: Vec2) -> (Vec2, Vec2) {
        let p_eu = self.chart.from_eigen * p;
        let n = Vec2::new(p_eu.x.round(), p_eu.y.round());
        let center = self.chart.to_eigen * n;
        (p - center, center)
    }

    /// theta at a point of the plane (1 outside every lifted blow-up disk).
    pub fn theta(&self, p: Vec2) -> f64 {
        let (local, _) = self.local_offset(p);
        self.profile.value(local.norm())
    }

    /// The partial blow-up nu_s: (theta^s x, y) in local coordinates at the
    /// nearest lattice lift, identity outside the disks. nu_0 = id, nu_1 = phi.
    pub fn nu_s(&self, p: Vec2, s: f64) -> Vec2 {
        let (local, center) = self.local_offset(p);
        let r = local.norm();
        if r >= self.profile.r2 {
            return p;
        }
        let th = self.profile.value(r).powf(s);
        center + Vec2::new(th * local.x, local.y)
    }

    /// Jacobian of nu_s at p.
    pub fn d_nu_s(&self, p: Vec2, s: f64) -> Mat2 {
        let (local, _) = self.local_offset(p);
        let r = local.norm();
        if r >= self.profile.r2 {
            return Mat2::identity();
        }
        if r == 0.0 {
            // On the plateau the map is (theta0^s x, y).
            return Mat2::new(self.profile.theta0.powf(s), 0.0, 0.0, 1.0);
        }
        let th = self.profile.value(r);
        let ths = th.powf(s);
        // d/dx theta^s = s theta^(s-1) theta'(r) x/r, similarly in y.
        let coef = s * th.powf(s - 1.0) * self.profile.deriv(r) / r;
        Mat2::new(
            ths + coef * local.x * local.x,
            coef * local.x * local.y,
            0.0,
            1.0,
        )
    }

    /// The interpolated linear part: (lambda^-s x, lambda^s y). B_1 = A.
    pub fn b_s(&self, p: Vec2, s: f64) -> Vec2 {
        let l = self.aut.lambda;
        Vec2::new(l.powf(-s) * p.x, l.powf(s) * p.y)
    }

    /// eta_s = B_s ∘ nu_s; eta_0 = id and eta_1 = the lifted DA map.
    pub fn eta_s(&self, p: Vec2, s: f64) -> Vec2 {
        self.b_s(self.nu_s(p, s), s)
    }

    pub fn d_eta_s(&self, p: Vec2, s: f64) -> Mat2 {
        let l = self.aut.lambda;
        Mat2::new(l.powf(-s), 0.0, 0.0, l.powf(s)) * self.d_nu_s(p, s)
    }

    /// The lifted DA map Phi = A ∘ phi, fixing the origin.
    pub fn phi_lift(&self, p: Vec2) -> Vec2 {
        self.eta_s(p, 1.0)
    }

    pub fn d_phi_lift(&self, p: Vec2) -> Mat2 {
        self.d_eta_s(p, 1.0)
    }

    /// Inverse of the lifted DA map.
    ///
    /// Undoes the linear part, then inverts the blow-up by a monotone 1-D
    /// solve: x * theta(|(x, y)|) is strictly increasing in x exactly when the
    /// profile passed its injectivity validation.
    pub fn phi_lift_inv(&self, q: Vec2) -> Vec2 {
        let l = self.aut.lambda;
        let w = Vec2::new(l * q.x, q.y / l);
        let (local, center) = self.local_offset(w);
        // r * theta(r) increases to r2 at r = r2, so phi maps each blow-up
        // disk onto itself and is the identity outside.
        if local.norm() >= self.profile.r2 {
            return w;
        }
        let (wx, y) = (local.x, local.y);
        let g = |x: f64| x * self.profile.value((x * x + y * y).sqrt()) - wx;
        // Bracket: |x| <= |wx| and |x| >= |wx|/theta0.
        let (mut lo, mut hi) = if wx >= 0.0 {
            (wx / self.profile.theta0, wx)
        } else {
            (wx, wx / self.profile.theta0)
        };
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        let x = 0.5 * (lo + hi);
        if (x * x + y * y).sqrt() >= self.profile.r2 {
            // The point was outside the blow-up support after all.
            return w;
        }
        center + Vec2::new(x, y)
    }

    /// n-fold iterate of the lifted DA map (negative n uses the inverse),
    /// returning the image and the accumulated Jacobian.
    pub fn phi_iter_with_jacobian(&self, p: Vec2, n: i32) -> (Vec2, Mat2) {
        let mut q = p;
        let mut jac = Mat2::identity();
        if n >= 0 {
            for _ in 0..n {
                jac = self.d_phi_lift(q) * jac;
                q = self.phi_lift(q);
            }
        } else {
            for _ in 0..(-n) {
                let prev = self.phi_lift_inv(q);
                let step = self
                    .d_phi_lift(prev)
                    .try_inverse()
                    .expect("DA map Jacobian is invertible");
                jac = step * jac;
                q = prev;
            }
        }
        (q, jac)
    }

    pub fn phi_iter(&self, p: Vec2, n: i32) -> Vec2 {
        self.phi_iter_with_jacobian(p, n).0
    }

    /// Deck transformations of R^2 x R: Gamma applies the DA map and drops one
    /// level; E1/E2 translate by the lattice generators.
    pub fn deck_apply(&self, g: Deck, q: Point3) -> Point3 {
        let xy = Vec2::new(q.x, q.y);
        match g {
            Deck::Gamma => {
                let im = self.phi_lift(xy);
                Point3::new(im.x, im.y, q.t - 1.0)
            }
            Deck::GammaInv => {
                let im = self.phi_lift_inv(xy);
                Point3::new(im.x, im.y, q.t + 1.0)
            }
            Deck::E1 | Deck::E1Inv | Deck::E2 | Deck::E2Inv => {
                let e = match g {
                    Deck::E1 => Vec2::new(1.0, 0.0),
                    Deck::E1Inv => Vec2::new(-1.0, 0.0),
                    Deck::E2 => Vec2::new(0.0, 1.0),
                    _ => Vec2::new(0.0, -1.0),
                };
                let shift = self.chart.to_eigen * e;
                Point3::new(q.x + shift.x, q.y + shift.y, q.t)
            }
        }
    }

    /// The two hyperbolic fixed points (±x*, 0) of the source-mode map, where
    /// theta(x*, 0) = lambda.
    pub fn fixed_points(&self) -> Result<(Vec2, Vec2), DaError> {
        let lambda = self.aut.lambda;
        if self.profile.theta0 <= lambda {
            return Err(DaError::NoRoot { theta0: self.profile.theta0, lambda });
        }
        // theta is monotone decreasing in r on [r1, r2] from theta0 > lambda
        // down to 1 < lambda.
        let (mut lo, mut hi) = (self.profile.r1, self.profile.r2);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.profile.value(mid) > lambda {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-16 {
                break;
            }
        }
        let x_star = 0.5 * (lo + hi);
        Ok((Vec2::new(x_star, 0.0), Vec2::new(-x_star, 0.0)))
    }
}
