//! Poses, solid shapes given by exterior conformal maps, the outer domain with
//! its control arc, and boundary samplings.

use std::f64::consts::PI;
use std::hash::{Hash, Hasher};

use nalgebra::{Matrix3, Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type C64 = Complex64;

/// Rotate `v` counterclockwise by `theta`.
#[inline]
pub fn rotate(theta: f64, v: Vec2) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Counterclockwise quarter turn, `(a, b) -> (-b, a)`.
#[inline]
pub fn perp(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

#[inline]
pub(crate) fn to_v(z: C64) -> Vec2 {
    Vec2::new(z.re, z.im)
}

/// Rigid configuration of the body: center of mass `h` and rotation `theta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub h: Vec2,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { h: Vec2::new(x, y), theta }
    }

    pub fn origin() -> Self {
        Pose::new(0.0, 0.0, 0.0)
    }

    pub fn from_vec3(v: &Vec3) -> Self {
        Pose::new(v[0], v[1], v[2])
    }

    pub fn to_vec3(&self) -> Vec3 {
        Vec3::new(self.h.x, self.h.y, self.theta)
    }

    pub fn is_finite(&self) -> bool {
        self.h.x.is_finite() && self.h.y.is_finite() && self.theta.is_finite()
    }

    /// Map a point of the reference body (whose center is `h0`) to its placed position.
    pub fn place(&self, x_ref: Vec2, h0: Vec2) -> Vec2 {
        self.h + rotate(self.theta, x_ref - h0)
    }

    /// The pose obtained by applying `x -> b + R(phi) x` after this placement.
    pub fn transformed(&self, b: Vec2, phi: f64) -> Pose {
        Pose {
            h: b + rotate(phi, self.h),
            theta: self.theta + phi,
        }
    }

    pub fn offset(&self, d: &Vec3) -> Pose {
        Pose::from_vec3(&(self.to_vec3() + d))
    }
}

/// Pose together with generalized velocity `(h', theta')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub pose: Pose,
    pub vel: Vec3,
}

impl State {
    pub fn new(pose: Pose, vel: Vec3) -> Self {
        State { pose, vel }
    }

    pub fn to_array(&self) -> [f64; 6] {
        let q = self.pose.to_vec3();
        [q[0], q[1], q[2], self.vel[0], self.vel[1], self.vel[2]]
    }

    pub fn from_array(y: &[f64]) -> Self {
        State {
            pose: Pose::new(y[0], y[1], y[2]),
            vel: Vec3::new(y[3], y[4], y[5]),
        }
    }

    /// Euclidean distance in the six state coordinates.
    pub fn distance(&self, other: &State) -> f64 {
        let a = self.to_array();
        let b = other.to_array();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeKind {
    Disk {
        radius: f64,
    },
    /// Exterior map `Psi(z) = rho z + c0 + sum_k coeffs[k-1] z^-k`.
    Conformal {
        rho: f64,
        c0: C64,
        coeffs: Vec<C64>,
    },
}

/// Rigid solid: boundary shape, mass, moment of inertia and reference center.
#[derive(Clone, Debug)]
pub struct SolidShape {
    kind: ShapeKind,
    mass: f64,
    inertia: f64,
    h0: Vec2,
    id: u64,
}

impl SolidShape {
    pub fn disk(radius: f64, mass: f64, inertia: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidShape(format!("disk radius {radius} must be positive")));
        }
        Self::build(ShapeKind::Disk { radius }, mass, inertia, None)
    }

    /// Ellipse-like body `Psi(z) = z + c/z`, semi-axes `1 + c` and `1 - c`.
    pub fn joukowski(c: f64, mass: f64, inertia: f64) -> Result<Self> {
        Self::conformal(1.0, C64::new(0.0, 0.0), vec![C64::new(c, 0.0)], mass, inertia)
    }

    pub fn conformal(rho: f64, c0: C64, coeffs: Vec<C64>, mass: f64, inertia: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidShape(format!("leading coefficient {rho} must be positive")));
        }
        Self::build(ShapeKind::Conformal { rho, c0, coeffs }, mass, inertia, None)
    }

    /// Same shape with an explicit reference center instead of the centroid.
    pub fn with_reference_center(self, h0: Vec2) -> Result<Self> {
        Self::build(self.kind, self.mass, self.inertia, Some(h0))
    }

    fn build(kind: ShapeKind, mass: f64, inertia: f64, h0: Option<Vec2>) -> Result<Self> {
        if !(mass > 0.0) || !(inertia > 0.0) {
            return Err(Error::InvalidShape(format!(
                "mass {mass} and inertia {inertia} must be positive"
            )));
        }
        let mut shape = SolidShape {
            kind,
            mass,
            inertia,
            h0: Vec2::zeros(),
            id: 0,
        };
        shape.check_injective()?;
        shape.h0 = match h0 {
            Some(h) => h,
            None => shape.centroid(),
        };
        shape.id = shape.fingerprint();
        Ok(shape)
    }

    pub fn kind(&self) -> &ShapeKind {
        &self.kind
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> f64 {
        self.inertia
    }

    pub fn h0(&self) -> Vec2 {
        self.h0
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_disk(&self) -> bool {
        matches!(self.kind, ShapeKind::Disk { .. })
    }

    /// Genuine inertia `diag(m, m, J)`.
    pub fn genuine_inertia(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::new(self.mass, self.mass, self.inertia))
    }

    pub fn map(&self, z: C64) -> C64 {
        match &self.kind {
            ShapeKind::Disk { radius } => z * *radius,
            ShapeKind::Conformal { rho, c0, coeffs } => {
                let inv = z.inv();
                let mut acc = C64::new(0.0, 0.0);
                let mut pw = inv;
                for c in coeffs {
                    acc += c * pw;
                    pw *= inv;
                }
                z * *rho + c0 + acc
            }
        }
    }

    pub fn map_deriv(&self, z: C64) -> C64 {
        match &self.kind {
            ShapeKind::Disk { radius } => C64::new(*radius, 0.0),
            ShapeKind::Conformal { rho, coeffs, .. } => {
                let inv = z.inv();
                let mut acc = C64::new(0.0, 0.0);
                let mut pw = inv * inv;
                for (k, c) in coeffs.iter().enumerate() {
                    acc += c * pw * (k as f64 + 1.0);
                    pw *= inv;
                }
                C64::new(*rho, 0.0) - acc
            }
        }
    }

    /// Image of the conformal center in the reference frame (origin of the
    /// parameter disk). Interior sources are placed around it.
    pub fn conformal_center(&self) -> Vec2 {
        match &self.kind {
            ShapeKind::Disk { .. } => Vec2::zeros(),
            ShapeKind::Conformal { c0, .. } => to_v(*c0),
        }
    }

    /// Reference-frame boundary point and its derivative in the angle parameter.
    pub fn reference_boundary(&self, s: f64) -> (Vec2, Vec2) {
        let z = C64::from_polar(1.0, s);
        let x = self.map(z);
        let dx = C64::i() * z * self.map_deriv(z);
        (to_v(x), to_v(dx))
    }

    /// `|Psi'(e^{is})|`, the length scale of the boundary parametrization.
    pub fn jacobian_factor(&self, s: f64) -> f64 {
        self.map_deriv(C64::from_polar(1.0, s)).norm()
    }

    fn centroid(&self) -> Vec2 {
        let n = 2048;
        let (mut area, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let s = 2.0 * PI * k as f64 / n as f64;
            let (x, dx) = self.reference_boundary(s);
            area += 0.5 * (x.x * dx.y - x.y * dx.x);
            cx += 0.5 * x.x * x.x * dx.y;
            cy -= 0.5 * x.y * x.y * dx.x;
        }
        Vec2::new(cx / area, cy / area)
    }

    /// Largest distance from the reference center to the boundary.
    pub fn max_radius(&self) -> f64 {
        (0..1024)
            .map(|k| {
                let s = 2.0 * PI * k as f64 / 1024.0;
                (self.reference_boundary(s).0 - self.h0).norm()
            })
            .fold(0.0, f64::max)
    }

    fn check_injective(&self) -> Result<()> {
        let n = 128;
        let mut pts = Vec::with_capacity(4 * n);
        for &r in &[1.0, 1.25, 1.6, 2.5] {
            for k in 0..n {
                let z = C64::from_polar(r, 2.0 * PI * (k as f64 + 0.5 * r) / n as f64);
                pts.push((z, self.map(z)));
            }
        }
        let mut worst = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let q = (pts[i].1 - pts[j].1).norm() / (pts[i].0 - pts[j].0).norm();
                worst = worst.min(q);
            }
        }
        let min_deriv = (0..4 * n)
            .map(|k| self.map_deriv(C64::from_polar(1.0, 2.0 * PI * k as f64 / (4 * n) as f64)).norm())
            .fold(f64::INFINITY, f64::min);
        let scale = self.map_deriv(C64::new(1e6, 0.0)).norm();
        if !(worst > 1e-6 * scale) || !(min_deriv > 1e-6 * scale) {
            return Err(Error::InvalidShape(format!(
                "exterior map is not injective on |z| >= 1 (min difference quotient {worst:.3e}, min |Psi'| {min_deriv:.3e})"
            )));
        }
        Ok(())
    }

    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        match &self.kind {
            ShapeKind::Disk { radius } => {
                0u8.hash(&mut h);
                radius.to_bits().hash(&mut h);
            }
            ShapeKind::Conformal { rho, c0, coeffs } => {
                1u8.hash(&mut h);
                rho.to_bits().hash(&mut h);
                c0.re.to_bits().hash(&mut h);
                c0.im.to_bits().hash(&mut h);
                for c in coeffs {
                    c.re.to_bits().hash(&mut h);
                    c.im.to_bits().hash(&mut h);
                }
            }
        }
        self.h0.x.to_bits().hash(&mut h);
        self.h0.y.to_bits().hash(&mut h);
        h.finish()
    }
}

/// Outer boundary of the fluid domain.
#[derive(Clone, Debug, PartialEq)]
pub enum OuterBoundary {
    Circle { radius: f64 },
    /// `r(phi) = radius (1 + sum_k cos[k-1] cos(k phi) + sin[k-1] sin(k phi))`.
    Star { radius: f64, cos: Vec<f64>, sin: Vec<f64> },
}

/// Outer domain, control arc `[theta_a, theta_b]` on its boundary and safety clearance.
#[derive(Clone, Debug)]
pub struct DomainSpec {
    outer: OuterBoundary,
    sigma: [f64; 2],
    delta: f64,
    id: u64,
}

impl DomainSpec {
    pub fn disk(radius: f64, sigma: [f64; 2], delta: f64) -> Result<Self> {
        Self::new(OuterBoundary::Circle { radius }, sigma, delta)
    }

    pub fn new(outer: OuterBoundary, sigma: [f64; 2], delta: f64) -> Result<Self> {
        let mut d = DomainSpec {
            outer,
            sigma,
            delta,
            id: 0,
        };
        if let OuterBoundary::Star { cos, sin, .. } = &d.outer {
            if cos.len() != sin.len() {
                return Err(Error::InvalidDomain("star cos/sin coefficient lists differ in length".into()));
            }
        }
        let rmin = d.min_radius();
        if !(rmin > 0.0) {
            return Err(Error::InvalidDomain(format!("outer radius function must stay positive (min {rmin})")));
        }
        if !(sigma[0] < sigma[1]) || sigma[1] - sigma[0] >= 2.0 * PI {
            return Err(Error::InvalidDomain(format!(
                "control arc [{}, {}] must satisfy theta_a < theta_b < theta_a + 2 pi",
                sigma[0], sigma[1]
            )));
        }
        if !(delta > 0.0) || delta >= rmin {
            return Err(Error::InvalidDomain(format!(
                "clearance delta = {delta} must lie in (0, R_Omega = {rmin})"
            )));
        }
        d.id = d.fingerprint();
        Ok(d)
    }

    pub fn outer(&self) -> &OuterBoundary {
        &self.outer
    }

    pub fn sigma(&self) -> [f64; 2] {
        self.sigma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.outer, OuterBoundary::Circle { .. })
    }

    /// Nominal radius `R_Omega`.
    pub fn radius(&self) -> f64 {
        match &self.outer {
            OuterBoundary::Circle { radius } | OuterBoundary::Star { radius, .. } => *radius,
        }
    }

    /// Radius function and its angular derivative.
    pub fn radius_at(&self, phi: f64) -> (f64, f64) {
        match &self.outer {
            OuterBoundary::Circle { radius } => (*radius, 0.0),
            OuterBoundary::Star { radius, cos, sin } => {
                let (mut r, mut dr) = (1.0, 0.0);
                for (k, (a, b)) in cos.iter().zip(sin.iter()).enumerate() {
                    let kf = (k + 1) as f64;
                    let (s, c) = (kf * phi).sin_cos();
                    r += a * c + b * s;
                    dr += kf * (-a * s + b * c);
                }
                (radius * r, radius * dr)
            }
        }
    }

    fn min_radius(&self) -> f64 {
        (0..2048)
            .map(|k| self.radius_at(2.0 * PI * k as f64 / 2048.0).0)
            .fold(f64::INFINITY, f64::min)
    }

    /// Boundary point and its derivative in the polar angle.
    pub fn boundary_point(&self, phi: f64) -> (Vec2, Vec2) {
        let (r, dr) = self.radius_at(phi);
        let (s, c) = phi.sin_cos();
        (Vec2::new(r * c, r * s), Vec2::new(dr * c - r * s, dr * s + r * c))
    }

    /// Uniform sampling of the outer boundary; normals point out of the domain.
    pub fn outer_sampling(&self, n: usize) -> BoundarySampling {
        let mut out = BoundarySampling::with_capacity(n);
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let (x, dx) = self.boundary_point(phi);
            let speed = dx.norm();
            let tau = dx / speed;
            let normal = Vec2::new(tau.y, -tau.x);
            out.push(phi, x, normal, tau, perp(x).dot(&normal), speed * 2.0 * PI / n as f64);
        }
        out
    }

    /// Whether the polar angle `phi` lies on the control arc (modulo 2 pi).
    pub fn on_sigma(&self, phi: f64) -> bool {
        let [a, b] = self.sigma;
        let mut t = phi;
        while t < a {
            t += 2.0 * PI;
        }
        while t >= a + 2.0 * PI {
            t -= 2.0 * PI;
        }
        t > a && t < b
    }

    fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        match &self.outer {
            OuterBoundary::Circle { radius } => radius.to_bits().hash(&mut h),
            OuterBoundary::Star { radius, cos, sin } => {
                radius.to_bits().hash(&mut h);
                for v in cos.iter().chain(sin.iter()) {
                    v.to_bits().hash(&mut h);
                }
            }
        }
        self.sigma[0].to_bits().hash(&mut h);
        self.sigma[1].to_bits().hash(&mut h);
        h.finish()
    }
}

/// Points, unit normals (out of the fluid), unit tangents, rotational data
/// `(x - h)^perp . n` and trapezoidal arclength weights along a closed curve.
#[derive(Clone, Debug, Default)]
pub struct BoundarySampling {
    pub params: Vec<f64>,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub rot: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BoundarySampling {
    fn with_capacity(n: usize) -> Self {
        BoundarySampling {
            params: Vec::with_capacity(n),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            tangents: Vec::with_capacity(n),
            rot: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, s: f64, x: Vec2, n: Vec2, t: Vec2, r: f64, w: f64) {
        self.params.push(s);
        self.points.push(x);
        self.normals.push(n);
        self.tangents.push(t);
        self.rot.push(r);
        self.weights.push(w);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Normal data of the three rigid motions: `(n_1, n_2, (x - h)^perp . n)`.
    pub fn motion_data(&self, k: usize) -> Vec3 {
        Vec3::new(self.normals[k].x, self.normals[k].y, self.rot[k])
    }

    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|k| self.weights[k] * f(k)).sum()
    }
}

/// Sample `n` points of the placed solid boundary, uniformly in the conformal
/// angle. Normals point into the solid (out of the fluid).
pub fn place_solid(shape: &SolidShape, q: &Pose, n: usize) -> BoundarySampling {
    assert!(n >= 16, "place_solid needs at least 16 samples");
    let mut out = BoundarySampling::with_capacity(n);
    for k in 0..n {
        let s = 2.0 * PI * k as f64 / n as f64;
        let b = conformal_boundary(shape, q, s);
        let speed = shape.reference_boundary(s).1.norm();
        out.push(s, b.point, b.normal, b.tangent, perp(b.point - q.h).dot(&b.normal), speed * 2.0 * PI / n as f64);
    }
    out
}

/// One placed boundary point with its frame and `|Psi'|` at that parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub point: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub jacobian_factor: f64,
}

pub fn conformal_boundary(shape: &SolidShape, q: &Pose, s: f64) -> BoundaryPoint {
    let (x, dx) = shape.reference_boundary(s);
    let tangent = rotate(q.theta, dx / dx.norm());
    BoundaryPoint {
        point: q.place(x, shape.h0()),
        normal: perp(tangent),
        tangent,
        jacobian_factor: shape.jacobian_factor(s),
    }
}

/// Distance between the placed solid and the outer boundary; negative when
/// the sampled solid pokes through the wall.
pub fn clearance(shape: &SolidShape, domain: &DomainSpec, q: &Pose) -> f64 {
    let solid = place_solid(shape, q, 1024);
    match domain.outer() {
        OuterBoundary::Circle { radius } => solid
            .points
            .iter()
            .map(|x| radius - x.norm())
            .fold(f64::INFINITY, f64::min),
        OuterBoundary::Star { .. } => {
            let outer = domain.outer_sampling(2048);
            let mut best = f64::INFINITY;
            let mut outside = false;
            for x in &solid.points {
                let phi = x.y.atan2(x.x);
                if x.norm() > domain.radius_at(phi).0 {
                    outside = true;
                }
                for y in &outer.points {
                    best = best.min((x - y).norm());
                }
            }
            if outside {
                -best
            } else {
                best
            }
        }
    }
}

/// Membership in the admissible set: clearance strictly above `delta`.
pub fn admissible(shape: &SolidShape, domain: &DomainSpec, q: &Pose) -> bool {
    clearance(shape, domain, q) > domain.delta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ellipse() -> SolidShape {
        SolidShape::joukowski(0.3, 1.0, 0.5).unwrap()
    }

    #[test]
    fn disk_normals_point_into_solid() {
        let disk = SolidShape::disk(1.0, 1.0, 0.5).unwrap();
        let s = place_solid(&disk, &Pose::origin(), 32);
        for k in 0..s.len() {
            assert_relative_eq!(s.normals[k], -s.points[k], epsilon = 1e-14);
            assert!(s.rot[k].abs() < 1e-14);
        }
    }

    #[test]
    fn translation_moves_points_only() {
        let e = ellipse();
        let a = place_solid(&e, &Pose::origin(), 40);
        let b = place_solid(&e, &Pose::new(0.4, -1.2, 0.0), 40);
        for k in 0..40 {
            assert_relative_eq!(b.points[k] - a.points[k], Vec2::new(0.4, -1.2), epsilon = 1e-14);
            assert_relative_eq!(b.normals[k], a.normals[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn quarter_turn_of_ellipse() {
        let e = ellipse();
        let b = conformal_boundary(&e, &Pose::new(0.0, 0.0, PI / 2.0), 0.0);
        assert_relative_eq!(b.point, Vec2::new(0.0, 1.3), epsilon = 1e-14);
    }

    #[test]
    fn jacobian_factor_is_modulus_of_derivative() {
        let e = ellipse();
        assert_relative_eq!(e.jacobian_factor(0.0), 0.7, epsilon = 1e-14);
        assert_relative_eq!(e.jacobian_factor(PI / 2.0), 1.3, epsilon = 1e-14);
        let d = SolidShape::disk(1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(d.jacobian_factor(0.3), 1.0);
        // independent oracle: finite-difference Jacobian determinant of the real map
        let h = 1e-6;
        let f = |x: f64, y: f64| e.map(C64::new(x, y));
        let p = C64::new(0.0, 1.0);
        let dx = (f(p.re + h, p.im) - f(p.re - h, p.im)) / (2.0 * h);
        let dy = (f(p.re, p.im + h) - f(p.re, p.im - h)) / (2.0 * h);
        let det = dx.re * dy.im - dx.im * dy.re;
        assert_relative_eq!(det.sqrt(), e.jacobian_factor(PI / 2.0), epsilon = 1e-8);
    }

    #[test]
    fn clearance_examples() {
        let dom = DomainSpec::disk(10.0, [-PI / 4.0, PI / 4.0], 1.0).unwrap();
        let disk = SolidShape::disk(1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(clearance(&disk, &dom, &Pose::new(2.0, 0.0, 0.0)), 7.0, epsilon = 1e-12);
        assert_relative_eq!(clearance(&disk, &dom, &Pose::origin()), 9.0, epsilon = 1e-12);
        assert_relative_eq!(clearance(&ellipse(), &dom, &Pose::origin()), 8.7, epsilon = 1e-12);
        assert!(clearance(&disk, &dom, &Pose::new(9.5, 0.0, 0.0)) < 0.0);
    }

    #[test]
    fn closed_curve_identities() {
        let e = ellipse();
        let s = place_solid(&e, &Pose::new(0.3, 0.1, 0.7), 128);
        let (mut wn, mut wr) = (Vec2::zeros(), 0.0);
        for k in 0..s.len() {
            wn += s.normals[k] * s.weights[k];
            wr += s.rot[k] * s.weights[k];
        }
        let per = s.perimeter();
        assert!(wn.norm() <= 1e-8 * per);
        assert!(wr.abs() <= 1e-8 * per * 2.6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SolidShape::joukowski(1.0, 1.0, 1.0).is_err());
        assert!(SolidShape::disk(1.0, 0.0, 1.0).is_err());
        assert!(DomainSpec::disk(10.0, [0.5, 0.1], 1.0).is_err());
        assert!(DomainSpec::disk(10.0, [0.0, 1.0], 10.0).is_err());
    }

    #[test]
    fn ellipse_centroid_at_origin() {
        assert!(ellipse().h0().norm() < 1e-14);
    }

    #[test]
    fn sigma_membership_wraps() {
        let dom = DomainSpec::disk(10.0, [-PI / 4.0, PI / 4.0], 1.0).unwrap();
        assert!(dom.on_sigma(0.1));
        assert!(dom.on_sigma(2.0 * PI - 0.1));
        assert!(!dom.on_sigma(PI));
    }
}
