//! Smooth compactly supported profiles: the time bump that shapes each pulse
//! and the zero-mean boundary bumps used to aim kinetic moments.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{conformal_boundary, Pose, SolidShape, Vec3};
use crate::linalg::gauss_legendre;

/// `exp(-1/(1-t^2))` on `(-1, 1)`, zero outside.
pub fn mollifier(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp()
    }
}

/// Derivative of [`mollifier`].
pub fn mollifier_deriv(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        let one = 1.0 - t * t;
        mollifier(t) * (-2.0 * t / (one * one))
    }
}

/// `int_{-1}^{1} f` for a function that vanishes to all orders at both ends.
fn integrate_unit(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(400);
    x.iter().zip(&w).map(|(t, wi)| wi * f(*t)).sum()
}

/// Pulse shape in time: `beta_eps(t) = eps^{-1/2} beta((t - eps) / eps)`,
/// supported on `[0, 2 eps]`, with `int beta^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeBump {
    pub epsilon: f64,
    /// Factor making the unit profile square-integrate to one.
    pub norm: f64,
}

impl TimeBump {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidScenario(format!("pulse width {epsilon} outside (0, 1)")));
        }
        let norm = 1.0 / integrate_unit(|t| mollifier(t).powi(2)).sqrt();
        Ok(TimeBump { epsilon, norm })
    }

    /// Unit profile on `[-1, 1]`.
    pub fn profile(&self, t: f64) -> f64 {
        self.norm * mollifier(t)
    }

    pub fn value(&self, t: f64) -> f64 {
        let e = self.epsilon;
        self.profile((t - e) / e) / e.sqrt()
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let e = self.epsilon;
        self.norm * mollifier_deriv((t - e) / e) / (e * e.sqrt())
    }

    /// `int beta_eps`, which scales like `sqrt(eps)`.
    pub fn integral(&self) -> f64 {
        self.epsilon.sqrt() * self.norm * integrate_unit(mollifier)
    }

    /// `int_0^{2 eps} beta_eps^2` by Gauss quadrature on the support.
    pub fn l2_squared(&self) -> f64 {
        let e = self.epsilon;
        integrate_unit(|t| self.value(e + e * t).powi(2)) * e
    }

    pub fn support(&self) -> [f64; 2] {
        [0.0, 2.0 * self.epsilon]
    }
}

/// Zero-mean bump on the solid boundary, written in the conformal angle:
/// `beta(s) = amplitude * d/ds mollifier((s - center) / width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

fn wrap(s: f64) -> f64 {
    let mut d = s.rem_euclid(2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    d
}

impl BoundaryBump {
    pub fn value(&self, s: f64) -> f64 {
        let t = wrap(s - self.center) / self.width;
        self.amplitude * mollifier_deriv(t) / self.width
    }

    /// Gauss nodes (conformal angles) and weights covering the support.
    pub fn quadrature(&self, n: usize) -> Vec<(f64, f64)> {
        let (x, w) = gauss_legendre(n);
        x.iter()
            .zip(&w)
            .map(|(t, wi)| (self.center + self.width * t, wi * self.width))
            .collect()
    }

    /// `int beta^2 dn Phi / |Psi'| ds`: the moment the bump produces on the
    /// solid when it is the tangential derivative of a potential.
    pub fn moment(&self, shape: &SolidShape, q: &Pose) -> Vec3 {
        self.quadrature(96)
            .into_iter()
            .map(|(s, w)| {
                let b = conformal_boundary(shape, q, s);
                w * self.value(s).powi(2) / b.jacobian_factor * motion_vector(q, &b)
            })
            .sum()
    }
}

/// `(n, (x - h)^perp . n)` at a placed boundary point.
pub(crate) fn motion_vector(q: &Pose, b: &crate::geometry::BoundaryPoint) -> Vec3 {
    let r = b.point - q.h;
    Vec3::new(b.normal.x, b.normal.y, -r.y * b.normal.x + r.x * b.normal.y)
}

/// Bumps centered at `centers` with half-width `width`, each scaled so the
/// magnitude of its moment at the center matches the corresponding
/// direction. Supports must be pairwise disjoint.
pub fn boundary_bumps(
    shape: &SolidShape,
    q: &Pose,
    width: f64,
    centers: &[f64],
    directions: &[Vec3],
) -> Result<Vec<BoundaryBump>> {
    assert_eq!(centers.len(), directions.len());
    if !(width > 0.0 && width < PI) {
        return Err(Error::InvalidScenario(format!("bump width {width} outside (0, pi)")));
    }
    for i in 0..centers.len() {
        for j in 0..i {
            if wrap(centers[i] - centers[j]).abs() <= 2.0 * width {
                return Err(Error::SupportOverlap);
            }
        }
    }
    Ok(centers
        .iter()
        .zip(directions)
        .map(|(&c, d)| {
            let unit = BoundaryBump {
                center: c,
                width,
                amplitude: 1.0,
            };
            let b = conformal_boundary(shape, q, c);
            let at_center = motion_vector(q, &b).norm();
            // int (b'(t)/w)^2 / |Psi'| ds  with ds = w dt
            let weighted: f64 = unit
                .quadrature(96)
                .into_iter()
                .map(|(s, w)| w * unit.value(s).powi(2) / shape.jacobian_factor(s))
                .sum();
            let amplitude = if d.norm() == 0.0 || at_center == 0.0 {
                0.0
            } else {
                (d.norm() / (at_center * weighted)).sqrt()
            };
            BoundaryBump {
                center: c,
                width,
                amplitude,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_bump_is_unit_in_l2() {
        for &e in &[0.1, 0.01] {
            let b = TimeBump::new(e).unwrap();
            assert_relative_eq!(b.l2_squared(), 1.0, epsilon = 1e-8);
            assert_eq!(b.value(0.0), 0.0);
            assert_eq!(b.value(2.0 * e), 0.0);
        }
    }

    #[test]
    fn time_bump_peak_scales_like_inverse_root() {
        let a = TimeBump::new(0.2).unwrap();
        let b = TimeBump::new(0.1).unwrap();
        assert_relative_eq!(b.value(0.1) / a.value(0.2), 2f64.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn time_bump_derivative_matches_differences() {
        let b = TimeBump::new(0.1).unwrap();
        let t = 0.137;
        let h = 1e-6;
        let fd = (b.value(t + h) - b.value(t - h)) / (2.0 * h);
        assert_relative_eq!(b.deriv(t), fd, max_relative = 1e-6);
    }

    #[test]
    fn boundary_bumps_have_zero_mean_and_disjoint_support() {
        let shape = SolidShape::joukowski(0.3, 1.0, 0.5).unwrap();
        let q = Pose::new(0.1, -0.2, 0.3);
        let dirs = vec![Vec3::new(1.0, 0.0, 0.0); 3];
        let bumps = boundary_bumps(&shape, &q, 0.05, &[0.0, 0.2, 0.4], &dirs).unwrap();
        for b in &bumps {
            let mean: f64 = b.quadrature(64).into_iter().map(|(s, w)| w * b.value(s)).sum();
            assert!(mean.abs() < 1e-12, "{mean}");
        }
        for s in (0..2000).map(|k| 2.0 * PI * k as f64 / 2000.0) {
            assert_eq!(bumps[0].value(s) * bumps[1].value(s), 0.0);
            assert_eq!(bumps[1].value(s) * bumps[2].value(s), 0.0);
        }
        let err = boundary_bumps(&shape, &q, 0.05, &[0.0, 0.09], &dirs[..2]);
        assert_eq!(err.unwrap_err(), Error::SupportOverlap);
    }

    #[test]
    fn bump_direction_error_shrinks_with_width() {
        let shape = SolidShape::joukowski(0.3, 1.0, 0.5).unwrap();
        let q = Pose::origin();
        // offset the center by one width from the site, as in a bump cluster
        let site = 0.7;
        let target = motion_vector(&q, &conformal_boundary(&shape, &q, site));
        let err = |w: f64| {
            let b = boundary_bumps(&shape, &q, w, &[site + 2.0 * w], &[target]).unwrap();
            (b[0].moment(&shape, &q) - target).norm()
        };
        let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
        assert!(e2 < 0.6 * e1 && e3 < 0.6 * e2, "{e1} {e2} {e3}");
    }
}
