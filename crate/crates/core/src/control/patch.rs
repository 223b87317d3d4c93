//! Local harmonic patches around the solid, their extension to potentials
//! driven from the control arc, and the zero-mean combination of candidates.

use std::f64::consts::PI;

use nalgebra::{Matrix3x4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotate, Pose, SolidShape, Vec2, Vec3, C64};
use crate::laplace::{evaluate_shared, HarmonicField, Solver};
use crate::linalg::{null_vector_3x4, Pinv};

/// Harmonic function on `|zeta| >= 1` (conformal plane) built from a
/// truncated Laurent series:
/// `sum_k (r^k + r^-k) / (2k) * (-b_k cos k phi + a_k sin k phi)`,
/// where `a_k`, `b_k` are the cosine and sine Fourier coefficients of the
/// boundary profile. Its radial derivative vanishes on `|zeta| = 1` and its
/// angular derivative there is the truncated profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaurentPatch {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

/// Fourier-fit `beta` on the unit circle and return the `k`-term patch.
pub fn local_harmonic_patch(beta: impl Fn(f64) -> f64, k: usize) -> LaurentPatch {
    assert!(k >= 1, "patch truncation must be at least 1");
    let n = (8 * k).max(2048);
    let samples: Vec<f64> = (0..n).map(|j| beta(2.0 * PI * j as f64 / n as f64)).collect();
    let table: Vec<(f64, f64)> = (0..n).map(|j| (2.0 * PI * j as f64 / n as f64).sin_cos()).collect();
    let mut cos = vec![0.0; k];
    let mut sin = vec![0.0; k];
    for m in 1..=k {
        let (mut a, mut b) = (0.0, 0.0);
        for (j, v) in samples.iter().enumerate() {
            let (s, c) = table[m * j % n];
            a += v * c;
            b += v * s;
        }
        cos[m - 1] = 2.0 * a / n as f64;
        sin[m - 1] = 2.0 * b / n as f64;
    }
    LaurentPatch { cos, sin }
}

impl LaurentPatch {
    pub fn order(&self) -> usize {
        self.cos.len()
    }

    pub fn is_zero(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&x| x == 0.0)
    }

    /// Complex potential `F` with `Re F` the patch, and `F'`.
    pub fn complex(&self, z: C64) -> (C64, C64) {
        let i = C64::i();
        let inv = z.inv();
        let (mut f, mut df) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let mut zp = C64::new(1.0, 0.0); // z^(k-1)
        let mut zm = inv * inv; // z^(-k-1)
        for k in 1..=self.order() {
            let (a, b) = (self.cos[k - 1], self.sin[k - 1]);
            let kf = k as f64;
            let zk = zp * z;
            let z_k = zm * z;
            f += (-(zk + z_k) * b + (-i * zk + i * z_k) * a) / (2.0 * kf);
            df += (-(zp - zm) * b + (-i * zp - i * zm) * a) * 0.5;
            zp *= z;
            zm *= inv;
        }
        (f, df)
    }

    /// Value at polar coordinates of the conformal plane.
    pub fn value(&self, r: f64, phi: f64) -> f64 {
        self.complex(C64::from_polar(r, phi)).0.re
    }

    /// Gradient in the conformal plane as `(d/dr, d/dphi)`.
    pub fn polar_gradient(&self, r: f64, phi: f64) -> (f64, f64) {
        let z = C64::from_polar(r, phi);
        let g = self.complex(z).1.conj();
        let er = C64::from_polar(1.0, phi);
        let dr = g.re * er.re + g.im * er.im;
        let dphi = r * (-g.re * er.im + g.im * er.re);
        (dr, dphi)
    }

    /// Physical gradient of the patch transported to the placed solid, at the
    /// image of `zeta`.
    pub fn physical_gradient(&self, shape: &SolidShape, q: &Pose, z: C64) -> Vec2 {
        let g = (self.complex(z).1 / shape.map_deriv(z)).conj();
        rotate(q.theta, Vec2::new(g.re, g.im))
    }
}

/// Extension fit of one patch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    /// Control-arc coefficients of the fitted potential.
    pub coeffs: Vec<f64>,
    /// Relative least-squares mismatch of gradients on the collar.
    pub eta: f64,
}

/// Collar rings `|zeta| = rho` around the solid used by the extension fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollarSpec {
    pub radii: [f64; 2],
    pub points: usize,
}

fn collar(shape: &SolidShape, q: &Pose, spec: &CollarSpec) -> Vec<(C64, Vec2)> {
    let mut out = Vec::with_capacity(2 * spec.points);
    for &rho in &spec.radii {
        for k in 0..spec.points {
            let z = C64::from_polar(rho, 2.0 * PI * k as f64 / spec.points as f64);
            let x = shape.map(z);
            out.push((z, q.place(Vec2::new(x.re, x.im), shape.h0())));
        }
    }
    out
}

/// Fit each patch by a potential driven from the control arc (zero normal
/// derivative on the solid and on the wall off the arc), matching gradients
/// on the collar in least squares. Returns the fits even when the mismatch
/// is large; see [`harmonic_extension`] for the checked variant.
pub fn fit_extensions(
    solver: &Solver,
    q: &Pose,
    patches: &[LaurentPatch],
    spec: &CollarSpec,
) -> Result<Vec<Extension>> {
    let tier = solver.tier_for(q)?;
    let (basis, _) = solver.control_basis(q, tier)?;
    let shape = solver.shape();
    let pts = collar(shape, q, spec);
    let m = basis.len();
    let refs: Vec<&HarmonicField> = basis.iter().collect();
    let mut a = faer::Mat::<f64>::zeros(2 * pts.len(), m);
    for (i, (_, x)) in pts.iter().enumerate() {
        for (j, (_, g)) in evaluate_shared(&refs, *x).into_iter().enumerate() {
            a.write(2 * i, j, g.x);
            a.write(2 * i + 1, j, g.y);
        }
    }
    let pinv = Pinv::new(a.as_ref(), 1e-12);
    Ok(patches
        .iter()
        .map(|p| {
            if p.is_zero() {
                return Extension {
                    coeffs: vec![0.0; m],
                    eta: 0.0,
                };
            }
            let mut b = vec![0.0; 2 * pts.len()];
            for (i, (z, _)) in pts.iter().enumerate() {
                let g = p.physical_gradient(shape, q, *z);
                b[2 * i] = g.x;
                b[2 * i + 1] = g.y;
            }
            let c = pinv.solve_vec(&b);
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, bi) in b.iter().enumerate() {
                let fit: f64 = (0..m).map(|j| a.read(i, j) * c[j]).sum();
                num += (fit - bi).powi(2);
                den += bi * bi;
            }
            Extension {
                coeffs: c,
                eta: (num / den).sqrt(),
            }
        })
        .collect())
}

/// [`fit_extensions`] failing with the worst mismatch when it exceeds `tol`.
pub fn harmonic_extension(
    solver: &Solver,
    q: &Pose,
    patches: &[LaurentPatch],
    spec: &CollarSpec,
    tol: f64,
) -> Result<Vec<Extension>> {
    let fits = fit_extensions(solver, q, patches, spec)?;
    let worst = fits.iter().map(|e| e.eta).fold(0.0, f64::max);
    if worst > tol {
        return Err(Error::ExtensionResidualTooLarge { eta: worst });
    }
    Ok(fits)
}

/// Unit `lambda` with `sum_j lambda_j moments[j] = 0` (leading entry
/// positive) for four candidate mean moments.
pub fn zero_mean_weights(moments: &[Vec3; 4]) -> Vector4<f64> {
    let m = Matrix3x4::from_columns(moments);
    null_vector_3x4(&m)
}

/// Combine four coefficient vectors so that the mean moment
/// `int alpha dn Phi` of the result vanishes; `mean` maps coefficients to
/// that moment. Returns the combination and the weights.
pub fn zero_mean_combination(
    candidates: &[Vec<f64>; 4],
    mean: impl Fn(&[f64]) -> Vec3,
) -> (Vec<f64>, Vector4<f64>) {
    let moments = [
        mean(&candidates[0]),
        mean(&candidates[1]),
        mean(&candidates[2]),
        mean(&candidates[3]),
    ];
    let lambda = zero_mean_weights(&moments);
    let n = candidates[0].len();
    let combined = (0..n)
        .map(|i| (0..4).map(|j| lambda[j] * candidates[j][i]).sum())
        .collect();
    (combined, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sine_profile_gives_closed_form_patch() {
        let p = local_harmonic_patch(f64::sin, 4);
        for &(r, phi) in &[(1.0, 0.3), (1.7, -1.1), (2.5, 2.0)] {
            let exact = -0.5 * (r + 1.0 / r) * f64::cos(phi);
            assert_relative_eq!(p.value(r, phi), exact, epsilon = 1e-12);
        }
    }

    #[test]
    fn radial_derivative_vanishes_on_unit_circle() {
        let beta = |s: f64| (-(s - 1.0).powi(2) * 8.0).exp() * (s - 1.0);
        let p = local_harmonic_patch(beta, 32);
        let worst = (0..360)
            .map(|k| p.polar_gradient(1.0, k as f64 * PI / 180.0).0.abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-12, "{worst}");
    }

    #[test]
    fn angular_derivative_recovers_profile_as_order_grows() {
        let bump = crate::control::BoundaryBump {
            center: 0.5,
            width: 0.4,
            amplitude: 1.0,
        };
        let err = |k: usize| {
            let p = local_harmonic_patch(|s| bump.value(s), k);
            let n = 720;
            ((0..n)
                .map(|j| {
                    let s = 2.0 * PI * j as f64 / n as f64;
                    (p.polar_gradient(1.0, s).1 - bump.value(s)).powi(2)
                })
                .sum::<f64>()
                / n as f64)
                .sqrt()
        };
        let (e1, e2, e3) = (err(16), err(32), err(64));
        assert!(e2 < e1 && e3 < e2 && e3 < 0.2 * e1, "{e1} {e2} {e3}");
    }

    #[test]
    fn zero_mean_weights_are_unit_and_annihilate() {
        let m = [
            Vec3::new(1.0, 0.2, -0.3),
            Vec3::new(0.1, 1.0, 0.4),
            Vec3::new(-0.5, 0.3, 1.0),
            Vec3::new(0.7, -0.2, 0.1),
        ];
        let l = zero_mean_weights(&m);
        let r: Vec3 = (0..4).map(|j| m[j] * l[j]).sum();
        assert!(r.norm() < 1e-12);
        assert_relative_eq!(l.norm(), 1.0, epsilon = 1e-14);
        let doubled = m.map(|v| 2.0 * v);
        let l2 = zero_mean_weights(&doubled);
        assert!((l - l2).norm() < 1e-12);
    }

    #[test]
    fn candidate_with_zero_moment_is_selected() {
        let m = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::zeros(),
            Vec3::new(0.0, 0.0, 1.0),
        ];
        let l = zero_mean_weights(&m);
        assert_relative_eq!(l[2], 1.0, epsilon = 1e-12);
    }
}
