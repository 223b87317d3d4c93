//! Flux-free boundary profiles on the control arc and the harmonic fields
//! they drive in the outer domain (solid absent).

use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;

use super::{kernel_grad, HarmonicField, SolveReport, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Vec2};
use crate::linalg::{gauss_legendre, legendre, Pinv};

/// Basis `g_m`, `m = 1..M`, of normal-velocity profiles on the control arc.
///
/// Each profile is the arclength derivative of `(1 - t^2)^p P_{m-1}(t)`, with
/// `t` the affine coordinate of the arc, so its integral over the arc is
/// exactly zero. Profiles are normalized to unit `L^2(arc)` norm.
#[derive(Clone, Debug)]
pub struct SigmaBasis {
    sigma: [f64; 2],
    modes: usize,
    power: i32,
    norms: Vec<f64>,
    domain: DomainSpec,
    fields: Vec<HarmonicField>,
    report: SolveReport,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl SigmaBasis {
    pub fn new(domain: &DomainSpec, cfg: &SolverConfig) -> Result<Self> {
        let sc = cfg.sigma;
        if sc.modes == 0 || sc.window_power < 2 {
            return Err(Error::InvalidScenario("control basis needs modes >= 1 and window power >= 2".into()));
        }
        let (gx, gw) = gauss_legendre(160);
        let sigma = domain.sigma();
        let half = 0.5 * (sigma[1] - sigma[0]);
        let mid = 0.5 * (sigma[1] + sigma[0]);
        let mut nodes = Vec::with_capacity(gx.len());
        let mut weights = Vec::with_capacity(gx.len());
        for (t, w) in gx.iter().zip(gw.iter()) {
            let phi = mid + half * t;
            nodes.push(phi);
            weights.push(w * half * domain.boundary_point(phi).1.norm());
        }
        let mut basis = SigmaBasis {
            sigma,
            modes: sc.modes,
            power: sc.window_power,
            norms: vec![1.0; sc.modes],
            domain: domain.clone(),
            fields: Vec::new(),
            report: SolveReport::default(),
            nodes,
            weights,
        };
        let mut sq = vec![0.0; sc.modes];
        for (phi, w) in basis.nodes.iter().zip(basis.weights.iter()) {
            for (acc, g) in sq.iter_mut().zip(basis.raw(*phi)) {
                *acc += w * g * g;
            }
        }
        basis.norms = sq.iter().map(|s| 1.0 / s.sqrt()).collect();
        basis.solve(cfg)?;
        Ok(basis)
    }

    /// Affine arc coordinate of `phi` (any branch), or `None` off the arc.
    fn arc_coordinate(&self, phi: f64) -> Option<f64> {
        let [a, b] = self.sigma;
        let mut p = phi;
        while p < a {
            p += 2.0 * PI;
        }
        while p >= a + 2.0 * PI {
            p -= 2.0 * PI;
        }
        if p >= b {
            return None;
        }
        Some((2.0 * p - a - b) / (b - a))
    }

    fn raw(&self, phi: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        let Some(t) = self.arc_coordinate(phi) else { return out };
        let (p, d) = legendre(self.modes, t);
        let one = 1.0 - t * t;
        let pw = self.power as f64;
        let wm1 = one.powi(self.power - 1);
        let dt_dphi = 2.0 / (self.sigma[1] - self.sigma[0]);
        let speed = self.domain.boundary_point(phi).1.norm();
        for m in 0..self.modes {
            let dw = -2.0 * pw * t * wm1 * p[m] + one * wm1 * d[m];
            out[m] = dw * dt_dphi / speed;
        }
        out
    }

    /// All normalized profiles at polar angle `phi` (zero off the arc).
    pub fn traces(&self, phi: f64) -> Vec<f64> {
        let mut r = self.raw(phi);
        for (x, n) in r.iter_mut().zip(self.norms.iter()) {
            *x *= n;
        }
        r
    }

    /// `g(phi) = sum_m c_m g_m(phi)`.
    pub fn profile(&self, coeffs: &[f64], phi: f64) -> f64 {
        self.traces(phi).iter().zip(coeffs).map(|(g, c)| g * c).sum()
    }

    /// Gauss nodes (polar angles) and arclength weights on the arc.
    pub fn arc_quadrature(&self) -> (&[f64], &[f64]) {
        (&self.nodes, &self.weights)
    }

    /// Quadrature value of `int_arc g`; zero analytically for every coefficient vector.
    pub fn quadrature_flux(&self, coeffs: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(phi, w)| w * self.profile(coeffs, *phi))
            .sum()
    }

    /// Quadrature of `int_arc |g|`.
    pub fn profile_l1(&self, coeffs: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(phi, w)| w * self.profile(coeffs, *phi).abs())
            .sum()
    }

    /// `L^2(arc)` norm of the profile.
    pub fn profile_norm(&self, coeffs: &[f64]) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(phi, w)| w * self.profile(coeffs, *phi).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Outer-domain potentials with normal derivative `g_m` on the arc and zero
    /// on the rest of the wall.
    pub fn fields(&self) -> &[HarmonicField] {
        &self.fields
    }

    pub fn combination(&self, coeffs: &[f64]) -> HarmonicField {
        let terms: Vec<(f64, &HarmonicField)> = coeffs.iter().copied().zip(self.fields.iter()).collect();
        HarmonicField::combine(&terms)
    }

    pub fn report(&self) -> SolveReport {
        self.report
    }

    fn solve(&mut self, cfg: &SolverConfig) -> Result<()> {
        let sc = cfg.sigma;
        let sources: Vec<Vec2> = (0..sc.sources)
            .map(|k| {
                let phi = 2.0 * PI * (k as f64 + 0.5) / sc.sources as f64;
                self.domain.boundary_point(phi).0 * sc.offset
            })
            .collect();
        let colloc = self.domain.outer_sampling(sc.collocation);
        let a = Mat::<f64>::from_fn(colloc.len(), sources.len(), |i, j| {
            kernel_grad(colloc.points[i], sources[j]).dot(&colloc.normals[i])
        });
        let b = Mat::<f64>::from_fn(colloc.len(), self.modes, |i, m| self.traces(colloc.params[i])[m]);
        let pinv = Pinv::new(a.as_ref(), cfg.svd_cutoff * 1e-2);
        let x = pinv.solve(b.as_ref());

        let nv = cfg.verify_factor * sc.collocation;
        let mut worst: f64 = 0.0;
        let mut gmax: f64 = 0.0;
        let verify = self.domain.outer_sampling(nv);
        let dv = Mat::<f64>::from_fn(nv, sources.len(), |i, j| {
            let phi = verify.params[i] + PI / nv as f64;
            let (p, dp) = self.domain.boundary_point(phi);
            let t = dp / dp.norm();
            kernel_grad(p, sources[j]).dot(&Vec2::new(t.y, -t.x))
        });
        let got = &dv * &x;
        for i in 0..nv {
            let g = self.traces(verify.params[i] + PI / nv as f64);
            for m in 0..self.modes {
                worst = worst.max((got.read(i, m) - g[m]).abs());
                gmax = gmax.max(g[m].abs());
            }
        }
        let residual = worst / gmax.max(1.0);
        let tol = cfg.tolerance(true);
        self.report = SolveReport {
            tier: 0,
            residual,
            tolerance: tol,
            rank: pinv.rank(),
            condition: pinv.condition(),
        };
        if !(residual <= tol) {
            return Err(Error::ResidualTooLarge {
                achieved: residual,
                required: tol,
            });
        }
        let shared = Arc::new(sources);
        self.fields = (0..self.modes)
            .map(|m| {
                let s = (0..shared.len()).map(|j| x.read(j, m)).collect();
                HarmonicField::exterior(shared.clone(), s, cfg.eval_clearance)
            })
            .collect();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis() -> SigmaBasis {
        let d = DomainSpec::disk(10.0, [-PI / 4.0, PI / 4.0], 1.0).unwrap();
        SigmaBasis::new(&d, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn profiles_are_normalized_and_flux_free() {
        let b = basis();
        for m in 0..b.modes() {
            let mut c = vec![0.0; b.modes()];
            c[m] = 1.0;
            assert_relative_eq!(b.profile_norm(&c), 1.0, epsilon = 1e-12);
            assert!(b.quadrature_flux(&c).abs() < 1e-12);
        }
        assert_eq!(b.profile(&vec![1.0; 24], PI), 0.0);
    }

    #[test]
    fn outer_solve_verifies() {
        let b = basis();
        assert!(b.report().residual < 1e-8, "{:?}", b.report());
    }
}
