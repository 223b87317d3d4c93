//! Coefficients of the body's equation of motion: added inertia, Christoffel
//! symbols, circulation fields, control forces and the full right-hand side.

pub mod tile;

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::control::ImpulsiveControl;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geometry::{perp, BoundarySampling, DomainSpec, Mat3, Pose, SolidShape, Vec2, Vec3};
use crate::laplace::{evaluate_shared, HarmonicField, Solver, SolverConfig};
use tile::ChebCell;

pub use crate::laplace::KirchhoffSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsConfig {
    /// Finite-difference step in pose space (length and radians).
    pub fd_step: f64,
    /// Relative Richardson disagreement tolerated by [`Model::christoffel`].
    pub richardson_tol: f64,
    /// Interpolate the metric (and circulation fields) on Chebyshev cells.
    pub surrogate: bool,
    pub tile_size: f64,
    pub tile_degree: usize,
    pub execution: Execution,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            fd_step: 1e-4,
            richardson_tol: 1e-4,
            surrogate: true,
            tile_size: 0.2,
            tile_degree: 8,
            execution: Execution::Parallel,
        }
    }
}

/// Genuine, added and total inertia at one pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaModel {
    pub mg: Mat3,
    pub ma: Mat3,
    pub total: Mat3,
    /// `max |Ma - Ma^T| / trace(Ma)` before symmetrization.
    pub asymmetry: f64,
}

/// First-kind Christoffel symbols, `g[k][i][j]`, symmetric in `i, j`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChristoffelTensor {
    pub g: [[[f64; 3]; 3]; 3],
}

impl ChristoffelTensor {
    /// Assemble from the pose derivatives `dm[i] = d Ma / d q_i`.
    pub fn from_metric_derivatives(dm: &[Mat3; 3]) -> Self {
        let mut g = [[[0.0; 3]; 3]; 3];
        for k in 0..3 {
            for i in 0..3 {
                for j in i..3 {
                    let v = 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]);
                    g[k][i][j] = v;
                    g[k][j][i] = v;
                }
            }
        }
        ChristoffelTensor { g }
    }

    /// `<Gamma, p, p>_k = sum_ij g[k][i][j] p_i p_j`.
    pub fn contract(&self, p: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    out[k] += self.g[k][i][j] * p[i] * p[j];
                }
            }
        }
        out
    }
}

/// Every force contribution on the right-hand side at one instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ForceDecomposition {
    pub e: Vec3,
    pub b: Vec3,
    pub f1a: Vec3,
    pub f1b: Vec3,
    pub f1c: Vec3,
    pub f2: Vec3,
    pub gamma: f64,
}

impl ForceDecomposition {
    pub fn f1(&self) -> Vec3 {
        self.f1a + self.f1b + self.f1c * self.gamma
    }
}

/// Which right-hand-side terms to include.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub circulation: bool,
    pub f1a: bool,
    pub f1b: bool,
    pub f1c: bool,
    pub f2: bool,
}

impl Terms {
    pub const FULL: Terms = Terms {
        circulation: true,
        f1a: true,
        f1b: true,
        f1c: true,
        f2: true,
    };
    pub const INTERMEDIATE: Terms = Terms {
        circulation: false,
        f1a: true,
        f1b: false,
        f1c: false,
        f2: false,
    };
    pub const NONE: Terms = Terms {
        circulation: false,
        f1a: false,
        f1b: false,
        f1c: false,
        f2: false,
    };
}

/// Acceleration and the forces that produced it.
#[derive(Clone, Copy, Debug)]
pub struct Rhs {
    pub acc: Vec3,
    pub forces: ForceDecomposition,
    pub total: Mat3,
    pub christoffel: Vec3,
}

type CellKey = [i64; 3];

/// Dynamics of one solid in one domain.
pub struct Model {
    solver: Solver,
    cfg: DynamicsConfig,
    metric_cells: Mutex<HashMap<CellKey, Arc<ChebCell>>>,
    circulation_cells: Mutex<HashMap<CellKey, Arc<ChebCell>>>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model").field("solver", &self.solver).field("cfg", &self.cfg).finish()
    }
}

impl Model {
    pub fn new(shape: SolidShape, domain: DomainSpec, solver: SolverConfig, cfg: DynamicsConfig) -> Result<Self> {
        if !(cfg.fd_step > 0.0) || !(cfg.tile_size > 0.0) || cfg.tile_degree < 2 || cfg.tile_degree > 24 {
            return Err(Error::InvalidScenario("invalid finite-difference step or surrogate cell".into()));
        }
        Ok(Model {
            solver: Solver::new(shape, domain, solver)?,
            cfg,
            metric_cells: Mutex::new(HashMap::new()),
            circulation_cells: Mutex::new(HashMap::new()),
        })
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn shape(&self) -> &SolidShape {
        self.solver.shape()
    }

    pub fn domain(&self) -> &DomainSpec {
        self.solver.domain()
    }

    pub fn config(&self) -> &DynamicsConfig {
        &self.cfg
    }

    pub fn kirchhoff(&self, q: &Pose) -> Result<Arc<KirchhoffSet>> {
        self.solver.kirchhoff(q)
    }

    fn added_mass_raw(&self, q: &Pose, min_tier: usize) -> Result<(Mat3, f64)> {
        let set = self.solver.kirchhoff_from(q, min_tier)?;
        let quad = self.solver.quadrature(q);
        let refs: Vec<&HarmonicField> = set.fields.iter().collect();
        let mut m = Mat3::zeros();
        for k in 0..quad.len() {
            let ev = evaluate_shared(&refs, quad.points[k]);
            let d = quad.motion_data(k);
            for i in 0..3 {
                for j in 0..3 {
                    m[(i, j)] += quad.weights[k] * ev[i].0 * d[j];
                }
            }
        }
        let asym = (m - m.transpose()).amax() / m.trace().abs().max(f64::MIN_POSITIVE);
        Ok((0.5 * (m + m.transpose()), asym))
    }

    /// Added mass from boundary quadrature of `Phi_i dn Phi_j`, symmetrized.
    pub fn added_mass(&self, q: &Pose) -> Result<InertiaModel> {
        let (ma, asymmetry) = self.added_mass_raw(q, 0)?;
        let mg = self.shape().genuine_inertia();
        Ok(InertiaModel {
            mg,
            ma,
            total: mg + ma,
            asymmetry,
        })
    }

    fn metric_fd(&self, q: &Pose, h: f64, tier: usize) -> Result<[Mat3; 3]> {
        let mut dm = [Mat3::zeros(); 3];
        for (i, d) in dm.iter_mut().enumerate() {
            let mut e = Vec3::zeros();
            e[i] = h;
            let (p, _) = self.added_mass_raw(&q.offset(&e), tier)?;
            let (m, _) = self.added_mass_raw(&q.offset(&-e), tier)?;
            *d = (p - m) / (2.0 * h);
        }
        Ok(dm)
    }

    /// Christoffel symbols from central differences of the added mass with
    /// step `step`, checked against step `step / 2` and Richardson-extrapolated.
    pub fn christoffel(&self, q: &Pose, step: f64) -> Result<ChristoffelTensor> {
        Ok(ChristoffelTensor::from_metric_derivatives(&self.metric_derivatives_fd(q, step)?))
    }

    pub fn metric_derivatives_fd(&self, q: &Pose, step: f64) -> Result<[Mat3; 3]> {
        let tier = self.solver.tier_for(q)?;
        let coarse = self.metric_fd(q, step, tier)?;
        let fine = self.metric_fd(q, 0.5 * step, tier)?;
        let (ma, _) = self.added_mass_raw(q, tier)?;
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for i in 0..3 {
            diff = diff.max((coarse[i] - fine[i]).amax());
            size = size.max(fine[i].amax());
        }
        let disagreement = diff / size.max(1e-2 * ma.amax());
        if disagreement > self.cfg.richardson_tol {
            return Err(Error::StepTooLarge { disagreement });
        }
        let mut out = [Mat3::zeros(); 3];
        for i in 0..3 {
            out[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
        }
        Ok(out)
    }

    fn cell_key(&self, q: &Pose) -> CellKey {
        let v = q.to_vec3();
        let s = self.cfg.tile_size;
        [(v[0] / s).round() as i64, (v[1] / s).round() as i64, (v[2] / s).round() as i64]
    }

    fn cell<F>(&self, cells: &Mutex<HashMap<CellKey, Arc<ChebCell>>>, q: &Pose, node: F) -> Result<Arc<ChebCell>>
    where
        F: Fn(&Pose, usize) -> Result<Vec<f64>> + Sync + Send,
    {
        let key = self.cell_key(q);
        if let Some(c) = cells.lock().get(&key) {
            return Ok(c.clone());
        }
        let s = self.cfg.tile_size;
        let center = Vec3::new(key[0] as f64 * s, key[1] as f64 * s, key[2] as f64 * s);
        let tier = self.solver.tier_for(&Pose::from_vec3(&center))?;
        let nodes = ChebCell::nodes(center, 0.5 * s, self.cfg.tile_degree);
        let values: Vec<Result<Vec<f64>>> = self
            .cfg
            .execution
            .map(&nodes, |n| node(&Pose::from_vec3(n), tier));
        let values = values.into_iter().collect::<Result<Vec<_>>>()?;
        let cell = Arc::new(ChebCell::from_values(center, 0.5 * s, self.cfg.tile_degree, &values));
        cells.lock().insert(key, cell.clone());
        Ok(cell)
    }

    /// Added mass and its pose derivatives, from the Chebyshev surrogate when
    /// enabled and from finite differences otherwise.
    pub fn metric(&self, q: &Pose) -> Result<(Mat3, [Mat3; 3])> {
        if !self.cfg.surrogate {
            let (ma, _) = self.added_mass_raw(q, 0)?;
            return Ok((ma, self.metric_derivatives_fd(q, self.cfg.fd_step)?));
        }
        let cell = self.cell(&self.metric_cells, q, |p, tier| {
            let (m, _) = self.added_mass_raw(p, tier)?;
            Ok(vec![m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]])
        })?;
        let (v, g) = cell.eval(&q.to_vec3());
        let sym = |a: [f64; 6]| Mat3::new(a[0], a[1], a[2], a[1], a[3], a[4], a[2], a[4], a[5]);
        let ma = sym([v[0], v[1], v[2], v[3], v[4], v[5]]);
        let mut dm = [Mat3::zeros(); 3];
        for (i, d) in dm.iter_mut().enumerate() {
            *d = sym([g[0][i], g[1][i], g[2][i], g[3][i], g[4][i], g[5][i]]);
        }
        Ok((ma, dm))
    }

    /// Total inertia used by the integrators (surrogate-consistent).
    pub fn total_inertia(&self, q: &Pose) -> Result<Mat3> {
        Ok(self.shape().genuine_inertia() + self.metric(q)?.0)
    }

    /// Kinetic energy `0.5 p . (Mg + Ma(q)) p`.
    pub fn energy(&self, q: &Pose, p: &Vec3) -> Result<f64> {
        Ok(0.5 * p.dot(&(self.total_inertia(q)? * p)))
    }

    /// Circulation fields by boundary quadrature.
    pub fn circulation_fields_direct(&self, q: &Pose, min_tier: usize) -> Result<(Vec3, Vec3)> {
        let set = self.solver.kirchhoff_from(q, min_tier)?;
        let stream = self.solver.solve_stream(q)?;
        let quad = self.solver.quadrature(q);
        let refs: Vec<&HarmonicField> = set.fields.iter().collect();
        let mut e = Vec3::zeros();
        let mut b = Vec3::zeros();
        for k in 0..quad.len() {
            let x = quad.points[k];
            let ev = evaluate_shared(&refs, x);
            let dn_psi = stream.field.gradient(x).dot(&quad.normals[k]);
            let dn_phi = quad.motion_data(k);
            let dt_phi = Vec3::new(
                ev[0].1.dot(&quad.tangents[k]),
                ev[1].1.dot(&quad.tangents[k]),
                ev[2].1.dot(&quad.tangents[k]),
            );
            e -= 0.5 * quad.weights[k] * dn_psi * dn_psi * dn_phi;
            b += quad.weights[k] * dn_psi * dn_phi.cross(&dt_phi);
        }
        Ok((e, b))
    }

    pub fn circulation_fields(&self, q: &Pose) -> Result<(Vec3, Vec3)> {
        if !self.cfg.surrogate {
            return self.circulation_fields_direct(q, 0);
        }
        let cell = self.cell(&self.circulation_cells, q, |p, tier| {
            let (e, b) = self.circulation_fields_direct(p, tier)?;
            Ok(vec![e[0], e[1], e[2], b[0], b[1], b[2]])
        })?;
        let (v, _) = cell.eval(&q.to_vec3());
        Ok((Vec3::new(v[0], v[1], v[2]), Vec3::new(v[3], v[4], v[5])))
    }

    /// Control force terms for a potential `alpha` (zero normal derivative on
    /// the solid) with time derivative `alpha_dot` sampled at the quadrature
    /// nodes of [`Solver::quadrature`].
    pub fn control_forces(
        &self,
        q: &Pose,
        p: &Vec3,
        gamma: f64,
        alpha: &HarmonicField,
        alpha_dot: Option<&[f64]>,
    ) -> Result<ForceDecomposition> {
        let set = self.solver.kirchhoff(q)?;
        let quad = self.solver.quadrature(q);
        let stream = if gamma != 0.0 { Some(self.solver.solve_stream(q)?) } else { None };
        Ok(self.forces_on(&quad, &set, stream.as_ref().map(|s| &s.field), p, gamma, alpha, alpha_dot))
    }

    #[allow(clippy::too_many_arguments)]
    fn forces_on(
        &self,
        quad: &BoundarySampling,
        set: &KirchhoffSet,
        psi: Option<&HarmonicField>,
        p: &Vec3,
        gamma: f64,
        alpha: &HarmonicField,
        alpha_dot: Option<&[f64]>,
    ) -> ForceDecomposition {
        let refs: Vec<&HarmonicField> = set.fields.iter().collect();
        let mut f = ForceDecomposition {
            gamma,
            ..Default::default()
        };
        for k in 0..quad.len() {
            let x = quad.points[k];
            let w = quad.weights[k];
            let dn_phi = quad.motion_data(k);
            let ga = alpha.gradient(x);
            f.f1a -= 0.5 * w * ga.norm_squared() * dn_phi;
            if *p != Vec3::zeros() {
                let ev = evaluate_shared(&refs, x);
                let gp: Vec2 = ev[0].1 * p[0] + ev[1].1 * p[1] + ev[2].1 * p[2];
                f.f1b -= w * ga.dot(&gp) * dn_phi;
            }
            if let Some(psi) = psi {
                f.f1c -= w * ga.dot(&perp(psi.gradient(x))) * dn_phi;
            }
            if let Some(ad) = alpha_dot {
                f.f2 -= w * ad[k] * dn_phi;
            }
        }
        f
    }

    /// Fluid velocity `grad(p . Phi) + gamma grad^perp psi + grad A[q, g]`.
    pub fn reconstruct_velocity(
        &self,
        q: &Pose,
        p: &Vec3,
        gamma: f64,
        control: Option<&HarmonicField>,
        x: Vec2,
    ) -> Result<Vec2> {
        let set = self.solver.kirchhoff(q)?;
        let mut u = Vec2::zeros();
        for i in 0..3 {
            if p[i] != 0.0 {
                u += set.fields[i].evaluate(x)?.1 * p[i];
            }
        }
        if gamma != 0.0 {
            let st = self.solver.solve_stream(q)?;
            u += perp(st.field.evaluate(x)?.1) * gamma;
        }
        if let Some(a) = control {
            u += a.evaluate(x)?.1;
        }
        Ok(u)
    }

    /// Right-hand side of the controlled equation of motion at time `t`.
    pub fn rhs(
        &self,
        q: &Pose,
        p: &Vec3,
        gamma: f64,
        control: Option<&ImpulsiveControl>,
        t: f64,
        terms: Terms,
    ) -> Result<Rhs> {
        let (ma, dm) = self.metric(q)?;
        let total = self.shape().genuine_inertia() + ma;
        let chr = ChristoffelTensor::from_metric_derivatives(&dm).contract(p);
        let mut force = -chr;
        let mut forces = ForceDecomposition {
            gamma,
            ..Default::default()
        };
        if terms.circulation && gamma != 0.0 {
            let (e, b) = self.circulation_fields(q)?;
            forces.e = e;
            forces.b = b;
            force += gamma * gamma * e + gamma * p.cross(&b);
        }
        let any_control = terms.f1a || terms.f1b || terms.f1c || terms.f2;
        if let (Some(ctrl), true) = (control, any_control) {
            let pulses = ctrl.active(t);
            if !pulses.is_empty() {
                let cf = self.pulse_forces(q, p, gamma, &pulses, terms)?;
                forces.f1a = cf.f1a;
                forces.f1b = cf.f1b;
                forces.f1c = cf.f1c;
                forces.f2 = cf.f2;
                force += cf.f1a + cf.f1b + gamma * cf.f1c + cf.f2;
            }
        }
        let acc = total
            .cholesky()
            .ok_or_else(|| Error::InvalidScenario("total inertia lost definiteness".into()))?
            .solve(&force);
        Ok(Rhs {
            acc,
            forces,
            total,
            christoffel: chr,
        })
    }

    fn pulse_forces(
        &self,
        q: &Pose,
        p: &Vec3,
        gamma: f64,
        pulses: &[crate::control::Pulse<'_>],
        terms: Terms,
    ) -> Result<ForceDecomposition> {
        let set = self.solver.kirchhoff(q)?;
        let tier = set.report.tier;
        let quad = self.solver.quadrature(q);
        let mut alpha_terms = Vec::new();
        let mut alpha_dot = vec![0.0; quad.len()];
        let speed = p.norm();
        for pulse in pulses {
            let (a, _) = self.solver.control_potential(q, pulse.coeffs, tier)?;
            if terms.f2 {
                for (k, x) in quad.points.iter().enumerate() {
                    alpha_dot[k] += pulse.beta_dot * a.value(*x);
                }
                if speed > 0.0 && pulse.beta != 0.0 {
                    let d = p * (self.cfg.fd_step / speed);
                    let (ap, _) = self.solver.control_potential(&q.offset(&d), pulse.coeffs, tier)?;
                    let (am, _) = self.solver.control_potential(&q.offset(&-d), pulse.coeffs, tier)?;
                    let scale = pulse.beta * speed / (2.0 * self.cfg.fd_step);
                    for (k, x) in quad.points.iter().enumerate() {
                        alpha_dot[k] += scale * (ap.value(*x) - am.value(*x));
                    }
                }
            }
            alpha_terms.push((pulse.beta, a));
        }
        let refs: Vec<(f64, &HarmonicField)> = alpha_terms.iter().map(|(b, a)| (*b, a)).collect();
        let alpha = HarmonicField::combine(&refs);
        let psi = if terms.f1c && gamma != 0.0 {
            Some(self.solver.solve_stream(q)?.field)
        } else {
            None
        };
        let pp = if terms.f1b { *p } else { Vec3::zeros() };
        let mut f = self.forces_on(&quad, &set, psi.as_ref(), &pp, gamma, &alpha, terms.f2.then_some(&alpha_dot[..]));
        if !terms.f1a {
            f.f1a = Vec3::zeros();
        }
        Ok(f)
    }
}
