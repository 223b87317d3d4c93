//! Spatial control synthesis: a boundary profile on the control arc whose
//! potential carries a prescribed kinetic moment on the solid and no mean
//! moment.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::bump::boundary_bumps;
use super::cone::{cone_points_general, ConeSites};
use super::patch::{harmonic_extension, local_harmonic_patch, zero_mean_combination, CollarSpec};
use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::geometry::{place_solid, Pose, Vec3};
use crate::laplace::HarmonicField;

/// Quadratic and linear moment maps of the control basis at one pose:
/// `moment_j(c) = c^T G_j c = int |grad alpha_c|^2 dn Phi_j` and
/// `mean_j(c) = (L c)_j = int alpha_c dn Phi_j`.
#[derive(Clone, Debug)]
pub struct MomentMaps {
    pub pose: Pose,
    /// 2 for disks (no torque), 3 otherwise.
    pub dim: usize,
    pub quadratic: [DMatrix<f64>; 3],
    pub mean: DMatrix<f64>,
    /// Worst Neumann residual of the basis solves.
    pub residual: f64,
    pub tier: usize,
}

impl MomentMaps {
    pub fn at(model: &Model, q: &Pose) -> Result<Self> {
        let solver = model.solver();
        let tier = solver.tier_for(q)?;
        let (basis, report) = solver.control_basis(q, tier)?;
        let sigma_report = solver.sigma_basis()?.report();
        let quad = solver.quadrature(q);
        let m = basis.len();
        let mut grads = vec![Vec::with_capacity(m); quad.len()];
        let mut vals = vec![Vec::with_capacity(m); quad.len()];
        for f in &basis {
            for (k, x) in quad.points.iter().enumerate() {
                let (v, g) = f.value_grad(*x);
                vals[k].push(v);
                grads[k].push(g);
            }
        }
        let mut quadratic = [DMatrix::zeros(m, m), DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
        let mut mean = DMatrix::zeros(3, m);
        for k in 0..quad.len() {
            let d = quad.motion_data(k);
            let w = quad.weights[k];
            for a in 0..m {
                for b in a..m {
                    let dot = grads[k][a].dot(&grads[k][b]);
                    for j in 0..3 {
                        quadratic[j][(a, b)] += w * d[j] * dot;
                    }
                }
                for j in 0..3 {
                    mean[(j, a)] += w * d[j] * vals[k][a];
                }
            }
        }
        for g in quadratic.iter_mut() {
            for a in 0..m {
                for b in 0..a {
                    g[(a, b)] = g[(b, a)];
                }
            }
        }
        Ok(MomentMaps {
            pose: *q,
            dim: if model.shape().is_disk() { 2 } else { 3 },
            quadratic,
            mean,
            residual: report.residual.max(sigma_report.residual),
            tier,
        })
    }

    pub fn modes(&self) -> usize {
        self.mean.ncols()
    }

    pub fn moment(&self, c: &[f64]) -> Vec3 {
        self.bilinear(c, c)
    }

    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> Vec3 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        Vec3::new(
            a.dot(&(&self.quadratic[0] * &b)),
            a.dot(&(&self.quadratic[1] * &b)),
            a.dot(&(&self.quadratic[2] * &b)),
        )
    }

    pub fn mean_moment(&self, c: &[f64]) -> Vec3 {
        let v = &self.mean * DVector::from_column_slice(c);
        Vec3::new(v[0], v[1], v[2])
    }

    /// `(Vt, 1/s)` of the thin SVD of the controllable rows of the mean map.
    fn mean_svd(&self) -> (DMatrix<f64>, Vec<f64>) {
        let l = self.mean.rows(0, self.dim).into_owned();
        let svd = l.svd(false, true);
        let vt = svd.v_t.expect("requested");
        let inv = svd.singular_values.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
        (vt, inv)
    }

    /// Orthonormal basis of the kernel of the mean map, from the eigenvectors
    /// of the projector `I - V V^T` (eigenvalues exactly 0 or 1).
    pub fn null_basis(&self) -> DMatrix<f64> {
        let m = self.modes();
        let (vt, _) = self.mean_svd();
        let proj = DMatrix::identity(m, m) - vt.transpose() * &vt;
        let eig = SymmetricEigen::new(proj);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        DMatrix::from_fn(m, m - self.dim, |i, k| eig.eigenvectors[(i, order[k])])
    }

    /// Remove the component of `c` seen by the mean map.
    pub fn project_mean_free(&self, c: &[f64]) -> Vec<f64> {
        let (vt, _) = self.mean_svd();
        let x = DVector::from_column_slice(c);
        let y = &x - vt.transpose() * (&vt * &x);
        y.iter().copied().collect()
    }
}

/// Largest normal derivative of the potential of `coeffs` on the solid and on
/// the wall off the arc, sampled on a grid finer than the solver's, and the
/// largest profile value on the arc.
fn neumann_off_arc(model: &Model, q: &Pose, coeffs: &[f64]) -> Result<(f64, f64)> {
    let solver = model.solver();
    let tier = solver.tier_for(q)?;
    let (field, _) = solver.control_potential(q, coeffs, tier)?;
    let basis = solver.sigma_basis()?;
    let n = 4 * solver.config().quadrature_points;
    let solid = place_solid(model.shape(), q, n);
    let mut worst: f64 = 0.0;
    for (x, nrm) in solid.points.iter().zip(&solid.normals) {
        worst = worst.max(field.gradient(*x).dot(nrm).abs());
    }
    let outer = model.domain().outer_sampling(n);
    let mut gmax: f64 = 0.0;
    for k in 0..outer.len() {
        let phi = outer.params[k];
        if model.domain().on_sigma(phi) {
            gmax = gmax.max(basis.profile(coeffs, phi).abs());
        } else {
            worst = worst.max(field.gradient(outer.points[k]).dot(&outer.normals[k]).abs());
        }
    }
    Ok((worst, gmax))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Half-width (conformal angle) of the boundary bumps.
    pub bump_width: f64,
    /// Laurent truncation; 0 picks `8 / bump_width`.
    pub patch_order: usize,
    /// Minimum points per collar ring.
    pub collar_points: usize,
    pub extension_tol: f64,
    pub newton_iterations: usize,
    /// Moment tolerance is `tolerance_factor * (1 + |v|)`.
    pub tolerance_factor: f64,
    /// Allow the coefficient-space Gauss-Newton solve when the bump
    /// construction does not converge.
    pub fallback: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            bump_width: 0.02,
            patch_order: 0,
            collar_points: 512,
            extension_tol: 1e-2,
            newton_iterations: 50,
            tolerance_factor: 1e-3,
            fallback: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthesisStage {
    Zero,
    Pipeline,
    Fallback,
    Continued,
}

/// Diagnostics of the bump / patch / extension construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub attempts: usize,
    pub failure: Option<String>,
    pub bump_width: f64,
    pub sites: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda: Vec<[f64; 4]>,
    /// Worst collar mismatch of the extensions.
    pub eta: f64,
    /// Largest cross moment between direction fields over the largest own moment.
    pub cross_ratio: Option<f64>,
    pub iterations: usize,
    /// Best moment residual of the fixed-point correction, if it ran.
    pub residual: Option<f64>,
}

/// A boundary profile `g = sum_m coeffs[m] g_m` on the control arc together
/// with what its potential achieves at `pose`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialControl {
    pub pose: Pose,
    pub target: Vec3,
    pub coeffs: Vec<f64>,
    /// `int |grad alpha|^2 dn Phi`.
    pub moment: Vec3,
    /// `int alpha dn Phi`.
    pub mean_moment: Vec3,
    /// Quadrature of `int_arc g`.
    pub flux: f64,
    /// `int_arc |g|`, the scale against which `flux` is roundoff.
    pub flux_scale: f64,
    /// Largest normal derivative of the potential on the solid and on the
    /// wall off the arc, over `max(1, sup |g|)`.
    pub neumann_residual: f64,
    /// The same without the scaling.
    pub neumann_abs: f64,
    pub stage: SynthesisStage,
    pub pipeline: PipelineReport,
    pub fallback_iterations: usize,
}

impl SpatialControl {
    pub fn zero(pose: Pose, modes: usize) -> Self {
        SpatialControl {
            pose,
            target: Vec3::zeros(),
            coeffs: vec![0.0; modes],
            moment: Vec3::zeros(),
            mean_moment: Vec3::zeros(),
            flux: 0.0,
            flux_scale: 0.0,
            neumann_residual: 0.0,
            neumann_abs: 0.0,
            stage: SynthesisStage::Zero,
            pipeline: PipelineReport::default(),
            fallback_iterations: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// The same profile multiplied by `s`; moments scale by `s^2` and `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out.target *= s * s;
        out.moment *= s * s;
        out.mean_moment *= s;
        out.flux *= s;
        out.flux_scale *= s.abs();
        out.neumann_abs *= s.abs();
        out
    }

    /// `|int_arc g| / int_arc |g|`.
    pub fn relative_flux(&self) -> f64 {
        if self.flux_scale > 0.0 {
            self.flux.abs() / self.flux_scale
        } else {
            0.0
        }
    }

    /// `|moment - target|` over the controllable components.
    pub fn moment_error(&self, dim: usize) -> f64 {
        (self.moment - self.target).rows(0, dim).norm()
    }

    /// Potential of the profile at its pose.
    pub fn field(&self, model: &Model) -> Result<HarmonicField> {
        let tier = model.solver().tier_for(&self.pose)?;
        Ok(model.solver().control_potential(&self.pose, &self.coeffs, tier)?.0)
    }
}

/// Synthesize a control at `q` whose potential has kinetic moment `v` and
/// zero mean moment. For disks only the two translational components of
/// `v` are controllable and the third is ignored.
pub fn synthesize_spatial_control(
    model: &Model,
    q: &Pose,
    v: &Vec3,
    cfg: &SynthesisConfig,
) -> Result<SpatialControl> {
    let maps = MomentMaps::at(model, q)?;
    synthesize_with(model, &maps, v, cfg)
}

pub fn synthesize_with(model: &Model, maps: &MomentMaps, v: &Vec3, cfg: &SynthesisConfig) -> Result<SpatialControl> {
    synthesize_inner(model, maps, v, cfg, None)
}

/// Continue a previous solution to a nearby pose and target: Gauss-Newton in
/// coefficient space started from `previous`, so that small changes of the
/// request give small changes of the profile (the moment equations alone
/// leave the sign and much of the profile free).
pub fn synthesize_continued(
    model: &Model,
    q: &Pose,
    v: &Vec3,
    cfg: &SynthesisConfig,
    previous: &[f64],
) -> Result<SpatialControl> {
    let maps = MomentMaps::at(model, q)?;
    synthesize_inner(model, &maps, v, cfg, Some(previous))
}

fn synthesize_inner(
    model: &Model,
    maps: &MomentMaps,
    v: &Vec3,
    cfg: &SynthesisConfig,
    previous: Option<&[f64]>,
) -> Result<SpatialControl> {
    let dim = maps.dim;
    let mut target = *v;
    if dim == 2 {
        target[2] = 0.0;
    }
    let m = maps.modes();
    if target.norm() == 0.0 {
        return Ok(SpatialControl::zero(maps.pose, m));
    }
    let tol = cfg.tolerance_factor * (1.0 + target.norm());

    let mut report = PipelineReport::default();
    let mut found: Option<(Vec<f64>, SynthesisStage)> = None;
    let mut fallback_iterations = 0;
    if let Some(prev) = previous.filter(|p| p.len() == m && p.iter().any(|&x| x != 0.0)) {
        let (c, its, resid) = gauss_newton(maps, &target, Some(prev));
        fallback_iterations = its;
        if resid <= tol {
            found = Some((c, SynthesisStage::Continued));
        }
    }
    for attempt in 0..2 {
        if found.is_some() {
            break;
        }
        let width = cfg.bump_width / (1 << attempt) as f64;
        report.attempts = attempt + 1;
        match pipeline(model, maps, &target, cfg, width, tol, &mut report) {
            Ok(c) => {
                found = Some((c, SynthesisStage::Pipeline));
                break;
            }
            Err(e) => report.failure = Some(e.to_string()),
        }
    }
    if found.is_none() && cfg.fallback {
        let (c, its, resid) = gauss_newton(maps, &target, None);
        fallback_iterations += its;
        if resid <= tol {
            found = Some((c, SynthesisStage::Fallback));
        } else {
            report.residual = Some(report.residual.map_or(resid, |r| r.min(resid)));
        }
    }
    let Some((coeffs, stage)) = found else {
        return Err(Error::NewtonStalled {
            best_residual: report.residual.unwrap_or(f64::INFINITY),
        });
    };
    let coeffs = maps.project_mean_free(&coeffs);
    let basis = model.solver().sigma_basis()?;
    let (nabs, gmax) = neumann_off_arc(model, &maps.pose, &coeffs)?;
    Ok(SpatialControl {
        pose: maps.pose,
        target,
        moment: maps.moment(&coeffs),
        mean_moment: maps.mean_moment(&coeffs),
        flux: basis.quadrature_flux(&coeffs),
        flux_scale: basis.profile_l1(&coeffs),
        neumann_residual: nabs / gmax.max(1.0),
        neumann_abs: nabs,
        coeffs,
        stage,
        pipeline: report,
        fallback_iterations,
    })
}

/// Bump / patch / extension / zero-mean construction of one field per cone
/// direction, followed by the fixed-point correction of the target fed to
/// the cone weights.
fn pipeline(
    model: &Model,
    maps: &MomentMaps,
    v: &Vec3,
    cfg: &SynthesisConfig,
    width: f64,
    tol: f64,
    report: &mut PipelineReport,
) -> Result<Vec<f64>> {
    let q = maps.pose;
    let shape = model.shape();
    let dim = maps.dim;
    report.bump_width = width;
    let sites = if dim == 2 {
        ConeSites::disk(&q)
    } else {
        cone_points_general(shape, &q)?
    };
    report.sites = sites.params.clone();
    let mut centers = Vec::new();
    let mut dirs = Vec::new();
    for (s, u) in sites.params.iter().zip(&sites.vectors) {
        for j in 0..4 {
            centers.push(s + (j as f64 - 1.5) * 3.0 * width);
            dirs.push(*u);
        }
    }
    let bumps = boundary_bumps(shape, &q, width, &centers, &dirs)?;
    let order = if cfg.patch_order > 0 {
        cfg.patch_order
    } else {
        (8.0 / width).ceil() as usize
    };
    let patches: Vec<_> = model
        .config()
        .execution
        .map(&bumps, |b| local_harmonic_patch(|s| b.value(s), order));
    let collar = CollarSpec {
        radii: [1.0 + 0.5 * width, 1.0 + width],
        points: cfg.collar_points.max((8.0 * std::f64::consts::PI / width).ceil() as usize),
    };
    let ext = match harmonic_extension(model.solver(), &q, &patches, &collar, cfg.extension_tol) {
        Ok(e) => e,
        Err(e) => {
            if let Error::ExtensionResidualTooLarge { eta } = e {
                report.eta = eta;
            }
            return Err(e);
        }
    };
    report.eta = ext.iter().map(|e| e.eta).fold(0.0, f64::max);

    let mut fields = Vec::with_capacity(sites.params.len());
    report.lambda.clear();
    for i in 0..sites.params.len() {
        let cands = [
            ext[4 * i].coeffs.clone(),
            ext[4 * i + 1].coeffs.clone(),
            ext[4 * i + 2].coeffs.clone(),
            ext[4 * i + 3].coeffs.clone(),
        ];
        let (c, lambda) = zero_mean_combination(&cands, |c| maps.mean_moment(c));
        report.lambda.push([lambda[0], lambda[1], lambda[2], lambda[3]]);
        fields.push(c);
    }
    let own = fields.iter().map(|c| maps.moment(c).norm()).fold(0.0, f64::max);
    let mut cross: f64 = 0.0;
    for i in 0..fields.len() {
        for k in 0..i {
            cross = cross.max(maps.bilinear(&fields[i], &fields[k]).norm());
        }
    }
    report.cross_ratio = (own > 0.0).then(|| cross / own);

    let mut w = *v;
    let m = maps.modes();
    for it in 0..cfg.newton_iterations {
        let (mu, _) = sites.weights(&w);
        let mut c = vec![0.0; m];
        for (f, mu_i) in fields.iter().zip(&mu) {
            let r = mu_i.max(0.0).sqrt();
            c.iter_mut().zip(f).for_each(|(a, b)| *a += r * b);
        }
        let r = (v - maps.moment(&c)).rows(0, dim).into_owned();
        let rn = r.norm();
        report.iterations = it + 1;
        report.residual = Some(report.residual.map_or(rn, |b| b.min(rn)));
        report.mu = mu;
        if rn <= tol {
            return Ok(c);
        }
        if !rn.is_finite() {
            break;
        }
        for j in 0..dim {
            w[j] += r[j];
        }
    }
    Err(Error::NewtonStalled {
        best_residual: report.residual.unwrap_or(f64::INFINITY),
    })
}

/// Minimum-norm Gauss-Newton on the unit target in the null space of the
/// mean-moment map, seeded by `start` or else by the top eigenvectors of
/// `sum_j u_j G_j`.
/// Returns coefficients, iterations and the final moment residual.
fn gauss_newton(maps: &MomentMaps, v: &Vec3, start: Option<&[f64]>) -> (Vec<f64>, usize, f64) {
    let dim = maps.dim;
    let m = maps.modes();
    let norm = v.rows(0, dim).norm();
    let u: Vec<f64> = (0..dim).map(|j| v[j] / norm).collect();

    let null = maps.null_basis();
    let gn: Vec<DMatrix<f64>> = (0..dim)
        .map(|j| null.transpose() * &maps.quadratic[j] * &null)
        .collect();
    let k = m - dim;
    let eval = |y: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(dim, |j, _| y.dot(&(&gn[j] * y)) - u[j])
    };

    let mut h = DMatrix::zeros(k, k);
    for j in 0..dim {
        h += &gn[j] * u[j];
    }
    let he = SymmetricEigen::new(h);
    let mut seeds: Vec<usize> = (0..k).filter(|&i| he.eigenvalues[i] > 0.0).collect();
    seeds.sort_by(|&a, &b| he.eigenvalues[b].total_cmp(&he.eigenvalues[a]));

    let mut starts: Vec<DVector<f64>> = Vec::new();
    if let Some(c) = start {
        starts.push(null.transpose() * DVector::from_column_slice(c) / norm.sqrt());
    } else {
        starts.extend(
            seeds
                .iter()
                .take(6)
                .map(|&s| he.eigenvectors.column(s) / he.eigenvalues[s].sqrt()),
        );
    }
    let mut best = (vec![0.0; m], 0, f64::INFINITY);
    let mut total_its = 0;
    for mut y in starts {
        let mut r = eval(&y);
        for _ in 0..100 {
            if r.norm() < 1e-14 {
                break;
            }
            total_its += 1;
            let jac = DMatrix::from_fn(dim, k, |j, i| 2.0 * (&gn[j] * &y)[i]);
            let jjt = &jac * jac.transpose();
            let Some(lu) = jjt.clone().lu().solve(&r) else { break };
            let step = -(jac.transpose() * lu);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let trial = &y + &step * alpha;
                let rt = eval(&trial);
                if rt.norm() < r.norm() {
                    y = trial;
                    r = rt;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let resid = r.norm() * norm;
        if resid < best.2 {
            let c = (&null * &y) * norm.sqrt();
            best = (c.iter().copied().collect(), total_its, resid);
        }
        if resid <= 1e-12 * (1.0 + norm) {
            break;
        }
    }
    best.1 = total_its;
    best
}
