//! Method-of-fundamental-solutions systems on the doubly connected fluid
//! domain, a resolution ladder with self-verification, and a FIFO solve cache.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::hash::Hash;
use std::sync::{Arc, OnceLock};

use faer::Mat;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::sigma::SigmaBasis;
use super::{evaluate_shared, kernel, kernel_grad, BoundaryNode, HarmonicField, NeumannData, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::{place_solid, BoundarySampling, DomainSpec, Pose, SolidShape, Vec2};
use crate::linalg::Pinv;

/// Diagnostics of one verified solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub tier: usize,
    /// Max-norm boundary residual on the verification sampling divided by `max(1, |data|_inf)`.
    pub residual: f64,
    pub tolerance: f64,
    pub rank: usize,
    pub condition: f64,
}

/// Normalized stream function and the raw flux used to normalize it.
#[derive(Clone, Debug)]
pub struct StreamField {
    pub field: HarmonicField,
    /// Quadrature flux of the Dirichlet solution (values 1 on the solid, 0 on the wall).
    pub flux_tilde: f64,
    /// Same flux from the interior source strengths.
    pub flux_sources: f64,
    /// Constant value of the normalized stream function on the solid.
    pub solid_value: f64,
    /// Quadrature flux of the normalized field; -1 up to roundoff.
    pub normalized_flux: f64,
    pub report: SolveReport,
}

/// The three Kirchhoff potentials at one pose.
#[derive(Clone, Debug)]
pub struct KirchhoffSet {
    pub pose: Pose,
    pub fields: [HarmonicField; 3],
    pub report: SolveReport,
}

type PoseKey = (u64, [i64; 3]);

fn pose_key(id: u64, q: &Pose) -> PoseKey {
    let k = |x: f64| (x * 1e10).round() as i64;
    (id, [k(q.h.x), k(q.h.y), k(q.theta)])
}

struct Fifo<K, V> {
    map: HashMap<K, V>,
    order: VecDeque<K>,
    cap: usize,
}

impl<K: Hash + Eq + Clone, V: Clone> Fifo<K, V> {
    fn new(cap: usize) -> Self {
        Fifo {
            map: HashMap::new(),
            order: VecDeque::new(),
            cap: cap.max(1),
        }
    }

    fn get(&self, k: &K) -> Option<V> {
        self.map.get(k).cloned()
    }

    fn insert(&mut self, k: K, v: V) {
        if self.map.insert(k.clone(), v).is_none() {
            self.order.push_back(k);
            while self.order.len() > self.cap {
                if let Some(old) = self.order.pop_front() {
                    self.map.remove(&old);
                }
            }
        }
    }
}

/// Collocation system at one pose and resolution tier.
struct System {
    tier: usize,
    sources: Arc<Vec<Vec2>>,
    center: Vec2,
    n_inner: usize,
    solid: BoundarySampling,
    outer: BoundarySampling,
    verify_solid: BoundarySampling,
    verify_outer: BoundarySampling,
    neumann: Pinv,
    /// Normal derivatives of the source columns at the verification nodes.
    verify_normal: Mat<f64>,
    dirichlet: OnceLock<(Pinv, Mat<f64>)>,
}

impl System {
    fn ncols(&self) -> usize {
        1 + self.sources.len()
    }

    fn column_point(&self, j: usize) -> Vec2 {
        if j == 0 {
            self.center
        } else {
            self.sources[j - 1]
        }
    }

    fn normal_matrix(&self, pts: &[Vec2], normals: &[Vec2]) -> Mat<f64> {
        Mat::from_fn(pts.len(), self.ncols(), |i, j| {
            kernel_grad(pts[i], self.column_point(j)).dot(&normals[i])
        })
    }

    fn value_matrix(&self, pts: &[Vec2], constant: bool) -> Mat<f64> {
        let n = self.ncols() + usize::from(constant);
        Mat::from_fn(pts.len(), n, |i, j| {
            if j == self.ncols() {
                1.0
            } else {
                kernel(pts[i], self.column_point(j))
            }
        })
    }

    fn colloc_points(&self) -> (Vec<Vec2>, Vec<Vec2>) {
        let mut p = self.solid.points.clone();
        p.extend_from_slice(&self.outer.points);
        let mut n = self.solid.normals.clone();
        n.extend_from_slice(&self.outer.normals);
        (p, n)
    }

    fn verify_points(&self) -> Vec<Vec2> {
        let mut p = self.verify_solid.points.clone();
        p.extend_from_slice(&self.verify_outer.points);
        p
    }

    fn dirichlet(&self, cutoff: f64) -> &(Pinv, Mat<f64>) {
        self.dirichlet.get_or_init(|| {
            let (pts, _) = self.colloc_points();
            let a = self.value_matrix(&pts, true);
            let v = self.value_matrix(&self.verify_points(), true);
            (Pinv::new(a.as_ref(), cutoff), v)
        })
    }

    fn field(&self, x: &Mat<f64>, j: usize, clearance: f64) -> HarmonicField {
        let strengths = (0..self.sources.len()).map(|i| x.read(i + 1, j)).collect();
        HarmonicField::new(self.sources.clone(), strengths, self.center, x.read(0, j), 0.0, clearance)
    }
}

/// Solver for harmonic problems on the fluid domain around one solid shape.
pub struct Solver {
    shape: SolidShape,
    domain: DomainSpec,
    cfg: SolverConfig,
    inner_ref: Vec<Vec<Vec2>>,
    systems: Mutex<Fifo<(PoseKey, usize), Arc<System>>>,
    kirchhoff: Mutex<Fifo<(PoseKey, usize), Arc<KirchhoffSet>>>,
    tiers: Mutex<Fifo<PoseKey, usize>>,
    sigma: OnceLock<std::result::Result<Arc<SigmaBasis>, Error>>,
}

impl std::fmt::Debug for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Solver").field("shape", &self.shape).field("cfg", &self.cfg).finish()
    }
}

impl Solver {
    pub fn new(shape: SolidShape, domain: DomainSpec, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let inner_ref = cfg
            .tiers
            .iter()
            .map(|t| interior_sources(&shape, t.inner_sources, t.inner_offset))
            .collect::<Result<Vec<_>>>()?;
        let cap = cfg.cache_capacity;
        Ok(Solver {
            shape,
            domain,
            inner_ref,
            systems: Mutex::new(Fifo::new(cap)),
            kirchhoff: Mutex::new(Fifo::new(cap)),
            tiers: Mutex::new(Fifo::new(16 * cap)),
            sigma: OnceLock::new(),
            cfg,
        })
    }

    pub fn shape(&self) -> &SolidShape {
        &self.shape
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn tolerance(&self) -> f64 {
        self.cfg.tolerance(self.shape.is_disk())
    }

    pub fn n_tiers(&self) -> usize {
        self.cfg.tiers.len()
    }

    /// Quadrature sampling of the placed solid used for all boundary integrals.
    pub fn quadrature(&self, q: &Pose) -> BoundarySampling {
        place_solid(&self.shape, q, self.cfg.quadrature_points)
    }

    fn system(&self, q: &Pose, tier: usize) -> Arc<System> {
        let key = (pose_key(self.shape.id() ^ self.domain.id(), q), tier);
        if let Some(s) = self.systems.lock().get(&key) {
            return s;
        }
        let sys = Arc::new(self.build_system(q, tier));
        self.systems.lock().insert(key, sys.clone());
        sys
    }

    fn build_system(&self, q: &Pose, tier: usize) -> System {
        let res = self.cfg.tiers[tier];
        let nc = res.collocation_factor * res.inner_sources;
        let no = res.collocation_factor * res.outer_sources;
        let vf = self.cfg.verify_factor;
        let h0 = self.shape.h0();
        let mut sources: Vec<Vec2> = self.inner_ref[tier].iter().map(|x| q.place(*x, h0)).collect();
        let n_inner = sources.len();
        for k in 0..res.outer_sources {
            let phi = 2.0 * PI * (k as f64 + 0.5) / res.outer_sources as f64;
            sources.push(self.domain.boundary_point(phi).0 * res.outer_offset);
        }
        let solid = place_solid(&self.shape, q, nc);
        let outer = self.domain.outer_sampling(no);
        let verify_solid = shifted(&self.shape, q, vf * nc);
        let verify_outer = shifted_outer(&self.domain, vf * no);
        let center = q.place(self.shape.conformal_center(), h0);
        let mut sys = System {
            tier,
            sources: Arc::new(sources),
            center,
            n_inner,
            solid,
            outer,
            verify_solid,
            verify_outer,
            neumann: Pinv::new(Mat::<f64>::zeros(0, 0).as_ref(), 1.0),
            verify_normal: Mat::zeros(0, 0),
            dirichlet: OnceLock::new(),
        };
        let (pts, nrm) = sys.colloc_points();
        let a = sys.normal_matrix(&pts, &nrm);
        sys.neumann = Pinv::new(a.as_ref(), self.cfg.svd_cutoff);
        let mut vp = sys.verify_solid.points.clone();
        vp.extend_from_slice(&sys.verify_outer.points);
        let mut vn = sys.verify_solid.normals.clone();
        vn.extend_from_slice(&sys.verify_outer.normals);
        sys.verify_normal = sys.normal_matrix(&vp, &vn);
        sys
    }

    /// Kirchhoff potentials at `q`, on the first tier that passes verification.
    pub fn kirchhoff(&self, q: &Pose) -> Result<Arc<KirchhoffSet>> {
        self.kirchhoff_from(q, 0)
    }

    /// Kirchhoff potentials at `q` using at least tier `min_tier`.
    pub fn kirchhoff_from(&self, q: &Pose, min_tier: usize) -> Result<Arc<KirchhoffSet>> {
        let pk = pose_key(self.shape.id() ^ self.domain.id(), q);
        let start = match self.tiers.lock().get(&pk) {
            Some(t) => t.max(min_tier),
            None => min_tier,
        };
        if let Some(k) = self.kirchhoff.lock().get(&(pk, start)) {
            return Ok(k);
        }
        let data = [NeumannData::kirchhoff(0), NeumannData::kirchhoff(1), NeumannData::kirchhoff(2)];
        let (fields, report) = self.solve_neumann_from(q, start, &data)?;
        let set = Arc::new(KirchhoffSet {
            pose: *q,
            fields: [fields[0].clone(), fields[1].clone(), fields[2].clone()],
            report,
        });
        if min_tier == 0 {
            self.tiers.lock().insert(pk, report.tier);
        }
        self.kirchhoff.lock().insert((pk, report.tier), set.clone());
        if report.tier != start {
            self.kirchhoff.lock().insert((pk, start), set.clone());
        }
        Ok(set)
    }

    /// Resolution tier at which the Kirchhoff problems at `q` verify.
    pub fn tier_for(&self, q: &Pose) -> Result<usize> {
        Ok(self.kirchhoff(q)?.report.tier)
    }

    /// Solve Neumann problems at `q`; every solution is verified on a finer
    /// sampling, escalating through the resolution ladder when needed.
    pub fn solve_neumann(&self, q: &Pose, data: &[NeumannData]) -> Result<(Vec<HarmonicField>, SolveReport)> {
        let tier = self.tier_for(q)?;
        self.solve_neumann_from(q, tier, data)
    }

    pub fn solve_neumann_from(
        &self,
        q: &Pose,
        min_tier: usize,
        data: &[NeumannData],
    ) -> Result<(Vec<HarmonicField>, SolveReport)> {
        let mut last = None;
        for tier in min_tier..self.n_tiers() {
            let sys = self.system(q, tier);
            let (rc, rv) = self.rhs_from_traces(&sys, data)?;
            match self.solve_matrix(&sys, &rc, &rv) {
                Ok(out) => return Ok(out),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or(Error::ResidualTooLarge {
            achieved: f64::INFINITY,
            required: self.tolerance(),
        }))
    }

    fn rhs_from_traces(&self, sys: &System, data: &[NeumannData]) -> Result<(Mat<f64>, Mat<f64>)> {
        let k = data.len();
        let (ns, no) = (sys.solid.len(), sys.outer.len());
        let (vs, vo) = (sys.verify_solid.len(), sys.verify_outer.len());
        let mut rc = Mat::<f64>::zeros(ns + no, k);
        let mut rv = Mat::<f64>::zeros(vs + vo, k);
        for (j, d) in data.iter().enumerate() {
            for i in 0..ns {
                rc.write(i, j, d.solid.eval(&BoundaryNode::from_sampling(&sys.solid, i)));
            }
            for i in 0..no {
                rc.write(ns + i, j, d.outer.eval(&BoundaryNode::from_sampling(&sys.outer, i)));
            }
            let mut flux = 0.0;
            let mut scale = 0.0;
            for i in 0..vs {
                let g = d.solid.eval(&BoundaryNode::from_sampling(&sys.verify_solid, i));
                rv.write(i, j, g);
                flux += sys.verify_solid.weights[i] * g;
                scale += sys.verify_solid.weights[i] * g.abs();
            }
            for i in 0..vo {
                let g = d.outer.eval(&BoundaryNode::from_sampling(&sys.verify_outer, i));
                rv.write(vs + i, j, g);
                flux += sys.verify_outer.weights[i] * g;
                scale += sys.verify_outer.weights[i] * g.abs();
            }
            if flux.abs() > 1e-8 * scale.max(1.0) {
                return Err(Error::IncompatibleData { flux });
            }
        }
        Ok((rc, rv))
    }

    /// Solve for given collocation right-hand sides and verify against the
    /// data sampled at the verification nodes.
    fn solve_matrix(&self, sys: &System, rc: &Mat<f64>, rv: &Mat<f64>) -> Result<(Vec<HarmonicField>, SolveReport)> {
        let x = sys.neumann.solve(rc.as_ref());
        let resid = &sys.verify_normal * &x - rv;
        let mut worst: f64 = 0.0;
        for j in 0..rc.ncols() {
            let dmax = (0..rv.nrows()).map(|i| rv.read(i, j).abs()).fold(0.0, f64::max);
            let rmax = (0..rv.nrows()).map(|i| resid.read(i, j).abs()).fold(0.0, f64::max);
            worst = worst.max(rmax / dmax.max(1.0));
        }
        let report = SolveReport {
            tier: sys.tier,
            residual: worst,
            tolerance: self.tolerance(),
            rank: sys.neumann.rank(),
            condition: sys.neumann.condition(),
        };
        if !(worst <= report.tolerance) {
            return Err(Error::ResidualTooLarge {
                achieved: worst,
                required: report.tolerance,
            });
        }
        let mut fields = Vec::with_capacity(rc.ncols());
        for j in 0..rc.ncols() {
            let mut f = sys.field(&x, j, self.cfg.eval_clearance);
            let mean = sys.solid.points.iter().map(|p| f.value(*p)).sum::<f64>() / sys.solid.len() as f64;
            f.set_constant(-mean);
            fields.push(f);
        }
        Ok((fields, report))
    }

    /// Normalized stream function: harmonic, zero on the wall, constant on the
    /// solid, with flux -1 across the solid boundary.
    pub fn solve_stream(&self, q: &Pose) -> Result<StreamField> {
        let start = self.tier_for(q)?;
        let tol = self.tolerance();
        let mut last = None;
        for tier in start..self.n_tiers() {
            let sys = self.system(q, tier);
            let (pinv, vmat) = sys.dirichlet(self.cfg.svd_cutoff);
            let (ns, no) = (sys.solid.len(), sys.outer.len());
            let b: Vec<f64> = (0..ns + no).map(|i| if i < ns { 1.0 } else { 0.0 }).collect();
            let x = pinv.solve_vec(&b);
            let vs = sys.verify_solid.len();
            let mut worst: f64 = 0.0;
            for i in 0..vmat.nrows() {
                let target = if i < vs { 1.0 } else { 0.0 };
                let v: f64 = (0..x.len()).map(|j| vmat.read(i, j) * x[j]).sum();
                worst = worst.max((v - target).abs());
            }
            if !(worst <= tol) {
                last = Some(Error::ResidualTooLarge { achieved: worst, required: tol });
                continue;
            }
            let nsrc = sys.sources.len();
            let tilde = HarmonicField::new(
                sys.sources.clone(),
                x[1..=nsrc].to_vec(),
                sys.center,
                x[0],
                x[nsrc + 1],
                self.cfg.eval_clearance,
            );
            let vsamp = &sys.verify_solid;
            let flux_tilde: f64 = (0..vsamp.len())
                .map(|k| vsamp.weights[k] * tilde.gradient(vsamp.points[k]).dot(&vsamp.normals[k]))
                .sum();
            let flux_sources = -(x[0] + x[1..=sys.n_inner].iter().sum::<f64>());
            let field = tilde.scaled(-1.0 / flux_tilde);
            let normalized_flux: f64 = (0..vsamp.len())
                .map(|k| vsamp.weights[k] * field.gradient(vsamp.points[k]).dot(&vsamp.normals[k]))
                .sum();
            return Ok(StreamField {
                solid_value: -1.0 / flux_tilde,
                field,
                flux_tilde,
                flux_sources,
                normalized_flux,
                report: SolveReport {
                    tier,
                    residual: worst,
                    tolerance: tol,
                    rank: pinv.rank(),
                    condition: pinv.condition(),
                },
            });
        }
        Err(last.unwrap_or(Error::ResidualTooLarge { achieved: f64::INFINITY, required: tol }))
    }

    /// The pose-independent outer-domain basis driven from the control arc.
    pub fn sigma_basis(&self) -> Result<Arc<SigmaBasis>> {
        self.sigma
            .get_or_init(|| SigmaBasis::new(&self.domain, &self.cfg).map(Arc::new))
            .clone()
    }

    /// Control basis at `q`: each outer-domain field plus the body correction
    /// that cancels its normal derivative on the solid.
    pub fn control_basis(&self, q: &Pose, min_tier: usize) -> Result<(Vec<HarmonicField>, SolveReport)> {
        let basis = self.sigma_basis()?;
        let omega: Vec<&HarmonicField> = basis.fields().iter().collect();
        self.corrected(q, min_tier, &omega)
    }

    /// Control potential `A[q, g]` for `g = sum_m coeffs[m] g_m` on the arc.
    pub fn control_potential(&self, q: &Pose, coeffs: &[f64], min_tier: usize) -> Result<(HarmonicField, SolveReport)> {
        let basis = self.sigma_basis()?;
        let omega = basis.combination(coeffs);
        let (mut f, r) = self.corrected(q, min_tier, &[&omega])?;
        Ok((f.pop().expect("one field"), r))
    }

    fn corrected(&self, q: &Pose, min_tier: usize, omega: &[&HarmonicField]) -> Result<(Vec<HarmonicField>, SolveReport)> {
        let start = self.tier_for(q)?.max(min_tier);
        let mut last = None;
        for tier in start..self.n_tiers() {
            let sys = self.system(q, tier);
            let k = omega.len();
            let (ns, no) = (sys.solid.len(), sys.outer.len());
            let (vs, vo) = (sys.verify_solid.len(), sys.verify_outer.len());
            let mut rc = Mat::<f64>::zeros(ns + no, k);
            let mut rv = Mat::<f64>::zeros(vs + vo, k);
            let mut means = vec![0.0; k];
            for i in 0..ns {
                let ev = evaluate_shared(omega, sys.solid.points[i]);
                for (j, (v, g)) in ev.iter().enumerate() {
                    rc.write(i, j, -g.dot(&sys.solid.normals[i]));
                    means[j] += v / ns as f64;
                }
            }
            for i in 0..vs {
                let ev = evaluate_shared(omega, sys.verify_solid.points[i]);
                for (j, (_, g)) in ev.iter().enumerate() {
                    rv.write(i, j, -g.dot(&sys.verify_solid.normals[i]));
                }
            }
            match self.solve_matrix(&sys, &rc, &rv) {
                Ok((w, report)) => {
                    let out = w
                        .into_iter()
                        .zip(omega.iter())
                        .zip(means.iter())
                        .map(|((mut wj, a), m)| {
                            wj.set_constant(wj.constant() - m);
                            HarmonicField::combine(&[(1.0, *a), (1.0, &wj)])
                        })
                        .collect();
                    return Ok((out, report));
                }
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or(Error::ResidualTooLarge {
            achieved: f64::INFINITY,
            required: self.tolerance(),
        }))
    }
}

/// Solid sampling offset by half a step so verification nodes never coincide
/// with collocation nodes.
fn shifted(shape: &SolidShape, q: &Pose, n: usize) -> BoundarySampling {
    let mut s = place_solid(shape, q, n);
    let ds = PI / n as f64;
    for k in 0..n {
        let b = crate::geometry::conformal_boundary(shape, q, s.params[k] + ds);
        s.params[k] += ds;
        s.points[k] = b.point;
        s.normals[k] = b.normal;
        s.tangents[k] = b.tangent;
        s.rot[k] = crate::geometry::perp(b.point - q.h).dot(&b.normal);
        s.weights[k] = shape.reference_boundary(s.params[k]).1.norm() * 2.0 * PI / n as f64;
    }
    s
}

fn shifted_outer(domain: &DomainSpec, n: usize) -> BoundarySampling {
    let mut s = domain.outer_sampling(n);
    let dphi = PI / n as f64;
    for k in 0..n {
        let phi = s.params[k] + dphi;
        let (x, dx) = domain.boundary_point(phi);
        let speed = dx.norm();
        let tau = dx / speed;
        s.params[k] = phi;
        s.points[k] = x;
        s.tangents[k] = tau;
        s.normals[k] = Vec2::new(tau.y, -tau.x);
        s.rot[k] = crate::geometry::perp(x).dot(&s.normals[k]);
        s.weights[k] = speed * 2.0 * PI / n as f64;
    }
    s
}

/// Interior source curve in the reference frame: the image of the circle of
/// radius `offset` under the exterior map when that stays inside the body,
/// otherwise the boundary shrunk by `offset` toward the conformal center.
fn interior_sources(shape: &SolidShape, n: usize, offset: f64) -> Result<Vec<Vec2>> {
    let angles: Vec<f64> = (0..n).map(|k| 2.0 * PI * (k as f64 + 0.5) / n as f64).collect();
    let boundary: Vec<Vec2> = (0..1024)
        .map(|k| shape.reference_boundary(2.0 * PI * k as f64 / 1024.0).0)
        .collect();
    let margin = 0.02 * shape.max_radius();
    let ok = |pts: &[Vec2]| {
        pts.iter()
            .all(|p| inside_polygon(*p, &boundary) && boundary.iter().all(|b| (b - p).norm() > margin))
    };
    let conformal: Vec<Vec2> = angles
        .iter()
        .map(|&s| crate::geometry::to_v(shape.map(num_complex::Complex64::from_polar(offset, s))))
        .collect();
    if ok(&conformal) {
        return Ok(conformal);
    }
    let c = shape.conformal_center();
    let scaled: Vec<Vec2> = angles
        .iter()
        .map(|&s| c + (shape.reference_boundary(s).0 - c) * offset)
        .collect();
    if ok(&scaled) {
        return Ok(scaled);
    }
    Err(Error::InvalidShape(format!(
        "no interior source curve at offset {offset} stays inside the solid"
    )))
}

fn inside_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::Trace;
    use approx::assert_relative_eq;

    fn annulus() -> Solver {
        let shape = SolidShape::disk(1.0, 1.0, 0.5).unwrap();
        let domain = DomainSpec::disk(10.0, [-PI / 4.0, PI / 4.0], 1.0).unwrap();
        Solver::new(shape, domain, SolverConfig::default()).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_field() {
        let s = annulus();
        let (f, _) = s.solve_neumann(&Pose::origin(), &[NeumannData::zero()]).unwrap();
        assert!(f[0].strengths().iter().all(|&x| x == 0.0));
        assert_eq!(f[0].value(Vec2::new(3.0, 1.0)), 0.0);
    }

    #[test]
    fn radial_flux_gives_logarithm() {
        let s = annulus();
        let a = 1.0;
        let r_out = 10.0;
        let data = NeumannData::new(
            Trace::Fn(Arc::new(move |_| 1.0 / (2.0 * PI * a))),
            Trace::Fn(Arc::new(move |_| -1.0 / (2.0 * PI * r_out))),
        );
        let (f, _) = s.solve_neumann(&Pose::origin(), &data_slice(data)).unwrap();
        // exact solution: -log(r)/(2 pi) + const (normal on the solid points inward)
        let c = f[0].value(Vec2::new(1.0, 0.0));
        for &r in &[1.5, 3.0, 7.0, 9.9] {
            let x = Vec2::new(r * 0.6, r * 0.8);
            let exact = -(r.ln()) / (2.0 * PI);
            assert_relative_eq!(f[0].value(x) - c, exact, epsilon = 1e-9);
        }
    }

    fn data_slice(d: NeumannData) -> [NeumannData; 1] {
        [d]
    }

    #[test]
    fn incompatible_data_rejected() {
        let s = annulus();
        let data = NeumannData::new(Trace::Fn(Arc::new(|_| 1.0)), Trace::Zero);
        let e = s.solve_neumann(&Pose::origin(), &[data]).unwrap_err();
        assert!(matches!(e, Error::IncompatibleData { .. }));
    }

    #[test]
    fn stream_on_annulus_is_logarithmic() {
        let s = annulus();
        let st = s.solve_stream(&Pose::origin()).unwrap();
        assert_relative_eq!(st.normalized_flux, -1.0, epsilon = 1e-12);
        // normals on the solid point into it, so the raw flux is positive
        assert_relative_eq!(st.flux_tilde, 2.0 * PI / 10f64.ln(), max_relative = 1e-9);
        assert_relative_eq!(st.flux_sources, st.flux_tilde, max_relative = 1e-9);
        for &r in &[1.0, 2.0, 5.0, 10.0] {
            let psi = st.field.value(Vec2::new(0.0, r));
            let exact = (r / 10.0).ln() / (2.0 * PI);
            assert_relative_eq!(psi, exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn interior_sources_lie_inside() {
        let e = SolidShape::joukowski(0.3, 1.0, 0.5).unwrap();
        let pts = interior_sources(&e, 64, 0.7).unwrap();
        assert!(pts.iter().all(|p| (p.x / 1.3).powi(2) + (p.y / 0.7).powi(2) < 1.0));
    }
}
