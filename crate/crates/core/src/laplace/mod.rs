//! Mesh-free harmonic fields on the fluid domain and the solvers that build them.

mod mfs;
mod sigma;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundarySampling, Vec2};

pub use mfs::{KirchhoffSet, SolveReport, Solver, StreamField};
pub use sigma::SigmaBasis;

/// Free-space Green's function `log|x - y| / (2 pi)`.
#[inline]
pub fn kernel(x: Vec2, y: Vec2) -> f64 {
    (x - y).norm().ln() / (2.0 * PI)
}

#[inline]
pub fn kernel_grad(x: Vec2, y: Vec2) -> Vec2 {
    let d = x - y;
    d / (2.0 * PI * d.norm_squared())
}

/// Superposition of log sources plus a constant.
///
/// Sources live outside the fluid (inside the solid or beyond the outer
/// wall), so the represented function is exactly harmonic in the fluid.
/// Fields built on the same source set share it, which lets linear
/// combinations collapse to a single strength vector.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    sources: Arc<Vec<Vec2>>,
    strengths: Vec<f64>,
    center: Vec2,
    center_strength: f64,
    constant: f64,
    clearance: f64,
    outer: Option<OuterPart>,
}

/// Sources placed beyond the outer wall, paired with their Taylor series about
/// the origin. Inside `radius` the series replaces the source sum; large
/// cancelling strengths then stop leaking position-dependent roundoff into
/// the field.
#[derive(Clone, Debug)]
struct OuterPart {
    sources: Arc<Vec<Vec2>>,
    strengths: Vec<f64>,
    series: Vec<Complex64>,
    radius: f64,
}

impl OuterPart {
    fn new(sources: Arc<Vec<Vec2>>, strengths: Vec<f64>) -> Self {
        let rho = sources.iter().map(|y| y.norm()).fold(f64::INFINITY, f64::min);
        let radius = 0.4 * rho;
        let terms = (40.0 / (1.0f64 / 0.4).ln()).ceil() as usize + 1;
        let mut series = vec![Complex64::new(0.0, 0.0); terms + 1];
        for (y, s) in sources.iter().zip(strengths.iter()) {
            let w = s / (2.0 * PI);
            series[0] += w * y.norm().ln();
            let inv = 1.0 / Complex64::new(y.x, y.y);
            let mut p = Complex64::new(1.0, 0.0);
            for (k, a) in series.iter_mut().enumerate().skip(1) {
                p *= inv;
                *a -= w * p / k as f64;
            }
        }
        OuterPart {
            sources,
            strengths,
            series,
            radius,
        }
    }

    fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        if x.norm() < self.radius {
            let z = Complex64::new(x.x, x.y);
            let n = self.series.len();
            let mut f = self.series[n - 1];
            let mut df = Complex64::new(0.0, 0.0);
            for a in self.series[..n - 1].iter().rev() {
                df = df * z + f;
                f = f * z + a;
            }
            return (f.re, Vec2::new(df.re, -df.im));
        }
        let mut v = 0.0;
        let mut g = Vec2::zeros();
        for (y, s) in self.sources.iter().zip(self.strengths.iter()) {
            let d = x - y;
            let r2 = d.norm_squared();
            v += s * r2.ln() / (4.0 * PI);
            g += d * (s / (2.0 * PI * r2));
        }
        (v, g)
    }

    fn scaled(&self, lambda: f64) -> Self {
        OuterPart {
            sources: self.sources.clone(),
            strengths: self.strengths.iter().map(|s| s * lambda).collect(),
            series: self.series.iter().map(|a| a * lambda).collect(),
            radius: self.radius,
        }
    }
}

impl HarmonicField {
    pub fn zero() -> Self {
        HarmonicField {
            sources: Arc::new(Vec::new()),
            strengths: Vec::new(),
            center: Vec2::zeros(),
            center_strength: 0.0,
            constant: 0.0,
            clearance: 0.0,
            outer: None,
        }
    }

    /// Field of sources lying outside the outer wall, all farther from the
    /// origin than the fluid region near it. Evaluated through a series near
    /// the origin.
    pub fn exterior(sources: Arc<Vec<Vec2>>, strengths: Vec<f64>, clearance: f64) -> Self {
        assert_eq!(sources.len(), strengths.len());
        HarmonicField {
            outer: Some(OuterPart::new(sources, strengths)),
            clearance,
            ..HarmonicField::zero()
        }
    }

    pub fn new(
        sources: Arc<Vec<Vec2>>,
        strengths: Vec<f64>,
        center: Vec2,
        center_strength: f64,
        constant: f64,
        clearance: f64,
    ) -> Self {
        assert_eq!(sources.len(), strengths.len());
        HarmonicField {
            sources,
            strengths,
            center,
            center_strength,
            constant,
            clearance,
            outer: None,
        }
    }

    pub fn sources(&self) -> &[Vec2] {
        &self.sources
    }

    pub fn strengths(&self) -> &[f64] {
        &self.strengths
    }

    pub fn center(&self) -> Vec2 {
        self.center
    }

    pub fn center_strength(&self) -> f64 {
        self.center_strength
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: f64) {
        self.constant = c;
    }

    /// Sum of all log strengths, equal to the flux out of the sources.
    pub fn total_strength(&self) -> f64 {
        let outer: f64 = self.outer.iter().flat_map(|o| o.strengths.iter()).sum();
        self.strengths.iter().sum::<f64>() + self.center_strength + outer
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0
            && self.center_strength == 0.0
            && self.strengths.iter().all(|&s| s == 0.0)
            && self.outer.as_ref().map_or(true, |o| o.strengths.iter().all(|&s| s == 0.0))
    }

    /// Value and gradient without the source-clearance check.
    pub fn value_grad(&self, x: Vec2) -> (f64, Vec2) {
        let mut v = self.constant;
        let mut g = Vec2::zeros();
        if self.center_strength != 0.0 {
            v += self.center_strength * kernel(x, self.center);
            g += self.center_strength * kernel_grad(x, self.center);
        }
        for (y, s) in self.sources.iter().zip(self.strengths.iter()) {
            let d = x - y;
            let r2 = d.norm_squared();
            v += s * r2.ln() / (4.0 * PI);
            g += d * (s / (2.0 * PI * r2));
        }
        if let Some(o) = &self.outer {
            let (ov, og) = o.value_grad(x);
            v += ov;
            g += og;
        }
        (v, g)
    }

    pub fn value(&self, x: Vec2) -> f64 {
        self.value_grad(x).0
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        self.value_grad(x).1
    }

    /// Distance from `x` to the nearest source.
    pub fn source_distance(&self, x: Vec2) -> f64 {
        let mut d = if self.center_strength != 0.0 {
            (x - self.center).norm()
        } else {
            f64::INFINITY
        };
        for y in self.sources.iter().chain(self.outer.iter().flat_map(|o| o.sources.iter())) {
            d = d.min((x - y).norm());
        }
        d
    }

    /// Checked evaluation: fails when `x` is closer than the configured
    /// clearance to any source.
    pub fn evaluate(&self, x: Vec2) -> Result<(f64, Vec2)> {
        let d = self.source_distance(x);
        if d < self.clearance {
            return Err(Error::EvaluationNearSource { distance: d });
        }
        Ok(self.value_grad(x))
    }

    pub fn scaled(&self, lambda: f64) -> HarmonicField {
        HarmonicField {
            sources: self.sources.clone(),
            strengths: self.strengths.iter().map(|s| s * lambda).collect(),
            center: self.center,
            center_strength: self.center_strength * lambda,
            constant: self.constant * lambda,
            clearance: self.clearance,
            outer: self.outer.as_ref().map(|o| o.scaled(lambda)),
        }
    }

    /// `sum_k coefs[k] fields[k]`. Fields sharing a source set and center
    /// collapse into one strength vector; otherwise the sources are concatenated.
    pub fn combine(terms: &[(f64, &HarmonicField)]) -> HarmonicField {
        let terms: Vec<_> = terms
            .iter()
            .filter(|(_, f)| !f.sources.is_empty() || f.center_strength != 0.0 || f.constant != 0.0 || f.outer.is_some())
            .collect();
        if terms.is_empty() {
            return HarmonicField::zero();
        }
        let clearance = terms.iter().map(|(_, f)| f.clearance).fold(0.0, f64::max);
        let constant = terms.iter().map(|(c, f)| c * f.constant).sum();

        let outers: Vec<(f64, &OuterPart)> = terms.iter().filter_map(|(c, f)| f.outer.as_ref().map(|o| (*c, o))).collect();
        let mut spill: Vec<(f64, &OuterPart)> = Vec::new();
        let outer = match outers.first() {
            None => None,
            Some((_, o0)) if outers.iter().all(|(_, o)| Arc::ptr_eq(&o.sources, &o0.sources)) => {
                let mut strengths = vec![0.0; o0.strengths.len()];
                let mut series = vec![Complex64::new(0.0, 0.0); o0.series.len()];
                for (c, o) in &outers {
                    for (acc, s) in strengths.iter_mut().zip(o.strengths.iter()) {
                        *acc += c * s;
                    }
                    for (acc, a) in series.iter_mut().zip(o.series.iter()) {
                        *acc += c * a;
                    }
                }
                Some(OuterPart {
                    sources: o0.sources.clone(),
                    strengths,
                    series,
                    radius: o0.radius,
                })
            }
            Some(_) => {
                spill = outers.clone();
                None
            }
        };

        let inner: Vec<_> = terms
            .iter()
            .filter(|(_, f)| !f.sources.is_empty() || f.center_strength != 0.0)
            .collect();
        let mut out = match inner.first() {
            None => HarmonicField::zero(),
            Some((_, first)) if spill.is_empty()
                && inner
                    .iter()
                    .all(|(_, f)| Arc::ptr_eq(&f.sources, &first.sources) && f.center == first.center) =>
            {
                let mut strengths = vec![0.0; first.strengths.len()];
                let mut cs = 0.0;
                for (c, f) in &inner {
                    for (acc, s) in strengths.iter_mut().zip(f.strengths.iter()) {
                        *acc += c * s;
                    }
                    cs += c * f.center_strength;
                }
                HarmonicField {
                    sources: first.sources.clone(),
                    strengths,
                    center: first.center,
                    center_strength: cs,
                    ..HarmonicField::zero()
                }
            }
            Some(_) => {
                let mut sources = Vec::new();
                let mut strengths = Vec::new();
                for (c, f) in &inner {
                    sources.extend_from_slice(&f.sources);
                    strengths.extend(f.strengths.iter().map(|s| c * s));
                    if f.center_strength != 0.0 {
                        sources.push(f.center);
                        strengths.push(c * f.center_strength);
                    }
                }
                HarmonicField {
                    sources: Arc::new(sources),
                    strengths,
                    ..HarmonicField::zero()
                }
            }
        };
        if !spill.is_empty() {
            let mut sources = (*out.sources).clone();
            for (c, o) in &spill {
                sources.extend_from_slice(&o.sources);
                out.strengths.extend(o.strengths.iter().map(|s| c * s));
            }
            out.sources = Arc::new(sources);
        }
        out.constant = constant;
        out.clearance = clearance;
        out.outer = outer;
        out
    }

    /// Serializable snapshot of the field.
    pub fn record(&self) -> FieldRecord {
        let outer = self.outer.iter();
        FieldRecord {
            sources: self
                .sources
                .iter()
                .chain(outer.clone().flat_map(|o| o.sources.iter()))
                .map(|p| [p.x, p.y])
                .collect(),
            strengths: self
                .strengths
                .iter()
                .chain(outer.flat_map(|o| o.strengths.iter()))
                .copied()
                .collect(),
            center: [self.center.x, self.center.y],
            center_strength: self.center_strength,
            constant: self.constant,
        }
    }
}

/// Evaluate several fields that share one source set at a point, computing
/// each kernel term once.
pub fn evaluate_shared(fields: &[&HarmonicField], x: Vec2) -> Vec<(f64, Vec2)> {
    let Some(first) = fields.first() else {
        return Vec::new();
    };
    if !fields
        .iter()
        .all(|f| Arc::ptr_eq(&f.sources, &first.sources) && f.center == first.center && f.outer.is_none())
    {
        return fields.iter().map(|f| f.value_grad(x)).collect();
    }
    let mut out: Vec<(f64, Vec2)> = fields
        .iter()
        .map(|f| {
            let mut v = f.constant;
            let mut g = Vec2::zeros();
            if f.center_strength != 0.0 {
                v += f.center_strength * kernel(x, f.center);
                g += f.center_strength * kernel_grad(x, f.center);
            }
            (v, g)
        })
        .collect();
    for (j, y) in first.sources.iter().enumerate() {
        let d = x - y;
        let r2 = d.norm_squared();
        let kv = r2.ln() / (4.0 * PI);
        let kg = d / (2.0 * PI * r2);
        for (o, f) in out.iter_mut().zip(fields.iter()) {
            let s = f.strengths[j];
            o.0 += s * kv;
            o.1 += kg * s;
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct FieldRecord {
    pub sources: Vec<[f64; 2]>,
    pub strengths: Vec<f64>,
    pub center: [f64; 2],
    pub center_strength: f64,
    pub constant: f64,
}

/// A boundary node handed to Neumann/Dirichlet data callbacks.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryNode {
    pub param: f64,
    pub point: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub rot: f64,
}

impl BoundaryNode {
    pub(crate) fn from_sampling(s: &BoundarySampling, k: usize) -> Self {
        BoundaryNode {
            param: s.params[k],
            point: s.points[k],
            normal: s.normals[k],
            tangent: s.tangents[k],
            rot: s.rot[k],
        }
    }
}

pub type TraceFn = Arc<dyn Fn(&BoundaryNode) -> f64 + Send + Sync>;

/// Prescribed normal derivative on one boundary component.
#[derive(Clone)]
pub enum Trace {
    Zero,
    /// Rigid-motion datum: 0 and 1 select the normal components, 2 the
    /// rotational datum `(x - h)^perp . n`.
    Motion(usize),
    Fn(TraceFn),
}

impl Trace {
    pub fn eval(&self, node: &BoundaryNode) -> f64 {
        match self {
            Trace::Zero => 0.0,
            Trace::Motion(0) => node.normal.x,
            Trace::Motion(1) => node.normal.y,
            Trace::Motion(_) => node.rot,
            Trace::Fn(f) => f(node),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Trace::Zero)
    }
}

impl std::fmt::Debug for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Trace::Zero => write!(f, "Zero"),
            Trace::Motion(i) => write!(f, "Motion({i})"),
            Trace::Fn(_) => write!(f, "Fn"),
        }
    }
}

/// Normal-derivative data on the solid boundary and on the outer wall, with
/// normals pointing out of the fluid.
#[derive(Clone, Debug)]
pub struct NeumannData {
    pub solid: Trace,
    pub outer: Trace,
}

impl NeumannData {
    pub fn zero() -> Self {
        NeumannData {
            solid: Trace::Zero,
            outer: Trace::Zero,
        }
    }

    /// Datum of the `i`-th Kirchhoff potential.
    pub fn kirchhoff(i: usize) -> Self {
        NeumannData {
            solid: Trace::Motion(i),
            outer: Trace::Zero,
        }
    }

    pub fn new(solid: Trace, outer: Trace) -> Self {
        NeumannData { solid, outer }
    }

    pub fn is_zero(&self) -> bool {
        self.solid.is_zero() && self.outer.is_zero()
    }
}

/// Placement of method-of-fundamental-solutions sources for one resolution tier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub inner_sources: usize,
    pub outer_sources: usize,
    /// Radius in the conformal parameter of the interior source curve.
    pub inner_offset: f64,
    /// Radial scaling of the outer boundary for the exterior source curve.
    pub outer_offset: f64,
    /// Collocation points per source on each component.
    pub collocation_factor: usize,
}

/// Pose-independent solve of the outer-domain problem driven from the control arc.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmaConfig {
    pub modes: usize,
    pub window_power: i32,
    pub sources: usize,
    pub offset: f64,
    pub collocation: usize,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig {
            modes: 24,
            window_power: 12,
            sources: 512,
            offset: 1.15,
            collocation: 1024,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Resolution ladder, tried in order until self-verification passes.
    pub tiers: Vec<Resolution>,
    pub svd_cutoff: f64,
    /// Max-norm Neumann/Dirichlet residual; defaults to 1e-8 for disks and
    /// 1e-6 for conformal shapes. Scaled by `max(1, |data|_inf)`.
    pub boundary_tol: Option<f64>,
    pub eval_clearance: f64,
    pub verify_factor: usize,
    pub quadrature_points: usize,
    pub cache_capacity: usize,
    pub sigma: SigmaConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tiers: vec![
                Resolution {
                    inner_sources: 64,
                    outer_sources: 32,
                    inner_offset: 0.7,
                    outer_offset: 2.0,
                    collocation_factor: 2,
                },
                Resolution {
                    inner_sources: 128,
                    outer_sources: 128,
                    inner_offset: 0.7,
                    outer_offset: 1.2,
                    collocation_factor: 2,
                },
                Resolution {
                    inner_sources: 192,
                    outer_sources: 192,
                    inner_offset: 0.7,
                    outer_offset: 1.15,
                    collocation_factor: 2,
                },
            ],
            svd_cutoff: 1e-12,
            boundary_tol: None,
            eval_clearance: 1e-3,
            verify_factor: 4,
            quadrature_points: 256,
            cache_capacity: 64,
            sigma: SigmaConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn tolerance(&self, disk: bool) -> f64 {
        self.boundary_tol
            .unwrap_or(if disk { 1e-8 } else { 1e-6 })
    }

    pub fn validate(&self) -> Result<()> {
        if self.tiers.is_empty() {
            return Err(Error::InvalidScenario("solver needs at least one resolution tier".into()));
        }
        for t in &self.tiers {
            if t.inner_sources < 8 || t.outer_sources < 8 || t.collocation_factor < 1 {
                return Err(Error::InvalidScenario(format!("resolution tier too coarse: {t:?}")));
            }
            if !(t.inner_offset > 0.0 && t.inner_offset < 1.0) || !(t.outer_offset > 1.0) {
                return Err(Error::InvalidScenario(format!(
                    "source offsets must satisfy 0 < inner < 1 < outer: {t:?}"
                )));
            }
        }
        if !(self.svd_cutoff > 0.0) || self.verify_factor < 2 || self.quadrature_points < 16 {
            return Err(Error::InvalidScenario("invalid solver cutoff, verification factor or quadrature size".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_source() -> HarmonicField {
        HarmonicField::new(Arc::new(vec![Vec2::zeros()]), vec![1.0], Vec2::zeros(), 0.0, 0.0, 1e-3)
    }

    #[test]
    fn zero_field_evaluates_to_zero() {
        let (v, g) = HarmonicField::zero().evaluate(Vec2::new(1.0, 2.0)).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, Vec2::zeros());
    }

    #[test]
    fn unit_source_hand_values() {
        let (v, g) = unit_source().evaluate(Vec2::new(2.0, 0.0)).unwrap();
        assert_relative_eq!(v, 2f64.ln() / (2.0 * PI), epsilon = 1e-15);
        assert_relative_eq!(g, Vec2::new(1.0 / (4.0 * PI), 0.0), epsilon = 1e-15);
    }

    #[test]
    fn near_source_is_rejected() {
        let e = unit_source().evaluate(Vec2::new(1e-4, 0.0)).unwrap_err();
        assert!(matches!(e, Error::EvaluationNearSource { .. }));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let f = HarmonicField::new(
            Arc::new(vec![Vec2::new(0.3, -0.2), Vec2::new(3.0, 4.0)]),
            vec![0.7, -1.3],
            Vec2::new(-0.1, 0.05),
            0.4,
            2.0,
            1e-3,
        );
        let x = Vec2::new(1.1, 0.9);
        let h = 1e-4;
        let g = f.gradient(x);
        let gx = (f.value(x + Vec2::new(h, 0.0)) - f.value(x - Vec2::new(h, 0.0))) / (2.0 * h);
        let gy = (f.value(x + Vec2::new(0.0, h)) - f.value(x - Vec2::new(0.0, h))) / (2.0 * h);
        assert!((g - Vec2::new(gx, gy)).norm() < 1e-6);
    }

    #[test]
    fn combine_shared_and_disjoint_agree() {
        let a = unit_source();
        let b = HarmonicField::new(a.sources.clone(), vec![2.0], Vec2::zeros(), 0.0, 1.0, 1e-3);
        let c = HarmonicField::new(Arc::new(vec![Vec2::new(5.0, 0.0)]), vec![-1.0], Vec2::zeros(), 0.0, 0.0, 1e-3);
        let x = Vec2::new(0.5, 1.5);
        let ab = HarmonicField::combine(&[(2.0, &a), (-0.5, &b)]);
        assert_eq!(ab.strengths().len(), 1);
        assert_relative_eq!(ab.value(x), 2.0 * a.value(x) - 0.5 * b.value(x), epsilon = 1e-14);
        let ac = HarmonicField::combine(&[(1.0, &a), (3.0, &c)]);
        assert_relative_eq!(ac.value(x), a.value(x) + 3.0 * c.value(x), epsilon = 1e-14);
    }

    #[test]
    fn exterior_series_matches_source_sum() {
        let ys: Vec<Vec2> = (0..12)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / 12.0;
                Vec2::new(10.0 * t.cos(), 9.0 * t.sin())
            })
            .collect();
        let s: Vec<f64> = (0..12).map(|k| (k as f64 * 0.7).sin()).collect();
        let ext = HarmonicField::exterior(Arc::new(ys.clone()), s.clone(), 1e-3);
        let direct = HarmonicField::new(Arc::new(ys), s, Vec2::zeros(), 0.0, 0.0, 1e-3);
        for x in [Vec2::new(0.3, -1.2), Vec2::new(-2.5, 2.0), Vec2::new(6.0, 1.0)] {
            let (v, g) = ext.value_grad(x);
            let (vd, gd) = direct.value_grad(x);
            assert_relative_eq!(v, vd, epsilon = 1e-13);
            assert!((g - gd).norm() < 1e-13);
        }
        let inner = unit_source();
        let sum = HarmonicField::combine(&[(2.0, &ext), (1.0, &inner)]);
        let x = Vec2::new(0.4, 0.9);
        assert_relative_eq!(sum.value(x), 2.0 * direct.value(x) + inner.value(x), epsilon = 1e-13);
    }
}
