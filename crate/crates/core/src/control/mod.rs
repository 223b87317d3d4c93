//! Impulsive boundary control: time bumps, impulse vectors, and spatial
//! profiles on the control arc that realize prescribed kinetic moments.

mod bump;
mod cone;
mod patch;
mod synth;

use serde::{Deserialize, Serialize};

pub use bump::{boundary_bumps, mollifier, mollifier_deriv, BoundaryBump, TimeBump};
pub use cone::{cone_points_general, cone_weights_disk, ConeSites, DISK_DIRECTIONS};
pub use patch::{
    fit_extensions, harmonic_extension, local_harmonic_patch, zero_mean_combination, zero_mean_weights,
    CollarSpec, Extension, LaurentPatch,
};
pub use synth::{
    synthesize_continued, synthesize_spatial_control, synthesize_with, MomentMaps, PipelineReport, SpatialControl, SynthesisConfig,
    SynthesisStage,
};

use crate::dynamics::Model;
use crate::error::{Error, Result};
use crate::geodesic::GeodesicSolution;
use crate::geometry::{Pose, Vec3};

/// One active pulse at a given time: amplitude, its time derivative and the
/// spatial profile it multiplies.
#[derive(Clone, Copy, Debug)]
pub struct Pulse<'a> {
    pub beta: f64,
    pub beta_dot: f64,
    pub coeffs: &'a [f64],
}

/// `g(t) = beta_eps(t) g0 + beta_eps(T - t) g1`, optionally time-rescaled as
/// `g^lambda(t) = g(t / lambda) / lambda`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpulsiveControl {
    pub bump: TimeBump,
    pub t_final: f64,
    pub v0: Vec3,
    pub v1: Vec3,
    pub first: SpatialControl,
    pub second: SpatialControl,
    pub time_scale: f64,
}

impl ImpulsiveControl {
    pub fn epsilon(&self) -> f64 {
        self.bump.epsilon
    }

    /// Horizon in rescaled time.
    pub fn horizon(&self) -> f64 {
        self.t_final * self.time_scale
    }

    pub fn is_zero(&self) -> bool {
        self.first.is_zero() && self.second.is_zero()
    }

    /// Pulse amplitudes `(beta(t), beta(T - t))` in rescaled time, including the `1/lambda` factor.
    pub fn amplitudes(&self, t: f64) -> [f64; 2] {
        let l = self.time_scale;
        let tau = t / l;
        [self.bump.value(tau) / l, self.bump.value(self.t_final - tau) / l]
    }

    /// Time windows (rescaled) in which pulses can be nonzero.
    pub fn windows(&self) -> [[f64; 2]; 2] {
        let l = self.time_scale;
        let w = 2.0 * self.bump.epsilon;
        [[0.0, w * l], [(self.t_final - w) * l, self.t_final * l]]
    }

    pub fn active(&self, t: f64) -> Vec<Pulse<'_>> {
        let l = self.time_scale;
        let tau = t / l;
        let w = 2.0 * self.bump.epsilon;
        let mut out = Vec::with_capacity(2);
        if tau > 0.0 && tau < w && !self.first.is_zero() {
            out.push(Pulse {
                beta: self.bump.value(tau) / l,
                beta_dot: self.bump.deriv(tau) / (l * l),
                coeffs: &self.first.coeffs,
            });
        }
        let back = self.t_final - tau;
        if back > 0.0 && back < w && !self.second.is_zero() {
            out.push(Pulse {
                beta: self.bump.value(back) / l,
                beta_dot: -self.bump.deriv(back) / (l * l),
                coeffs: &self.second.coeffs,
            });
        }
        out
    }

    /// The same spatial profiles with pulse width `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(4.0 * epsilon < self.t_final) {
            return Err(Error::InvalidScenario(format!(
                "pulse width {epsilon} too large for horizon {}",
                self.t_final
            )));
        }
        let mut out = self.clone();
        out.bump = TimeBump::new(epsilon)?;
        Ok(out)
    }

    /// The control of the rescaled problem `q(t / lambda)`.
    pub fn rescaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.time_scale *= lambda;
        out
    }
}

/// Impulse vectors `v0 = M(q0)(c0 - q0')` and `v1 = -M(q1)(c1 - q1')` with
/// `M` the total inertia.
pub fn impulses(model: &Model, geo: &GeodesicSolution, q0p: &Vec3, q1p: &Vec3) -> Result<(Vec3, Vec3)> {
    let m0 = model.total_inertia(&geo.q0)?;
    let m1 = model.total_inertia(&geo.q1)?;
    Ok((m0 * (geo.c0 - q0p), -(m1 * (geo.c1 - q1p))))
}

/// Assemble the two-pulse control steering `(q0, q0')` to `(q1, q1')` along
/// the geodesic `geo` over `[0, T]`. The pulse profiles realize moments
/// `-2 v0` at `q0` and `-2 v1` at `q1`.
pub fn build_control(
    model: &Model,
    geo: &GeodesicSolution,
    q0p: &Vec3,
    q1p: &Vec3,
    epsilon: f64,
    cfg: &SynthesisConfig,
) -> Result<ImpulsiveControl> {
    assemble(model, geo, q0p, q1p, epsilon, cfg, None)
}

/// As [`build_control`], continuing the profiles of `previous` so that the
/// control depends smoothly on the endpoint data.
pub fn build_control_continued(
    model: &Model,
    geo: &GeodesicSolution,
    q0p: &Vec3,
    q1p: &Vec3,
    epsilon: f64,
    cfg: &SynthesisConfig,
    previous: &ImpulsiveControl,
) -> Result<ImpulsiveControl> {
    assemble(model, geo, q0p, q1p, epsilon, cfg, Some(previous))
}

fn assemble(
    model: &Model,
    geo: &GeodesicSolution,
    q0p: &Vec3,
    q1p: &Vec3,
    epsilon: f64,
    cfg: &SynthesisConfig,
    previous: Option<&ImpulsiveControl>,
) -> Result<ImpulsiveControl> {
    let t_final = geo.t_final;
    if !(4.0 * epsilon < t_final) {
        return Err(Error::InvalidScenario(format!(
            "pulse width {epsilon} too large for horizon {t_final}"
        )));
    }
    let bump = TimeBump::new(epsilon)?;
    let (v0, v1) = impulses(model, geo, q0p, q1p)?;
    if model.shape().is_disk() {
        for v in [&v0, &v1] {
            if v[2].abs() > 1e-9 * (1.0 + v.norm()) {
                return Err(Error::InvalidScenario(
                    "a disk cannot be steered in rotation; endpoint angular data must follow the free rotation".into(),
                ));
            }
        }
    }
    let first = synth_or_zero(model, &geo.q0, &(-2.0 * v0), cfg, previous.map(|p| &p.first.coeffs[..]))?;
    let second = synth_or_zero(model, &geo.q1, &(-2.0 * v1), cfg, previous.map(|p| &p.second.coeffs[..]))?;
    Ok(ImpulsiveControl {
        bump,
        t_final,
        v0,
        v1,
        first,
        second,
        time_scale: 1.0,
    })
}

fn synth_or_zero(
    model: &Model,
    q: &Pose,
    v: &Vec3,
    cfg: &SynthesisConfig,
    previous: Option<&[f64]>,
) -> Result<SpatialControl> {
    if v.norm() == 0.0 {
        let modes = model.solver().sigma_basis()?.modes();
        return Ok(SpatialControl::zero(*q, modes));
    }
    match previous {
        Some(p) => synthesize_continued(model, q, v, cfg, p),
        None => synthesize_spatial_control(model, q, v, cfg),
    }
}
