//! Geodesics of the total-inertia metric and the two-point shooting problem.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Model, Terms};
use crate::error::{Error, Result};
use crate::geometry::{admissible, Pose, State, Vec3};
use crate::ode::{dopri5, DenseSolution, OdeOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Finite-difference step on the initial velocity.
    pub fd_step: f64,
    /// Largest admissible displacement `|q1 - q0|`; `None` means `0.1 delta`.
    pub radius: Option<f64>,
    pub ode: OdeOptions,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            tolerance: 1e-8,
            max_iterations: 50,
            fd_step: 1e-5,
            radius: None,
            ode: OdeOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GeodesicSolution {
    pub q0: Pose,
    pub q1: Pose,
    pub t_final: f64,
    pub c0: Vec3,
    pub c1: Vec3,
    pub residual: f64,
    pub iterations: usize,
    pub trajectory: DenseSolution<6>,
}

impl GeodesicSolution {
    pub fn state(&self, t: f64) -> State {
        State::from_array(&self.trajectory.eval(t))
    }
}

pub(crate) fn admissibility_check(model: &Model) -> impl FnMut(f64, &[f64; 6]) -> Result<()> + '_ {
    move |t, y| {
        let q = Pose::new(y[0], y[1], y[2]);
        if !q.is_finite() || !admissible(model.shape(), model.domain(), &q) {
            return Err(Error::LeftAdmissibleSet { t_exit: t });
        }
        Ok(())
    }
}

/// Uncontrolled, circulation-free motion from `(q0, c0)` over `[0, t_final]`.
pub fn integrate_geodesic(
    model: &Model,
    q0: &Pose,
    c0: &Vec3,
    t_final: f64,
    opts: &OdeOptions,
) -> Result<DenseSolution<6>> {
    let y0 = State::new(*q0, *c0).to_array();
    dopri5(
        |t, y: &[f64; 6]| {
            let s = State::from_array(y);
            let acc = model.rhs(&s.pose, &s.vel, 0.0, None, t, Terms::NONE)?.acc;
            Ok([y[3], y[4], y[5], acc[0], acc[1], acc[2]])
        },
        0.0,
        y0,
        t_final,
        opts,
        admissibility_check(model),
    )
}

fn endpoint(model: &Model, q0: &Pose, c0: &Vec3, t_final: f64, opts: &OdeOptions) -> Result<Vec3> {
    let y = integrate_geodesic(model, q0, c0, t_final, opts)?.last();
    Ok(Vec3::new(y[0], y[1], y[2]))
}

/// Find the geodesic joining `q0` to `q1` in time `t_final` by damped Newton
/// iteration on the initial velocity.
pub fn shoot(model: &Model, q0: &Pose, q1: &Pose, t_final: f64, cfg: &ShootConfig) -> Result<GeodesicSolution> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidScenario("horizon must be positive".into()));
    }
    let target = q1.to_vec3();
    let disp = target - q0.to_vec3();
    let radius = cfg.radius.unwrap_or(0.1 * model.domain().delta());
    if disp.norm() > radius {
        return Err(Error::InvalidScenario(format!(
            "displacement {:.3e} exceeds shooting radius {radius:.3e}; split the motion into legs",
            disp.norm()
        )));
    }
    let mut c = disp / t_final;
    let mut r = endpoint(model, q0, &c, t_final, &cfg.ode)? - target;
    let mut iterations = 0;
    while r.norm() > cfg.tolerance {
        if iterations == cfg.max_iterations {
            return Err(Error::ShootingDiverged {
                iterations,
                residual: r.norm(),
            });
        }
        iterations += 1;
        let h = cfg.fd_step * (1.0 + c.norm());
        let cols: Vec<Result<Vec3>> = model.config().execution.map_range(3, |i| {
            let mut e = Vec3::zeros();
            e[i] = h;
            let p = endpoint(model, q0, &(c + e), t_final, &cfg.ode)?;
            let m = endpoint(model, q0, &(c - e), t_final, &cfg.ode)?;
            Ok((p - m) / (2.0 * h))
        });
        let mut jac = crate::geometry::Mat3::zeros();
        for (i, col) in cols.into_iter().enumerate() {
            jac.set_column(i, &col?);
        }
        let step = jac.lu().solve(&-r).ok_or(Error::ShootingDiverged {
            iterations,
            residual: r.norm(),
        })?;
        let mut scale = 1.0;
        loop {
            let trial = c + scale * step;
            match endpoint(model, q0, &trial, t_final, &cfg.ode) {
                Ok(e) if (e - target).norm() < r.norm() => {
                    c = trial;
                    r = e - target;
                    break;
                }
                _ if scale > 1e-6 => scale *= 0.5,
                _ => {
                    return Err(Error::ShootingDiverged {
                        iterations,
                        residual: r.norm(),
                    })
                }
            }
        }
    }
    let trajectory = integrate_geodesic(model, q0, &c, t_final, &cfg.ode)?;
    let y = trajectory.last();
    Ok(GeodesicSolution {
        q0: *q0,
        q1: *q1,
        t_final,
        c0: c,
        c1: Vec3::new(y[3], y[4], y[5]),
        residual: r.norm(),
        iterations,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DomainSpec, SolidShape};
    use crate::laplace::SolverConfig;
    use crate::dynamics::DynamicsConfig;
    use std::f64::consts::FRAC_PI_4;

    fn model() -> Model {
        let shape = SolidShape::joukowski(0.3, 1.0, 0.5).unwrap();
        let domain = DomainSpec::disk(10.0, [-FRAC_PI_4, FRAC_PI_4], 1.0).unwrap();
        Model::new(shape, domain, SolverConfig::default(), DynamicsConfig::default()).unwrap()
    }

    #[test]
    fn zero_velocity_is_stationary() {
        let m = model();
        let q = Pose::new(0.02, -0.01, 0.1);
        let sol = integrate_geodesic(&m, &q, &Vec3::zeros(), 1.0, &OdeOptions::default()).unwrap();
        let y = sol.last();
        assert!((Vec3::new(y[0], y[1], y[2]) - q.to_vec3()).norm() < 1e-14);
        let g = shoot(&m, &q, &q, 1.0, &ShootConfig::default()).unwrap();
        assert_eq!(g.iterations, 0);
        assert_eq!(g.c0, Vec3::zeros());
        assert_eq!(g.c1, Vec3::zeros());
    }

    #[test]
    fn displacement_outside_radius_is_rejected() {
        let m = model();
        let r = shoot(&m, &Pose::origin(), &Pose::new(0.5, 0.0, 0.0), 1.0, &ShootConfig::default());
        assert!(matches!(r, Err(Error::InvalidScenario(_))));
    }
}
