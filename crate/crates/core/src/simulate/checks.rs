//! Self-checks run before trusting a scenario.

use serde::{Deserialize, Serialize};

use crate::dynamics::Model;
use crate::error::Result;
use crate::geodesic::integrate_geodesic;
use crate::geometry::{place_solid, Pose, Vec3};

use super::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

/// Geometric closure, solver verification, added-mass structure, stream
/// normalization and energy conservation at the scenario endpoints.
pub fn invariant_checks(model: &Model, scen: &Scenario) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let ends = [("q0", scen.q0()), ("q1", scen.q1())];
    for (tag, q) in &ends {
        let s = place_solid(model.shape(), q, 512);
        let n: f64 = (0..2).map(|i| s.integrate(|k| s.normals[k][i]).abs()).fold(0.0, f64::max);
        let rot = s.integrate(|k| s.rot[k]).abs();
        out.push(Check::new(
            format!("closure of normals and rotational data at {tag}"),
            n.max(rot) / s.perimeter(),
            1e-10,
        ));

        let set = model.kirchhoff(q)?;
        out.push(Check::new(
            format!("Kirchhoff solve residual at {tag}"),
            set.report.residual,
            set.report.tolerance,
        ));

        let inertia = model.added_mass(q)?;
        out.push(Check::new(format!("added mass asymmetry at {tag}"), inertia.asymmetry, 1e-8));
        let eig = inertia.ma.symmetric_eigenvalues();
        let trace = inertia.ma.trace();
        out.push(Check::new(
            format!("added mass negative part at {tag}"),
            (-eig.min() / trace).max(0.0),
            1e-10,
        ));

        let stream = model.solver().solve_stream(q)?;
        out.push(Check::new(
            format!("stream flux normalization at {tag}"),
            (stream.normalized_flux + 1.0).abs(),
            1e-8,
        ));
    }

    let basis = model.solver().sigma_basis()?;
    out.push(Check::new("control basis solve residual", basis.report().residual, basis.report().tolerance));

    let c0 = (scen.q1().to_vec3() - scen.q0().to_vec3()) / scen.t_final();
    let drift = energy_drift(model, &scen.q0(), &c0, scen.t_final(), scen)?;
    out.push(Check::new("energy drift of free motion", drift, 1e-6));
    Ok(out)
}

/// Largest relative change of the kinetic energy along the uncontrolled,
/// circulation-free motion from `(q0, c0)`.
pub fn energy_drift(model: &Model, q0: &Pose, c0: &Vec3, t_final: f64, scen: &Scenario) -> Result<f64> {
    let sol = integrate_geodesic(model, q0, c0, t_final, &scen.simulate.ode)?;
    let e0 = model.energy(q0, c0)?;
    if e0 == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for t in sol.mesh() {
        let y = sol.eval(t);
        let e = model.energy(&Pose::new(y[0], y[1], y[2]), &Vec3::new(y[3], y[4], y[5]))?;
        worst = worst.max((e - e0).abs() / e0);
    }
    Ok(worst)
}
