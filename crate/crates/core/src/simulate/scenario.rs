//! Scenario description: shape, domain, dynamics, control and run settings.

use serde::{Deserialize, Serialize};

use crate::control::SynthesisConfig;
use crate::dynamics::{DynamicsConfig, Model};
use crate::error::{Error, Result};
use crate::geodesic::ShootConfig;
use crate::geometry::{admissible, DomainSpec, OuterBoundary, Pose, SolidShape, State, Vec2, Vec3, C64};
use crate::laplace::SolverConfig;
use crate::ode::OdeOptions;

/// Solid shape. Lengths in domain units, mass in mass units, inertia in
/// mass times length squared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeConfig {
    Disk {
        radius: f64,
        mass: f64,
        inertia: f64,
    },
    /// Ellipse `zeta + c / zeta`.
    Joukowski {
        c: f64,
        mass: f64,
        inertia: f64,
    },
    /// `rho zeta + c0 + sum_k coeffs[k-1] zeta^-k`, complex numbers as `[re, im]`.
    Conformal {
        rho: f64,
        #[serde(default)]
        c0: [f64; 2],
        coeffs: Vec<[f64; 2]>,
        mass: f64,
        inertia: f64,
        /// Reference center; defaults to the centroid.
        #[serde(default)]
        center: Option<[f64; 2]>,
    },
}

impl ShapeConfig {
    pub fn build(&self) -> Result<SolidShape> {
        match self {
            ShapeConfig::Disk { radius, mass, inertia } => SolidShape::disk(*radius, *mass, *inertia),
            ShapeConfig::Joukowski { c, mass, inertia } => SolidShape::joukowski(*c, *mass, *inertia),
            ShapeConfig::Conformal {
                rho,
                c0,
                coeffs,
                mass,
                inertia,
                center,
            } => {
                let s = SolidShape::conformal(
                    *rho,
                    C64::new(c0[0], c0[1]),
                    coeffs.iter().map(|c| C64::new(c[0], c[1])).collect(),
                    *mass,
                    *inertia,
                )?;
                match center {
                    Some(h) => s.with_reference_center(Vec2::new(h[0], h[1])),
                    None => Ok(s),
                }
            }
        }
    }
}

/// Outer wall (circle of `radius`, optionally perturbed into a star shape),
/// control arc `sigma = [a, b]` in radians and clearance `delta` (length).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub radius: f64,
    pub sigma: [f64; 2],
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub star_cos: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub star_sin: Vec<f64>,
}

impl DomainConfig {
    pub fn build(&self) -> Result<DomainSpec> {
        let outer = if self.star_cos.is_empty() && self.star_sin.is_empty() {
            OuterBoundary::Circle { radius: self.radius }
        } else {
            OuterBoundary::Star {
                radius: self.radius,
                cos: self.star_cos.clone(),
                sin: self.star_sin.clone(),
            }
        };
        DomainSpec::new(outer, self.sigma, self.delta)
    }
}

/// Circulation (length squared per time) and numerical settings of the
/// equation of motion.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSection {
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub model: DynamicsConfig,
}

/// Pulse width `epsilon` (time) and spatial synthesis settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSection {
    pub epsilon: f64,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Toy,
    Intermediate,
    Full,
    Exact,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Mode::Toy),
            "intermediate" => Ok(Mode::Intermediate),
            "full" => Ok(Mode::Full),
            "exact" => Ok(Mode::Exact),
            _ => Err(Error::InvalidScenario(format!("unknown mode {s:?}"))),
        }
    }
}

fn default_exact_tol() -> f64 {
    1e-4
}

fn default_max_corrections() -> usize {
    10
}

/// Endpoint data (poses `[x, y, theta]`, velocities `[x', y', theta']`),
/// horizon `t_final` (time) and integration settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSection {
    pub q0: [f64; 3],
    #[serde(default)]
    pub q0p: [f64; 3],
    pub q1: [f64; 3],
    #[serde(default)]
    pub q1p: [f64; 3],
    pub t_final: f64,
    pub mode: Mode,
    #[serde(default)]
    pub ode: OdeOptions,
    #[serde(default)]
    pub shoot: ShootConfig,
    #[serde(default = "default_exact_tol")]
    pub exact_tol: f64,
    #[serde(default = "default_max_corrections")]
    pub max_corrections: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub shape: ShapeConfig,
    pub domain: DomainConfig,
    #[serde(default)]
    pub dynamics: DynamicsSection,
    pub control: ControlSection,
    pub simulate: SimulateSection,
}

impl Scenario {
    /// Joukowski ellipse (`c = 0.3`, `m = 1`, `J = 0.5`) in a disk of radius
    /// 10 with a quarter-turn control arc, moved by `(0.05, 0.03, 0.04)` from
    /// rest to rest in unit time.
    pub fn baseline() -> Self {
        let quarter = std::f64::consts::FRAC_PI_4;
        Scenario {
            shape: ShapeConfig::Joukowski {
                c: 0.3,
                mass: 1.0,
                inertia: 0.5,
            },
            domain: DomainConfig {
                radius: 10.0,
                sigma: [-quarter, quarter],
                delta: 1.0,
                star_cos: Vec::new(),
                star_sin: Vec::new(),
            },
            dynamics: DynamicsSection::default(),
            control: ControlSection {
                epsilon: 0.05,
                synthesis: SynthesisConfig::default(),
            },
            simulate: SimulateSection {
                q0: [0.0; 3],
                q0p: [0.0; 3],
                q1: [0.05, 0.03, 0.04],
                q1p: [0.0; 3],
                t_final: 1.0,
                mode: Mode::Full,
                ode: OdeOptions::default(),
                shoot: ShootConfig::default(),
                exact_tol: default_exact_tol(),
                max_corrections: default_max_corrections(),
            },
        }
    }

    pub fn q0(&self) -> Pose {
        Pose::new(self.simulate.q0[0], self.simulate.q0[1], self.simulate.q0[2])
    }

    pub fn q1(&self) -> Pose {
        Pose::new(self.simulate.q1[0], self.simulate.q1[1], self.simulate.q1[2])
    }

    pub fn q0p(&self) -> Vec3 {
        Vec3::from(self.simulate.q0p)
    }

    pub fn q1p(&self) -> Vec3 {
        Vec3::from(self.simulate.q1p)
    }

    pub fn start(&self) -> State {
        State::new(self.q0(), self.q0p())
    }

    pub fn target(&self) -> State {
        State::new(self.q1(), self.q1p())
    }

    pub fn gamma(&self) -> f64 {
        self.dynamics.gamma
    }

    pub fn epsilon(&self) -> f64 {
        self.control.epsilon
    }

    pub fn t_final(&self) -> f64 {
        self.simulate.t_final
    }

    /// Build the dynamics model after checking the scenario.
    pub fn model(&self) -> Result<Model> {
        let shape = self.shape.build()?;
        let domain = self.domain.build()?;
        self.check(&shape, &domain)?;
        Model::new(shape, domain, self.dynamics.solver.clone(), self.dynamics.model)
    }

    /// Everything that can be rejected without solving anything.
    pub fn validate(&self) -> Result<()> {
        let shape = self.shape.build()?;
        let domain = self.domain.build()?;
        self.check(&shape, &domain)
    }

    fn check(&self, shape: &SolidShape, domain: &DomainSpec) -> Result<()> {
        let s = &self.simulate;
        let finite = |a: &[f64; 3]| a.iter().all(|x| x.is_finite());
        if ![s.q0, s.q0p, s.q1, s.q1p].iter().all(finite) || !self.gamma().is_finite() {
            return Err(Error::InvalidScenario("non-finite endpoint data or circulation".into()));
        }
        if !(s.t_final > 0.0) {
            return Err(Error::InvalidScenario("horizon must be positive".into()));
        }
        let eps = self.epsilon();
        if !(eps > 0.0 && eps < 1.0 && 4.0 * eps < s.t_final) {
            return Err(Error::InvalidScenario(format!(
                "pulse width {eps} must lie in (0, min(1, T/4))"
            )));
        }
        for (name, q) in [("q0", self.q0()), ("q1", self.q1())] {
            if !admissible(shape, domain, &q) {
                return Err(Error::InvalidScenario(format!("{name} is not at clearance above delta")));
            }
        }
        if shape.is_disk() {
            let free = (s.q1[2] - s.q0[2]) / s.t_final;
            let tol = 1e-12 * (1.0 + free.abs());
            if (s.q0p[2] - free).abs() > tol || (s.q1p[2] - free).abs() > tol {
                return Err(Error::InvalidScenario(
                    "a disk cannot be steered in rotation: the fluid exerts no torque on it, so the angular \
                     data must follow the free rotation (theta1 - theta0) / T"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}
