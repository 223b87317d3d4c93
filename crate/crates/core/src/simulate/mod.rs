//! Closed-loop experiments: the toy, intermediate and full controlled
//! motions, time rescaling, gluing of legs, the terminal fixed-point
//! correction and flux diagnostics.

mod checks;
mod scenario;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use checks::{energy_drift, invariant_checks, Check};
pub use scenario::{ControlSection, DomainConfig, DynamicsSection, Mode, Scenario, ShapeConfig, SimulateSection};

use crate::control::{build_control, build_control_continued, impulses, ImpulsiveControl, TimeBump};
use crate::dynamics::{Model, Terms};
use crate::error::{Error, Result};
use crate::geodesic::{shoot, GeodesicSolution};
use crate::geometry::{clearance, Pose, State, Vec3};
use crate::linalg::gauss_legendre;
use crate::ode::{dopri5, DenseSolution, OdeOptions};

/// Something that happened during a run, for the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub label: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
struct Leg {
    /// Start time in unscaled time.
    offset: f64,
    sol: Arc<DenseSolution<6>>,
    /// Traverse `sol` backwards with negated velocity.
    reversed: bool,
}

impl Leg {
    fn len(&self) -> f64 {
        (self.sol.t1() - self.sol.t0()).abs()
    }

    fn state(&self, tau: f64) -> State {
        let s = &self.sol;
        let dir = (s.t1() - s.t0()).signum();
        if self.reversed {
            let mut st = State::from_array(&s.eval(s.t1() - dir * tau));
            st.vel = -st.vel;
            st
        } else {
            State::from_array(&s.eval(s.t0() + dir * tau))
        }
    }

    fn mesh(&self) -> Vec<f64> {
        let s = &self.sol;
        s.mesh()
            .into_iter()
            .map(|t| {
                let tau = (t - s.t0()).abs();
                if self.reversed {
                    self.offset + self.len() - tau
                } else {
                    self.offset + tau
                }
            })
            .collect()
    }
}

/// Dense motion `t -> (q, q')` made of one or more glued legs, possibly
/// viewed in rescaled time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    legs: Vec<Leg>,
    time_scale: f64,
    pub target: State,
    pub events: Vec<Event>,
    pub min_clearance: f64,
}

impl Trajectory {
    fn single(sol: DenseSolution<6>, target: State, min_clearance: f64) -> Self {
        Trajectory {
            legs: vec![Leg {
                offset: 0.0,
                sol: Arc::new(sol),
                reversed: false,
            }],
            time_scale: 1.0,
            target,
            events: Vec::new(),
            min_clearance,
        }
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn t_start(&self) -> f64 {
        self.time_scale * self.legs[0].offset
    }

    pub fn t_end(&self) -> f64 {
        let leg = self.legs.last().expect("nonempty");
        self.time_scale * (leg.offset + leg.len())
    }

    pub fn legs(&self) -> usize {
        self.legs.len()
    }

    pub fn state(&self, t: f64) -> State {
        let tau = t / self.time_scale;
        let i = self
            .legs
            .partition_point(|l| l.offset + l.len() < tau)
            .min(self.legs.len() - 1);
        let leg = &self.legs[i];
        let mut st = leg.state((tau - leg.offset).clamp(0.0, leg.len()));
        st.vel /= self.time_scale;
        st
    }

    pub fn initial(&self) -> State {
        self.state(self.t_start())
    }

    pub fn terminal(&self) -> State {
        self.state(self.t_end())
    }

    /// `|(q, q')(end) - (q1, q1')|`.
    pub fn terminal_error(&self) -> f64 {
        self.terminal().distance(&self.target)
    }

    /// Accepted step times of all legs, increasing.
    pub fn mesh(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .legs
            .iter()
            .flat_map(|l| l.mesh())
            .map(|t| self.time_scale * t)
            .collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn steps(&self) -> usize {
        self.legs.iter().map(|l| l.sol.steps()).sum()
    }

    pub fn evaluations(&self) -> usize {
        self.legs.iter().map(|l| l.sol.evaluations).sum()
    }

    /// `n + 1` equally spaced samples.
    pub fn sample(&self, n: usize) -> Vec<(f64, State)> {
        let (a, b) = (self.t_start(), self.t_end());
        (0..=n)
            .map(|k| {
                let t = a + (b - a) * k as f64 / n as f64;
                (t, self.state(t))
            })
            .collect()
    }

    /// Motion of the time-reversed problem (circulation of opposite sign):
    /// `t -> (q(T - t), -q'(T - t))` on the same interval.
    pub fn reversed(&self) -> Trajectory {
        let (a, b) = (self.legs[0].offset, {
            let l = self.legs.last().expect("nonempty");
            l.offset + l.len()
        });
        let legs = self
            .legs
            .iter()
            .rev()
            .map(|l| Leg {
                offset: a + b - l.offset - l.len(),
                sol: l.sol.clone(),
                reversed: !l.reversed,
            })
            .collect();
        let s0 = self.initial();
        let (ta, tb) = (self.t_start(), self.t_end());
        Trajectory {
            legs,
            time_scale: self.time_scale,
            target: State::new(s0.pose, -s0.vel),
            events: self
                .events
                .iter()
                .rev()
                .map(|e| Event {
                    t: ta + tb - e.t,
                    ..e.clone()
                })
                .collect(),
            min_clearance: self.min_clearance,
        }
    }

    /// Largest `|q'|` over `n + 1` samples.
    pub fn max_speed(&self, n: usize) -> f64 {
        self.sample(n).iter().map(|(_, s)| s.vel.norm()).fold(0.0, f64::max)
    }
}

/// The same motion run `lambda` times slower: `q^lambda(t) = q(t / lambda)`.
/// Pair with [`ImpulsiveControl::rescaled`] and circulation `gamma / lambda`.
pub fn time_rescale(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidScenario("rescaling factor must be positive".into()));
    }
    let mut out = traj.clone();
    out.time_scale *= lambda;
    out.target.vel /= lambda;
    for e in out.events.iter_mut() {
        e.t *= lambda;
    }
    Ok(out)
}

/// Concatenate legs whose endpoint states agree within `1e-8`.
pub fn glue(legs: Vec<Trajectory>) -> Result<Trajectory> {
    let mut iter = legs.into_iter();
    let mut out = iter
        .next()
        .ok_or_else(|| Error::InvalidScenario("nothing to glue".into()))?;
    for (junction, leg) in (1..).zip(iter) {
        if (leg.time_scale / out.time_scale - 1.0).abs() > 1e-14 {
            return Err(Error::InvalidScenario("legs must share a time scale".into()));
        }
        let mismatch = out.terminal().distance(&leg.initial());
        if mismatch > 1e-8 {
            return Err(Error::JunctionMismatch { junction, mismatch });
        }
        let t_join = out.t_end();
        let leg_start = leg.t_start();
        let shift = t_join / out.time_scale - leg.legs[0].offset;
        out.events.push(Event {
            t: t_join,
            label: "junction".into(),
            value: mismatch,
        });
        out.legs.extend(leg.legs.into_iter().map(|mut l| {
            l.offset += shift;
            l
        }));
        out.events.extend(leg.events.into_iter().map(|e| Event {
            t: e.t - leg_start + t_join,
            ..e
        }));
        out.target = leg.target;
        out.min_clearance = out.min_clearance.min(leg.min_clearance);
    }
    Ok(out)
}

/// Right-hand-side extras for [`integrate`].
pub struct Drive<'a> {
    pub gamma: f64,
    pub control: Option<&'a ImpulsiveControl>,
    pub terms: Terms,
    /// Additional generalized force `f(t)`.
    pub force: Option<&'a (dyn Fn(f64) -> Vec3 + Sync)>,
}

impl Drive<'_> {
    pub fn free(gamma: f64) -> Self {
        Drive {
            gamma,
            control: None,
            terms: Terms::FULL,
            force: None,
        }
    }
}

/// Integrate the equation of motion from `start` over `[0, horizon]`,
/// aborting when the clearance drops to `delta`.
pub fn integrate(
    model: &Model,
    start: &State,
    horizon: f64,
    drive: &Drive<'_>,
    opts: &OdeOptions,
    target: State,
) -> Result<Trajectory> {
    let mut opts = opts.clone();
    if let Some(c) = drive.control {
        let h = c.epsilon() * c.time_scale / 20.0;
        for w in c.windows() {
            opts.windows.push([w[0], w[1], h]);
        }
    }
    let delta = model.domain().delta();
    let mut min_clearance = f64::INFINITY;
    let sol = dopri5(
        |t, y: &[f64; 6]| {
            let s = State::from_array(y);
            let r = model.rhs(&s.pose, &s.vel, drive.gamma, drive.control, t, drive.terms)?;
            let mut acc = r.acc;
            if let Some(f) = drive.force {
                let extra = f(t);
                if extra != Vec3::zeros() {
                    acc += r
                        .total
                        .cholesky()
                        .ok_or_else(|| Error::InvalidScenario("total inertia lost definiteness".into()))?
                        .solve(&extra);
                }
            }
            Ok([y[3], y[4], y[5], acc[0], acc[1], acc[2]])
        },
        0.0,
        start.to_array(),
        horizon,
        &opts,
        |t, y| {
            let q = Pose::new(y[0], y[1], y[2]);
            let d = if q.is_finite() {
                clearance(model.shape(), model.domain(), &q)
            } else {
                f64::NEG_INFINITY
            };
            min_clearance = min_clearance.min(d);
            if d <= delta {
                return Err(Error::LeftAdmissibleSet { t_exit: t });
            }
            Ok(())
        },
    )?;
    let mut traj = Trajectory::single(sol, target, min_clearance);
    if let Some(c) = drive.control {
        for (k, w) in c.windows().iter().enumerate() {
            traj.events.push(Event {
                t: w[0],
                label: format!("pulse {k} start"),
                value: 0.0,
            });
            traj.events.push(Event {
                t: w[1],
                label: format!("pulse {k} end"),
                value: 0.0,
            });
        }
    }
    Ok(traj)
}

/// Geodesic joining the scenario endpoints.
pub fn plan_geodesic(model: &Model, scen: &Scenario) -> Result<GeodesicSolution> {
    shoot(model, &scen.q0(), &scen.q1(), scen.t_final(), &scen.simulate.shoot)
}

/// Two-pulse control for the scenario along `geo`.
pub fn plan_control(model: &Model, scen: &Scenario, geo: &GeodesicSolution) -> Result<ImpulsiveControl> {
    build_control(
        model,
        geo,
        &scen.q0p(),
        &scen.q1p(),
        scen.epsilon(),
        &scen.control.synthesis,
    )
}

/// Motion under the prescribed forces `beta(t)^2 v0 + beta(T - t)^2 v1`
/// instead of a fluid control.
pub fn run_toy(model: &Model, scen: &Scenario, geo: &GeodesicSolution) -> Result<Trajectory> {
    let (v0, v1) = impulses(model, geo, &scen.q0p(), &scen.q1p())?;
    let bump = TimeBump::new(scen.epsilon())?;
    let t_final = scen.t_final();
    let force = move |t: f64| {
        let a = bump.value(t);
        let b = bump.value(t_final - t);
        a * a * v0 + b * b * v1
    };
    let eps = scen.epsilon();
    let mut opts = scen.simulate.ode.clone();
    opts.windows.push([0.0, 2.0 * eps, eps / 20.0]);
    opts.windows.push([t_final - 2.0 * eps, t_final, eps / 20.0]);
    let drive = Drive {
        gamma: 0.0,
        control: None,
        terms: Terms::NONE,
        force: Some(&force),
    };
    integrate(model, &scen.start(), t_final, &drive, &opts, scen.target())
}

/// Motion driven only by the quadratic control force.
pub fn run_intermediate(model: &Model, scen: &Scenario, control: &ImpulsiveControl) -> Result<Trajectory> {
    run_with_terms(model, scen, control, 0.0, Terms::INTERMEDIATE)
}

/// Motion under the complete controlled equation with circulation.
pub fn run_full(model: &Model, scen: &Scenario, control: &ImpulsiveControl) -> Result<Trajectory> {
    run_with_terms(model, scen, control, scen.gamma(), Terms::FULL)
}

pub fn run_with_terms(
    model: &Model,
    scen: &Scenario,
    control: &ImpulsiveControl,
    gamma: f64,
    terms: Terms,
) -> Result<Trajectory> {
    let drive = Drive {
        gamma,
        control: Some(control),
        terms,
        force: None,
    };
    let start = State::new(scen.q0(), scen.q0p() / control.time_scale);
    let mut target = scen.target();
    target.vel /= control.time_scale;
    integrate(model, &start, control.horizon(), &drive, &scen.simulate.ode, target)
}

/// `sup_[0,T] |q - qbar| + sup_[2 eps, T - 2 eps] (|q - qbar| + |q' - qbar'|)`,
/// sampled on `n + 1` points and the accepted steps.
pub fn c1_deviation(traj: &Trajectory, geo: &GeodesicSolution, eps: f64, n: usize) -> f64 {
    let t_final = geo.t_final;
    let mut times: Vec<f64> = (0..=n).map(|k| t_final * k as f64 / n as f64).collect();
    times.extend(traj.mesh());
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for t in times {
        let a = traj.state(t);
        let b = geo.state(t);
        let dq = (a.pose.to_vec3() - b.pose.to_vec3()).norm();
        c0 = c0.max(dq);
        if t >= 2.0 * eps && t <= t_final - 2.0 * eps {
            c1 = c1.max(dq + (a.vel - b.vel).norm());
        }
    }
    c0 + c1
}

/// The same measure as [`c1_deviation`] between two runs on `[0, t_final]`.
pub fn run_deviation(a: &Trajectory, b: &Trajectory, t_final: f64, eps: f64, n: usize) -> f64 {
    let mut times: Vec<f64> = (0..=n).map(|k| t_final * k as f64 / n as f64).collect();
    times.extend(a.mesh());
    times.extend(b.mesh());
    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    for t in times {
        let (sa, sb) = (a.state(t), b.state(t));
        let dq = (sa.pose.to_vec3() - sb.pose.to_vec3()).norm();
        c0 = c0.max(dq);
        if t >= 2.0 * eps && t <= t_final - 2.0 * eps {
            c1 = c1.max(dq + (sa.vel - sb.vel).norm());
        }
    }
    c0 + c1
}

/// Largest relative mismatch, over `times`, between the right-hand side of
/// the rescaled problem at the rescaled state and the rescaled acceleration
/// of the original problem.
pub fn rescaling_residual(
    model: &Model,
    original: &Trajectory,
    control: &ImpulsiveControl,
    gamma: f64,
    lambda: f64,
    terms: Terms,
    times: &[f64],
) -> Result<f64> {
    let scaled = time_rescale(original, lambda)?;
    let ctrl = control.rescaled(lambda);
    let mut worst: f64 = 0.0;
    for &tau in times {
        let s = original.state(tau);
        let a = model.rhs(&s.pose, &s.vel, gamma, Some(control), tau, terms)?.acc / (lambda * lambda);
        let t = lambda * tau;
        let sl = scaled.state(t);
        let b = model.rhs(&sl.pose, &sl.vel, gamma / lambda, Some(&ctrl), t, terms)?.acc;
        worst = worst.max((a - b).norm() / a.norm().max(1.0));
    }
    Ok(worst)
}

/// Inflow through the arc and net flux of the wall control over the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FluxMetrics {
    /// `int_0^T int_{g < 0} |g| dsigma dt`.
    pub inflow: f64,
    /// `int_0^T int_arc g dsigma dt`.
    pub net: f64,
    /// `int_0^T int_arc |g| dsigma dt`, the scale of `net`.
    pub scale: f64,
    /// Largest `|int_arc g(t)| / int_arc |g(t)|` over the time nodes.
    pub worst_instant: f64,
}

/// Space-time quadrature of the control flux on the arc: Gauss nodes in each
/// pulse window and the arc rule of the control basis.
pub fn flux_metrics(model: &Model, control: &ImpulsiveControl) -> Result<FluxMetrics> {
    let mut out = FluxMetrics::default();
    if control.is_zero() {
        return Ok(out);
    }
    let basis = model.solver().sigma_basis()?;
    let (nodes, weights) = basis.arc_quadrature();
    let (tn, tw) = gauss_legendre(64);
    let profiles: Vec<Vec<f64>> = [&control.first, &control.second]
        .iter()
        .map(|c| nodes.iter().map(|phi| basis.profile(&c.coeffs, *phi)).collect())
        .collect();
    for w in control.windows() {
        let half = 0.5 * (w[1] - w[0]);
        let mid = 0.5 * (w[1] + w[0]);
        for (x, wt) in tn.iter().zip(&tw) {
            let t = mid + half * x;
            let amp = control.amplitudes(t);
            let (mut net, mut abs) = (0.0, 0.0);
            for k in 0..nodes.len() {
                let g = amp[0] * profiles[0][k] + amp[1] * profiles[1][k];
                net += weights[k] * g;
                abs += weights[k] * g.abs();
                if g < 0.0 {
                    out.inflow -= half * wt * weights[k] * g;
                }
            }
            out.net += half * wt * net;
            out.scale += half * wt * abs;
            if abs > 0.0 {
                out.worst_instant = out.worst_instant.max(net.abs() / abs);
            }
        }
    }
    Ok(out)
}

/// `int_0^T gamma^2 E(q) . q' dt` along `traj`, by Gauss quadrature on its steps.
pub fn circulation_work(model: &Model, traj: &Trajectory, gamma: f64) -> Result<f64> {
    if gamma == 0.0 {
        return Ok(0.0);
    }
    let (x, w) = gauss_legendre(8);
    let mesh = traj.mesh();
    let mut total = 0.0;
    for pair in mesh.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            let s = traj.state(0.5 * (a + b) + half * xi);
            let (e, _) = model.circulation_fields(&s.pose)?;
            total += half * wi * gamma * gamma * e.dot(&s.vel);
        }
    }
    Ok(total)
}

/// Result of the terminal fixed-point correction.
#[derive(Clone, Debug)]
pub struct Correction {
    pub trajectory: Trajectory,
    pub control: ImpulsiveControl,
    pub geodesic: GeodesicSolution,
    /// Requested endpoint `(q1, q1')` of the last run.
    pub aim: State,
    /// Terminal error against the true target after each run.
    pub history: Vec<f64>,
}

impl Correction {
    /// Outer iterations past the initial run.
    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Plan and run the full controlled motion aimed at `aim` instead of the
/// scenario's target.
/// A `previous` control seeds the synthesis so the result varies smoothly with `aim`.
pub fn run_aimed(
    model: &Model,
    scen: &Scenario,
    aim: &State,
    previous: Option<&ImpulsiveControl>,
) -> Result<(Trajectory, ImpulsiveControl, GeodesicSolution)> {
    let geo = shoot(model, &scen.q0(), &aim.pose, scen.t_final(), &scen.simulate.shoot)?;
    let (q0p, eps, cfg) = (scen.q0p(), scen.epsilon(), &scen.control.synthesis);
    let control = match previous {
        Some(p) => build_control_continued(model, &geo, &q0p, &aim.vel, eps, cfg, p)?,
        None => build_control(model, &geo, &q0p, &aim.vel, eps, cfg)?,
    };
    let mut traj = run_full(model, scen, &control)?;
    traj.target = scen.target();
    Ok((traj, control, geo))
}

/// Quasi-Newton correction of the requested endpoint `x` (pose and
/// velocity) so that the full controlled motion aimed at `x` ends on the
/// target. The first step is the plain fixed-point update
/// `x <- x + (target - f(x))`; later steps use Broyden's update of the
/// inverse Jacobian of `f`, which starts at the identity. Stops at the
/// scenario's `exact_tol` or after `max_corrections`.
pub fn exact_correct(model: &Model, scen: &Scenario) -> Result<Correction> {
    let target = scen.target();
    let pack = |s: &State| {
        let q = s.pose.to_vec3();
        nalgebra::Vector6::new(q[0], q[1], q[2], s.vel[0], s.vel[1], s.vel[2])
    };
    let unpack = |x: &nalgebra::Vector6<f64>| State::new(Pose::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]));
    let goal = pack(&target);
    let mut aim = target;
    let (mut traj, mut control, mut geo) = run_aimed(model, scen, &aim, None)?;
    let mut history = vec![traj.terminal_error()];
    let mut x = goal;
    let mut r = pack(&traj.terminal()) - goal;
    let mut inv = nalgebra::Matrix6::<f64>::identity();
    for _ in 0..scen.simulate.max_corrections {
        if *history.last().expect("nonempty") <= scen.simulate.exact_tol {
            break;
        }
        let dx = -(inv * r);
        x += dx;
        aim = unpack(&x);
        let run = run_aimed(model, scen, &aim, Some(&control))?;
        traj = run.0;
        control = run.1;
        geo = run.2;
        history.push(traj.terminal_error());
        let r_new = pack(&traj.terminal()) - goal;
        let dr = r_new - r;
        let h_dr = inv * dr;
        let denom = dx.dot(&h_dr);
        if denom.abs() > 1e-14 * dx.norm() * h_dr.norm() {
            inv += (dx - h_dr) * (dx.transpose() * inv) / denom;
        }
        r = r_new;
    }
    if *history.last().expect("nonempty") > scen.simulate.exact_tol {
        return Err(Error::CorrectionDiverged { history });
    }
    let t_end = traj.t_end();
    traj.events.extend(history.iter().enumerate().map(|(k, e)| Event {
        t: t_end,
        label: format!("correction {k}"),
        value: *e,
    }));
    Ok(Correction {
        trajectory: traj,
        control,
        geodesic: geo,
        aim,
        history,
    })
}
