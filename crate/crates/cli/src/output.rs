//! CSV and manifest writers. Column sets and the manifest layout are
//! versioned by [`SCHEMA_VERSION`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use solidflow::control::{ImpulsiveControl, TimeBump};
use solidflow::dynamics::Model;
use solidflow::geometry::clearance;
use solidflow::laplace::SolveReport;
use solidflow::simulate::{c1_deviation, Event, FluxMetrics, Mode, Scenario, Trajectory};

use crate::commands::Outcome;
use crate::Axis;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRAJECTORY_COLUMNS: [&str; 9] = ["t", "h1", "h2", "theta", "h1_dot", "h2_dot", "theta_dot", "energy", "clearance"];
pub const CONTROL_COLUMNS: [&str; 3] = ["t", "beta_first", "beta_second"];

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

fn csv_bytes<R: IntoIterator<Item = Vec<String>>>(header: &[&str], rows: R) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(w.into_inner().context("flushing csv")?)
}

fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

/// Accepted steps plus 400 uniform samples.
pub fn write_trajectory(model: &Model, traj: &Trajectory, path: &Path) -> Result<()> {
    let (a, b) = (traj.t_start(), traj.t_end());
    let mut times: Vec<f64> = (0..=400).map(|k| a + (b - a) * k as f64 / 400.0).collect();
    times.extend(traj.mesh());
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut rows = Vec::with_capacity(times.len());
    for t in times {
        let s = traj.state(t);
        let energy = model.energy(&s.pose, &s.vel)?;
        let gap = clearance(model.shape(), model.domain(), &s.pose);
        rows.push(
            [t, s.pose.h.x, s.pose.h.y, s.pose.theta, s.vel[0], s.vel[1], s.vel[2], energy, gap]
                .map(fmt)
                .to_vec(),
        );
    }
    write_atomic(path, &csv_bytes(&TRAJECTORY_COLUMNS, rows)?)
}

fn amplitude_grid(t_end: f64) -> Vec<f64> {
    (0..=2000).map(|k| t_end * k as f64 / 2000.0).collect()
}

pub fn write_control(control: &ImpulsiveControl, path: &Path) -> Result<()> {
    let rows = amplitude_grid(control.horizon()).into_iter().map(|t| {
        let [p, q] = control.amplitudes(t);
        vec![fmt(t), fmt(p), fmt(q)]
    });
    write_atomic(path, &csv_bytes(&CONTROL_COLUMNS, rows)?)
}

/// Amplitudes of the prescribed forces of the toy model.
pub fn write_toy_amplitudes(bump: &TimeBump, t_final: f64, path: &Path) -> Result<()> {
    let rows = amplitude_grid(t_final)
        .into_iter()
        .map(|t| vec![fmt(t), fmt(bump.value(t)), fmt(bump.value(t_final - t))]);
    write_atomic(path, &csv_bytes(&CONTROL_COLUMNS, rows)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub terminal_error: f64,
    /// From the geodesic for pulse-width sweeps, from the circulation-free
    /// run for circulation sweeps.
    pub c1_deviation: f64,
    pub inflow: f64,
    pub error: Option<String>,
}

pub fn write_sweep(axis: Axis, rows: &[SweepRow], path: &Path) -> Result<()> {
    let name = match axis {
        Axis::Epsilon => "epsilon",
        Axis::Gamma => "gamma",
    };
    let body = rows.iter().map(|r| {
        vec![
            fmt(r.value),
            fmt(r.terminal_error),
            fmt(r.c1_deviation),
            fmt(r.inflow),
            r.error.clone().unwrap_or_default(),
        ]
    });
    write_atomic(path, &csv_bytes(&[name, "terminal_error", "c1_deviation", "inflow", "error"], body)?)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Timing {
    pub model: f64,
    pub geodesic: f64,
    pub run: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeodesicRecord {
    pub c0: [f64; 3],
    pub c1: [f64; 3],
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverRecord {
    pub kirchhoff_start: SolveReport,
    pub kirchhoff_end: SolveReport,
    pub control_basis: SolveReport,
    pub stream_start: Option<SolveReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub software: String,
    pub version: String,
    pub seed: u64,
    pub scenario: Scenario,
    pub mode: Mode,
    /// Every numerical tolerance the run used.
    pub tolerances: BTreeMap<String, f64>,
    /// Thresholds of the acceptance suite, for traceability.
    pub acceptance: BTreeMap<String, f64>,
    pub solver: SolverRecord,
    pub geodesic: GeodesicRecord,
    pub terminal_error: f64,
    pub c1_deviation: f64,
    pub min_clearance: f64,
    pub steps: usize,
    pub evaluations: usize,
    pub flux: Option<FluxMetrics>,
    pub corrections: Option<Vec<f64>>,
    pub control: Option<ImpulsiveControl>,
    pub events: Vec<Event>,
    pub timing: Timing,
    pub files: Vec<String>,
    pub csv_columns: BTreeMap<String, Vec<String>>,
}

fn tolerances(scen: &Scenario, model: &Model) -> BTreeMap<String, f64> {
    let s = &scen.simulate;
    let solver = model.solver().config();
    let dynamics = model.config();
    let synthesis = &scen.control.synthesis;
    let boundary = model.solver().tolerance();
    let mut t = BTreeMap::new();
    t.insert("ode.rtol".into(), s.ode.rtol);
    t.insert("ode.atol".into(), s.ode.atol);
    t.insert("ode.pulse_step_ceiling".into(), scen.epsilon() / 20.0);
    t.insert("shoot.tolerance".into(), s.shoot.tolerance);
    t.insert("shoot.fd_step".into(), s.shoot.fd_step);
    t.insert(
        "shoot.radius".into(),
        s.shoot.radius.unwrap_or(0.1 * model.domain().delta()),
    );
    t.insert("solver.boundary_tol".into(), boundary);
    t.insert("solver.svd_cutoff".into(), solver.svd_cutoff);
    t.insert("solver.eval_clearance".into(), solver.eval_clearance);
    t.insert("dynamics.fd_step".into(), dynamics.fd_step);
    t.insert("dynamics.richardson_tol".into(), dynamics.richardson_tol);
    t.insert("synthesis.tolerance_factor".into(), synthesis.tolerance_factor);
    t.insert("synthesis.extension_tol".into(), synthesis.extension_tol);
    t.insert("exact.tolerance".into(), s.exact_tol);
    t.insert("glue.junction".into(), 1e-8);
    t.insert(
        "dynamics_tolerance".into(),
        boundary.max(s.ode.rtol).max(dynamics.richardson_tol),
    );
    t
}

fn acceptance() -> BTreeMap<String, f64> {
    [
        ("solver.annulus_relative_error", 1e-6),
        ("solver.stream_flux", 1e-8),
        ("inertia.asymmetry", 1e-8),
        ("inertia.negative_part_over_trace", 1e-10),
        ("energy.drift_free", 1e-6),
        ("energy.circulation_work", 1e-5),
        ("geodesic.endpoint", 1e-8),
        ("geodesic.reversal", 1e-6),
        ("synthesis.moment_factor", 1e-3),
        ("synthesis.mean_moment", 1e-6),
        ("synthesis.arc_flux", 1e-10),
        ("synthesis.neumann_off_arc", 1e-6),
        ("toy.final_error", 1e-2),
        ("full.circulation_error_ratio", 2.0),
        ("exact.terminal_error", 1e-4),
        ("exact.max_iterations", 10.0),
        ("rescaling.residual_factor", 10.0),
        ("rescaling.lambda", 0.5),
        ("flux.ratio_band", 0.2),
        ("cone.identity", 1e-12),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

impl RunManifest {
    pub fn new(
        scen: &Scenario,
        model: &Model,
        outcome: &Outcome,
        flux: Option<FluxMetrics>,
        seed: u64,
        timing: Timing,
        files: [&Path; 2],
    ) -> Result<Self> {
        let geo = &outcome.geodesic;
        let traj = &outcome.trajectory;
        let stream_start = if scen.gamma() != 0.0 {
            Some(model.solver().solve_stream(&scen.q0())?.report)
        } else {
            None
        };
        let columns = [
            ("trajectory", TRAJECTORY_COLUMNS.as_slice()),
            ("control", CONTROL_COLUMNS.as_slice()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.iter().map(|s| s.to_string()).collect()))
        .collect();
        Ok(RunManifest {
            schema_version: SCHEMA_VERSION,
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            scenario: scen.clone(),
            mode: scen.simulate.mode,
            tolerances: tolerances(scen, model),
            acceptance: acceptance(),
            solver: SolverRecord {
                kirchhoff_start: model.kirchhoff(&scen.q0())?.report,
                kirchhoff_end: model.kirchhoff(&scen.q1())?.report,
                control_basis: model.solver().sigma_basis()?.report(),
                stream_start,
            },
            geodesic: GeodesicRecord {
                c0: geo.c0.into(),
                c1: geo.c1.into(),
                residual: geo.residual,
                iterations: geo.iterations,
            },
            terminal_error: traj.terminal_error(),
            c1_deviation: c1_deviation(traj, geo, scen.epsilon(), 400),
            min_clearance: traj.min_clearance,
            steps: traj.steps(),
            evaluations: traj.evaluations(),
            flux,
            corrections: outcome.corrections.clone(),
            control: outcome.control.clone(),
            events: traj.events.clone(),
            timing,
            files: files.iter().map(|p| p.display().to_string()).collect(),
            csv_columns: columns,
        })
    }
}
