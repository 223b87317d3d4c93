use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use solidflow::control::{ImpulsiveControl, TimeBump};
use solidflow::dynamics::Model;
use solidflow::geodesic::GeodesicSolution;
use solidflow::simulate::{
    c1_deviation, exact_correct, flux_metrics, invariant_checks, plan_control, plan_geodesic, run_deviation,
    run_full, run_intermediate, run_toy, Mode, Scenario, Trajectory,
};
use solidflow::Execution;

use crate::output::{self, RunManifest, SweepRow, Timing};
use crate::Axis;

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scen: Scenario = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    scen.validate().with_context(|| format!("rejecting {}", path.display()))?;
    Ok(scen)
}

pub fn validate(config: &Path) -> Result<bool> {
    let scen = load(config)?;
    let model = scen.model().context("building the model")?;
    let checks = invariant_checks(&model, &scen).context("running invariant checks")?;
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        println!(
            "{} {:<48} {:.3e} (tolerance {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    Ok(ok)
}

/// Outcome of one controlled run before it is written out.
pub struct Outcome {
    pub trajectory: Trajectory,
    pub control: Option<ImpulsiveControl>,
    pub geodesic: GeodesicSolution,
    pub corrections: Option<Vec<f64>>,
}

fn execute(
    model: &Model,
    scen: &Scenario,
    geo: &GeodesicSolution,
    planned: Option<&ImpulsiveControl>,
) -> Result<Outcome> {
    let with_eps = |c: &ImpulsiveControl| c.with_epsilon(scen.epsilon()).context("resizing pulses");
    Ok(match scen.simulate.mode {
        Mode::Toy => Outcome {
            trajectory: run_toy(model, scen, geo).context("toy run")?,
            control: None,
            geodesic: geo.clone(),
            corrections: None,
        },
        Mode::Intermediate | Mode::Full => {
            let control = match planned {
                Some(c) => with_eps(c)?,
                None => plan_control(model, scen, geo).context("synthesizing the control")?,
            };
            let trajectory = if scen.simulate.mode == Mode::Full {
                run_full(model, scen, &control).context("full run")?
            } else {
                run_intermediate(model, scen, &control).context("intermediate run")?
            };
            Outcome {
                trajectory,
                control: Some(control),
                geodesic: geo.clone(),
                corrections: None,
            }
        }
        Mode::Exact => {
            let c = exact_correct(model, scen).context("exact correction")?;
            Outcome {
                trajectory: c.trajectory,
                control: Some(c.control),
                geodesic: c.geodesic,
                corrections: Some(c.history),
            }
        }
    })
}

pub fn run(config: &Path, mode: Option<Mode>, out: &Path, seed: u64) -> Result<RunManifest> {
    let mut scen = load(config)?;
    if let Some(m) = mode {
        scen.simulate.mode = m;
    }
    let start = Instant::now();
    let model = scen.model().context("building the model")?;
    let t_model = start.elapsed().as_secs_f64();
    let geo = plan_geodesic(&model, &scen).context("shooting the geodesic")?;
    let t_geo = start.elapsed().as_secs_f64() - t_model;
    let outcome = execute(&model, &scen, &geo, None)?;
    let t_run = start.elapsed().as_secs_f64() - t_model - t_geo;

    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let traj_path = out.join("trajectory.csv");
    let ctrl_path = out.join("control.csv");
    output::write_trajectory(&model, &outcome.trajectory, &traj_path)?;
    match &outcome.control {
        Some(c) => output::write_control(c, &ctrl_path)?,
        None => output::write_toy_amplitudes(&TimeBump::new(scen.epsilon())?, scen.t_final(), &ctrl_path)?,
    }
    let flux = outcome
        .control
        .as_ref()
        .map(|c| flux_metrics(&model, c))
        .transpose()
        .context("flux metrics")?;
    let manifest = RunManifest::new(
        &scen,
        &model,
        &outcome,
        flux,
        seed,
        Timing {
            model: t_model,
            geodesic: t_geo,
            run: t_run,
            total: start.elapsed().as_secs_f64(),
        },
        [&traj_path, &ctrl_path],
    )?;
    output::write_atomic(&out.join("manifest.json"), &serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn sweep(config: &Path, axis: Axis, values: &[f64], mode: Option<Mode>, out: &Path) -> Result<Vec<SweepRow>> {
    let mut scen = load(config)?;
    if let Some(m) = mode {
        scen.simulate.mode = m;
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    if values.is_empty() {
        output::write_sweep(axis, &[], &out.join("sweep.csv"))?;
        return Ok(Vec::new());
    }
    let model = scen.model().context("building the model")?;
    let geo = plan_geodesic(&model, &scen).context("shooting the geodesic")?;
    let planned = match scen.simulate.mode {
        Mode::Intermediate | Mode::Full => Some(plan_control(&model, &scen, &geo).context("synthesizing the control")?),
        _ => None,
    };
    let variant = |v: f64| {
        let mut s = scen.clone();
        match axis {
            Axis::Epsilon => s.control.epsilon = v,
            Axis::Gamma => s.dynamics.gamma = v,
        }
        s
    };
    let reference = match axis {
        Axis::Gamma => Some(
            execute(&model, &variant(0.0), &geo, planned.as_ref())
                .context("circulation-free reference run")?
                .trajectory,
        ),
        Axis::Epsilon => None,
    };
    let rows = Execution::Parallel.map(values, |&v| {
        let s = variant(v);
        let outcome = s
            .validate()
            .map_err(anyhow::Error::from)
            .and_then(|_| execute(&model, &s, &geo, planned.as_ref()));
        match outcome {
            Ok(o) => {
                let eps = s.epsilon();
                let dev = match &reference {
                    Some(r) => run_deviation(&o.trajectory, r, s.t_final(), eps, 400),
                    None => c1_deviation(&o.trajectory, &o.geodesic, eps, 400),
                };
                let inflow = o
                    .control
                    .as_ref()
                    .and_then(|c| flux_metrics(&model, c).ok())
                    .map_or(f64::NAN, |f| f.inflow);
                SweepRow {
                    value: v,
                    terminal_error: o.trajectory.terminal_error(),
                    c1_deviation: dev,
                    inflow,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                value: v,
                terminal_error: f64::NAN,
                c1_deviation: f64::NAN,
                inflow: f64::NAN,
                error: Some(format!("{e:#}")),
            },
        }
    });
    output::write_sweep(axis, &rows, &out.join("sweep.csv"))?;
    Ok(rows)
}
