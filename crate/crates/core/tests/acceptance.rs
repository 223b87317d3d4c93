//! End-to-end acceptance suite on the baseline scenario. Prints one line per
//! criterion and exits nonzero if any fails.

use std::f64::consts::{FRAC_PI_4, SQRT_2};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solidflow::control::{cone_points_general, cone_weights_disk, synthesize_with, MomentMaps, DISK_DIRECTIONS};
use solidflow::dynamics::{Model, Terms};
use solidflow::geodesic::shoot;
use solidflow::geometry::{admissible, Vec2, Vec3};
use solidflow::laplace::{Solver, SolverConfig};
use solidflow::simulate::{
    c1_deviation, circulation_work, energy_drift, exact_correct, flux_metrics, integrate, plan_control,
    plan_geodesic, rescaling_residual, run_full, run_intermediate, run_toy, run_with_terms, Drive, Scenario,
};
use solidflow::{DomainSpec, Execution, Pose, SolidShape};

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String, started: Instant) {
        println!(
            "criterion {id:>2} {:<34} {}  {detail}  [{:.1}s]",
            name,
            if pass { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
        if !pass {
            self.failures.push(id);
        }
    }
}

fn decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

/// Translational Kirchhoff potentials of a centered disk of radius `a` in a
/// disk of radius `r_out`, against `C (r + R^2 / r) cos(phi)`.
fn solver_accuracy(rep: &mut Report) {
    let t = Instant::now();
    let (a, r_out) = (1.0, 10.0);
    let shape = SolidShape::disk(a, 1.0, 0.5).unwrap();
    let domain = DomainSpec::disk(r_out, [-FRAC_PI_4, FRAC_PI_4], 1.0).unwrap();
    let solver = Solver::new(shape, domain, SolverConfig::default()).unwrap();
    let set = solver.kirchhoff(&Pose::origin()).unwrap();
    let c = a * a / (a * a - r_out * r_out);
    let exact = |x: Vec2, k: usize| {
        let r = x.norm();
        let (cos, sin) = (x.x / r, x.y / r);
        c * (r + r_out * r_out / r) * if k == 0 { cos } else { sin }
    };
    let mut worst: f64 = 0.0;
    for k in 0..2 {
        let mut pts = Vec::new();
        for i in 0..24 {
            for j in 0..64 {
                let r = a + 1e-3 + (r_out - a - 2e-3) * i as f64 / 23.0;
                let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 64.0;
                pts.push(Vec2::new(r * phi.cos(), r * phi.sin()));
            }
        }
        let diffs: Vec<f64> = pts.iter().map(|&x| set.fields[k].value(x) - exact(x, k)).collect();
        let shift = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let scale = pts.iter().map(|&x| exact(x, k).abs()).fold(0.0, f64::max);
        let err = diffs.iter().map(|d| (d - shift).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    let stream = solver.solve_stream(&Pose::origin()).unwrap();
    let flux_err = (stream.normalized_flux + 1.0).abs();
    rep.line(
        1,
        "solver accuracy",
        worst <= 1e-6 && flux_err <= 1e-8,
        format!("annulus rel err {worst:.3e} (<= 1e-6), stream flux + 1 = {flux_err:.3e} (<= 1e-8)"),
        t,
    );
}

fn inertia_structure(rep: &mut Report, model: &Model) {
    let t = Instant::now();
    let grid = [-4.0, -2.0, 0.0, 2.0, 4.0];
    let angles = [0.0, 0.6, 1.2, 1.8, 2.4];
    let mut poses = Vec::new();
    for &x in &grid {
        for &y in &grid {
            for &th in &angles {
                poses.push(Pose::new(x, y, th));
            }
        }
    }
    let all_admissible = poses.iter().all(|q| admissible(model.shape(), model.domain(), q));
    let stats = Execution::Parallel.map(&poses, |q| {
        let m = model.added_mass(q).unwrap();
        let eig = m.ma.symmetric_eigenvalues();
        let total = m.total.symmetric_eigenvalues();
        (m.asymmetry, -eig.min() / m.ma.trace(), total.min())
    });
    let asym = stats.iter().map(|s| s.0).fold(0.0, f64::max);
    let neg = stats.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let lowest = stats.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let floor = model.shape().genuine_inertia().symmetric_eigenvalues().min();
    rep.line(
        2,
        "inertia structure (125 poses)",
        all_admissible && asym <= 1e-8 && neg <= 1e-10 && lowest >= floor * (1.0 - 1e-10),
        format!(
            "asymmetry {asym:.2e} (<= 1e-8), -min eig/trace {neg:.2e} (<= 1e-10), min eig total {lowest:.4} (>= {floor})"
        ),
        t,
    );
}

fn energy(rep: &mut Report, model: &Model, scen: &Scenario, c0: &Vec3) {
    let t = Instant::now();
    let free = energy_drift(model, &scen.q0(), c0, scen.t_final(), scen).unwrap();
    let gamma = 1e-3;
    let start = solidflow::State::new(scen.q0(), *c0);
    let traj = integrate(model, &start, scen.t_final(), &Drive::free(gamma), &scen.simulate.ode, start).unwrap();
    let e0 = model.energy(&scen.q0(), c0).unwrap();
    let end = traj.terminal();
    let drift = model.energy(&end.pose, &end.vel).unwrap() - e0;
    let work = circulation_work(model, &traj, gamma).unwrap();
    let mismatch = (drift - work).abs() / e0;
    rep.line(
        3,
        "energy balance",
        free <= 1e-6 && mismatch <= 1e-5,
        format!(
            "free drift {free:.2e} (<= 1e-6); gamma 1e-3: drift {drift:.3e} vs work {work:.3e}, |diff|/E0 {mismatch:.2e} (<= 1e-5)"
        ),
        t,
    );
}

fn shooting(rep: &mut Report, model: &Model, scen: &Scenario) -> solidflow::geodesic::GeodesicSolution {
    let t = Instant::now();
    let geo = plan_geodesic(model, scen).unwrap();
    let back = shoot(model, &scen.q1(), &scen.q0(), scen.t_final(), &scen.simulate.shoot).unwrap();
    let end = geo.state(scen.t_final()).pose.to_vec3();
    let hit = (end - scen.q1().to_vec3()).norm();
    let rev = (geo.c1 + back.c0).norm();
    rep.line(
        4,
        "geodesic shooting",
        hit <= 1e-8 && rev <= 1e-6,
        format!("|q(T) - q1| {hit:.2e} (<= 1e-8), |c1 + c0 reversed| {rev:.2e} (<= 1e-6)"),
        t,
    );
    geo
}

fn synthesis(rep: &mut Report, model: &Model, scen: &Scenario) {
    let t = Instant::now();
    let maps = MomentMaps::at(model, &scen.q0()).unwrap();
    let mut worst = [0.0f64; 5];
    let mut ok = true;
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut v = Vec3::zeros();
            v[axis] = sign;
            let s = synthesize_with(model, &maps, &v, &scen.control.synthesis).unwrap();
            let moment = (s.moment - v).norm() / (1.0 + v.norm());
            let mean = s.mean_moment.norm();
            let vals = [moment, mean, s.relative_flux(), s.flux.abs(), s.neumann_residual];
            for (w, x) in worst.iter_mut().zip(vals) {
                *w = w.max(x);
            }
            ok &= moment <= 1e-3 && mean <= 1e-6 && s.relative_flux() <= 1e-10 && s.neumann_residual <= 1e-6;
        }
    }
    rep.line(
        5,
        "control synthesis (6 axes)",
        ok,
        format!(
            "moment {:.2e}/(1+|v|) (<= 1e-3), mean moment {:.2e} (<= 1e-6), arc flux rel {:.2e} abs {:.2e} (<= 1e-10 rel), off-arc Neumann {:.2e} (<= 1e-6)",
            worst[0], worst[1], worst[2], worst[3], worst[4]
        ),
        t,
    );
}

fn main() {
    let suite = Instant::now();
    let mut rep = Report { failures: Vec::new() };
    let mut scen = Scenario::baseline();
    let model = scen.model().unwrap();
    let epsilons = [0.2, 0.1, 0.05];

    solver_accuracy(&mut rep);
    inertia_structure(&mut rep, &model);
    let geo = shooting(&mut rep, &model, &scen);
    energy(&mut rep, &model, &scen, &geo.c0);
    synthesis(&mut rep, &model, &scen);

    let t = Instant::now();
    let toy: Vec<f64> = epsilons
        .iter()
        .map(|&e| {
            scen.control.epsilon = e;
            run_toy(&model, &scen, &geo).unwrap().terminal_error()
        })
        .collect();
    rep.line(
        6,
        "toy convergence",
        decreasing(&toy) && toy[2] <= 1e-2,
        format!("terminal errors {} (decreasing, last <= 1e-2)", sci(&toy)),
        t,
    );

    let t = Instant::now();
    scen.control.epsilon = 0.05;
    let control = plan_control(&model, &scen, &geo).unwrap();
    let mut full = [[0.0; 3]; 2];
    let mut dev = [[0.0; 3]; 2];
    let mut inter = [0.0; 3];
    let mut inflow = [0.0; 3];
    let mut last = None;
    for (g, gamma) in [0.0, 1e-3].into_iter().enumerate() {
        scen.dynamics.gamma = gamma;
        for (k, &e) in epsilons.iter().enumerate() {
            scen.control.epsilon = e;
            let c = control.with_epsilon(e).unwrap();
            let traj = run_full(&model, &scen, &c).unwrap();
            full[g][k] = traj.terminal_error();
            dev[g][k] = c1_deviation(&traj, &geo, e, 400);
            if g == 0 {
                inter[k] = run_intermediate(&model, &scen, &c).unwrap().terminal_error();
                inflow[k] = flux_metrics(&model, &c).unwrap().inflow;
            }
            if g == 1 && k == 2 {
                last = Some((traj, c));
            }
        }
    }
    let ratio = full[1][2] / full[0][2];
    rep.line(
        7,
        "intermediate and full convergence",
        decreasing(&full[0]) && decreasing(&full[1]) && ratio <= 2.0 && decreasing(&dev[0]) && decreasing(&dev[1]),
        format!(
            "full gamma 0: {}; gamma 1e-3: {}; ratio at eps 0.05 {ratio:.3} (<= 2); C1 dev gamma 0: {}; gamma 1e-3: {}; intermediate: {}",
            sci(&full[0]),
            sci(&full[1]),
            sci(&dev[0]),
            sci(&dev[1]),
            sci(&inter)
        ),
        t,
    );

    let t = Instant::now();
    let mut base = Scenario::baseline();
    base.dynamics.gamma = 0.0;
    base.control.epsilon = 0.05;
    match exact_correct(&model, &base) {
        Ok(c) => rep.line(
            8,
            "exact correction",
            c.iterations() <= 10 && *c.history.last().unwrap() <= 1e-4,
            format!("history {} ({} iterations, <= 10; final <= 1e-4)", sci(&c.history), c.iterations()),
            t,
        ),
        Err(e) => rep.line(8, "exact correction", false, e.to_string(), t),
    }

    let t = Instant::now();
    let (traj, c) = last.expect("full run at eps 0.05");
    let gamma = 1e-3;
    let lambda = 0.5;
    let times: Vec<f64> = (0..20).map(|k| scen.t_final() * (k as f64 + 0.5) / 20.0).collect();
    let resid = rescaling_residual(&model, &traj, &c, gamma, lambda, Terms::FULL, &times).unwrap();
    let tol = 10.0 * scen.simulate.ode.rtol;
    scen.dynamics.gamma = gamma / lambda;
    scen.control.epsilon = 0.05;
    let direct = run_with_terms(&model, &scen, &c.rescaled(lambda), gamma / lambda, Terms::FULL).unwrap();
    let v_orig = traj.terminal().vel;
    let v_direct = direct.terminal().vel;
    let vel_err = (v_direct - v_orig / lambda).norm() / (1.0 + v_orig.norm() / lambda);
    let pos_err = (direct.terminal().pose.to_vec3() - traj.terminal().pose.to_vec3()).norm();
    rep.line(
        9,
        "time rescaling (lambda 0.5)",
        resid <= tol && vel_err <= 1e-6 && pos_err <= 1e-6,
        format!(
            "ODE residual {resid:.2e} (<= {tol:.0e}); direct rescaled run: end velocity vs v/lambda {vel_err:.2e}, end pose {pos_err:.2e} (<= 1e-6)"
        ),
        t,
    );

    let t = Instant::now();
    let ratios = [inflow[0] / inflow[1], inflow[1] / inflow[2]];
    rep.line(
        10,
        "flux scaling",
        ratios.iter().all(|r| (r / SQRT_2 - 1.0).abs() <= 0.2),
        format!("inflow {}; ratios {} (sqrt 2 within 20%)", sci(&inflow), sci(&ratios)),
        t,
    );

    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut nonneg = true;
    for _ in 0..100 {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let mu = cone_weights_disk(v);
        nonneg &= mu.iter().all(|&m| m >= 0.0);
        let mut s = [0.0; 2];
        for (m, e) in mu.iter().zip(DISK_DIRECTIONS) {
            s[0] += m * e[0];
            s[1] += m * e[1];
        }
        worst = worst.max(((s[0] - v[0]).powi(2) + (s[1] - v[1]).powi(2)).sqrt());
    }
    let general = cone_points_general(model.shape(), &scen.q0());
    let cert = general.as_ref().map(|s| s.certificate).unwrap_or(f64::INFINITY);
    rep.line(
        11,
        "cone identity",
        nonneg && worst <= 1e-14 && general.is_ok() && cert <= 1e-8,
        format!(
            "disk: worst |sum mu e - v| {worst:.2e} (<= 1e-14), weights nonnegative {nonneg}; Joukowski 16-site certificate {cert:.2e} (<= 1e-8)"
        ),
        t,
    );

    println!(
        "acceptance: {} of 11 criteria passed in {:.0}s",
        11 - rep.failures.len(),
        suite.elapsed().as_secs_f64()
    );
    if !rep.failures.is_empty() {
        println!("failed: {:?}", rep.failures);
        std::process::exit(1);
    }
}
