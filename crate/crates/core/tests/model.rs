use std::sync::OnceLock;

use solidflow::control::{synthesize_continued, synthesize_spatial_control, SynthesisConfig, SynthesisStage};
use solidflow::dynamics::{Model, Terms};
use solidflow::geometry::Vec3;
use solidflow::simulate::{plan_control, plan_geodesic, Scenario, ShapeConfig};
use solidflow::Pose;

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| Scenario::baseline().model().unwrap())
}

#[test]
fn surrogate_metric_matches_direct_solves() {
    let m = model();
    let q = Pose::new(0.037, -0.052, 0.081);
    let (ma, dm) = m.metric(&q).unwrap();
    let direct = m.added_mass(&q).unwrap().ma;
    assert!((ma - direct).amax() <= 1e-7 * direct.amax(), "{ma} vs {direct}");
    let fd = m.metric_derivatives_fd(&q, 1e-3).unwrap();
    for i in 0..3 {
        assert!((dm[i] - fd[i]).amax() <= 1e-4 * direct.amax(), "axis {i}: {} vs {}", dm[i], fd[i]);
    }
}

#[test]
fn full_terms_without_extras_reduce_to_intermediate() {
    let scen = Scenario::baseline();
    let m = model();
    let geo = plan_geodesic(m, &scen).unwrap();
    let control = plan_control(m, &scen, &geo).unwrap();
    let trimmed = Terms {
        f1b: false,
        f2: false,
        ..Terms::FULL
    };
    let p = Vec3::new(0.2, -0.1, 0.3);
    let t = 0.6 * scen.epsilon();
    let a = m.rhs(&scen.q0(), &p, 0.0, Some(&control), t, trimmed).unwrap();
    let b = m.rhs(&scen.q0(), &p, 0.0, Some(&control), t, Terms::INTERMEDIATE).unwrap();
    assert!((a.acc - b.acc).norm() <= 1e-14 * (1.0 + b.acc.norm()));
    assert!(b.forces.f1a.norm() > 0.0);
    let free = m.rhs(&scen.q0(), &p, 0.0, Some(&control), 0.5, Terms::FULL).unwrap();
    let none = m.rhs(&scen.q0(), &p, 0.0, None, 0.5, Terms::FULL).unwrap();
    assert_eq!(free.acc, none.acc);
}

#[test]
fn zero_request_gives_zero_profile() {
    let c = synthesize_spatial_control(model(), &Pose::origin(), &Vec3::zeros(), &SynthesisConfig::default()).unwrap();
    assert!(c.is_zero());
    assert_eq!(c.stage, SynthesisStage::Zero);
}

#[test]
fn continuation_stays_near_the_previous_profile() {
    let m = model();
    let cfg = SynthesisConfig::default();
    let v = Vec3::new(0.3, -0.2, 0.1);
    let q = Pose::origin();
    let base = synthesize_spatial_control(m, &q, &v, &cfg).unwrap();
    let near = synthesize_continued(m, &Pose::new(0.001, 0.0, 0.0), &(v * 1.001), &cfg, &base.coeffs).unwrap();
    assert_eq!(near.stage, SynthesisStage::Continued);
    let norm: f64 = base.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
    let diff: f64 = base.coeffs.iter().zip(&near.coeffs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(diff <= 0.05 * norm, "moved {diff} of {norm}");
}

#[test]
fn disk_with_rotation_request_is_rejected() {
    let mut scen = Scenario::baseline();
    scen.shape = ShapeConfig::Disk {
        radius: 1.0,
        mass: 1.0,
        inertia: 0.5,
    };
    let err = scen.validate().unwrap_err();
    assert!(err.to_string().contains("disk cannot be steered in rotation"), "{err}");
    scen.simulate.q1[2] = 0.0;
    scen.validate().unwrap();
}
