use std::sync::{Arc, OnceLock};

use proptest::prelude::*;
use solidflow::control::{cone_weights_disk, ImpulsiveControl, SpatialControl, TimeBump, DISK_DIRECTIONS};
use solidflow::dynamics::Model;
use solidflow::geometry::{place_solid, Vec2, Vec3};
use solidflow::laplace::HarmonicField;
use solidflow::ode::OdeOptions;
use solidflow::simulate::{glue, integrate, time_rescale, Drive, Scenario, Trajectory};
use solidflow::{Pose, SolidShape, State};

fn model() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| Scenario::baseline().model().unwrap())
}

/// Free coasting of the baseline ellipse, split into two legs at `t = 0.3`.
fn coast() -> &'static (Trajectory, Trajectory, Trajectory) {
    static T: OnceLock<(Trajectory, Trajectory, Trajectory)> = OnceLock::new();
    T.get_or_init(|| {
        let m = model();
        let opts = OdeOptions::default();
        let start = State::new(Pose::origin(), Vec3::new(0.1, -0.05, 0.2));
        let whole = integrate(m, &start, 0.6, &Drive::free(0.0), &opts, start).unwrap();
        let a = integrate(m, &start, 0.3, &Drive::free(0.0), &opts, start).unwrap();
        let mid = a.terminal();
        let b = integrate(m, &mid, 0.3, &Drive::free(0.0), &opts, mid).unwrap();
        (whole, a, b)
    })
}

fn sources(seed: &[f64]) -> Arc<Vec<Vec2>> {
    Arc::new(
        seed.iter()
            .enumerate()
            .map(|(k, r)| {
                let t = 0.9 * k as f64 + r;
                Vec2::new(6.0 * t.cos(), 6.0 * t.sin())
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn normals_and_rotation_data_integrate_to_zero(
        c in 0.0f64..0.8, x in -2.0f64..2.0, y in -2.0f64..2.0, th in -3.0f64..3.0,
    ) {
        let shape = SolidShape::joukowski(c, 1.0, 0.5).unwrap();
        let s = place_solid(&shape, &Pose::new(x, y, th), 256);
        let (mut wn, mut wr) = (Vec2::zeros(), 0.0);
        for k in 0..s.len() {
            wn += s.normals[k] * s.weights[k];
            wr += s.rot[k] * s.weights[k];
        }
        let per = s.perimeter();
        prop_assert!(wn.norm() <= 1e-10 * per);
        prop_assert!(wr.abs() <= 1e-10 * per * (2.0 + x.hypot(y)));
    }

    #[test]
    fn disk_cone_weights_are_positive_and_reproduce_target(x in -50.0f64..50.0, y in -50.0f64..50.0) {
        let mu = cone_weights_disk([x, y]);
        prop_assert!(mu.iter().all(|&m| m > 0.0));
        let mut s = [0.0; 2];
        for (m, e) in mu.iter().zip(DISK_DIRECTIONS.iter()) {
            s[0] += m * e[0];
            s[1] += m * e[1];
        }
        let scale = 1.0 + x.hypot(y);
        prop_assert!((s[0] - x).abs() <= 1e-13 * scale && (s[1] - y).abs() <= 1e-13 * scale);
    }

    #[test]
    fn time_bump_is_unit_and_compactly_supported(eps in 1e-3f64..0.2, t in -1.0f64..2.0) {
        let b = TimeBump::new(eps).unwrap();
        prop_assert!((b.l2_squared() - 1.0).abs() < 1e-8);
        if t <= 0.0 || t >= 2.0 * eps {
            prop_assert_eq!(b.value(t), 0.0);
            prop_assert_eq!(b.deriv(t), 0.0);
        }
    }

    #[test]
    fn harmonic_combination_is_linear(
        seed in prop::collection::vec(0.0f64..0.5, 6),
        s in prop::collection::vec(-2.0f64..2.0, 6),
        a in -3.0f64..3.0, b in -3.0f64..3.0,
        px in -1.5f64..1.5, py in -1.5f64..1.5,
    ) {
        let ys = sources(&seed);
        let ext = HarmonicField::exterior(ys.clone(), s.clone(), 1e-3);
        let direct = HarmonicField::new(ys, s, Vec2::zeros(), 0.0, 0.0, 1e-3);
        let inner = HarmonicField::new(Arc::new(vec![Vec2::new(0.1, 0.2)]), vec![0.7], Vec2::zeros(), 0.0, 0.0, 1e-3);
        let x = Vec2::new(px, py);
        let sum = HarmonicField::combine(&[(a, &ext), (b, &inner)]);
        let (v, g) = sum.value_grad(x);
        let (ve, ge) = direct.value_grad(x);
        let (vi, gi) = inner.value_grad(x);
        let scale = 1.0 + ve.abs() + vi.abs() + ge.norm() + gi.norm();
        prop_assert!((v - (a * ve + b * vi)).abs() <= 1e-12 * scale);
        prop_assert!((g - (a * ge + b * gi)).norm() <= 1e-12 * scale);
        let (vs, _) = ext.scaled(a).value_grad(x);
        prop_assert!((vs - a * ve).abs() <= 1e-12 * scale);
    }

    #[test]
    fn scenario_survives_toml_and_json(
        eps in 0.01f64..0.24, gamma in -1e-2f64..1e-2,
        q1 in prop::array::uniform3(-0.2f64..0.2), c in 0.05f64..0.6,
    ) {
        let mut scen = Scenario::baseline();
        scen.control.epsilon = eps;
        scen.dynamics.gamma = gamma;
        scen.simulate.q1 = q1;
        scen.shape = solidflow::simulate::ShapeConfig::Joukowski { c, mass: 1.0, inertia: 0.5 };
        let back: Scenario = toml::from_str(&toml::to_string(&scen).unwrap()).unwrap();
        prop_assert_eq!(&back, &scen);
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&scen).unwrap()).unwrap();
        prop_assert_eq!(&back, &scen);
    }

    #[test]
    fn rescaled_control_amplitudes_scale_inversely(lambda in 0.25f64..4.0, t in 0.0f64..1.0, eps in 0.01f64..0.2) {
        let q = Pose::origin();
        let control = ImpulsiveControl {
            bump: TimeBump::new(eps).unwrap(),
            t_final: 1.0,
            v0: Vec3::zeros(),
            v1: Vec3::zeros(),
            first: SpatialControl::zero(q, 4),
            second: SpatialControl::zero(q, 4),
            time_scale: 1.0,
        };
        let r = control.rescaled(lambda);
        let [a, b] = control.amplitudes(t);
        let [ra, rb] = r.amplitudes(lambda * t);
        prop_assert!((ra - a / lambda).abs() <= 1e-12 * (1.0 + a.abs()));
        prop_assert!((rb - b / lambda).abs() <= 1e-12 * (1.0 + b.abs()));
        prop_assert!((r.horizon() - lambda).abs() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reversal_flips_time_and_velocity(t in 0.0f64..0.6) {
        let (whole, _, _) = coast();
        let rev = whole.reversed();
        let s = whole.state(0.6 - t);
        let r = rev.state(t);
        prop_assert!((r.pose.to_vec3() - s.pose.to_vec3()).norm() < 1e-12);
        prop_assert!((r.vel + s.vel).norm() < 1e-12);
        let twice = rev.reversed().state(t);
        prop_assert!(twice.distance(&whole.state(t)) < 1e-12);
    }

    #[test]
    fn time_rescaling_slows_the_same_path(lambda in 0.3f64..3.0, t in 0.0f64..0.6) {
        let (whole, _, _) = coast();
        let slow = time_rescale(whole, lambda).unwrap();
        let a = whole.state(t);
        let b = slow.state(lambda * t);
        prop_assert!((a.pose.to_vec3() - b.pose.to_vec3()).norm() < 1e-12);
        prop_assert!((a.vel / lambda - b.vel).norm() < 1e-12);
    }

    #[test]
    fn glued_legs_follow_the_single_run(t in 0.0f64..0.6) {
        let (whole, a, b) = coast();
        let g = glue(vec![a.clone(), b.clone()]).unwrap();
        prop_assert_eq!(g.legs(), 2);
        prop_assert!((g.t_end() - 0.6).abs() < 1e-14);
        prop_assert!(g.state(t).distance(&whole.state(t)) < 1e-7);
    }
}

#[test]
fn glue_rejects_mismatched_junction() {
    let (_, a, _) = coast();
    let err = glue(vec![a.clone(), a.clone()]).unwrap_err();
    assert!(matches!(err, solidflow::Error::JunctionMismatch { junction: 1, .. }), "{err}");
}
