//! Dormand-Prince 5(4) integrator with dense output and step ceilings inside
//! prescribed time windows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn unbounded_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Unbounded when infinite; JSON carries that as `null`.
    #[serde(deserialize_with = "unbounded_if_null")]
    pub h_max: f64,
    /// `[start, end, h_max]` windows with a tighter step ceiling. Steps never
    /// straddle a window start.
    pub windows: Vec<[f64; 3]>,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: f64::INFINITY,
            windows: Vec::new(),
            max_steps: 200_000,
        }
    }
}

/// One accepted step with its continuous extension.
#[derive(Clone, Debug)]
struct Segment<const N: usize> {
    t0: f64,
    h: f64,
    rcont: [[f64; N]; 5],
}

/// Dense solution on `[t0, t1]`.
#[derive(Clone, Debug)]
pub struct DenseSolution<const N: usize> {
    segments: Vec<Segment<N>>,
    t0: f64,
    t1: f64,
    y0: [f64; N],
    y1: [f64; N],
    pub evaluations: usize,
    pub rejected: usize,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn initial(&self) -> [f64; N] {
        self.y0
    }

    pub fn last(&self) -> [f64; N] {
        self.y1
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    /// Accepted step end times.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m = vec![self.t0];
        m.extend(self.segments.iter().map(|s| s.t0 + s.h));
        m
    }

    /// State at `t` (clamped to the interval).
    pub fn eval(&self, t: f64) -> [f64; N] {
        if self.segments.is_empty() {
            return self.y0;
        }
        let forward = self.t1 >= self.t0;
        let idx = self.segments.partition_point(|s| {
            if forward {
                s.t0 + s.h < t
            } else {
                s.t0 + s.h > t
            }
        });
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let theta = ((t - seg.t0) / seg.h).clamp(0.0, 1.0);
        let th1 = 1.0 - theta;
        let r = &seg.rcont;
        let mut y = [0.0; N];
        for i in 0..N {
            y[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        y
    }
}

fn axpy<const N: usize>(y: &[f64; N], terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..N {
            out[i] += c * k[i];
        }
    }
    out
}

/// Integrate `y' = f(t, y)` from `t0` to `t1` (either direction). `check` is
/// called at every accepted step and may abort the run.
pub fn dopri5<const N: usize, F, C>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    opts: &OdeOptions,
    mut check: C,
) -> Result<DenseSolution<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    C: FnMut(f64, &[f64; N]) -> Result<()>,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    let mut sol = DenseSolution {
        segments: Vec::new(),
        t0,
        t1,
        y0,
        y1: y0,
        evaluations: 0,
        rejected: 0,
    };
    if span == 0.0 {
        return Ok(sol);
    }
    check(t0, &y0)?;
    let ceiling = |t: f64, h: f64| -> f64 {
        // h is a positive magnitude; t the current time
        let mut h = h.min(opts.h_max);
        for w in &opts.windows {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            let (lo, hi) = if dir > 0.0 { (t, t + h) } else { (t - h, t) };
            if hi > a && lo < b {
                h = h.min(w[2]);
            }
            // land exactly on the window edge that is being approached
            let edge = if dir > 0.0 { a } else { b };
            let dist = (edge - t) * dir;
            if dist > 1e-14 * (1.0 + t.abs()) && dist < h {
                h = dist;
            }
        }
        h
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)?;
    sol.evaluations += 1;
    let mut h = {
        let scale: f64 = (0..N)
            .map(|i| (k1[i] / (opts.atol + opts.rtol * y[i].abs())).powi(2))
            .sum::<f64>()
            .sqrt()
            / (N as f64).sqrt();
        let guess = if scale > 1e-10 { 0.01 / scale } else { 1e-3 * span.max(1e-3) };
        guess.min(span)
    };
    let mut fac_prev: f64 = 1e-4;
    for _ in 0..opts.max_steps {
        let remaining = (t1 - t) * dir;
        if remaining <= 1e-15 * (1.0 + t1.abs()) {
            break;
        }
        h = ceiling(t, h).min(remaining);
        if h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepSizeUnderflow { t });
        }
        let hs = h * dir;
        let k2 = f(t + C2 * hs, &axpy(&y, &[(hs * A21, &k1)]))?;
        let k3 = f(t + C3 * hs, &axpy(&y, &[(hs * A31, &k1), (hs * A32, &k2)]))?;
        let k4 = f(t + C4 * hs, &axpy(&y, &[(hs * A41, &k1), (hs * A42, &k2), (hs * A43, &k3)]))?;
        let k5 = f(
            t + C5 * hs,
            &axpy(&y, &[(hs * A51, &k1), (hs * A52, &k2), (hs * A53, &k3), (hs * A54, &k4)]),
        )?;
        let k6 = f(
            t + hs,
            &axpy(
                &y,
                &[(hs * A61, &k1), (hs * A62, &k2), (hs * A63, &k3), (hs * A64, &k4), (hs * A65, &k5)],
            ),
        )?;
        let y_new = axpy(
            &y,
            &[(hs * A71, &k1), (hs * A73, &k3), (hs * A74, &k4), (hs * A75, &k5), (hs * A76, &k6)],
        );
        let k7 = f(t + hs, &y_new)?;
        sol.evaluations += 6;
        let mut err = 0.0;
        for i in 0..N {
            let e = hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / N as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            sol.rejected += 1;
            continue;
        }
        if err <= 1.0 {
            let mut rcont = [[0.0; N]; 5];
            for i in 0..N {
                let dy = y_new[i] - y[i];
                let bspl = hs * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - hs * k7[i] - bspl;
                rcont[4][i] = hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            sol.segments.push(Segment { t0: t, h: hs, rcont });
            t += hs;
            if (t1 - t) * dir < 1e-15 * (1.0 + t1.abs()) {
                t = t1;
            }
            y = y_new;
            k1 = k7;
            check(t, &y)?;
            // PI step control
            let fac = (0.9 * err.max(1e-10).powf(-0.17) * fac_prev.powf(0.04)).clamp(0.2, 10.0);
            fac_prev = err.max(1e-4);
            h *= fac;
        } else {
            sol.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
        }
    }
    if (t1 - t) * dir > 1e-12 * (1.0 + t1.abs()) {
        return Err(Error::StepSizeUnderflow { t });
    }
    sol.y1 = y;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_oscillator_to_tolerance() {
        let sol = dopri5(
            |_, y: &[f64; 2]| Ok([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            10.0,
            &OdeOptions::default(),
            |_, _| Ok(()),
        )
        .unwrap();
        let y = sol.last();
        assert_relative_eq!(y[0], 10f64.cos(), epsilon = 1e-8);
        assert_relative_eq!(y[1], -10f64.sin(), epsilon = 1e-8);
        for &t in &[0.3, 4.71, 9.99] {
            let y = sol.eval(t);
            assert_relative_eq!(y[0], t.cos(), epsilon = 1e-8);
        }
    }

    #[test]
    fn backward_integration_and_windows() {
        let opts = OdeOptions {
            windows: vec![[0.5, 0.6, 0.001]],
            ..Default::default()
        };
        let sol = dopri5(|_, y: &[f64; 1]| Ok([y[0]]), 1.0, [1.0], 0.0, &opts, |_, _| Ok(())).unwrap();
        assert_relative_eq!(sol.last()[0], (-1f64).exp(), max_relative = 1e-9);
        let mesh = sol.mesh();
        let inside = mesh.iter().filter(|&&t| t > 0.5 && t < 0.6).count();
        assert!(inside >= 99, "{inside}");
        assert!(mesh.iter().any(|&t| (t - 0.6).abs() < 1e-15));
    }

    #[test]
    fn check_aborts() {
        let r = dopri5(
            |_, _: &[f64; 1]| Ok([1.0]),
            0.0,
            [0.0],
            2.0,
            &OdeOptions::default(),
            |t, y| if y[0] > 1.0 { Err(Error::LeftAdmissibleSet { t_exit: t }) } else { Ok(()) },
        );
        assert!(matches!(r, Err(Error::LeftAdmissibleSet { .. })));
    }
}
