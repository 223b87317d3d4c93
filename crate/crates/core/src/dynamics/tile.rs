//! Tensor-product Chebyshev interpolants over cubic cells of pose space.
//!
//! Each cell stores several scalar channels sampled at Chebyshev-Lobatto
//! nodes; values and exact partial derivatives of the interpolant are
//! available anywhere in the cell.

use std::f64::consts::PI;

use crate::geometry::Vec3;

#[derive(Clone, Debug)]
pub struct ChebCell {
    center: Vec3,
    half: f64,
    degree: usize,
    channels: usize,
    /// coefficients indexed `[channel][a][b][c]`, flattened
    coeffs: Vec<f64>,
}

/// Chebyshev-Lobatto nodes `cos(pi j / n)`, `j = 0..=n`.
pub fn lobatto(n: usize) -> Vec<f64> {
    (0..=n).map(|j| (PI * j as f64 / n as f64).cos()).collect()
}

impl ChebCell {
    /// Pose-space sample points in the order expected by [`ChebCell::from_values`].
    pub fn nodes(center: Vec3, half: f64, degree: usize) -> Vec<Vec3> {
        let x = lobatto(degree);
        let mut out = Vec::with_capacity((degree + 1).pow(3));
        for a in &x {
            for b in &x {
                for c in &x {
                    out.push(center + Vec3::new(*a, *b, *c) * half);
                }
            }
        }
        out
    }

    /// Build from `values[node][channel]`.
    pub fn from_values(center: Vec3, half: f64, degree: usize, values: &[Vec<f64>]) -> Self {
        let n = degree;
        let m = n + 1;
        let channels = values.first().map_or(0, |v| v.len());
        // 1D transform: a_k = (2/n) sum'' f_j cos(pi j k / n), ends halved twice
        let mut t = vec![0.0; m * m];
        for k in 0..m {
            for j in 0..m {
                let mut w = 2.0 / n as f64 * (PI * (j * k) as f64 / n as f64).cos();
                if j == 0 || j == n {
                    w *= 0.5;
                }
                if k == 0 || k == n {
                    w *= 0.5;
                }
                t[k * m + j] = w;
            }
        }
        let mut coeffs = vec![0.0; channels * m * m * m];
        let idx = |a: usize, b: usize, c: usize| (a * m + b) * m + c;
        for ch in 0..channels {
            let mut f: Vec<f64> = (0..m * m * m).map(|i| values[i][ch]).collect();
            for axis in 0..3 {
                let mut g = vec![0.0; m * m * m];
                for a in 0..m {
                    for b in 0..m {
                        for c in 0..m {
                            let mut s = 0.0;
                            for j in 0..m {
                                let src = match axis {
                                    0 => idx(j, b, c),
                                    1 => idx(a, j, c),
                                    _ => idx(a, b, j),
                                };
                                let k = [a, b, c][axis];
                                s += t[k * m + j] * f[src];
                            }
                            g[idx(a, b, c)] = s;
                        }
                    }
                }
                f = g;
            }
            coeffs[ch * m * m * m..(ch + 1) * m * m * m].copy_from_slice(&f);
        }
        ChebCell {
            center,
            half,
            degree,
            channels,
            coeffs,
        }
    }

    pub fn contains(&self, q: &Vec3) -> bool {
        (0..3).all(|i| (q[i] - self.center[i]).abs() <= self.half * (1.0 + 1e-12))
    }

    /// Values and gradients (pose-space) of every channel at `q`.
    pub fn eval(&self, q: &Vec3) -> (Vec<f64>, Vec<Vec3>) {
        let m = self.degree + 1;
        let mut tv = [[0.0; 32]; 3];
        let mut td = [[0.0; 32]; 3];
        for ax in 0..3 {
            let x = (q[ax] - self.center[ax]) / self.half;
            tv[ax][0] = 1.0;
            td[ax][0] = 0.0;
            if m > 1 {
                tv[ax][1] = x;
                td[ax][1] = 1.0;
            }
            for k in 2..m {
                tv[ax][k] = 2.0 * x * tv[ax][k - 1] - tv[ax][k - 2];
                td[ax][k] = 2.0 * tv[ax][k - 1] + 2.0 * x * td[ax][k - 1] - td[ax][k - 2];
            }
        }
        let inv = 1.0 / self.half;
        let mut vals = vec![0.0; self.channels];
        let mut grads = vec![Vec3::zeros(); self.channels];
        let block = m * m * m;
        for ch in 0..self.channels {
            let c = &self.coeffs[ch * block..(ch + 1) * block];
            let (mut v, mut gx, mut gy, mut gz) = (0.0, 0.0, 0.0, 0.0);
            for a in 0..m {
                for b in 0..m {
                    let row = &c[(a * m + b) * m..(a * m + b + 1) * m];
                    let (mut s, mut sd) = (0.0, 0.0);
                    for (k, ck) in row.iter().enumerate() {
                        s += ck * tv[2][k];
                        sd += ck * td[2][k];
                    }
                    v += tv[0][a] * tv[1][b] * s;
                    gx += td[0][a] * tv[1][b] * s;
                    gy += tv[0][a] * td[1][b] * s;
                    gz += tv[0][a] * tv[1][b] * sd;
                }
            }
            vals[ch] = v;
            grads[ch] = Vec3::new(gx, gy, gz) * inv;
        }
        (vals, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reproduces_smooth_function_and_derivatives() {
        let center = Vec3::new(0.1, -0.2, 0.3);
        let f = |q: &Vec3| (q[0] + 2.0 * q[1]).sin() * (0.5 * q[2]).exp();
        let nodes = ChebCell::nodes(center, 0.1, 8);
        let values: Vec<Vec<f64>> = nodes.iter().map(|q| vec![f(q), q[0] * q[1] * q[2]]).collect();
        let cell = ChebCell::from_values(center, 0.1, 8, &values);
        let q = Vec3::new(0.137, -0.25, 0.31);
        let (v, g) = cell.eval(&q);
        assert_relative_eq!(v[0], f(&q), epsilon = 1e-13);
        let h = 1e-6;
        for i in 0..3 {
            let mut qp = q;
            qp[i] += h;
            let mut qm = q;
            qm[i] -= h;
            assert_relative_eq!(g[0][i], (f(&qp) - f(&qm)) / (2.0 * h), epsilon = 1e-8);
        }
        assert_relative_eq!(v[1], q[0] * q[1] * q[2], epsilon = 1e-15);
        assert_relative_eq!(g[1][2], q[0] * q[1], epsilon = 1e-14);
        assert!(cell.contains(&q));
    }
}
