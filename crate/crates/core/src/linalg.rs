//! Dense linear algebra used by the solvers: truncated-SVD pseudo-inverse,
//! nonnegative least squares and small null-space helpers.

use faer::{Mat, MatRef};
use nalgebra::{DMatrix, DVector, Matrix4, Vector4};

/// Truncated-SVD pseudo-inverse of a tall collocation matrix.
///
/// Singular values below `rel_cutoff * sigma_max` are discarded, which is the
/// regularization that keeps ill-conditioned source fits stable.
#[derive(Clone, Debug)]
pub struct Pinv {
    /// retained right singular vectors scaled by `1/s_k`
    vs: Mat<f64>,
    /// retained left singular vectors, transposed
    ut: Mat<f64>,
    rank: usize,
    sigma_max: f64,
    sigma_min: f64,
}

impl Pinv {
    pub fn new(a: MatRef<'_, f64>, rel_cutoff: f64) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let svd = a.thin_svd();
        let s = svd.s_diagonal();
        let sigma_max = if s.nrows() > 0 { s.read(0) } else { 0.0 };
        let keep = (0..s.nrows())
            .take_while(|&k| s.read(k) > rel_cutoff * sigma_max)
            .count();
        let u = svd.u();
        let v = svd.v();
        // factors are applied one after the other; forming V S^-1 U^T
        // explicitly loses several digits when the spectrum is wide
        let vs = Mat::<f64>::from_fn(n, keep, |i, k| v.read(i, k) / s.read(k));
        let ut = Mat::<f64>::from_fn(keep, m, |k, j| u.read(j, k));
        Pinv {
            vs,
            ut,
            rank: keep,
            sigma_max,
            sigma_min: if keep > 0 { s.read(keep - 1) } else { 0.0 },
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Ratio of largest to smallest retained singular value.
    pub fn condition(&self) -> f64 {
        if self.sigma_min > 0.0 {
            self.sigma_max / self.sigma_min
        } else {
            f64::INFINITY
        }
    }

    pub fn solve(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let c = &self.ut * b;
        &self.vs * &c
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let bm = faer::col::from_slice::<f64>(b);
        let c = &self.ut * bm;
        let x = &self.vs * &c;
        (0..x.nrows()).map(|i| x.read(i)).collect()
    }
}

/// Lawson-Hanson active-set solution of `min |A x - b|` subject to `x >= 0`.
/// Returns the solution and the residual norm.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let tol = 1e-13 * a.norm().max(1.0) * b.norm().max(1.0);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&k| passive[k]).collect();
            let z = lstsq_columns(a, b, &idx);
            if idx.iter().zip(z.iter()).all(|(_, &zk)| zk > 0.0) {
                for (&k, &zk) in idx.iter().zip(z.iter()) {
                    x[k] = zk;
                }
                break;
            }
            let mut step = 1.0f64;
            for (&k, &zk) in idx.iter().zip(z.iter()) {
                if zk <= 0.0 {
                    step = step.min(x[k] / (x[k] - zk));
                }
            }
            for (&k, &zk) in idx.iter().zip(z.iter()) {
                x[k] += step * (zk - x[k]);
                if x[k] <= 1e-15 {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
        }
    }
    let r = (b - a * &x).norm();
    (x, r)
}

fn lstsq_columns(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    let sub = DMatrix::<f64>::from_fn(a.nrows(), idx.len(), |i, j| a[(i, idx[j])]);
    lstsq(&sub, b).iter().copied().collect()
}

/// Minimum-norm least-squares solution through an SVD with relative cutoff 1e-14.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, 1e-14 * smax.max(f64::MIN_POSITIVE))
        .expect("svd computed with both factors")
}

/// Unit vector spanning (part of) the null space of a 3x4 matrix, sign-fixed
/// so that its leading nonzero entry is positive.
pub fn null_vector_3x4(m: &nalgebra::Matrix3x4<f64>) -> Vector4<f64> {
    let mut sq = Matrix4::<f64>::zeros();
    sq.fixed_view_mut::<3, 4>(0, 0).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("four singular values");
    let mut v: Vector4<f64> = vt.row(k).transpose();
    v /= v.norm();
    let scale = v.amax();
    if let Some(lead) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale) {
        if lead < 0.0 {
            v = -v;
        }
    }
    v
}

/// Legendre polynomials `P_0..P_{n-1}` and their derivatives at `t`.
pub fn legendre(n: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; n.max(2)];
    let mut d = vec![0.0; n.max(2)];
    p[0] = 1.0;
    p[1] = t;
    d[1] = 1.0;
    for k in 1..n.max(2) - 1 {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        d[k + 1] = d[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    p.truncate(n);
    d.truncate(n);
    (p, d)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre(n + 1, t);
            let dt = p[n] / d[n];
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n + 1, t);
        x[i] = t;
        w[i] = 2.0 / ((1.0 - t * t) * d[n] * d[n]);
    }
    (x, w)
}
