//! Positive spanning sets of boundary moment directions and the weights that
//! decompose a target vector over them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::bump::motion_vector;
use crate::error::{Error, Result};
use crate::geometry::{conformal_boundary, rotate, Pose, SolidShape, Vec2, Vec3};
use crate::linalg::nnls;

/// The three planar directions `(1,0)`, `(0,1)`, `(-1,-1)`.
pub const DISK_DIRECTIONS: [[f64; 2]; 3] = [[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]];

/// Positive weights with `sum mu_i e_i = v` over [`DISK_DIRECTIONS`].
pub fn cone_weights_disk(v: [f64; 2]) -> [f64; 3] {
    let root = (1.0 + v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] + root, v[1] + root, root]
}

/// Boundary sites (conformal angles) of a solid whose moment directions
/// `dn Phi(q, x_i)` positively span the target space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeSites {
    pub params: Vec<f64>,
    pub vectors: Vec<Vec3>,
    /// Worst residual of the six signed-axis reproductions.
    pub certificate: f64,
    /// Dimension of the target space: 2 for disks, 3 otherwise.
    pub dim: usize,
}

const CERTIFICATE_TOL: f64 = 1e-8;
const REGULARIZATION: f64 = 1e-6;

impl ConeSites {
    /// Sites aimed along [`DISK_DIRECTIONS`]: the inward normal at each site is
    /// parallel to its direction.
    pub fn disk(q: &Pose) -> Self {
        let params: Vec<f64> = DISK_DIRECTIONS
            .iter()
            .map(|e| {
                let d = rotate(-q.theta, -Vec2::new(e[0], e[1]));
                d.y.atan2(d.x)
            })
            .collect();
        let vectors = DISK_DIRECTIONS.iter().map(|e| Vec3::new(e[0], e[1], 0.0)).collect();
        ConeSites {
            params,
            vectors,
            certificate: 0.0,
            dim: 2,
        }
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.vectors.len(), |i, j| self.vectors[j][i])
    }

    /// Nonnegative weights `mu` with `sum mu_i u_i = v` (first `dim`
    /// components), Tikhonov-regularized so they vary continuously with `v`.
    pub fn weights(&self, v: &Vec3) -> (Vec<f64>, f64) {
        if self.dim == 2 {
            let mu = cone_weights_disk([v[0], v[1]]);
            return (mu.to_vec(), 0.0);
        }
        let a = self.matrix();
        let n = a.ncols();
        let scale = a.norm();
        let mut aug = DMatrix::<f64>::zeros(self.dim + n, n);
        aug.view_mut((0, 0), (self.dim, n)).copy_from(&a);
        for i in 0..n {
            aug[(self.dim + i, i)] = REGULARIZATION * scale;
        }
        let mut b = DVector::<f64>::zeros(self.dim + n);
        for i in 0..self.dim {
            b[i] = v[i];
        }
        let (mu, _) = nnls(&aug, &b);
        let resid = (&a * &mu - b.rows(0, self.dim)).norm();
        (mu.iter().copied().collect(), resid)
    }
}

/// Sixteen sites equally spaced in conformal angle on a non-disk solid, with
/// their moment directions at `q`. The angular offset is resampled when the
/// directions fail to positively span.
pub fn cone_points_general(shape: &SolidShape, q: &Pose) -> Result<ConeSites> {
    if shape.is_disk() {
        return Err(Error::InvalidShape("moment directions of a disk never carry torque".into()));
    }
    let mut worst_seen = f64::INFINITY;
    for attempt in 0..8 {
        let offset = attempt as f64 * 0.37;
        let params: Vec<f64> = (0..16).map(|i| 2.0 * PI * (i as f64 + offset) / 16.0).collect();
        let vectors: Vec<Vec3> = params
            .iter()
            .map(|&s| motion_vector(q, &conformal_boundary(shape, q, s)))
            .collect();
        let mut sites = ConeSites {
            params,
            vectors,
            certificate: 0.0,
            dim: 3,
        };
        let a = sites.matrix();
        let mut worst: f64 = 0.0;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut b = DVector::<f64>::zeros(3);
                b[axis] = sign;
                worst = worst.max(nnls(&a, &b).1);
            }
        }
        sites.certificate = worst;
        if worst <= CERTIFICATE_TOL {
            return Ok(sites);
        }
        worst_seen = worst_seen.min(worst);
    }
    Err(Error::ConeDegenerate { residual: worst_seen })
}
