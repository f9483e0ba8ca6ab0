//! Point-feature interaction matrix, the pseudo-inverse control law and
//! first-order pose integration.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use super::camera::{CameraPose, FeatureSet};
use crate::error::{Error, Result};

pub type InteractionMatrix = SMatrix<f64, 8, 6>;
/// `(v_x, v_y, v_z, w_x, w_y, w_z)` in the camera frame.
pub type Twist = SVector<f64, 6>;
pub type FeatureError = SVector<f64, 8>;

/// Stacked two-row blocks of the classic point-feature Jacobian.
pub fn interaction_matrix(f: &FeatureSet) -> Result<InteractionMatrix> {
    let mut l = InteractionMatrix::zeros();
    for (i, (&(x, y), &z)) in f.points.iter().zip(&f.depths).enumerate() {
        if !(z > 0.0) {
            return Err(Error::domain(format!("feature {i} has depth {z}")));
        }
        let rx = [-1.0 / z, 0.0, x / z, x * y, -(1.0 + x * x), y];
        let ry = [0.0, -1.0 / z, y / z, 1.0 + y * y, -x * y, -x];
        for j in 0..6 {
            l[(2 * i, j)] = rx[j];
            l[(2 * i + 1, j)] = ry[j];
        }
    }
    Ok(l)
}

/// `v = -lambda L^+ e`, with the pseudo-inverse from an SVD that treats
/// singular values below `1e-10 sigma_max` as zero.
pub fn control_law(l: &InteractionMatrix, e: &FeatureError, lambda: f64) -> Result<Twist> {
    if !(lambda > 0.0) {
        return Err(Error::domain(format!("gain must be positive, got {lambda}")));
    }
    let svd = l.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < 6 {
        return Err(Error::DegenerateConfiguration { rank });
    }
    let pinv = svd
        .pseudo_inverse(tol)
        .map_err(|e| Error::domain(format!("pseudo-inverse failed: {e}")))?;
    Ok(-lambda * (pinv * e))
}

/// Rotation `exp([w] t)` by the closed-form Rodrigues formula.
pub fn rodrigues(w: &Vector3<f64>, t: f64) -> Matrix3<f64> {
    let theta = w.norm() * t;
    if theta == 0.0 {
        return Matrix3::identity();
    }
    let k = w.normalize();
    let kx = Matrix3::new(0.0, -k.z, k.y, k.z, 0.0, -k.x, -k.y, k.x, 0.0);
    Matrix3::identity() + kx * theta.sin() + kx * kx * (1.0 - theta.cos())
}

/// Gram-Schmidt on the columns, keeping a right-handed frame.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let x = r.column(0).normalize();
    let y = (r.column(1) - x * x.dot(&r.column(1))).normalize();
    let z = x.cross(&y);
    Matrix3::from_columns(&[x, y, z])
}

/// Advances a camera by a body-frame twist held for `dt` seconds.
pub fn step_sim(pose: &CameraPose, twist: &Twist, dt: f64) -> Result<CameraPose> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("time step must be positive, got {dt}")));
    }
    let v = Vector3::new(twist[0], twist[1], twist[2]);
    let w = Vector3::new(twist[3], twist[4], twist[5]);
    Ok(CameraPose {
        position: pose.position + pose.orientation * v * dt,
        orientation: orthonormalize(&(pose.orientation * rodrigues(&w, dt))),
    })
}
