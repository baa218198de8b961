//! Small SO(3) toolkit: exponential/logarithm maps and the left Jacobian.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rotation by the rotation vector `phi`.
pub fn exp(phi: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::from_scaled_axis(*phi)
}

pub fn exp_quat(phi: &Vector3<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::from_scaled_axis(*phi)
}

/// Rotation vector of `r`, with angle in [0, pi].
pub fn log(r: &Rotation3<f64>) -> Vector3<f64> {
    r.scaled_axis()
}

/// Left Jacobian of SO(3): `exp(phi + d) ~= exp(J_l(phi) d) exp(phi)`.
pub fn left_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-6 {
        return Matrix3::identity() + 0.5 * k + k * k / 6.0;
    }
    let t2 = theta * theta;
    Matrix3::identity()
        + (1.0 - theta.cos()) / t2 * k
        + (theta - theta.sin()) / (t2 * theta) * k * k
}

pub fn left_jacobian_inverse(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    if theta < 1e-6 {
        return Matrix3::identity() - 0.5 * k + k * k / 12.0;
    }
    // ill-conditioned near pi; callers only use small residual rotations
    let coef = 1.0 / (theta * theta) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
    Matrix3::identity() - 0.5 * k + coef * k * k
}
