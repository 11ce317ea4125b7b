//! Differential-drive motion model and an EKF that fuses scan-match poses
//! as direct pose measurements.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};

use crate::error::{Result, SlamError};
use crate::geometry::{wrap_angle, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    /// Linear velocity, m/s.
    pub v: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
    /// Duration the command is held, seconds.
    pub dt: f64,
}

impl Control {
    pub fn new(v: f64, omega: f64, dt: f64) -> Result<Self> {
        if !(v.is_finite() && omega.is_finite()) {
            return Err(SlamError::invalid("control", "velocities must be finite"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SlamError::invalid("dt", "must be positive"));
        }
        Ok(Self { v, omega, dt })
    }
}

/// One Euler step of the unicycle model, evaluated at the pre-step heading.
pub fn integrate_motion(pose: &Pose2D, u: &Control) -> Pose2D {
    let (s, c) = pose.theta.sin_cos();
    Pose2D::new(
        pose.x + u.v * c * u.dt,
        pose.y + u.v * s * u.dt,
        pose.theta + u.omega * u.dt,
    )
}

/// Jacobians of [`integrate_motion`] with respect to state and control.
pub fn motion_jacobians(pose: &Pose2D, u: &Control) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let (s, c) = pose.theta.sin_cos();
    let a = Matrix3::new(
        1.0,
        0.0,
        -u.v * s * u.dt, //
        0.0,
        1.0,
        u.v * c * u.dt, //
        0.0,
        0.0,
        1.0,
    );
    let g = Matrix3x2::new(
        c * u.dt,
        0.0, //
        s * u.dt,
        0.0, //
        0.0,
        u.dt,
    );
    (a, g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeliefState {
    pub mean: Pose2D,
    pub covariance: Matrix3<f64>,
}

impl BeliefState {
    pub fn new(mean: Pose2D, covariance: Matrix3<f64>) -> Self {
        Self { mean, covariance }
    }

    pub fn trace(&self) -> f64 {
        self.covariance.trace()
    }
}

fn check_psd2(q: &Matrix2<f64>) -> Result<()> {
    if (q - q.transpose()).amax() > 1e-12 {
        return Err(SlamError::NotPsd("control noise is not symmetric"));
    }
    if q.symmetric_eigenvalues().min() < -1e-12 {
        return Err(SlamError::NotPsd("control noise has a negative eigenvalue"));
    }
    Ok(())
}

fn check_psd3(r: &Matrix3<f64>) -> Result<()> {
    if (r - r.transpose()).amax() > 1e-12 {
        return Err(SlamError::NotPsd("measurement noise is not symmetric"));
    }
    if r.symmetric_eigenvalues().min() < -1e-12 {
        return Err(SlamError::NotPsd("measurement noise has a negative eigenvalue"));
    }
    Ok(())
}

fn symmetrize(p: Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

pub fn predict(belief: &BeliefState, u: &Control, q: &Matrix2<f64>) -> Result<BeliefState> {
    check_psd2(q)?;
    let (a, g) = motion_jacobians(&belief.mean, u);
    let p = a * belief.covariance * a.transpose() + g * q * g.transpose();
    Ok(BeliefState {
        mean: integrate_motion(&belief.mean, u),
        covariance: symmetrize(p),
    })
}

/// Fuse a direct pose measurement `z` (identity measurement model).
pub fn update(belief: &BeliefState, z: &Pose2D, r: &Matrix3<f64>) -> Result<BeliefState> {
    check_psd3(r)?;
    if !z.is_finite() {
        return Err(SlamError::invalid("measurement", "pose must be finite"));
    }
    let p = belief.covariance;
    let m = belief.mean;
    let e = Vector3::new(z.x - m.x, z.y - m.y, wrap_angle(z.theta - m.theta));
    let s = p + r;
    let s_inv = s.try_inverse().ok_or(SlamError::SingularInnovation)?;
    if !s_inv.iter().all(|v| v.is_finite()) {
        return Err(SlamError::SingularInnovation);
    }
    let k = p * s_inv;
    let dx = k * e;
    let i_k = Matrix3::identity() - k;
    let p_new = i_k * p * i_k.transpose() + k * r * k.transpose();
    Ok(BeliefState {
        mean: Pose2D::new(m.x + dx[0], m.y + dx[1], m.theta + dx[2]),
        covariance: symmetrize(p_new),
    })
}
