use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;

/// Trace threshold below which `log` switches to the symmetric-part
/// eigenvector extraction (rotation angle within ~1.4e-3 rad of pi).
const NEAR_PI_TRACE: f64 = -1.0 + 1e-6;

/// A proper rotation stored as a 3x3 orthogonal matrix with determinant +1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Wraps a matrix the caller guarantees to be a proper rotation.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    /// Nearest proper rotation to `m` in the Frobenius sense.
    pub fn from_matrix_projected(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let u = svd.u.expect("svd u");
        let v_t = svd.v_t.expect("svd v_t");
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
            let mut d = Matrix3::identity();
            d[(imin, imin)] = -1.0;
            r = u * d * v_t;
        }
        Rotation(r)
    }

    /// Rotation about a unit axis by `angle` radians.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        Self::exp(&(axis.normalize() * angle))
    }

    /// From a (not necessarily normalized) quaternion `(w, x, y, z)`.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        Rotation(Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rodrigues exponential of an axis-angle vector.
    pub fn exp(v: &Vec3) -> Self {
        let theta2 = v.norm_squared();
        let (a, b) = if theta2 < 1e-8 {
            // sin(t)/t and (1 - cos t)/t^2 by Taylor expansion
            (
                1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
                0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
            )
        } else {
            let theta = theta2.sqrt();
            (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
        };
        let k = hat(v);
        Rotation(Matrix3::identity() + k * a + k * k * b)
    }

    /// Principal logarithm as an axis-angle vector with angle in `[0, pi]`.
    ///
    /// At angle pi the axis sign is ambiguous; the returned axis then has its
    /// first nonzero component positive.
    pub fn log(&self) -> Vec3 {
        let m = &self.0;
        let tr = m.trace();
        let a = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
        let sin_theta = a.norm();
        let cos_theta = ((tr - 1.0) * 0.5).clamp(-1.0, 1.0);
        let theta = sin_theta.atan2(cos_theta);

        if tr > NEAR_PI_TRACE {
            if theta < 1e-6 {
                // theta / sin(theta) ~ 1 + theta^2 / 6
                return a * (1.0 + theta * theta / 6.0);
            }
            return a * (theta / sin_theta);
        }

        // Near pi: the symmetric part is cos(t) I + (1 - cos t) n n^T.
        let s = (m + m.transpose()) * 0.5;
        let nn = (s - Matrix3::identity() * cos_theta) / (1.0 - cos_theta);
        let (k, _) = (0..3).fold((0, f64::NEG_INFINITY), |acc, i| {
            if nn[(i, i)] > acc.1 {
                (i, nn[(i, i)])
            } else {
                acc
            }
        });
        let mut axis = Vec3::new(nn[(0, k)], nn[(1, k)], nn[(2, k)]);
        axis /= axis.norm();
        if sin_theta > 1e-12 {
            if axis.dot(&a) < 0.0 {
                axis = -axis;
            }
        } else if let Some(first) = axis.iter().copied().find(|c| c.abs() > 1e-12) {
            if first < 0.0 {
                axis = -axis;
            }
        }
        axis * theta
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let a = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
        let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
        a.norm().atan2(c).clamp(0.0, PI)
    }

    /// Geodesic distance `|log(self * other^-1)|`.
    pub fn distance(&self, other: &Rotation) -> f64 {
        (*self * other.inverse()).angle()
    }

    /// `|R^T R - I|_F`, a measure of drift away from orthogonality.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).norm()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for Rotation {
    type Output = Vec3;
    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Skew-symmetric matrix `[v]_x` so that `hat(v) * w = v x w`.
pub fn hat(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn exp_so3(axis_angle: &Vec3) -> Rotation {
    Rotation::exp(axis_angle)
}

pub fn log_so3(r: &Rotation) -> Vec3 {
    r.log()
}

/// Point at fraction `s` along the geodesic from `r0` to `r1`:
/// `exp(s log(r1 r0^-1)) r0`.
pub fn geodesic_interpolate(r0: &Rotation, r1: &Rotation, s: f64) -> Rotation {
    if s == 0.0 {
        return *r0;
    }
    let delta = (*r1 * r0.inverse()).log();
    Rotation::exp(&(delta * s)) * *r0
}
