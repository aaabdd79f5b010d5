//! Real spherical harmonics up to degree 2.
//!
//! Component normalization: `sum_m Y_lm(u)^2 = 2l + 1` for unit `u`.
//! Degree 1 is ordered `(x, y, z)`; degree 2 is ordered
//! `(xy, yz, 3z^2 - 1, xz, x^2 - y^2)` with the matching constants.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

pub const SQRT3: f64 = 1.732_050_807_568_877_2;
const SQRT5: f64 = 2.236_067_977_499_79;
const SQRT15: f64 = 3.872_983_346_207_417;

/// `[Y_0, Y_1 (3), Y_2 (5)]` of the direction of `v`.
pub fn spherical_harmonics(v: &Vec3) -> Result<[f64; 9]> {
    let n = v.norm();
    if n < 1e-8 {
        return Err(Error::DegenerateDirection(n));
    }
    let u = v / n;
    let (x, y, z) = (u.x, u.y, u.z);
    Ok([
        1.0,
        SQRT3 * x,
        SQRT3 * y,
        SQRT3 * z,
        SQRT15 * x * y,
        SQRT15 * y * z,
        0.5 * SQRT5 * (3.0 * z * z - 1.0),
        SQRT15 * x * z,
        0.5 * SQRT15 * (x * x - y * y),
    ])
}

/// Cartesian form of the degree-2 coupling of a vector with the edge
/// direction `u`: the traceless projection `(u . v) u - v / 3`.
pub fn traceless_apply(u: &[f64; 3], v: [f64; 3]) -> [f64; 3] {
    let d = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    [d * u[0] - v[0] / 3.0, d * u[1] - v[1] / 3.0, d * u[2] - v[2] / 3.0]
}
