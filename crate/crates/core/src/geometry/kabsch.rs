use nalgebra::Matrix3;

use super::rotation::{Rotation, Vec3};
use crate::error::{Error, Result};

/// `x -> rotation * x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * *x + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.inverse();
        Self { rotation: rt, translation: -(rt * self.translation) }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    sum / points.len() as f64
}

pub fn rmsd(a: &[Vec3], b: &[Vec3]) -> f64 {
    assert_eq!(a.len(), b.len());
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum();
    (ss / a.len() as f64).sqrt()
}

pub fn weighted_rmsd(a: &[Vec3], b: &[Vec3], weights: &[f64]) -> f64 {
    let wsum: f64 = weights.iter().sum();
    let ss: f64 = a.iter().zip(b).zip(weights).map(|((x, y), w)| w * (x - y).norm_squared()).sum();
    (ss / wsum).sqrt()
}

/// Optimal (weighted least-squares) rigid superposition of `mobile` onto
/// `reference`. The returned transform maps mobile coordinates into the
/// reference frame and is always a proper rotation.
pub fn kabsch(mobile: &[Vec3], reference: &[Vec3], weights: Option<&[f64]>) -> Result<RigidTransform> {
    if mobile.len() != reference.len() {
        return Err(Error::Correspondence(format!(
            "kabsch: {} mobile points vs {} reference points",
            mobile.len(),
            reference.len()
        )));
    }
    if mobile.len() < 3 {
        return Err(Error::Singular(format!("kabsch needs at least 3 points, got {}", mobile.len())));
    }
    if let Some(w) = weights {
        if w.len() != mobile.len() || w.iter().any(|&x| !(x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Parameter("kabsch weights must be nonnegative with positive sum".into()));
        }
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let wsum: f64 = (0..mobile.len()).map(weight).sum();

    let mut cm = Vec3::zeros();
    let mut cr = Vec3::zeros();
    for i in 0..mobile.len() {
        cm += mobile[i] * weight(i);
        cr += reference[i] * weight(i);
    }
    cm /= wsum;
    cr /= wsum;

    let mut h = Matrix3::zeros();
    for i in 0..mobile.len() {
        h += (mobile[i] - cm) * (reference[i] - cr).transpose() * weight(i);
    }

    let svd = h.svd(true, true);
    let mut sv: Vec<(usize, f64)> = svd.singular_values.iter().copied().enumerate().collect();
    sv.sort_by(|a, b| b.1.total_cmp(&a.1));
    if sv[0].1 <= 1e-300 || sv[1].1 <= 1e-10 * sv[0].1 {
        return Err(Error::Singular(format!(
            "rank-deficient cross-covariance (singular values {:.3e}, {:.3e}, {:.3e})",
            sv[0].1, sv[1].1, sv[2].1
        )));
    }
    let u = svd.u.expect("svd u");
    let v = svd.v_t.expect("svd v_t").transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        let smallest = sv[2].0;
        d[(smallest, smallest)] = -1.0;
    }
    let r = Rotation::from_matrix_unchecked(v * d * u.transpose());
    Ok(RigidTransform { rotation: r, translation: cr - r * cm })
}

/// RMSD after optimal superposition.
pub fn superposed_rmsd(mobile: &[Vec3], reference: &[Vec3]) -> Result<f64> {
    let t = kabsch(mobile, reference, None)?;
    let moved: Vec<Vec3> = mobile.iter().map(|x| t.apply(x)).collect();
    Ok(rmsd(&moved, reference))
}
