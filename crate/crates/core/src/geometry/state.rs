use std::fmt;

use super::kabsch::{centroid, kabsch, RigidTransform};
use super::rotation::{Rotation, Vec3};
use crate::error::{Error, Result};

/// Ideal backbone geometry used to place N and C around a frame.
pub const CA_N_BOND: f64 = 1.458;
pub const CA_C_BOND: f64 = 1.526;
pub const N_CA_C_ANGLE_DEG: f64 = 111.2;

const THREE_LETTER: [&str; 21] = [
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE", "LEU", "LYS", "MET", "PHE", "PRO", "SER",
    "THR", "TRP", "TYR", "VAL", "UNK",
];

/// One of the 20 standard residue types, or unknown.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AminoAcid(u8);

impl AminoAcid {
    pub const COUNT: usize = 21;
    pub const UNKNOWN: AminoAcid = AminoAcid(20);

    pub fn from_index(i: usize) -> Self {
        AminoAcid(i.min(20) as u8)
    }

    pub fn from_three_letter(code: &str) -> Self {
        let code = code.trim().to_ascii_uppercase();
        let code = match code.as_str() {
            "MSE" => "MET",
            "HID" | "HIE" | "HIP" => "HIS",
            other => other,
        };
        THREE_LETTER.iter().position(|c| *c == code).map_or(Self::UNKNOWN, |i| AminoAcid(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn three_letter(self) -> &'static str {
        THREE_LETTER[self.0 as usize]
    }
}

impl fmt::Display for AminoAcid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.three_letter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidueInfo {
    pub seq: i32,
    pub icode: char,
    pub aa: AminoAcid,
}

impl ResidueInfo {
    pub fn new(seq: i32, aa: AminoAcid) -> Self {
        Self { seq, icode: ' ', aa }
    }
}

/// A residue's rigid frame: C-alpha position and backbone orientation.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Frame {
    pub position: Vec3,
    pub orientation: Rotation,
}

impl Frame {
    pub fn new(position: Vec3, orientation: Rotation) -> Self {
        Self { position, orientation }
    }

    /// Gram-Schmidt frame of the N, CA, C triangle: e1 along C-CA, e2 the
    /// part of N-CA orthogonal to e1, e3 = e1 x e2.
    pub fn from_backbone(n: &Vec3, ca: &Vec3, c: &Vec3) -> Result<Self> {
        let v1 = c - ca;
        let v2 = n - ca;
        if v1.norm() < 1e-6 {
            return Err(Error::Singular("C coincides with CA".into()));
        }
        let e1 = v1.normalize();
        let u2 = v2 - e1 * e1.dot(&v2);
        if u2.norm() < 1e-6 {
            return Err(Error::Singular("collinear N, CA, C".into()));
        }
        let e2 = u2.normalize();
        let e3 = e1.cross(&e2);
        let m = nalgebra::Matrix3::from_columns(&[e1, e2, e3]);
        Ok(Frame { position: *ca, orientation: Rotation::from_matrix_unchecked(m) })
    }

    /// N, CA, C positions reconstructed from ideal local offsets.
    pub fn backbone_atoms(&self) -> [Vec3; 3] {
        let angle = N_CA_C_ANGLE_DEG.to_radians();
        let n_local = Vec3::new(angle.cos(), angle.sin(), 0.0) * CA_N_BOND;
        let c_local = Vec3::new(CA_C_BOND, 0.0, 0.0);
        [
            self.position + self.orientation * n_local,
            self.position,
            self.position + self.orientation * c_local,
        ]
    }

    pub fn transformed(&self, t: &RigidTransform) -> Frame {
        Frame { position: t.apply(&self.position), orientation: t.rotation * self.orientation }
    }
}

/// One chain: residue metadata and matching frames.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub id: char,
    pub residues: Vec<ResidueInfo>,
    pub frames: Vec<Frame>,
}

impl Chain {
    pub fn new(id: char, residues: Vec<ResidueInfo>, frames: Vec<Frame>) -> Result<Self> {
        if residues.len() != frames.len() {
            return Err(Error::Correspondence(format!(
                "chain {id}: {} residues but {} frames",
                residues.len(),
                frames.len()
            )));
        }
        if frames.is_empty() {
            return Err(Error::EmptyStructure(format!("chain {id}")));
        }
        Ok(Self { id, residues, frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.position).collect()
    }

    /// Unweighted C-alpha mean.
    pub fn center(&self) -> Vec3 {
        centroid(&self.positions())
    }

    pub fn with_frames(&self, frames: Vec<Frame>) -> Chain {
        debug_assert_eq!(frames.len(), self.residues.len());
        Chain { id: self.id, residues: self.residues.clone(), frames }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Chain {
        self.with_frames(self.frames.iter().map(|f| f.transformed(t)).collect())
    }
}

/// Receptor and ligand chains of a complex. The receptor never moves under
/// global transforms.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexState {
    pub receptor: Chain,
    pub ligand: Chain,
}

impl ComplexState {
    pub fn new(receptor: Chain, ligand: Chain) -> Self {
        Self { receptor, ligand }
    }

    pub fn n_receptor(&self) -> usize {
        self.receptor.len()
    }

    pub fn n_ligand(&self) -> usize {
        self.ligand.len()
    }

    pub fn ligand_center(&self) -> Vec3 {
        self.ligand.center()
    }

    /// Receptor then ligand C-alpha positions.
    pub fn positions(&self) -> Vec<Vec3> {
        let mut p = self.receptor.positions();
        p.extend(self.ligand.positions());
        p
    }

    /// Applies a rigid transform to both chains.
    pub fn transformed(&self, t: &RigidTransform) -> ComplexState {
        ComplexState { receptor: self.receptor.transformed(t), ligand: self.ligand.transformed(t) }
    }

    /// Largest position difference (A) or orientation-matrix entry
    /// difference across all residues of two same-shaped complexes.
    pub fn max_deviation(&self, other: &ComplexState) -> f64 {
        let chain_dev = |a: &Chain, b: &Chain| {
            a.frames.iter().zip(&b.frames).fold(0.0f64, |m, (x, y)| {
                let dp = (x.position - y.position).amax();
                let dr = (x.orientation.matrix() - y.orientation.matrix()).amax();
                m.max(dp).max(dr)
            })
        };
        chain_dev(&self.receptor, &other.receptor).max(chain_dev(&self.ligand, &other.ligand))
    }

    pub fn same_shape(&self, other: &ComplexState) -> Result<()> {
        if self.n_receptor() != other.n_receptor() || self.n_ligand() != other.n_ligand() {
            return Err(Error::Correspondence(format!(
                "complex sizes differ: ({}, {}) vs ({}, {})",
                self.n_receptor(),
                self.n_ligand(),
                other.n_receptor(),
                other.n_ligand()
            )));
        }
        Ok(())
    }
}

/// A residue-level (translation, rotation) pair.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct LocalTransform {
    pub translation: Vec3,
    pub rotation: Rotation,
}

impl LocalTransform {
    pub fn new(translation: Vec3, rotation: Rotation) -> Self {
        Self { translation, rotation }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn apply(&self, f: &Frame) -> Frame {
        Frame { position: f.position + self.translation, orientation: self.rotation * f.orientation }
    }
}

/// A point of the product space: global ligand translation and rotation
/// plus one local transform per residue.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint {
    pub global_translation: Vec3,
    pub global_rotation: Rotation,
    pub receptor_local: Vec<LocalTransform>,
    pub ligand_local: Vec<LocalTransform>,
}

impl ProductPoint {
    pub fn identity(n_receptor: usize, n_ligand: usize) -> Self {
        Self {
            global_translation: Vec3::zeros(),
            global_rotation: Rotation::identity(),
            receptor_local: vec![LocalTransform::identity(); n_receptor],
            ligand_local: vec![LocalTransform::identity(); n_ligand],
        }
    }
}

/// Rotates the ligand about its own C-alpha mean; the receptor is unchanged.
pub fn apply_rigid_rotation(r: &Rotation, state: &ComplexState) -> ComplexState {
    let center = state.ligand_center();
    let frames = state
        .ligand
        .frames
        .iter()
        .map(|f| Frame { position: *r * (f.position - center) + center, orientation: *r * f.orientation })
        .collect();
    ComplexState { receptor: state.receptor.clone(), ligand: state.ligand.with_frames(frames) }
}

/// Translates the ligand; the receptor is unchanged.
pub fn apply_ligand_translation(t: &Vec3, state: &ComplexState) -> ComplexState {
    let frames = state.ligand.frames.iter().map(|f| Frame { position: f.position + t, ..*f }).collect();
    ComplexState { receptor: state.receptor.clone(), ligand: state.ligand.with_frames(frames) }
}

/// Applies per-residue transforms to both chains.
pub fn apply_residue_transforms(
    receptor_local: &[LocalTransform],
    ligand_local: &[LocalTransform],
    state: &ComplexState,
) -> Result<ComplexState> {
    if receptor_local.len() != state.n_receptor() || ligand_local.len() != state.n_ligand() {
        return Err(Error::Correspondence(format!(
            "local transforms ({}, {}) do not match complex ({}, {})",
            receptor_local.len(),
            ligand_local.len(),
            state.n_receptor(),
            state.n_ligand()
        )));
    }
    let apply = |chain: &Chain, local: &[LocalTransform]| {
        chain.with_frames(chain.frames.iter().zip(local).map(|(f, l)| l.apply(f)).collect())
    };
    Ok(ComplexState { receptor: apply(&state.receptor, receptor_local), ligand: apply(&state.ligand, ligand_local) })
}

/// Composite action: residue transforms first, then the global rotation of
/// the ligand about its center, then the global translation.
pub fn apply_composite(point: &ProductPoint, state: &ComplexState) -> Result<ComplexState> {
    let flexed = apply_residue_transforms(&point.receptor_local, &point.ligand_local, state)?;
    let rotated = apply_rigid_rotation(&point.global_rotation, &flexed);
    Ok(apply_ligand_translation(&point.global_translation, &rotated))
}

/// Removes the rigid-body part of a ligand update by superposing the
/// updated C-alpha positions back onto the pre-update ones. Returns the
/// aligned frames and the removed transform (which maps the aligned frames
/// back onto `updated`).
pub fn kabsch_disentangle(updated: &[Frame], pre_update: &[Frame]) -> Result<(Vec<Frame>, RigidTransform)> {
    let upd: Vec<Vec3> = updated.iter().map(|f| f.position).collect();
    let pre: Vec<Vec3> = pre_update.iter().map(|f| f.position).collect();
    let align = kabsch(&upd, &pre, None)?;
    let aligned = updated.iter().map(|f| f.transformed(&align)).collect();
    Ok((aligned, align.inverse()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation::exp_so3;

    fn toy_state() -> ComplexState {
        let mk = |id: char, offset: f64, n: usize| {
            let residues = (0..n).map(|i| ResidueInfo::new(i as i32 + 1, AminoAcid::from_index(i))).collect();
            let frames = (0..n)
                .map(|i| {
                    let x = i as f64;
                    Frame::new(
                        Vec3::new(offset + 3.8 * x, (x * 0.9).sin() * 2.0, (x * 0.5).cos()),
                        exp_so3(&Vec3::new(0.1 * x, -0.2, 0.3 * x)),
                    )
                })
                .collect();
            Chain::new(id, residues, frames).unwrap()
        };
        ComplexState::new(mk('A', 0.0, 5), mk('B', 12.0, 4))
    }

    #[test]
    fn identity_rotation_is_noop() {
        let s = toy_state();
        assert!(apply_rigid_rotation(&Rotation::identity(), &s).max_deviation(&s) < 1e-12);
    }

    #[test]
    fn single_residue_ligand_rotates_in_place() {
        let mut s = toy_state();
        s.ligand = Chain::new('B', vec![ResidueInfo::new(1, AminoAcid::UNKNOWN)], vec![s.ligand.frames[0]]).unwrap();
        let r = exp_so3(&Vec3::new(0.4, 1.0, -0.3));
        let out = apply_rigid_rotation(&r, &s);
        assert!((out.ligand.frames[0].position - s.ligand.frames[0].position).norm() < 1e-12);
        let expect = r * s.ligand.frames[0].orientation;
        assert!((out.ligand.frames[0].orientation.matrix() - expect.matrix()).norm() < 1e-14);
    }

    #[test]
    fn composite_translation_only() {
        let s = toy_state();
        let mut p = ProductPoint::identity(5, 4);
        assert!(apply_composite(&p, &s).unwrap().max_deviation(&s) < 1e-12);
        p.global_translation = Vec3::new(5.0, 0.0, 0.0);
        let out = apply_composite(&p, &s).unwrap();
        assert_eq!(out.receptor, s.receptor);
        for (a, b) in out.ligand.frames.iter().zip(&s.ligand.frames) {
            assert!((a.position - b.position - Vec3::new(5.0, 0.0, 0.0)).norm() < 1e-12);
            assert!((a.orientation.matrix() - b.orientation.matrix()).amax() < 1e-15);
        }
    }

    #[test]
    fn composite_dimension_mismatch() {
        let s = toy_state();
        let p = ProductPoint::identity(4, 4);
        assert!(matches!(apply_composite(&p, &s), Err(Error::Correspondence(_))));
    }

    #[test]
    fn frame_from_backbone_roundtrip() {
        let f = Frame::new(Vec3::new(1.0, 2.0, 3.0), exp_so3(&Vec3::new(0.3, -1.1, 0.7)));
        let [n, ca, c] = f.backbone_atoms();
        assert!(((n - ca).norm() - CA_N_BOND).abs() < 1e-12);
        assert!(((c - ca).norm() - CA_C_BOND).abs() < 1e-12);
        let g = Frame::from_backbone(&n, &ca, &c).unwrap();
        assert!((g.position - f.position).norm() < 1e-12);
        assert!(g.orientation.distance(&f.orientation) < 1e-7);
        assert!(Frame::from_backbone(&Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), &Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn disentangle_identity_and_pure_rotation() {
        let s = toy_state();
        let (aligned, removed) = kabsch_disentangle(&s.ligand.frames, &s.ligand.frames).unwrap();
        assert!(removed.rotation.distance(&Rotation::identity()) < 1e-7);
        for (a, b) in aligned.iter().zip(&s.ligand.frames) {
            assert!((a.position - b.position).norm() < 1e-9);
        }

        let q = exp_so3(&Vec3::new(0.2, -0.9, 0.4));
        let c = s.ligand.center();
        let rotated: Vec<Frame> = s
            .ligand
            .frames
            .iter()
            .map(|f| Frame::new(q * (f.position - c) + c, q * f.orientation))
            .collect();
        let (aligned, removed) = kabsch_disentangle(&rotated, &s.ligand.frames).unwrap();
        for (a, b) in aligned.iter().zip(&s.ligand.frames) {
            assert!((a.position - b.position).norm() < 1e-9);
            assert!(a.orientation.distance(&b.orientation) < 1e-7);
        }
        assert!(removed.rotation.distance(&q) < 1e-8);
    }
}
