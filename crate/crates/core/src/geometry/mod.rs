//! Rigid-body algebra: rotations, residue frames, the hierarchical
//! (global + per-residue) transforms acting on a complex, and Kabsch
//! superposition.

mod kabsch;
mod rotation;
mod state;

pub use kabsch::{centroid, kabsch, rmsd, superposed_rmsd, weighted_rmsd, RigidTransform};
pub use rotation::{exp_so3, geodesic_interpolate, hat, log_so3, Rotation, Vec3};
pub use state::{
    apply_composite, apply_ligand_translation, apply_residue_transforms, apply_rigid_rotation, kabsch_disentangle,
    AminoAcid, Chain, ComplexState, Frame, LocalTransform, ProductPoint, ResidueInfo, CA_C_BOND, CA_N_BOND,
    N_CA_C_ANGLE_DEG,
};
