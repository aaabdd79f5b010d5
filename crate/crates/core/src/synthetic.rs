//! Synthetic unbound/bound pairs for tests and toy training.
//!
//! Each chain is a kinked helix; the bound complex packs the two helices
//! side by side. Unbound chains are hinge-deformed copies of the bound ones
//! placed in arbitrary rigid poses. The hinge angle and the fraction of
//! flexible residue types both grow with `flexibility`, so sequence
//! composition carries information about the expected conformational change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diffusion::superpose_unbound;
use crate::error::{Error, Result};
use crate::geometry::{AminoAcid, Chain, ComplexState, Frame, ResidueInfo, RigidTransform, Rotation, Vec3};
use crate::metrics::{irmsd, INTERFACE_CUTOFF};
use crate::so3::{uniform_so3_sample, uniform_unit_vector};

const HELIX_RADIUS: f64 = 2.3;
const HELIX_RISE: f64 = 1.5;
const HELIX_TWIST_DEG: f64 = 100.0;
const CHAIN_SEPARATION: f64 = 10.0;
const MAX_HINGE_DEG: f64 = 40.0;

/// GLY, PRO, SER, ASN, ASP.
const FLEXIBLE: [usize; 5] = [7, 14, 15, 2, 3];
/// ALA, LEU, ILE, VAL, PHE, TRP, MET, GLU, LYS.
const RIGID: [usize; 9] = [0, 10, 9, 19, 13, 17, 12, 6, 11];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n_receptor: usize,
    pub n_ligand: usize,
    /// In `[0, 1]`; scales the hinge deformation between bound and unbound.
    pub flexibility: f64,
    /// Per-residue positional jitter of the unbound chains (Angstrom).
    pub jitter: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_receptor: usize, n_ligand: usize, flexibility: f64, seed: u64) -> Self {
        Self { n_receptor, n_ligand, flexibility, jitter: 0.05, seed }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticPair {
    pub name: String,
    pub bound: ComplexState,
    /// Unbound chains in their own arbitrary poses.
    pub unbound: ComplexState,
    pub flexibility: f64,
    /// Interface RMSD between the superposed unbound chains and the bound
    /// complex.
    pub irmsd: f64,
}

/// Calpha trace of a helix along `z` with a bend of `kink` radians about the
/// `x` axis at the middle; includes one padding point at each end.
fn helix_trace(n: usize, phase: f64, kink: f64) -> Vec<Vec3> {
    let twist = HELIX_TWIST_DEG.to_radians();
    let mid = (n + 2) / 2;
    let pts: Vec<Vec3> = (0..n + 2)
        .map(|k| {
            let a = phase + twist * k as f64;
            Vec3::new(HELIX_RADIUS * a.cos(), HELIX_RADIUS * a.sin(), HELIX_RISE * k as f64)
        })
        .collect();
    let pivot = Vec3::new(0.0, 0.0, HELIX_RISE * mid as f64);
    let r = Rotation::from_axis_angle(&Vec3::x(), kink);
    pts.iter().enumerate().map(|(k, p)| if k > mid { r * (p - pivot) + pivot } else { *p }).collect()
}

fn hinge(trace: &[Vec3], axis: &Vec3, angle: f64) -> Vec<Vec3> {
    let mid = trace.len() / 2;
    let pivot = trace[mid];
    let r = Rotation::from_axis_angle(axis, angle);
    trace.iter().enumerate().map(|(k, p)| if k > mid { r * (p - pivot) + pivot } else { *p }).collect()
}

/// Frames from a padded trace: pseudo N and C atoms toward the previous and
/// next Calpha.
fn frames_from_trace(padded: &[Vec3]) -> Result<Vec<Frame>> {
    (1..padded.len() - 1)
        .map(|k| {
            let ca = padded[k];
            let n = ca + (padded[k - 1] - ca) * 0.38;
            let c = ca + (padded[k + 1] - ca) * 0.40;
            Frame::from_backbone(&n, &ca, &c)
        })
        .collect()
}

fn sequence(n: usize, flexibility: f64, rng: &mut ChaCha8Rng) -> Vec<ResidueInfo> {
    (0..n)
        .map(|i| {
            let pool: &[usize] = if rng.random::<f64>() < flexibility { &FLEXIBLE } else { &RIGID };
            ResidueInfo::new(i as i32 + 1, AminoAcid::from_index(pool[rng.random_range(0..pool.len())]))
        })
        .collect()
}

fn random_pose(rng: &mut ChaCha8Rng) -> RigidTransform {
    let n = Normal::new(0.0, 10.0).expect("valid std");
    RigidTransform::new(uniform_so3_sample(rng), Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng)))
}

pub fn synthetic_pair(spec: &SyntheticSpec) -> Result<SyntheticPair> {
    if spec.n_receptor < 3 || spec.n_ligand < 3 {
        return Err(Error::Parameter("synthetic chains need at least 3 residues".into()));
    }
    if !(0.0..=1.0).contains(&spec.flexibility) || spec.jitter < 0.0 {
        return Err(Error::Parameter(format!("bad synthetic spec {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let kink = |rng: &mut ChaCha8Rng| rng.random_range(0.2..0.6);
    let rec_trace = helix_trace(spec.n_receptor, rng.random_range(0.0..std::f64::consts::TAU), kink(&mut rng));
    let lig_local = helix_trace(spec.n_ligand, rng.random_range(0.0..std::f64::consts::TAU), kink(&mut rng));
    let tilt = Rotation::from_axis_angle(&Vec3::y(), rng.random_range(-0.3..0.3));
    let shift = Vec3::new(CHAIN_SEPARATION, 0.0, rng.random_range(-2.0..2.0));
    let lig_trace: Vec<Vec3> = lig_local.iter().map(|p| tilt * p + shift).collect();

    let rec_res = sequence(spec.n_receptor, spec.flexibility, &mut rng);
    let lig_res = sequence(spec.n_ligand, spec.flexibility, &mut rng);
    let bound = ComplexState::new(
        Chain::new('A', rec_res.clone(), frames_from_trace(&rec_trace)?)?,
        Chain::new('B', lig_res.clone(), frames_from_trace(&lig_trace)?)?,
    );

    let jitter = Normal::new(0.0, spec.jitter.max(1e-12)).expect("valid std");
    let deform = |trace: &[Vec3], rng: &mut ChaCha8Rng| -> Vec<Vec3> {
        let axis = uniform_unit_vector(rng);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let angle = sign * spec.flexibility * MAX_HINGE_DEG.to_radians() * rng.random_range(0.8..1.2);
        hinge(trace, &axis, angle)
            .into_iter()
            .map(|p| {
                if spec.jitter > 0.0 {
                    p + Vec3::new(jitter.sample(rng), jitter.sample(rng), jitter.sample(rng))
                } else {
                    p
                }
            })
            .collect()
    };
    let rec_u = deform(&rec_trace, &mut rng);
    let lig_u = deform(&lig_trace, &mut rng);
    let rec_pose = random_pose(&mut rng);
    let lig_pose = random_pose(&mut rng);
    let unbound = ComplexState::new(
        Chain::new('A', rec_res, frames_from_trace(&rec_u)?)?.transformed(&rec_pose),
        Chain::new('B', lig_res, frames_from_trace(&lig_u)?)?.transformed(&lig_pose),
    );
    let sup = superpose_unbound(&bound, &unbound)?;
    let irmsd = irmsd(&sup, &bound, INTERFACE_CUTOFF)?;
    Ok(SyntheticPair { name: format!("synth{:04}", spec.seed), bound, unbound, flexibility: spec.flexibility, irmsd })
}

/// `count` pairs with flexibility spread uniformly over `[0, 1)`.
pub fn synthetic_set(count: usize, n_receptor: usize, n_ligand: usize, seed: u64) -> Result<Vec<SyntheticPair>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let flex = (k as f64 + rng.random::<f64>()) / count as f64;
            synthetic_pair(&SyntheticSpec::new(n_receptor, n_ligand, flex, seed.wrapping_mul(1000).wrapping_add(k as u64)))
        })
        .collect()
}
