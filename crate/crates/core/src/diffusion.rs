//! Forward noising on the product space and the regression targets used
//! for training.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{
    apply_ligand_translation, apply_residue_transforms, apply_rigid_rotation, kabsch, Chain, ComplexState, Frame,
    LocalTransform, Rotation, Vec3,
};
use crate::schedule::{FlexSchedule, GlobalSchedule};
use crate::so3::{igso3_sample, igso3_score, Igso3Table};

/// Superposes each unbound chain onto its bound counterpart (C-alpha Kabsch)
/// so residue offsets measure flexing only.
pub fn superpose_unbound(bound: &ComplexState, unbound: &ComplexState) -> Result<ComplexState> {
    bound.same_shape(unbound)?;
    let fit = |u: &Chain, b: &Chain| -> Result<Chain> {
        let t = kabsch(&u.positions(), &b.positions(), None)?;
        Ok(u.transformed(&t))
    };
    Ok(ComplexState::new(fit(&unbound.receptor, &bound.receptor)?, fit(&unbound.ligand, &bound.ligand)?))
}

/// Per-residue transforms taking the unbound frames to the bound ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueEndpoints {
    pub receptor: Vec<LocalTransform>,
    pub ligand: Vec<LocalTransform>,
}

fn chain_offsets(bound: &Chain, reference: &[Frame]) -> Vec<LocalTransform> {
    bound
        .frames
        .iter()
        .zip(reference)
        .map(|(b, u)| LocalTransform::new(b.position - u.position, b.orientation * u.orientation.inverse()))
        .collect()
}

/// Receptor: `t = x - x_u`, `R = O O_u^-1`. The ligand reference is the
/// unbound ligand rotated by `global_r` about its center.
pub fn residue_targets_from_states(
    bound: &ComplexState,
    unbound_superposed: &ComplexState,
    global_r: &Rotation,
) -> Result<ResidueEndpoints> {
    bound.same_shape(unbound_superposed)?;
    let rotated = apply_rigid_rotation(global_r, unbound_superposed);
    Ok(ResidueEndpoints {
        receptor: chain_offsets(&bound.receptor, &unbound_superposed.receptor.frames),
        ligand: chain_offsets(&bound.ligand, &rotated.ligand.frames),
    })
}

impl ResidueEndpoints {
    /// Local transforms at interpolation weight `alpha`: the offset from the
    /// unbound frame that remains, `(1 - alpha)` of the full one, with the
    /// rotation taken along the geodesic.
    pub fn at(&self, alpha: f64) -> (Vec<LocalTransform>, Vec<LocalTransform>) {
        let scale = |l: &LocalTransform| {
            LocalTransform::new(l.translation * (1.0 - alpha), Rotation::exp(&(l.rotation.log() * (1.0 - alpha))))
        };
        (self.receptor.iter().map(scale).collect(), self.ligand.iter().map(scale).collect())
    }
}

/// Global pose perturbation applied to the ligand.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalNoise {
    pub translation: Vec3,
    pub rotation: Rotation,
}

impl GlobalNoise {
    pub fn sample<R: Rng + ?Sized>(sigma_tr: f64, sigma_rot: f64, table: &Igso3Table, rng: &mut R) -> Self {
        let translation =
            Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * sigma_tr;
        let rotation = igso3_sample(table, &Rotation::identity(), sigma_rot, rng);
        Self { translation, rotation }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TargetSet {
    pub global_tr_score: Vec3,
    pub global_rot_score: Vec3,
    pub receptor_tr: Vec<Vec3>,
    pub receptor_rot: Vec<Vec3>,
    pub ligand_tr: Vec<Vec3>,
    pub ligand_rot: Vec<Vec3>,
}

impl TargetSet {
    pub fn is_finite(&self) -> bool {
        let all = |v: &[Vec3]| v.iter().all(|x| x.iter().all(|c| c.is_finite()));
        all(&[self.global_tr_score, self.global_rot_score])
            && all(&self.receptor_tr)
            && all(&self.receptor_rot)
            && all(&self.ligand_tr)
            && all(&self.ligand_rot)
    }
}

#[derive(Clone, Debug)]
pub struct NoisedSample {
    pub noisy_state: ComplexState,
    pub t: f64,
    pub tau: f64,
    pub alpha: f64,
    pub sigma_tr: f64,
    pub sigma_rot: f64,
    pub noise: GlobalNoise,
    /// Ligand center about which the global rotation was applied.
    pub rotation_center: Vec3,
    pub targets: TargetSet,
}

/// Applies residue corrections scaled by `gain`: `x + gain * dt` and
/// `exp(gain * dr) O`.
pub fn apply_residue_corrections(
    state: &ComplexState,
    receptor: (&[Vec3], &[Vec3]),
    ligand: (&[Vec3], &[Vec3]),
    gain: f64,
) -> Result<ComplexState> {
    let fix = |chain: &Chain, (tr, rot): (&[Vec3], &[Vec3])| -> Result<Chain> {
        if tr.len() != chain.len() || rot.len() != chain.len() {
            return Err(Error::Correspondence(format!(
                "{} corrections for chain {} of length {}",
                tr.len(),
                chain.id,
                chain.len()
            )));
        }
        let frames = chain
            .frames
            .iter()
            .zip(tr.iter().zip(rot))
            .map(|(f, (dt, dr))| Frame::new(f.position + dt * gain, Rotation::exp(&(dr * gain)) * f.orientation))
            .collect();
        Ok(chain.with_frames(frames))
    };
    Ok(ComplexState::new(fix(&state.receptor, receptor)?, fix(&state.ligand, ligand)?))
}

/// Noises `(bound, unbound_superposed)` at global time `t` and local time
/// `tau` with freshly sampled global noise.
#[allow(clippy::too_many_arguments)]
pub fn forward_noise<R: Rng + ?Sized>(
    bound: &ComplexState,
    unbound_superposed: &ComplexState,
    t: f64,
    tau: f64,
    flex: &dyn FlexSchedule,
    schedule: &GlobalSchedule,
    table: &Igso3Table,
    rng: &mut R,
) -> Result<NoisedSample> {
    let noise = GlobalNoise::sample(schedule.sigma_tr(t), schedule.sigma_rot(t), table, rng);
    forward_noise_with(bound, unbound_superposed, t, tau, flex, schedule, &noise)
}

/// As [`forward_noise`] with caller-supplied global noise.
pub fn forward_noise_with(
    bound: &ComplexState,
    unbound_superposed: &ComplexState,
    t: f64,
    tau: f64,
    flex: &dyn FlexSchedule,
    schedule: &GlobalSchedule,
    noise: &GlobalNoise,
) -> Result<NoisedSample> {
    if !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&tau) {
        return Err(Error::Parameter(format!("times must lie in [0, 1], got t={t} tau={tau}")));
    }
    let endpoints = residue_targets_from_states(bound, unbound_superposed, &Rotation::identity())?;
    let alpha = flex.alpha(tau);
    let (receptor_local, ligand_local) = endpoints.at(alpha);

    let flexed = if alpha == 0.0 {
        bound.clone()
    } else {
        apply_residue_transforms(&receptor_local, &ligand_local, unbound_superposed)?
    };
    let rotation_center = flexed.ligand_center();
    let noisy_state = apply_ligand_translation(&noise.translation, &apply_rigid_rotation(&noise.rotation, &flexed));

    let sigma_tr = schedule.sigma_tr(t);
    let sigma_rot = schedule.sigma_rot(t);
    let rn = noise.rotation;
    // Remaining offset to the bound frame is alpha times the full offset;
    // ligand offsets are carried into the noisy global frame.
    let residual = |l: &LocalTransform| (l.translation * alpha, l.rotation.log() * alpha);
    let (receptor_tr, receptor_rot): (Vec<_>, Vec<_>) = endpoints.receptor.iter().map(residual).unzip();
    let (ligand_tr, ligand_rot): (Vec<_>, Vec<_>) =
        endpoints.ligand.iter().map(|l| residual(l)).map(|(a, b)| (rn * a, rn * b)).unzip();

    let targets = TargetSet {
        global_tr_score: -noise.translation / (sigma_tr * sigma_tr),
        global_rot_score: igso3_score(&rn, sigma_rot),
        receptor_tr,
        receptor_rot,
        ligand_tr,
        ligand_rot,
    };
    Ok(NoisedSample { noisy_state, t, tau, alpha, sigma_tr, sigma_rot, noise: *noise, rotation_center, targets })
}

impl NoisedSample {
    /// Bound residue configuration carried to the noisy global pose.
    pub fn bound_at_pose(&self) -> Result<ComplexState> {
        let t = &self.targets;
        apply_residue_corrections(
            &self.noisy_state,
            (&t.receptor_tr, &t.receptor_rot),
            (&t.ligand_tr, &t.ligand_rot),
            1.0,
        )
    }
}

/// Draws training times: shared `t = tau = u` or independent uniforms.
pub fn sample_times<R: Rng + ?Sized>(rng: &mut R, shared: bool) -> (f64, f64) {
    let u: f64 = rng.random();
    if shared {
        (u, u)
    } else {
        (u, rng.random())
    }
}
