//! Reverse-time generation of docked complexes.
//!
//! Each step first flexes every residue along its predicted residual,
//! removes any rigid-body drift this causes in the ligand, and then moves
//! the ligand pose with one reverse-SDE step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffusion::apply_residue_corrections;
use crate::error::{Error, Result};
use crate::geometry::{
    apply_ligand_translation, apply_rigid_rotation, centroid, kabsch, kabsch_disentangle, Chain, ComplexState,
    RigidTransform, Rotation, Vec3,
};
use crate::model::{BnMode, ComplexFeatures, ModelInput, ScoreModel, ScoreOutput};
use crate::schedule::{ExponentialFlex, FlexRateMode, FlexSchedule, GlobalSchedule, NoiseKind};
use crate::so3::{igso3_score, uniform_so3_sample, Igso3Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SamplerMode {
    #[default]
    Stochastic,
    /// Drift only: the global noise term is dropped.
    Deterministic,
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(Self::Stochastic),
            "deterministic" => Ok(Self::Deterministic),
            _ => Err(Error::Parameter(format!("unknown sampler mode `{s}` (stochastic | deterministic)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub n_steps: usize,
    pub mode: SamplerMode,
    pub schedule: GlobalSchedule,
    pub rate_mode: FlexRateMode,
    /// Overrides the predicted flexing rate.
    pub beta: Option<f64>,
    pub seed: u64,
    pub candidates: usize,
    pub threads: usize,
    /// Inject global noise on the last step too.
    pub final_step_noise: bool,
    /// Batch-norm statistics for model scores.
    pub bn_stats: BnMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_steps: 40,
            mode: SamplerMode::Stochastic,
            schedule: GlobalSchedule::default(),
            rate_mode: FlexRateMode::default(),
            beta: None,
            seed: 0,
            candidates: 1,
            threads: 1,
            final_step_noise: false,
            bn_stats: BnMode::Batch,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::Parameter(format!("n_steps must be at least 2, got {}", self.n_steps)));
        }
        if self.candidates == 0 {
            return Err(Error::Parameter("need at least one candidate".into()));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Parameter(format!("beta must be positive, got {b}")));
            }
        }
        self.schedule.validate()
    }

    /// Time at which the final structure is scored for confidence.
    pub fn confidence_time(&self) -> f64 {
        1.0 - 1.0 / self.n_steps as f64
    }
}

/// Everything a score source may condition on at one step.
#[derive(Clone, Copy, Debug)]
pub struct ScoreRequest<'a> {
    pub state: &'a ComplexState,
    pub t: f64,
    pub tau: f64,
    pub alpha: f64,
    pub sigma_tr: f64,
    pub sigma_rot: f64,
}

pub trait ScoreSource: Sync {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreOutput>;

    /// Predicted clddt of a final structure, if the source has one.
    fn confidence(&self, _req: &ScoreRequest) -> Result<Option<f64>> {
        Ok(None)
    }
}

/// The trained network.
pub struct ModelScore<'a> {
    pub model: &'a ScoreModel,
    pub features: &'a ComplexFeatures,
    pub table: &'a Igso3Table,
    /// Batch-norm statistics used at inference.
    pub bn: BnMode,
}

impl<'a> ModelScore<'a> {
    /// Per-complex batch-norm statistics, as during training.
    pub fn new(model: &'a ScoreModel, features: &'a ComplexFeatures, table: &'a Igso3Table) -> Self {
        Self { model, features, table, bn: BnMode::Batch }
    }

    fn forward(&self, req: &ScoreRequest) -> Result<ScoreOutput> {
        let rot_norm = self.table.expected_score_norm(req.sigma_rot);
        let input =
            ModelInput::new(req.state, self.features, &self.model.config, req.t, req.alpha, req.sigma_tr, rot_norm)?;
        Ok(self.model.forward_mode(&input, self.bn))
    }
}

impl ScoreSource for ModelScore<'_> {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreOutput> {
        self.forward(req)
    }

    fn confidence(&self, req: &ScoreRequest) -> Result<Option<f64>> {
        let out = self.forward(req)?;
        Ok(out.clddt_valid.then_some(out.clddt))
    }
}

/// Closed-form scores toward a known bound complex: the exact Gaussian
/// score of the ligand pose and the exact remaining residue offsets. The
/// bound complex is first superposed onto the current receptor.
#[derive(Clone, Debug)]
pub struct OracleScore {
    pub bound: ComplexState,
    pub global: bool,
    pub residues: bool,
}

impl OracleScore {
    pub fn new(bound: ComplexState) -> Self {
        Self { bound, global: true, residues: true }
    }
}

/// Offsets that carry each frame of `current` onto the bound chain after
/// the bound chain is superposed onto `current`.
fn residue_residuals(current: &Chain, bound: &Chain) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    let fit = kabsch(&bound.positions(), &current.positions(), None)?;
    Ok(current
        .frames
        .iter()
        .zip(&bound.frames)
        .map(|(c, b)| {
            let target = b.transformed(&fit);
            (target.position - c.position, (target.orientation * c.orientation.inverse()).log())
        })
        .unzip())
}

impl ScoreSource for OracleScore {
    fn score(&self, req: &ScoreRequest) -> Result<ScoreOutput> {
        let s = req.state;
        s.same_shape(&self.bound)?;
        let (nr, nl) = (s.n_receptor(), s.n_ligand());
        let mut out = ScoreOutput {
            global_tr: Vec3::zeros(),
            global_rot: Vec3::zeros(),
            receptor_tr: vec![Vec3::zeros(); nr],
            receptor_rot: vec![Vec3::zeros(); nr],
            ligand_tr: vec![Vec3::zeros(); nl],
            ligand_rot: vec![Vec3::zeros(); nl],
            clddt: 0.0,
            clddt_valid: false,
        };
        // Bound complex in the frame of the current receptor.
        let frame = kabsch(&self.bound.receptor.positions(), &s.receptor.positions(), None)?;
        let bound = self.bound.transformed(&frame);
        if self.global {
            let cur = s.ligand.positions();
            let tgt = bound.ligand.positions();
            let (cc, ct) = (centroid(&cur), centroid(&tgt));
            out.global_tr = -(cc - ct) / (req.sigma_tr * req.sigma_tr);
            let centered = |p: &[Vec3], c: Vec3| p.iter().map(|x| x - c).collect::<Vec<_>>();
            let fit = kabsch(&centered(&tgt, ct), &centered(&cur, cc), None)?;
            out.global_rot = igso3_score(&fit.rotation, req.sigma_rot);
        }
        if self.residues {
            (out.receptor_tr, out.receptor_rot) = residue_residuals(&s.receptor, &bound.receptor)?;
            (out.ligand_tr, out.ligand_rot) = residue_residuals(&s.ligand, &bound.ligand)?;
        }
        Ok(out)
    }
}

/// Product-space increment applied in one step.
#[derive(Clone, Debug, PartialEq)]
pub struct Increment {
    pub global_translation: Vec3,
    /// Axis-angle of the global rotation.
    pub global_rotation: Vec3,
    /// Fraction of the predicted residue residual applied.
    pub residue_gain: f64,
    /// Rigid motion removed from the ligand after the residue update.
    pub removed: RigidTransform,
}

#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub states: Vec<ComplexState>,
    pub increments: Vec<Increment>,
    /// `(t, tau)` of every snapshot.
    pub times: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct SampleResult {
    pub final_state: ComplexState,
    pub trajectory: Trajectory,
    pub clddt: Option<f64>,
}

/// Receptor and residue shapes as given; the ligand gets a uniformly random
/// orientation and its center is placed at the receptor center plus
/// isotropic Gaussian noise of the largest translation scale.
pub fn initialize<R: Rng + ?Sized>(unbound: &ComplexState, schedule: &GlobalSchedule, rng: &mut R) -> ComplexState {
    let q = uniform_so3_sample(rng);
    let z = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let target = unbound.receptor.center() + z * schedule.tr_max;
    let lc = unbound.ligand_center();
    let pose = RigidTransform::new(q, target - q * lc);
    ComplexState::new(unbound.receptor.clone(), unbound.ligand.transformed(&pose))
}

/// One coupled reverse step from `(t, tau)` to `(t - dt, tau - dt)`.
///
/// `noise` supplies the standard normal draws for the global update; pass
/// `None` for a drift-only step.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &ComplexState,
    score: &ScoreOutput,
    t: f64,
    tau: f64,
    dt: f64,
    flex: &dyn FlexSchedule,
    schedule: &GlobalSchedule,
    noise: Option<(Vec3, Vec3)>,
    last: bool,
    index: usize,
) -> Result<(ComplexState, Increment)> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("step size must be positive, got {dt}")));
    }
    if !score.is_finite() {
        return Err(Error::NonFinite { step: index, detail: format!("score at t={t:.4}") });
    }
    let gain = if last { 1.0 } else { (dt * flex.rate(tau)).min(1.0) };
    let flexed = apply_residue_corrections(
        state,
        (&score.receptor_tr, &score.receptor_rot),
        (&score.ligand_tr, &score.ligand_rot),
        gain,
    )?;
    let (aligned, removed) = kabsch_disentangle(&flexed.ligand.frames, &state.ligand.frames)?;
    let flexed = ComplexState::new(flexed.receptor, flexed.ligand.with_frames(aligned));

    let g2_tr = schedule.g_squared(t, NoiseKind::Translation);
    let g2_rot = schedule.g_squared(t, NoiseKind::Rotation);
    let mut d_rot = score.global_rot * (g2_rot * dt);
    let mut d_tr = score.global_tr * (g2_tr * dt);
    if let Some((z_tr, z_rot)) = noise {
        d_rot += z_rot * (g2_rot * dt).sqrt();
        d_tr += z_tr * (g2_tr * dt).sqrt();
    }
    let next = apply_ligand_translation(&d_tr, &apply_rigid_rotation(&Rotation::exp(&d_rot), &flexed));
    if next.positions().iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFinite { step: index, detail: "coordinates after update".into() });
    }
    Ok((next, Increment { global_translation: d_tr, global_rotation: d_rot, residue_gain: gain, removed }))
}

fn normal3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Runs `n_steps` coupled steps on a uniform grid from `t = tau = 1` to 0
/// and scores the final structure.
pub fn sample<R: Rng + ?Sized>(
    unbound: &ComplexState,
    source: &dyn ScoreSource,
    config: &SamplerConfig,
    beta: f64,
    rng: &mut R,
) -> Result<SampleResult> {
    config.validate()?;
    let flex = ExponentialFlex::with_mode(beta, config.rate_mode)?;
    let sched = &config.schedule;
    let n = config.n_steps;
    let dt = 1.0 / n as f64;
    let mut state = initialize(unbound, sched, rng);
    let mut traj = Trajectory::default();
    traj.states.push(state.clone());
    traj.times.push((1.0, 1.0));
    for k in 0..n {
        let t = 1.0 - k as f64 * dt;
        let req = ScoreRequest {
            state: &state,
            t,
            tau: t,
            alpha: flex.alpha(t),
            sigma_tr: sched.sigma_tr(t),
            sigma_rot: sched.sigma_rot(t),
        };
        let score = source.score(&req)?;
        let last = k + 1 == n;
        let noise = match config.mode {
            SamplerMode::Stochastic if !last || config.final_step_noise => Some((normal3(rng), normal3(rng))),
            _ => None,
        };
        let (next, inc) = step(&state, &score, t, t, dt, &flex, sched, noise, last, k)?;
        state = next;
        traj.states.push(state.clone());
        traj.increments.push(inc);
        let t_next = 1.0 - (k + 1) as f64 * dt;
        traj.times.push((t_next, t_next));
    }
    let tc = config.confidence_time();
    let req = ScoreRequest {
        state: &state,
        t: tc,
        tau: tc,
        alpha: flex.alpha(tc),
        sigma_tr: sched.sigma_tr(tc),
        sigma_rot: sched.sigma_rot(tc),
    };
    let clddt = source.confidence(&req)?;
    Ok(SampleResult { final_state: state, trajectory: traj, clddt })
}

/// Candidate indices ordered by descending score; ties and missing scores
/// keep index order, missing scores last.
pub fn rank_candidates(scores: &[Option<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let key = |i: usize| scores[i].filter(|v| !v.is_nan());
    idx.sort_by(|&a, &b| match (key(a), key(b)) {
        (Some(x), Some(y)) => y.partial_cmp(&x).expect("not NaN").then(a.cmp(&b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(&b),
    });
    idx
}

/// Random stream of candidate `index`: independent of thread count.
pub fn candidate_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Samples `config.candidates` structures, spread over `config.threads`
/// worker threads. Results are in candidate order.
pub fn sample_candidates(
    unbound: &ComplexState,
    source: &dyn ScoreSource,
    config: &SamplerConfig,
    beta: f64,
) -> Result<Vec<SampleResult>> {
    config.validate()?;
    let n = config.candidates;
    let threads = config.threads.clamp(1, n);
    let run = |i: usize| sample(unbound, source, config, beta, &mut candidate_rng(config.seed, i));
    if threads == 1 {
        return (0..n).map(run).collect();
    }
    let mut slots: Vec<Option<Result<SampleResult>>> = (0..n).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                let run = &run;
                s.spawn(move || (w..n).step_by(threads).map(|i| (i, run(i))).collect::<Vec<_>>())
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("sampling worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every candidate sampled")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::superpose_unbound;
    use crate::metrics::{irmsd, INTERFACE_CUTOFF};
    use crate::synthetic::{synthetic_pair, SyntheticSpec};

    fn pair(seed: u64) -> (ComplexState, ComplexState) {
        let p = synthetic_pair(&SyntheticSpec::new(10, 9, 0.7, seed)).unwrap();
        (p.bound, p.unbound)
    }

    #[test]
    fn zero_score_drift_only_leaves_state_unchanged() {
        let (_, unbound) = pair(1);
        let n = (unbound.n_receptor(), unbound.n_ligand());
        let score = ScoreOutput {
            global_tr: Vec3::zeros(),
            global_rot: Vec3::zeros(),
            receptor_tr: vec![Vec3::zeros(); n.0],
            receptor_rot: vec![Vec3::zeros(); n.0],
            ligand_tr: vec![Vec3::zeros(); n.1],
            ligand_rot: vec![Vec3::zeros(); n.1],
            clddt: 0.0,
            clddt_valid: false,
        };
        let flex = ExponentialFlex::new(3.0).unwrap();
        let (next, _) = step(&unbound, &score, 0.5, 0.5, 0.025, &flex, &GlobalSchedule::default(), None, false, 0).unwrap();
        assert!(next.max_deviation(&unbound) < 1e-10);
    }

    #[test]
    fn non_finite_score_reports_step() {
        let (bound, unbound) = pair(2);
        let oracle = OracleScore::new(bound);
        let req = ScoreRequest { state: &unbound, t: 0.5, tau: 0.5, alpha: 0.5, sigma_tr: 3.0, sigma_rot: 0.3 };
        let mut score = oracle.score(&req).unwrap();
        score.global_tr.x = f64::NAN;
        let flex = ExponentialFlex::new(3.0).unwrap();
        let err = step(&unbound, &score, 0.5, 0.5, 0.025, &flex, &GlobalSchedule::default(), None, false, 7).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 7, .. }));
    }

    #[test]
    fn gaussian_oracle_drives_ligand_center_home() {
        let (bound, unbound) = pair(3);
        let sup = superpose_unbound(&bound, &unbound).unwrap();
        let oracle = OracleScore { bound: bound.clone(), global: true, residues: false };
        let cfg = SamplerConfig { mode: SamplerMode::Deterministic, ..SamplerConfig::default() };
        let start = ComplexState::new(bound.receptor.clone(), sup.ligand.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let res = sample(&start, &oracle, &cfg, 3.0, &mut rng).unwrap();
        let d = (res.final_state.ligand_center() - bound.ligand_center()).norm();
        assert!(d < 0.1, "{d}");
    }

    #[test]
    fn exact_residual_oracle_reaches_bound_shape() {
        let (bound, unbound) = pair(5);
        let oracle = OracleScore { bound: bound.clone(), global: false, residues: true };
        let cfg = SamplerConfig { mode: SamplerMode::Deterministic, ..SamplerConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let res = sample(&unbound, &oracle, &cfg, 2.0, &mut rng).unwrap();
        for (c, b) in [(&res.final_state.receptor, &bound.receptor), (&res.final_state.ligand, &bound.ligand)] {
            let r = crate::geometry::superposed_rmsd(&c.positions(), &b.positions()).unwrap();
            assert!(r < 1e-3, "{r}");
        }
    }

    #[test]
    fn full_oracle_docks_and_receptor_stays_put() {
        let (bound, unbound) = pair(7);
        let oracle = OracleScore::new(bound.clone());
        let cfg = SamplerConfig::default();
        let res = sample(&unbound, &oracle, &cfg, 2.0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(res.trajectory.states.len(), cfg.n_steps + 1);
        assert_eq!(res.trajectory.times.last(), Some(&(0.0, 0.0)));
        let r = irmsd(&res.final_state, &bound, INTERFACE_CUTOFF).unwrap();
        assert!(r < 0.5, "{r}");
        // Receptor moves only through its own residue updates.
        let first = &res.trajectory.states[0].receptor;
        assert_eq!(first.positions(), unbound.receptor.positions());
    }

    #[test]
    fn equal_seeds_give_identical_trajectories_across_threads() {
        let (bound, unbound) = pair(9);
        let oracle = OracleScore::new(bound);
        let cfg = SamplerConfig { candidates: 4, n_steps: 10, ..SamplerConfig::default() };
        let a = sample_candidates(&unbound, &oracle, &cfg, 2.0).unwrap();
        let b = sample_candidates(&unbound, &oracle, &SamplerConfig { threads: 3, ..cfg }, 2.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.final_state, y.final_state);
        }
        assert_ne!(a[0].final_state, a[1].final_state);
    }

    #[test]
    fn ranking_orders_and_breaks_ties() {
        assert_eq!(rank_candidates(&[Some(0.3)]), vec![0]);
        assert_eq!(rank_candidates(&[Some(0.2), Some(0.9), Some(0.5)]), vec![1, 2, 0]);
        assert_eq!(rank_candidates(&[Some(0.5), None, Some(0.5), Some(f64::NAN)]), vec![0, 2, 1, 3]);
    }

    #[test]
    fn initial_ligand_offsets_have_the_largest_scale() {
        let (_, unbound) = pair(10);
        let sched = GlobalSchedule::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let rc = unbound.receptor.center();
        let mut m2 = [0.0; 3];
        for _ in 0..n {
            let s = initialize(&unbound, &sched, &mut rng);
            assert_eq!(s.receptor, unbound.receptor);
            let d = s.ligand_center() - rc;
            for k in 0..3 {
                m2[k] += d[k] * d[k] / n as f64;
            }
        }
        for v in m2 {
            assert!((v.sqrt() / sched.tr_max - 1.0).abs() < 0.05, "{v}");
        }
    }
}
