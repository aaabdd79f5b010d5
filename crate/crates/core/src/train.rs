//! Training loop: noised examples, exact gradients and Adam updates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Real, Tape, Var};
use crate::diffusion::{forward_noise_with, sample_times, superpose_unbound, GlobalNoise, NoisedSample};
use crate::error::{Error, Result};
use crate::geometry::ComplexState;
use crate::loss::{training_loss, FapeParams, LossBreakdown, LossContext, LossTerms, LossWeights};
use crate::metrics::{clddt, irmsd, INTERFACE_CUTOFF};
use crate::model::{BnMode, ComplexFeatures, ModelInput, ScoreModel};
use crate::nma::NmaParams;
use crate::optim::{clip_grad_norm, Adam};
use crate::schedule::{beta_from_irmsd, ExponentialFlex, FlexRateMode, GlobalSchedule};
use crate::so3::Igso3Table;

/// One training complex with its unbound chains superposed onto the bound
/// ones.
#[derive(Clone, Debug)]
pub struct TrainCase {
    pub name: String,
    pub bound: ComplexState,
    pub unbound_superposed: ComplexState,
    pub features: ComplexFeatures,
    /// Interface RMSD between the superposed unbound and bound structures.
    pub irmsd: f64,
    pub beta: f64,
}

impl TrainCase {
    pub fn new(
        name: &str,
        bound: &ComplexState,
        unbound: &ComplexState,
        nma: &NmaParams,
        embeddings: Option<(&[Vec<f64>], &[Vec<f64>])>,
        embedding_width: usize,
        schedule: &GlobalSchedule,
    ) -> Result<Self> {
        let sup = superpose_unbound(bound, unbound)?;
        let features = ComplexFeatures::compute(unbound, nma, embeddings, embedding_width)?;
        let irmsd = irmsd(&sup, bound, INTERFACE_CUTOFF)?;
        // A perfectly rigid pair calibrates to the fastest schedule.
        let beta = beta_from_irmsd(irmsd.max(schedule.tr_min * 1e-3), schedule)?;
        Ok(Self { name: name.to_string(), bound: bound.clone(), unbound_superposed: sup, features, irmsd, beta })
    }
}

/// A noised training example and the targets derived from it.
#[derive(Clone, Debug)]
pub struct Example {
    pub sample: NoisedSample,
    pub bound_at_pose: ComplexState,
    pub clddt_target: Option<f64>,
    pub rot_norm: f64,
}

impl Example {
    pub fn new(
        case: &TrainCase,
        t: f64,
        tau: f64,
        noise: &GlobalNoise,
        schedule: &GlobalSchedule,
        rate_mode: FlexRateMode,
        rot_norm: f64,
    ) -> Result<Self> {
        let flex = ExponentialFlex::with_mode(case.beta, rate_mode)?;
        let sample = forward_noise_with(&case.bound, &case.unbound_superposed, t, tau, &flex, schedule, noise)?;
        let bound_at_pose = sample.bound_at_pose()?;
        let clddt_target = clddt(&sample.noisy_state, &case.bound).ok();
        Ok(Self { sample, bound_at_pose, clddt_target, rot_norm })
    }

    pub fn input<'a>(&'a self, model: &ScoreModel, case: &'a TrainCase) -> Result<ModelInput<'a>> {
        let s = &self.sample;
        ModelInput::new(&s.noisy_state, &case.features, &model.config, s.t, s.alpha, s.sigma_tr, self.rot_norm)
    }

    pub fn context(&self) -> LossContext<'_> {
        LossContext {
            noisy_state: &self.sample.noisy_state,
            targets: &self.sample.targets,
            bound_at_pose: &self.bound_at_pose,
            sigma_tr: self.sample.sigma_tr,
            rot_norm: self.rot_norm,
            clddt_target: self.clddt_target,
        }
    }
}

/// Loss for parameters `p` (plain values or tape variables). Also returns
/// batch-norm statistics when `mode` is [`BnMode::Batch`].
pub fn example_loss<T: Real>(
    model: &ScoreModel,
    p: &[T],
    input: &ModelInput,
    ex: &Example,
    mode: BnMode,
    weights: &LossWeights,
    fape: &FapeParams,
) -> (LossTerms<T>, Vec<f64>) {
    let (out, stats) = model.forward_with(p, input, mode);
    (training_loss(&out, &ex.context(), weights, fape), stats)
}

/// Loss breakdown, exact gradient and batch statistics for one example.
pub fn loss_and_grad(
    model: &ScoreModel,
    case: &TrainCase,
    ex: &Example,
    mode: BnMode,
    weights: &LossWeights,
    fape: &FapeParams,
) -> Result<(LossBreakdown, Vec<f64>, Vec<f64>)> {
    let input = ex.input(model, case)?;
    let tape = Tape::new();
    let vars: Vec<Var> = model.params.iter().map(|&v| tape.var(v)).collect();
    let (terms, stats) = example_loss(model, &vars, &input, ex, mode, weights, fape);
    let g = tape.gradient(terms.total);
    let grad = vars.iter().map(|v| g.wrt(v)).collect();
    Ok((terms.breakdown(), grad, stats))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub seed: u64,
    pub threads: usize,
    pub weights: LossWeights,
    pub fape: FapeParams,
    /// Draw `tau = t` instead of independent local times.
    pub shared_time: bool,
    pub grad_clip: Option<f64>,
    pub bn_mode: BnMode,
    pub rate_mode: FlexRateMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: 1e-3,
            seed: 0,
            threads: 1,
            weights: LossWeights::default(),
            fape: FapeParams::default(),
            shared_time: true,
            grad_clip: Some(100.0),
            bn_mode: BnMode::Batch,
            rate_mode: FlexRateMode::default(),
        }
    }
}

fn mix_seed(seed: u64, step: u64, case: u64) -> u64 {
    let mut z = seed ^ step.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ case.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean total loss over `per_case` fixed noise draws per case, with batch
/// statistics. The draws depend only on `seed`, so values before and after
/// training are comparable.
pub fn probe_loss(
    model: &ScoreModel,
    cases: &[TrainCase],
    schedule: &GlobalSchedule,
    table: &Igso3Table,
    config: &TrainConfig,
    per_case: usize,
    seed: u64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (k, case) in cases.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX, k as u64));
        for _ in 0..per_case {
            let (t, tau) = sample_times(&mut rng, config.shared_time);
            let sr = schedule.sigma_rot(t);
            let noise = GlobalNoise::sample(schedule.sigma_tr(t), sr, table, &mut rng);
            let ex = Example::new(case, t, tau, &noise, schedule, config.rate_mode, table.expected_score_norm(sr))?;
            let input = ex.input(model, case)?;
            let (terms, _) = example_loss(model, &model.params, &input, &ex, BnMode::Batch, &config.weights, &config.fape);
            total += terms.total;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Parameter("no probe examples".into()));
    }
    Ok(total / n as f64)
}

/// Adam training state around a model.
pub struct Trainer<'a> {
    pub model: &'a mut ScoreModel,
    pub config: TrainConfig,
    opt: Adam,
    step: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(model: &'a mut ScoreModel, config: TrainConfig) -> Result<Self> {
        config.weights.validate()?;
        if !(config.lr > 0.0) {
            return Err(Error::Parameter(format!("learning rate must be positive, got {}", config.lr)));
        }
        let opt = Adam::new(model.num_params(), config.lr);
        Ok(Self { model, config, opt, step: 0 })
    }

    fn case_example(&self, case: &TrainCase, k: usize, schedule: &GlobalSchedule, table: &Igso3Table) -> Result<Example> {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, self.step as u64, k as u64));
        let (t, tau) = sample_times(&mut rng, self.config.shared_time);
        let (st, sr) = (schedule.sigma_tr(t), schedule.sigma_rot(t));
        let noise = GlobalNoise::sample(st, sr, table, &mut rng);
        Example::new(case, t, tau, &noise, schedule, self.config.rate_mode, table.expected_score_norm(sr))
    }

    /// One optimizer step over all cases; gradients are averaged in case
    /// order regardless of the thread count.
    pub fn step(&mut self, cases: &[TrainCase], schedule: &GlobalSchedule, table: &Igso3Table) -> Result<LossBreakdown> {
        if cases.is_empty() {
            return Err(Error::Parameter("no training cases".into()));
        }
        let examples = cases
            .iter()
            .enumerate()
            .map(|(k, c)| self.case_example(c, k, schedule, table))
            .collect::<Result<Vec<_>>>()?;
        let cfg = self.config;
        let model: &ScoreModel = self.model;
        let threads = cfg.threads.max(1).min(cases.len());
        let run = |k: usize| loss_and_grad(model, &cases[k], &examples[k], cfg.bn_mode, &cfg.weights, &cfg.fape);
        let results: Vec<Result<_>> = if threads == 1 {
            (0..cases.len()).map(run).collect()
        } else {
            let mut slots: Vec<Option<Result<_>>> = (0..cases.len()).map(|_| None).collect();
            std::thread::scope(|s| {
                let chunk = cases.len().div_ceil(threads);
                let handles: Vec<_> = (0..cases.len())
                    .collect::<Vec<_>>()
                    .chunks(chunk)
                    .map(|ks| {
                        let ks = ks.to_vec();
                        let run = &run;
                        s.spawn(move || ks.into_iter().map(|k| (k, run(k))).collect::<Vec<_>>())
                    })
                    .collect();
                for h in handles {
                    for (k, r) in h.join().expect("training worker panicked") {
                        slots[k] = Some(r);
                    }
                }
            });
            slots.into_iter().map(|r| r.expect("every case evaluated")).collect()
        };
        let n = cases.len() as f64;
        let mut grad = vec![0.0; model.num_params()];
        let mut stats = vec![0.0; model.bn_running.len()];
        let mut parts = Vec::with_capacity(cases.len());
        for r in results {
            let (b, g, st) = r?;
            if !b.total.is_finite() {
                return Err(Error::NonFinite { step: self.step, detail: "training loss".into() });
            }
            parts.push(b);
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b / n);
            stats.iter_mut().zip(&st).for_each(|(a, b)| *a += b / n);
        }
        if let Some(c) = cfg.grad_clip {
            clip_grad_norm(&mut grad, c);
        }
        self.opt.update(&mut self.model.params, &grad);
        if cfg.bn_mode == BnMode::Batch {
            self.model.update_bn(&stats);
        }
        self.step += 1;
        Ok(LossBreakdown::mean(&parts, &cfg.weights))
    }

    /// Runs `config.steps` steps, calling `log` after each.
    pub fn run(
        &mut self,
        cases: &[TrainCase],
        schedule: &GlobalSchedule,
        table: &Igso3Table,
        mut log: impl FnMut(usize, &LossBreakdown),
    ) -> Result<Vec<LossBreakdown>> {
        let mut history = Vec::with_capacity(self.config.steps);
        for _ in 0..self.config.steps {
            let b = self.step(cases, schedule, table)?;
            log(self.step, &b);
            history.push(b);
        }
        Ok(history)
    }

    pub fn steps_done(&self) -> usize {
        self.step
    }
}
