use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use flexdock::config::RunConfig;
use flexdock::diffusion::{forward_noise, superpose_unbound};
use flexdock::geometry::{Chain, ComplexState};
use flexdock::graph::{ComplexGraphs, GraphKind};
use flexdock::io::{
    read_chain, read_complex, read_manifest, write_chain, write_models, write_pdb, CaseEntry, LoadedCase,
};
use flexdock::loss::LossBreakdown;
use flexdock::metrics::{classify_difficulty, crmsd, evaluate, format_eval_table, irmsd, DifficultyThresholds, INTERFACE_CUTOFF};
use flexdock::model::irmsd::{IrmsdConfig, IrmsdInput, IrmsdModel};
use flexdock::model::params::Checkpoint;
use flexdock::model::{ComplexFeatures, ScoreModel};
use flexdock::nma::chain_dynamics;
use flexdock::sampler::{rank_candidates, sample_candidates, ModelScore};
use flexdock::schedule::{beta_from_irmsd, ExponentialFlex};
use flexdock::so3::Igso3Table;
use flexdock::synthetic::{synthetic_pair, SyntheticSpec};
use flexdock::train::{probe_loss, TrainCase, Trainer};
use rand::SeedableRng;

fn table(cfg: &RunConfig, cache: Option<&Path>) -> Result<Igso3Table> {
    Ok(match cache {
        Some(p) => Igso3Table::load_or_build(p, cfg.igso3.clone())?,
        None => Igso3Table::build(cfg.igso3.clone())?,
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_cases(manifest: &Path) -> Result<Vec<LoadedCase>> {
    let entries = read_manifest(manifest).with_context(|| format!("reading manifest {}", manifest.display()))?;
    if entries.is_empty() {
        bail!("manifest {} lists no cases", manifest.display());
    }
    entries.iter().map(|e| LoadedCase::load(e).with_context(|| format!("loading case {}", e.id))).collect()
}

fn embedding_width(cases: &[LoadedCase]) -> Result<usize> {
    let w = cases[0].embedding_width();
    if cases.iter().any(|c| c.embedding_width() != w || c.embeddings.is_some() != cases[0].embeddings.is_some()) {
        bail!("all cases must have embeddings of the same width, or none");
    }
    Ok(w)
}

// ---------------------------------------------------------------- featurize

#[derive(Args, Debug)]
pub struct FeaturizeArgs {
    #[arg(long)]
    receptor: PathBuf,
    #[arg(long)]
    ligand: PathBuf,
    /// Diffusion time setting the cross-chain cutoff
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Output directory for nodes.tsv and edges.tsv
    #[arg(long)]
    out: PathBuf,
}

fn residue_label(c: &Chain, i: usize) -> String {
    let r = &c.residues[i];
    format!("{}\t{}\t{}", c.id, r.seq, r.aa)
}

pub fn featurize(cfg: &RunConfig, a: FeaturizeArgs) -> Result<()> {
    let state = ComplexState::new(read_chain(&a.receptor)?, read_chain(&a.ligand)?);
    let feats = ComplexFeatures::compute(&state, &cfg.nma, None, 0)?;
    let sigma = cfg.schedule.sigma_tr(a.t);
    let graphs =
        ComplexGraphs::build(&state, sigma, &cfg.model.graph, Some(&feats.receptor_corr), Some(&feats.ligand_corr));
    create_dir(&a.out)?;

    let mut nodes = String::from("chain\tseq\taa\tfeatures\n");
    for (c, f) in [(&state.receptor, &feats.receptor), (&state.ligand, &feats.ligand)] {
        for (i, row) in f.iter().enumerate() {
            let v: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(nodes, "{}\t{}", residue_label(c, i), v.join(","));
        }
    }
    write(&a.out.join("nodes.tsv"), &nodes)?;

    let mut edges = String::from("graph\tsrc\tdst\tdistance\tfeatures\n");
    let mut summary = Vec::new();
    for kind in GraphKind::ALL {
        let g = graphs.get(kind);
        for (e, &(s, d)) in g.edges.iter().enumerate() {
            let v: Vec<String> = g.edge_features[e].iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(edges, "{kind:?}\t{s}\t{d}\t{:.4}\t{}", g.vectors[e].norm(), v.join(","));
        }
        summary.push(format!("{kind:?}={}", g.len()));
    }
    write(&a.out.join("edges.tsv"), &edges)?;
    println!("residues\t{}\t{}", state.n_receptor(), state.n_ligand());
    println!("edges\t{}", summary.join("\t"));
    Ok(())
}

// ---------------------------------------------------------------- nma

#[derive(Args, Debug)]
pub struct NmaArgs {
    /// Single-chain PDB
    #[arg(long)]
    pdb: PathBuf,
    /// Output directory for msf.tsv and correlation.tsv
    #[arg(long)]
    out: PathBuf,
}

pub fn nma(cfg: &RunConfig, a: NmaArgs) -> Result<()> {
    let chain = read_chain(&a.pdb)?;
    let dyns = chain_dynamics(&chain, &cfg.nma)?;
    create_dir(&a.out)?;
    let mut msf = String::from("chain\tseq\taa\tmsf\tmsf_normalized\n");
    for i in 0..chain.len() {
        let _ = writeln!(msf, "{}\t{:.6e}\t{:.6}", residue_label(&chain, i), dyns.msf[i], dyns.msf_normalized[i]);
    }
    write(&a.out.join("msf.tsv"), &msf)?;
    let mut corr = String::new();
    for r in dyns.correlation.row_iter() {
        let v: Vec<String> = r.iter().map(|x| format!("{x:.6}")).collect();
        let _ = writeln!(corr, "{}", v.join("\t"));
    }
    write(&a.out.join("correlation.tsv"), &corr)?;
    println!("residues\t{}", chain.len());
    println!("msf_sum\t{:.6e}", dyns.msf.iter().sum::<f64>());
    Ok(())
}

// ---------------------------------------------------------------- noise

#[derive(Args, Debug)]
pub struct NoiseArgs {
    #[arg(long)]
    receptor: PathBuf,
    #[arg(long)]
    ligand: PathBuf,
    /// Bound complex, receptor residues first
    #[arg(long)]
    bound: PathBuf,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    tau: f64,
    /// Flexing rate; derived from the unbound-bound iRMSD when absent
    #[arg(long)]
    beta: Option<f64>,
    /// IGSO(3) cache (built and written when missing)
    #[arg(long)]
    table: Option<PathBuf>,
    /// Noised complex PDB
    #[arg(long)]
    out: PathBuf,
}

pub fn noise(cfg: &RunConfig, a: NoiseArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&a.t) || !(0.0..=1.0).contains(&a.tau) {
        bail!("t and tau must lie in [0, 1]");
    }
    let unbound = ComplexState::new(read_chain(&a.receptor)?, read_chain(&a.ligand)?);
    let bound = read_complex(&a.bound, unbound.n_receptor())?;
    bound.same_shape(&unbound)?;
    let sup = superpose_unbound(&bound, &unbound)?;
    let ir0 = irmsd(&sup, &bound, INTERFACE_CUTOFF)?;
    let beta = match a.beta.or(cfg.sampler.beta) {
        Some(b) => b,
        None => beta_from_irmsd(ir0.max(1e-6), &cfg.schedule)?,
    };
    let flex = ExponentialFlex::with_mode(beta, cfg.sampler.rate_mode)?;
    let table = table(cfg, a.table.as_deref())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.sampler.seed);
    let s = forward_noise(&bound, &sup, a.t, a.tau, &flex, &cfg.schedule, &table, &mut rng)?;
    write_pdb(&s.noisy_state, &a.out)?;
    println!("t\t{}", s.t);
    println!("tau\t{}", s.tau);
    println!("beta\t{beta:.6}");
    println!("alpha\t{:.6}", s.alpha);
    println!("sigma_tr\t{:.6}", s.sigma_tr);
    println!("sigma_rot\t{:.6}", s.sigma_rot);
    println!("irmsd_unbound\t{ir0:.4}");
    println!("crmsd_to_bound\t{:.4}", crmsd(&s.noisy_state, &bound)?);
    Ok(())
}

// ---------------------------------------------------------------- train-toy

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training manifest; every case needs a bound structure
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    manifest: Option<PathBuf>,
    /// Write a two-case synthetic manifest into this directory and train on it
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Overrides train.steps
    #[arg(long)]
    steps: Option<usize>,
    /// Per-step loss breakdown TSV
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    table: Option<PathBuf>,
    /// Checkpoint to write
    #[arg(long)]
    out: PathBuf,
}

/// Writes receptor, ligand and bound PDBs of two synthetic pairs plus a
/// manifest; returns the manifest path.
pub fn write_synthetic_manifest(dir: &Path, seed: u64) -> Result<PathBuf> {
    create_dir(dir)?;
    let mut manifest = String::new();
    for k in 0..2 {
        let p = synthetic_pair(&SyntheticSpec::new(8, 8, 0.3, seed.wrapping_add(k)))?;
        let id = format!("toy{k}");
        write_chain(&p.unbound.receptor, &dir.join(format!("{id}_r.pdb")))?;
        write_chain(&p.unbound.ligand, &dir.join(format!("{id}_l.pdb")))?;
        write_pdb(&p.bound, &dir.join(format!("{id}_b.pdb")))?;
        let _ = writeln!(manifest, "{id}\t{id}_r.pdb\t{id}_l.pdb\t{id}_b.pdb");
    }
    let path = dir.join("manifest.tsv");
    write(&path, &manifest)?;
    Ok(path)
}

pub fn train_toy(cfg: &RunConfig, a: TrainArgs) -> Result<()> {
    let manifest = match (&a.manifest, &a.synthetic) {
        (Some(m), _) => m.clone(),
        (None, Some(dir)) => write_synthetic_manifest(dir, cfg.train.seed.wrapping_add(500))?,
        (None, None) => bail!("give --manifest or --synthetic"),
    };
    let loaded = load_cases(&manifest)?;
    let width = embedding_width(&loaded)?;
    let mut tc = cfg.train;
    if let Some(s) = a.steps {
        tc.steps = s;
    }
    let mut cases = Vec::new();
    let mut aux = Vec::new();
    for c in &loaded {
        let Some(bound) = &c.bound else { bail!("case {} has no bound structure", c.entry.id) };
        let case = TrainCase::new(&c.entry.id, bound, &c.unbound, &cfg.nma, c.embedding_refs(), width, &cfg.schedule)?;
        let target = c.entry.irmsd.unwrap_or(case.irmsd);
        aux.push((IrmsdInput::new(&c.unbound, &case.features, &cfg.model.graph), target));
        cases.push(case);
    }
    let table = table(cfg, a.table.as_deref())?;
    let mut model = ScoreModel::new(flexdock::model::ModelConfig { embedding_width: width, ..cfg.model }, tc.seed)?;
    const PROBES: usize = 8;
    let initial = probe_loss(&model, &cases, &cfg.schedule, &table, &tc, PROBES, tc.seed)?;

    let mut log = String::from("step\t");
    log.push_str(LossBreakdown::HEADER);
    log.push('\n');
    let every = (tc.steps / 10).max(1);
    {
        let mut trainer = Trainer::new(&mut model, tc)?;
        trainer.run(&cases, &cfg.schedule, &table, |step, b| {
            let _ = writeln!(log, "{step}\t{}", b.tsv());
            if step % every == 0 || step == tc.steps {
                log::info!("step {step} total {:.4}", b.total);
            }
        })?;
    }
    let last = probe_loss(&model, &cases, &cfg.schedule, &table, &tc, PROBES, tc.seed)?;

    let mut reg = IrmsdModel::new(
        IrmsdConfig { embedding_width: width, graph: cfg.model.graph, ..cfg.irmsd },
        tc.seed,
    );
    let aux_loss = reg.fit(&aux, tc.steps, tc.lr);

    let mut ck = model.to_checkpoint();
    reg.push_checkpoint(&mut ck);
    ck.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.log {
        write(p, &log)?;
    }
    println!("cases\t{}", cases.len());
    println!("steps\t{}", tc.steps);
    println!("initial_loss\t{initial:.6}");
    println!("final_loss\t{last:.6}");
    println!("ratio\t{:.6}", last / initial);
    println!("irmsd_fit_mse\t{aux_loss:.6}");
    Ok(())
}

// ---------------------------------------------------------------- sample

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides sampler.candidates
    #[arg(long)]
    candidates: Option<usize>,
    /// Flexing rate for every case
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    table: Option<PathBuf>,
}

fn case_beta(cfg: &RunConfig, a: &SampleArgs, entry: &CaseEntry, predicted: impl FnOnce() -> Option<f64>) -> Result<(f64, &'static str)> {
    if let Some(b) = a.beta {
        return Ok((b, "flag"));
    }
    if let Some(b) = cfg.sampler.beta {
        return Ok((b, "config"));
    }
    if let Some(ir) = entry.irmsd {
        return Ok((beta_from_irmsd(ir, &cfg.schedule)?, "manifest"));
    }
    match predicted() {
        Some(ir) => Ok((beta_from_irmsd(ir, &cfg.schedule)?, "predicted")),
        None => bail!("case {}: no beta, manifest iRMSD or iRMSD regressor in the checkpoint", entry.id),
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.4}"))
}

pub fn sample(cfg: &RunConfig, a: SampleArgs) -> Result<()> {
    let loaded = load_cases(&a.manifest)?;
    let ck = Checkpoint::read(&a.checkpoint)?;
    let model = ScoreModel::from_checkpoint(&ck, &a.checkpoint)?;
    let width = model.config.embedding_width;
    let reg = IrmsdModel::from_checkpoint(&ck, model.config.graph, width, &a.checkpoint)?;
    let table = table(cfg, a.table.as_deref())?;
    let mut sc = cfg.sampler_config();
    if let Some(n) = a.candidates {
        sc.candidates = n;
    }
    create_dir(&a.out)?;
    println!("case\tbeta\tbeta_source\ttop\tclddt\tirmsd");
    for c in &loaded {
        if c.embedding_width() != width {
            bail!("case {}: embedding width {} does not match the checkpoint ({width})", c.entry.id, c.embedding_width());
        }
        let feats = ComplexFeatures::compute(&c.unbound, &cfg.nma, c.embedding_refs(), width)?;
        let (beta, source) = case_beta(cfg, &a, &c.entry, || {
            reg.as_ref().map(|r| r.predict(&IrmsdInput::new(&c.unbound, &feats, &r.config.graph)))
        })?;
        let mut score = ModelScore::new(&model, &feats, &table);
        score.bn = sc.bn_stats;
        let cands = sample_candidates(&c.unbound, &score, &sc, beta).with_context(|| format!("sampling {}", c.entry.id))?;
        let order = rank_candidates(&cands.iter().map(|r| r.clddt).collect::<Vec<_>>());

        let mut tsv = format!("# case {} beta {beta:.6} seed {} mode {:?}\n", c.entry.id, sc.seed, sc.mode);
        tsv.push_str("rank\tcandidate\tclddt\tirmsd\tcrmsd\n");
        let mut top_irmsd = None;
        for (rank, &i) in order.iter().enumerate() {
            let s = &cands[i].final_state;
            let (ir, cr) = match &c.bound {
                Some(b) => (Some(irmsd(s, b, INTERFACE_CUTOFF)?), Some(crmsd(s, b)?)),
                None => (None, None),
            };
            if rank == 0 {
                top_irmsd = ir;
            }
            let _ = writeln!(tsv, "{}\t{i}\t{}\t{}\t{}", rank + 1, opt(cands[i].clddt), opt(ir), opt(cr));
        }
        let id = &c.entry.id;
        write(&a.out.join(format!("{id}.candidates.tsv")), &tsv)?;
        let top = &cands[order[0]];
        write_pdb(&top.final_state, &a.out.join(format!("{id}.pdb")))?;
        write_models(&top.trajectory.states, &a.out.join(format!("{id}.trajectory.pdb")))?;
        println!("{id}\t{beta:.4}\t{source}\t{}\t{}\t{}", order[0], opt(top.clddt), opt(top_irmsd));
    }
    Ok(())
}

// ---------------------------------------------------------------- eval

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Manifest with bound structures
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<case>.pdb` predictions
    #[arg(long)]
    predictions: PathBuf,
    /// Also write the report here
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn eval(_cfg: &RunConfig, a: EvalArgs) -> Result<()> {
    let loaded = load_cases(&a.manifest)?;
    let mut rows = Vec::new();
    for c in &loaded {
        let Some(bound) = &c.bound else { bail!("case {} has no bound structure", c.entry.id) };
        let path = a.predictions.join(format!("{}.pdb", c.entry.id));
        let pred = read_complex(&path, c.unbound.n_receptor()).with_context(|| format!("reading {}", path.display()))?;
        let mut row = evaluate(&c.entry.id, &pred, bound)?;
        row.difficulty = Some(classify_difficulty(&c.unbound, bound, &DifficultyThresholds::default())?.label);
        rows.push(row);
    }
    let report = format_eval_table(&rows);
    print!("{report}");
    if let Some(p) = &a.out {
        write(p, &report)?;
    }
    Ok(())
}

// ---------------------------------------------------------------- tables

#[derive(Args, Debug)]
pub struct TablesArgs {
    /// Cache file to write
    #[arg(long, default_value = "igso3.cache")]
    out: PathBuf,
}

pub fn tables(cfg: &RunConfig, a: TablesArgs) -> Result<()> {
    let t = Igso3Table::build(cfg.igso3.clone())?;
    t.write_cache(&a.out)?;
    println!("eps\t{}\t[{}, {}]", t.eps_grid.len(), cfg.igso3.eps_min, cfg.igso3.eps_max);
    println!("omega\t{}", t.omega_grid.len());
    println!("wrote\t{}", a.out.display());
    Ok(())
}
