//! Equivariant score and confidence network.
//!
//! Node features carry `n_s` invariant scalars plus `n_v` odd and `n_v`
//! even vector channels. Messages are tensor products of neighbour features
//! with the edge direction up to degree 2; outputs are capped at degree 1.
//! The code is generic over [`Real`] so the same forward pass serves plain
//! inference and tape-recorded training.

pub mod irmsd;
pub mod params;
pub mod sh;

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;

use crate::autodiff::{Real, V3};
use crate::error::{Error, Result};
use crate::geometry::{centroid, Chain, ComplexState, Vec3};
use crate::graph::{
    node_feature_dim, node_features, rbf_expand, sinusoidal_time_embedding, ComplexGraphs, GraphKind, GraphParams,
    ResidueGraph,
};
use crate::nma::{chain_dynamics, NmaParams};
use params::{Checkpoint, Init, Layout, Linear, Mlp};

const NORM_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub n_s: usize,
    pub n_v: usize,
    pub layers: usize,
    pub embedding_width: usize,
    pub graph: GraphParams,
    pub head_rbf: usize,
    pub head_radius: f64,
    pub lddt_radius: f64,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_s: 16,
            n_v: 4,
            layers: 4,
            embedding_width: 0,
            graph: GraphParams::default(),
            head_rbf: 16,
            head_radius: 30.0,
            lddt_radius: 15.0,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    fn psi_width(&self) -> usize {
        2 * self.n_s + 7 * self.n_v
    }
    fn dim0(&self) -> usize {
        self.n_s + self.n_v
    }
    fn dim1o(&self) -> usize {
        self.n_s + 3 * self.n_v
    }
    fn dim1e(&self) -> usize {
        3 * self.n_v
    }
    fn head_width(&self) -> usize {
        self.n_s + 6 * self.n_v
    }
    fn bn_block(&self) -> usize {
        2 * self.n_s + 2 * self.n_v
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_s == 0 || self.n_v == 0 || self.layers == 0 || self.head_rbf == 0 {
            return Err(Error::Parameter(format!("model widths must be positive: {self:?}")));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0 && self.bn_eps > 0.0) {
            return Err(Error::Parameter("batch-norm momentum must lie in (0, 1] and eps > 0".into()));
        }
        Ok(())
    }

    fn header(&self) -> Vec<(String, f64)> {
        let g = &self.graph;
        [
            ("n_s", self.n_s as f64),
            ("n_v", self.n_v as f64),
            ("layers", self.layers as f64),
            ("embedding_width", self.embedding_width as f64),
            ("intra_cutoff", g.intra_cutoff),
            ("inter_base", g.inter_base),
            ("inter_sigma_mult", g.inter_sigma_mult),
            ("rbf_count", g.rbf_count as f64),
            ("time_dim", g.time_dim as f64),
            ("time_scale", g.time_scale),
            ("head_rbf", self.head_rbf as f64),
            ("head_radius", self.head_radius),
            ("lddt_radius", self.lddt_radius),
            ("bn_momentum", self.bn_momentum),
            ("bn_eps", self.bn_eps),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn from_header(ck: &Checkpoint, path: &Path) -> Result<Self> {
        let get = |k: &str| {
            ck.header_value(k)
                .ok_or_else(|| Error::Format { path: path.to_path_buf(), msg: format!("missing header field {k}") })
        };
        let cfg = Self {
            n_s: get("n_s")? as usize,
            n_v: get("n_v")? as usize,
            layers: get("layers")? as usize,
            embedding_width: get("embedding_width")? as usize,
            graph: GraphParams {
                intra_cutoff: get("intra_cutoff")?,
                inter_base: get("inter_base")?,
                inter_sigma_mult: get("inter_sigma_mult")?,
                rbf_count: get("rbf_count")? as usize,
                time_dim: get("time_dim")? as usize,
                time_scale: get("time_scale")?,
            },
            head_rbf: get("head_rbf")? as usize,
            head_radius: get("head_radius")?,
            lddt_radius: get("lddt_radius")?,
            bn_momentum: get("bn_momentum")?,
            bn_eps: get("bn_eps")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Per-case static inputs derived from the unbound structures.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexFeatures {
    pub receptor: Vec<Vec<f64>>,
    pub ligand: Vec<Vec<f64>>,
    pub receptor_corr: DMatrix<f64>,
    pub ligand_corr: DMatrix<f64>,
}

impl ComplexFeatures {
    /// Node features and NMA correlations of each unbound chain.
    pub fn compute(
        unbound: &ComplexState,
        nma: &NmaParams,
        embeddings: Option<(&[Vec<f64>], &[Vec<f64>])>,
        embedding_width: usize,
    ) -> Result<Self> {
        let chain = |c: &Chain, emb: Option<&[Vec<f64>]>| -> Result<(Vec<Vec<f64>>, DMatrix<f64>)> {
            let dynamics = chain_dynamics(c, nma)?;
            Ok((node_features(c, &dynamics.msf_normalized, emb, embedding_width)?, dynamics.correlation))
        };
        let (receptor, receptor_corr) = chain(&unbound.receptor, embeddings.map(|e| e.0))?;
        let (ligand, ligand_corr) = chain(&unbound.ligand, embeddings.map(|e| e.1))?;
        Ok(Self { receptor, ligand, receptor_corr, ligand_corr })
    }

    fn check(&self, state: &ComplexState, width: usize) -> Result<()> {
        let dim = node_feature_dim(width);
        let ok = |f: &[Vec<f64>], c: &DMatrix<f64>, n: usize| {
            f.len() == n && f.iter().all(|v| v.len() == dim) && c.nrows() == n && c.ncols() == n
        };
        if !ok(&self.receptor, &self.receptor_corr, state.n_receptor()) || !ok(&self.ligand, &self.ligand_corr, state.n_ligand()) {
            return Err(Error::Correspondence("node features do not match the complex".into()));
        }
        Ok(())
    }
}

/// One forward-pass input: the current complex, its graphs and the noise
/// conditioning.
#[derive(Clone, Debug)]
pub struct ModelInput<'a> {
    pub state: &'a ComplexState,
    pub features: &'a ComplexFeatures,
    pub graphs: ComplexGraphs,
    pub t: f64,
    pub alpha: f64,
    pub sigma_tr: f64,
    /// Expected IGSO(3) score norm at the current rotation noise.
    pub rot_norm: f64,
}

impl<'a> ModelInput<'a> {
    pub fn new(
        state: &'a ComplexState,
        features: &'a ComplexFeatures,
        config: &ModelConfig,
        t: f64,
        alpha: f64,
        sigma_tr: f64,
        rot_norm: f64,
    ) -> Result<Self> {
        features.check(state, config.embedding_width)?;
        let graphs =
            ComplexGraphs::build(state, sigma_tr, &config.graph, Some(&features.receptor_corr), Some(&features.ligand_corr));
        Ok(Self { state, features, graphs, t, alpha, sigma_tr, rot_norm })
    }
}

#[derive(Clone, Debug)]
pub struct RawOutput<T> {
    pub global_tr: V3<T>,
    pub global_rot: V3<T>,
    pub receptor_tr: Vec<V3<T>>,
    pub receptor_rot: Vec<V3<T>>,
    pub ligand_tr: Vec<V3<T>>,
    pub ligand_rot: Vec<V3<T>>,
    pub clddt: T,
    pub clddt_valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreOutput {
    pub global_tr: Vec3,
    pub global_rot: Vec3,
    pub receptor_tr: Vec<Vec3>,
    pub receptor_rot: Vec<Vec3>,
    pub ligand_tr: Vec<Vec3>,
    pub ligand_rot: Vec<Vec3>,
    pub clddt: f64,
    /// False when no receptor-ligand pair lies within the confidence radius.
    pub clddt_valid: bool,
}

impl<T: Real> RawOutput<T> {
    pub fn value(&self) -> ScoreOutput {
        let vs = |v: &[V3<T>]| v.iter().map(V3::value).collect();
        ScoreOutput {
            global_tr: self.global_tr.value(),
            global_rot: self.global_rot.value(),
            receptor_tr: vs(&self.receptor_tr),
            receptor_rot: vs(&self.receptor_rot),
            ligand_tr: vs(&self.ligand_tr),
            ligand_rot: vs(&self.ligand_rot),
            clddt: self.clddt.val(),
            clddt_valid: self.clddt_valid,
        }
    }
}

impl ScoreOutput {
    pub fn is_finite(&self) -> bool {
        let f = |v: &Vec3| v.iter().all(|x| x.is_finite());
        f(&self.global_tr)
            && f(&self.global_rot)
            && self.receptor_tr.iter().chain(&self.receptor_rot).chain(&self.ligand_tr).chain(&self.ligand_rot).all(f)
            && self.clddt.is_finite()
    }
}

/// Batch-norm statistics source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with statistics of the current complex and report them.
    Batch,
    /// Normalize with the stored running statistics.
    Running,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct TpBlock {
    psi_edge: Linear,
    psi_dst: Linear,
    psi_src: Linear,
    psi_out: Linear,
    mix0: Option<Linear>,
    mix_o: Linear,
    mix_e: Linear,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct BnParams {
    gain_s: usize,
    bias_s: usize,
    gain_o: usize,
    gain_e: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct GlobalHead {
    rbf: Linear,
    s: Linear,
    out: Linear,
    magnitude: [Mlp; 2],
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct ClddtHead {
    rec: Linear,
    lig: Linear,
    rbf: Linear,
    out: Linear,
}

/// Parameter layout of the score network.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub layout: Layout,
    cfg: ModelConfig,
    node_embed: [Mlp; 2],
    vec_init_o: [usize; 2],
    vec_init_e: [usize; 2],
    edge_embed: [Mlp; 2],
    layers: Vec<[TpBlock; 4]>,
    bn: Vec<[BnParams; 4]>,
    residue_tp: [TpBlock; 4],
    global: GlobalHead,
    residue_gate: [Linear; 4],
    residue_mag: [Mlp; 4],
    clddt: ClddtHead,
}

const CHAIN_NAMES: [&str; 2] = ["rec", "lig"];
const KIND_NAMES: [&str; 4] = ["rr", "ll", "rl", "lr"];

impl Network {
    pub fn new(cfg: &ModelConfig) -> Self {
        let mut l = Layout::default();
        let (ns, nv) = (cfg.n_s, cfg.n_v);
        let td = cfg.graph.time_dim;
        let node_in = node_feature_dim(cfg.embedding_width) + td + 1;
        let node_embed = CHAIN_NAMES.map(|c| l.mlp(&format!("embed.node.{c}"), node_in, ns, ns));
        let vec_init_o = CHAIN_NAMES.map(|c| l.add(format!("embed.vec_odd.{c}"), &[nv, 2], Init::Fan(1.0)));
        let vec_init_e = CHAIN_NAMES.map(|c| l.add(format!("embed.vec_even.{c}"), &[nv, 1], Init::Fan(1.0)));
        let edge_embed = ["intra", "inter"].map(|c| l.mlp(&format!("embed.edge.{c}"), cfg.graph.edge_dim(), ns, ns));

        let tp = |l: &mut Layout, name: &str, scalars: bool| TpBlock {
            psi_edge: l.linear(&format!("{name}.psi_edge"), ns, ns, false),
            psi_dst: l.linear(&format!("{name}.psi_dst"), ns, ns, true),
            psi_src: l.linear(&format!("{name}.psi_src"), ns, ns, false),
            psi_out: l.linear(&format!("{name}.psi_out"), ns, cfg.psi_width(), true),
            mix0: scalars.then(|| l.linear(&format!("{name}.mix0"), cfg.dim0(), ns, true)),
            mix_o: l.linear(&format!("{name}.mix1o"), cfg.dim1o(), nv, false),
            mix_e: l.linear(&format!("{name}.mix1e"), cfg.dim1e(), nv, false),
        };
        let mut layers = Vec::new();
        let mut bn = Vec::new();
        for li in 0..cfg.layers {
            layers.push(KIND_NAMES.map(|k| tp(&mut l, &format!("layer{li}.{k}"), true)));
            bn.push(KIND_NAMES.map(|k| {
                let name = format!("layer{li}.{k}.bn");
                BnParams {
                    gain_s: l.add(format!("{name}.gain_s"), &[ns], Init::Const(1.0)),
                    bias_s: l.add(format!("{name}.bias_s"), &[ns], Init::Const(0.0)),
                    gain_o: l.add(format!("{name}.gain_1o"), &[nv], Init::Const(1.0)),
                    gain_e: l.add(format!("{name}.gain_1e"), &[nv], Init::Const(1.0)),
                }
            }));
        }
        let residue_tp = KIND_NAMES.map(|k| tp(&mut l, &format!("residue.{k}"), false));
        let global = GlobalHead {
            rbf: l.linear("global.psi_rbf", cfg.head_rbf, ns, true),
            s: l.linear("global.psi_s", ns, ns, false),
            out: l.linear("global.psi_out", ns, 2 * cfg.head_width(), true),
            magnitude: ["tr", "rot"].map(|h| l.mlp(&format!("global.mag.{h}"), 1 + td, ns, 1)),
        };
        let heads = ["rec_tr", "rec_rot", "lig_tr", "lig_rot"];
        let residue_gate = heads.map(|h| l.linear(&format!("residue.gate.{h}"), ns, 2 * nv, true));
        let residue_mag = heads.map(|h| l.mlp(&format!("residue.mag.{h}"), 1 + td + ns, ns, 1));
        let clddt = ClddtHead {
            rec: l.linear("clddt.rec", ns, ns, true),
            lig: l.linear("clddt.lig", ns, ns, false),
            rbf: l.linear("clddt.rbf", cfg.head_rbf, ns, false),
            out: l.linear("clddt.out", ns, 1, true),
        };
        Network {
            layout: l,
            cfg: *cfg,
            node_embed,
            vec_init_o,
            vec_init_e,
            edge_embed,
            layers,
            bn,
            residue_tp,
            global,
            residue_gate,
            residue_mag,
            clddt,
        }
    }

    pub fn bn_stats_len(&self) -> usize {
        self.cfg.layers * 4 * self.cfg.bn_block()
    }

    pub fn bn_stats_init(&self) -> Vec<f64> {
        let (ns, nv) = (self.cfg.n_s, self.cfg.n_v);
        let mut block = vec![0.0; ns];
        block.extend(std::iter::repeat_n(1.0, ns + 2 * nv));
        block.repeat(self.cfg.layers * 4)
    }
}

/// Features of one chain.
#[derive(Clone, Debug)]
struct NodeFeats<T> {
    s: Vec<Vec<T>>,
    vo: Vec<Vec<V3<T>>>,
    ve: Vec<Vec<V3<T>>>,
}

/// Mean incoming message of one node, split by output irrep.
struct Agg<T> {
    m0: Vec<T>,
    m1o: Vec<V3<T>>,
    m1e: Vec<V3<T>>,
}

fn unit_or_zero(v: &Vec3) -> [f64; 3] {
    let n = v.norm();
    if n < 1e-8 {
        [0.0; 3]
    } else {
        [v.x / n, v.y / n, v.z / n]
    }
}

fn traceless<T: Real>(u: &[f64; 3], v: &V3<T>) -> V3<T> {
    let d = v.dot_f(u);
    V3::from_scaled(u, d).sub(&v.scale_f(1.0 / 3.0))
}

fn silu_all<T: Real>(v: Vec<T>) -> Vec<T> {
    v.into_iter().map(T::silu).collect()
}

fn add_vecs<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

/// Applies a channel-mixing linear map to vector channels component-wise.
fn mix_vectors<T: Real>(lin: &Linear, p: &[T], v: &[V3<T>]) -> Vec<V3<T>> {
    let comps: [Vec<T>; 3] = std::array::from_fn(|k| lin.apply(p, &v.iter().map(|x| x.0[k]).collect::<Vec<_>>()));
    (0..lin.n_out).map(|c| V3([comps[0][c], comps[1][c], comps[2][c]])).collect()
}

/// Tensor-product paths shared by interaction layers and the global heads.
/// Returns the odd and even degree-1 parts for weights `w` (layout
/// `[s (n_s), vo (n_v), S2 vo (n_v), ve x u (n_v) | ve, S2 ve, vo x u]`).
fn vector_paths<T: Real>(w: &[T], u: &[f64; 3], s: &[T], vo: &[V3<T>], ve: &[V3<T>]) -> (Vec<V3<T>>, Vec<V3<T>>) {
    let ns = s.len();
    let nv = vo.len();
    let mut o = Vec::with_capacity(ns + 3 * nv);
    let mut e = Vec::with_capacity(3 * nv);
    for c in 0..ns {
        o.push(V3::from_scaled(u, w[c] * s[c]));
    }
    let wo = &w[ns..];
    for c in 0..nv {
        o.push(vo[c].scale(wo[c]));
    }
    for c in 0..nv {
        o.push(traceless(u, &vo[c]).scale(wo[nv + c]));
    }
    for c in 0..nv {
        o.push(ve[c].cross_f(u).scale(wo[2 * nv + c]));
    }
    let we = &wo[3 * nv..];
    for c in 0..nv {
        e.push(ve[c].scale(we[c]));
    }
    for c in 0..nv {
        e.push(traceless(u, &ve[c]).scale(we[nv + c]));
    }
    for c in 0..nv {
        e.push(vo[c].cross_f(u).scale(we[2 * nv + c]));
    }
    (o, e)
}

impl Network {
    fn embed_nodes<T: Real>(&self, p: &[T], chain: usize, state: &Chain, static_feats: &[Vec<f64>], temb: &[f64], alpha: f64) -> NodeFeats<T> {
        let nv = self.cfg.n_v;
        let mlp = &self.node_embed[chain];
        let mut s = Vec::with_capacity(state.len());
        let mut vo = Vec::with_capacity(state.len());
        let mut ve = Vec::with_capacity(state.len());
        for (f, fr) in static_feats.iter().zip(&state.frames) {
            let mut x = f.clone();
            x.extend_from_slice(temb);
            x.push(alpha);
            s.push(mlp.apply_f(p, &x));
            let m = fr.orientation.matrix();
            let col = |k: usize| [m[(0, k)], m[(1, k)], m[(2, k)]];
            let (c0, c1, c2) = (col(0), col(1), col(2));
            let wo = &p[self.vec_init_o[chain]..self.vec_init_o[chain] + 2 * nv];
            let we = &p[self.vec_init_e[chain]..self.vec_init_e[chain] + nv];
            vo.push((0..nv).map(|c| V3::from_scaled(&c0, wo[2 * c]).add(&V3::from_scaled(&c1, wo[2 * c + 1]))).collect());
            ve.push((0..nv).map(|c| V3::from_scaled(&c2, we[c])).collect());
        }
        NodeFeats { s, vo, ve }
    }

    /// Mean tensor-product message per destination node (`None` for nodes
    /// without incoming edges of this kind).
    fn aggregate<T: Real>(
        &self,
        block: &TpBlock,
        p: &[T],
        graph: &ResidueGraph,
        edge_emb: &[Vec<T>],
        src: &NodeFeats<T>,
        dst: &NodeFeats<T>,
    ) -> Vec<Option<Agg<T>>> {
        let cfg = &self.cfg;
        let (ns, nv) = (cfg.n_s, cfg.n_v);
        let n_dst = dst.s.len();
        let mut incoming = vec![Vec::new(); n_dst];
        for (e, &(_, d)) in graph.edges.iter().enumerate() {
            incoming[d].push(e);
        }
        let mut src_proj: Vec<Option<Vec<T>>> = vec![None; src.s.len()];
        for &(j, _) in &graph.edges {
            if src_proj[j].is_none() {
                src_proj[j] = Some(block.psi_src.apply(p, &src.s[j]));
            }
        }
        let width = cfg.dim0() + 3 * (cfg.dim1o() + cfg.dim1e());
        incoming
            .iter()
            .enumerate()
            .map(|(i, edges)| {
                if edges.is_empty() {
                    return None;
                }
                let dst_proj = block.psi_dst.apply(p, &dst.s[i]);
                let mut columns: Vec<Vec<T>> = (0..width).map(|_| Vec::with_capacity(edges.len())).collect();
                for &e in edges {
                    let j = graph.edges[e].0;
                    let u = unit_or_zero(&graph.vectors[e]);
                    let pre = add_vecs(&add_vecs(&block.psi_edge.apply(p, &edge_emb[e]), &dst_proj), src_proj[j].as_ref().unwrap());
                    let w = block.psi_out.apply(p, &silu_all(pre));
                    let (sj, voj, vej) = (&src.s[j], &src.vo[j], &src.ve[j]);
                    let mut k = 0;
                    let mut push = |v: T| {
                        columns[k].push(v);
                        k += 1;
                    };
                    for c in 0..ns {
                        push(w[c] * sj[c]);
                    }
                    for c in 0..nv {
                        push(w[ns + c] * voj[c].dot_f(&u));
                    }
                    let (o, ev) = vector_paths(&w[ns + nv..], &u, sj, voj, vej);
                    for v in o.iter().chain(&ev) {
                        for x in v.0 {
                            push(x);
                        }
                    }
                }
                let inv = 1.0 / edges.len() as f64;
                let mean: Vec<T> = columns.iter().map(|c| T::sum(c) * inv).collect();
                let d0 = cfg.dim0();
                let vec_at = |q: usize| V3([mean[d0 + 3 * q], mean[d0 + 3 * q + 1], mean[d0 + 3 * q + 2]]);
                Some(Agg {
                    m0: mean[..d0].to_vec(),
                    m1o: (0..cfg.dim1o()).map(vec_at).collect(),
                    m1e: (cfg.dim1o()..cfg.dim1o() + cfg.dim1e()).map(vec_at).collect(),
                })
            })
            .collect()
    }

    fn edge_embeddings<T: Real>(&self, p: &[T], graphs: &ComplexGraphs) -> [Vec<Vec<T>>; 4] {
        GraphKind::ALL.map(|k| {
            let mlp = &self.edge_embed[if k.is_intra() { 0 } else { 1 }];
            graphs.get(k).edge_features.iter().map(|f| mlp.apply_f(p, f)).collect()
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn batch_norm<T: Real>(
        &self,
        p: &[T],
        bnp: &BnParams,
        stats_slot: &mut [f64],
        mode: BnMode,
        s: &mut [Vec<T>],
        vo: &mut [Vec<V3<T>>],
        ve: &mut [Vec<V3<T>>],
    ) {
        let (ns, nv) = (self.cfg.n_s, self.cfg.n_v);
        let eps = self.cfg.bn_eps;
        let n = s.len();
        if n == 0 {
            return;
        }
        let inv_n = 1.0 / n as f64;
        for c in 0..ns {
            let (mean, var) = match mode {
                BnMode::Batch => {
                    let mean = T::sum(&s.iter().map(|x| x[c]).collect::<Vec<_>>()) * inv_n;
                    let var = T::sum(&s.iter().map(|x| (x[c] - mean).square()).collect::<Vec<_>>()) * inv_n;
                    stats_slot[c] = mean.val();
                    stats_slot[ns + c] = var.val();
                    (mean, var)
                }
                BnMode::Running => (T::cst(stats_slot[c]), T::cst(stats_slot[ns + c])),
            };
            let scale = p[bnp.gain_s + c] / (var + eps).sqrt();
            for x in s.iter_mut() {
                x[c] = (x[c] - mean) * scale + p[bnp.bias_s + c];
            }
        }
        for (vs, gain, off) in [(vo, bnp.gain_o, 2 * ns), (ve, bnp.gain_e, 2 * ns + nv)] {
            for c in 0..nv {
                let msq = match mode {
                    BnMode::Batch => {
                        let m = T::sum(&vs.iter().map(|v| v[c].norm_sq()).collect::<Vec<_>>()) * inv_n;
                        stats_slot[off + c] = m.val();
                        m
                    }
                    BnMode::Running => T::cst(stats_slot[off + c]),
                };
                let scale = p[gain + c] / (msq + eps).sqrt();
                for v in vs.iter_mut() {
                    v[c] = v[c].scale(scale);
                }
            }
        }
    }

    fn magnitude<T: Real>(mlp: &Mlp, p: &[T], v: &V3<T>, extra_f: &[f64], extra: &[T]) -> V3<T> {
        let norm = v.safe_norm(NORM_EPS);
        let mut x = vec![norm];
        x.extend(extra_f.iter().map(|&f| T::cst(f)));
        x.extend_from_slice(extra);
        let m = mlp.apply(p, &x)[0];
        v.scale(m / norm)
    }

    /// Forward pass. `bn_stats` holds running statistics in
    /// [`BnMode::Running`] and receives batch statistics in
    /// [`BnMode::Batch`].
    pub fn forward<T: Real>(&self, p: &[T], input: &ModelInput, mode: BnMode, bn_stats: &mut [f64]) -> RawOutput<T> {
        let cfg = &self.cfg;
        let (ns, nv) = (cfg.n_s, cfg.n_v);
        let state = input.state;
        let temb = sinusoidal_time_embedding(input.t, cfg.graph.time_dim, cfg.graph.time_scale);
        let chains = [&state.receptor, &state.ligand];
        let statics = [&input.features.receptor, &input.features.ligand];
        let mut feats: [NodeFeats<T>; 2] =
            std::array::from_fn(|c| self.embed_nodes(p, c, chains[c], statics[c], &temb, input.alpha));
        let edge_emb = self.edge_embeddings(p, &input.graphs);
        let block_len = cfg.bn_block();

        for (li, blocks) in self.layers.iter().enumerate() {
            let mut delta: [NodeFeats<T>; 2] = std::array::from_fn(|c| NodeFeats {
                s: vec![vec![T::zero(); ns]; chains[c].len()],
                vo: vec![vec![V3::zero(); nv]; chains[c].len()],
                ve: vec![vec![V3::zero(); nv]; chains[c].len()],
            });
            for kind in GraphKind::ALL {
                let k = kind.index();
                let (src_side, dst_side) = kind.sides();
                let (src_c, dst_c) = (src_side as usize, dst_side as usize);
                let block = &blocks[k];
                let agg = self.aggregate(block, p, input.graphs.get(kind), &edge_emb[k], &feats[src_c], &feats[dst_c]);
                let mut idx = Vec::new();
                let mut s = Vec::new();
                let mut vo = Vec::new();
                let mut ve = Vec::new();
                for (i, a) in agg.into_iter().enumerate() {
                    if let Some(a) = a {
                        idx.push(i);
                        s.push(block.mix0.expect("interaction blocks mix scalars").apply(p, &a.m0));
                        vo.push(mix_vectors(&block.mix_o, p, &a.m1o));
                        ve.push(mix_vectors(&block.mix_e, p, &a.m1e));
                    }
                }
                let slot = &mut bn_stats[(li * 4 + k) * block_len..(li * 4 + k + 1) * block_len];
                self.batch_norm(p, &self.bn[li][k], slot, mode, &mut s, &mut vo, &mut ve);
                let d = &mut delta[dst_c];
                for (n, &i) in idx.iter().enumerate() {
                    for c in 0..ns {
                        d.s[i][c] += s[n][c];
                    }
                    for c in 0..nv {
                        d.vo[i][c] = d.vo[i][c].add(&vo[n][c]);
                        d.ve[i][c] = d.ve[i][c].add(&ve[n][c]);
                    }
                }
            }
            for c in 0..2 {
                let f = &mut feats[c];
                let d = &delta[c];
                for i in 0..f.s.len() {
                    for q in 0..ns {
                        f.s[i][q] += d.s[i][q];
                    }
                    for q in 0..nv {
                        f.vo[i][q] = f.vo[i][q].add(&d.vo[i][q]);
                        f.ve[i][q] = f.ve[i][q].add(&d.ve[i][q]);
                    }
                }
            }
        }

        let (global_tr, global_rot) = self.global_heads(p, state, &feats[1], &temb, input);
        let (receptor_tr, receptor_rot, ligand_tr, ligand_rot) = self.residue_heads(p, input, &feats, &edge_emb, &temb);
        let (clddt, clddt_valid) = self.clddt_head(p, state, &feats);
        RawOutput { global_tr, global_rot, receptor_tr, receptor_rot, ligand_tr, ligand_rot, clddt, clddt_valid }
    }

    fn global_heads<T: Real>(
        &self,
        p: &[T],
        state: &ComplexState,
        lig: &NodeFeats<T>,
        temb: &[f64],
        input: &ModelInput,
    ) -> (V3<T>, V3<T>) {
        let cfg = &self.cfg;
        let hw = cfg.head_width();
        let positions = state.ligand.positions();
        let com = centroid(&positions);
        let mut acc: [Vec<V3<T>>; 2] = [Vec::new(), Vec::new()];
        for (i, x) in positions.iter().enumerate() {
            let r = x - com;
            let u = unit_or_zero(&r);
            let rbf = rbf_expand(r.norm(), cfg.head_radius, cfg.head_rbf);
            let pre = add_vecs(&self.global.rbf.apply_f(p, &rbf), &self.global.s.apply(p, &lig.s[i]));
            let w = self.global.out.apply(p, &silu_all(pre));
            for (h, a) in acc.iter_mut().enumerate() {
                let (o, e) = vector_paths(&w[h * hw..(h + 1) * hw], &u, &lig.s[i], &lig.vo[i], &lig.ve[i]);
                a.extend(o);
                a.extend(e);
            }
        }
        let inv = 1.0 / positions.len() as f64;
        let scales = [1.0 / input.sigma_tr, input.rot_norm];
        let out: [V3<T>; 2] = std::array::from_fn(|h| {
            let v = V3::sum(&acc[h]).scale_f(inv);
            Self::magnitude(&self.global.magnitude[h], p, &v, temb, &[]).scale_f(scales[h])
        });
        (out[0], out[1])
    }

    #[allow(clippy::type_complexity)]
    fn residue_heads<T: Real>(
        &self,
        p: &[T],
        input: &ModelInput,
        feats: &[NodeFeats<T>; 2],
        edge_emb: &[Vec<Vec<T>>; 4],
        temb: &[f64],
    ) -> (Vec<V3<T>>, Vec<V3<T>>, Vec<V3<T>>, Vec<V3<T>>) {
        let nv = self.cfg.n_v;
        let mut vo: [Vec<Vec<V3<T>>>; 2] = [feats[0].vo.clone(), feats[1].vo.clone()];
        let mut ve: [Vec<Vec<V3<T>>>; 2] = [feats[0].ve.clone(), feats[1].ve.clone()];
        for kind in GraphKind::ALL {
            let k = kind.index();
            let (src_side, dst_side) = kind.sides();
            let (src_c, dst_c) = (src_side as usize, dst_side as usize);
            let block = &self.residue_tp[k];
            let agg = self.aggregate(block, p, input.graphs.get(kind), &edge_emb[k], &feats[src_c], &feats[dst_c]);
            for (i, a) in agg.into_iter().enumerate() {
                if let Some(a) = a {
                    let mo = mix_vectors(&block.mix_o, p, &a.m1o);
                    let me = mix_vectors(&block.mix_e, p, &a.m1e);
                    for c in 0..nv {
                        vo[dst_c][i][c] = vo[dst_c][i][c].add(&mo[c]);
                        ve[dst_c][i][c] = ve[dst_c][i][c].add(&me[c]);
                    }
                }
            }
        }
        let head = |h: usize, chain: usize| -> Vec<V3<T>> {
            (0..feats[chain].s.len())
                .map(|i| {
                    let s = &feats[chain].s[i];
                    let g = self.residue_gate[h].apply(p, s);
                    let mut terms: Vec<V3<T>> = (0..nv).map(|c| vo[chain][i][c].scale(g[c])).collect();
                    terms.extend((0..nv).map(|c| ve[chain][i][c].scale(g[nv + c])));
                    let v = V3::sum(&terms);
                    Self::magnitude(&self.residue_mag[h], p, &v, temb, s)
                })
                .collect()
        };
        (head(0, 0), head(1, 0), head(2, 1), head(3, 1))
    }

    fn clddt_head<T: Real>(&self, p: &[T], state: &ComplexState, feats: &[NodeFeats<T>; 2]) -> (T, bool) {
        let cfg = &self.cfg;
        let xr = state.receptor.positions();
        let xl = state.ligand.positions();
        let mut pairs = Vec::new();
        for (i, a) in xr.iter().enumerate() {
            for (j, b) in xl.iter().enumerate() {
                let d = (a - b).norm();
                if d < cfg.lddt_radius {
                    pairs.push((i, j, d));
                }
            }
        }
        if pairs.is_empty() {
            return (T::zero(), false);
        }
        let mut rec: Vec<Option<Vec<T>>> = vec![None; xr.len()];
        let mut lig: Vec<Option<Vec<T>>> = vec![None; xl.len()];
        let mut values = Vec::with_capacity(pairs.len());
        for &(i, j, d) in &pairs {
            let a = rec[i].get_or_insert_with(|| self.clddt.rec.apply(p, &feats[0].s[i])).clone();
            let b = lig[j].get_or_insert_with(|| self.clddt.lig.apply(p, &feats[1].s[j])).clone();
            let r = self.clddt.rbf.apply_f(p, &rbf_expand(d, cfg.lddt_radius, cfg.head_rbf));
            let h = silu_all(add_vecs(&add_vecs(&a, &b), &r));
            values.push(self.clddt.out.apply(p, &h)[0].sigmoid());
        }
        (T::sum(&values) * (1.0 / values.len() as f64), true)
    }
}

/// Score network with its parameters and running batch-norm statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreModel {
    pub config: ModelConfig,
    pub net: Network,
    pub params: Vec<f64>,
    pub bn_running: Vec<f64>,
}

impl ScoreModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let net = Network::new(&config);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let params = net.layout.init(&mut rng);
        let bn_running = net.bn_stats_init();
        Ok(Self { config, net, params, bn_running })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Inference with running batch-norm statistics.
    pub fn forward(&self, input: &ModelInput) -> ScoreOutput {
        self.forward_mode(input, BnMode::Running)
    }

    /// Inference with the given batch-norm statistics source.
    pub fn forward_mode(&self, input: &ModelInput, mode: BnMode) -> ScoreOutput {
        let mut stats = self.bn_running.clone();
        self.net.forward(&self.params, input, mode, &mut stats).value()
    }

    pub fn forward_with<T: Real>(&self, p: &[T], input: &ModelInput, mode: BnMode) -> (RawOutput<T>, Vec<f64>) {
        let mut stats = self.bn_running.clone();
        let out = self.net.forward(p, input, mode, &mut stats);
        (out, stats)
    }

    /// Exponential moving average of batch statistics into the running ones.
    pub fn update_bn(&mut self, batch: &[f64]) {
        let m = self.config.bn_momentum;
        for (r, b) in self.bn_running.iter_mut().zip(batch) {
            *r = (1.0 - m) * *r + m * b;
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint { header: self.config.header(), tensors: Vec::new() };
        ck.push_layout("score/", &self.net.layout, &self.params);
        ck.tensors.push(("bn/running".into(), vec![self.bn_running.len()], self.bn_running.clone()));
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, path: &Path) -> Result<Self> {
        let config = ModelConfig::from_header(ck, path)?;
        let net = Network::new(&config);
        let params = ck.extract_layout("score/", &net.layout, path)?;
        let bn_running = match ck.tensor("bn/running") {
            Some((_, shape, data)) if shape == &[net.bn_stats_len()] => data.clone(),
            _ => return Err(Error::Format { path: path.to_path_buf(), msg: "missing or malformed bn/running".into() }),
        };
        if params.iter().chain(&bn_running).any(|v| !v.is_finite()) {
            return Err(Error::Format { path: path.to_path_buf(), msg: "non-finite parameter".into() });
        }
        Ok(Self { config, net, params, bn_running })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::read(path)?, path)
    }
}
