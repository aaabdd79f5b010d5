//! Invariant regressor for the interface RMSD expected between unbound
//! and bound structures. It sees each unbound chain only through its own
//! intra-chain graph, so it is unchanged by rigid motions of either chain.

use std::path::Path;

use rand::SeedableRng;

use super::params::{Checkpoint, Layout, Mlp};
use super::ComplexFeatures;
use crate::autodiff::{Real, Tape, Var};
use crate::error::{Error, Result};
use crate::geometry::{Chain, ComplexState};
use crate::graph::{build_intra_graph, node_feature_dim, GraphKind, GraphParams, ResidueGraph};
use crate::optim::Adam;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IrmsdConfig {
    pub n_s: usize,
    pub layers: usize,
    pub embedding_width: usize,
    pub graph: GraphParams,
}

impl Default for IrmsdConfig {
    fn default() -> Self {
        Self { n_s: 16, layers: 2, embedding_width: 0, graph: GraphParams::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IrmsdModel {
    pub config: IrmsdConfig,
    pub layout: Layout,
    pub params: Vec<f64>,
    embed: Mlp,
    message: Vec<Mlp>,
    readout: Mlp,
}

/// Graph and static features of one unbound chain.
#[derive(Clone, Debug)]
pub struct ChainInput {
    pub features: Vec<Vec<f64>>,
    pub graph: ResidueGraph,
}

/// Regressor input for an unbound pair.
#[derive(Clone, Debug)]
pub struct IrmsdInput {
    pub receptor: ChainInput,
    pub ligand: ChainInput,
}

impl IrmsdInput {
    pub fn new(unbound: &ComplexState, features: &ComplexFeatures, graph: &GraphParams) -> Self {
        let chain = |c: &Chain, f: &[Vec<f64>], corr, kind| ChainInput {
            features: f.to_vec(),
            graph: build_intra_graph(c, kind, graph, Some(corr)),
        };
        Self {
            receptor: chain(&unbound.receptor, &features.receptor, &features.receptor_corr, GraphKind::ReceptorReceptor),
            ligand: chain(&unbound.ligand, &features.ligand, &features.ligand_corr, GraphKind::LigandLigand),
        }
    }
}

impl IrmsdModel {
    pub fn new(config: IrmsdConfig, seed: u64) -> Self {
        let mut layout = Layout::default();
        let ns = config.n_s;
        let embed = layout.mlp("irmsd.embed", node_feature_dim(config.embedding_width), ns, ns);
        let message = (0..config.layers)
            .map(|l| layout.mlp(&format!("irmsd.msg{l}"), 2 * ns + config.graph.edge_dim(), ns, ns))
            .collect();
        let readout = layout.mlp("irmsd.readout", 2 * ns + 2, ns, 1);
        let params = layout.init(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        Self { config, layout, params, embed, message, readout }
    }

    fn pool<T: Real>(&self, p: &[T], c: &ChainInput) -> Vec<T> {
        let mut s: Vec<Vec<T>> = c.features.iter().map(|f| self.embed.apply_f(p, f)).collect();
        let n = s.len();
        for mlp in &self.message {
            let mut incoming: Vec<Vec<Vec<T>>> = vec![Vec::new(); n];
            for (e, &(j, i)) in c.graph.edges.iter().enumerate() {
                let mut x = s[i].clone();
                x.extend_from_slice(&s[j]);
                x.extend(c.graph.edge_features[e].iter().map(|&v| T::cst(v)));
                incoming[i].push(mlp.apply(p, &x));
            }
            for (i, msgs) in incoming.iter().enumerate() {
                if msgs.is_empty() {
                    continue;
                }
                let inv = 1.0 / msgs.len() as f64;
                for q in 0..self.config.n_s {
                    let col: Vec<T> = msgs.iter().map(|m| m[q]).collect();
                    s[i][q] += T::sum(&col) * inv;
                }
            }
        }
        let inv = 1.0 / n as f64;
        (0..self.config.n_s).map(|q| T::sum(&s.iter().map(|v| v[q]).collect::<Vec<_>>()) * inv).collect()
    }

    pub fn forward_with<T: Real>(&self, p: &[T], input: &IrmsdInput) -> T {
        let mut x = self.pool(p, &input.receptor);
        x.extend(self.pool(p, &input.ligand));
        x.push(T::cst((input.receptor.features.len() as f64).ln()));
        x.push(T::cst((input.ligand.features.len() as f64).ln()));
        self.readout.apply(p, &x)[0].softplus()
    }

    /// Predicted iRMSD in Angstrom, always positive.
    pub fn predict(&self, input: &IrmsdInput) -> f64 {
        self.forward_with(&self.params, input).max(f64::MIN_POSITIVE)
    }

    /// Squared-error regression with Adam over the full set each step;
    /// returns the final mean loss.
    pub fn fit(&mut self, data: &[(IrmsdInput, f64)], steps: usize, lr: f64) -> f64 {
        let mut opt = Adam::new(self.params.len(), lr);
        let tape = Tape::new();
        let mut last = f64::NAN;
        for _ in 0..steps {
            tape.clear();
            let vars: Vec<Var> = self.params.iter().map(|&v| tape.var(v)).collect();
            let terms: Vec<Var> = data.iter().map(|(x, y)| (self.forward_with(&vars, x) - *y).square()).collect();
            let loss = Var::sum(&terms) * (1.0 / data.len().max(1) as f64);
            let g = tape.gradient(loss);
            let grad: Vec<f64> = vars.iter().map(|v| g.wrt(v)).collect();
            last = loss.val();
            opt.update(&mut self.params, &grad);
        }
        last
    }

    pub fn push_checkpoint(&self, ck: &mut Checkpoint) {
        ck.header.push(("irmsd.n_s".into(), self.config.n_s as f64));
        ck.header.push(("irmsd.layers".into(), self.config.layers as f64));
        ck.push_layout("aux/", &self.layout, &self.params);
    }

    /// Reads the regressor from `ck` if present.
    pub fn from_checkpoint(ck: &Checkpoint, graph: GraphParams, embedding_width: usize, path: &Path) -> Result<Option<Self>> {
        let (Some(ns), Some(layers)) = (ck.header_value("irmsd.n_s"), ck.header_value("irmsd.layers")) else {
            return Ok(None);
        };
        let config = IrmsdConfig { n_s: ns as usize, layers: layers as usize, embedding_width, graph };
        let mut m = Self::new(config, 0);
        m.params = ck.extract_layout("aux/", &m.layout, path)?;
        if m.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format { path: path.to_path_buf(), msg: "non-finite regressor parameter".into() });
        }
        Ok(Some(m))
    }
}
