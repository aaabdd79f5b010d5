//! Residue graphs and the invariant node/edge features fed to the score
//! network.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{AminoAcid, Chain, ComplexState, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphParams {
    pub intra_cutoff: f64,
    pub inter_base: f64,
    pub inter_sigma_mult: f64,
    pub rbf_count: usize,
    pub time_dim: usize,
    pub time_scale: f64,
}

impl Default for GraphParams {
    fn default() -> Self {
        Self { intra_cutoff: 10.0, inter_base: 40.0, inter_sigma_mult: 3.0, rbf_count: 32, time_dim: 32, time_scale: 1000.0 }
    }
}

impl GraphParams {
    pub fn inter_cutoff(&self, sigma_tr: f64) -> f64 {
        self.inter_base + self.inter_sigma_mult * sigma_tr
    }

    /// Edge feature width: RBF plus the correlation slot.
    pub fn edge_dim(&self) -> usize {
        self.rbf_count + 1
    }
}

/// Which chain messages come from and go to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    ReceptorReceptor,
    LigandLigand,
    ReceptorLigand,
    LigandReceptor,
}

impl GraphKind {
    pub const ALL: [GraphKind; 4] =
        [GraphKind::ReceptorReceptor, GraphKind::LigandLigand, GraphKind::ReceptorLigand, GraphKind::LigandReceptor];

    /// `(source is ligand, destination is ligand)`.
    pub fn sides(self) -> (bool, bool) {
        match self {
            GraphKind::ReceptorReceptor => (false, false),
            GraphKind::LigandLigand => (true, true),
            GraphKind::ReceptorLigand => (false, true),
            GraphKind::LigandReceptor => (true, false),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_intra(self) -> bool {
        let (a, b) = self.sides();
        a == b
    }
}

/// Directed edges `src -> dst` (residue indices within their chains),
/// sorted by `(src, dst)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidueGraph {
    pub kind: GraphKind,
    pub cutoff: f64,
    /// Destination-chain residues taking part in the graph.
    pub nodes: Vec<usize>,
    pub edges: Vec<(usize, usize)>,
    /// `x_src - x_dst` for each edge.
    pub vectors: Vec<Vec3>,
    pub edge_features: Vec<Vec<f64>>,
}

impl ResidueGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Gaussian radial basis with `count` centres on `[0, cutoff]` and width
/// `cutoff / count`.
pub fn rbf_expand(d: f64, cutoff: f64, count: usize) -> Vec<f64> {
    let w = cutoff / count as f64;
    (0..count)
        .map(|k| {
            let c = cutoff * k as f64 / (count - 1).max(1) as f64;
            (-(d - c).powi(2) / (2.0 * w * w)).exp()
        })
        .collect()
}

/// Interleaved `[sin(f_0 x), cos(f_0 x), sin(f_1 x), ...]` with
/// `x = scale * time` and geometrically spaced frequencies from 1 down to
/// `1e-4`.
pub fn sinusoidal_time_embedding(time: f64, dim: usize, scale: f64) -> Vec<f64> {
    assert!(dim % 2 == 0 && dim > 0, "time embedding dimension must be even");
    let half = dim / 2;
    let x = time * scale;
    let mut out = Vec::with_capacity(dim);
    for k in 0..half {
        let freq = (-(10_000f64).ln() * k as f64 / (half - 1).max(1) as f64).exp();
        out.push((x * freq).sin());
        out.push((x * freq).cos());
    }
    out
}

fn build_graph(
    kind: GraphKind,
    src: &[Vec3],
    dst: &[Vec3],
    cutoff: f64,
    params: &GraphParams,
    correlation: Option<&DMatrix<f64>>,
) -> ResidueGraph {
    let intra = kind.is_intra();
    let mut edges = Vec::new();
    let mut vectors = Vec::new();
    let mut edge_features = Vec::new();
    let mut used = vec![false; dst.len()];
    for (s, xs) in src.iter().enumerate() {
        for (d, xd) in dst.iter().enumerate() {
            if intra && s == d {
                continue;
            }
            let v = xs - xd;
            let dist = v.norm();
            if dist >= cutoff {
                continue;
            }
            let mut feat = rbf_expand(dist, cutoff, params.rbf_count);
            feat.push(correlation.map_or(0.0, |c| c[(s, d)]));
            edges.push((s, d));
            vectors.push(v);
            edge_features.push(feat);
            used[d] = true;
        }
    }
    let nodes = if intra { (0..dst.len()).collect() } else { (0..dst.len()).filter(|&i| used[i]).collect() };
    ResidueGraph { kind, cutoff, nodes, edges, vectors, edge_features }
}

/// Radius graph within one chain; `correlation` fills the last edge slot.
pub fn build_intra_graph(
    chain: &Chain,
    kind: GraphKind,
    params: &GraphParams,
    correlation: Option<&DMatrix<f64>>,
) -> ResidueGraph {
    let x = chain.positions();
    build_graph(kind, &x, &x, params.intra_cutoff, params, correlation)
}

/// Cross-chain graphs `(receptor -> ligand, ligand -> receptor)`.
pub fn build_inter_graphs(
    receptor: &Chain,
    ligand: &Chain,
    sigma_tr: f64,
    params: &GraphParams,
) -> (ResidueGraph, ResidueGraph) {
    let cutoff = params.inter_cutoff(sigma_tr);
    let xr = receptor.positions();
    let xl = ligand.positions();
    (
        build_graph(GraphKind::ReceptorLigand, &xr, &xl, cutoff, params, None),
        build_graph(GraphKind::LigandReceptor, &xl, &xr, cutoff, params, None),
    )
}

/// All four graphs, indexed by [`GraphKind::index`].
#[derive(Clone, Debug)]
pub struct ComplexGraphs {
    pub graphs: [ResidueGraph; 4],
}

impl ComplexGraphs {
    pub fn build(
        state: &ComplexState,
        sigma_tr: f64,
        params: &GraphParams,
        receptor_corr: Option<&DMatrix<f64>>,
        ligand_corr: Option<&DMatrix<f64>>,
    ) -> Self {
        let rr = build_intra_graph(&state.receptor, GraphKind::ReceptorReceptor, params, receptor_corr);
        let ll = build_intra_graph(&state.ligand, GraphKind::LigandLigand, params, ligand_corr);
        let (rl, lr) = build_inter_graphs(&state.receptor, &state.ligand, sigma_tr, params);
        Self { graphs: [rr, ll, rl, lr] }
    }

    pub fn get(&self, kind: GraphKind) -> &ResidueGraph {
        &self.graphs[kind.index()]
    }
}

pub fn one_hot(aa: AminoAcid) -> Vec<f64> {
    let mut v = vec![0.0; AminoAcid::COUNT];
    v[aa.index()] = 1.0;
    v
}

/// Static per-residue features: one-hot type, evolutionary embedding (zeros
/// when absent) and normalized MSF.
pub fn node_features(
    chain: &Chain,
    msf_normalized: &[f64],
    embedding: Option<&[Vec<f64>]>,
    embedding_width: usize,
) -> Result<Vec<Vec<f64>>> {
    if msf_normalized.len() != chain.len() {
        return Err(Error::Correspondence(format!(
            "{} MSF values for chain {} of length {}",
            msf_normalized.len(),
            chain.id,
            chain.len()
        )));
    }
    if let Some(e) = embedding {
        if e.len() != chain.len() || e.iter().any(|v| v.len() != embedding_width) {
            return Err(Error::Correspondence(format!(
                "embedding for chain {} must have {} rows of width {}",
                chain.id,
                chain.len(),
                embedding_width
            )));
        }
    }
    Ok(chain
        .residues
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut f = one_hot(r.aa);
            match embedding {
                Some(e) => f.extend_from_slice(&e[i]),
                None => f.extend(std::iter::repeat_n(0.0, embedding_width)),
            }
            f.push(msf_normalized[i]);
            f
        })
        .collect())
}

pub fn node_feature_dim(embedding_width: usize) -> usize {
    AminoAcid::COUNT + embedding_width + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp_so3, Frame, ResidueInfo, RigidTransform, Rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn chain_at(id: char, pts: &[Vec3]) -> Chain {
        let residues = (0..pts.len()).map(|i| ResidueInfo::new(i as i32, AminoAcid::from_index(i % 21))).collect();
        let frames = pts.iter().map(|p| Frame::new(*p, Rotation::identity())).collect();
        Chain::new(id, residues, frames).unwrap()
    }

    fn random_chain(id: char, seed: u64, n: usize, spread: f64, offset: Vec3) -> Chain {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n).map(|_| offset + Vec3::from_fn(|_, _| rng.random_range(-spread..spread))).collect();
        chain_at(id, &pts)
    }

    #[test]
    fn intra_cutoff_pairs() {
        let p = GraphParams::default();
        let g = build_intra_graph(&chain_at('A', &[Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0)]), GraphKind::LigandLigand, &p, None);
        assert_eq!(g.edges, vec![(0, 1), (1, 0)]);
        let g = build_intra_graph(&chain_at('A', &[Vec3::zeros(), Vec3::new(12.0, 0.0, 0.0)]), GraphKind::LigandLigand, &p, None);
        assert!(g.is_empty());
        assert_eq!(g.nodes, vec![0, 1]);
    }

    #[test]
    fn intra_graph_matches_brute_force() {
        let p = GraphParams::default();
        let c = random_chain('A', 1, 40, 15.0, Vec3::zeros());
        let g = build_intra_graph(&c, GraphKind::ReceptorReceptor, &p, None);
        let x = c.positions();
        let mut expect = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                if i != j && (x[i] - x[j]).norm() < 10.0 {
                    expect.push((i, j));
                }
            }
        }
        assert_eq!(g.edges, expect);
        assert!(g.vectors.iter().all(|v| v.norm() < 10.0));
    }

    #[test]
    fn inter_graph_cutoffs() {
        let p = GraphParams::default();
        let r = random_chain('A', 2, 10, 5.0, Vec3::zeros());
        let far = random_chain('B', 3, 10, 5.0, Vec3::new(200.0, 0.0, 0.0));
        let (rl, lr) = build_inter_graphs(&r, &far, 0.5, &p);
        assert!(rl.is_empty() && lr.is_empty() && rl.nodes.is_empty());

        let near = random_chain('B', 4, 10, 5.0, Vec3::new(50.0, 0.0, 0.0));
        let (small, _) = build_inter_graphs(&r, &near, 0.5, &p);
        let (big, _) = build_inter_graphs(&r, &near, 20.0, &p);
        assert!(small.edges.iter().all(|e| big.edges.contains(e)));
        assert!(big.len() > small.len());
        let xr = r.positions();
        let xl = near.positions();
        let expect: Vec<(usize, usize)> = (0..10)
            .flat_map(|s| (0..10).map(move |d| (s, d)))
            .filter(|&(s, d)| (xr[s] - xl[d]).norm() < 41.5)
            .collect();
        assert_eq!(small.edges, expect);
        let mut endpoints: Vec<usize> = expect.iter().map(|e| e.1).collect();
        endpoints.sort();
        endpoints.dedup();
        assert_eq!(small.nodes, endpoints);
    }

    #[test]
    fn rbf_values() {
        let f = rbf_expand(10.0 * 5.0 / 31.0, 10.0, 32);
        assert!((f[5] - 1.0).abs() < 1e-12);
        assert!(f.iter().all(|&v| v > 0.0 && v <= 1.0));
        let w = 10.0 / 32.0;
        assert!(rbf_expand(10.0 + 4.0 * w + 0.01, 10.0, 32).iter().all(|&v| v < 1e-3));
    }

    #[test]
    fn time_embedding_properties() {
        let e = sinusoidal_time_embedding(0.0, 32, 1000.0);
        for k in 0..16 {
            assert_eq!(e[2 * k], 0.0);
            assert_eq!(e[2 * k + 1], 1.0);
        }
        let grid: Vec<Vec<f64>> = (0..=200).map(|i| sinusoidal_time_embedding(i as f64 / 200.0, 32, 1000.0)).collect();
        for a in 0..grid.len() {
            assert!(grid[a].iter().all(|v| v.abs() <= 1.0));
            for b in (a + 1)..grid.len() {
                let d: f64 = grid[a].iter().zip(&grid[b]).map(|(x, y)| (x - y).powi(2)).sum();
                assert!(d > 0.0);
            }
        }
    }

    #[test]
    fn features_invariant_under_rigid_motion() {
        let p = GraphParams::default();
        let state = ComplexState::new(
            random_chain('A', 5, 15, 8.0, Vec3::zeros()),
            random_chain('B', 6, 12, 8.0, Vec3::new(14.0, 0.0, 0.0)),
        );
        let q = exp_so3(&Vec3::new(0.3, -2.0, 1.1));
        let moved = state.transformed(&RigidTransform::new(q, Vec3::new(-30.0, 4.0, 9.0)));
        let a = ComplexGraphs::build(&state, 3.0, &p, None, None);
        let b = ComplexGraphs::build(&moved, 3.0, &p, None, None);
        for (ga, gb) in a.graphs.iter().zip(&b.graphs) {
            assert_eq!(ga.edges, gb.edges);
            for (fa, fb) in ga.edge_features.iter().zip(&gb.edge_features) {
                assert!(fa.iter().zip(fb).all(|(x, y)| (x - y).abs() < 1e-10));
            }
            for (va, vb) in ga.vectors.iter().zip(&gb.vectors) {
                assert!((q * va - vb).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn node_feature_layout() {
        let c = random_chain('A', 7, 4, 5.0, Vec3::zeros());
        let f = node_features(&c, &[0.0, 0.5, 1.0, 0.2], None, 3).unwrap();
        assert_eq!(f[0].len(), node_feature_dim(3));
        for row in &f {
            assert_eq!(row[..21].iter().sum::<f64>(), 1.0);
        }
        assert_eq!(f[1][node_feature_dim(3) - 1], 0.5);
        assert!(node_features(&c, &[0.0; 3], None, 0).is_err());
        let emb = vec![vec![1.0, 2.0]; 4];
        let g = node_features(&c, &[0.0; 4], Some(&emb), 2).unwrap();
        assert_eq!(&g[2][21..23], &[1.0, 2.0]);
    }
}
