//! Anisotropic elastic network normal modes: per-residue mean square
//! fluctuations and the residue cross-correlation matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::geometry::{Chain, Vec3};

/// Relative eigenvalue floor for rigid-body mode detection.
pub const LAMBDA_FLOOR_REL: f64 = 1e-8;
const DUPLICATE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmaParams {
    pub cutoff: f64,
    pub gamma: f64,
    pub num_modes: usize,
}

impl Default for NmaParams {
    fn default() -> Self {
        Self { cutoff: 15.0, gamma: 1.0, num_modes: 20 }
    }
}

/// Retained nontrivial modes in ascending eigenvalue order.
#[derive(Clone, Debug)]
pub struct NormalModes {
    pub eigenvalues: Vec<f64>,
    /// One unit 3n-vector per column.
    pub eigenvectors: DMatrix<f64>,
    pub n_residues: usize,
}

impl NormalModes {
    pub fn num_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Displacement of residue `i` in mode `m`.
    pub fn displacement(&self, m: usize, i: usize) -> Vec3 {
        let col = self.eigenvectors.column(m);
        Vec3::new(col[3 * i], col[3 * i + 1], col[3 * i + 2])
    }
}

/// ANM Hessian with springs of stiffness `gamma` between residues closer
/// than `cutoff`.
pub fn build_anm_hessian(coords: &[Vec3], cutoff: f64, gamma: f64) -> Result<DMatrix<f64>> {
    let n = coords.len();
    if n < 2 {
        return Err(Error::Parameter(format!("elastic network needs at least 2 residues, got {n}")));
    }
    let mut h = DMatrix::zeros(3 * n, 3 * n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = coords[j] - coords[i];
            let r2 = d.norm_squared();
            if r2.sqrt() < DUPLICATE_TOL {
                return Err(Error::DuplicateCoordinates(i, j));
            }
            if r2 > cutoff * cutoff {
                continue;
            }
            let block = d * d.transpose() * (-gamma / r2);
            for a in 0..3 {
                for b in 0..3 {
                    let v = block[(a, b)];
                    h[(3 * i + a, 3 * j + b)] = v;
                    h[(3 * j + a, 3 * i + b)] = v;
                    h[(3 * i + a, 3 * i + b)] -= v;
                    h[(3 * j + a, 3 * j + b)] -= v;
                }
            }
        }
    }
    Ok(h)
}

fn contact_components(coords: &[Vec3], cutoff: f64) -> Vec<Vec<usize>> {
    let n = coords.len();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut k = 0;
        while k < members.len() {
            let i = members[k];
            for j in 0..n {
                if label[j] == usize::MAX && (coords[j] - coords[i]).norm() <= cutoff {
                    label[j] = id;
                    members.push(j);
                }
            }
            k += 1;
        }
        comps.push(members);
    }
    comps
}

/// Eigen-decomposes `h`, discards the near-zero rigid-body modes and keeps
/// the next `num_modes`.
///
/// More than six near-zero modes means the network falls apart into
/// independently moving pieces; `coords` and `cutoff` are used to report
/// them.
pub fn compute_modes(h: &DMatrix<f64>, num_modes: usize, coords: &[Vec3], cutoff: f64) -> Result<NormalModes> {
    let n = h.nrows() / 3;
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if lambda_max <= 0.0 {
        return Err(Error::Connectivity { components: n, detail: "no springs within cutoff".into() });
    }
    let floor = LAMBDA_FLOOR_REL * lambda_max;
    let zero_modes = order.iter().filter(|&&k| eig.eigenvalues[k] < floor).count();
    if zero_modes > 6 {
        let comps = contact_components(coords, cutoff);
        let detail = comps
            .iter()
            .map(|c| format!("[{}]", c.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")))
            .collect::<Vec<_>>()
            .join(" ");
        return Err(Error::Connectivity {
            components: comps.len(),
            detail: format!("{zero_modes} zero modes; residue groups {detail}"),
        });
    }
    let kept: Vec<usize> = order.into_iter().skip(zero_modes).take(num_modes).collect();
    let eigenvalues = kept.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::zeros(3 * n, kept.len());
    for (c, &k) in kept.iter().enumerate() {
        let v: DVector<f64> = eig.eigenvectors.column(k).into_owned();
        eigenvectors.set_column(c, &(&v / v.norm()));
    }
    Ok(NormalModes { eigenvalues, eigenvectors, n_residues: n })
}

/// `MSF_i = sum_m |u_i^m|^2 / lambda_m`.
pub fn msf(modes: &NormalModes) -> Vec<f64> {
    (0..modes.n_residues)
        .map(|i| {
            modes
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(m, &l)| modes.displacement(m, i).norm_squared() / l)
                .sum()
        })
        .collect()
}

/// Normalized mode-weighted correlation of residue displacements.
pub fn cross_correlation(modes: &NormalModes) -> Result<DMatrix<f64>> {
    let n = modes.n_residues;
    let fluct = msf(modes);
    if let Some(i) = fluct.iter().position(|&f| !(f > 0.0)) {
        return Err(Error::ZeroFluctuation(i));
    }
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let cov: f64 = modes
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(m, &l)| modes.displacement(m, i).dot(&modes.displacement(m, j)) / l)
                .sum();
            let v = (cov / (fluct[i] * fluct[j]).sqrt()).clamp(-1.0, 1.0);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Flexibility features of one chain.
#[derive(Clone, Debug)]
pub struct ChainDynamics {
    pub msf: Vec<f64>,
    /// MSF min-max scaled to `[0, 1]` within the chain.
    pub msf_normalized: Vec<f64>,
    pub correlation: DMatrix<f64>,
}

pub fn min_max_normalize(v: &[f64]) -> Vec<f64> {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (x - lo) / (hi - lo)).collect()
}

pub fn chain_dynamics(chain: &Chain, params: &NmaParams) -> Result<ChainDynamics> {
    let coords = chain.positions();
    let h = build_anm_hessian(&coords, params.cutoff, params.gamma)?;
    let modes = compute_modes(&h, params.num_modes, &coords, params.cutoff)?;
    let msf = msf(&modes);
    let correlation = cross_correlation(&modes)?;
    Ok(ChainDynamics { msf_normalized: min_max_normalize(&msf), msf, correlation })
}
