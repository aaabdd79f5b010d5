//! WebAssembly bindings for the static demo page in `www/`.

use flexdock::geometry::ComplexState;
use flexdock::metrics::{irmsd, INTERFACE_CUTOFF};
use flexdock::sampler::{sample, OracleScore, SamplerConfig, SamplerMode};
use flexdock::schedule::{alpha, beta_from_irmsd, GlobalSchedule};
use flexdock::so3::{angle_density_and_cdf, omega_grid};
use flexdock::synthetic::{synthetic_pair, SyntheticSpec};
use rand::{Rng, SeedableRng};
use wasm_bindgen::prelude::*;

// Errors reach JavaScript as thrown strings.
fn js_err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Rotation-angle density of IGSO(3) at `eps` on `n` points of `[0, pi]`,
/// with a histogram of `samples` inverse-CDF draws on `bins` bins.
#[wasm_bindgen]
pub struct AngleCurve {
    omega: Vec<f64>,
    density: Vec<f64>,
    uniform: Vec<f64>,
    histogram: Vec<f64>,
}

#[wasm_bindgen]
impl AngleCurve {
    pub fn omega(&self) -> Vec<f64> {
        self.omega.clone()
    }
    pub fn density(&self) -> Vec<f64> {
        self.density.clone()
    }
    /// Angle density of a uniformly random rotation.
    pub fn uniform(&self) -> Vec<f64> {
        self.uniform.clone()
    }
    /// Normalized so the bars integrate to one.
    pub fn histogram(&self) -> Vec<f64> {
        self.histogram.clone()
    }
}

#[wasm_bindgen]
pub fn igso3_angles(eps: f64, n: usize, samples: usize, bins: usize, seed: u64) -> Result<AngleCurve, String> {
    if !(eps > 0.0 && eps.is_finite()) || n < 2 || bins == 0 {
        return Err("need eps > 0, n >= 2 and bins >= 1".into());
    }
    let omega = omega_grid(n);
    let (density, cdf) = angle_density_and_cdf(eps, &omega);
    let uniform = omega.iter().map(|w| (1.0 - w.cos()) / std::f64::consts::PI).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut histogram = vec![0.0; bins];
    let width = std::f64::consts::PI / bins as f64;
    for _ in 0..samples {
        let u: f64 = rng.random();
        let k = cdf.partition_point(|&c| c < u).clamp(1, n - 1);
        let frac = (u - cdf[k - 1]) / (cdf[k] - cdf[k - 1]).max(f64::MIN_POSITIVE);
        let w = omega[k - 1] + frac.clamp(0.0, 1.0) * (omega[k] - omega[k - 1]);
        histogram[((w / width) as usize).min(bins - 1)] += 1.0;
    }
    if samples > 0 {
        histogram.iter_mut().for_each(|h| *h /= samples as f64 * width);
    }
    Ok(AngleCurve { omega, density, uniform, histogram })
}

/// Rows of `[t, sigma_tr, sigma_rot, alpha(t)]` flattened, for `n` evenly
/// spaced times in `[0, 1]`. `beta` is derived from `irmsd` when `beta <= 0`.
#[wasm_bindgen]
pub fn schedule_curves(irmsd_value: f64, beta: f64, n: usize) -> Result<Vec<f64>, String> {
    let sched = GlobalSchedule::default();
    let beta = if beta > 0.0 { beta } else { beta_from_irmsd(irmsd_value, &sched).map_err(js_err)? };
    let n = n.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        out.extend([t, sched.sigma_tr(t), sched.sigma_rot(t), alpha(t, beta)]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn beta_for_irmsd(irmsd_value: f64) -> Result<f64, String> {
    beta_from_irmsd(irmsd_value, &GlobalSchedule::default()).map_err(js_err)
}

/// One oracle-guided reverse trajectory on a synthetic pair.
#[wasm_bindgen]
pub struct DockRun {
    n_receptor: usize,
    beta: f64,
    unbound_irmsd: f64,
    frames: Vec<Vec<f64>>,
    irmsd: Vec<f64>,
}

fn flat_positions(s: &ComplexState) -> Vec<f64> {
    s.positions().iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

#[wasm_bindgen]
impl DockRun {
    pub fn n_receptor(&self) -> usize {
        self.n_receptor
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    /// Interface RMSD of the superposed unbound chains.
    pub fn unbound_irmsd(&self) -> f64 {
        self.unbound_irmsd
    }
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
    /// Calpha coordinates of frame `k`, receptor first, as `x y z` triples.
    pub fn frame(&self, k: usize) -> Vec<f64> {
        self.frames.get(k).cloned().unwrap_or_default()
    }
    /// Interface RMSD to the bound complex after each step.
    pub fn irmsd_trace(&self) -> Vec<f64> {
        self.irmsd.clone()
    }
    pub fn final_irmsd(&self) -> f64 {
        self.irmsd.last().copied().unwrap_or(f64::NAN)
    }
}

#[wasm_bindgen]
pub fn oracle_dock(
    n_receptor: usize,
    n_ligand: usize,
    flexibility: f64,
    seed: u64,
    steps: usize,
    deterministic: bool,
) -> Result<DockRun, String> {
    let pair = synthetic_pair(&SyntheticSpec::new(n_receptor, n_ligand, flexibility, seed)).map_err(js_err)?;
    let config = SamplerConfig {
        n_steps: steps,
        mode: if deterministic { SamplerMode::Deterministic } else { SamplerMode::Stochastic },
        seed,
        ..SamplerConfig::default()
    };
    let beta = beta_from_irmsd(pair.irmsd.max(1e-3), &config.schedule).map_err(js_err)?;
    let oracle = OracleScore::new(pair.bound.clone());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let run = sample(&pair.unbound, &oracle, &config, beta, &mut rng).map_err(js_err)?;
    let states = &run.trajectory.states;
    let irmsd = states
        .iter()
        .map(|s| irmsd(s, &pair.bound, INTERFACE_CUTOFF))
        .collect::<Result<Vec<_>, _>>()
        .map_err(js_err)?;
    Ok(DockRun {
        n_receptor,
        beta,
        unbound_irmsd: pair.irmsd,
        frames: states.iter().map(flat_positions).collect(),
        irmsd,
    })
}
