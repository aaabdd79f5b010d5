//! Isotropic Gaussian distribution on SO(3).
//!
//! The angle density with uniformly distributed axis is
//! `f(w) = (1 - cos w) / pi * g(w)` where
//! `g(w) = sum_l (2l+1) exp(-l(l+1) eps^2) sin((l+1/2) w) / sin(w/2)`.
//! For large `eps` the `l`-series converges in a handful of terms; for small
//! `eps` we evaluate its Poisson-summed dual
//! `g(w) = sqrt(pi) e^{eps^2/4} / (2 eps^3 sin(w/2)) * sum_k (-1)^k (w - 2 pi k) exp(-(w - 2 pi k)^2 / (4 eps^2))`,
//! which is the same function written as a wrapped Gaussian.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{Rotation, Vec3};

/// Below this `eps` the wrapped-Gaussian form is used.
pub const SERIES_MIN_EPS: f64 = 0.5;
const SERIES_MAX_L: usize = 2000;
const SERIES_REL_TOL: f64 = 1e-8;
const WRAP_TERMS: i32 = 3;

const CACHE_MAGIC: &[u8; 8] = b"IGSO3v1\0";

/// `l`-series evaluation of `g(w)` with adaptive truncation.
///
/// Stops once the term envelope `(2l+1)^2 exp(-l(l+1) eps^2)` falls below
/// `1e-8` of the running sum, after at least `ceil(10/eps)` terms when
/// `eps < 0.1`, and never beyond `l = 2000`.
pub fn series_kernel(omega: f64, eps: f64) -> f64 {
    let (value, _) = series_kernel_with_derivative(omega, eps);
    value
}

fn series_min_l(eps: f64) -> usize {
    if eps < 0.1 {
        ((10.0 / eps).ceil() as usize).min(SERIES_MAX_L)
    } else {
        0
    }
}

fn series_kernel_with_derivative(omega: f64, eps: f64) -> (f64, f64) {
    let e2 = eps * eps;
    let half = 0.5 * omega;
    let (s_half, c_half) = half.sin_cos();
    let at_origin = s_half.abs() < 1e-12;
    let l_min = series_min_l(eps);
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for l in 0..=SERIES_MAX_L {
        let lf = l as f64;
        let weight = (2.0 * lf + 1.0) * (-lf * (lf + 1.0) * e2).exp();
        let m = lf + 0.5;
        if at_origin {
            sum += weight * (2.0 * lf + 1.0);
        } else {
            let (s_m, c_m) = (m * omega).sin_cos();
            sum += weight * s_m / s_half;
            dsum += weight * (m * c_m * s_half - 0.5 * s_m * c_half) / (s_half * s_half);
        }
        let envelope = weight * (2.0 * lf + 1.0);
        if l >= l_min && l > 0 && envelope < SERIES_REL_TOL * sum.abs() {
            break;
        }
    }
    (sum, dsum)
}

/// Wrapped-Gaussian evaluation of `g(w)` and `d/dw log g(w)`.
fn wrapped_kernel_with_log_derivative(omega: f64, eps: f64) -> (f64, f64) {
    let e2 = eps * eps;
    let prefactor = PI.sqrt() * (0.25 * e2).exp() / (2.0 * e2 * eps);
    let exponents: Vec<(f64, f64)> = (-WRAP_TERMS..=WRAP_TERMS)
        .map(|k| {
            let d = omega - 2.0 * PI * k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (sign * d, d * d / (4.0 * e2))
        })
        .collect();
    let a_min = exponents.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);

    // h(w) = sum_k c_k e^{-a_k}; h'(w) = sum_k (+-1)(1 - d_k^2 / (2 eps^2)) e^{-a_k}
    let mut h = 0.0;
    let mut dh = 0.0;
    for (k, (c, a)) in (-WRAP_TERMS..=WRAP_TERMS).zip(&exponents) {
        let w = (a_min - a).exp();
        let d = omega - 2.0 * PI * k as f64;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        h += c * w;
        dh += sign * (1.0 - d * d / (2.0 * e2)) * w;
    }
    let half = 0.5 * omega;
    if half.sin().abs() < 1e-9 {
        // h(0) = 0, so g(0) = 2 * prefactor * h'(0); the log-derivative vanishes by symmetry.
        return (2.0 * prefactor * dh * (-a_min).exp(), 0.0);
    }
    let value = prefactor * (-a_min).exp() * h / half.sin();
    let log_derivative = dh / h - 0.5 / half.tan();
    (value, log_derivative)
}

/// Heat-kernel factor `g(w)` of the density (density with respect to the
/// Haar measure, up to normalization).
pub fn igso3_kernel(omega: f64, eps: f64) -> f64 {
    if eps >= SERIES_MIN_EPS {
        series_kernel(omega, eps)
    } else {
        wrapped_kernel_with_log_derivative(omega, eps).0
    }
}

/// `d/dw log g(w)`.
pub fn igso3_log_kernel_derivative(omega: f64, eps: f64) -> f64 {
    if eps >= SERIES_MIN_EPS {
        let (g, dg) = series_kernel_with_derivative(omega, eps);
        if g.abs() < 1e-300 {
            return 0.0;
        }
        dg / g
    } else {
        wrapped_kernel_with_log_derivative(omega, eps).1
    }
}

/// Density of the rotation angle `w` in `[0, pi]`, including the
/// `(1 - cos w) / pi` factor from the uniformly distributed axis.
pub fn igso3_density(omega: f64, eps: f64) -> f64 {
    (1.0 - omega.cos()) / PI * igso3_kernel(omega, eps)
}

/// Score of the isotropic Gaussian at relative rotation `r_rel` (current
/// rotation times the inverse of the mean), in axis-angle tangent
/// coordinates: `d/dw log g(w)` along the rotation axis.
pub fn igso3_score(r_rel: &Rotation, eps: f64) -> Vec3 {
    let v = r_rel.log();
    let omega = v.norm();
    if omega == 0.0 {
        return Vec3::zeros();
    }
    let w = omega.max(1e-6);
    v * (igso3_log_kernel_derivative(w, eps) / w)
}

/// Haar-uniform rotation via a uniformly distributed unit quaternion.
pub fn uniform_so3_sample<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let n2: f64 = q.iter().map(|x| x * x).sum();
        if n2 > 1e-12 {
            return Rotation::from_quaternion(q[0], q[1], q[2], q[3]);
        }
    }
}

pub fn uniform_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// CDF of the uniform (Haar) angle marginal `(w - sin w) / pi`.
pub fn uniform_angle_cdf(omega: f64) -> f64 {
    (omega - omega.sin()) / PI
}

#[derive(Clone, Debug, PartialEq)]
pub struct Igso3Params {
    pub eps_min: f64,
    pub eps_max: f64,
    pub n_eps: usize,
    pub n_omega: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for Igso3Params {
    fn default() -> Self {
        Self { eps_min: 1e-3, eps_max: 10.0, n_eps: 128, n_omega: 8192, mc_samples: 100_000, seed: 0x1650 }
    }
}

/// Tabulated angle densities, CDFs, and expected score magnitudes over a
/// log-spaced grid of `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Igso3Table {
    pub params: Igso3Params,
    pub eps_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub cdf: Vec<Vec<f64>>,
    pub score_norm: Vec<f64>,
}

thread_local! {
    static OFF_GRID_ROW: RefCell<Option<((u64, usize), Vec<f64>)>> = const { RefCell::new(None) };
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

pub fn omega_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect()
}

/// Density row and normalized trapezoidal CDF on `grid`.
pub fn angle_density_and_cdf(eps: f64, grid: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let density: Vec<f64> = grid.iter().map(|&w| igso3_density(w, eps).max(0.0)).collect();
    let mut cdf = Vec::with_capacity(grid.len());
    cdf.push(0.0);
    for i in 1..grid.len() {
        let step = 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
        cdf.push(cdf[i - 1] + step);
    }
    let total = *cdf.last().unwrap();
    for c in cdf.iter_mut() {
        *c /= total;
    }
    (density, cdf)
}

fn inverse_cdf(grid: &[f64], cdf: &[f64], u: f64) -> f64 {
    let idx = cdf.partition_point(|&c| c < u);
    if idx == 0 {
        return grid[0];
    }
    if idx >= cdf.len() {
        return grid[grid.len() - 1];
    }
    let (c0, c1) = (cdf[idx - 1], cdf[idx]);
    let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
    grid[idx - 1] + frac * (grid[idx] - grid[idx - 1])
}

impl Igso3Table {
    pub fn build(params: Igso3Params) -> Result<Self> {
        if !(params.eps_min > 0.0 && params.eps_max > params.eps_min) || params.n_eps < 2 || params.n_omega < 16 {
            return Err(Error::Parameter(format!("invalid IGSO(3) table parameters {params:?}")));
        }
        let (lo, hi) = (params.eps_min.ln(), params.eps_max.ln());
        let eps_grid: Vec<f64> =
            (0..params.n_eps).map(|i| (lo + (hi - lo) * i as f64 / (params.n_eps - 1) as f64).exp()).collect();
        let omega_grid = omega_grid(params.n_omega);
        let mut density = Vec::with_capacity(params.n_eps);
        let mut cdf = Vec::with_capacity(params.n_eps);
        for &eps in &eps_grid {
            let (d, c) = angle_density_and_cdf(eps, &omega_grid);
            density.push(d);
            cdf.push(c);
        }

        // Common random numbers across eps keep the estimate smooth in eps.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let uniforms: Vec<f64> = (0..params.mc_samples).map(|_| rng.random::<f64>()).collect();
        let score_norm = eps_grid
            .iter()
            .zip(&cdf)
            .map(|(&eps, row)| {
                let total: f64 = uniforms
                    .iter()
                    .map(|&u| igso3_log_kernel_derivative(inverse_cdf(&omega_grid, row, u), eps).abs())
                    .sum();
                total / params.mc_samples as f64
            })
            .collect();
        Ok(Self { params, eps_grid, omega_grid, density, cdf, score_norm })
    }

    /// Draws a rotation angle by inverse-CDF sampling. Uses the tabulated
    /// row when `eps` is a grid point, otherwise tabulates on the fly.
    pub fn sample_angle<R: Rng + ?Sized>(&self, eps: f64, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self.eps_grid.iter().position(|&e| e == eps) {
            Some(i) => inverse_cdf(&self.omega_grid, &self.cdf[i], u),
            None => OFF_GRID_ROW.with(|cache| {
                let mut cache = cache.borrow_mut();
                let key = (eps.to_bits(), self.omega_grid.len());
                if cache.as_ref().map(|c| c.0) != Some(key) {
                    *cache = Some((key, angle_density_and_cdf(eps, &self.omega_grid).1));
                }
                inverse_cdf(&self.omega_grid, &cache.as_ref().unwrap().1, u)
            }),
        }
    }

    /// Angle CDF at `omega` for the grid row closest to `eps`.
    pub fn angle_cdf(&self, eps_index: usize, omega: f64) -> f64 {
        let row = &self.cdf[eps_index];
        let pos = omega / PI * (self.omega_grid.len() - 1) as f64;
        let i = (pos.floor() as usize).min(self.omega_grid.len() - 2);
        let frac = pos - i as f64;
        row[i] * (1.0 - frac) + row[i + 1] * frac
    }

    /// `E |score|` under IG(eps), interpolated linearly in `log eps`.
    /// Values outside the grid are clamped to the boundary.
    pub fn expected_score_norm(&self, eps: f64) -> f64 {
        let n = self.eps_grid.len();
        if eps <= self.eps_grid[0] || eps >= self.eps_grid[n - 1] {
            let outside = eps < self.eps_grid[0] || eps > self.eps_grid[n - 1];
            if outside && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
                log::warn!("eps {eps} outside IGSO(3) table range; clamping");
            }
            return if eps <= self.eps_grid[0] { self.score_norm[0] } else { self.score_norm[n - 1] };
        }
        let le = eps.ln();
        let i = self.eps_grid.partition_point(|&e| e <= eps) - 1;
        let (l0, l1) = (self.eps_grid[i].ln(), self.eps_grid[i + 1].ln());
        let frac = (le - l0) / (l1 - l0);
        self.score_norm[i] * (1.0 - frac) + self.score_norm[i + 1] * frac
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CACHE_MAGIC)?;
        let p = &self.params;
        for v in [p.n_eps as u64, p.n_omega as u64, p.mc_samples as u64, p.seed] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [p.eps_min, p.eps_max] {
            w.write_all(&v.to_le_bytes())?;
        }
        let rows = self.density.iter().chain(&self.cdf);
        for v in self.eps_grid.iter().chain(rows.flatten()).chain(&self.score_norm) {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a cached table; fails if the header does not match `params`.
    pub fn read_cache(path: &Path, params: &Igso3Params) -> Result<Self> {
        let bad = |msg: &str| Error::Format { path: path.to_path_buf(), msg: msg.to_string() };
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut u = [0u64; 4];
        for v in u.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            *v = u64::from_le_bytes(b);
        }
        let mut read_f64 = || -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        };
        let eps_min = read_f64()?;
        let eps_max = read_f64()?;
        let stored = Igso3Params {
            eps_min,
            eps_max,
            n_eps: u[0] as usize,
            n_omega: u[1] as usize,
            mc_samples: u[2] as usize,
            seed: u[3],
        };
        if &stored != params {
            return Err(bad("table parameters differ"));
        }
        let eps_grid = (0..stored.n_eps).map(|_| read_f64()).collect::<Result<Vec<_>>>()?;
        let mut read_rows = || -> Result<Vec<Vec<f64>>> {
            (0..stored.n_eps).map(|_| (0..stored.n_omega).map(|_| read_f64()).collect()).collect()
        };
        let density = read_rows()?;
        let cdf = read_rows()?;
        let score_norm = (0..stored.n_eps).map(|_| read_f64()).collect::<Result<Vec<_>>>()?;
        Ok(Self { params: stored, eps_grid, omega_grid: omega_grid(params.n_omega), density, cdf, score_norm })
    }

    /// Loads the cache at `path`, rebuilding (and rewriting) it when missing
    /// or built with different parameters.
    pub fn load_or_build(path: &Path, params: Igso3Params) -> Result<Self> {
        match Self::read_cache(path, &params) {
            Ok(t) => Ok(t),
            Err(e) => {
                log::info!("rebuilding IGSO(3) table ({e})");
                let t = Self::build(params)?;
                t.write_cache(path)?;
                Ok(t)
            }
        }
    }
}

/// `mean * exp(w u)` with `u` uniform on the sphere and `w` drawn from the
/// tabulated angle distribution.
pub fn igso3_sample<R: Rng + ?Sized>(table: &Igso3Table, mean: &Rotation, eps: f64, rng: &mut R) -> Rotation {
    let axis = uniform_unit_vector(rng);
    let omega = table.sample_angle(eps, rng);
    *mean * Rotation::exp(&(axis * omega))
}
