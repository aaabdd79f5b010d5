//! Global noise scales and the adaptive residue flexing schedule.

use crate::error::{Error, Result};

/// Fraction of flexing considered complete at the calibrated time `t*`.
pub const FLEX_COMPLETION: f64 = 0.99;
/// Lower clamp on `t*` when calibrating `beta` from a predicted iRMSD.
pub const T_FLOOR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Translation,
    Rotation,
}

/// Geometric (log-linear) noise scales for the global pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalSchedule {
    pub tr_min: f64,
    pub tr_max: f64,
    pub rot_min: f64,
    pub rot_max: f64,
}

impl Default for GlobalSchedule {
    fn default() -> Self {
        Self { tr_min: 0.5, tr_max: 20.0, rot_min: 0.05, rot_max: 1.65 }
    }
}

impl GlobalSchedule {
    pub fn new(tr_min: f64, tr_max: f64, rot_min: f64, rot_max: f64) -> Result<Self> {
        let s = Self { tr_min, tr_max, rot_min, rot_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo > 0.0 && hi > lo && hi.is_finite();
        if !ok(self.tr_min, self.tr_max) || !ok(self.rot_min, self.rot_max) {
            return Err(Error::Parameter(format!("noise scales need 0 < min < max: {self:?}")));
        }
        Ok(())
    }

    fn bounds(&self, kind: NoiseKind) -> (f64, f64) {
        match kind {
            NoiseKind::Translation => (self.tr_min, self.tr_max),
            NoiseKind::Rotation => (self.rot_min, self.rot_max),
        }
    }

    /// `sigma_min^(1-t) * sigma_max^t`.
    pub fn sigma(&self, t: f64, kind: NoiseKind) -> f64 {
        let (lo, hi) = self.bounds(kind);
        if t == 0.0 {
            return lo;
        }
        if t == 1.0 {
            return hi;
        }
        lo.powf(1.0 - t) * hi.powf(t)
    }

    pub fn sigma_tr(&self, t: f64) -> f64 {
        self.sigma(t, NoiseKind::Translation)
    }

    pub fn sigma_rot(&self, t: f64) -> f64 {
        self.sigma(t, NoiseKind::Rotation)
    }

    /// Squared diffusion coefficient of the reverse SDE, `d(var)/dt`.
    ///
    /// Translation variance per axis is `sigma^2`. The rotation kernel
    /// `exp(-l(l+1) eps^2)` corresponds to tangent-space variance `2 eps^2`
    /// per axis, hence the extra factor of two.
    pub fn g_squared(&self, t: f64, kind: NoiseKind) -> f64 {
        let (lo, hi) = self.bounds(kind);
        let s = self.sigma(t, kind);
        let var_scale = match kind {
            NoiseKind::Translation => 1.0,
            NoiseKind::Rotation => 2.0,
        };
        var_scale * 2.0 * s * s * (hi / lo).ln()
    }
}

/// Residue-level flexing schedule: the interpolation weight `alpha(tau)`
/// from bound (`alpha = 0`) towards unbound, and the rate scaling the
/// residue updates during sampling.
pub trait FlexSchedule: Send + Sync {
    fn alpha(&self, tau: f64) -> f64;
    fn rate(&self, tau: f64) -> f64;
}

/// How the residue update rate is derived from `alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FlexRateMode {
    /// `alpha' / (1 - alpha)`, i.e. the constant `beta`.
    Constant,
    /// `alpha' / alpha`, the rate that keeps the reverse residue trajectory
    /// on the forward interpolation path.
    #[default]
    Interpolation,
}

impl std::str::FromStr for FlexRateMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "beta" => Ok(Self::Constant),
            "interpolation" => Ok(Self::Interpolation),
            _ => Err(Error::Parameter(format!("unknown flex rate mode `{s}` (constant | interpolation)"))),
        }
    }
}

/// `alpha(tau) = 1 - exp(-beta tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentialFlex {
    pub beta: f64,
    pub mode: FlexRateMode,
}

impl ExponentialFlex {
    pub fn new(beta: f64) -> Result<Self> {
        Self::with_mode(beta, FlexRateMode::default())
    }

    pub fn with_mode(beta: f64, mode: FlexRateMode) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { beta, mode })
    }
}

impl FlexSchedule for ExponentialFlex {
    fn alpha(&self, tau: f64) -> f64 {
        alpha(tau, self.beta)
    }

    fn rate(&self, tau: f64) -> f64 {
        match self.mode {
            FlexRateMode::Constant => flex_rate(tau, self.beta),
            FlexRateMode::Interpolation => interpolation_rate(tau, self.beta),
        }
    }
}

pub fn alpha(tau: f64, beta: f64) -> f64 {
    -(-beta * tau).exp_m1()
}

/// `alpha'(tau) / (1 - alpha(tau))`, which for the exponential schedule is
/// the constant `beta`.
pub fn flex_rate(_tau: f64, beta: f64) -> f64 {
    beta
}

/// `alpha'(tau) / alpha(tau) = beta / (exp(beta tau) - 1)`; infinite at 0.
pub fn interpolation_rate(tau: f64, beta: f64) -> f64 {
    if tau <= 0.0 {
        return f64::INFINITY;
    }
    beta / (beta * tau).exp_m1()
}

/// Rate `beta` such that `alpha(t*) = FLEX_COMPLETION` where `t*` is the
/// time at which the translation noise scale equals the predicted iRMSD.
pub fn beta_from_irmsd(irmsd: f64, schedule: &GlobalSchedule) -> Result<f64> {
    beta_from_irmsd_with(irmsd, schedule, T_FLOOR, FLEX_COMPLETION)
}

pub fn beta_from_irmsd_with(irmsd: f64, schedule: &GlobalSchedule, t_floor: f64, completion: f64) -> Result<f64> {
    if !(irmsd > 0.0 && irmsd.is_finite()) {
        return Err(Error::Parameter(format!("predicted iRMSD must be positive, got {irmsd}")));
    }
    if !(0.0 < t_floor && t_floor <= 1.0 && 0.0 < completion && completion < 1.0) {
        return Err(Error::Parameter(format!("bad calibration constants t_floor={t_floor} completion={completion}")));
    }
    let t_star =
        ((irmsd / schedule.tr_min).ln() / (schedule.tr_max / schedule.tr_min).ln()).clamp(t_floor, 1.0);
    Ok(-(1.0 - completion).ln() / t_star)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_endpoints_and_midpoint() {
        let s = GlobalSchedule::new(0.1, 10.0, 0.05, 1.65).unwrap();
        assert_eq!(s.sigma_tr(0.0), 0.1);
        assert_eq!(s.sigma_tr(1.0), 10.0);
        assert!((s.sigma_tr(0.5) - 1.0).abs() < 1e-14);
        assert_eq!(s.sigma_rot(1.0), 1.65);
    }

    #[test]
    fn sigma_is_log_linear() {
        let s = GlobalSchedule::default();
        let (a, b, c) = (0.1f64, 0.4, 0.9);
        let la = s.sigma_tr(a).ln();
        let lb = s.sigma_tr(b).ln();
        let lc = s.sigma_tr(c).ln();
        let predicted = la + (lc - la) * (b - a) / (c - a);
        assert!((lb - predicted).abs() < 1e-12);
    }

    #[test]
    fn g_squared_matches_variance_derivative() {
        let s = GlobalSchedule::default();
        let h = 1e-6;
        for &t in &[0.1, 0.5, 0.9] {
            let fd = (s.sigma_tr(t + h).powi(2) - s.sigma_tr(t - h).powi(2)) / (2.0 * h);
            assert!((fd - s.g_squared(t, NoiseKind::Translation)).abs() < 1e-6 * fd);
            let fd = 2.0 * (s.sigma_rot(t + h).powi(2) - s.sigma_rot(t - h).powi(2)) / (2.0 * h);
            assert!((fd - s.g_squared(t, NoiseKind::Rotation)).abs() < 1e-6 * fd);
        }
    }

    #[test]
    fn invalid_schedule_rejected() {
        assert!(GlobalSchedule::new(1.0, 0.5, 0.05, 1.0).is_err());
        assert!(GlobalSchedule::new(0.0, 1.0, 0.05, 1.0).is_err());
        assert!(ExponentialFlex::new(0.0).is_err());
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(0.0, 3.0), 0.0);
        assert!((alpha(1.0, 100f64.ln()) - 0.99).abs() < 1e-15);
        let grid: Vec<f64> = (0..=100).map(|i| alpha(i as f64 / 100.0, 2.5)).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!(alpha(0.3, 2.0) < alpha(0.3, 2.1));
    }

    #[test]
    fn flex_rate_is_beta() {
        assert_eq!(flex_rate(0.1, 2.0), 2.0);
        assert_eq!(flex_rate(0.9, 2.0), 2.0);
        let beta = 2.0;
        let h = 1e-6;
        for i in 1..20 {
            let tau = i as f64 / 20.0;
            let d = (alpha(tau + h, beta) - alpha(tau - h, beta)) / (2.0 * h);
            let fd = d / (1.0 - alpha(tau, beta));
            assert!((fd - flex_rate(tau, beta)).abs() < 1e-8, "{fd}");
        }
    }

    #[test]
    fn interpolation_rate_matches_finite_difference() {
        let beta = 3.0;
        let h = 1e-6;
        let flex = ExponentialFlex::with_mode(beta, FlexRateMode::Interpolation).unwrap();
        for i in 1..20 {
            let tau = i as f64 / 20.0;
            let d = (alpha(tau + h, beta) - alpha(tau - h, beta)) / (2.0 * h);
            assert!((d / alpha(tau, beta) - flex.rate(tau)).abs() < 1e-7);
        }
        assert!(flex.rate(0.0).is_infinite());
        assert_eq!("interpolation".parse::<FlexRateMode>().unwrap(), FlexRateMode::Interpolation);
    }

    #[test]
    fn beta_calibration_boundaries() {
        let s = GlobalSchedule::default();
        assert!((beta_from_irmsd(s.tr_max, &s).unwrap() - 100f64.ln()).abs() < 1e-12);
        assert!((beta_from_irmsd(s.tr_min, &s).unwrap() - 100f64.ln() / T_FLOOR).abs() < 1e-9);
        assert!(beta_from_irmsd(0.0, &s).is_err());
        assert!(beta_from_irmsd(-1.0, &s).is_err());
    }

    #[test]
    fn beta_nonincreasing_in_irmsd() {
        let s = GlobalSchedule::default();
        let betas: Vec<f64> = (1..200).map(|i| beta_from_irmsd(0.5 + 0.1 * i as f64, &s).unwrap()).collect();
        assert!(betas.windows(2).all(|w| w[1] <= w[0]));
    }
}
