//! Flat `key = value` run configuration covering every module default.
//!
//! ```text
//! # comment
//! schedule.sigma_tr_max = 20
//! sampler.mode = deterministic
//! ```

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::{FapeParams, LossWeights};
use crate::model::irmsd::IrmsdConfig;
use crate::model::ModelConfig;
use crate::nma::NmaParams;
use crate::sampler::SamplerConfig;
use crate::schedule::GlobalSchedule;
use crate::so3::Igso3Params;
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub schedule: GlobalSchedule,
    pub igso3: Igso3Params,
    pub nma: NmaParams,
    pub model: ModelConfig,
    pub irmsd: IrmsdConfig,
    pub train: TrainConfig,
    pub sampler: SamplerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: GlobalSchedule::default(),
            igso3: Igso3Params::default(),
            nma: NmaParams::default(),
            model: ModelConfig::default(),
            irmsd: IrmsdConfig::default(),
            train: TrainConfig::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

pub const KEYS: &[&str] = &[
    "schedule.sigma_tr_min",
    "schedule.sigma_tr_max",
    "schedule.sigma_rot_min",
    "schedule.sigma_rot_max",
    "igso3.eps_min",
    "igso3.eps_max",
    "igso3.n_eps",
    "igso3.n_omega",
    "igso3.mc_samples",
    "igso3.seed",
    "nma.cutoff",
    "nma.gamma",
    "nma.modes",
    "graph.intra_cutoff",
    "graph.inter_base",
    "graph.inter_sigma_mult",
    "graph.rbf_count",
    "graph.time_dim",
    "graph.time_scale",
    "model.n_s",
    "model.n_v",
    "model.layers",
    "model.embedding_width",
    "model.head_rbf",
    "model.head_radius",
    "model.lddt_radius",
    "model.bn_momentum",
    "model.bn_eps",
    "irmsd.n_s",
    "irmsd.layers",
    "train.steps",
    "train.lr",
    "train.shared_time",
    "train.grad_clip",
    "train.bn_mode",
    "loss.w_diff",
    "loss.w_tr",
    "loss.w_rot",
    "loss.w_res_tr_rec",
    "loss.w_res_rot_rec",
    "loss.w_res_tr_lig",
    "loss.w_res_rot_lig",
    "loss.w_ifape",
    "loss.w_clddt",
    "loss.fape_cutoff",
    "loss.fape_clamp",
    "loss.fape_scale",
    "flex.rate_mode",
    "sampler.n_steps",
    "sampler.mode",
    "sampler.beta",
    "sampler.candidates",
    "sampler.final_step_noise",
    "sampler.bn_stats",
];

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value.parse::<T>().map_err(|_| format!("bad value `{value}` for `{key}`"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("bad boolean `{value}` for `{key}`")),
    }
}

fn opt_f64(key: &str, value: &str) -> std::result::Result<Option<f64>, String> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn bn_name(mode: crate::model::BnMode) -> String {
    match mode {
        crate::model::BnMode::Batch => "batch".into(),
        crate::model::BnMode::Running => "running".into(),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("none".into(), |x| x.to_string())
}

impl RunConfig {
    /// Sets one key. Unknown keys yield [`Error::UnknownConfigKey`]; bad
    /// values yield a message for the caller to place.
    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), Option<String>> {
        let (s, m) = (&mut self.schedule, &mut self.model);
        let w = &mut self.train.weights;
        let f = &mut self.train.fape;
        let r = match key {
            "schedule.sigma_tr_min" => parse(key, value).map(|v| s.tr_min = v),
            "schedule.sigma_tr_max" => parse(key, value).map(|v| s.tr_max = v),
            "schedule.sigma_rot_min" => parse(key, value).map(|v| s.rot_min = v),
            "schedule.sigma_rot_max" => parse(key, value).map(|v| s.rot_max = v),
            "igso3.eps_min" => parse(key, value).map(|v| self.igso3.eps_min = v),
            "igso3.eps_max" => parse(key, value).map(|v| self.igso3.eps_max = v),
            "igso3.n_eps" => parse(key, value).map(|v| self.igso3.n_eps = v),
            "igso3.n_omega" => parse(key, value).map(|v| self.igso3.n_omega = v),
            "igso3.mc_samples" => parse(key, value).map(|v| self.igso3.mc_samples = v),
            "igso3.seed" => parse(key, value).map(|v| self.igso3.seed = v),
            "nma.cutoff" => parse(key, value).map(|v| self.nma.cutoff = v),
            "nma.gamma" => parse(key, value).map(|v| self.nma.gamma = v),
            "nma.modes" => parse(key, value).map(|v| self.nma.num_modes = v),
            "graph.intra_cutoff" => parse(key, value).map(|v| m.graph.intra_cutoff = v),
            "graph.inter_base" => parse(key, value).map(|v| m.graph.inter_base = v),
            "graph.inter_sigma_mult" => parse(key, value).map(|v| m.graph.inter_sigma_mult = v),
            "graph.rbf_count" => parse(key, value).map(|v| m.graph.rbf_count = v),
            "graph.time_dim" => parse(key, value).map(|v| m.graph.time_dim = v),
            "graph.time_scale" => parse(key, value).map(|v| m.graph.time_scale = v),
            "model.n_s" => parse(key, value).map(|v| m.n_s = v),
            "model.n_v" => parse(key, value).map(|v| m.n_v = v),
            "model.layers" => parse(key, value).map(|v| m.layers = v),
            "model.embedding_width" => parse(key, value).map(|v| m.embedding_width = v),
            "model.head_rbf" => parse(key, value).map(|v| m.head_rbf = v),
            "model.head_radius" => parse(key, value).map(|v| m.head_radius = v),
            "model.lddt_radius" => parse(key, value).map(|v| m.lddt_radius = v),
            "model.bn_momentum" => parse(key, value).map(|v| m.bn_momentum = v),
            "model.bn_eps" => parse(key, value).map(|v| m.bn_eps = v),
            "irmsd.n_s" => parse(key, value).map(|v| self.irmsd.n_s = v),
            "irmsd.layers" => parse(key, value).map(|v| self.irmsd.layers = v),
            "train.steps" => parse(key, value).map(|v| self.train.steps = v),
            "train.lr" => parse(key, value).map(|v| self.train.lr = v),
            "train.shared_time" => parse_bool(key, value).map(|v| self.train.shared_time = v),
            "train.grad_clip" => opt_f64(key, value).map(|v| self.train.grad_clip = v),
            "train.bn_mode" => match value {
                "batch" => Ok(self.train.bn_mode = crate::model::BnMode::Batch),
                "running" => Ok(self.train.bn_mode = crate::model::BnMode::Running),
                _ => Err(format!("bad value `{value}` for `{key}` (batch | running)")),
            },
            "loss.w_diff" => parse(key, value).map(|v| w.diff = v),
            "loss.w_tr" => parse(key, value).map(|v| w.tr = v),
            "loss.w_rot" => parse(key, value).map(|v| w.rot = v),
            "loss.w_res_tr_rec" => parse(key, value).map(|v| w.res_tr_rec = v),
            "loss.w_res_rot_rec" => parse(key, value).map(|v| w.res_rot_rec = v),
            "loss.w_res_tr_lig" => parse(key, value).map(|v| w.res_tr_lig = v),
            "loss.w_res_rot_lig" => parse(key, value).map(|v| w.res_rot_lig = v),
            "loss.w_ifape" => parse(key, value).map(|v| w.ifape = v),
            "loss.w_clddt" => parse(key, value).map(|v| w.clddt = v),
            "loss.fape_cutoff" => parse(key, value).map(|v| f.interface_cutoff = v),
            "loss.fape_clamp" => parse(key, value).map(|v| f.clamp = v),
            "loss.fape_scale" => parse(key, value).map(|v| f.scale = v),
            "flex.rate_mode" => value.parse().map_err(|e: Error| e.to_string()).map(|v| {
                self.train.rate_mode = v;
                self.sampler.rate_mode = v;
            }),
            "sampler.n_steps" => parse(key, value).map(|v| self.sampler.n_steps = v),
            "sampler.mode" => value.parse().map_err(|e: Error| e.to_string()).map(|v| self.sampler.mode = v),
            "sampler.beta" => opt_f64(key, value).map(|v| self.sampler.beta = v),
            "sampler.candidates" => parse(key, value).map(|v| self.sampler.candidates = v),
            "sampler.final_step_noise" => parse_bool(key, value).map(|v| self.sampler.final_step_noise = v),
            "sampler.bn_stats" => match value {
                "batch" => Ok(self.sampler.bn_stats = crate::model::BnMode::Batch),
                "running" => Ok(self.sampler.bn_stats = crate::model::BnMode::Running),
                _ => Err(format!("bad value `{value}` for `{key}` (batch | running)")),
            },
            _ => return Err(None),
        };
        r.map_err(Some)
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str, path: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Parse { path: path.into(), line: i + 1, msg: format!("expected `key = value`, got `{line}`") });
            };
            let (k, v) = (k.trim(), v.trim());
            match self.set(k, v) {
                Ok(()) => {}
                Err(None) => return Err(Error::UnknownConfigKey { key: k.into(), valid: KEYS.join(", ") }),
                Err(Some(msg)) => return Err(Error::Parse { path: path.into(), line: i + 1, msg }),
            }
        }
        self.validate()
    }

    pub fn from_text(text: &str, path: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text, path)?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.model.validate()?;
        self.train.weights.validate()?;
        let mut sampler = self.sampler;
        sampler.schedule = self.schedule;
        sampler.validate()
    }

    /// All keys with their current values, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (s, g, m, w, f) = (&self.schedule, &self.model.graph, &self.model, &self.train.weights, &self.train.fape);
        let vals: Vec<String> = vec![
            s.tr_min.to_string(),
            s.tr_max.to_string(),
            s.rot_min.to_string(),
            s.rot_max.to_string(),
            self.igso3.eps_min.to_string(),
            self.igso3.eps_max.to_string(),
            self.igso3.n_eps.to_string(),
            self.igso3.n_omega.to_string(),
            self.igso3.mc_samples.to_string(),
            self.igso3.seed.to_string(),
            self.nma.cutoff.to_string(),
            self.nma.gamma.to_string(),
            self.nma.num_modes.to_string(),
            g.intra_cutoff.to_string(),
            g.inter_base.to_string(),
            g.inter_sigma_mult.to_string(),
            g.rbf_count.to_string(),
            g.time_dim.to_string(),
            g.time_scale.to_string(),
            m.n_s.to_string(),
            m.n_v.to_string(),
            m.layers.to_string(),
            m.embedding_width.to_string(),
            m.head_rbf.to_string(),
            m.head_radius.to_string(),
            m.lddt_radius.to_string(),
            m.bn_momentum.to_string(),
            m.bn_eps.to_string(),
            self.irmsd.n_s.to_string(),
            self.irmsd.layers.to_string(),
            self.train.steps.to_string(),
            self.train.lr.to_string(),
            self.train.shared_time.to_string(),
            fmt_opt(self.train.grad_clip),
            bn_name(self.train.bn_mode),
            w.diff.to_string(),
            w.tr.to_string(),
            w.rot.to_string(),
            w.res_tr_rec.to_string(),
            w.res_rot_rec.to_string(),
            w.res_tr_lig.to_string(),
            w.res_rot_lig.to_string(),
            w.ifape.to_string(),
            w.clddt.to_string(),
            f.interface_cutoff.to_string(),
            f.clamp.to_string(),
            f.scale.to_string(),
            match self.sampler.rate_mode {
                crate::schedule::FlexRateMode::Constant => "constant".into(),
                crate::schedule::FlexRateMode::Interpolation => "interpolation".into(),
            },
            self.sampler.n_steps.to_string(),
            match self.sampler.mode {
                crate::sampler::SamplerMode::Stochastic => "stochastic".into(),
                crate::sampler::SamplerMode::Deterministic => "deterministic".into(),
            },
            fmt_opt(self.sampler.beta),
            self.sampler.candidates.to_string(),
            self.sampler.final_step_noise.to_string(),
            bn_name(self.sampler.bn_stats),
        ];
        KEYS.iter().copied().zip(vals).collect()
    }

    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Sampler settings with the shared schedule filled in.
    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig { schedule: self.schedule, ..self.sampler }
    }

    pub fn weights(&self) -> LossWeights {
        self.train.weights
    }

    pub fn fape(&self) -> FapeParams {
        self.train.fape
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::default();
        c.apply_text("schedule.sigma_tr_max = 25\nsampler.mode = deterministic\nsampler.beta = 2.5\n", "x").unwrap();
        assert_eq!(c.schedule.tr_max, 25.0);
        assert_eq!(c.sampler.beta, Some(2.5));
        let back = RunConfig::from_text(&c.to_text(), "y").unwrap();
        assert_eq!(back, c);
        assert_eq!(RunConfig::default().entries().len(), KEYS.len());
    }

    #[test]
    fn unknown_key_lists_valid_keys() {
        let err = RunConfig::from_text("# c\n\nfoo.bar = 1\n", "x").unwrap_err();
        match err {
            Error::UnknownConfigKey { key, valid } => {
                assert_eq!(key, "foo.bar");
                assert!(valid.contains("sampler.n_steps"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn bad_value_reports_line() {
        let err = RunConfig::from_text("nma.cutoff = 15\nnma.modes = many\n", "cfg").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(RunConfig::from_text("sampler.n_steps = 1\n", "cfg").is_err());
        assert!(RunConfig::from_text("no equals sign\n", "cfg").is_err());
    }
}
