//! Run configuration: a flat, line-oriented `key=value` format with dotted
//! key paths. Files are trivially diffable, unknown keys are rejected, and a
//! config round-trips through `to_text`/`parse_text` losslessly. Precedence
//! when loading: defaults < file < environment (`EMOSIM_*`) < explicit
//! overrides (CLI flags).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    FaceOnly,
    FaceNatural,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::FaceOnly => "face_only",
            Condition::FaceNatural => "face_natural",
        }
    }
}

/// How the internal-appraisal scalar enters interoception.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IaMode {
    Add,
    Subtract,
}

impl IaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            IaMode::Add => "add",
            IaMode::Subtract => "subtract",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub condition: Condition,
    pub with_second_layer: bool,
    pub epochs: u64,
    pub seed: u64,
    pub t_lstm: u64,
    pub t_l2: u64,
    pub checkpoint_every: u64,
    pub ram_checkpoint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageSection {
    pub side: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RamSection {
    pub scales: usize,
    pub patch: usize,
    pub scale_factor: usize,
    pub glimpses: usize,
    pub hidden: usize,
    pub feature: usize,
    pub location_sigma: f64,
    pub reward_band: f64,
    pub alpha: f64,
    pub batch: usize,
    pub epochs: u64,
    pub baseline_lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSection {
    pub natural_count: usize,
    pub corpus_size: usize,
    pub corpus_noise: f64,
    pub holdout_fraction: f64,
    pub action_cost_scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppraisalSection {
    pub tau: f64,
    pub eta: f64,
    pub d_eyelid: f64,
    pub d_sad: f64,
    pub eyelid_threshold: f64,
    pub ia_mode: IaMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemorySection {
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomeostasisSection {
    pub c: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSection {
    pub kernel: usize,
    pub channels: usize,
    pub alpha: f64,
    pub train_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgSection {
    pub gamma: f64,
    pub zeta: f64,
    pub capacity: usize,
    pub batch: usize,
    pub warmup: usize,
    pub actor_alpha: f64,
    pub critic_alpha: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub ou_theta: f64,
    pub ou_sigma: f64,
    pub ou_dt: f64,
    pub state_side: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub bands: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub run: RunSection,
    pub image: ImageSection,
    pub ram: RamSection,
    pub env: EnvSection,
    pub appraisal: AppraisalSection,
    pub memory: MemorySection,
    pub homeostasis: HomeostasisSection,
    pub predictor: PredictorSection,
    pub ddpg: DdpgSection,
    pub analysis: AnalysisSection,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            run: RunSection {
                condition: Condition::FaceOnly,
                with_second_layer: true,
                epochs: 20000,
                seed: 0,
                t_lstm: 100,
                t_l2: 1000,
                checkpoint_every: 0,
                ram_checkpoint: String::new(),
            },
            image: ImageSection { side: 32 },
            ram: RamSection {
                scales: 3,
                patch: 8,
                scale_factor: 2,
                glimpses: 6,
                hidden: 128,
                feature: 128,
                location_sigma: 0.15,
                reward_band: 0.5,
                alpha: 0.001,
                batch: 32,
                epochs: 50,
                baseline_lr: 0.1,
            },
            env: EnvSection {
                natural_count: 8,
                corpus_size: 2000,
                corpus_noise: 0.05,
                holdout_fraction: 0.1,
                action_cost_scale: 0.5,
            },
            appraisal: AppraisalSection {
                tau: 50.0,
                eta: 0.01,
                d_eyelid: 50.0,
                d_sad: 75.0,
                eyelid_threshold: 0.25,
                ia_mode: IaMode::Add,
            },
            memory: MemorySection { gamma: 0.1 },
            homeostasis: HomeostasisSection { c: 40.0, window: 1000 },
            predictor: PredictorSection { kernel: 5, channels: 5, alpha: 0.001, train_window: 25 },
            ddpg: DdpgSection {
                gamma: 0.99,
                zeta: 0.001,
                capacity: 500,
                batch: 200,
                warmup: 200,
                actor_alpha: 0.0001,
                critic_alpha: 0.001,
                actor_hidden: vec![48, 32, 16],
                critic_hidden: vec![48, 32],
                ou_theta: 0.15,
                ou_sigma: 0.2,
                ou_dt: 1.0,
                state_side: 16,
            },
            analysis: AnalysisSection { bands: 5 },
        }
    }
}

fn p_u64(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| Error::config(key, format!("expected integer, got `{v}`")))
}

fn p_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::config(key, format!("expected integer, got `{v}`")))
}

fn p_f64(key: &str, v: &str) -> Result<f64> {
    let x: f64 =
        v.parse().map_err(|_| Error::config(key, format!("expected number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "value must be finite"));
    }
    Ok(x)
}

fn p_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected true/false, got `{v}`"))),
    }
}

fn p_list(key: &str, v: &str) -> Result<Vec<usize>> {
    let list: Result<Vec<usize>> = v.split(',').map(|s| p_usize(key, s.trim())).collect();
    let list = list?;
    if list.is_empty() || list.iter().any(|&n| n == 0) {
        return Err(Error::config(key, "expected a non-empty list of positive integers"));
    }
    Ok(list)
}

fn p_condition(key: &str, v: &str) -> Result<Condition> {
    match v.replace('-', "_").as_str() {
        "face_only" => Ok(Condition::FaceOnly),
        "face_natural" => Ok(Condition::FaceNatural),
        _ => Err(Error::config(key, format!("expected face_only or face_natural, got `{v}`"))),
    }
}

fn p_ia_mode(key: &str, v: &str) -> Result<IaMode> {
    match v {
        "add" => Ok(IaMode::Add),
        "subtract" => Ok(IaMode::Subtract),
        _ => Err(Error::config(key, format!("expected add or subtract, got `{v}`"))),
    }
}

fn fmt_list(list: &[usize]) -> String {
    list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
}

impl Config {
    /// Sets one key from its text form. Unknown keys are an error that names
    /// the offending path.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "run.condition" => self.run.condition = p_condition(key, v)?,
            "run.with_second_layer" => self.run.with_second_layer = p_bool(key, v)?,
            "run.epochs" => self.run.epochs = p_u64(key, v)?,
            "run.seed" => self.run.seed = p_u64(key, v)?,
            "run.t_lstm" => self.run.t_lstm = p_u64(key, v)?,
            "run.t_l2" => self.run.t_l2 = p_u64(key, v)?,
            "run.checkpoint_every" => self.run.checkpoint_every = p_u64(key, v)?,
            "run.ram_checkpoint" => self.run.ram_checkpoint = v.to_string(),
            "image.side" => self.image.side = p_usize(key, v)?,
            "ram.scales" => self.ram.scales = p_usize(key, v)?,
            "ram.patch" => self.ram.patch = p_usize(key, v)?,
            "ram.scale_factor" => self.ram.scale_factor = p_usize(key, v)?,
            "ram.glimpses" => self.ram.glimpses = p_usize(key, v)?,
            "ram.hidden" => self.ram.hidden = p_usize(key, v)?,
            "ram.feature" => self.ram.feature = p_usize(key, v)?,
            "ram.location_sigma" => self.ram.location_sigma = p_f64(key, v)?,
            "ram.reward_band" => self.ram.reward_band = p_f64(key, v)?,
            "ram.alpha" => self.ram.alpha = p_f64(key, v)?,
            "ram.batch" => self.ram.batch = p_usize(key, v)?,
            "ram.epochs" => self.ram.epochs = p_u64(key, v)?,
            "ram.baseline_lr" => self.ram.baseline_lr = p_f64(key, v)?,
            "env.natural_count" => self.env.natural_count = p_usize(key, v)?,
            "env.corpus_size" => self.env.corpus_size = p_usize(key, v)?,
            "env.corpus_noise" => self.env.corpus_noise = p_f64(key, v)?,
            "env.holdout_fraction" => self.env.holdout_fraction = p_f64(key, v)?,
            "env.action_cost_scale" => self.env.action_cost_scale = p_f64(key, v)?,
            "appraisal.tau" => self.appraisal.tau = p_f64(key, v)?,
            "appraisal.eta" => self.appraisal.eta = p_f64(key, v)?,
            "appraisal.d_eyelid" => self.appraisal.d_eyelid = p_f64(key, v)?,
            "appraisal.d_sad" => self.appraisal.d_sad = p_f64(key, v)?,
            "appraisal.eyelid_threshold" => self.appraisal.eyelid_threshold = p_f64(key, v)?,
            "appraisal.ia_mode" => self.appraisal.ia_mode = p_ia_mode(key, v)?,
            "memory.gamma" => self.memory.gamma = p_f64(key, v)?,
            "homeostasis.c" => self.homeostasis.c = p_f64(key, v)?,
            "homeostasis.window" => self.homeostasis.window = p_usize(key, v)?,
            "predictor.kernel" => self.predictor.kernel = p_usize(key, v)?,
            "predictor.channels" => self.predictor.channels = p_usize(key, v)?,
            "predictor.alpha" => self.predictor.alpha = p_f64(key, v)?,
            "predictor.train_window" => self.predictor.train_window = p_usize(key, v)?,
            "ddpg.gamma" => self.ddpg.gamma = p_f64(key, v)?,
            "ddpg.zeta" => self.ddpg.zeta = p_f64(key, v)?,
            "ddpg.capacity" => self.ddpg.capacity = p_usize(key, v)?,
            "ddpg.batch" => self.ddpg.batch = p_usize(key, v)?,
            "ddpg.warmup" => self.ddpg.warmup = p_usize(key, v)?,
            "ddpg.actor_alpha" => self.ddpg.actor_alpha = p_f64(key, v)?,
            "ddpg.critic_alpha" => self.ddpg.critic_alpha = p_f64(key, v)?,
            "ddpg.actor_hidden" => self.ddpg.actor_hidden = p_list(key, v)?,
            "ddpg.critic_hidden" => self.ddpg.critic_hidden = p_list(key, v)?,
            "ddpg.ou_theta" => self.ddpg.ou_theta = p_f64(key, v)?,
            "ddpg.ou_sigma" => self.ddpg.ou_sigma = p_f64(key, v)?,
            "ddpg.ou_dt" => self.ddpg.ou_dt = p_f64(key, v)?,
            "ddpg.state_side" => self.ddpg.state_side = p_usize(key, v)?,
            "analysis.bands" => self.analysis.bands = p_usize(key, v)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    /// All keys with their current values, in the canonical file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("run.condition", self.run.condition.as_str().to_string()),
            ("run.with_second_layer", self.run.with_second_layer.to_string()),
            ("run.epochs", self.run.epochs.to_string()),
            ("run.seed", self.run.seed.to_string()),
            ("run.t_lstm", self.run.t_lstm.to_string()),
            ("run.t_l2", self.run.t_l2.to_string()),
            ("run.checkpoint_every", self.run.checkpoint_every.to_string()),
            ("run.ram_checkpoint", self.run.ram_checkpoint.clone()),
            ("image.side", self.image.side.to_string()),
            ("ram.scales", self.ram.scales.to_string()),
            ("ram.patch", self.ram.patch.to_string()),
            ("ram.scale_factor", self.ram.scale_factor.to_string()),
            ("ram.glimpses", self.ram.glimpses.to_string()),
            ("ram.hidden", self.ram.hidden.to_string()),
            ("ram.feature", self.ram.feature.to_string()),
            ("ram.location_sigma", self.ram.location_sigma.to_string()),
            ("ram.reward_band", self.ram.reward_band.to_string()),
            ("ram.alpha", self.ram.alpha.to_string()),
            ("ram.batch", self.ram.batch.to_string()),
            ("ram.epochs", self.ram.epochs.to_string()),
            ("ram.baseline_lr", self.ram.baseline_lr.to_string()),
            ("env.natural_count", self.env.natural_count.to_string()),
            ("env.corpus_size", self.env.corpus_size.to_string()),
            ("env.corpus_noise", self.env.corpus_noise.to_string()),
            ("env.holdout_fraction", self.env.holdout_fraction.to_string()),
            ("env.action_cost_scale", self.env.action_cost_scale.to_string()),
            ("appraisal.tau", self.appraisal.tau.to_string()),
            ("appraisal.eta", self.appraisal.eta.to_string()),
            ("appraisal.d_eyelid", self.appraisal.d_eyelid.to_string()),
            ("appraisal.d_sad", self.appraisal.d_sad.to_string()),
            ("appraisal.eyelid_threshold", self.appraisal.eyelid_threshold.to_string()),
            ("appraisal.ia_mode", self.appraisal.ia_mode.as_str().to_string()),
            ("memory.gamma", self.memory.gamma.to_string()),
            ("homeostasis.c", self.homeostasis.c.to_string()),
            ("homeostasis.window", self.homeostasis.window.to_string()),
            ("predictor.kernel", self.predictor.kernel.to_string()),
            ("predictor.channels", self.predictor.channels.to_string()),
            ("predictor.alpha", self.predictor.alpha.to_string()),
            ("predictor.train_window", self.predictor.train_window.to_string()),
            ("ddpg.gamma", self.ddpg.gamma.to_string()),
            ("ddpg.zeta", self.ddpg.zeta.to_string()),
            ("ddpg.capacity", self.ddpg.capacity.to_string()),
            ("ddpg.batch", self.ddpg.batch.to_string()),
            ("ddpg.warmup", self.ddpg.warmup.to_string()),
            ("ddpg.actor_alpha", self.ddpg.actor_alpha.to_string()),
            ("ddpg.critic_alpha", self.ddpg.critic_alpha.to_string()),
            ("ddpg.actor_hidden", fmt_list(&self.ddpg.actor_hidden)),
            ("ddpg.critic_hidden", fmt_list(&self.ddpg.critic_hidden)),
            ("ddpg.ou_theta", self.ddpg.ou_theta.to_string()),
            ("ddpg.ou_sigma", self.ddpg.ou_sigma.to_string()),
            ("ddpg.ou_dt", self.ddpg.ou_dt.to_string()),
            ("ddpg.state_side", self.ddpg.state_side.to_string()),
            ("analysis.bands", self.analysis.bands.to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Defaults overridden by the given text. Lines are `key=value`; blank
    /// lines and `#` comments are ignored.
    pub fn parse_text(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        cfg.merge_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), format!("not a key=value line: `{line}`"))
            })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Config::parse_text(&text)
    }

    /// Applies `EMOSIM_*` environment overrides. A variable matches a key when
    /// stripping the prefix, lowercasing, and mapping `.` to `_` coincide
    /// (e.g. `EMOSIM_RUN_EPOCHS` sets `run.epochs`). Unknown `EMOSIM_*`
    /// variables are an error so typos do not pass silently.
    pub fn apply_env_overrides(
        &mut self,
        vars: impl Iterator<Item = (String, String)>,
    ) -> Result<()> {
        let known: Vec<&'static str> = self.entries().iter().map(|(k, _)| *k).collect();
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix("EMOSIM_") else { continue };
            let normalized = rest.to_ascii_lowercase();
            let mut hit = None;
            for k in &known {
                if k.replace('.', "_") == normalized {
                    hit = Some(*k);
                    break;
                }
            }
            match hit {
                Some(k) => self.set(k, &value)?,
                None => {
                    return Err(Error::config(name, "environment override matches no config key"))
                }
            }
        }
        Ok(())
    }

    /// Cross-field checks shared by every entry point.
    pub fn validate(&self) -> Result<()> {
        let a = &self.appraisal;
        if a.d_eyelid == a.d_sad {
            return Err(Error::config(
                "appraisal.d_sad",
                "the two recovery offsets must differ (d_eyelid == d_sad)",
            ));
        }
        if a.d_eyelid <= 0.0 || a.d_sad <= 0.0 || a.tau <= 0.0 {
            return Err(Error::config("appraisal", "tau and recovery offsets must be positive"));
        }
        if self.run.t_lstm == 0 || self.run.t_l2 == 0 {
            return Err(Error::config("run.t_lstm", "cadences must be positive"));
        }
        if self.run.t_l2 % self.run.t_lstm != 0 {
            return Err(Error::config("run.t_l2", "must be a multiple of run.t_lstm"));
        }
        if !(0.0..1.0).contains(&self.env.holdout_fraction) || self.env.holdout_fraction == 0.0 {
            return Err(Error::config("env.holdout_fraction", "must lie in (0, 1)"));
        }
        if self.image.side == 0 || self.ddpg.state_side == 0
            || self.image.side % self.ddpg.state_side != 0
        {
            return Err(Error::config(
                "ddpg.state_side",
                "must evenly divide image.side for the pooled state view",
            ));
        }
        if self.predictor.train_window == 0
            || self.predictor.train_window as u64 > self.run.t_lstm
        {
            return Err(Error::config(
                "predictor.train_window",
                "must be in 1..=run.t_lstm (pairs are gathered between updates)",
            ));
        }
        if self.ddpg.batch == 0 || self.ddpg.capacity == 0 || self.ddpg.warmup == 0 {
            return Err(Error::config("ddpg", "batch, capacity and warmup must be positive"));
        }
        if self.ddpg.warmup > self.ddpg.capacity {
            return Err(Error::config("ddpg.warmup", "cannot exceed ddpg.capacity"));
        }
        if self.ram.scales == 0 || self.ram.glimpses == 0 || self.ram.patch == 0
            || self.ram.scale_factor == 0
        {
            return Err(Error::config("ram", "glimpse geometry values must be positive"));
        }
        if self.ram.location_sigma < 0.0 {
            return Err(Error::config("ram.location_sigma", "must be non-negative"));
        }
        if self.env.corpus_size < 10 {
            return Err(Error::config("env.corpus_size", "too small to split"));
        }
        if self.homeostasis.window == 0 {
            return Err(Error::config("homeostasis.window", "must be positive"));
        }
        if self.analysis.bands == 0 {
            return Err(Error::config("analysis.bands", "must be positive"));
        }
        if self.ddpg.ou_sigma < 0.0 || self.ddpg.ou_theta < 0.0 || self.ddpg.ou_dt <= 0.0 {
            return Err(Error::config("ddpg.ou_theta", "noise parameters out of range"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        let text = cfg.to_text();
        let back = Config::parse_text(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn round_trip_preserves_awkward_floats() {
        let mut cfg = Config::default();
        cfg.memory.gamma = 0.1 + 1e-15;
        cfg.ddpg.zeta = 1e-8;
        cfg.appraisal.eta = 1.0 / 3.0;
        let back = Config::parse_text(&cfg.to_text()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_key_is_rejected_with_its_path() {
        let err = Config::parse_text("run.epoch=5\n").unwrap_err();
        assert!(err.to_string().contains("run.epoch"), "{err}");
    }

    #[test]
    fn malformed_line_is_rejected() {
        assert!(Config::parse_text("run.epochs 5\n").is_err());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = Config::parse_text("# comment\n\nrun.epochs = 7\n").unwrap();
        assert_eq!(cfg.run.epochs, 7);
    }

    #[test]
    fn equal_recovery_offsets_are_rejected() {
        let err = Config::parse_text("appraisal.d_sad=50\n").unwrap_err();
        assert!(err.to_string().contains("d_sad"), "{err}");
    }

    #[test]
    fn cadence_divisibility_is_enforced() {
        assert!(Config::parse_text("run.t_l2=150\n").is_err());
        assert!(Config::parse_text("run.t_l2=300\nrun.t_lstm=100\n").is_ok());
    }

    #[test]
    fn env_overrides_apply_and_reject_typos() {
        let mut cfg = Config::default();
        cfg.apply_env_overrides(
            vec![
                ("EMOSIM_RUN_EPOCHS".to_string(), "123".to_string()),
                ("EMOSIM_DDPG_ACTOR_HIDDEN".to_string(), "8,4".to_string()),
                ("PATH".to_string(), "/usr/bin".to_string()),
            ]
            .into_iter(),
        )
        .unwrap();
        assert_eq!(cfg.run.epochs, 123);
        assert_eq!(cfg.ddpg.actor_hidden, vec![8, 4]);
        let err = cfg
            .apply_env_overrides(vec![("EMOSIM_RUN_EPOCH".to_string(), "1".to_string())].into_iter())
            .unwrap_err();
        assert!(err.to_string().contains("EMOSIM_RUN_EPOCH"));
    }

    #[test]
    fn every_entry_key_is_settable() {
        let mut cfg = Config::default();
        for (k, v) in Config::default().entries() {
            cfg.set(k, &v).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }

    #[test]
    fn paper_constants_hold_as_defaults() {
        let c = Config::default();
        assert_eq!(c.memory.gamma, 0.1);
        assert_eq!(c.appraisal.tau, 50.0);
        assert_eq!(c.appraisal.eta, 0.01);
        assert_eq!(c.appraisal.d_eyelid, 50.0);
        assert_eq!(c.appraisal.d_sad, 75.0);
        assert_eq!(c.run.t_lstm, 100);
        assert_eq!(c.run.t_l2, 1000);
        assert_eq!(c.ddpg.capacity, 500);
        assert_eq!(c.ddpg.batch, 200);
        assert_eq!(c.ddpg.actor_alpha, 1e-4);
        assert_eq!(c.ddpg.critic_alpha, 1e-3);
        assert_eq!(c.predictor.alpha, 1e-3);
        assert_eq!(c.homeostasis.c, 40.0);
        assert_eq!(c.homeostasis.window, 1000);
    }
}
