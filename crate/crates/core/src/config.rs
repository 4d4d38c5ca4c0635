//! Flat experiment configuration with desk and full-size (`paper`) profiles.
//!
//! A config file is TOML with top-level keys only. Keys it sets override the
//! chosen profile; unknown keys are rejected. Relative paths are resolved
//! against the directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::defense::DetectConfig;
use crate::error::{Error, Result};
use crate::features::{Bounds, DIM};
use crate::poisoning::{derive_seed, AttackConfig};
use crate::regressor::{StepRule, TrainConfig};
use crate::search::{AscentConfig, CuckooConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            other => Err(Error::Config(format!("unknown scale {other:?}"))),
        }
    }
}

/// Seed purposes; each stage draws from `derive_seed(seed, purpose)`.
pub mod purpose {
    pub const BASE: u64 = 10;
    pub const TEST: u64 = 11;
    pub const ATTACK: u64 = 12;
    pub const MODEL: u64 = 13;
    pub const SHUFFLE: u64 = 14;
    pub const SEARCH: u64 = 15;
    pub const VERIFY: u64 = 16;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub bounds: [(f64, f64); DIM],

    pub n_base: usize,
    pub n_test: usize,
    pub n_attack_test: usize,
    pub widths: Vec<usize>,

    /// `"adam"` or `"gd"`.
    pub train_rule: String,
    pub train_initial_step: f64,
    pub train_decay_every: usize,
    pub train_decay_factor: f64,
    pub train_halt_rel_change: f64,
    pub train_halt_window: usize,
    pub train_max_epochs: usize,
    /// 0 means full batch.
    pub train_batch_size: usize,

    pub attack_m: f64,
    pub attack_center_t: f64,
    pub attack_center_v: f64,
    pub attack_center_r: f64,
    pub attack_width_t: f64,
    pub attack_width_v: f64,
    pub attack_width_r: f64,
    /// Poison used by `attack`, `search` and `defend`.
    pub attack_n_attack: usize,
    pub attack_n_clean: usize,
    /// `(n_attack, n_clean)` cells run by `grid`.
    pub grid: Vec<(usize, usize)>,

    pub search_seed_fraction: f64,
    pub search_rounds: usize,
    pub search_initial_step: f64,
    pub search_stop_tol: f64,
    pub search_max_iters: usize,
    pub search_fd_step: f64,
    pub search_max_halvings: usize,
    pub search_step_shrink: f64,
    pub search_tol_shrink: f64,
    pub search_retain_top_fraction: f64,
    pub search_dedup_tol: f64,

    pub defense_radius: f64,
    pub defense_error_pct_min: f64,
    pub defense_count_min_reference: f64,
    pub defense_alphas: Vec<f64>,
    pub defense_histogram_bins: usize,

    pub verify_points: usize,
    pub verify_paths: usize,
    pub verify_steps: usize,
}

impl ExperimentConfig {
    /// One-CPU profile: 20k base samples, a 5-64-128-64-1 network trained
    /// with minibatch Adam, poison counts at a tenth of the large profile.
    pub fn desk() -> Self {
        let search = CuckooConfig::default();
        let detect = DetectConfig::default();
        Self {
            seed: 7,
            out_dir: PathBuf::from("out"),
            bounds: Bounds::default().ranges,
            n_base: 20_000,
            n_test: 1_000,
            n_attack_test: 1_000,
            widths: vec![5, 64, 128, 64, 1],
            train_rule: "adam".into(),
            train_initial_step: 1e-3,
            train_decay_every: 200,
            train_decay_factor: 10.0,
            train_halt_rel_change: 1e-4,
            train_halt_window: 25,
            train_max_epochs: 600,
            train_batch_size: 64,
            attack_m: 1.5,
            attack_center_t: 0.5,
            attack_center_v: 0.2,
            attack_center_r: 0.5,
            attack_width_t: 0.1,
            attack_width_v: 0.1,
            attack_width_r: 0.1,
            attack_n_attack: 200,
            attack_n_clean: 800,
            grid: vec![
                (0, 0),
                (200, 0),
                (400, 0),
                (200, 200),
                (200, 400),
                (200, 800),
                (400, 200),
                (400, 400),
                (400, 800),
                (400, 1200),
            ],
            search_seed_fraction: 0.1,
            search_rounds: search.rounds,
            search_initial_step: search.ascent.initial_step,
            search_stop_tol: search.ascent.stop_tol,
            search_max_iters: search.ascent.max_iters,
            search_fd_step: search.ascent.fd_step,
            search_max_halvings: search.ascent.max_halvings,
            search_step_shrink: search.step_shrink,
            search_tol_shrink: search.tol_shrink,
            search_retain_top_fraction: search.retain_top_fraction,
            search_dedup_tol: search.dedup_tol,
            defense_radius: detect.radius,
            defense_error_pct_min: detect.error_pct_min,
            defense_count_min_reference: detect.count_min_reference,
            defense_alphas: vec![0.9, 0.99, 1.0],
            defense_histogram_bins: 20,
            verify_points: 50,
            verify_paths: 1_000_000,
            verify_steps: 1_000,
        }
    }

    /// Full-size profile: 200k base samples, 5-128-256-512-256-128-1 trained by
    /// full-batch gradient descent at step 0.01, divided by 10 every 50 epochs.
    pub fn paper() -> Self {
        let defaults = TrainConfig::default();
        Self {
            n_base: 200_000,
            n_test: 10_000,
            n_attack_test: 10_000,
            widths: vec![5, 128, 256, 512, 256, 128, 1],
            train_rule: "gd".into(),
            train_initial_step: defaults.initial_step,
            train_decay_every: defaults.decay_every,
            train_decay_factor: defaults.decay_factor,
            train_halt_rel_change: defaults.halt_rel_change,
            train_halt_window: defaults.halt_window,
            train_max_epochs: defaults.max_epochs,
            train_batch_size: 0,
            attack_n_attack: 2_000,
            attack_n_clean: 8_000,
            grid: vec![
                (0, 0),
                (2_000, 0),
                (4_000, 0),
                (2_000, 2_000),
                (2_000, 4_000),
                (2_000, 8_000),
                (4_000, 2_000),
                (4_000, 4_000),
                (4_000, 8_000),
                (4_000, 12_000),
            ],
            defense_alphas: vec![0.5, 0.9, 0.95, 0.99, 1.0],
            ..Self::desk()
        }
    }

    pub fn profile(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self::desk(),
            Scale::Paper => Self::paper(),
        }
    }

    /// Profile values overridden by the keys of a TOML document.
    pub fn from_toml_str(base: Self, text: &str) -> Result<Self> {
        let overrides: toml::Table = toml::from_str(text)?;
        let mut table = toml::Table::try_from(&base)
            .map_err(|e| Error::Config(format!("serializing profile: {e}")))?;
        for (key, value) in overrides {
            if !table.contains_key(&key) {
                return Err(Error::Config(format!("unknown key {key:?}")));
            }
            table.insert(key, value);
        }
        let cfg: Self = toml::Value::Table(table).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(base: Self, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(base, &text)?;
        if cfg.out_dir.is_relative() {
            if let Some(dir) = path.parent() {
                cfg.out_dir = dir.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds()?;
        if self.n_base == 0 || self.n_test == 0 || self.n_attack_test == 0 {
            return Err(Error::Config("dataset sizes must be >= 1".into()));
        }
        if self.widths.first() != Some(&DIM) || self.widths.last() != Some(&1) {
            return Err(Error::Config(format!(
                "widths must start at {DIM} and end at 1, got {:?}",
                self.widths
            )));
        }
        self.train_config(0)?.validate()?;
        self.attack_config(self.attack_n_attack, self.attack_n_clean)
            .validate()?;
        if self.grid.is_empty() {
            return Err(Error::Config("grid needs at least one cell".into()));
        }
        self.cuckoo_config().validate()?;
        if !(self.search_seed_fraction > 0.0 && self.search_seed_fraction <= 1.0) {
            return Err(Error::Config("search_seed_fraction must lie in (0, 1]".into()));
        }
        if !(self.defense_radius > 0.0) {
            return Err(Error::Config("defense_radius must be > 0".into()));
        }
        if self.defense_alphas.is_empty()
            || self.defense_alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0))
        {
            return Err(Error::Config("defense_alphas must be nonempty, each in (0, 1]".into()));
        }
        if self.verify_points == 0 || self.verify_paths == 0 || self.verify_steps == 0 {
            return Err(Error::Config("verify counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<Bounds> {
        Bounds::new(self.bounds)
    }

    pub fn seed_for(&self, purpose: u64) -> u64 {
        derive_seed(self.seed, purpose)
    }

    /// Training config at the profile's settings; `alpha` is set per call site.
    pub fn train_config(&self, shuffle_seed: u64) -> Result<TrainConfig> {
        let rule = match self.train_rule.as_str() {
            "adam" => StepRule::adam(),
            "gd" => StepRule::GradientDescent,
            other => return Err(Error::Config(format!("unknown train_rule {other:?}"))),
        };
        Ok(TrainConfig {
            initial_step: self.train_initial_step,
            decay_every: self.train_decay_every,
            decay_factor: self.train_decay_factor,
            halt_rel_change: self.train_halt_rel_change,
            halt_window: self.train_halt_window,
            max_epochs: self.train_max_epochs,
            alpha: 1.0,
            batch_size: (self.train_batch_size > 0).then_some(self.train_batch_size),
            rule,
            rng_seed: shuffle_seed,
        })
    }

    pub fn attack_config(&self, n_attack: usize, n_clean: usize) -> AttackConfig {
        AttackConfig {
            m: self.attack_m,
            center_t: self.attack_center_t,
            center_v: self.attack_center_v,
            center_r: self.attack_center_r,
            width_t: self.attack_width_t,
            width_v: self.attack_width_v,
            width_r: self.attack_width_r,
            n_attack,
            n_clean,
        }
    }

    pub fn cuckoo_config(&self) -> CuckooConfig {
        CuckooConfig {
            rounds: self.search_rounds,
            step_shrink: self.search_step_shrink,
            tol_shrink: self.search_tol_shrink,
            retain_top_fraction: self.search_retain_top_fraction,
            dedup_tol: self.search_dedup_tol,
            ascent: AscentConfig {
                initial_step: self.search_initial_step,
                stop_tol: self.search_stop_tol,
                max_iters: self.search_max_iters,
                fd_step: self.search_fd_step,
                max_halvings: self.search_max_halvings,
            },
        }
    }

    pub fn detect_config(&self) -> DetectConfig {
        DetectConfig {
            radius: self.defense_radius,
            error_pct_min: self.defense_error_pct_min,
            count_min_reference: self.defense_count_min_reference,
        }
    }
}
