//! Training configuration and its flat `key = value` file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::edgepool::MergeMode;
use crate::error::{Error, Result};

/// When the cross-level matching loss is switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// All weighted losses from the first epoch.
    #[default]
    Joint,
    /// Matching only in the second half of training.
    Staged,
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Schedule::Joint => "joint",
            Schedule::Staged => "staged",
        })
    }
}

impl FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "joint" => Ok(Schedule::Joint),
            "staged" => Ok(Schedule::Staged),
            other => Err(Error::Config(format!("unknown schedule '{other}'"))),
        }
    }
}

/// Loss weights `(w_rec, w_sim, w_cross)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub rec: f64,
    pub sim: f64,
    pub cross: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rec: 1.0,
            sim: 1.0,
            cross: 1.0,
        }
    }
}

impl fmt::Display for LossWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.rec, self.sim, self.cross)
    }
}

impl FromStr for LossWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad loss weights '{s}'")))?;
        match parts[..] {
            [rec, sim, cross] => Ok(LossWeights { rec, sim, cross }),
            _ => Err(Error::Config(format!("expected three loss weights, got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mask_rate: f64,
    pub n_gin_layers: usize,
    pub n_edgepool_layers: usize,
    pub hidden_dim: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub max_epoch: usize,
    pub batch_size: usize,
    pub loss_weights: LossWeights,
    pub wl_depth: usize,
    pub lambda: f64,
    pub seed: u64,
    pub merge_mode: MergeMode,
    pub schedule: Schedule,
    /// Negative pairs per positive in cross-level matching.
    pub neg_ratio: usize,
    /// Hidden width of the matching discriminator.
    pub disc_hidden: usize,
    /// One-hot width cap for degree features of unlabeled datasets.
    pub degree_cap: usize,
}

/// MUTAG settings.
impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mask_rate: 0.75,
            n_gin_layers: 5,
            n_edgepool_layers: 3,
            hidden_dim: 128,
            lr: 0.005,
            weight_decay: 2e-4,
            max_epoch: 100,
            batch_size: 256,
            loss_weights: LossWeights::default(),
            wl_depth: 3,
            lambda: 1.0,
            seed: 0,
            merge_mode: MergeMode::Stochastic,
            schedule: Schedule::Joint,
            neg_ratio: 1,
            disc_hidden: 128,
            degree_cap: 64,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.mask_rate > 0.0 && self.mask_rate < 1.0) {
            return bad(format!("mask_rate {} must lie in (0, 1)", self.mask_rate));
        }
        for (name, v) in [("lr", self.lr), ("lambda", self.lambda)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be non-negative, got {}", self.weight_decay));
        }
        for (name, v) in [
            ("n_gin_layers", self.n_gin_layers),
            ("n_edgepool_layers", self.n_edgepool_layers),
            ("hidden_dim", self.hidden_dim),
            ("max_epoch", self.max_epoch),
            ("batch_size", self.batch_size),
            ("neg_ratio", self.neg_ratio),
            ("disc_hidden", self.disc_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        let w = self.loss_weights;
        if [w.rec, w.sim, w.cross].iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return bad(format!("loss weights must be non-negative, got {w}"));
        }
        if w.rec + w.sim + w.cross == 0.0 {
            return bad("loss weights must not all be zero".into());
        }
        Ok(())
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "mask_rate" => self.mask_rate = parse(key, v)?,
            "n_gin_layers" => self.n_gin_layers = parse(key, v)?,
            "n_edgepool_layers" => self.n_edgepool_layers = parse(key, v)?,
            "hidden_dim" => self.hidden_dim = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "weight_decay" => self.weight_decay = parse(key, v)?,
            "max_epoch" => self.max_epoch = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "loss_weights" => self.loss_weights = v.parse()?,
            "wl_depth" => self.wl_depth = parse(key, v)?,
            "lambda" => self.lambda = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "merge_mode" => self.merge_mode = v.parse()?,
            "schedule" => self.schedule = v.parse()?,
            "neg_ratio" => self.neg_ratio = parse(key, v)?,
            "disc_hidden" => self.disc_hidden = parse(key, v)?,
            "degree_cap" => self.degree_cap = parse(key, v)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse_str(&std::fs::read_to_string(path)?)
    }

    /// Renders every field; [`TrainConfig::parse_str`] reads it back.
    pub fn to_text(&self) -> String {
        format!(
            "mask_rate = {}\nn_gin_layers = {}\nn_edgepool_layers = {}\nhidden_dim = {}\nlr = {}\n\
             weight_decay = {}\nmax_epoch = {}\nbatch_size = {}\nloss_weights = {}\nwl_depth = {}\n\
             lambda = {}\nseed = {}\nmerge_mode = {}\nschedule = {}\nneg_ratio = {}\ndisc_hidden = {}\n\
             degree_cap = {}\n",
            self.mask_rate,
            self.n_gin_layers,
            self.n_edgepool_layers,
            self.hidden_dim,
            self.lr,
            self.weight_decay,
            self.max_epoch,
            self.batch_size,
            self.loss_weights,
            self.wl_depth,
            self.lambda,
            self.seed,
            self.merge_mode,
            self.schedule,
            self.neg_ratio,
            self.disc_hidden,
            self.degree_cap,
        )
    }
}
