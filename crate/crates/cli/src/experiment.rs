use std::fmt::Write as _;

use aam_core::baselines::RfConfig;
use aam_core::evaluation::{FixedSetup, DEFAULT_RESAMPLES};
use aam_core::seed::{self, Stream};
use aam_core::{AamHyperparams, TrainConfig};

/// Fixed hyperparameters shared by every retraining of a sweep or an
/// ablation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub hidden_units: usize,
    pub layers: usize,
    pub dropout: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub max_depth: usize,
    pub n_trees: usize,
    pub resamples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hidden_units: 32,
            layers: 2,
            dropout: 0.1,
            l2: 1e-5,
            batch_size: 32,
            max_depth: 4,
            n_trees: 128,
            resamples: DEFAULT_RESAMPLES,
        }
    }
}

impl ExperimentConfig {
    /// `key = value` lines, `#` comments. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {lineno}: expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            let count = || {
                value
                    .parse::<usize>()
                    .map_err(|_| format!("line {lineno}: `{key}` expects a count, got `{value}`"))
            };
            let real = || {
                value
                    .parse::<f64>()
                    .map_err(|_| format!("line {lineno}: `{key}` expects a number, got `{value}`"))
            };
            match key {
                "hidden_units" => cfg.hidden_units = count()?,
                "layers" => cfg.layers = count()?,
                "dropout" => cfg.dropout = real()?,
                "l2" => cfg.l2 = real()?,
                "batch_size" => cfg.batch_size = count()?,
                "max_depth" => cfg.max_depth = count()?,
                "n_trees" => cfg.n_trees = count()?,
                "resamples" => cfg.resamples = count()?,
                _ => return Err(format!("line {lineno}: unknown key `{key}`")),
            }
        }
        validate(&cfg.setup(0))?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hidden_units = {}", self.hidden_units);
        let _ = writeln!(s, "layers = {}", self.layers);
        let _ = writeln!(s, "dropout = {}", self.dropout);
        let _ = writeln!(s, "l2 = {}", self.l2);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "max_depth = {}", self.max_depth);
        let _ = writeln!(s, "n_trees = {}", self.n_trees);
        let _ = writeln!(s, "resamples = {}", self.resamples);
        s
    }

    /// Every sub-seed derives from `master`.
    pub fn setup(&self, master: u64) -> FixedSetup {
        FixedSetup {
            hyper: AamHyperparams {
                hidden_units: self.hidden_units,
                layers: self.layers,
                dropout: self.dropout,
                l2: self.l2,
                use_demographics: false,
            },
            train: TrainConfig::new(self.batch_size, seed::derive(master, Stream::Init, 0)),
            forest: RfConfig {
                max_depth: self.max_depth,
                n_trees: self.n_trees,
                seed: seed::derive(master, Stream::Forest, 0),
            },
            n_boot: self.resamples,
            seed: master,
        }
    }
}

fn validate(s: &FixedSetup) -> Result<(), String> {
    s.hyper.validate().map_err(|e| e.to_string())?;
    s.train.validate().map_err(|e| e.to_string())?;
    s.forest.validate().map_err(|e| e.to_string())?;
    if s.n_boot == 0 {
        return Err("resamples must be at least 1".into());
    }
    Ok(())
}
