//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, no sections. Every key has a
//! default, so an empty file (or no file) is a valid configuration. Unknown
//! keys, repeated keys and unparsable values are rejected with the key named.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use dmtl_core::trainer::equal_weights;
use dmtl_core::{GenConfig, Mode, NetConfig, TaskSpec, TrainConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // data generation
    pub n: usize,
    pub latent_dim: usize,
    pub feature_dim: usize,
    pub tasks: Vec<TaskSpec>,
    /// Per-task corruption probability; `None` means 0.1 for every task.
    pub label_noise: Option<Vec<f64>>,
    /// Drives generation, initialization, shuffling and the train/test split.
    pub seed: u64,
    // network
    pub trunk_layers: Vec<usize>,
    // training
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub weight_decay_trunk: Option<f64>,
    pub weight_decay_head: Option<f64>,
    pub batch_size: usize,
    pub momentum: f64,
    pub mode: Mode,
    /// Task weights for `no_uncertainty`; equal weights when unset.
    pub fixed_weights: Option<Vec<f64>>,
    pub trace_steps: bool,
    pub test_fraction: f64,
    /// `test` scores the held-out split, `all` the whole dataset.
    pub eval_split: EvalSplit,
    pub ablation_seeds: Vec<u64>,
    // paths, relative ones resolved against --out-dir
    pub data_out: PathBuf,
    pub data_in: PathBuf,
    pub model_path: PathBuf,
    pub trace_out: PathBuf,
    pub step_trace_out: PathBuf,
    pub report_out: PathBuf,
    pub eval_report_out: PathBuf,
    pub ablation_out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSplit {
    Test,
    All,
}

impl FromStr for EvalSplit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "test" => Ok(EvalSplit::Test),
            "all" => Ok(EvalSplit::All),
            _ => Err("expected \"test\" or \"all\"".into()),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        RunConfig {
            n: 2000,
            latent_dim: 4,
            feature_dim: 16,
            tasks: vec![TaskSpec::ordinal("age", 8), TaskSpec::nominal("gender", 4)],
            label_noise: None,
            seed: 0,
            trunk_layers: vec![32],
            epochs: train.epochs,
            learning_rate: train.learning_rate,
            weight_decay: train.weight_decay,
            weight_decay_trunk: None,
            weight_decay_head: None,
            batch_size: train.batch_size,
            momentum: train.momentum,
            mode: train.mode,
            fixed_weights: None,
            trace_steps: false,
            test_fraction: 0.2,
            eval_split: EvalSplit::Test,
            ablation_seeds: vec![0, 1, 2, 3, 4],
            data_out: "data.csv".into(),
            data_in: "data.csv".into(),
            model_path: "model.txt".into(),
            trace_out: "trace.csv".into(),
            step_trace_out: "step_trace.csv".into(),
            report_out: "report.txt".into(),
            eval_report_out: "eval_report.txt".into(),
            ablation_out: "ablation.csv".into(),
        }
    }
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| format!("bad list entry {:?}", v.trim()))
        })
        .collect()
}

fn scalar<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| e.to_string())
}

fn boolean(value: &str) -> Result<bool, String> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn finite(value: &str) -> Result<f64, String> {
    let v: f64 = scalar(value)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("must be finite".into())
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {line_no}: expected `key = value`"))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(CliError::Config(format!(
                    "line {line_no}: duplicate key `{key}`"
                )));
            }
            cfg.set(key, value).map_err(|msg| match msg {
                SetError::Unknown => {
                    CliError::Config(format!("line {line_no}: unknown key `{key}`"))
                }
                SetError::Value(msg) => {
                    CliError::Config(format!("line {line_no}: invalid value for `{key}`: {msg}"))
                }
            })?;
            seen.push(key.to_string());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), SetError> {
        if value.is_empty() {
            return Err(SetError::Value("empty value".into()));
        }
        match key {
            "n" => self.n = scalar(value)?,
            "latent_dim" => self.latent_dim = scalar(value)?,
            "feature_dim" => self.feature_dim = scalar(value)?,
            "tasks" => self.tasks = list(value)?,
            "label_noise" => self.label_noise = Some(list(value)?),
            "seed" => self.seed = scalar(value)?,
            "trunk_layers" => self.trunk_layers = list(value)?,
            "epochs" => self.epochs = scalar(value)?,
            "learning_rate" => self.learning_rate = finite(value)?,
            "weight_decay" => self.weight_decay = finite(value)?,
            "weight_decay_trunk" => self.weight_decay_trunk = Some(finite(value)?),
            "weight_decay_head" => self.weight_decay_head = Some(finite(value)?),
            "batch_size" => self.batch_size = scalar(value)?,
            "momentum" => self.momentum = finite(value)?,
            "mode" => self.mode = scalar(value)?,
            "fixed_weights" => self.fixed_weights = Some(list(value)?),
            "trace_steps" => self.trace_steps = boolean(value)?,
            "test_fraction" => self.test_fraction = finite(value)?,
            "eval_split" => self.eval_split = scalar(value)?,
            "ablation_seeds" => self.ablation_seeds = list(value)?,
            "data_out" => self.data_out = value.into(),
            "data_in" => self.data_in = value.into(),
            "model_path" => self.model_path = value.into(),
            "trace_out" => self.trace_out = value.into(),
            "step_trace_out" => self.step_trace_out = value.into(),
            "report_out" => self.report_out = value.into(),
            "eval_report_out" => self.eval_report_out = value.into(),
            "ablation_out" => self.ablation_out = value.into(),
            _ => return Err(SetError::Unknown),
        }
        Ok(())
    }

    /// Range checks that name the offending key.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, msg: &str| Err(CliError::Config(format!("`{key}` {msg}")));
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction", "must lie in (0, 1)");
        }
        if self.trunk_layers.contains(&0) {
            return bad("trunk_layers", "widths must be positive");
        }
        if self.ablation_seeds.is_empty() {
            return bad("ablation_seeds", "must list at least one seed");
        }
        self.gen_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.train_config()
            .validate(self.tasks.len())
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            n: self.n,
            latent_dim: self.latent_dim,
            feature_dim: self.feature_dim,
            tasks: self.tasks.clone(),
            label_noise: self
                .label_noise
                .clone()
                .unwrap_or_else(|| vec![0.1; self.tasks.len()]),
            seed: self.seed,
        }
    }

    pub fn net_config(&self, input_dim: usize) -> NetConfig {
        NetConfig::new(
            input_dim,
            self.trunk_layers.clone(),
            self.tasks.clone(),
            self.seed,
        )
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            weight_decay_trunk: self.weight_decay_trunk,
            weight_decay_head: self.weight_decay_head,
            batch_size: self.batch_size,
            momentum: self.momentum,
            seed: self.seed,
            mode: self.mode,
            fixed_weights: match (self.mode, &self.fixed_weights) {
                (Mode::NoUncertainty, None) => Some(equal_weights(self.tasks.len())),
                (_, w) => w.clone(),
            },
            trace_steps: self.trace_steps,
        }
    }
}

enum SetError {
    Unknown,
    Value(String),
}

impl From<String> for SetError {
    fn from(msg: String) -> Self {
        SetError::Value(msg)
    }
}
