//! Mini-batch training loop, prediction and the ablation experiment.
//!
//! Each step scores every task with its own loss, combines them into the
//! joint objective and takes one momentum-SGD step on all parameters,
//! log-variances included.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::losses::ordinal_decode;
use crate::metrics::{task_metrics, MetricsReport};
use crate::net::{
    backward, forward, init_params, HeadKind, LossDef, ModelParams, NetConfig, Weighting,
};
use crate::optim::{sgd_step, OptimState};
use crate::uncertainty::beta_weights;

const SHUFFLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    /// Ordinal decomposition plus learned uncertainty weights.
    Full,
    /// Ordinal tasks trained as plain K-way classification.
    NoOrdinalOpt,
    /// Fixed hand-set task weights; log-variances stay at zero.
    NoUncertainty,
}

impl Mode {
    /// Sorted by name.
    pub const ALL: [Mode; 3] = [Mode::Full, Mode::NoOrdinalOpt, Mode::NoUncertainty];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Full => "full",
            Mode::NoOrdinalOpt => "no_ordinal_opt",
            Mode::NoUncertainty => "no_uncertainty",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Overrides `weight_decay` for the shared trunk.
    pub weight_decay_trunk: Option<f64>,
    /// Overrides `weight_decay` for the task heads.
    pub weight_decay_head: Option<f64>,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    pub mode: Mode,
    /// Task weights for [`Mode::NoUncertainty`]; must sum to one.
    pub fixed_weights: Option<Vec<f64>>,
    /// Record one trace row per optimizer step as well.
    pub trace_steps: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            learning_rate: 0.001,
            weight_decay: 0.0005,
            weight_decay_trunk: None,
            weight_decay_head: None,
            batch_size: 32,
            momentum: 0.9,
            seed: 0,
            mode: Mode::Full,
            fixed_weights: None,
            trace_steps: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, tasks: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("momentum must lie in [0, 1)".into()));
        }
        for wd in [
            Some(self.weight_decay),
            self.weight_decay_trunk,
            self.weight_decay_head,
        ]
        .into_iter()
        .flatten()
        {
            if !(wd >= 0.0 && wd.is_finite()) {
                return Err(Error::Config("weight decay must be nonnegative".into()));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.mode == Mode::NoUncertainty {
            let w = self.fixed_weights.as_ref().ok_or_else(|| {
                Error::Config("mode no_uncertainty requires fixed_weights".into())
            })?;
            if w.len() != tasks {
                return Err(Error::Config(format!(
                    "fixed_weights has {} entries for {tasks} tasks",
                    w.len()
                )));
            }
            if w.iter().any(|v| v.is_nan() || *v < 0.0)
                || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9
            {
                return Err(Error::Config(
                    "fixed_weights must be nonnegative and sum to 1".into(),
                ));
            }
        }
        Ok(())
    }

    fn weighting(&self) -> Weighting {
        match (self.mode, &self.fixed_weights) {
            (Mode::NoUncertainty, Some(w)) => Weighting::Fixed(w.clone()),
            _ => Weighting::Uncertainty,
        }
    }
}

/// Equal weights `1/T`.
pub fn equal_weights(tasks: usize) -> Vec<f64> {
    vec![1.0 / tasks as f64; tasks]
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    /// 1-based.
    pub epoch: usize,
    /// Mean over the epoch's batches.
    pub joint_loss: f64,
    pub per_task_loss: Vec<f64>,
    /// End-of-epoch state.
    pub log_var: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTrace {
    pub epoch: usize,
    pub batch: usize,
    pub joint_loss: f64,
    pub per_task_loss: Vec<f64>,
    /// After the update.
    pub log_var: Vec<f64>,
}

/// Architecture plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: NetConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn init(config: NetConfig) -> Result<Self> {
        config.validate()?;
        let params = init_params(&config);
        Ok(Model { config, params })
    }

    /// Structural agreement between the config and the stored tensors.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = init_params(&self.config);
        if !expected.same_shape(&self.params) {
            return Err(Error::Dimension {
                layer: "model parameters".into(),
                expected: expected.num_values(),
                got: self.params.num_values(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Model,
    pub trace: Vec<EpochTrace>,
    pub steps: Vec<StepTrace>,
}

fn effective_config(net: &NetConfig, mode: Mode) -> NetConfig {
    NetConfig {
        ordinal_as_nominal: mode == Mode::NoOrdinalOpt,
        ..net.clone()
    }
}

fn check_data(net: &NetConfig, data: &Dataset) -> Result<()> {
    if data.feature_dim() != net.input_dim {
        return Err(Error::Dimension {
            layer: "dataset features".into(),
            expected: net.input_dim,
            got: data.feature_dim(),
        });
    }
    if data.tasks != net.tasks {
        return Err(Error::Config(
            "dataset tasks do not match the network's task list".into(),
        ));
    }
    data.validate()
}

fn batch_labels(data: &Dataset, rows: &[usize]) -> Vec<Vec<usize>> {
    data.labels
        .iter()
        .map(|col| rows.iter().map(|&i| col[i]).collect())
        .collect()
}

pub fn train(net_cfg: &NetConfig, train_cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    net_cfg.validate()?;
    train_cfg.validate(net_cfg.tasks.len())?;
    check_data(net_cfg, data)?;

    let config = effective_config(net_cfg, train_cfg.mode);
    let mut params = init_params(&config);
    let mut optim = OptimState::new(
        &params,
        train_cfg.learning_rate,
        train_cfg.momentum,
        train_cfg.weight_decay,
    );
    if let Some(wd) = train_cfg.weight_decay_trunk {
        optim.weight_decay_trunk = wd;
    }
    if let Some(wd) = train_cfg.weight_decay_head {
        optim.weight_decay_head = wd;
    }
    let weighting = train_cfg.weighting();
    let def = LossDef::new(&config, weighting.clone());
    let tasks = config.tasks.len();

    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(train_cfg.epochs);
    let mut steps = Vec::new();

    for epoch in 1..=train_cfg.epochs {
        order.shuffle(&mut rng);
        let mut joint_sum = 0.0;
        let mut task_sum = vec![0.0; tasks];
        let mut batches = 0usize;
        for (batch, rows) in order.chunks(train_cfg.batch_size).enumerate() {
            let x = data.features.select(Axis(0), rows);
            let labels = batch_labels(data, rows);
            let (loss, grads) =
                backward(&params, x.view(), &labels, &def).map_err(|e| match e {
                    Error::NonFinite { task } => Error::NonFiniteLoss { epoch, batch, task },
                    other => other,
                })?;
            sgd_step(&mut params, &grads, &mut optim)?;
            joint_sum += loss.joint;
            for (acc, l) in task_sum.iter_mut().zip(&loss.per_task) {
                *acc += l;
            }
            batches += 1;
            if train_cfg.trace_steps {
                steps.push(StepTrace {
                    epoch,
                    batch,
                    joint_loss: loss.joint,
                    per_task_loss: loss.per_task,
                    log_var: params.log_var.to_vec(),
                });
            }
        }
        let denom = batches as f64;
        let state = params.uncertainty();
        let beta = match &weighting {
            Weighting::Fixed(w) => w.clone(),
            Weighting::Uncertainty => beta_weights(&state),
        };
        trace.push(EpochTrace {
            epoch,
            joint_loss: joint_sum / denom,
            per_task_loss: task_sum.iter().map(|s| s / denom).collect(),
            sigma_sq: state.sigma_sq(),
            log_var: state.log_var,
            beta,
        });
    }

    Ok(TrainOutcome {
        model: Model { config, params },
        trace,
        steps,
    })
}

fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-task predictions: class index for nominal tasks, rank for ordinal ones.
pub fn predict(model: &Model, features: ArrayView2<f64>) -> Result<Vec<Vec<usize>>> {
    let logits = forward(&model.params, features)?;
    model
        .config
        .head_kinds()
        .iter()
        .zip(&logits)
        .map(|(kind, out)| predict_head(kind, out))
        .collect()
}

fn predict_head(kind: &HeadKind, logits: &Array2<f64>) -> Result<Vec<usize>> {
    logits
        .axis_iter(Axis(0))
        .map(|row| match kind {
            HeadKind::Nominal { .. } => Ok(argmax(row)),
            HeadKind::Ordinal { .. } => ordinal_decode(row),
            HeadKind::OrdinalAsNominal { .. } => Ok(argmax(row) + 1),
        })
        .collect()
}

pub fn evaluate(model: &Model, data: &Dataset) -> Result<MetricsReport> {
    check_data(&model.config, data)?;
    let preds = predict(model, data.features.view())?;
    let tasks = data
        .tasks
        .iter()
        .zip(preds.iter().zip(&data.labels))
        .map(|(spec, (p, y))| task_metrics(spec, p, y))
        .collect::<Result<_>>()?;
    Ok(MetricsReport {
        samples: data.len(),
        tasks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub mode: Mode,
    pub seed: u64,
    pub metrics: MetricsReport,
}

/// Trains every mode from the same seeds on `train` and scores on `test`.
/// [`Mode::NoUncertainty`] uses `train_cfg.fixed_weights`, or equal weights
/// when none are given. Rows come back in [`Mode::ALL`] order.
pub fn ablation_run(
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    train_data: &Dataset,
    test_data: &Dataset,
) -> Result<Vec<AblationRow>> {
    if !net_cfg.tasks.iter().any(|t| t.is_ordinal()) || net_cfg.tasks.iter().all(|t| t.is_ordinal())
    {
        return Err(Error::Config(
            "ablation needs at least one ordinal and one nominal task".into(),
        ));
    }
    let tasks = net_cfg.tasks.len();
    Mode::ALL
        .par_iter()
        .map(|&mode| {
            let cfg = TrainConfig {
                mode,
                fixed_weights: Some(
                    train_cfg
                        .fixed_weights
                        .clone()
                        .unwrap_or_else(|| equal_weights(tasks)),
                ),
                ..train_cfg.clone()
            };
            let out = train(net_cfg, &cfg, train_data)?;
            Ok(AblationRow {
                mode,
                seed: train_cfg.seed,
                metrics: evaluate(&out.model, test_data)?,
            })
        })
        .collect()
}

/// [`ablation_run`] for each seed, splitting `data` per seed. Rows sorted by
/// mode, then seed.
pub fn ablation_sweep(
    net_cfg: &NetConfig,
    train_cfg: &TrainConfig,
    data: &Dataset,
    seeds: &[u64],
    test_fraction: f64,
) -> Result<Vec<AblationRow>> {
    let per_seed: Vec<Vec<AblationRow>> = seeds
        .par_iter()
        .map(|&seed| {
            let (train_data, test_data) = split(data, test_fraction, seed)?;
            let net = NetConfig {
                seed,
                ..net_cfg.clone()
            };
            let cfg = TrainConfig {
                seed,
                ..train_cfg.clone()
            };
            ablation_run(&net, &cfg, &train_data, &test_data)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<AblationRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by_key(|r| (r.mode, r.seed));
    Ok(rows)
}
