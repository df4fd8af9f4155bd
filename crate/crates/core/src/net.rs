//! Shared-trunk MLP with one affine head per task.
//!
//! The trunk is a stack of ReLU dense layers shared by every task; each task
//! owns a linear head on top of the last trunk width. Heads emit raw logits,
//! squashing happens inside the losses. The per-task log-variances of the
//! uncertainty weighting live alongside the weights so that one optimizer
//! step updates everything together.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::losses::{nominal_loss, ordinal_loss};
use crate::task::{validate_tasks, TaskKind, TaskSpec};
use crate::uncertainty::{joint_loss, UncertaintyState};

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub input_dim: usize,
    pub trunk_layers: Vec<usize>,
    pub tasks: Vec<TaskSpec>,
    pub seed: u64,
    /// Train ordinal tasks as plain `K`-way classification instead of the
    /// binary decomposition. Used by the ablation without ordinal treatment.
    pub ordinal_as_nominal: bool,
}

impl NetConfig {
    pub fn new(
        input_dim: usize,
        trunk_layers: Vec<usize>,
        tasks: Vec<TaskSpec>,
        seed: u64,
    ) -> Self {
        NetConfig {
            input_dim,
            trunk_layers,
            tasks,
            seed,
            ordinal_as_nominal: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.trunk_layers.is_empty() || self.trunk_layers.contains(&0) {
            return Err(Error::Config(
                "trunk_layers must be a non-empty list of positive widths".into(),
            ));
        }
        validate_tasks(&self.tasks)
    }

    pub fn head_kinds(&self) -> Vec<HeadKind> {
        self.tasks
            .iter()
            .map(|t| match t.kind {
                TaskKind::Nominal { classes } => HeadKind::Nominal { classes },
                TaskKind::Ordinal { ranks } if self.ordinal_as_nominal => {
                    HeadKind::OrdinalAsNominal { ranks }
                }
                TaskKind::Ordinal { ranks } => HeadKind::Ordinal { ranks },
            })
            .collect()
    }

    pub fn trunk_width(&self) -> usize {
        *self.trunk_layers.last().expect("validated trunk")
    }
}

/// How a head's logits are scored and decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Nominal {
        classes: usize,
    },
    /// `K - 1` binary threshold logits.
    Ordinal {
        ranks: usize,
    },
    /// `K` softmax logits; rank `r` is trained as class `r - 1`.
    OrdinalAsNominal {
        ranks: usize,
    },
}

impl HeadKind {
    pub fn width(&self) -> usize {
        match *self {
            HeadKind::Nominal { classes } => classes,
            HeadKind::Ordinal { ranks } => ranks - 1,
            HeadKind::OrdinalAsNominal { ranks } => ranks,
        }
    }

    /// Batch-mean task loss and its gradient w.r.t. the head logits.
    pub fn loss(&self, logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
        match *self {
            HeadKind::Nominal { .. } => nominal_loss(logits, labels),
            HeadKind::Ordinal { .. } => ordinal_loss(logits, labels),
            HeadKind::OrdinalAsNominal { ranks } => {
                let mut classes = Vec::with_capacity(labels.len());
                for (row, &y) in labels.iter().enumerate() {
                    if y < 1 || y > ranks {
                        return Err(Error::LabelOutOfRange {
                            row,
                            label: y as i64,
                        });
                    }
                    classes.push(y - 1);
                }
                nominal_loss(logits, &classes)
            }
        }
    }
}

/// Dense layer `y = x·W + b`, `W` stored `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Linear {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let a = 1.0 / (fan_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-a..a));
        Linear {
            weight,
            bias: Array1::zeros(fan_out),
        }
    }

    fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight) + &self.bias
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }
}

/// Trunk, heads and per-task log-variances.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub trunk: Vec<Linear>,
    pub heads: Vec<Linear>,
    /// `s_t = log σ_t²`
    pub log_var: Array1<f64>,
}

/// Gradients share the parameter shape tree.
pub type Gradients = ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    TrunkWeight,
    HeadWeight,
    Bias,
    LogVar,
}

/// A named contiguous block of parameters.
pub struct Slot<'a> {
    pub name: String,
    pub kind: SlotKind,
    pub values: &'a mut [f64],
}

impl ModelParams {
    /// Zero tree with the same shapes as `self`.
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            trunk: self
                .trunk
                .iter()
                .map(|l| Linear::zeros(l.fan_in(), l.fan_out()))
                .collect(),
            heads: self
                .heads
                .iter()
                .map(|l| Linear::zeros(l.fan_in(), l.fan_out()))
                .collect(),
            log_var: Array1::zeros(self.log_var.len()),
        }
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        fn layers_match(a: &[Linear], b: &[Linear]) -> bool {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| x.weight.dim() == y.weight.dim() && x.bias.len() == y.bias.len())
        }
        layers_match(&self.trunk, &other.trunk)
            && layers_match(&self.heads, &other.heads)
            && self.log_var.len() == other.log_var.len()
    }

    /// Every parameter block in a fixed order: trunk layers, heads, log-variances.
    pub fn slots_mut(&mut self) -> Vec<Slot<'_>> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + self.heads.len()) + 1);
        for (i, l) in self.trunk.iter_mut().enumerate() {
            out.push(Slot {
                name: format!("trunk.{i}.weight"),
                kind: SlotKind::TrunkWeight,
                values: l.weight.as_slice_mut().expect("standard layout"),
            });
            out.push(Slot {
                name: format!("trunk.{i}.bias"),
                kind: SlotKind::Bias,
                values: l.bias.as_slice_mut().expect("standard layout"),
            });
        }
        for (i, l) in self.heads.iter_mut().enumerate() {
            out.push(Slot {
                name: format!("head.{i}.weight"),
                kind: SlotKind::HeadWeight,
                values: l.weight.as_slice_mut().expect("standard layout"),
            });
            out.push(Slot {
                name: format!("head.{i}.bias"),
                kind: SlotKind::Bias,
                values: l.bias.as_slice_mut().expect("standard layout"),
            });
        }
        out.push(Slot {
            name: "log_var".into(),
            kind: SlotKind::LogVar,
            values: self.log_var.as_slice_mut().expect("standard layout"),
        });
        out
    }

    pub fn num_values(&self) -> usize {
        self.trunk
            .iter()
            .chain(&self.heads)
            .map(|l| l.weight.len() + l.bias.len())
            .sum::<usize>()
            + self.log_var.len()
    }

    pub fn all_finite(&self) -> bool {
        self.trunk
            .iter()
            .chain(&self.heads)
            .all(|l| l.weight.iter().chain(&l.bias).all(|v| v.is_finite()))
            && self.log_var.iter().all(|v| v.is_finite())
    }

    pub fn uncertainty(&self) -> UncertaintyState {
        UncertaintyState {
            log_var: self.log_var.to_vec(),
        }
    }
}

/// Uniform(±1/√fan_in) weights, zero biases, zero log-variances.
pub fn init_params(cfg: &NetConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trunk = Vec::with_capacity(cfg.trunk_layers.len());
    let mut width = cfg.input_dim;
    for &w in &cfg.trunk_layers {
        trunk.push(Linear::uniform(width, w, &mut rng));
        width = w;
    }
    let heads = cfg
        .head_kinds()
        .iter()
        .map(|h| Linear::uniform(width, h.width(), &mut rng))
        .collect();
    ModelParams {
        trunk,
        heads,
        log_var: Array1::zeros(cfg.tasks.len()),
    }
}

fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

fn check_input(params: &ModelParams, features: ArrayView2<f64>) -> Result<()> {
    let first = params.trunk.first().ok_or_else(|| Error::Dimension {
        layer: "trunk".into(),
        expected: 1,
        got: 0,
    })?;
    if features.ncols() != first.fan_in() {
        return Err(Error::Dimension {
            layer: "trunk.0".into(),
            expected: first.fan_in(),
            got: features.ncols(),
        });
    }
    if features.nrows() == 0 {
        return Err(Error::Dimension {
            layer: "input rows".into(),
            expected: 1,
            got: 0,
        });
    }
    for (i, pair) in params.trunk.windows(2).enumerate() {
        if pair[1].fan_in() != pair[0].fan_out() {
            return Err(Error::Dimension {
                layer: format!("trunk.{}", i + 1),
                expected: pair[0].fan_out(),
                got: pair[1].fan_in(),
            });
        }
    }
    let width = params.trunk.last().map(Linear::fan_out).unwrap_or(0);
    for (t, h) in params.heads.iter().enumerate() {
        if h.fan_in() != width {
            return Err(Error::Dimension {
                layer: format!("head.{t}"),
                expected: width,
                got: h.fan_in(),
            });
        }
    }
    Ok(())
}

struct TrunkPass {
    /// Inputs to each trunk layer, then the final activation.
    activations: Vec<Array2<f64>>,
    /// Pre-activations of each trunk layer.
    pre: Vec<Array2<f64>>,
}

fn trunk_pass(params: &ModelParams, features: ArrayView2<f64>) -> TrunkPass {
    let mut activations = vec![features.to_owned()];
    let mut pre = Vec::with_capacity(params.trunk.len());
    for layer in &params.trunk {
        let z = layer.affine(activations.last().unwrap().view());
        activations.push(relu(&z));
        pre.push(z);
    }
    TrunkPass { activations, pre }
}

/// Per-task logits, one `B × head_width` matrix per head.
pub fn forward(params: &ModelParams, features: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
    check_input(params, features)?;
    let pass = trunk_pass(params, features);
    let top = pass.activations.last().unwrap();
    Ok(params.heads.iter().map(|h| h.affine(top.view())).collect())
}

/// How task losses are combined.
#[derive(Debug, Clone, PartialEq)]
pub enum Weighting {
    /// `Σ exp(-s_t) L_t + ½ s_t` with learnable `s_t`.
    Uncertainty,
    /// `Σ w_t L_t` with constant weights; log-variances receive no gradient.
    Fixed(Vec<f64>),
}

/// Binds each head to its loss and the combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDef {
    pub heads: Vec<HeadKind>,
    pub weighting: Weighting,
}

impl LossDef {
    pub fn new(cfg: &NetConfig, weighting: Weighting) -> Self {
        LossDef {
            heads: cfg.head_kinds(),
            weighting,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub joint: f64,
    pub per_task: Vec<f64>,
}

struct Combined {
    loss: BatchLoss,
    d_task: Vec<f64>,
    d_log_var: Vec<f64>,
    d_logits: Vec<Array2<f64>>,
}

fn combine(
    params: &ModelParams,
    logits: &[Array2<f64>],
    labels: &[Vec<usize>],
    def: &LossDef,
) -> Result<Combined> {
    let tasks = def.heads.len();
    if logits.len() != tasks || labels.len() != tasks || params.log_var.len() != tasks {
        return Err(Error::Dimension {
            layer: "tasks".into(),
            expected: tasks,
            got: labels.len().min(logits.len()).min(params.log_var.len()),
        });
    }
    let mut per_task = Vec::with_capacity(tasks);
    let mut d_logits = Vec::with_capacity(tasks);
    for (t, head) in def.heads.iter().enumerate() {
        if logits[t].ncols() != head.width() {
            return Err(Error::Dimension {
                layer: format!("head.{t}"),
                expected: head.width(),
                got: logits[t].ncols(),
            });
        }
        let (loss, grad) = head
            .loss(logits[t].view(), &labels[t])
            .map_err(|e| e.in_task(t))?;
        if !loss.is_finite() {
            return Err(Error::NonFinite { task: t });
        }
        per_task.push(loss);
        d_logits.push(grad);
    }
    let (joint, d_task, d_log_var) = match &def.weighting {
        Weighting::Uncertainty => {
            let j = joint_loss(&per_task, &params.uncertainty())?;
            (j.value, j.d_task_loss, j.d_log_var)
        }
        Weighting::Fixed(w) => {
            if w.len() != tasks {
                return Err(Error::Dimension {
                    layer: "fixed weights".into(),
                    expected: tasks,
                    got: w.len(),
                });
            }
            let joint = w.iter().zip(&per_task).map(|(a, b)| a * b).sum();
            (joint, w.clone(), vec![0.0; tasks])
        }
    };
    Ok(Combined {
        loss: BatchLoss { joint, per_task },
        d_task,
        d_log_var,
        d_logits,
    })
}

/// Joint loss on a batch without computing gradients.
pub fn loss_value(
    params: &ModelParams,
    features: ArrayView2<f64>,
    labels: &[Vec<usize>],
    def: &LossDef,
) -> Result<BatchLoss> {
    let logits = forward(params, features)?;
    Ok(combine(params, &logits, labels, def)?.loss)
}

/// Joint loss and its reverse-mode gradient w.r.t. every parameter,
/// including the log-variances.
pub fn backward(
    params: &ModelParams,
    features: ArrayView2<f64>,
    labels: &[Vec<usize>],
    def: &LossDef,
) -> Result<(BatchLoss, Gradients)> {
    check_input(params, features)?;
    let pass = trunk_pass(params, features);
    let top = pass.activations.last().unwrap();
    let logits: Vec<Array2<f64>> = params.heads.iter().map(|h| h.affine(top.view())).collect();
    let combined = combine(params, &logits, labels, def)?;

    let mut grads = params.zeros_like();
    let mut d_top = Array2::<f64>::zeros(top.dim());
    for (t, head) in params.heads.iter().enumerate() {
        let d_logits = &combined.d_logits[t] * combined.d_task[t];
        grads.heads[t].weight = top.t().dot(&d_logits);
        grads.heads[t].bias = d_logits.sum_axis(Axis(0));
        d_top += &d_logits.dot(&head.weight.t());
    }

    let mut d_act = d_top;
    for l in (0..params.trunk.len()).rev() {
        let mut d_pre = d_act;
        d_pre.zip_mut_with(&pass.pre[l], |g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
        let input = &pass.activations[l];
        grads.trunk[l].weight = input.t().dot(&d_pre);
        grads.trunk[l].bias = d_pre.sum_axis(Axis(0));
        d_act = d_pre.dot(&params.trunk[l].weight.t());
    }
    grads.log_var = Array1::from(combined.d_log_var);
    Ok((combined.loss, grads))
}
