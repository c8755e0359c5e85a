//! Toxic knowledge enhancement classifier.
//!
//! Each character `x_i` is embedded as `w_i' = w_i + λ t_i`, where `w_i` is
//! its word embedding and `t_i` the embedding of the insult category
//! covering it (`c_0` for uncovered characters). The enhanced rows are
//! mean-pooled over non-padding positions, passed through one tanh hidden
//! layer and a task head.

// Dense numeric kernels index several arrays in lockstep.
#![allow(clippy::needless_range_loop)]

mod gradcheck;
mod model;
mod params;
mod train;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Expression, Group, GroupSet, ToxiSample};
use crate::error::{Error, Result};

pub use gradcheck::{grad_check, grad_check_with, random_grad_check_case, GradCheckReport, GradCheckCase};
pub use model::{
    batch_loss, batch_loss_and_grads, embed_enhanced, forward, loss_weighted_ce, EncodedSample, TextEncoder,
};
pub use params::{Matrix, ModelParams};
pub use train::{
    class_weights, decide, predict, train, EpochStats, Prediction, TrainedModel, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
};
pub use vocab::{Vocab, PAD_ID, UNK_ID};

/// The four classification subtasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// toxic vs non-toxic, all samples
    Toxic,
    /// offensive vs hate, toxic samples only
    Type,
    /// targeted groups (multi-label), hate samples only
    Group,
    /// explicit / implicit / reporting, hate samples only
    Expression,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Toxic, Task::Type, Task::Group, Task::Expression];

    pub fn name(self) -> &'static str {
        match self {
            Task::Toxic => "toxic",
            Task::Type => "type",
            Task::Group => "group",
            Task::Expression => "expression",
        }
    }

    pub fn n_outputs(self) -> usize {
        match self {
            Task::Toxic | Task::Type => 2,
            Task::Group => 4,
            Task::Expression => 3,
        }
    }

    pub fn is_multilabel(self) -> bool {
        self == Task::Group
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Task::Toxic => vec!["non_toxic", "toxic"],
            Task::Type => vec!["offensive", "hate"],
            Task::Group => Group::ALL.iter().map(|g| g.name()).collect(),
            Task::Expression => Expression::ALL.iter().map(|e| e.name()).collect(),
        }
    }

    /// Gold label of `sample` for this task, `None` when the task does not
    /// apply (e.g. the group task on a non-hateful sample).
    pub fn label_of(self, sample: &ToxiSample) -> Option<Label> {
        match self {
            Task::Toxic => Some(Label::Class(sample.toxic as usize)),
            Task::Type => sample.toxic.then_some(Label::Class(sample.hate as usize)),
            Task::Group => (sample.hate && !sample.groups.is_empty()).then_some(Label::Multi(sample.groups.bits())),
            Task::Expression => {
                if sample.hate {
                    sample.expression.map(|e| Label::Class(e.index()))
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown task {s:?} (toxic|type|group|expression)")))
    }
}

/// A task label: a class index, or a bit set for the multi-label task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(usize),
    Multi(u8),
}

impl Label {
    pub fn class(self) -> Option<usize> {
        match self {
            Label::Class(c) => Some(c),
            Label::Multi(_) => None,
        }
    }

    pub fn bits(self) -> Option<u8> {
        match self {
            Label::Multi(b) => Some(b),
            Label::Class(_) => None,
        }
    }

    pub fn groups(self) -> Option<GroupSet> {
        self.bits().map(GroupSet::from_bits)
    }

    pub(crate) fn check(self, task: Task) -> Result<()> {
        let ok = match (self, task.is_multilabel()) {
            (Label::Class(c), false) => c < task.n_outputs(),
            (Label::Multi(b), true) => b != 0 && (b >> task.n_outputs()) == 0,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Model(format!("label {self:?} does not fit task {task}")))
        }
    }
}

/// Model and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TkeConfig {
    pub task: Task,
    /// Embedding dimension `d`.
    pub dim: usize,
    /// Weight `λ` of the toxic category embedding, in [0, 1].
    pub lambda: f64,
    pub hidden: usize,
    pub pad_len: usize,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub seed: u64,
    /// Epochs without validation-loss improvement before stopping.
    pub patience: usize,
    /// Share of the training input held out for early stopping.
    pub val_ratio: f64,
    /// Build the model without the category table at all.
    pub ablate_tke: bool,
}

impl Default for TkeConfig {
    fn default() -> Self {
        TkeConfig {
            task: Task::Toxic,
            dim: 64,
            lambda: 0.5,
            hidden: 64,
            pad_len: 100,
            epochs: 20,
            batch: 64,
            lr: 1e-3,
            weight_decay: 0.01,
            dropout: 0.5,
            seed: 1,
            patience: 3,
            val_ratio: 0.1,
            ablate_tke: false,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("bad value {value:?} for {key}")))
}

impl TkeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if self.dim == 0 || self.hidden == 0 || self.pad_len == 0 || self.batch == 0 {
            return bad("dim, hidden, pad_len and batch must be positive");
        }
        if self.epochs == 0 || self.patience == 0 {
            return bad("epochs and patience must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return bad("lr and weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.val_ratio) {
            return bad("val_ratio must lie in [0, 1)");
        }
        Ok(())
    }

    /// Sets one field from its config-file key. Returns `false` for keys
    /// that are not model settings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        match key {
            "task" => self.task = value.trim().parse()?,
            "dim" | "d" => self.dim = parse_value(key, value)?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "pad_len" | "padding" => self.pad_len = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch" | "batch_size" => self.batch = parse_value(key, value)?,
            "lr" | "learning_rate" => self.lr = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "val_ratio" => self.val_ratio = parse_value(key, value)?,
            "ablate_tke" => self.ablate_tke = parse_value(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

/// Parses a line-oriented `key = value` file. `#` starts a comment line.
pub fn parse_kv(content: &str, source: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::resource(source, i + 1, "expected key=value"))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
