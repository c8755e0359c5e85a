use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{backward, forward_cached, loss_and_grad, sigmoids, softmax, EncodedSample, TextEncoder};
use super::params::{stream, ModelParams, STREAM_DROPOUT, STREAM_SHUFFLE, STREAM_VALIDATION};
use super::vocab::Vocab;
use super::{Label, Task, TkeConfig};
use crate::corpus::{validate_hierarchy, ToxiSample};
use crate::error::{Error, Result};
use crate::lexicon::{InsultEntry, Lexicon};

pub const CHECKPOINT_FORMAT: &str = "toxicn-tke";
pub const CHECKPOINT_VERSION: u32 = 1;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Inputs shorter than this train without a held-out split.
const MIN_FOR_VALIDATION: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss, with dropout.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: Label,
    /// Softmax probabilities, or per-label sigmoids for the group task.
    pub probs: Vec<f64>,
}

/// Everything needed to predict: weights plus the vocabulary and lexicon
/// the inputs were encoded with.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub config: TkeConfig,
    pub vocab: Vocab,
    pub lexicon: Lexicon,
    pub class_weights: Vec<f64>,
    pub params: ModelParams,
    pub history: Vec<EpochStats>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    config: TkeConfig,
    vocab: Vocab,
    lexicon: Vec<InsultEntry>,
    class_weights: Vec<f64>,
    params: ModelParams,
    history: Vec<EpochStats>,
    best_epoch: usize,
}

impl TrainedModel {
    pub fn encoder(&self) -> TextEncoder<'_> {
        TextEncoder {
            vocab: &self.vocab,
            lexicon: &self.lexicon,
            pad_len: self.config.pad_len,
        }
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction> {
        let enc = self.encoder().encode(text, None);
        let scores = forward_cached(&enc, &self.params, self.config.lambda, None)?.scores;
        Ok(decide(&scores, self.config.task))
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            lexicon: self.lexicon.entries().to_vec(),
            class_weights: self.class_weights.clone(),
            params: self.params.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Model(format!("not a model checkpoint (format {:?})", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Model(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.config.validate()?;
        ck.params.check_shapes(ck.vocab.len(), &ck.config)?;
        if !ck.params.is_finite() {
            return Err(Error::Model("checkpoint holds non-finite parameters".into()));
        }
        if ck.class_weights.len() != ck.config.task.n_outputs() {
            return Err(Error::Model("class weight count does not match the task".into()));
        }
        Ok(TrainedModel {
            lexicon: Lexicon::from_entries(ck.lexicon)?,
            config: ck.config,
            vocab: ck.vocab,
            class_weights: ck.class_weights,
            params: ck.params,
            history: ck.history,
            best_epoch: ck.best_epoch,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Turns raw scores into a label. Single-label tasks take the argmax
/// (lowest index on ties). The group task keeps every label with
/// probability ≥ 0.5, or the most probable one if none passes.
pub fn decide(scores: &[f64], task: Task) -> Prediction {
    if task.is_multilabel() {
        let probs = sigmoids(scores);
        let mut bits = 0u8;
        for (i, &p) in probs.iter().enumerate() {
            if p >= 0.5 {
                bits |= 1 << i;
            }
        }
        if bits == 0 {
            bits = 1 << argmax(&probs);
        }
        Prediction {
            label: Label::Multi(bits),
            probs,
        }
    } else {
        Prediction {
            label: Label::Class(argmax(scores)),
            probs: softmax(scores),
        }
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Predictions for a list of texts.
pub fn predict<'a>(model: &TrainedModel, texts: impl IntoIterator<Item = &'a str>) -> Result<Vec<Prediction>> {
    texts.into_iter().map(|t| model.predict_text(t)).collect()
}

/// Inverse label frequency, scaled so the weights of the labels that occur
/// average 1. Labels that never occur get weight 1. For the group task a
/// label's frequency is the number of samples carrying it.
pub fn class_weights(labels: &[Label], task: Task) -> Vec<f64> {
    let k = task.n_outputs();
    let mut counts = vec![0usize; k];
    for l in labels {
        match *l {
            Label::Class(c) if c < k => counts[c] += 1,
            Label::Multi(b) => {
                for (i, n) in counts.iter_mut().enumerate() {
                    if b & (1 << i) != 0 {
                        *n += 1;
                    }
                }
            }
            _ => {}
        }
    }
    let inv: Vec<Option<f64>> = counts.iter().map(|&n| (n > 0).then(|| 1.0 / n as f64)).collect();
    let present: Vec<f64> = inv.iter().flatten().copied().collect();
    if present.is_empty() {
        return vec![1.0; k];
    }
    let mean = present.iter().sum::<f64>() / present.len() as f64;
    inv.into_iter().map(|w| w.map_or(1.0, |w| w / mean)).collect()
}

struct AdamW {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl AdamW {
    fn new(params: &ModelParams) -> Self {
        AdamW {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grads: &ModelParams, lr: f64, wd: f64) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let blocks = params.blocks_mut().into_iter();
        let gs = grads.blocks().into_iter();
        let ms = self.m.blocks_mut().into_iter();
        let vs = self.v.blocks_mut().into_iter();
        for ((((_, p), (_, g)), (_, m)), (_, v)) in blocks.zip(gs).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + ADAM_EPS);
                p[i] -= lr * (update + wd * p[i]);
            }
        }
    }
}

fn is_correct(pred: Label, gold: Label) -> bool {
    pred == gold
}

/// Loss (no dropout) and accuracy over encoded samples.
fn evaluate(params: &ModelParams, data: &[EncodedSample], cfg: &TkeConfig, weights: &[f64]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for enc in data {
        let gold = enc.label.expect("training samples carry labels");
        let scores = forward_cached(enc, params, cfg.lambda, None)?.scores;
        loss += loss_and_grad(&scores, gold, weights)?.0;
        if is_correct(decide(&scores, cfg.task).label, gold) {
            correct += 1;
        }
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Trains a classifier for `cfg.task`.
///
/// Samples the task does not apply to are dropped (type: toxic samples
/// only; group and expression: hate samples only). A share `val_ratio` of
/// the rest is held out for early stopping when at least 10 samples remain;
/// otherwise the training loss is monitored. The parameters of the epoch
/// with the lowest monitored loss are returned.
pub fn train(samples: &[ToxiSample], lexicon: &Lexicon, cfg: &TkeConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let bad: Vec<u64> = samples
        .iter()
        .filter(|s| !validate_hierarchy(s).is_empty())
        .map(|s| s.id)
        .collect();
    if !bad.is_empty() {
        return Err(Error::InvalidSamples { ids: bad });
    }
    let usable: Vec<(&ToxiSample, Label)> = samples
        .iter()
        .filter_map(|s| cfg.task.label_of(s).map(|l| (s, l)))
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no training samples carry a {} label",
            cfg.task
        )));
    }

    let mut order: Vec<usize> = (0..usable.len()).collect();
    let n_val = if usable.len() >= MIN_FOR_VALIDATION && cfg.val_ratio > 0.0 {
        ((usable.len() as f64 * cfg.val_ratio).round() as usize).clamp(1, usable.len() - 1)
    } else {
        0
    };
    if n_val > 0 {
        order.shuffle(&mut stream(cfg.seed, STREAM_VALIDATION));
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    train_idx.sort_unstable();

    let vocab = Vocab::build(train_idx.iter().map(|&i| usable[i].0.text.as_str()))?;
    let encoder = TextEncoder {
        vocab: &vocab,
        lexicon,
        pad_len: cfg.pad_len,
    };
    let encode = |idx: &[usize]| -> Vec<EncodedSample> {
        idx.iter()
            .map(|&i| encoder.encode(&usable[i].0.text, Some(usable[i].1)))
            .collect()
    };
    let train_set = encode(&train_idx);
    let val_set = encode(val_idx);

    let labels: Vec<Label> = train_idx.iter().map(|&i| usable[i].1).collect();
    let weights = class_weights(&labels, cfg.task);

    let mut params = ModelParams::init(vocab.len(), cfg);
    let mut opt = AdamW::new(&params);
    let mut shuffle_rng = stream(cfg.seed, STREAM_SHUFFLE);
    let mut dropout_rng = stream(cfg.seed, STREAM_DROPOUT);
    let keep = 1.0 - cfg.dropout;

    let mut best = (f64::INFINITY, params.clone(), 0usize);
    let mut stale = 0;
    let mut history = Vec::new();
    let mut perm: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        perm.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in perm.chunks(cfg.batch) {
            let scale = 1.0 / chunk.len() as f64;
            let mut grads = params.zeros_like();
            for &j in chunk {
                let enc = &train_set[j];
                let mask: Option<Vec<f64>> = (cfg.dropout > 0.0).then(|| {
                    (0..cfg.dim)
                        .map(|_| if dropout_rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                        .collect()
                });
                let cache = forward_cached(enc, &params, cfg.lambda, mask.as_deref())?;
                let (loss, dscores) = loss_and_grad(&cache.scores, enc.label.expect("labeled"), &weights)?;
                epoch_loss += loss;
                backward(enc, &params, cfg.lambda, &cache, mask.as_deref(), &dscores, scale, &mut grads);
            }
            opt.step(&mut params, &grads, cfg.lr, cfg.weight_decay);
        }
        if !params.is_finite() {
            return Err(Error::Model(format!("parameters diverged in epoch {epoch}")));
        }

        let (train_eval_loss, train_accuracy) = evaluate(&params, &train_set, cfg, &weights)?;
        let (val_loss, val_accuracy) = if val_set.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&params, &val_set, cfg, &weights)?;
            (Some(l), Some(a))
        };
        history.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            train_accuracy,
            val_loss,
            val_accuracy,
        });

        let monitored = val_loss.unwrap_or(train_eval_loss);
        if monitored < best.0 {
            best = (monitored, params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    // With a monitored loss that never went below infinity (cannot happen
    // for finite parameters) the initial parameters would be kept.
    let (_, params, best_epoch) = best;
    Ok(TrainedModel {
        config: cfg.clone(),
        vocab,
        lexicon: lexicon.clone(),
        class_weights: weights,
        params,
        history,
        best_epoch,
    })
}
