use serde::{Deserialize, Serialize};

use super::params::{Matrix, ModelParams};
use super::vocab::{Vocab, PAD_ID, UNK_ID};
use super::{Label, Task};
use crate::error::{Error, Result};
use crate::lexicon::{token_category, Lexicon, NUM_CATEGORIES};

/// A text as padded token ids plus per-token toxic category ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSample {
    pub tokens: Vec<u32>,
    pub toxic: Vec<u8>,
    pub label: Option<Label>,
}

/// Turns texts into [`EncodedSample`]s: one token per character, truncated
/// or padded to `pad_len`. An empty text becomes a single unknown token so
/// every text has something to pool.
pub struct TextEncoder<'a> {
    pub vocab: &'a Vocab,
    pub lexicon: &'a Lexicon,
    pub pad_len: usize,
}

impl TextEncoder<'_> {
    pub fn encode(&self, text: &str, label: Option<Label>) -> EncodedSample {
        let mut tokens: Vec<u32> = text.chars().take(self.pad_len).map(|c| self.vocab.id(c)).collect();
        let mut toxic = token_category(text, self.lexicon);
        toxic.truncate(self.pad_len);
        if tokens.is_empty() {
            tokens.push(UNK_ID);
        }
        tokens.resize(self.pad_len, PAD_ID);
        toxic.resize(self.pad_len, 0);
        EncodedSample { tokens, toxic, label }
    }
}

fn check_ids(enc: &EncodedSample, params: &ModelParams) -> Result<()> {
    if enc.tokens.len() != enc.toxic.len() {
        return Err(Error::Model("token and toxic id sequences differ in length".into()));
    }
    let vocab = params.embeddings.rows;
    if let Some(t) = enc.tokens.iter().find(|&&t| t as usize >= vocab) {
        return Err(Error::Model(format!("token id {t} out of range for vocabulary of {vocab}")));
    }
    if let Some(c) = enc.toxic.iter().find(|&&c| c as usize > NUM_CATEGORIES) {
        return Err(Error::Model(format!("toxic id {c} out of range")));
    }
    Ok(())
}

/// Enhanced embedding rows `W[token_i] + λ C[toxic_i]`, one per position.
/// Without a category table the rows are the plain embeddings.
pub fn embed_enhanced(enc: &EncodedSample, params: &ModelParams, lambda: f64) -> Result<Matrix> {
    check_ids(enc, params)?;
    let d = params.dim();
    let mut out = Matrix::zeros(enc.tokens.len(), d);
    for (i, (&t, &c)) in enc.tokens.iter().zip(&enc.toxic).enumerate() {
        let row = out.row_mut(i);
        row.copy_from_slice(params.embeddings.row(t as usize));
        if let Some(cat) = &params.categories {
            for (x, y) in row.iter_mut().zip(cat.row(c as usize)) {
                *x += lambda * y;
            }
        }
    }
    Ok(out)
}

/// Intermediate values of one forward pass, kept for backprop.
pub(crate) struct Cache {
    pub positions: Vec<usize>,
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub scores: Vec<f64>,
}

/// Forward pass. `mask` is an inverted-dropout mask over the pooled vector
/// (entries 0 or 1/(1-p)).
pub(crate) fn forward_cached(
    enc: &EncodedSample,
    params: &ModelParams,
    lambda: f64,
    mask: Option<&[f64]>,
) -> Result<Cache> {
    check_ids(enc, params)?;
    let positions: Vec<usize> = (0..enc.tokens.len()).filter(|&i| enc.tokens[i] != PAD_ID).collect();
    if positions.is_empty() {
        return Err(Error::Model("empty sequence".into()));
    }
    let d = params.dim();
    let mut pooled = vec![0.0; d];
    for &i in &positions {
        let w = params.embeddings.row(enc.tokens[i] as usize);
        match &params.categories {
            Some(cat) => {
                let c = cat.row(enc.toxic[i] as usize);
                for k in 0..d {
                    pooled[k] += w[k] + lambda * c[k];
                }
            }
            None => {
                for k in 0..d {
                    pooled[k] += w[k];
                }
            }
        }
    }
    let n = positions.len() as f64;
    for x in &mut pooled {
        *x /= n;
    }
    if let Some(m) = mask {
        for (x, m) in pooled.iter_mut().zip(m) {
            *x *= m;
        }
    }

    let h = params.hidden();
    let mut hidden = params.hidden_b.clone();
    for (k, &p) in pooled.iter().enumerate() {
        let row = params.hidden_w.row(k);
        for j in 0..h {
            hidden[j] += p * row[j];
        }
    }
    for a in &mut hidden {
        *a = a.tanh();
    }

    let kout = params.n_outputs();
    let mut scores = params.head_b.clone();
    for (j, &a) in hidden.iter().enumerate() {
        let row = params.head_w.row(j);
        for c in 0..kout {
            scores[c] += a * row[c];
        }
    }
    Ok(Cache {
        positions,
        pooled,
        hidden,
        scores,
    })
}

/// Class scores for one sample (inference mode, no dropout).
pub fn forward(enc: &EncodedSample, params: &ModelParams, lambda: f64) -> Result<Vec<f64>> {
    Ok(forward_cached(enc, params, lambda, None)?.scores)
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

pub(crate) fn sigmoids(scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| sigmoid(s)).collect()
}

/// Loss and its gradient with respect to the scores.
///
/// Single-label: softmax cross-entropy scaled by the true class weight.
/// Multi-label: mean over labels of weight-scaled binary cross-entropy.
pub(crate) fn loss_and_grad(scores: &[f64], label: Label, weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Model("non-finite scores".into()));
    }
    if weights.len() != scores.len() || weights.iter().any(|w| w.is_nan() || *w <= 0.0) {
        return Err(Error::Model("class weights must be positive, one per output".into()));
    }
    match label {
        Label::Class(y) => {
            if y >= scores.len() {
                return Err(Error::Model(format!("class {y} out of range")));
            }
            let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
            let loss = (weights[y] * (lse - scores[y])).max(0.0);
            let mut grad = softmax(scores);
            grad[y] -= 1.0;
            for g in &mut grad {
                *g *= weights[y];
            }
            Ok((loss, grad))
        }
        Label::Multi(bits) => {
            let l = scores.len();
            if l >= 8 || (bits >> l) != 0 {
                return Err(Error::Model(format!("label bits {bits:#b} out of range")));
            }
            let mut loss = 0.0;
            let mut grad = vec![0.0; l];
            for (i, &s) in scores.iter().enumerate() {
                let y = f64::from((bits >> i) & 1);
                loss += weights[i] * (softplus(s) - y * s);
                grad[i] = weights[i] * (sigmoid(s) - y) / l as f64;
            }
            Ok(((loss / l as f64).max(0.0), grad))
        }
    }
}

/// Weighted cross-entropy of one prediction.
pub fn loss_weighted_ce(scores: &[f64], label: Label, class_weights: &[f64]) -> Result<f64> {
    Ok(loss_and_grad(scores, label, class_weights)?.0)
}

/// Accumulates `scale * d loss / d params` into `grads`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    enc: &EncodedSample,
    params: &ModelParams,
    lambda: f64,
    cache: &Cache,
    mask: Option<&[f64]>,
    dscores: &[f64],
    scale: f64,
    grads: &mut ModelParams,
) {
    let (d, h, k) = (params.dim(), params.hidden(), params.n_outputs());

    for c in 0..k {
        grads.head_b[c] += scale * dscores[c];
    }
    let mut dz = vec![0.0; h];
    for j in 0..h {
        let a = cache.hidden[j];
        let row = params.head_w.row(j);
        let grow = grads.head_w.row_mut(j);
        let mut da = 0.0;
        for c in 0..k {
            grow[c] += scale * a * dscores[c];
            da += row[c] * dscores[c];
        }
        dz[j] = da * (1.0 - a * a);
    }
    for j in 0..h {
        grads.hidden_b[j] += scale * dz[j];
    }
    let mut dpooled = vec![0.0; d];
    for kk in 0..d {
        let p = cache.pooled[kk];
        let row = params.hidden_w.row(kk);
        let grow = grads.hidden_w.row_mut(kk);
        let mut acc = 0.0;
        for j in 0..h {
            grow[j] += scale * p * dz[j];
            acc += row[j] * dz[j];
        }
        dpooled[kk] = acc;
    }
    if let Some(m) = mask {
        for (g, m) in dpooled.iter_mut().zip(m) {
            *g *= m;
        }
    }
    let n = cache.positions.len() as f64;
    let drow: Vec<f64> = dpooled.iter().map(|g| scale * g / n).collect();
    for &i in &cache.positions {
        let wrow = grads.embeddings.row_mut(enc.tokens[i] as usize);
        for kk in 0..d {
            wrow[kk] += drow[kk];
        }
        if let Some(gc) = &mut grads.categories {
            let crow = gc.row_mut(enc.toxic[i] as usize);
            for kk in 0..d {
                crow[kk] += lambda * drow[kk];
            }
        }
    }
}

fn sample_label(enc: &EncodedSample, task: Task) -> Result<Label> {
    let label = enc
        .label
        .ok_or_else(|| Error::Model("sample has no label".into()))?;
    label.check(task)?;
    Ok(label)
}

/// Mean weighted loss over a batch.
pub fn batch_loss(
    params: &ModelParams,
    batch: &[EncodedSample],
    masks: Option<&[Vec<f64>]>,
    task: Task,
    lambda: f64,
    weights: &[f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Model("empty batch".into()));
    }
    let mut total = 0.0;
    for (i, enc) in batch.iter().enumerate() {
        let mask = masks.map(|m| m[i].as_slice());
        let cache = forward_cached(enc, params, lambda, mask)?;
        total += loss_and_grad(&cache.scores, sample_label(enc, task)?, weights)?.0;
    }
    Ok(total / batch.len() as f64)
}

/// Mean weighted loss over a batch and its gradient for every block.
pub fn batch_loss_and_grads(
    params: &ModelParams,
    batch: &[EncodedSample],
    masks: Option<&[Vec<f64>]>,
    task: Task,
    lambda: f64,
    weights: &[f64],
) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Model("empty batch".into()));
    }
    let mut grads = params.zeros_like();
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for (i, enc) in batch.iter().enumerate() {
        let mask = masks.map(|m| m[i].as_slice());
        let cache = forward_cached(enc, params, lambda, mask)?;
        let (loss, dscores) = loss_and_grad(&cache.scores, sample_label(enc, task)?, weights)?;
        total += loss;
        backward(enc, params, lambda, &cache, mask, &dscores, scale, &mut grads);
    }
    Ok((total * scale, grads))
}
