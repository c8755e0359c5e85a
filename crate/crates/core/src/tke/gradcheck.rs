use rand::Rng;
use serde::Serialize;

use super::model::{batch_loss, batch_loss_and_grads, EncodedSample};
use super::params::{stream, ModelParams, STREAM_DROPOUT};
use super::vocab::PAD_ID;
use super::{Label, Task, TkeConfig};
use crate::error::{Error, Result};
use crate::lexicon::NUM_CATEGORIES;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Largest batch the checker accepts.
pub const MAX_BATCH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_block: &'static str,
    pub worst_index: usize,
    pub n_checked: usize,
}

/// A self-contained gradient-check problem.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub params: ModelParams,
    pub batch: Vec<EncodedSample>,
    pub cfg: TkeConfig,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn dropout_masks(batch: usize, d: usize, cfg: &TkeConfig) -> Vec<Vec<f64>> {
    let mut rng = stream(cfg.seed, STREAM_DROPOUT);
    let keep = 1.0 - cfg.dropout;
    (0..batch)
        .map(|_| {
            (0..d)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Max relative error between analytic and finite-difference gradients
/// over every parameter, with uniform class weights and a fixed dropout
/// mask drawn from the config seed.
pub fn grad_check(params: &ModelParams, batch: &[EncodedSample], cfg: &TkeConfig) -> Result<GradCheckReport> {
    let weights = vec![1.0; cfg.task.n_outputs()];
    grad_check_with(params, batch, cfg, &weights, false)
}

/// Like [`grad_check`] with explicit class weights. `corrupt` flips the sign
/// of the largest analytic gradient entry before comparing, which a working
/// checker must flag.
pub fn grad_check_with(
    params: &ModelParams,
    batch: &[EncodedSample],
    cfg: &TkeConfig,
    weights: &[f64],
    corrupt: bool,
) -> Result<GradCheckReport> {
    if batch.is_empty() || batch.len() > MAX_BATCH {
        return Err(Error::InvalidInput(format!("grad check needs 1..={MAX_BATCH} samples")));
    }
    let masks = (cfg.dropout > 0.0).then(|| dropout_masks(batch.len(), params.dim(), cfg));
    let masks = masks.as_deref();
    let (task, lambda) = (cfg.task, cfg.lambda);
    let (_, mut grads) = batch_loss_and_grads(params, batch, masks, task, lambda, weights)?;

    if corrupt {
        let mut best: Option<(usize, usize, f64)> = None;
        for (b, (_, block)) in grads.blocks().iter().enumerate() {
            for (i, &g) in block.iter().enumerate() {
                if best.is_none_or(|(_, _, m)| g.abs() > m) {
                    best = Some((b, i, g.abs()));
                }
            }
        }
        if let Some((b, i, _)) = best {
            let mut blocks = grads.blocks_mut();
            blocks[b].1[i] = -blocks[b].1[i];
        }
    }

    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_block: "",
        worst_index: 0,
        n_checked: 0,
    };
    let analytic = grads.blocks();
    for b in 0..analytic.len() {
        let (name, g) = analytic[b];
        for i in 0..g.len() {
            let orig = probe.blocks()[b].1[i];
            probe.blocks_mut()[b].1[i] = orig + FD_STEP;
            let plus = batch_loss(&probe, batch, masks, task, lambda, weights)?;
            probe.blocks_mut()[b].1[i] = orig - FD_STEP;
            let minus = batch_loss(&probe, batch, masks, task, lambda, weights)?;
            probe.blocks_mut()[b].1[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let err = rel_error(g[i], numeric);
            if err > report.max_rel_error || report.n_checked == 0 {
                report.max_rel_error = err;
                report.worst_block = name;
                report.worst_index = i;
            }
            report.n_checked += 1;
        }
    }
    Ok(report)
}

/// A random small problem: d and h in 2..=8, λ in [0, 1], any task,
/// up to 8 samples of length ≤ 10 with padding and random category ids.
pub fn random_grad_check_case(seed: u64) -> GradCheckCase {
    let mut rng = stream(seed, 0);
    let task = Task::ALL[rng.gen_range(0..4)];
    let cfg = TkeConfig {
        task,
        dim: rng.gen_range(2..=8),
        hidden: rng.gen_range(2..=8),
        lambda: if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..=1.0) },
        dropout: if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..0.6) },
        pad_len: 10,
        seed,
        ..Default::default()
    };
    let vocab_size = rng.gen_range(4..16);
    let mut params = ModelParams::init(vocab_size, &cfg);
    // Larger weights than the default init so gradients are not all tiny.
    for (_, block) in params.blocks_mut() {
        for x in block.iter_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
    }
    let n = rng.gen_range(1..=MAX_BATCH);
    let batch = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=cfg.pad_len);
            let mut tokens: Vec<u32> = (0..len).map(|_| rng.gen_range(1..vocab_size as u32)).collect();
            let mut toxic: Vec<u8> = (0..len)
                .map(|_| if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=NUM_CATEGORIES as u8) })
                .collect();
            tokens.resize(cfg.pad_len, PAD_ID);
            toxic.resize(cfg.pad_len, 0);
            let label = if task.is_multilabel() {
                Label::Multi(rng.gen_range(1..(1u8 << task.n_outputs())))
            } else {
                Label::Class(rng.gen_range(0..task.n_outputs()))
            };
            EncodedSample {
                tokens,
                toxic,
                label: Some(label),
            }
        })
        .collect();
    GradCheckCase { params, batch, cfg }
}
