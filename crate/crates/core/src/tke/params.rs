use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TkeConfig;
use crate::lexicon::NUM_CATEGORIES;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Bound of the uniform initialization.
pub const INIT_BOUND: f64 = 0.1;

// Independent generator streams per parameter block, so dropping the
// category table leaves every other block's initialization untouched.
pub(crate) const STREAM_EMBEDDINGS: u64 = 1;
pub(crate) const STREAM_CATEGORIES: u64 = 2;
pub(crate) const STREAM_HIDDEN: u64 = 3;
pub(crate) const STREAM_HEAD: u64 = 4;
pub(crate) const STREAM_DROPOUT: u64 = 5;
pub(crate) const STREAM_SHUFFLE: u64 = 6;
pub(crate) const STREAM_VALIDATION: u64 = 7;

pub(crate) fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// All trainable tables. The same type holds gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Character embeddings, |V| x d.
    pub embeddings: Matrix,
    /// Toxic category embeddings `c_0..c_5`, 6 x d. Absent in the ablated
    /// build.
    pub categories: Option<Matrix>,
    /// Hidden layer weights, d x h.
    pub hidden_w: Matrix,
    pub hidden_b: Vec<f64>,
    /// Head weights, h x k.
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl ModelParams {
    /// Uniform init in [-0.1, 0.1] for all weight matrices, zero biases.
    pub fn init(vocab_size: usize, cfg: &TkeConfig) -> Self {
        let (d, h, k) = (cfg.dim, cfg.hidden, cfg.task.n_outputs());
        ModelParams {
            embeddings: Matrix::uniform(vocab_size, d, INIT_BOUND, &mut stream(cfg.seed, STREAM_EMBEDDINGS)),
            categories: (!cfg.ablate_tke).then(|| {
                Matrix::uniform(NUM_CATEGORIES + 1, d, INIT_BOUND, &mut stream(cfg.seed, STREAM_CATEGORIES))
            }),
            hidden_w: Matrix::uniform(d, h, INIT_BOUND, &mut stream(cfg.seed, STREAM_HIDDEN)),
            hidden_b: vec![0.0; h],
            head_w: Matrix::uniform(h, k, INIT_BOUND, &mut stream(cfg.seed, STREAM_HEAD)),
            head_b: vec![0.0; k],
        }
    }

    pub fn zeros_like(&self) -> Self {
        ModelParams {
            embeddings: Matrix::zeros(self.embeddings.rows, self.embeddings.cols),
            categories: self.categories.as_ref().map(|c| Matrix::zeros(c.rows, c.cols)),
            hidden_w: Matrix::zeros(self.hidden_w.rows, self.hidden_w.cols),
            hidden_b: vec![0.0; self.hidden_b.len()],
            head_w: Matrix::zeros(self.head_w.rows, self.head_w.cols),
            head_b: vec![0.0; self.head_b.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.embeddings.cols
    }

    pub fn hidden(&self) -> usize {
        self.hidden_w.cols
    }

    pub fn n_outputs(&self) -> usize {
        self.head_w.cols
    }

    /// Named flat views of every block, in a fixed order.
    pub fn blocks(&self) -> Vec<(&'static str, &[f64])> {
        let mut v: Vec<(&'static str, &[f64])> = vec![("embeddings", &self.embeddings.data)];
        if let Some(c) = &self.categories {
            v.push(("categories", &c.data));
        }
        v.push(("hidden_w", &self.hidden_w.data));
        v.push(("hidden_b", &self.hidden_b));
        v.push(("head_w", &self.head_w.data));
        v.push(("head_b", &self.head_b));
        v
    }

    pub fn blocks_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut v: Vec<(&'static str, &mut [f64])> = vec![("embeddings", &mut self.embeddings.data)];
        if let Some(c) = &mut self.categories {
            v.push(("categories", &mut c.data));
        }
        v.push(("hidden_w", &mut self.hidden_w.data));
        v.push(("hidden_b", &mut self.hidden_b));
        v.push(("head_w", &mut self.head_w.data));
        v.push(("head_b", &mut self.head_b));
        v
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }

    /// Checks block shapes against a vocabulary size and config.
    pub fn check_shapes(&self, vocab_size: usize, cfg: &TkeConfig) -> crate::Result<()> {
        let (d, h, k) = (cfg.dim, cfg.hidden, cfg.task.n_outputs());
        let ok = self.embeddings.rows == vocab_size
            && self.embeddings.cols == d
            && self.categories.as_ref().map_or(cfg.ablate_tke, |c| {
                !cfg.ablate_tke && c.rows == NUM_CATEGORIES + 1 && c.cols == d
            })
            && (self.hidden_w.rows, self.hidden_w.cols) == (d, h)
            && self.hidden_b.len() == h
            && (self.head_w.rows, self.head_w.cols) == (h, k)
            && self.head_b.len() == k;
        if ok {
            Ok(())
        } else {
            Err(crate::Error::Model("parameter shapes do not match the configuration".into()))
        }
    }
}
