//! Weighted precision/recall/F1, per-expression accuracy and Fleiss' kappa.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Expression, ToxiSample};
use crate::error::{Error, Result};
use crate::tke::{Label, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Single,
    MultiLabel,
}

/// Support-weighted scores in percent (unrounded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count per class (positive count per label in multi-label mode).
    pub support: Vec<usize>,
    /// Classes whose precision was undefined and taken as 0.
    pub zero_division: usize,
}

fn label_bits(l: Label, n_classes: usize, mode: Mode) -> Result<u32> {
    match (l, mode) {
        (Label::Class(c), Mode::Single) if c < n_classes => Ok(1 << c),
        (Label::Multi(b), Mode::MultiLabel) if n_classes >= 8 || (b >> n_classes) == 0 => Ok(u32::from(b)),
        _ => Err(Error::InvalidInput(format!(
            "label {l:?} does not fit {n_classes} classes in {mode:?} mode"
        ))),
    }
}

/// Per-class P/R/F1 from confusion counts, averaged with gold-support
/// weights. In multi-label mode each label is its own binary problem.
pub fn weighted_prf(preds: &[Label], golds: &[Label], n_classes: usize, mode: Mode) -> Result<Prf> {
    if preds.len() != golds.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::InvalidInput("nothing to evaluate".into()));
    }
    if n_classes == 0 || n_classes > 32 {
        return Err(Error::InvalidInput(format!("bad class count {n_classes}")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut pred_pos = vec![0usize; n_classes];
    let mut support = vec![0usize; n_classes];
    for (&p, &g) in preds.iter().zip(golds) {
        let (p, g) = (label_bits(p, n_classes, mode)?, label_bits(g, n_classes, mode)?);
        for c in 0..n_classes {
            let (pc, gc) = (p >> c & 1 == 1, g >> c & 1 == 1);
            tp[c] += usize::from(pc && gc);
            pred_pos[c] += usize::from(pc);
            support[c] += usize::from(gc);
        }
    }
    let total: usize = support.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("no positive gold labels".into()));
    }
    let mut zero_division = 0;
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
    for c in 0..n_classes {
        if support[c] == 0 {
            continue;
        }
        let precision = if pred_pos[c] == 0 {
            zero_division += 1;
            0.0
        } else {
            tp[c] as f64 / pred_pos[c] as f64
        };
        let recall = tp[c] as f64 / support[c] as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = support[c] as f64;
        p_sum += w * precision;
        r_sum += w * recall;
        f_sum += w * f1;
    }
    let t = total as f64;
    Ok(Prf {
        precision: 100.0 * p_sum / t,
        recall: 100.0 * r_sum / t,
        f1: 100.0 * f_sum / t,
        support,
        zero_division,
    })
}

/// Exact accuracy of one stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StratumAccuracy {
    pub correct: usize,
    pub total: usize,
}

impl StratumAccuracy {
    pub fn percent(&self) -> f64 {
        100.0 * self.correct as f64 / self.total as f64
    }
}

/// Toxic-identification accuracy split by gold expression. `None` marks a
/// stratum without samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpressionBreakdown {
    pub non_toxic: Option<StratumAccuracy>,
    pub explicit: Option<StratumAccuracy>,
    pub implicit: Option<StratumAccuracy>,
    pub reporting: Option<StratumAccuracy>,
}

impl ExpressionBreakdown {
    pub fn strata(&self) -> [(&'static str, Option<StratumAccuracy>); 4] {
        [
            ("non_toxic", self.non_toxic),
            ("explicit", self.explicit),
            ("implicit", self.implicit),
            ("reporting", self.reporting),
        ]
    }
}

/// Accuracy of binary toxic predictions per stratum. Offensive samples,
/// which carry no expression label, count as explicit.
pub fn expression_accuracy_breakdown(toxic_preds: &[bool], golds: &[ToxiSample]) -> Result<ExpressionBreakdown> {
    if toxic_preds.len() != golds.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} samples",
            toxic_preds.len(),
            golds.len()
        )));
    }
    let mut acc = [StratumAccuracy { correct: 0, total: 0 }; 4];
    for (&pred, g) in toxic_preds.iter().zip(golds) {
        let stratum = if !g.toxic {
            0
        } else {
            1 + g.expression.unwrap_or(Expression::Explicit).index()
        };
        acc[stratum].total += 1;
        acc[stratum].correct += usize::from(pred == g.toxic);
    }
    let get = |i: usize| (acc[i].total > 0).then_some(acc[i]);
    Ok(ExpressionBreakdown {
        non_toxic: get(0),
        explicit: get(1),
        implicit: get(2),
        reporting: get(3),
    })
}

/// Items × categories rating counts with a constant number of raters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    counts: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(counts: Vec<Vec<u32>>) -> Result<Self> {
        let first = counts
            .first()
            .ok_or_else(|| Error::InvalidInput("rating matrix has no items".into()))?;
        let k = first.len();
        if k < 2 {
            return Err(Error::InvalidInput("rating matrix needs at least 2 categories".into()));
        }
        let raters: u32 = first.iter().sum();
        if raters < 2 {
            return Err(Error::InvalidInput("rating matrix needs at least 2 raters per item".into()));
        }
        for (i, row) in counts.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidInput(format!("item {i} has {} categories, expected {k}", row.len())));
            }
            if row.iter().sum::<u32>() != raters {
                return Err(Error::InvalidInput(format!("item {i} does not sum to {raters} ratings")));
            }
        }
        Ok(RatingMatrix { counts, raters })
    }

    /// Parses `item<TAB>count<TAB>count...` rows; `#` comments and a header
    /// row whose counts are not numbers are skipped.
    pub fn parse_tsv(content: &str, source: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() < 3 {
                return Err(Error::resource(source, i + 1, "expected item and at least 2 category counts"));
            }
            let parsed: std::result::Result<Vec<u32>, _> = cols[1..].iter().map(|c| c.trim().parse()).collect();
            match parsed {
                Ok(r) => rows.push(r),
                Err(_) if rows.is_empty() && cols[1..].iter().all(|c| c.trim().parse::<f64>().is_err()) => {}
                Err(_) => return Err(Error::resource(source, i + 1, "counts must be non-negative integers")),
            }
        }
        RatingMatrix::new(rows).map_err(|e| Error::resource(source, 0, e.to_string()))
    }

    pub fn items(&self) -> usize {
        self.counts.len()
    }

    pub fn categories(&self) -> usize {
        self.counts[0].len()
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.counts
    }
}

/// Fleiss' kappa. Exactly 1.0 when every item is rated unanimously.
pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64> {
    if m.counts.iter().all(|row| row.iter().filter(|&&c| c > 0).count() == 1) {
        return Ok(1.0);
    }
    let n = m.items() as f64;
    let r = f64::from(m.raters);
    let mut p_bar = 0.0;
    let mut col = vec![0.0; m.categories()];
    for row in &m.counts {
        let sq: f64 = row.iter().map(|&c| f64::from(c) * f64::from(c)).sum();
        p_bar += (sq - r) / (r * (r - 1.0));
        for (j, &c) in row.iter().enumerate() {
            col[j] += f64::from(c);
        }
    }
    p_bar /= n;
    let pe: f64 = col.iter().map(|c| (c / (n * r)).powi(2)).sum();
    if pe >= 1.0 {
        return Err(Error::InvalidInput("chance agreement is 1; kappa undefined".into()));
    }
    Ok((p_bar - pe) / (1.0 - pe))
}

/// Rounds to one decimal, as reported.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSupport {
    pub class: String,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BreakdownRow {
    pub stratum: String,
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub total: usize,
}

/// Evaluation of one task on one test set, percentages rounded to 1 decimal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub task: Task,
    pub samples: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: Vec<ClassSupport>,
    pub zero_division_warnings: usize,
    pub expression_accuracy: Option<Vec<BreakdownRow>>,
}

impl EvalReport {
    /// Scores `preds` against the task labels of `golds`. Samples without
    /// a label for the task must already be filtered out.
    pub fn build(task: Task, preds: &[Label], golds: &[ToxiSample]) -> Result<Self> {
        let gold_labels: Vec<Label> = golds
            .iter()
            .map(|s| {
                task.label_of(s)
                    .ok_or_else(|| Error::InvalidInput(format!("sample {} has no {task} label", s.id)))
            })
            .collect::<Result<_>>()?;
        let mode = if task.is_multilabel() { Mode::MultiLabel } else { Mode::Single };
        let prf = weighted_prf(preds, &gold_labels, task.n_outputs(), mode)?;
        let expression_accuracy = if task == Task::Toxic {
            let binary: Vec<bool> = preds.iter().map(|p| p.class() == Some(1)).collect();
            let b = expression_accuracy_breakdown(&binary, golds)?;
            Some(
                b.strata()
                    .into_iter()
                    .map(|(name, s)| BreakdownRow {
                        stratum: name.to_string(),
                        accuracy: s.map(|s| round1(s.percent())),
                        correct: s.map_or(0, |s| s.correct),
                        total: s.map_or(0, |s| s.total),
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(EvalReport {
            task,
            samples: golds.len(),
            precision: round1(prf.precision),
            recall: round1(prf.recall),
            f1: round1(prf.f1),
            support: task
                .class_names()
                .into_iter()
                .zip(prf.support)
                .map(|(c, n)| ClassSupport {
                    class: c.to_string(),
                    support: n,
                })
                .collect(),
            zero_division_warnings: prf.zero_division,
            expression_accuracy,
        })
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "task {} ({} samples)", self.task, self.samples);
        let _ = writeln!(s, "{:<10}{:>8}{:>8}{:>8}", "", "P", "R", "F1");
        let _ = writeln!(
            s,
            "{:<10}{:>8.1}{:>8.1}{:>8.1}",
            "weighted", self.precision, self.recall, self.f1
        );
        let _ = writeln!(s, "support:");
        for c in &self.support {
            let _ = writeln!(s, "  {:<16}{:>6}", c.class, c.support);
        }
        if self.zero_division_warnings > 0 {
            let _ = writeln!(
                s,
                "warning: {} class(es) never predicted, precision taken as 0",
                self.zero_division_warnings
            );
        }
        if let Some(rows) = &self.expression_accuracy {
            let _ = writeln!(s, "accuracy by expression:");
            for r in rows {
                match r.accuracy {
                    Some(a) => {
                        let _ = writeln!(s, "  {:<12}{:>6.1}  ({}/{})", r.stratum, a, r.correct, r.total);
                    }
                    None => {
                        let _ = writeln!(s, "  {:<12}{:>6}", r.stratum, "absent");
                    }
                }
            }
        }
        s
    }
}
