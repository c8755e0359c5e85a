use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;
use serde_json::Value;
use toxicn_core::corpus::{corpus_stats, split_dataset, write_corpus, ToxiSample};
use toxicn_core::lexicon::Lexicon;
use toxicn_core::metrics::mean_sd;
use toxicn_core::pseudo::{candidates_to_tsv, iterate_to_fixpoint, AcceptList, CandidateParams, Document};
use toxicn_core::tke::{predict, train, Label, Task, TkeConfig, TrainedModel};
use toxicn_core::variant::{gen_homophones, VariantRule};

use crate::commands::{self, ALL_RULES};
use crate::io::{self, ResourceDir, RunConfig};
use crate::{CheckFailure, ModelArgs, UsageError};

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Labeled corpus (schema header required)
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Reviewed terms for lexicon growth
    #[arg(long)]
    accept: Option<PathBuf>,
    /// Seed list, e.g. 1,2,3 or 1-5 [default: 1-5]
    #[arg(long)]
    seeds: Option<String>,
    /// Subtasks to train [default: toxic,type,group,expression]
    #[arg(long)]
    tasks: Option<String>,
    /// Train share [default: 8:2]
    #[arg(long)]
    ratio: Option<String>,
    #[arg(long)]
    stratify: bool,
    /// gold: score each subtask on every test sample that carries its
    /// label. predicted: only on those the upstream models route to it.
    #[arg(long)]
    cascade: Option<String>,
    /// Only rebuild the summary from the per-seed reports on disk
    #[arg(long)]
    aggregate_only: bool,
    /// Also write every trained model
    #[arg(long)]
    save_models: bool,
    #[arg(long, default_value_t = 10)]
    gradcheck_configs: u64,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cascade {
    Gold,
    Predicted,
}

struct Plan {
    corpus: PathBuf,
    out: PathBuf,
    lexicon: Lexicon,
    accept: Option<PathBuf>,
    seeds: Vec<u64>,
    tasks: Vec<Task>,
    ratio: String,
    stratify: bool,
    cascade: Cascade,
    model: TkeConfig,
    save_models: bool,
    gradcheck_configs: u64,
}

fn plan(res: &ResourceDir, a: &PipelineArgs, rc: RunConfig) -> Result<Plan> {
    if a.model.task.is_some() {
        bail!(UsageError("pipeline trains several subtasks; use --tasks".into()));
    }
    let mut model = rc.model;
    io::apply_model_args(&mut model, &a.model)?;
    let corpus = a
        .input
        .clone()
        .or(rc.corpus)
        .ok_or_else(|| UsageError("pipeline needs --in (or corpus= in the config)".into()))?;
    let out = a.out.clone().or(rc.out).ok_or_else(|| UsageError("pipeline needs --out".into()))?;
    let seeds = match &a.seeds {
        Some(s) => io::parse_seeds(s)?,
        None => rc.seeds.unwrap_or_else(|| (1..=5).collect()),
    };
    let task_names = match &a.tasks {
        Some(t) => io::split_list(t),
        None => rc.tasks.unwrap_or_else(|| Task::ALL.iter().map(|t| t.name().to_string()).collect()),
    };
    let tasks: BTreeSet<Task> = task_names
        .iter()
        .map(|t| t.parse::<Task>().map_err(|e| UsageError(e.to_string())))
        .collect::<Result<_, _>>()?;
    if tasks.is_empty() {
        bail!(UsageError("empty task list".into()));
    }
    let cascade = match a.cascade.clone().or(rc.cascade).as_deref() {
        None | Some("gold") => Cascade::Gold,
        Some("predicted") => Cascade::Predicted,
        Some(c) => bail!(UsageError(format!("unknown cascade {c:?} (gold|predicted)"))),
    };
    if cascade == Cascade::Predicted {
        for t in &tasks {
            for up in upstream(*t) {
                if !tasks.contains(up) {
                    bail!(UsageError(format!("predicted cascade for {t} needs the {up} task")));
                }
            }
        }
    }
    let ratio = a.ratio.clone().or(rc.ratio).unwrap_or_else(|| "8:2".into());
    commands::split_spec(&ratio, 0, false)?;
    Ok(Plan {
        lexicon: res.lexicon(a.lexicon.as_deref().or(rc.lexicon.as_deref()))?,
        corpus,
        out,
        accept: a.accept.clone().or(rc.accept),
        seeds,
        tasks: tasks.into_iter().collect(),
        ratio,
        stratify: a.stratify || rc.stratify.unwrap_or(false),
        cascade,
        model,
        save_models: a.save_models,
        gradcheck_configs: a.gradcheck_configs,
    })
}

/// Tasks whose positive prediction routes a sample to `task`.
fn upstream(task: Task) -> &'static [Task] {
    match task {
        Task::Toxic => &[],
        Task::Type => &[Task::Toxic],
        Task::Group | Task::Expression => &[Task::Toxic, Task::Type],
    }
}

struct Log {
    start: Instant,
    text: String,
}

impl Log {
    fn step(&mut self, what: &str) {
        let _ = writeln!(self.text, "{:>9.2}s {what}", self.start.elapsed().as_secs_f64());
    }
}

pub fn run(res: &ResourceDir, a: &PipelineArgs) -> Result<()> {
    let rc = RunConfig::load(a.config.as_deref())?;
    if a.aggregate_only {
        let out = a
            .out
            .clone()
            .or(rc.out)
            .ok_or_else(|| UsageError("pipeline needs --out".into()))?;
        return aggregate(&out);
    }
    let p = plan(res, a, rc)?;
    let mut log = Log {
        start: Instant::now(),
        text: String::new(),
    };
    fs::create_dir_all(&p.out).with_context(|| format!("creating {}", p.out.display()))?;

    let corpus = io::read_normalized_corpus(&p.corpus)?;
    write_corpus(&p.out.join("clean.jsonl"), &corpus)?;
    let stats = corpus_stats(&corpus)?;
    io::write_json(&p.out.join("stats.json"), &stats)?;
    io::write_file(&p.out.join("stats.txt"), &stats.render_table())?;
    log.step("normalize and stats");

    lexicon_summary(&p, &corpus)?;
    log.step("lexicon matching");

    let results: Vec<Result<()>> = std::thread::scope(|s| {
        let handles: Vec<_> = p
            .seeds
            .iter()
            .map(|&seed| {
                let (p, corpus) = (&p, &corpus);
                s.spawn(move || run_seed(p, corpus, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("seed worker panicked"))))
            .collect()
    });
    for (seed, r) in p.seeds.iter().zip(results) {
        r.with_context(|| format!("seed {seed}"))?;
    }
    log.step("train and evaluate");

    write_variants(&p, res, &corpus)?;
    log.step("variants");

    let gc = commands::run_gradcheck(p.gradcheck_configs, 1)?;
    io::write_json(&p.out.join("gradcheck.json"), &gc)?;
    log.step("gradient check");

    aggregate(&p.out)?;
    log.step("aggregate");
    io::write_file(&p.out.join("run.log"), &log.text)?;

    if !gc.passed {
        bail!(CheckFailure(format!(
            "gradient check failed: {:.3e} >= {:.0e}",
            gc.max_rel_error, gc.tolerance
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct LexiconSummary {
    lexicon_terms: usize,
    iterations: usize,
    toxic_counts: Vec<usize>,
    added: Vec<Vec<String>>,
    /// Pseudo labels of the final lexicon against the gold toxic flag.
    true_positive: usize,
    false_positive: usize,
    false_negative: usize,
    true_negative: usize,
}

fn lexicon_summary(p: &Plan, corpus: &[ToxiSample]) -> Result<()> {
    let accept = match &p.accept {
        Some(a) => AcceptList::load(a).with_context(|| format!("loading accept list {}", a.display()))?,
        None => AcceptList::default(),
    };
    let docs: Vec<Document> = corpus.iter().map(|s| Document::new(s.id, s.text.clone())).collect();
    let fp = iterate_to_fixpoint(&docs, &p.lexicon, &accept, &CandidateParams::default())?;
    let mut conf = [[0usize; 2]; 2];
    for (l, s) in fp.labels.iter().zip(corpus) {
        conf[usize::from(l.is_toxic())][usize::from(s.toxic)] += 1;
    }
    let summary = LexiconSummary {
        lexicon_terms: fp.lexicon.len(),
        iterations: fp.iterations,
        toxic_counts: fp.toxic_counts,
        added: fp.added,
        true_positive: conf[1][1],
        false_positive: conf[1][0],
        false_negative: conf[0][1],
        true_negative: conf[0][0],
    };
    io::write_json(&p.out.join("lexicon.json"), &summary)?;
    io::write_file(&p.out.join("candidates.tsv"), &candidates_to_tsv(&fp.candidates))?;
    Ok(())
}

fn run_seed(p: &Plan, corpus: &[ToxiSample], seed: u64) -> Result<()> {
    let spec = commands::split_spec(&p.ratio, seed, p.stratify)?;
    let (train_set, test_set) = split_dataset(corpus, &spec)?;
    let dir = p.out.join(format!("seed-{seed}"));
    fs::create_dir_all(&dir)?;
    let mut models: BTreeMap<Task, TrainedModel> = BTreeMap::new();
    for &task in &p.tasks {
        let cfg = TkeConfig {
            task,
            seed,
            ..p.model.clone()
        };
        let model = train(&train_set, &p.lexicon, &cfg).with_context(|| format!("training {task}"))?;
        let test = match p.cascade {
            Cascade::Gold => test_set.clone(),
            Cascade::Predicted => routed(&models, upstream(task), &test_set)?,
        };
        if p.cascade == Cascade::Predicted && !test.iter().any(|s| task.label_of(s).is_some()) {
            // Nothing reaches this task; no report, so aggregation skips it.
            let note = format!("task {task}: no labeled test sample was routed here by the upstream models\n");
            eprint!("seed {seed}: {note}");
            io::write_file(&dir.join(format!("{task}.txt")), &note)?;
            models.insert(task, model);
            continue;
        }
        let report = commands::evaluate(&model, &test).with_context(|| format!("evaluating {task}"))?;
        io::write_json(&dir.join(format!("{task}.json")), &report)?;
        io::write_file(&dir.join(format!("{task}.txt")), &report.render_table())?;
        if p.save_models {
            model.save(&dir.join(format!("{task}.model.json")))?;
        }
        models.insert(task, model);
    }
    Ok(())
}

/// Test samples every upstream model predicts as positive.
fn routed(models: &BTreeMap<Task, TrainedModel>, up: &[Task], test: &[ToxiSample]) -> Result<Vec<ToxiSample>> {
    let mut keep = vec![true; test.len()];
    for t in up {
        let preds = predict(&models[t], test.iter().map(|s| s.text.as_str()))?;
        for (k, pr) in keep.iter_mut().zip(preds) {
            *k &= pr.label == Label::Class(1);
        }
    }
    Ok(test.iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s.clone()).collect())
}

/// Variants of every lexicon term. Homophones only use characters that
/// occur in the corpus, which keeps the table to plausible forms.
fn write_variants(p: &Plan, res: &ResourceDir, corpus: &[ToxiSample]) -> Result<()> {
    let pinyin = res.pinyin()?;
    let glyph = res.glyph()?;
    let pool: BTreeSet<char> = corpus
        .iter()
        .flat_map(|s| s.text.chars())
        .filter(|&c| pinyin.contains(c))
        .collect();
    let mut out = String::from("source_term\trule\tvariant\tnote\n");
    for e in p.lexicon.entries() {
        for rule in ALL_RULES {
            let vs = match rule {
                VariantRule::Homophonic => gen_homophones(&e.term, &pinyin, pool.iter().copied()).ok(),
                r => commands::variants(&e.term, r, &pinyin, &glyph).ok(),
            };
            // Terms outside the tables simply have no variants of that kind.
            for v in vs.unwrap_or_default() {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", v.source_term, v.rule, v.variant, v.note);
            }
        }
    }
    io::write_file(&p.out.join("variants.tsv"), &out)
}

#[derive(Debug, Serialize)]
struct MeanSd {
    mean: f64,
    sd: f64,
}

#[derive(Debug, Serialize)]
struct TaskSummary {
    task: String,
    seeds: Vec<u64>,
    precision: MeanSd,
    recall: MeanSd,
    f1: MeanSd,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn mean_sd_of(xs: &[f64]) -> MeanSd {
    let (mean, sd) = mean_sd(xs);
    MeanSd {
        mean: round2(mean),
        sd: round2(sd),
    }
}

/// Seed directories under `out`, in numeric order.
fn seed_dirs(out: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut dirs = Vec::new();
    for entry in fs::read_dir(out).with_context(|| format!("reading {}", out.display()))? {
        let entry = entry?;
        let name = entry.file_name();
        let Some(seed) = name.to_str().and_then(|n| n.strip_prefix("seed-")).and_then(|n| n.parse().ok()) else {
            continue;
        };
        if entry.file_type()?.is_dir() {
            dirs.push((seed, entry.path()));
        }
    }
    dirs.sort();
    Ok(dirs)
}

/// Mean and sample s.d. of weighted P/R/F1 over the per-seed reports on
/// disk; writes summary.json and summary.txt.
pub fn aggregate(out: &Path) -> Result<()> {
    let mut per_task: BTreeMap<Task, Vec<(u64, [f64; 3])>> = BTreeMap::new();
    for (seed, dir) in seed_dirs(out)? {
        for task in Task::ALL {
            let path = dir.join(format!("{task}.json"));
            if !path.is_file() {
                continue;
            }
            let content = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let v: Value = serde_json::from_str(&content).with_context(|| format!("parsing {}", path.display()))?;
            let field = |k: &str| {
                v.get(k)
                    .and_then(Value::as_f64)
                    .with_context(|| format!("{}: missing numeric `{k}`", path.display()))
            };
            per_task
                .entry(task)
                .or_default()
                .push((seed, [field("precision")?, field("recall")?, field("f1")?]));
        }
    }
    if per_task.is_empty() {
        bail!("no per-seed reports under {}", out.display());
    }
    let summary: Vec<TaskSummary> = per_task
        .into_iter()
        .map(|(task, runs)| {
            let col = |i: usize| runs.iter().map(|r| r.1[i]).collect::<Vec<_>>();
            TaskSummary {
                task: task.name().to_string(),
                seeds: runs.iter().map(|r| r.0).collect(),
                precision: mean_sd_of(&col(0)),
                recall: mean_sd_of(&col(1)),
                f1: mean_sd_of(&col(2)),
            }
        })
        .collect();
    io::write_json(&out.join("summary.json"), &summary)?;

    let mut txt = format!("{:<11}{:>5}{:>15}{:>15}{:>15}\n", "task", "runs", "P", "R", "F1");
    let cell = |m: &MeanSd| format!("{:.1}±{:.2}", m.mean, m.sd);
    for s in &summary {
        let _ = writeln!(
            txt,
            "{:<11}{:>5}{:>15}{:>15}{:>15}",
            s.task,
            s.seeds.len(),
            cell(&s.precision),
            cell(&s.recall),
            cell(&s.f1)
        );
    }
    io::write_file(&out.join("summary.txt"), &txt)?;
    print!("{txt}");
    Ok(())
}
