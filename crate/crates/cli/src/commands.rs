use std::collections::HashSet;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use toxicn_core::corpus::{corpus_stats, load_numbered, validate_hierarchy, write_corpus, SplitSpec};
use toxicn_core::lexicon::{Lexicon, LexiconMatch};
use toxicn_core::metrics::{fleiss_kappa, EvalReport, RatingMatrix};
use toxicn_core::normalize::{deduplicate, is_substantive, normalize_text, NormalizeConfig};
use toxicn_core::pseudo::{candidates_to_tsv, iterate_to_fixpoint, AcceptList, CandidateParams, Document};
use toxicn_core::tke::{grad_check, predict, random_grad_check_case, train as train_model, TrainedModel};
use toxicn_core::variant::{
    detect_code_mixing, gen_abbreviation, gen_code_mixing, gen_deformations, gen_homophones, GlyphTable, PinyinTable,
    VariantCandidate, VariantRule,
};

use crate::io::{self, ResourceDir, RunConfig};
use crate::{CheckFailure, ModelArgs, UsageError};

/// Largest relative gradient error accepted by `gradcheck`.
pub const GRAD_TOLERANCE: f64 = 1e-4;

pub fn normalize(
    input: &Path,
    out: &Path,
    min_chars: usize,
    exclude: Option<&Path>,
    keep_mentions: bool,
    keep_urls: bool,
) -> Result<()> {
    let cfg = NormalizeConfig {
        min_content_chars: min_chars,
        strip_mentions: !keep_mentions,
        strip_urls: !keep_urls,
        ..NormalizeConfig::default()
    };
    let excluded: HashSet<u64> = match exclude {
        Some(p) => {
            let content = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            content
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
                .map(|(i, l)| {
                    l.trim()
                        .parse()
                        .with_context(|| format!("{} line {}: expected a record id", p.display(), i + 1))
                })
                .collect::<Result<_>>()?
        }
        None => HashSet::new(),
    };
    let (header, records) = io::read_text_records(input)?;
    let total = records.len();
    let mut cleaned = Vec::new();
    let mut dropped_excluded = 0;
    let mut dropped_brief = 0;
    for mut r in records {
        if excluded.contains(&r.id) {
            dropped_excluded += 1;
            continue;
        }
        r.text = normalize_text(&r.text, &cfg);
        if !is_substantive(&r.text, &cfg) {
            dropped_brief += 1;
            continue;
        }
        cleaned.push(r);
    }
    let keep: HashSet<usize> = deduplicate(cleaned.iter().enumerate().map(|(i, r)| (i as u64, r.text.as_str())))
        .into_iter()
        .map(|i| i as usize)
        .collect();
    let dropped_dup = cleaned.len() - keep.len();
    let mut lines: Vec<Value> = header.into_iter().collect();
    for (i, mut r) in cleaned.into_iter().enumerate() {
        if keep.contains(&i) {
            r.fields.insert("text".into(), Value::String(r.text));
            lines.push(Value::Object(r.fields));
        }
    }
    io::write_jsonl(out, &lines)?;
    println!("kept={} dropped_brief={dropped_brief} dropped_dup={dropped_dup}", keep.len());
    if dropped_excluded > 0 {
        eprintln!("excluded {dropped_excluded} of {total} records by id");
    }
    Ok(())
}

pub fn match_json(m: &LexiconMatch, lex: &Lexicon) -> Value {
    let e = lex.entry(m.entry);
    json!({
        "start": m.start,
        "end": m.end,
        "term": e.term,
        "category": e.category.name(),
        "surface": e.surface.name(),
        "rule_tag": e.rule_tag.name(),
    })
}

pub fn match_lexicon(res: &ResourceDir, lexicon: Option<&Path>, input: &Path, out: &Path) -> Result<()> {
    let lex = res.lexicon(lexicon)?;
    let (_, records) = io::read_text_records(input)?;
    let mut hits = 0;
    let lines: Vec<Value> = records
        .iter()
        .map(|r| {
            let ms = toxicn_core::lexicon::find_matches(&r.text, &lex);
            hits += usize::from(!ms.is_empty());
            json!({
                "id": r.id,
                "matches": ms.iter().map(|m| match_json(m, &lex)).collect::<Vec<_>>(),
            })
        })
        .collect();
    io::write_jsonl(out, &lines)?;
    println!("records={} with_matches={hits} lexicon={}", records.len(), lex.len());
    Ok(())
}

/// Variants of `term` under one rule. Homophones draw replacement
/// characters from the whole pinyin table.
pub fn variants(term: &str, rule: VariantRule, pinyin: &PinyinTable, glyph: &GlyphTable) -> Result<Vec<VariantCandidate>> {
    Ok(match rule {
        VariantRule::Homophonic => gen_homophones(term, pinyin, pinyin.chars())?,
        VariantRule::Abbreviation => vec![gen_abbreviation(term, pinyin)?],
        VariantRule::CodeMixing => gen_code_mixing(term, pinyin)?,
        VariantRule::Deformation => gen_deformations(term, glyph),
    })
}

pub const ALL_RULES: [VariantRule; 4] = [
    VariantRule::Homophonic,
    VariantRule::Abbreviation,
    VariantRule::CodeMixing,
    VariantRule::Deformation,
];

pub fn derive(res: &ResourceDir, term: &str, rule: &str) -> Result<()> {
    let term = normalize_text(term, &NormalizeConfig::default());
    if term.is_empty() {
        bail!(UsageError("empty term".into()));
    }
    if rule == "detect" {
        println!("{}", serde_json::to_string_pretty(&detect_code_mixing(&term))?);
        return Ok(());
    }
    let rules: Vec<VariantRule> = match rule {
        "all" => ALL_RULES.to_vec(),
        r => vec![VariantRule::from_name(r).ok_or_else(|| {
            UsageError(format!(
                "unknown rule {r:?} (homophonic|abbreviation|code_mixing|deformation|detect|all)"
            ))
        })?],
    };
    let (pinyin, glyph) = (res.pinyin()?, res.glyph()?);
    let mut failures = Vec::new();
    println!("variant\trule\tnote");
    for r in &rules {
        match variants(&term, *r, &pinyin, &glyph) {
            Ok(vs) => {
                for v in vs {
                    println!("{}\t{}\t{}", v.variant, v.rule, v.note);
                }
            }
            Err(e) => {
                eprintln!("{r}: {e}");
                failures.push(e);
            }
        }
    }
    if failures.len() == rules.len() {
        bail!("no rule applies to {term:?}");
    }
    Ok(())
}

pub struct PseudoPaths<'a> {
    pub lexicon: Option<&'a Path>,
    pub input: &'a Path,
    pub accept: Option<&'a Path>,
    pub out: &'a Path,
    pub report: Option<&'a Path>,
    pub lexicon_out: Option<&'a Path>,
}

pub fn pseudolabel(res: &ResourceDir, p: PseudoPaths<'_>, params: CandidateParams) -> Result<()> {
    let lex = res.lexicon(p.lexicon)?;
    let accept = match p.accept {
        Some(a) => AcceptList::load(a).with_context(|| format!("loading accept list {}", a.display()))?,
        None => AcceptList::default(),
    };
    let (_, records) = io::read_text_records(p.input)?;
    let docs: Vec<Document> = records.iter().map(|r| Document::new(r.id, r.text.clone())).collect();
    let fp = iterate_to_fixpoint(&docs, &lex, &accept, &params)?;
    let lines: Vec<Value> = fp
        .labels
        .iter()
        .map(|l| {
            json!({
                "id": l.id,
                "pseudo_label": l.pseudo_label,
                "matches": l.matches.iter().map(|m| match_json(m, &fp.lexicon)).collect::<Vec<_>>(),
            })
        })
        .collect();
    io::write_jsonl(p.out, &lines)?;
    if let Some(r) = p.report {
        io::write_file(r, &candidates_to_tsv(&fp.candidates))?;
    }
    if let Some(l) = p.lexicon_out {
        io::write_file(l, &fp.lexicon.to_tsv())?;
    }
    let counts: Vec<String> = fp.toxic_counts.iter().map(ToString::to_string).collect();
    let added: usize = fp.added.iter().map(Vec::len).sum();
    println!(
        "records={} iterations={} toxic_counts={} added_terms={added} lexicon={} candidates={}",
        docs.len(),
        fp.iterations,
        counts.join(","),
        fp.lexicon.len(),
        fp.candidates.len()
    );
    Ok(())
}

pub fn validate(input: &Path) -> Result<()> {
    let records = load_numbered(input).with_context(|| format!("reading {}", input.display()))?;
    let mut invalid = 0;
    for (line, s) in &records {
        let v = validate_hierarchy(s);
        if !v.is_empty() {
            invalid += 1;
            let msgs: Vec<&str> = v.iter().map(|v| v.message()).collect();
            println!("{} line {line} (id {}): {}", input.display(), s.id, msgs.join("; "));
        }
    }
    println!("records={} valid={} invalid={invalid}", records.len(), records.len() - invalid);
    if invalid > 0 {
        bail!("{invalid} record(s) break the label hierarchy");
    }
    Ok(())
}

pub fn stats(input: &Path, json_out: Option<&Path>) -> Result<()> {
    let corpus = toxicn_core::corpus::read_corpus(input).with_context(|| format!("reading {}", input.display()))?;
    let report = corpus_stats(&corpus)?;
    print!("{}", report.render_table());
    if let Some(p) = json_out {
        io::write_json(p, &report)?;
    }
    Ok(())
}

pub fn split_spec(ratio: &str, seed: u64, stratify: bool) -> Result<SplitSpec> {
    Ok(SplitSpec::parse_ratio(ratio, seed)
        .map_err(|e| UsageError(e.to_string()))?
        .stratified(stratify))
}

pub fn split(input: &Path, train_out: &Path, test_out: &Path, ratio: &str, seed: u64, stratify: bool) -> Result<()> {
    let spec = split_spec(ratio, seed, stratify)?;
    let corpus = toxicn_core::corpus::read_corpus(input).with_context(|| format!("reading {}", input.display()))?;
    let (train, test) = toxicn_core::corpus::split_dataset(&corpus, &spec)?;
    write_corpus(train_out, &train)?;
    write_corpus(test_out, &test)?;
    println!("train={} test={}", train.len(), test.len());
    Ok(())
}

pub fn train(
    res: &ResourceDir,
    train_path: &Path,
    lexicon: Option<&Path>,
    config: Option<&Path>,
    out: &Path,
    args: &ModelArgs,
) -> Result<()> {
    let mut rc = RunConfig::load(config)?;
    io::apply_model_args(&mut rc.model, args)?;
    let lex = res.lexicon(lexicon.or(rc.lexicon.as_deref()))?;
    let samples = io::read_normalized_corpus(train_path)?;
    let model = train_model(&samples, &lex, &rc.model)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    model.save(out)?;
    let best = &model.history[model.best_epoch - 1];
    println!(
        "task={} epochs={} best_epoch={} train_loss={:.4}{}",
        model.config.task,
        model.history.len(),
        model.best_epoch,
        best.train_loss,
        best.val_loss.map_or(String::new(), |v| format!(" val_loss={v:.4}"))
    );
    Ok(())
}

/// Scores `model` on the samples of `test` that carry its task label.
pub fn evaluate(model: &TrainedModel, test: &[toxicn_core::corpus::ToxiSample]) -> Result<EvalReport> {
    let task = model.config.task;
    let golds: Vec<_> = test.iter().filter(|s| task.label_of(s).is_some()).cloned().collect();
    if golds.is_empty() {
        bail!("no test samples carry a {task} label");
    }
    let preds = predict(model, golds.iter().map(|s| s.text.as_str()))?;
    let labels: Vec<_> = preds.into_iter().map(|p| p.label).collect();
    Ok(EvalReport::build(task, &labels, &golds)?)
}

pub fn eval(model_path: &Path, test_path: &Path, report: Option<&Path>) -> Result<()> {
    let model = TrainedModel::load(model_path).with_context(|| format!("loading model {}", model_path.display()))?;
    let test = io::read_normalized_corpus(test_path)?;
    let r = evaluate(&model, &test)?;
    print!("{}", r.render_table());
    if let Some(p) = report {
        io::write_json(p, &r)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckRow {
    pub seed: u64,
    pub max_rel_error: f64,
    pub worst_block: &'static str,
    pub worst_index: usize,
    pub n_checked: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckSummary {
    pub tolerance: f64,
    pub max_rel_error: f64,
    pub passed: bool,
    pub cases: Vec<GradCheckRow>,
}

pub fn run_gradcheck(configs: u64, seed: u64) -> Result<GradCheckSummary> {
    if configs == 0 {
        bail!(UsageError("--configs must be positive".into()));
    }
    let mut cases = Vec::new();
    for s in seed..seed + configs {
        let case = random_grad_check_case(s);
        let r = grad_check(&case.params, &case.batch, &case.cfg)?;
        cases.push(GradCheckRow {
            seed: s,
            max_rel_error: r.max_rel_error,
            worst_block: r.worst_block,
            worst_index: r.worst_index,
            n_checked: r.n_checked,
        });
    }
    let max = cases.iter().map(|c| c.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckSummary {
        tolerance: GRAD_TOLERANCE,
        max_rel_error: max,
        passed: max < GRAD_TOLERANCE,
        cases,
    })
}

pub fn gradcheck(configs: u64, seed: u64) -> Result<()> {
    let s = run_gradcheck(configs, seed)?;
    for c in &s.cases {
        println!(
            "case seed={} params={} max_rel_error={:.3e} worst={}[{}]",
            c.seed, c.n_checked, c.max_rel_error, c.worst_block, c.worst_index
        );
    }
    println!("max_rel_error={:.3e} tolerance={:.0e}", s.max_rel_error, s.tolerance);
    if !s.passed {
        bail!(CheckFailure(format!(
            "gradient check failed: {:.3e} >= {:.0e}",
            s.max_rel_error, s.tolerance
        )));
    }
    Ok(())
}

pub fn kappa(input: &Path) -> Result<()> {
    let content = fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let m = RatingMatrix::parse_tsv(&content, &input.display().to_string())?;
    let k = fleiss_kappa(&m)?;
    println!("items={} categories={} raters={} kappa={k:.4}", m.items(), m.categories(), m.raters());
    Ok(())
}
