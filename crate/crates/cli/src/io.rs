use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use toxicn_core::corpus::{read_corpus, ToxiSample, SCHEMA_KEY};
use toxicn_core::lexicon::Lexicon;
use toxicn_core::normalize::{normalize_text, NormalizeConfig};
use toxicn_core::tke::{parse_kv, TkeConfig};
use toxicn_core::variant::{GlyphTable, PinyinTable};

use crate::{ModelArgs, UsageError};

pub const RESOURCES_ENV: &str = "TOXICN_RESOURCES";

/// Optional directory of resource files; absent files mean built-in tables.
#[derive(Debug, Clone)]
pub struct ResourceDir(Option<PathBuf>);

impl ResourceDir {
    pub fn locate(flag: Option<PathBuf>) -> Self {
        ResourceDir(flag.or_else(|| std::env::var_os(RESOURCES_ENV).map(PathBuf::from)))
    }

    fn file(&self, name: &str) -> Option<PathBuf> {
        self.0.as_ref().map(|d| d.join(name)).filter(|p| p.is_file())
    }

    /// An explicit path wins over the resource directory.
    pub fn lexicon(&self, explicit: Option<&Path>) -> Result<Lexicon> {
        match explicit.map(Path::to_path_buf).or_else(|| self.file("lexicon.tsv")) {
            Some(p) => Lexicon::load(&p).with_context(|| format!("loading lexicon {}", p.display())),
            None => Ok(Lexicon::builtin()),
        }
    }

    pub fn pinyin(&self) -> Result<PinyinTable> {
        match self.file("pinyin.tsv") {
            Some(p) => PinyinTable::load(&p).with_context(|| format!("loading {}", p.display())),
            None => Ok(PinyinTable::builtin()),
        }
    }

    pub fn glyph(&self) -> Result<GlyphTable> {
        match self.file("glyph.tsv") {
            Some(p) => GlyphTable::load(&p).with_context(|| format!("loading {}", p.display())),
            None => Ok(GlyphTable::builtin()),
        }
    }
}

/// A record of a loosely typed JSONL file: needs `text`, `id` defaults to
/// the record position.
#[derive(Debug, Clone)]
pub struct TextRecord {
    pub id: u64,
    pub text: String,
    pub fields: Map<String, Value>,
}

/// Reads JSONL with an optional schema header. Returns the header (if any)
/// and the records.
pub fn read_text_records(path: &Path) -> Result<(Option<Value>, Vec<TextRecord>)> {
    let content = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut header = None;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = || format!("{} line {}", path.display(), i + 1);
        let value: Value = serde_json::from_str(line).with_context(|| format!("{}: malformed JSON", at()))?;
        let Value::Object(fields) = value else {
            bail!("{}: expected a JSON object", at());
        };
        if out.is_empty() && header.is_none() && fields.contains_key(SCHEMA_KEY) && !fields.contains_key("text") {
            header = Some(Value::Object(fields));
            continue;
        }
        let text = match fields.get("text") {
            Some(Value::String(s)) => s.clone(),
            _ => bail!("{}: field `text` must be a string", at()),
        };
        let id = match fields.get("id") {
            None => out.len() as u64,
            Some(v) => v
                .as_u64()
                .with_context(|| format!("{}: field `id` must be a non-negative integer", at()))?,
        };
        out.push(TextRecord { id, text, fields });
    }
    Ok((header, out))
}

/// One JSON value per line.
pub fn write_jsonl<'a>(path: &Path, lines: impl IntoIterator<Item = &'a Value>) -> Result<()> {
    let mut s = String::new();
    for v in lines {
        s.push_str(&serde_json::to_string(v)?);
        s.push('\n');
    }
    write_file(path, &s)
}

pub fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_file(path, &s)
}

/// Loads a labeled corpus (header required, hierarchy enforced) and cleans
/// the texts the same way `normalize` does.
pub fn read_normalized_corpus(path: &Path) -> Result<Vec<ToxiSample>> {
    let cfg = NormalizeConfig::default();
    let mut samples = read_corpus(path).with_context(|| format!("reading corpus {}", path.display()))?;
    for s in &mut samples {
        s.text = normalize_text(&s.text, &cfg);
    }
    Ok(samples)
}

/// Run settings from a key=value file. Model keys fill a [`TkeConfig`],
/// the rest are run-level keys.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub model: TkeConfig,
    pub corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub accept: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub tasks: Option<Vec<String>>,
    pub ratio: Option<String>,
    pub stratify: Option<bool>,
    pub cascade: Option<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut rc = RunConfig::default();
        let Some(path) = path else {
            return Ok(rc);
        };
        let source = path.display().to_string();
        let content = fs::read_to_string(path).with_context(|| format!("reading config {source}"))?;
        // Relative paths in the file are relative to the file.
        let base = path.parent().unwrap_or(Path::new("."));
        for (line, key, value) in parse_kv(&content, &source)? {
            let at = || format!("{source} line {line}");
            if rc.model.set(&key, &value).with_context(at)? {
                continue;
            }
            match key.as_str() {
                "corpus" => rc.corpus = Some(base.join(&value)),
                "lexicon" => rc.lexicon = Some(base.join(&value)),
                "out" | "output_dir" => rc.out = Some(base.join(&value)),
                "accept" => rc.accept = Some(base.join(&value)),
                "seeds" => rc.seeds = Some(parse_seeds(&value).with_context(at)?),
                "tasks" => rc.tasks = Some(split_list(&value)),
                "ratio" => rc.ratio = Some(value),
                "stratify" => {
                    rc.stratify = Some(value.parse().map_err(|_| anyhow::anyhow!("{}: stratify must be true or false", at()))?)
                }
                "cascade" => rc.cascade = Some(value),
                _ => bail!("{}: unknown key {key:?}", at()),
            }
        }
        Ok(rc)
    }
}

/// Applies command-line model flags over `cfg`.
pub fn apply_model_args(cfg: &mut TkeConfig, a: &ModelArgs) -> Result<()> {
    if let Some(t) = &a.task {
        cfg.task = t.parse().map_err(|e: toxicn_core::Error| UsageError(e.to_string()))?;
    }
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    over!(lambda, dim, hidden, pad_len, epochs, batch, lr, weight_decay, dropout, seed, patience);
    if a.ablate_tke {
        cfg.ablate_tke = true;
    }
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(())
}

pub fn split_list(s: &str) -> Vec<String> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(String::from).collect()
}

/// Comma list of seeds, also accepting ranges like `1-5`. Sorted, unique.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut out = BTreeSet::new();
    for part in split_list(s) {
        let bad = || UsageError(format!("bad seed {part:?}"));
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if a > b {
                    return Err(bad().into());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(UsageError("empty seed list".into()).into());
    }
    Ok(out.into_iter().collect())
}
