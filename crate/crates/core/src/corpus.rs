//! Sample schema, label hierarchy, splitting and corpus statistics.
//!
//! Labels follow a four level frame: whether a comment is toxic, whether the
//! toxicity is general offense or hate speech, which groups a hateful comment
//! targets (multi-label) and how the hate is expressed.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Value of the `toxicn_schema` key expected in the corpus header line.
pub const SCHEMA_VERSION: u64 = 1;
pub const SCHEMA_KEY: &str = "toxicn_schema";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Platform {
    Zhihu,
    Tieba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    Gender,
    Race,
    Region,
    Lgbtq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Sexism,
    Racism,
    RegionalBias,
    AntiLgbtq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expression {
    Explicit,
    Implicit,
    Reporting,
}

macro_rules! named_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($ty::$variant => $name),+
                }
            }

            pub fn from_name(s: &str) -> Option<Self> {
                match s {
                    $($name => Some($ty::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

named_enum!(Platform { Zhihu => "zhihu", Tieba => "tieba" });
named_enum!(Topic { Gender => "gender", Race => "race", Region => "region", Lgbtq => "lgbtq" });
named_enum!(Group {
    Sexism => "sexism",
    Racism => "racism",
    RegionalBias => "regional_bias",
    AntiLgbtq => "anti_lgbtq",
});
named_enum!(Expression { Explicit => "explicit", Implicit => "implicit", Reporting => "reporting" });

impl Group {
    /// Position of the group in label vectors (0..4).
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Group::ALL.get(i).copied()
    }
}

impl Expression {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Set of targeted groups, stored as a 4-bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupSet(u8);

impl GroupSet {
    pub const EMPTY: GroupSet = GroupSet(0);

    pub fn from_bits(bits: u8) -> Self {
        GroupSet(bits & 0b1111)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn insert(&mut self, g: Group) {
        self.0 |= 1 << g.index();
    }

    pub fn contains(self, g: Group) -> bool {
        self.0 & (1 << g.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Group> {
        Group::ALL.iter().copied().filter(move |g| self.contains(*g))
    }
}

impl FromIterator<Group> for GroupSet {
    fn from_iter<I: IntoIterator<Item = Group>>(iter: I) -> Self {
        let mut set = GroupSet::EMPTY;
        for g in iter {
            set.insert(g);
        }
        set
    }
}

impl fmt::Debug for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// One labeled comment.
#[derive(Debug, Clone, PartialEq)]
pub struct ToxiSample {
    pub id: u64,
    pub platform: Platform,
    pub topic: Topic,
    pub text: String,
    pub toxic: bool,
    pub hate: bool,
    pub groups: GroupSet,
    pub expression: Option<Expression>,
}

/// Second frame level, derived from the toxic/hate flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ToxicType {
    NonToxic,
    Offensive,
    Hate,
}

impl ToxiSample {
    pub fn toxic_type(&self) -> ToxicType {
        match (self.toxic, self.hate) {
            (false, _) => ToxicType::NonToxic,
            (true, false) => ToxicType::Offensive,
            (true, true) => ToxicType::Hate,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "platform": self.platform.name(),
            "topic": self.topic.name(),
            "text": self.text,
            "toxic": self.toxic as u8,
            "hate": self.hate as u8,
            "groups": self.groups.iter().map(Group::name).collect::<Vec<_>>(),
            "expression": self.expression.map(Expression::name),
        })
    }
}

/// A rule of the label hierarchy that a sample breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Violation {
    HateWithoutToxic,
    GroupsOnNonToxic,
    ExpressionOnNonToxic,
    HateWithoutGroup,
    HateWithoutExpression,
    GroupsOnOffensive,
    ExpressionOnOffensive,
}

impl Violation {
    pub fn message(self) -> &'static str {
        match self {
            Violation::HateWithoutToxic => "hate requires toxic",
            Violation::GroupsOnNonToxic => "groups on non-toxic",
            Violation::ExpressionOnNonToxic => "expression on non-toxic",
            Violation::HateWithoutGroup => "hate requires targeted group",
            Violation::HateWithoutExpression => "hate requires expression",
            Violation::GroupsOnOffensive => "groups on offensive",
            Violation::ExpressionOnOffensive => "expression on offensive",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

/// Checks every hierarchy rule and returns all that fail (empty = ok).
pub fn validate_hierarchy(sample: &ToxiSample) -> Vec<Violation> {
    let mut out = Vec::new();
    if sample.hate && !sample.toxic {
        out.push(Violation::HateWithoutToxic);
    }
    if !sample.toxic {
        if !sample.groups.is_empty() {
            out.push(Violation::GroupsOnNonToxic);
        }
        if sample.expression.is_some() {
            out.push(Violation::ExpressionOnNonToxic);
        }
    }
    if sample.hate {
        if sample.groups.is_empty() {
            out.push(Violation::HateWithoutGroup);
        }
        if sample.expression.is_none() {
            out.push(Violation::HateWithoutExpression);
        }
    }
    if sample.toxic && !sample.hate {
        if !sample.groups.is_empty() {
            out.push(Violation::GroupsOnOffensive);
        }
        if sample.expression.is_some() {
            out.push(Violation::ExpressionOnOffensive);
        }
    }
    out
}

fn field_err(index: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Record {
        index,
        line: None,
        field: field.to_string(),
        message: message.into(),
    }
}

fn get<'a>(obj: &'a Map<String, Value>, index: usize, field: &str) -> Result<&'a Value> {
    obj.get(field)
        .ok_or_else(|| field_err(index, field, "missing field"))
}

fn get_flag(obj: &Map<String, Value>, index: usize, field: &str) -> Result<bool> {
    match get(obj, index, field)?.as_u64() {
        Some(0) => Ok(false),
        Some(1) => Ok(true),
        _ => Err(field_err(index, field, "expected 0 or 1")),
    }
}

fn get_enum<T>(
    obj: &Map<String, Value>,
    index: usize,
    field: &str,
    parse: fn(&str) -> Option<T>,
) -> Result<T> {
    let v = get(obj, index, field)?;
    let s = v
        .as_str()
        .ok_or_else(|| field_err(index, field, "expected a string"))?;
    parse(s).ok_or_else(|| field_err(index, field, format!("unknown value {s:?}")))
}

/// Decodes one record without checking the label hierarchy.
///
/// `expression` may be a string, null, missing, an empty string or an array
/// of at most one string; the empty forms all decode to `None`.
pub fn decode_sample(record: &Value, index: usize) -> Result<ToxiSample> {
    let obj = record
        .as_object()
        .ok_or_else(|| field_err(index, "<record>", "expected a JSON object"))?;

    let id = get(obj, index, "id")?
        .as_u64()
        .ok_or_else(|| field_err(index, "id", "expected a non-negative integer"))?;
    let platform = get_enum(obj, index, "platform", Platform::from_name)?;
    let topic = get_enum(obj, index, "topic", Topic::from_name)?;
    let text = get(obj, index, "text")?
        .as_str()
        .ok_or_else(|| field_err(index, "text", "expected a string"))?
        .to_string();
    let toxic = get_flag(obj, index, "toxic")?;
    let hate = get_flag(obj, index, "hate")?;

    let groups_value = get(obj, index, "groups")?;
    let groups_arr = groups_value
        .as_array()
        .ok_or_else(|| field_err(index, "groups", "expected an array"))?;
    let mut groups = GroupSet::EMPTY;
    for g in groups_arr {
        let name = g
            .as_str()
            .ok_or_else(|| field_err(index, "groups", "expected group names"))?;
        let group = Group::from_name(name)
            .ok_or_else(|| field_err(index, "groups", format!("unknown group {name:?}")))?;
        groups.insert(group);
    }

    let expression = match obj.get("expression") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.is_empty() => None,
        Some(Value::String(s)) => Some(
            Expression::from_name(s)
                .ok_or_else(|| field_err(index, "expression", format!("unknown value {s:?}")))?,
        ),
        Some(Value::Array(a)) => match a.as_slice() {
            [] => None,
            [Value::String(s)] => Some(Expression::from_name(s).ok_or_else(|| {
                field_err(index, "expression", format!("unknown value {s:?}"))
            })?),
            _ => {
                return Err(field_err(
                    index,
                    "expression",
                    "expected at most one expression",
                ))
            }
        },
        Some(_) => return Err(field_err(index, "expression", "expected a string or null")),
    };

    Ok(ToxiSample {
        id,
        platform,
        topic,
        text,
        toxic,
        hate,
        groups,
        expression,
    })
}

/// Decodes one record and rejects it if it breaks the label hierarchy.
pub fn parse_sample(record: &Value, index: usize) -> Result<ToxiSample> {
    let sample = decode_sample(record, index)?;
    let violations = validate_hierarchy(&sample);
    if violations.is_empty() {
        Ok(sample)
    } else {
        Err(Error::Hierarchy {
            index,
            id: sample.id,
            violations: violations.iter().map(|v| v.message().to_string()).collect(),
        })
    }
}

fn with_line(err: Error, line: usize) -> Error {
    match err {
        Error::Record {
            index,
            field,
            message,
            ..
        } => Error::Record {
            index,
            line: Some(line),
            field,
            message,
        },
        other => other,
    }
}

/// Reads a corpus file: a header object `{"toxicn_schema": 1}` on the first
/// line, then one record per line. Blank lines are skipped. Records are
/// decoded but not hierarchy-checked.
pub fn load_records(path: &Path) -> Result<Vec<ToxiSample>> {
    Ok(load_numbered(path)?.into_iter().map(|(_, s)| s).collect())
}

/// Like [`load_records`], pairing each sample with its 1-based file line.
pub fn load_numbered(path: &Path) -> Result<Vec<(usize, ToxiSample)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let header_err = |message: &str| Error::resource(&path.display().to_string(), 1, message);
    let (_, header) = lines
        .next()
        .ok_or_else(|| header_err("missing schema header"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let header: Value =
        serde_json::from_str(&header).map_err(|_| header_err("schema header is not JSON"))?;
    match header.get(SCHEMA_KEY).and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(header_err(&format!("unsupported schema version {v}"))),
        None => return Err(header_err("first line must carry \"toxicn_schema\": 1")),
    }

    let mut out = Vec::new();
    for (lineno, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let index = out.len();
        let value: Value = serde_json::from_str(&line).map_err(|e| Error::Record {
            index,
            line: Some(lineno + 1),
            field: "<record>".into(),
            message: format!("malformed JSON: {e}"),
        })?;
        out.push((lineno + 1, decode_sample(&value, index).map_err(|e| with_line(e, lineno + 1))?));
    }
    Ok(out)
}

/// Reads a corpus file and fails on the first hierarchy violation.
pub fn read_corpus(path: &Path) -> Result<Vec<ToxiSample>> {
    let samples = load_records(path)?;
    for (index, s) in samples.iter().enumerate() {
        let violations = validate_hierarchy(s);
        if !violations.is_empty() {
            return Err(Error::Hierarchy {
                index,
                id: s.id,
                violations: violations.iter().map(|v| v.message().to_string()).collect(),
            });
        }
    }
    Ok(samples)
}

pub fn write_corpus(path: &Path, samples: &[ToxiSample]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", json!({ SCHEMA_KEY: SCHEMA_VERSION })).map_err(io)?;
    for s in samples {
        writeln!(w, "{}", s.to_json()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Train/test split settings. The train share is the rational
/// `train_num / train_den`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_num: u64,
    pub train_den: u64,
    pub seed: u64,
    /// Split each label stratum separately (non-toxic / offensive / hate by
    /// expression) while keeping the overall train size.
    pub stratify: bool,
}

impl SplitSpec {
    pub fn new(train_num: u64, train_den: u64, seed: u64) -> Result<Self> {
        if train_den == 0 || train_num == 0 || train_num >= train_den {
            return Err(Error::InvalidInput(format!(
                "train ratio {train_num}/{train_den} must lie strictly between 0 and 1"
            )));
        }
        Ok(SplitSpec {
            train_num,
            train_den,
            seed,
            stratify: false,
        })
    }

    /// 8:2 split.
    pub fn eight_two(seed: u64) -> Self {
        SplitSpec {
            train_num: 8,
            train_den: 10,
            seed,
            stratify: false,
        }
    }

    pub fn stratified(mut self, on: bool) -> Self {
        self.stratify = on;
        self
    }

    /// Parses "0.8", "8:2" or "4/5".
    pub fn parse_ratio(s: &str, seed: u64) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("cannot parse split ratio {s:?}"));
        let s = s.trim();
        if let Some((a, b)) = s.split_once(':') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return SplitSpec::new(a, a + b, seed);
        }
        if let Some((a, b)) = s.split_once('/') {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            return SplitSpec::new(a, b, seed);
        }
        let (int, frac) = s.split_once('.').ok_or_else(bad)?;
        if !int.trim_start_matches('0').is_empty() || frac.is_empty() || frac.len() > 9 {
            return Err(bad());
        }
        let num: u64 = frac.parse().map_err(|_| bad())?;
        SplitSpec::new(num, 10u64.pow(frac.len() as u32), seed)
    }

    /// Train size for `n` samples: round-half-up of `ratio * n`, kept inside
    /// `[1, n - 1]` so neither side is empty.
    pub fn train_size(&self, n: usize) -> usize {
        let n64 = n as u64;
        let rounded = (2 * self.train_num * n64 + self.train_den) / (2 * self.train_den);
        (rounded as usize).clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Shuffled split of `n` items into (train, test) index lists. With
/// `strata`, each stratum contributes its proportional share; remainders go
/// to the strata with the largest fractional part.
pub fn split_indices(n: usize, spec: &SplitSpec, strata: Option<&[usize]>) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 samples to split, got {n}"
        )));
    }
    let train_size = spec.train_size(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let Some(strata) = strata else {
        let test = order.split_off(train_size);
        return Ok((order, test));
    };

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        groups.entry(strata[i]).or_default().push(i);
    }
    // Largest-remainder apportionment of train_size over strata.
    let mut quotas: Vec<(usize, usize, u128)> = groups
        .iter()
        .map(|(&k, v)| {
            let exact = train_size as u128 * v.len() as u128;
            let floor = (exact / n as u128) as usize;
            (k, floor, exact % n as u128)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    by_remainder.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2).then(a.cmp(&b)));
    for &qi in by_remainder.iter().take(train_size - assigned) {
        quotas[qi].1 += 1;
    }

    let mut train = Vec::with_capacity(train_size);
    let mut test = Vec::with_capacity(n - train_size);
    for (k, quota, _) in quotas {
        let members = &groups[&k];
        train.extend_from_slice(&members[..quota]);
        test.extend_from_slice(&members[quota..]);
    }
    Ok((train, test))
}

fn stratum(s: &ToxiSample) -> usize {
    match s.toxic_type() {
        ToxicType::NonToxic => 0,
        ToxicType::Offensive => 1,
        ToxicType::Hate => 2 + s.expression.map_or(0, Expression::index),
    }
}

/// Splits a corpus into (train, test) per `spec`. Deterministic in the seed.
pub fn split_dataset(corpus: &[ToxiSample], spec: &SplitSpec) -> Result<(Vec<ToxiSample>, Vec<ToxiSample>)> {
    let strata: Option<Vec<usize>> = spec
        .stratify
        .then(|| corpus.iter().map(stratum).collect());
    let (train, test) = split_indices(corpus.len(), spec, strata.as_deref())?;
    Ok((
        train.into_iter().map(|i| corpus[i].clone()).collect(),
        test.into_iter().map(|i| corpus[i].clone()).collect(),
    ))
}

/// One row of the statistics table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub label: String,
    pub non_toxic: usize,
    pub toxic: usize,
    pub offensive: usize,
    pub hate: usize,
    pub hate_explicit: usize,
    pub hate_implicit: usize,
    pub hate_reporting: usize,
    pub total: usize,
    /// Mean text length in characters.
    pub avg_len: f64,
    #[serde(skip)]
    chars: usize,
}

impl StatsRow {
    fn new(label: &str) -> Self {
        StatsRow {
            label: label.to_string(),
            ..Default::default()
        }
    }

    fn add(&mut self, s: &ToxiSample) {
        self.total += 1;
        self.chars += s.text.chars().count();
        match s.toxic_type() {
            ToxicType::NonToxic => self.non_toxic += 1,
            ToxicType::Offensive => {
                self.toxic += 1;
                self.offensive += 1;
            }
            ToxicType::Hate => {
                self.toxic += 1;
                self.hate += 1;
                match s.expression {
                    Some(Expression::Explicit) => self.hate_explicit += 1,
                    Some(Expression::Implicit) => self.hate_implicit += 1,
                    Some(Expression::Reporting) => self.hate_reporting += 1,
                    None => {}
                }
            }
        }
    }

    fn finish(&mut self) {
        self.avg_len = if self.total == 0 {
            0.0
        } else {
            self.chars as f64 / self.total as f64
        };
    }
}

/// Expression counts for hate samples targeting one group.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupExpressionRow {
    pub group: String,
    pub explicit: usize,
    pub implicit: usize,
    pub reporting: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub topics: Vec<StatsRow>,
    pub platforms: Vec<StatsRow>,
    pub total: StatsRow,
    pub groups: Vec<GroupExpressionRow>,
    /// Hate samples attacking exactly 1, exactly 2 and 3 or more groups.
    pub group_label_counts: [usize; 3],
}

impl StatsReport {
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            "", "N-Tox", "Tox", "Off", "Hate", "H-exp", "H-imp", "H-rep", "Total", "Avg.L"
        ));
        let row = |r: &StatsRow| {
            format!(
                "{:<8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7.2}\n",
                r.label,
                r.non_toxic,
                r.toxic,
                r.offensive,
                r.hate,
                r.hate_explicit,
                r.hate_implicit,
                r.hate_reporting,
                r.total,
                r.avg_len
            )
        };
        for r in &self.topics {
            out.push_str(&row(r));
        }
        out.push_str(&row(&self.total));
        out.push('\n');
        for r in &self.platforms {
            out.push_str(&row(r));
        }
        out.push('\n');
        out.push_str(&format!(
            "{:<14} {:>7} {:>7} {:>7} {:>7}\n",
            "group", "H-exp", "H-imp", "H-rep", "Total"
        ));
        for g in &self.groups {
            out.push_str(&format!(
                "{:<14} {:>7} {:>7} {:>7} {:>7}\n",
                g.group, g.explicit, g.implicit, g.reporting, g.total
            ));
        }
        out
    }
}

/// Computes per-topic, per-platform, total and group/expression counts.
/// Every sample must satisfy the label hierarchy.
pub fn corpus_stats(corpus: &[ToxiSample]) -> Result<StatsReport> {
    let bad: Vec<u64> = corpus
        .iter()
        .filter(|s| !validate_hierarchy(s).is_empty())
        .map(|s| s.id)
        .collect();
    if !bad.is_empty() {
        return Err(Error::InvalidSamples { ids: bad });
    }

    let mut topics: Vec<StatsRow> = Topic::ALL.iter().map(|t| StatsRow::new(t.name())).collect();
    let mut platforms: Vec<StatsRow> = Platform::ALL
        .iter()
        .map(|p| StatsRow::new(p.name()))
        .collect();
    let mut total = StatsRow::new("total");
    let mut groups: Vec<GroupExpressionRow> = Group::ALL
        .iter()
        .map(|g| GroupExpressionRow {
            group: g.name().to_string(),
            ..Default::default()
        })
        .collect();
    let mut group_label_counts = [0usize; 3];

    for s in corpus {
        topics[s.topic as usize].add(s);
        platforms[s.platform as usize].add(s);
        total.add(s);
        if s.hate {
            group_label_counts[s.groups.len().clamp(1, 3) - 1] += 1;
            for g in s.groups.iter() {
                let row = &mut groups[g.index()];
                row.total += 1;
                match s.expression {
                    Some(Expression::Explicit) => row.explicit += 1,
                    Some(Expression::Implicit) => row.implicit += 1,
                    Some(Expression::Reporting) => row.reporting += 1,
                    None => {}
                }
            }
        }
    }
    for r in topics.iter_mut().chain(platforms.iter_mut()) {
        r.finish();
    }
    total.finish();

    Ok(StatsReport {
        topics,
        platforms,
        total,
        groups,
        group_label_counts,
    })
}
