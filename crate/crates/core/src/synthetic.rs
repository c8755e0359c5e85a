//! Generated corpora with known structure, for end-to-end checks of the
//! classifier.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Expression, Group, GroupSet, Platform, Topic, ToxiSample};
use crate::lexicon::{Category, InsultEntry, Lexicon, RuleTag, Surface};

const OPENERS: &[&str] = &["我觉得", "听说", "昨天", "今天", "有人说", "其实", "大家都知道", "说实话"];
const CLOSERS: &[&str] = &[
    "又来这里发帖了",
    "在小区门口等车",
    "今天去了超市",
    "的事情上了新闻",
    "最近很少出门",
    "在评论区说话",
    "周末要去爬山",
    "这几天都在加班",
];
const NEUTRAL_SLOTS: &[&str] = &["那个邻居", "这些同学", "隔壁老王", "一位老师", "我的朋友", "楼下的人", "那帮网友", "路边的大爷"];
const REPORTING_OPENERS: &[&str] = &["有人骂他们是", "新闻里提到有人喊", "评论里有人写"];

fn topic_of(group: Option<Group>, rng: &mut impl Rng) -> Topic {
    match group {
        Some(Group::Sexism) => Topic::Gender,
        Some(Group::Racism) => Topic::Race,
        Some(Group::RegionalBias) => Topic::Region,
        Some(Group::AntiLgbtq) => Topic::Lgbtq,
        None => Topic::ALL[rng.gen_range(0..Topic::ALL.len())],
    }
}

fn pick<'a>(rng: &mut impl Rng, xs: &'a [&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

/// Labels for a toxic sample whose insult has category `cat`: general
/// insults make offensive samples, group insults hate samples targeting
/// that group (sometimes one more), with a random expression.
fn toxic_labels(cat: Category, rng: &mut impl Rng) -> (bool, GroupSet, Option<Expression>) {
    match cat.group() {
        None => (false, GroupSet::EMPTY, None),
        Some(g) => {
            let mut groups: GroupSet = [g].into_iter().collect();
            if rng.gen_bool(0.2) {
                groups.insert(Group::ALL[rng.gen_range(0..Group::ALL.len())]);
            }
            let expr = Expression::ALL[rng.gen_range(0..Expression::ALL.len())];
            (true, groups, Some(expr))
        }
    }
}

/// `n` samples, half toxic. Every sample is an opener, a slot and a closer;
/// toxic samples put a lexicon term into the slot, clean samples a neutral
/// phrase. Labels satisfy the hierarchy, so every task has data.
pub fn template_corpus(n: usize, lexicon: &Lexicon, seed: u64) -> Vec<ToxiSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let terms = lexicon.entries();
    let mut out: Vec<ToxiSample> = (0..n)
        .map(|i| {
            let toxic = i % 2 == 1 && !terms.is_empty();
            let platform = Platform::ALL[rng.gen_range(0..Platform::ALL.len())];
            if !toxic {
                let text = format!("{}{}{}", pick(&mut rng, OPENERS), pick(&mut rng, NEUTRAL_SLOTS), pick(&mut rng, CLOSERS));
                return ToxiSample {
                    id: 0,
                    platform,
                    topic: topic_of(None, &mut rng),
                    text,
                    toxic: false,
                    hate: false,
                    groups: GroupSet::EMPTY,
                    expression: None,
                };
            }
            let entry = &terms[rng.gen_range(0..terms.len())];
            let (hate, groups, expression) = toxic_labels(entry.category, &mut rng);
            let opener = if expression == Some(Expression::Reporting) {
                pick(&mut rng, REPORTING_OPENERS)
            } else {
                pick(&mut rng, OPENERS)
            };
            ToxiSample {
                id: 0,
                platform,
                topic: topic_of(entry.category.group(), &mut rng),
                text: format!("{opener}{}{}", entry.term, pick(&mut rng, CLOSERS)),
                toxic: true,
                hate,
                groups,
                expression,
            }
        })
        .collect();
    out.shuffle(&mut rng);
    for (i, s) in out.iter_mut().enumerate() {
        s.id = i as u64;
    }
    out
}

/// A corpus where toxicity hinges on rare words only.
#[derive(Debug, Clone)]
pub struct RareTermCorpus {
    /// Every insult, including those that occur only in the test split.
    pub lexicon: Lexicon,
    pub train: Vec<ToxiSample>,
    pub test: Vec<ToxiSample>,
}

// Ideographs far from everyday use and from the template text.
const RARE_FIRST: u32 = 0x8800;
const RARE_LAST: u32 = 0x9EFF;

/// Every sample holds one two-character word built from characters used
/// nowhere else. In toxic samples the word is a lexicon insult, in clean
/// samples it is not. Training insults occur at most twice; test samples
/// use fresh words. Only the lexicon can tell the two apart on test data.
pub fn rare_term_corpus(n_train: usize, n_test: usize, seed: u64) -> RareTermCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template: std::collections::HashSet<char> = OPENERS
        .iter()
        .chain(CLOSERS)
        .chain(NEUTRAL_SLOTS)
        .chain(REPORTING_OPENERS)
        .flat_map(|s| s.chars())
        .collect();
    let mut pool: Vec<char> = (RARE_FIRST..=RARE_LAST)
        .filter_map(char::from_u32)
        .filter(|c| !template.contains(c))
        .collect();
    pool.shuffle(&mut rng);
    let mut fresh = pool.into_iter();
    let mut word = move || -> String {
        let a = fresh.next().expect("rare character pool exhausted");
        let b = fresh.next().expect("rare character pool exhausted");
        [a, b].iter().collect()
    };

    let mut entries = Vec::new();
    let mut make = |n: usize, max_uses: usize, entries: &mut Vec<InsultEntry>, rng: &mut ChaCha8Rng| {
        let mut out = Vec::with_capacity(n);
        let mut current: Option<(String, Category, usize)> = None;
        for i in 0..n {
            let toxic = i % 2 == 1;
            let (slot, cat) = if toxic {
                let reuse = matches!(&current, Some((_, _, uses)) if *uses < max_uses) && rng.gen_bool(0.5);
                if !reuse {
                    let cat = Category::ALL[rng.gen_range(0..Category::ALL.len())];
                    let term = word();
                    entries.push(InsultEntry::new(term.clone(), cat, Surface::Explicit, RuleTag::None));
                    current = Some((term, cat, 0));
                }
                let (term, cat, uses) = current.as_mut().expect("term chosen");
                *uses += 1;
                (term.clone(), Some(*cat))
            } else {
                (word(), None)
            };
            let (hate, groups, expression) = match cat {
                Some(c) => toxic_labels(c, rng),
                None => (false, GroupSet::EMPTY, None),
            };
            out.push(ToxiSample {
                id: 0,
                platform: Platform::ALL[rng.gen_range(0..Platform::ALL.len())],
                topic: topic_of(cat.and_then(Category::group), rng),
                text: format!("{}{}{}", pick(rng, OPENERS), slot, pick(rng, CLOSERS)),
                toxic,
                hate,
                groups,
                expression,
            });
        }
        out.shuffle(rng);
        out
    };
    let mut train = make(n_train, 2, &mut entries, &mut rng);
    let mut test = make(n_test, 1, &mut entries, &mut rng);
    for (i, s) in train.iter_mut().chain(test.iter_mut()).enumerate() {
        s.id = i as u64;
    }
    RareTermCorpus {
        lexicon: Lexicon::from_entries(entries).expect("generated terms are unique"),
        train,
        test,
    }
}
