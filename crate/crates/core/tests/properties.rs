mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::select;
use regex::Regex;

use common::{kappa_oracle, naive_matches};
use toxicn_core::corpus::{split_indices, Expression, Group, GroupSet, Platform, SplitSpec, Topic, ToxiSample};
use toxicn_core::lexicon::{find_matches, Category, InsultEntry, Lexicon, RuleTag, Surface};
use toxicn_core::metrics::{expression_accuracy_breakdown, fleiss_kappa, weighted_prf, Mode, RatingMatrix};
use toxicn_core::normalize::{is_emoji, normalize_text, NormalizeConfig};
use toxicn_core::pseudo::{iterate_to_fixpoint, pseudo_label, AcceptList, CandidateParams, Document};
use toxicn_core::tke::{forward, EncodedSample, Label, ModelParams, Task, TkeConfig};
use toxicn_core::variant::{
    compose_deformation, detect_code_mixing, expand_deformation, gen_homophones, GlyphTable, PinyinTable,
};

// Pieces that exercise every normalization rule and their interactions.
const PIECES: &[&str] = &[
    "@", "＠", "user", "张三", "http://", "https://", "www.", "ftp://", "a.b/c?x=1", "[图片]", "【图片】", "[img]",
    " ", "  ", "\t", "\n", "　", "你好", "我靠", "！", "，", "。", "?", "!", ":", "ＡＢＣ", "１２３", "ｈｔｔｐ：／／",
    "😀", "👍🏻", "❤️", "🇨🇳", "👨‍👩‍👧", "™", "©", "#话题#", ":smile:", "ﬁ", "①", "黑", "a", "Z", "9", ".", "/",
];

fn messy_text() -> impl Strategy<Value = String> {
    prop::collection::vec(select(PIECES), 0..16).prop_map(|v| v.concat())
}

fn emoji_seq(s: &str) -> String {
    s.chars().filter(|&c| is_emoji(c)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn normalize_is_idempotent(s in messy_text()) {
        let cfg = NormalizeConfig::default();
        let once = normalize_text(&s, &cfg);
        prop_assert_eq!(normalize_text(&once, &cfg), once);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn normalize_output_is_clean(s in messy_text()) {
        let out = normalize_text(&s, &NormalizeConfig::default());
        prop_assert!(!out.contains("  "));
        prop_assert_eq!(out.trim(), out.as_str());
        prop_assert!(!out.chars().any(|c| c.is_whitespace() && c != ' '));
        let lower = out.to_lowercase();
        prop_assert!(!lower.contains("http://") && !lower.contains("https://") && !lower.contains("www."));
        let mention = Regex::new(r"[@＠][\p{Han}\p{L}\p{N}]").unwrap();
        prop_assert!(!mention.is_match(&out), "{:?}", out);
    }

    #[test]
    fn normalize_keeps_emoji(s in messy_text()) {
        let out = normalize_text(&s, &NormalizeConfig::default());
        prop_assert_eq!(emoji_seq(&out), emoji_seq(&s));
    }
}

const ALPHABET: &[char] = &['a', 'b', '黑', '鬼', '蠢', '驴', '好'];

fn word(max: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(select(ALPHABET), 1..=max).prop_map(|v| v.into_iter().collect())
}

fn lexicon_of(terms: &BTreeSet<String>) -> Lexicon {
    let cats = Category::ALL;
    Lexicon::from_entries(
        terms
            .iter()
            .enumerate()
            .map(|(i, t)| InsultEntry::new(t.clone(), cats[i % cats.len()], Surface::Explicit, RuleTag::None))
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matcher_equals_naive_scan(terms in prop::collection::btree_set(word(4), 0..12), text in word(30)) {
        let lex = lexicon_of(&terms);
        let got = find_matches(&text, &lex);
        let set: BTreeSet<_> = got.iter().copied().collect();
        prop_assert_eq!(set.len(), got.len());
        prop_assert_eq!(set, naive_matches(&text, &lex));
    }

    #[test]
    fn pseudo_label_is_substring_test(terms in prop::collection::btree_set(word(3), 0..6), texts in prop::collection::vec(word(12), 1..10)) {
        let lex = lexicon_of(&terms);
        let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(i as u64, t.clone())).collect();
        for (l, t) in pseudo_label(&docs, &lex).iter().zip(&texts) {
            let brute = terms.iter().any(|term| t.contains(term.as_str()));
            prop_assert_eq!(l.is_toxic(), brute);
            prop_assert_eq!(l.is_toxic(), !l.matches.is_empty());
        }
    }

    #[test]
    fn fixpoint_grows_and_is_stable(
        seed in word(2),
        accepted in prop::collection::btree_set(word(2), 0..6),
        texts in prop::collection::vec(word(8), 1..25),
    ) {
        let docs: Vec<Document> = texts.iter().enumerate().map(|(i, t)| Document::new(i as u64, t.clone())).collect();
        let seed_lex = lexicon_of(&[seed].into_iter().collect());
        let accept = AcceptList::from_entries(
            accepted.iter().map(|t| InsultEntry::new(t.clone(), Category::General, Surface::Explicit, RuleTag::None)),
        );
        let params = CandidateParams { min_freq: 2, min_score: 1.5, max_n: 2 };
        let r = iterate_to_fixpoint(&docs, &seed_lex, &accept, &params).unwrap();
        prop_assert!(r.toxic_counts.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.iterations <= accept.len() + 1);
        prop_assert_eq!(&r.labels, &pseudo_label(&docs, &r.lexicon));
        let again = iterate_to_fixpoint(&docs, &r.lexicon, &accept, &params).unwrap();
        prop_assert_eq!(again.iterations, 1);
        prop_assert_eq!(again.labels, r.labels);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1_000))]

    #[test]
    fn split_partitions(n in 2usize..400, num in 1u64..10, extra in 1u64..10, seed in any::<u64>(), strat in any::<bool>(), k in 1usize..5) {
        let spec = SplitSpec::new(num, num + extra, seed).unwrap();
        let strata: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % k).collect();
        let (train, test) = split_indices(n, &spec, strat.then_some(strata.as_slice())).unwrap();
        prop_assert_eq!(train.len(), spec.train_size(n));
        prop_assert_eq!(train.len() + test.len(), n);
        let all: BTreeSet<usize> = train.iter().chain(&test).copied().collect();
        prop_assert_eq!(all, (0..n).collect::<BTreeSet<_>>());
    }
}

proptest! {
    #[test]
    fn single_script_is_not_mixed(
        s in prop_oneof![
            prop::collection::vec(0x4E00u32..0x9FA5, 1..10),
            prop::collection::vec(prop_oneof![0x61u32..0x7B, 0x41u32..0x5B, 0x30u32..0x3A], 1..10),
        ]
    ) {
        let token: String = s.into_iter().filter_map(char::from_u32).collect();
        prop_assert!(!detect_code_mixing(&token).mixed);
    }

    #[test]
    fn homophones_keep_length(idx in prop::collection::vec(any::<prop::sample::Index>(), 1..=3)) {
        let table = PinyinTable::builtin();
        let chars = table.chars();
        let term: String = idx.iter().map(|i| *i.get(&chars)).collect();
        for v in gen_homophones(&term, &table, chars.iter().copied()).unwrap() {
            prop_assert_eq!(v.variant.chars().count(), term.chars().count());
            prop_assert_ne!(&v.variant, &term);
        }
    }
}

#[test]
fn compose_inverts_expand() {
    let table = GlyphTable::builtin();
    for (c, comps) in table.entries() {
        let expanded = expand_deformation(c, &table);
        assert_eq!(expanded.chars(), comps);
        assert!(compose_deformation(comps, &table).chars().contains(&c), "{c}");
    }
}

fn class_labels(k: usize, n: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..k, 0..k), n)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

proptest! {
    #[test]
    fn prf_ignores_order_and_names(
        pairs in class_labels(4, 1..60),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        order in any::<u64>(),
    ) {
        let preds: Vec<Label> = pairs.iter().map(|p| Label::Class(p.0)).collect();
        let golds: Vec<Label> = pairs.iter().map(|p| Label::Class(p.1)).collect();
        let base = weighted_prf(&preds, &golds, 4, Mode::Single).unwrap();

        let mut shuffled = pairs.clone();
        let r = order as usize % shuffled.len();
        shuffled.rotate_left(r);
        shuffled.reverse();
        let p2: Vec<Label> = shuffled.iter().map(|p| Label::Class(p.0)).collect();
        let g2: Vec<Label> = shuffled.iter().map(|p| Label::Class(p.1)).collect();
        let b = weighted_prf(&p2, &g2, 4, Mode::Single).unwrap();
        prop_assert!(close(base.precision, b.precision) && close(base.recall, b.recall) && close(base.f1, b.f1));

        let p3: Vec<Label> = pairs.iter().map(|p| Label::Class(perm[p.0])).collect();
        let g3: Vec<Label> = pairs.iter().map(|p| Label::Class(perm[p.1])).collect();
        let c = weighted_prf(&p3, &g3, 4, Mode::Single).unwrap();
        prop_assert!(close(base.precision, c.precision) && close(base.recall, c.recall) && close(base.f1, c.f1));
        for v in [base.precision, base.recall, base.f1] {
            prop_assert!((0.0..=100.0).contains(&v));
        }
    }

    #[test]
    fn breakdown_combines_to_accuracy(rows in prop::collection::vec((0usize..5, any::<bool>()), 1..80)) {
        // stratum 0 clean, 1 offensive, 2..5 hate with an expression
        let golds: Vec<ToxiSample> = rows
            .iter()
            .enumerate()
            .map(|(i, &(s, _))| ToxiSample {
                id: i as u64,
                platform: Platform::Zhihu,
                topic: Topic::Race,
                text: String::new(),
                toxic: s > 0,
                hate: s > 1,
                groups: if s > 1 { [Group::Racism].into_iter().collect() } else { GroupSet::EMPTY },
                expression: (s > 1).then(|| Expression::ALL[s - 2]),
            })
            .collect();
        let preds: Vec<bool> = rows.iter().map(|r| r.1).collect();
        let b = expression_accuracy_breakdown(&preds, &golds).unwrap();
        let (mut correct, mut total) = (0, 0);
        for (_, s) in b.strata() {
            if let Some(s) = s {
                correct += s.correct;
                total += s.total;
            }
        }
        let direct = preds.iter().zip(&golds).filter(|(p, g)| **p == g.toxic).count();
        prop_assert_eq!(total, golds.len());
        prop_assert_eq!(correct, direct);
    }
}

fn rating_rows() -> impl Strategy<Value = Vec<Vec<u32>>> {
    (2u32..6, 2usize..5, 1usize..25).prop_flat_map(|(r, k, n)| {
        prop::collection::vec(prop::collection::vec(0..k, r as usize), n).prop_map(move |items| {
            items
                .into_iter()
                .map(|labels| {
                    let mut row = vec![0u32; k];
                    for l in labels {
                        row[l] += 1;
                    }
                    row
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn kappa_matches_oracle(rows in rating_rows()) {
        let m = RatingMatrix::new(rows.clone()).unwrap();
        let unanimous = rows.iter().all(|r| r.iter().filter(|&&c| c > 0).count() == 1);
        match fleiss_kappa(&m) {
            Ok(k) if unanimous => prop_assert_eq!(k, 1.0),
            Ok(k) => {
                prop_assert!((k - kappa_oracle(&rows)).abs() < 1e-12);
                prop_assert!(k < 1.0);
            }
            Err(_) => prop_assert!(false, "kappa failed on {:?}", rows),
        }
    }

    #[test]
    fn clean_inputs_see_only_c0(tokens in prop::collection::vec(1u32..10, 1..12), shift in prop::collection::vec(-1.0f64..1.0, 4)) {
        let cfg = TkeConfig { dim: 4, hidden: 3, task: Task::Expression, ..Default::default() };
        let params = ModelParams::init(10, &cfg);
        let enc = EncodedSample { toxic: vec![0; tokens.len()], tokens, label: None };
        let before = forward(&enc, &params, 0.5).unwrap();
        let mut moved = params.clone();
        let c = moved.categories.as_mut().unwrap();
        for r in 1..c.rows {
            for (x, s) in c.row_mut(r).iter_mut().zip(&shift) {
                *x += s;
            }
        }
        prop_assert_eq!(forward(&enc, &moved, 0.5).unwrap(), before);
    }
}
