use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use toxicn_core::corpus::write_corpus;
use toxicn_core::lexicon::Lexicon;
use toxicn_core::synthetic::template_corpus;

fn toxicn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toxicn"))
        .args(args)
        .env_remove("TOXICN_RESOURCES")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn corpus_file(dir: &TempDir, n: usize, seed: u64) -> PathBuf {
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &template_corpus(n, &Lexicon::builtin(), seed)).unwrap();
    path
}

const SMALL_MODEL: &[&str] = &["--dim", "8", "--hidden", "8", "--pad-len", "24", "--epochs", "3", "--batch", "16"];

#[test]
fn usage_errors_exit_1() {
    let o = toxicn(&[]);
    assert_eq!(code(&o), 1);
    let o = toxicn(&["frobnicate"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(code(&toxicn(&["normalize", "--in", "x"])), 1);
    assert_eq!(code(&toxicn(&["derive", "--term", "同性恋", "--rule", "nope"])), 1);
    assert_eq!(code(&toxicn(&["gradcheck", "--configs", "0"])), 1);
}

#[test]
fn help_and_version_exit_0() {
    let o = toxicn(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("pipeline"));
    assert_eq!(code(&toxicn(&["--version"])), 0);
}

#[test]
fn normalize_reports_and_cleans() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(
        &raw,
        concat!(
            "{\"toxicn_schema\":1}\n",
            "{\"id\":1,\"text\":\"@user 你好啊朋友 http://x.cn/a\",\"topic\":\"gender\"}\n",
            "{\"id\":2,\"text\":\"你好啊朋友\"}\n",
            "{\"id\":3,\"text\":\"哈哈\"}\n",
            "{\"id\":4,\"text\":\"这是一条广告内容\"}\n",
            "{\"id\":5,\"text\":\"ＡＢＣ全角字母\"}\n",
        ),
    )
    .unwrap();
    let ex = dir.path().join("ids.txt");
    fs::write(&ex, "4\n").unwrap();
    let out = dir.path().join("clean.jsonl");
    let o = toxicn(&["normalize", "--in", p(&raw), "--out", p(&out), "--exclude", p(&ex)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "kept=2 dropped_brief=1 dropped_dup=1");
    let lines: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["toxicn_schema"], 1);
    assert_eq!(lines[1]["text"], "你好啊朋友");
    assert_eq!(lines[1]["topic"], "gender");
    assert_eq!(lines[2]["text"], "ABC全角字母");
}

#[test]
fn malformed_input_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.jsonl");
    fs::write(&raw, "{\"id\":1,\"text\":\"你好你好\"}\n{oops\n").unwrap();
    let o = toxicn(&["normalize", "--in", p(&raw), "--out", p(&dir.path().join("o"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
    let o = toxicn(&["stats", "--in", p(&dir.path().join("missing.jsonl"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn match_uses_resource_dir() {
    let dir = TempDir::new().unwrap();
    let res = dir.path().join("res");
    fs::create_dir(&res).unwrap();
    fs::write(res.join("lexicon.tsv"), "# test\n蠢驴\tgeneral\texplicit\tnone\n").unwrap();
    let input = dir.path().join("in.jsonl");
    fs::write(&input, "{\"id\":9,\"text\":\"你这个蠢驴\"}\n{\"id\":10,\"text\":\"今天天气不错\"}\n").unwrap();
    let out = dir.path().join("m.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_toxicn"))
        .args(["match", "--in", p(&input), "--out", p(&out)])
        .env("TOXICN_RESOURCES", &res)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "records=2 with_matches=1 lexicon=1");
    let first: Value = serde_json::from_str(fs::read_to_string(&out).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["id"], 9);
    assert_eq!(first["matches"][0]["term"], "蠢驴");
    assert_eq!((first["matches"][0]["start"].as_u64(), first["matches"][0]["end"].as_u64()), (Some(3), Some(5)));
}

#[test]
fn derive_rules() {
    let o = toxicn(&["derive", "--term", "同性恋", "--rule", "abbreviation"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l.starts_with("txl\t")), "{}", stdout(&o));
    let o = toxicn(&["derive", "--term", "nm傻", "--rule", "detect"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mixed"], true);
}

#[test]
fn pseudolabel_grows_lexicon() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("in.jsonl");
    let texts = ["坏蛋废柴", "坏蛋废柴", "坏蛋废柴菜鸡", "废柴菜鸡", "菜鸡真菜", "今天天气很好"];
    let body: String = texts.iter().map(|t| format!("{{\"text\":\"{t}\"}}\n")).collect();
    fs::write(&input, body).unwrap();
    let lex = dir.path().join("lex.tsv");
    fs::write(&lex, "坏蛋\tgeneral\texplicit\tnone\n").unwrap();
    let accept = dir.path().join("accept.txt");
    fs::write(&accept, "废柴\n菜鸡\n").unwrap();
    let (out, report, grown) = (dir.path().join("l.jsonl"), dir.path().join("c.tsv"), dir.path().join("g.tsv"));
    let o = toxicn(&[
        "pseudolabel", "--lexicon", p(&lex), "--in", p(&input), "--accept", p(&accept), "--out", p(&out),
        "--report", p(&report), "--lexicon-out", p(&grown), "--min-freq", "2", "--min-score", "1.5", "--max-n", "2",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("iterations=3 toxic_counts=3,4,5 added_terms=2 lexicon=3"), "{}", stdout(&o));
    assert!(fs::read_to_string(&report).unwrap().starts_with("term\ttoxic_freq\tclean_freq\tscore\n"));
    assert_eq!(fs::read_to_string(&grown).unwrap().lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn validate_lists_violations_by_line() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("c.jsonl");
    fs::write(
        &f,
        concat!(
            "{\"toxicn_schema\":1}\n",
            "{\"id\":1,\"platform\":\"zhihu\",\"topic\":\"race\",\"text\":\"a\",\"toxic\":0,\"hate\":0,\"groups\":[],\"expression\":null}\n",
            "\n",
            "{\"id\":2,\"platform\":\"zhihu\",\"topic\":\"race\",\"text\":\"b\",\"toxic\":0,\"hate\":1,\"groups\":[],\"expression\":null}\n",
        ),
    )
    .unwrap();
    let o = toxicn(&["validate", "--in", p(&f)]);
    assert_eq!(code(&o), 2);
    let out = stdout(&o);
    assert!(out.contains("line 4 (id 2): hate requires toxic"), "{out}");
    assert!(out.contains("records=2 valid=1 invalid=1"), "{out}");
}

#[test]
fn stats_and_split() {
    let dir = TempDir::new().unwrap();
    let c = corpus_file(&dir, 100, 3);
    let js = dir.path().join("stats.json");
    let o = toxicn(&["stats", "--in", p(&c), "--json", p(&js)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_str(&fs::read_to_string(&js).unwrap()).unwrap();
    assert_eq!(v["total"]["total"], 100);
    assert_eq!(v["total"]["toxic"], 50);

    let (tr, te) = (dir.path().join("tr.jsonl"), dir.path().join("te.jsonl"));
    let o = toxicn(&["split", "--in", p(&c), "--train-out", p(&tr), "--test-out", p(&te), "--seed", "4", "--stratify"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "train=80 test=20");
    let first = fs::read(&tr).unwrap();
    toxicn(&["split", "--in", p(&c), "--train-out", p(&tr), "--test-out", p(&te), "--seed", "4", "--stratify"]);
    assert_eq!(fs::read(&tr).unwrap(), first);
    let o = toxicn(&["split", "--in", p(&c), "--train-out", p(&tr), "--test-out", p(&te), "--ratio", "3:0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_eval_roundtrip_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let c = corpus_file(&dir, 160, 5);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\ndim = 4\nlambda = 0.5\nseed = 2\n").unwrap();
    let model = dir.path().join("m.json");
    let mut args = vec!["train", "--train", p(&c), "--config", p(&cfg), "--out", p(&model), "--task", "toxic"];
    args.extend_from_slice(SMALL_MODEL);
    let o = toxicn(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ckpt: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(ckpt["config"]["dim"], 8, "flag beats config");
    assert_eq!(ckpt["config"]["seed"], 2, "config beats default");

    let (r1, r2) = (dir.path().join("r1.json"), dir.path().join("r2.json"));
    let o = toxicn(&["eval", "--model", p(&model), "--test", p(&c), "--report", p(&r1)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("weighted"));
    toxicn(&args);
    toxicn(&["eval", "--model", p(&model), "--test", p(&c), "--report", p(&r2)]);
    assert_eq!(fs::read(&r1).unwrap(), fs::read(&r2).unwrap());
    let r: Value = serde_json::from_str(&fs::read_to_string(&r1).unwrap()).unwrap();
    assert_eq!(r["samples"], 160);
    assert!(r["expression_accuracy"].is_array());

    fs::write(&model, "{\"format\":\"something else\"}").unwrap();
    assert_eq!(code(&toxicn(&["eval", "--model", p(&model), "--test", p(&c)])), 2);
    fs::write(&cfg, "colour = red\n").unwrap();
    assert_eq!(code(&toxicn(&["train", "--train", p(&c), "--config", p(&cfg), "--out", p(&model)])), 2);
}

#[test]
fn gradcheck_passes() {
    let o = toxicn(&["gradcheck", "--configs", "3", "--seed", "11"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("case ")).count(), 3);
    assert!(stdout(&o).contains("max_rel_error="));
}

#[test]
fn kappa_command() {
    let dir = TempDir::new().unwrap();
    let f = dir.path().join("r.tsv");
    fs::write(&f, "item\tyes\tno\na\t3\t0\nb\t0\t3\n").unwrap();
    let o = toxicn(&["kappa", "--in", p(&f)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "items=2 categories=2 raters=3 kappa=1.0000");
}

fn pipeline(corpus: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline", "--in", p(corpus), "--out", p(out), "--seeds", "1,2", "--gradcheck-configs", "2"];
    args.extend_from_slice(SMALL_MODEL);
    args.extend_from_slice(extra);
    toxicn(&args)
}

#[test]
fn pipeline_is_rerunnable_and_aggregates_disk() {
    let dir = TempDir::new().unwrap();
    let c = corpus_file(&dir, 240, 9);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = pipeline(&c, &a, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&pipeline(&c, &b, &[])), 0);
    for f in [
        "summary.json", "summary.txt", "stats.json", "lexicon.json", "variants.tsv", "gradcheck.json",
        "seed-1/toxic.json", "seed-2/group.txt", "clean.jsonl",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let s: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let tasks: Vec<&str> = s.as_array().unwrap().iter().map(|t| t["task"].as_str().unwrap()).collect();
    assert_eq!(tasks, ["toxic", "type", "group", "expression"]);
    assert_eq!(s[0]["seeds"], serde_json::json!([1, 2]));

    fs::remove_dir_all(a.join("seed-2")).unwrap();
    let o = toxicn(&["pipeline", "--out", p(&a), "--aggregate-only"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let s: Value = serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s[0]["seeds"], serde_json::json!([1]));
    assert_eq!(s[0]["f1"]["sd"], 0.0);
}

#[test]
fn pipeline_predicted_cascade() {
    let dir = TempDir::new().unwrap();
    let c = corpus_file(&dir, 240, 4);
    let out = dir.path().join("o");
    let o = pipeline(&c, &out, &["--tasks", "type", "--cascade", "predicted"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let o = pipeline(&c, &out, &["--tasks", "toxic,type", "--cascade", "predicted", "--save-models", "--lr", "0.05"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let gold = dir.path().join("g");
    assert_eq!(code(&pipeline(&c, &gold, &["--tasks", "toxic,type", "--lr", "0.05"])), 0);
    let samples = |d: &Path| -> u64 {
        let r: Value = serde_json::from_str(&fs::read_to_string(d.join("seed-1/type.json")).unwrap()).unwrap();
        r["samples"].as_u64().unwrap()
    };
    assert!(samples(&out) > 0);
    assert!(samples(&out) <= samples(&gold));
    assert!(out.join("seed-2/toxic.model.json").is_file());
    assert_eq!(code(&toxicn(&["pipeline", "--out", p(&dir.path().join("none")), "--aggregate-only"])), 2);
}
