use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn crema(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crema")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(dir: &Path, f: &str) -> String {
    dir.join(f).display().to_string()
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/posts.jsonl").display().to_string()
}

fn jsonl(path: impl AsRef<Path>) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn gen(dir: &Path) -> PathBuf {
    let out = crema(&["gen", "--out-dir", &p(dir, "g"), "--pairs", "8", "--seed", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("g")
}

fn match_args(g: &Path, out: &str) -> Vec<String> {
    let g = |f: &str| g.join(f).display().to_string();
    ["match", "--requests", &g("requests.jsonl"), "--offers", &g("offers.jsonl"), "--embeddings", &g("embeddings.bin"), "--ids", &g("ids.txt"), "--output", out]
        .map(String::from)
        .to_vec()
}

#[test]
fn help_and_usage_codes() {
    assert_eq!(code(&crema(&["--help"])), 0);
    assert_eq!(code(&crema(&[])), 1);
    assert_eq!(code(&crema(&["frobnicate"])), 1);
    assert_eq!(code(&crema(&["match", "--k", "abc"])), 1);
}

#[test]
fn data_and_param_errors() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(dir.path());
    let missing = crema(&["ratio", "--input", &p(dir.path(), "nope.jsonl"), "--output", &p(dir.path(), "r.json")]);
    assert_eq!(code(&missing), 2);

    let mut args = match_args(&g, &p(dir.path(), "m.jsonl"));
    args.extend(["--k", "0"].map(String::from));
    let bad_k = Command::new(env!("CARGO_BIN_EXE_crema")).args(&args).output().unwrap();
    assert_eq!(code(&bad_k), 1);

    let mut args = match_args(&g, &p(dir.path(), "m.jsonl"));
    args.extend(["--delta-time", "-3"].map(String::from));
    let bad_delta = Command::new(env!("CARGO_BIN_EXE_crema")).args(&args).output().unwrap();
    assert_eq!(code(&bad_delta), 1);
}

#[test]
fn config_file_below_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(dir.path());
    let conf = p(dir.path(), "c.conf");
    fs::write(&conf, "# defaults\nk = 25\nmode = ts\nfilter-resource = true\npartitions = 3\n").unwrap();
    let mut args = vec!["--config".to_string(), conf];
    args.extend(match_args(&g, &p(dir.path(), "m.jsonl")));
    args.extend(["--mode", "t", "--report", &p(dir.path(), "r.json")].map(String::from));
    let out = Command::new(env!("CARGO_BIN_EXE_crema")).args(&args).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["params"]["k"], 25);
    assert_eq!(report["params"]["mode"], "t");
    assert_eq!(report["params"]["filter_resource"], true);
    assert_eq!(report["requests"], 8);

    let results = jsonl(dir.path().join("m.jsonl"));
    assert_eq!(results.len(), 8);
    assert!(results.iter().all(|r| r["matches"].as_array().unwrap().len() <= 3));
}

#[test]
fn unknown_config_key_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = p(dir.path(), "c.conf");
    fs::write(&conf, "bogus_key = 1\n").unwrap();
    let out = crema(&["--config", &conf, "ratio", "--input", &fixture(), "--output", &p(dir.path(), "r.json")]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus_key"));
}

#[test]
fn ingest_validates_and_normalizes() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("raw.jsonl");
    fs::write(
        &input,
        concat!(
            "{\"id\":\"a\",\"text\":\"Need   water\\nnow &amp; food \\u2764\",\"lang\":\"en\",\"ts\":1600000000,\"lat\":1.0,\"lon\":2.0}\n",
            "{\"id\":\"b\",\"text\":\"no geo here\",\"lang\":\"en\",\"ts\":1600000000}\n",
        ),
    )
    .unwrap();
    let input = input.display().to_string();
    let out_path = p(dir.path(), "clean.jsonl");

    let strict = crema(&["ingest", "--input", &input, "--output", &out_path, "--require-geo"]);
    assert_eq!(code(&strict), 2);

    let lenient = crema(&["ingest", "--input", &input, "--output", &out_path, "--require-geo", "--skip-invalid"]);
    assert_eq!(code(&lenient), 0, "{}", String::from_utf8_lossy(&lenient.stderr));
    let rows = jsonl(&out_path);
    assert_eq!(rows.len(), 1);
    let text = rows[0]["text"].as_str().unwrap();
    assert!(!text.contains('\n') && !text.contains("&amp;") && !text.contains("  "), "{text}");
}

#[test]
fn filter_then_classify() {
    let dir = tempfile::tempdir().unwrap();
    let cands = p(dir.path(), "cands.jsonl");
    let out = crema(&["filter", "--input", &fixture(), "--output", &cands]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = jsonl(&cands);
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert!(ids.contains(&"f01") && ids.contains(&"f06") && ids.contains(&"f09"), "{ids:?}");
    assert!(!ids.contains(&"f10") && !ids.contains(&"f12"), "{ids:?}");

    let (all, reqs, offs) = (p(dir.path(), "all.jsonl"), p(dir.path(), "req.jsonl"), p(dir.path(), "off.jsonl"));
    let out = crema(&["classify", "--input", &cands, "--output", &all, "--requests-out", &reqs, "--offers-out", &offs]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (r, o) = (jsonl(&reqs), jsonl(&offs));
    assert_eq!(jsonl(&all).len(), rows.len());
    assert!(!r.is_empty() && !o.is_empty());
    let rid: Vec<&str> = r.iter().map(|x| x["id"].as_str().unwrap()).collect();
    let oid: Vec<&str> = o.iter().map(|x| x["id"].as_str().unwrap()).collect();
    assert!(rid.iter().all(|id| !oid.contains(id)));
    assert!(rid.contains(&"f01"), "{rid:?}");
}

#[test]
fn ratio_by_country() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("k.jsonl");
    let mut lines = String::new();
    for i in 0..4 {
        lines += &format!("{{\"id\":\"r{i}\",\"text\":\"x\",\"kind\":\"request\",\"country\":\"A\"}}\n");
    }
    lines += "{\"id\":\"o0\",\"text\":\"x\",\"kind\":\"offer\",\"country\":\"A\"}\n";
    lines += "{\"id\":\"o1\",\"text\":\"x\",\"kind\":\"offer\",\"country\":\"B\"}\n";
    fs::write(&input, lines).unwrap();
    let out_path = p(dir.path(), "ratio.json");
    let out = crema(&["ratio", "--input", &input.display().to_string(), "--group-by", "country", "--output", &out_path]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&out_path).unwrap();
    let rows: Vec<Value> = serde_json::from_str(&text).unwrap_or_else(|_| jsonl(&out_path));
    let a = rows.iter().find(|r| r["group"] == "A").unwrap();
    let b = rows.iter().find(|r| r["group"] == "B").unwrap();
    assert_eq!(a["or_ratio"], 0.25);
    assert!(b["or_ratio"].is_null());
}
