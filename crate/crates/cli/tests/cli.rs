use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Duration;

use dialect_rag::embedding::{EmbeddingProvider, HashedNgramEmbedder};
use dialect_rag::index::HybridIndex;
use dialect_rag::pipeline::resolve;
use dialect_rag::prompt::{PromptBuilder, TemplateSet};
use dialect_rag::retrieve::{DeepMode, Retriever};
use dialect_rag_testkit::http::MockServer;
use dialect_rag_testkit::metrics;
use serde_json::{json, Value};
use tempfile::TempDir;

fn cmd(args: &[&str]) -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dialect-rag"));
    c.args(args);
    for var in ["LLM_URL", "LLM_MODEL", "LLM_API_KEY", "EMBED_URL", "DIALECT_RAG_CONFIG", "DIALECT_RAG_N"] {
        c.env_remove(var);
    }
    c
}

fn run(args: &[&str]) -> Output {
    cmd(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn jsonl(rows: &[Value]) -> String {
    rows.iter().map(|r| r.to_string() + "\n").collect()
}

const CORPUS: &[(&str, &str, &str)] = &[
    ("Sylhet", "আমি বাড়িত যাইরাম", "আমি বাড়ি যাচ্ছি"),
    ("Sylhet", "তুমি কিতা খাইছো আজকে", "তুমি কী খেয়েছ আজকে"),
    ("Sylhet", "হে বাজারো গেছে", "সে বাজারে গেছে"),
    ("Chittagong", "আঁই বাড়িত যাইর", "আমি বাড়ি যাচ্ছি"),
    ("Chittagong", "তুঁই কি খাইয়ো আজিয়া", "তুমি কী খেয়েছ আজকে"),
    ("Chittagong", "হিতে বাজারত গেইয়্যে", "সে বাজারে গেছে"),
];

/// Ingests and indexes the small corpus above; returns (dir, index path).
fn small_index() -> (TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<Value> = CORPUS
        .iter()
        .enumerate()
        .map(|(i, (d, l, s))| json!({"id": format!("c{i}"), "district": d, "local": l, "standard": s}))
        .collect();
    let raw = dir.path().join("raw.jsonl");
    std::fs::write(&raw, jsonl(&rows)).unwrap();
    let (corpus, index) = (dir.path().join("corpus.jsonl"), dir.path().join("index.dfix"));
    ok(&["ingest", "--input", p(&raw), "--output", p(&corpus)]);
    ok(&["index", "--corpus", p(&corpus), "--output", p(&index), "--dim", "96"]);
    (dir, index)
}

#[test]
fn ingest_stats_match_a_recount() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        json!({"id": "a", "district": "Sylhet", "text": "আমি ভাত খাইছি"}),
        json!({"id": "b", "district": "rangpur", "text": "মুই বাড়ি যাইম এলা"}),
        json!({"id": "c", "district": "Sylhet", "text": "   "}),
        json!({"id": "d", "district": "Sylhet", "text": "তুমি কিতা কররায় এখন বাবা"}),
        json!({"id": "e", "text": "জেলা নাই"}),
    ];
    let raw = dir.path().join("t.jsonl");
    std::fs::write(&raw, jsonl(&lines)).unwrap();
    let out_path = dir.path().join("out/records.jsonl");
    let stats: Value = serde_json::from_str(&ok(&[
        "ingest", "--input", p(&raw), "--format", "transcript", "--output", p(&out_path), "--lenient", "--stats",
    ]))
    .unwrap();

    // recount from the input: a record needs a district and non-blank text
    let kept: Vec<&Value> =
        lines.iter().filter(|l| l["district"].is_string() && !l["text"].as_str().unwrap().trim().is_empty()).collect();
    assert_eq!(stats["lines_read"], lines.len());
    assert_eq!(stats["records"], kept.len());
    assert_eq!(stats["rejected"], lines.len() - kept.len());
    let words: usize = kept.iter().map(|l| l["text"].as_str().unwrap().split_whitespace().count()).sum();
    assert_eq!(stats["mean_word_count"].as_f64().unwrap(), words as f64 / kept.len() as f64);
    assert_eq!(stats["per_district"]["Sylhet"], 2);
    assert_eq!(stats["per_district"]["Rangpur"], 1);
    let written = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(written.lines().count(), kept.len());
}

#[test]
fn malformed_input_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("bad.jsonl");
    std::fs::write(&raw, "{\"id\": 1, \"district\": \"Sylhet\", \"text\": \"ok\"}\n{not json\n").unwrap();
    let out = run(&["ingest", "--input", p(&raw), "--format", "transcript", "--output", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_files_and_bad_usage_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    let out = run(&["index", "--corpus", p(&missing), "--output", p(&dir.path().join("i"))]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["query", "--index", p(&missing), "--text", "x", "--dialect", "Sylhet"]);
    assert_eq!(out.status.code(), Some(3));
    let out = run(&["query", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn corrupted_index_is_a_data_error() {
    let (_dir, index) = small_index();
    let mut bytes = std::fs::read(&index).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    std::fs::write(&index, bytes).unwrap();
    let out = run(&["query", "--index", p(&index), "--text", "আমি বাড়ি যাচ্ছি", "--dialect", "Sylhet"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("checksum"));
}

#[test]
fn unknown_dialect_is_a_data_error() {
    let (_dir, index) = small_index();
    let out = run(&["query", "--index", p(&index), "--text", "আমি বাড়ি যাচ্ছি", "--dialect", "Comilla"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn query_lists_only_the_requested_dialect() {
    let (_dir, index) = small_index();
    let v: Value = serde_json::from_str(&ok(&[
        "query", "--index", p(&index), "--text", "আমি বাড়ি যাচ্ছি", "--dialect", "sylhet", "--k", "3",
    ]))
    .unwrap();
    let c = v["candidates"].as_array().unwrap();
    assert_eq!(c.len(), 3);
    assert!(c.iter().all(|x| x["district"] == "Sylhet"));
    assert_eq!(c[0]["standard"], "আমি বাড়ি যাচ্ছি");
    let scores: Vec<f64> = c.iter().map(|x| x["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn dry_run_prints_the_library_prompt() {
    let (_dir, index) = small_index();
    let input = "তুমি কী খেয়েছ";
    let printed = ok(&[
        "translate", "--index", p(&index), "--text", input, "--dialect", "Chittagong", "--pipeline", "2", "--n", "2",
        "--dry-run",
    ]);

    let idx = HybridIndex::load(&index).unwrap();
    let e = HashedNgramEmbedder::new(idx.dim());
    let retrieval = Retriever::new(&idx, &e).retrieve_p2(input, "Chittagong", 2, DeepMode::Auto).unwrap();
    let builder = PromptBuilder::new(TemplateSet::default());
    let want = builder.build_p2(input, "Chittagong", &resolve(&idx, &retrieval), 2).unwrap();
    assert_eq!(printed, want.text);
    assert!(printed.contains(input));

    let zero = ok(&["translate", "--text", input, "--dialect", "Chittagong", "--pipeline", "zero", "--dry-run"]);
    assert_eq!(zero, builder.build_zero_shot(input, "Chittagong").unwrap().text);
}

fn completion(content: &str) -> String {
    json!({"choices":[{"message":{"role":"assistant","content":content},"finish_reason":"stop"}]}).to_string()
}

/// Replies with a fixed hypothesis per input, keyed by a `q<N>` token.
fn scripted(answers: BTreeMap<String, String>) -> MockServer {
    MockServer::start(move |req| {
        let body: Value = serde_json::from_str(&req.body).unwrap();
        let prompt = body["messages"][0]["content"].as_str().unwrap_or("").to_string();
        let hit = answers.iter().find(|(k, _)| prompt.split_whitespace().any(|w| w == k.as_str()));
        match hit {
            Some((_, a)) => (200, completion(a), Duration::ZERO),
            None => (400, "{}".into(), Duration::ZERO),
        }
    })
}

const HAND: &[(&str, &str)] = &[
    ("ami bari jaimu", "ami bari jaimu"),
    ("tumi kita khaiso", "tumi kita khaiso aj"),
    ("he bazar goise", "hee bajare gese"),
    ("amra okhon jaiyar", "amra ekhon jaitesi na"),
    ("bala asi", "ami bala asi"),
];

fn write_hand_pairs(dir: &Path) -> (PathBuf, BTreeMap<String, String>) {
    let mut rows = Vec::new();
    let mut answers = BTreeMap::new();
    for (i, (hyp, reference)) in HAND.iter().enumerate() {
        rows.push(json!({"id": format!("h{i}"), "input": format!("q{i} standard text"), "reference": reference, "dialect": "Sylhet"}));
        answers.insert(format!("q{i}"), hyp.to_string());
    }
    let path = dir.join("pairs.jsonl");
    std::fs::write(&path, jsonl(&rows)).unwrap();
    (path, answers)
}

#[test]
fn replayed_evaluation_matches_hand_scored_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (pairs, answers) = write_hand_pairs(d);
    let fixtures = d.join("fixtures.jsonl");
    {
        let server = scripted(answers);
        ok(&[
            "evaluate", "--pairs", p(&pairs), "--pipeline", "zero", "--model", "hand", "--llm-url", &server.url,
            "--record", p(&fixtures), "--out-dir", p(&d.join("rec")),
        ]);
    }
    let out = d.join("replay");
    ok(&["evaluate", "--pairs", p(&pairs), "--pipeline", "zero", "--model", "hand", "--replay", p(&fixtures), "--out-dir", p(&out)]);

    let reports: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let r = &reports[0];
    let toks = |s: &str| s.split_whitespace().map(String::from).collect::<Vec<_>>();
    let hyps: Vec<Vec<String>> = HAND.iter().map(|(h, _)| toks(h)).collect();
    let refs: Vec<Vec<String>> = HAND.iter().map(|(_, r)| toks(r)).collect();
    let hs: Vec<String> = HAND.iter().map(|(h, _)| h.to_string()).collect();
    let rs: Vec<String> = HAND.iter().map(|(_, r)| r.to_string()).collect();
    assert!((r["bleu"].as_f64().unwrap() - metrics::bleu(&hyps, &refs)).abs() < 1e-9);
    assert!((r["chrf"].as_f64().unwrap() - metrics::chrf(&hs, &rs)).abs() < 1e-9);
    assert_eq!(r["wer"].as_f64().unwrap(), metrics::corpus_wer(&hyps, &refs));
    // 0 + 1 + 3 + 3 + 1 edits over 17 reference words
    assert_eq!(r["wer"].as_f64().unwrap(), 8.0 / 17.0);

    let e = HashedNgramEmbedder::new(768);
    let vecs = |s: &str| -> Vec<Vec<f32>> {
        e.embed_tokens(s).unwrap().vectors.iter().map(|v| v.as_slice().to_vec()).collect()
    };
    let f1 = HAND.iter().map(|(h, r)| metrics::bertscore_f1(&vecs(h), &vecs(r))).sum::<f64>() / HAND.len() as f64;
    assert!((r["bertscore_f1"].as_f64().unwrap() - f1).abs() < 1e-6);

    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "Dialect,Model,BLEU,ChrF,BERTScore F1,WER");
    assert!(csv.lines().nth(1).unwrap().ends_with(",47.06"), "{csv}");

    let manifest: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "evaluate");
    assert_eq!(manifest["model"], "hand");
    assert_eq!(manifest["replay"], true);
}

#[test]
fn replay_without_a_matching_fixture_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (pairs, _) = write_hand_pairs(dir.path());
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = run(&[
        "evaluate", "--pairs", p(&pairs), "--pipeline", "zero", "--replay", p(&empty), "--out-dir", p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_env_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (pairs, answers) = write_hand_pairs(d);
    let server = scripted(answers);
    let config = d.join("dialect-rag.conf");
    std::fs::write(&config, format!("# test config\nllm_model = \"file-model\"\nllm_url = {}\nn = 2\n", server.url)).unwrap();
    let model_of = |out: &Path| -> Value {
        let m: Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["model"].clone()
    };
    let base = ["translate", "--pairs", p(&pairs), "--pipeline", "zero"];

    let out = d.join("file");
    let status = cmd(&[&base[..], &["--config", p(&config), "--out-dir", p(&out)]].concat()).status().unwrap();
    assert!(status.success());
    assert_eq!(model_of(&out), "file-model");

    let out = d.join("env");
    let status = cmd(&[&base[..], &["--out-dir", p(&out)]].concat())
        .env("DIALECT_RAG_CONFIG", &config)
        .env("LLM_MODEL", "env-model")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(model_of(&out), "env-model");

    let out = d.join("flag");
    let status = cmd(&[&base[..], &["--config", p(&config), "--model", "flag-model", "--out-dir", p(&out)]].concat())
        .env("LLM_MODEL", "env-model")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(model_of(&out), "flag-model");

    std::fs::write(&config, "no_such_key = 1\n").unwrap();
    let out = cmd(&[&base[..], &["--config", p(&config)]].concat()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn index_dim_must_match_the_embedding_service() {
    let server = MockServer::start(|req| {
        let body: Value = serde_json::from_str(&req.body).unwrap();
        let n = body["texts"].as_array().map_or(0, Vec::len);
        let vectors: Vec<Vec<f32>> = (0..n).map(|_| vec![0.5, 0.5, 0.5, 0.5]).collect();
        (200, json!({"vectors": vectors, "dim": 4, "model": "tiny"}).to_string(), Duration::ZERO)
    });
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let raw = dir.path().join("raw.jsonl");
    std::fs::write(&raw, jsonl(&[json!({"id": "a", "district": "Sylhet", "local": "ami jai", "standard": "ami jai"})])).unwrap();
    ok(&["ingest", "--input", p(&raw), "--output", p(&corpus)]);
    let index = dir.path().join("i.dfix");
    let out = run(&["index", "--corpus", p(&corpus), "--output", p(&index), "--dim", "8", "--embed-url", &server.url]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dimension"), "{}", String::from_utf8_lossy(&out.stderr));
    ok(&["index", "--corpus", p(&corpus), "--output", p(&index), "--dim", "4", "--embed-url", &server.url]);
}
