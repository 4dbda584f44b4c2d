use dialect_rag_wasm::{normalize_json, score_json, Explorer};
use serde_json::Value;

const CORPUS: &str = r#"{"id":"a","district":"Sylhet","local":"আমি বাড়িত যাইরাম","standard":"আমি বাড়ি যাচ্ছি"}
{"id":"b","district":"Sylhet","local":"তুমি কিতা খাইছো আজকে","standard":"তুমি কী খেয়েছ আজকে"}
{"id":"c","district":"Chittagong","local":"আঁই বাড়িত যাইর","standard":"আমি বাড়ি যাচ্ছি"}
{"id":"d","district":"Chittagong","local":"তুঁই কি খাইয়ো আজিয়া","standard":"তুমি কী খেয়েছ আজকে"}
"#;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn identical_lines_score_perfectly() {
    let text = "ami bari jaimu\ntumi kita khaiso";
    let v = parse(&score_json(text, text).unwrap());
    assert_eq!(v["bleu"], 100.0);
    assert_eq!(v["chrf"], 100.0);
    assert_eq!(v["wer"], 0.0);
    assert!((v["bertscore_f1"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(v["sentences"].as_array().unwrap().len(), 2);
}

#[test]
fn blank_hypothesis_counts_as_missing() {
    let v = parse(&score_json("\na b", "c d e\na b").unwrap());
    assert_eq!(v["wer"].as_f64().unwrap(), 3.0 / 5.0);
    assert_eq!(v["sentences"][0]["bertscore_f1"], 0.0);
}

#[test]
fn line_count_mismatch_is_reported() {
    assert!(score_json("a\nb", "a").unwrap_err().contains("2 hypothesis lines"));
}

#[test]
fn normalizer_tags_short_questions() {
    let v = parse(&normalize_json("কিতা?", "কী?", "sylhet"));
    assert_eq!(v["district"], "Sylhet");
    assert_eq!(v["tokens"], serde_json::json!(["কিতা", "?"]));
    assert_eq!(v["tags"], serde_json::json!(["SHORT", "QUESTION"]));
    assert_eq!(v["tagged"], "কিতা? [[SHORT]] [[QUESTION]]");

    let v = parse(&normalize_json("কিতা করো?", "কী করছ?", "Sylhet"));
    assert_eq!(v["tags"], serde_json::json!(["QUESTION"]));
    assert!(v["structured"].as_str().unwrap().contains("Sylhet"));
}

#[test]
fn explorer_defaults_and_weight_override() {
    let ex = Explorer::build(CORPUS).unwrap();
    assert_eq!(ex.dialect_names(), ["Chittagong", "Sylhet"]);
    let v = parse(&ex.search_json("আমি বাড়ি যাচ্ছি", "Sylhet", 2, 2, "off", None).unwrap());
    assert_eq!(v["candidates"][0]["id"], "a");
    assert!(v["candidates"].as_array().unwrap().iter().all(|c| c["district"] == "Sylhet"));
    assert_eq!(v["weights"], serde_json::json!([0.35, 0.55]));

    let v = parse(&ex.search_json("আমি বাড়ি যাচ্ছি", "Sylhet", 1, 2, "off", Some((1.0, 0.0))).unwrap());
    assert_eq!(v["weights"], serde_json::json!([1.0, 0.0]));
    for c in v["candidates"].as_array().unwrap() {
        let (dense, score) = (c["dense"].as_f64().unwrap(), c["score"].as_f64().unwrap());
        assert_eq!(score, dense + c["bonus"].as_f64().unwrap());
    }
    assert!(ex.search_json("x", "Sylhet", 3, 2, "off", None).is_err());
    assert!(ex.search_json("x", "Barishal", 1, 2, "off", None).is_err());
}

#[test]
fn empty_corpus_is_rejected() {
    assert!(Explorer::build("").is_err());
}
