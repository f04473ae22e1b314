use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crossnli_testkit::{constant_chat, constant_embeddings, oracle_chat, outage_after, MockServer};
use serde_json::{json, Value};

fn crossnli(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crossnli"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn write_config(dir: &Path, value: Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&value).unwrap()).unwrap();
    path.display().to_string()
}

fn gen_small(out: &Path) {
    let o = crossnli(
        out,
        &["gen", "--languages", "en,de", "--count", "9", "--seed", "7"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn gen_writes_every_pairing_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let first = snapshot(&tmp.path().join("suite"));
    let jsonl: Vec<&String> = first.keys().filter(|k| k.ends_with(".jsonl")).collect();
    assert_eq!(
        jsonl,
        ["de-de.jsonl", "de-en.jsonl", "en-de.jsonl", "en-en.jsonl"]
    );
    assert_eq!(
        String::from_utf8_lossy(&first["en-de.jsonl"])
            .lines()
            .count(),
        10
    );
    gen_small(tmp.path());
    assert_eq!(snapshot(&tmp.path().join("suite")), first);
}

#[test]
fn gen_rejects_unknown_language() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crossnli(tmp.path(), &["gen", "--languages", "en,xx", "--count", "9"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("xx"), "{}", stderr(&o));
    assert!(!tmp.path().join("suite").exists());
}

#[test]
fn validate_bundled_assets() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crossnli(tmp.path(), &["validate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("ok"));
}

#[test]
fn validate_reports_mislabeled_template() {
    let tmp = tempfile::tempdir().unwrap();
    let templates = tmp.path().join("t.json");
    fs::write(
        &templates,
        json!([{
            "id": "conversion",
            "premise": {"quantifier": "all", "subject_slot": "A", "predicate_slot": "B"},
            "hypothesis": {"quantifier": "some", "subject_slot": "B", "predicate_slot": "A"},
            "label": "neutral"
        }])
        .to_string(),
    )
    .unwrap();
    let o = crossnli(
        tmp.path(),
        &["validate", "--templates", templates.to_str().unwrap()],
    );
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(
        text.contains("declares NEUTRAL but classifies as ENTAILMENT"),
        "{text}"
    );
}

#[test]
fn validate_itemizes_lexicon_coverage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut lex: Value = serde_json::from_str(crossnli::lexicon::Lexicon::seed_json()).unwrap();
    let lexemes = lex["lexemes"].as_array_mut().unwrap();
    lexemes.retain(|l| {
        !(l["language"] == "sw" && (l["concept"] == "zombies" || l["concept"] == "cats"))
    });
    let path = tmp.path().join("lex.json");
    fs::write(&path, lex.to_string()).unwrap();
    let o = crossnli(
        tmp.path(),
        &["validate", "--lexicon", path.to_str().unwrap()],
    );
    assert_eq!(code(&o), 3);
    let text = stdout(&o);
    assert!(text.contains("missing lexeme for (zombies, sw)"), "{text}");
    assert!(text.contains("missing lexeme for (cats, sw)"), "{text}");
}

fn eval_config(tmp: &Path, chat_url: &str, extra: Value) -> String {
    let mut chat =
        json!({"endpoint_url": chat_url, "model": "mock-7b", "backoff_ms": 1, "retries": 1});
    if let Value::Object(m) = extra {
        for (k, v) in m {
            chat[k] = v;
        }
    }
    write_config(tmp, json!({"chat": chat}))
}

#[test]
fn eval_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let server = MockServer::start(oracle_chat(crossnli::lexicon::Lexicon::seed()));
    let config = eval_config(tmp.path(), server.url(), json!({}));
    let o = crossnli(tmp.path(), &["--config", &config, "eval", "--run-id", "r1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(server.request_count(), 36);

    let predictions = tmp.path().join("runs").join("r1__en-de.predictions.jsonl");
    let text = fs::read_to_string(&predictions).unwrap();
    assert_eq!(text.lines().count(), 10);

    let o = crossnli(tmp.path(), &["report", "--format", "all"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let md = fs::read_to_string(tmp.path().join("reports").join("mock-7b.md")).unwrap();
    for b in [
        "<30", "30-35", "35-40", "40-45", "45-50", "50-55", "55-60", "≥60",
    ] {
        assert!(md.contains(&format!("`{b}`")), "{b}");
    }
    let csv = fs::read_to_string(tmp.path().join("reports").join("mock-7b.csv")).unwrap();
    assert_eq!(csv, "premise,en,de\nen,1,1\nde,1,1\n");
    let first = fs::read(tmp.path().join("reports").join("mock-7b.json")).unwrap();
    let o = crossnli(tmp.path(), &["report", "--format", "json"]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read(tmp.path().join("reports").join("mock-7b.json")).unwrap(),
        first
    );

    fs::remove_file(tmp.path().join("runs").join("r1__de-en.predictions.jsonl")).unwrap();
    let o = crossnli(tmp.path(), &["report"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("de-en"), "{}", stderr(&o));
}

#[test]
fn missing_api_key_stops_before_any_request() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let server = MockServer::start(constant_chat("Neutral"));
    let config = eval_config(
        tmp.path(),
        server.url(),
        json!({"api_key_env": "CROSSNLI_CLI_TEST_NO_SUCH_KEY"}),
    );
    let o = Command::new(env!("CARGO_BIN_EXE_crossnli"))
        .args([
            "--out",
            tmp.path().to_str().unwrap(),
            "--config",
            &config,
            "eval",
        ])
        .env_remove("CROSSNLI_CLI_TEST_NO_SUCH_KEY")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("CROSSNLI_CLI_TEST_NO_SUCH_KEY"));
    assert_eq!(server.request_count(), 0);
}

#[test]
fn interrupted_eval_exits_5_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    gen_small(tmp.path());
    let (handler, outage) = outage_after(5, 500, oracle_chat(crossnli::lexicon::Lexicon::seed()));
    let server = MockServer::start(handler);
    let config = eval_config(tmp.path(), server.url(), json!({"parallelism": 1}));
    let o = crossnli(
        tmp.path(),
        &[
            "--config", &config, "eval", "--run-id", "job", "--pairs", "en-de",
        ],
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
    assert!(stderr(&o).contains("--resume job"));

    outage.heal();
    let before = server.request_count();
    let o = crossnli(
        tmp.path(),
        &[
            "--config", &config, "eval", "--resume", "job", "--pairs", "en-de",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(server.request_count() - before, 4);
    let text =
        fs::read_to_string(tmp.path().join("runs").join("job__en-de.predictions.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 10);
    let cached = text
        .lines()
        .skip(1)
        .filter(|l| l.contains("\"from_cache\":true"))
        .count();
    assert!(cached >= 5);

    let o = crossnli(
        tmp.path(),
        &["--config", &config, "eval", "--resume", "nothing"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn quality_with_mock_embedder() {
    let tmp = tempfile::tempdir().unwrap();
    let o = crossnli(
        tmp.path(),
        &["gen", "--languages", "en,fr,sw", "--count", "12"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let server = MockServer::start(constant_embeddings(vec![0.2, 0.4, -0.1]));
    let config = write_config(
        tmp.path(),
        json!({"embeddings": {"endpoint_url": server.url(), "model": "encoder"}}),
    );
    let o = crossnli(
        tmp.path(),
        &[
            "--config",
            &config,
            "quality",
            "--language",
            "fr,sw",
            "--sample",
            "500",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("clamped"), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("quality").join("quality.csv")).unwrap();
    assert_eq!(csv, "language,sample_size,mean_cosine\nfr,12,1\nsw,12,1\n");

    let o = crossnli(
        tmp.path(),
        &["--config", &config, "quality", "--language", "de"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("unknown language"), "{}", stderr(&o));

    let o = crossnli(
        tmp.path(),
        &[
            "--config",
            &config,
            "quality",
            "--language",
            "fr",
            "--min-similarity",
            "1.5",
        ],
    );
    assert_eq!(code(&o), 3);
}

#[test]
fn busy_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let lock = fs::File::create(tmp.path().join(".crossnli.lock")).unwrap();
    lock.lock().unwrap();
    let o = crossnli(tmp.path(), &["gen", "--languages", "en", "--count", "3"]);
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("another crossnli process"),
        "{}",
        stderr(&o)
    );
}
