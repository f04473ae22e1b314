//! Prompting, answer parsing and resumable evaluation runs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::{self, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, OnceLock};
use std::thread;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataset::{Dataset, Pairing, RealizedExample};
use crate::gateway::{DecodingConfig, Gateway, GatewayConfig, GatewayError};
use crate::hash::sha256_hex;
use crate::logic::Label;

const QUESTION: &str =
    "Question: Is the hypothesis entailed by the premise, contradicted by it, or unrelated?";
const CHOICES: &str = "Answer with one of: Entailment, Contradiction, Neutral.";

/// The five-line zero-shot prompt for one premise/hypothesis pair.
pub fn build_prompt(premise: &str, hypothesis: &str) -> String {
    format!("Premise: {premise}\nHypothesis: {hypothesis}\n{QUESTION}\n{CHOICES}\nAnswer:")
}

pub fn prompt_for(example: &RealizedExample) -> String {
    build_prompt(&example.premise_text, &example.hypothesis_text)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParsingMode {
    /// Whole response, trimmed and case-folded, must be a label word.
    #[default]
    Strict,
    /// First label word anywhere in the response.
    Lenient,
}

impl ParsingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParsingMode::Strict => "strict",
            ParsingMode::Lenient => "lenient",
        }
    }
}

impl fmt::Display for ParsingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParsingMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(ParsingMode::Strict),
            "lenient" => Ok(ParsingMode::Lenient),
            other => Err(format!(
                "unknown parsing mode `{other}` (expected strict or lenient)"
            )),
        }
    }
}

/// A parsed model response: a label, or nothing recognisable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Answer {
    Label(Label),
    Invalid,
}

impl Answer {
    pub fn as_str(self) -> &'static str {
        match self {
            Answer::Label(l) => l.as_str(),
            Answer::Invalid => "invalid",
        }
    }

    pub fn is_invalid(self) -> bool {
        self == Answer::Invalid
    }
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Answer {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Answer {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "invalid" {
            return Ok(Answer::Invalid);
        }
        s.parse::<Label>()
            .map(Answer::Label)
            .map_err(serde::de::Error::custom)
    }
}

fn label_word(word: &str) -> Option<Label> {
    match word.to_lowercase().as_str() {
        "entailment" => Some(Label::Entailment),
        "contradiction" => Some(Label::Contradiction),
        "neutral" => Some(Label::Neutral),
        _ => None,
    }
}

pub fn parse_answer(raw: &str, mode: ParsingMode) -> Answer {
    static WORD: OnceLock<Regex> = OnceLock::new();
    let found = match mode {
        ParsingMode::Strict => label_word(raw.trim()),
        ParsingMode::Lenient => WORD
            .get_or_init(|| Regex::new(r"(?i)\b(entailment|contradiction|neutral)\b").unwrap())
            .find(raw)
            .and_then(|m| label_word(m.as_str())),
    };
    found.map_or(Answer::Invalid, Answer::Label)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    #[serde(rename = "id")]
    pub abstract_id: String,
    #[serde(flatten)]
    pub pairing: Pairing,
    pub gold: Label,
    pub raw_response: String,
    pub parsed: Answer,
    pub from_cache: bool,
}

impl PredictionRecord {
    pub fn is_correct(&self) -> bool {
        self.parsed == Answer::Label(self.gold)
    }

    /// Equality ignoring where the response came from.
    pub fn same_outcome(&self, other: &PredictionRecord) -> bool {
        self.abstract_id == other.abstract_id
            && self.pairing == other.pairing
            && self.gold == other.gold
            && self.raw_response == other.raw_response
            && self.parsed == other.parsed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub dataset_hash: String,
    pub suite_id: String,
    pub model: String,
    #[serde(flatten)]
    pub pairing: Pairing,
    pub decoding: DecodingConfig,
    pub parsing_mode: ParsingMode,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub expected: usize,
    pub completed_ids: Vec<String>,
    pub failed_ids: Vec<String>,
}

impl RunManifest {
    pub fn is_complete(&self) -> bool {
        self.completed_ids.len() == self.expected && self.failed_ids.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("example {0} has an empty premise or hypothesis")]
    EmptyText(String),
    #[error(
        "run `{run_id}` was started on a different dataset (hash {found}, expected {expected})"
    )]
    DatasetChanged {
        run_id: String,
        expected: String,
        found: String,
    },
    #[error("invalid run id `{0}`: use letters, digits, '-', '_' or '.'")]
    BadRunId(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}, line {line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, e: impl fmt::Display) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn dataset_hash(dataset: &Dataset) -> String {
    sha256_hex(dataset.to_jsonl().as_bytes())
}

/// Where a run for one pairing keeps its files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub manifest: PathBuf,
    pub journal: PathBuf,
    pub predictions: PathBuf,
}

impl RunPaths {
    pub fn new(dir: &Path, run_id: &str, pairing: &Pairing) -> Self {
        let stem = format!("{run_id}__{pairing}");
        RunPaths {
            manifest: dir.join(format!("{stem}.manifest.json")),
            journal: dir.join(format!("{stem}.journal.jsonl")),
            predictions: dir.join(format!("{stem}.predictions.jsonl")),
        }
    }
}

pub fn valid_run_id(run_id: &str) -> bool {
    !run_id.is_empty()
        && !run_id.contains("__")
        && run_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !run_id.starts_with('.')
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub run_id: String,
    pub dir: PathBuf,
    pub mode: ParsingMode,
    pub parallelism: usize,
}

#[derive(Debug)]
pub struct RunOutcome {
    /// Sorted by abstract id; only completed examples.
    pub records: Vec<PredictionRecord>,
    pub manifest: RunManifest,
    pub failures: Vec<(String, GatewayError)>,
    pub paths: RunPaths,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.manifest.is_complete()
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), EvalError> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), EvalError> {
    let mut json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    json.push('\n');
    write_atomic(path, &json)
}

pub fn read_run_manifest(path: &Path) -> Result<RunManifest, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Format {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Journal records. A torn final line, left by a crash mid-write, is dropped.
fn read_journal(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path, e)),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        match serde_json::from_str::<PredictionRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => break,
            Err(e) => {
                return Err(EvalError::Format {
                    path: path.display().to_string(),
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(records)
}

pub fn predictions_jsonl(manifest: &RunManifest, records: &[PredictionRecord]) -> String {
    let mut out = serde_json::to_string(manifest).expect("manifest serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Manifest header plus records of a finished predictions file.
pub fn read_predictions(path: &Path) -> Result<(RunManifest, Vec<PredictionRecord>), EvalError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let format = |line: usize, message: String| EvalError::Format {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| format(1, "missing manifest header".into()))?;
    let manifest: RunManifest = serde_json::from_str(header)
        .map_err(|e| format(1, format!("invalid manifest header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: PredictionRecord =
            serde_json::from_str(line).map_err(|e| format(i + 2, e.to_string()))?;
        if r.pairing != manifest.pairing {
            return Err(format(
                i + 2,
                format!(
                    "record pairing {} differs from header {}",
                    r.pairing, manifest.pairing
                ),
            ));
        }
        records.push(r);
    }
    if records.len() != manifest.expected {
        return Err(format(
            1,
            format!(
                "header expects {} records, found {}",
                manifest.expected,
                records.len()
            ),
        ));
    }
    Ok((manifest, records))
}

fn make_record(
    example: &RealizedExample,
    raw: String,
    mode: ParsingMode,
    from_cache: bool,
) -> PredictionRecord {
    PredictionRecord {
        abstract_id: example.abstract_id.clone(),
        pairing: example.pairing.clone(),
        gold: example.label,
        parsed: parse_answer(&raw, mode),
        raw_response: raw,
        from_cache,
    }
}

/// Queries the model for every example of `dataset`, resuming a previous
/// attempt with the same run id if its journal is present.
///
/// Completed examples are never sent again: their responses come from the
/// response cache, or from the journal when the cache is gone. Gateway
/// failures leave the run incomplete with the failing ids in the manifest.
pub fn run_eval(
    dataset: &Dataset,
    gateway: &Gateway,
    chat: &GatewayConfig,
    options: &RunOptions,
) -> Result<RunOutcome, EvalError> {
    if dataset.examples.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    if !valid_run_id(&options.run_id) {
        return Err(EvalError::BadRunId(options.run_id.clone()));
    }
    if let Some(e) = dataset
        .examples
        .iter()
        .find(|e| e.premise_text.is_empty() || e.hypothesis_text.is_empty())
    {
        return Err(EvalError::EmptyText(e.abstract_id.clone()));
    }
    fs::create_dir_all(&options.dir).map_err(|e| io_err(&options.dir, e))?;
    let pairing = dataset.pairing();
    let paths = RunPaths::new(&options.dir, &options.run_id, &pairing);
    let hash = dataset_hash(dataset);

    let previous = if paths.manifest.exists() {
        let m = read_run_manifest(&paths.manifest)?;
        if m.dataset_hash != hash {
            return Err(EvalError::DatasetChanged {
                run_id: options.run_id.clone(),
                expected: hash,
                found: m.dataset_hash,
            });
        }
        Some(m)
    } else {
        None
    };

    let by_id: BTreeMap<&str, &RealizedExample> = dataset
        .examples
        .iter()
        .map(|e| (e.abstract_id.as_str(), e))
        .collect();
    let mut done: BTreeMap<String, PredictionRecord> = BTreeMap::new();
    for r in read_journal(&paths.journal)? {
        let Some(example) = by_id.get(r.abstract_id.as_str()) else {
            continue;
        };
        let request = chat.chat_request(prompt_for(example));
        let record = match gateway.cached_chat(&request)? {
            Some(hit) => make_record(example, hit.text, options.mode, true),
            None => make_record(example, r.raw_response, options.mode, true),
        };
        done.insert(record.abstract_id.clone(), record);
    }

    let mut manifest = RunManifest {
        run_id: options.run_id.clone(),
        dataset_hash: hash,
        suite_id: dataset.metadata.suite_id.clone(),
        model: chat.model.clone(),
        pairing,
        decoding: chat.decoding,
        parsing_mode: options.mode,
        started_at: previous.map_or_else(now, |m| m.started_at),
        finished_at: None,
        expected: dataset.examples.len(),
        completed_ids: done.keys().cloned().collect(),
        failed_ids: Vec::new(),
    };
    write_manifest(&paths.manifest, &manifest)?;

    // rewrite the journal so a torn tail and stale entries disappear
    let journal_text: String = done
        .values()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect();
    write_atomic(&paths.journal, &journal_text)?;
    let journal_file = OpenOptions::new()
        .append(true)
        .open(&paths.journal)
        .map_err(|e| io_err(&paths.journal, e))?;
    let mut journal = BufWriter::new(journal_file);

    let pending: Vec<&RealizedExample> = dataset
        .examples
        .iter()
        .filter(|e| !done.contains_key(&e.abstract_id))
        .collect();
    let mut failures = Vec::new();
    let next = AtomicUsize::new(0);
    let workers = options.parallelism.max(1).min(pending.len().max(1));
    let (tx, rx) = mpsc::channel();
    let mut io_failure = None;

    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending) = (&next, &pending);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(example) = pending.get(i) else { break };
                let result = gateway.chat_complete(&chat.chat_request(prompt_for(example)));
                if tx.send((*example, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (example, result) in rx {
            if io_failure.is_some() {
                continue;
            }
            match result {
                Ok(completion) => {
                    let record = make_record(
                        example,
                        completion.text,
                        options.mode,
                        completion.from_cache,
                    );
                    let line = serde_json::to_string(&record).expect("record serializes");
                    let written = writeln!(journal, "{line}").and_then(|_| journal.flush());
                    if let Err(e) = written {
                        io_failure = Some(io_err(&paths.journal, e));
                        continue;
                    }
                    manifest.completed_ids.push(record.abstract_id.clone());
                    done.insert(record.abstract_id.clone(), record);
                }
                Err(e) => {
                    manifest.failed_ids.push(example.abstract_id.clone());
                    failures.push((example.abstract_id.clone(), e));
                }
            }
            if let Err(e) = write_manifest(&paths.manifest, &manifest) {
                io_failure = Some(e);
            }
        }
    });
    if let Some(e) = io_failure {
        return Err(e);
    }
    drop(journal);

    manifest.completed_ids.sort();
    manifest.failed_ids.sort();
    failures.sort_by(|a, b| a.0.cmp(&b.0));
    let records: Vec<PredictionRecord> = done.into_values().collect();
    if manifest.is_complete() {
        manifest.finished_at = Some(now());
        write_atomic(&paths.predictions, &predictions_jsonl(&manifest, &records))?;
        write_manifest(&paths.manifest, &manifest)?;
        fs::remove_file(&paths.journal).map_err(|e| io_err(&paths.journal, e))?;
    } else {
        write_manifest(&paths.manifest, &manifest)?;
    }
    Ok(RunOutcome {
        records,
        manifest,
        failures,
        paths,
    })
}

/// Ids present in `records`, for completeness checks.
pub fn record_ids(records: &[PredictionRecord]) -> BTreeSet<&str> {
    records.iter().map(|r| r.abstract_id.as_str()).collect()
}
