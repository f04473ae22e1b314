//! Accuracy cells and matrices, heatmap buckets, cosine translation quality,
//! and their CSV / JSON / Markdown renderings.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dataset::Pairing;
use crate::eval::PredictionRecord;
use crate::gateway::{Embedder, GatewayError};
use crate::lexicon::LanguageCode;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("accuracy is undefined for an empty record set")]
    NoRecords,
    #[error("records mix pairings {0} and {1}")]
    MixedPairings(Pairing, Pairing),
    #[error("no results for pairing {0}")]
    MissingPairing(Pairing),
    #[error("two results for pairing {0}")]
    DuplicatePairing(Pairing),
    #[error("no languages given")]
    NoLanguages,
    #[error("accuracy {0}% is outside [0, 100]")]
    OutOfRange(f64),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine is undefined for an empty or all-zero vector")]
    ZeroVector,
    #[error("{english} English texts but {translated} translations")]
    LengthMismatch { english: usize, translated: usize },
    #[error("nothing to compare")]
    NoTexts,
    #[error("embedder returned {got} vectors for {expected} texts")]
    EmbeddingCount { expected: usize, got: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub pairing: Pairing,
    pub n: usize,
    pub correct: usize,
    pub invalid: usize,
    pub accuracy: f64,
}

impl CellResult {
    pub fn percent(&self) -> f64 {
        100.0 * self.correct as f64 / self.n as f64
    }

    pub fn invalid_rate(&self) -> f64 {
        self.invalid as f64 / self.n as f64
    }

    pub fn bucket(&self) -> Bucket {
        bucket(self.percent()).expect("a ratio of counts lies in [0, 100]")
    }
}

pub fn score(records: &[PredictionRecord]) -> Result<CellResult, ReportError> {
    let first = records.first().ok_or(ReportError::NoRecords)?;
    if let Some(other) = records.iter().find(|r| r.pairing != first.pairing) {
        return Err(ReportError::MixedPairings(
            first.pairing.clone(),
            other.pairing.clone(),
        ));
    }
    let n = records.len();
    let correct = records.iter().filter(|r| r.is_correct()).count();
    let invalid = records.iter().filter(|r| r.parsed.is_invalid()).count();
    Ok(CellResult {
        pairing: first.pairing.clone(),
        n,
        correct,
        invalid,
        accuracy: correct as f64 / n as f64,
    })
}

/// Heatmap bands in percent: `[lower, upper)`, the top band closed at 100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Bucket {
    Below30,
    From30To35,
    From35To40,
    From40To45,
    From45To50,
    From50To55,
    From55To60,
    AtLeast60,
}

impl Bucket {
    pub const ALL: [Bucket; 8] = [
        Bucket::Below30,
        Bucket::From30To35,
        Bucket::From35To40,
        Bucket::From40To45,
        Bucket::From45To50,
        Bucket::From50To55,
        Bucket::From55To60,
        Bucket::AtLeast60,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Bucket::Below30 => "<30",
            Bucket::From30To35 => "30-35",
            Bucket::From35To40 => "35-40",
            Bucket::From40To45 => "40-45",
            Bucket::From45To50 => "45-50",
            Bucket::From50To55 => "50-55",
            Bucket::From55To60 => "55-60",
            Bucket::AtLeast60 => "≥60",
        }
    }

    /// Lower and upper bound in percent.
    pub fn range(self) -> (f64, f64) {
        let i = self as usize;
        match self {
            Bucket::Below30 => (0.0, 30.0),
            Bucket::AtLeast60 => (60.0, 100.0),
            _ => (25.0 + 5.0 * i as f64, 30.0 + 5.0 * i as f64),
        }
    }
}

impl fmt::Display for Bucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn bucket(percent: f64) -> Result<Bucket, ReportError> {
    if !(0.0..=100.0).contains(&percent) {
        return Err(ReportError::OutOfRange(percent));
    }
    Ok(Bucket::ALL
        .into_iter()
        .rev()
        .find(|b| percent >= b.range().0)
        .expect("Below30 starts at 0"))
}

/// Accuracy cells with premise languages as rows, hypothesis languages as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMatrix {
    pub model: String,
    pub languages: Vec<LanguageCode>,
    /// `cells[row][col]`
    pub cells: Vec<Vec<CellResult>>,
}

impl AccuracyMatrix {
    pub fn cell(&self, premise: &LanguageCode, hypothesis: &LanguageCode) -> Option<&CellResult> {
        let row = self.languages.iter().position(|l| l == premise)?;
        let col = self.languages.iter().position(|l| l == hypothesis)?;
        Some(&self.cells[row][col])
    }

    pub fn diagonal(&self) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().enumerate().map(|(i, row)| &row[i])
    }
}

pub fn matrix(
    cells: &[CellResult],
    languages: &[LanguageCode],
    model: &str,
) -> Result<AccuracyMatrix, ReportError> {
    if languages.is_empty() {
        return Err(ReportError::NoLanguages);
    }
    let mut by_pairing: BTreeMap<&Pairing, &CellResult> = BTreeMap::new();
    for c in cells {
        if by_pairing.insert(&c.pairing, c).is_some() {
            return Err(ReportError::DuplicatePairing(c.pairing.clone()));
        }
    }
    let mut rows = Vec::with_capacity(languages.len());
    for l1 in languages {
        let mut row = Vec::with_capacity(languages.len());
        for l2 in languages {
            let pairing = Pairing::new(l1.clone(), l2.clone());
            let cell = by_pairing
                .get(&pairing)
                .ok_or(ReportError::MissingPairing(pairing.clone()))?;
            row.push((*cell).clone());
        }
        rows.push(row);
    }
    Ok(AccuracyMatrix {
        model: model.to_owned(),
        languages: languages.to_vec(),
        cells: rows,
    })
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ReportError> {
    if u.len() != v.len() {
        return Err(ReportError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum();
    let nv: f64 = v.iter().map(|b| b * b).sum();
    if nu == 0.0 || nv == 0.0 {
        return Err(ReportError::ZeroVector);
    }
    // one square root keeps cos(v, v) at exactly 1
    Ok((dot / (nu * nv).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub language: LanguageCode,
    pub sample_size: usize,
    pub mean_cosine: f64,
}

/// Texts per embedding request.
pub const EMBED_BATCH: usize = 32;

/// Mean cosine between each English text and its aligned translation.
pub fn translation_quality(
    english: &[String],
    translated: &[String],
    language: &LanguageCode,
    embedder: &dyn Embedder,
) -> Result<QualityRow, ReportError> {
    if english.len() != translated.len() {
        return Err(ReportError::LengthMismatch {
            english: english.len(),
            translated: translated.len(),
        });
    }
    if english.is_empty() {
        return Err(ReportError::NoTexts);
    }
    let mut total = 0.0;
    for (en, tr) in english
        .chunks(EMBED_BATCH)
        .zip(translated.chunks(EMBED_BATCH))
    {
        let inputs: Vec<String> = en.iter().chain(tr).cloned().collect();
        let vectors = embedder.embed(&inputs)?;
        if vectors.len() != inputs.len() {
            return Err(ReportError::EmbeddingCount {
                expected: inputs.len(),
                got: vectors.len(),
            });
        }
        let (a, b) = vectors.split_at(en.len());
        for (u, v) in a.iter().zip(b) {
            total += cosine(u, v)?;
        }
    }
    Ok(QualityRow {
        language: language.clone(),
        sample_size: english.len(),
        mean_cosine: total / english.len() as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Format {
    Csv,
    Json,
    Markdown,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(format!(
                "unknown format `{other}` (expected csv, json or md)"
            )),
        }
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 input")
}

/// Wide table: one row per premise language, full-precision accuracies.
pub fn matrix_csv(m: &AccuracyMatrix) -> String {
    let mut rows = vec![std::iter::once("premise".to_owned())
        .chain(m.languages.iter().map(|l| l.to_string()))
        .collect()];
    for (l1, row) in m.languages.iter().zip(&m.cells) {
        rows.push(
            std::iter::once(l1.to_string())
                .chain(row.iter().map(|c| c.accuracy.to_string()))
                .collect(),
        );
    }
    csv_string(rows)
}

/// Long table with every count, one line per pairing.
pub fn cells_csv(m: &AccuracyMatrix) -> String {
    let mut rows = vec![[
        "model",
        "premise",
        "hypothesis",
        "n",
        "correct",
        "invalid",
        "accuracy",
        "bucket",
    ]
    .map(String::from)
    .to_vec()];
    for c in m.cells.iter().flatten() {
        rows.push(vec![
            m.model.clone(),
            c.pairing.premise_language.to_string(),
            c.pairing.hypothesis_language.to_string(),
            c.n.to_string(),
            c.correct.to_string(),
            c.invalid.to_string(),
            c.accuracy.to_string(),
            c.bucket().label().to_owned(),
        ]);
    }
    csv_string(rows)
}

pub fn matrix_json(m: &AccuracyMatrix) -> String {
    let mut cells = Map::new();
    for (l1, row) in m.languages.iter().zip(&m.cells) {
        let mut cols = Map::new();
        for (l2, c) in m.languages.iter().zip(row) {
            cols.insert(
                l2.to_string(),
                json!({
                    "n": c.n,
                    "correct": c.correct,
                    "invalid": c.invalid,
                    "accuracy": c.accuracy,
                    "bucket": c.bucket().label(),
                }),
            );
        }
        cells.insert(l1.to_string(), Value::Object(cols));
    }
    let doc = json!({"model": m.model, "languages": m.languages, "cells": cells});
    serde_json::to_string_pretty(&doc).expect("json serializes") + "\n"
}

fn legend() -> String {
    let mut out = String::from("Buckets (accuracy %, lower bound inclusive):");
    for b in Bucket::ALL {
        write!(out, " `{}`", b.label()).unwrap();
    }
    out.push('\n');
    out
}

fn table_header(out: &mut String, first: &str, columns: impl IntoIterator<Item = String>) {
    let columns: Vec<String> = columns.into_iter().collect();
    writeln!(out, "| {first} | {} |", columns.join(" | ")).unwrap();
    writeln!(out, "|---|{}", "---:|".repeat(columns.len())).unwrap();
}

/// Heatmap-style matrix with bucket annotations, plus monolingual and
/// invalid-rate tables. Values are rounded to one decimal here only.
pub fn matrix_markdown(m: &AccuracyMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "# Accuracy matrix: {}\n", m.model).unwrap();
    writeln!(
        out,
        "Rows: premise language. Columns: hypothesis language. `*` marks monolingual cells.\n"
    )
    .unwrap();
    let langs = || m.languages.iter().map(|l| l.to_string());
    table_header(&mut out, "premise \\ hypothesis", langs());
    for (i, (l1, row)) in m.languages.iter().zip(&m.cells).enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let star = if i == j { "*" } else { "" };
                format!("{:.1}{star} ({})", c.percent(), c.bucket().label())
            })
            .collect();
        writeln!(out, "| {l1} | {} |", cells.join(" | ")).unwrap();
    }
    out.push('\n');
    out.push_str(&legend());

    out.push_str("\n## Monolingual\n\n");
    out.push_str("| language | n | accuracy | bucket |\n|---|---:|---:|---|\n");
    for c in m.diagonal() {
        writeln!(
            out,
            "| {} | {} | {:.1} | {} |",
            c.pairing.premise_language,
            c.n,
            c.percent(),
            c.bucket().label()
        )
        .unwrap();
    }

    out.push_str("\n## Invalid responses (%)\n\n");
    table_header(&mut out, "premise \\ hypothesis", langs());
    for (l1, row) in m.languages.iter().zip(&m.cells) {
        let cells: Vec<String> = row
            .iter()
            .map(|c| format!("{:.1}", 100.0 * c.invalid_rate()))
            .collect();
        writeln!(out, "| {l1} | {} |", cells.join(" | ")).unwrap();
    }
    out
}

pub fn render_matrix(m: &AccuracyMatrix, format: Format) -> String {
    match format {
        Format::Csv => matrix_csv(m),
        Format::Json => matrix_json(m),
        Format::Markdown => matrix_markdown(m),
    }
}

pub fn render_quality(rows: &[QualityRow], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut table = vec![["language", "sample_size", "mean_cosine"]
                .map(String::from)
                .to_vec()];
            for r in rows {
                table.push(vec![
                    r.language.to_string(),
                    r.sample_size.to_string(),
                    r.mean_cosine.to_string(),
                ]);
            }
            csv_string(table)
        }
        Format::Json => serde_json::to_string_pretty(rows).expect("json serializes") + "\n",
        Format::Markdown => {
            let mut out = String::from(
                "# Translation quality\n\n| language | pairs | mean cosine |\n|---|---:|---:|\n",
            );
            for r in rows {
                writeln!(
                    out,
                    "| {} | {} | {:.3} |",
                    r.language, r.sample_size, r.mean_cosine
                )
                .unwrap();
            }
            out
        }
    }
}

pub fn write_report(path: &Path, contents: &str) -> Result<(), ReportError> {
    let io = |e: std::io::Error| ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}
