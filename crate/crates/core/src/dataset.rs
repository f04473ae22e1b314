//! Balanced abstract example sampling, realization into language pairings,
//! and JSONL persistence.
//!
//! Sampling is driven by ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through
//! `SeedableRng::seed_from_u64`. Uniform indices are drawn by rejection from
//! `next_u64`, and each label's candidate list is permuted with a partial
//! Fisher–Yates shuffle, so a (config, seed) pair yields the same suite on
//! every platform.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::hash::short_hash;
use crate::lexicon::{ConceptRole, LanguageCode, Lexicon, LexiconError};
use crate::logic::{
    instantiate, template_hash, validate_template, AbstractExample, Binding, ConceptId, Label,
    LogicError, SlotVar, Template,
};

/// Default examples per pairing: divisible by three so labels balance exactly.
pub const DEFAULT_COUNT: usize = 999;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("count must be at least 3, got {0}")]
    CountTooSmall(usize),
    #[error("no template with label {0}")]
    NoTemplateFor(Label),
    #[error("vocabulary exhausted for {label}: requested {requested} distinct examples, only {available} exist (short by {})", requested - available)]
    Exhausted {
        label: Label,
        requested: usize,
        available: usize,
    },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error("realizing example {abstract_id}: {source}")]
    Realize {
        abstract_id: String,
        source: LexiconError,
    },
    #[error("language `{0}` is not declared in the lexicon")]
    UnknownLanguage(LanguageCode),
    #[error("language `{0}` listed twice")]
    DuplicateLanguage(LanguageCode),
    #[error("no languages configured")]
    NoLanguages,
    #[error("unknown template id `{0}`")]
    UnknownTemplate(String),
    #[error("no abstract examples to realize")]
    NoExamples,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
}

fn io_error(path: &Path, e: impl fmt::Display) -> DatasetError {
    DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Premise language (L1) and hypothesis language (L2).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pairing {
    pub premise_language: LanguageCode,
    pub hypothesis_language: LanguageCode,
}

impl Pairing {
    pub fn new(premise: LanguageCode, hypothesis: LanguageCode) -> Self {
        Pairing {
            premise_language: premise,
            hypothesis_language: hypothesis,
        }
    }

    pub fn is_monolingual(&self) -> bool {
        self.premise_language == self.hypothesis_language
    }

    /// `en-de` style name used for files.
    pub fn stem(&self) -> String {
        format!("{}-{}", self.premise_language, self.hypothesis_language)
    }
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.premise_language, self.hypothesis_language)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RealizedExample {
    pub abstract_id: String,
    pub pairing: Pairing,
    pub premise_text: String,
    pub hypothesis_text: String,
    pub label: Label,
    pub template_id: String,
}

/// Header line of a dataset file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMetadata {
    pub suite_id: String,
    pub seed: u64,
    pub premise_language: LanguageCode,
    pub hypothesis_language: LanguageCode,
    pub count: usize,
    pub template_hash: String,
    pub lexicon_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub metadata: DatasetMetadata,
    pub examples: Vec<RealizedExample>,
}

impl Dataset {
    pub fn pairing(&self) -> Pairing {
        Pairing::new(
            self.metadata.premise_language.clone(),
            self.metadata.hypothesis_language.clone(),
        )
    }

    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        label_counts(self.examples.iter().map(|e| e.label))
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.metadata).expect("metadata serializes");
        out.push('\n');
        for ex in &self.examples {
            let line = ExampleLine {
                id: &ex.abstract_id,
                premise: &ex.premise_text,
                hypothesis: &ex.hypothesis_text,
                label: ex.label,
                premise_language: &ex.pairing.premise_language,
                hypothesis_language: &ex.pairing.hypothesis_language,
                template_id: &ex.template_id,
            };
            out.push_str(&serde_json::to_string(&line).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Dataset, DatasetError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or(DatasetError::Schema {
            line: 1,
            message: "missing metadata header (file is empty)".into(),
        })?;
        let metadata: DatasetMetadata =
            serde_json::from_str(header).map_err(|e| DatasetError::Schema {
                line: 1,
                message: format!("missing or invalid metadata header: {e}"),
            })?;
        let pairing = Pairing::new(
            metadata.premise_language.clone(),
            metadata.hypothesis_language.clone(),
        );
        let mut examples = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            examples.push(parse_example_line(line, n, &pairing)?);
        }
        if examples.len() != metadata.count {
            return Err(DatasetError::Schema {
                line: 1,
                message: format!(
                    "metadata declares count {} but the file holds {} examples",
                    metadata.count,
                    examples.len()
                ),
            });
        }
        Ok(Dataset { metadata, examples })
    }
}

#[derive(Serialize)]
struct ExampleLine<'a> {
    id: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
    label: Label,
    premise_language: &'a LanguageCode,
    hypothesis_language: &'a LanguageCode,
    template_id: &'a str,
}

const EXAMPLE_FIELDS: [&str; 7] = [
    "id",
    "premise",
    "hypothesis",
    "label",
    "premise_language",
    "hypothesis_language",
    "template_id",
];

fn parse_example_line(
    line: &str,
    n: usize,
    pairing: &Pairing,
) -> Result<RealizedExample, DatasetError> {
    let schema = |message: String| DatasetError::Schema { line: n, message };
    let value: Value =
        serde_json::from_str(line).map_err(|e| schema(format!("not valid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| schema("expected a JSON object".into()))?;
    if let Some(extra) = obj.keys().find(|k| !EXAMPLE_FIELDS.contains(&k.as_str())) {
        return Err(schema(format!("unknown field `{extra}`")));
    }
    let field = |name: &str| -> Result<&str, DatasetError> {
        obj.get(name)
            .ok_or_else(|| schema(format!("missing field `{name}`")))?
            .as_str()
            .ok_or_else(|| schema(format!("field `{name}` must be a string")))
    };
    let label = field("label")?
        .parse::<Label>()
        .map_err(|e| schema(format!("field `label`: {e}")))?;
    let language = |name: &str| -> Result<LanguageCode, DatasetError> {
        LanguageCode::new(field(name)?).map_err(|e| schema(format!("field `{name}`: {e}")))
    };
    let example_pairing = Pairing::new(
        language("premise_language")?,
        language("hypothesis_language")?,
    );
    if &example_pairing != pairing {
        return Err(schema(format!(
            "field `premise_language`/`hypothesis_language`: pairing {example_pairing} differs from header {pairing}"
        )));
    }
    Ok(RealizedExample {
        abstract_id: field("id")?.to_owned(),
        pairing: example_pairing,
        premise_text: field("premise")?.to_owned(),
        hypothesis_text: field("hypothesis")?.to_owned(),
        label,
        template_id: field("template_id")?.to_owned(),
    })
}

pub fn write_jsonl(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    fs::write(path, dataset.to_jsonl()).map_err(|e| io_error(path, e))
}

pub fn read_jsonl(path: &Path) -> Result<Dataset, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Dataset::from_jsonl(&text)
}

pub fn label_counts(labels: impl IntoIterator<Item = Label>) -> BTreeMap<Label, usize> {
    let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|l| (*l, 0)).collect();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    counts
}

/// Per-label quotas: `count / 3` each, surplus to entailment then contradiction.
pub fn label_quotas(count: usize) -> [(Label, usize); 3] {
    let base = count / 3;
    let extra = count % 3;
    let mut out = [(Label::Entailment, 0); 3];
    for (i, label) in Label::ALL.iter().enumerate() {
        out[i] = (*label, base + usize::from(i < extra));
    }
    out
}

struct Sampler(ChaCha8Rng);

impl Sampler {
    fn new(seed: u64) -> Self {
        Sampler(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform integer in `0..bound`.
    fn below(&mut self, bound: usize) -> usize {
        let bound = bound as u64;
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let x = self.0.next_u64();
            if x <= zone {
                return (x % bound) as usize;
            }
        }
    }
}

fn enumerate_bindings(
    slots: &[SlotVar],
    specific: &[&ConceptId],
    generic: &[&ConceptId],
    current: &mut Vec<(SlotVar, ConceptId)>,
    out: &mut Vec<Binding>,
) {
    let Some((slot, rest)) = slots.split_first() else {
        out.push(current.iter().cloned().collect());
        return;
    };
    let pool = if *slot == SlotVar::A {
        specific
    } else {
        generic
    };
    for concept in pool {
        if current.iter().any(|(_, c)| c == *concept) {
            continue;
        }
        current.push((*slot, (*concept).clone()));
        enumerate_bindings(rest, specific, generic, current, out);
        current.pop();
    }
}

/// Draws `count` distinct, label-balanced, oracle-verified examples.
pub fn generate_abstract(
    count: usize,
    seed: u64,
    templates: &[Template],
    lexicon: &Lexicon,
) -> Result<Vec<AbstractExample>, DatasetError> {
    if count < 3 {
        return Err(DatasetError::CountTooSmall(count));
    }
    for t in templates {
        validate_template(t)?;
    }
    let specific = lexicon.concepts_with_role(ConceptRole::Specific);
    let generic = lexicon.concepts_with_role(ConceptRole::Generic);
    let mut sampler = Sampler::new(seed);
    let mut examples = Vec::with_capacity(count);

    for (label, quota) in label_quotas(count) {
        let mut candidates: Vec<(&Template, Binding)> = Vec::new();
        for t in templates.iter().filter(|t| t.declared_label == label) {
            let mut bindings = Vec::new();
            enumerate_bindings(
                &t.slots(),
                &specific,
                &generic,
                &mut Vec::new(),
                &mut bindings,
            );
            candidates.extend(bindings.into_iter().map(|b| (t, b)));
        }
        if candidates.is_empty() && quota > 0 {
            if templates.iter().any(|t| t.declared_label == label) {
                return Err(DatasetError::Exhausted {
                    label,
                    requested: quota,
                    available: 0,
                });
            }
            return Err(DatasetError::NoTemplateFor(label));
        }
        if candidates.len() < quota {
            return Err(DatasetError::Exhausted {
                label,
                requested: quota,
                available: candidates.len(),
            });
        }
        for i in 0..quota {
            let j = i + sampler.below(candidates.len() - i);
            candidates.swap(i, j);
            let (template, binding) = &candidates[i];
            examples.push(instantiate(template, binding)?);
        }
    }
    examples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(examples)
}

/// Identity of a suite, shared by all of its datasets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteInfo {
    pub suite_id: String,
    pub seed: u64,
    pub template_hash: String,
    pub lexicon_hash: String,
}

/// Realizes each abstract example with the premise in L1 and hypothesis in L2.
pub fn realize_pairing(
    abstracts: &[AbstractExample],
    pairing: &Pairing,
    lexicon: &Lexicon,
    info: &SuiteInfo,
) -> Result<Dataset, DatasetError> {
    if abstracts.is_empty() {
        return Err(DatasetError::NoExamples);
    }
    for language in [&pairing.premise_language, &pairing.hypothesis_language] {
        if !lexicon.has_language(language) {
            return Err(DatasetError::UnknownLanguage(language.clone()));
        }
    }
    let mut examples = abstracts
        .iter()
        .map(|a| {
            let wrap = |source| DatasetError::Realize {
                abstract_id: a.id.clone(),
                source,
            };
            Ok(RealizedExample {
                abstract_id: a.id.clone(),
                pairing: pairing.clone(),
                premise_text: lexicon
                    .realize(&a.premise, &pairing.premise_language)
                    .map_err(wrap)?,
                hypothesis_text: lexicon
                    .realize(&a.hypothesis, &pairing.hypothesis_language)
                    .map_err(wrap)?,
                label: a.label,
                template_id: a.template_id.clone(),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    examples.sort_by(|a, b| a.abstract_id.cmp(&b.abstract_id));
    Ok(Dataset {
        metadata: DatasetMetadata {
            suite_id: info.suite_id.clone(),
            seed: info.seed,
            premise_language: pairing.premise_language.clone(),
            hypothesis_language: pairing.hypothesis_language.clone(),
            count: examples.len(),
            template_hash: info.template_hash.clone(),
            lexicon_hash: info.lexicon_hash.clone(),
        },
        examples,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub languages: Vec<LanguageCode>,
    pub count: usize,
    pub seed: u64,
    /// Empty selects every available template.
    #[serde(default)]
    pub template_ids: Vec<String>,
}

impl SuiteConfig {
    pub fn new(languages: Vec<LanguageCode>, count: usize, seed: u64) -> Self {
        SuiteConfig {
            languages,
            count,
            seed,
            template_ids: Vec::new(),
        }
    }

    pub fn validate(&self, lexicon: &Lexicon) -> Result<(), DatasetError> {
        if self.count < 3 {
            return Err(DatasetError::CountTooSmall(self.count));
        }
        if self.languages.is_empty() {
            return Err(DatasetError::NoLanguages);
        }
        let mut seen = BTreeSet::new();
        for l in &self.languages {
            if !seen.insert(l) {
                return Err(DatasetError::DuplicateLanguage(l.clone()));
            }
            if !lexicon.has_language(l) {
                return Err(DatasetError::UnknownLanguage(l.clone()));
            }
        }
        Ok(())
    }
}

/// `manifest.json` of a generated suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteManifest {
    pub suite_id: String,
    pub seed: u64,
    pub count: usize,
    pub languages: Vec<LanguageCode>,
    pub template_ids: Vec<String>,
    pub template_hash: String,
    pub lexicon_hash: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Suite {
    pub manifest: SuiteManifest,
    pub abstracts: Vec<AbstractExample>,
    pub datasets: Vec<Dataset>,
}

/// One dataset per ordered language pair, diagonal included, all realized
/// from the same abstract examples.
pub fn build_suite(
    config: &SuiteConfig,
    templates: &[Template],
    lexicon: &Lexicon,
) -> Result<Suite, DatasetError> {
    config.validate(lexicon)?;
    let selected: Vec<Template> = if config.template_ids.is_empty() {
        templates.to_vec()
    } else {
        config
            .template_ids
            .iter()
            .map(|id| {
                templates
                    .iter()
                    .find(|t| &t.id == id)
                    .cloned()
                    .ok_or_else(|| DatasetError::UnknownTemplate(id.clone()))
            })
            .collect::<Result<_, _>>()?
    };
    let abstracts = generate_abstract(config.count, config.seed, &selected, lexicon)?;
    let template_hash = template_hash(&selected);
    let identity = serde_json::json!({
        "languages": config.languages,
        "count": config.count,
        "seed": config.seed,
        "template_hash": template_hash,
        "lexicon_hash": lexicon.hash(),
    });
    let info = SuiteInfo {
        suite_id: short_hash(identity.to_string().as_bytes()),
        seed: config.seed,
        template_hash,
        lexicon_hash: lexicon.hash().to_owned(),
    };

    let mut datasets = Vec::with_capacity(config.languages.len().pow(2));
    for l1 in &config.languages {
        for l2 in &config.languages {
            let pairing = Pairing::new(l1.clone(), l2.clone());
            datasets.push(realize_pairing(&abstracts, &pairing, lexicon, &info)?);
        }
    }
    let manifest = SuiteManifest {
        suite_id: info.suite_id,
        seed: config.seed,
        count: config.count,
        languages: config.languages.clone(),
        template_ids: selected.iter().map(|t| t.id.clone()).collect(),
        template_hash: info.template_hash,
        lexicon_hash: info.lexicon_hash,
        files: datasets
            .iter()
            .map(|d| format!("{}.jsonl", d.pairing().stem()))
            .collect(),
    };
    Ok(Suite {
        manifest,
        abstracts,
        datasets,
    })
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Writes the suite into `dir`, replacing any previous content.
///
/// Files are staged in a sibling directory and moved into place at the end;
/// on failure the staging directory is removed and `dir` is left untouched.
pub fn write_suite(suite: &Suite, dir: &Path) -> Result<(), DatasetError> {
    let parent = dir.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "suite".into());
    let staging: PathBuf = parent.join(format!(".{name}.staging-{}", std::process::id()));
    let result = (|| {
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| io_error(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| io_error(&staging, e))?;
        for (dataset, file) in suite.datasets.iter().zip(&suite.manifest.files) {
            write_jsonl(dataset, &staging.join(file))?;
        }
        let manifest_path = staging.join(MANIFEST_FILE);
        let mut f = fs::File::create(&manifest_path).map_err(|e| io_error(&manifest_path, e))?;
        let json = serde_json::to_string_pretty(&suite.manifest).expect("manifest serializes");
        writeln!(f, "{json}").map_err(|e| io_error(&manifest_path, e))?;
        if dir.exists() {
            fs::remove_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
        fs::rename(&staging, dir).map_err(|e| io_error(dir, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

pub fn read_manifest(dir: &Path) -> Result<SuiteManifest, DatasetError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| io_error(&path, e))?;
    serde_json::from_str(&text).map_err(|e| io_error(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::builtin_templates;

    fn langs(codes: &[&str]) -> Vec<LanguageCode> {
        codes
            .iter()
            .map(|c| LanguageCode::new(c).unwrap())
            .collect()
    }

    #[test]
    fn quotas() {
        let q = |n| label_quotas(n).map(|(_, c)| c);
        assert_eq!(q(6), [2, 2, 2]);
        assert_eq!(q(4), [2, 1, 1]);
        assert_eq!(q(5), [2, 2, 1]);
        assert_eq!(q(999), [333, 333, 333]);
        assert_eq!(q(1000), [334, 333, 333]);
    }

    #[test]
    fn sampler_is_uniform_enough_and_in_range() {
        let mut s = Sampler::new(7);
        let mut hist = [0usize; 5];
        for _ in 0..5000 {
            hist[s.below(5)] += 1;
        }
        assert!(hist.iter().all(|&h| (800..1200).contains(&h)), "{hist:?}");
        assert_eq!(s.below(1), 0);
    }

    #[test]
    fn six_examples_balanced_and_deterministic() {
        let lex = Lexicon::seed();
        let a = generate_abstract(6, 42, &builtin_templates(), &lex).unwrap();
        let b = generate_abstract(6, 42, &builtin_templates(), &lex).unwrap();
        assert_eq!(a, b);
        let counts = label_counts(a.iter().map(|e| e.label));
        assert!(counts.values().all(|&c| c == 2));
        let c = generate_abstract(6, 43, &builtin_templates(), &lex).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn uneven_count() {
        let lex = Lexicon::seed();
        let a = generate_abstract(4, 1, &builtin_templates(), &lex).unwrap();
        let counts = label_counts(a.iter().map(|e| e.label));
        assert_eq!(counts[&Label::Entailment], 2);
        assert_eq!(counts[&Label::Contradiction], 1);
        assert_eq!(counts[&Label::Neutral], 1);
    }

    #[test]
    fn full_default_count() {
        let lex = Lexicon::seed();
        let a = generate_abstract(DEFAULT_COUNT, DEFAULT_SEED, &builtin_templates(), &lex).unwrap();
        assert_eq!(a.len(), 999);
        let counts = label_counts(a.iter().map(|e| e.label));
        assert!(counts.values().all(|&c| c == 333));
        let ids: BTreeSet<_> = a.iter().map(|e| &e.id).collect();
        assert_eq!(ids.len(), 999);
        assert!(a.windows(2).all(|w| w[0].id < w[1].id));
    }

    #[test]
    fn slot_roles_respected() {
        let lex = Lexicon::seed();
        let specific = lex.concepts_with_role(ConceptRole::Specific);
        let generic = lex.concepts_with_role(ConceptRole::Generic);
        for ex in generate_abstract(60, 3, &builtin_templates(), &lex).unwrap() {
            assert!(specific.contains(&ex.premise.subject()));
            assert!(generic.contains(&ex.premise.predicate()));
            assert!(generic.contains(&ex.hypothesis.predicate()));
        }
    }

    #[test]
    fn exhaustion_names_shortfall() {
        let lex = Lexicon::seed();
        let specific = lex.concepts_with_role(ConceptRole::Specific).len();
        let generic = lex.concepts_with_role(ConceptRole::Generic).len();
        let capacity = specific * generic;
        let err = generate_abstract(3 * (capacity + 1), 0, &builtin_templates(), &lex).unwrap_err();
        match err {
            DatasetError::Exhausted {
                label,
                requested,
                available,
            } => {
                assert_eq!(label, Label::Entailment);
                assert_eq!(requested, capacity + 1);
                assert_eq!(available, capacity);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_label_template() {
        let lex = Lexicon::seed();
        let only_two: Vec<Template> = builtin_templates().into_iter().take(2).collect();
        assert!(matches!(
            generate_abstract(6, 0, &only_two, &lex),
            Err(DatasetError::NoTemplateFor(Label::Neutral))
        ));
    }

    fn small_suite(codes: &[&str], count: usize) -> Suite {
        let lex = Lexicon::seed();
        build_suite(
            &SuiteConfig::new(langs(codes), count, 7),
            &builtin_templates(),
            &lex,
        )
        .unwrap()
    }

    #[test]
    fn pairing_realization() {
        let suite = small_suite(&["en", "de"], 9);
        let en_de = suite
            .datasets
            .iter()
            .find(|d| d.pairing().stem() == "en-de")
            .unwrap();
        let lex = Lexicon::seed();
        for (ex, abs) in en_de.examples.iter().zip(&suite.abstracts) {
            assert_eq!(ex.abstract_id, abs.id);
            assert_eq!(ex.label, abs.label);
            assert_eq!(
                ex.premise_text,
                lex.realize(&abs.premise, &langs(&["en"])[0]).unwrap()
            );
            assert_eq!(
                ex.hypothesis_text,
                lex.realize(&abs.hypothesis, &langs(&["de"])[0]).unwrap()
            );
        }
    }

    #[test]
    fn mirrored_pairings_share_labels() {
        let suite = small_suite(&["en", "fr"], 12);
        let find = |stem: &str| {
            suite
                .datasets
                .iter()
                .find(|d| d.pairing().stem() == stem)
                .unwrap()
        };
        let (en_fr, fr_en) = (find("en-fr"), find("fr-en"));
        for (a, b) in en_fr.examples.iter().zip(&fr_en.examples) {
            assert_eq!(a.abstract_id, b.abstract_id);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn suite_counts() {
        assert_eq!(small_suite(&["en", "de"], 9).datasets.len(), 4);
        let all = small_suite(&["en", "ar", "de", "fr", "hi", "sw"], 6);
        assert_eq!(all.datasets.len(), 36);
        assert_eq!(all.manifest.files.len(), 36);
    }

    #[test]
    fn suite_config_errors() {
        let lex = Lexicon::seed();
        let t = builtin_templates();
        let bad = SuiteConfig::new(langs(&["en", "xx"]), 9, 1);
        assert!(matches!(
            build_suite(&bad, &t, &lex),
            Err(DatasetError::UnknownLanguage(_))
        ));
        let dup = SuiteConfig::new(langs(&["en", "en"]), 9, 1);
        assert!(matches!(
            build_suite(&dup, &t, &lex),
            Err(DatasetError::DuplicateLanguage(_))
        ));
        let tiny = SuiteConfig::new(langs(&["en"]), 2, 1);
        assert!(matches!(
            build_suite(&tiny, &t, &lex),
            Err(DatasetError::CountTooSmall(2))
        ));
        let mut unknown = SuiteConfig::new(langs(&["en"]), 3, 1);
        unknown.template_ids = vec!["nope".into()];
        assert!(matches!(
            build_suite(&unknown, &t, &lex),
            Err(DatasetError::UnknownTemplate(_))
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let suite = small_suite(&["ar", "hi"], 9);
        for d in &suite.datasets {
            let text = d.to_jsonl();
            assert!(!text.contains('\r'));
            assert_eq!(&Dataset::from_jsonl(&text).unwrap(), d);
        }
    }

    #[test]
    fn jsonl_schema_errors() {
        let suite = small_suite(&["en"], 3);
        let text = suite.datasets[0].to_jsonl();

        let bad_label = text.replacen("\"label\":\"", "\"label\":\"maybe-", 1);
        match Dataset::from_jsonl(&bad_label) {
            Err(DatasetError::Schema { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("label"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }

        let headless: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
        match Dataset::from_jsonl(&headless) {
            Err(DatasetError::Schema { line: 1, message }) => {
                assert!(message.contains("metadata header"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }

        assert!(matches!(
            Dataset::from_jsonl(""),
            Err(DatasetError::Schema { line: 1, .. })
        ));

        let missing = text.replacen("\"template_id\":", "\"template\":", 1);
        match Dataset::from_jsonl(&missing) {
            Err(DatasetError::Schema { line: 2, message }) => {
                assert!(message.contains("template"), "{message}")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn write_suite_replaces_directory() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("suite");
        fs::create_dir_all(&target).unwrap();
        fs::write(target.join("stale.jsonl"), "x").unwrap();
        let suite = small_suite(&["en", "sw"], 6);
        write_suite(&suite, &target).unwrap();
        let mut names: Vec<String> = fs::read_dir(&target)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(
            names,
            [
                "en-en.jsonl",
                "en-sw.jsonl",
                "manifest.json",
                "sw-en.jsonl",
                "sw-sw.jsonl"
            ]
        );
        assert_eq!(read_manifest(&target).unwrap(), suite.manifest);
        let staged = fs::read_dir(dir.path()).unwrap().count();
        assert_eq!(staged, 1);
    }
}
