//! Multilingual concept lexicon and frame-based sentence realization.
//!
//! Every language declares one sentence frame per quantifier (plus optional
//! feature-guarded variants for agreement, e.g. French gender or Swahili
//! noun-class concord). Lexemes carry fully inflected plural surfaces, so
//! realization is plain slot substitution and can be inverted exactly.

mod mt;

pub use mt::{MtClient, MtConfig, TranslationPair};

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::sha256_hex;
use crate::logic::{ConceptId, Quantifier, Statement};

const SEED_LEXICON: &str = include_str!("../../assets/seed_lexicon.json");

/// Lowercase two-letter language tag such as `en` or `sw`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageCode(String);

impl LanguageCode {
    pub fn new(code: &str) -> Result<Self, LexiconError> {
        if code.len() == 2 && code.bytes().all(|b| b.is_ascii_lowercase()) {
            Ok(LanguageCode(code.to_owned()))
        } else {
            Err(LexiconError::BadLanguageCode(code.to_owned()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LanguageCode {
    type Error = LexiconError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        LanguageCode::new(&s)
    }
}

impl From<LanguageCode> for String {
    fn from(code: LanguageCode) -> String {
        code.0
    }
}

impl std::str::FromStr for LanguageCode {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LanguageCode::new(s)
    }
}

impl fmt::Display for LanguageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Placeholder role: A draws specific concepts, B and C generic ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConceptRole {
    Specific,
    Generic,
}

impl fmt::Display for ConceptRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConceptRole::Specific => "specific",
            ConceptRole::Generic => "generic",
        })
    }
}

pub type Features = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConceptEntry {
    pub id: ConceptId,
    pub role: ConceptRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lexeme {
    pub concept: ConceptId,
    pub language: LanguageCode,
    pub surface: String,
    #[serde(default)]
    pub features: Features,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub language: LanguageCode,
    pub quantifier: Quantifier,
    pub pattern: String,
    #[serde(default)]
    pub guard: Option<Features>,
}

/// On-disk lexicon document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconFile {
    pub languages: Vec<String>,
    pub concepts: Vec<ConceptEntry>,
    pub lexemes: Vec<Lexeme>,
    pub frames: Vec<FrameSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Subject,
    Predicate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub spec: FrameSpec,
    segments: Vec<Segment>,
}

impl Frame {
    fn compile(spec: FrameSpec) -> Result<Frame, String> {
        const SUBJECT: &str = "{subject}";
        const PREDICATE: &str = "{predicate}";
        let pattern = &spec.pattern;
        for slot in [SUBJECT, PREDICATE] {
            let n = pattern.matches(slot).count();
            if n != 1 {
                return Err(format!("placeholder {slot} appears {n} times"));
            }
        }
        let mut segments = Vec::new();
        let mut rest = pattern.as_str();
        while !rest.is_empty() {
            let next = [SUBJECT, PREDICATE]
                .iter()
                .filter_map(|slot| rest.find(slot).map(|at| (at, *slot)))
                .min();
            match next {
                Some((at, slot)) => {
                    if at > 0 {
                        segments.push(Segment::Literal(rest[..at].to_owned()));
                    }
                    segments.push(if slot == SUBJECT {
                        Segment::Subject
                    } else {
                        Segment::Predicate
                    });
                    rest = &rest[at + slot.len()..];
                }
                None => {
                    segments.push(Segment::Literal(rest.to_owned()));
                    rest = "";
                }
            }
        }
        let stray = segments.iter().any(|s| match s {
            Segment::Literal(l) => l.contains('{') || l.contains('}'),
            _ => false,
        });
        if stray {
            return Err("pattern contains braces other than {subject} and {predicate}".into());
        }
        Ok(Frame { spec, segments })
    }

    fn guard_matches(&self, features: &Features) -> bool {
        match &self.spec.guard {
            None => true,
            Some(guard) => guard.iter().all(|(k, v)| features.get(k) == Some(v)),
        }
    }

    fn fill(&self, subject: &str, predicate: &str) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Literal(l) => out.push_str(l),
                Segment::Subject => out.push_str(subject),
                Segment::Predicate => out.push_str(predicate),
            }
        }
        out
    }
}

/// Frames for one (language, quantifier): guarded variants plus one fallback.
#[derive(Debug, Clone, Default)]
struct FrameSet {
    guarded: Vec<Frame>,
    fallback: Vec<Frame>,
}

impl FrameSet {
    fn select(&self, features: &Features) -> Result<&Frame, usize> {
        let matching: Vec<&Frame> = self
            .guarded
            .iter()
            .filter(|f| f.guard_matches(features))
            .collect();
        match (matching.as_slice(), self.fallback.as_slice()) {
            ([one], _) => Ok(one),
            ([], [fallback]) => Ok(fallback),
            ([], _) => Err(0),
            (many, _) => Err(many.len()),
        }
    }

    fn all(&self) -> impl Iterator<Item = &Frame> {
        self.guarded.iter().chain(self.fallback.iter())
    }
}

/// One invariant violation found while loading a lexicon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LexiconIssue {
    BadLanguageCode(String),
    DuplicateLanguage(String),
    DuplicateConcept(ConceptId),
    UndeclaredConcept {
        concept: ConceptId,
        context: String,
    },
    UndeclaredLanguage {
        language: String,
        context: String,
    },
    DuplicateLexeme {
        concept: ConceptId,
        language: LanguageCode,
    },
    EmptySurface {
        concept: ConceptId,
        language: LanguageCode,
    },
    MissingLexeme {
        concept: ConceptId,
        language: LanguageCode,
    },
    DuplicateSurface {
        language: LanguageCode,
        surface: String,
    },
    FramePlaceholder {
        language: LanguageCode,
        pattern: String,
        message: String,
    },
    MissingFallbackFrame {
        language: LanguageCode,
        quantifier: Quantifier,
    },
    MultipleFallbackFrames {
        language: LanguageCode,
        quantifier: Quantifier,
    },
    AmbiguousFrames {
        language: LanguageCode,
        quantifier: Quantifier,
        concept: ConceptId,
    },
    TooFewConcepts {
        role: ConceptRole,
        found: usize,
    },
}

impl fmt::Display for LexiconIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use LexiconIssue::*;
        match self {
            BadLanguageCode(c) => write!(f, "invalid language code `{c}`"),
            DuplicateLanguage(c) => write!(f, "language `{c}` declared twice"),
            DuplicateConcept(c) => write!(f, "concept `{c}` declared twice"),
            UndeclaredConcept { concept, context } => {
                write!(f, "{context} refers to undeclared concept `{concept}`")
            }
            UndeclaredLanguage { language, context } => {
                write!(f, "{context} refers to undeclared language `{language}`")
            }
            DuplicateLexeme { concept, language } => {
                write!(f, "duplicate lexeme for ({concept}, {language})")
            }
            EmptySurface { concept, language } => {
                write!(f, "empty surface for ({concept}, {language})")
            }
            MissingLexeme { concept, language } => {
                write!(f, "coverage: missing lexeme for ({concept}, {language})")
            }
            DuplicateSurface { language, surface } => {
                write!(
                    f,
                    "surface `{surface}` used by several concepts in `{language}`"
                )
            }
            FramePlaceholder {
                language,
                pattern,
                message,
            } => write!(f, "frame `{pattern}` ({language}): {message}"),
            MissingFallbackFrame {
                language,
                quantifier,
            } => write!(f, "no guard-free frame for ({language}, {quantifier})"),
            MultipleFallbackFrames {
                language,
                quantifier,
            } => write!(
                f,
                "several guard-free frames for ({language}, {quantifier})"
            ),
            AmbiguousFrames {
                language,
                quantifier,
                concept,
            } => write!(
                f,
                "several guarded frames for ({language}, {quantifier}) match concept `{concept}`"
            ),
            TooFewConcepts { role, found } => {
                write!(f, "need at least 2 {role} concepts, found {found}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {message}")]
    Io { path: String, message: String },
    #[error("lexicon does not parse: {0}")]
    Parse(String),
    #[error("lexicon has {} problem(s):\n{}", .0.len(), render_issues(.0))]
    Invalid(Vec<LexiconIssue>),
    #[error("invalid language code `{0}`")]
    BadLanguageCode(String),
    #[error("language `{0}` is not declared in the lexicon")]
    UnknownLanguage(LanguageCode),
    #[error("no lexeme for ({concept}, {language})")]
    MissingLexeme {
        concept: ConceptId,
        language: LanguageCode,
    },
    #[error("no frame for ({language}, {quantifier})")]
    NoFrame {
        language: LanguageCode,
        quantifier: Quantifier,
    },
    #[error("`{text}` does not match any {language} frame")]
    Unparseable { language: String, text: String },
    #[error("`{text}` parses as several statements: {candidates}")]
    Ambiguous { text: String, candidates: String },
}

fn render_issues(issues: &[LexiconIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  - {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl LexiconError {
    pub fn issues(&self) -> &[LexiconIssue] {
        match self {
            LexiconError::Invalid(issues) => issues,
            _ => &[],
        }
    }
}

/// A validated, immutable lexicon.
#[derive(Debug, Clone)]
pub struct Lexicon {
    languages: Vec<LanguageCode>,
    concepts: Vec<ConceptEntry>,
    lexemes: BTreeMap<(ConceptId, LanguageCode), Lexeme>,
    frames: BTreeMap<(LanguageCode, Quantifier), FrameSet>,
    surfaces: HashMap<(LanguageCode, String), ConceptId>,
    hash: String,
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon, LexiconError> {
    let text = std::fs::read_to_string(path).map_err(|e| LexiconError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Lexicon::from_json(&text)
}

impl Lexicon {
    /// The bundled lexicon covering en, ar, de, fr, hi and sw.
    pub fn seed() -> Lexicon {
        Lexicon::from_json(SEED_LEXICON).expect("bundled lexicon is valid")
    }

    pub fn seed_json() -> &'static str {
        SEED_LEXICON
    }

    pub fn from_json(text: &str) -> Result<Lexicon, LexiconError> {
        let file: LexiconFile =
            serde_json::from_str(text).map_err(|e| LexiconError::Parse(e.to_string()))?;
        Lexicon::from_file(file)
    }

    pub fn from_file(file: LexiconFile) -> Result<Lexicon, LexiconError> {
        let hash = sha256_hex(&serde_json::to_vec(&file).expect("lexicon serializes"));
        let mut issues = Vec::new();

        let mut languages = Vec::new();
        for code in &file.languages {
            match LanguageCode::new(code) {
                Ok(l) if languages.contains(&l) => {
                    issues.push(LexiconIssue::DuplicateLanguage(code.clone()))
                }
                Ok(l) => languages.push(l),
                Err(_) => issues.push(LexiconIssue::BadLanguageCode(code.clone())),
            }
        }

        let mut concept_ids = BTreeSet::new();
        for c in &file.concepts {
            if !concept_ids.insert(c.id.clone()) {
                issues.push(LexiconIssue::DuplicateConcept(c.id.clone()));
            }
        }
        for role in [ConceptRole::Specific, ConceptRole::Generic] {
            let found = file.concepts.iter().filter(|c| c.role == role).count();
            if found < 2 {
                issues.push(LexiconIssue::TooFewConcepts { role, found });
            }
        }

        let mut lexemes = BTreeMap::new();
        let mut surfaces: HashMap<(LanguageCode, String), ConceptId> = HashMap::new();
        for lx in &file.lexemes {
            let context = format!("lexeme `{}`", lx.surface);
            if !concept_ids.contains(&lx.concept) {
                issues.push(LexiconIssue::UndeclaredConcept {
                    concept: lx.concept.clone(),
                    context: context.clone(),
                });
                continue;
            }
            if !languages.contains(&lx.language) {
                issues.push(LexiconIssue::UndeclaredLanguage {
                    language: lx.language.to_string(),
                    context,
                });
                continue;
            }
            if lx.surface.trim().is_empty() {
                issues.push(LexiconIssue::EmptySurface {
                    concept: lx.concept.clone(),
                    language: lx.language.clone(),
                });
            }
            let key = (lx.concept.clone(), lx.language.clone());
            if lexemes.contains_key(&key) {
                issues.push(LexiconIssue::DuplicateLexeme {
                    concept: key.0,
                    language: key.1,
                });
                continue;
            }
            match surfaces.entry((lx.language.clone(), lx.surface.clone())) {
                Entry::Occupied(_) => issues.push(LexiconIssue::DuplicateSurface {
                    language: lx.language.clone(),
                    surface: lx.surface.clone(),
                }),
                Entry::Vacant(slot) => {
                    slot.insert(lx.concept.clone());
                }
            }
            lexemes.insert(key, lx.clone());
        }
        for concept in &file.concepts {
            for language in &languages {
                if !lexemes.contains_key(&(concept.id.clone(), language.clone())) {
                    issues.push(LexiconIssue::MissingLexeme {
                        concept: concept.id.clone(),
                        language: language.clone(),
                    });
                }
            }
        }

        let mut frames: BTreeMap<(LanguageCode, Quantifier), FrameSet> = BTreeMap::new();
        for spec in &file.frames {
            if !languages.contains(&spec.language) {
                issues.push(LexiconIssue::UndeclaredLanguage {
                    language: spec.language.to_string(),
                    context: format!("frame `{}`", spec.pattern),
                });
                continue;
            }
            match Frame::compile(spec.clone()) {
                Ok(frame) => {
                    let set = frames
                        .entry((spec.language.clone(), spec.quantifier))
                        .or_default();
                    if spec.guard.is_some() {
                        set.guarded.push(frame);
                    } else {
                        set.fallback.push(frame);
                    }
                }
                Err(message) => issues.push(LexiconIssue::FramePlaceholder {
                    language: spec.language.clone(),
                    pattern: spec.pattern.clone(),
                    message,
                }),
            }
        }
        for language in &languages {
            for quantifier in Quantifier::ALL {
                let set = frames.get(&(language.clone(), quantifier));
                match set.map(|s| s.fallback.len()).unwrap_or(0) {
                    0 => issues.push(LexiconIssue::MissingFallbackFrame {
                        language: language.clone(),
                        quantifier,
                    }),
                    1 => {}
                    _ => issues.push(LexiconIssue::MultipleFallbackFrames {
                        language: language.clone(),
                        quantifier,
                    }),
                }
                let Some(set) = set else { continue };
                for ((concept, lang), lexeme) in &lexemes {
                    if lang != language {
                        continue;
                    }
                    let hits = set
                        .guarded
                        .iter()
                        .filter(|f| f.guard_matches(&lexeme.features))
                        .count();
                    if hits > 1 {
                        issues.push(LexiconIssue::AmbiguousFrames {
                            language: language.clone(),
                            quantifier,
                            concept: concept.clone(),
                        });
                    }
                }
            }
        }

        if !issues.is_empty() {
            return Err(LexiconError::Invalid(issues));
        }
        Ok(Lexicon {
            languages,
            concepts: file.concepts,
            lexemes,
            frames,
            surfaces,
            hash,
        })
    }

    pub fn languages(&self) -> &[LanguageCode] {
        &self.languages
    }

    pub fn has_language(&self, language: &LanguageCode) -> bool {
        self.languages.contains(language)
    }

    pub fn concepts(&self) -> &[ConceptEntry] {
        &self.concepts
    }

    /// Concepts of one role, in declaration order.
    pub fn concepts_with_role(&self, role: ConceptRole) -> Vec<&ConceptId> {
        self.concepts
            .iter()
            .filter(|c| c.role == role)
            .map(|c| &c.id)
            .collect()
    }

    pub fn lexeme(&self, concept: &ConceptId, language: &LanguageCode) -> Option<&Lexeme> {
        self.lexemes.get(&(concept.clone(), language.clone()))
    }

    /// SHA-256 of the canonical serialization, recorded in dataset metadata.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn lookup(
        &self,
        concept: &ConceptId,
        language: &LanguageCode,
    ) -> Result<&Lexeme, LexiconError> {
        self.lexeme(concept, language)
            .ok_or_else(|| LexiconError::MissingLexeme {
                concept: concept.clone(),
                language: language.clone(),
            })
    }

    /// Surface sentence for `statement` in `language`.
    pub fn realize(
        &self,
        statement: &Statement,
        language: &LanguageCode,
    ) -> Result<String, LexiconError> {
        if !self.has_language(language) {
            return Err(LexiconError::UnknownLanguage(language.clone()));
        }
        let subject = self.lookup(statement.subject(), language)?;
        let predicate = self.lookup(statement.predicate(), language)?;
        let no_frame = || LexiconError::NoFrame {
            language: language.clone(),
            quantifier: statement.quantifier(),
        };
        let frame = self
            .frames
            .get(&(language.clone(), statement.quantifier()))
            .ok_or_else(no_frame)?
            .select(&subject.features)
            .map_err(|_| no_frame())?;
        Ok(capitalize_first(
            &frame.fill(&subject.surface, &predicate.surface),
        ))
    }

    /// Recovers the statement that `realize` turned into `text` in `language`.
    pub fn parse(&self, text: &str, language: &LanguageCode) -> Result<Statement, LexiconError> {
        if !self.has_language(language) {
            return Err(LexiconError::UnknownLanguage(language.clone()));
        }
        let found = self.parse_candidates(text, language);
        match found.len() {
            0 => Err(LexiconError::Unparseable {
                language: language.to_string(),
                text: text.to_owned(),
            }),
            1 => Ok(found.into_iter().next().expect("one candidate")),
            _ => Err(ambiguous(text, found.iter())),
        }
    }

    /// Like [`Lexicon::parse`] but tries every declared language.
    pub fn parse_any(&self, text: &str) -> Result<(Statement, Vec<LanguageCode>), LexiconError> {
        let mut found: BTreeMap<Statement, Vec<LanguageCode>> = BTreeMap::new();
        for language in &self.languages {
            for st in self.parse_candidates(text, language) {
                found.entry(st).or_default().push(language.clone());
            }
        }
        match found.len() {
            0 => Err(LexiconError::Unparseable {
                language: "any".into(),
                text: text.to_owned(),
            }),
            1 => Ok(found.into_iter().next().expect("one candidate")),
            _ => Err(ambiguous(text, found.keys())),
        }
    }

    fn parse_candidates(&self, text: &str, language: &LanguageCode) -> BTreeSet<Statement> {
        let mut found = BTreeSet::new();
        for quantifier in Quantifier::ALL {
            let Some(set) = self.frames.get(&(language.clone(), quantifier)) else {
                continue;
            };
            for frame in set.all() {
                let mut splits = Vec::new();
                // a sentence-initial surface was capitalized on the way out
                let uncapitalized = lowercase_first(text);
                for variant in BTreeSet::<String>::from([text.to_owned(), uncapitalized]) {
                    self.match_segments(
                        &frame.segments,
                        &variant,
                        language,
                        None,
                        None,
                        &mut splits,
                    );
                }
                for (subject, predicate) in splits {
                    let Ok(st) = Statement::new(quantifier, subject, predicate) else {
                        continue;
                    };
                    // the guard must select this very frame for the subject
                    if self.realize(&st, language).is_ok_and(|r| r == text) {
                        found.insert(st);
                    }
                }
            }
        }
        found
    }

    fn match_segments(
        &self,
        segments: &[Segment],
        text: &str,
        language: &LanguageCode,
        subject: Option<ConceptId>,
        predicate: Option<ConceptId>,
        out: &mut Vec<(ConceptId, ConceptId)>,
    ) {
        let Some((first, rest)) = segments.split_first() else {
            if text.is_empty() {
                if let (Some(s), Some(p)) = (subject, predicate) {
                    out.push((s, p));
                }
            }
            return;
        };
        match first {
            Segment::Literal(lit) => {
                if let Some(tail) = text.strip_prefix(lit.as_str()) {
                    self.match_segments(rest, tail, language, subject, predicate, out);
                }
            }
            slot => {
                for (end, _) in text.char_indices().skip(1).chain([(text.len(), ' ')]) {
                    let key = (language.clone(), text[..end].to_owned());
                    let Some(concept) = self.surfaces.get(&key) else {
                        continue;
                    };
                    let (s, p) = if *slot == Segment::Subject {
                        (Some(concept.clone()), predicate.clone())
                    } else {
                        (subject.clone(), Some(concept.clone()))
                    };
                    self.match_segments(rest, &text[end..], language, s, p, out);
                }
            }
        }
    }
}

fn capitalize_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn lowercase_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn ambiguous<'a>(text: &str, candidates: impl Iterator<Item = &'a Statement>) -> LexiconError {
    LexiconError::Ambiguous {
        text: text.to_owned(),
        candidates: candidates
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("; "),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lang(code: &str) -> LanguageCode {
        LanguageCode::new(code).unwrap()
    }

    fn st(q: Quantifier, s: &str, p: &str) -> Statement {
        Statement::new(q, s, p).unwrap()
    }

    fn seed_file() -> LexiconFile {
        serde_json::from_str(SEED_LEXICON).unwrap()
    }

    #[test]
    fn seed_covers_six_languages() {
        let lex = Lexicon::seed();
        let codes: Vec<&str> = lex.languages().iter().map(|l| l.as_str()).collect();
        assert_eq!(codes, ["en", "ar", "de", "fr", "hi", "sw"]);
        assert!(lex.concepts_with_role(ConceptRole::Specific).len() >= 20);
        assert!(lex.concepts_with_role(ConceptRole::Generic).len() >= 6);
    }

    #[test]
    fn english_samples() {
        let lex = Lexicon::seed();
        assert_eq!(
            lex.realize(&st(Quantifier::All, "zombies", "animals"), &lang("en"))
                .unwrap(),
            "All zombies are animals."
        );
        assert_eq!(
            lex.realize(&st(Quantifier::No, "doctors", "animals"), &lang("en"))
                .unwrap(),
            "No doctors are animals."
        );
        assert_eq!(
            lex.realize(&st(Quantifier::Some, "zombies", "animals"), &lang("en"))
                .unwrap(),
            "Some zombies are animals."
        );
    }

    #[test]
    fn guards_pick_agreeing_frames() {
        let lex = Lexicon::seed();
        assert_eq!(
            lex.realize(&st(Quantifier::All, "cows", "animals"), &lang("fr"))
                .unwrap(),
            "Toutes les vaches sont des animaux."
        );
        assert_eq!(
            lex.realize(&st(Quantifier::All, "dogs", "animals"), &lang("fr"))
                .unwrap(),
            "Tous les chiens sont des animaux."
        );
        assert_eq!(
            lex.realize(&st(Quantifier::All, "trees", "organisms"), &lang("sw"))
                .unwrap(),
            "Miti yote ni viumbe hai."
        );
        assert_eq!(
            lex.realize(&st(Quantifier::No, "lions", "animals"), &lang("sw"))
                .unwrap(),
            "Hakuna simba ambao ni wanyama."
        );
    }

    #[test]
    fn missing_coverage_names_pair() {
        let mut file = seed_file();
        file.lexemes
            .retain(|l| !(l.concept.as_str() == "zombies" && l.language.as_str() == "sw"));
        let err = Lexicon::from_file(file).unwrap_err();
        assert!(err.issues().contains(&LexiconIssue::MissingLexeme {
            concept: "zombies".into(),
            language: lang("sw"),
        }));
        assert!(err.to_string().contains("(zombies, sw)"), "{err}");
    }

    #[test]
    fn frame_without_predicate_slot() {
        let mut file = seed_file();
        file.frames[0].pattern = "All {subject} are".into();
        let err = Lexicon::from_file(file).unwrap_err();
        assert!(
            err.issues()
                .iter()
                .any(|i| matches!(i, LexiconIssue::FramePlaceholder { .. })),
            "{err}"
        );
    }

    #[test]
    fn every_violation_is_listed() {
        let mut file = seed_file();
        file.frames[0].pattern = "All {subject} {subject} {predicate}".into();
        file.lexemes.push(file.lexemes[0].clone());
        file.lexemes
            .retain(|l| !(l.concept.as_str() == "cats" && l.language.as_str() == "de"));
        file.concepts
            .retain(|c| c.role == ConceptRole::Specific || c.id.as_str() == "animals");
        let err = Lexicon::from_file(file).unwrap_err();
        let issues = err.issues();
        assert!(issues
            .iter()
            .any(|i| matches!(i, LexiconIssue::DuplicateLexeme { .. })));
        assert!(issues
            .iter()
            .any(|i| matches!(i, LexiconIssue::FramePlaceholder { .. })));
        assert!(issues
            .iter()
            .any(|i| matches!(i, LexiconIssue::MissingLexeme { .. })));
        assert!(issues
            .iter()
            .any(|i| matches!(i, LexiconIssue::MissingFallbackFrame { .. })));
        assert!(issues.iter().any(|i| matches!(
            i,
            LexiconIssue::TooFewConcepts {
                role: ConceptRole::Generic,
                found: 1
            }
        )));
    }

    #[test]
    fn overlapping_guards_rejected() {
        let mut file = seed_file();
        file.frames.push(FrameSpec {
            language: lang("fr"),
            quantifier: Quantifier::All,
            pattern: "Chacune des {subject} est des {predicate}.".into(),
            guard: Some([("gender".to_string(), "f".to_string())].into()),
        });
        let err = Lexicon::from_file(file).unwrap_err();
        assert!(err
            .issues()
            .iter()
            .any(|i| matches!(i, LexiconIssue::AmbiguousFrames { .. })));
    }

    #[test]
    fn unknown_language_and_bad_code() {
        let lex = Lexicon::seed();
        assert!(matches!(
            lex.realize(&st(Quantifier::All, "cats", "animals"), &lang("xx")),
            Err(LexiconError::UnknownLanguage(_))
        ));
        assert!(LanguageCode::new("EN").is_err());
        assert!(LanguageCode::new("eng").is_err());
    }

    #[test]
    fn missing_concept_is_an_error() {
        let lex = Lexicon::seed();
        assert!(matches!(
            lex.realize(&st(Quantifier::All, "unicorns", "animals"), &lang("en")),
            Err(LexiconError::MissingLexeme { .. })
        ));
    }

    #[test]
    fn parse_inverts_realize_in_every_language() {
        let lex = Lexicon::seed();
        let ids: Vec<ConceptId> = lex.concepts().iter().map(|c| c.id.clone()).collect();
        for language in lex.languages() {
            for q in Quantifier::ALL {
                for s in &ids {
                    for p in &ids {
                        if s == p {
                            continue;
                        }
                        let statement = Statement::new(q, s, p).unwrap();
                        let text = lex.realize(&statement, language).unwrap();
                        assert!(!text.contains("{subject}") && !text.contains("{predicate}"));
                        assert_eq!(lex.parse(&text, language).unwrap(), statement, "{text}");
                    }
                }
            }
        }
    }

    #[test]
    fn parse_any_is_unambiguous_across_languages() {
        let lex = Lexicon::seed();
        let specific = lex.concepts_with_role(ConceptRole::Specific);
        let generic = lex.concepts_with_role(ConceptRole::Generic);
        for language in lex.languages() {
            for q in Quantifier::ALL {
                for s in &specific {
                    for p in &generic {
                        let statement = Statement::new(q, *s, *p).unwrap();
                        let text = lex.realize(&statement, language).unwrap();
                        let (parsed, langs) = lex.parse_any(&text).unwrap();
                        assert_eq!(parsed, statement);
                        assert!(langs.contains(language));
                    }
                }
            }
        }
    }

    #[test]
    fn parse_rejects_foreign_text() {
        let lex = Lexicon::seed();
        assert!(matches!(
            lex.parse("All unicorns are animals.", &lang("en")),
            Err(LexiconError::Unparseable { .. })
        ));
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = Lexicon::seed();
        assert_eq!(a.hash(), Lexicon::seed().hash());
        let mut file = seed_file();
        file.lexemes[0].surface.push('s');
        assert_ne!(Lexicon::from_file(file).unwrap().hash(), a.hash());
    }
}
