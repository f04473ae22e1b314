//! Quantified statements over category terms and a model-checking classifier.
//!
//! A model is represented by which Venn regions of the involved concepts are
//! nonempty. Truth of `ALL`/`SOME`/`NO` statements depends only on region
//! occupancy, so enumerating every occupancy pattern over at most three
//! concepts (at most 2^8 patterns) decides entailment exactly.
//!
//! Every concept is assumed to denote a nonempty set (existential import),
//! which is what makes "All A are B" entail "Some A are B".

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{sha256_hex, short_hash};

/// Largest number of distinct concepts a premise–hypothesis pair may use.
pub const MAX_CONCEPTS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("statement uses the same concept `{0}` as subject and predicate")]
    SameConcept(ConceptId),
    #[error("concept `{0}` is not part of the occupancy's concept set")]
    UnknownConcept(ConceptId),
    #[error("pair uses {found} distinct concepts; at most {MAX_CONCEPTS} are supported")]
    UnsupportedArity { found: usize },
    #[error("occupancy lists a concept more than once")]
    DuplicateConcept,
    #[error("premise `{0}` has no model")]
    UnsatisfiablePremise(Statement),
    #[error("template `{template}`: slot {slot} is not bound")]
    PartialBinding { template: String, slot: SlotVar },
    #[error("template `{template}`: concept `{concept}` is bound to more than one slot")]
    RepeatedConcept {
        template: String,
        concept: ConceptId,
    },
    #[error("template `{template}` declares {declared} but classifies as {classified}")]
    TemplateInconsistent {
        template: String,
        declared: Label,
        classified: Label,
    },
    #[error("template `{template}`: {message}")]
    MalformedTemplate { template: String, message: String },
    #[error("duplicate template id `{0}`")]
    DuplicateTemplate(String),
    #[error("cannot read template file {path}: {message}")]
    TemplateFile { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quantifier {
    All,
    Some,
    No,
}

impl Quantifier {
    pub const ALL: [Quantifier; 3] = [Quantifier::All, Quantifier::Some, Quantifier::No];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantifier::All => "all",
            Quantifier::Some => "some",
            Quantifier::No => "no",
        }
    }
}

impl fmt::Display for Quantifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantifier::All => "ALL",
            Quantifier::Some => "SOME",
            Quantifier::No => "NO",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Contradiction,
    Neutral,
}

impl Label {
    /// Canonical order, also the order in which surplus examples are assigned.
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }

    /// The answer word used in prompts: `Entailment`, `Contradiction`, `Neutral`.
    pub fn answer_word(self) -> &'static str {
        match self {
            Label::Entailment => "Entailment",
            Label::Contradiction => "Contradiction",
            Label::Neutral => "Neutral",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Entailment => "ENTAILMENT",
            Label::Contradiction => "CONTRADICTION",
            Label::Neutral => "NEUTRAL",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(Label::Entailment),
            "contradiction" => Ok(Label::Contradiction),
            "neutral" => Ok(Label::Neutral),
            other => Err(format!(
                "unknown label `{other}` (expected entailment, contradiction or neutral)"
            )),
        }
    }
}

/// Identifier of a category term, e.g. `zombies`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(String);

impl ConceptId {
    pub fn new(id: impl Into<String>) -> Self {
        ConceptId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ConceptId {
    fn from(s: &str) -> Self {
        ConceptId(s.to_owned())
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// `quantifier subject predicate`, e.g. `ALL zombies animals`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Statement {
    quantifier: Quantifier,
    subject: ConceptId,
    predicate: ConceptId,
}

impl Statement {
    pub fn new(
        quantifier: Quantifier,
        subject: impl Into<ConceptId>,
        predicate: impl Into<ConceptId>,
    ) -> Result<Self, LogicError> {
        let subject = subject.into();
        let predicate = predicate.into();
        if subject == predicate {
            return Err(LogicError::SameConcept(subject));
        }
        Ok(Statement {
            quantifier,
            subject,
            predicate,
        })
    }

    pub fn quantifier(&self) -> Quantifier {
        self.quantifier
    }

    pub fn subject(&self) -> &ConceptId {
        &self.subject
    }

    pub fn predicate(&self) -> &ConceptId {
        &self.predicate
    }
}

impl From<String> for ConceptId {
    fn from(s: String) -> Self {
        ConceptId(s)
    }
}

impl From<&ConceptId> for ConceptId {
    fn from(c: &ConceptId) -> Self {
        c.clone()
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.quantifier, self.subject, self.predicate)
    }
}

/// A model of up to three concepts given by its nonempty Venn regions.
///
/// Region `r` is the intersection where concept `i` is included iff bit `i`
/// of `r` is set; region 0 lies outside every concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Occupancy {
    concepts: Vec<ConceptId>,
    occupied: u8,
}

impl Occupancy {
    /// `regions` lists occupied regions as membership bitmasks over `concepts`.
    pub fn new(
        concepts: Vec<ConceptId>,
        regions: impl IntoIterator<Item = u8>,
    ) -> Result<Self, LogicError> {
        check_concepts(&concepts)?;
        let region_count = 1u16 << concepts.len();
        let mut occupied = 0u8;
        for region in regions {
            assert!(
                u16::from(region) < region_count,
                "region {region} out of range for {} concepts",
                concepts.len()
            );
            occupied |= 1 << region;
        }
        Ok(Occupancy { concepts, occupied })
    }

    pub fn concepts(&self) -> &[ConceptId] {
        &self.concepts
    }

    fn index_of(&self, concept: &ConceptId) -> Result<usize, LogicError> {
        self.concepts
            .iter()
            .position(|c| c == concept)
            .ok_or_else(|| LogicError::UnknownConcept(concept.clone()))
    }

    /// True when every concept occupies at least one region.
    pub fn has_existential_import(&self) -> bool {
        (0..self.concepts.len()).all(|i| self.regions().any(|r| r & (1 << i) != 0))
    }

    fn regions(&self) -> impl Iterator<Item = u8> + '_ {
        (0..(1u16 << self.concepts.len()))
            .map(|r| r as u8)
            .filter(|r| self.occupied & (1 << r) != 0)
    }
}

fn check_concepts(concepts: &[ConceptId]) -> Result<(), LogicError> {
    if concepts.len() > MAX_CONCEPTS {
        return Err(LogicError::UnsupportedArity {
            found: concepts.len(),
        });
    }
    let distinct: BTreeSet<_> = concepts.iter().collect();
    if distinct.len() != concepts.len() {
        return Err(LogicError::DuplicateConcept);
    }
    Ok(())
}

/// Truth of `statement` in the model described by `occupancy`.
pub fn semantics(statement: &Statement, occupancy: &Occupancy) -> Result<bool, LogicError> {
    let s = 1u8 << occupancy.index_of(&statement.subject)?;
    let p = 1u8 << occupancy.index_of(&statement.predicate)?;
    Ok(eval_masks(
        statement.quantifier,
        s,
        p,
        occupancy.occupied,
        occupancy.concepts.len(),
    ))
}

fn eval_masks(q: Quantifier, s: u8, p: u8, occupied: u8, k: usize) -> bool {
    let mut overlap = false;
    let mut escapes = false;
    for r in 0..(1u16 << k) {
        let r = r as u8;
        if occupied & (1 << r) == 0 || r & s == 0 {
            continue;
        }
        if r & p != 0 {
            overlap = true;
        } else {
            escapes = true;
        }
    }
    match q {
        Quantifier::All => !escapes,
        Quantifier::Some => overlap,
        Quantifier::No => !overlap,
    }
}

/// Label of `hypothesis` relative to `premise` under existential import.
pub fn classify_pair(premise: &Statement, hypothesis: &Statement) -> Result<Label, LogicError> {
    let mut concepts: Vec<&ConceptId> = Vec::with_capacity(4);
    for c in [
        &premise.subject,
        &premise.predicate,
        &hypothesis.subject,
        &hypothesis.predicate,
    ] {
        if !concepts.contains(&c) {
            concepts.push(c);
        }
    }
    let k = concepts.len();
    if k > MAX_CONCEPTS {
        return Err(LogicError::UnsupportedArity { found: k });
    }
    let mask = |c: &ConceptId| 1u8 << concepts.iter().position(|x| *x == c).unwrap();
    let (ps, pp) = (mask(&premise.subject), mask(&premise.predicate));
    let (hs, hp) = (mask(&hypothesis.subject), mask(&hypothesis.predicate));

    let regions = 1u32 << k;
    let mut premise_models = 0usize;
    let mut hypothesis_true = false;
    let mut hypothesis_false = false;
    for occupied in 0..(1u32 << regions) {
        let occupied = occupied as u8;
        let imported =
            (0..k).all(|i| (0..regions).any(|r| occupied & (1 << r) != 0 && r & (1 << i) != 0));
        if !imported || !eval_masks(premise.quantifier, ps, pp, occupied, k) {
            continue;
        }
        premise_models += 1;
        if eval_masks(hypothesis.quantifier, hs, hp, occupied, k) {
            hypothesis_true = true;
        } else {
            hypothesis_false = true;
        }
    }

    if premise_models == 0 {
        return Err(LogicError::UnsatisfiablePremise(premise.clone()));
    }
    Ok(match (hypothesis_true, hypothesis_false) {
        (true, false) => Label::Entailment,
        (false, true) => Label::Contradiction,
        _ => Label::Neutral,
    })
}

/// Template placeholder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SlotVar {
    A,
    B,
    C,
}

impl SlotVar {
    pub const ALL: [SlotVar; 3] = [SlotVar::A, SlotVar::B, SlotVar::C];
}

impl fmt::Display for SlotVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SlotVar::A => "A",
            SlotVar::B => "B",
            SlotVar::C => "C",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplatePattern {
    pub quantifier: Quantifier,
    pub subject_slot: SlotVar,
    pub predicate_slot: SlotVar,
}

impl TemplatePattern {
    pub fn new(quantifier: Quantifier, subject_slot: SlotVar, predicate_slot: SlotVar) -> Self {
        TemplatePattern {
            quantifier,
            subject_slot,
            predicate_slot,
        }
    }

    fn bind(&self, binding: &Binding) -> Option<Result<Statement, LogicError>> {
        let subject = binding.get(self.subject_slot)?;
        let predicate = binding.get(self.predicate_slot)?;
        Some(Statement::new(self.quantifier, subject, predicate))
    }
}

/// A premise–hypothesis pattern over slots with the label it is meant to encode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Template {
    pub id: String,
    pub premise: TemplatePattern,
    pub hypothesis: TemplatePattern,
    #[serde(rename = "label")]
    pub declared_label: Label,
}

impl Template {
    /// Slots referenced by either pattern, in A, B, C order.
    pub fn slots(&self) -> Vec<SlotVar> {
        let used: BTreeSet<SlotVar> = [
            self.premise.subject_slot,
            self.premise.predicate_slot,
            self.hypothesis.subject_slot,
            self.hypothesis.predicate_slot,
        ]
        .into_iter()
        .collect();
        used.into_iter().collect()
    }
}

/// Assignment of concepts to template slots.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Binding(BTreeMap<SlotVar, ConceptId>);

impl Binding {
    pub fn new() -> Self {
        Binding::default()
    }

    pub fn with(mut self, slot: SlotVar, concept: impl Into<ConceptId>) -> Self {
        self.0.insert(slot, concept.into());
        self
    }

    pub fn insert(&mut self, slot: SlotVar, concept: ConceptId) {
        self.0.insert(slot, concept);
    }

    pub fn get(&self, slot: SlotVar) -> Option<&ConceptId> {
        self.0.get(&slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SlotVar, &ConceptId)> {
        self.0.iter().map(|(s, c)| (*s, c))
    }
}

impl<C: Into<ConceptId>> FromIterator<(SlotVar, C)> for Binding {
    fn from_iter<I: IntoIterator<Item = (SlotVar, C)>>(iter: I) -> Self {
        Binding(iter.into_iter().map(|(s, c)| (s, c.into())).collect())
    }
}

/// A verified instantiation of a template over concrete concepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbstractExample {
    /// Content hash of (template id, binding); stable across regenerations.
    pub id: String,
    pub premise: Statement,
    pub hypothesis: Statement,
    pub label: Label,
    pub template_id: String,
}

/// Stable id for a (template, binding) combination.
pub fn example_id(template_id: &str, binding: &Binding) -> String {
    let mut material = String::from(template_id);
    for (slot, concept) in binding.iter() {
        material.push('\u{0}');
        material.push_str(&format!("{slot}={concept}"));
    }
    short_hash(material.as_bytes())
}

/// Binds the template's slots and checks the declared label against the classifier.
pub fn instantiate(template: &Template, binding: &Binding) -> Result<AbstractExample, LogicError> {
    let slots = template.slots();
    for slot in &slots {
        if binding.get(*slot).is_none() {
            return Err(LogicError::PartialBinding {
                template: template.id.clone(),
                slot: *slot,
            });
        }
    }
    let mut seen = BTreeSet::new();
    for slot in &slots {
        let concept = binding.get(*slot).expect("checked above");
        if !seen.insert(concept) {
            return Err(LogicError::RepeatedConcept {
                template: template.id.clone(),
                concept: concept.clone(),
            });
        }
    }

    let premise = template.premise.bind(binding).expect("slots bound")?;
    let hypothesis = template.hypothesis.bind(binding).expect("slots bound")?;
    let classified = classify_pair(&premise, &hypothesis)?;
    if classified != template.declared_label {
        return Err(LogicError::TemplateInconsistent {
            template: template.id.clone(),
            declared: template.declared_label,
            classified,
        });
    }
    // only the slots the template uses contribute to the id
    let used: Binding = slots
        .iter()
        .map(|s| (*s, binding.get(*s).expect("checked above").clone()))
        .collect();
    Ok(AbstractExample {
        id: example_id(&template.id, &used),
        premise,
        hypothesis,
        label: classified,
        template_id: template.id.clone(),
    })
}

/// Checks that a template's declared label is what the classifier derives.
///
/// Slots map injectively to concepts, so classifying over the slot names
/// themselves decides every instantiation at once.
pub fn validate_template(template: &Template) -> Result<(), LogicError> {
    for (side, pattern) in [
        ("premise", &template.premise),
        ("hypothesis", &template.hypothesis),
    ] {
        if pattern.subject_slot == pattern.predicate_slot {
            return Err(LogicError::MalformedTemplate {
                template: template.id.clone(),
                message: format!("{side} uses slot {} twice", pattern.subject_slot),
            });
        }
    }
    let fresh: Binding = SlotVar::ALL
        .iter()
        .map(|s| (*s, ConceptId::new(format!("slot-{s}"))))
        .collect();
    instantiate(template, &fresh).map(|_| ())
}

/// The three templates: entailment, contradiction and neutral.
pub fn builtin_templates() -> Vec<Template> {
    use Quantifier::*;
    use SlotVar::*;
    let templates = vec![
        Template {
            id: "entailment-all-some".into(),
            premise: TemplatePattern::new(All, A, B),
            hypothesis: TemplatePattern::new(Some, A, B),
            declared_label: Label::Entailment,
        },
        Template {
            id: "contradiction-all-no".into(),
            premise: TemplatePattern::new(All, A, B),
            hypothesis: TemplatePattern::new(No, A, B),
            declared_label: Label::Contradiction,
        },
        Template {
            id: "neutral-some-some".into(),
            premise: TemplatePattern::new(Some, A, B),
            hypothesis: TemplatePattern::new(Some, A, C),
            declared_label: Label::Neutral,
        },
    ];
    for t in &templates {
        validate_template(t).expect("builtin template is consistent");
    }
    templates
}

/// Parses a template file and validates every template in it.
///
/// Returns every template error found, not just the first.
pub fn parse_templates(json: &str) -> Result<Vec<Template>, Vec<LogicError>> {
    let templates: Vec<Template> = serde_json::from_str(json).map_err(|e| {
        vec![LogicError::TemplateFile {
            path: "<input>".into(),
            message: e.to_string(),
        }]
    })?;
    let mut errors = Vec::new();
    let mut ids = BTreeSet::new();
    for t in &templates {
        if !ids.insert(t.id.as_str()) {
            errors.push(LogicError::DuplicateTemplate(t.id.clone()));
        }
        if let Err(e) = validate_template(t) {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(templates)
    } else {
        Err(errors)
    }
}

pub fn load_templates(path: &Path) -> Result<Vec<Template>, Vec<LogicError>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        vec![LogicError::TemplateFile {
            path: path.display().to_string(),
            message: e.to_string(),
        }]
    })?;
    parse_templates(&text).map_err(|errs| {
        errs.into_iter()
            .map(|e| match e {
                LogicError::TemplateFile { message, .. } => LogicError::TemplateFile {
                    path: path.display().to_string(),
                    message,
                },
                other => other,
            })
            .collect()
    })
}

/// Hash of a template set, recorded in dataset metadata.
pub fn template_hash(templates: &[Template]) -> String {
    let canonical = serde_json::to_vec(templates).expect("templates serialize");
    sha256_hex(&canonical)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Quantifier::*;

    fn st(q: Quantifier, s: &str, p: &str) -> Statement {
        Statement::new(q, s, p).unwrap()
    }

    fn ab() -> Vec<ConceptId> {
        vec!["A".into(), "B".into()]
    }

    #[test]
    fn semantics_examples() {
        // regions over [A, B]: bit0 = A, bit1 = B
        let a_and_b = Occupancy::new(ab(), [0b11]).unwrap();
        assert!(semantics(&st(All, "A", "B"), &a_and_b).unwrap());
        assert!(!semantics(&st(No, "A", "B"), &a_and_b).unwrap());

        let disjoint = Occupancy::new(ab(), [0b01, 0b10]).unwrap();
        assert!(!semantics(&st(Some, "A", "B"), &disjoint).unwrap());
    }

    #[test]
    fn semantics_unknown_concept() {
        let occ = Occupancy::new(ab(), [0b11]).unwrap();
        assert_eq!(
            semantics(&st(All, "A", "Z"), &occ),
            Err(LogicError::UnknownConcept("Z".into()))
        );
    }

    #[test]
    fn occupancy_import() {
        assert!(Occupancy::new(ab(), [0b11])
            .unwrap()
            .has_existential_import());
        assert!(!Occupancy::new(ab(), [0b01])
            .unwrap()
            .has_existential_import());
    }

    #[test]
    fn figure_template_cards() {
        assert_eq!(
            classify_pair(&st(All, "A", "B"), &st(Some, "A", "B")).unwrap(),
            Label::Entailment
        );
        assert_eq!(
            classify_pair(&st(All, "A", "B"), &st(No, "A", "B")).unwrap(),
            Label::Contradiction
        );
        assert_eq!(
            classify_pair(&st(Some, "A", "B"), &st(Some, "A", "C")).unwrap(),
            Label::Neutral
        );
    }

    #[test]
    fn derived_pairs() {
        assert_eq!(
            classify_pair(&st(Some, "A", "B"), &st(No, "A", "B")).unwrap(),
            Label::Contradiction
        );
        // conversion per accidens holds under existential import
        assert_eq!(
            classify_pair(&st(All, "A", "B"), &st(Some, "B", "A")).unwrap(),
            Label::Entailment
        );
        assert_eq!(
            classify_pair(&st(No, "A", "B"), &st(All, "A", "B")).unwrap(),
            Label::Contradiction
        );
    }

    #[test]
    fn reflexive() {
        for q in Quantifier::ALL {
            let p = st(q, "x", "y");
            assert_eq!(classify_pair(&p, &p).unwrap(), Label::Entailment);
        }
    }

    #[test]
    fn four_concepts_rejected() {
        assert_eq!(
            classify_pair(&st(All, "A", "B"), &st(Some, "C", "D")),
            Err(LogicError::UnsupportedArity { found: 4 })
        );
    }

    #[test]
    fn same_concept_statement_rejected() {
        assert!(matches!(
            Statement::new(All, "x", "x"),
            Err(LogicError::SameConcept(_))
        ));
    }

    #[test]
    fn instantiate_samples() {
        let templates = builtin_templates();
        let ex = instantiate(
            &templates[0],
            &Binding::new()
                .with(SlotVar::A, "zombies")
                .with(SlotVar::B, "animals"),
        )
        .unwrap();
        assert_eq!(ex.premise, st(All, "zombies", "animals"));
        assert_eq!(ex.hypothesis, st(Some, "zombies", "animals"));
        assert_eq!(ex.label, Label::Entailment);

        let ex = instantiate(
            &templates[1],
            &Binding::new()
                .with(SlotVar::A, "doctors")
                .with(SlotVar::B, "animals"),
        )
        .unwrap();
        assert_eq!(ex.premise, st(All, "doctors", "animals"));
        assert_eq!(ex.hypothesis, st(No, "doctors", "animals"));
        assert_eq!(ex.label, Label::Contradiction);
    }

    #[test]
    fn instantiate_rejects_bad_bindings() {
        let t = &builtin_templates()[0];
        let repeated = Binding::new().with(SlotVar::A, "x").with(SlotVar::B, "x");
        assert!(matches!(
            instantiate(t, &repeated),
            Err(LogicError::RepeatedConcept { .. })
        ));
        let partial = Binding::new().with(SlotVar::A, "x");
        assert!(matches!(
            instantiate(t, &partial),
            Err(LogicError::PartialBinding {
                slot: SlotVar::B,
                ..
            })
        ));
    }

    #[test]
    fn example_id_ignores_unused_slots() {
        let t = &builtin_templates()[0];
        let b = Binding::new()
            .with(SlotVar::A, "cats")
            .with(SlotVar::B, "animals");
        let extra = b.clone().with(SlotVar::C, "organisms");
        assert_eq!(
            instantiate(t, &b).unwrap().id,
            instantiate(t, &extra).unwrap().id
        );
    }

    #[test]
    fn builtin_set() {
        let templates = builtin_templates();
        assert_eq!(templates.len(), 3);
        let labels: BTreeSet<_> = templates.iter().map(|t| t.declared_label).collect();
        assert_eq!(labels.len(), 3);
        for t in &templates {
            validate_template(t).unwrap();
        }
    }

    #[test]
    fn validate_rejects_mislabeled_conversion() {
        let t = Template {
            id: "conversion".into(),
            premise: TemplatePattern::new(All, SlotVar::A, SlotVar::B),
            hypothesis: TemplatePattern::new(Some, SlotVar::B, SlotVar::A),
            declared_label: Label::Neutral,
        };
        assert_eq!(
            validate_template(&t),
            Err(LogicError::TemplateInconsistent {
                template: "conversion".into(),
                declared: Label::Neutral,
                classified: Label::Entailment,
            })
        );
        let identity = Template {
            id: "identity".into(),
            premise: TemplatePattern::new(All, SlotVar::A, SlotVar::B),
            hypothesis: TemplatePattern::new(All, SlotVar::A, SlotVar::B),
            declared_label: Label::Entailment,
        };
        assert_eq!(validate_template(&identity), Ok(()));
    }

    #[test]
    fn template_file_round_trip() {
        let json = serde_json::to_string(&builtin_templates()).unwrap();
        assert!(json.contains(r#""quantifier":"all""#));
        assert!(json.contains(r#""label":"entailment""#));
        assert_eq!(parse_templates(&json).unwrap(), builtin_templates());
    }

    #[test]
    fn template_file_reports_every_problem() {
        let json = r#"[
            {"id": "t", "premise": {"quantifier": "all", "subject_slot": "A", "predicate_slot": "B"},
             "hypothesis": {"quantifier": "some", "subject_slot": "B", "predicate_slot": "A"}, "label": "neutral"},
            {"id": "t", "premise": {"quantifier": "all", "subject_slot": "A", "predicate_slot": "A"},
             "hypothesis": {"quantifier": "some", "subject_slot": "A", "predicate_slot": "B"}, "label": "entailment"}
        ]"#;
        let errors = parse_templates(json).unwrap_err();
        assert_eq!(errors.len(), 3, "{errors:?}");
    }
}
