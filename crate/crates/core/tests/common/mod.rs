//! Reference semantics for the syllogistic fragment, checked over explicit
//! finite universes rather than region occupancy.

#![allow(dead_code)]

use std::collections::BTreeMap;

use crossnli::logic::{ConceptId, Label, Quantifier, Statement};

pub const CONCEPTS: [&str; 3] = ["A", "B", "C"];

/// Every statement over distinct concepts drawn from `A`, `B`, `C`.
pub fn all_statements() -> Vec<Statement> {
    let mut out = Vec::new();
    for q in Quantifier::ALL {
        for s in CONCEPTS {
            for p in CONCEPTS {
                if s != p {
                    out.push(Statement::new(q, s, p).unwrap());
                }
            }
        }
    }
    out
}

fn holds(q: Quantifier, s: u32, p: u32) -> bool {
    match q {
        Quantifier::All => s & !p == 0,
        Quantifier::Some => s & p != 0,
        Quantifier::No => s & p == 0,
    }
}

/// Classifies by enumerating every assignment of nonempty extensions over
/// universes of 1 to `max_universe` individuals.
pub fn brute_force_with(premise: &Statement, hypothesis: &Statement, max_universe: u32) -> Label {
    let mut index: BTreeMap<&ConceptId, usize> = BTreeMap::new();
    for c in [
        premise.subject(),
        premise.predicate(),
        hypothesis.subject(),
        hypothesis.predicate(),
    ] {
        let next = index.len();
        index.entry(c).or_insert(next);
    }
    let k = index.len();
    let (ps, pp) = (index[premise.subject()], index[premise.predicate()]);
    let (hs, hp) = (index[hypothesis.subject()], index[hypothesis.predicate()]);

    let (mut premise_models, mut hypothesis_true) = (0u64, 0u64);
    for size in 1..=max_universe {
        let subsets = 1u32 << size;
        let mut ext = vec![1u32; k];
        loop {
            if holds(premise.quantifier(), ext[ps], ext[pp]) {
                premise_models += 1;
                if holds(hypothesis.quantifier(), ext[hs], ext[hp]) {
                    hypothesis_true += 1;
                }
            }
            // odometer over nonempty subsets 1..subsets
            let mut i = 0;
            while i < k {
                ext[i] += 1;
                if ext[i] < subsets {
                    break;
                }
                ext[i] = 1;
                i += 1;
            }
            if i == k {
                break;
            }
        }
    }
    assert!(premise_models > 0, "premise {premise} has no model");
    if hypothesis_true == premise_models {
        Label::Entailment
    } else if hypothesis_true == 0 {
        Label::Contradiction
    } else {
        Label::Neutral
    }
}

pub fn brute_force(premise: &Statement, hypothesis: &Statement) -> Label {
    brute_force_with(premise, hypothesis, 4)
}
