mod common;

use common::{all_statements, brute_force};
use crossnli::logic::{classify_pair, Label, Quantifier, Statement};
use proptest::prelude::*;

#[test]
fn agrees_with_explicit_universes_on_every_pair() {
    let statements = all_statements();
    assert_eq!(statements.len(), 18);
    for p in &statements {
        for h in &statements {
            assert_eq!(classify_pair(p, h).unwrap(), brute_force(p, h), "{p} / {h}");
        }
    }
}

#[test]
fn oracle_spot_checks() {
    let st = |q, s, p| Statement::new(q, s, p).unwrap();
    use Quantifier::*;
    assert_eq!(
        brute_force(&st(All, "A", "B"), &st(Some, "A", "B")),
        Label::Entailment
    );
    assert_eq!(
        brute_force(&st(All, "A", "B"), &st(No, "A", "B")),
        Label::Contradiction
    );
    assert_eq!(
        brute_force(&st(Some, "A", "B"), &st(Some, "A", "C")),
        Label::Neutral
    );
    assert_eq!(
        brute_force(&st(All, "A", "B"), &st(Some, "B", "A")),
        Label::Entailment
    );
}

#[test]
fn larger_universes_change_nothing() {
    let statements = all_statements();
    for p in &statements {
        for h in &statements {
            assert_eq!(
                common::brute_force_with(p, h, 5),
                brute_force(p, h),
                "{p} / {h}"
            );
        }
    }
}

fn statement() -> impl Strategy<Value = Statement> {
    (0usize..18).prop_map(|i| all_statements()[i].clone())
}

fn rename(st: &Statement, names: &[String; 3]) -> Statement {
    let map = |c: &str| names[common::CONCEPTS.iter().position(|n| *n == c).unwrap()].clone();
    Statement::new(
        st.quantifier(),
        map(st.subject().as_str()),
        map(st.predicate().as_str()),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn invariant_under_renaming(
        p in statement(),
        h in statement(),
        names in prop::array::uniform3("[a-z]{1,8}")
            .prop_filter("distinct", |n| n[0] != n[1] && n[1] != n[2] && n[0] != n[2]),
    ) {
        let before = classify_pair(&p, &h).unwrap();
        let after = classify_pair(&rename(&p, &names), &rename(&h, &names)).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn contradiction_is_symmetric(p in statement(), h in statement()) {
        let forward = classify_pair(&p, &h).unwrap() == Label::Contradiction;
        let backward = classify_pair(&h, &p).unwrap() == Label::Contradiction;
        prop_assert_eq!(forward, backward);
    }

    #[test]
    fn statements_entail_themselves(p in statement()) {
        prop_assert_eq!(classify_pair(&p, &p).unwrap(), Label::Entailment);
    }
}
