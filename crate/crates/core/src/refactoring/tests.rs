use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{self, assemble, component, link, message, node, scenario};
use crate::model::EXTERNAL_ACTOR;

/// component_A and component_B on node_A, component_C on node_B.
fn abc() -> ArchModel {
    assemble(
        vec![
            component("component_A", 0.01, &[("operation_1", 0.02)]),
            component("component_B", 0.02, &[("operation_2", 0.03)]),
            component("component_C", 0.03, &[("operation_3", 0.04)]),
        ],
        vec![node("node_A", 2, 1.5), node("node_B", 1, 1.0)],
        vec![link("node_A", "node_B", 0.01)],
        vec![scenario(
            "s",
            1.0,
            fixtures::closed(5, 1.0),
            vec![
                message(EXTERNAL_ACTOR, "component_A", "operation_1", 1.0, 1),
                message("component_A", "component_B", "operation_2", 2.0, 2),
                message("component_A", "component_C", "operation_3", 3.0, 1),
            ],
        )],
        &[
            ("component_A", "node_A"),
            ("component_B", "node_A"),
            ("component_C", "node_B"),
        ],
    )
}

fn lits(c: &Condition) -> Vec<String> {
    c.iter().map(|l| l.to_string()).collect()
}

#[test]
fn clon_pre_condition() {
    let pre = RefactoringAction::clon("node_A")
        .pre_condition(&abc())
        .unwrap();
    assert_eq!(lits(&pre), vec!["exists(node_A)"]);
}

#[test]
fn mo2c_pre_condition() {
    let pre = RefactoringAction::mo2c("operation_2", "component_C")
        .pre_condition(&abc())
        .unwrap();
    let expected = Condition::from_literals([
        Literal::pos(Atom::exists_operation("operation_2")),
        Literal::pos(Atom::exists_component("component_C")),
        Literal::neg(Atom::owns("component_C", "operation_2")),
    ])
    .unwrap();
    assert_eq!(pre, expected);
}

#[test]
fn mo2n_pre_condition_names_the_owner() {
    let pre = RefactoringAction::mo2n("operation_3")
        .pre_condition(&abc())
        .unwrap();
    assert!(pre.contains(&Literal::pos(Atom::exists_operation("operation_3"))));
    assert!(pre.contains(&Literal::pos(Atom::owns("component_C", "operation_3"))));
}

#[test]
fn rede_on_missing_component_is_an_error() {
    let err = RefactoringAction::rede("component_Z")
        .pre_condition(&abc())
        .unwrap_err();
    assert!(matches!(err, RefactoringError::Unresolvable(_)));
    assert!(RefactoringAction::rede("component_Z")
        .apply(&abc(), 0)
        .is_err());
}

#[test]
fn malformed_actions_are_rejected() {
    let mut a = RefactoringAction::mo2c("operation_2", "component_C");
    a.dest = None;
    assert!(matches!(
        a.pre_condition(&abc()),
        Err(RefactoringError::Malformed(_))
    ));
}

#[test]
fn clon_duplicates_node_artifacts_and_links() {
    let base = abc();
    let m = RefactoringAction::clon("node_A").apply(&base, 0).unwrap();
    assert_eq!(m.nodes.len(), base.nodes.len() + 1);
    let clone = m.node("node_A~clon0").unwrap();
    assert_eq!(clone.multiplicity, 2);
    assert_eq!(clone.speed_factor, 1.5);
    assert!(m.link_between("node_A~clon0", "node_B").is_some());
    assert_eq!(m.artifacts_on("node_A~clon0").len(), 2);
    assert_eq!(m.group_of("component_A").len(), 2);
    assert_eq!(m.components, base.components);
    m.validate().unwrap();
}

#[test]
fn mo2c_moves_the_operation() {
    let base = abc();
    let m = RefactoringAction::mo2c("operation_2", "component_C")
        .apply(&base, 0)
        .unwrap();
    assert_eq!(m.owner_of("operation_2").unwrap().0.id, "component_C");
    assert_eq!(m.operations().count(), base.operations().count());
    assert!(m.scenarios[0]
        .messages
        .iter()
        .filter(|x| x.operation == "operation_2")
        .all(|x| x.callee == "component_C"));
    m.validate().unwrap();
}

#[test]
fn mo2n_creates_component_node_and_caller_link() {
    let base = abc();
    let m = RefactoringAction::mo2n("operation_2")
        .apply(&base, 1)
        .unwrap();
    let (owner, _) = m.owner_of("operation_2").unwrap();
    assert_eq!(owner.id, "operation_2~mo2n1");
    assert_eq!(owner.failure_prob, 0.02);
    let host = m.node_of("operation_2~mo2n1").unwrap();
    assert_eq!(host, "operation_2~mo2n1~node");
    assert_eq!(m.node(host).unwrap().speed_factor, 1.5);
    // The caller sits on node_A; the new node must be reachable from it.
    assert!(m.link_between("node_A", host).is_some());
    m.validate().unwrap();
}

#[test]
fn rede_moves_component_and_copies_neighbourhood() {
    let base = abc();
    let m = RefactoringAction::rede("component_C")
        .apply(&base, 2)
        .unwrap();
    let fresh = "component_C~rede2";
    assert_eq!(m.artifacts_on(fresh), vec!["component_C"]);
    assert!(!base.artifacts_on("node_B").is_empty());
    assert!(m.artifacts_on("node_B").is_empty());
    assert_eq!(m.neighbors(fresh), base.neighbors("node_B"));
    m.validate().unwrap();
}

#[test]
fn apply_leaves_input_untouched() {
    let base = abc();
    let copy = base.clone();
    for a in [
        RefactoringAction::clon("node_A"),
        RefactoringAction::mo2n("operation_1"),
        RefactoringAction::mo2c("operation_3", "component_B"),
        RefactoringAction::rede("component_B"),
    ] {
        let once = a.apply(&base, 0).unwrap();
        assert_eq!(base, copy);
        assert_eq!(a.apply(&base, 0).unwrap(), once);
    }
}

#[test]
fn single_action_composes_to_its_own_conditions() {
    let a = RefactoringAction::rede("component_B");
    let (pre, post) = compose_conditions(std::slice::from_ref(&a), &abc()).unwrap();
    assert_eq!(pre, a.pre_condition(&abc()).unwrap());
    assert_eq!(post, a.transition(&abc(), 0).unwrap().post);
}

#[test]
fn later_owns_clause_is_discharged_by_earlier_move() {
    // MO2N hands operation_1 to a fresh component; MO2C then moves it on.
    // The owner MO2C sees is the fresh component, whose ownership MO2N
    // established, so it does not reach the global pre-condition.
    let seq = vec![
        RefactoringAction::mo2n("operation_1"),
        RefactoringAction::mo2c("operation_1", "component_C"),
    ];
    let (pre, post) = compose_conditions(&seq, &abc()).unwrap();
    assert!(pre.contains(&Literal::pos(Atom::owns("component_A", "operation_1"))));
    assert!(!pre
        .iter()
        .any(|l| l.atom == Atom::owns("operation_1~mo2n0", "operation_1")));
    assert!(post.contains(&Literal::pos(Atom::owns("component_C", "operation_1"))));
    assert!(post.contains(&Literal::neg(Atom::owns(
        "operation_1~mo2n0",
        "operation_1"
    ))));
    assert!(is_feasible(&seq, &abc()));
}

#[test]
fn pre_literal_negated_by_earlier_post_is_a_contradiction() {
    // After the first move component_C owns operation_2, so a second move to
    // the same destination requires ¬owns(component_C, operation_2).
    let seq = vec![
        RefactoringAction::mo2c("operation_2", "component_C"),
        RefactoringAction::mo2c("operation_2", "component_C"),
    ];
    assert!(matches!(
        compose_conditions(&seq, &abc()),
        Err(RefactoringError::Contradiction(_))
    ));
    assert!(!is_feasible(&seq, &abc()));
}

#[test]
fn rede_then_clon_of_old_node_composes() {
    let seq = vec![
        RefactoringAction::rede("component_C"),
        RefactoringAction::clon("node_B"),
    ];
    assert!(compose_conditions(&seq, &abc()).is_ok());
    assert!(is_feasible(&seq, &abc()));
}

#[test]
fn empty_sequence_is_feasible() {
    assert!(is_feasible(&[], &abc()));
}

#[test]
fn clon_of_a_node_created_earlier_is_feasible() {
    let seq = vec![
        RefactoringAction::mo2n("operation_2"),
        RefactoringAction::clon("operation_2~mo2n0~node"),
    ];
    assert!(is_feasible(&seq, &abc()));
    let m = apply_all(&seq, &abc()).unwrap();
    assert_eq!(m.nodes.len(), 4);
    // The same action without its enabler is infeasible.
    assert!(!is_feasible(&seq[1..], &abc()));
}

#[test]
fn missing_target_is_infeasible() {
    assert!(!is_feasible(&[RefactoringAction::clon("node_Z")], &abc()));
    assert!(!is_feasible(
        &[RefactoringAction::mo2n("operation_9")],
        &abc()
    ));
    assert!(!is_feasible(
        &[RefactoringAction::mo2c("operation_1", "component_Z")],
        &abc()
    ));
}

#[test]
fn random_sequence_has_requested_length() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_sequence(&abc(), &mut rng, 1).unwrap();
    assert_eq!(s.len(), 1);
    assert!(s.is_feasible(&abc()));
    assert!(matches!(
        random_sequence(&abc(), &mut rng, 0),
        Err(RefactoringError::EmptyLength)
    ));
}

#[test]
fn random_sequence_is_reproducible() {
    let m = fixtures::ttbs();
    let a = random_sequence(&m, &mut ChaCha8Rng::seed_from_u64(42), 4).unwrap();
    let b = random_sequence(&m, &mut ChaCha8Rng::seed_from_u64(42), 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 4);
}

#[test]
fn single_component_model_never_draws_mo2c() {
    let m = fixtures::minimal();
    assert!(valid_actions(&m, ActionKind::MO2C).is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..200 {
        let s = random_sequence(&m, &mut rng, 1).unwrap();
        seen.insert(s.actions[0].kind);
    }
    assert!(!seen.contains(&ActionKind::MO2C));
    assert_eq!(seen.len(), 3);
}

#[test]
fn repair_fixes_orphaned_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    // The Clon target only exists after an MO2N that is no longer present.
    let broken = vec![
        RefactoringAction::rede("component_A"),
        RefactoringAction::clon("operation_2~mo2n0~node"),
        RefactoringAction::clon("node_B"),
        RefactoringAction::mo2n("operation_3"),
    ];
    assert!(!is_feasible(&broken, &abc()));
    let fixed = repair(broken.clone(), &abc(), &mut rng).unwrap();
    assert!(fixed.is_feasible(&abc()));
    assert_eq!(fixed.actions[0], broken[0]);
    assert_ne!(fixed.actions[1], broken[1]);
}

#[test]
fn sequences_round_trip_through_json() {
    let s = RefactoringSequence::new(vec![
        RefactoringAction::clon("node_A"),
        RefactoringAction::mo2c("operation_1", "component_B"),
    ]);
    let text = s.to_json();
    assert_eq!(
        text,
        r#"[{"kind":"Clon","target":"node_A"},{"kind":"MO2C","target":"operation_1","dest":"component_B"}]"#
    );
    assert_eq!(RefactoringSequence::from_json(&text).unwrap(), s);
}

fn fixture_strategy() -> impl Strategy<Value = ArchModel> {
    prop_oneof![
        Just(fixtures::ttbs()),
        Just(fixtures::cocome()),
        Just(abc())
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn feasible_sequences_apply_and_preserve_behavior(model in fixture_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = random_sequence(&model, &mut rng, 4).unwrap();
        prop_assert!(seq.is_feasible(&model));
        let out = seq.apply(&model).unwrap();
        out.validate().unwrap();
        prop_assert_eq!(out.behavior_signature(), model.behavior_signature());
    }

    #[test]
    fn clon_keeps_failure_probabilities(model in fixture_strategy(), pick in any::<prop::sample::Index>()) {
        let n = &model.nodes[pick.index(model.nodes.len())].id;
        let out = RefactoringAction::clon(n).apply(&model, 0).unwrap();
        prop_assert_eq!(out.nodes.len(), model.nodes.len() + 1);
        prop_assert_eq!(&out.components, &model.components);
    }

    #[test]
    fn every_enabled_action_applies(model in fixture_strategy()) {
        for kind in ActionKind::ALL {
            for a in valid_actions(&model, kind) {
                prop_assert!(is_feasible(std::slice::from_ref(&a), &model));
                let out = a.apply(&model, 0).unwrap();
                prop_assert_eq!(out.behavior_signature(), model.behavior_signature());
            }
        }
    }
}
