use hrepair_core::fixtures;
use hrepair_core::hddl::{parse_domain, parse_problem, tree_from_json, tree_to_json};
use hrepair_core::model::{DecompositionTree, Universe};
use hrepair_core::planner::{Planner, SearchBudget, SearchOutcome};

#[test]
fn incomparable_upper_tree_golden() {
    let l = fixtures::INCOMPARABLE.load().unwrap();
    let u = Universe::new(&l.domain, &l.problem).unwrap();
    let pl = Planner::new(&l.domain, &u, SearchBudget::default());
    let SearchOutcome::Found(t, _) = pl.solve(&l.problem.init, &l.problem.tasks).unwrap() else {
        panic!()
    };
    let golden = include_str!("golden/incomparable_tree.json");
    assert_eq!(tree_to_json(&t) + "\n", golden);
    assert_eq!(tree_from_json(golden, &l.domain).unwrap(), t);
}

#[test]
fn single_dummy_tree_golden() {
    let d = parse_domain(
        "(define (domain idle) (:requirements :hierarchy)
           (:task idle :parameters ())
           (:method skip :parameters () :task (idle) :ordered-subtasks ()))",
        "idle",
    )
    .unwrap();
    let p = parse_problem("(define (problem i) (:domain idle) (:htn :parameters () :ordered-subtasks (and (idle))) (:init))", "i", &d).unwrap();
    let u = Universe::new(&d, &p).unwrap();
    let SearchOutcome::Found(t, _) = Planner::new(&d, &u, SearchBudget::default())
        .solve(&p.init, &p.tasks)
        .unwrap()
    else {
        panic!()
    };
    let mut root = t.into_root();
    root.clear_states();
    let t = DecompositionTree::from_root(root).unwrap();
    let golden = include_str!("golden/dummy_tree.json");
    assert_eq!(tree_to_json(&t) + "\n", golden);
    assert!(t.plan().visible().is_empty());
    assert_eq!(t.plan().len(), 1);
}

#[test]
fn malformed_tree_json_is_rejected() {
    let l = fixtures::INCOMPARABLE.load().unwrap();
    for bad in [
        "",
        "[]",
        r#"{"id": 0, "kind": "task", "name": "t0"}"#,
        r#"{"id": 0, "kind": "root", "children": [{"id": 1, "kind": "task", "name": "nope"}]}"#,
        r#"{"id": 0, "kind": "root", "extra": 1}"#,
        r#"{"id": 0, "kind": "root", "children": [{"id": 1, "kind": "task", "name": "t0"}]}"#,
    ] {
        assert!(tree_from_json(bad, &l.domain).is_err(), "{bad}");
    }
}
