use std::sync::Arc;

use hrepair_core::disturbance::{classify, inject, RepairProblem};
use hrepair_core::fixtures;
use hrepair_core::hddl::{parse_domain, parse_problem, print_domain, print_problem};
use hrepair_core::model::Universe;
use hrepair_core::planner::{Planner, SearchBudget, SearchOutcome};
use hrepair_core::repair::rewrite::{compile, decode};
use hrepair_core::repair::{repair, RepairOutcome, Strategy};

fn incomparable(methods: &[&str], dist: &str) -> RepairProblem {
    let l = fixtures::INCOMPARABLE.load().unwrap();
    let u = Arc::new(Universe::new(&l.domain, &l.problem).unwrap());
    let pl = Planner::new(&l.domain, &u, SearchBudget::default());
    let SearchOutcome::Found(t, _) = pl.solve(&l.problem.init, &l.problem.tasks).unwrap() else {
        panic!()
    };
    let spec = &l
        .disturbances
        .iter()
        .find(|(n, _)| *n == dist)
        .unwrap()
        .1
        .disturbances[0];
    let d = Arc::new(l.domain.restrict_methods(methods));
    inject(d, u, &l.problem.init, &t, spec, None, 0).unwrap()
}

fn outcome(rp: &RepairProblem, s: Strategy) -> RepairOutcome {
    repair(rp, s, SearchBudget::default()).unwrap()
}

#[test]
fn rewrite_only_with_m1_m2() {
    let rp = incomparable(&["m1", "m2"], "anomaly");
    let RepairOutcome::Repaired(r) = outcome(&rp, Strategy::Rw) else {
        panic!("rw should succeed")
    };
    assert_eq!(r.full.plan().to_string(), "<(a1), (a2 y2)>");
    assert_eq!(r.t_u.plan().to_string(), "<(a2 y2)>");
    assert!(matches!(
        outcome(&rp, Strategy::Sf),
        RepairOutcome::Unrepairable
    ));
    assert!(matches!(
        outcome(&rp, Strategy::Ip),
        RepairOutcome::Unrepairable
    ));
}

#[test]
fn backtracking_only_with_m1_m3() {
    let rp = incomparable(&["m1", "m3"], "anomaly");
    assert!(matches!(
        outcome(&rp, Strategy::Rw),
        RepairOutcome::Unrepairable
    ));
    for s in [Strategy::Sf, Strategy::Ip] {
        let RepairOutcome::Repaired(r) = outcome(&rp, s) else {
            panic!("{s} should succeed")
        };
        assert_eq!(r.t_u.plan().to_string(), "<(a3)>", "{s}");
        assert!(r.t_u.tree_applicable(&rp.s_c, &rp.universe).unwrap());
        assert_eq!(r.full.plan().to_string(), "<(a1), (a3)>");
    }
}

#[test]
fn everything_succeeds_with_all_methods() {
    let rp = incomparable(&["m1", "m2", "m3"], "anomaly");
    for s in Strategy::ALL {
        assert!(matches!(outcome(&rp, s), RepairOutcome::Repaired(_)), "{s}");
    }
}

#[test]
fn noop_leaves_the_tree_alone() {
    let rp = incomparable(&["m1", "m2", "m3"], "noop");
    assert_eq!(classify(&rp).unwrap().class, 1);
    for s in Strategy::ALL {
        let RepairOutcome::Repaired(r) = outcome(&rp, s) else {
            panic!()
        };
        assert_eq!(r.t_u.plan(), rp.t_u.plan(), "{s}");
        if s != Strategy::Rw {
            assert_eq!(r.t_u, rp.t_u);
            assert_eq!(r.changed_nodes, 0);
        }
    }
}

#[test]
fn compiled_problem_prints_and_parses() {
    let rp = incomparable(&["m1", "m2", "m3"], "anomaly");
    let rw = compile(&rp).unwrap();
    let dt = print_domain(&rw.domain);
    let d = parse_domain(&dt, "rw").unwrap_or_else(|e| panic!("{e}\n{dt}"));
    assert_eq!(d, rw.domain);
    let p = parse_problem(&print_problem(&rw.problem), "rw", &d).unwrap();
    assert_eq!(p, rw.problem);
    assert_eq!(rw.prefix_len, 1);
}

#[test]
fn decode_rejects_a_foreign_prefix() {
    let rp = incomparable(&["m1", "m2", "m3"], "anomaly");
    let rw = compile(&rp).unwrap();
    let u = Universe::new(&rw.domain, &rw.problem).unwrap();
    let pl = Planner::new(&rw.domain, &u, SearchBudget::default());
    // Solving from the post-prefix marker lets the plan skip a1 entirely.
    let mut init = rw.problem.init.clone();
    init.remove(&hrepair_core::model::Atom::new(&rw.markers[0], &[]));
    init.insert(hrepair_core::model::Atom::new(&rw.markers[1], &[]));
    init.insert(hrepair_core::model::Atom::new("q", &[]));
    let e = pl.solve_all(&init, &rw.problem.tasks).unwrap();
    let bad = e
        .trees
        .iter()
        .find(|t| !t.plan().to_string().contains("a1"))
        .expect("a prefix-free plan");
    assert!(decode(&rw, bad, &rp).is_err());
}
