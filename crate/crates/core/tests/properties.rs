use std::sync::Arc;

use proptest::prelude::*;

use hrepair_core::disturbance::{classify, inject};
use hrepair_core::hddl::{parse_disturbances, tree_from_json, tree_to_json};
use hrepair_core::model::{apply_plan, DecompositionTree, NodeKind, State};
use hrepair_core::oracle::random::{micro_instance, MicroInstance};
use hrepair_core::oracle::{enumerate_class, verify_class2, Policy};
use hrepair_core::planner::{single_subtree, Planner, SearchBudget, SearchOutcome};
use hrepair_core::repair::{repair, RepairOutcome, Strategy};

fn budget() -> SearchBudget {
    SearchBudget::bounded(16, 512)
}

fn states_along(t: &DecompositionTree, s: &State, m: &MicroInstance) -> Vec<State> {
    let mut out = vec![s.clone()];
    for l in t.leaves() {
        let next = l
            .action()
            .unwrap()
            .effect
            .apply(out.last().unwrap(), &m.rp.universe)
            .unwrap();
        out.push(next);
    }
    out
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn tree_applicable_implies_plan_applicable(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        for (t, s) in [(&m.rp.tree, &m.rp.s0), (&m.rp.t_u, &m.rp.s_c)] {
            if t.tree_applicable(s, &m.rp.universe).unwrap() {
                prop_assert!(apply_plan(s, &t.plan(), &m.rp.universe).is_ok());
            }
        }
    }

    #[test]
    fn pre_star_entails_pre(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let t = &m.rp.t_u;
        let mut probes = states_along(t, &m.rp.s_c, &m);
        probes.push(m.rp.s0.clone());
        for leaf in t.leaves() {
            let star = t.pre_star(leaf.id).unwrap();
            let own = &leaf.action().unwrap().precondition;
            for s in &probes {
                if star.eval(s, &m.rp.universe).unwrap() {
                    prop_assert!(own.eval(s, &m.rp.universe).unwrap());
                }
            }
        }
    }

    #[test]
    fn split_then_graft_is_identity(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let full = m.rp.full_tree(&m.rp.t_u).unwrap();
        prop_assert_eq!(full.canonical_key(), m.rp.tree.canonical_key());
        prop_assert_eq!(full.all_ids(), m.rp.tree.all_ids());
        let mut plan = m.rp.pi_x.actions.clone();
        plan.extend(m.rp.t_u.plan().actions);
        prop_assert_eq!(plan, m.rp.tree.plan().actions);
    }

    #[test]
    fn replace_keeps_other_caches(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let t = &m.rp.tree;
        let pl = Planner::new(&m.rp.domain, &m.rp.universe, budget());
        let ids = t.all_ids();
        let Some(&target) = ids.iter().rev().find(|id| matches!(t.node(**id).unwrap().kind, NodeKind::Task(_))) else {
            return Ok(());
        };
        let task = t.node(target).unwrap().kind.task().unwrap();
        let s = t.state_before(target, &m.rp.s0, &m.rp.universe).unwrap();
        let SearchOutcome::Found(sub, _) = pl.solve(&s, std::slice::from_ref(&task)).unwrap() else {
            return Ok(());
        };
        let next = t.replace(&[target], vec![single_subtree(sub)]).unwrap();
        let inside: Vec<_> = {
            let mut v = vec![];
            fn walk(n: &hrepair_core::model::Node, v: &mut Vec<hrepair_core::model::NodeId>) {
                v.push(n.id);
                n.children.iter().for_each(|c| walk(c, v));
            }
            walk(t.node(target).unwrap(), &mut v);
            v
        };
        for id in ids.iter().filter(|id| !inside.contains(id)) {
            prop_assert_eq!(&next.node(*id).unwrap().state, &t.node(*id).unwrap().state);
        }
    }

    #[test]
    fn planner_soundness_and_determinism(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let pl = Planner::new(&m.rp.domain, &m.rp.universe, budget());
        let tasks: Vec<_> = m.rp.tree.root().children.iter().filter_map(|c| c.kind.task()).collect();
        let all = pl.solve_all(&m.rp.s0, &tasks).unwrap();
        for t in &all.trees {
            prop_assert!(t.tree_applicable(&m.rp.s0, &m.rp.universe).unwrap());
        }
        let one = |p: &Planner| match p.solve(&m.rp.s0, &tasks).unwrap() {
            SearchOutcome::Found(t, _) => Some(t),
            _ => None,
        };
        let a = one(&pl);
        let b = one(&Planner::new(&m.rp.domain, &m.rp.universe, budget()));
        prop_assert_eq!(a.as_ref().map(tree_to_json), b.as_ref().map(tree_to_json));
        if let Some(t) = &a {
            prop_assert!(all.trees.iter().any(|x| x.canonical_key() == t.canonical_key()));
        }
        let mut reversed = (*m.rp.domain).clone();
        reversed.methods.reverse();
        let rev = Planner::new(&reversed, &m.rp.universe, budget());
        prop_assert_eq!(one(&rev).is_some(), a.is_some());
    }

    #[test]
    fn tree_json_round_trip(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        for t in [&m.rp.tree, &m.rp.t_u, &m.rp.t_x] {
            let text = tree_to_json(t);
            let back = tree_from_json(&text, &m.rp.domain).unwrap();
            prop_assert_eq!(&back, t);
            prop_assert_eq!(tree_to_json(&back), text);
        }
    }

    #[test]
    fn class_flags_nest(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let r = classify(&m.rp).unwrap();
        if r.action_failure.is_some() {
            prop_assert!(r.task_failure.is_some());
        }
        prop_assert_eq!(r.class == 1, m.rp.s_c == m.rp.predicted);
    }

    #[test]
    fn empty_disturbance_is_class_one(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let text = "(define (disturbances none) (:domain micro) (:disturbance nothing :parameters () :effect () :placement random))";
        let f = parse_disturbances(text, "none", &m.rp.domain, None).unwrap();
        let rp = inject(m.rp.domain.clone(), m.rp.universe.clone(), &m.rp.s0, &m.rp.tree, &f.disturbances[0], None, seed).unwrap();
        prop_assert_eq!(classify(&rp).unwrap().class, 1);
    }

    #[test]
    fn failure_node_is_earliest_and_outermost(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let t = &m.rp.t_u;
        let states = states_along(t, &m.rp.s_c, &m);
        let spans = t.leaf_spans();
        let mut best = None;
        for id in t.all_ids() {
            let n = t.node(id).unwrap();
            if n.pruned || matches!(n.kind, NodeKind::Root | NodeKind::Task(_)) {
                continue;
            }
            let first = spans[&id].0;
            if !t.pre_star(id).unwrap().eval(&states[first], &m.rp.universe).unwrap() {
                let key = (first, t.ancestors(id).len());
                if best.map_or(true, |(k, _)| key < k) {
                    best = Some((key, id));
                }
            }
        }
        let found = t.first_tree_failure(&m.rp.s_c, &m.rp.universe).unwrap().map(|f| f.node);
        prop_assert_eq!(found, best.map(|(_, id)| id));
    }

    #[test]
    fn strategy_contracts(seed in 0u64..100_000) {
        let m = micro_instance(seed);
        let rp = &m.rp;
        let prefix = rp.pi_x.visible();
        for s in Strategy::ALL {
            let out = repair(rp, s, budget()).unwrap();
            if let RepairOutcome::Repaired(r) = &out {
                let plan = r.full.plan().visible();
                prop_assert_eq!(&plan.actions[..prefix.len()], &prefix.actions[..]);
                match s {
                    Strategy::Rw => prop_assert!(verify_class2(rp, &r.full).unwrap()),
                    Strategy::Sf => prop_assert!(r.t_u.tree_applicable(&rp.s_c, &rp.universe).unwrap()),
                    Strategy::Ip => prop_assert!(apply_plan(&rp.s_c, &r.t_u.plan(), &rp.universe).is_ok()),
                }
            }
            if s == Strategy::Rw && matches!(out, RepairOutcome::Unrepairable) {
                prop_assert!(enumerate_class(rp, 2, budget(), Policy::Ancestors).unwrap().is_empty());
            }
        }
    }
}

#[test]
fn plan_applicable_but_not_tree_applicable() {
    // A method precondition falsified at its first child: the plan runs, the tree does not.
    let d = hrepair_core::hddl::parse_domain(
        "(define (domain w) (:requirements :hierarchy :method-preconditions)
           (:predicates (p))
           (:task t :parameters ())
           (:method m :parameters () :task (t) :precondition (p) :ordered-subtasks (and (a)))
           (:action a :parameters ()))",
        "w",
    )
    .unwrap();
    let p = hrepair_core::hddl::parse_problem(
        "(define (problem w1) (:domain w) (:htn :parameters () :ordered-subtasks (and (t))) (:init (p)))",
        "w1",
        &d,
    )
    .unwrap();
    let u = Arc::new(hrepair_core::model::Universe::new(&d, &p).unwrap());
    let pl = Planner::new(&d, &u, budget());
    let SearchOutcome::Found(t, _) = pl.solve(&p.init, &p.tasks).unwrap() else {
        panic!()
    };
    let empty = State::default();
    assert!(apply_plan(&empty, &t.plan(), &u).is_ok());
    assert!(!t.tree_applicable(&empty, &u).unwrap());
}
