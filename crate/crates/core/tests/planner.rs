use hrepair_core::fixtures;
use hrepair_core::hddl::{parse_domain, parse_problem, tree_to_json};
use hrepair_core::model::{sym, Atom, Plan, State, Task, Universe};
use hrepair_core::planner::{single_subtree, Limit, Planner, SearchBudget, SearchOutcome};

fn incomparable() -> (
    hrepair_core::model::Domain,
    hrepair_core::model::Problem,
    Universe,
) {
    let l = fixtures::INCOMPARABLE.load().unwrap();
    let u = Universe::new(&l.domain, &l.problem).unwrap();
    (l.domain, l.problem, u)
}

#[test]
fn first_solution_follows_tie_break_order() {
    let (d, p, u) = incomparable();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let SearchOutcome::Found(t, trail) = pl.solve(&p.init, &p.tasks).unwrap() else {
        panic!("expected a solution")
    };
    assert_eq!(t.plan().to_string(), "<(a1), (a2 y1)>");
    assert!(t.tree_applicable(&p.init, &u).unwrap());
    t.check_structure().unwrap();
    assert_eq!(trail.points.len(), 2);
    assert_eq!(trail.points[1].task.name.as_ref(), "t1");
    assert_eq!(trail.points[1].remaining.len(), 1);
    assert_eq!(trail.points[1].remaining[0].args, vec![sym("y2")]);
}

#[test]
fn enumerates_every_solution() {
    let (d, p, u) = incomparable();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let e = pl.solve_all(&p.init, &p.tasks).unwrap();
    assert!(e.exhausted);
    let plans: Vec<String> = e.trees.iter().map(|t| t.plan().to_string()).collect();
    assert_eq!(plans, ["<(a1), (a2 y1)>", "<(a1), (a2 y2)>"]);

    let mut with_q = p.init.clone();
    with_q.insert(Atom::new("q", &[]));
    let e = pl.solve_all(&with_q, &p.tasks).unwrap();
    assert_eq!(e.trees.len(), 3);
    assert_eq!(e.trees[2].plan().to_string(), "<(a3)>");
}

#[test]
fn empty_network_and_unsolvable_network() {
    let (d, p, u) = incomparable();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let SearchOutcome::Found(t, _) = pl.solve(&p.init, &[]).unwrap() else {
        panic!()
    };
    assert_eq!(t.size(), 1);
    assert!(t.plan().is_empty());
    assert!(matches!(
        pl.solve(&State::new(), &p.tasks).unwrap(),
        SearchOutcome::Unsolvable
    ));
}

#[test]
fn restricted_methods() {
    let (d, p, u) = incomparable();
    let only_m3 = d.restrict_methods(&["m1", "m3"]);
    let pl = Planner::new(&only_m3, &u, SearchBudget::default());
    assert!(matches!(
        pl.solve(&p.init, &p.tasks).unwrap(),
        SearchOutcome::Unsolvable
    ));
}

const LOOPY: &str = "(define (domain loopy)
  (:requirements :typing :hierarchy)
  (:types loc - object)
  (:predicates (at ?l - loc) (edge ?a ?b - loc))
  (:task spin :parameters ())
  (:task go :parameters (?to - loc))
  (:method again :parameters () :task (spin) :ordered-subtasks (and (spin)))
  (:method arrived :parameters (?to - loc) :task (go ?to) :precondition (at ?to) :ordered-subtasks ())
  (:method step :parameters (?from ?mid ?to - loc) :task (go ?to)
     :precondition (and (at ?from) (edge ?from ?mid))
     :ordered-subtasks (and (move ?from ?mid) (go ?to)))
  (:action move :parameters (?a ?b - loc) :precondition (at ?a) :effect (and (not (at ?a)) (at ?b))))";

const RING: &str = "(define (problem ring) (:domain loopy) (:objects a b c - loc)
  (:htn :ordered-subtasks (and (go c)))
  (:init (at a) (edge a b) (edge b a) (edge b c)))";

#[test]
fn cycles_are_cut_without_losing_exhaustiveness() {
    let d = parse_domain(LOOPY, "loopy").unwrap();
    let p = parse_problem(RING, "ring", &d).unwrap();
    let u = Universe::new(&d, &p).unwrap();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let spin = [Task::new("spin", &[])];
    assert!(matches!(
        pl.solve(&p.init, &spin).unwrap(),
        SearchOutcome::Unsolvable
    ));
    let e = pl.solve_all(&p.init, &p.tasks).unwrap();
    assert!(e.exhausted);
    assert_eq!(e.trees[0].plan().to_string(), "<(move a b), (move b c)>");
    // a -> b -> a -> b -> c revisits (go c) in a state already seen on the branch.
    assert_eq!(e.trees.len(), 1);
}

#[test]
fn bounds_and_limits_are_reported_not_guessed() {
    let d = parse_domain(LOOPY, "loopy").unwrap();
    let p = parse_problem(RING, "ring", &d).unwrap();
    let u = Universe::new(&d, &p).unwrap();
    let shallow = Planner::new(&d, &u, SearchBudget::bounded(3, 1000));
    assert!(matches!(
        shallow.solve(&p.init, &p.tasks).unwrap(),
        SearchOutcome::LimitReached(Limit::Bound)
    ));
    let e = shallow.solve_all(&p.init, &p.tasks).unwrap();
    assert!(!e.exhausted && e.trees.is_empty());
    let small = Planner::new(&d, &u, SearchBudget::bounded(100, 4));
    assert!(matches!(
        small.solve(&p.init, &p.tasks).unwrap(),
        SearchOutcome::LimitReached(Limit::Bound)
    ));
    let stingy = Planner::new(
        &d,
        &u,
        SearchBudget {
            max_expansions: Some(1),
            ..SearchBudget::default()
        },
    );
    assert!(matches!(
        stingy.solve(&p.init, &p.tasks).unwrap(),
        SearchOutcome::LimitReached(Limit::Expansions)
    ));
    let instant = Planner::new(
        &d,
        &u,
        SearchBudget {
            time_limit: Some(std::time::Duration::ZERO),
            ..SearchBudget::default()
        },
    );
    assert!(matches!(
        instant.solve(&p.init, &p.tasks).unwrap(),
        SearchOutcome::LimitReached(Limit::Time)
    ));
}

#[test]
fn output_is_deterministic() {
    let (d, p, u) = incomparable();
    let run = || {
        let pl = Planner::new(&d, &u, SearchBudget::default());
        pl.solve_all(&p.init, &p.tasks)
            .unwrap()
            .trees
            .iter()
            .map(tree_to_json)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn resume_with_a_changed_state() {
    let (d, p, u) = incomparable();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let SearchOutcome::Found(t, trail) = pl.solve(&p.init, &p.tasks).unwrap() else {
        panic!()
    };
    let t1 = trail.points[1].node;
    let mut s = State::new();
    s.insert(Atom::new("q", &[]));
    let mut r = pl.resume_from(&trail, t1, &s, &Plan::default()).unwrap();
    let sub = single_subtree(r.next_solution().unwrap().unwrap());
    assert_eq!(sub.children[0].kind.label(), "method (m3)");
    assert!(r.next_solution().unwrap().is_none());

    let mut again = pl
        .resume_from(&trail, t.root().id, &p.init, &Plan::default())
        .unwrap();
    assert_eq!(again.next_solution().unwrap().unwrap(), t);

    let executed = t.plan();
    assert!(pl.resume_from(&trail, t1, &s, &executed).is_err());
    let wrong = Plan::new(vec![executed.actions[1].clone()]);
    assert!(pl.resume_from(&trail, t1, &s, &wrong).is_err());
}

#[test]
fn trail_from_loaded_tree_matches_search_trail() {
    let (d, p, u) = incomparable();
    let pl = Planner::new(&d, &u, SearchBudget::default());
    let SearchOutcome::Found(t, trail) = pl.solve(&p.init, &p.tasks).unwrap() else {
        panic!()
    };
    let rebuilt = hrepair_core::planner::Trail::from_tree(&t, &p.init, &pl).unwrap();
    let key = |tr: &hrepair_core::planner::Trail| {
        tr.points
            .iter()
            .map(|x| {
                (
                    x.node,
                    x.task.clone(),
                    x.remaining.len(),
                    x.first_leaf,
                    x.last_leaf,
                )
            })
            .collect::<Vec<_>>()
    };
    assert_eq!(key(&rebuilt), key(&trail));
}
