use hrepair_core::fixtures;
use hrepair_core::hddl::{
    parse_disturbances, parse_domain, parse_problem, print_disturbances, print_domain,
    print_problem, ParseErrorKind, Placement,
};

#[test]
fn bundled_files_round_trip() {
    for b in fixtures::ALL {
        let l = b.load().unwrap_or_else(|e| panic!("{}: {e}", b.name));
        l.domain.validate().unwrap();
        let printed = print_domain(&l.domain);
        let again = parse_domain(&printed, "printed")
            .unwrap_or_else(|e| panic!("{}: {e}\n{printed}", b.name));
        assert_eq!(again, l.domain, "{}", b.name);
        assert_eq!(print_domain(&again), printed);

        let printed = print_problem(&l.problem);
        let again = parse_problem(&printed, "printed", &l.domain).unwrap();
        assert_eq!(again, l.problem, "{}", b.name);

        for (_, f) in &l.disturbances {
            let printed = print_disturbances(f);
            let again =
                parse_disturbances(&printed, "printed", &l.domain, Some(&l.problem)).unwrap();
            assert_eq!(&again, f, "{}", b.name);
        }
    }
}

const MINI: &str = "(define (domain d)
  (:requirements :typing :hierarchy)
  (:types loc - object)
  (:predicates (at ?l - loc) (seen ?l - loc))
  (:task go :parameters (?l - loc))
  (:method empty :parameters (?l - loc) :task (go ?l) :precondition (at ?l) :ordered-subtasks ())
  (:method step :parameters (?a ?b - loc) :task (go ?b)
     :precondition (and (at ?a) (not (at ?b)))
     :ordered-subtasks (and (t1 (move ?a ?b)) (t2 (go ?b))))
  (:action move :parameters (?a ?b - loc)
     :precondition (at ?a)
     :effect (and (not (at ?a)) (at ?b)
                  (forall (?x - loc) (when (seen ?x) (not (seen ?x))))
                  (when (seen ?b) (seen ?a)))))";

fn kind(text: &str) -> ParseErrorKind {
    parse_domain(text, "t").unwrap_err().kind
}

#[test]
fn mini_domain_parses_and_normalizes_effects() {
    let d = parse_domain(MINI, "mini.hddl").unwrap();
    d.validate().unwrap();
    assert_eq!(d.methods[0].subtasks.len(), 0);
    assert_eq!(d.methods[1].subtasks.len(), 2);
    let mv = d.action("move").unwrap();
    assert_eq!(mv.effect.branches.len(), 3);
    assert_eq!(mv.effect.branches[0].deletes.len(), 1);
    assert_eq!(mv.effect.branches[0].adds.len(), 1);
    assert_eq!(mv.effect.branches[1].vars.len(), 1);
    assert_eq!(mv.span.line, 10);
    let again = parse_domain(&print_domain(&d), "p").unwrap();
    assert_eq!(again, d);
}

#[test]
fn distinct_error_kinds() {
    assert!(matches!(
        kind("(define (domain d)"),
        ParseErrorKind::Lexical(_)
    ));
    assert!(matches!(
        kind(
            "(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (p x)))"
        ),
        ParseErrorKind::Arity { .. }
    ));
    assert!(matches!(
        kind("(define (domain d) (:action a :parameters () :precondition (p)))"),
        ParseErrorKind::Undeclared { .. }
    ));
    assert!(matches!(
        kind(
            "(define (domain d) (:task t :parameters ()) (:action a :parameters ())
              (:method m :parameters () :task (t) :subtasks (and (a) (a))))"
        ),
        ParseErrorKind::Unsupported(_)
    ));
    assert!(matches!(
        kind("(define (domain d) (:task t :parameters ()) (:action a :parameters ())
              (:method m :parameters () :task (t) :ordered-subtasks (and (x1 (a)) (x2 (a))) :ordering (and (< x1 x2))))"),
        ParseErrorKind::Unsupported(_)
    ));
    assert!(matches!(
        kind("(define (domain d) (:requirements :fluents))"),
        ParseErrorKind::Unsupported(_)
    ));
    assert!(matches!(
        kind("(define (domain d) (:predicates (p)) (:action a :parameters () :precondition (or (p) (p))))"),
        ParseErrorKind::Unsupported(_)
    ));
    assert!(matches!(
        kind("(define (domain d) (:action __dummy :parameters ()))"),
        ParseErrorKind::Unsupported(_)
    ));
}

#[test]
fn errors_point_at_the_offending_construct() {
    let e = parse_domain("(define (domain d)\n  (:predicates (p))\n  (:action a :parameters ()\n    :precondition (q)))", "f.hddl")
        .unwrap_err();
    assert_eq!(
        (e.span.file.as_str(), e.span.line, e.span.column),
        ("f.hddl", 4, 20)
    );
    assert_eq!(e.to_string(), "f.hddl:4:20: undeclared predicate `q`");
}

#[test]
fn problem_errors() {
    let d = parse_domain(MINI, "mini").unwrap();
    let ok = "(define (problem p) (:domain d) (:objects a b - loc) (:htn :parameters () :ordered-subtasks (and (go b))) (:init (at a)))";
    let p = parse_problem(ok, "p", &d).unwrap();
    assert_eq!(p.tasks.len(), 1);
    let empty = "(define (problem p) (:domain d) (:objects a - loc) (:init))";
    assert!(parse_problem(empty, "p", &d).unwrap().tasks.is_empty());
    let unknown_obj = "(define (problem p) (:domain d) (:objects a - loc) (:init (at z)))";
    assert!(matches!(
        parse_problem(unknown_obj, "p", &d).unwrap_err().kind,
        ParseErrorKind::Undeclared { .. }
    ));
    let unknown_task = "(define (problem p) (:domain d) (:objects a - loc) (:htn :ordered-subtasks (fly a)) (:init))";
    assert!(matches!(
        parse_problem(unknown_task, "p", &d).unwrap_err().kind,
        ParseErrorKind::Undeclared { .. }
    ));
    let d2 = parse_domain(
        "(define (domain d) (:types loc item - object) (:predicates (at ?l - loc)))",
        "d",
    )
    .unwrap();
    let mismatch = "(define (problem p) (:domain d) (:objects x - item) (:init (at x)))";
    assert!(matches!(
        parse_problem(mismatch, "p", &d2).unwrap_err().kind,
        ParseErrorKind::TypeMismatch(_)
    ));
    let goal = "(define (problem p) (:domain d) (:goal (and)))";
    assert!(matches!(
        parse_problem(goal, "p", &d2).unwrap_err().kind,
        ParseErrorKind::Unsupported(_)
    ));
}

#[test]
fn disturbance_files() {
    let d = parse_domain(MINI, "mini").unwrap();
    let guard_only = "(define (disturbances x) (:domain d) (:disturbance g :parameters (?l - loc) :precondition (at ?l) :effect ()))";
    let f = parse_disturbances(guard_only, "x", &d, None).unwrap();
    assert!(f.disturbances[0].effect.is_empty());
    assert_eq!(f.disturbances[0].placement, Placement::Random);
    let bad =
        "(define (disturbances x) (:domain d) (:disturbance g :parameters () :effect (rain)))";
    assert!(matches!(
        parse_disturbances(bad, "x", &d, None).unwrap_err().kind,
        ParseErrorKind::Undeclared { .. }
    ));
    let placed = "(define (disturbances x) (:domain d) (:disturbance g :parameters () :effect () :placement (after 3)))";
    assert_eq!(
        parse_disturbances(placed, "x", &d, None)
            .unwrap()
            .disturbances[0]
            .placement,
        Placement::After(3)
    );
}

#[test]
fn malformed_inputs_never_panic() {
    let samples = [
        "",
        "(",
        ")",
        "((((",
        "(define)",
        "(define (domain))",
        "(define (domain d) x)",
        "(define (domain d) (:types - t))",
        "(define (domain d) (:predicates ()))",
        "(define (domain d) (:method m))",
        "(define (domain d) (:action a :parameters (?x -)))",
        "(define (domain d) (:action a :effect (and (not))))",
    ];
    for s in samples {
        let _ = parse_domain(s, "f");
    }
}
