use std::sync::Arc;
use std::time::Instant;

use hrepair_core::disturbance::{classify, inject, RepairProblem};
use hrepair_core::fixtures::{self, Bundle};
use hrepair_core::model::Universe;
use hrepair_core::planner::{Planner, SearchBudget, SearchOutcome};
use hrepair_core::repair::{repair, Repair, RepairOutcome, Strategy};

fn scenario(b: &Bundle, dist: &str, seed: u64) -> RepairProblem {
    let l = b.load().unwrap_or_else(|e| panic!("{e}"));
    let u = Arc::new(Universe::new(&l.domain, &l.problem).unwrap());
    let pl = Planner::new(&l.domain, &u, SearchBudget::default());
    let SearchOutcome::Found(t, _) = pl.solve(&l.problem.init, &l.problem.tasks).unwrap() else {
        panic!("{} has no plan", b.name)
    };
    let file = &l.disturbances.iter().find(|(n, _)| *n == dist).unwrap().1;
    inject(
        Arc::new(l.domain),
        u,
        &l.problem.init,
        &t,
        &file.disturbances[0],
        None,
        seed,
    )
    .unwrap()
}

fn run(rp: &RepairProblem, s: Strategy) -> RepairOutcome {
    repair(rp, s, SearchBudget::default()).unwrap()
}

fn repaired(rp: &RepairProblem, s: Strategy) -> Repair {
    match run(rp, s) {
        RepairOutcome::Repaired(r) => r,
        o => panic!("{s}: {o:?}"),
    }
}

fn count(r: &Repair, action: &str) -> usize {
    r.full
        .plan()
        .actions
        .iter()
        .filter(|a| &*a.name == action)
        .count()
}

fn starts_with_prefix(rp: &RepairProblem, r: &Repair) -> bool {
    let p = r.full.plan().visible();
    let x = rp.pi_x.visible();
    p.actions.len() >= x.actions.len() && p.actions[..x.actions.len()] == x.actions[..]
}

#[test]
fn every_bundle_plans_and_parses() {
    for b in fixtures::ALL {
        let l = b.load().unwrap_or_else(|e| panic!("{e}"));
        assert!(!l.disturbances.is_empty(), "{}", b.name);
        scenario(b, l.disturbances[0].0, 0);
    }
}

#[test]
fn satellite_decalibration_needs_a_second_calibration() {
    let start = Instant::now();
    let rp = scenario(&fixtures::SATELLITE, "decalibrate", 0);
    assert_eq!(rp.pi_x.visible().len(), 4);
    assert_eq!(classify(&rp).unwrap().class, 4);
    assert!(matches!(
        run(&rp, Strategy::Rw),
        RepairOutcome::Unrepairable
    ));
    for s in [Strategy::Sf, Strategy::Ip] {
        let r = repaired(&rp, s);
        assert_eq!(count(&r, "calibrate"), 2, "{s}");
        assert!(starts_with_prefix(&rp, &r), "{s}");
        assert_eq!(
            r.t_u.plan().to_string(),
            "<(turn_to satellite0 groundstation2 phenomenon6), (calibrate satellite0 instrument0 groundstation2), \
             (turn_to satellite0 phenomenon6 groundstation2), (take_image satellite0 phenomenon6 instrument0 thermograph0), \
             (turn_to satellite0 star5 phenomenon6), (take_image satellite0 star5 instrument0 thermograph0)>"
        );
    }
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn rovers_route_around_an_obstruction() {
    let rp = scenario(&fixtures::ROVERS, "obstruct", 0);
    assert_eq!(classify(&rp).unwrap().class, 4);
    for s in Strategy::ALL {
        let r = repaired(&rp, s);
        assert!(starts_with_prefix(&rp, &r), "{s}");
        assert!(
            r.full
                .plan()
                .to_string()
                .contains("(move rover0 waypoint3 waypoint2)"),
            "{s}"
        );
        assert!(r.t_u.tree_applicable(&rp.s_c, &rp.universe).unwrap() || s == Strategy::Ip);
    }
}

#[test]
fn openstacks_remade_product() {
    let rp = scenario(&fixtures::OPENSTACKS, "random", 3);
    assert_eq!(
        rp.disturbance.as_ref().unwrap().name.as_ref(),
        "remove-product"
    );
    for s in Strategy::ALL {
        let r = repaired(&rp, s);
        assert_eq!(count(&r, "make_product"), 3, "{s}");
        assert!(starts_with_prefix(&rp, &r), "{s}");
    }
    // Chronological backtracking reaches the restart method first.
    assert_eq!(count(&repaired(&rp, Strategy::Ip), "reset_order"), 1);
}

#[test]
fn travel_cancelled_flight() {
    let rp = scenario(&fixtures::TRAVEL, "cancel", 0);
    assert!(matches!(
        run(&rp, Strategy::Rw),
        RepairOutcome::Unrepairable
    ));
    for s in [Strategy::Sf, Strategy::Ip] {
        let r = repaired(&rp, s);
        assert_eq!(
            r.t_u.plan().to_string(),
            "<(check_bag), (confirm flight2), (board flight2 airport1 airport2), (ride_taxi airport2 hotel)>",
            "{s}"
        );
    }
}
