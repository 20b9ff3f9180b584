//! Seeded random micro-instances: propositional domains with at most four
//! methods, three levels of compound tasks and six atoms.

use std::fmt::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::disturbance::{classify, inject, RepairProblem};
use crate::hddl::{parse_disturbances, parse_domain, parse_problem};
use crate::model::Universe;
use crate::planner::{Planner, SearchBudget, SearchOutcome};

pub const MAX_METHODS: usize = 4;
pub const MAX_ATOMS: usize = 6;
const TASKS: usize = 3;
const ACTIONS: usize = 3;

#[derive(Clone, Debug)]
pub struct MicroInstance {
    pub seed: u64,
    pub domain: String,
    pub problem: String,
    pub disturbance: String,
    pub rp: RepairProblem,
}

fn literals(rng: &mut ChaCha8Rng, atoms: usize, max: usize, negative: bool) -> Vec<String> {
    let n = rng.gen_range(0..=max);
    let mut idx: Vec<usize> = (0..atoms).collect();
    idx.shuffle(rng);
    idx.into_iter()
        .take(n)
        .map(|i| {
            if negative && rng.gen_bool(0.25) {
                format!("(not (p{i}))")
            } else {
                format!("(p{i})")
            }
        })
        .collect()
}

fn conj(lits: &[String]) -> String {
    format!("(and {})", lits.join(" "))
}

fn domain_text(rng: &mut ChaCha8Rng, atoms: usize) -> String {
    let mut d = String::from("(define (domain micro)\n  (:requirements :hierarchy :negative-preconditions :method-preconditions)\n  (:predicates");
    for i in 0..atoms {
        write!(d, " (p{i})").unwrap();
    }
    d.push_str(")\n");
    for t in 0..TASKS {
        writeln!(d, "  (:task t{t} :parameters ())").unwrap();
    }
    // Every task gets one method, one more goes to a random task.
    let mut owners: Vec<usize> = (0..TASKS).collect();
    owners.push(rng.gen_range(0..TASKS));
    owners.sort();
    for (m, &t) in owners.iter().enumerate() {
        let mut pool: Vec<String> = (t + 1..TASKS).map(|u| format!("(t{u})")).collect();
        pool.extend((0..ACTIONS).map(|a| format!("(a{a})")));
        let n = if rng.gen_bool(0.1) {
            0
        } else {
            rng.gen_range(1..=2)
        };
        let subs: Vec<String> = (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect();
        writeln!(
            d,
            "  (:method m{m}\n    :parameters ()\n    :task (t{t})\n    :precondition {}\n    :ordered-subtasks (and {}))",
            conj(&literals(rng, atoms, 2, true)),
            subs.join(" ")
        )
        .unwrap();
    }
    for a in 0..ACTIONS {
        let mut eff = literals(rng, atoms, 2, false);
        for l in literals(rng, atoms, 1, false) {
            if !eff.contains(&l) {
                eff.push(format!("(not {l})"));
            }
        }
        writeln!(
            d,
            "  (:action a{a}\n    :parameters ()\n    :precondition {}\n    :effect {})",
            conj(&literals(rng, atoms, 2, true)),
            conj(&eff)
        )
        .unwrap();
    }
    d.push_str(")\n");
    d
}

fn problem_text(rng: &mut ChaCha8Rng, atoms: usize) -> String {
    let init: Vec<String> = (0..atoms)
        .filter(|_| rng.gen_bool(0.5))
        .map(|i| format!("(p{i})"))
        .collect();
    format!(
        "(define (problem micro-p)\n  (:domain micro)\n  (:htn :parameters () :ordered-subtasks (and (t0)))\n  (:init {}))\n",
        init.join(" ")
    )
}

fn disturbance_text(rng: &mut ChaCha8Rng, atoms: usize) -> String {
    let mut eff = Vec::new();
    let mut idx: Vec<usize> = (0..atoms).collect();
    idx.shuffle(rng);
    for i in idx.into_iter().take(rng.gen_range(1..=3)) {
        eff.push(if rng.gen_bool(0.8) {
            format!("(not (p{i}))")
        } else {
            format!("(p{i})")
        });
    }
    format!(
        "(define (disturbances micro-d)\n  (:domain micro)\n  (:disturbance flip\n    :parameters ()\n    :effect {}\n    :placement random))\n",
        conj(&eff)
    )
}

/// Draws instances from `seed` until one plans to at least one action.
/// Even seeds keep drawing, up to a cap, until the disturbance causes a
/// predicted failure.
pub fn micro_instance(seed: u64) -> MicroInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0;
    loop {
        draws += 1;
        let atoms = rng.gen_range(3..=MAX_ATOMS);
        let domain = domain_text(&mut rng, atoms);
        let problem = problem_text(&mut rng, atoms);
        let disturbance = disturbance_text(&mut rng, atoms);
        let d = parse_domain(&domain, "micro.hddl").expect("generated domain parses");
        let p = parse_problem(&problem, "micro-p.hddl", &d).expect("generated problem parses");
        let f = parse_disturbances(&disturbance, "micro.dist.hddl", &d, Some(&p))
            .expect("generated disturbance parses");
        let u = Arc::new(Universe::new(&d, &p).expect("generated problem grounds"));
        let planner = Planner::new(&d, &u, SearchBudget::bounded(16, 256));
        let Ok(SearchOutcome::Found(tree, _)) = planner.solve(&p.init, &p.tasks) else {
            continue;
        };
        if tree.plan().visible().is_empty() {
            continue;
        }
        let Ok(rp) = inject(
            Arc::new(d),
            u,
            &p.init,
            &tree,
            &f.disturbances[0],
            None,
            rng.gen(),
        ) else {
            continue;
        };
        if seed % 2 == 0 && draws < 200 && classify(&rp).map_or(true, |r| r.class < 3) {
            continue;
        }
        return MicroInstance {
            seed,
            domain,
            problem,
            disturbance,
            rp,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let a = micro_instance(7);
        let b = micro_instance(7);
        assert_eq!(a.domain, b.domain);
        assert_eq!(a.rp.s_c, b.rp.s_c);
        assert_eq!(a.rp.t_u, b.rp.t_u);
    }

    #[test]
    fn within_size_limits() {
        for seed in 0..50 {
            let m = micro_instance(seed);
            assert!(m.rp.domain.methods.len() <= MAX_METHODS);
            assert!(m.rp.domain.predicates.len() <= MAX_ATOMS);
            assert!(m.rp.tree.depth() <= 2 * TASKS + 2);
            assert!(!m.rp.pi_x.visible().is_empty());
        }
    }
}
