//! Simulation backtracking: simulate the remaining plan, and on the first
//! failed action re-plan its producing task, walking rootward when that task's
//! decompositions are used up.

use crate::disturbance::RepairProblem;
use crate::model::{apply_plan, DecompositionTree, ModelError, NodeId, Plan, State, Universe};
use crate::planner::SearchBudget;

use super::{all_repairs, drive, outcome, AllRepairs, Backtracker, RepairOutcome};

#[derive(Clone, Debug, PartialEq)]
pub enum SimResult {
    Ok(State),
    /// 0-based index of the first action whose precondition fails, and the
    /// state it was attempted in.
    Failed {
        index: usize,
        state: State,
    },
}

/// Predicts action outcomes. Only `pre(a)` is checked, never pre*.
pub trait Simulator: Sync {
    fn simulate(&self, plan: &Plan, state: &State) -> Result<SimResult, ModelError>;
}

/// The domain's own transition function.
pub struct Internal<'a>(pub &'a Universe);

impl Simulator for Internal<'_> {
    fn simulate(&self, plan: &Plan, state: &State) -> Result<SimResult, ModelError> {
        match apply_plan(state, plan, self.0) {
            Ok(s) => Ok(SimResult::Ok(s)),
            Err(f) => match f.error {
                ModelError::PreconditionViolated { .. } => Ok(SimResult::Failed {
                    index: f.index,
                    state: f.state,
                }),
                e => Err(e),
            },
        }
    }
}

pub fn simulate(plan: &Plan, s_c: &State, universe: &Universe) -> Result<SimResult, ModelError> {
    Internal(universe).simulate(plan, s_c)
}

struct Ip<'s> {
    sim: &'s dyn Simulator,
}

impl Backtracker for Ip<'_> {
    fn repair_points(
        &self,
        rp: &RepairProblem,
        t: &DecompositionTree,
    ) -> Result<Option<Vec<NodeId>>, ModelError> {
        match self.sim.simulate(&t.plan(), &rp.s_c)? {
            SimResult::Ok(_) => Ok(None),
            SimResult::Failed { index, .. } => {
                let a_f = t.leaves()[index].id;
                Ok(Some(t.task_ancestors(a_f)))
            }
        }
    }
}

pub fn repair_ip(rp: &RepairProblem, budget: SearchBudget) -> Result<RepairOutcome, ModelError> {
    repair_ip_with(rp, budget, &Internal(&rp.universe))
}

pub fn repair_ip_with(
    rp: &RepairProblem,
    budget: SearchBudget,
    sim: &dyn Simulator,
) -> Result<RepairOutcome, ModelError> {
    outcome(rp, drive(rp, &Ip { sim }, budget, false))
}

/// Every output of the nondeterministic algorithm within the budget.
pub fn repair_ip_all(rp: &RepairProblem, budget: SearchBudget) -> Result<AllRepairs, ModelError> {
    all_repairs(drive(
        rp,
        &Ip {
            sim: &Internal(&rp.universe),
        },
        budget,
        true,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sym, Atom, AtomTemplate, Effect, Formula, GroundAction};
    use std::sync::Arc;

    fn act(
        name: &str,
        pre: Option<&str>,
        add: Option<&str>,
        del: Option<&str>,
    ) -> Arc<GroundAction> {
        let t = |p: &str| AtomTemplate::new(p, vec![]);
        Arc::new(GroundAction {
            name: sym(name),
            args: vec![],
            precondition: pre.map_or(Formula::True, |p| Formula::Pos(t(p))),
            effect: Effect::simple(
                add.map(t).into_iter().collect(),
                del.map(t).into_iter().collect(),
            ),
            cost: 1.0,
        })
    }

    #[test]
    fn first_failure_index() {
        let u = Universe::builder().predicate("p", 0).build();
        let p = Atom::new("p", &[]);
        let s: State = [p].into_iter().collect();
        let ok = Plan::new(vec![act("a", Some("p"), None, None)]);
        assert!(matches!(simulate(&ok, &s, &u).unwrap(), SimResult::Ok(_)));
        assert!(matches!(
            simulate(&Plan::default(), &s, &u).unwrap(),
            SimResult::Ok(_)
        ));
        let pair = Plan::new(vec![
            act("a", Some("p"), None, Some("p")),
            act("b", Some("p"), None, None),
        ]);
        match simulate(&pair, &s, &u).unwrap() {
            SimResult::Failed { index, state } => {
                assert_eq!(index, 1);
                assert!(state.is_empty());
            }
            r => panic!("{r:?}"),
        }
    }
}
