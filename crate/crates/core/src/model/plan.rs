use std::fmt;
use std::sync::Arc;

use super::atom::State;
use super::domain::{GroundAction, Universe};
use super::ModelError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Plan {
    pub actions: Vec<Arc<GroundAction>>,
}

impl Plan {
    pub fn new(actions: Vec<Arc<GroundAction>>) -> Self {
        Plan { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Without dummy actions; what users see.
    pub fn visible(&self) -> Plan {
        Plan {
            actions: self
                .actions
                .iter()
                .filter(|a| !a.is_dummy())
                .cloned()
                .collect(),
        }
    }

    pub fn concat(&self, other: &Plan) -> Plan {
        let mut actions = self.actions.clone();
        actions.extend(other.actions.iter().cloned());
        Plan { actions }
    }

    /// Ground labels only, e.g. `["(move r w1 w2)", ...]`.
    pub fn labels(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.task().to_string()).collect()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.visible();
        write!(f, "<")?;
        for (i, a) in v.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ">")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanFailure {
    /// Zero-based index of the first inapplicable action.
    pub index: usize,
    /// State reached just before that action.
    pub state: State,
    pub error: ModelError,
}

/// Folds `apply` left to right; stops at the first inapplicable action.
pub fn apply_plan(state: &State, plan: &Plan, universe: &Universe) -> Result<State, PlanFailure> {
    let mut s = state.clone();
    for (i, a) in plan.actions.iter().enumerate() {
        match a.apply(&s, universe) {
            Ok(next) => s = next,
            Err(error) => {
                return Err(PlanFailure {
                    index: i,
                    state: s,
                    error,
                })
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, AtomTemplate, Effect, Formula, Term};

    fn act(name: &str, pre: Formula, eff: Effect) -> Arc<GroundAction> {
        Arc::new(GroundAction {
            name: name.into(),
            args: vec![],
            precondition: pre,
            effect: eff,
            cost: 1.0,
        })
    }

    #[test]
    fn empty_plan_is_identity() {
        let s: State = [Atom::new("p", &[])].into_iter().collect();
        let u = Universe::builder().predicate("p", 0).build();
        assert_eq!(apply_plan(&s, &Plan::default(), &u).unwrap(), s);
    }

    #[test]
    fn second_action_fails_after_first_deletes_its_precondition() {
        let u = Universe::builder().predicate("p", 0).build();
        let p = AtomTemplate::new("p", Vec::<Term>::new());
        let a1 = act("a1", Formula::True, Effect::simple(vec![], vec![p.clone()]));
        let a2 = act("a2", Formula::Pos(p.clone()), Effect::empty());
        let s: State = [Atom::new("p", &[])].into_iter().collect();
        let f = apply_plan(&s, &Plan::new(vec![a1, a2]), &u).unwrap_err();
        // zero-based: the second action
        assert_eq!(f.index, 1);
        assert!(f.state.is_empty());
        assert!(
            matches!(f.error, ModelError::PreconditionViolated { ref literal, .. } if literal == "(p)")
        );
    }

    #[test]
    fn dummies_are_hidden_from_display() {
        let a = act("go", Formula::True, Effect::empty());
        let p = Plan::new(vec![GroundAction::dummy(), a]);
        assert_eq!(p.to_string(), "<(go)>");
        assert_eq!(p.len(), 2);
    }
}
