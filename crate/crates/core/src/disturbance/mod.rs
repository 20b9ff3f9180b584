//! Disturbance injection, repair problems and failure classification.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::hddl::{tree_from_json, tree_to_json, DisturbanceSpec, JsonError, Placement};
use crate::model::{
    apply_plan, formula::for_each_binding, Bindings, DecompositionTree, Domain, Effect, ExecStatus,
    ModelError, NodeId, NodeKind, Plan, State, Sym, TreeFailure, Universe,
};

/// A ground disturbance as it was applied.
#[derive(Clone, Debug, PartialEq)]
pub struct AppliedDisturbance {
    pub name: Sym,
    pub args: Vec<Sym>,
    /// Number of executed (non-dummy) actions before it, at least 1.
    pub position: usize,
    pub effect: Effect,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DisturbanceError {
    #[error("disturbance `{0}` is not applicable at any position")]
    Inapplicable(String),
    #[error("position {position} is outside the plan (1..={len})")]
    Position { position: usize, len: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Everything a repair strategy sees. Immutable once built.
#[derive(Clone, Debug)]
pub struct RepairProblem {
    pub domain: Arc<Domain>,
    pub universe: Arc<Universe>,
    pub s0: State,
    /// Original tree, states annotated from `s0`.
    pub tree: DecompositionTree,
    /// Last executed action; None when nothing has run yet.
    pub a_c: Option<NodeId>,
    pub s_c: State,
    pub disturbance: Option<AppliedDisturbance>,
    pub t_x: DecompositionTree,
    pub t_u: DecompositionTree,
    pub pi_x: Plan,
    pub pi_u: Plan,
    /// γ(s0, π_x): the state that would have been observed without disturbance.
    pub predicted: State,
}

impl RepairProblem {
    pub fn new(
        domain: Arc<Domain>,
        universe: Arc<Universe>,
        s0: State,
        tree: DecompositionTree,
        a_c: Option<NodeId>,
        s_c: State,
        disturbance: Option<AppliedDisturbance>,
    ) -> Result<Self, ModelError> {
        let mut tree = tree;
        tree.annotate_states(&s0, &universe);
        let (t_x, t_u) = match a_c {
            Some(id) => tree.split(id)?,
            None => {
                let mut x = DecompositionTree::empty();
                x.set_next_id(tree.next_id());
                (x, tree.clone())
            }
        };
        let pi_x = t_x.plan();
        let pi_u = t_u.plan();
        let predicted = apply_plan(&s0, &pi_x, &universe).map_err(|f| {
            ModelError::Structure(format!(
                "executed prefix fails at action {}: {}",
                f.index + 1,
                f.error
            ))
        })?;
        universe.check_state(&s_c)?;
        Ok(RepairProblem {
            domain,
            universe,
            s0,
            tree,
            a_c,
            s_c,
            disturbance,
            t_x,
            t_u,
            pi_x,
            pi_u,
            predicted,
        })
    }

    pub fn status(&self, id: NodeId) -> Result<ExecStatus, ModelError> {
        match self.a_c {
            Some(a) => self.tree.exec_status(a, id),
            None => Ok(ExecStatus::Unexecuted),
        }
    }

    /// Reassembles a full tree from T_x and a repaired unexecuted part.
    pub fn full_tree(&self, t_u: &DecompositionTree) -> Result<DecompositionTree, ModelError> {
        let mut t = DecompositionTree::graft(&self.t_x, t_u)?;
        t.annotate_states(&self.s0, &self.universe);
        Ok(t)
    }

    /// Replays a candidate T'_u from s_c, annotating cached states.
    pub fn annotate(&self, t_u: &mut DecompositionTree) {
        t_u.annotate_states(&self.s_c, &self.universe);
    }
}

/// Ground bindings of a disturbance's parameters whose guard holds in `state`.
fn applicable_bindings(
    spec: &DisturbanceSpec,
    state: &State,
    universe: &Universe,
) -> Result<Vec<Vec<Sym>>, ModelError> {
    let mut out = Vec::new();
    for_each_binding(&spec.params, universe, &mut Bindings::new(), &mut |env| {
        if spec.precondition.eval_in(state, universe, env)? {
            out.push(
                spec.params
                    .iter()
                    .map(|p| env.get(&p.name).unwrap().clone())
                    .collect(),
            );
        }
        Ok(true)
    })?;
    Ok(out)
}

/// Injects one disturbance into the execution of `tree` from `s0`.
/// `position` overrides the disturbance's placement; random choices use `seed`.
pub fn inject(
    domain: Arc<Domain>,
    universe: Arc<Universe>,
    s0: &State,
    tree: &DecompositionTree,
    spec: &DisturbanceSpec,
    position: Option<usize>,
    seed: u64,
) -> Result<RepairProblem, DisturbanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves: Vec<NodeId> = tree
        .leaves()
        .into_iter()
        .filter(|n| !n.action().unwrap().is_dummy())
        .map(|n| n.id)
        .collect();
    let plan = tree.plan().visible();
    let mut states = vec![s0.clone()];
    for a in &plan.actions {
        let next = a.apply(states.last().unwrap(), &universe)?;
        states.push(next);
    }
    let positions: Vec<usize> = match position.or(match spec.placement {
        Placement::After(k) => Some(k),
        Placement::Random => None,
    }) {
        Some(k) if k == 0 || k > leaves.len() => {
            return Err(DisturbanceError::Position {
                position: k,
                len: leaves.len(),
            })
        }
        Some(k) => vec![k],
        None => (1..=leaves.len()).collect(),
    };
    let mut options = Vec::new();
    for k in positions {
        let b = applicable_bindings(spec, &states[k], &universe)?;
        if !b.is_empty() {
            options.push((k, b));
        }
    }
    let Some((k, bindings)) = options.choose(&mut rng) else {
        return Err(DisturbanceError::Inapplicable(spec.name.to_string()));
    };
    let args = bindings.choose(&mut rng).unwrap().clone();
    let effect = spec
        .effect
        .substitute(&Bindings::from_pairs(&spec.params, &args));
    let s_c = effect.apply(&states[*k], &universe)?;
    let applied = AppliedDisturbance {
        name: spec.name.clone(),
        args,
        position: *k,
        effect,
    };
    Ok(RepairProblem::new(
        domain,
        universe,
        s0.clone(),
        tree.clone(),
        Some(leaves[*k - 1]),
        s_c,
        Some(applied),
    )?)
}

#[derive(Clone, Debug)]
pub struct FailureReport {
    /// Most specific class: 1 normal, 2 anomaly without predicted failure,
    /// 3 predicted task failure, 4 predicted action failure.
    pub class: u8,
    /// First violated pre* in T_u from s_c; `node` is d_f.
    pub task_failure: Option<TreeFailure>,
    /// First action of plan(T_u) whose own precondition fails from s_c.
    pub action_failure: Option<TreeFailure>,
}

impl FailureReport {
    pub fn anomaly(&self) -> bool {
        self.class >= 2
    }
}

pub fn classify(rp: &RepairProblem) -> Result<FailureReport, ModelError> {
    let task_failure = rp.t_u.first_tree_failure(&rp.s_c, &rp.universe)?;
    let action_failure = rp.t_u.first_plan_failure(&rp.s_c, &rp.universe)?;
    let class = if rp.s_c == rp.predicted {
        1
    } else if action_failure.is_some() {
        4
    } else if task_failure.is_some() {
        3
    } else {
        2
    };
    Ok(FailureReport {
        class,
        task_failure,
        action_failure,
    })
}

pub fn repair_problem_to_json(rp: &RepairProblem) -> String {
    let tree: Value = serde_json::from_str(&tree_to_json(&rp.tree)).expect("tree JSON");
    let dist = rp.disturbance.as_ref().map(|d| {
        json!({
            "args": d.args.iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "effect": crate::hddl::print::effect(&d.effect),
            "name": d.name.to_string(),
            "position": d.position,
        })
    });
    let v = json!({
        "a_c": rp.a_c,
        "disturbance": dist,
        "domain": rp.domain.name.to_string(),
        "s0": rp.s0,
        "s_c": rp.s_c,
        "tree": tree,
    });
    serde_json::to_string_pretty(&v).expect("repair problem serializes")
}

/// Reads the JSON form back. The disturbance record is informational; its
/// effect is already folded into `s_c`.
pub fn repair_problem_from_json(
    text: &str,
    domain: Arc<Domain>,
    universe: Arc<Universe>,
) -> Result<RepairProblem, JsonError> {
    let err = |pointer: &str, message: String| JsonError {
        pointer: pointer.into(),
        message,
    };
    let v: Value = serde_json::from_str(text).map_err(|e| err("", format!("invalid JSON: {e}")))?;
    let tree = v
        .get("tree")
        .ok_or_else(|| err("", "missing `tree`".into()))?;
    let tree = tree_from_json(&tree.to_string(), &domain)
        .map_err(|e| err(&format!("/tree{}", e.pointer), e.message))?;
    let state = |key: &str| -> Result<State, JsonError> {
        let s = v
            .get(key)
            .ok_or_else(|| err("", format!("missing `{key}`")))?;
        serde_json::from_value(s.clone()).map_err(|e| err(&format!("/{key}"), e.to_string()))
    };
    let s0 = state("s0")?;
    let s_c = state("s_c")?;
    let a_c = match v.get("a_c") {
        None | Some(Value::Null) => None,
        Some(x) => Some(
            x.as_u64()
                .and_then(|n| NodeId::try_from(n).ok())
                .ok_or_else(|| err("/a_c", "expected a node id".into()))?,
        ),
    };
    if let Some(id) = a_c {
        if !matches!(tree.node(id).map(|n| &n.kind), Some(NodeKind::Action(_))) {
            return Err(err("/a_c", format!("node {id} is not an action leaf")));
        }
    }
    let disturbance = match v.get("disturbance") {
        None | Some(Value::Null) => None,
        Some(d) => {
            let name = d
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| err("/disturbance/name", "expected a string".into()))?;
            let args = d
                .get("args")
                .and_then(Value::as_array)
                .map(|a| {
                    a.iter()
                        .filter_map(Value::as_str)
                        .map(crate::model::sym)
                        .collect()
                })
                .unwrap_or_default();
            let position = d.get("position").and_then(Value::as_u64).unwrap_or(0) as usize;
            Some(AppliedDisturbance {
                name: crate::model::sym(name),
                args,
                position,
                effect: Effect::empty(),
            })
        }
    };
    RepairProblem::new(domain, universe, s0, tree, a_c, s_c, disturbance)
        .map_err(|e| err("", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::planner::{Planner, SearchBudget, SearchOutcome};

    fn incomparable_problem(dist: &str, seed: u64) -> RepairProblem {
        let l = fixtures::INCOMPARABLE.load().unwrap();
        let u = Universe::new(&l.domain, &l.problem).unwrap();
        let pl = Planner::new(&l.domain, &u, SearchBudget::default());
        let SearchOutcome::Found(t, _) = pl.solve(&l.problem.init, &l.problem.tasks).unwrap()
        else {
            panic!()
        };
        let spec = &l
            .disturbances
            .iter()
            .find(|(n, _)| *n == dist)
            .unwrap()
            .1
            .disturbances[0];
        inject(
            Arc::new(l.domain.clone()),
            Arc::new(u.clone()),
            &l.problem.init,
            &t,
            spec,
            None,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn noop_is_class_one() {
        let rp = incomparable_problem("noop", 7);
        assert_eq!(rp.s_c, rp.predicted);
        let r = classify(&rp).unwrap();
        assert_eq!(r.class, 1);
        assert!(r.task_failure.is_none() && r.action_failure.is_none());
    }

    #[test]
    fn incomparable_anomaly_after_a1() {
        let rp = incomparable_problem("anomaly", 0);
        assert_eq!(rp.pi_x.to_string(), "<(a1)>");
        assert_eq!(rp.pi_u.to_string(), "<(a2 y1)>");
        assert_eq!(rp.s_c.to_string(), "{(ok y1) (q) (r y2)}");
        let r = classify(&rp).unwrap();
        assert_eq!(r.class, 4);
        assert_eq!(r.action_failure.unwrap().literal, "(r y1)");
    }

    #[test]
    fn seeded_placement_is_reproducible() {
        let l = fixtures::INCOMPARABLE.load().unwrap();
        let u = Arc::new(Universe::new(&l.domain, &l.problem).unwrap());
        let d = Arc::new(l.domain.clone());
        let pl = Planner::new(&l.domain, &u, SearchBudget::default());
        let SearchOutcome::Found(t, _) = pl.solve(&l.problem.init, &l.problem.tasks).unwrap()
        else {
            panic!()
        };
        let mut spec = l.disturbances[1].1.disturbances[0].clone();
        spec.placement = Placement::Random;
        let pick = |seed| {
            inject(d.clone(), u.clone(), &l.problem.init, &t, &spec, None, seed)
                .unwrap()
                .a_c
        };
        assert_eq!(pick(3), pick(3));
        let seen: std::collections::BTreeSet<_> = (0..32).map(pick).collect();
        assert_eq!(seen.len(), 2);
        assert!(matches!(
            inject(d.clone(), u.clone(), &l.problem.init, &t, &spec, Some(3), 0),
            Err(DisturbanceError::Position {
                position: 3,
                len: 2
            })
        ));
        let guarded = &l.disturbances[0].1.disturbances[0];
        // After a2(y1) the guard still holds; it only fails once r(y1) is gone.
        assert!(inject(
            d.clone(),
            u.clone(),
            &l.problem.init,
            &t,
            guarded,
            Some(2),
            0
        )
        .is_ok());
        let mut s0 = l.problem.init.clone();
        s0.remove(&crate::model::Atom::new("ok", &["y2"]));
        assert!(matches!(
            inject(d, u, &s0, &t, guarded, None, 0),
            Err(DisturbanceError::Inapplicable(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let rp = incomparable_problem("anomaly", 0);
        let text = repair_problem_to_json(&rp);
        let back = repair_problem_from_json(&text, rp.domain.clone(), rp.universe.clone()).unwrap();
        assert_eq!(back.tree, rp.tree);
        assert_eq!(back.a_c, rp.a_c);
        assert_eq!(back.s_c, rp.s_c);
        assert_eq!(back.disturbance.unwrap().args, rp.disturbance.unwrap().args);
    }
}
