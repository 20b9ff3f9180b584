//! Bounded brute-force enumeration of the Class 2, 3 and 4 solution sets, and
//! mechanical checks of the containment theorems between them.
//!
//! Classes 3 and 4 are enumerated straight from their inductive definitions
//! with fresh planner calls per repair point. Nothing here goes through the
//! strategies' trail or backtracking code, so the two can be compared.

pub mod random;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::{json, Value};

use crate::disturbance::RepairProblem;
use crate::model::{apply_plan, DecompositionTree, ModelError, NodeId, NodeKind, State};
use crate::planner::{single_subtree, Planner, SearchBudget};
use crate::repair::{ipyhopper, rewrite, shopfixer, RepairOutcome};

/// Which tasks count as repair points for a failure at action a_f.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Policy {
    /// Task ancestors of a_f.
    #[default]
    Ancestors,
    /// Every task of the unexecuted part that starts at or before a_f.
    Prefix,
}

#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub class: u8,
    /// Canonical key to repaired T'_u.
    pub trees: BTreeMap<String, DecompositionTree>,
    pub exhausted: bool,
}

impl SolutionSet {
    pub fn keys(&self) -> BTreeSet<&String> {
        self.trees.keys().collect()
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn contains(&self, t: &DecompositionTree) -> bool {
        self.trees.contains_key(&t.canonical_key())
    }
}

#[derive(Clone, Copy)]
enum Check {
    Tree,
    Plan,
}

/// First failing action of `t` from s_c under the class's check.
fn failing_action(
    rp: &RepairProblem,
    t: &DecompositionTree,
    check: Check,
) -> Result<Option<NodeId>, ModelError> {
    match check {
        Check::Tree => Ok(t
            .first_tree_failure(&rp.s_c, &rp.universe)?
            .map(|f| f.action)),
        Check::Plan => {
            let mut s = rp.s_c.clone();
            for leaf in t.leaves() {
                let a = leaf.action().unwrap();
                if !a.precondition.eval(&s, &rp.universe)? {
                    return Ok(Some(leaf.id));
                }
                s = a.effect.apply(&s, &rp.universe)?;
            }
            Ok(None)
        }
    }
}

fn repair_points(t: &DecompositionTree, a_f: NodeId, policy: Policy) -> Vec<NodeId> {
    match policy {
        Policy::Ancestors => t.task_ancestors(a_f),
        Policy::Prefix => {
            let spans = t.leaf_spans();
            let limit = spans[&a_f].0;
            t.all_ids()
                .into_iter()
                .filter(|id| matches!(t.node(*id).map(|n| &n.kind), Some(NodeKind::Task(_))))
                .filter(|id| spans.get(id).is_some_and(|&(first, _)| first <= limit))
                .collect()
        }
    }
}

/// s_r: s_c for a partially executed point, else the projection of `t` up to
/// the point's first leaf.
fn state_at(rp: &RepairProblem, t: &DecompositionTree, id: NodeId) -> Result<State, ModelError> {
    if t.node(id).is_some_and(|n| n.pruned) {
        return Ok(rp.s_c.clone());
    }
    let first = t.leaf_spans()[&id].0;
    let mut s = rp.s_c.clone();
    for leaf in t.leaves().into_iter().take(first) {
        s = leaf.action().unwrap().effect.apply(&s, &rp.universe)?;
    }
    Ok(s)
}

/// Inductive chains longer than this are cut and reported as not exhausted.
const MAX_CHAIN: usize = 64;

fn enumerate_backtracking(
    rp: &RepairProblem,
    check: Check,
    budget: SearchBudget,
    policy: Policy,
) -> Result<SolutionSet, ModelError> {
    let class = match check {
        Check::Tree => 3,
        Check::Plan => 4,
    };
    let planner = Planner::new(&rp.domain, &rp.universe, budget);
    let mut out = SolutionSet {
        class,
        trees: BTreeMap::new(),
        exhausted: true,
    };
    let mut seen = BTreeSet::from([rp.t_u.canonical_key()]);
    let mut queue = VecDeque::from([(rp.t_u.clone(), 0usize)]);
    while let Some((t, depth)) = queue.pop_front() {
        let Some(a_f) = failing_action(rp, &t, check)? else {
            out.trees.insert(t.canonical_key(), t);
            continue;
        };
        if depth >= MAX_CHAIN {
            out.exhausted = false;
            continue;
        }
        for t_r in repair_points(&t, a_f, policy) {
            let task = t.node(t_r).unwrap().kind.task().unwrap();
            let s_r = state_at(rp, &t, t_r)?;
            let e = planner.solve_all(&s_r, std::slice::from_ref(&task))?;
            out.exhausted &= e.exhausted;
            for sol in e.trees {
                let next = t.replace(&[t_r], vec![single_subtree(sol)])?;
                if seen.insert(next.canonical_key()) {
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    for t in out.trees.values_mut() {
        rp.annotate(t);
    }
    Ok(out)
}

pub fn enumerate_class(
    rp: &RepairProblem,
    class: u8,
    budget: SearchBudget,
    policy: Policy,
) -> Result<SolutionSet, ModelError> {
    match class {
        2 => {
            let (decoded, exhausted, _) = rewrite::repair_rw_all(rp, budget)?;
            Ok(SolutionSet {
                class,
                trees: decoded
                    .into_iter()
                    .map(|d| (d.t_u.canonical_key(), d.t_u))
                    .collect(),
                exhausted,
            })
        }
        3 => enumerate_backtracking(rp, Check::Tree, budget, policy),
        4 => enumerate_backtracking(rp, Check::Plan, budget, policy),
        _ => Err(ModelError::Structure(format!("no solution class {class}"))),
    }
}

/// Checks a Class-2 member from its definition: the full tree decomposes the
/// initial network, its plan starts with π_x, and replaying it from s0 with
/// the observed state substituted after a_c satisfies every aggregated
/// precondition.
pub fn verify_class2(rp: &RepairProblem, full: &DecompositionTree) -> Result<bool, ModelError> {
    full.check_structure()?;
    let roots: Vec<_> = full.root().children.iter().map(|c| c.kind.task()).collect();
    let want: Vec<_> = rp
        .tree
        .root()
        .children
        .iter()
        .map(|c| c.kind.task())
        .collect();
    if roots != want {
        return Ok(false);
    }
    let prefix = rp.pi_x.visible();
    let plan = full.plan().visible();
    if plan.len() < prefix.len() || plan.actions[..prefix.len()] != prefix.actions[..] {
        return Ok(false);
    }
    let mut s = if prefix.is_empty() {
        rp.s_c.clone()
    } else {
        rp.s0.clone()
    };
    let mut visible = 0;
    for leaf in full.leaves() {
        if !full.pre_star(leaf.id)?.eval(&s, &rp.universe)? {
            return Ok(false);
        }
        let a = leaf.action().unwrap();
        s = a.effect.apply(&s, &rp.universe)?;
        if !a.is_dummy() {
            visible += 1;
            if visible == prefix.len() {
                s = rp.s_c.clone();
            }
        }
    }
    Ok(true)
}

pub fn verify_class3(rp: &RepairProblem, t_u: &DecompositionTree) -> Result<bool, ModelError> {
    t_u.check_structure()?;
    t_u.tree_applicable(&rp.s_c, &rp.universe)
}

pub fn verify_class4(rp: &RepairProblem, t_u: &DecompositionTree) -> Result<bool, ModelError> {
    t_u.check_structure()?;
    Ok(apply_plan(&rp.s_c, &t_u.plan(), &rp.universe).is_ok())
}

#[derive(Clone, Debug)]
pub struct Containment {
    pub name: &'static str,
    pub holds: bool,
    /// Smallest tree on the wrong side, with the set it is missing from.
    pub counterexample: Option<(String, DecompositionTree)>,
}

#[derive(Clone, Debug)]
pub struct TheoremReport {
    pub class2: SolutionSet,
    pub class3: SolutionSet,
    pub class4: SolutionSet,
    pub exhausted: bool,
    /// Members that failed re-verification against their class definition.
    pub unverified: Vec<(u8, String)>,
    pub containments: Vec<Containment>,
    /// Strategy outputs that fell outside their class, by strategy name.
    pub membership_failures: Vec<String>,
    /// Exhaustive strategy output sets that differ from the class sets.
    pub exactness_failures: Vec<String>,
    pub rw_not_sf: Option<String>,
    pub sf_not_rw: Option<String>,
    pub ip_not_rw: Option<String>,
}

fn subset(
    name: &'static str,
    a: &BTreeMap<String, DecompositionTree>,
    b: &SolutionSet,
) -> Containment {
    let missing = a
        .iter()
        .filter(|(k, _)| !b.trees.contains_key(*k))
        .min_by_key(|(k, t)| (t.size(), (*k).clone()));
    Containment {
        name,
        holds: missing.is_none(),
        counterexample: missing.map(|(_, t)| (format!("class {}", b.class), t.clone())),
    }
}

fn witness(a: &SolutionSet, b: &SolutionSet) -> Option<String> {
    a.trees.keys().find(|k| !b.trees.contains_key(*k)).cloned()
}

impl TheoremReport {
    /// Class3 ⊆ Class4.
    pub fn tree_within_plan(&self) -> &Containment {
        &self.containments[0]
    }

    /// (Class2 ∩ Class4) ⊆ Class3.
    pub fn rewrite_plan_within_tree(&self) -> &Containment {
        &self.containments[1]
    }

    pub fn all_hold(&self) -> bool {
        self.unverified.is_empty()
            && self.containments.iter().all(|c| c.holds)
            && self.membership_failures.is_empty()
            && self.exactness_failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let set = |s: &SolutionSet| {
            json!({
                "exhausted": s.exhausted,
                "size": s.len(),
                "trees": s.trees.keys().collect::<Vec<_>>(),
            })
        };
        json!({
            "class2": set(&self.class2),
            "class3": set(&self.class3),
            "class4": set(&self.class4),
            "containments": self.containments.iter().map(|c| json!({
                "counterexample": c.counterexample.as_ref().map(|(missing, t)| json!({
                    "missing_from": missing,
                    "tree": t.canonical_key(),
                })),
                "holds": c.holds,
                "name": c.name,
            })).collect::<Vec<_>>(),
            "exactness_failures": self.exactness_failures,
            "exhausted": self.exhausted,
            "membership_failures": self.membership_failures,
            "unverified": self.unverified.iter().map(|(c, k)| json!({"class": c, "tree": k})).collect::<Vec<_>>(),
            "witnesses": {
                "ip_not_rw": self.ip_not_rw,
                "rw_not_sf": self.rw_not_sf,
                "sf_not_rw": self.sf_not_rw,
            },
        })
    }
}

/// Enumerates all three sets at the same bound and checks the containments,
/// re-verification, strategy membership and exhaustive-strategy exactness.
/// Containments and exactness are only judged when every enumeration exhausted.
pub fn check_theorems(
    rp: &RepairProblem,
    budget: SearchBudget,
) -> Result<TheoremReport, ModelError> {
    let (decoded, c2_exhausted, _) = rewrite::repair_rw_all(rp, budget)?;
    let mut unverified = Vec::new();
    for d in &decoded {
        if !verify_class2(rp, &d.full)? {
            unverified.push((2, d.t_u.canonical_key()));
        }
    }
    let class2 = SolutionSet {
        class: 2,
        trees: decoded
            .into_iter()
            .map(|d| (d.t_u.canonical_key(), d.t_u))
            .collect(),
        exhausted: c2_exhausted,
    };
    let class3 = enumerate_class(rp, 3, budget, Policy::Ancestors)?;
    let class4 = enumerate_class(rp, 4, budget, Policy::Ancestors)?;
    for (k, t) in &class3.trees {
        if !verify_class3(rp, t)? {
            unverified.push((3, k.clone()));
        }
    }
    for (k, t) in &class4.trees {
        if !verify_class4(rp, t)? {
            unverified.push((4, k.clone()));
        }
    }
    let exhausted = class2.exhausted && class3.exhausted && class4.exhausted;

    let mut containments = Vec::new();
    containments.push(subset("class3 within class4", &class3.trees, &class4));
    let both: BTreeMap<String, DecompositionTree> = class2
        .trees
        .iter()
        .filter(|(k, _)| class4.trees.contains_key(*k))
        .map(|(k, t)| (k.clone(), t.clone()))
        .collect();
    containments.push(subset("class2 and class4 within class3", &both, &class3));
    if !exhausted {
        for c in &mut containments {
            c.holds = true;
            c.counterexample = None;
        }
    }

    let mut membership_failures = Vec::new();
    let strategies = [
        (
            "rw",
            crate::repair::repair(rp, crate::repair::Strategy::Rw, budget)?,
            &class2,
        ),
        ("sf", shopfixer::repair_sf(rp, budget)?, &class3),
        ("ip", ipyhopper::repair_ip(rp, budget)?, &class4),
    ];
    for (name, out, set) in &strategies {
        match out {
            RepairOutcome::Repaired(r) if !set.contains(&r.t_u) => {
                if set.exhausted {
                    membership_failures.push(format!("{name}: output outside class {}", set.class));
                }
            }
            RepairOutcome::Unrepairable if !set.is_empty() => {
                membership_failures.push(format!(
                    "{name}: reported unrepairable but class {} is not empty",
                    set.class
                ));
            }
            _ => {}
        }
    }

    let mut exactness_failures = Vec::new();
    if exhausted {
        for (name, all, set) in [
            ("sf", shopfixer::repair_sf_all(rp, budget)?, &class3),
            ("ip", ipyhopper::repair_ip_all(rp, budget)?, &class4),
        ] {
            if !all.exhausted {
                continue;
            }
            let got: BTreeSet<String> = all.trees.iter().map(|t| t.canonical_key()).collect();
            let want: BTreeSet<String> = set.trees.keys().cloned().collect();
            if got != want {
                exactness_failures.push(format!(
                    "{name}: {} outputs, class {} has {} ({} missing, {} extra)",
                    got.len(),
                    set.class,
                    want.len(),
                    want.difference(&got).count(),
                    got.difference(&want).count()
                ));
            }
        }
    }

    Ok(TheoremReport {
        rw_not_sf: witness(&class2, &class3),
        sf_not_rw: witness(&class3, &class2),
        ip_not_rw: witness(&class4, &class2),
        class2,
        class3,
        class4,
        exhausted,
        unverified,
        containments,
        membership_failures,
        exactness_failures,
    })
}
