//! Causal-link backjumping: find the earliest violated aggregated
//! precondition, then re-plan its task ancestors nearest first with the
//! executed prefix frozen.

use std::collections::{BTreeMap, HashMap};

use crate::disturbance::RepairProblem;
use crate::model::{
    Atom, Bindings, DecompositionTree, ModelError, Node, NodeId, State, TreeFailure, Universe,
};
use crate::planner::SearchBudget;

use super::{all_repairs, drive, outcome, AllRepairs, Backtracker, RepairOutcome};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Producer {
    Init,
    Action(NodeId),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CausalLink {
    pub producer: Producer,
    pub consumer: NodeId,
    pub atom: Atom,
}

#[derive(Clone, Debug, Default)]
pub struct CausalLinkGraph {
    pub links: Vec<CausalLink>,
    /// Positive atoms each node's own precondition consumes.
    pub consumers: BTreeMap<NodeId, Vec<Atom>>,
    /// Parent to child edges of the decomposition.
    pub decomposition: Vec<(NodeId, NodeId)>,
}

impl CausalLinkGraph {
    pub fn producer(&self, consumer: NodeId, atom: &Atom) -> Option<Producer> {
        self.links
            .iter()
            .find(|l| l.consumer == consumer && &l.atom == atom)
            .map(|l| l.producer)
    }

    /// Links into the nodes whose own preconditions make up pre*(id).
    pub fn pre_star_links(
        &self,
        tree: &DecompositionTree,
        id: NodeId,
    ) -> Result<Vec<&CausalLink>, ModelError> {
        let chain = tree.pre_star_chain(id)?;
        Ok(self
            .links
            .iter()
            .filter(|l| chain.contains(&l.consumer))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkError {
    #[error("tree is not applicable: {literal} fails before node {node}")]
    Inapplicable { node: NodeId, literal: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Links every positive atom consumed by a method or action precondition to
/// its latest producer before the consumer's first leaf.
pub fn build_links(
    tree: &DecompositionTree,
    s0: &State,
    universe: &Universe,
) -> Result<CausalLinkGraph, LinkError> {
    if let Some(f) = tree.first_tree_failure(s0, universe)? {
        return Err(LinkError::Inapplicable {
            node: f.node,
            literal: f.literal,
        });
    }
    let spans = tree.leaf_spans();
    let mut starting: HashMap<usize, Vec<&Node>> = HashMap::new();
    let mut g = CausalLinkGraph::default();
    fn walk<'a>(
        n: &'a Node,
        spans: &HashMap<NodeId, (usize, usize)>,
        g: &mut CausalLinkGraph,
        starting: &mut HashMap<usize, Vec<&'a Node>>,
    ) {
        if let Some(&(first, _)) = spans.get(&n.id) {
            starting.entry(first).or_default().push(n);
        }
        for c in &n.children {
            g.decomposition.push((n.id, c.id));
            walk(c, spans, g, starting);
        }
    }
    walk(tree.root(), &spans, &mut g, &mut starting);

    let mut producers: HashMap<Atom, Producer> =
        s0.iter().map(|a| (a.clone(), Producer::Init)).collect();
    let mut s = s0.clone();
    for (i, leaf) in tree.leaves().into_iter().enumerate() {
        for n in starting.get(&i).into_iter().flatten() {
            let pre = n.kind.own_precondition();
            if pre.is_true() {
                continue;
            }
            let mut atoms = Vec::new();
            pre.positive_atoms(&s, universe, &mut Bindings::new(), &mut atoms)?;
            atoms.sort();
            atoms.dedup();
            for a in &atoms {
                if let Some(&p) = producers.get(a) {
                    g.links.push(CausalLink {
                        producer: p,
                        consumer: n.id,
                        atom: a.clone(),
                    });
                }
            }
            g.consumers.insert(n.id, atoms);
        }
        let a = leaf.action().unwrap();
        let (adds, dels) = a.effect.changes(&s, universe, &mut Bindings::new())?;
        for d in &dels {
            producers.remove(d);
        }
        for x in &adds {
            producers.insert(x.clone(), Producer::Action(leaf.id));
        }
        s = a.effect.apply(&s, universe)?;
    }
    Ok(g)
}

/// d_f: the earliest node of T_u whose aggregated precondition fails in the
/// projection from s_c, parents before children. None means no repair is needed.
pub fn find_failure(rp: &RepairProblem) -> Result<Option<TreeFailure>, ModelError> {
    rp.t_u.first_tree_failure(&rp.s_c, &rp.universe)
}

/// Links of the original tree broken by the disturbance: produced no later
/// than a_c, consumed in T_u, and no longer true where they are consumed.
pub fn broken_links(
    rp: &RepairProblem,
    graph: &CausalLinkGraph,
) -> Result<Vec<CausalLink>, ModelError> {
    let mut before = Vec::new();
    let mut s = rp.s_c.clone();
    for l in rp.t_u.leaves() {
        before.push(s.clone());
        s = l.action().unwrap().effect.apply(&s, &rp.universe)?;
    }
    let spans = rp.t_u.leaf_spans();
    let executed: Vec<NodeId> = rp.t_x.leaves().iter().map(|n| n.id).collect();
    Ok(graph
        .links
        .iter()
        .filter(|l| match l.producer {
            Producer::Init => true,
            Producer::Action(p) => executed.contains(&p),
        })
        .filter(
            |l| match (rp.t_u.node(l.consumer), spans.get(&l.consumer)) {
                (Some(n), Some(&(first, _))) => !n.pruned && !before[first].contains(&l.atom),
                _ => false,
            },
        )
        .cloned()
        .collect())
}

struct Sf;

impl Backtracker for Sf {
    fn repair_points(
        &self,
        rp: &RepairProblem,
        t: &DecompositionTree,
    ) -> Result<Option<Vec<NodeId>>, ModelError> {
        Ok(t.first_tree_failure(&rp.s_c, &rp.universe)?
            .map(|f| t.task_ancestors(f.node)))
    }
}

pub fn repair_sf(rp: &RepairProblem, budget: SearchBudget) -> Result<RepairOutcome, ModelError> {
    outcome(rp, drive(rp, &Sf, budget, false))
}

/// Every output of the nondeterministic algorithm within the budget.
pub fn repair_sf_all(rp: &RepairProblem, budget: SearchBudget) -> Result<AllRepairs, ModelError> {
    all_repairs(drive(rp, &Sf, budget, true))
}
