//! The three repair strategies and what they share.

pub mod ipyhopper;
pub mod rewrite;
pub mod shopfixer;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::disturbance::RepairProblem;
use crate::model::{DecompositionTree, ModelError, NodeId, State};
use crate::planner::{single_subtree, Limit, Planner, SearchBudget, SearchError, Trail};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Rw,
    Sf,
    Ip,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Rw, Strategy::Sf, Strategy::Ip];
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Rw => "rw",
            Strategy::Sf => "sf",
            Strategy::Ip => "ip",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "rw" => Ok(Strategy::Rw),
            "sf" => Ok(Strategy::Sf),
            "ip" => Ok(Strategy::Ip),
            _ => Err(format!("unknown strategy `{s}` (expected rw, sf or ip)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Repair {
    /// Repaired unexecuted part.
    pub t_u: DecompositionTree,
    /// Executed part joined with `t_u`, states annotated from s0.
    pub full: DecompositionTree,
    pub changed_nodes: usize,
    pub expansions: u64,
}

#[derive(Clone, Debug)]
pub enum RepairOutcome {
    Repaired(Repair),
    Unrepairable,
    LimitReached(Limit),
}

impl RepairOutcome {
    pub fn repaired(&self) -> Option<&Repair> {
        match self {
            RepairOutcome::Repaired(r) => Some(r),
            _ => None,
        }
    }
}

pub fn repair(
    rp: &RepairProblem,
    strategy: Strategy,
    budget: SearchBudget,
) -> Result<RepairOutcome, ModelError> {
    match strategy {
        Strategy::Rw => rewrite::repair_rw(rp, budget),
        Strategy::Sf => shopfixer::repair_sf(rp, budget),
        Strategy::Ip => ipyhopper::repair_ip(rp, budget),
    }
}

/// Failure test and repair-point order of a backtracking strategy.
pub(crate) trait Backtracker {
    /// Repair points for `t`, in the order they are tried; None accepts `t`.
    fn repair_points(
        &self,
        rp: &RepairProblem,
        t: &DecompositionTree,
    ) -> Result<Option<Vec<NodeId>>, ModelError>;
}

pub(crate) struct Driven {
    pub found: Vec<DecompositionTree>,
    pub exhausted: bool,
    pub expansions: u64,
}

/// Induction chains longer than this are cut and reported as not exhausted.
const MAX_CHAIN: usize = 64;

/// Depth-first walk over repair-point choices and replacement subtrees. Stops
/// at the first accepted tree unless `all` is set.
pub(crate) fn drive(
    rp: &RepairProblem,
    strategy: &dyn Backtracker,
    budget: SearchBudget,
    all: bool,
) -> Result<Driven, SearchError> {
    let planner = Planner::new(&rp.domain, &rp.universe, budget);
    let mut st = DriveState {
        rp,
        strategy,
        planner: &planner,
        all,
        seen: HashSet::new(),
        found: Vec::new(),
        exhausted: true,
    };
    st.seen.insert(rp.t_u.canonical_key());
    st.visit(rp.t_u.clone(), 0)?;
    Ok(Driven {
        found: st.found,
        exhausted: st.exhausted,
        expansions: planner.expansions(),
    })
}

struct DriveState<'a> {
    rp: &'a RepairProblem,
    strategy: &'a dyn Backtracker,
    planner: &'a Planner<'a>,
    all: bool,
    seen: HashSet<String>,
    found: Vec<DecompositionTree>,
    exhausted: bool,
}

impl DriveState<'_> {
    /// Returns true to stop the whole walk.
    fn visit(&mut self, t: DecompositionTree, depth: usize) -> Result<bool, SearchError> {
        self.planner.check_limits()?;
        let Some(points) = self.strategy.repair_points(self.rp, &t)? else {
            self.found.push(t);
            return Ok(!self.all);
        };
        if depth >= MAX_CHAIN {
            self.exhausted = false;
            return Ok(false);
        }
        let full = self.rp.full_tree(&t)?;
        let trail = Trail::from_tree(&full, &self.rp.s0, self.planner)?;
        for t_r in points {
            let s_r = repair_state(self.rp, &t, t_r)?;
            let mut search = self.planner.resume_from(&trail, t_r, &s_r, &self.rp.pi_x)?;
            while let Some(sol) = search.next_solution()? {
                let next = t.replace(&[t_r], vec![single_subtree(sol)])?;
                if self.seen.insert(next.canonical_key()) && self.visit(next, depth + 1)? {
                    return Ok(true);
                }
            }
            if search.was_cut() {
                self.exhausted = false;
            }
        }
        Ok(false)
    }
}

/// State right before repair point `t_r` of an unexecuted part `t`: s_c for a
/// partially executed point, otherwise the replay of `t` from s_c.
pub fn repair_state(
    rp: &RepairProblem,
    t: &DecompositionTree,
    t_r: NodeId,
) -> Result<State, ModelError> {
    let n = t
        .node(t_r)
        .ok_or_else(|| ModelError::Structure(format!("no node {t_r}")))?;
    if n.pruned {
        return Ok(rp.s_c.clone());
    }
    t.state_before(t_r, &rp.s_c, &rp.universe)
}

pub(crate) fn finish(
    rp: &RepairProblem,
    mut t_u: DecompositionTree,
    expansions: u64,
) -> Result<Repair, ModelError> {
    rp.annotate(&mut t_u);
    let full = rp.full_tree(&t_u)?;
    Ok(Repair {
        changed_nodes: DecompositionTree::changed_nodes(&rp.t_u, &t_u),
        t_u,
        full,
        expansions,
    })
}

pub(crate) fn outcome(
    rp: &RepairProblem,
    r: Result<Driven, SearchError>,
) -> Result<RepairOutcome, ModelError> {
    match r {
        Ok(d) => match d.found.into_iter().next() {
            Some(t) => Ok(RepairOutcome::Repaired(finish(rp, t, d.expansions)?)),
            None if d.exhausted => Ok(RepairOutcome::Unrepairable),
            None => Ok(RepairOutcome::LimitReached(Limit::Bound)),
        },
        Err(SearchError::Limit(l)) => Ok(RepairOutcome::LimitReached(l)),
        Err(SearchError::Model(e)) => Err(e),
    }
}

/// Every tree a backtracking strategy can return, with an exhaustiveness flag.
#[derive(Clone, Debug)]
pub struct AllRepairs {
    pub trees: Vec<DecompositionTree>,
    pub exhausted: bool,
}

pub(crate) fn all_repairs(r: Result<Driven, SearchError>) -> Result<AllRepairs, ModelError> {
    match r {
        Ok(d) => Ok(AllRepairs {
            trees: d.found,
            exhausted: d.exhausted,
        }),
        Err(SearchError::Limit(_)) => Ok(AllRepairs {
            trees: Vec::new(),
            exhausted: false,
        }),
        Err(SearchError::Model(e)) => Err(e),
    }
}
