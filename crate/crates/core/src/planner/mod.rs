//! Depth-first, total-order forward decomposition.
//!
//! The search keeps an explicit stack of choice points, one per compound task
//! expanded on the current branch. Candidates for a task are ordered by method
//! source order, then by lexicographic bindings of the remaining parameters.

use std::cell::Cell;
use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::{Hash, Hasher};
use std::rc::Rc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::model::{
    domain::ground_method_schema, Bindings, DecompositionTree, Domain, GroundAction, GroundMethod,
    ModelError, Node, NodeId, NodeKind, Plan, State, Sym, Task, Term, Universe,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchBudget {
    pub time_limit: Option<Duration>,
    pub max_expansions: Option<u64>,
    /// Deepest allowed node, counting edges from the root sequence.
    pub max_depth: usize,
    pub max_nodes: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            time_limit: Some(Duration::from_secs(300)),
            max_expansions: None,
            max_depth: 256,
            max_nodes: 100_000,
        }
    }
}

impl SearchBudget {
    pub fn bounded(max_depth: usize, max_nodes: usize) -> Self {
        SearchBudget {
            max_depth,
            max_nodes,
            ..SearchBudget::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Limit {
    Time,
    Expansions,
    /// The space was searched completely except for branches cut by the depth
    /// or node bound, so unsolvability is not proven.
    Bound,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error("search limit reached: {0:?}")]
    Limit(Limit),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug)]
pub enum SearchOutcome {
    Found(DecompositionTree, Trail),
    Unsolvable,
    LimitReached(Limit),
}

/// Persistent singly linked list; frames share tails.
type Link<T> = Option<Rc<Cons<T>>>;

struct Cons<T> {
    head: T,
    tail: Link<T>,
}

fn cons<T>(head: T, tail: &Link<T>) -> Link<T> {
    Some(Rc::new(Cons {
        head,
        tail: tail.clone(),
    }))
}

#[derive(Clone)]
struct Item {
    task: Task,
    depth: usize,
    /// (task, state) digests of the compound ancestors on this branch.
    seen: Link<u64>,
}

#[derive(Clone)]
enum Decision {
    Method(Arc<GroundMethod>),
    Action(Arc<GroundAction>),
}

#[derive(Clone)]
struct Frame {
    state: Arc<State>,
    agenda: Link<Item>,
    decisions: Link<Decision>,
    nodes: usize,
}

struct ChoicePoint {
    frame: Frame,
    item: Item,
    key: u64,
    candidates: VecDeque<Arc<GroundMethod>>,
    chosen: Option<Arc<GroundMethod>>,
}

/// One planner per repair or planning call. Counters are shared by every
/// search started from it.
pub struct Planner<'a> {
    pub domain: &'a Domain,
    pub universe: &'a Universe,
    pub budget: SearchBudget,
    deadline: Option<Instant>,
    expansions: Cell<u64>,
    actions: std::cell::RefCell<HashMap<Task, Option<Arc<GroundAction>>>>,
}

impl<'a> Planner<'a> {
    pub fn new(domain: &'a Domain, universe: &'a Universe, budget: SearchBudget) -> Self {
        Planner {
            domain,
            universe,
            budget,
            deadline: budget.time_limit.map(|d| Instant::now() + d),
            expansions: Cell::new(0),
            actions: Default::default(),
        }
    }

    pub fn expansions(&self) -> u64 {
        self.expansions.get()
    }

    pub fn check_limits(&self) -> Result<(), SearchError> {
        if let Some(d) = self.deadline {
            if Instant::now() >= d {
                return Err(SearchError::Limit(Limit::Time));
            }
        }
        if let Some(m) = self.budget.max_expansions {
            if self.expansions.get() >= m {
                return Err(SearchError::Limit(Limit::Expansions));
            }
        }
        Ok(())
    }

    fn tick(&self) -> Result<(), SearchError> {
        self.expansions.set(self.expansions.get() + 1);
        self.check_limits()
    }

    /// Ground action for a primitive task; None if it is not primitive.
    pub fn primitive(&self, task: &Task) -> Result<Option<Arc<GroundAction>>, ModelError> {
        if let Some(hit) = self.actions.borrow().get(task) {
            return Ok(hit.clone());
        }
        let a = match self.domain.action(&task.name) {
            Some(schema) => {
                self.universe.check_args(&schema.params, &task.args)?;
                Some(Arc::new(self.domain.ground_action(&task.name, &task.args)?))
            }
            None => None,
        };
        self.actions.borrow_mut().insert(task.clone(), a.clone());
        Ok(a)
    }

    /// Applicable ground methods for `task` in `state`, in tie-break order.
    pub fn candidates(
        &self,
        task: &Task,
        state: &State,
    ) -> Result<Vec<Arc<GroundMethod>>, ModelError> {
        self.ground_methods(task, Some(state))
    }

    /// Every type-correct ground method for `task`, preconditions ignored.
    pub fn relevant_methods(&self, task: &Task) -> Result<Vec<Arc<GroundMethod>>, ModelError> {
        self.ground_methods(task, None)
    }

    fn ground_methods(
        &self,
        task: &Task,
        state: Option<&State>,
    ) -> Result<Vec<Arc<GroundMethod>>, ModelError> {
        let mut out = Vec::new();
        if self.domain.task_sig(&task.name).is_none() {
            return Err(ModelError::UnknownTask(task.name.to_string()));
        }
        for m in self.domain.methods_for(&task.name) {
            let mut fixed: Vec<Option<Sym>> = vec![None; m.params.len()];
            let mut ok = m.task.args.len() == task.args.len();
            for (t, actual) in m.task.args.iter().zip(&task.args) {
                if !ok {
                    break;
                }
                match t {
                    Term::Const(c) => ok = c == actual,
                    Term::Var(v) => {
                        let Some(i) = m.params.iter().position(|p| p.name == *v) else {
                            ok = false;
                            break;
                        };
                        match &fixed[i] {
                            Some(prev) => ok = prev == actual,
                            None => {
                                let ty = self.universe.type_of(actual);
                                ok = ty.is_some_and(|ty| {
                                    self.universe.is_subtype(ty, &m.params[i].ty)
                                });
                                fixed[i] = Some(actual.clone());
                            }
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let mut args: Vec<Sym> = Vec::with_capacity(m.params.len());
            self.bind_rest(&m.params, &fixed, 0, &mut args, &mut |args| {
                let keep = match state {
                    Some(s) => m.precondition.eval_in(
                        s,
                        self.universe,
                        &mut Bindings::from_pairs(&m.params, args),
                    )?,
                    None => true,
                };
                if keep {
                    out.push(Arc::new(ground_method_schema(m, args)?));
                }
                Ok(())
            })?;
        }
        Ok(out)
    }

    fn bind_rest(
        &self,
        params: &[crate::model::TypedVar],
        fixed: &[Option<Sym>],
        i: usize,
        args: &mut Vec<Sym>,
        f: &mut dyn FnMut(&[Sym]) -> Result<(), ModelError>,
    ) -> Result<(), ModelError> {
        if i == params.len() {
            return f(args);
        }
        if let Some(c) = &fixed[i] {
            args.push(c.clone());
            self.bind_rest(params, fixed, i + 1, args, f)?;
            args.pop();
            return Ok(());
        }
        for c in self.universe.objects_of(&params[i].ty)? {
            args.push(c.clone());
            self.bind_rest(params, fixed, i + 1, args, f)?;
            args.pop();
        }
        Ok(())
    }

    /// Lazy enumeration of solution trees for `tasks` from `state`.
    pub fn search(&'a self, state: &State, tasks: &[Task]) -> Search<'a> {
        let mut agenda: Link<Item> = None;
        for t in tasks.iter().rev() {
            agenda = cons(
                Item {
                    task: t.clone(),
                    depth: 1,
                    seen: None,
                },
                &agenda,
            );
        }
        Search {
            planner: self,
            tasks: tasks.to_vec(),
            start: Arc::new(state.clone()),
            stack: Vec::new(),
            current: Some(Frame {
                state: Arc::new(state.clone()),
                agenda,
                decisions: None,
                nodes: 1,
            }),
            cut: false,
            emitted: HashSet::new(),
        }
    }

    /// First solution in tie-break order, with its choice-point trail.
    pub fn solve(&'a self, state: &State, tasks: &[Task]) -> Result<SearchOutcome, ModelError> {
        let mut s = self.search(state, tasks);
        match s.next_solution() {
            Ok(Some(t)) => {
                let trail = s.trail(&t);
                Ok(SearchOutcome::Found(t, trail))
            }
            Ok(None) if s.cut => Ok(SearchOutcome::LimitReached(Limit::Bound)),
            Ok(None) => Ok(SearchOutcome::Unsolvable),
            Err(SearchError::Limit(l)) => Ok(SearchOutcome::LimitReached(l)),
            Err(SearchError::Model(e)) => Err(e),
        }
    }

    /// Every solution within the bound. `exhausted` is false when some branch
    /// was cut by the bound or a time/expansion limit stopped the search.
    pub fn solve_all(&'a self, state: &State, tasks: &[Task]) -> Result<Enumeration, ModelError> {
        let mut s = self.search(state, tasks);
        let mut trees = Vec::new();
        loop {
            match s.next_solution() {
                Ok(Some(t)) => trees.push(t),
                Ok(None) => {
                    return Ok(Enumeration {
                        trees,
                        exhausted: !s.cut,
                        limit: s.cut.then_some(Limit::Bound),
                    })
                }
                Err(SearchError::Limit(l)) => {
                    return Ok(Enumeration {
                        trees,
                        exhausted: false,
                        limit: Some(l),
                    })
                }
                Err(SearchError::Model(e)) => return Err(e),
            }
        }
    }

    /// Re-enters the search at `target`'s choice point with `state` in place of
    /// the state recorded there. Decisions outside the target subtree are kept
    /// by the caller; the returned search yields replacement subtrees (as
    /// single-task trees). Targeting the root re-solves the whole task list.
    pub fn resume_from(
        &'a self,
        trail: &Trail,
        target: NodeId,
        state: &State,
        frozen_prefix: &Plan,
    ) -> Result<Search<'a>, ModelError> {
        let plan = &trail.plan;
        let n = frozen_prefix.len();
        if n > plan.len() || plan.actions[..n] != frozen_prefix.actions[..] {
            return Err(ModelError::Structure(
                "frozen prefix is not a prefix of the trail's plan".into(),
            ));
        }
        if target == trail.root {
            return Ok(self.search(state, &trail.tasks));
        }
        let Some(p) = trail.points.iter().find(|p| p.node == target) else {
            return Err(ModelError::Structure(format!(
                "node {target} has no choice point in the trail"
            )));
        };
        if p.last_leaf < n {
            return Err(ModelError::Structure(format!(
                "node {target} is fully executed and cannot be revisited"
            )));
        }
        Ok(self.search(state, std::slice::from_ref(&p.task)))
    }
}

pub struct Enumeration {
    pub trees: Vec<DecompositionTree>,
    pub exhausted: bool,
    pub limit: Option<Limit>,
}

/// Choice point of one compound task in a found solution.
#[derive(Clone, Debug)]
pub struct TrailPoint {
    pub node: NodeId,
    pub task: Task,
    pub state: Arc<State>,
    pub chosen: Arc<GroundMethod>,
    /// Candidates not yet tried when the solution was found.
    pub remaining: Vec<Arc<GroundMethod>>,
    /// Leaf index range covered by the node (first, last); empty methods
    /// cover their dummy.
    pub first_leaf: usize,
    pub last_leaf: usize,
}

#[derive(Clone, Debug)]
pub struct Trail {
    pub root: NodeId,
    pub tasks: Vec<Task>,
    pub plan: Plan,
    /// Preorder, i.e. the order the decisions were made.
    pub points: Vec<TrailPoint>,
}

impl Trail {
    pub fn point(&self, node: NodeId) -> Option<&TrailPoint> {
        self.points.iter().find(|p| p.node == node)
    }

    /// Rebuilds the trail of an existing tree (for instance one loaded from
    /// disk) by replaying it from `state` and recomputing candidates.
    pub fn from_tree(
        tree: &DecompositionTree,
        state: &State,
        planner: &Planner,
    ) -> Result<Trail, ModelError> {
        let mut t = tree.clone();
        t.annotate_states(state, planner.universe);
        let spans = t.leaf_spans();
        let mut points = Vec::new();
        fn walk(
            n: &Node,
            planner: &Planner,
            spans: &HashMap<NodeId, (usize, usize)>,
            out: &mut Vec<TrailPoint>,
        ) -> Result<(), ModelError> {
            if let (NodeKind::Task(task), Some(m)) = (&n.kind, n.children.first()) {
                if let (NodeKind::Method(chosen), Some(st)) = (&m.kind, &n.state) {
                    let all = planner.candidates(task, st)?;
                    let pos = all
                        .iter()
                        .position(|c| c.name == chosen.name && c.args == chosen.args);
                    let remaining = match pos {
                        Some(i) => all[i + 1..].to_vec(),
                        None => all,
                    };
                    let (first_leaf, last_leaf) = spans.get(&n.id).copied().unwrap_or((0, 0));
                    out.push(TrailPoint {
                        node: n.id,
                        task: task.clone(),
                        state: st.clone(),
                        chosen: chosen.clone(),
                        remaining,
                        first_leaf,
                        last_leaf,
                    });
                }
            }
            for c in &n.children {
                walk(c, planner, spans, out)?;
            }
            Ok(())
        }
        walk(t.root(), planner, &spans, &mut points)?;
        Ok(Trail {
            root: t.root().id,
            tasks: t
                .root()
                .children
                .iter()
                .filter_map(|c| c.kind.task())
                .collect(),
            plan: t.plan(),
            points,
        })
    }
}

pub struct Search<'a> {
    planner: &'a Planner<'a>,
    tasks: Vec<Task>,
    start: Arc<State>,
    stack: Vec<ChoicePoint>,
    current: Option<Frame>,
    cut: bool,
    emitted: HashSet<String>,
}

fn digest(task: &Task, state: &State) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    task.hash(&mut h);
    state.digest().hash(&mut h);
    h.finish()
}

impl<'a> Search<'a> {
    /// True when some branch was cut by the depth or node bound.
    pub fn was_cut(&self) -> bool {
        self.cut
    }

    pub fn next_solution(&mut self) -> Result<Option<DecompositionTree>, SearchError> {
        let budget = self.planner.budget;
        loop {
            let Some(frame) = self.current.take() else {
                if !self.backtrack()? {
                    return Ok(None);
                }
                continue;
            };
            let Some(cell) = frame.agenda.clone() else {
                let tree = self.build(&frame)?;
                if self.emitted.insert(tree.canonical_key()) {
                    return Ok(Some(tree));
                }
                continue;
            };
            let item = cell.head.clone();
            let rest = Frame {
                agenda: cell.tail.clone(),
                ..frame
            };
            if item.depth > budget.max_depth {
                self.cut = true;
                continue;
            }
            if let Some(a) = self.planner.primitive(&item.task)? {
                if rest.nodes + 1 > budget.max_nodes {
                    self.cut = true;
                    continue;
                }
                if a.precondition.eval(&rest.state, self.planner.universe)? {
                    let next = a.effect.apply(&rest.state, self.planner.universe)?;
                    self.current = Some(Frame {
                        state: Arc::new(next),
                        decisions: cons(Decision::Action(a), &rest.decisions),
                        nodes: rest.nodes + 1,
                        agenda: rest.agenda,
                    });
                }
                continue;
            }
            self.planner.tick()?;
            let key = digest(&item.task, &rest.state);
            let mut seen = &item.seen;
            let mut cyclic = false;
            while let Some(c) = seen {
                if c.head == key {
                    cyclic = true;
                    break;
                }
                seen = &c.tail;
            }
            if cyclic {
                continue;
            }
            let candidates = self.planner.candidates(&item.task, &rest.state)?;
            self.stack.push(ChoicePoint {
                frame: rest,
                item,
                key,
                candidates: candidates.into(),
                chosen: None,
            });
        }
    }

    fn backtrack(&mut self) -> Result<bool, SearchError> {
        let budget = self.planner.budget;
        while let Some(cp) = self.stack.last_mut() {
            let Some(m) = cp.candidates.pop_front() else {
                self.stack.pop();
                continue;
            };
            cp.chosen = Some(m.clone());
            let d = cp.item.depth;
            let extra = if m.subtasks.is_empty() { 3 } else { 2 };
            if d + if m.subtasks.is_empty() { 2 } else { 1 } > budget.max_depth
                || (!m.subtasks.is_empty() && d + 2 > budget.max_depth)
                || cp.frame.nodes + extra > budget.max_nodes
            {
                self.cut = true;
                continue;
            }
            let seen = cons(cp.key, &cp.item.seen);
            let mut agenda = cp.frame.agenda.clone();
            for st in m.subtasks.iter().rev() {
                agenda = cons(
                    Item {
                        task: st.clone(),
                        depth: d + 2,
                        seen: seen.clone(),
                    },
                    &agenda,
                );
            }
            self.current = Some(Frame {
                state: cp.frame.state.clone(),
                agenda,
                decisions: cons(Decision::Method(m), &cp.frame.decisions),
                nodes: cp.frame.nodes + extra,
            });
            return Ok(true);
        }
        Ok(false)
    }

    fn build(&self, frame: &Frame) -> Result<DecompositionTree, SearchError> {
        let mut decisions = Vec::new();
        let mut cur = &frame.decisions;
        while let Some(c) = cur {
            decisions.push(c.head.clone());
            cur = &c.tail;
        }
        decisions.reverse();
        let mut it = decisions.into_iter();
        let mut next: NodeId = 1;
        fn task_node(
            task: &Task,
            it: &mut std::vec::IntoIter<Decision>,
            next: &mut NodeId,
        ) -> Result<Node, ModelError> {
            let id = *next;
            *next += 1;
            match it.next() {
                Some(Decision::Action(a)) => Ok(Node::new(id, NodeKind::Action(a))),
                Some(Decision::Method(m)) => {
                    if m.task != *task {
                        return Err(ModelError::Structure(format!(
                            "decision for {} applied to {task}",
                            m.task
                        )));
                    }
                    let mut tn = Node::new(id, NodeKind::Task(task.clone()));
                    let mut mn = Node::new(*next, NodeKind::Method(m.clone()));
                    *next += 1;
                    if m.subtasks.is_empty() {
                        mn.children
                            .push(Node::new(*next, NodeKind::Action(GroundAction::dummy())));
                        *next += 1;
                    } else {
                        for st in &m.subtasks {
                            mn.children.push(task_node(st, it, next)?);
                        }
                    }
                    tn.children.push(mn);
                    Ok(tn)
                }
                None => Err(ModelError::Structure("decision trail ended early".into())),
            }
        }
        let mut root = Node::new(0, NodeKind::Root);
        for t in &self.tasks {
            root.children.push(task_node(t, &mut it, &mut next)?);
        }
        let mut tree = DecompositionTree::from_root(root)?;
        tree.annotate_states(&self.start, self.planner.universe);
        Ok(tree)
    }

    /// Choice points of the solution just returned, in decision order.
    pub fn trail(&self, tree: &DecompositionTree) -> Trail {
        let spans = tree.leaf_spans();
        let mut tasks_pre = Vec::new();
        fn walk(n: &Node, out: &mut Vec<NodeId>) {
            if matches!(n.kind, NodeKind::Task(_)) {
                out.push(n.id);
            }
            for c in &n.children {
                walk(c, out);
            }
        }
        walk(tree.root(), &mut tasks_pre);
        let points = self
            .stack
            .iter()
            .zip(tasks_pre)
            .map(|(cp, node)| {
                let (first_leaf, last_leaf) = spans.get(&node).copied().unwrap_or((0, 0));
                TrailPoint {
                    node,
                    task: cp.item.task.clone(),
                    state: cp.frame.state.clone(),
                    chosen: cp.chosen.clone().expect("expanded"),
                    remaining: cp.candidates.iter().cloned().collect(),
                    first_leaf,
                    last_leaf,
                }
            })
            .collect();
        Trail {
            root: tree.root().id,
            tasks: self.tasks.clone(),
            plan: tree.plan(),
            points,
        }
    }
}

/// Subtree for the single task of a one-task solution tree.
pub fn single_subtree(tree: DecompositionTree) -> Node {
    let mut root = tree.into_root();
    assert_eq!(root.children.len(), 1, "expected a single-task tree");
    root.children.pop().unwrap()
}
