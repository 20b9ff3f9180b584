use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::sync::Arc;

use super::atom::State;
use super::domain::{GroundAction, GroundMethod, Task, Universe};
use super::formula::{Bindings, Formula};
use super::plan::Plan;
use super::ModelError;

pub type NodeId = u32;

#[derive(Clone, Debug)]
pub enum NodeKind {
    Root,
    Task(Task),
    Method(Arc<GroundMethod>),
    Action(Arc<GroundAction>),
}

impl NodeKind {
    /// The task this node stands for (for actions, the primitive task).
    pub fn task(&self) -> Option<Task> {
        match self {
            NodeKind::Task(t) => Some(t.clone()),
            NodeKind::Action(a) => Some(a.task()),
            _ => None,
        }
    }

    /// Label used for structural comparison; ignores ids and states.
    pub fn label(&self) -> String {
        match self {
            NodeKind::Root => "root".into(),
            NodeKind::Task(t) => format!("task {t}"),
            NodeKind::Method(m) => format!("method {m}"),
            NodeKind::Action(a) => format!("action {}", a.task()),
        }
    }

    pub fn own_precondition(&self) -> Formula {
        match self {
            NodeKind::Method(m) => m.precondition.clone(),
            NodeKind::Action(a) => a.precondition.clone(),
            _ => Formula::True,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Partially executed node seen from one side of a split.
    pub pruned: bool,
    /// State right before this node's first leaf, when known.
    pub state: Option<Arc<State>>,
    pub children: Vec<Node>,
}

impl Node {
    pub fn new(id: NodeId, kind: NodeKind) -> Self {
        Node {
            id,
            kind,
            pruned: false,
            state: None,
            children: Vec::new(),
        }
    }

    pub fn is_action(&self) -> bool {
        matches!(self.kind, NodeKind::Action(_))
    }

    pub fn is_task(&self) -> bool {
        matches!(self.kind, NodeKind::Task(_))
    }

    pub fn action(&self) -> Option<&Arc<GroundAction>> {
        match &self.kind {
            NodeKind::Action(a) => Some(a),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Node::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Node::depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Node>) {
        if self.is_action() {
            out.push(self);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    pub fn plan(&self) -> Plan {
        Plan::new(
            self.leaves()
                .iter()
                .filter_map(|n| n.action().cloned())
                .collect(),
        )
    }

    pub fn canonical_key(&self) -> String {
        let mut s = String::new();
        self.write_key(&mut s);
        s
    }

    fn write_key(&self, out: &mut String) {
        out.push('(');
        if self.pruned {
            out.push('~');
        }
        out.push_str(&self.kind.label());
        for c in &self.children {
            out.push(' ');
            c.write_key(out);
        }
        out.push(')');
    }

    fn max_id(&self) -> NodeId {
        self.children
            .iter()
            .map(Node::max_id)
            .fold(self.id, NodeId::max)
    }

    fn ids(&self, out: &mut Vec<NodeId>) {
        out.push(self.id);
        for c in &self.children {
            c.ids(out);
        }
    }

    /// Gives every node a fresh id from `next`.
    pub fn renumber(&mut self, next: &mut NodeId) {
        self.id = *next;
        *next += 1;
        for c in &mut self.children {
            c.renumber(next);
        }
    }

    pub fn clear_states(&mut self) {
        self.state = None;
        for c in &mut self.children {
            c.clear_states();
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecStatus {
    FullyExecuted,
    PartiallyExecuted,
    Unexecuted,
}

/// First action whose aggregated precondition fails, and the topmost node of
/// its first-child chain whose own precondition is violated.
#[derive(Clone, Debug)]
pub struct TreeFailure {
    pub action: NodeId,
    pub node: NodeId,
    /// Index of `action` among the tree's action leaves.
    pub index: usize,
    pub state: State,
    pub formula: Formula,
    pub literal: String,
}

/// An ordered decomposition tree with a root-sequence node on top.
#[derive(Clone, Debug)]
pub struct DecompositionTree {
    root: Node,
    next_id: NodeId,
    paths: HashMap<NodeId, Vec<usize>>,
    postorder: Vec<NodeId>,
}

impl PartialEq for DecompositionTree {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}

impl DecompositionTree {
    pub fn empty() -> Self {
        Self::from_root(Node::new(0, NodeKind::Root)).expect("empty tree is well formed")
    }

    pub fn from_root(root: Node) -> Result<Self, ModelError> {
        if !matches!(root.kind, NodeKind::Root) {
            return Err(ModelError::Structure(
                "top node must be the root sequence".into(),
            ));
        }
        let mut t = DecompositionTree {
            next_id: root.max_id() + 1,
            root,
            paths: HashMap::new(),
            postorder: Vec::new(),
        };
        t.reindex()?;
        Ok(t)
    }

    /// Tree with a root over the given task-rooted subtrees, renumbered.
    pub fn from_children(children: Vec<Node>) -> Self {
        let mut root = Node::new(0, NodeKind::Root);
        root.children = children;
        let mut next = 0;
        root.renumber(&mut next);
        Self::from_root(root).expect("fresh ids are unique")
    }

    fn reindex(&mut self) -> Result<(), ModelError> {
        self.paths.clear();
        self.postorder.clear();
        fn walk(
            n: &Node,
            path: &mut Vec<usize>,
            paths: &mut HashMap<NodeId, Vec<usize>>,
            post: &mut Vec<NodeId>,
        ) -> Result<(), ModelError> {
            if paths.insert(n.id, path.clone()).is_some() {
                return Err(ModelError::Structure(format!("duplicate node id {}", n.id)));
            }
            for (i, c) in n.children.iter().enumerate() {
                path.push(i);
                walk(c, path, paths, post)?;
                path.pop();
            }
            post.push(n.id);
            Ok(())
        }
        walk(
            &self.root,
            &mut Vec::new(),
            &mut self.paths,
            &mut self.postorder,
        )?;
        self.next_id = self.next_id.max(self.root.max_id() + 1);
        Ok(())
    }

    /// Checks the shape rules of a complete tree: actions are leaves, tasks
    /// have exactly one method child, methods have their subtasks in order or
    /// a single dummy.
    pub fn check_structure(&self) -> Result<(), ModelError> {
        fn bad<T>(msg: String) -> Result<T, ModelError> {
            Err(ModelError::Structure(msg))
        }
        fn check(n: &Node, is_root: bool) -> Result<(), ModelError> {
            match &n.kind {
                NodeKind::Root if !is_root => bad(format!("nested root at node {}", n.id))?,
                NodeKind::Root => {
                    for c in &n.children {
                        if !(c.is_task() || c.is_action()) {
                            bad(format!("root child {} is not a task", c.id))?;
                        }
                    }
                }
                NodeKind::Action(_) if !n.children.is_empty() => {
                    bad(format!("action node {} has children", n.id))?
                }
                NodeKind::Action(_) => {}
                NodeKind::Task(t) => {
                    if n.children.len() != 1 {
                        bad(format!("task {t} (node {}) needs exactly one method", n.id))?;
                    }
                    match &n.children[0].kind {
                        NodeKind::Method(m) if m.task == *t => {}
                        _ => bad(format!("task {t} (node {}) has a wrong child", n.id))?,
                    }
                }
                NodeKind::Method(m) => {
                    if n.pruned {
                        // a split side keeps only part of the subtasks
                    } else if m.subtasks.is_empty() {
                        if n.children.len() != 1
                            || !n.children[0].action().is_some_and(|a| a.is_dummy())
                        {
                            bad(format!("empty method {m} needs one dummy child"))?;
                        }
                    } else {
                        if n.children.len() != m.subtasks.len() {
                            bad(format!("method {m} has {} children", n.children.len()))?;
                        }
                        for (c, st) in n.children.iter().zip(&m.subtasks) {
                            if c.kind.task().as_ref() != Some(st) {
                                bad(format!("method {m}: child {} is not {st}", c.id))?;
                            }
                        }
                    }
                }
            }
            n.children.iter().try_for_each(|c| check(c, false))
        }
        check(&self.root, true)
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn into_root(self) -> Node {
        self.root
    }

    pub fn next_id(&self) -> NodeId {
        self.next_id
    }

    /// Raises the id counter; ids below it are never handed out again.
    pub fn set_next_id(&mut self, next: NodeId) {
        self.next_id = self.next_id.max(next);
    }

    pub fn postorder(&self) -> &[NodeId] {
        &self.postorder
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.paths.contains_key(&id)
    }

    pub fn path(&self, id: NodeId) -> Option<&[usize]> {
        self.paths.get(&id).map(Vec::as_slice)
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        let mut n = &self.root;
        for &i in self.paths.get(&id)? {
            n = &n.children[i];
        }
        Some(n)
    }

    fn node_mut(&mut self, id: NodeId) -> Option<&mut Node> {
        let path = self.paths.get(&id)?.clone();
        let mut n = &mut self.root;
        for i in path {
            n = &mut n.children[i];
        }
        Some(n)
    }

    fn structural(id: NodeId) -> ModelError {
        ModelError::Structure(format!("node {id} is not in the tree"))
    }

    pub fn parent(&self, id: NodeId) -> Option<&Node> {
        let path = self.paths.get(&id)?;
        let (_, up) = path.split_last()?;
        let mut n = &self.root;
        for &i in up {
            n = &n.children[i];
        }
        Some(n)
    }

    /// Ancestors nearest first, ending with the root.
    pub fn ancestors(&self, id: NodeId) -> Vec<&Node> {
        let Some(path) = self.paths.get(&id) else {
            return Vec::new();
        };
        let mut chain = vec![&self.root];
        let mut n = &self.root;
        for &i in &path[..path.len().saturating_sub(1)] {
            n = &n.children[i];
            chain.push(n);
        }
        if path.is_empty() {
            return Vec::new();
        }
        chain.reverse();
        chain
    }

    /// Task ancestors of `id`, nearest first.
    pub fn task_ancestors(&self, id: NodeId) -> Vec<NodeId> {
        self.ancestors(id)
            .into_iter()
            .filter(|n| n.is_task())
            .map(|n| n.id)
            .collect()
    }

    pub fn leaves(&self) -> Vec<&Node> {
        self.root.leaves()
    }

    pub fn plan(&self) -> Plan {
        self.root.plan()
    }

    pub fn size(&self) -> usize {
        self.root.size()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn canonical_key(&self) -> String {
        self.root.canonical_key()
    }

    fn leaf_positions(&self) -> HashMap<NodeId, usize> {
        self.leaves()
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id, i))
            .collect()
    }

    /// (first, last) leaf positions under each node.
    pub fn leaf_spans(&self) -> HashMap<NodeId, (usize, usize)> {
        fn walk(
            n: &Node,
            next: &mut usize,
            out: &mut HashMap<NodeId, (usize, usize)>,
        ) -> Option<(usize, usize)> {
            let span = if n.is_action() {
                let p = *next;
                *next += 1;
                Some((p, p))
            } else {
                let mut span: Option<(usize, usize)> = None;
                for c in &n.children {
                    if let Some((a, b)) = walk(c, next, out) {
                        span = Some(match span {
                            None => (a, b),
                            Some((x, _)) => (x, b),
                        });
                    }
                }
                span
            };
            if let Some(s) = span {
                out.insert(n.id, s);
            }
            span
        }
        let mut out = HashMap::new();
        walk(&self.root, &mut 0, &mut out);
        out
    }

    fn leaf_index(&self, a_c: NodeId) -> Result<usize, ModelError> {
        let n = self.node(a_c).ok_or_else(|| Self::structural(a_c))?;
        if !n.is_action() {
            return Err(ModelError::Structure(format!(
                "node {a_c} is not an action leaf"
            )));
        }
        Ok(self.leaf_positions()[&a_c])
    }

    pub fn exec_status(&self, a_c: NodeId, t: NodeId) -> Result<ExecStatus, ModelError> {
        let p = self.leaf_index(a_c)?;
        let spans = self.leaf_spans();
        if !self.contains(t) {
            return Err(Self::structural(t));
        }
        Ok(match spans.get(&t) {
            None => ExecStatus::Unexecuted,
            Some(&(_, last)) if last <= p => ExecStatus::FullyExecuted,
            Some(&(first, _)) if first > p => ExecStatus::Unexecuted,
            Some(_) => ExecStatus::PartiallyExecuted,
        })
    }

    /// Splits after the action leaf `a_c` into (T_x, T_u). Nodes straddling the
    /// cut appear on both sides with `pruned` set and keep their ids.
    pub fn split(&self, a_c: NodeId) -> Result<(DecompositionTree, DecompositionTree), ModelError> {
        let p = self.leaf_index(a_c)?;
        let spans = self.leaf_spans();
        fn side(
            n: &Node,
            spans: &HashMap<NodeId, (usize, usize)>,
            p: usize,
            executed: bool,
        ) -> Option<Node> {
            let span = spans.get(&n.id).copied();
            let keep = match span {
                Some((first, last)) => {
                    if executed {
                        first <= p
                    } else {
                        last > p
                    }
                }
                None => false,
            };
            if !keep && !matches!(n.kind, NodeKind::Root) {
                return None;
            }
            let partial = matches!(span, Some((f, l)) if f <= p && l > p);
            let mut out = Node {
                id: n.id,
                kind: n.kind.clone(),
                pruned: n.pruned || (partial && !matches!(n.kind, NodeKind::Root)),
                state: None,
                children: n
                    .children
                    .iter()
                    .filter_map(|c| side(c, spans, p, executed))
                    .collect(),
            };
            out.state = if executed || !partial {
                n.state.clone()
            } else {
                out.first_leaf_state()
            };
            Some(out)
        }
        let x = side(&self.root, &spans, p, true).expect("root kept");
        let u = side(&self.root, &spans, p, false).expect("root kept");
        let mut tx = DecompositionTree::from_root(x)?;
        let mut tu = DecompositionTree::from_root(u)?;
        tx.next_id = self.next_id;
        tu.next_id = self.next_id;
        Ok((tx, tu))
    }

    /// Inverse of split: merges the two sides along their shared spine.
    pub fn graft(
        x: &DecompositionTree,
        u: &DecompositionTree,
    ) -> Result<DecompositionTree, ModelError> {
        fn merge(a: &Node, b: &Node) -> Node {
            let mut children: Vec<Node> = a.children.clone();
            let mut rest = b.children.as_slice();
            if let (Some(last), Some(first)) = (children.last_mut(), rest.first()) {
                if last.id == first.id {
                    *last = merge(last, first);
                    rest = &rest[1..];
                }
            }
            children.extend(rest.iter().cloned());
            Node {
                id: a.id,
                kind: a.kind.clone(),
                pruned: false,
                state: a.state.clone().or_else(|| b.state.clone()),
                children,
            }
        }
        let root = merge(&x.root, &u.root);
        let mut t = DecompositionTree::from_root(root)?;
        t.next_id = t.next_id.max(x.next_id).max(u.next_id);
        Ok(t)
    }

    /// Aggregated precondition of a node. A node inherits its parent's only
    /// when it is a method under a task or the first child of a method, and
    /// the parent is not a partially executed (pruned) node.
    pub fn pre_star(&self, id: NodeId) -> Result<Formula, ModelError> {
        let chain = self.pre_star_chain(id)?;
        Ok(Formula::and(
            chain
                .iter()
                .map(|&n| self.node(n).unwrap().kind.own_precondition())
                .collect(),
        ))
    }

    /// Nodes whose own preconditions make up pre*(id), topmost first.
    pub fn pre_star_chain(&self, id: NodeId) -> Result<Vec<NodeId>, ModelError> {
        let path = self
            .paths
            .get(&id)
            .ok_or_else(|| Self::structural(id))?
            .clone();
        let mut chain = vec![id];
        let mut depth = path.len();
        while depth > 1 {
            let idx = path[depth - 1];
            let child = self.node_at(&path[..depth]);
            let parent = self.node_at(&path[..depth - 1]);
            let inherits = !parent.pruned
                && match (&parent.kind, &child.kind) {
                    (NodeKind::Task(_), NodeKind::Method(_)) => true,
                    (NodeKind::Method(_), _) => idx == 0,
                    _ => false,
                };
            if !inherits {
                break;
            }
            chain.push(parent.id);
            depth -= 1;
        }
        chain.reverse();
        Ok(chain)
    }

    fn node_at(&self, path: &[usize]) -> &Node {
        let mut n = &self.root;
        for &i in path {
            n = &n.children[i];
        }
        n
    }

    /// First violation of tree applicability from `state`, if any.
    pub fn first_tree_failure(
        &self,
        state: &State,
        universe: &Universe,
    ) -> Result<Option<TreeFailure>, ModelError> {
        let mut s = state.clone();
        for (i, leaf) in self.leaves().into_iter().enumerate() {
            let chain = self.pre_star_chain(leaf.id)?;
            for &n in &chain {
                let f = self.node(n).unwrap().kind.own_precondition();
                if let Some(lit) = f.first_false(&s, universe, &mut Bindings::new())? {
                    return Ok(Some(TreeFailure {
                        action: leaf.id,
                        node: n,
                        index: i,
                        state: s,
                        formula: self.pre_star(leaf.id)?,
                        literal: lit,
                    }));
                }
            }
            s = leaf.action().unwrap().effect.apply(&s, universe)?;
        }
        Ok(None)
    }

    pub fn tree_applicable(&self, state: &State, universe: &Universe) -> Result<bool, ModelError> {
        Ok(self.first_tree_failure(state, universe)?.is_none())
    }

    /// First action (as node id, leaf index) whose own precondition fails.
    pub fn first_plan_failure(
        &self,
        state: &State,
        universe: &Universe,
    ) -> Result<Option<TreeFailure>, ModelError> {
        let mut s = state.clone();
        for (i, leaf) in self.leaves().into_iter().enumerate() {
            let a = leaf.action().unwrap();
            if let Some(lit) = a
                .precondition
                .first_false(&s, universe, &mut Bindings::new())?
            {
                return Ok(Some(TreeFailure {
                    action: leaf.id,
                    node: leaf.id,
                    index: i,
                    state: s,
                    formula: a.precondition.clone(),
                    literal: lit,
                }));
            }
            s = a.effect.apply(&s, universe)?;
        }
        Ok(None)
    }

    /// Recomputes cached input states by replaying leaf effects from `state`.
    /// Preconditions are not checked; nodes after an unknown-symbol error keep
    /// no state.
    pub fn annotate_states(&mut self, state: &State, universe: &Universe) {
        fn walk(n: &mut Node, s: &mut Option<Arc<State>>, u: &Universe) {
            n.state = s.clone();
            if let NodeKind::Action(a) = &n.kind {
                *s = s
                    .as_ref()
                    .and_then(|st| a.effect.apply(st, u).ok())
                    .map(Arc::new);
            }
            for c in &mut n.children {
                walk(c, s, u);
            }
        }
        let mut s = Some(Arc::new(state.clone()));
        walk(&mut self.root, &mut s, universe);
    }

    /// State after the whole plan, ignoring preconditions.
    pub fn final_state(&self, state: &State, universe: &Universe) -> Result<State, ModelError> {
        let mut s = state.clone();
        for a in self.plan().actions {
            s = a.effect.apply(&s, universe)?;
        }
        Ok(s)
    }

    /// State right before the first leaf of `id` when replaying from `state`.
    pub fn state_before(
        &self,
        id: NodeId,
        state: &State,
        universe: &Universe,
    ) -> Result<State, ModelError> {
        let spans = self.leaf_spans();
        let n = self.node(id).ok_or_else(|| Self::structural(id))?;
        let first = match spans.get(&id) {
            Some(&(f, _)) => f,
            None => {
                return Err(ModelError::Structure(format!(
                    "node {} has no leaves",
                    n.id
                )))
            }
        };
        let mut s = state.clone();
        for a in self.plan().actions.iter().take(first) {
            s = a.effect.apply(&s, universe)?;
        }
        Ok(s)
    }

    /// Replaces each `targets[i]` subtree by `subtrees[i]`. Incoming subtrees
    /// get fresh ids; every other node keeps its id.
    pub fn replace(
        &self,
        targets: &[NodeId],
        subtrees: Vec<Node>,
    ) -> Result<DecompositionTree, ModelError> {
        if targets.len() != subtrees.len() {
            return Err(ModelError::Structure(
                "replace needs one subtree per task".into(),
            ));
        }
        for (i, &t) in targets.iter().enumerate() {
            let n = self.node(t).ok_or_else(|| Self::structural(t))?;
            let want = n.kind.task();
            if want.is_none() || want != subtrees[i].kind.task() {
                return Err(ModelError::Structure(format!(
                    "replacement for node {t} is rooted at a different task"
                )));
            }
            let p = self.path(t).unwrap();
            for &o in &targets[i + 1..] {
                let q = self.path(o).ok_or_else(|| Self::structural(o))?;
                if q.starts_with(p) || p.starts_with(q) {
                    return Err(ModelError::Structure(format!("nodes {t} and {o} overlap")));
                }
            }
        }
        let mut out = self.clone();
        let mut next = self.next_id;
        for (&t, mut sub) in targets.iter().zip(subtrees) {
            sub.renumber(&mut next);
            *out.node_mut(t).unwrap() = sub;
        }
        out.next_id = next;
        out.reindex()?;
        Ok(out)
    }

    /// Number of nodes that differ between two trees when matched by position
    /// and label.
    pub fn changed_nodes(before: &DecompositionTree, after: &DecompositionTree) -> usize {
        fn labels(n: &Node, path: &mut Vec<usize>, out: &mut HashMap<Vec<usize>, String>) {
            out.insert(path.clone(), n.kind.label());
            for (i, c) in n.children.iter().enumerate() {
                path.push(i);
                labels(c, path, out);
                path.pop();
            }
        }
        let mut a = HashMap::new();
        let mut b = HashMap::new();
        labels(&before.root, &mut Vec::new(), &mut a);
        labels(&after.root, &mut Vec::new(), &mut b);
        let keys: BTreeSet<&Vec<usize>> = a.keys().chain(b.keys()).collect();
        keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).count()
    }

    /// Indented human-readable rendering; dummies are hidden.
    pub fn pretty(&self) -> String {
        let mut s = String::new();
        fn walk(n: &Node, depth: usize, out: &mut String) {
            if n.action().is_some_and(|a| a.is_dummy()) {
                return;
            }
            let mark = if n.pruned { " ~" } else { "" };
            let _ = writeln!(out, "{}{}{}", "  ".repeat(depth), n.kind.label(), mark);
            for c in &n.children {
                walk(c, depth + 1, out);
            }
        }
        for c in &self.root.children {
            walk(c, 0, &mut s);
        }
        s
    }

    pub fn all_ids(&self) -> Vec<NodeId> {
        let mut v = Vec::new();
        self.root.ids(&mut v);
        v
    }
}

impl Node {
    fn first_leaf_state(&self) -> Option<Arc<State>> {
        if self.is_action() {
            return self.state.clone();
        }
        self.children.first().and_then(Node::first_leaf_state)
    }
}

impl fmt::Display for DecompositionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, AtomTemplate, Effect, Term};

    fn pos(p: &str) -> Formula {
        Formula::Pos(AtomTemplate::new(p, Vec::<Term>::new()))
    }

    fn action(name: &str, pre: Formula) -> Arc<GroundAction> {
        Arc::new(GroundAction {
            name: name.into(),
            args: vec![],
            precondition: pre,
            effect: Effect::empty(),
            cost: 1.0,
        })
    }

    fn method(name: &str, task: &str, pre: Formula, subs: &[&str]) -> Arc<GroundMethod> {
        Arc::new(GroundMethod {
            name: name.into(),
            args: vec![],
            task: Task::new(task, &[]),
            precondition: pre,
            subtasks: subs.iter().map(|s| Task::new(s, &[])).collect(),
        })
    }

    fn leaf(id: NodeId, a: Arc<GroundAction>) -> Node {
        Node::new(id, NodeKind::Action(a))
    }

    fn task(id: NodeId, name: &str, m: Node) -> Node {
        let mut n = Node::new(id, NodeKind::Task(Task::new(name, &[])));
        n.children.push(m);
        n
    }

    fn meth(id: NodeId, m: Arc<GroundMethod>, children: Vec<Node>) -> Node {
        let mut n = Node::new(id, NodeKind::Method(m));
        n.children = children;
        n
    }

    // t -> m[pm] -> <a[pa], b[pb]>,  u -> m2 -> <c>
    fn sample() -> DecompositionTree {
        let t = task(
            1,
            "t",
            meth(
                2,
                method("m", "t", pos("pm"), &["a", "b"]),
                vec![
                    leaf(3, action("a", pos("pa"))),
                    leaf(4, action("b", pos("pb"))),
                ],
            ),
        );
        let u = task(
            5,
            "u",
            meth(
                6,
                method("m2", "u", Formula::True, &["c"]),
                vec![leaf(7, action("c", Formula::True))],
            ),
        );
        let mut root = Node::new(0, NodeKind::Root);
        root.children = vec![t, u];
        DecompositionTree::from_root(root).unwrap()
    }

    fn uni() -> Universe {
        Universe::builder()
            .predicate("pm", 0)
            .predicate("pa", 0)
            .predicate("pb", 0)
            .build()
    }

    #[test]
    fn pre_star_follows_first_child_chains() {
        let t = sample();
        assert_eq!(t.pre_star(3).unwrap().to_string(), "(and (pm) (pa))");
        assert_eq!(t.pre_star(4).unwrap().to_string(), "(pb)");
        assert_eq!(t.pre_star(1).unwrap(), Formula::True);
        assert_eq!(t.pre_star(2).unwrap().to_string(), "(pm)");
        assert!(t.pre_star(99).is_err());
        t.check_structure().unwrap();
    }

    #[test]
    fn tree_vs_plan_applicability() {
        let t = sample();
        let u = uni();
        let s: State = [Atom::new("pa", &[]), Atom::new("pb", &[])]
            .into_iter()
            .collect();
        assert!(t.first_plan_failure(&s, &u).unwrap().is_none());
        let f = t.first_tree_failure(&s, &u).unwrap().unwrap();
        assert_eq!((f.action, f.node, f.index), (3, 2, 0));
    }

    #[test]
    fn split_graft_round_trip() {
        let t = sample();
        let (x, u) = t.split(3).unwrap();
        assert_eq!(x.plan().labels(), vec!["(a)"]);
        assert_eq!(u.plan().labels(), vec!["(b)", "(c)"]);
        assert!(x.node(1).unwrap().pruned && u.node(1).unwrap().pruned);
        assert!(!u.node(5).unwrap().pruned);
        assert!(x.node(5).is_none());
        let g = DecompositionTree::graft(&x, &u).unwrap();
        assert_eq!(g.canonical_key(), t.canonical_key());
        assert_eq!(g.all_ids(), t.all_ids());
        assert_eq!(t.exec_status(3, 1).unwrap(), ExecStatus::PartiallyExecuted);
        assert_eq!(t.exec_status(3, 5).unwrap(), ExecStatus::Unexecuted);
        assert_eq!(t.exec_status(4, 1).unwrap(), ExecStatus::FullyExecuted);
        let (_, last) = t.split(7).unwrap();
        assert!(last.plan().is_empty());
        assert!(t.split(1).is_err());
    }

    #[test]
    fn pruned_parents_do_not_pass_preconditions_down() {
        let t = sample();
        let (_, u) = t.split(3).unwrap();
        assert_eq!(u.pre_star(4).unwrap().to_string(), "(pb)");
    }

    #[test]
    fn replace_keeps_untouched_ids() {
        let t = sample();
        let sub = t.node(5).unwrap().clone();
        let r = t.replace(&[5], vec![sub]).unwrap();
        assert_eq!(r.canonical_key(), t.canonical_key());
        for id in [0, 1, 2, 3, 4] {
            assert!(r.contains(id));
        }
        assert!(!r.contains(5));
        let wrong = t.node(1).unwrap().clone();
        assert!(t.replace(&[5], vec![wrong]).is_err());
        let a = t.node(1).unwrap().clone();
        let b = t.node(1).unwrap().clone();
        assert!(t.replace(&[1, 1], vec![a, b]).is_err());
    }

    #[test]
    fn changed_node_count() {
        let t = sample();
        assert_eq!(DecompositionTree::changed_nodes(&t, &t), 0);
        let mut other = t.node(5).unwrap().clone();
        other.children[0].children[0] = leaf(70, action("c", Formula::True));
        let r = t.replace(&[5], vec![other]).unwrap();
        assert_eq!(DecompositionTree::changed_nodes(&t, &r), 0);
        let mut different = t.node(5).unwrap().clone();
        different.children[0]
            .children
            .push(leaf(71, action("d", Formula::True)));
        let r = t.replace(&[5], vec![different]).unwrap();
        assert_eq!(DecompositionTree::changed_nodes(&t, &r), 1);
    }
}
