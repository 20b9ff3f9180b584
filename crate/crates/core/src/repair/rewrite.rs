//! Repair by rewrite: compile the repair problem into a fresh ground HTN
//! problem whose solutions replay the executed prefix exactly, solve it, and
//! map the solution back.
//!
//! Every reachable ground task becomes a parameterless task. Primitive
//! occurrences go through a `do--` wrapper whose methods choose between the
//! regular action (allowed once the prefix is complete) and the copy for
//! prefix position i (allowed only at marker i-1). The copy for the last
//! executed action carries the observed state change instead of its own effect.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::disturbance::RepairProblem;
use crate::model::{
    apply_plan, sym, ActionSchema, AtomTemplate, DecompositionTree, Domain, Effect, EffectBranch,
    Formula, GroundAction, GroundMethod, MethodSchema, ModelError, Node, NodeKind, PredicateSig,
    Problem, SourceSpan, Sym, Task, TaskSig, TaskTemplate, Universe,
};
use crate::planner::{Limit, Planner, SearchBudget, SearchOutcome};

use super::{Repair, RepairOutcome};

#[derive(Clone, Debug)]
pub struct RewrittenProblem {
    pub domain: Domain,
    pub problem: Problem,
    /// Visible executed actions the solution must start with.
    pub prefix_len: usize,
    pub tasks: HashMap<Sym, Task>,
    pub methods: HashMap<Sym, Arc<GroundMethod>>,
    pub wrappers: HashMap<Sym, Task>,
    pub actions: HashMap<Sym, Arc<GroundAction>>,
    /// Marker predicate names, position 0 first.
    pub markers: Vec<Sym>,
    /// Last task of the network; its only method requires the final marker.
    pub check: Sym,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error(
        "decoded plan does not start with the executed prefix: expected {expected}, found {found}"
    )]
    PrefixMismatch { expected: String, found: String },
    #[error("symbol `{0}` is not part of the compiled problem")]
    Unknown(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Names {
    used: HashSet<String>,
}

impl Names {
    fn fresh(&mut self, base: String) -> Sym {
        let mut name = base.clone();
        let mut k = 2;
        while !self.used.insert(name.clone()) {
            name = format!("{base}-{k}");
            k += 1;
        }
        sym(&name)
    }
}

fn mangle(name: &str, args: &[Sym]) -> String {
    let mut s = name.to_string();
    for a in args {
        s.push_str("--");
        s.push_str(a);
    }
    s
}

fn marker(p: &Sym) -> Formula {
    Formula::Pos(AtomTemplate::new(p, vec![]))
}

pub fn compile(rp: &RepairProblem) -> Result<RewrittenProblem, ModelError> {
    // Only used for ground method and action lookup.
    let lookup = SearchBudget {
        time_limit: None,
        ..SearchBudget::default()
    };
    let planner = Planner::new(&rp.domain, &rp.universe, lookup);
    let prefix = rp.pi_x.visible();
    let n = prefix.len();
    let roots: Vec<Task> = rp
        .tree
        .root()
        .children
        .iter()
        .filter_map(|c| c.kind.task())
        .collect();

    let mut names = Names {
        used: rp
            .domain
            .predicates
            .iter()
            .map(|p| p.name.to_string())
            .collect(),
    };
    let markers: Vec<Sym> = (0..=n)
        .map(|i| names.fresh(format!("rw-pos-{i}")))
        .collect();

    // Reachable ground tasks, in discovery order.
    let mut compound: Vec<(Task, Vec<Arc<GroundMethod>>)> = Vec::new();
    let mut primitive: Vec<(Task, Arc<GroundAction>)> = Vec::new();
    let mut seen: HashSet<Task> = HashSet::new();
    let mut queue: VecDeque<Task> = roots.iter().cloned().collect();
    while let Some(t) = queue.pop_front() {
        if !seen.insert(t.clone()) {
            continue;
        }
        if let Some(a) = planner.primitive(&t)? {
            primitive.push((t, a));
            continue;
        }
        let ms = planner.relevant_methods(&t)?;
        for m in &ms {
            queue.extend(m.subtasks.iter().cloned());
        }
        compound.push((t, ms));
    }

    let mut task_name: HashMap<Task, Sym> = HashMap::new();
    let mut out = RewrittenProblem {
        domain: Domain {
            name: sym(&format!("{}-repair", rp.domain.name)),
            requirements: rp.domain.requirements.clone(),
            types: rp.domain.types.clone(),
            constants: rp
                .universe
                .objects()
                .map(|(o, t)| (o.clone(), t.clone()))
                .collect(),
            predicates: rp.domain.predicates.clone(),
            ..Domain::default()
        },
        problem: Problem::default(),
        prefix_len: n,
        tasks: HashMap::new(),
        methods: HashMap::new(),
        wrappers: HashMap::new(),
        actions: HashMap::new(),
        markers: markers.clone(),
        check: names.fresh("rw-done".into()),
    };
    if !out
        .domain
        .requirements
        .iter()
        .any(|r| r == ":method-preconditions")
    {
        out.domain.requirements.push(":method-preconditions".into());
    }
    for m in &markers {
        out.domain.predicates.push(PredicateSig {
            name: m.clone(),
            params: vec![],
            span: SourceSpan::default(),
        });
    }
    let sig = |name: &Sym| TaskSig {
        name: name.clone(),
        params: vec![],
        span: SourceSpan::default(),
    };
    for (t, _) in &compound {
        let name = names.fresh(mangle(&t.name, &t.args));
        out.domain.tasks.push(sig(&name));
        out.tasks.insert(name.clone(), t.clone());
        task_name.insert(t.clone(), name);
    }

    let before_last = match n {
        0 => None,
        _ => Some(
            apply_plan(
                &rp.s0,
                &crate::model::Plan::new(prefix.actions[..n - 1].to_vec()),
                &rp.universe,
            )
            .map_err(|f| f.error)?,
        ),
    };
    for (t, a) in &primitive {
        let wrapper = names.fresh(format!("do--{}", mangle(&t.name, &t.args)));
        out.domain.tasks.push(sig(&wrapper));
        out.wrappers.insert(wrapper.clone(), t.clone());
        task_name.insert(t.clone(), wrapper.clone());

        let regular = names.fresh(mangle(&t.name, &t.args));
        let mut variants = vec![(
            regular,
            markers[n].clone(),
            a.precondition.clone(),
            a.effect.clone(),
            "regular".to_string(),
        )];
        for (i, b) in prefix.actions.iter().enumerate() {
            if b.as_ref() != a.as_ref() {
                continue;
            }
            let pos = i + 1;
            let mut effect = if pos == n {
                let before = before_last.as_ref().unwrap();
                let adds = rp.s_c.difference(before).map(ground_template).collect();
                let dels = before.difference(&rp.s_c).map(ground_template).collect();
                Effect::simple(adds, dels)
            } else {
                a.effect.clone()
            };
            // Unconditional literals live in the first branch, as the parser builds them.
            let plain = matches!(effect.branches.first(), Some(b) if b.vars.is_empty() && b.condition.is_true());
            if !plain {
                effect.branches.insert(
                    0,
                    EffectBranch {
                        vars: vec![],
                        condition: Formula::True,
                        adds: vec![],
                        deletes: vec![],
                    },
                );
            }
            effect.branches[0]
                .adds
                .push(AtomTemplate::new(&markers[pos], vec![]));
            effect.branches[0]
                .deletes
                .push(AtomTemplate::new(&markers[pos - 1], vec![]));
            let name = names.fresh(format!("{}--at-{pos}", mangle(&t.name, &t.args)));
            variants.push((
                name,
                markers[pos - 1].clone(),
                a.precondition.clone(),
                effect,
                format!("at-{pos}"),
            ));
        }
        for (name, gate, pre, effect, tag) in variants {
            out.domain.actions.push(ActionSchema {
                name: name.clone(),
                params: vec![],
                precondition: pre,
                effect,
                cost: a.cost,
                span: SourceSpan::default(),
            });
            out.actions.insert(name.clone(), a.clone());
            let mname = names.fresh(format!("{wrapper}--{tag}"));
            out.domain.methods.push(MethodSchema {
                name: mname,
                params: vec![],
                task: TaskTemplate {
                    name: wrapper.clone(),
                    args: vec![],
                },
                precondition: marker(&gate),
                subtasks: vec![TaskTemplate { name, args: vec![] }],
                span: SourceSpan::default(),
            });
        }
    }

    for (t, ms) in &compound {
        for m in ms {
            let name = names.fresh(mangle(&m.name, &m.args));
            out.domain.methods.push(MethodSchema {
                name: name.clone(),
                params: vec![],
                task: TaskTemplate {
                    name: task_name[t].clone(),
                    args: vec![],
                },
                precondition: m.precondition.clone(),
                subtasks: m
                    .subtasks
                    .iter()
                    .map(|st| TaskTemplate {
                        name: task_name[st].clone(),
                        args: vec![],
                    })
                    .collect(),
                span: SourceSpan::default(),
            });
            out.methods.insert(name, m.clone());
        }
    }

    out.domain.tasks.push(sig(&out.check));
    out.domain.methods.push(MethodSchema {
        name: names.fresh(format!("{}--check", out.check)),
        params: vec![],
        task: TaskTemplate {
            name: out.check.clone(),
            args: vec![],
        },
        precondition: marker(&markers[n]),
        subtasks: vec![],
        span: SourceSpan::default(),
    });

    let mut init = if n == 0 {
        rp.s_c.clone()
    } else {
        rp.s0.clone()
    };
    init.insert(crate::model::Atom::new(&markers[0], &[]));
    out.problem = Problem {
        name: sym(&format!("{}-repair", rp.domain.name)),
        domain_name: out.domain.name.clone(),
        objects: vec![],
        init,
        tasks: roots
            .iter()
            .map(|t| Task::new(&task_name[t], &[]))
            .chain([Task::new(&out.check, &[])])
            .collect(),
    };
    Ok(out)
}

fn ground_template(a: &crate::model::Atom) -> AtomTemplate {
    AtomTemplate::new(
        &a.predicate,
        a.args
            .iter()
            .map(|x| crate::model::Term::Const(x.clone()))
            .collect(),
    )
}

/// A decoded solution: the full tree in the original domain and its
/// unexecuted part.
#[derive(Clone, Debug)]
pub struct Decoded {
    pub full: DecompositionTree,
    pub t_u: DecompositionTree,
}

pub fn decode(
    rw: &RewrittenProblem,
    solution: &DecompositionTree,
    rp: &RepairProblem,
) -> Result<Decoded, DecodeError> {
    fn node(rw: &RewrittenProblem, n: &Node) -> Result<Node, DecodeError> {
        let kind = match &n.kind {
            NodeKind::Root => NodeKind::Root,
            NodeKind::Task(t) => {
                if rw.wrappers.contains_key(&t.name) {
                    let leaf = n
                        .children
                        .first()
                        .and_then(|m| m.children.first())
                        .ok_or_else(|| DecodeError::Unknown(t.name.to_string()))?;
                    let NodeKind::Action(a) = &leaf.kind else {
                        return Err(DecodeError::Unknown(t.name.to_string()));
                    };
                    let orig = rw
                        .actions
                        .get(&a.name)
                        .ok_or_else(|| DecodeError::Unknown(a.name.to_string()))?;
                    return Ok(Node::new(0, NodeKind::Action(orig.clone())));
                }
                NodeKind::Task(
                    rw.tasks
                        .get(&t.name)
                        .ok_or_else(|| DecodeError::Unknown(t.name.to_string()))?
                        .clone(),
                )
            }
            NodeKind::Method(m) => NodeKind::Method(
                rw.methods
                    .get(&m.name)
                    .ok_or_else(|| DecodeError::Unknown(m.name.to_string()))?
                    .clone(),
            ),
            NodeKind::Action(a) if a.is_dummy() => NodeKind::Action(a.clone()),
            NodeKind::Action(a) => return Err(DecodeError::Unknown(a.name.to_string())),
        };
        let mut out = Node::new(0, kind);
        for c in &n.children {
            out.children.push(node(rw, c)?);
        }
        Ok(out)
    }
    let mut top = solution.root().clone();
    match top.children.pop() {
        Some(c) if c.kind.task().is_some_and(|t| t.name == rw.check) => {}
        _ => return Err(DecodeError::Unknown(rw.check.to_string())),
    }
    let mut root = node(rw, &top)?;
    root.renumber(&mut 0);
    let mut full = DecompositionTree::from_root(root)?;
    full.check_structure()?;
    let plan = full.plan().visible();
    let expected = rp.pi_x.visible();
    let n = rw.prefix_len;
    if plan.len() < n || plan.actions[..n] != expected.actions[..] {
        let shown = crate::model::Plan::new(plan.actions[..n.min(plan.len())].to_vec());
        return Err(DecodeError::PrefixMismatch {
            expected: expected.to_string(),
            found: shown.to_string(),
        });
    }
    let t_u = match n {
        0 => full.clone(),
        _ => {
            let a_c = full
                .leaves()
                .into_iter()
                .filter(|l| !l.action().unwrap().is_dummy())
                .nth(n - 1)
                .unwrap()
                .id;
            full.split(a_c)?.1
        }
    };
    let mut t_u = t_u;
    rp.annotate(&mut t_u);
    full.annotate_states(&rp.s0, &rp.universe);
    Ok(Decoded { full, t_u })
}

fn soundness(e: DecodeError) -> ModelError {
    ModelError::Structure(format!("rewrite compilation is unsound: {e}"))
}

pub fn repair_rw(rp: &RepairProblem, budget: SearchBudget) -> Result<RepairOutcome, ModelError> {
    // The original tree is itself a solution of the compiled problem when the
    // disturbance broke nothing; keep it rather than whatever search finds first.
    if crate::oracle::verify_class2(rp, &rp.tree)? {
        return Ok(RepairOutcome::Repaired(Repair {
            t_u: rp.t_u.clone(),
            full: rp.tree.clone(),
            changed_nodes: 0,
            expansions: 0,
        }));
    }
    let rw = compile(rp)?;
    let u = Universe::new(&rw.domain, &rw.problem)?;
    let planner = Planner::new(&rw.domain, &u, budget);
    match planner.solve(&rw.problem.init, &rw.problem.tasks)? {
        SearchOutcome::Found(t, _) => {
            let d = decode(&rw, &t, rp).map_err(soundness)?;
            Ok(RepairOutcome::Repaired(Repair {
                changed_nodes: DecompositionTree::changed_nodes(&rp.t_u, &d.t_u),
                t_u: d.t_u,
                full: d.full,
                expansions: planner.expansions(),
            }))
        }
        SearchOutcome::Unsolvable => Ok(RepairOutcome::Unrepairable),
        SearchOutcome::LimitReached(l) => Ok(RepairOutcome::LimitReached(l)),
    }
}

/// Every decoded solution of the compiled problem within the budget.
pub fn repair_rw_all(
    rp: &RepairProblem,
    budget: SearchBudget,
) -> Result<(Vec<Decoded>, bool, Option<Limit>), ModelError> {
    let rw = compile(rp)?;
    let u = Universe::new(&rw.domain, &rw.problem)?;
    let planner = Planner::new(&rw.domain, &u, budget);
    let e = planner.solve_all(&rw.problem.init, &rw.problem.tasks)?;
    let mut keys = BTreeSet::new();
    let mut out = Vec::new();
    for t in &e.trees {
        let d = decode(&rw, t, rp).map_err(soundness)?;
        if keys.insert(d.t_u.canonical_key()) {
            out.push(d);
        }
    }
    Ok((out, e.exhausted, e.limit))
}
