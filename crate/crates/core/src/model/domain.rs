use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use super::atom::{sym, Atom, State, Sym};
use super::formula::{AtomTemplate, Bindings, Effect, Formula, Term, TypedVar};
use super::ModelError;

pub const OBJECT_TYPE: &str = "object";
pub const DUMMY_ACTION: &str = "__dummy";

/// Location of a parsed construct. Ignored by equality so that a printed and
/// re-parsed domain compares equal to the original.
#[derive(Clone, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl PartialEq for SourceSpan {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct PredicateSig {
    pub name: Sym,
    pub params: Vec<TypedVar>,
    pub span: SourceSpan,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TaskSig {
    pub name: Sym,
    pub params: Vec<TypedVar>,
    pub span: SourceSpan,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ActionSchema {
    pub name: Sym,
    pub params: Vec<TypedVar>,
    pub precondition: Formula,
    pub effect: Effect,
    pub cost: f64,
    pub span: SourceSpan,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct TaskTemplate {
    pub name: Sym,
    pub args: Vec<Term>,
}

impl TaskTemplate {
    pub fn ground(&self, env: &Bindings) -> Result<Task, ModelError> {
        let t = AtomTemplate {
            predicate: self.name.clone(),
            args: self.args.clone(),
        }
        .ground(env)?;
        Ok(Task {
            name: t.predicate,
            args: t.args,
        })
    }
}

impl fmt::Display for TaskTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct MethodSchema {
    pub name: Sym,
    pub params: Vec<TypedVar>,
    pub task: TaskTemplate,
    pub precondition: Formula,
    pub subtasks: Vec<TaskTemplate>,
    pub span: SourceSpan,
}

/// A ground task (primitive or not).
#[derive(
    Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, serde::Serialize, serde::Deserialize,
)]
pub struct Task {
    pub name: Sym,
    pub args: Vec<Sym>,
}

impl Task {
    pub fn new(name: &str, args: &[&str]) -> Self {
        Task {
            name: sym(name),
            args: args.iter().map(|a| sym(a)).collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct GroundAction {
    pub name: Sym,
    pub args: Vec<Sym>,
    pub precondition: Formula,
    pub effect: Effect,
    pub cost: f64,
}

impl GroundAction {
    pub fn dummy() -> Arc<GroundAction> {
        static DUMMY: OnceLock<Arc<GroundAction>> = OnceLock::new();
        DUMMY
            .get_or_init(|| {
                Arc::new(GroundAction {
                    name: sym(DUMMY_ACTION),
                    args: vec![],
                    precondition: Formula::True,
                    effect: Effect::empty(),
                    cost: 0.0,
                })
            })
            .clone()
    }

    pub fn is_dummy(&self) -> bool {
        &*self.name == DUMMY_ACTION
    }

    pub fn task(&self) -> Task {
        Task {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }

    pub fn apply(&self, state: &State, universe: &Universe) -> Result<State, ModelError> {
        if let Some(lit) = self
            .precondition
            .first_false(state, universe, &mut Bindings::new())?
        {
            return Err(ModelError::PreconditionViolated {
                action: self.task().to_string(),
                literal: lit,
            });
        }
        self.effect.apply(state, universe)
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.task().fmt(f)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct GroundMethod {
    pub name: Sym,
    pub args: Vec<Sym>,
    pub task: Task,
    pub precondition: Formula,
    pub subtasks: Vec<Task>,
}

impl fmt::Display for GroundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Domain {
    pub name: Sym,
    pub requirements: Vec<String>,
    /// (type, parent) in declaration order.
    pub types: Vec<(Sym, Sym)>,
    pub constants: Vec<(Sym, Sym)>,
    pub predicates: Vec<PredicateSig>,
    pub tasks: Vec<TaskSig>,
    pub actions: Vec<ActionSchema>,
    pub methods: Vec<MethodSchema>,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Problem {
    pub name: Sym,
    pub domain_name: Sym,
    pub objects: Vec<(Sym, Sym)>,
    pub init: State,
    pub tasks: Vec<Task>,
}

impl Domain {
    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| &*a.name == name)
    }

    pub fn task_sig(&self, name: &str) -> Option<&TaskSig> {
        self.tasks.iter().find(|t| &*t.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodSchema> {
        self.methods.iter().find(|m| &*m.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateSig> {
        self.predicates.iter().find(|p| &*p.name == name)
    }

    pub fn is_primitive(&self, task: &str) -> bool {
        self.action(task).is_some()
    }

    /// Methods for a task, in source order.
    pub fn methods_for<'a>(&'a self, task: &'a str) -> impl Iterator<Item = &'a MethodSchema> + 'a {
        self.methods.iter().filter(move |m| &*m.task.name == task)
    }

    /// A copy keeping only the named methods (source order preserved).
    pub fn restrict_methods(&self, keep: &[&str]) -> Domain {
        let mut d = self.clone();
        d.methods.retain(|m| keep.contains(&&*m.name));
        d
    }

    pub fn ground_action(&self, name: &str, args: &[Sym]) -> Result<GroundAction, ModelError> {
        if name == DUMMY_ACTION {
            return Ok((*GroundAction::dummy()).clone());
        }
        let a = self
            .action(name)
            .ok_or_else(|| ModelError::UnknownAction(name.to_string()))?;
        if a.params.len() != args.len() {
            return Err(ModelError::Arity {
                symbol: name.to_string(),
                expected: a.params.len(),
                found: args.len(),
            });
        }
        let env = Bindings::from_pairs(&a.params, args);
        Ok(GroundAction {
            name: a.name.clone(),
            args: args.to_vec(),
            precondition: a.precondition.substitute(&env),
            effect: a.effect.substitute(&env),
            cost: a.cost,
        })
    }

    pub fn ground_method(&self, name: &str, args: &[Sym]) -> Result<GroundMethod, ModelError> {
        let m = self
            .method(name)
            .ok_or_else(|| ModelError::UnknownMethod(name.to_string()))?;
        ground_method_schema(m, args)
    }

    /// Structural well-formedness: every symbol declared, arities match, and
    /// schema formulas mention only their own parameters.
    pub fn validate(&self) -> Result<(), ModelError> {
        let types: BTreeSet<&str> = self
            .types
            .iter()
            .map(|(t, _)| &**t)
            .chain(std::iter::once(OBJECT_TYPE))
            .collect();
        let check_ty = |ty: &Sym| -> Result<(), ModelError> {
            if types.contains(&**ty) {
                Ok(())
            } else {
                Err(ModelError::UnknownType(ty.to_string()))
            }
        };
        for (_, parent) in &self.types {
            check_ty(parent)?;
        }
        for (_, ty) in &self.constants {
            check_ty(ty)?;
        }
        let mut names = BTreeSet::new();
        for n in self
            .tasks
            .iter()
            .map(|t| &t.name)
            .chain(self.actions.iter().map(|a| &a.name))
        {
            if n.starts_with("__") {
                return Err(ModelError::ReservedName(n.to_string()));
            }
            if !names.insert(n.clone()) {
                return Err(ModelError::Duplicate(n.to_string()));
            }
        }
        let mut mnames = BTreeSet::new();
        for m in &self.methods {
            if m.name.starts_with("__") {
                return Err(ModelError::ReservedName(m.name.to_string()));
            }
            if !mnames.insert(m.name.clone()) {
                return Err(ModelError::Duplicate(m.name.to_string()));
            }
        }
        let mut pnames = BTreeSet::new();
        for p in &self.predicates {
            if !pnames.insert(p.name.clone()) {
                return Err(ModelError::Duplicate(p.name.to_string()));
            }
            p.params.iter().try_for_each(|v| check_ty(&v.ty))?;
        }

        let check_atom = |t: &AtomTemplate| -> Result<(), ModelError> {
            let sig = self
                .predicate(&t.predicate)
                .ok_or_else(|| ModelError::UnknownPredicate(t.predicate.to_string()))?;
            if sig.params.len() != t.args.len() {
                return Err(ModelError::Arity {
                    symbol: t.predicate.to_string(),
                    expected: sig.params.len(),
                    found: t.args.len(),
                });
            }
            Ok(())
        };
        let check_closed = |owner: &Sym, params: &[TypedVar], free: BTreeSet<Sym>| {
            for v in free {
                if !params.iter().any(|p| p.name == v) {
                    return Err(ModelError::FreeVariable {
                        owner: owner.to_string(),
                        var: v.to_string(),
                    });
                }
            }
            Ok(())
        };

        for t in &self.tasks {
            t.params.iter().try_for_each(|v| check_ty(&v.ty))?;
        }
        for a in &self.actions {
            a.params.iter().try_for_each(|v| check_ty(&v.ty))?;
            a.precondition
                .atoms()
                .into_iter()
                .try_for_each(check_atom)?;
            a.effect.atoms().into_iter().try_for_each(check_atom)?;
            for v in a.precondition.quantified_vars() {
                check_ty(&v.ty)?;
            }
            for b in &a.effect.branches {
                b.vars.iter().try_for_each(|v| check_ty(&v.ty))?;
            }
            check_closed(&a.name, &a.params, a.precondition.free_vars())?;
            check_closed(&a.name, &a.params, a.effect.free_vars())?;
            if !(a.cost >= 0.0) {
                return Err(ModelError::NegativeCost(a.name.to_string()));
            }
        }
        for m in &self.methods {
            m.params.iter().try_for_each(|v| check_ty(&v.ty))?;
            let sig = self
                .task_sig(&m.task.name)
                .ok_or_else(|| ModelError::UnknownTask(m.task.name.to_string()))?;
            if sig.params.len() != m.task.args.len() {
                return Err(ModelError::Arity {
                    symbol: m.task.name.to_string(),
                    expected: sig.params.len(),
                    found: m.task.args.len(),
                });
            }
            for st in &m.subtasks {
                let arity = if let Some(t) = self.task_sig(&st.name) {
                    t.params.len()
                } else if let Some(a) = self.action(&st.name) {
                    a.params.len()
                } else {
                    return Err(ModelError::UnknownTask(st.name.to_string()));
                };
                if arity != st.args.len() {
                    return Err(ModelError::Arity {
                        symbol: st.name.to_string(),
                        expected: arity,
                        found: st.args.len(),
                    });
                }
            }
            m.precondition
                .atoms()
                .into_iter()
                .try_for_each(check_atom)?;
            for v in m.precondition.quantified_vars() {
                check_ty(&v.ty)?;
            }
            let mut free = m.precondition.free_vars();
            for t in m.subtasks.iter().chain(std::iter::once(&m.task)) {
                for a in &t.args {
                    if let Term::Var(v) = a {
                        free.insert(v.clone());
                    }
                }
            }
            check_closed(&m.name, &m.params, free)?;
        }
        Ok(())
    }
}

pub fn ground_method_schema(m: &MethodSchema, args: &[Sym]) -> Result<GroundMethod, ModelError> {
    if m.params.len() != args.len() {
        return Err(ModelError::Arity {
            symbol: m.name.to_string(),
            expected: m.params.len(),
            found: args.len(),
        });
    }
    let env = Bindings::from_pairs(&m.params, args);
    Ok(GroundMethod {
        name: m.name.clone(),
        args: args.to_vec(),
        task: m.task.ground(&env)?,
        precondition: m.precondition.substitute(&env),
        subtasks: m
            .subtasks
            .iter()
            .map(|t| t.ground(&env))
            .collect::<Result<_, _>>()?,
    })
}

/// Typed objects and predicate arities: everything eval needs to resolve
/// quantifiers and reject unknown symbols.
#[derive(Clone, Debug, Default)]
pub struct Universe {
    object_type: BTreeMap<Sym, Sym>,
    by_type: BTreeMap<Sym, Vec<Sym>>,
    parents: BTreeMap<Sym, Sym>,
    arity: BTreeMap<Sym, usize>,
}

impl Universe {
    pub fn new(domain: &Domain, problem: &Problem) -> Result<Universe, ModelError> {
        let mut b = Universe::builder();
        for (t, p) in &domain.types {
            b = b.subtype(t, p);
        }
        for p in &domain.predicates {
            b = b.predicate(&p.name, p.params.len());
        }
        for (o, t) in domain.constants.iter().chain(&problem.objects) {
            if let Some(prev) = b.u.object_type.get(o) {
                if prev != t {
                    return Err(ModelError::TypeMismatch {
                        object: o.to_string(),
                        expected: prev.to_string(),
                        found: t.to_string(),
                    });
                }
            }
            if &**t != OBJECT_TYPE && !domain.types.iter().any(|(d, _)| d == t) {
                return Err(ModelError::UnknownType(t.to_string()));
            }
            b = b.object(o, t);
        }
        Ok(b.build())
    }

    pub fn builder() -> UniverseBuilder {
        UniverseBuilder {
            u: Universe::default(),
        }
    }

    pub fn objects_of(&self, ty: &str) -> Result<&[Sym], ModelError> {
        match self.by_type.get(ty) {
            Some(v) => Ok(v),
            None if ty == OBJECT_TYPE || self.parents.contains_key(ty) => Ok(&[]),
            None => Err(ModelError::UnknownType(ty.to_string())),
        }
    }

    pub fn objects(&self) -> impl Iterator<Item = (&Sym, &Sym)> {
        self.object_type.iter()
    }

    pub fn type_of(&self, obj: &str) -> Option<&Sym> {
        self.object_type.get(obj)
    }

    pub fn is_subtype(&self, ty: &str, of: &str) -> bool {
        if of == OBJECT_TYPE || ty == of {
            return true;
        }
        let mut cur = ty;
        let mut steps = 0;
        while let Some(p) = self.parents.get(cur) {
            if &**p == of {
                return true;
            }
            cur = p;
            steps += 1;
            if steps > self.parents.len() {
                break;
            }
        }
        false
    }

    pub fn check_atom(&self, atom: &Atom) -> Result<(), ModelError> {
        match self.arity.get(&atom.predicate) {
            None => return Err(ModelError::UnknownPredicate(atom.predicate.to_string())),
            Some(&n) if n != atom.args.len() => {
                return Err(ModelError::Arity {
                    symbol: atom.predicate.to_string(),
                    expected: n,
                    found: atom.args.len(),
                })
            }
            _ => {}
        }
        for a in &atom.args {
            if !self.object_type.contains_key(a) {
                return Err(ModelError::UnknownObject(a.to_string()));
            }
        }
        Ok(())
    }

    pub fn check_state(&self, state: &State) -> Result<(), ModelError> {
        state.iter().try_for_each(|a| self.check_atom(a))
    }

    /// Checks objects exist and have a type compatible with the parameter list.
    pub fn check_args(&self, params: &[TypedVar], args: &[Sym]) -> Result<(), ModelError> {
        for (p, a) in params.iter().zip(args) {
            let ty = self
                .object_type
                .get(a)
                .ok_or_else(|| ModelError::UnknownObject(a.to_string()))?;
            if !self.is_subtype(ty, &p.ty) {
                return Err(ModelError::TypeMismatch {
                    object: a.to_string(),
                    expected: p.ty.to_string(),
                    found: ty.to_string(),
                });
            }
        }
        Ok(())
    }
}

pub struct UniverseBuilder {
    u: Universe,
}

impl UniverseBuilder {
    pub fn subtype(mut self, ty: &str, parent: &str) -> Self {
        self.u.parents.insert(sym(ty), sym(parent));
        self
    }

    pub fn object(mut self, name: &str, ty: &str) -> Self {
        self.u.object_type.insert(sym(name), sym(ty));
        self
    }

    pub fn predicate(mut self, name: &str, arity: usize) -> Self {
        self.u.arity.insert(sym(name), arity);
        self
    }

    pub fn build(mut self) -> Universe {
        let mut by_type: BTreeMap<Sym, Vec<Sym>> = BTreeMap::new();
        by_type.insert(sym(OBJECT_TYPE), Vec::new());
        for t in self.u.parents.keys() {
            by_type.insert(t.clone(), Vec::new());
        }
        for (o, t) in &self.u.object_type {
            by_type.entry(sym(OBJECT_TYPE)).or_default().push(o.clone());
            let mut cur = t.clone();
            let mut steps = 0;
            loop {
                if &*cur != OBJECT_TYPE {
                    by_type.entry(cur.clone()).or_default().push(o.clone());
                }
                match self.u.parents.get(&cur) {
                    Some(p) if steps <= self.u.parents.len() => {
                        cur = p.clone();
                        steps += 1;
                    }
                    _ => break,
                }
            }
        }
        for v in by_type.values_mut() {
            v.sort();
            v.dedup();
        }
        self.u.by_type = by_type;
        self.u
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtype_objects_are_enumerated_under_supertypes() {
        let u = Universe::builder()
            .subtype("rover", "vehicle")
            .subtype("vehicle", "object")
            .object("r1", "rover")
            .object("t1", "vehicle")
            .object("w1", "object")
            .build();
        assert_eq!(u.objects_of("vehicle").unwrap().len(), 2);
        assert_eq!(u.objects_of("rover").unwrap().len(), 1);
        assert_eq!(u.objects_of("object").unwrap().len(), 3);
        assert!(u.objects_of("ghost").is_err());
        assert!(u.is_subtype("rover", "vehicle"));
        assert!(!u.is_subtype("vehicle", "rover"));
    }

    #[test]
    fn dummy_is_a_no_op() {
        let d = GroundAction::dummy();
        let s: State = [Atom::new("p", &[])].into_iter().collect();
        let u = Universe::builder().predicate("p", 0).build();
        assert_eq!(d.apply(&s, &u).unwrap(), s);
        assert!(d.is_dummy());
    }
}
