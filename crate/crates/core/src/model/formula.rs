use std::collections::BTreeSet;
use std::fmt;

use super::atom::{Atom, State, Sym};
use super::domain::Universe;
use super::ModelError;

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Var(Sym),
    Const(Sym),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TypedVar {
    pub name: Sym,
    pub ty: Sym,
}

impl TypedVar {
    pub fn new(name: &str, ty: &str) -> Self {
        TypedVar {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

/// Variable bindings. Scoped by push/truncate so quantifiers can shadow.
#[derive(Clone, Debug, Default)]
pub struct Bindings(Vec<(Sym, Sym)>);

impl Bindings {
    pub fn new() -> Self {
        Bindings(Vec::new())
    }

    pub fn from_pairs(vars: &[TypedVar], values: &[Sym]) -> Self {
        Bindings(
            vars.iter()
                .zip(values)
                .map(|(v, c)| (v.name.clone(), c.clone()))
                .collect(),
        )
    }

    pub fn get(&self, var: &str) -> Option<&Sym> {
        self.0
            .iter()
            .rev()
            .find(|(v, _)| &**v == var)
            .map(|(_, c)| c)
    }

    pub fn push(&mut self, var: Sym, value: Sym) {
        self.0.push((var, value));
    }

    fn mark(&self) -> usize {
        self.0.len()
    }

    fn reset(&mut self, mark: usize) {
        self.0.truncate(mark);
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct AtomTemplate {
    pub predicate: Sym,
    pub args: Vec<Term>,
}

impl AtomTemplate {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        AtomTemplate {
            predicate: predicate.into(),
            args,
        }
    }

    pub fn ground(&self, env: &Bindings) -> Result<Atom, ModelError> {
        let mut args = Vec::with_capacity(self.args.len());
        for t in &self.args {
            args.push(match t {
                Term::Const(c) => c.clone(),
                Term::Var(v) => env
                    .get(v)
                    .cloned()
                    .ok_or_else(|| ModelError::UnboundVariable(v.to_string()))?,
            });
        }
        Ok(Atom {
            predicate: self.predicate.clone(),
            args,
        })
    }

    /// Replace bound variables by constants; unbound ones stay variables.
    pub fn substitute(&self, env: &Bindings) -> AtomTemplate {
        AtomTemplate {
            predicate: self.predicate.clone(),
            args: self.args.iter().map(|t| subst_term(t, env)).collect(),
        }
    }

    fn free_vars(&self, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        for t in &self.args {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        }
    }
}

fn subst_term(t: &Term, env: &Bindings) -> Term {
    match t {
        Term::Var(v) => match env.get(v) {
            Some(c) => Term::Const(c.clone()),
            None => t.clone(),
        },
        Term::Const(_) => t.clone(),
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// The precondition fragment: conjunctions of literals under typed
/// quantifiers, plus negation of compound formulas.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    True,
    Pos(AtomTemplate),
    Neg(AtomTemplate),
    /// Negation of anything but an atom.
    Not(Box<Formula>),
    And(Vec<Formula>),
    Forall(Vec<TypedVar>, Box<Formula>),
    Exists(Vec<TypedVar>, Box<Formula>),
}

impl Formula {
    pub fn and(parts: Vec<Formula>) -> Formula {
        let mut flat = Vec::new();
        for p in parts {
            match p {
                Formula::True => {}
                Formula::And(inner) => flat.extend(inner),
                other => flat.push(other),
            }
        }
        match flat.len() {
            0 => Formula::True,
            1 => flat.pop().unwrap(),
            _ => Formula::And(flat),
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Formula::True)
    }

    pub fn eval(&self, state: &State, universe: &Universe) -> Result<bool, ModelError> {
        let mut env = Bindings::new();
        self.eval_in(state, universe, &mut env)
    }

    pub fn eval_in(
        &self,
        state: &State,
        universe: &Universe,
        env: &mut Bindings,
    ) -> Result<bool, ModelError> {
        Ok(self.first_false(state, universe, env)?.is_none())
    }

    /// Returns the first falsified ground literal, or None if the formula holds.
    /// For an existential with no witness the whole quantified formula is reported.
    pub fn first_false(
        &self,
        state: &State,
        universe: &Universe,
        env: &mut Bindings,
    ) -> Result<Option<String>, ModelError> {
        match self {
            Formula::True => Ok(None),
            Formula::Pos(t) => {
                let a = t.ground(env)?;
                universe.check_atom(&a)?;
                Ok(if state.contains(&a) {
                    None
                } else {
                    Some(a.to_string())
                })
            }
            Formula::Neg(t) => {
                let a = t.ground(env)?;
                universe.check_atom(&a)?;
                Ok(if state.contains(&a) {
                    Some(format!("(not {a})"))
                } else {
                    None
                })
            }
            Formula::Not(inner) => Ok(if inner.first_false(state, universe, env)?.is_none() {
                Some(format!("(not {})", inner.substitute(env)))
            } else {
                None
            }),
            Formula::And(parts) => {
                for p in parts {
                    if let Some(l) = p.first_false(state, universe, env)? {
                        return Ok(Some(l));
                    }
                }
                Ok(None)
            }
            Formula::Forall(vars, body) => {
                let mut found = None;
                for_each_binding(vars, universe, env, &mut |env| {
                    found = body.first_false(state, universe, env)?;
                    Ok(found.is_none())
                })?;
                Ok(found)
            }
            Formula::Exists(vars, body) => {
                let mut witnessed = false;
                for_each_binding(vars, universe, env, &mut |env| {
                    witnessed = body.first_false(state, universe, env)?.is_none();
                    Ok(!witnessed)
                })?;
                Ok(if witnessed {
                    None
                } else {
                    Some(self.substitute(env).to_string())
                })
            }
        }
    }

    pub fn substitute(&self, env: &Bindings) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Pos(t) => Formula::Pos(t.substitute(env)),
            Formula::Neg(t) => Formula::Neg(t.substitute(env)),
            Formula::Not(b) => Formula::Not(Box::new(b.substitute(env))),
            Formula::And(ps) => Formula::And(ps.iter().map(|p| p.substitute(env)).collect()),
            Formula::Forall(vs, b) => {
                Formula::Forall(vs.clone(), Box::new(b.substitute(&shadow(env, vs))))
            }
            Formula::Exists(vs, b) => {
                Formula::Exists(vs.clone(), Box::new(b.substitute(&shadow(env, vs))))
            }
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        match self {
            Formula::True => {}
            Formula::Pos(t) | Formula::Neg(t) => t.free_vars(bound, out),
            Formula::Not(b) => b.collect_free(bound, out),
            Formula::And(ps) => ps.iter().for_each(|p| p.collect_free(bound, out)),
            Formula::Forall(vs, b) | Formula::Exists(vs, b) => {
                let n = bound.len();
                bound.extend(vs.iter().map(|v| v.name.clone()));
                b.collect_free(bound, out);
                bound.truncate(n);
            }
        }
    }

    /// Every atom template mentioned, for signature checking.
    pub fn atoms(&self) -> Vec<&AtomTemplate> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a AtomTemplate>) {
        match self {
            Formula::True => {}
            Formula::Pos(t) | Formula::Neg(t) => out.push(t),
            Formula::Not(b) => b.collect_atoms(out),
            Formula::And(ps) => ps.iter().for_each(|p| p.collect_atoms(out)),
            Formula::Forall(_, b) | Formula::Exists(_, b) => b.collect_atoms(out),
        }
    }

    pub fn quantified_vars(&self) -> Vec<&TypedVar> {
        let mut out = Vec::new();
        self.collect_qvars(&mut out);
        out
    }

    fn collect_qvars<'a>(&'a self, out: &mut Vec<&'a TypedVar>) {
        match self {
            Formula::True | Formula::Pos(_) | Formula::Neg(_) => {}
            Formula::Not(b) => b.collect_qvars(out),
            Formula::And(ps) => ps.iter().for_each(|p| p.collect_qvars(out)),
            Formula::Forall(vs, b) | Formula::Exists(vs, b) => {
                out.extend(vs.iter());
                b.collect_qvars(out);
            }
        }
    }

    /// Positive atoms the formula consumes in `state`, grounded under `env`.
    /// Universal quantifiers expand over the universe; an existential consumes
    /// the atoms of its first satisfying witness. Used for causal links.
    pub fn positive_atoms(
        &self,
        state: &State,
        universe: &Universe,
        env: &mut Bindings,
        out: &mut Vec<Atom>,
    ) -> Result<(), ModelError> {
        match self {
            Formula::True | Formula::Neg(_) | Formula::Not(_) => Ok(()),
            Formula::Pos(t) => {
                out.push(t.ground(env)?);
                Ok(())
            }
            Formula::And(ps) => {
                for p in ps {
                    p.positive_atoms(state, universe, env, out)?;
                }
                Ok(())
            }
            Formula::Forall(vs, b) => for_each_binding(vs, universe, env, &mut |env| {
                b.positive_atoms(state, universe, env, out)?;
                Ok(true)
            }),
            Formula::Exists(vs, b) => for_each_binding(vs, universe, env, &mut |env| {
                if b.eval_in(state, universe, env)? {
                    b.positive_atoms(state, universe, env, out)?;
                    return Ok(false);
                }
                Ok(true)
            }),
        }
    }
}

fn shadow(env: &Bindings, vars: &[TypedVar]) -> Bindings {
    Bindings(
        env.0
            .iter()
            .filter(|(v, _)| !vars.iter().any(|tv| tv.name == *v))
            .cloned()
            .collect(),
    )
}

/// Calls `f` once per assignment of `vars` over their typed domains, in
/// lexicographic order. `f` returns false to stop early.
pub fn for_each_binding(
    vars: &[TypedVar],
    universe: &Universe,
    env: &mut Bindings,
    f: &mut dyn FnMut(&mut Bindings) -> Result<bool, ModelError>,
) -> Result<(), ModelError> {
    fn rec(
        vars: &[TypedVar],
        universe: &Universe,
        env: &mut Bindings,
        f: &mut dyn FnMut(&mut Bindings) -> Result<bool, ModelError>,
    ) -> Result<bool, ModelError> {
        let Some((v, rest)) = vars.split_first() else {
            return f(env);
        };
        let mark = env.mark();
        for c in universe.objects_of(&v.ty)? {
            env.push(v.name.clone(), c.clone());
            let go_on = rec(rest, universe, env, f)?;
            env.reset(mark);
            if !go_on {
                return Ok(false);
            }
        }
        Ok(true)
    }
    rec(vars, universe, env, f).map(|_| ())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "()"),
            Formula::Pos(t) => write!(f, "{t}"),
            Formula::Neg(t) => write!(f, "(not {t})"),
            Formula::Not(b) => write!(f, "(not {b})"),
            Formula::And(ps) => {
                write!(f, "(and")?;
                for p in ps {
                    write!(f, " {p}")?;
                }
                write!(f, ")")
            }
            Formula::Forall(vs, b) => write!(f, "(forall ({}) {b})", fmt_vars(vs)),
            Formula::Exists(vs, b) => write!(f, "(exists ({}) {b})", fmt_vars(vs)),
        }
    }
}

pub fn fmt_vars(vs: &[TypedVar]) -> String {
    vs.iter()
        .map(|v| format!("?{} - {}", v.name, v.ty))
        .collect::<Vec<_>>()
        .join(" ")
}

/// One effect branch: `forall vars: when condition then adds/deletes`.
/// Unconditional effects have no vars and a true condition.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct EffectBranch {
    pub vars: Vec<TypedVar>,
    pub condition: Formula,
    pub adds: Vec<AtomTemplate>,
    pub deletes: Vec<AtomTemplate>,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Effect {
    pub branches: Vec<EffectBranch>,
}

impl Effect {
    pub fn empty() -> Self {
        Effect::default()
    }

    pub fn is_empty(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.adds.is_empty() && b.deletes.is_empty())
    }

    pub fn simple(adds: Vec<AtomTemplate>, deletes: Vec<AtomTemplate>) -> Self {
        Effect {
            branches: vec![EffectBranch {
                vars: vec![],
                condition: Formula::True,
                adds,
                deletes,
            }],
        }
    }

    /// All branches read the input state; deletes go first, then adds.
    pub fn apply(&self, state: &State, universe: &Universe) -> Result<State, ModelError> {
        let (adds, dels) = self.changes(state, universe, &mut Bindings::new())?;
        let mut next = state.clone();
        for d in &dels {
            next.remove(d);
        }
        for a in adds {
            next.insert(a);
        }
        Ok(next)
    }

    pub fn changes(
        &self,
        state: &State,
        universe: &Universe,
        env: &mut Bindings,
    ) -> Result<(Vec<Atom>, Vec<Atom>), ModelError> {
        let mut adds = Vec::new();
        let mut dels = Vec::new();
        for b in &self.branches {
            for_each_binding(&b.vars, universe, env, &mut |env| {
                if b.condition.eval_in(state, universe, env)? {
                    for t in &b.deletes {
                        let a = t.ground(env)?;
                        universe.check_atom(&a)?;
                        dels.push(a);
                    }
                    for t in &b.adds {
                        let a = t.ground(env)?;
                        universe.check_atom(&a)?;
                        adds.push(a);
                    }
                }
                Ok(true)
            })?;
        }
        Ok((adds, dels))
    }

    pub fn substitute(&self, env: &Bindings) -> Effect {
        Effect {
            branches: self
                .branches
                .iter()
                .map(|b| {
                    let inner = shadow(env, &b.vars);
                    EffectBranch {
                        vars: b.vars.clone(),
                        condition: b.condition.substitute(&inner),
                        adds: b.adds.iter().map(|t| t.substitute(&inner)).collect(),
                        deletes: b.deletes.iter().map(|t| t.substitute(&inner)).collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        for b in &self.branches {
            let mut bound: Vec<Sym> = b.vars.iter().map(|v| v.name.clone()).collect();
            b.condition.collect_free(&mut bound, &mut out);
            for t in b.adds.iter().chain(&b.deletes) {
                t.free_vars(&mut bound, &mut out);
            }
        }
        out
    }

    pub fn atoms(&self) -> Vec<&AtomTemplate> {
        let mut out = Vec::new();
        for b in &self.branches {
            b.condition.collect_atoms(&mut out);
            out.extend(b.adds.iter());
            out.extend(b.deletes.iter());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::domain::Universe;

    fn v(n: &str) -> Term {
        Term::Var(n.into())
    }
    fn c(n: &str) -> Term {
        Term::Const(n.into())
    }

    fn uni() -> Universe {
        Universe::builder()
            .object("w1", "loc")
            .object("w2", "loc")
            .object("r", "robot")
            .predicate("visible", 1)
            .predicate("at", 2)
            .build()
    }

    #[test]
    fn truth_holds_everywhere() {
        assert!(Formula::True
            .eval(&State::new(), &Universe::builder().build())
            .unwrap());
    }

    #[test]
    fn negation_of_present_atom_is_false() {
        let u = Universe::builder()
            .object("c", "object")
            .predicate("p", 1)
            .build();
        let s: State = [Atom::new("p", &["c"])].into_iter().collect();
        let f = Formula::Neg(AtomTemplate::new("p", vec![c("c")]));
        assert!(!f.eval(&s, &u).unwrap());
    }

    #[test]
    fn forall_enumerates_typed_objects_only() {
        let u = uni();
        let s: State = [Atom::new("visible", &["w1"]), Atom::new("visible", &["w2"])]
            .into_iter()
            .collect();
        let f = Formula::Forall(
            vec![TypedVar::new("x", "loc")],
            Box::new(Formula::Pos(AtomTemplate::new("visible", vec![v("x")]))),
        );
        assert!(f.eval(&s, &u).unwrap());
        let mut s2 = s.clone();
        s2.remove(&Atom::new("visible", &["w2"]));
        assert!(!f.eval(&s2, &u).unwrap());
        assert_eq!(
            f.first_false(&s2, &u, &mut Bindings::new())
                .unwrap()
                .unwrap(),
            "(visible w2)"
        );
    }

    #[test]
    fn exists_finds_witness() {
        let u = uni();
        let s: State = [Atom::new("visible", &["w2"])].into_iter().collect();
        let f = Formula::Exists(
            vec![TypedVar::new("x", "loc")],
            Box::new(Formula::Pos(AtomTemplate::new("visible", vec![v("x")]))),
        );
        assert!(f.eval(&s, &u).unwrap());
        assert!(!f.eval(&State::new(), &u).unwrap());
    }

    #[test]
    fn unknown_symbols_are_errors() {
        let u = uni();
        let f = Formula::Pos(AtomTemplate::new("nope", vec![]));
        assert!(matches!(
            f.eval(&State::new(), &u),
            Err(ModelError::UnknownPredicate(_))
        ));
        let f = Formula::Pos(AtomTemplate::new("visible", vec![c("w9")]));
        assert!(matches!(
            f.eval(&State::new(), &u),
            Err(ModelError::UnknownObject(_))
        ));
        let f = Formula::Pos(AtomTemplate::new("visible", vec![v("free")]));
        assert!(matches!(
            f.eval(&State::new(), &u),
            Err(ModelError::UnboundVariable(_))
        ));
    }

    #[test]
    fn deletes_before_adds_and_branches_read_input_state() {
        let u = uni();
        let s: State = [Atom::new("at", &["r", "w1"])].into_iter().collect();
        let move_eff = Effect::simple(
            vec![AtomTemplate::new("at", vec![c("r"), c("w2")])],
            vec![AtomTemplate::new("at", vec![c("r"), c("w1")])],
        );
        let out = move_eff.apply(&s, &u).unwrap();
        assert_eq!(out, [Atom::new("at", &["r", "w2"])].into_iter().collect());

        // add-wins when the same atom is both deleted and added
        let both = Effect::simple(
            vec![AtomTemplate::new("visible", vec![c("w1")])],
            vec![AtomTemplate::new("visible", vec![c("w1")])],
        );
        assert!(both
            .apply(&State::new(), &u)
            .unwrap()
            .contains(&Atom::new("visible", &["w1"])));

        // a false when-condition leaves the state alone
        let cond = Effect {
            branches: vec![EffectBranch {
                vars: vec![],
                condition: Formula::Pos(AtomTemplate::new("visible", vec![c("w1")])),
                adds: vec![AtomTemplate::new("visible", vec![c("w2")])],
                deletes: vec![],
            }],
        };
        assert_eq!(cond.apply(&s, &u).unwrap(), s);
    }

    #[test]
    fn forall_effect_with_condition() {
        let u = uni();
        let s: State = [Atom::new("visible", &["w1"])].into_iter().collect();
        // forall x: when (visible x) then (not (visible x)) and (at r x)
        let eff = Effect {
            branches: vec![EffectBranch {
                vars: vec![TypedVar::new("x", "loc")],
                condition: Formula::Pos(AtomTemplate::new("visible", vec![v("x")])),
                adds: vec![AtomTemplate::new("at", vec![c("r"), v("x")])],
                deletes: vec![AtomTemplate::new("visible", vec![v("x")])],
            }],
        };
        let out = eff.apply(&s, &u).unwrap();
        assert_eq!(out, [Atom::new("at", &["r", "w1"])].into_iter().collect());
    }

    #[test]
    fn substitution_respects_shadowing() {
        let mut env = Bindings::new();
        env.push("x".into(), "w1".into());
        let f = Formula::and(vec![
            Formula::Pos(AtomTemplate::new("visible", vec![v("x")])),
            Formula::Forall(
                vec![TypedVar::new("x", "loc")],
                Box::new(Formula::Pos(AtomTemplate::new("visible", vec![v("x")]))),
            ),
        ]);
        let g = f.substitute(&env);
        assert_eq!(
            g.to_string(),
            "(and (visible w1) (forall (?x - loc) (visible ?x)))"
        );
        assert!(g.free_vars().is_empty());
        assert_eq!(f.free_vars().len(), 1);
    }
}
