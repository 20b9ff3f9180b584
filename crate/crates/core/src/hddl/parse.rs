use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    sym, ActionSchema, Atom, AtomTemplate, Domain, Effect, EffectBranch, Formula, MethodSchema,
    PredicateSig, Problem, SourceSpan, State, Sym, Task, TaskSig, TaskTemplate, Term, TypedVar,
    OBJECT_TYPE,
};

use super::lexer::{read, Sexp};
use super::{DisturbanceFile, DisturbanceSpec, ParseError, ParseErrorKind, Placement};

pub const SUPPORTED_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":hierarchy",
    ":negative-preconditions",
    ":universal-preconditions",
    ":existential-preconditions",
    ":quantified-preconditions",
    ":conditional-effects",
    ":adl",
    ":method-preconditions",
];

fn err<T>(kind: ParseErrorKind, span: &SourceSpan) -> Result<T, ParseError> {
    Err(ParseError {
        kind,
        span: span.clone(),
    })
}

fn syntax<T>(msg: impl Into<String>, at: &Sexp) -> Result<T, ParseError> {
    err(ParseErrorKind::Syntax(msg.into()), at.span())
}

fn unsupported<T>(msg: impl Into<String>, at: &Sexp) -> Result<T, ParseError> {
    err(ParseErrorKind::Unsupported(msg.into()), at.span())
}

fn undeclared<T>(what: &str, name: &str, at: &Sexp) -> Result<T, ParseError> {
    err(
        ParseErrorKind::Undeclared {
            what: what.into(),
            name: name.into(),
        },
        at.span(),
    )
}

fn list<'a>(e: &'a Sexp, what: &str) -> Result<&'a [Sexp], ParseError> {
    e.as_list()
        .map_or_else(|| syntax(format!("expected a list for {what}"), e), Ok)
}

fn symbol<'a>(e: &'a Sexp, what: &str) -> Result<&'a str, ParseError> {
    e.as_sym()
        .map_or_else(|| syntax(format!("expected a symbol for {what}"), e), Ok)
}

fn name_of(e: &Sexp, what: &str) -> Result<Sym, ParseError> {
    let s = symbol(e, what)?;
    if s.starts_with('?') || s.starts_with(':') {
        return syntax(format!("`{s}` is not a valid {what} name"), e);
    }
    if s.starts_with("__") {
        return err(
            ParseErrorKind::Unsupported(format!("names starting with `__` are reserved (`{s}`)")),
            e.span(),
        );
    }
    Ok(sym(s))
}

/// Parses `a b - t c` style lists. Untyped entries get `object`.
fn typed_list(items: &[Sexp], vars: bool) -> Result<Vec<(Sym, Sym, SourceSpan)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<(Sym, SourceSpan)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = symbol(&items[i], "a typed list entry")?;
        if s == "-" {
            let Some(ty) = items.get(i + 1) else {
                return syntax("`-` must be followed by a type", &items[i]);
            };
            if ty
                .as_list()
                .is_some_and(|l| l.first().and_then(Sexp::as_sym) == Some("either"))
            {
                return unsupported("`either` types are not supported", ty);
            }
            let ty = name_of(ty, "type")?;
            if pending.is_empty() {
                return syntax("type annotation without names", &items[i]);
            }
            for (n, sp) in pending.drain(..) {
                out.push((n, ty.clone(), sp));
            }
            i += 2;
            continue;
        }
        let name = if vars {
            match s.strip_prefix('?') {
                Some(v) if !v.is_empty() => sym(v),
                _ => return syntax(format!("expected a variable, found `{s}`"), &items[i]),
            }
        } else {
            name_of(&items[i], "object")?
        };
        pending.push((name, items[i].span().clone()));
        i += 1;
    }
    for (n, sp) in pending {
        out.push((n, sym(OBJECT_TYPE), sp));
    }
    Ok(out)
}

fn params_of(e: &Sexp) -> Result<Vec<TypedVar>, ParseError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (name, ty, span) in typed_list(list(e, "parameters")?, true)? {
        if !seen.insert(name.clone()) {
            return err(ParseErrorKind::Duplicate(format!("?{name}")), &span);
        }
        out.push(TypedVar { name, ty });
    }
    Ok(out)
}

/// Splits `(:keyword value :keyword value ...)` after the first `skip` items.
fn keyword_args<'a>(
    items: &'a [Sexp],
    skip: usize,
) -> Result<Vec<(&'a str, &'a Sexp)>, ParseError> {
    let mut out = Vec::new();
    let mut i = skip;
    while i < items.len() {
        let k = symbol(&items[i], "a keyword")?;
        if !k.starts_with(':') {
            return syntax(format!("expected a keyword, found `{k}`"), &items[i]);
        }
        let Some(v) = items.get(i + 1) else {
            return syntax(format!("keyword `{k}` has no value"), &items[i]);
        };
        if out.iter().any(|(seen, _)| *seen == k) {
            return err(ParseErrorKind::Duplicate(k.to_string()), items[i].span());
        }
        out.push((k, v));
        i += 2;
    }
    Ok(out)
}

/// Symbol tables shared by formula and task parsing.
struct Scope<'a> {
    predicates: &'a BTreeMap<Sym, Vec<TypedVar>>,
    constants: &'a BTreeMap<Sym, Sym>,
    types: &'a BTreeSet<Sym>,
    vars: Vec<Sym>,
}

impl Scope<'_> {
    fn term(&self, e: &Sexp) -> Result<Term, ParseError> {
        let s = symbol(e, "a term")?;
        if let Some(v) = s.strip_prefix('?') {
            if !self.vars.iter().any(|x| &**x == v) {
                return undeclared("variable", s, e);
            }
            Ok(Term::Var(sym(v)))
        } else {
            if !self.constants.contains_key(s) {
                return undeclared("object", s, e);
            }
            Ok(Term::Const(sym(s)))
        }
    }

    fn atom(&self, e: &Sexp) -> Result<AtomTemplate, ParseError> {
        let items = list(e, "an atom")?;
        let Some(head) = items.first() else {
            return syntax("empty atom", e);
        };
        let p = symbol(head, "a predicate")?;
        if p == "=" {
            return unsupported("equality is not supported", e);
        }
        let Some(sig) = self.predicates.get(p) else {
            return undeclared("predicate", p, head);
        };
        if sig.len() != items.len() - 1 {
            return err(
                ParseErrorKind::Arity {
                    symbol: p.to_string(),
                    expected: sig.len(),
                    found: items.len() - 1,
                },
                e.span(),
            );
        }
        Ok(AtomTemplate {
            predicate: sym(p),
            args: items[1..]
                .iter()
                .map(|t| self.term(t))
                .collect::<Result<_, _>>()?,
        })
    }

    fn quantified_vars(&mut self, e: &Sexp) -> Result<Vec<TypedVar>, ParseError> {
        let vs = params_of(e)?;
        for v in &vs {
            if &*v.ty != OBJECT_TYPE && !self.types.contains(&v.ty) {
                return undeclared("type", &v.ty, e);
            }
        }
        Ok(vs)
    }

    fn formula(&mut self, e: &Sexp) -> Result<Formula, ParseError> {
        let items = list(e, "a formula")?;
        if items.is_empty() {
            return Ok(Formula::True);
        }
        match symbol(&items[0], "a formula head")? {
            "and" => Ok(Formula::And(
                items[1..]
                    .iter()
                    .map(|x| self.formula(x))
                    .collect::<Result<_, _>>()?,
            )),
            "not" => {
                if items.len() != 2 {
                    return syntax("`not` takes one argument", e);
                }
                match items[1].head() {
                    Some("and" | "not" | "forall" | "exists") => {
                        Ok(Formula::Not(Box::new(self.formula(&items[1])?)))
                    }
                    Some(op @ ("or" | "imply" | "when")) => {
                        unsupported(format!("`{op}` is not supported in preconditions"), e)
                    }
                    _ => Ok(Formula::Neg(self.atom(&items[1])?)),
                }
            }
            q @ ("forall" | "exists") => {
                if items.len() != 3 {
                    return syntax(format!("`{q}` takes a variable list and a body"), e);
                }
                let vs = self.quantified_vars(&items[1])?;
                let mark = self.vars.len();
                self.vars.extend(vs.iter().map(|v| v.name.clone()));
                let body = self.formula(&items[2]);
                self.vars.truncate(mark);
                let body = Box::new(body?);
                Ok(if q == "forall" {
                    Formula::Forall(vs, body)
                } else {
                    Formula::Exists(vs, body)
                })
            }
            op @ ("or" | "imply" | "when") => {
                unsupported(format!("`{op}` is not supported in preconditions"), e)
            }
            _ => Ok(Formula::Pos(self.atom(e)?)),
        }
    }

    /// Normalizes an effect into branches. Top-level literals form the first
    /// branch; each `forall` / `when` context contributes its own.
    fn effect(&mut self, e: &Sexp) -> Result<Effect, ParseError> {
        let mut base = EffectBranch {
            vars: vec![],
            condition: Formula::True,
            adds: vec![],
            deletes: vec![],
        };
        let mut rest = Vec::new();
        self.effect_into(e, &mut base, &mut rest, &[], &Formula::True)?;
        let mut branches = Vec::new();
        if !base.adds.is_empty() || !base.deletes.is_empty() {
            branches.push(base);
        }
        branches.extend(rest);
        Ok(Effect { branches })
    }

    fn effect_into(
        &mut self,
        e: &Sexp,
        cur: &mut EffectBranch,
        rest: &mut Vec<EffectBranch>,
        vars: &[TypedVar],
        cond: &Formula,
    ) -> Result<(), ParseError> {
        let items = list(e, "an effect")?;
        if items.is_empty() {
            return Ok(());
        }
        match symbol(&items[0], "an effect head")? {
            "and" => {
                for x in &items[1..] {
                    self.effect_into(x, cur, rest, vars, cond)?;
                }
                Ok(())
            }
            "not" => {
                if items.len() != 2 {
                    return syntax("`not` takes one argument", e);
                }
                cur.deletes.push(self.atom(&items[1])?);
                Ok(())
            }
            "forall" => {
                if items.len() != 3 {
                    return syntax("`forall` takes a variable list and a body", e);
                }
                let vs = self.quantified_vars(&items[1])?;
                let mark = self.vars.len();
                self.vars.extend(vs.iter().map(|v| v.name.clone()));
                let mut all = vars.to_vec();
                all.extend(vs);
                let r = self.nested(&items[2], rest, all, cond.clone());
                self.vars.truncate(mark);
                r
            }
            "when" => {
                if items.len() != 3 {
                    return syntax("`when` takes a condition and an effect", e);
                }
                let c = self.formula(&items[1])?;
                let c = Formula::and(vec![cond.clone(), c]);
                self.nested(&items[2], rest, vars.to_vec(), c)
            }
            op @ ("increase" | "decrease" | "assign" | "scale-up" | "scale-down") => {
                unsupported(format!("numeric effect `{op}` is not supported"), e)
            }
            _ => {
                cur.adds.push(self.atom(e)?);
                Ok(())
            }
        }
    }

    fn nested(
        &mut self,
        e: &Sexp,
        rest: &mut Vec<EffectBranch>,
        vars: Vec<TypedVar>,
        cond: Formula,
    ) -> Result<(), ParseError> {
        let slot = rest.len();
        let mut b = EffectBranch {
            vars: vars.clone(),
            condition: cond.clone(),
            adds: vec![],
            deletes: vec![],
        };
        let mut inner = Vec::new();
        self.effect_into(e, &mut b, &mut inner, &vars, &cond)?;
        if !b.adds.is_empty() || !b.deletes.is_empty() {
            rest.insert(slot, b);
        }
        rest.extend(inner);
        Ok(())
    }

    fn task(&self, e: &Sexp, sigs: &BTreeMap<Sym, usize>) -> Result<TaskTemplate, ParseError> {
        let items = list(e, "a task")?;
        let Some(head) = items.first() else {
            return syntax("empty task", e);
        };
        let name = symbol(head, "a task name")?;
        let Some(&arity) = sigs.get(name) else {
            return undeclared("task", name, head);
        };
        if arity != items.len() - 1 {
            return err(
                ParseErrorKind::Arity {
                    symbol: name.to_string(),
                    expected: arity,
                    found: items.len() - 1,
                },
                e.span(),
            );
        }
        Ok(TaskTemplate {
            name: sym(name),
            args: items[1..]
                .iter()
                .map(|t| self.term(t))
                .collect::<Result<_, _>>()?,
        })
    }
}

/// Reads a subtask network: `(and (t ..) ...)`, a single `(t ..)`, or labeled
/// entries `(label (t ..))`. Unordered networks are rejected.
fn subtask_list<'a>(key: &str, e: &'a Sexp) -> Result<Vec<&'a Sexp>, ParseError> {
    let items = list(e, "subtasks")?;
    let entries: Vec<&Sexp> = if items.is_empty() {
        vec![]
    } else if e.head() == Some("and") {
        items[1..].iter().collect()
    } else {
        vec![e]
    };
    if key == ":subtasks" && entries.len() > 1 {
        return unsupported(
            "unordered `:subtasks` networks are not supported; use `:ordered-subtasks`",
            e,
        );
    }
    entries
        .into_iter()
        .map(|x| {
            let l = list(x, "a subtask")?;
            Ok(if l.len() == 2 && l[1].as_list().is_some() {
                &l[1]
            } else {
                x
            })
        })
        .collect()
}

pub fn parse_domain(text: &str, file: &str) -> Result<Domain, ParseError> {
    let top = read(text, file)?;
    let items = list(&top, "the domain")?;
    if top.head() != Some("define") || items.len() < 2 {
        return syntax("expected `(define (domain NAME) ...)`", &top);
    }
    let hdr = list(&items[1], "the domain header")?;
    if items[1].head() != Some("domain") || hdr.len() != 2 {
        return syntax("expected `(domain NAME)`", &items[1]);
    }
    let mut d = Domain {
        name: name_of(&hdr[1], "domain")?,
        ..Domain::default()
    };

    // pass 1: signatures
    let mut types: BTreeSet<Sym> = BTreeSet::new();
    let mut constants: BTreeMap<Sym, Sym> = BTreeMap::new();
    let mut predicates: BTreeMap<Sym, Vec<TypedVar>> = BTreeMap::new();
    let mut tasks: BTreeMap<Sym, usize> = BTreeMap::new();
    let mut compound: BTreeSet<Sym> = BTreeSet::new();
    for sec in &items[2..] {
        let body = list(sec, "a domain section")?;
        let Some(key) = sec.head() else {
            return syntax("expected a `(:section ...)` block", sec);
        };
        match key {
            ":requirements" => {
                for r in &body[1..] {
                    let r = symbol(r, "a requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return unsupported(format!("requirement `{r}` is not supported"), sec);
                    }
                    d.requirements.push(r.to_string());
                }
            }
            ":types" => {
                for (t, parent, span) in typed_list(&body[1..], false)? {
                    if &*t == OBJECT_TYPE {
                        continue;
                    }
                    if !types.insert(t.clone()) {
                        return err(ParseErrorKind::Duplicate(t.to_string()), &span);
                    }
                    d.types.push((t, parent));
                }
            }
            ":constants" => {
                for (c, t, span) in typed_list(&body[1..], false)? {
                    if constants.insert(c.clone(), t.clone()).is_some() {
                        return err(ParseErrorKind::Duplicate(c.to_string()), &span);
                    }
                    d.constants.push((c, t));
                }
            }
            ":predicates" => {
                for p in &body[1..] {
                    let pl = list(p, "a predicate")?;
                    let Some(h) = pl.first() else {
                        return syntax("empty predicate declaration", p);
                    };
                    let name = name_of(h, "predicate")?;
                    let params = params_of(&Sexp::List(pl[1..].to_vec(), p.span().clone()))?;
                    if predicates.insert(name.clone(), params.clone()).is_some() {
                        return err(ParseErrorKind::Duplicate(name.to_string()), p.span());
                    }
                    d.predicates.push(PredicateSig {
                        name,
                        params,
                        span: p.span().clone(),
                    });
                }
            }
            ":task" | ":action" => {
                let name = name_of(
                    body.get(1)
                        .map_or_else(|| syntax("missing name", sec), Ok)?,
                    "task",
                )?;
                let kw = keyword_args(body, 2)?;
                let params = match kw.iter().find(|(k, _)| *k == ":parameters") {
                    Some((_, p)) => params_of(p)?,
                    None => vec![],
                };
                if tasks.insert(name.clone(), params.len()).is_some() {
                    return err(ParseErrorKind::Duplicate(name.to_string()), sec.span());
                }
                if key == ":task" {
                    compound.insert(name.clone());
                    d.tasks.push(TaskSig {
                        name,
                        params,
                        span: sec.span().clone(),
                    });
                }
            }
            ":method" => {}
            ":functions" => return unsupported("numeric fluents are not supported", sec),
            ":derived" => return unsupported("derived predicates are not supported", sec),
            ":durative-action" => return unsupported("durative actions are not supported", sec),
            other => return unsupported(format!("unknown domain section `{other}`"), sec),
        }
    }
    for (_, parent) in &d.types {
        if &**parent != OBJECT_TYPE && !types.contains(parent) {
            return undeclared("type", parent, &items[1]);
        }
    }
    let check_types = |vs: &[TypedVar], at: &Sexp| -> Result<(), ParseError> {
        for v in vs {
            if &*v.ty != OBJECT_TYPE && !types.contains(&v.ty) {
                return undeclared("type", &v.ty, at);
            }
        }
        Ok(())
    };
    for p in &d.predicates {
        check_types(&p.params, &items[1])?;
    }
    for (c, t) in &d.constants {
        if &**t != OBJECT_TYPE && !types.contains(t) {
            return undeclared("type", &format!("{t} (constant {c})"), &items[1]);
        }
    }

    // pass 2: bodies
    let mut method_names = BTreeSet::new();
    for sec in &items[2..] {
        let body = list(sec, "a domain section")?;
        match sec.head() {
            Some(":task") => {
                let kw = keyword_args(body, 2)?;
                for (k, v) in &kw {
                    if *k != ":parameters" {
                        return unsupported(format!("`{k}` is not supported on tasks"), v);
                    }
                }
                let name = symbol(&body[1], "a task name")?;
                if let Some(sig) = d.task_sig(name) {
                    check_types(&sig.params, sec)?;
                }
            }
            Some(":action") => {
                let name = name_of(&body[1], "action")?;
                let kw = keyword_args(body, 2)?;
                let mut a = ActionSchema {
                    name,
                    params: vec![],
                    precondition: Formula::True,
                    effect: Effect::empty(),
                    cost: 1.0,
                    span: sec.span().clone(),
                };
                for (k, v) in &kw {
                    if *k == ":parameters" {
                        a.params = params_of(v)?;
                    }
                }
                check_types(&a.params, sec)?;
                let mut scope = Scope {
                    predicates: &predicates,
                    constants: &constants,
                    types: &types,
                    vars: a.params.iter().map(|p| p.name.clone()).collect(),
                };
                for (k, v) in &kw {
                    match *k {
                        ":parameters" => {}
                        ":precondition" => a.precondition = scope.formula(v)?,
                        ":effect" => a.effect = scope.effect(v)?,
                        ":cost" => {
                            let c: f64 = symbol(v, "a cost")?
                                .parse()
                                .or_else(|_| syntax("cost must be a number", v))?;
                            if !(c >= 0.0) || !c.is_finite() {
                                return syntax("cost must be nonnegative", v);
                            }
                            a.cost = c;
                        }
                        other => {
                            return unsupported(format!("`{other}` is not supported on actions"), v)
                        }
                    }
                }
                d.actions.push(a);
            }
            Some(":method") => {
                let name = name_of(
                    body.get(1)
                        .map_or_else(|| syntax("missing method name", sec), Ok)?,
                    "method",
                )?;
                if !method_names.insert(name.clone()) {
                    return err(ParseErrorKind::Duplicate(name.to_string()), sec.span());
                }
                let kw = keyword_args(body, 2)?;
                let mut params = vec![];
                for (k, v) in &kw {
                    if *k == ":parameters" {
                        params = params_of(v)?;
                    }
                }
                check_types(&params, sec)?;
                let mut scope = Scope {
                    predicates: &predicates,
                    constants: &constants,
                    types: &types,
                    vars: params.iter().map(|p| p.name.clone()).collect(),
                };
                let mut task = None;
                let mut pre = Formula::True;
                let mut subtasks = vec![];
                for (k, v) in &kw {
                    match *k {
                        ":parameters" => {}
                        ":task" => {
                            let t = scope.task(v, &tasks)?;
                            if !compound.contains(&t.name) {
                                return syntax(format!("`{}` is primitive; methods must decompose compound tasks", t.name), v);
                            }
                            task = Some(t);
                        }
                        ":precondition" => pre = scope.formula(v)?,
                        ":ordered-subtasks" | ":ordered-tasks" | ":subtasks" | ":tasks" => {
                            let key = if k.starts_with(":ordered") { ":ordered-subtasks" } else { ":subtasks" };
                            for st in subtask_list(key, v)? {
                                subtasks.push(scope.task(st, &tasks)?);
                            }
                        }
                        ":ordering" | ":order" => {
                            return unsupported("ordering constraints are not supported; methods must be totally ordered", v)
                        }
                        ":constraints" => return unsupported("method constraints are not supported", v),
                        other => return unsupported(format!("`{other}` is not supported on methods"), v),
                    }
                }
                let Some(task) = task else {
                    return syntax("method has no `:task`", sec);
                };
                d.methods.push(MethodSchema {
                    name,
                    params,
                    task,
                    precondition: pre,
                    subtasks,
                    span: sec.span().clone(),
                });
            }
            _ => {}
        }
    }
    Ok(d)
}

pub fn parse_problem(text: &str, file: &str, domain: &Domain) -> Result<Problem, ParseError> {
    let top = read(text, file)?;
    let items = list(&top, "the problem")?;
    if top.head() != Some("define") || items.len() < 2 {
        return syntax("expected `(define (problem NAME) ...)`", &top);
    }
    let hdr = list(&items[1], "the problem header")?;
    if items[1].head() != Some("problem") || hdr.len() != 2 {
        return syntax("expected `(problem NAME)`", &items[1]);
    }
    let mut p = Problem {
        name: name_of(&hdr[1], "problem")?,
        ..Problem::default()
    };
    let types: BTreeSet<Sym> = domain.types.iter().map(|(t, _)| t.clone()).collect();
    let parents: BTreeMap<Sym, Sym> = domain.types.iter().cloned().collect();
    let is_subtype = |t: &Sym, of: &Sym| -> bool {
        if &**of == OBJECT_TYPE {
            return true;
        }
        let mut cur = t.clone();
        for _ in 0..=parents.len() {
            if cur == *of {
                return true;
            }
            match parents.get(&cur) {
                Some(x) => cur = x.clone(),
                None => return false,
            }
        }
        false
    };
    let mut objects: BTreeMap<Sym, Sym> = domain.constants.iter().cloned().collect();
    let predicates: BTreeMap<Sym, Vec<TypedVar>> = domain
        .predicates
        .iter()
        .map(|p| (p.name.clone(), p.params.clone()))
        .collect();
    let mut sigs: BTreeMap<Sym, Vec<TypedVar>> = BTreeMap::new();
    for t in &domain.tasks {
        sigs.insert(t.name.clone(), t.params.clone());
    }
    for a in &domain.actions {
        sigs.insert(a.name.clone(), a.params.clone());
    }

    let sections: Vec<&Sexp> = items[2..].iter().collect();
    // objects first so that init and tasks can refer to them in any order
    for sec in &sections {
        let body = list(sec, "a problem section")?;
        match sec.head() {
            Some(":domain") => {
                let n = symbol(
                    body.get(1)
                        .map_or_else(|| syntax("missing domain name", sec), Ok)?,
                    "domain",
                )?;
                if n != &*domain.name {
                    return err(
                        ParseErrorKind::Undeclared {
                            what: "domain".into(),
                            name: n.to_string(),
                        },
                        sec.span(),
                    );
                }
                p.domain_name = sym(n);
            }
            Some(":objects") => {
                for (o, t, span) in typed_list(&body[1..], false)? {
                    if &*t != OBJECT_TYPE && !types.contains(&t) {
                        return err(
                            ParseErrorKind::Undeclared {
                                what: "type".into(),
                                name: t.to_string(),
                            },
                            &span,
                        );
                    }
                    if let Some(prev) = objects.get(&o) {
                        if *prev != t {
                            return err(
                                ParseErrorKind::TypeMismatch(format!(
                                    "object `{o}` declared as `{prev}` and `{t}`"
                                )),
                                &span,
                            );
                        }
                        return err(ParseErrorKind::Duplicate(o.to_string()), &span);
                    }
                    objects.insert(o.clone(), t.clone());
                    p.objects.push((o, t));
                }
            }
            _ => {}
        }
    }
    let ground_args = |args: &[Sexp],
                       params: &[TypedVar],
                       what: &str,
                       at: &Sexp|
     -> Result<Vec<Sym>, ParseError> {
        if args.len() != params.len() {
            return err(
                ParseErrorKind::Arity {
                    symbol: what.to_string(),
                    expected: params.len(),
                    found: args.len(),
                },
                at.span(),
            );
        }
        let mut out = Vec::new();
        for (a, param) in args.iter().zip(params) {
            let s = symbol(a, "an object")?;
            let Some(t) = objects.get(s) else {
                return undeclared("object", s, a);
            };
            if !is_subtype(t, &param.ty) {
                return err(
                    ParseErrorKind::TypeMismatch(format!(
                        "`{s}` has type `{t}` but `{what}` expects `{}`",
                        param.ty
                    )),
                    a.span(),
                );
            }
            out.push(sym(s));
        }
        Ok(out)
    };
    let mut init = State::new();
    let mut seen_htn = false;
    for sec in &sections {
        let body = list(sec, "a problem section")?;
        match sec.head() {
            Some(":domain" | ":objects") => {}
            Some(":init") => {
                for a in &body[1..] {
                    let al = list(a, "an initial atom")?;
                    let Some(h) = al.first() else {
                        return syntax("empty atom", a);
                    };
                    let pname = symbol(h, "a predicate")?;
                    if pname == "not" {
                        return unsupported("negative literals are not allowed in `:init`", a);
                    }
                    let Some(params) = predicates.get(pname) else {
                        return undeclared("predicate", pname, h);
                    };
                    let args = ground_args(&al[1..], params, pname, a)?;
                    init.insert(Atom {
                        predicate: sym(pname),
                        args,
                    });
                }
            }
            Some(":htn") => {
                if seen_htn {
                    return err(ParseErrorKind::Duplicate(":htn".into()), sec.span());
                }
                seen_htn = true;
                for (k, v) in keyword_args(body, 1)? {
                    match k {
                        ":parameters" => {
                            if !list(v, "parameters")?.is_empty() {
                                return unsupported("`:htn` parameters are not supported", v);
                            }
                        }
                        ":ordered-subtasks" | ":ordered-tasks" | ":subtasks" | ":tasks" => {
                            let key = if k.starts_with(":ordered") { ":ordered-subtasks" } else { ":subtasks" };
                            for st in subtask_list(key, v)? {
                                let l = list(st, "a task")?;
                                let Some(h) = l.first() else {
                                    return syntax("empty task", st);
                                };
                                let name = symbol(h, "a task name")?;
                                let Some(params) = sigs.get(name) else {
                                    return undeclared("task", name, h);
                                };
                                let args = ground_args(&l[1..], params, name, st)?;
                                p.tasks.push(Task {
                                    name: sym(name),
                                    args,
                                });
                            }
                        }
                        ":ordering" | ":order" => {
                            return unsupported("ordering constraints are not supported; the initial network must be totally ordered", v)
                        }
                        ":constraints" => return unsupported("`:htn` constraints are not supported", v),
                        other => return unsupported(format!("`{other}` is not supported in `:htn`"), v),
                    }
                }
            }
            Some(":goal") => {
                return unsupported("goal-based problems are not supported; use `:htn`", sec)
            }
            Some(":metric") => return unsupported("`:metric` is not supported", sec),
            Some(other) => return unsupported(format!("unknown problem section `{other}`"), sec),
            None => return syntax("expected a `(:section ...)` block", sec),
        }
    }
    if p.domain_name.is_empty() {
        return syntax("problem has no `(:domain ...)`", &top);
    }
    p.init = init;
    Ok(p)
}

/// Disturbances may mention the problem's objects when `problem` is given.
pub fn parse_disturbances(
    text: &str,
    file: &str,
    domain: &Domain,
    problem: Option<&Problem>,
) -> Result<DisturbanceFile, ParseError> {
    let top = read(text, file)?;
    let items = list(&top, "the disturbance file")?;
    if top.head() != Some("define") || items.len() < 2 {
        return syntax("expected `(define (disturbances NAME) ...)`", &top);
    }
    let hdr = list(&items[1], "the header")?;
    if items[1].head() != Some("disturbances") || hdr.len() != 2 {
        return syntax("expected `(disturbances NAME)`", &items[1]);
    }
    let mut out = DisturbanceFile {
        name: name_of(&hdr[1], "disturbance set")?,
        domain_name: sym(""),
        disturbances: vec![],
    };
    let types: BTreeSet<Sym> = domain.types.iter().map(|(t, _)| t.clone()).collect();
    let constants: BTreeMap<Sym, Sym> = domain
        .constants
        .iter()
        .chain(problem.map(|p| p.objects.as_slice()).unwrap_or(&[]))
        .cloned()
        .collect();
    let predicates: BTreeMap<Sym, Vec<TypedVar>> = domain
        .predicates
        .iter()
        .map(|p| (p.name.clone(), p.params.clone()))
        .collect();
    for sec in &items[2..] {
        let body = list(sec, "a section")?;
        match sec.head() {
            Some(":domain") => {
                let n = symbol(
                    body.get(1)
                        .map_or_else(|| syntax("missing domain name", sec), Ok)?,
                    "domain",
                )?;
                if n != &*domain.name {
                    return undeclared("domain", n, sec);
                }
                out.domain_name = sym(n);
            }
            Some(":disturbance") => {
                let name = name_of(
                    body.get(1)
                        .map_or_else(|| syntax("missing name", sec), Ok)?,
                    "disturbance",
                )?;
                if out
                    .disturbances
                    .iter()
                    .any(|d: &DisturbanceSpec| d.name == name)
                {
                    return err(ParseErrorKind::Duplicate(name.to_string()), sec.span());
                }
                let kw = keyword_args(body, 2)?;
                let mut params = vec![];
                for (k, v) in &kw {
                    if *k == ":parameters" {
                        params = params_of(v)?;
                    }
                }
                for v in &params {
                    if &*v.ty != OBJECT_TYPE && !types.contains(&v.ty) {
                        return undeclared("type", &v.ty, sec);
                    }
                }
                let mut scope = Scope {
                    predicates: &predicates,
                    constants: &constants,
                    types: &types,
                    vars: params.iter().map(|p| p.name.clone()).collect(),
                };
                let mut spec = DisturbanceSpec {
                    name,
                    params: params.clone(),
                    precondition: Formula::True,
                    effect: Effect::empty(),
                    placement: Placement::Random,
                    span: sec.span().clone(),
                };
                for (k, v) in &kw {
                    match *k {
                        ":parameters" => {}
                        ":precondition" => spec.precondition = scope.formula(v)?,
                        ":effect" => spec.effect = scope.effect(v)?,
                        ":placement" => {
                            spec.placement = match v {
                                Sexp::Sym(s, _) if s == "random" => Placement::Random,
                                Sexp::List(l, _) if v.head() == Some("after") && l.len() == 2 => {
                                    let k: usize =
                                        symbol(&l[1], "a position")?.parse().or_else(|_| {
                                            syntax("position must be a nonnegative integer", &l[1])
                                        })?;
                                    if k == 0 {
                                        return syntax(
                                            "positions count executed actions and start at 1",
                                            &l[1],
                                        );
                                    }
                                    Placement::After(k)
                                }
                                _ => return syntax("expected `random` or `(after K)`", v),
                            }
                        }
                        other => {
                            return unsupported(
                                format!("`{other}` is not supported on disturbances"),
                                v,
                            )
                        }
                    }
                }
                out.disturbances.push(spec);
            }
            Some(other) => return unsupported(format!("unknown section `{other}`"), sec),
            None => return syntax("expected a `(:section ...)` block", sec),
        }
    }
    if out.domain_name.is_empty() {
        return syntax("disturbance file has no `(:domain ...)`", &top);
    }
    Ok(out)
}
