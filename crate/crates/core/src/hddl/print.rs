use std::fmt::Write as _;

use crate::model::{Domain, Effect, EffectBranch, Formula, Problem, TypedVar};

use super::{DisturbanceFile, Placement};

fn params(vs: &[TypedVar]) -> String {
    let inner: Vec<String> = vs
        .iter()
        .map(|v| format!("?{} - {}", v.name, v.ty))
        .collect();
    format!("({})", inner.join(" "))
}

pub fn formula(f: &Formula) -> String {
    match f {
        Formula::True => "()".into(),
        Formula::Pos(a) => a.to_string(),
        Formula::Neg(a) => format!("(not {a})"),
        Formula::Not(b) => format!("(not {})", formula(b)),
        Formula::And(ps) => {
            let mut s = String::from("(and");
            for p in ps {
                s.push(' ');
                s.push_str(&formula(p));
            }
            s.push(')');
            s
        }
        Formula::Forall(vs, b) => format!("(forall {} {})", params(vs), formula(b)),
        Formula::Exists(vs, b) => format!("(exists {} {})", params(vs), formula(b)),
    }
}

fn literals(b: &EffectBranch) -> Vec<String> {
    b.deletes
        .iter()
        .map(|a| format!("(not {a})"))
        .chain(b.adds.iter().map(|a| a.to_string()))
        .collect()
}

pub fn effect(e: &Effect) -> String {
    let mut parts = Vec::new();
    for b in &e.branches {
        let lits = format!("(and {})", literals(b).join(" "));
        let plain = b.vars.is_empty() && b.condition.is_true();
        if plain {
            parts.extend(literals(b));
            continue;
        }
        let body = if b.condition.is_true() {
            lits
        } else {
            format!("(when {} {lits})", formula(&b.condition))
        };
        parts.push(if b.vars.is_empty() {
            body
        } else {
            format!("(forall {} {body})", params(&b.vars))
        });
    }
    match parts.len() {
        0 => "()".into(),
        _ => format!("(and {})", parts.join(" ")),
    }
}

fn typed_objects(objs: &[(crate::model::Sym, crate::model::Sym)]) -> String {
    objs.iter()
        .map(|(o, t)| format!("{o} - {t}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn print_domain(d: &Domain) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = writeln!(s, "  (:requirements {})", d.requirements.join(" "));
    }
    if !d.types.is_empty() {
        let _ = writeln!(s, "  (:types {})", typed_objects(&d.types));
    }
    if !d.constants.is_empty() {
        let _ = writeln!(s, "  (:constants {})", typed_objects(&d.constants));
    }
    s.push_str("  (:predicates");
    for p in &d.predicates {
        let ps: Vec<String> = p
            .params
            .iter()
            .map(|v| format!(" ?{} - {}", v.name, v.ty))
            .collect();
        let _ = write!(s, "\n    ({}{})", p.name, ps.concat());
    }
    s.push_str(")\n");
    for t in &d.tasks {
        let _ = writeln!(s, "  (:task {} :parameters {})", t.name, params(&t.params));
    }
    for m in &d.methods {
        let _ = writeln!(s, "  (:method {}", m.name);
        let _ = writeln!(s, "    :parameters {}", params(&m.params));
        let _ = writeln!(s, "    :task {}", m.task);
        if !m.precondition.is_true() {
            let _ = writeln!(s, "    :precondition {}", formula(&m.precondition));
        }
        let subs: Vec<String> = m.subtasks.iter().map(|t| t.to_string()).collect();
        if subs.is_empty() {
            let _ = writeln!(s, "    :ordered-subtasks ())");
        } else {
            let _ = writeln!(s, "    :ordered-subtasks (and {}))", subs.join(" "));
        }
    }
    for a in &d.actions {
        let _ = writeln!(s, "  (:action {}", a.name);
        let _ = write!(s, "    :parameters {}", params(&a.params));
        if !a.precondition.is_true() {
            let _ = write!(s, "\n    :precondition {}", formula(&a.precondition));
        }
        if !a.effect.branches.is_empty() {
            let _ = write!(s, "\n    :effect {}", effect(&a.effect));
        }
        if a.cost != 1.0 {
            let _ = write!(s, "\n    :cost {}", a.cost);
        }
        s.push_str(")\n");
    }
    s.push_str(")\n");
    s
}

pub fn print_problem(p: &Problem) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (problem {})", p.name);
    let _ = writeln!(s, "  (:domain {})", p.domain_name);
    if !p.objects.is_empty() {
        let _ = writeln!(s, "  (:objects {})", typed_objects(&p.objects));
    }
    let tasks: Vec<String> = p.tasks.iter().map(|t| t.to_string()).collect();
    if tasks.is_empty() {
        s.push_str("  (:htn :parameters () :ordered-subtasks ())\n");
    } else {
        let _ = writeln!(
            s,
            "  (:htn :parameters () :ordered-subtasks (and {}))",
            tasks.join(" ")
        );
    }
    s.push_str("  (:init");
    for a in p.init.iter() {
        let _ = write!(s, "\n    {a}");
    }
    s.push_str(")\n)\n");
    s
}

pub fn print_disturbances(f: &DisturbanceFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "(define (disturbances {})", f.name);
    let _ = writeln!(s, "  (:domain {})", f.domain_name);
    for d in &f.disturbances {
        let _ = writeln!(s, "  (:disturbance {}", d.name);
        let _ = write!(s, "    :parameters {}", params(&d.params));
        if !d.precondition.is_true() {
            let _ = write!(s, "\n    :precondition {}", formula(&d.precondition));
        }
        let _ = write!(s, "\n    :effect {}", effect(&d.effect));
        match d.placement {
            Placement::Random => s.push_str("\n    :placement random"),
            Placement::After(k) => {
                let _ = write!(s, "\n    :placement (after {k})");
            }
        }
        s.push_str(")\n");
    }
    s.push_str(")\n");
    s
}
