//! States, formulas, domains, decomposition trees and the transition function.

pub mod atom;
pub mod domain;
pub mod formula;
pub mod plan;
pub mod tree;

pub use atom::{sym, Atom, State, Sym};
pub use domain::{
    ActionSchema, Domain, GroundAction, GroundMethod, MethodSchema, PredicateSig, Problem,
    SourceSpan, Task, TaskSig, TaskTemplate, Universe, DUMMY_ACTION, OBJECT_TYPE,
};
pub use formula::{AtomTemplate, Bindings, Effect, EffectBranch, Formula, Term, TypedVar};
pub use plan::{apply_plan, Plan, PlanFailure};
pub use tree::{DecompositionTree, ExecStatus, Node, NodeId, NodeKind, TreeFailure};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("unbound variable `?{0}`")]
    UnboundVariable(String),
    #[error("`{owner}` mentions free variable `?{var}` that is not a parameter")]
    FreeVariable { owner: String, var: String },
    #[error("`{symbol}` expects {expected} argument(s), got {found}")]
    Arity {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("object `{object}` has type `{found}`, expected `{expected}`")]
    TypeMismatch {
        object: String,
        expected: String,
        found: String,
    },
    #[error("`{0}` is declared twice")]
    Duplicate(String),
    #[error("names starting with `__` are reserved: `{0}`")]
    ReservedName(String),
    #[error("action `{0}` has a negative cost")]
    NegativeCost(String),
    #[error("{action} is not applicable: {literal} does not hold")]
    PreconditionViolated { action: String, literal: String },
    #[error("malformed tree: {0}")]
    Structure(String),
}
