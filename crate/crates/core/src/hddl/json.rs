use std::fmt;
use std::sync::Arc;

use serde_json::{json, Map, Value};

use crate::model::{
    sym, DecompositionTree, Domain, GroundAction, Node, NodeId, NodeKind, Plan, State, Sym, Task,
};

/// Schema violation in a JSON document, located by a JSON pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonError {
    pub pointer: String,
    pub message: String,
}

impl fmt::Display for JsonError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = if self.pointer.is_empty() {
            "/"
        } else {
            &self.pointer
        };
        write!(f, "{at}: {}", self.message)
    }
}

impl std::error::Error for JsonError {}

fn jerr<T>(pointer: &str, message: impl Into<String>) -> Result<T, JsonError> {
    Err(JsonError {
        pointer: pointer.to_string(),
        message: message.into(),
    })
}

fn strings(args: &[Sym]) -> Value {
    Value::Array(args.iter().map(|a| Value::String(a.to_string())).collect())
}

// Keys are inserted alphabetically so the output is canonical whether or not
// serde_json keeps insertion order.
fn node_value(n: &Node) -> Value {
    let mut m = Map::new();
    let (kind, name, args) = match &n.kind {
        NodeKind::Root => ("root", None, None),
        NodeKind::Task(t) => ("task", Some(t.name.clone()), Some(&t.args)),
        NodeKind::Method(g) => ("method", Some(g.name.clone()), Some(&g.args)),
        NodeKind::Action(a) => ("action", Some(a.name.clone()), Some(&a.args)),
    };
    if let Some(args) = args {
        m.insert("args".into(), strings(args));
    }
    m.insert(
        "children".into(),
        Value::Array(n.children.iter().map(node_value).collect()),
    );
    m.insert("id".into(), json!(n.id));
    m.insert("kind".into(), json!(kind));
    if let Some(name) = name {
        m.insert("name".into(), json!(&*name));
    }
    if n.pruned {
        m.insert("pruned".into(), json!(true));
    }
    if let Some(s) = &n.state {
        m.insert(
            "state".into(),
            serde_json::to_value(&**s).expect("states serialize"),
        );
    }
    Value::Object(m)
}

/// Canonical, byte-stable JSON for a tree.
pub fn tree_to_json(tree: &DecompositionTree) -> String {
    serde_json::to_string_pretty(&node_value(tree.root())).expect("tree serializes")
}

fn get_str<'a>(m: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a str, JsonError> {
    match m.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => jerr(&format!("{at}/{key}"), "expected a string"),
        None => jerr(at, format!("missing `{key}`")),
    }
}

fn get_args(m: &Map<String, Value>, at: &str) -> Result<Vec<Sym>, JsonError> {
    match m.get("args") {
        None => Ok(vec![]),
        Some(Value::Array(v)) => v
            .iter()
            .enumerate()
            .map(|(i, x)| match x {
                Value::String(s) => Ok(sym(s)),
                _ => jerr(&format!("{at}/args/{i}"), "expected a string"),
            })
            .collect(),
        Some(_) => jerr(&format!("{at}/args"), "expected an array"),
    }
}

fn parse_node(v: &Value, at: &str, domain: &Domain, top: bool) -> Result<Node, JsonError> {
    let Value::Object(m) = v else {
        return jerr(at, "expected an object");
    };
    for k in m.keys() {
        if !["args", "children", "id", "kind", "name", "pruned", "state"].contains(&k.as_str()) {
            return jerr(&format!("{at}/{k}"), "unknown field");
        }
    }
    let id = match m.get("id") {
        Some(Value::Number(n)) => match n.as_u64().and_then(|x| NodeId::try_from(x).ok()) {
            Some(x) => x,
            None => return jerr(&format!("{at}/id"), "expected a small nonnegative integer"),
        },
        Some(_) => return jerr(&format!("{at}/id"), "expected an integer"),
        None => return jerr(at, "missing `id`"),
    };
    let kind_s = get_str(m, "kind", at)?;
    let kind = match (kind_s, top) {
        ("root", true) => NodeKind::Root,
        ("root", false) => return jerr(&format!("{at}/kind"), "root may only appear at the top"),
        (_, true) => return jerr(&format!("{at}/kind"), "top node must be the root"),
        ("task", _) => {
            let name = get_str(m, "name", at)?;
            let args = get_args(m, at)?;
            let Some(sig) = domain.task_sig(name) else {
                return jerr(
                    &format!("{at}/name"),
                    format!("unknown compound task `{name}`"),
                );
            };
            if sig.params.len() != args.len() {
                return jerr(
                    &format!("{at}/args"),
                    format!("`{name}` takes {} argument(s)", sig.params.len()),
                );
            }
            NodeKind::Task(Task {
                name: sym(name),
                args,
            })
        }
        ("method", _) => {
            let name = get_str(m, "name", at)?;
            let args = get_args(m, at)?;
            match domain.ground_method(name, &args) {
                Ok(g) => NodeKind::Method(Arc::new(g)),
                Err(e) => return jerr(&format!("{at}/name"), e.to_string()),
            }
        }
        ("action", _) => {
            let name = get_str(m, "name", at)?;
            let args = get_args(m, at)?;
            match domain.ground_action(name, &args) {
                Ok(a) if a.is_dummy() => NodeKind::Action(GroundAction::dummy()),
                Ok(a) => NodeKind::Action(Arc::new(a)),
                Err(e) => return jerr(&format!("{at}/name"), e.to_string()),
            }
        }
        (other, _) => return jerr(&format!("{at}/kind"), format!("unknown kind `{other}`")),
    };
    let pruned = match m.get("pruned") {
        None => false,
        Some(Value::Bool(b)) => *b,
        Some(_) => return jerr(&format!("{at}/pruned"), "expected a boolean"),
    };
    let state = match m.get("state") {
        None => None,
        Some(v) => match serde_json::from_value::<State>(v.clone()) {
            Ok(s) => Some(Arc::new(s)),
            Err(e) => return jerr(&format!("{at}/state"), e.to_string()),
        },
    };
    let children = match m.get("children") {
        None => vec![],
        Some(Value::Array(cs)) => cs
            .iter()
            .enumerate()
            .map(|(i, c)| parse_node(c, &format!("{at}/children/{i}"), domain, false))
            .collect::<Result<_, _>>()?,
        Some(_) => return jerr(&format!("{at}/children"), "expected an array"),
    };
    Ok(Node {
        id,
        kind,
        pruned,
        state,
        children,
    })
}

/// Reads a tree, resolving labels against `domain`, and checks its shape.
pub fn tree_from_json(text: &str, domain: &Domain) -> Result<DecompositionTree, JsonError> {
    let v: Value = serde_json::from_str(text).map_err(|e| JsonError {
        pointer: String::new(),
        message: format!("invalid JSON: {e}"),
    })?;
    let root = parse_node(&v, "", domain, true)?;
    let tree = DecompositionTree::from_root(root).map_err(|e| JsonError {
        pointer: String::new(),
        message: e.to_string(),
    })?;
    tree.check_structure().map_err(|e| JsonError {
        pointer: String::new(),
        message: e.to_string(),
    })?;
    Ok(tree)
}

/// Plans are written without dummy actions.
pub fn plan_to_json(plan: &Plan) -> String {
    let v: Vec<Value> = plan
        .visible()
        .actions
        .iter()
        .map(|a| {
            let mut m = Map::new();
            m.insert("args".into(), strings(&a.args));
            m.insert("name".into(), json!(&*a.name));
            Value::Object(m)
        })
        .collect();
    serde_json::to_string_pretty(&Value::Array(v)).expect("plan serializes")
}

pub fn plan_from_json(text: &str, domain: &Domain) -> Result<Plan, JsonError> {
    let v: Value = serde_json::from_str(text).map_err(|e| JsonError {
        pointer: String::new(),
        message: format!("invalid JSON: {e}"),
    })?;
    let Value::Array(items) = v else {
        return jerr("", "expected an array of actions");
    };
    let mut actions = Vec::new();
    for (i, it) in items.iter().enumerate() {
        let at = format!("/{i}");
        let Value::Object(m) = it else {
            return jerr(&at, "expected an object");
        };
        let name = get_str(m, "name", &at)?;
        let args = get_args(m, &at)?;
        match domain.ground_action(name, &args) {
            Ok(a) => actions.push(Arc::new(a)),
            Err(e) => return jerr(&format!("{at}/name"), e.to_string()),
        }
    }
    Ok(Plan::new(actions))
}
