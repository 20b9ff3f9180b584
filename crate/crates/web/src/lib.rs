//! Browser bindings: list the bundled fixtures, repair one with every
//! strategy, and enumerate its solution classes.

use std::sync::Arc;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use hrepair_core::disturbance::{classify, inject, RepairProblem};
use hrepair_core::fixtures;
use hrepair_core::hddl::tree_to_json;
use hrepair_core::model::Universe;
use hrepair_core::oracle::check_theorems;
use hrepair_core::planner::{Planner, SearchBudget, SearchOutcome};
use hrepair_core::repair::{repair, RepairOutcome, Strategy};

/// No wall clock: `Instant` is unavailable in the browser.
fn budget() -> SearchBudget {
    SearchBudget {
        time_limit: None,
        max_expansions: Some(200_000),
        max_depth: 64,
        max_nodes: 20_000,
    }
}

fn oracle_budget() -> SearchBudget {
    SearchBudget {
        max_depth: 16,
        max_nodes: 512,
        ..budget()
    }
}

fn scenario(
    name: &str,
    disturbance: &str,
    methods: &str,
    position: u32,
    seed: u32,
) -> Result<RepairProblem, String> {
    let b = fixtures::find(name).ok_or_else(|| format!("unknown fixture `{name}`"))?;
    let l = b.load().map_err(|e| e.to_string())?;
    let u = Arc::new(Universe::new(&l.domain, &l.problem).map_err(|e| e.to_string())?);
    let tree = match Planner::new(&l.domain, &u, budget()).solve(&l.problem.init, &l.problem.tasks)
    {
        Ok(SearchOutcome::Found(t, _)) => t,
        Ok(o) => return Err(format!("{name} has no plan: {o:?}")),
        Err(e) => return Err(e.to_string()),
    };
    let file = &l
        .disturbances
        .iter()
        .find(|(n, _)| *n == disturbance)
        .ok_or_else(|| format!("{name} has no disturbance file `{disturbance}`"))?
        .1;
    let spec = file.disturbances.first().ok_or("empty disturbance file")?;
    let keep: Vec<&str> = methods
        .split(',')
        .map(str::trim)
        .filter(|m| !m.is_empty())
        .collect();
    let domain = if keep.is_empty() {
        l.domain
    } else {
        l.domain.restrict_methods(&keep)
    };
    let position = (position > 0).then_some(position as usize);
    inject(
        Arc::new(domain),
        u,
        &l.problem.init,
        &tree,
        spec,
        position,
        u64::from(seed),
    )
    .map_err(|e| e.to_string())
}

/// JSON list of fixtures with their methods and disturbance files.
#[wasm_bindgen]
pub fn fixtures() -> Result<String, String> {
    let mut out = Vec::new();
    for b in fixtures::ALL {
        let l = b.load().map_err(|e| e.to_string())?;
        out.push(json!({
            "name": b.name,
            "methods": l.domain.methods.iter().map(|m| m.name.to_string()).collect::<Vec<_>>(),
            "disturbances": l.disturbances.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
        }));
    }
    Ok(Value::Array(out).to_string())
}

/// Runs all three strategies. `methods` is a comma-separated allow-list
/// (empty keeps all); `position` 0 uses the file's placement.
#[wasm_bindgen]
pub fn repair_fixture(
    name: &str,
    disturbance: &str,
    methods: &str,
    position: u32,
    seed: u32,
) -> Result<String, String> {
    let rp = scenario(name, disturbance, methods, position, seed)?;
    let report = classify(&rp).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    for s in Strategy::ALL {
        let v = match repair(&rp, s, budget()).map_err(|e| e.to_string())? {
            RepairOutcome::Repaired(r) => json!({
                "strategy": s.to_string(),
                "outcome": "success",
                "plan_after": r.t_u.plan().visible().to_string(),
                "changed_nodes": r.changed_nodes,
                "tree": serde_json::from_str::<Value>(&tree_to_json(&r.t_u)).map_err(|e| e.to_string())?,
            }),
            RepairOutcome::Unrepairable => {
                json!({ "strategy": s.to_string(), "outcome": "proven-unrepairable" })
            }
            RepairOutcome::LimitReached(l) => {
                json!({ "strategy": s.to_string(), "outcome": "timeout", "limit": format!("{l:?}") })
            }
        };
        results.push(v);
    }
    let d = rp.disturbance.as_ref();
    Ok(json!({
        "class": report.class,
        "disturbance": d.map(|d| d.name.to_string()),
        "position": d.map(|d| d.position),
        "executed": rp.pi_x.visible().to_string(),
        "remaining": rp.t_u.plan().visible().to_string(),
        "results": results,
    })
    .to_string())
}

/// Enumerated solution classes and containment checks for one scenario.
#[wasm_bindgen]
pub fn solution_classes(
    name: &str,
    disturbance: &str,
    methods: &str,
    position: u32,
    seed: u32,
) -> Result<String, String> {
    let rp = scenario(name, disturbance, methods, position, seed)?;
    let r = check_theorems(&rp, oracle_budget()).map_err(|e| e.to_string())?;
    Ok(r.to_json().to_string())
}
