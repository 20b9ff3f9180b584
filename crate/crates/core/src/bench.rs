//! Batch experiments: inject one disturbance per problem per batch, run every
//! strategy on it, and tabulate the results.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disturbance::{classify, inject, DisturbanceError, RepairProblem};
use crate::hddl::{parse_disturbances, parse_domain, parse_problem, DisturbanceFile, ParseError};
use crate::model::{DecompositionTree, Domain, ModelError, Problem, Universe};
use crate::oracle::{verify_class2, verify_class3, verify_class4};
use crate::planner::{Limit, Planner, SearchBudget, SearchOutcome};
use crate::repair::{repair, RepairOutcome, Strategy};

pub const DEFAULT_BATCHES: usize = 50;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

pub const CSV_COLUMNS: [&str; 14] = [
    "domain",
    "problem",
    "batch",
    "seed",
    "strategy",
    "disturbance",
    "position",
    "class",
    "outcome",
    "time_ms",
    "changed_nodes",
    "plan_len_before",
    "plan_len_after",
    "expansions",
];

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{entry}: {message}")]
    Entry { entry: String, message: String },
    #[error("{entry}, batch {batch}, {strategy}: repaired tree fails its class check")]
    Invalid {
        entry: String,
        batch: usize,
        strategy: Strategy,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unknown plot kind `{0}` (expected runtime-semilog, success-rate or variance)")]
    PlotKind(String),
}

/// One problem of a suite. Paths are relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub domain: PathBuf,
    pub problem: PathBuf,
    pub disturbances: PathBuf,
    /// Methods available when planning the original tree; all when absent.
    #[serde(default)]
    pub plan_methods: Option<Vec<String>>,
    /// Methods available to repair; all when absent.
    #[serde(default)]
    pub methods: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub suite: String,
    pub entries: Vec<ManifestEntry>,
}

/// A manifest entry with its files read and parsed.
#[derive(Clone, Debug)]
pub struct Instance {
    pub name: String,
    pub domain: Domain,
    pub problem: Problem,
    pub disturbances: DisturbanceFile,
    pub plan_methods: Option<Vec<String>>,
    pub methods: Option<Vec<String>>,
}

fn read(path: &Path) -> Result<String, BenchError> {
    std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<Instance>), BenchError> {
    let text = read(path)?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| BenchError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for e in &manifest.entries {
        let (dp, pp, xp) = (
            dir.join(&e.domain),
            dir.join(&e.problem),
            dir.join(&e.disturbances),
        );
        let domain = parse_domain(&read(&dp)?, &dp.display().to_string())?;
        let problem = parse_problem(&read(&pp)?, &pp.display().to_string(), &domain)?;
        let disturbances = parse_disturbances(
            &read(&xp)?,
            &xp.display().to_string(),
            &domain,
            Some(&problem),
        )?;
        out.push(Instance {
            name: e.name.clone(),
            domain,
            problem,
            disturbances,
            plan_methods: e.plan_methods.clone(),
            methods: e.methods.clone(),
        });
    }
    Ok((manifest, out))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    ProvenUnrepairable,
    Timeout,
    NoRepairNeeded,
}

impl Outcome {
    pub fn solved(self) -> bool {
        matches!(self, Outcome::Success | Outcome::NoRepairNeeded)
    }
}

fn two_decimals<S: serde::Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.2}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub domain: String,
    pub problem: String,
    pub batch: usize,
    pub seed: u64,
    pub strategy: String,
    pub disturbance: String,
    /// Executed actions before the disturbance.
    pub position: usize,
    pub class: u8,
    pub outcome: Outcome,
    /// Wall-clock milliseconds.
    #[serde(serialize_with = "two_decimals")]
    pub time_ms: f64,
    pub changed_nodes: Option<usize>,
    pub plan_len_before: usize,
    pub plan_len_after: Option<usize>,
    pub expansions: u64,
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub batches: usize,
    pub seed: u64,
    pub timeout: Duration,
    pub max_depth: usize,
    pub max_nodes: usize,
    pub strategies: Vec<Strategy>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let b = SearchBudget::default();
        BenchConfig {
            batches: DEFAULT_BATCHES,
            seed: 0,
            timeout: DEFAULT_TIMEOUT,
            max_depth: b.max_depth,
            max_nodes: b.max_nodes,
            strategies: Strategy::ALL.to_vec(),
        }
    }
}

impl BenchConfig {
    pub fn budget(&self) -> SearchBudget {
        SearchBudget {
            time_limit: Some(self.timeout),
            max_expansions: None,
            max_depth: self.max_depth,
            max_nodes: self.max_nodes,
        }
    }
}

fn names(v: &Option<Vec<String>>) -> Option<Vec<&str>> {
    v.as_ref().map(|v| v.iter().map(String::as_str).collect())
}

pub struct Prepared {
    universe: Arc<Universe>,
    repair_domain: Arc<Domain>,
    tree: DecompositionTree,
}

pub fn prepare(inst: &Instance, budget: SearchBudget) -> Result<Prepared, BenchError> {
    let err = |message: String| BenchError::Entry {
        entry: inst.name.clone(),
        message,
    };
    let universe = Arc::new(Universe::new(&inst.domain, &inst.problem)?);
    let plan_domain = match names(&inst.plan_methods) {
        Some(keep) => inst.domain.restrict_methods(&keep),
        None => inst.domain.clone(),
    };
    let repair_domain = Arc::new(match names(&inst.methods) {
        Some(keep) => inst.domain.restrict_methods(&keep),
        None => inst.domain.clone(),
    });
    let planner = Planner::new(&plan_domain, &universe, budget);
    let tree = match planner.solve(&inst.problem.init, &inst.problem.tasks) {
        Ok(SearchOutcome::Found(t, _)) => t,
        Ok(SearchOutcome::Unsolvable) => return Err(err("problem has no solution".into())),
        Ok(SearchOutcome::LimitReached(l)) => return Err(err(format!("planning stopped: {l:?}"))),
        Err(e) => return Err(err(e.to_string())),
    };
    Ok(Prepared {
        universe,
        repair_domain,
        tree,
    })
}

/// Seed for one (batch, problem) cell.
pub fn cell_seed(seed: u64, batch: usize, entry: usize) -> u64 {
    seed ^ ((batch as u64) << 32) ^ (entry as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Picks a disturbance from the file, in seeded order, and injects the first
/// one applicable somewhere along the plan.
pub fn draw_disturbance(
    inst: &Instance,
    prepared: &Prepared,
    seed: u64,
) -> Result<RepairProblem, BenchError> {
    let mut order: Vec<_> = inst.disturbances.disturbances.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for spec in order {
        match inject(
            prepared.repair_domain.clone(),
            prepared.universe.clone(),
            &inst.problem.init,
            &prepared.tree,
            spec,
            None,
            seed,
        ) {
            Ok(rp) => return Ok(rp),
            Err(DisturbanceError::Inapplicable(_)) => continue,
            Err(e) => {
                return Err(BenchError::Entry {
                    entry: inst.name.clone(),
                    message: e.to_string(),
                })
            }
        }
    }
    Err(BenchError::Entry {
        entry: inst.name.clone(),
        message: "no disturbance is applicable anywhere along the plan".into(),
    })
}

/// Checks a success against the definition of its strategy's class.
pub fn validate(
    rp: &RepairProblem,
    strategy: Strategy,
    t_u: &DecompositionTree,
    full: &DecompositionTree,
) -> Result<bool, ModelError> {
    match strategy {
        Strategy::Rw => verify_class2(rp, full),
        Strategy::Sf => verify_class3(rp, t_u),
        Strategy::Ip => verify_class4(rp, t_u),
    }
}

pub fn run_one(
    rp: &RepairProblem,
    strategy: Strategy,
    budget: SearchBudget,
) -> Result<(RepairOutcome, f64), ModelError> {
    let start = Instant::now();
    let out = repair(rp, strategy, budget)?;
    Ok((out, start.elapsed().as_secs_f64() * 1000.0))
}

/// Runs `batches × entries × strategies` repairs. Rows come back ordered by
/// batch, then entry, then strategy, whatever order the workers finish in.
pub fn run_batch(
    instances: &[Instance],
    config: &BenchConfig,
) -> Result<Vec<RunRecord>, BenchError> {
    let budget = config.budget();
    let prepared: Vec<Prepared> = instances
        .iter()
        .map(|i| prepare(i, budget))
        .collect::<Result<_, _>>()?;
    let mut cells = Vec::new();
    for batch in 0..config.batches {
        for (e, inst) in instances.iter().enumerate() {
            let seed = cell_seed(config.seed, batch, e);
            let rp = draw_disturbance(inst, &prepared[e], seed)?;
            let class = classify(&rp)?.class;
            cells.push((batch, e, seed, Arc::new(rp), class));
        }
    }
    let jobs: Vec<_> = cells
        .iter()
        .flat_map(|c| config.strategies.iter().map(move |s| (c, *s)))
        .collect();
    jobs.par_iter()
        .map(|((batch, e, seed, rp, class), strategy)| {
            let inst = &instances[*e];
            let (out, ms) = run_one(rp, *strategy, budget)?;
            let disturbance = rp.disturbance.as_ref().unwrap();
            let mut rec = RunRecord {
                domain: inst.domain.name.to_string(),
                problem: inst.name.clone(),
                batch: *batch,
                seed: *seed,
                strategy: strategy.to_string(),
                disturbance: disturbance.name.to_string(),
                position: disturbance.position,
                class: *class,
                outcome: Outcome::Timeout,
                time_ms: ms,
                changed_nodes: None,
                plan_len_before: rp.tree.plan().visible().len(),
                plan_len_after: None,
                expansions: 0,
            };
            match out {
                RepairOutcome::Repaired(r) => {
                    if !validate(rp, *strategy, &r.t_u, &r.full)? {
                        return Err(BenchError::Invalid {
                            entry: inst.name.clone(),
                            batch: *batch,
                            strategy: *strategy,
                        });
                    }
                    rec.outcome = if *class == 1 {
                        Outcome::NoRepairNeeded
                    } else {
                        Outcome::Success
                    };
                    rec.changed_nodes = Some(r.changed_nodes);
                    rec.plan_len_after = Some(r.full.plan().visible().len());
                    rec.expansions = r.expansions;
                }
                RepairOutcome::Unrepairable => rec.outcome = Outcome::ProvenUnrepairable,
                RepairOutcome::LimitReached(Limit::Time | Limit::Expansions | Limit::Bound) => {}
            }
            Ok(rec)
        })
        .collect()
}

pub fn write_csv<W: std::io::Write>(rows: &[RunRecord], w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|source| BenchError::Io {
        path: PathBuf::from("<output>"),
        source,
    })?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(r: R) -> Result<Vec<RunRecord>, BenchError> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .map(|r| r.map_err(BenchError::from))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub problem: String,
    pub strategy: String,
    pub runs: usize,
    pub success: usize,
    pub no_repair_needed: usize,
    /// Proven unrepairable plus timeouts.
    pub failed: usize,
    pub proven_unrepairable: usize,
    pub timeout: usize,
    /// Percentage of runs that succeeded or needed no repair.
    pub success_rate: f64,
    pub mean_ms: f64,
    /// Sample standard deviation; 0 for a single run.
    pub stddev_ms: f64,
}

pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per (problem, strategy) aggregates, sorted by problem then strategy.
pub fn summarize(rows: &[RunRecord]) -> Vec<Summary> {
    let mut groups: BTreeMap<(&str, &str), Vec<&RunRecord>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.problem, &r.strategy)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((problem, strategy), rs)| {
            let count = |o: Outcome| rs.iter().filter(|r| r.outcome == o).count();
            let times: Vec<f64> = rs.iter().map(|r| r.time_ms).collect();
            let (mean_ms, stddev_ms) = mean_stddev(&times);
            let (success, none) = (count(Outcome::Success), count(Outcome::NoRepairNeeded));
            let (proven, timeout) = (count(Outcome::ProvenUnrepairable), count(Outcome::Timeout));
            Summary {
                problem: problem.to_string(),
                strategy: strategy.to_string(),
                runs: rs.len(),
                success,
                no_repair_needed: none,
                failed: proven + timeout,
                proven_unrepairable: proven,
                timeout,
                success_rate: 100.0 * (success + none) as f64 / rs.len() as f64,
                mean_ms,
                stddev_ms,
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    RuntimeSemilog,
    SuccessRate,
    Variance,
}

impl std::str::FromStr for PlotKind {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "runtime-semilog" => Ok(PlotKind::RuntimeSemilog),
            "success-rate" => Ok(PlotKind::SuccessRate),
            "variance" => Ok(PlotKind::Variance),
            _ => Err(BenchError::PlotKind(s.into())),
        }
    }
}

/// Times below the 0.01 ms resolution are plotted at 0.01 ms.
pub const MIN_PLOT_MS: f64 = 0.01;

/// Plot-ready table: header row first.
pub fn plotdata(rows: &[RunRecord], kind: PlotKind) -> Vec<Vec<String>> {
    let f = |x: f64| format!("{x:.4}");
    match kind {
        PlotKind::RuntimeSemilog => {
            let mut out = vec![[
                "problem", "strategy", "batch", "solved", "time_ms", "log10_ms",
            ]
            .map(String::from)
            .to_vec()];
            for r in rows {
                out.push(vec![
                    r.problem.clone(),
                    r.strategy.clone(),
                    r.batch.to_string(),
                    r.outcome.solved().to_string(),
                    format!("{:.2}", r.time_ms),
                    f(r.time_ms.max(MIN_PLOT_MS).log10()),
                ]);
            }
            out
        }
        PlotKind::SuccessRate => {
            let mut out = vec![["problem", "strategy", "runs", "success_rate"]
                .map(String::from)
                .to_vec()];
            for s in summarize(rows) {
                out.push(vec![
                    s.problem,
                    s.strategy,
                    s.runs.to_string(),
                    f(s.success_rate),
                ]);
            }
            out
        }
        PlotKind::Variance => {
            let mut out = vec![[
                "problem",
                "strategy",
                "mean_ms",
                "stddev_ms",
                "log10_mean_ms",
            ]
            .map(String::from)
            .to_vec()];
            for s in summarize(rows) {
                out.push(vec![
                    s.problem,
                    s.strategy,
                    f(s.mean_ms),
                    f(s.stddev_ms),
                    f(s.mean_ms.max(MIN_PLOT_MS).log10()),
                ]);
            }
            out
        }
    }
}
