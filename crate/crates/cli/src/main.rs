use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use hrepair_core::bench::{self, BenchConfig, PlotKind};
use hrepair_core::disturbance::{classify, inject, RepairProblem};
use hrepair_core::hddl::{
    parse_disturbances, parse_domain, parse_problem, print_domain, print_problem, tree_to_json,
};
use hrepair_core::model::{Domain, Problem, Universe};
use hrepair_core::oracle::{check_theorems, random::micro_instance};
use hrepair_core::planner::{Limit, Planner, SearchBudget, SearchOutcome};
use hrepair_core::repair::{repair, rewrite, RepairOutcome, Strategy};

const OK: u8 = 0;
const UNREPAIRABLE: u8 = 1;
const TIMEOUT: u8 = 2;
const INPUT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hrepair",
    version,
    about = "Total-order HTN planning and plan repair"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Budget {
    /// Wall-clock limit per search.
    #[arg(long, default_value_t = 300)]
    timeout_secs: u64,
    /// Deepest decomposition explored.
    #[arg(long)]
    bound_depth: Option<usize>,
    /// Largest tree explored.
    #[arg(long)]
    bound_nodes: Option<usize>,
}

impl Budget {
    fn search(&self) -> SearchBudget {
        let d = SearchBudget::default();
        SearchBudget {
            time_limit: Some(Duration::from_secs(self.timeout_secs)),
            max_expansions: None,
            max_depth: self.bound_depth.unwrap_or(d.max_depth),
            max_nodes: self.bound_nodes.unwrap_or(d.max_nodes),
        }
    }
}

#[derive(Args, Clone)]
struct Scenario {
    domain: PathBuf,
    problem: PathBuf,
    disturbances: PathBuf,
    /// Disturbance to inject, by name; the first one in the file by default.
    #[arg(long)]
    disturbance: Option<String>,
    /// Executed actions before the disturbance, overriding the file's placement.
    #[arg(long)]
    position: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated methods allowed when planning the original tree.
    #[arg(long, value_delimiter = ',')]
    plan_methods: Option<Vec<String>>,
    /// Comma-separated methods allowed during repair.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a planning problem and print the decomposition tree.
    Plan {
        domain: PathBuf,
        problem: PathBuf,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
    },
    /// Plan, inject a disturbance, and repair with one strategy.
    Repair {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value = "sf")]
        strategy: Strategy,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        out: Format,
    },
    /// Print the rewritten domain and problem for a disturbed scenario.
    Compile {
        #[command(flatten)]
        scenario: Scenario,
        /// Write domain.hddl and problem.hddl here instead of stdout.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Enumerate the solution classes and check how they relate.
    Verify {
        #[arg(required_unless_present = "random")]
        domain: Option<PathBuf>,
        #[arg(required_unless_present = "random")]
        problem: Option<PathBuf>,
        #[arg(required_unless_present = "random")]
        disturbances: Option<PathBuf>,
        #[arg(long)]
        disturbance: Option<String>,
        #[arg(long)]
        position: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        plan_methods: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        /// Check micro-instances with seeds 0..N instead of a scenario.
        #[arg(long, conflicts_with_all = ["domain", "problem", "disturbances"])]
        random: Option<u64>,
        #[command(flatten)]
        budget: Budget,
    },
    /// Run every strategy on every manifest entry for a number of batches.
    Bench {
        manifest: PathBuf,
        #[arg(long, default_value_t = bench::DEFAULT_BATCHES)]
        batches: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Restrict to one strategy.
        #[arg(long)]
        strategy: Option<Strategy>,
        #[command(flatten)]
        budget: Budget,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
        /// Output file; stdout by default.
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Success rates and runtime statistics per problem and strategy.
    Summarize {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
    },
    /// Plot-ready columns from a bench CSV.
    Plotdata {
        csv: PathBuf,
        #[arg(long, default_value = "runtime-semilog")]
        kind: String,
    },
}

/// An error the user caused: bad paths, bad files, bad arguments.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input<T, E: Into<anyhow::Error>>(r: Result<T, E>) -> Result<T> {
    r.map_err(|e| InputError(e.into()).into())
}

fn read(path: &Path) -> Result<String> {
    input(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())))
}

fn load(domain: &Path, problem: &Path) -> Result<(Domain, Problem)> {
    let d = input(parse_domain(&read(domain)?, &domain.display().to_string()))?;
    let p = input(parse_problem(
        &read(problem)?,
        &problem.display().to_string(),
        &d,
    ))?;
    Ok((d, p))
}

fn restrict(d: &Domain, keep: &Option<Vec<String>>) -> Result<Domain> {
    let Some(keep) = keep else {
        return Ok(d.clone());
    };
    for k in keep {
        if !d.methods.iter().any(|m| &*m.name == k) {
            return input(Err(anyhow!("unknown method `{k}`")));
        }
    }
    Ok(d.restrict_methods(&keep.iter().map(String::as_str).collect::<Vec<_>>()))
}

fn limit_name(l: Limit) -> &'static str {
    match l {
        Limit::Time => "time",
        Limit::Expansions => "expansions",
        Limit::Bound => "bound",
    }
}

fn build(s: &Scenario, budget: SearchBudget) -> Result<std::result::Result<RepairProblem, u8>> {
    let (d, p) = load(&s.domain, &s.problem)?;
    let file = input(parse_disturbances(
        &read(&s.disturbances)?,
        &s.disturbances.display().to_string(),
        &d,
        Some(&p),
    ))?;
    let spec = match &s.disturbance {
        Some(n) => match file.disturbances.iter().find(|x| &*x.name == n) {
            Some(x) => x,
            None => return input(Err(anyhow!("no disturbance named `{n}`"))),
        },
        None => match file.disturbances.first() {
            Some(x) => x,
            None => {
                return input(Err(anyhow!(
                    "{} declares no disturbances",
                    s.disturbances.display()
                )))
            }
        },
    };
    let u = Arc::new(input(Universe::new(&d, &p))?);
    let plan_domain = restrict(&d, &s.plan_methods)?;
    let tree = match Planner::new(&plan_domain, &u, budget).solve(&p.init, &p.tasks)? {
        SearchOutcome::Found(t, _) => t,
        SearchOutcome::Unsolvable => {
            eprintln!("the original problem has no solution");
            return Ok(Err(UNREPAIRABLE));
        }
        SearchOutcome::LimitReached(l) => {
            eprintln!(
                "planning the original problem hit the {} limit",
                limit_name(l)
            );
            return Ok(Err(TIMEOUT));
        }
    };
    let repair_domain = Arc::new(restrict(&d, &s.methods)?);
    Ok(Ok(input(inject(
        repair_domain,
        u,
        &p.init,
        &tree,
        spec,
        s.position,
        s.seed,
    ))?))
}

fn emit_table(rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Plan {
            domain,
            problem,
            methods,
            budget,
            out,
        } => {
            let (d, p) = load(&domain, &problem)?;
            let d = restrict(&d, &methods)?;
            let u = input(Universe::new(&d, &p))?;
            match Planner::new(&d, &u, budget.search()).solve(&p.init, &p.tasks)? {
                SearchOutcome::Found(t, _) => {
                    match out {
                        Format::Json => println!("{}", tree_to_json(&t)),
                        Format::Csv => {
                            let mut rows = vec![vec!["step".to_string(), "action".to_string()]];
                            for (i, a) in t.plan().visible().actions.iter().enumerate() {
                                rows.push(vec![(i + 1).to_string(), a.to_string()]);
                            }
                            emit_table(&rows)?;
                        }
                    }
                    Ok(OK)
                }
                SearchOutcome::Unsolvable => {
                    eprintln!("no solution");
                    Ok(UNREPAIRABLE)
                }
                SearchOutcome::LimitReached(l) => {
                    eprintln!("search stopped at the {} limit", limit_name(l));
                    Ok(TIMEOUT)
                }
            }
        }
        Command::Repair {
            scenario,
            strategy,
            budget,
            out,
        } => {
            let rp = match build(&scenario, budget.search())? {
                Ok(rp) => rp,
                Err(code) => return Ok(code),
            };
            let report = classify(&rp)?;
            let start = Instant::now();
            let outcome = repair(&rp, strategy, budget.search())?;
            let ms = start.elapsed().as_secs_f64() * 1000.0;
            let d = rp.disturbance.as_ref().unwrap();
            let (name, code, extra) = match &outcome {
                RepairOutcome::Repaired(r) => (
                    "success",
                    OK,
                    json!({
                        "changed_nodes": r.changed_nodes,
                        "plan_after": r.full.plan().visible().to_string(),
                        "tree": serde_json::from_str::<serde_json::Value>(&tree_to_json(&r.full))?,
                    }),
                ),
                RepairOutcome::Unrepairable => ("proven-unrepairable", UNREPAIRABLE, json!({})),
                RepairOutcome::LimitReached(l) => {
                    ("timeout", TIMEOUT, json!({ "limit": limit_name(*l) }))
                }
            };
            let name = if report.class == 1 && code == OK {
                "no-repair-needed"
            } else {
                name
            };
            match out {
                Format::Json => {
                    let mut v = json!({
                        "class": report.class,
                        "disturbance": d.name.to_string(),
                        "outcome": name,
                        "plan_before": rp.tree.plan().visible().to_string(),
                        "position": d.position,
                        "strategy": strategy.to_string(),
                        "time_ms": format!("{ms:.2}"),
                    });
                    v.as_object_mut()
                        .unwrap()
                        .extend(extra.as_object().unwrap().clone());
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                Format::Csv => emit_table(&[
                    vec![
                        "strategy".into(),
                        "class".into(),
                        "outcome".into(),
                        "time_ms".into(),
                        "plan_after".into(),
                    ],
                    vec![
                        strategy.to_string(),
                        report.class.to_string(),
                        name.into(),
                        format!("{ms:.2}"),
                        extra["plan_after"].as_str().unwrap_or("").into(),
                    ],
                ])?,
            }
            Ok(code)
        }
        Command::Compile {
            scenario,
            out_dir,
            budget,
        } => {
            let rp = match build(&scenario, budget.search())? {
                Ok(rp) => rp,
                Err(code) => return Ok(code),
            };
            let rw = rewrite::compile(&rp)?;
            let (dt, pt) = (print_domain(&rw.domain), print_problem(&rw.problem));
            match out_dir {
                Some(dir) => {
                    input(fs::create_dir_all(&dir))?;
                    input(fs::write(dir.join("domain.hddl"), dt))?;
                    input(fs::write(dir.join("problem.hddl"), pt))?;
                }
                None => println!("{dt}\n{pt}"),
            }
            Ok(OK)
        }
        Command::Verify {
            domain,
            problem,
            disturbances,
            disturbance,
            position,
            seed,
            plan_methods,
            methods,
            random,
            budget,
        } => {
            let search = budget.search();
            let scenario = match (domain, problem, disturbances) {
                (Some(domain), Some(problem), Some(disturbances)) => Some(Scenario {
                    domain,
                    problem,
                    disturbances,
                    disturbance,
                    position,
                    seed,
                    plan_methods,
                    methods,
                }),
                _ => None,
            };
            let mut reports = Vec::new();
            match (scenario, random) {
                (_, Some(n)) => {
                    for seed in 0..n {
                        let m = micro_instance(seed);
                        let r = check_theorems(&m.rp, search)?;
                        if !r.all_hold() || !r.exhausted {
                            let mut v = r.to_json();
                            v["seed"] = json!(seed);
                            reports.push((r.all_hold(), r.exhausted, v));
                        }
                    }
                    let bad: Vec<_> = reports
                        .iter()
                        .filter(|r| !r.0)
                        .map(|r| r.2.clone())
                        .collect();
                    let open = reports.iter().filter(|r| !r.1).count();
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&json!({
                            "instances": n,
                            "not_exhausted": open,
                            "violations": bad,
                        }))?
                    );
                    Ok(if !bad.is_empty() {
                        UNREPAIRABLE
                    } else if open > 0 {
                        TIMEOUT
                    } else {
                        OK
                    })
                }
                (Some(s), None) => {
                    let rp = match build(&s, search)? {
                        Ok(rp) => rp,
                        Err(code) => return Ok(code),
                    };
                    let r = check_theorems(&rp, search)?;
                    println!("{}", serde_json::to_string_pretty(&r.to_json())?);
                    Ok(if !r.all_hold() {
                        UNREPAIRABLE
                    } else if !r.exhausted {
                        TIMEOUT
                    } else {
                        OK
                    })
                }
                (None, None) => input(Err(anyhow!(
                    "give a scenario (domain problem disturbances) or --random N"
                ))),
            }
        }
        Command::Bench {
            manifest,
            batches,
            seed,
            strategy,
            budget,
            out,
            output,
        } => {
            let (_, instances) = input(bench::load_manifest(&manifest))?;
            let config = BenchConfig {
                batches,
                seed,
                timeout: Duration::from_secs(budget.timeout_secs),
                max_depth: budget
                    .bound_depth
                    .unwrap_or(SearchBudget::default().max_depth),
                max_nodes: budget
                    .bound_nodes
                    .unwrap_or(SearchBudget::default().max_nodes),
                strategies: strategy.map_or(Strategy::ALL.to_vec(), |s| vec![s]),
            };
            let rows = bench::run_batch(&instances, &config)?;
            let mut sink: Box<dyn Write> = match &output {
                Some(p) => Box::new(input(
                    fs::File::create(p).with_context(|| format!("cannot create {}", p.display())),
                )?),
                None => Box::new(std::io::stdout()),
            };
            match out {
                Format::Csv => bench::write_csv(&rows, &mut sink)?,
                Format::Json => writeln!(sink, "{}", serde_json::to_string_pretty(&rows)?)?,
            }
            Ok(OK)
        }
        Command::Summarize { csv, out } => {
            let rows = input(bench::read_csv(input(
                fs::File::open(&csv).with_context(|| format!("cannot read {}", csv.display())),
            )?))?;
            let s = bench::summarize(&rows);
            match out {
                Format::Json => println!("{}", serde_json::to_string_pretty(&s)?),
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(std::io::stdout());
                    w.write_record([
                        "problem",
                        "strategy",
                        "runs",
                        "success",
                        "no_repair_needed",
                        "failed",
                        "proven_unrepairable",
                        "timeout",
                        "success_rate",
                        "mean_ms",
                        "stddev_ms",
                    ])?;
                    for r in &s {
                        w.serialize((
                            &r.problem,
                            &r.strategy,
                            r.runs,
                            r.success,
                            r.no_repair_needed,
                            r.failed,
                            r.proven_unrepairable,
                            r.timeout,
                            format!("{:.2}", r.success_rate),
                            format!("{:.4}", r.mean_ms),
                            format!("{:.4}", r.stddev_ms),
                        ))?;
                    }
                    w.flush()?;
                }
            }
            Ok(OK)
        }
        Command::Plotdata { csv, kind } => {
            let kind: PlotKind = input(kind.parse())?;
            let rows = input(bench::read_csv(input(
                fs::File::open(&csv).with_context(|| format!("cannot read {}", csv.display())),
            )?))?;
            emit_table(&bench::plotdata(&rows, kind))?;
            Ok(OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { INPUT } else { OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<InputError>() {
                INPUT
            } else {
                UNREPAIRABLE
            })
        }
    }
}
