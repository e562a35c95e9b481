use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cwc::dsl::{parse_model, ModelFile};
use cwc::matcher::{enumerate_contexts, outcomes};
use cwc::oracle::{oracle_outcomes, Labeling, OracleLimits};
use cwc::ssa::{enumerate_transitions, run_replicates, Model, SimConfig, Trajectory};
use cwc::term::{Atom, SimpleTerm, Term};

#[derive(Parser)]
#[command(name = "cwc", version, about = "Simulate Calculus of Wrapped Compartments models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file.
    Validate { model: PathBuf },
    /// List the transitions enabled in the initial state.
    Transitions {
        model: PathBuf,
        /// Print a JSON array instead of tab-separated lines.
        #[arg(long)]
        json: bool,
    },
    /// Show instantiation counts of one rule in every context of the initial state.
    Count {
        model: PathBuf,
        rule: String,
        /// Cross-check every count against brute-force labeled enumeration.
        #[arg(long)]
        oracle: bool,
        /// Perturb the reported counts (exercises the mismatch path).
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
    /// Run stochastic simulations and write CSV trajectories.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    model: PathBuf,
    /// RNG seed; falls back to the `seed` directive, then CWC_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Output grid spacing.
    #[arg(long)]
    sample: Option<f64>,
    #[arg(long, default_value = "cwc-out")]
    out_dir: PathBuf,
    /// Replace an initial top-level multiplicity, e.g. `init-Pi=20`.
    #[arg(long = "override", value_name = "init-ATOM=N")]
    overrides: Vec<String>,
    /// Worker threads for replicates (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    max_events: Option<u64>,
    /// Also write the observables after every event.
    #[arg(long)]
    event_log: bool,
    /// Check incremental transition maintenance against full recomputation.
    #[arg(long)]
    cross_check: bool,
}

/// Exit statuses: 1 model or validation failure (and oracle mismatch), 2 I/O,
/// 3 runtime simulation error.
enum Failure {
    Model(String),
    Io(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Model(_) => 1,
            Failure::Io(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn load(path: &FsPath) -> Result<ModelFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        Failure::Model(lines.join("\n"))
    })
}

fn validate(path: &FsPath) -> Result<(), Failure> {
    let m = load(path)?;
    println!(
        "{}: ok ({} rules, {} observables)",
        path.display(),
        m.rules.len(),
        m.observables.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct TransitionRow {
    rule: String,
    path: String,
    outcome: String,
    n: u64,
    multiplicity: u64,
    rate: f64,
    successor: String,
}

fn transitions(path: &FsPath, json: bool) -> Result<(), Failure> {
    let m = load(path)?;
    let ts = enumerate_transitions(&m.init, &m.rules).map_err(|e| Failure::Runtime(e.to_string()))?;
    if json {
        let rows: Vec<TransitionRow> = ts
            .iter()
            .map(|t| TransitionRow {
                rule: t.rule_id.clone(),
                path: t.path.to_string(),
                outcome: t.outcome_local.to_string(),
                n: t.n,
                multiplicity: t.multiplicity,
                rate: t.rate,
                successor: t.apply(&m.init).map(|s| s.to_string()).unwrap_or_default(),
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&rows).expect("serializable"));
    } else {
        for t in &ts {
            println!("{}\t{}\t{}\t{}\t{}", t.rule_id, t.path, t.outcome_local, t.n, t.rate);
        }
    }
    Ok(())
}

fn count(path: &FsPath, rule_id: &str, oracle: bool, inject_fault: bool) -> Result<(), Failure> {
    let m = load(path)?;
    let rule = m
        .rule(rule_id)
        .ok_or_else(|| Failure::Model(format!("unknown-rule: no rule named `{rule_id}`")))?;
    let mut mismatches = 0;
    for ctx in enumerate_contexts(&m.init) {
        let local = m.init.resolve(&ctx.path).expect("context paths resolve");
        let rows = outcomes(rule, &m.init, &ctx.path).expect("context paths resolve");
        let reference = if oracle {
            Some(
                oracle_outcomes(rule, local, Labeling::Sequential, &OracleLimits::default())
                    .map_err(|e| Failure::Runtime(format!("oracle at {}: {e}", ctx.path)))?,
            )
        } else {
            None
        };
        for (u, n) in rows {
            let n = if inject_fault { n + 1 } else { n };
            match &reference {
                Some(r) => {
                    let expected = r.get(&u).copied().unwrap_or(0);
                    let verdict = if expected == n { "OK" } else { "MISMATCH" };
                    if expected != n {
                        mismatches += 1;
                    }
                    println!("{}\t{u}\tn={n}, oracle={expected}, {verdict}", ctx.path);
                }
                None => println!("{}\t{u}\tn={n}", ctx.path),
            }
        }
        if let Some(r) = &reference {
            // Outcomes only the oracle found.
            let found: Vec<Term> = outcomes(rule, &m.init, &ctx.path)
                .expect("context paths resolve")
                .into_iter()
                .map(|(u, _)| u)
                .collect();
            for (u, k) in r {
                if !found.contains(u) {
                    mismatches += 1;
                    println!("{}\t{u}\tn=0, oracle={k}, MISMATCH", ctx.path);
                }
            }
        }
    }
    if mismatches > 0 {
        return Err(Failure::Model(format!("{mismatches} count(s) disagree with the oracle")));
    }
    Ok(())
}

fn apply_override(init: &Term, spec: &str) -> Result<Term, Failure> {
    let bad = || Failure::Model(format!("bad override `{spec}`: expected init-ATOM=N"));
    let rest = spec.strip_prefix("init-").ok_or_else(bad)?;
    let (name, value) = rest.split_once('=').ok_or_else(bad)?;
    let atom = Atom::new(name.trim()).map_err(|_| bad())?;
    let n: usize = value.trim().parse().map_err(|_| bad())?;
    let mut elements = init.elements().clone();
    elements.set_count(SimpleTerm::Atom(atom), n);
    Ok(Term::from_multiset(elements))
}

#[derive(Serialize)]
struct ReplicateReport {
    replicate: usize,
    file: String,
    status: &'static str,
    events: u64,
    end_time: f64,
    rows: usize,
    wall_seconds: f64,
    error: Option<String>,
}

#[derive(Serialize)]
struct RunReport {
    model: String,
    seed: u64,
    t_max: f64,
    sample_dt: f64,
    max_events: Option<u64>,
    replicates: Vec<ReplicateReport>,
    aggregate: String,
    aggregate_rows: usize,
    wall_seconds: f64,
}

fn write_file(path: &FsPath, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn trajectory_csv(names: &[String], traj: &Trajectory) -> String {
    let mut out = format!("time,{}\n", names.join(","));
    for (t, row) in traj.times.iter().zip(&traj.values) {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

fn event_csv(names: &[String], traj: &Trajectory) -> String {
    let mut out = format!("time,{}\n", names.join(","));
    for (t, row) in &traj.event_log {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Mean and sample standard deviation per observable over the grid points
/// all replicates reached.
fn aggregate_csv(names: &[String], trajs: &[Trajectory]) -> (String, usize) {
    let mut header = vec!["time".to_string()];
    for n in names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_sd"));
    }
    let mut out = header.join(",");
    out.push('\n');
    let rows = trajs.iter().map(|t| t.times.len()).min().unwrap_or(0);
    let k = trajs.len() as f64;
    for i in 0..rows {
        out.push_str(&trajs[0].times[i].to_string());
        for j in 0..names.len() {
            let xs: Vec<f64> = trajs.iter().map(|t| t.values[i][j] as f64).collect();
            let mean = xs.iter().sum::<f64>() / k;
            let sd = if trajs.len() < 2 {
                f64::NAN
            } else {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
            };
            out.push_str(&format!(",{mean},{sd}"));
        }
        out.push('\n');
    }
    (out, rows)
}

fn env_seed() -> Result<u64, Failure> {
    match std::env::var("CWC_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Model(format!("CWC_SEED is not an unsigned integer: `{v}`"))),
        Err(_) => Ok(0),
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let started = Instant::now();
    let file = load(&args.model)?;
    let mut model = Model::from(&file);
    for o in &args.overrides {
        model.init = apply_override(&model.init, o)?;
    }
    let d = &file.directives;
    let max_events = args.max_events.or(d.max_events);
    let t_max = match args.tmax.or(d.tmax) {
        Some(t) => t,
        None if max_events.is_some() => f64::INFINITY,
        None => {
            return Err(Failure::Model(
                "no time horizon: set `tmax` in the model or pass --tmax".into(),
            ))
        }
    };
    let cfg = SimConfig {
        t_max,
        max_events,
        seed: match args.seed.or(d.seed) {
            Some(s) => s,
            None => env_seed()?,
        },
        sample_dt: args.sample.or(d.sample).unwrap_or(1.0),
        replicates: args.replicates.or(d.replicates).unwrap_or(1),
        cross_check: args.cross_check,
        event_log: args.event_log,
        ..SimConfig::default()
    };
    cfg.validate().map_err(|e| Failure::Model(e.to_string()))?;

    let trajs = run_replicates(&model, &cfg, args.jobs).map_err(|e| Failure::Runtime(e.to_string()))?;

    fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", args.out_dir.display())))?;
    let names: Vec<String> = model.observables.iter().map(|o| o.name.clone()).collect();
    let mut reports = Vec::new();
    let mut errors = Vec::new();
    let mut discrepancies = 0;
    for (i, traj) in trajs.iter().enumerate() {
        let file_name = format!("replicate_{i:03}.csv");
        write_file(&args.out_dir.join(&file_name), &trajectory_csv(&names, traj))?;
        if cfg.event_log {
            write_file(&args.out_dir.join(format!("events_{i:03}.csv")), &event_csv(&names, traj))?;
        }
        if let Some(e) = &traj.error {
            errors.push(format!("replicate {i}: {e}"));
        }
        discrepancies += traj.discrepancies;
        reports.push(ReplicateReport {
            replicate: i,
            file: file_name,
            status: traj.status.as_str(),
            events: traj.events,
            end_time: traj.end_time,
            rows: traj.times.len(),
            wall_seconds: traj.elapsed.as_secs_f64(),
            error: traj.error.as_ref().map(|e| e.to_string()),
        });
    }
    let (aggregate, aggregate_rows) = aggregate_csv(&names, &trajs);
    write_file(&args.out_dir.join("aggregate.csv"), &aggregate)?;
    let report = RunReport {
        model: args.model.display().to_string(),
        seed: cfg.seed,
        t_max: cfg.t_max,
        sample_dt: cfg.sample_dt,
        max_events: cfg.max_events,
        replicates: reports,
        aggregate: "aggregate.csv".into(),
        aggregate_rows,
        wall_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    write_file(&args.out_dir.join("run_report.json"), &(json + "\n"))?;

    for r in &report.replicates {
        println!(
            "replicate {}: {} after {} events at t={}",
            r.replicate, r.status, r.events, r.end_time
        );
    }
    if cfg.cross_check {
        println!("cross-check discrepancies: {discrepancies}");
    }
    println!("wrote {} replicate(s) to {}", trajs.len(), args.out_dir.display());
    if !errors.is_empty() {
        return Err(Failure::Runtime(errors.join("\n")));
    }
    if discrepancies > 0 {
        return Err(Failure::Runtime(format!("{discrepancies} cross-check discrepancies")));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            return if usage_error { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Validate { model } => validate(model),
        Command::Transitions { model, json } => transitions(model, *json),
        Command::Count {
            model,
            rule,
            oracle,
            inject_fault,
        } => count(model, rule, *oracle, *inject_fault),
        Command::Run(args) => run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Model(m) | Failure::Io(m) | Failure::Runtime(m) => eprintln!("{m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
