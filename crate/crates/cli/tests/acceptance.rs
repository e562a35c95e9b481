//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use cwc::dsl::parse_model;
use cwc::matcher::{enumerate_contexts, outcomes};
use cwc::oracle::{oracle_outcomes, Labeling, OracleLimits};
use cwc::ssa::{enumerate_transitions, rng_for, run, run_replicates, step, Model, SimConfig, TerminalStatus};
use cwc::term::{SimpleTerm, Term};
use cwc::testkit::{atom_count, random_rule, random_term, random_term_with_copies, shuffled_text, TermShape};
use cwc::{parse_rule, parse_term};

type Outcome = Result<String, String>;
type TransitionKey = (String, String, String, u64, u64);
/// Tape symbols and the state atom with its cell position.
type Tape = (Vec<Sym>, Option<(String, usize)>);
type Criterion = (&'static str, fn() -> Outcome);

fn models_dir() -> PathBuf {
    FsPath::new(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed <= limit {
        Ok(format!("{detail}; {elapsed:.2?} (limit {limit:?})"))
    } else {
        Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn counting() -> Outcome {
    let k = 1.5;
    let m = parse_model(&format!("init a a a b\nrule: a a $X -> a c $X @ {k}")).map_err(|e| format!("{e:?}"))?;
    let start = Instant::now();
    let ts = enumerate_transitions(&m.init, &m.rules).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = parse_term("a a b c").unwrap();
    match ts.as_slice() {
        [t] if t.n == 3 && t.rate == 3.0 * k && t.outcome_local == expected => {
            within(elapsed, Duration::from_millis(1), format!("n=3, rate={} = 3k", t.rate))
        }
        _ => Err(format!("got {} transitions: {ts:?}", ts.len())),
    }
}

fn membrane_join() -> Outcome {
    let k = 0.7;
    let src = format!("init a (b b | c) (b | c)\nrule: a (b ~x | $X) $Z -> (a b ~x | $X) $Z @ {k}");
    let m = parse_model(&src).map_err(|e| format!("{e:?}"))?;
    let start = Instant::now();
    let ts = enumerate_transitions(&m.init, &m.rules).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let mut got: Vec<(Term, f64)> = ts
        .iter()
        .map(|t| (t.apply(&m.init).unwrap(), t.rate / k))
        .collect();
    got.sort_by(|a, b| a.0.cmp(&b.0));
    let mut want = vec![
        (parse_term("(a b b | c) (b | c)").unwrap(), 2.0),
        (parse_term("(b b | c) (a b | c)").unwrap(), 1.0),
    ];
    want.sort_by(|a, b| a.0.cmp(&b.0));
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y;
    if got.len() == 2 && got.iter().zip(&want).all(|(g, w)| g.0 == w.0 && close(g.1, w.1)) {
        within(elapsed, Duration::from_millis(1), "rates 2k and 1k to the two joined states".into())
    } else {
        Err(format!("got {got:?}"))
    }
}

/// Rules that reliably match compartments, mixed in with random ones.
const COMPARTMENT_RULES: [&str; 5] = [
    "a $X -> b $X @ 1",
    "a a $X -> c $X @ 0.5",
    "(a ~x | $X) $Z -> (~x | a $X) $Z @ 2",
    "a (b ~x | $X) $Z -> (a b ~x | $X) $Z @ 1",
    "(~x | b $X) (~y | $Y) $Z -> (~x ~y | $X $Y) $Z @ 0.3",
];

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let fixed: Vec<cwc::Rule> = COMPARTMENT_RULES.iter().map(|r| parse_rule(r).unwrap()).collect();
    let limits = OracleLimits::default();
    let mut rng = rng_for(500, 0);
    let mut instances = 0;
    let mut comparisons = 0;
    let mut nonzero = 0;
    while instances < 600 {
        let rule = if instances % 3 == 0 {
            fixed[rng.random_range(0..fixed.len())].clone()
        } else {
            random_rule(&mut rng)
        };
        let state = if instances % 2 == 0 {
            random_term(&mut rng, TermShape::SMALL)
        } else {
            random_term_with_copies(&mut rng, TermShape::SMALL)
        };
        if atom_count(&state) > 12 || state.depth() > 3 {
            continue;
        }
        for ctx in enumerate_contexts(&state) {
            let local = state.resolve(&ctx.path).unwrap();
            let fast = outcomes(&rule, &state, &ctx.path).unwrap();
            let slow: Vec<(Term, u64)> = oracle_outcomes(&rule, local, Labeling::Shuffled(instances), &limits)
                .map_err(|e| format!("oracle failed on {local}: {e}"))?
                .into_iter()
                .collect();
            if fast != slow {
                return Err(format!("rule {rule} at {} of {state}: {fast:?} vs oracle {slow:?}", ctx.path));
            }
            comparisons += 1;
            nonzero += usize::from(!fast.is_empty());
        }
        instances += 1;
    }
    within(
        start.elapsed(),
        Duration::from_secs(60),
        format!("{instances} instances, {comparisons} contexts ({nonzero} with matches) agree"),
    )
}

fn transition_key(state: &Term, rules: &[cwc::Rule]) -> Result<Vec<TransitionKey>, String> {
    let mut v: Vec<_> = enumerate_transitions(state, rules)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|t| (t.rule_id, t.path.to_string(), t.outcome_local.to_string(), t.n, t.rate.to_bits()))
        .collect();
    v.sort();
    Ok(v)
}

fn congruence_closure() -> Outcome {
    let mut rng = rng_for(4, 0);
    let mut rules: Vec<cwc::Rule> = COMPARTMENT_RULES.iter().map(|r| parse_rule(r).unwrap()).collect();
    for _ in 0..5 {
        rules.push(random_rule(&mut rng));
    }
    let mut nonempty = 0;
    for i in 0..200 {
        let state = if i % 2 == 0 {
            random_term(&mut rng, TermShape::SMALL)
        } else {
            random_term_with_copies(&mut rng, TermShape::SMALL)
        };
        let text = shuffled_text(&mut rng, &state);
        let reshuffled = parse_term(&text).map_err(|e| format!("{text}: {e:?}"))?;
        let a = transition_key(&state, &rules)?;
        let b = transition_key(&reshuffled, &rules)?;
        if a != b {
            return Err(format!("{state} vs {text}: transition sets differ"));
        }
        nonempty += usize::from(!a.is_empty());
    }
    Ok(format!("200 states and reshufflings agree ({nonempty} with transitions)"))
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Sym {
    I,
    B,
}

/// Runs the successor machine directly on a vector tape.
fn direct_tm(input: &[Sym]) -> Vec<Sym> {
    let mut tape = input.to_vec();
    let (mut state, mut head) = (0, 0);
    while state != 2 {
        let (write, next) = match (state, tape[head]) {
            (0, Sym::I) => (Sym::I, 0),
            (0, Sym::B) => (Sym::I, 1),
            (1, Sym::B) => (Sym::B, 2),
            (s, c) => panic!("machine stuck in q{s} on {c:?}"),
        };
        tape[head] = write;
        state = next;
        head += 1;
        if head == tape.len() {
            tape.push(Sym::B);
        }
    }
    tape
}

/// Reads the cells between `l` and `r` plus the state atom's position.
fn erased_tape(t: &Term) -> Result<Tape, String> {
    let only_comp = |t: &Term| -> Option<cwc::term::Compartment> {
        let comps: Vec<_> = t.compartments().collect();
        match comps.as_slice() {
            [(c, 1)] => Some((*c).clone()),
            _ => None,
        }
    };
    let state_atom = |t: &Term| {
        t.elements().iter().find_map(|(s, _)| match s {
            SimpleTerm::Atom(a) => Some(a.name().to_string()),
            _ => None,
        })
    };
    let mut cell = only_comp(t).ok_or("no left end")?;
    if cell.wrap.iter().map(|(a, _)| a.name()).collect::<Vec<_>>() != ["l"] {
        return Err(format!("left end has wrap {:?}", cell.wrap));
    }
    let mut tape = Vec::new();
    let mut head = None;
    loop {
        if let Some(q) = state_atom(&cell.content) {
            head = Some((q, tape.len()));
        }
        let next = only_comp(&cell.content).ok_or_else(|| format!("broken tape at cell {}", tape.len()))?;
        let sym: Vec<&str> = next.wrap.iter().map(|(a, _)| a.name()).collect();
        match sym.as_slice() {
            ["r"] => return Ok((tape, head)),
            ["I"] => tape.push(Sym::I),
            ["B"] => tape.push(Sym::B),
            other => return Err(format!("unexpected cell wrap {other:?}")),
        }
        cell = next;
    }
}

fn turing_machine() -> Outcome {
    let src = fs::read_to_string(models_dir().join("turing_successor.cwc")).map_err(|e| e.to_string())?;
    let file = parse_model(&src).map_err(|e| format!("{e:?}"))?;
    if file.rules.iter().any(|r| matches!(r.rate, cwc::rates::RateSpec::MassAction(k) if k != 1.0)) {
        return Err("rates are not uniform".into());
    }
    let model = Model::from(&file);
    let (input, _) = erased_tape(&model.init)?;
    let expected = direct_tm(&input);
    for seed in 0..50 {
        let cfg = SimConfig {
            t_max: f64::INFINITY,
            max_events: Some(10_000),
            seed,
            ..SimConfig::default()
        };
        let traj = run(&model, &cfg, 0);
        if traj.status != TerminalStatus::Deadlock {
            return Err(format!("seed {seed}: ended with {}", traj.status.as_str()));
        }
        let (tape, head) = erased_tape(&traj.final_state)?;
        if tape != expected || head.as_ref().map(|h| h.0.as_str()) != Some("qh") {
            return Err(format!("seed {seed}: tape {tape:?} head {head:?}, expected {expected:?} halted"));
        }
    }
    Ok(format!("50 seeds halt in qh with tape {expected:?} (input {input:?})"))
}

fn pure_death() -> Outcome {
    let start = Instant::now();
    let src = fs::read_to_string(models_dir().join("pure_death.cwc")).map_err(|e| e.to_string())?;
    let file = parse_model(&src).map_err(|e| format!("{e:?}"))?;
    let model = Model::from(&file);
    let cfg = SimConfig {
        t_max: 4.0,
        sample_dt: 0.5,
        seed: 12,
        replicates: 200,
        ..SimConfig::default()
    };
    let trajs = run_replicates(&model, &cfg, None).map_err(|e| e.to_string())?;
    let k = 0.5;
    let mut parts = Vec::new();
    let mut ok = true;
    for (row, t) in [(4, 2.0), (8, 4.0)] {
        let mean = trajs.iter().map(|tr| tr.values[row][0] as f64).sum::<f64>() / trajs.len() as f64;
        let exact = 100.0 * f64::exp(-k * t);
        let rel = (mean - exact).abs() / exact;
        ok &= rel <= 0.05 && trajs[0].times[row] == t;
        parts.push(format!("t={t}: mean {mean:.2} vs {exact:.2} ({:.1}%)", rel * 100.0));
    }
    let detail = parts.join(", ");
    if ok {
        within(start.elapsed(), Duration::from_secs(10), detail)
    } else {
        Err(detail)
    }
}

fn selection_frequency() -> Outcome {
    let start = Instant::now();
    let m = parse_model("init a b\nrule fast: a $X -> $X @ 2\nrule slow: b $X -> $X @ 1").map_err(|e| format!("{e:?}"))?;
    let ts = enumerate_transitions(&m.init, &m.rules).map_err(|e| e.to_string())?;
    let mut rng = rng_for(77, 0);
    let draws = 10_000;
    let mut fast = 0u32;
    for _ in 0..draws {
        let (_, idx, _) = step(&m.init, &ts, &mut rng).unwrap().expect("enabled");
        fast += u32::from(ts[idx].rule_id == "fast");
    }
    let p = 2.0 / 3.0;
    let expected = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let dev = (fast as f64 - expected).abs();
    let detail = format!("fast chosen {fast}/{draws}, expected {expected:.0} +- {:.0} (3 sigma)", 3.0 * sigma);
    if dev <= 3.0 * sigma {
        within(start.elapsed(), Duration::from_secs(5), detail)
    } else {
        Err(detail)
    }
}

fn cwc(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cwc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("cwc {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

/// Mean PhoProt over the second half of each replicate's horizon.
fn pho_means(pi: u32, dir: &FsPath) -> Result<Vec<f64>, String> {
    let model = models_dir().join("pho.cwc");
    let out = dir.join(format!("pi{pi}"));
    cwc(&[
        "run",
        model.to_str().unwrap(),
        "--replicates",
        "30",
        "--seed",
        &(1000 + pi).to_string(),
        "--override",
        &format!("init-Pi={pi}"),
        "--out-dir",
        out.to_str().unwrap(),
    ])?;
    let mut means = Vec::new();
    for r in 0..30 {
        let text = fs::read_to_string(out.join(format!("replicate_{r:03}.csv"))).map_err(|e| e.to_string())?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let col = header.iter().position(|h| *h == "PhoProt").ok_or("no PhoProt column")?;
        let rows: Vec<Vec<f64>> = lines
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        let horizon = rows.last().unwrap()[0];
        let half: Vec<f64> = rows.iter().filter(|r| r[0] >= horizon / 2.0).map(|r| r[col]).collect();
        means.push(half.iter().sum::<f64>() / half.len() as f64);
    }
    Ok(means)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn pho_regulation() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let low = pho_means(5, dir.path())?;
    let high = pho_means(20, dir.path())?;
    let (m1, v1) = mean_var(&low);
    let (m2, v2) = mean_var(&high);
    let (n1, n2) = (low.len() as f64, high.len() as f64);
    let se2 = v1 / n1 + v2 / n2;
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / ((v1 / n1).powi(2) / (n1 - 1.0) + (v2 / n2).powi(2) / (n2 - 1.0));
    let p = 1.0 - StudentsT::new(0.0, 1.0, df).map_err(|e| e.to_string())?.cdf(t);
    let detail = format!("PhoProt {m1:.2} (Pi=5) vs {m2:.2} (Pi=20), Welch t={t:.2}, df={df:.1}, one-sided p={p:.2e}");
    if p < 0.05 {
        within(start.elapsed(), Duration::from_secs(120), detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = models_dir().join("nested.cwc");
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        cwc(&["run", model.to_str().unwrap(), "--seed", "31", "--replicates", "3", "--out-dir", out.to_str().unwrap()])?;
        let mut bytes = Vec::new();
        for r in 0..3 {
            bytes.push(fs::read(out.join(format!("replicate_{r:03}.csv"))).map_err(|e| e.to_string())?);
        }
        bytes.push(fs::read(out.join("aggregate.csv")).map_err(|e| e.to_string())?);
        files.push(bytes);
    }
    if files[0] == files[1] {
        let size: usize = files[0].iter().map(Vec::len).sum();
        Ok(format!("two invocations wrote identical CSVs ({size} bytes)"))
    } else {
        Err("CSV output differs between invocations".into())
    }
}

fn cross_check() -> Outcome {
    let src = fs::read_to_string(models_dir().join("nested.cwc")).map_err(|e| e.to_string())?;
    let model = Model::from(&parse_model(&src).map_err(|e| format!("{e:?}"))?);
    // Top level plus two nested compartment levels.
    if model.init.depth() < 2 {
        return Err(format!("only {} levels", model.init.depth() + 1));
    }
    let cfg = SimConfig {
        t_max: f64::INFINITY,
        max_events: Some(1000),
        seed: 8,
        cross_check: true,
        ..SimConfig::default()
    };
    let traj = run(&model, &cfg, 0);
    if traj.events == 1000 && traj.discrepancies == 0 {
        Ok("1000 steps, 0 discrepancies".into())
    } else {
        Err(format!("{} steps, {} discrepancies, status {}", traj.events, traj.discrepancies, traj.status.as_str()))
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("counting example", counting),
        ("membrane joining example", membrane_join),
        ("oracle equivalence", oracle_equivalence),
        ("congruence closure", congruence_closure),
        ("turing machine successor", turing_machine),
        ("pure death mean", pure_death),
        ("selection frequency", selection_frequency),
        ("pho regulation", pho_regulation),
        ("determinism", determinism),
        ("incremental vs full", cross_check),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
