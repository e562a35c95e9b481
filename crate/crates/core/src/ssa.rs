//! Transition sets and Gillespie's direct method.
//!
//! Each event consumes exactly two uniform draws from a ChaCha8 stream: the
//! first for the waiting time, the second to pick a transition by scanning
//! the canonically ordered transition list. Replicate `i` of seed `s` uses
//! stream `i` of the generator seeded with `s`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dsl::{ModelFile, Observable};
use crate::matcher::{enumerate_contexts, outcomes_local};
use crate::pattern::Rule;
use crate::rates::{rate_of, CompensatedSum, RateError};
use crate::term::{Compartment, Path, PathStep, SimpleTerm, Term, TermError};

/// One enabled rewrite: applying it replaces the content at `path` by
/// `outcome_local`. `n` is the labeled instantiation count in one copy of the
/// context and `multiplicity` the number of congruent copies of that
/// context; `rate` covers all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub rule_id: String,
    pub rule_index: usize,
    pub path: Path,
    pub outcome_local: Term,
    pub n: u64,
    pub multiplicity: u64,
    pub rate: f64,
}

impl Transition {
    pub fn apply(&self, state: &Term) -> Result<Term, TermError> {
        state.replace_at(&self.path, self.outcome_local.clone())
    }

    /// Field-by-field equality with bitwise rate comparison.
    pub fn same_as(&self, other: &Transition) -> bool {
        self.rule_index == other.rule_index
            && self.path == other.path
            && self.outcome_local == other.outcome_local
            && self.n == other.n
            && self.multiplicity == other.multiplicity
            && self.rate.to_bits() == other.rate.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("rule {rule} at {path}: {source}")]
    Rate {
        rule: String,
        path: Path,
        source: RateError,
    },
    #[error("rule {rule} at {path}: resource limit exceeded: {what}")]
    ResourceLimit { rule: String, path: Path, what: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// The simulated model: initial state, rules and what to record.
#[derive(Debug, Clone)]
pub struct Model {
    pub init: Term,
    pub rules: Vec<Rule>,
    pub observables: Vec<Observable>,
}

impl From<&ModelFile> for Model {
    fn from(m: &ModelFile) -> Self {
        Model {
            init: m.init.clone(),
            rules: m.rules.clone(),
            observables: m.observables.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_term_size: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_term_size: 1_000_000,
            max_depth: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Time horizon; may be infinite when `max_events` is set.
    pub t_max: f64,
    pub max_events: Option<u64>,
    pub seed: u64,
    pub sample_dt: f64,
    pub replicates: usize,
    pub limits: Limits,
    /// Compare the incremental transition set with a full recomputation
    /// after every event.
    pub cross_check: bool,
    /// Also record the observables after every event.
    pub event_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_max: 100.0,
            max_events: None,
            seed: 0,
            sample_dt: 1.0,
            replicates: 1,
            limits: Limits::default(),
            cross_check: false,
            event_log: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            return Err(SimError::Config("sample interval must be positive and finite".into()));
        }
        if self.t_max.is_nan() || self.t_max <= 0.0 {
            return Err(SimError::Config("time horizon must be positive".into()));
        }
        if self.t_max.is_infinite() && self.max_events.is_none() {
            return Err(SimError::Config("an infinite horizon needs an event cap".into()));
        }
        if self.replicates == 0 {
            return Err(SimError::Config("at least one replicate is required".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalStatus {
    HorizonReached,
    Deadlock,
    EventCap,
    Error,
}

impl TerminalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminalStatus::HorizonReached => "horizon-reached",
            TerminalStatus::Deadlock => "deadlock",
            TerminalStatus::EventCap => "event-cap",
            TerminalStatus::Error => "error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// Grid times `k * sample_dt`, starting at zero.
    pub times: Vec<f64>,
    /// One row per grid time, aligned with the model's observables.
    pub values: Vec<Vec<u64>>,
    pub status: TerminalStatus,
    pub error: Option<SimError>,
    pub events: u64,
    /// Time of the last event (or zero).
    pub end_time: f64,
    pub final_state: Term,
    /// (time, observables) after every event, when enabled.
    pub event_log: Vec<(f64, Vec<u64>)>,
    /// Steps where the incremental and full transition sets differed.
    pub discrepancies: u64,
    /// Wall-clock time spent on this replicate.
    pub elapsed: std::time::Duration,
}

#[derive(Debug, Clone)]
struct Local {
    rule: usize,
    outcome: Term,
    n: u64,
    /// Rate of one copy of the context.
    rate: f64,
}

fn local_transitions(rules: &[Rule], content: &Term, path: &dyn Fn() -> Path) -> Result<Vec<Local>, SimError> {
    let mut out = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        for (outcome, n) in outcomes_local(rule, content) {
            let rate = rate_of(&rule.rate, content, &outcome, n).map_err(|source| SimError::Rate {
                rule: rule.id.clone(),
                path: path(),
                source,
            })?;
            if rate > 0.0 {
                out.push(Local {
                    rule: i,
                    outcome,
                    n,
                    rate,
                });
            }
        }
    }
    Ok(out)
}

fn scaled(mult: u64, rate: f64) -> f64 {
    mult as f64 * rate
}

/// Every transition of `state`, in canonical order: contexts top level first
/// and then depth-first by compartment position; within a context by rule
/// order, then by outcome.
pub fn enumerate_transitions(state: &Term, rules: &[Rule]) -> Result<Vec<Transition>, SimError> {
    let mut out = Vec::new();
    for ctx in enumerate_contexts(state) {
        let content = state.resolve(&ctx.path).expect("context paths resolve");
        for l in local_transitions(rules, content, &|| ctx.path.clone())? {
            out.push(Transition {
                rule_id: rules[l.rule].id.clone(),
                rule_index: l.rule,
                path: ctx.path.clone(),
                outcome_local: l.outcome,
                n: l.n,
                multiplicity: ctx.multiplicity,
                rate: scaled(ctx.multiplicity, l.rate),
            });
        }
    }
    Ok(out)
}

/// Total propensity, summed in list order.
pub fn total_propensity(transitions: &[Transition]) -> f64 {
    transitions.iter().map(|t| t.rate).collect::<CompensatedSum>().value()
}

/// Draws the waiting time and the selection target for total propensity
/// `a0`, in that order.
fn draw<R: Rng>(rng: &mut R, a0: f64) -> (f64, f64) {
    let u1 = 1.0 - rng.random::<f64>();
    let dt = -u1.ln() / a0;
    let target = rng.random::<f64>() * a0;
    (dt, target)
}

/// One direct-method step on an explicit transition list. Returns the
/// waiting time, the index of the chosen transition and the successor, or
/// `None` on deadlock.
pub fn step<R: Rng>(
    state: &Term,
    transitions: &[Transition],
    rng: &mut R,
) -> Result<Option<(f64, usize, Term)>, TermError> {
    let a0 = total_propensity(transitions);
    if transitions.is_empty() || a0 <= 0.0 {
        return Ok(None);
    }
    let (dt, target) = draw(rng, a0);
    let mut acc = CompensatedSum::new();
    let mut chosen = transitions.len() - 1;
    for (i, t) in transitions.iter().enumerate() {
        acc.add(t.rate);
        if acc.value() > target {
            chosen = i;
            break;
        }
    }
    let next = transitions[chosen].apply(state)?;
    Ok(Some((dt, chosen, next)))
}

#[derive(Debug, Clone, Default)]
struct Node {
    local: Vec<Local>,
    /// (element position, element multiplicity, node) per distinct
    /// compartment of this level, in canonical order.
    children: Vec<(usize, u64, Node)>,
}

fn build(
    content: &Term,
    rules: &[Rule],
    path: &Path,
    pool: &mut BTreeMap<Compartment, Node>,
) -> Result<Node, SimError> {
    let local = local_transitions(rules, content, &|| path.clone())?;
    let mut children = Vec::new();
    for (i, c, m) in content.compartment_indices() {
        let node = match pool.remove(c) {
            Some(n) => n,
            None => build(&c.content, rules, &path.child(i), &mut BTreeMap::new())?,
        };
        children.push((i, m as u64, node));
    }
    Ok(Node { local, children })
}

/// Compartment elements of `content` paired with their nodes.
fn into_pool(content: &Term, node: Node) -> BTreeMap<Compartment, Node> {
    content
        .compartment_indices()
        .zip(node.children)
        .map(|((_, c, _), (_, _, n))| (c.clone(), n))
        .collect()
}

/// Returns the rebuilt node and the new content of this level.
fn update(
    node: Node,
    content: &Term,
    steps: &[PathStep],
    outcome: &Term,
    rules: &[Rule],
    path: &Path,
) -> Result<(Node, Term), SimError> {
    let Some((first, rest)) = steps.split_first() else {
        let mut pool = into_pool(content, node);
        return Ok((build(outcome, rules, path, &mut pool)?, outcome.clone()));
    };
    let (old_c, old_m) = match content.elements().entries().get(first.index) {
        Some((SimpleTerm::Compartment(c), m)) => (c.clone(), *m),
        _ => unreachable!("transition paths address compartments"),
    };
    let mut pool = into_pool(content, node);
    let child = if old_m > 1 {
        pool.get(&old_c).cloned().expect("child node present")
    } else {
        pool.remove(&old_c).expect("child node present")
    };
    let child_path = path.child(first.index);
    let (new_child, new_inner) = update(child, &old_c.content, rest, outcome, rules, &child_path)?;
    let new_c = Compartment::new(old_c.wrap.clone(), new_inner);

    let mut elements = content.elements().clone();
    elements.remove_one(&SimpleTerm::Compartment(old_c));
    elements.insert(SimpleTerm::Compartment(new_c.clone()));
    let new_content = Term::from_multiset(elements);

    pool.entry(new_c).or_insert(new_child);
    let rebuilt = build(&new_content, rules, path, &mut pool)?;
    Ok((rebuilt, new_content))
}

/// Transitions of a state kept per context, so that an event only recomputes
/// the levels on the rewritten path.
#[derive(Debug, Clone)]
pub struct TransitionIndex {
    state: Term,
    root: Node,
}

impl TransitionIndex {
    pub fn new(state: Term, rules: &[Rule]) -> Result<TransitionIndex, SimError> {
        let root = build(&state, rules, &Path::root(), &mut BTreeMap::new())?;
        Ok(TransitionIndex { state, root })
    }

    pub fn state(&self) -> &Term {
        &self.state
    }

    /// Calls `f` on every transition in canonical order until it returns
    /// `true`.
    fn visit<'a>(&'a self, f: &mut dyn FnMut(&[PathStep], u64, &'a Local) -> bool) {
        fn go<'a>(
            node: &'a Node,
            stack: &mut Vec<PathStep>,
            mult: u64,
            f: &mut dyn FnMut(&[PathStep], u64, &'a Local) -> bool,
        ) -> bool {
            for l in &node.local {
                if f(stack, mult, l) {
                    return true;
                }
            }
            for (i, m, child) in &node.children {
                stack.push(PathStep { index: *i, copy: 0 });
                let stop = go(child, stack, mult.saturating_mul(*m), f);
                stack.pop();
                if stop {
                    return true;
                }
            }
            false
        }
        go(&self.root, &mut Vec::new(), 1, f);
    }

    fn materialize(&self, rules: &[Rule], steps: &[PathStep], mult: u64, l: &Local) -> Transition {
        Transition {
            rule_id: rules[l.rule].id.clone(),
            rule_index: l.rule,
            path: Path(steps.to_vec()),
            outcome_local: l.outcome.clone(),
            n: l.n,
            multiplicity: mult,
            rate: scaled(mult, l.rate),
        }
    }

    pub fn transitions(&self, rules: &[Rule]) -> Vec<Transition> {
        let mut out = Vec::new();
        self.visit(&mut |steps, mult, l| {
            out.push(self.materialize(rules, steps, mult, l));
            false
        });
        out
    }

    pub fn total_propensity(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        self.visit(&mut |_, mult, l| {
            acc.add(scaled(mult, l.rate));
            false
        });
        acc.value()
    }

    /// The first transition whose cumulative rate exceeds `target` (the last
    /// one if rounding leaves none).
    pub fn select(&self, rules: &[Rule], target: f64) -> Option<Transition> {
        let mut acc = CompensatedSum::new();
        let mut last = None;
        let mut found = None;
        self.visit(&mut |steps, mult, l| {
            acc.add(scaled(mult, l.rate));
            if acc.value() > target {
                found = Some(self.materialize(rules, steps, mult, l));
                return true;
            }
            last = Some((steps.to_vec(), mult, l));
            false
        });
        found.or_else(|| last.map(|(steps, mult, l)| self.materialize(rules, &steps, mult, l)))
    }

    /// Applies a rewrite and refreshes the transitions of every level on its
    /// path; untouched compartments keep their transitions.
    pub fn apply(&mut self, rules: &[Rule], path: &Path, outcome: &Term) -> Result<(), SimError> {
        let root = std::mem::take(&mut self.root);
        let (root, state) = update(root, &self.state, path.steps(), outcome, rules, &Path::root())?;
        self.root = root;
        self.state = state;
        Ok(())
    }
}

pub fn rng_for(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

fn measure(observables: &[Observable], state: &Term) -> Vec<u64> {
    observables.iter().map(|o| o.measure(state) as u64).collect()
}

struct Recorder<'a> {
    observables: &'a [Observable],
    sample_dt: f64,
    /// Index of the last grid point, when the horizon is finite.
    last_point: Option<u64>,
    next: u64,
    times: Vec<f64>,
    values: Vec<Vec<u64>>,
}

impl Recorder<'_> {
    fn grid_time(&self, k: u64) -> f64 {
        k as f64 * self.sample_dt
    }

    fn in_range(&self, k: u64) -> bool {
        self.last_point.is_none_or(|last| k <= last)
    }

    /// Records `state` on every grid point strictly before `t`.
    fn hold_before(&mut self, t: f64, state: &Term) {
        let row = measure(self.observables, state);
        while self.in_range(self.next) && self.grid_time(self.next) < t {
            self.times.push(self.grid_time(self.next));
            self.values.push(row.clone());
            self.next += 1;
        }
    }

    /// Records `state` on every grid point up to and including `t`.
    fn hold_through(&mut self, t: f64, state: &Term) {
        let row = measure(self.observables, state);
        while self.in_range(self.next) && self.grid_time(self.next) <= t {
            self.times.push(self.grid_time(self.next));
            self.values.push(row.clone());
            self.next += 1;
        }
    }

    fn hold_to_end(&mut self, state: &Term) {
        if self.last_point.is_some() {
            self.hold_through(f64::INFINITY, state);
        }
    }
}

fn check_limits(limits: &Limits, state: &Term, t: &Transition) -> Result<(), SimError> {
    let size = state.size();
    if size > limits.max_term_size {
        return Err(SimError::ResourceLimit {
            rule: t.rule_id.clone(),
            path: t.path.clone(),
            what: format!("term size {size} exceeds {}", limits.max_term_size),
        });
    }
    let depth = state.depth();
    if depth > limits.max_depth {
        return Err(SimError::ResourceLimit {
            rule: t.rule_id.clone(),
            path: t.path.clone(),
            what: format!("nesting depth {depth} exceeds {}", limits.max_depth),
        });
    }
    Ok(())
}

fn same_transitions(a: &[Transition], b: &[Transition]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_as(y))
}

/// Runs one replicate.
pub fn run(model: &Model, cfg: &SimConfig, replicate: u64) -> Trajectory {
    let started = std::time::Instant::now();
    let mut traj = run_timed(model, cfg, replicate);
    traj.elapsed = started.elapsed();
    traj
}

fn run_timed(model: &Model, cfg: &SimConfig, replicate: u64) -> Trajectory {
    let mut rng = rng_for(cfg.seed, replicate);
    let last_point = cfg
        .t_max
        .is_finite()
        .then(|| (cfg.t_max / cfg.sample_dt * (1.0 + 1e-12)).floor() as u64);
    let mut rec = Recorder {
        observables: &model.observables,
        sample_dt: cfg.sample_dt,
        last_point,
        next: 0,
        times: Vec::new(),
        values: Vec::new(),
    };
    let mut traj = Trajectory {
        times: Vec::new(),
        values: Vec::new(),
        status: TerminalStatus::Error,
        error: None,
        events: 0,
        end_time: 0.0,
        final_state: model.init.clone(),
        event_log: Vec::new(),
        discrepancies: 0,
        elapsed: std::time::Duration::ZERO,
    };
    if let Err(e) = cfg.validate() {
        traj.error = Some(e);
        return traj;
    }
    if cfg.event_log {
        traj.event_log.push((0.0, measure(&model.observables, &model.init)));
    }
    let mut index = match TransitionIndex::new(model.init.clone(), &model.rules) {
        Ok(i) => i,
        Err(e) => {
            rec.hold_through(0.0, &model.init);
            traj.error = Some(e);
            traj.times = rec.times;
            traj.values = rec.values;
            return traj;
        }
    };
    let mut t = 0.0;
    let status = loop {
        if cfg.max_events.is_some_and(|cap| traj.events >= cap) {
            rec.hold_through(t, index.state());
            break TerminalStatus::EventCap;
        }
        let a0 = index.total_propensity();
        if a0 <= 0.0 {
            if last_point.is_some() {
                rec.hold_to_end(index.state());
            } else {
                rec.hold_through(t, index.state());
            }
            break TerminalStatus::Deadlock;
        }
        let (dt, target) = draw(&mut rng, a0);
        let t_next = t + dt;
        if t_next > cfg.t_max {
            rec.hold_to_end(index.state());
            break TerminalStatus::HorizonReached;
        }
        rec.hold_before(t_next, index.state());
        let chosen = index.select(&model.rules, target).expect("positive propensity");
        let next = match chosen.apply(index.state()) {
            Ok(s) => s,
            Err(e) => unreachable!("selected transition does not apply: {e}"),
        };
        if let Err(e) = check_limits(&cfg.limits, &next, &chosen) {
            traj.error = Some(e);
            rec.hold_through(t, index.state());
            break TerminalStatus::Error;
        }
        if let Err(e) = index.apply(&model.rules, &chosen.path, &chosen.outcome_local) {
            traj.error = Some(e);
            rec.hold_through(t_next, &next);
            t = t_next;
            break TerminalStatus::Error;
        }
        debug_assert_eq!(index.state(), &next);
        t = t_next;
        traj.events += 1;
        if cfg.event_log {
            traj.event_log.push((t, measure(&model.observables, index.state())));
        }
        if cfg.cross_check {
            let full = enumerate_transitions(index.state(), &model.rules);
            let ok = full.is_ok_and(|f| same_transitions(&f, &index.transitions(&model.rules)));
            if !ok {
                traj.discrepancies += 1;
            }
        }
    };
    traj.status = status;
    traj.end_time = t;
    traj.final_state = index.state().clone();
    traj.times = rec.times;
    traj.values = rec.values;
    traj
}

/// Runs `cfg.replicates` replicates on a pool of `jobs` threads (default:
/// available parallelism). Results are in replicate order.
pub fn run_replicates(model: &Model, cfg: &SimConfig, jobs: Option<usize>) -> Result<Vec<Trajectory>, SimError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| SimError::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| run(model, cfg, r))
            .collect()
    }))
}
