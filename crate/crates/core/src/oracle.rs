//! Brute-force reference for the mass-action instantiation count.
//!
//! This follows the labeled-term definition literally: every atom occurrence
//! of the matched content gets a label unique among atoms of the same name,
//! the rule's left-hand side is matched against the labeled term in every
//! possible way (any labeling of the pattern's own atoms is allowed), and the
//! distinct labeled substitutions are collected. Each one is then erased and
//! used to instantiate the right-hand side; the count for an outcome is the
//! number of distinct labeled substitutions producing it.
//!
//! Exponential by construction. It is meant for small inputs only and shares
//! no code with [`crate::matcher`] beyond the term and pattern types.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pattern::{CompartmentPattern, OpenSimple, OpenTerm, PatternLevel, Rule, VarKind};
use crate::term::{Atom, Compartment, SimpleTerm, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct LAtom {
    name_rank: usize,
    label: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum LSimple {
    Atom(LAtom),
    Comp(Vec<LAtom>, LTerm),
}

/// Sorted; atom-free compartments may repeat.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct LTerm(Vec<LSimple>);

impl LTerm {
    fn new(mut items: Vec<LSimple>) -> LTerm {
        items.sort();
        LTerm(items)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum LValue {
    Term(LTerm),
    Wrap(Vec<LAtom>),
}

type LSubst = BTreeMap<(VarKind, String), LValue>;

/// How labels are handed out when building the complete labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Labeling {
    /// 1, 2, 3, ... per atom name in canonical traversal order.
    Sequential,
    /// A seeded random permutation of the labels of each atom name.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_atoms: usize,
    pub max_depth: usize,
    pub max_steps: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_atoms: 16,
            max_depth: 4,
            max_steps: 20_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle input too large: {0}")]
    ResourceLimitExceeded(String),
}

/// Interns atom names so labeled atoms stay `Copy`.
struct Names {
    names: Vec<Atom>,
}

impl Names {
    fn rank(&mut self, a: &Atom) -> usize {
        match self.names.iter().position(|x| x == a) {
            Some(i) => i,
            None => {
                self.names.push(a.clone());
                self.names.len() - 1
            }
        }
    }

    fn find(&self, a: &Atom) -> Option<usize> {
        self.names.iter().position(|x| x == a)
    }
}

fn count_atoms(t: &Term) -> usize {
    t.elements()
        .iter()
        .map(|(s, m)| {
            m * match s {
                SimpleTerm::Atom(_) => 1,
                SimpleTerm::Compartment(c) => c.wrap.len() + count_atoms(&c.content),
            }
        })
        .sum()
}

struct Labeler {
    next: Vec<usize>,
    pools: Vec<Vec<u32>>,
}

impl Labeler {
    fn take(&mut self, rank: usize) -> u32 {
        let i = self.next[rank];
        self.next[rank] += 1;
        self.pools[rank][i]
    }
}

fn collect_names(t: &Term, names: &mut Names, counts: &mut Vec<usize>) {
    let bump = |a: &Atom, m: usize, names: &mut Names, counts: &mut Vec<usize>| {
        let r = names.rank(a);
        if counts.len() <= r {
            counts.resize(r + 1, 0);
        }
        counts[r] += m;
    };
    for (s, m) in t.elements().iter() {
        match s {
            SimpleTerm::Atom(a) => bump(a, m, names, counts),
            SimpleTerm::Compartment(c) => {
                for _ in 0..m {
                    for (a, k) in c.wrap.iter() {
                        bump(a, k, names, counts);
                    }
                    collect_names(&c.content, names, counts);
                }
            }
        }
    }
}

fn label_term(t: &Term, names: &Names, labeler: &mut Labeler) -> LTerm {
    let mut items = Vec::new();
    for s in t.elements().iter_expanded() {
        match s {
            SimpleTerm::Atom(a) => {
                let r = names.find(a).expect("name collected");
                items.push(LSimple::Atom(LAtom {
                    name_rank: r,
                    label: labeler.take(r),
                }));
            }
            SimpleTerm::Compartment(c) => {
                let mut wrap: Vec<LAtom> = c
                    .wrap
                    .iter_expanded()
                    .map(|a| {
                        let r = names.find(a).expect("name collected");
                        LAtom {
                            name_rank: r,
                            label: labeler.take(r),
                        }
                    })
                    .collect();
                wrap.sort();
                items.push(LSimple::Comp(wrap, label_term(&c.content, names, labeler)));
            }
        }
    }
    LTerm::new(items)
}

fn erase_term(t: &LTerm, names: &Names) -> Term {
    Term::from_simples(t.0.iter().map(|s| erase_simple(s, names)))
}

fn erase_simple(s: &LSimple, names: &Names) -> SimpleTerm {
    match s {
        LSimple::Atom(a) => SimpleTerm::Atom(names.names[a.name_rank].clone()),
        LSimple::Comp(w, c) => SimpleTerm::Compartment(Compartment::new(
            w.iter().map(|a| names.names[a.name_rank].clone()).collect(),
            erase_term(c, names),
        )),
    }
}

struct Search<'a> {
    names: &'a Names,
    steps: u64,
    max_steps: u64,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.steps += 1;
        if self.steps > self.max_steps {
            Err(OracleError::ResourceLimitExceeded(format!(
                "more than {} search steps",
                self.max_steps
            )))
        } else {
            Ok(())
        }
    }

    /// All labeled substitutions for `level` against the labeled multiset
    /// `elems`.
    fn match_level(&mut self, level: &PatternLevel, elems: &[LSimple]) -> Result<Vec<LSubst>, OracleError> {
        // Ground pattern copies first, then compartment patterns.
        let ground: Vec<&SimpleTerm> = level.ground.elements().iter_expanded().collect();
        let mut used = vec![false; elems.len()];
        let mut results = BTreeSet::new();
        self.assign(level, &ground, 0, elems, &mut used, LSubst::new(), &mut results)?;
        Ok(results.into_iter().collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn assign(
        &mut self,
        level: &PatternLevel,
        ground: &[&SimpleTerm],
        next: usize,
        elems: &[LSimple],
        used: &mut Vec<bool>,
        partial: LSubst,
        results: &mut BTreeSet<LSubst>,
    ) -> Result<(), OracleError> {
        self.tick()?;
        let total = ground.len() + level.compartments.len();
        if next == total {
            let rest: Vec<LSimple> = elems
                .iter()
                .zip(used.iter())
                .filter(|(_, u)| !**u)
                .map(|(e, _)| e.clone())
                .collect();
            let mut s = partial;
            s.insert(
                (VarKind::Term, level.residue.to_string()),
                LValue::Term(LTerm::new(rest)),
            );
            results.insert(s);
            return Ok(());
        }
        for j in 0..elems.len() {
            if used[j] {
                continue;
            }
            if next < ground.len() {
                if erase_simple(&elems[j], self.names) != *ground[next] {
                    continue;
                }
                used[j] = true;
                self.assign(level, ground, next + 1, elems, used, partial.clone(), results)?;
                used[j] = false;
            } else {
                let cp = &level.compartments[next - ground.len()];
                let LSimple::Comp(wrap, content) = &elems[j] else {
                    continue;
                };
                let subs = self.match_compartment(cp, wrap, content)?;
                if subs.is_empty() {
                    continue;
                }
                used[j] = true;
                for sub in subs {
                    let mut s = partial.clone();
                    s.extend(sub);
                    self.assign(level, ground, next + 1, elems, used, s, results)?;
                }
                used[j] = false;
            }
        }
        Ok(())
    }

    fn match_compartment(
        &mut self,
        cp: &CompartmentPattern,
        wrap: &[LAtom],
        content: &LTerm,
    ) -> Result<Vec<LSubst>, OracleError> {
        let wanted: Vec<usize> = cp
            .wrap_atoms
            .iter_expanded()
            .map(|a| match self.names.find(a) {
                Some(r) => r,
                None => usize::MAX,
            })
            .collect();
        let mut wrap_rests = BTreeSet::new();
        let mut taken = vec![false; wrap.len()];
        self.pick_wrap(&wanted, 0, wrap, &mut taken, &mut wrap_rests)?;
        if wrap_rests.is_empty() {
            return Ok(Vec::new());
        }
        let inner = self.match_level(&cp.content, &content.0)?;
        let mut out = Vec::new();
        for rest in &wrap_rests {
            for sub in &inner {
                let mut s = sub.clone();
                s.insert((VarKind::Wrap, cp.wrap_var.to_string()), LValue::Wrap(rest.clone()));
                out.push(s);
            }
        }
        Ok(out)
    }

    fn pick_wrap(
        &mut self,
        wanted: &[usize],
        next: usize,
        wrap: &[LAtom],
        taken: &mut Vec<bool>,
        rests: &mut BTreeSet<Vec<LAtom>>,
    ) -> Result<(), OracleError> {
        self.tick()?;
        if next == wanted.len() {
            let rest: Vec<LAtom> = wrap
                .iter()
                .zip(taken.iter())
                .filter(|(_, t)| !**t)
                .map(|(a, _)| *a)
                .collect();
            rests.insert(rest);
            return Ok(());
        }
        for j in 0..wrap.len() {
            if !taken[j] && wrap[j].name_rank == wanted[next] {
                taken[j] = true;
                self.pick_wrap(wanted, next + 1, wrap, taken, rests)?;
                taken[j] = false;
            }
        }
        Ok(())
    }
}

/// Instantiates the right-hand side with a labeled substitution, then erases.
fn instantiate(rhs: &OpenTerm, s: &LSubst, names: &Names) -> Term {
    let mut out = Vec::new();
    let mut spliced = Vec::new();
    for item in &rhs.0 {
        match item {
            OpenSimple::Atom(a, _) => out.push(SimpleTerm::Atom(a.clone())),
            OpenSimple::Var(v, _) => match s.get(&(v.kind, v.name.to_string())) {
                Some(LValue::Term(t)) => spliced.push(erase_term(t, names)),
                _ => panic!("rule validation guarantees {v} is bound"),
            },
            OpenSimple::Compartment(c, _) => {
                let mut wrap: Vec<Atom> = c.wrap_atoms.iter_expanded().cloned().collect();
                for (v, _) in &c.wrap_vars {
                    match s.get(&(v.kind, v.name.to_string())) {
                        Some(LValue::Wrap(w)) => {
                            wrap.extend(w.iter().map(|a| names.names[a.name_rank].clone()))
                        }
                        _ => panic!("rule validation guarantees {v} is bound"),
                    }
                }
                let content = instantiate(&c.content, s, names);
                out.push(SimpleTerm::Compartment(Compartment::new(
                    wrap.into_iter().collect(),
                    content,
                )));
            }
        }
    }
    let mut items: Vec<SimpleTerm> = out;
    for t in spliced {
        items.extend(t.elements().iter_expanded().cloned());
    }
    Term::from_simples(items)
}

/// Distinct labeled instantiations of `rule` against `state_local`, grouped
/// by the erased outcome they produce.
pub fn oracle_outcomes(
    rule: &Rule,
    state_local: &Term,
    labeling: Labeling,
    limits: &OracleLimits,
) -> Result<BTreeMap<Term, u64>, OracleError> {
    let atoms = count_atoms(state_local);
    if atoms > limits.max_atoms {
        return Err(OracleError::ResourceLimitExceeded(format!(
            "{atoms} atoms (limit {})",
            limits.max_atoms
        )));
    }
    if state_local.depth() > limits.max_depth {
        return Err(OracleError::ResourceLimitExceeded(format!(
            "depth {} (limit {})",
            state_local.depth(),
            limits.max_depth
        )));
    }
    let mut names = Names { names: Vec::new() };
    let mut counts = Vec::new();
    collect_names(state_local, &mut names, &mut counts);
    let mut pools: Vec<Vec<u32>> = counts.iter().map(|&c| (1..=c as u32).collect()).collect();
    if let Labeling::Shuffled(seed) = labeling {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in &mut pools {
            p.shuffle(&mut rng);
        }
    }
    let mut labeler = Labeler {
        next: vec![0; pools.len()],
        pools,
    };
    let labeled = label_term(state_local, &names, &mut labeler);

    let substs = {
        let mut search = Search {
            names: &names,
            steps: 0,
            max_steps: limits.max_steps,
        };
        search.match_level(&rule.lhs.top, &labeled.0)?
    };
    let mut out = BTreeMap::new();
    for s in &substs {
        let u = instantiate(&rule.rhs, s, &names);
        *out.entry(u).or_insert(0) += 1;
    }
    Ok(out)
}

/// Number of distinct labeled instantiations of `rule` on `state_local`
/// whose erased right-hand side is `outcome_local`.
pub fn count_oracle(rule: &Rule, state_local: &Term, outcome_local: &Term) -> Result<u64, OracleError> {
    let all = oracle_outcomes(rule, state_local, Labeling::Sequential, &OracleLimits::default())?;
    Ok(all.get(outcome_local).copied().unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::{parse_rule, parse_term};

    fn oracle(rule: &str, state: &str) -> BTreeMap<String, u64> {
        let r = parse_rule(rule).unwrap();
        oracle_outcomes(&r, &parse_term(state).unwrap(), Labeling::Sequential, &OracleLimits::default())
            .unwrap()
            .into_iter()
            .map(|(t, n)| (t.to_string(), n))
            .collect()
    }

    #[test]
    fn counting_example() {
        let r = parse_rule("a a $X -> a c $X @ 1").unwrap();
        let t = parse_term("a a a b").unwrap();
        assert_eq!(count_oracle(&r, &t, &parse_term("a a c b").unwrap()).unwrap(), 3);
        assert_eq!(count_oracle(&r, &t, &parse_term("a c").unwrap()).unwrap(), 0);
    }

    #[test]
    fn membrane_joining_example() {
        let got = oracle("a (b ~x | $X) $Z -> (a b ~x | $X) $Z @ 1", "a (b b | c) (b | c)");
        let expected: BTreeMap<String, u64> = [
            ("(a b b | c) (b | c)".to_string(), 2),
            ("(a b | c) (b b | c)".to_string(), 1),
        ]
        .into();
        assert_eq!(got, expected);
    }

    #[test]
    fn unmatched_state_is_zero() {
        assert!(oracle("a b $X -> c $X @ 1", "a a").is_empty());
    }

    #[test]
    fn product_of_occurrences() {
        let got = oracle("a b $X -> c $X @ 1", "a a a b b d");
        assert_eq!(got.values().copied().collect::<Vec<_>>(), vec![6]);
    }

    #[test]
    fn atom_free_copies_are_indistinguishable() {
        // The two empty compartments carry no labels, so both choices give
        // the same substitution.
        let got = oracle("a (~x | $Y) $Z -> (a ~x | $Y) $Z @ 1", "a (| *) (| *)");
        assert_eq!(got.values().copied().collect::<Vec<_>>(), vec![1]);
        // With a label inside, they are two reactant choices.
        let got = oracle("a (~x | $Y) $Z -> (a ~x | $Y) $Z @ 1", "a (b | *) (b | *)");
        assert_eq!(got.values().copied().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn labeling_choice_does_not_matter() {
        let r = parse_rule("a (b ~x | c $X) $Z -> (~x | $X) a $Z @ 1").unwrap();
        let t = parse_term("a a (b b | c c d) (b | c) (b | c)").unwrap();
        let lim = OracleLimits::default();
        let base = oracle_outcomes(&r, &t, Labeling::Sequential, &lim).unwrap();
        for seed in 0..5 {
            assert_eq!(oracle_outcomes(&r, &t, Labeling::Shuffled(seed), &lim).unwrap(), base);
        }
    }

    #[test]
    fn limits_are_enforced() {
        let r = parse_rule("a $X -> $X @ 1").unwrap();
        let big = parse_term(&vec!["a"; 40].join(" ")).unwrap();
        assert!(matches!(
            oracle_outcomes(&r, &big, Labeling::Sequential, &OracleLimits::default()),
            Err(OracleError::ResourceLimitExceeded(_))
        ));
    }
}
