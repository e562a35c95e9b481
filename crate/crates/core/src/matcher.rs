//! Rule matching and instantiation counting.
//!
//! Matching works on erased (label-free) substitutions. For each one the
//! number of completely labeled substitutions that erase to it is computed in
//! closed form, level by level:
//!
//! * occurrences left in the residue: `C(m, r)` per distinct element with
//!   atoms (atom-free copies carry no labels and are interchangeable);
//! * consumed copies of an element handed to compartment patterns whose
//!   bound values contain atoms: a falling factorial, since each such pattern
//!   receives a distinguishable copy;
//! * inside each captured compartment: `C(w, x)` per wrap atom kept by the
//!   wrap variable, times the same count for its content.
//!
//! [`crate::oracle`] computes the same numbers by literal enumeration.

use std::collections::BTreeMap;

use crate::pattern::{apply_subst, CompartmentPattern, PatternLevel, Rule, Substitution};
use crate::term::{Compartment, Path, SimpleTerm, Term, TermError};

/// One erased substitution of a rule at a context, with the number of labeled
/// instantiations behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub rule_id: String,
    pub path: Path,
    pub subst: Substitution,
    pub outcome_local: Term,
    pub count: u64,
}

/// A context: the content at `path`, standing for `multiplicity` congruent
/// positions in the state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Context {
    pub path: Path,
    pub multiplicity: u64,
}

/// Top level first, then every distinct compartment depth-first in canonical
/// order. Congruent sibling compartments share one path.
pub fn enumerate_contexts(state: &Term) -> Vec<Context> {
    let mut out = Vec::new();
    collect_contexts(state, Path::root(), 1, &mut out);
    out
}

fn collect_contexts(t: &Term, path: Path, mult: u64, out: &mut Vec<Context>) {
    out.push(Context {
        path: path.clone(),
        multiplicity: mult,
    });
    for (i, c, m) in t.compartment_indices() {
        collect_contexts(&c.content, path.child(i), mult.saturating_mul(m as u64), out);
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

fn binds_atoms(s: &Substitution) -> bool {
    s.wraps.values().any(|w| !w.is_empty()) || s.terms.values().any(|t| t.has_atoms())
}

/// Alternatives for one compartment pattern against one compartment.
#[derive(Debug, Clone)]
struct Alt {
    subst: Substitution,
    count: u128,
    capturing: bool,
}

fn match_compartment(cp: &CompartmentPattern, c: &Compartment) -> Vec<Alt> {
    let Some(rest) = c.wrap.difference(&cp.wrap_atoms) else {
        return Vec::new();
    };
    let wrap_ways = rest
        .iter()
        .fold(1u128, |acc, (a, k)| acc.saturating_mul(binomial(c.wrap.count(a), k)));
    match_level(&cp.content, &c.content)
        .into_iter()
        .map(|(mut subst, n)| {
            subst.bind_wrap(&cp.wrap_var, rest.clone());
            let capturing = binds_atoms(&subst);
            Alt {
                subst,
                count: n.saturating_mul(wrap_ways),
                capturing,
            }
        })
        .collect()
}

struct LevelSearch<'a> {
    level: &'a PatternLevel,
    content: &'a Term,
    /// Elements left after the ground part, with multiplicities.
    available: Vec<(SimpleTerm, usize)>,
    /// `alts[j][e]`: alternatives of compartment pattern `j` on element `e`.
    alts: Vec<Vec<Option<Vec<Alt>>>>,
    out: BTreeMap<Substitution, u128>,
}

impl LevelSearch<'_> {
    fn alternatives(&mut self, j: usize, e: usize) -> &[Alt] {
        if self.alts[j][e].is_none() {
            let found = match &self.available[e].0 {
                SimpleTerm::Compartment(c) => match_compartment(&self.level.compartments[j], c),
                SimpleTerm::Atom(_) => Vec::new(),
            };
            self.alts[j][e] = Some(found);
        }
        self.alts[j][e].as_deref().unwrap_or(&[])
    }

    /// Chooses a target element for compartment pattern `j` onwards.
    /// `taken[e]` counts copies of `e` given to compartment patterns, and
    /// `targets` records (element, alternative) per pattern.
    fn assign(&mut self, j: usize, taken: &mut Vec<usize>, targets: &mut Vec<(usize, Alt)>) {
        if j == self.level.compartments.len() {
            self.finish(taken, targets);
            return;
        }
        for e in 0..self.available.len() {
            if taken[e] == self.available[e].1 {
                continue;
            }
            let alts = self.alternatives(j, e).to_vec();
            if alts.is_empty() {
                continue;
            }
            taken[e] += 1;
            for alt in alts {
                targets.push((e, alt));
                self.assign(j + 1, taken, targets);
                targets.pop();
            }
            taken[e] -= 1;
        }
    }

    fn finish(&mut self, taken: &[usize], targets: &[(usize, Alt)]) {
        let residue: Vec<(SimpleTerm, usize)> = self
            .available
            .iter()
            .zip(taken)
            .filter(|((_, m), t)| *m > **t)
            .map(|((s, m), t)| (s.clone(), m - t))
            .collect();

        let mut ways: u128 = 1;
        for (s, r) in &residue {
            if s.has_atoms() {
                ways = ways.saturating_mul(binomial(self.content.elements().count(s), *r));
            }
        }
        // Capturing patterns pick distinct copies among the consumed ones.
        let mut captured = vec![0usize; self.available.len()];
        let mut subst = Substitution::new();
        for (e, alt) in targets {
            if alt.capturing {
                let element = &self.available[*e].0;
                let kept = residue.iter().find(|(s, _)| s == element).map_or(0, |(_, r)| *r);
                let consumed = self.content.elements().count(element) - kept;
                ways = ways.saturating_mul((consumed - captured[*e]) as u128);
                captured[*e] += 1;
            }
            ways = ways.saturating_mul(alt.count);
            subst.extend(alt.subst.clone());
        }
        subst.bind_term(
            &self.level.residue,
            Term::from_multiset(crate::multiset::Multiset::from_counts(residue)),
        );
        self.out.entry(subst).or_insert(ways);
    }
}

/// Erased substitutions for one pattern level against `content`, each with
/// its labeled count.
fn match_level(level: &PatternLevel, content: &Term) -> Vec<(Substitution, u128)> {
    let Some(rest) = content.elements().difference(level.ground.elements()) else {
        return Vec::new();
    };
    let available: Vec<(SimpleTerm, usize)> = rest.into_entries();
    let n = available.len();
    let mut search = LevelSearch {
        level,
        content,
        alts: vec![vec![None; n]; level.compartments.len()],
        available,
        out: BTreeMap::new(),
    };
    let mut taken = vec![0; n];
    search.assign(0, &mut taken, &mut Vec::new());
    search.out.into_iter().collect()
}

fn clamp(n: u128) -> u64 {
    u64::try_from(n).unwrap_or(u64::MAX)
}

/// Matches of `rule` on the content `local` (no path bookkeeping).
pub fn match_local(rule: &Rule, local: &Term) -> Vec<(Substitution, Term, u64)> {
    match_level(&rule.lhs.top, local)
        .into_iter()
        .map(|(s, n)| {
            let outcome = apply_subst(&rule.rhs, &s).expect("validated rule binds every rhs variable");
            (s, outcome, clamp(n))
        })
        .collect()
}

/// Outcomes of `rule` on the content `local`, grouped, in canonical order.
pub fn outcomes_local(rule: &Rule, local: &Term) -> Vec<(Term, u64)> {
    let mut grouped: BTreeMap<Term, u64> = BTreeMap::new();
    for (_, u, n) in match_local(rule, local) {
        let slot = grouped.entry(u).or_insert(0);
        *slot = slot.saturating_add(n);
    }
    grouped.into_iter().collect()
}

/// Every erased substitution of `rule` at context `p` of `state`.
pub fn match_at(rule: &Rule, state: &Term, p: &Path) -> Result<Vec<Match>, TermError> {
    let local = state.resolve(p)?;
    Ok(match_local(rule, local)
        .into_iter()
        .map(|(subst, outcome_local, count)| Match {
            rule_id: rule.id.clone(),
            path: p.clone(),
            subst,
            outcome_local,
            count,
        })
        .collect())
}

/// Matches at `p` grouped by outcome, with the instantiation count `n` of
/// each outcome.
pub fn outcomes(rule: &Rule, state: &Term, p: &Path) -> Result<Vec<(Term, u64)>, TermError> {
    Ok(outcomes_local(rule, state.resolve(p)?))
}
