//! Random terms and rules for property tests and the acceptance suite.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use crate::dsl::{parse_rule, parse_term};
use crate::pattern::Rule;
use crate::term::{SimpleTerm, Term};

pub const ATOMS: [&str; 4] = ["a", "b", "c", "d"];

/// Bounds for [`random_term`].
#[derive(Debug, Clone, Copy)]
pub struct TermShape {
    pub max_atoms: usize,
    pub max_depth: usize,
    pub max_compartments: usize,
}

impl TermShape {
    pub const SMALL: TermShape = TermShape {
        max_atoms: 12,
        max_depth: 3,
        max_compartments: 3,
    };
}

struct Budget {
    atoms: usize,
    compartments: usize,
}

fn pick<R: Rng>(rng: &mut R, names: &[&str]) -> String {
    names.choose(rng).expect("nonempty").to_string()
}

fn gen_level<R: Rng>(rng: &mut R, names: &[&str], depth_left: usize, budget: &mut Budget) -> Vec<String> {
    let mut items = Vec::new();
    let slots = rng.random_range(0..=4);
    for _ in 0..slots {
        let make_comp = depth_left > 0 && budget.compartments > 0 && rng.random_bool(0.35);
        if make_comp {
            budget.compartments -= 1;
            let mut wrap = Vec::new();
            for _ in 0..rng.random_range(0..=2) {
                if budget.atoms == 0 {
                    break;
                }
                budget.atoms -= 1;
                wrap.push(pick(rng, names));
            }
            let content = gen_level(rng, names, depth_left - 1, budget);
            let content = if content.is_empty() { "*".to_string() } else { content.join(" ") };
            items.push(format!("({} | {content})", wrap.join(" ")));
        } else if budget.atoms > 0 {
            budget.atoms -= 1;
            items.push(pick(rng, names));
        }
    }
    items
}

/// A random ground term within `shape` (depth counts compartment nesting).
pub fn random_term<R: Rng>(rng: &mut R, shape: TermShape) -> Term {
    let mut budget = Budget {
        atoms: shape.max_atoms,
        compartments: shape.max_compartments,
    };
    let items = gen_level(rng, &ATOMS[..3], shape.max_depth, &mut budget);
    let text = if items.is_empty() { "*".to_string() } else { items.join(" ") };
    parse_term(&text).expect("generated term parses")
}

/// A term built from a few compartments repeated one to three times, so that
/// congruent copies are common. Stays within `shape.max_atoms` and depth 3.
pub fn random_term_with_copies<R: Rng>(rng: &mut R, shape: TermShape) -> Term {
    let inner = TermShape {
        max_atoms: 3,
        max_depth: 1,
        max_compartments: 1,
    };
    loop {
        let mut items: Vec<SimpleTerm> = Vec::new();
        for _ in 0..rng.random_range(0..=3) {
            items.push(SimpleTerm::Atom(crate::term::Atom::new(&pick(rng, &ATOMS[..3])).expect("valid")));
        }
        for _ in 0..rng.random_range(1..=2) {
            let wrap: crate::term::AtomBag = (0..rng.random_range(0..=2))
                .map(|_| crate::term::Atom::new(&pick(rng, &ATOMS[..2])).expect("valid"))
                .collect();
            let c = SimpleTerm::Compartment(crate::term::Compartment::new(wrap, random_term(rng, inner)));
            items.extend(std::iter::repeat_n(c, rng.random_range(1..=3)));
        }
        let t = Term::from_simples(items);
        if atom_count(&t) <= shape.max_atoms && t.depth() <= shape.max_depth {
            return t;
        }
    }
}

struct VarSupply {
    next: usize,
}

impl VarSupply {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }
}

/// Pattern text plus the term variables (with their own content shapes) it
/// binds, for building a matching right-hand side.
struct PatternPiece {
    text: String,
    term_vars: Vec<String>,
    wrap_vars: Vec<String>,
}

fn gen_pattern_level<R: Rng>(rng: &mut R, depth_left: usize, vars: &mut VarSupply, top: bool) -> PatternPiece {
    let mut parts = Vec::new();
    let mut term_vars = Vec::new();
    let mut wrap_vars = Vec::new();
    let atoms = rng.random_range(if top { 0..=2 } else { 0..=1 });
    for _ in 0..atoms {
        parts.push(pick(rng, &ATOMS[..3]));
    }
    let comps = if depth_left == 0 { 0 } else { rng.random_range(0..=if top { 2 } else { 1 }) };
    for _ in 0..comps {
        let mut wrap: Vec<String> = (0..rng.random_range(0..=1)).map(|_| pick(rng, &ATOMS[..3])).collect();
        let w = vars.fresh("w");
        wrap.push(format!("~{w}"));
        wrap_vars.push(w);
        let inner = gen_pattern_level(rng, depth_left - 1, vars, false);
        term_vars.extend(inner.term_vars);
        wrap_vars.extend(inner.wrap_vars);
        parts.push(format!("({} | {})", wrap.join(" "), inner.text));
    }
    if top && parts.is_empty() {
        parts.push(pick(rng, &ATOMS[..3]));
    }
    if !top && rng.random_bool(0.1) {
        // A fully ground compartment, matched exactly.
        parts.push(format!("({} | *)", pick(rng, &ATOMS[..3])));
    }
    let r = vars.fresh("X");
    parts.push(format!("${r}"));
    term_vars.push(r);
    PatternPiece {
        text: parts.join(" "),
        term_vars,
        wrap_vars,
    }
}

/// A random rule whose left-hand side follows the pattern grammar and whose
/// right-hand side reuses a random subset of its variables.
pub fn random_rule<R: Rng>(rng: &mut R) -> Rule {
    let mut vars = VarSupply { next: 0 };
    let lhs = gen_pattern_level(rng, 2, &mut vars, true);
    let mut tv = lhs.term_vars.clone();
    tv.shuffle(rng);
    let mut wv = lhs.wrap_vars.clone();
    wv.shuffle(rng);

    let mut parts: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        parts.push(pick(rng, &ATOMS));
    }
    let mut pending_wraps = wv.into_iter().filter(|_| rng.random_bool(0.7)).collect::<Vec<_>>();
    let mut pending_terms = tv.into_iter().filter(|_| rng.random_bool(0.8)).collect::<Vec<_>>();
    while !pending_wraps.is_empty() || (!pending_terms.is_empty() && rng.random_bool(0.3)) {
        let mut wrap = Vec::new();
        if rng.random_bool(0.3) {
            wrap.push(pick(rng, &ATOMS));
        }
        if let Some(w) = pending_wraps.pop() {
            wrap.push(format!("~{w}"));
        }
        let mut content = Vec::new();
        if let Some(t) = pending_terms.pop() {
            content.push(format!("${t}"));
        }
        if rng.random_bool(0.3) {
            content.push(pick(rng, &ATOMS));
        }
        let content = if content.is_empty() { "*".to_string() } else { content.join(" ") };
        parts.push(format!("({} | {content})", wrap.join(" ")));
    }
    parts.extend(pending_terms.into_iter().map(|t| format!("${t}")));
    let rhs = if parts.is_empty() { "*".to_string() } else { parts.join(" ") };
    let text = format!("{} -> {rhs} @ 1", lhs.text);
    parse_rule(&text).unwrap_or_else(|e| panic!("generated rule {text} invalid: {e:?}"))
}

/// Writes `t` with every multiset (contents and wraps) in a random order.
/// Parsing the result gives back `t`.
pub fn shuffled_text<R: Rng>(rng: &mut R, t: &Term) -> String {
    let mut items: Vec<String> = t
        .elements()
        .iter_expanded()
        .map(|s| match s {
            SimpleTerm::Atom(a) => a.to_string(),
            SimpleTerm::Compartment(c) => {
                let mut wrap: Vec<String> = c.wrap.iter_expanded().map(|a| a.to_string()).collect();
                wrap.shuffle(rng);
                format!("({} | {})", wrap.join(" "), shuffled_text(rng, &c.content))
            }
        })
        .collect();
    items.shuffle(rng);
    if items.is_empty() {
        "*".to_string()
    } else {
        items.join(" ")
    }
}

/// Number of atom occurrences, wraps included.
pub fn atom_count(t: &Term) -> usize {
    t.elements()
        .iter()
        .map(|(s, m)| {
            m * match s {
                SimpleTerm::Atom(_) => 1,
                SimpleTerm::Compartment(c) => c.wrap.len() + atom_count(&c.content),
            }
        })
        .sum()
}
