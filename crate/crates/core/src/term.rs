//! Ground terms: atoms, wrapped compartments and multisets of both.
//!
//! Terms are always held in canonical form. Every multiset is sorted with
//! counted multiplicities, recursively, so structural congruence coincides
//! with `==` and the derived `Ord` gives a total order on simple terms:
//! atoms sort before compartments, atoms by name, compartments by wrap and
//! then content.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::multiset::Multiset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("invalid atom name `{0}`")]
    InvalidAtom(String),
    #[error("path {path} does not address a compartment at step {step}")]
    InvalidPath { path: Path, step: usize },
}

/// Returns true for `[A-Za-z][A-Za-z0-9_]*`.
pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// An indivisible named element.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(Arc<str>);

impl Atom {
    pub fn new(name: &str) -> Result<Atom, TermError> {
        if is_identifier(name) {
            Ok(Atom(Arc::from(name)))
        } else {
            Err(TermError::InvalidAtom(name.to_string()))
        }
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub type AtomBag = Multiset<Atom>;

/// `(wrap | content)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Compartment {
    pub wrap: AtomBag,
    pub content: Term,
}

impl Compartment {
    pub fn new(wrap: AtomBag, content: Term) -> Self {
        Compartment { wrap, content }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SimpleTerm {
    Atom(Atom),
    Compartment(Compartment),
}

impl SimpleTerm {
    pub fn as_compartment(&self) -> Option<&Compartment> {
        match self {
            SimpleTerm::Compartment(c) => Some(c),
            SimpleTerm::Atom(_) => None,
        }
    }

    /// True when at least one atom occurs anywhere inside, wraps included.
    pub fn has_atoms(&self) -> bool {
        match self {
            SimpleTerm::Atom(_) => true,
            SimpleTerm::Compartment(c) => !c.wrap.is_empty() || c.content.has_atoms(),
        }
    }

    fn size(&self) -> usize {
        match self {
            SimpleTerm::Atom(_) => 1,
            SimpleTerm::Compartment(c) => 1 + c.wrap.len() + c.content.size(),
        }
    }
}

impl From<Atom> for SimpleTerm {
    fn from(a: Atom) -> Self {
        SimpleTerm::Atom(a)
    }
}

impl From<Compartment> for SimpleTerm {
    fn from(c: Compartment) -> Self {
        SimpleTerm::Compartment(c)
    }
}

/// A multiset of simple terms in canonical form. The empty term is ε.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(Multiset<SimpleTerm>);

/// One step of a [`Path`]: the canonical position of a compartment element in
/// the current level, and which of its congruent copies is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathStep {
    pub index: usize,
    pub copy: usize,
}

/// Addresses the content of a (nested) compartment. The empty path is the
/// top level.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(pub Vec<PathStep>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.0
    }

    pub fn child(&self, index: usize) -> Path {
        let mut steps = self.0.clone();
        steps.push(PathStep { index, copy: 0 });
        Path(steps)
    }

    /// Copies of one canonical element are congruent, so every copy index is
    /// reset to zero.
    pub fn normalized(&self) -> Path {
        Path(
            self.0
                .iter()
                .map(|s| PathStep {
                    index: s.index,
                    copy: 0,
                })
                .collect(),
        )
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("/");
        }
        for step in &self.0 {
            write!(f, "/{}", step.index)?;
            if step.copy != 0 {
                write!(f, ".{}", step.copy)?;
            }
        }
        Ok(())
    }
}

/// Where [`Term::count_atom`] looks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    /// Top level of the term only.
    Top,
    /// Top level and every compartment content, transitively. Wraps excluded.
    Anywhere,
    /// Top level of the content of every compartment (at any depth) whose
    /// wrap contains the marker.
    InsideWrapContaining(Atom),
    /// Wraps of every compartment (at any depth), optionally restricted to
    /// wraps containing the marker.
    OnWrap(Option<Atom>),
}

impl Term {
    pub fn empty() -> Term {
        Term(Multiset::new())
    }

    /// Canonical term from an unordered collection of simple terms.
    pub fn from_simples<I: IntoIterator<Item = SimpleTerm>>(items: I) -> Term {
        Term(items.into_iter().collect())
    }

    pub fn from_multiset(ms: Multiset<SimpleTerm>) -> Term {
        Term(ms)
    }

    pub fn atoms<'a, I: IntoIterator<Item = &'a str>>(names: I) -> Result<Term, TermError> {
        names
            .into_iter()
            .map(|n| Atom::new(n).map(SimpleTerm::Atom))
            .collect::<Result<Vec<_>, _>>()
            .map(Term::from_simples)
    }

    pub fn elements(&self) -> &Multiset<SimpleTerm> {
        &self.0
    }

    pub fn into_multiset(self) -> Multiset<SimpleTerm> {
        self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of simple terms at the top level, counting multiplicity.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Total node count: atoms (contents and wraps) plus compartments.
    pub fn size(&self) -> usize {
        self.0.iter().map(|(s, c)| c * s.size()).sum()
    }

    /// Compartment nesting depth; a term of atoms has depth 0.
    pub fn depth(&self) -> usize {
        self.0
            .iter()
            .filter_map(|(s, _)| s.as_compartment())
            .map(|c| 1 + c.content.depth())
            .max()
            .unwrap_or(0)
    }

    pub fn has_atoms(&self) -> bool {
        self.0.iter().any(|(s, _)| s.has_atoms())
    }

    pub fn union(&self, other: &Term) -> Term {
        Term(self.0.union(&other.0))
    }

    /// Congruence test. Canonical forms make this structural equality.
    pub fn equiv(&self, other: &Term) -> bool {
        self == other
    }

    fn step_compartment(&self, step: PathStep) -> Option<&Compartment> {
        let (simple, count) = self.0.entries().get(step.index)?;
        if step.copy >= *count {
            return None;
        }
        simple.as_compartment()
    }

    /// The content at the hole addressed by `path`.
    pub fn resolve(&self, path: &Path) -> Result<&Term, TermError> {
        let mut current = self;
        for (i, step) in path.0.iter().enumerate() {
            current = &current
                .step_compartment(*step)
                .ok_or_else(|| TermError::InvalidPath {
                    path: path.clone(),
                    step: i,
                })?
                .content;
        }
        Ok(current)
    }

    /// Plugs `new_content` into the context determined by `path`.
    pub fn replace_at(&self, path: &Path, new_content: Term) -> Result<Term, TermError> {
        self.replace_from(path, 0, new_content)
    }

    fn replace_from(&self, path: &Path, depth: usize, new_content: Term) -> Result<Term, TermError> {
        let Some(step) = path.0.get(depth) else {
            return Ok(new_content);
        };
        let compartment = self
            .step_compartment(*step)
            .ok_or_else(|| TermError::InvalidPath {
                path: path.clone(),
                step: depth,
            })?;
        let inner = compartment
            .content
            .replace_from(path, depth + 1, new_content)?;
        let replaced = SimpleTerm::Compartment(Compartment {
            wrap: compartment.wrap.clone(),
            content: inner,
        });
        let mut elements = self.0.clone();
        elements.remove_one_at(step.index);
        elements.insert(replaced);
        Ok(Term(elements))
    }

    pub fn count_atom(&self, atom: &Atom, scope: &Scope) -> usize {
        let target = SimpleTerm::Atom(atom.clone());
        match scope {
            Scope::Top => self.0.count(&target),
            Scope::Anywhere => {
                self.0.count(&target)
                    + self
                        .compartments()
                        .map(|(c, m)| m * c.content.count_atom(atom, scope))
                        .sum::<usize>()
            }
            Scope::InsideWrapContaining(marker) => self
                .compartments()
                .map(|(c, m)| {
                    let own = if c.wrap.count(marker) > 0 {
                        c.content.0.count(&target)
                    } else {
                        0
                    };
                    m * (own + c.content.count_atom(atom, scope))
                })
                .sum(),
            Scope::OnWrap(marker) => self
                .compartments()
                .map(|(c, m)| {
                    let own = match marker {
                        Some(mk) if c.wrap.count(mk) == 0 => 0,
                        _ => c.wrap.count(atom),
                    };
                    m * (own + c.content.count_atom(atom, scope))
                })
                .sum(),
        }
    }

    /// Distinct compartment elements of the top level with multiplicities.
    pub fn compartments(&self) -> impl Iterator<Item = (&Compartment, usize)> {
        self.0
            .iter()
            .filter_map(|(s, c)| s.as_compartment().map(|comp| (comp, c)))
    }

    /// Canonical positions of the compartment elements at the top level.
    pub fn compartment_indices(&self) -> impl Iterator<Item = (usize, &Compartment, usize)> {
        self.0
            .entries()
            .iter()
            .enumerate()
            .filter_map(|(i, (s, c))| s.as_compartment().map(|comp| (i, comp, *c)))
    }
}

impl FromIterator<SimpleTerm> for Term {
    fn from_iter<I: IntoIterator<Item = SimpleTerm>>(iter: I) -> Self {
        Term::from_simples(iter)
    }
}

fn write_atoms(f: &mut fmt::Formatter<'_>, bag: &AtomBag) -> fmt::Result {
    let mut first = true;
    for a in bag.iter_expanded() {
        if !first {
            f.write_str(" ")?;
        }
        first = false;
        write!(f, "{a}")?;
    }
    Ok(())
}

impl fmt::Display for SimpleTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleTerm::Atom(a) => write!(f, "{a}"),
            SimpleTerm::Compartment(c) => {
                f.write_str("(")?;
                write_atoms(f, &c.wrap)?;
                if !c.wrap.is_empty() {
                    f.write_str(" ")?;
                }
                write!(f, "| {})", c.content)
            }
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        let mut first = true;
        for s in self.0.iter_expanded() {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            write!(f, "{s}")?;
        }
        Ok(())
    }
}
