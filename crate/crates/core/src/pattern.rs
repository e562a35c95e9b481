//! Open terms, patterns, substitutions and rewrite rules.
//!
//! An [`OpenTerm`] is what the parser produces for either side of a rule: a
//! multiset of atoms, term variables and compartments whose wraps may carry
//! wrap variables. A left-hand side is accepted only if it has the shape of a
//! [`Pattern`]: linear, with a residue term variable at the top level and, for
//! every compartment that contains variables, exactly one wrap variable and
//! exactly one residue term variable in its content. Fully ground
//! compartments are kept as ground simple terms and matched exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::rates::RateSpec;
use crate::term::{Atom, AtomBag, Compartment, SimpleTerm, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Term,
    Wrap,
}

/// Term variables print as `$X`, wrap variables as `~x`. The two kinds live in
/// separate namespaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub kind: VarKind,
    pub name: Arc<str>,
}

impl Var {
    pub fn term(name: &str) -> Var {
        Var {
            kind: VarKind::Term,
            name: Arc::from(name),
        }
    }

    pub fn wrap(name: &str) -> Var {
        Var {
            kind: VarKind::Wrap,
            name: Arc::from(name),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Term => write!(f, "${}", self.name),
            VarKind::Wrap => write!(f, "~{}", self.name),
        }
    }
}

/// Source position (1-based). Zero means "not from source text".
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpenSimple {
    Atom(Atom, Span),
    /// Should be a term variable; a wrap variable here is a kind mismatch
    /// reported by validation.
    Var(Var, Span),
    Compartment(OpenCompartment, Span),
}

impl OpenSimple {
    pub fn span(&self) -> Span {
        match self {
            OpenSimple::Atom(_, s) | OpenSimple::Var(_, s) | OpenSimple::Compartment(_, s) => *s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenCompartment {
    pub wrap_atoms: AtomBag,
    /// Should all be wrap variables.
    pub wrap_vars: Vec<(Var, Span)>,
    pub content: OpenTerm,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpenTerm(pub Vec<OpenSimple>);

impl OpenTerm {
    pub fn empty() -> OpenTerm {
        OpenTerm(Vec::new())
    }

    pub fn from_term(t: &Term) -> OpenTerm {
        OpenTerm(
            t.elements()
                .iter_expanded()
                .map(|s| match s {
                    SimpleTerm::Atom(a) => OpenSimple::Atom(a.clone(), Span::default()),
                    SimpleTerm::Compartment(c) => OpenSimple::Compartment(
                        OpenCompartment {
                            wrap_atoms: c.wrap.clone(),
                            wrap_vars: Vec::new(),
                            content: OpenTerm::from_term(&c.content),
                        },
                        Span::default(),
                    ),
                })
                .collect(),
        )
    }

    /// Every variable occurrence in source order, with its position.
    pub fn var_occurrences(&self) -> Vec<(Var, Span)> {
        let mut out = Vec::new();
        self.collect_occurrences(&mut out);
        out
    }

    fn collect_occurrences(&self, out: &mut Vec<(Var, Span)>) {
        for s in &self.0 {
            match s {
                OpenSimple::Atom(..) => {}
                OpenSimple::Var(v, span) => out.push((v.clone(), *span)),
                OpenSimple::Compartment(c, _) => {
                    out.extend(c.wrap_vars.iter().cloned());
                    c.content.collect_occurrences(out);
                }
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.var_occurrences().into_iter().map(|(v, _)| v).collect()
    }

    pub fn is_ground(&self) -> bool {
        self.var_occurrences().is_empty()
    }

    /// Multiset union of two open terms.
    pub fn join(&self, other: &OpenTerm) -> OpenTerm {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        OpenTerm(v)
    }
}

impl fmt::Display for OpenTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("*");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match s {
                OpenSimple::Atom(a, _) => write!(f, "{a}")?,
                OpenSimple::Var(v, _) => write!(f, "{v}")?,
                OpenSimple::Compartment(c, _) => {
                    f.write_str("(")?;
                    for a in c.wrap_atoms.iter_expanded() {
                        write!(f, "{a} ")?;
                    }
                    for (v, _) in &c.wrap_vars {
                        write!(f, "{v} ")?;
                    }
                    write!(f, "| {})", c.content)?;
                }
            }
        }
        Ok(())
    }
}

/// A compartment position of a pattern: `(atoms ~x | sub-patterns $X)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompartmentPattern {
    pub wrap_atoms: AtomBag,
    pub wrap_var: Arc<str>,
    pub content: PatternLevel,
}

/// One multiset level of a pattern: ground simple terms that must be present
/// exactly, compartment patterns, and the residue variable that absorbs
/// everything else.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternLevel {
    pub ground: Term,
    pub compartments: Vec<CompartmentPattern>,
    pub residue: Arc<str>,
}

impl PatternLevel {
    /// Number of simple patterns at this level (ground ones counted with
    /// multiplicity).
    pub fn simple_count(&self) -> usize {
        self.ground.len() + self.compartments.len()
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        out.insert(Var::term(&self.residue));
        for c in &self.compartments {
            out.insert(Var::wrap(&c.wrap_var));
            c.content.collect_vars(out);
        }
    }

    pub fn to_open_term(&self) -> OpenTerm {
        let mut items = OpenTerm::from_term(&self.ground).0;
        for c in &self.compartments {
            items.push(OpenSimple::Compartment(
                OpenCompartment {
                    wrap_atoms: c.wrap_atoms.clone(),
                    wrap_vars: vec![(Var::wrap(&c.wrap_var), Span::default())],
                    content: c.content.to_open_term(),
                },
                Span::default(),
            ));
        }
        items.push(OpenSimple::Var(Var::term(&self.residue), Span::default()));
        OpenTerm(items)
    }
}

/// A validated rule left-hand side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub top: PatternLevel,
}

impl Pattern {
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.top.collect_vars(&mut out);
        out
    }

    pub fn to_open_term(&self) -> OpenTerm {
        self.top.to_open_term()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_open_term())
    }
}

/// Kind-preserving instantiation: term variables map to terms, wrap
/// variables to atom multisets.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    pub terms: BTreeMap<Arc<str>, Term>,
    pub wraps: BTreeMap<Arc<str>, AtomBag>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind_term(&mut self, name: &str, value: Term) {
        self.terms.insert(Arc::from(name), value);
    }

    pub fn bind_wrap(&mut self, name: &str, value: AtomBag) {
        self.wraps.insert(Arc::from(name), value);
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        self.terms.get(name)
    }

    pub fn wrap(&self, name: &str) -> Option<&AtomBag> {
        self.wraps.get(name)
    }

    /// Merges a substitution over disjoint variables.
    pub fn extend(&mut self, other: Substitution) {
        self.terms.extend(other.terms);
        self.wraps.extend(other.wraps);
    }

    pub fn domain(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .map(|k| Var::term(k))
            .chain(self.wraps.keys().map(|k| Var::wrap(k)))
            .collect()
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (k, v) in &self.wraps {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "~{k} = ")?;
            if v.is_empty() {
                f.write_str("*")?;
            } else {
                let names: Vec<String> = v.iter_expanded().map(|a| a.to_string()).collect();
                f.write_str(&names.join(" "))?;
            }
        }
        for (k, v) in &self.terms {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "${k} = {v}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstError {
    #[error("unbound variable {0}")]
    UnboundVariable(Var),
    #[error("variable {0} used in the wrong position for its kind")]
    KindMismatch(Var),
}

/// Instantiates an open term. Wrap variables splice their atoms into the
/// enclosing wrap, term variables splice their term into the enclosing
/// multiset.
pub fn apply_subst(open: &OpenTerm, subst: &Substitution) -> Result<Term, SubstError> {
    let mut out: Vec<SimpleTerm> = Vec::new();
    let mut spliced: Vec<&Term> = Vec::new();
    for s in &open.0 {
        match s {
            OpenSimple::Atom(a, _) => out.push(SimpleTerm::Atom(a.clone())),
            OpenSimple::Var(v, _) => {
                if v.kind != VarKind::Term {
                    return Err(SubstError::KindMismatch(v.clone()));
                }
                let value = subst
                    .term(&v.name)
                    .ok_or_else(|| SubstError::UnboundVariable(v.clone()))?;
                spliced.push(value);
            }
            OpenSimple::Compartment(c, _) => {
                let mut wrap = c.wrap_atoms.clone();
                for (v, _) in &c.wrap_vars {
                    if v.kind != VarKind::Wrap {
                        return Err(SubstError::KindMismatch(v.clone()));
                    }
                    let value = subst
                        .wrap(&v.name)
                        .ok_or_else(|| SubstError::UnboundVariable(v.clone()))?;
                    wrap = wrap.union(value);
                }
                let content = apply_subst(&c.content, subst)?;
                out.push(SimpleTerm::Compartment(Compartment::new(wrap, content)));
            }
        }
    }
    let mut result = Term::from_simples(out);
    for t in spliced {
        result = result.union(t);
    }
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternErrorKind {
    NonlinearPattern(Var),
    UnboundVariable(Var),
    MalformedPattern(String),
    KindMismatch(Var),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {span}")]
pub struct PatternError {
    pub kind: PatternErrorKind,
    pub span: Span,
}

impl fmt::Display for PatternErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternErrorKind::NonlinearPattern(v) => {
                write!(f, "nonlinear pattern: variable {v} occurs more than once")
            }
            PatternErrorKind::UnboundVariable(v) => {
                write!(f, "unbound variable {v}: it does not occur in the left-hand side")
            }
            PatternErrorKind::MalformedPattern(why) => write!(f, "malformed pattern: {why}"),
            PatternErrorKind::KindMismatch(v) => match v.kind {
                VarKind::Term => write!(f, "kind mismatch: term variable {v} used in a wrap"),
                VarKind::Wrap => {
                    write!(f, "kind mismatch: wrap variable {v} used outside a wrap")
                }
            },
        }
    }
}

impl PatternErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            PatternErrorKind::NonlinearPattern(_) => "nonlinear-pattern",
            PatternErrorKind::UnboundVariable(_) => "unbound-variable",
            PatternErrorKind::MalformedPattern(_) => "malformed-pattern",
            PatternErrorKind::KindMismatch(_) => "kind-mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: String,
    pub lhs: Pattern,
    pub rhs: OpenTerm,
    pub rate: RateSpec,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} -> {} @ {}", self.id, self.lhs, self.rhs, self.rate)
    }
}

fn kind_errors(o: &OpenTerm, errors: &mut Vec<PatternError>) {
    for s in &o.0 {
        match s {
            OpenSimple::Var(v, span) if v.kind != VarKind::Term => errors.push(PatternError {
                kind: PatternErrorKind::KindMismatch(v.clone()),
                span: *span,
            }),
            OpenSimple::Compartment(c, _) => {
                for (v, span) in &c.wrap_vars {
                    if v.kind != VarKind::Wrap {
                        errors.push(PatternError {
                            kind: PatternErrorKind::KindMismatch(v.clone()),
                            span: *span,
                        });
                    }
                }
                kind_errors(&c.content, errors);
            }
            _ => {}
        }
    }
}

fn ground_simple(s: &OpenSimple) -> Option<SimpleTerm> {
    match s {
        OpenSimple::Atom(a, _) => Some(SimpleTerm::Atom(a.clone())),
        OpenSimple::Var(..) => None,
        OpenSimple::Compartment(c, _) => {
            if !c.wrap_vars.is_empty() {
                return None;
            }
            let content: Option<Vec<SimpleTerm>> = c.content.0.iter().map(ground_simple).collect();
            Some(SimpleTerm::Compartment(Compartment::new(
                c.wrap_atoms.clone(),
                Term::from_simples(content?),
            )))
        }
    }
}

/// Builds one pattern level out of an open multiset. `where_` names the level
/// in diagnostics; `span` locates it.
fn level_from_open(
    o: &OpenTerm,
    span: Span,
    where_: &str,
    errors: &mut Vec<PatternError>,
) -> Option<PatternLevel> {
    let mut ground = Vec::new();
    let mut compartments = Vec::new();
    let mut residues = Vec::new();
    let mut ok = true;
    for s in &o.0 {
        match s {
            OpenSimple::Var(v, vspan) => {
                if v.kind == VarKind::Term {
                    residues.push((v.name.clone(), *vspan));
                } else {
                    ok = false;
                }
            }
            OpenSimple::Atom(a, _) => ground.push(SimpleTerm::Atom(a.clone())),
            OpenSimple::Compartment(c, cspan) => {
                if let Some(g) = ground_simple(s) {
                    ground.push(g);
                    continue;
                }
                let wrap_vars: Vec<_> = c
                    .wrap_vars
                    .iter()
                    .filter(|(v, _)| v.kind == VarKind::Wrap)
                    .collect();
                let wrap_var = match wrap_vars.as_slice() {
                    [(v, _)] => Some(v.name.clone()),
                    [] => {
                        errors.push(PatternError {
                            kind: PatternErrorKind::MalformedPattern(
                                "compartment pattern has no wrap variable".into(),
                            ),
                            span: *cspan,
                        });
                        None
                    }
                    [_, (_, extra), ..] => {
                        errors.push(PatternError {
                            kind: PatternErrorKind::MalformedPattern(
                                "compartment pattern has more than one wrap variable".into(),
                            ),
                            span: *extra,
                        });
                        None
                    }
                };
                let content = level_from_open(&c.content, *cspan, "compartment content", errors);
                match (wrap_var, content) {
                    (Some(wrap_var), Some(content)) => compartments.push(CompartmentPattern {
                        wrap_atoms: c.wrap_atoms.clone(),
                        wrap_var,
                        content,
                    }),
                    _ => ok = false,
                }
            }
        }
    }
    let residue = match residues.as_slice() {
        [(name, _)] => Some(name.clone()),
        [] => {
            errors.push(PatternError {
                kind: PatternErrorKind::MalformedPattern(format!(
                    "{where_} has no residue term variable"
                )),
                span,
            });
            None
        }
        [_, (_, extra), ..] => {
            errors.push(PatternError {
                kind: PatternErrorKind::MalformedPattern(format!(
                    "{where_} has more than one residue term variable"
                )),
                span: *extra,
            });
            None
        }
    };
    if !ok {
        return None;
    }
    Some(PatternLevel {
        ground: Term::from_simples(ground),
        compartments,
        residue: residue?,
    })
}

/// Checks that `lhs` is a linear pattern and that `rhs` only uses variables
/// bound by it. Every violation found is reported.
pub fn validate_rule(
    id: &str,
    lhs: &OpenTerm,
    rhs: &OpenTerm,
    rate: RateSpec,
) -> Result<Rule, Vec<PatternError>> {
    let mut errors = Vec::new();
    kind_errors(lhs, &mut errors);
    kind_errors(rhs, &mut errors);

    let mut seen = BTreeSet::new();
    for (v, span) in lhs.var_occurrences() {
        if !seen.insert(v.clone()) {
            errors.push(PatternError {
                kind: PatternErrorKind::NonlinearPattern(v),
                span,
            });
        }
    }

    let start = lhs.0.first().map(|s| s.span()).unwrap_or_default();
    let top = level_from_open(lhs, start, "top level", &mut errors);
    if let Some(top) = &top {
        if top.simple_count() == 0 {
            errors.push(PatternError {
                kind: PatternErrorKind::MalformedPattern(
                    "left-hand side has no reactants besides its residue variable".into(),
                ),
                span: start,
            });
        }
    }

    let mut reported = BTreeSet::new();
    for (v, span) in rhs.var_occurrences() {
        if !seen.contains(&v) && reported.insert(v.clone()) {
            errors.push(PatternError {
                kind: PatternErrorKind::UnboundVariable(v),
                span,
            });
        }
    }

    match top {
        Some(top) if errors.is_empty() => Ok(Rule {
            id: id.to_string(),
            lhs: Pattern { top },
            rhs: rhs.clone(),
            rate,
        }),
        _ => {
            errors.sort_by_key(|e| e.span);
            errors.dedup();
            Err(errors)
        }
    }
}
