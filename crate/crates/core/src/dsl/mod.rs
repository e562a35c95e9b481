//! The model language.
//!
//! ```text
//! # phosphate diffusion through outer-membrane pores
//! init Pi*5 (pore | (PhoR*5 PhoRP*5 | PhoB*10 PhoGenes))
//! rule influx: Pi (pore ~x | $X) => (pore ~x | Pi $X) @ 0.1
//! rule flip:   wrap PhoR => PhoRP @ 0.01
//! observe prot: PhoProt in inside PhoR
//! tmax 1000
//! ```
//!
//! Atoms are identifiers, `$X` is a term variable, `~x` a wrap variable,
//! `(wrap | content)` a compartment and `*` the empty term. `->` requires the
//! left-hand side to already be a full pattern (with a top-level residue
//! variable); `=>` appends a fresh residue to both sides. The `wrap` prefix
//! rewrites atoms on a membrane: `wrap a b => c` stands for
//! `(a b ~x | $Y) $Z -> (c ~x | $Y) $Z`. Rates are either a mass-action
//! constant `@ k` or an expression `@ fn(...)` over `n`, `count_l(atom)` and
//! `count_r(atom)`. In `init`, `atom*n` repeats a simple term.

mod lexer;
mod parser;

use std::fmt;

use crate::pattern::{OpenTerm, PatternError, Rule, Span};
use crate::term::{Atom, Scope, Term};

pub use parser::{parse_model, parse_open_term, parse_rule, parse_term};

/// A located problem in model text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: &'static str,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub(crate) fn syntax(span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            code: "syntax-error",
            span,
            message: message.into(),
        }
    }

    pub(crate) fn new(code: &'static str, span: Span, message: impl Into<String>) -> Diagnostic {
        Diagnostic {
            code,
            span,
            message: message.into(),
        }
    }

    pub(crate) fn from_pattern(rule: &str, e: PatternError) -> Diagnostic {
        Diagnostic {
            code: e.kind.code(),
            span: e.span,
            message: format!("rule {rule}: {}", e.kind),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.code, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observable {
    pub name: String,
    pub atom: Atom,
    pub scope: Scope,
}

impl Observable {
    pub fn measure(&self, t: &Term) -> usize {
        t.count_atom(&self.atom, &self.scope)
    }
}

/// Simulation settings given in the model file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Directives {
    pub tmax: Option<f64>,
    pub seed: Option<u64>,
    pub sample: Option<f64>,
    pub max_events: Option<u64>,
    pub replicates: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub init: Term,
    pub rules: Vec<Rule>,
    pub observables: Vec<Observable>,
    pub directives: Directives,
}

impl ModelFile {
    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }
}

/// Canonical text of a term; parses back to the same term.
pub fn format_term(t: &Term) -> String {
    t.to_string()
}

pub fn format_open_term(o: &OpenTerm) -> String {
    o.to_string()
}
