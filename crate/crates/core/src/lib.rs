//! Calculus of Wrapped Compartments: terms, rewrite rules, match counting and
//! stochastic simulation.
//!
//! ```
//! use cwc::dsl::parse_model;
//! use cwc::ssa::enumerate_transitions;
//!
//! let m = parse_model("init a a a b\nrule: a a => a c @ 2").unwrap();
//! let ts = enumerate_transitions(&m.init, &m.rules).unwrap();
//! assert_eq!(ts.len(), 1);
//! assert_eq!(ts[0].n, 3);
//! assert_eq!(ts[0].rate, 6.0);
//! ```

pub mod dsl;
pub mod matcher;
pub mod multiset;
pub mod oracle;
pub mod pattern;
pub mod rates;
pub mod ssa;
pub mod term;
#[doc(hidden)]
pub mod testkit;

pub use dsl::{parse_model, parse_rule, parse_term, ModelFile};
pub use pattern::Rule;
pub use term::{Atom, Path, Term};
