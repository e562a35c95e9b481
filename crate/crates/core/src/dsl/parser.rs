use std::collections::BTreeSet;

use crate::pattern::{validate_rule, OpenCompartment, OpenSimple, OpenTerm, Rule, Span, Var};
use crate::rates::{BinOp, RateExpr, RateSpec};
use crate::term::{Atom, AtomBag, Compartment, Scope, SimpleTerm, Term};

use super::lexer::{lex, Tok, Token};
use super::{Diagnostic, Directives, ModelFile, Observable};

const ITEM_KEYWORDS: [&str; 8] = [
    "init",
    "rule",
    "observe",
    "tmax",
    "seed",
    "sample",
    "maxevents",
    "replicates",
];

/// Residue names introduced by the sugars. User variables must start with a
/// letter, so these never clash.
const SUGAR_RESIDUE: &str = "_W";
const WRAP_SUGAR_WRAP: &str = "_x";
const WRAP_SUGAR_CONTENT: &str = "_Y";
const WRAP_SUGAR_REST: &str = "_Z";

fn is_item_keyword(s: &str) -> bool {
    ITEM_KEYWORDS.contains(&s)
}

/// Marker for an item that failed to parse; its diagnostics are already
/// recorded.
struct Failed;

type PResult<T> = Result<T, Failed>;

#[derive(Clone, Copy, PartialEq, Eq)]
enum TermMode {
    /// Ground term of an `init` item: repetition allowed.
    Init,
    /// Either side of a rule.
    Rule,
}

enum Arrow {
    Full,
    Sugared,
}

struct ParsedRule {
    id: String,
    span: Span,
    wrap_sugar: bool,
    lhs: OpenTerm,
    arrow: Arrow,
    rhs: OpenTerm,
    rate: RateSpec,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    diags: Vec<Diagnostic>,
}

impl Parser {
    fn new(src: &str) -> Result<Parser, Vec<Diagnostic>> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            diags: Vec::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, span: Span, msg: impl Into<String>) -> PResult<T> {
        self.diags.push(Diagnostic::syntax(span, msg));
        Err(Failed)
    }

    fn unexpected<T>(&mut self, wanted: &str) -> PResult<T> {
        let msg = format!("expected {wanted}, found {}", self.peek().describe());
        let span = self.span();
        self.error(span, msg)
    }

    fn expect(&mut self, tok: Tok, wanted: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            self.unexpected(wanted)
        }
    }

    fn at_item_start(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if is_item_keyword(s)) || *self.peek() == Tok::Eof
    }

    /// Skips to the next item keyword after an error.
    fn recover(&mut self) {
        if !self.at_item_start() {
            self.bump();
        }
        while !self.at_item_start() {
            self.bump();
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_item_keyword(&s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => self.unexpected(wanted),
        }
    }

    fn atom(&mut self) -> PResult<(Atom, Span)> {
        let (name, span) = self.ident("an atom")?;
        match Atom::new(&name) {
            Ok(a) => Ok((a, span)),
            Err(e) => self.error(span, e.to_string()),
        }
    }

    /// `atom*n` / `(..)*n` after a simple term.
    fn repetition(&mut self, mode: TermMode) -> PResult<usize> {
        if *self.peek() != Tok::Star || !matches!(self.peek_at(1), Tok::Int(_) | Tok::Num(_)) {
            return Ok(1);
        }
        let span = self.bump().span;
        if mode != TermMode::Init {
            return self.error(span, "repetition `*n` is only allowed in init");
        }
        match self.bump().tok {
            Tok::Int(n) => Ok(n as usize),
            _ => self.error(span, "repetition count must be a nonnegative integer"),
        }
    }

    fn open_term(&mut self, mode: TermMode) -> PResult<OpenTerm> {
        let mut items: Vec<OpenSimple> = Vec::new();
        let mut explicit_empty: Option<Span> = None;
        loop {
            let span = self.span();
            let simple = match self.peek().clone() {
                Tok::Ident(s) if !is_item_keyword(&s) => {
                    let (a, span) = self.atom()?;
                    OpenSimple::Atom(a, span)
                }
                Tok::LParen => OpenSimple::Compartment(self.compartment(mode)?, span),
                Tok::TermVar(v) => {
                    self.bump();
                    OpenSimple::Var(Var::term(&v), span)
                }
                Tok::WrapVar(v) => {
                    self.bump();
                    OpenSimple::Var(Var::wrap(&v), span)
                }
                Tok::Star if items.is_empty() && explicit_empty.is_none() => {
                    self.bump();
                    explicit_empty = Some(span);
                    continue;
                }
                _ => break,
            };
            if let Some(s) = explicit_empty {
                return self.error(s, "`*` (the empty term) must stand alone");
            }
            let copies = if matches!(simple, OpenSimple::Var(..)) {
                1
            } else {
                self.repetition(mode)?
            };
            for _ in 0..copies {
                items.push(simple.clone());
            }
        }
        if items.is_empty() && explicit_empty.is_none() {
            return self.unexpected("a term (use `*` for the empty term)");
        }
        Ok(OpenTerm(items))
    }

    fn compartment(&mut self, mode: TermMode) -> PResult<OpenCompartment> {
        self.expect(Tok::LParen, "`(`")?;
        let mut wrap_atoms = Vec::new();
        let mut wrap_vars = Vec::new();
        loop {
            let span = self.span();
            match self.peek().clone() {
                Tok::Ident(s) if !is_item_keyword(&s) => {
                    let (a, _) = self.atom()?;
                    let n = self.repetition(mode)?;
                    wrap_atoms.extend(std::iter::repeat_n(a, n));
                }
                Tok::WrapVar(v) => {
                    self.bump();
                    wrap_vars.push((Var::wrap(&v), span));
                }
                Tok::TermVar(v) => {
                    self.bump();
                    wrap_vars.push((Var::term(&v), span));
                }
                Tok::Star if matches!(self.peek_at(1), Tok::Bar) && wrap_atoms.is_empty() && wrap_vars.is_empty() => {
                    self.bump();
                }
                Tok::Bar => break,
                _ => return self.unexpected("a wrap atom, a wrap variable or `|`"),
            }
        }
        self.expect(Tok::Bar, "`|`")?;
        let content = self.open_term(mode)?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(OpenCompartment {
            wrap_atoms: wrap_atoms.into_iter().collect::<AtomBag>(),
            wrap_vars,
            content,
        })
    }

    fn ground_term(&mut self) -> PResult<Term> {
        let open = self.open_term(TermMode::Init)?;
        let occurrences = open.var_occurrences();
        if let Some((v, span)) = occurrences.first() {
            return self.error(*span, format!("variable {v} is not allowed in a ground term"));
        }
        Ok(to_ground(&open))
    }

    fn number(&mut self, wanted: &str) -> PResult<(f64, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok((v as f64, span))
            }
            Tok::Num(v) => {
                self.bump();
                Ok((v, span))
            }
            Tok::Minus if matches!(self.peek_at(1), Tok::Int(_) | Tok::Num(_)) => {
                self.bump();
                let (v, _) = self.number(wanted)?;
                Ok((-v, span))
            }
            _ => self.unexpected(wanted),
        }
    }

    fn integer(&mut self, wanted: &str) -> PResult<(u64, Span)> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok((v, span))
            }
            _ => self.unexpected(wanted),
        }
    }

    fn rate(&mut self) -> PResult<RateSpec> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "fn" => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `fn`")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)` closing the rate expression")?;
                Ok(RateSpec::Fn(e))
            }
            _ => {
                let (k, span) = self.number("a rate constant or `fn(...)`")?;
                if !k.is_finite() {
                    self.diags.push(Diagnostic::new("nonfinite-rate", span, "rate constant is not finite"));
                    return Err(Failed);
                }
                if k < 0.0 {
                    self.diags.push(Diagnostic::new(
                        "negative-rate",
                        span,
                        format!("rate constant {k} is negative"),
                    ));
                    return Err(Failed);
                }
                Ok(RateSpec::MassAction(k))
            }
        }
    }

    fn expr(&mut self) -> PResult<RateExpr> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.product()?;
            lhs = RateExpr::bin(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> PResult<RateExpr> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.factor()?;
            lhs = RateExpr::bin(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> PResult<RateExpr> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(RateExpr::Num(v as f64))
            }
            Tok::Num(v) => {
                self.bump();
                Ok(RateExpr::Num(v))
            }
            Tok::Minus => {
                self.bump();
                let inner = self.factor()?;
                Ok(RateExpr::bin(BinOp::Sub, RateExpr::Num(0.0), inner))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "n" => {
                self.bump();
                Ok(RateExpr::N)
            }
            Tok::Ident(s) if s == "count_l" || s == "count_r" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let (a, _) = self.atom()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(if s == "count_l" {
                    RateExpr::CountL(a)
                } else {
                    RateExpr::CountR(a)
                })
            }
            Tok::Ident(s) => self.error(
                span,
                format!("unknown name `{s}` in rate expression (expected `n`, `count_l(..)` or `count_r(..)`)"),
            ),
            _ => self.unexpected("a rate expression"),
        }
    }

    /// Everything after the `rule` keyword.
    fn rule_body(&mut self, position: usize, span: Span) -> PResult<ParsedRule> {
        let id = match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(name), Tok::Colon) if !is_item_keyword(&name) => {
                self.bump();
                name
            }
            _ => position.to_string(),
        };
        self.expect(Tok::Colon, "`:` after the rule name")?;
        let wrap_sugar = matches!(self.peek(), Tok::Ident(s) if s == "wrap");
        if wrap_sugar {
            self.bump();
        }
        let lhs = self.open_term(TermMode::Rule)?;
        let arrow = match self.peek() {
            Tok::Arrow => Arrow::Full,
            Tok::DoubleArrow => Arrow::Sugared,
            _ => return self.unexpected("`->` or `=>`"),
        };
        self.bump();
        let rhs = self.open_term(TermMode::Rule)?;
        self.expect(Tok::At, "`@` followed by a rate")?;
        let rate = self.rate()?;
        Ok(ParsedRule {
            id,
            span,
            wrap_sugar,
            lhs,
            arrow,
            rhs,
            rate,
        })
    }

    fn observable(&mut self) -> PResult<(Observable, Span)> {
        let (name, span) = self.ident("an observable name")?;
        self.expect(Tok::Colon, "`:` after the observable name")?;
        let (atom, _) = self.atom()?;
        match self.peek() {
            Tok::Ident(s) if s == "in" => {
                self.bump();
            }
            _ => return self.unexpected("`in`"),
        }
        let scope = match self.peek().clone() {
            Tok::Ident(s) if s == "top" => {
                self.bump();
                Scope::Top
            }
            Tok::Ident(s) if s == "anywhere" => {
                self.bump();
                Scope::Anywhere
            }
            Tok::Ident(s) if s == "inside" => {
                self.bump();
                Scope::InsideWrapContaining(self.atom()?.0)
            }
            Tok::Ident(s) if s == "on-wrap" => {
                self.bump();
                match self.peek() {
                    Tok::Ident(s) if !is_item_keyword(s) => Scope::OnWrap(Some(self.atom()?.0)),
                    _ => Scope::OnWrap(None),
                }
            }
            _ => return self.unexpected("`top`, `anywhere`, `inside <atom>` or `on-wrap [<atom>]`"),
        };
        Ok((Observable { name, atom, scope }, span))
    }
}

fn to_ground(o: &OpenTerm) -> Term {
    Term::from_simples(o.0.iter().map(|s| match s {
        OpenSimple::Atom(a, _) => SimpleTerm::Atom(a.clone()),
        OpenSimple::Compartment(c, _) => {
            SimpleTerm::Compartment(Compartment::new(c.wrap_atoms.clone(), to_ground(&c.content)))
        }
        OpenSimple::Var(..) => unreachable!("checked ground"),
    }))
}

fn residue(name: &str, span: Span) -> OpenSimple {
    OpenSimple::Var(Var::term(name), span)
}

/// Applies the `=>` and `wrap` notations and validates the result.
fn desugar(p: ParsedRule) -> Result<Rule, Vec<Diagnostic>> {
    let ParsedRule {
        id,
        span,
        wrap_sugar,
        lhs,
        arrow,
        rhs,
        rate,
    } = p;
    let (lhs, rhs) = if wrap_sugar {
        let atoms_only = |o: &OpenTerm| {
            o.0.iter()
                .map(|s| match s {
                    OpenSimple::Atom(a, _) => Some(a.clone()),
                    _ => None,
                })
                .collect::<Option<AtomBag>>()
        };
        let (Some(before), Some(after)) = (atoms_only(&lhs), atoms_only(&rhs)) else {
            return Err(vec![Diagnostic::new(
                "malformed-pattern",
                span,
                format!("rule {id}: `wrap` rules rewrite atoms only"),
            )]);
        };
        if before.is_empty() {
            return Err(vec![Diagnostic::new(
                "malformed-pattern",
                span,
                format!("rule {id}: `wrap` rule needs at least one atom on the left"),
            )]);
        }
        let side = |atoms: AtomBag| {
            OpenTerm(vec![
                OpenSimple::Compartment(
                    OpenCompartment {
                        wrap_atoms: atoms,
                        wrap_vars: vec![(Var::wrap(WRAP_SUGAR_WRAP), span)],
                        content: OpenTerm(vec![residue(WRAP_SUGAR_CONTENT, span)]),
                    },
                    span,
                ),
                residue(WRAP_SUGAR_REST, span),
            ])
        };
        (side(before), side(after))
    } else {
        match arrow {
            Arrow::Full => (lhs, rhs),
            Arrow::Sugared => {
                let r = residue(SUGAR_RESIDUE, span);
                let mut l = lhs;
                let mut rr = rhs;
                l.0.push(r.clone());
                rr.0.push(r);
                (l, rr)
            }
        }
    };
    validate_rule(&id, &lhs, &rhs, rate)
        .map_err(|errs| errs.into_iter().map(|e| Diagnostic::from_pattern(&id, e)).collect())
}

fn finish<T>(p: &mut Parser, value: PResult<T>) -> Result<T, Vec<Diagnostic>> {
    match value {
        Ok(v) if *p.peek() == Tok::Eof && p.diags.is_empty() => Ok(v),
        Ok(_) if p.diags.is_empty() => {
            let span = p.span();
            let msg = format!("unexpected {}", p.peek().describe());
            Err(vec![Diagnostic::syntax(span, msg)])
        }
        _ => Err(std::mem::take(&mut p.diags)),
    }
}

/// Parses a ground term such as `a b (c d | e f)`; `*n` repetition allowed.
pub fn parse_term(src: &str) -> Result<Term, Vec<Diagnostic>> {
    let mut p = Parser::new(src)?;
    let t = p.ground_term();
    finish(&mut p, t)
}

/// Parses one side of a rule, without any sugar.
pub fn parse_open_term(src: &str) -> Result<OpenTerm, Vec<Diagnostic>> {
    let mut p = Parser::new(src)?;
    let t = p.open_term(TermMode::Rule);
    finish(&mut p, t)
}

/// Parses a single rule, either `rule name: lhs -> rhs @ rate` or just
/// `lhs -> rhs @ rate` (which gets the id `1`).
pub fn parse_rule(src: &str) -> Result<Rule, Vec<Diagnostic>> {
    let mut p = Parser::new(src)?;
    let span = p.span();
    let parsed = match p.peek() {
        Tok::Ident(s) if s == "rule" => {
            p.bump();
            p.rule_body(1, span)
        }
        _ => {
            // Bare form: supply the default id and reuse the rule grammar.
            p.toks.insert(
                p.pos,
                Token {
                    tok: Tok::Colon,
                    span,
                },
            );
            p.rule_body(1, span)
        }
    };
    let parsed = finish(&mut p, parsed)?;
    desugar(parsed)
}

/// Parses and validates a whole model file. On failure, every diagnostic
/// found is returned, ordered by position.
pub fn parse_model(src: &str) -> Result<ModelFile, Vec<Diagnostic>> {
    let mut p = Parser::new(src)?;
    let mut init: Option<Term> = None;
    let mut rules: Vec<Rule> = Vec::new();
    let mut rule_ids = BTreeSet::new();
    let mut observables: Vec<Observable> = Vec::new();
    let mut directives = Directives::default();
    let mut rule_position = 0usize;

    while *p.peek() != Tok::Eof {
        let start = p.span();
        let keyword = match p.peek().clone() {
            Tok::Ident(s) if is_item_keyword(&s) => s,
            _ => {
                let _ = p.unexpected::<()>("`init`, `rule`, `observe` or a directive");
                p.recover();
                continue;
            }
        };
        p.bump();
        let outcome: PResult<()> = match keyword.as_str() {
            "init" => p.ground_term().map(|t| {
                if init.is_some() {
                    p.diags
                        .push(Diagnostic::new("duplicate-init", start, "more than one `init` item"));
                } else {
                    init = Some(t);
                }
            }),
            "rule" => {
                rule_position += 1;
                p.rule_body(rule_position, start).map(|parsed| {
                    let id = parsed.id.clone();
                    match desugar(parsed) {
                        Ok(rule) => {
                            if !rule_ids.insert(id.clone()) {
                                p.diags.push(Diagnostic::new(
                                    "duplicate-rule",
                                    start,
                                    format!("rule id `{id}` is used more than once"),
                                ));
                            }
                            rules.push(rule);
                        }
                        Err(d) => p.diags.extend(d),
                    }
                })
            }
            "observe" => p.observable().map(|(obs, span)| {
                if observables.iter().any(|o| o.name == obs.name) {
                    p.diags.push(Diagnostic::new(
                        "duplicate-observable",
                        span,
                        format!("observable `{}` is declared more than once", obs.name),
                    ));
                } else {
                    observables.push(obs);
                }
            }),
            "tmax" | "sample" => p.number("a positive number").and_then(|(v, span)| {
                if !(v.is_finite() && v > 0.0) {
                    return p.error(span, format!("`{keyword}` must be a positive finite number"));
                }
                if keyword == "tmax" {
                    directives.tmax = Some(v);
                } else {
                    directives.sample = Some(v);
                }
                Ok(())
            }),
            "seed" => p.integer("an unsigned integer seed").map(|(v, _)| {
                directives.seed = Some(v);
            }),
            "maxevents" => p.integer("an event count").map(|(v, _)| {
                directives.max_events = Some(v);
            }),
            "replicates" => p.integer("a replicate count").and_then(|(v, span)| {
                if v == 0 {
                    return p.error(span, "`replicates` must be at least 1");
                }
                directives.replicates = Some(v as usize);
                Ok(())
            }),
            _ => unreachable!("keyword list"),
        };
        if outcome.is_err() || !p.at_item_start() {
            if outcome.is_ok() {
                let _ = p.unexpected::<()>("the start of a new item");
            }
            p.recover();
        }
    }

    if init.is_none() {
        p.diags.push(Diagnostic::new(
            "missing-init",
            Span::new(1, 1),
            "model has no `init` item",
        ));
    }
    if !p.diags.is_empty() {
        let mut d = p.diags;
        d.sort_by_key(|d| d.span);
        return Err(d);
    }
    Ok(ModelFile {
        init: init.expect("checked above"),
        rules,
        observables,
        directives,
    })
}
