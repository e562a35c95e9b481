//! Rate specifications and their evaluation into propensities.

use std::fmt;

use thiserror::Error;

use crate::term::{Atom, Scope, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

/// Arithmetic over the match count `n` and top-level atom counts of the
/// matched content (`count_l`) and of the outcome (`count_r`).
#[derive(Debug, Clone, PartialEq)]
pub enum RateExpr {
    Num(f64),
    N,
    CountL(Atom),
    CountR(Atom),
    Bin(BinOp, Box<RateExpr>, Box<RateExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateSpec {
    /// `k * n`
    MassAction(f64),
    Fn(RateExpr),
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RateError {
    #[error("rate evaluated to a non-finite value")]
    NonFinite,
    #[error("rate evaluated to a negative value ({0})")]
    Negative(f64),
    #[error("division by zero in rate expression")]
    DivisionByZero,
}

impl RateExpr {
    pub fn bin(op: BinOp, l: RateExpr, r: RateExpr) -> RateExpr {
        RateExpr::Bin(op, Box::new(l), Box::new(r))
    }

    pub fn eval(&self, matched: &Term, outcome: &Term, n: u64) -> Result<f64, RateError> {
        Ok(match self {
            RateExpr::Num(v) => *v,
            RateExpr::N => n as f64,
            RateExpr::CountL(a) => matched.count_atom(a, &Scope::Top) as f64,
            RateExpr::CountR(a) => outcome.count_atom(a, &Scope::Top) as f64,
            RateExpr::Bin(op, l, r) => {
                let l = l.eval(matched, outcome, n)?;
                let r = r.eval(matched, outcome, n)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(RateError::DivisionByZero);
                        }
                        l / r
                    }
                }
            }
        })
    }
}

/// Propensity of one (context, outcome) pair whose outcome is produced by `n`
/// labeled instantiations.
pub fn rate_of(spec: &RateSpec, matched: &Term, outcome: &Term, n: u64) -> Result<f64, RateError> {
    let value = match spec {
        RateSpec::MassAction(k) => k * n as f64,
        RateSpec::Fn(expr) => expr.eval(matched, outcome, n)?,
    };
    if !value.is_finite() {
        Err(RateError::NonFinite)
    } else if value < 0.0 {
        Err(RateError::Negative(value))
    } else {
        Ok(value)
    }
}

impl fmt::Display for RateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateExpr::Num(v) => write!(f, "{v}"),
            RateExpr::N => f.write_str("n"),
            RateExpr::CountL(a) => write!(f, "count_l({a})"),
            RateExpr::CountR(a) => write!(f, "count_r({a})"),
            RateExpr::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

impl fmt::Display for RateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateSpec::MassAction(k) => write!(f, "{k}"),
            RateSpec::Fn(e) => write!(f, "fn({e})"),
        }
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
