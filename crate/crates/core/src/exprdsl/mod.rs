//! A small arithmetic language for writing loss functions in problem files.
//!
//! ```text
//! expr   := "if" cond "then" expr "else" expr | sum
//! sum    := prod (("+" | "-") prod)*
//! prod   := unary (("*" | "/") unary)*
//! unary  := "-" unary | power
//! power  := atom ("^" INT)*
//! atom   := NUMBER | xK | func "(" expr ("," expr)* ")" | "(" expr ")"
//! cond   := "tag(" xK ")" "==" ("Q" | "I") | xK "==" ["-"] NUMBER
//! ```
//!
//! Variables are `x1..xn`. Tags mark a coordinate as rational (`Q`) or
//! irrational (`I`); they are metadata carried next to the float value and
//! only consulted by `tag(..)` conditions. `xK == c` compares bitwise.

mod parser;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Q,
    I,
}

impl Tag {
    pub fn flip(self) -> Tag {
        match self {
            Tag::Q => Tag::I,
            Tag::I => Tag::Q,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Q => "Q",
            Tag::I => "I",
        })
    }
}

/// A float together with a declared rationality tag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggedReal {
    pub value: f64,
    pub tag: Tag,
}

impl TaggedReal {
    pub fn new(value: f64, tag: Tag) -> Self {
        TaggedReal { value, tag }
    }

    pub fn q(value: f64) -> Self {
        TaggedReal { value, tag: Tag::Q }
    }

    pub fn i(value: f64) -> Self {
        TaggedReal { value, tag: Tag::I }
    }
}

/// Tags every coordinate `Q`: plain floats are exact rationals.
pub fn untagged(x: &[f64]) -> Vec<TaggedReal> {
    x.iter().map(|&v| TaggedReal::q(v)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Abs,
    Sqrt,
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    Tag { var: usize, tag: Tag },
    Equals { var: usize, value: f64 },
}

/// Expression tree. Variable indices are zero-based.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Vec<Expr>),
    If {
        cond: Cond,
        then: Box<Expr>,
        els: Box<Expr>,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero in '{0}'")]
    DivisionByZero(String),
    #[error("square root of negative value in '{0}'")]
    SqrtOfNegative(String),
    #[error("expected {expected} coordinates, got {found}")]
    Dimension { expected: usize, found: usize },
    #[error("non-finite value in '{0}'")]
    NonFinite(String),
}

/// Parses `src` over variables `x1..xn`.
pub fn parse(src: &str, n: usize) -> Result<Expr, ParseError> {
    parser::parse(src, n)
}

impl Expr {
    /// Highest variable index referenced, plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(e) | Expr::Pow(e, _) => e.arity(),
            Expr::Bin(_, a, b) => a.arity().max(b.arity()),
            Expr::Call(_, args) => args.iter().map(Expr::arity).max().unwrap_or(0),
            Expr::If { cond, then, els } => {
                let c = match cond {
                    Cond::Tag { var, .. } | Cond::Equals { var, .. } => var + 1,
                };
                c.max(then.arity()).max(els.arity())
            }
        }
    }

    pub fn has_tag_condition(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Var(_) => false,
            Expr::Neg(e) | Expr::Pow(e, _) => e.has_tag_condition(),
            Expr::Bin(_, a, b) => a.has_tag_condition() || b.has_tag_condition(),
            Expr::Call(_, args) => args.iter().any(Expr::has_tag_condition),
            Expr::If { cond, then, els } => {
                matches!(cond, Cond::Tag { .. }) || then.has_tag_condition() || els.has_tag_condition()
            }
        }
    }

    pub fn evaluate(&self, x: &[TaggedReal]) -> Result<f64, EvalError> {
        let v = self.eval_rec(x)?;
        if !v.is_finite() {
            return Err(EvalError::NonFinite(self.to_string()));
        }
        Ok(v)
    }

    /// Evaluation with every coordinate tagged `Q`.
    pub fn evaluate_plain(&self, x: &[f64]) -> Result<f64, EvalError> {
        self.evaluate(&untagged(x))
    }

    fn eval_rec(&self, x: &[TaggedReal]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => match x.get(*i) {
                Some(t) => t.value,
                None => {
                    return Err(EvalError::Dimension {
                        expected: i + 1,
                        found: x.len(),
                    })
                }
            },
            Expr::Neg(e) => -e.eval_rec(x)?,
            Expr::Bin(op, a, b) => {
                let (u, v) = (a.eval_rec(x)?, b.eval_rec(x)?);
                match op {
                    BinOp::Add => u + v,
                    BinOp::Sub => u - v,
                    BinOp::Mul => u * v,
                    BinOp::Div => {
                        if v == 0.0 {
                            return Err(EvalError::DivisionByZero(self.to_string()));
                        }
                        u / v
                    }
                }
            }
            Expr::Pow(e, k) => e.eval_rec(x)?.powi(*k as i32),
            Expr::Call(f, args) => match f {
                Func::Abs => args[0].eval_rec(x)?.abs(),
                Func::Sqrt => {
                    let v = args[0].eval_rec(x)?;
                    if v < 0.0 {
                        return Err(EvalError::SqrtOfNegative(self.to_string()));
                    }
                    v.sqrt()
                }
                Func::Min | Func::Max => {
                    let mut acc = args[0].eval_rec(x)?;
                    for a in &args[1..] {
                        let v = a.eval_rec(x)?;
                        acc = if *f == Func::Min { acc.min(v) } else { acc.max(v) };
                    }
                    acc
                }
            },
            Expr::If { cond, then, els } => {
                let hit = match cond {
                    Cond::Tag { var, tag } => {
                        let t = x.get(*var).ok_or(EvalError::Dimension {
                            expected: var + 1,
                            found: x.len(),
                        })?;
                        t.tag == *tag
                    }
                    Cond::Equals { var, value } => {
                        let t = x.get(*var).ok_or(EvalError::Dimension {
                            expected: var + 1,
                            found: x.len(),
                        })?;
                        t.value.to_bits() == value.to_bits() || (t.value == 0.0 && *value == 0.0)
                    }
                };
                if hit {
                    then.eval_rec(x)?
                } else {
                    els.eval_rec(x)?
                }
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::If { .. } => 0,
            Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => 3,
            _ => 5,
        }
    }
}

/// Central-difference gradient with per-coordinate step `h * (1 + |x_i|)`.
/// Also reports whether the one-sided differences disagree by more than
/// `nonsmooth_tol` (relative to the slope magnitude) in any coordinate.
pub fn finite_diff_gradient(e: &Expr, x: &[f64], h: f64, nonsmooth_tol: f64) -> Result<(Vec<f64>, bool), EvalError> {
    finite_diff_with(|p| e.evaluate_plain(p), x, h, nonsmooth_tol)
}

pub(crate) fn finite_diff_with<F>(f: F, x: &[f64], h: f64, nonsmooth_tol: f64) -> Result<(Vec<f64>, bool), EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let f0 = f(x)?;
    let mut g = Vec::with_capacity(x.len());
    let mut nonsmooth = false;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        let step = h * (1.0 + x[i].abs());
        p[i] = x[i] + step;
        let fp = f(&p)?;
        p[i] = x[i] - step;
        let fm = f(&p)?;
        p[i] = x[i];
        let fwd = (fp - f0) / step;
        let bwd = (f0 - fm) / step;
        if (fwd - bwd).abs() > nonsmooth_tol * (1.0 + 0.5 * (fwd.abs() + bwd.abs())) {
            nonsmooth = true;
        }
        g.push((fp - fm) / (2.0 * step));
    }
    Ok((g, nonsmooth))
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Tag { var, tag } => write!(f, "tag(x{}) == {}", var + 1, tag),
            Cond::Equals { var, value } => write!(f, "x{} == {:?}", var + 1, value),
        }
    }
}

impl Expr {
    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_operand(f, e.precedence() < 3)
            }
            Expr::Bin(op, a, b) => {
                let p = self.precedence();
                a.fmt_operand(f, a.precedence() < p)?;
                f.write_str(match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => " * ",
                    BinOp::Div => " / ",
                })?;
                b.fmt_operand(f, b.precedence() <= p)
            }
            Expr::Pow(e, k) => {
                e.fmt_operand(f, e.precedence() < 5)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, args) => {
                f.write_str(match func {
                    Func::Abs => "abs(",
                    Func::Sqrt => "sqrt(",
                    Func::Min => "min(",
                    Func::Max => "max(",
                })?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::If { cond, then, els } => write!(f, "if {cond} then {then} else {els}"),
        }
    }
}
