//! Expression language for the prescribed function `F` on R^{n+1}.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := base ('^' unary)?           right-associative
//! base   := number | ident | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Identifiers are `x1`, `x2`, `x3` (ambient coordinates) and `r` (`|X|`);
//! functions are `sqrt`, `exp`, `log`, `abs`, `min`, `max`.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Var {
    X1,
    X2,
    X3,
    R,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::X3 => "x3",
            Var::R => "r",
        }
    }

    /// Coordinate index for `x1..x3`.
    pub fn coordinate(self) -> Option<usize> {
        match self {
            Var::X1 => Some(0),
            Var::X2 => Some(1),
            Var::X3 => Some(2),
            Var::R => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "min" => Func::Min,
            "max" => Func::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn variadic(self) -> bool {
        matches!(self, Func::Min | Func::Max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected {found}, expected {expected}")]
    UnexpectedToken { found: String, expected: &'static str },
    #[error("unexpected end of input, expected {0}")]
    UnexpectedEnd(&'static str),
    #[error("malformed number '{0}'")]
    BadNumber(String),
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("{func} takes {expected} argument(s), got {got}")]
    Arity {
        func: &'static str,
        expected: &'static str,
        got: usize,
    },
}

/// Syntax error with the 0-based character offset where it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at position {position}: {kind}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Op(c) => format!("'{c}'"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // Exponent: 'e' followed by digits, optionally signed.
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lexeme: String = chars[start..i].iter().collect();
            let value = lexeme.parse::<f64>().map_err(|_| ParseError {
                position: start,
                kind: ParseErrorKind::BadNumber(lexeme.clone()),
            })?;
            toks.push((start, Tok::Num(value)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            toks.push((start, Tok::Ident(chars[start..i].iter().collect())));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::UnexpectedChar(other),
                })
            }
        };
        toks.push((start, tok));
        i += 1;
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error(&self, expected: &'static str) -> ParseError {
        let kind = match self.peek() {
            Some(t) => ParseErrorKind::UnexpectedToken {
                found: t.describe(),
                expected,
            },
            None => ParseErrorKind::UnexpectedEnd(expected),
        };
        ParseError {
            position: self.offset(),
            kind,
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(Tok::LParen) = self.peek() {
                    let func = Func::from_name(&name).ok_or(ParseError {
                        position: start,
                        kind: ParseErrorKind::UnknownFunction(name.clone()),
                    })?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while let Some(Tok::Comma) = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect_rparen()?;
                    let ok = if func.variadic() { args.len() >= 2 } else { args.len() == 1 };
                    if !ok {
                        return Err(ParseError {
                            position: start,
                            kind: ParseErrorKind::Arity {
                                func: func.name(),
                                expected: if func.variadic() { "at least 2" } else { "1" },
                                got: args.len(),
                            },
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                let var = match name.as_str() {
                    "x1" => Var::X1,
                    "x2" => Var::X2,
                    "x3" => Var::X3,
                    "r" => Var::R,
                    _ => {
                        return Err(ParseError {
                            position: start,
                            kind: ParseErrorKind::UnknownIdentifier(name),
                        })
                    }
                };
                Ok(Expr::Var(var))
            }
            _ => Err(self.error("a number, identifier or '('")),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error("')'")),
        }
    }
}

/// Parses an expression in the curvature-function language.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(ParseError {
            position: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        end: text.chars().count(),
    };
    let expr = parser.expr()?;
    if parser.pos < parser.toks.len() {
        return Err(parser.error("an operator or end of input"));
    }
    Ok(expr)
}

/// Evaluation failure, located at the offending ambient point.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{what} at point {point:?}")]
pub struct EvalError {
    pub what: String,
    pub point: Vec<f64>,
}

impl Expr {
    /// Evaluates at an ambient point; `r` is its Euclidean norm.
    pub fn evaluate(&self, point: &[f64]) -> Result<f64, EvalError> {
        let r = point.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.eval_at(point, r).map_err(|what| EvalError {
            what,
            point: point.to_vec(),
        })
    }

    fn eval_at(&self, p: &[f64], r: f64) -> Result<f64, String> {
        let checked = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("{what} produced a non-finite value"))
            }
        };
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Var(Var::R) => Ok(r),
            Expr::Var(var) => {
                let k = var.coordinate().unwrap();
                p.get(k)
                    .copied()
                    .ok_or_else(|| format!("{} is not a coordinate of R^{}", var.name(), p.len()))
            }
            Expr::Neg(e) => Ok(-e.eval_at(p, r)?),
            Expr::Binary(op, a, b) => {
                let a = a.eval_at(p, r)?;
                let b = b.eval_at(p, r)?;
                match op {
                    BinOp::Add => checked(a + b, "addition"),
                    BinOp::Sub => checked(a - b, "subtraction"),
                    BinOp::Mul => checked(a * b, "multiplication"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err("division by zero".into())
                        } else {
                            checked(a / b, "division")
                        }
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            Err(format!("negative base {a} raised to non-integer power {b}"))
                        } else if a == 0.0 && b < 0.0 {
                            Err("zero raised to a negative power".into())
                        } else {
                            checked(a.powf(b), "power")
                        }
                    }
                }
            }
            Expr::Call(func, args) => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(a.eval_at(p, r)?);
                }
                let x = vals[0];
                match func {
                    Func::Sqrt if x < 0.0 => Err(format!("sqrt of negative value {x}")),
                    Func::Sqrt => Ok(x.sqrt()),
                    Func::Log if x <= 0.0 => Err(format!("log of non-positive value {x}")),
                    Func::Log => Ok(x.ln()),
                    Func::Exp => checked(x.exp(), "exp"),
                    Func::Abs => Ok(x.abs()),
                    Func::Min => Ok(vals.iter().copied().fold(f64::INFINITY, f64::min)),
                    Func::Max => Ok(vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                }
            }
        }
    }

    /// Every variable mentioned by the expression.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(v) => {
                if !out.contains(v) {
                    out.push(*v)
                }
            }
            Expr::Neg(e) => e.collect_vars(out),
            Expr::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

/// Fully parenthesized rendering that reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}
