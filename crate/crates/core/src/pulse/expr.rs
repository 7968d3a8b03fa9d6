//! Arithmetic expressions used for pulse angles, phases and delays.
//!
//! Grammar (usual precedence, left associative):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | primary
//! primary := number | 'pi' | 'J' digit digit | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'sqrt'
//! ```
//!
//! `Jab` names the scalar coupling between spins `a` and `b` (1-based) in Hz
//! and is resolved against a spin system at evaluation time.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::nmr::SpinSystem;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    /// 0-based spin indices.
    Coupling(usize, usize),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Bin('+' | '-', ..) => 1,
        Expr::Bin(..) => 2,
        Expr::Neg(_) => 3,
        _ => 4,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Pi => write!(f, "pi"),
            Expr::Coupling(a, b) => write!(f, "J{}{}", a + 1, b + 1),
            Expr::Neg(inner) => {
                if precedence(inner) < 3 {
                    write!(f, "-({inner})")
                } else {
                    write!(f, "-{inner}")
                }
            }
            Expr::Bin(op, l, r) => {
                let p = precedence(self);
                if precedence(l) < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, "{op}")?;
                // right operand of a left-associative operator needs parens at equal precedence
                if precedence(r) <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::Call(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}

impl Expr {
    pub fn eval(&self, sys: Option<&SpinSystem>) -> std::result::Result<f64, String> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Pi => PI,
            Expr::Coupling(a, b) => {
                let sys =
                    sys.ok_or_else(|| "coupling constant used without a spin system".to_string())?;
                if *a >= sys.n || *b >= sys.n || a == b {
                    return Err(format!("unknown spin label in J{}{}", a + 1, b + 1));
                }
                sys.coupling(*a, *b)
            }
            Expr::Neg(e) => -e.eval(sys)?,
            Expr::Bin(op, l, r) => {
                let (l, r) = (l.eval(sys)?, r.eval(sys)?);
                match op {
                    '+' => l + r,
                    '-' => l - r,
                    '*' => l * r,
                    '/' => l / r,
                    _ => unreachable!("parser only builds + - * /"),
                }
            }
            Expr::Call(func, e) => {
                let v = e.eval(sys)?;
                match func {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
        })
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

type PResult<T> = std::result::Result<T, (usize, String)>;

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        while let Some(op @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op as char, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.pos;
        match self.peek() {
            None => Err((self.pos, "unexpected end of expression".into())),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(ch) if ch.is_ascii_digit() || ch == b'.' => self.number(),
            Some(ch) if ch.is_ascii_alphabetic() => {
                let begin = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[begin..self.pos]).expect("ascii");
                let func = match word {
                    "pi" => return Ok(Expr::Pi),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "sqrt" => Func::Sqrt,
                    w if w.len() == 3 && w.starts_with('J') => {
                        let d: Vec<u32> = w[1..].chars().filter_map(|ch| ch.to_digit(10)).collect();
                        if d.len() == 2 && d[0] >= 1 && d[1] >= 1 && d[0] != d[1] {
                            let (a, b) = ((d[0] - 1) as usize, (d[1] - 1) as usize);
                            return Ok(Expr::Coupling(a.min(b), a.max(b)));
                        }
                        return Err((begin, format!("unknown spin label in `{w}`")));
                    }
                    w => return Err((begin, format!("unknown identifier `{w}`"))),
                };
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(ch) => Err((start, format!("unexpected character `{}`", ch as char))),
        }
    }

    fn number(&mut self) -> PResult<Expr> {
        let begin = self.pos;
        let s = self.src;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mut look = self.pos + 1;
            if look < s.len() && (s[look] == b'+' || s[look] == b'-') {
                look += 1;
            }
            if look < s.len() && s[look].is_ascii_digit() {
                self.pos = look;
                while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&s[begin..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| (begin, format!("invalid number `{text}`")))
    }

    fn expect(&mut self, ch: u8) -> PResult<()> {
        if self.peek() == Some(ch) {
            self.pos += 1;
            Ok(())
        } else {
            Err((self.pos, format!("expected `{}`", ch as char)))
        }
    }
}

/// Parses a complete expression. Errors carry the 0-based byte offset.
pub(crate) fn parse_expr_at(text: &str) -> std::result::Result<Expr, (usize, String)> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return Err((p.pos, "trailing input after expression".into()));
    }
    Ok(e)
}

pub fn parse_expr(text: &str) -> Result<Expr> {
    parse_expr_at(text).map_err(|(off, message)| Error::Syntax {
        line: 1,
        column: off + 1,
        message,
    })
}

/// Parses and evaluates `text`, resolving couplings against `sys`.
pub fn eval_expr(text: &str, sys: Option<&SpinSystem>) -> Result<f64> {
    parse_expr(text)?
        .eval(sys)
        .map_err(|message| Error::Syntax {
            line: 1,
            column: 1,
            message,
        })
}
