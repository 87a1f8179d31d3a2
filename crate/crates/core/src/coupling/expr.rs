//! Coefficient expressions.
//!
//! Grammar (whitespace insensitive):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary ('*' unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | 'pi' | 'x<l>' | 'sin_t' | 'cos_t'
//!         | 'sin_x<l>' | 'cos_x<l>' | '(' expr ')'
//! ```
//!
//! `sin_t` is `sin(2 pi t / T)`, `sin_x<l>` is `sin(2 pi x_l / p_l)`, and
//! `x<l>` is the `l`-th coordinate (1-based).

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    SinT,
    CosT,
    SinX(usize),
    CosX(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Precomputed basis values at one `(t, x)` sample.
#[derive(Debug, Clone)]
pub struct BasisPoint {
    pub x: Vec<f64>,
    pub sin_t: f64,
    pub cos_t: f64,
    pub sin_x: Vec<f64>,
    pub cos_x: Vec<f64>,
}

impl BasisPoint {
    /// `phase_t` is `2 pi t / T`; `phase_x[l]` is `2 pi x_l / p_l`.
    pub fn new(x: &[f64], phase_t: f64, phase_x: &[f64]) -> Self {
        let (sin_t, cos_t) = phase_t.sin_cos();
        BasisPoint {
            x: x.to_vec(),
            sin_t,
            cos_t,
            sin_x: phase_x.iter().map(|p| p.sin()).collect(),
            cos_x: phase_x.iter().map(|p| p.cos()).collect(),
        }
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if let Some(tok) = p.tokens.get(p.pos) {
            return Err(Error::Expression {
                column: tok.column,
                message: format!("unexpected `{}`", tok.text),
            });
        }
        Ok(e)
    }

    pub fn eval(&self, at: &BasisPoint) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(l) => at.x[*l],
            Expr::SinT => at.sin_t,
            Expr::CosT => at.cos_t,
            Expr::SinX(l) => at.sin_x[*l],
            Expr::CosX(l) => at.cos_x[*l],
            Expr::Neg(e) => -e.eval(at),
            Expr::Add(a, b) => a.eval(at) + b.eval(at),
            Expr::Sub(a, b) => a.eval(at) - b.eval(at),
            Expr::Mul(a, b) => a.eval(at) * b.eval(at),
            Expr::Pow(e, n) => e.eval(at).powi(*n as i32),
        }
    }

    pub fn depends_on_time(&self) -> bool {
        match self {
            Expr::SinT | Expr::CosT => true,
            Expr::Const(_) | Expr::Coord(_) | Expr::SinX(_) | Expr::CosX(_) => false,
            Expr::Neg(e) | Expr::Pow(e, _) => e.depends_on_time(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.depends_on_time() || b.depends_on_time(),
        }
    }

    /// Largest coordinate index referenced, if any (0-based).
    pub fn max_axis(&self) -> Option<usize> {
        match self {
            Expr::Coord(l) | Expr::SinX(l) | Expr::CosX(l) => Some(*l),
            Expr::Const(_) | Expr::SinT | Expr::CosT => None,
            Expr::Neg(e) | Expr::Pow(e, _) => e.max_axis(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.max_axis().max(b.max_axis()),
        }
    }

    /// Value if the expression has no free variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.depends_on_time() || self.max_axis().is_some() {
            return None;
        }
        Some(self.eval(&BasisPoint::new(&[], 0.0, &[])))
    }
}

#[derive(Debug, Clone)]
struct Token {
    text: String,
    column: usize,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if "+-*^()".contains(c) {
            tokens.push(Token {
                text: c.to_string(),
                column,
            });
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                column,
            });
        } else {
            return Err(Error::Expression {
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&str> {
        self.tokens.get(self.pos).map(|t| t.text.as_str())
    }

    fn column(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or(self.tokens.last())
            .map_or(1, |t| t.column)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            column: self.column(),
            message: message.into(),
        })
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.peek() {
            let op = op.to_string();
            if op != "+" && op != "-" {
                break;
            }
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if op == "+" {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while self.peek() == Some("*") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some("-") {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some("^") {
            self.pos += 1;
            let Some(tok) = self.tokens.get(self.pos) else {
                return self.fail("expected an integer exponent");
            };
            let Ok(n) = tok.text.parse::<u32>() else {
                return self.fail(format!("exponent `{}` is not a nonnegative integer", tok.text));
            };
            self.pos += 1;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return self.fail("unexpected end of expression");
        };
        self.pos += 1;
        let text = tok.text.as_str();
        if text == "(" {
            let e = self.expr()?;
            if self.peek() != Some(")") {
                return self.fail("expected `)`");
            }
            self.pos += 1;
            return Ok(e);
        }
        if text.starts_with(|c: char| c.is_ascii_digit() || c == '.') {
            return text.parse::<f64>().map(Expr::Const).or_else(|_| {
                Err(Error::Expression {
                    column: tok.column,
                    message: format!("bad number `{text}`"),
                })
            });
        }
        let axis = |prefix: &str| -> Option<usize> {
            text.strip_prefix(prefix)
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&l| l >= 1)
                .map(|l| l - 1)
        };
        let e = match text {
            "pi" => Expr::Const(PI),
            "sin_t" => Expr::SinT,
            "cos_t" => Expr::CosT,
            _ => {
                if let Some(l) = axis("sin_x") {
                    Expr::SinX(l)
                } else if let Some(l) = axis("cos_x") {
                    Expr::CosX(l)
                } else if let Some(l) = axis("x") {
                    Expr::Coord(l)
                } else {
                    return Err(Error::Expression {
                        column: tok.column,
                        message: format!("unknown symbol `{text}`"),
                    });
                }
            }
        };
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(x: &[f64], t_phase: f64) -> BasisPoint {
        let px: Vec<f64> = x.iter().map(|v| 2.0 * PI * v).collect();
        BasisPoint::new(x, t_phase, &px)
    }

    #[test]
    fn precedence_and_powers() {
        let e = Expr::parse("1 + 2*x1^2 - -3").unwrap();
        assert_eq!(e.eval(&at(&[0.5], 0.0)), 1.0 + 0.5 + 3.0);
        let e = Expr::parse("-(x1 + 1)^2").unwrap();
        assert_eq!(e.eval(&at(&[1.0], 0.0)), -4.0);
        let e = Expr::parse("2e-1*x2").unwrap();
        assert!((e.eval(&at(&[0.0, 5.0], 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trig_basis() {
        let e = Expr::parse("sin_t + cos_x1").unwrap();
        let v = e.eval(&at(&[0.25], PI / 2.0));
        assert!((v - 1.0).abs() < 1e-15);
        assert!(e.depends_on_time());
        assert_eq!(e.max_axis(), Some(0));
        assert!(!Expr::parse("x3 * cos_x2").unwrap().depends_on_time());
        assert_eq!(Expr::parse("x3 * cos_x2").unwrap().max_axis(), Some(2));
    }

    #[test]
    fn constants_fold() {
        assert_eq!(Expr::parse("2*pi").unwrap().constant_value(), Some(2.0 * PI));
        assert_eq!(Expr::parse("x1").unwrap().constant_value(), None);
    }

    #[test]
    fn errors_carry_columns() {
        match Expr::parse("1 + y") {
            Err(Error::Expression { column, .. }) => assert_eq!(column, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("x1^1.5").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("3 $").is_err());
    }
}
