//! A small arithmetic expression language for user-supplied Hamiltonians and
//! solution branches.
//!
//! Grammar (usual precedence, `^` right-associative and binding tighter than
//! unary minus):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | var | func '(' expr ')' | '(' expr ')'
//! var   := x1 | x2 | p1 | p2
//! func  := sin | cos | exp
//! ```
//!
//! Expressions are differentiated symbolically, so fields and Hamiltonians
//! built from them get exact derivatives.

use std::fmt;

use crate::error::{Error, Result};

/// Variables an expression may reference.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X1,
    X2,
    P1,
    P2,
}

impl Var {
    fn index(self) -> usize {
        match self {
            Var::X1 => 0,
            Var::X2 => 1,
            Var::P1 => 2,
            Var::P2 => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Var::X1 => "x1",
            Var::X2 => "x2",
            Var::P1 => "p1",
            Var::P2 => "p2",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    /// Only produced by differentiation of non-constant exponents.
    Ln(Box<Expr>),
}

impl Expr {
    /// Parse an expression that may use any of x1, x2, p1, p2.
    pub fn parse(src: &str) -> Result<Expr> {
        Self::parse_with(src, &[Var::X1, Var::X2, Var::P1, Var::P2])
    }

    /// Parse, rejecting variables outside `allowed`.
    pub fn parse_with(src: &str, allowed: &[Var]) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            allowed,
        };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Expression(format!(
                "unexpected token {:?} at position {}",
                p.tokens[p.pos].0, p.tokens[p.pos].1
            )));
        }
        Ok(e)
    }

    /// Evaluate with variable values ordered (x1, x2, p1, p2).
    pub fn eval(&self, v: &[f64; 4]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::Var(var) => v[var.index()],
            Expr::Neg(a) => -a.eval(v),
            Expr::Add(a, b) => a.eval(v) + b.eval(v),
            Expr::Sub(a, b) => a.eval(v) - b.eval(v),
            Expr::Mul(a, b) => a.eval(v) * b.eval(v),
            Expr::Div(a, b) => a.eval(v) / b.eval(v),
            Expr::Pow(a, b) => {
                let base = a.eval(v);
                match **b {
                    Expr::Num(c) if c.fract() == 0.0 && c.abs() <= 64.0 => base.powi(c as i32),
                    _ => base.powf(b.eval(v)),
                }
            }
            Expr::Sin(a) => a.eval(v).sin(),
            Expr::Cos(a) => a.eval(v).cos(),
            Expr::Exp(a) => a.eval(v).exp(),
            Expr::Ln(a) => a.eval(v).ln(),
        }
    }

    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(v) => *v == var,
            Expr::Neg(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Ln(a) => a.uses(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.uses(var) || b.uses(var)
            }
        }
    }

    /// Symbolic partial derivative.
    pub fn derivative(&self, var: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) => Num(0.0),
            Var(v) => Num(if *v == var { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.derivative(var)),
            Add(a, b) => add(a.derivative(var), b.derivative(var)),
            Sub(a, b) => sub(a.derivative(var), b.derivative(var)),
            Mul(a, b) => add(
                mul(a.derivative(var), (**b).clone()),
                mul((**a).clone(), b.derivative(var)),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.derivative(var), (**b).clone()),
                    mul((**a).clone(), b.derivative(var)),
                ),
                pow((**b).clone(), Num(2.0)),
            ),
            Pow(a, b) => {
                if !b.uses(var) {
                    // d(a^b) = b a^(b-1) a'
                    let exp_minus_one = match **b {
                        Num(c) => Num(c - 1.0),
                        _ => sub((**b).clone(), Num(1.0)),
                    };
                    mul(mul((**b).clone(), pow((**a).clone(), exp_minus_one)), a.derivative(var))
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    mul(
                        self.clone(),
                        add(
                            mul(b.derivative(var), Ln(a.clone())),
                            div(mul((**b).clone(), a.derivative(var)), (**a).clone()),
                        ),
                    )
                }
            }
            Sin(a) => mul(Cos(a.clone()), a.derivative(var)),
            Cos(a) => neg(mul(Sin(a.clone()), a.derivative(var))),
            Exp(a) => mul(self.clone(), a.derivative(var)),
            Ln(a) => div(a.derivative(var), (**a).clone()),
        }
    }
}

fn is_num(e: &Expr, c: f64) -> bool {
    matches!(e, Expr::Num(v) if *v == c)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(c) => Expr::Num(-c),
        Expr::Neg(inner) => *inner,
        a => Expr::Neg(Box::new(a)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        (a, b) if is_num(&a, 0.0) => b,
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        (a, b) if is_num(&b, 0.0) => a,
        (a, b) if is_num(&a, 0.0) => neg(b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        (a, b) if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&a, 1.0) => b,
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (a, _) if is_num(&a, 0.0) => Expr::Num(0.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, b) if is_num(&b, 0.0) => Expr::Num(1.0),
        (a, b) if is_num(&b, 1.0) => a,
        (a, b) => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{c}"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Ln(a) => write!(f, "ln({a})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part, e.g. 1e-3
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
            let text: String = chars[start..i].iter().collect();
            let v = text
                .parse::<f64>()
                .map_err(|_| Error::Expression(format!("bad number `{text}` at position {start}")))?;
            out.push((Tok::Num(v), start));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start));
        } else if "+-*/^".contains(c) {
            out.push((Tok::Op(c), i));
            i += 1;
        } else if c == '(' {
            out.push((Tok::LParen, i));
            i += 1;
        } else if c == ')' {
            out.push((Tok::RParen, i));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character `{c}` at position {i}")));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<(Tok, usize)>,
    pos: usize,
    allowed: &'a [Var],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn position(&self) -> usize {
        self.tokens.get(self.pos).map(|t| t.1).unwrap_or(usize::MAX)
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Expression(format!(
                "expected {:?} at position {}",
                tok,
                self.position()
            )))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == '+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek().cloned() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == '*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(&Tok::Op('-')) {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.peek() == Some(&Tok::Op('+')) {
            self.pos += 1;
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Op('^')) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let at = self.position();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let var = match name.as_str() {
                    "x1" => Some(Var::X1),
                    "x2" => Some(Var::X2),
                    "p1" => Some(Var::P1),
                    "p2" => Some(Var::P2),
                    _ => None,
                };
                if let Some(var) = var {
                    if !self.allowed.contains(&var) {
                        return Err(Error::Expression(format!(
                            "variable `{name}` not allowed here (position {at})"
                        )));
                    }
                    return Ok(Expr::Var(var));
                }
                let func: fn(Box<Expr>) -> Expr = match name.as_str() {
                    "sin" => Expr::Sin,
                    "cos" => Expr::Cos,
                    "exp" => Expr::Exp,
                    _ => {
                        return Err(Error::Expression(format!(
                            "unknown identifier `{name}` at position {at}"
                        )))
                    }
                };
                self.expect(Tok::LParen)?;
                let arg = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(func(Box::new(arg)))
            }
            Some(t) => Err(Error::Expression(format!("unexpected {t:?} at position {at}"))),
            None => Err(Error::Expression("unexpected end of expression".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, v: [f64; 4]) -> f64 {
        Expr::parse(src).unwrap().eval(&v)
    }

    #[test]
    fn precedence() {
        let v = [2.0, 3.0, 0.5, -1.0];
        assert_eq!(ev("1 + 2 * 3", v), 7.0);
        assert_eq!(ev("-x1^2", v), -4.0);
        assert_eq!(ev("2^3^2", v), 512.0);
        assert_eq!(ev("(x1 + x2) / 5", v), 1.0);
        assert_eq!(ev("x1 - x2 - 1", v), -2.0);
        assert!((ev("0.5*(p1^2+p2^2) - 0.5", v) - 0.125).abs() < 1e-15);
        assert!((ev("2^0.5", v) - 2f64.sqrt()).abs() < 1e-15);
        assert!((ev("exp(0) + sin(0) + cos(0)", v) - 2.0).abs() < 1e-15);
        assert_eq!(ev("1e-3 * 1000", v), 1.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(1)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 $ 2").is_err());
        assert!(Expr::parse_with("p1 + x1", &[Var::X1, Var::X2]).is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "x1^3 * sin(x2) + exp(x1 * x2) / (1 + x1^2)",
            "0.5*(p1^2 + p2^2) + 0.25*(p1^2+p2^2)^2 - 0.75",
            "cos(x1 - p2) * p1 + x2^x1",
        ];
        let at = [0.7, 1.3, -0.4, 0.9];
        for src in srcs {
            let e = Expr::parse(src).unwrap();
            for var in [Var::X1, Var::X2, Var::P1, Var::P2] {
                let d = e.derivative(var).eval(&at);
                let h = 1e-6;
                let mut a = at;
                let mut b = at;
                a[var.index()] += h;
                b[var.index()] -= h;
                let fd = (e.eval(&a) - e.eval(&b)) / (2.0 * h);
                assert!((d - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{src} d/{var:?}: {d} vs {fd}");
            }
        }
    }
}
