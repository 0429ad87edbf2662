//! Arithmetic expressions in `x`, `u`, `p` with symbolic differentiation.
//!
//! Grammar: `+ - * / ^`, parentheses, decimal literals (optionally with an
//! exponent suffix such as `1e-3`), the constant `pi`, and the functions
//! `sin`, `cos`, `exp`. The right operand of `^` must fold to a constant.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expression error at column {column}: {message}")]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    U,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Neg(Arc<Expr>),
    Pow(Arc<Expr>, f64),
    Call(Func, Arc<Expr>),
}

use Expr::*;

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, u: f64, p: f64) -> f64 {
        match self {
            Const(c) => *c,
            Var(Var::X) => x,
            Var(Var::U) => u,
            Var(Var::P) => p,
            Add(a, b) => a.eval(x, u, p) + b.eval(x, u, p),
            Sub(a, b) => a.eval(x, u, p) - b.eval(x, u, p),
            Mul(a, b) => a.eval(x, u, p) * b.eval(x, u, p),
            Div(a, b) => a.eval(x, u, p) / b.eval(x, u, p),
            Neg(a) => -a.eval(x, u, p),
            Pow(a, k) => {
                let base = a.eval(x, u, p);
                if k.fract() == 0.0 && k.abs() <= i32::MAX as f64 {
                    base.powi(*k as i32)
                } else {
                    base.powf(*k)
                }
            }
            Call(f, a) => {
                let v = a.eval(x, u, p);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
        }
    }

    /// Partial derivative with respect to `v`, lightly simplified.
    pub fn diff(&self, v: Var) -> Expr {
        let d = |e: &Arc<Expr>| e.diff(v);
        match self {
            Const(_) => Const(0.0),
            Var(w) => Const(if *w == v { 1.0 } else { 0.0 }),
            Add(a, b) => add(d(a), d(b)),
            Sub(a, b) => sub(d(a), d(b)),
            Mul(a, b) => add(mul(d(a), (**b).clone()), mul((**a).clone(), d(b))),
            Div(a, b) => div(sub(mul(d(a), (**b).clone()), mul((**a).clone(), d(b))), pow((**b).clone(), 2.0)),
            Neg(a) => neg(d(a)),
            Pow(a, k) => mul(mul(Const(*k), pow((**a).clone(), k - 1.0)), d(a)),
            Call(f, a) => {
                let outer = match f {
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Exp => call(Func::Exp, (**a).clone()),
                };
                mul(outer, d(a))
            }
        }
    }

    fn as_const(&self) -> Option<f64> {
        match self {
            Const(c) => Some(*c),
            _ => None,
        }
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x + y),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Add(Arc::new(a), Arc::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x - y),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Sub(Arc::new(a), Arc::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        _ => Mul(Arc::new(a), Arc::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => Const(x / y),
        (Some(0.0), _) => Const(0.0),
        (_, Some(1.0)) => a,
        _ => Div(Arc::new(a), Arc::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Const(c) => Const(-c),
        Neg(inner) => (*inner).clone(),
        _ => Neg(Arc::new(a)),
    }
}

fn pow(a: Expr, k: f64) -> Expr {
    if k == 0.0 {
        return Const(1.0);
    }
    if k == 1.0 {
        return a;
    }
    match a.as_const() {
        Some(c) => Const(c.powf(k)),
        None => Pow(Arc::new(a), k),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    match a.as_const() {
        Some(c) => Const(Call(f, Arc::new(Const(c))).eval(0.0, 0.0, 0.0)),
        None => Call(f, Arc::new(a)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Const(c) => write!(f, "{c}"),
            Var(Var::X) => f.write_str("x"),
            Var(Var::U) => f.write_str("u"),
            Var(Var::P) => f.write_str("p"),
            Add(a, b) => write!(f, "({a} + {b})"),
            Sub(a, b) => write!(f, "({a} - {b})"),
            Mul(a, b) => write!(f, "({a} * {b})"),
            Div(a, b) => write!(f, "({a} / {b})"),
            Neg(a) => write!(f, "(-{a})"),
            Pow(a, k) => write!(f, "({a}^{k})"),
            Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                };
                write!(f, "{name}({a})")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError { column: self.pos + 1, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat(b'*') {
                acc = mul(acc, self.unary()?);
            } else if self.eat(b'/') {
                acc = div(acc, self.unary()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            return Ok(neg(self.unary()?));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    // right-associative; binds tighter than unary minus on its left
    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let at = self.pos;
        let exponent = self.unary()?;
        match exponent.as_const() {
            Some(k) => Ok(pow(base, k)),
            None => Err(ExprError { column: at + 1, message: "exponent must be constant".into() }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let Some(&c) = self.src.get(self.pos) else {
            return Err(self.error("unexpected end of input"));
        };
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if !self.eat(b')') {
                return Err(self.error("expected ')'"));
            }
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                self.pos += 1;
            }
            let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
            return match ident {
                "x" => Ok(Var(Var::X)),
                "u" => Ok(Var(Var::U)),
                "p" => Ok(Var(Var::P)),
                "pi" => Ok(Const(std::f64::consts::PI)),
                "sin" | "cos" | "exp" => {
                    let func = match ident {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        _ => Func::Exp,
                    };
                    if !self.eat(b'(') {
                        return Err(self.error("expected '(' after function name"));
                    }
                    let arg = self.expr()?;
                    if !self.eat(b')') {
                        return Err(self.error("expected ')'"));
                    }
                    Ok(call(func, arg))
                }
                _ => {
                    self.pos = start;
                    Err(self.error(&format!("unknown identifier '{ident}'")))
                }
            };
        }
        Err(self.error("unexpected character"))
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && (p.src[p.pos].is_ascii_digit() || p.src[p.pos] == b'.') {
                p.pos += 1;
            }
        };
        digits(self);
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let mark = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = mark;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        s.parse::<f64>().map(Const).map_err(|_| {
            self.pos = start;
            self.error("malformed number")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = Expr::parse("0.5*p^2 - (2.5/2)*u^2 + 0.25*u^4").unwrap();
        assert_eq!(e.eval(0.0, 2.0, 3.0), 4.5 - 5.0 + 4.0);
        let e = Expr::parse("sin(x)*exp(u) + cos(p)/2").unwrap();
        let (x, u, p) = (0.3, -0.2, 1.1);
        assert!((e.eval(x, u, p) - (x.sin() * u.exp() + p.cos() / 2.0)).abs() < 1e-15);
        assert_eq!(Expr::parse("-u^2").unwrap().eval(0.0, 3.0, 0.0), -9.0);
        assert_eq!(Expr::parse("2^3^2").unwrap().eval(0.0, 0.0, 0.0), 512.0);
        assert_eq!(Expr::parse("1e-3*u").unwrap().eval(0.0, 2.0, 0.0), 2e-3);
    }

    #[test]
    fn symbolic_partials() {
        let e = Expr::parse("0.5*p^2 - 1.25*u^2 + 0.25*u^4").unwrap();
        let fu = e.diff(Var::U);
        let fuu = fu.diff(Var::U);
        let fp = e.diff(Var::P);
        let fup = fu.diff(Var::P);
        for &(u, p) in &[(0.0, 0.0), (1.5, -2.0), (-0.7, 0.3)] {
            assert!((fu.eval(0.0, u, p) - (-2.5 * u + u * u * u)).abs() < 1e-14);
            assert!((fuu.eval(0.0, u, p) - (-2.5 + 3.0 * u * u)).abs() < 1e-14);
            assert_eq!(fp.eval(0.0, u, p), p);
            assert_eq!(fup.eval(0.0, u, p), 0.0);
        }
        let q = Expr::parse("sin(x*u)/p").unwrap();
        let dq = q.diff(Var::P);
        let (x, u, p) = (0.4, 1.3, 0.9);
        assert!((dq.eval(x, u, p) + (x * u).sin() / (p * p)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Expr::parse("u +").unwrap_err().column, 4);
        assert!(Expr::parse("u^p").is_err());
        let err = Expr::parse("2*y").unwrap_err();
        assert_eq!(err.column, 3);
        assert!(Expr::parse("sin u").is_err());
    }
}
