//! Plain-text form of series: `a0*e^q0 + a1*e^q1 + ...`, plus a small
//! arithmetic expression language over the same atoms.
//!
//! The exponent after `^` is a rational literal and is read greedily, so
//! `e^1/2` is `ε^(1/2)`. Coefficients are plain decimals (no scientific
//! notation, since `e` is the infinitesimal).

use std::fmt;

use thiserror::Error;

use super::{Exponent, LeviCivitaNumber, NonArchError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseSeriesError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error(transparent)]
    Arithmetic(#[from] NonArchError),
}

pub(super) fn write_series(x: &LeviCivitaNumber, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x.is_zero() {
        return f.write_str("0");
    }
    for (i, &(q, a)) in x.terms().iter().enumerate() {
        let mag = a.abs();
        if i == 0 {
            if a < 0.0 {
                f.write_str("-")?;
            }
        } else if a < 0.0 {
            f.write_str(" - ")?;
        } else {
            f.write_str(" + ")?;
        }
        if q == Exponent::ZERO {
            write!(f, "{mag}")?;
            continue;
        }
        if mag != 1.0 {
            write!(f, "{mag}*")?;
        }
        if q == Exponent::from_int(1) {
            f.write_str("e")?;
        } else {
            write!(f, "e^{q}")?;
        }
    }
    Ok(())
}

/// Parses the canonical series form (or any expression) at truncation `order`.
pub fn parse_series(src: &str, order: Exponent) -> Result<LeviCivitaNumber, ParseSeriesError> {
    eval_expression(src, order)
}

/// Evaluates an arithmetic expression with `+ - * / ^`, parentheses, decimal
/// literals and the infinitesimal `e`.
pub fn eval_expression(src: &str, order: Exponent) -> Result<LeviCivitaNumber, ParseSeriesError> {
    let mut p = Parser { chars: src.char_indices().collect(), pos: 0, order };
    let v = p.expr()?;
    p.skip_ws();
    if p.pos < p.chars.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(v)
}

struct Parser {
    chars: Vec<(usize, char)>,
    pos: usize,
    order: Exponent,
}

impl Parser {
    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn column(&self) -> usize {
        self.chars.get(self.pos).map_or_else(|| self.chars.len(), |&(i, _)| i) + 1
    }

    fn error(&self, message: &str) -> ParseSeriesError {
        ParseSeriesError::Syntax { column: self.column(), message: message.to_string() }
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<LeviCivitaNumber, ParseSeriesError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.checked_add(&self.term()?)?;
            } else if self.eat('-') {
                acc = acc.checked_sub(&self.term()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<LeviCivitaNumber, ParseSeriesError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = acc.checked_mul(&self.unary()?)?;
            } else if self.eat('/') {
                acc = acc.checked_div(&self.unary()?)?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<LeviCivitaNumber, ParseSeriesError> {
        if self.eat('-') {
            return Ok(-self.unary()?);
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<LeviCivitaNumber, ParseSeriesError> {
        let base = self.atom()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let (num, den) = self.exponent_literal()?;
        if den == 1 {
            let n = i32::try_from(num).map_err(|_| self.error("exponent too large"))?;
            return Ok(base.checked_powi(n)?);
        }
        // fractional powers only of positive monomials
        match base.terms() {
            [(q, a)] if *a > 0.0 => {
                let scaled = Exponent::from_ratio(q.twelfths() as i64 * num, 12 * den)?;
                let coeff = a.powf(num as f64 / den as f64);
                Ok(LeviCivitaNumber::monomial(coeff, scaled, self.order)?)
            }
            _ => Err(self.error("fractional power of a non-monomial or negative base")),
        }
    }

    fn exponent_literal(&mut self) -> Result<(i64, i64), ParseSeriesError> {
        let paren = self.eat('(');
        let negative = self.eat('-');
        let mut num = self.integer()?;
        if negative {
            num = -num;
        }
        let den = if self.eat('/') { self.integer()? } else { 1 };
        if den == 0 {
            return Err(self.error("zero denominator in exponent"));
        }
        if paren && !self.eat(')') {
            return Err(self.error("expected ')'"));
        }
        Ok((num, den))
    }

    fn integer(&mut self) -> Result<i64, ParseSeriesError> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected integer"));
        }
        let s: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
        s.parse().map_err(|_| self.error("integer out of range"))
    }

    fn atom(&mut self) -> Result<LeviCivitaNumber, ParseSeriesError> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(v)
            }
            Some('e') => {
                self.pos += 1;
                Ok(LeviCivitaNumber::monomial(1.0, Exponent::from_int(1), self.order)?)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                let s: String = self.chars[start..self.pos].iter().map(|&(_, c)| c).collect();
                let a: f64 = s.parse().map_err(|_| {
                    self.pos = start;
                    self.error("malformed number")
                })?;
                Ok(LeviCivitaNumber::monomial(a, Exponent::ZERO, self.order)?)
            }
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}
