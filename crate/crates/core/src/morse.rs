//! Morse and Betti polynomials with natural-number coefficients, and the
//! check `M(t) = P(t) + (1 + t) Q(t)` with `Q ∈ ℕ[t]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::CriticalPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MorseError {
    #[error("degenerate critical points (positions {0:?}) have no polynomial index")]
    Degenerate(Vec<usize>),
    #[error("a custom window needs a user-supplied Betti polynomial")]
    MissingBetti,
    #[error("cannot parse polynomial at column {column}: {message}")]
    Parse { column: usize, message: String },
}

/// Polynomial in `t` with coefficients in ℕ; `coeffs[d]` is the coefficient
/// of `t^d`, trailing zeros trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "Vec<u64>", into = "Vec<u64>")]
pub struct NatPoly {
    coeffs: Vec<u64>,
}

impl From<Vec<u64>> for NatPoly {
    fn from(coeffs: Vec<u64>) -> Self {
        Self::new(coeffs)
    }
}

impl From<NatPoly> for Vec<u64> {
    fn from(p: NatPoly) -> Self {
        p.coeffs
    }
}

impl NatPoly {
    pub fn new(mut coeffs: Vec<u64>) -> Self {
        while coeffs.last() == Some(&0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::new(vec![1])
    }

    pub fn monomial(degree: usize) -> Self {
        let mut c = vec![0; degree + 1];
        c[degree] = 1;
        Self { coeffs: c }
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    pub fn coeff(&self, d: usize) -> u64 {
        self.coeffs.get(d).copied().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn eval(&self, t: i64) -> i64 {
        self.coeffs.iter().rev().fold(0i64, |acc, &c| acc * t + c as i64)
    }

    pub fn add(&self, other: &NatPoly) -> NatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        NatPoly::new((0..n).map(|d| self.coeff(d) + other.coeff(d)).collect())
    }

    /// `(1 + t)·self`.
    pub fn times_one_plus_t(&self) -> NatPoly {
        let n = self.coeffs.len() + 1;
        NatPoly::new((0..n).map(|d| self.coeff(d) + if d > 0 { self.coeff(d - 1) } else { 0 }).collect())
    }

    /// Coefficientwise `self ≥ other`.
    pub fn dominates(&self, other: &NatPoly) -> bool {
        (0..other.coeffs.len()).all(|d| self.coeff(d) >= other.coeff(d))
    }
}

impl fmt::Display for NatPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, self.coeffs.iter().map(|&c| c as i64))
    }
}

/// Writes `c0 + c1t + c2t^2 + …`, skipping zero terms.
fn write_poly(f: &mut fmt::Formatter<'_>, coeffs: impl Iterator<Item = i64>) -> fmt::Result {
    let mut first = true;
    for (d, c) in coeffs.enumerate() {
        if c == 0 {
            continue;
        }
        let mag = c.unsigned_abs();
        match (first, c < 0) {
            (true, true) => f.write_str("-")?,
            (true, false) => {}
            (false, true) => f.write_str(" - ")?,
            (false, false) => f.write_str(" + ")?,
        }
        first = false;
        match d {
            0 => write!(f, "{mag}")?,
            _ => {
                if mag != 1 {
                    write!(f, "{mag}")?;
                }
                if d == 1 {
                    f.write_str("t")?;
                } else {
                    write!(f, "t^{d}")?;
                }
            }
        }
    }
    if first {
        f.write_str("0")?;
    }
    Ok(())
}

impl FromStr for NatPoly {
    type Err = MorseError;

    /// Accepts sums of terms `c`, `t`, `ct`, `c t`, `c*t`, `t^d`, `c*t^d`
    /// with nonnegative integer `c`; like terms are merged.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = s.as_bytes();
        let mut pos = 0;
        let err = |pos: usize, m: &str| MorseError::Parse { column: pos + 1, message: m.to_string() };
        let skip = |pos: &mut usize| {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
        };
        let number = |pos: &mut usize| -> Option<u64> {
            let start = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            s[start..*pos].parse().ok()
        };
        let mut coeffs: Vec<u64> = Vec::new();
        loop {
            skip(&mut pos);
            if pos >= bytes.len() {
                return Err(err(pos, "expected a term"));
            }
            let c = number(&mut pos);
            skip(&mut pos);
            if c.is_some() && pos < bytes.len() && bytes[pos] == b'*' {
                pos += 1;
                skip(&mut pos);
            }
            let degree = if pos < bytes.len() && bytes[pos] == b't' {
                pos += 1;
                skip(&mut pos);
                if pos < bytes.len() && bytes[pos] == b'^' {
                    pos += 1;
                    skip(&mut pos);
                    let d = number(&mut pos).ok_or_else(|| err(pos, "expected exponent"))?;
                    usize::try_from(d).map_err(|_| err(pos, "exponent too large"))?
                } else {
                    1
                }
            } else if c.is_some() {
                0
            } else {
                return Err(err(pos, "expected coefficient or 't'"));
            };
            let c = c.unwrap_or(1);
            if coeffs.len() <= degree {
                coeffs.resize(degree + 1, 0);
            }
            coeffs[degree] += c;
            skip(&mut pos);
            if pos >= bytes.len() {
                break;
            }
            if bytes[pos] == b'+' {
                pos += 1;
            } else if bytes[pos] == b'-' {
                return Err(err(pos, "negative coefficients are not allowed"));
            } else {
                return Err(err(pos, "expected '+'"));
            }
        }
        Ok(NatPoly::new(coeffs))
    }
}

/// Integer quotient that failed to lie in ℕ[t], or left a remainder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationViolation {
    pub quotient: Vec<i64>,
    pub remainder: i64,
}

impl fmt::Display for RelationViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("quotient ")?;
        write_poly(f, self.quotient.iter().copied())?;
        write!(f, ", remainder {}", self.remainder)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quotient {
    Natural(NatPoly),
    Violation(RelationViolation),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseRelationReport {
    pub morse: NatPoly,
    pub betti: NatPoly,
    pub quotient: Quotient,
    /// `M(−1) = P(−1)`.
    pub euler_ok: bool,
    /// `M(1)`, the number of nondegenerate critical points counted.
    pub count_m1: u64,
}

impl MorseRelationReport {
    pub fn holds(&self) -> bool {
        matches!(self.quotient, Quotient::Natural(_))
    }

    pub fn q(&self) -> Option<&NatPoly> {
        match &self.quotient {
            Quotient::Natural(q) => Some(q),
            Quotient::Violation(_) => None,
        }
    }
}

/// `Σ t^{m(u)}` over nondegenerate points.
pub fn morse_polynomial(points: &[CriticalPoint]) -> Result<NatPoly, MorseError> {
    let degenerate: Vec<usize> = points.iter().enumerate().filter(|(_, p)| !p.nondegenerate).map(|(i, _)| i).collect();
    if !degenerate.is_empty() {
        return Err(MorseError::Degenerate(degenerate));
    }
    Ok(morse_polynomial_from_indices(points.iter().map(|p| p.morse_index)))
}

pub fn morse_polynomial_from_indices(indices: impl IntoIterator<Item = usize>) -> NatPoly {
    let mut coeffs = Vec::new();
    for m in indices {
        if coeffs.len() <= m {
            coeffs.resize(m + 1, 0);
        }
        coeffs[m] += 1;
    }
    NatPoly::new(coeffs)
}

/// Divides `M − P` by `1 + t` exactly in ℤ[t].
pub fn verify_morse_relation(m: &NatPoly, p: &NatPoly) -> MorseRelationReport {
    let n = m.coeffs.len().max(p.coeffs.len());
    let diff: Vec<i64> = (0..n).map(|d| m.coeff(d) as i64 - p.coeff(d) as i64).collect();
    // synthetic division by (t + 1), highest degree first
    let mut quotient = vec![0i64; n.saturating_sub(1)];
    let mut carry = 0i64;
    for d in (1..n).rev() {
        carry = diff[d] - carry;
        quotient[d - 1] = carry;
    }
    let remainder = if n == 0 { 0 } else { diff[0] - quotient.first().copied().unwrap_or(0) };
    let quotient_result = if remainder == 0 && quotient.iter().all(|&q| q >= 0) {
        Quotient::Natural(NatPoly::new(quotient.iter().map(|&q| q as u64).collect()))
    } else {
        while quotient.last() == Some(&0) {
            quotient.pop();
        }
        Quotient::Violation(RelationViolation { quotient, remainder })
    };
    MorseRelationReport {
        morse: m.clone(),
        betti: p.clone(),
        quotient: quotient_result,
        euler_ok: m.eval(-1) == p.eval(-1),
        count_m1: m.eval(1) as u64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    /// `a` below and `b` above every critical value of a coercive functional.
    FullCoercive,
    Custom,
}

/// Betti polynomial for a window: `1` for the full coercive window (the
/// sublevel set retracts to a point), otherwise the caller's input.
pub fn default_betti(kind: WindowKind, supplied: Option<&NatPoly>) -> Result<NatPoly, MorseError> {
    match kind {
        WindowKind::FullCoercive => Ok(NatPoly::one()),
        WindowKind::Custom => supplied.cloned().ok_or(MorseError::MissingBetti),
    }
}
