//! Truncated Levi-Civita numbers: a decidable model of a non-Archimedean
//! ordered field extending the reals.
//!
//! A value is a finite sum `Σ a_q ε^q` over rational exponents `q`, where `ε`
//! is a fixed positive infinitesimal. Exponents live on the grid `1/12 ℤ` and
//! every number carries a truncation order `K`; terms with exponent above `K`
//! are dropped after each operation.
//!
//! Ordering is lexicographic in the leading term of a difference, which makes
//! `ε` smaller than every positive real and `ε^-1` larger than every real.

mod text;

pub use text::{eval_expression, parse_series, ParseSeriesError};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Denominator of the exponent grid.
pub const EXPONENT_DENOMINATOR: i32 = 12;

/// Default truncation order `K = 10`.
pub const DEFAULT_ORDER: Exponent = Exponent::from_int(10);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NonArchError {
    #[error("truncation orders differ: {0} vs {1}")]
    OrderMismatch(Exponent, Exponent),
    #[error("division by zero")]
    DivisionByZero,
    #[error("exponent {num}/{den} is not a multiple of 1/{EXPONENT_DENOMINATOR}")]
    UnsupportedExponent { num: i64, den: i64 },
    #[error("coefficient {0} is not finite")]
    NonFiniteCoefficient(f64),
    #[error("value is infinite; the Taylor lift is only defined on finite numbers")]
    InfiniteArgument,
    #[error("result has no representable terms at truncation order {0}")]
    OutOfRange(Exponent),
}

/// A rational exponent stored exactly as a multiple of 1/12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exponent(i32);

impl Exponent {
    pub const ZERO: Exponent = Exponent(0);

    pub const fn from_int(n: i32) -> Self {
        Exponent(n * EXPONENT_DENOMINATOR)
    }

    /// `num / den`, rejected unless the value lies on the 1/12 grid.
    pub fn from_ratio(num: i64, den: i64) -> Result<Self, NonArchError> {
        if den == 0 {
            return Err(NonArchError::UnsupportedExponent { num, den });
        }
        let scaled = num * EXPONENT_DENOMINATOR as i64;
        if scaled % den != 0 {
            return Err(NonArchError::UnsupportedExponent { num, den });
        }
        let twelfths = scaled / den;
        i32::try_from(twelfths).map(Exponent).map_err(|_| NonArchError::UnsupportedExponent { num, den })
    }

    pub const fn from_twelfths(t: i32) -> Self {
        Exponent(t)
    }

    pub const fn twelfths(self) -> i32 {
        self.0
    }

    /// Reduced `(numerator, denominator)` with positive denominator.
    pub fn ratio(self) -> (i32, i32) {
        let g = gcd(self.0.unsigned_abs(), EXPONENT_DENOMINATOR as u32) as i32;
        (self.0 / g, EXPONENT_DENOMINATOR / g)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / EXPONENT_DENOMINATOR as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl Add for Exponent {
    type Output = Exponent;
    fn add(self, rhs: Exponent) -> Exponent {
        Exponent(self.0 + rhs.0)
    }
}

impl Sub for Exponent {
    type Output = Exponent;
    fn sub(self, rhs: Exponent) -> Exponent {
        Exponent(self.0 - rhs.0)
    }
}

impl Neg for Exponent {
    type Output = Exponent;
    fn neg(self) -> Exponent {
        Exponent(-self.0)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = self.ratio();
        if d == 1 {
            write!(f, "{n}")
        } else {
            write!(f, "{n}/{d}")
        }
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Trichotomy of a number by comparison with `1/n` and `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Infinitesimal,
    FiniteNonInfinitesimal,
    Infinite,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Classification::Infinitesimal => "Infinitesimal",
            Classification::FiniteNonInfinitesimal => "FiniteNonInfinitesimal",
            Classification::Infinite => "Infinite",
        };
        f.write_str(s)
    }
}

/// Truncated formal series `Σ a_q ε^q` with nonzero coefficients and
/// strictly increasing exponents, all `≤ order`.
///
/// Equality and ordering compare values only; the truncation order does not
/// take part.
#[derive(Debug, Clone)]
pub struct LeviCivitaNumber {
    terms: Vec<(Exponent, f64)>,
    order: Exponent,
}

impl LeviCivitaNumber {
    pub fn zero_with_order(order: Exponent) -> Self {
        Self { terms: Vec::new(), order }
    }

    pub fn zero() -> Self {
        Self::zero_with_order(DEFAULT_ORDER)
    }

    pub fn one() -> Self {
        Self::real(1.0)
    }

    /// Embedding of a real number at the default order. Panics on a
    /// non-finite input; use [`LeviCivitaNumber::monomial`] to handle that case.
    pub fn real(a: f64) -> Self {
        Self::monomial(a, Exponent::ZERO, DEFAULT_ORDER).expect("finite real")
    }

    /// The infinitesimal `ε` at the default order.
    pub fn epsilon() -> Self {
        Self::monomial(1.0, Exponent::from_int(1), DEFAULT_ORDER).expect("ε fits default order")
    }

    /// `a·ε^q`. Yields zero when `q` exceeds `order`.
    pub fn monomial(a: f64, q: Exponent, order: Exponent) -> Result<Self, NonArchError> {
        Self::from_terms([(q, a)], order)
    }

    /// Builds a number from arbitrary `(exponent, coefficient)` pairs; like
    /// exponents are merged, zeros removed, and the result truncated.
    pub fn from_terms<I>(terms: I, order: Exponent) -> Result<Self, NonArchError>
    where
        I: IntoIterator<Item = (Exponent, f64)>,
    {
        let mut acc: BTreeMap<Exponent, f64> = BTreeMap::new();
        for (q, a) in terms {
            if !a.is_finite() {
                return Err(NonArchError::NonFiniteCoefficient(a));
            }
            if q <= order {
                *acc.entry(q).or_insert(0.0) += a;
            }
        }
        Ok(Self::from_sorted(acc, order))
    }

    fn from_sorted(acc: BTreeMap<Exponent, f64>, order: Exponent) -> Self {
        let terms = acc.into_iter().filter(|&(q, a)| a != 0.0 && q <= order).collect();
        Self { terms, order }
    }

    pub fn terms(&self) -> &[(Exponent, f64)] {
        &self.terms
    }

    pub fn order(&self) -> Exponent {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Leading (smallest) exponent, `None` for zero.
    pub fn leading_exponent(&self) -> Option<Exponent> {
        self.terms.first().map(|&(q, _)| q)
    }

    pub fn leading_coefficient(&self) -> Option<f64> {
        self.terms.first().map(|&(_, a)| a)
    }

    /// Coefficient of `ε^q` (zero when absent).
    pub fn coefficient(&self, q: Exponent) -> f64 {
        self.terms.binary_search_by(|(e, _)| e.cmp(&q)).map(|i| self.terms[i].1).unwrap_or(0.0)
    }

    /// Drops all terms with exponent above `order` and adopts it.
    pub fn truncate(&self, order: Exponent) -> Self {
        Self { terms: self.terms.iter().copied().filter(|&(q, _)| q <= order).collect(), order }
    }

    pub fn signum(&self) -> i32 {
        match self.leading_coefficient() {
            None => 0,
            Some(a) if a > 0.0 => 1,
            Some(_) => -1,
        }
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    fn check_order(&self, other: &Self) -> Result<(), NonArchError> {
        if self.order != other.order {
            return Err(NonArchError::OrderMismatch(self.order, other.order));
        }
        Ok(())
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, NonArchError> {
        self.check_order(other)?;
        let mut acc: BTreeMap<Exponent, f64> = self.terms.iter().copied().collect();
        for &(q, a) in &other.terms {
            *acc.entry(q).or_insert(0.0) += a;
        }
        Ok(Self::from_sorted(acc, self.order))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, NonArchError> {
        self.checked_add(&-other)
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, NonArchError> {
        self.check_order(other)?;
        Ok(mul_truncated(self, other, self.order))
    }

    /// Multiplicative inverse by factoring out the leading term and summing
    /// the geometric series of the remainder.
    ///
    /// `x · x⁻¹ = 1` holds through exponent `K + min(0, lead(x))`.
    pub fn checked_inv(&self) -> Result<Self, NonArchError> {
        let (lead_q, lead_a) = match self.terms.first() {
            Some(&t) => t,
            None => return Err(NonArchError::DivisionByZero),
        };
        if -lead_q > self.order {
            return Err(NonArchError::OutOfRange(self.order));
        }
        // x = a ε^q (1 + r), r has only positive exponents
        let inner_order = self.order + lead_q;
        let r = Self {
            terms: self.terms[1..]
                .iter()
                .map(|&(q, a)| (q - lead_q, a / lead_a))
                .filter(|&(q, _)| q <= inner_order)
                .collect(),
            order: inner_order,
        };
        let minus_r = -&r;
        let mut sum = Self::monomial(1.0, Exponent::ZERO, inner_order)?;
        let mut power = sum.clone();
        loop {
            power = mul_truncated(&power, &minus_r, inner_order);
            if power.is_zero() {
                break;
            }
            sum = sum.checked_add(&power)?;
        }
        let scale = 1.0 / lead_a;
        Self::from_terms(sum.terms.iter().map(|&(q, a)| (q - lead_q, a * scale)), self.order)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, NonArchError> {
        self.check_order(other)?;
        self.checked_mul(&other.checked_inv()?)
    }

    /// Integer power by repeated squaring; negative powers go through the inverse.
    pub fn checked_powi(&self, n: i32) -> Result<Self, NonArchError> {
        let base = if n < 0 { self.checked_inv()? } else { self.clone() };
        let mut exp = n.unsigned_abs();
        let mut acc = Self::monomial(1.0, Exponent::ZERO, self.order)?;
        let mut sq = base;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = mul_truncated(&acc, &sq, self.order);
            }
            exp >>= 1;
            if exp > 0 {
                sq = mul_truncated(&sq, &sq, self.order);
            }
        }
        Ok(acc)
    }

    pub fn classify(&self) -> Classification {
        classify(self)
    }

    pub fn shadow(&self) -> f64 {
        shadow(self)
    }
}

/// Cauchy product keeping exponents `≤ order`.
fn mul_truncated(x: &LeviCivitaNumber, y: &LeviCivitaNumber, order: Exponent) -> LeviCivitaNumber {
    let mut acc: BTreeMap<Exponent, f64> = BTreeMap::new();
    for &(qx, ax) in &x.terms {
        for &(qy, ay) in &y.terms {
            let q = qx + qy;
            if q <= order {
                *acc.entry(q).or_insert(0.0) += ax * ay;
            }
        }
    }
    LeviCivitaNumber::from_sorted(acc, order)
}

/// Sign of `x − y` read off the first exponent where the coefficients differ.
pub fn lc_cmp(x: &LeviCivitaNumber, y: &LeviCivitaNumber) -> Ordering {
    let (mut i, mut j) = (0, 0);
    loop {
        match (x.terms.get(i), y.terms.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(&(_, a)), None) => return sign_ordering(a),
            (None, Some(&(_, b))) => return sign_ordering(-b),
            (Some(&(qa, a)), Some(&(qb, b))) => match qa.cmp(&qb) {
                Ordering::Less => return sign_ordering(a),
                Ordering::Greater => return sign_ordering(-b),
                Ordering::Equal => {
                    if a != b {
                        return a.partial_cmp(&b).expect("finite coefficients");
                    }
                    i += 1;
                    j += 1;
                }
            },
        }
    }
}

fn sign_ordering(a: f64) -> Ordering {
    if a > 0.0 {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

pub fn classify(x: &LeviCivitaNumber) -> Classification {
    match x.leading_exponent() {
        None => Classification::Infinitesimal,
        Some(q) if q.is_negative() => Classification::Infinite,
        Some(q) if q.is_positive() => Classification::Infinitesimal,
        Some(_) => Classification::FiniteNonInfinitesimal,
    }
}

/// Standard part: the `ε^0` coefficient of a finite number, `±∞` otherwise.
pub fn shadow(x: &LeviCivitaNumber) -> f64 {
    match classify(x) {
        Classification::Infinite => {
            if x.signum() > 0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }
        _ => x.coefficient(Exponent::ZERO),
    }
}

/// `x − y` is infinitesimal. Independent of truncation orders.
pub fn infinitely_close(x: &LeviCivitaNumber, y: &LeviCivitaNumber) -> bool {
    classify(&untruncated_difference(x, y)) == Classification::Infinitesimal
}

/// `x − y` is finite.
pub fn same_galaxy(x: &LeviCivitaNumber, y: &LeviCivitaNumber) -> bool {
    classify(&untruncated_difference(x, y)) != Classification::Infinite
}

fn untruncated_difference(x: &LeviCivitaNumber, y: &LeviCivitaNumber) -> LeviCivitaNumber {
    let order = x.order.max(y.order);
    let mut acc: BTreeMap<Exponent, f64> = x.terms.iter().copied().collect();
    for &(q, b) in &y.terms {
        *acc.entry(q).or_insert(0.0) -= b;
    }
    LeviCivitaNumber::from_sorted(acc, order)
}

impl PartialEq for LeviCivitaNumber {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}

impl Eq for LeviCivitaNumber {}

impl PartialOrd for LeviCivitaNumber {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LeviCivitaNumber {
    fn cmp(&self, other: &Self) -> Ordering {
        lc_cmp(self, other)
    }
}

impl Neg for &LeviCivitaNumber {
    type Output = LeviCivitaNumber;
    fn neg(self) -> LeviCivitaNumber {
        LeviCivitaNumber { terms: self.terms.iter().map(|&(q, a)| (q, -a)).collect(), order: self.order }
    }
}

impl Neg for LeviCivitaNumber {
    type Output = LeviCivitaNumber;
    fn neg(self) -> LeviCivitaNumber {
        -&self
    }
}

// Operator forms panic on mismatched truncation orders; the `checked_*`
// methods report it instead.
macro_rules! forward_binop {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait<&LeviCivitaNumber> for &LeviCivitaNumber {
            type Output = LeviCivitaNumber;
            fn $method(self, rhs: &LeviCivitaNumber) -> LeviCivitaNumber {
                self.$checked(rhs).expect(concat!("LeviCivitaNumber::", stringify!($method)))
            }
        }
        impl $trait for LeviCivitaNumber {
            type Output = LeviCivitaNumber;
            fn $method(self, rhs: LeviCivitaNumber) -> LeviCivitaNumber {
                (&self).$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, checked_add);
forward_binop!(Sub, sub, checked_sub);
forward_binop!(Mul, mul, checked_mul);

impl fmt::Display for LeviCivitaNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::write_series(self, f)
    }
}

/// A smooth real function given by its value and its first `d` derivatives.
pub struct SmoothFunction {
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    derivatives: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl SmoothFunction {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { value: Box::new(value), derivatives: Vec::new() }
    }

    /// Appends the next derivative evaluator.
    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.derivatives.push(Box::new(d));
        self
    }

    /// Taylor order `d`, the number of derivative evaluators.
    pub fn order(&self) -> usize {
        self.derivatives.len()
    }

    fn eval_derivative(&self, k: usize, r: f64) -> f64 {
        if k == 0 {
            (self.value)(r)
        } else {
            (self.derivatives[k - 1])(r)
        }
    }
}

/// Natural extension of `f` to finite numbers:
/// `f*(r + h) = Σ_{k≤d} f⁽ᵏ⁾(r) hᵏ / k!` with `r` the shadow of `x`.
pub fn extend_function(f: &SmoothFunction, x: &LeviCivitaNumber) -> Result<LeviCivitaNumber, NonArchError> {
    if classify(x) == Classification::Infinite {
        return Err(NonArchError::InfiniteArgument);
    }
    let order = x.order();
    let r = shadow(x);
    let h = x.checked_sub(&LeviCivitaNumber::monomial(r, Exponent::ZERO, order)?)?;
    let mut result = LeviCivitaNumber::monomial(f.eval_derivative(0, r), Exponent::ZERO, order)?;
    let mut power = LeviCivitaNumber::monomial(1.0, Exponent::ZERO, order)?;
    let mut factorial = 1.0;
    for k in 1..=f.order() {
        power = mul_truncated(&power, &h, order);
        if power.is_zero() {
            break;
        }
        factorial *= k as f64;
        let c = f.eval_derivative(k, r) / factorial;
        let term = LeviCivitaNumber::from_terms(power.terms.iter().map(|&(q, a)| (q, a * c)), order)?;
        result = result.checked_add(&term)?;
    }
    Ok(result)
}
