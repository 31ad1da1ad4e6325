//! Coefficient fields.
//!
//! Two arbitrary-precision backends are provided through [`rug`]: exact
//! rationals ([`Rational`]) and binary floats of a chosen precision
//! ([`Float`]). Plain `f64` also implements the traits; it is used by the
//! fixed-step integrators and by cheap oracles in tests.
//!
//! The backend of a value is its type; the float precision is carried at run
//! time as the field context and checked wherever two values are combined
//! into a jet.

use std::fmt;

pub use rug::{Float, Rational};

use crate::error::Error;

/// A field of coefficients.
///
/// `Ctx` is whatever is needed to create new constants (the precision for
/// floats, nothing for rationals).
pub trait Field: Clone + PartialEq + fmt::Debug + fmt::Display + Send + Sync + 'static {
    type Ctx: Copy + PartialEq + fmt::Debug + Send + Sync + 'static;

    /// True when arithmetic is exact.
    const EXACT: bool;

    fn ctx(&self) -> Self::Ctx;
    fn zero(ctx: Self::Ctx) -> Self;
    fn from_i64(ctx: Self::Ctx, v: i64) -> Self;
    fn from_rational(ctx: Self::Ctx, q: &Rational) -> Self;

    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse, `None` for an exact zero.
    fn recip(&self) -> Option<Self>;
    fn is_zero(&self) -> bool;
    /// `|self|` rounded to `f64`; used for pivoting and tolerance tests.
    fn magnitude(&self) -> f64;
    /// Relative rounding unit of the backend (0 for exact arithmetic).
    fn unit_roundoff(ctx: Self::Ctx) -> f64;
    /// Short backend description for reports.
    fn backend(ctx: Self::Ctx) -> String;

    fn one(ctx: Self::Ctx) -> Self {
        Self::from_i64(ctx, 1)
    }

    /// `self += a * b`.
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self = self.add(&a.mul(b));
    }

    /// `self -= a * b`.
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self = self.sub(&a.mul(b));
    }

    fn div(&self, rhs: &Self) -> Option<Self> {
        rhs.recip().map(|r| self.mul(&r))
    }

    fn scale_i64(&self, k: i64) -> Self {
        self.mul(&Self::from_i64(self.ctx(), k))
    }

    /// Division by a nonzero integer.
    fn div_i64(&self, k: i64) -> Self {
        let q = Rational::from((1, k));
        self.mul(&Self::from_rational(self.ctx(), &q))
    }

    /// Lossless text form: `p/q` for rationals, full-precision decimal for floats.
    fn to_plain_string(&self) -> String {
        self.to_string()
    }

    /// Value as a binary float of the given precision.
    fn to_float(&self, prec: u32) -> Float;
}

/// Fields with square roots and an order, needed by orthonormalization.
pub trait RealField: Field {
    fn sqrt(&self) -> Self;
    fn is_negative(&self) -> bool;
    fn from_f64(ctx: Self::Ctx, v: f64) -> Self;
    fn to_f64(&self) -> f64 {
        let m = self.magnitude();
        if self.is_negative() {
            -m
        } else {
            m
        }
    }
    fn abs(&self) -> Self {
        if self.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }
}

impl Field for Rational {
    type Ctx = ();
    const EXACT: bool = true;

    fn ctx(&self) {}
    fn zero(_: ()) -> Self {
        Rational::new()
    }
    fn from_i64(_: (), v: i64) -> Self {
        Rational::from(v)
    }
    fn from_rational(_: (), q: &Rational) -> Self {
        q.clone()
    }
    fn add(&self, rhs: &Self) -> Self {
        Rational::from(self + rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        Rational::from(self - rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        Rational::from(self * rhs)
    }
    fn neg(&self) -> Self {
        Rational::from(-self)
    }
    fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Rational::from(self.recip_ref()))
        }
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == std::cmp::Ordering::Equal
    }
    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
    fn unit_roundoff(_: ()) -> f64 {
        0.0
    }
    fn backend(_: ()) -> String {
        "exact-rational".into()
    }
    fn to_float(&self, prec: u32) -> Float {
        Float::with_val(prec, self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += Rational::from(a * b);
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= Rational::from(a * b);
    }
    fn div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            None
        } else {
            Some(Rational::from(self / rhs))
        }
    }
}

impl Field for Float {
    type Ctx = u32;
    const EXACT: bool = false;

    fn ctx(&self) -> u32 {
        self.prec()
    }
    fn zero(p: u32) -> Self {
        Float::new(p)
    }
    fn from_i64(p: u32, v: i64) -> Self {
        Float::with_val(p, v)
    }
    fn from_rational(p: u32, q: &Rational) -> Self {
        Float::with_val(p, q)
    }
    fn add(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec(), self + rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec(), self - rhs)
    }
    fn mul(&self, rhs: &Self) -> Self {
        Float::with_val(self.prec(), self * rhs)
    }
    fn neg(&self) -> Self {
        Float::with_val(self.prec(), -self)
    }
    fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(Float::with_val(self.prec(), self.recip_ref()))
        }
    }
    fn is_zero(&self) -> bool {
        Float::is_zero(self)
    }
    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
    fn unit_roundoff(p: u32) -> f64 {
        2f64.powi(-(p as i32))
    }
    fn backend(p: u32) -> String {
        format!("binary-float-{p}")
    }
    fn to_float(&self, prec: u32) -> Float {
        Float::with_val(prec, self)
    }
    fn add_mul(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn sub_mul(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn div(&self, rhs: &Self) -> Option<Self> {
        if rhs.is_zero() {
            None
        } else {
            Some(Float::with_val(self.prec(), self / rhs))
        }
    }
}

impl RealField for Float {
    fn sqrt(&self) -> Self {
        Float::with_val(self.prec(), self.sqrt_ref())
    }
    fn is_negative(&self) -> bool {
        self.is_sign_negative() && !Float::is_zero(self)
    }
    fn from_f64(p: u32, v: f64) -> Self {
        Float::with_val(p, v)
    }
    fn to_f64(&self) -> f64 {
        Float::to_f64(self)
    }
}

impl Field for f64 {
    type Ctx = ();
    const EXACT: bool = false;

    fn ctx(&self) {}
    fn zero(_: ()) -> Self {
        0.0
    }
    fn from_i64(_: (), v: i64) -> Self {
        v as f64
    }
    fn from_rational(_: (), q: &Rational) -> Self {
        q.to_f64()
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn recip(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn unit_roundoff(_: ()) -> f64 {
        f64::EPSILON / 2.0
    }
    fn backend(_: ()) -> String {
        "f64".into()
    }
    fn to_float(&self, prec: u32) -> Float {
        Float::with_val(prec, *self)
    }
}

impl RealField for f64 {
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn from_f64(_: (), v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

/// Rank tolerance used by the float pipeline: `2^(-precision/2)`.
pub fn rank_tolerance(precision_bits: u32) -> f64 {
    2f64.powf(-(precision_bits as f64) / 2.0)
}

/// Parses `"p/q"`, an integer, or a decimal such as `"-1.25e-3"` into an
/// exact rational.
pub fn parse_rational(s: &str) -> Result<Rational, Error> {
    let s = s.trim();
    let bad = || Error::BadFormat(format!("not a number: {s:?}"));
    if s.is_empty() {
        return Err(bad());
    }
    if let Ok(q) = s.parse::<Rational>() {
        return Ok(q);
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    let num: rug::Integer = digits.trim_start_matches('0').parse().unwrap_or_default();
    let shift = exp - frac.len() as i32;
    let ten = rug::Integer::from(10);
    let mut q = Rational::from(num);
    if shift >= 0 {
        q *= Rational::from(rug::ops::Pow::pow(ten.clone(), shift as u32));
    } else {
        q /= Rational::from(rug::ops::Pow::pow(ten, (-shift) as u32));
    }
    if neg {
        q = -q;
    }
    Ok(q)
}

/// Formats a rational as `p/q` (or `p` when integral).
pub fn rational_string(q: &Rational) -> String {
    q.to_string()
}

/// Exact rational value of a float, used to move float data back into
/// exact JSON.
pub fn float_to_rational(x: &Float) -> Rational {
    x.to_rational().unwrap_or_default()
}
