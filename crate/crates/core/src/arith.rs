//! Arbitrary-precision interval arithmetic with outward rounding.
//!
//! Every [`RInterval`] is a pair of MPFR floats `[lo, hi]`. Each operation
//! rounds `lo` toward −∞ and `hi` toward +∞, so the result always encloses
//! the exact image of the operands. Precision travels with the values: the
//! result of a binary operation carries the larger of the two operand
//! precisions, and constructors take an explicit [`Precision`]. There is no
//! ambient precision state.
//!
//! Endpoints are extended reals. An operation whose exact result exceeds the
//! exponent range yields an infinite endpoint; the fallible elementary
//! functions report this as [`ArithError::Overflow`] instead.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rug::float::Round;
use rug::ops::{AssignRound, PowAssignRound};
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest significand width accepted by [`Precision::new`].
pub const MIN_BITS: u32 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArithError {
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("{op}: argument outside the domain")]
    DomainError { op: &'static str },
    #[error("{op}: result exceeds the exponent range")]
    Overflow { op: &'static str },
    #[error("{op}: result underflows the exponent range")]
    Underflow { op: &'static str },
    #[error("ambiguous floor: enclosure spans [{lo}, {hi}]")]
    AmbiguousFloor { lo: String, hi: String },
    #[error("precision of {0} bits is below the minimum of {MIN_BITS}")]
    InvalidPrecision(u32),
    #[error("invalid interval bounds")]
    InvalidInterval,
    #[error("cannot parse '{0}' as an exact decimal")]
    Parse(String),
}

pub type Result<T, E = ArithError> = std::result::Result<T, E>;

/// Significand width plus the binary exponent range the values live in.
///
/// The exponent range is MPFR's default, `[1 − 2^30, 2^30 − 1]`, which keeps
/// values such as `10^-4990` far from underflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Precision {
    bits: u32,
    exponent_range: (i64, i64),
}

impl Precision {
    pub const CHAIN_BITS: u32 = 256;
    pub const ORBIT_BITS: u32 = 24_000;

    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_BITS || bits > rug::float::prec_max() {
            return Err(ArithError::InvalidPrecision(bits));
        }
        Ok(Self {
            bits,
            exponent_range: (
                i64::from(rug::float::exp_min()),
                i64::from(rug::float::exp_max()),
            ),
        })
    }

    /// 256 bits: enough for every constant of the chain.
    pub fn chain() -> Self {
        Self::new(Self::CHAIN_BITS).expect("valid default precision")
    }

    /// 24,000 bits: orbit iteration over windows of width `10^-4990`.
    pub fn orbit() -> Self {
        Self::new(Self::ORBIT_BITS).expect("valid default precision")
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn exponent_range(&self) -> (i64, i64) {
        self.exponent_range
    }

    pub fn doubled(&self) -> Self {
        Self::new(self.bits.saturating_mul(2)).unwrap_or(*self)
    }
}

/// An exact decimal `mantissa · 10^exp10`.
///
/// All user-facing inputs (δ, ι, ε, mixing fractions) are decimals, so they
/// can be converted to enclosures at any precision without a detour through
/// binary floating point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: i128,
    exp10: i32,
}

impl Decimal {
    pub fn new(mantissa: i128, exp10: i32) -> Self {
        Self { mantissa, exp10 }.normalized()
    }

    /// `10^exp10`.
    pub fn pow10(exp10: i32) -> Self {
        Self::new(1, exp10)
    }

    pub fn from_int(n: i64) -> Self {
        Self::new(i128::from(n), 0)
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn exp10(&self) -> i32 {
        self.exp10
    }

    fn normalized(mut self) -> Self {
        if self.mantissa == 0 {
            self.exp10 = 0;
            return self;
        }
        while self.mantissa % 10 == 0 {
            self.mantissa /= 10;
            self.exp10 += 1;
        }
        self
    }

    pub fn to_rational(&self) -> Rational {
        let m = Integer::from(self.mantissa);
        let p = Integer::from(Integer::u_pow_u(10, self.exp10.unsigned_abs()));
        if self.exp10 >= 0 {
            Rational::from(m * p)
        } else {
            Rational::from((m, p))
        }
    }

    /// Tightest outward enclosure at `prec`; a point when exactly representable.
    pub fn to_interval(&self, prec: Precision) -> RInterval {
        let q = self.to_rational();
        let mut lo = Float::new(prec.bits());
        let mut hi = Float::new(prec.bits());
        lo.assign_round(&q, Round::Down);
        hi.assign_round(&q, Round::Up);
        RInterval { lo, hi }
    }

    fn aligned(&self, other: &Self) -> Option<(i128, i128, i32)> {
        let e = self.exp10.min(other.exp10);
        let a = self
            .mantissa
            .checked_mul(10i128.checked_pow((self.exp10 - e) as u32)?)?;
        let b = other
            .mantissa
            .checked_mul(10i128.checked_pow((other.exp10 - e) as u32)?)?;
        Some((a, b, e))
    }

    pub fn checked_add(&self, other: &Self) -> Option<Self> {
        let (a, b, e) = self.aligned(other)?;
        Some(Self::new(a.checked_add(b)?, e))
    }

    pub fn checked_sub(&self, other: &Self) -> Option<Self> {
        let (a, b, e) = self.aligned(other)?;
        Some(Self::new(a.checked_sub(b)?, e))
    }

    /// Exact half: `m·10^e / 2 = 5m·10^(e−1)`.
    pub fn checked_half(&self) -> Option<Self> {
        Some(Self::new(self.mantissa.checked_mul(5)?, self.exp10 - 1))
    }

    /// Strictly inside `(0, 1)`.
    pub fn in_open_unit(&self) -> bool {
        self.mantissa > 0 && *self < Decimal::from_int(1)
    }

    pub fn is_positive(&self) -> bool {
        self.mantissa > 0
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.to_rational().cmp(&other.to_rational())
    }
}

impl FromStr for Decimal {
    type Err = ArithError;

    /// Accepts `123`, `-0.85`, `2.5e-3` and `1e-1000`.
    fn from_str(s: &str) -> Result<Self> {
        let err = || ArithError::Parse(s.to_string());
        let t = s.trim();
        let (body, exp) = match t.find(['e', 'E']) {
            Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| err())?),
            None => (t, 0),
        };
        let (neg, body) = match body.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, body.strip_prefix('+').unwrap_or(body)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(err());
        }
        let digits: String = [int_part, frac_part].concat();
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let trimmed = digits.trim_start_matches('0');
        let mantissa: i128 = if trimmed.is_empty() {
            0
        } else {
            trimmed.parse().map_err(|_| err())?
        };
        let exp10 = exp
            .checked_sub(i32::try_from(frac_part.len()).map_err(|_| err())?)
            .ok_or_else(err)?;
        Ok(Self::new(if neg { -mantissa } else { mantissa }, exp10))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let neg = self.mantissa < 0;
        let digits = self.mantissa.unsigned_abs().to_string();
        let sign = if neg { "-" } else { "" };
        let e = self.exp10;
        if (0..=6).contains(&e) {
            write!(f, "{sign}{digits}{}", "0".repeat(e as usize))
        } else if e < 0 && (-e as usize) <= digits.len() + 6 {
            let point = digits.len() as i64 + i64::from(e);
            if point > 0 {
                let (a, b) = digits.split_at(point as usize);
                write!(f, "{sign}{a}.{b}")
            } else {
                write!(f, "{sign}0.{}{digits}", "0".repeat((-point) as usize))
            }
        } else if digits.len() == 1 {
            write!(f, "{sign}{digits}e{e}")
        } else {
            let (a, b) = digits.split_at(1);
            write!(f, "{sign}{a}.{b}e{}", e + b.len() as i32)
        }
    }
}

impl Serialize for Decimal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Round an existing float to `p` bits in direction `r`.
fn cvt(x: &Float, p: u32, r: Round) -> Float {
    Float::with_val_round(p, x, r).0
}

fn is_zero(x: &Float) -> bool {
    x.is_zero()
}

/// Product with the extended-interval convention `0 · ∞ = 0`.
fn mul_r(a: &Float, b: &Float, p: u32, r: Round) -> Float {
    if is_zero(a) || is_zero(b) {
        return Float::new(p);
    }
    Float::with_val_round(p, a * b, r).0
}

fn div_r(a: &Float, b: &Float, p: u32, r: Round) -> Float {
    if is_zero(a) {
        return Float::new(p);
    }
    Float::with_val_round(p, a / b, r).0
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Pos,
    Neg,
    Mixed,
}

/// Closed interval `[lo, hi]` of extended reals.
#[derive(Debug, Clone, PartialEq)]
pub struct RInterval {
    lo: Float,
    hi: Float,
}

impl RInterval {
    pub fn from_bounds(lo: Float, hi: Float) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(ArithError::InvalidInterval);
        }
        let p = lo.prec().max(hi.prec());
        Ok(Self {
            lo: cvt(&lo, p, Round::Down),
            hi: cvt(&hi, p, Round::Up),
        })
    }

    /// Exact point interval around a float.
    pub fn point(x: Float) -> Result<Self> {
        Self::from_bounds(x.clone(), x)
    }

    pub fn from_int(n: i64, prec: Precision) -> Self {
        let lo = Float::with_val_round(prec.bits(), n, Round::Down).0;
        let hi = Float::with_val_round(prec.bits(), n, Round::Up).0;
        Self { lo, hi }
    }

    /// `[−∞, +∞]`.
    pub fn entire(prec: Precision) -> Self {
        Self {
            lo: Float::with_val(prec.bits(), rug::float::Special::NegInfinity),
            hi: Float::with_val(prec.bits(), rug::float::Special::Infinity),
        }
    }

    pub fn zero(prec: Precision) -> Self {
        Self::from_int(0, prec)
    }

    pub fn one(prec: Precision) -> Self {
        Self::from_int(1, prec)
    }

    /// Enclosure of `num / den`.
    pub fn from_ratio(num: i64, den: i64, prec: Precision) -> Result<Self> {
        if den == 0 {
            return Err(ArithError::DivisionByZeroInterval);
        }
        let q = Rational::from((num, den));
        let lo = Float::with_val_round(prec.bits(), &q, Round::Down).0;
        let hi = Float::with_val_round(prec.bits(), &q, Round::Up).0;
        Ok(Self { lo, hi })
    }

    pub fn from_decimal(d: &Decimal, prec: Precision) -> Self {
        d.to_interval(prec)
    }

    /// Enclosure of ln 2.
    pub fn ln2(prec: Precision) -> Self {
        let mut lo = Float::new(prec.bits());
        let mut hi = Float::new(prec.bits());
        lo.assign_round(rug::float::Constant::Log2, Round::Down);
        hi.assign_round(rug::float::Constant::Log2, Round::Up);
        Self { lo, hi }
    }

    pub fn lo(&self) -> &Float {
        &self.lo
    }

    pub fn hi(&self) -> &Float {
        &self.hi
    }

    pub fn prec(&self) -> u32 {
        self.lo.prec().max(self.hi.prec())
    }

    fn p2(&self, other: &Self) -> u32 {
        self.prec().max(other.prec())
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// Error unless both endpoints are finite.
    pub fn finite(self, op: &'static str) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(ArithError::Overflow { op })
        }
    }

    /// Upper bound on `hi − lo`.
    pub fn width(&self) -> Float {
        Float::with_val_round(self.prec(), &self.hi - &self.lo, Round::Up).0
    }

    /// Midpoint as `f64` (display only).
    pub fn mid_f64(&self) -> f64 {
        let p = self.prec() + 1;
        let s = Float::with_val(p, &self.lo + &self.hi);
        s.to_f64() / 2.0
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0 && self.hi >= 0
    }

    /// Every point is `> 0`.
    pub fn is_positive(&self) -> bool {
        self.lo > 0
    }

    /// Every point is `< 0`.
    pub fn is_negative(&self) -> bool {
        self.hi < 0
    }

    pub fn contains_float(&self, x: &Float) -> bool {
        self.lo <= *x && *x <= self.hi
    }

    pub fn contains_rational(&self, q: &Rational) -> bool {
        self.lo <= *q && self.hi >= *q
    }

    pub fn contains_decimal(&self, d: &Decimal) -> bool {
        self.contains_rational(&d.to_rational())
    }

    /// `other ⊆ self`.
    pub fn contains(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        if !self.intersects(other) {
            return None;
        }
        let p = self.p2(other);
        let lo = if self.lo >= other.lo {
            &self.lo
        } else {
            &other.lo
        };
        let hi = if self.hi <= other.hi {
            &self.hi
        } else {
            &other.hi
        };
        Some(Self {
            lo: cvt(lo, p, Round::Down),
            hi: cvt(hi, p, Round::Up),
        })
    }

    pub fn hull(&self, other: &Self) -> Self {
        let p = self.p2(other);
        let lo = if self.lo <= other.lo {
            &self.lo
        } else {
            &other.lo
        };
        let hi = if self.hi >= other.hi {
            &self.hi
        } else {
            &other.hi
        };
        Self {
            lo: cvt(lo, p, Round::Down),
            hi: cvt(hi, p, Round::Up),
        }
    }

    /// Relative distance from `d` to the nearest point of the enclosure,
    /// measured against `|d|` (zero when `d` is inside).
    pub fn rel_distance_to(&self, d: &Decimal) -> f64 {
        let q = d.to_rational();
        if self.contains_rational(&q) {
            return 0.0;
        }
        let p = self.prec().max(128);
        let target = Float::with_val(p, &q);
        let gap = if self.hi < q {
            Float::with_val(p, &target - &self.hi)
        } else {
            Float::with_val(p, &self.lo - &target)
        };
        let denom = Float::with_val(p, target.abs_ref());
        if denom.is_zero() {
            return gap.to_f64();
        }
        Float::with_val(p, &gap / &denom).to_f64()
    }

    /// Outward re-rounding to `bits` (precision may go up or down).
    pub fn round_to(&self, bits: u32) -> Self {
        Self {
            lo: cvt(&self.lo, bits, Round::Down),
            hi: cvt(&self.hi, bits, Round::Up),
        }
    }

    fn sign(&self) -> Sign {
        if self.lo >= 0 {
            Sign::Pos
        } else if self.hi <= 0 {
            Sign::Neg
        } else {
            Sign::Mixed
        }
    }

    pub fn neg(&self) -> Self {
        let p = self.prec();
        Self {
            lo: Float::with_val_round(p, -&self.hi, Round::Down).0,
            hi: Float::with_val_round(p, -&self.lo, Round::Up).0,
        }
    }

    pub fn abs(&self) -> Self {
        match self.sign() {
            Sign::Pos => self.clone(),
            Sign::Neg => self.neg(),
            Sign::Mixed => {
                let p = self.prec();
                let nlo = Float::with_val(p, -&self.lo);
                let hi = if nlo > self.hi { nlo } else { self.hi.clone() };
                Self {
                    lo: Float::new(p),
                    hi,
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let p = self.p2(other);
        Self {
            lo: Float::with_val_round(p, &self.lo + &other.lo, Round::Down).0,
            hi: Float::with_val_round(p, &self.hi + &other.hi, Round::Up).0,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let p = self.p2(other);
        Self {
            lo: Float::with_val_round(p, &self.lo - &other.hi, Round::Down).0,
            hi: Float::with_val_round(p, &self.hi - &other.lo, Round::Up).0,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let p = self.p2(other);
        let (a, b) = (self, other);
        let (d, u) = (Round::Down, Round::Up);
        let (lo, hi) = match (a.sign(), b.sign()) {
            (Sign::Pos, Sign::Pos) => (mul_r(&a.lo, &b.lo, p, d), mul_r(&a.hi, &b.hi, p, u)),
            (Sign::Pos, Sign::Neg) => (mul_r(&a.hi, &b.lo, p, d), mul_r(&a.lo, &b.hi, p, u)),
            (Sign::Pos, Sign::Mixed) => (mul_r(&a.hi, &b.lo, p, d), mul_r(&a.hi, &b.hi, p, u)),
            (Sign::Neg, Sign::Pos) => (mul_r(&a.lo, &b.hi, p, d), mul_r(&a.hi, &b.lo, p, u)),
            (Sign::Neg, Sign::Neg) => (mul_r(&a.hi, &b.hi, p, d), mul_r(&a.lo, &b.lo, p, u)),
            (Sign::Neg, Sign::Mixed) => (mul_r(&a.lo, &b.hi, p, d), mul_r(&a.lo, &b.lo, p, u)),
            (Sign::Mixed, Sign::Pos) => (mul_r(&a.lo, &b.hi, p, d), mul_r(&a.hi, &b.hi, p, u)),
            (Sign::Mixed, Sign::Neg) => (mul_r(&a.hi, &b.lo, p, d), mul_r(&a.lo, &b.lo, p, u)),
            (Sign::Mixed, Sign::Mixed) => {
                let l1 = mul_r(&a.lo, &b.hi, p, d);
                let l2 = mul_r(&a.hi, &b.lo, p, d);
                let h1 = mul_r(&a.lo, &b.lo, p, u);
                let h2 = mul_r(&a.hi, &b.hi, p, u);
                (
                    if l1 <= l2 { l1 } else { l2 },
                    if h1 >= h2 { h1 } else { h2 },
                )
            }
        };
        Self { lo, hi }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        if other.contains_zero() {
            return Err(ArithError::DivisionByZeroInterval);
        }
        let p = self.p2(other);
        let (a, b) = (self, other);
        let (d, u) = (Round::Down, Round::Up);
        let (lo, hi) = if b.is_positive() {
            match a.sign() {
                Sign::Pos => (div_r(&a.lo, &b.hi, p, d), div_r(&a.hi, &b.lo, p, u)),
                Sign::Neg => (div_r(&a.lo, &b.lo, p, d), div_r(&a.hi, &b.hi, p, u)),
                Sign::Mixed => (div_r(&a.lo, &b.lo, p, d), div_r(&a.hi, &b.lo, p, u)),
            }
        } else {
            match a.sign() {
                Sign::Pos => (div_r(&a.hi, &b.hi, p, d), div_r(&a.lo, &b.lo, p, u)),
                Sign::Neg => (div_r(&a.hi, &b.lo, p, d), div_r(&a.lo, &b.hi, p, u)),
                Sign::Mixed => (div_r(&a.hi, &b.hi, p, d), div_r(&a.lo, &b.hi, p, u)),
            }
        };
        Ok(Self { lo, hi })
    }

    pub fn recip(&self) -> Result<Self> {
        Self::one(Precision::new(self.prec().max(MIN_BITS))?).div(self)
    }

    /// `x²`, tight for intervals straddling zero.
    pub fn sqr(&self) -> Self {
        let p = self.prec();
        let sq = |x: &Float, r| {
            let mut y = cvt(x, p, r);
            y.square_round(r);
            y
        };
        match self.sign() {
            Sign::Pos => Self {
                lo: sq(&self.lo, Round::Down),
                hi: sq(&self.hi, Round::Up),
            },
            Sign::Neg => Self {
                lo: sq(&self.hi, Round::Down),
                hi: sq(&self.lo, Round::Up),
            },
            Sign::Mixed => {
                let a = sq(&self.lo, Round::Up);
                let b = sq(&self.hi, Round::Up);
                Self {
                    lo: Float::new(p),
                    hi: if a >= b { a } else { b },
                }
            }
        }
    }

    /// Multiply by `2^k` (exact).
    pub fn mul_pow2(&self, k: i32) -> Self {
        let p = self.prec();
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo <<= k;
        hi <<= k;
        Self {
            lo: cvt(&lo, p, Round::Down),
            hi: cvt(&hi, p, Round::Up),
        }
    }

    fn monotone(
        &self,
        op: &'static str,
        f: impl Fn(&mut Float, Round) -> Ordering,
    ) -> Result<Self> {
        let p = self.prec();
        let mut lo = cvt(&self.lo, p, Round::Down);
        let mut hi = cvt(&self.hi, p, Round::Up);
        f(&mut lo, Round::Down);
        f(&mut hi, Round::Up);
        if lo.is_nan() || hi.is_nan() {
            return Err(ArithError::DomainError { op });
        }
        if (hi.is_infinite() && self.hi.is_finite()) || (lo.is_infinite() && self.lo.is_finite()) {
            return Err(ArithError::Overflow { op });
        }
        Ok(Self { lo, hi })
    }

    pub fn exp(&self) -> Result<Self> {
        let r = self.monotone("exp", |x, rd| x.exp_round(rd))?;
        if r.lo.is_zero() && self.lo.is_finite() {
            return Err(ArithError::Underflow { op: "exp" });
        }
        Ok(r)
    }

    /// `e^x − 1`, accurate for tiny `x`.
    pub fn exp_m1(&self) -> Result<Self> {
        self.monotone("exp_m1", |x, rd| x.exp_m1_round(rd))
    }

    pub fn ln(&self) -> Result<Self> {
        if !self.is_positive() {
            return Err(ArithError::DomainError { op: "ln" });
        }
        self.monotone("ln", |x, rd| x.ln_round(rd))
    }

    /// `ln(1 + x)`, accurate for tiny `x`.
    pub fn ln_1p(&self) -> Result<Self> {
        if self.lo <= -1 {
            return Err(ArithError::DomainError { op: "ln_1p" });
        }
        self.monotone("ln_1p", |x, rd| x.ln_1p_round(rd))
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.lo < 0 {
            return Err(ArithError::DomainError { op: "sqrt" });
        }
        self.monotone("sqrt", |x, rd| x.sqrt_round(rd))
    }

    /// `x^y := exp(y · ln x)` for `x > 0`.
    pub fn pow(&self, y: &Self) -> Result<Self> {
        if !self.is_positive() {
            return Err(ArithError::DomainError { op: "pow" });
        }
        y.mul(&self.ln()?).exp()
    }

    /// Integer power by correctly rounded MPFR powering.
    pub fn powi(&self, n: i64) -> Result<Self> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let n = u32::try_from(n).map_err(|_| ArithError::Overflow { op: "powi" })?;
        let p = self.prec();
        let pw = |x: &Float, r: Round| {
            let mut y = cvt(x, p, r);
            y.pow_assign_round(n, r);
            y
        };
        let r = if n == 0 {
            Self::one(Precision::new(p)?)
        } else {
            match (self.sign(), n % 2 == 0) {
                (Sign::Pos, _) | (_, false) => Self {
                    lo: pw(&self.lo, Round::Down),
                    hi: pw(&self.hi, Round::Up),
                },
                (Sign::Neg, true) => Self {
                    lo: pw(&self.hi, Round::Down),
                    hi: pw(&self.lo, Round::Up),
                },
                (Sign::Mixed, true) => {
                    let a = pw(&self.lo, Round::Up);
                    let b = pw(&self.hi, Round::Up);
                    Self {
                        lo: Float::new(p),
                        hi: if a >= b { a } else { b },
                    }
                }
            }
        };
        if (r.hi.is_infinite() && self.hi.is_finite())
            || (r.lo.is_infinite() && self.lo.is_finite())
        {
            return Err(ArithError::Overflow { op: "powi" });
        }
        Ok(r)
    }

    pub fn min(&self, other: &Self) -> Self {
        let p = self.p2(other);
        let lo = if self.lo <= other.lo {
            &self.lo
        } else {
            &other.lo
        };
        let hi = if self.hi <= other.hi {
            &self.hi
        } else {
            &other.hi
        };
        Self {
            lo: cvt(lo, p, Round::Down),
            hi: cvt(hi, p, Round::Up),
        }
    }

    pub fn max(&self, other: &Self) -> Self {
        let p = self.p2(other);
        let lo = if self.lo >= other.lo {
            &self.lo
        } else {
            &other.lo
        };
        let hi = if self.hi >= other.hi {
            &self.hi
        } else {
            &other.hi
        };
        Self {
            lo: cvt(lo, p, Round::Down),
            hi: cvt(hi, p, Round::Up),
        }
    }

    /// The common integer floor of both endpoints.
    pub fn floor_int(&self) -> Result<i64> {
        let fl = |x: &Float| x.to_integer_round(Round::Down).map(|(i, _)| i);
        let (Some(a), Some(b)) = (fl(&self.lo), fl(&self.hi)) else {
            return Err(ArithError::Overflow { op: "floor_int" });
        };
        if a != b {
            return Err(ArithError::AmbiguousFloor {
                lo: a.to_string(),
                hi: b.to_string(),
            });
        }
        a.to_i64().ok_or(ArithError::Overflow { op: "floor_int" })
    }

    /// `⌊log₄ x⌋` for `x > 0`, read off the binary exponents of both
    /// endpoints (exact: no logarithm is evaluated).
    pub fn floor_log4(&self) -> Result<i64> {
        if !self.is_positive() || !self.hi.is_finite() {
            return Err(ArithError::DomainError { op: "floor_log4" });
        }
        // x = m·2^e with m ∈ [1/2, 1), so ⌊log₂ x⌋ = e − 1.
        let f = |x: &Float| i64::from(x.get_exp().expect("finite nonzero") - 1).div_euclid(2);
        let (a, b) = (f(&self.lo), f(&self.hi));
        if a != b {
            return Err(ArithError::AmbiguousFloor {
                lo: a.to_string(),
                hi: b.to_string(),
            });
        }
        Ok(a)
    }

    /// Midpoint rendered with `digits` significant decimal digits.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        let p = self.prec() + 1;
        let mut m = Float::with_val(p, &self.lo + &self.hi);
        m >>= 1;
        format_float(&m, digits, Round::Nearest)
    }

    /// Serialize as two decimal scientific strings, `lo` rounded down and
    /// `hi` rounded up, with enough digits to recover the binary endpoints
    /// exactly at the same precision.
    pub fn to_repr(&self) -> IntervalRepr {
        let digits = repr_digits(self.prec());
        IntervalRepr {
            lo: sci_string(&self.lo, digits, Round::Down),
            hi: sci_string(&self.hi, digits, Round::Up),
        }
    }

    /// Inverse of [`RInterval::to_repr`] at the precision that produced it.
    /// Each decimal is rounded inward onto the binary grid, which recovers
    /// the original endpoints exactly.
    pub fn from_repr(repr: &IntervalRepr, prec: Precision) -> Result<Self> {
        let parse = |s: &str, r: Round| -> Result<Float> {
            let v = Float::parse(s).map_err(|_| ArithError::Parse(s.to_string()))?;
            Ok(Float::with_val_round(prec.bits(), v, r).0)
        };
        let lo = parse(&repr.lo, Round::Up)?;
        let hi = parse(&repr.hi, Round::Down)?;
        Self::from_bounds(lo, hi)
    }
}

fn repr_digits(bits: u32) -> usize {
    // ceil(bits · log10 2) + 2
    (f64::from(bits) * std::f64::consts::LOG10_2).ceil() as usize + 2
}

fn sci_string(x: &Float, digits: usize, r: Round) -> String {
    if x.is_infinite() {
        return if x.is_sign_negative() { "-inf" } else { "inf" }.to_string();
    }
    let (neg, mant, exp) = x.to_sign_string_exp_round(10, Some(digits), r);
    let sign = if neg { "-" } else { "" };
    match exp {
        None => format!("{sign}0"),
        Some(e) => {
            let mant = mant.trim_end_matches('0');
            let (a, b) = mant.split_at(1);
            if b.is_empty() {
                format!("{sign}{a}e{}", e - 1)
            } else {
                format!("{sign}{a}.{b}e{}", e - 1)
            }
        }
    }
}

/// Human-readable rendering with `digits` significant digits; plain
/// positional notation for moderate exponents, scientific otherwise.
pub fn format_float(x: &Float, digits: usize, r: Round) -> String {
    if !x.is_finite() {
        return sci_string(x, digits, r);
    }
    let (neg, mant, exp) = x.to_sign_string_exp_round(10, Some(digits), r);
    let sign = if neg { "-" } else { "" };
    let Some(e) = exp else {
        return "0".to_string();
    };
    let mant = mant.trim_end_matches('0');
    let mant = if mant.is_empty() { "0" } else { mant };
    if (-4..=16).contains(&e) {
        if e <= 0 {
            format!("{sign}0.{}{mant}", "0".repeat((-e) as usize))
        } else if (e as usize) >= mant.len() {
            format!("{sign}{mant}{}", "0".repeat(e as usize - mant.len()))
        } else {
            let (a, b) = mant.split_at(e as usize);
            format!("{sign}{a}.{b}")
        }
    } else {
        let (a, b) = mant.split_at(1);
        if b.is_empty() {
            format!("{sign}{a}e{}", e - 1)
        } else {
            format!("{sign}{a}.{b}e{}", e - 1)
        }
    }
}

impl fmt::Display for RInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = f.precision().unwrap_or(15);
        write!(
            f,
            "[{}, {}]",
            format_float(&self.lo, d, Round::Down),
            format_float(&self.hi, d, Round::Up)
        )
    }
}

/// Wire form of an [`RInterval`]: `{"lo": "...", "hi": "..."}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalRepr {
    pub lo: String,
    pub hi: String,
}

impl Serialize for RInterval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_repr().serialize(s)
    }
}

macro_rules! impl_binop {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr<&RInterval> for &RInterval {
            type Output = RInterval;
            fn $m(self, rhs: &RInterval) -> RInterval {
                RInterval::$m(self, rhs)
            }
        }
        impl std::ops::$tr<RInterval> for RInterval {
            type Output = RInterval;
            fn $m(self, rhs: RInterval) -> RInterval {
                RInterval::$m(&self, &rhs)
            }
        }
        impl std::ops::$tr<&RInterval> for RInterval {
            type Output = RInterval;
            fn $m(self, rhs: &RInterval) -> RInterval {
                RInterval::$m(&self, rhs)
            }
        }
        impl std::ops::$tr<RInterval> for &RInterval {
            type Output = RInterval;
            fn $m(self, rhs: RInterval) -> RInterval {
                RInterval::$m(self, &rhs)
            }
        }
    };
}

impl_binop!(Add, add);
impl_binop!(Sub, sub);
impl_binop!(Mul, mul);

impl std::ops::Neg for &RInterval {
    type Output = RInterval;
    fn neg(self) -> RInterval {
        RInterval::neg(self)
    }
}

impl std::ops::Neg for RInterval {
    type Output = RInterval;
    fn neg(self) -> RInterval {
        RInterval::neg(&self)
    }
}
