//! Arithmetic environments: native binary64, native binary32, and a base-10
//! `t`-significant-digit machine implemented with integer mantissas.
//!
//! Every multiplication routine in this crate is generic over [`Arith`], so the
//! same code path is measured in each environment. The rounding model is the
//! usual `fl(x op y) = (x op y)(1 + d)` with `|d| <= epsilon_machine`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Largest decimal exponent (scientific notation) a decimal machine can hold.
pub const DECIMAL_MAX_EXPONENT: i32 = 99;

/// Significant digits kept by additions under [`RoundingScope::ProductsOnly`].
pub const WIDE_DIGITS: u32 = 16;

/// Scalar operations of one arithmetic environment.
///
/// Implementations must be deterministic and must not depend on the platform's
/// floating-point environment beyond IEEE 754 round-to-nearest-even.
pub trait Arith: Copy + Send + Sync + fmt::Debug {
    type Elem: Copy + Send + Sync + PartialEq + fmt::Debug + 'static;

    fn zero(self) -> Self::Elem;
    /// `fl(x)`: the representation of a double in this environment.
    fn round(self, x: f64) -> Self::Elem;
    fn to_f64(self, x: Self::Elem) -> f64;
    fn add(self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn sub(self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn mul(self, a: Self::Elem, b: Self::Elem) -> Self::Elem;
    fn neg(self, a: Self::Elem) -> Self::Elem;
    fn abs(self, a: Self::Elem) -> Self::Elem;
    /// Correctly rounded `1 / a`.
    fn recip(self, a: Self::Elem) -> Self::Elem;
    /// Correctly rounded square root.
    fn sqrt(self, a: Self::Elem) -> Self::Elem;
    fn is_zero(self, a: Self::Elem) -> bool;
    fn is_finite(self, a: Self::Elem) -> bool;
    /// `a > b`, exact.
    fn gt(self, a: Self::Elem, b: Self::Elem) -> bool;
    fn epsilon(self) -> f64;
    fn mode(self) -> ScalarMode;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct F64Arith;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct F32Arith;

impl Arith for F64Arith {
    type Elem = f64;

    #[inline]
    fn zero(self) -> f64 {
        0.0
    }
    #[inline]
    fn round(self, x: f64) -> f64 {
        x
    }
    #[inline]
    fn to_f64(self, x: f64) -> f64 {
        x
    }
    #[inline]
    fn add(self, a: f64, b: f64) -> f64 {
        a + b
    }
    #[inline]
    fn sub(self, a: f64, b: f64) -> f64 {
        a - b
    }
    #[inline]
    fn mul(self, a: f64, b: f64) -> f64 {
        a * b
    }
    #[inline]
    fn neg(self, a: f64) -> f64 {
        -a
    }
    #[inline]
    fn abs(self, a: f64) -> f64 {
        a.abs()
    }
    #[inline]
    fn recip(self, a: f64) -> f64 {
        1.0 / a
    }
    #[inline]
    fn sqrt(self, a: f64) -> f64 {
        a.sqrt()
    }
    #[inline]
    fn is_zero(self, a: f64) -> bool {
        a == 0.0
    }
    #[inline]
    fn is_finite(self, a: f64) -> bool {
        a.is_finite()
    }
    #[inline]
    fn gt(self, a: f64, b: f64) -> bool {
        a > b
    }
    fn epsilon(self) -> f64 {
        f64::EPSILON / 2.0
    }
    fn mode(self) -> ScalarMode {
        ScalarMode::F64
    }
}

impl Arith for F32Arith {
    type Elem = f32;

    #[inline]
    fn zero(self) -> f32 {
        0.0
    }
    #[inline]
    fn round(self, x: f64) -> f32 {
        x as f32
    }
    #[inline]
    fn to_f64(self, x: f32) -> f64 {
        x as f64
    }
    #[inline]
    fn add(self, a: f32, b: f32) -> f32 {
        a + b
    }
    #[inline]
    fn sub(self, a: f32, b: f32) -> f32 {
        a - b
    }
    #[inline]
    fn mul(self, a: f32, b: f32) -> f32 {
        a * b
    }
    #[inline]
    fn neg(self, a: f32) -> f32 {
        -a
    }
    #[inline]
    fn abs(self, a: f32) -> f32 {
        a.abs()
    }
    #[inline]
    fn recip(self, a: f32) -> f32 {
        1.0 / a
    }
    #[inline]
    fn sqrt(self, a: f32) -> f32 {
        a.sqrt()
    }
    #[inline]
    fn is_zero(self, a: f32) -> bool {
        a == 0.0
    }
    #[inline]
    fn is_finite(self, a: f32) -> bool {
        a.is_finite()
    }
    #[inline]
    fn gt(self, a: f32, b: f32) -> bool {
        a > b
    }
    fn epsilon(self) -> f64 {
        (f32::EPSILON / 2.0) as f64
    }
    fn mode(self) -> ScalarMode {
        ScalarMode::F32
    }
}

/// Tie-breaking rule of the decimal machine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum TieRule {
    #[default]
    HalfEven,
    HalfAway,
}

/// Which operations of the decimal machine round to `digits` significant digits.
///
/// `AllOps` is the standard model. `ProductsOnly` rounds inputs and products to
/// `digits` digits but keeps sums at [`WIDE_DIGITS`] digits, which is exact for
/// every short sum of short operands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RoundingScope {
    #[default]
    AllOps,
    ProductsOnly,
}

/// A decimal value `mantissa * 10^exponent` with trailing zeros stripped.
///
/// The representation is canonical, so derived equality is value equality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: i128,
    exponent: i32,
}

impl Decimal {
    pub const ZERO: Decimal = Decimal { mantissa: 0, exponent: 0 };
    /// Sentinel for overflowed or invalid results. Propagates through every operation.
    pub const INVALID: Decimal = Decimal { mantissa: 0, exponent: i32::MAX };

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    pub fn is_invalid(&self) -> bool {
        self.exponent == i32::MAX
    }

    /// Exponent of the leading digit in scientific notation.
    fn sci_exponent(&self) -> i32 {
        self.exponent + digit_count(self.mantissa) as i32 - 1
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_invalid() {
            write!(f, "NaN")
        } else {
            write!(f, "{}e{}", self.mantissa, self.exponent)
        }
    }
}

const POW10: [i128; 39] = {
    let mut table = [1i128; 39];
    let mut i = 1;
    while i < 39 {
        table[i] = table[i - 1] * 10;
        i += 1;
    }
    table
};

fn digit_count(m: i128) -> u32 {
    let m = m.unsigned_abs();
    if m == 0 {
        return 1;
    }
    let mut d = 1;
    while d < 39 && m >= POW10[d as usize] as u128 {
        d += 1;
    }
    d
}

fn isqrt(n: i128) -> i128 {
    debug_assert!(n >= 0);
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as i128;
    while x > 0 && x.checked_mul(x).is_none_or(|sq| sq > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|sq| sq <= n) {
        x += 1;
    }
    x
}

/// The base-10 machine: `digits` significant digits, exponents within ±99.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DecimalArith {
    digits: u32,
    tie: TieRule,
    scope: RoundingScope,
}

impl DecimalArith {
    /// At most 15 digits, so every machine value converts to a distinct double.
    pub fn new(digits: u32, tie: TieRule, scope: RoundingScope) -> Result<Self> {
        if !(1..=15).contains(&digits) {
            return Err(Error::InvalidArgument(format!(
                "decimal digits must be in 1..=15, got {digits}"
            )));
        }
        Ok(Self { digits, tie, scope })
    }

    pub fn digits(&self) -> u32 {
        self.digits
    }

    pub fn tie(&self) -> TieRule {
        self.tie
    }

    pub fn scope(&self) -> RoundingScope {
        self.scope
    }

    fn sum_digits(&self) -> u32 {
        match self.scope {
            RoundingScope::AllOps => self.digits,
            RoundingScope::ProductsOnly => WIDE_DIGITS,
        }
    }

    /// Round `m * 10^e` to `p` significant digits and canonicalize.
    fn finish(&self, mut m: i128, mut e: i32, p: u32) -> Decimal {
        if m == 0 {
            return Decimal::ZERO;
        }
        let nd = digit_count(m);
        if nd > p {
            let k = nd - p;
            let pow = POW10[k as usize];
            let mut q = m / pow;
            let r = (m % pow).unsigned_abs() * 2;
            let pow = pow as u128;
            let sign = m.signum();
            let bump = match r.cmp(&pow) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => match self.tie {
                    TieRule::HalfEven => q % 2 != 0,
                    TieRule::HalfAway => true,
                },
            };
            if bump {
                q += sign;
            }
            m = q;
            e += k as i32;
        }
        while m != 0 && m % 10 == 0 {
            m /= 10;
            e += 1;
        }
        let d = Decimal { mantissa: m, exponent: e };
        let sci = d.sci_exponent();
        if sci > DECIMAL_MAX_EXPONENT {
            Decimal::INVALID
        } else if sci < -DECIMAL_MAX_EXPONENT {
            Decimal::ZERO
        } else {
            d
        }
    }

    fn add_impl(&self, a: Decimal, b: Decimal) -> Decimal {
        if a.is_invalid() || b.is_invalid() {
            return Decimal::INVALID;
        }
        let p = self.sum_digits();
        if a.mantissa == 0 {
            return self.finish(b.mantissa, b.exponent, p);
        }
        if b.mantissa == 0 {
            return self.finish(a.mantissa, a.exponent, p);
        }
        let (big, mut small) = if a.sci_exponent() >= b.sci_exponent() { (a, b) } else { (b, a) };
        // An operand this far below the leading digit cannot change the rounded
        // sum; a one-digit stand-in with the same sign rounds identically and
        // keeps the aligned sum inside i128.
        let floor = big.sci_exponent() - p as i32 - 3;
        if small.sci_exponent() < floor {
            small = Decimal { mantissa: small.mantissa.signum(), exponent: floor };
        }
        let e = big.exponent.min(small.exponent);
        let m = big.mantissa * POW10[(big.exponent - e) as usize]
            + small.mantissa * POW10[(small.exponent - e) as usize];
        self.finish(m, e, p)
    }

    fn decompose(x: f64, p: u32, tie: TieRule) -> Option<(i128, i32)> {
        // `{:e}` with 800 fractional digits is the exact binary value: no double
        // has more than 767 significant decimal digits.
        let s = format!("{:.800e}", x.abs());
        let (digits, exp) = s.split_once('e')?;
        let exp: i32 = exp.parse().ok()?;
        let digits: Vec<u8> = digits.bytes().filter(|b| b.is_ascii_digit()).map(|b| b - b'0').collect();
        let p = p as usize;
        let mut m: i128 = 0;
        for &d in &digits[..p] {
            m = m * 10 + d as i128;
        }
        let rest = &digits[p..];
        let bump = match rest.first() {
            Some(&d) if d > 5 => true,
            Some(&5) => {
                if rest[1..].iter().any(|&d| d != 0) {
                    true
                } else {
                    match tie {
                        TieRule::HalfEven => m % 2 != 0,
                        TieRule::HalfAway => true,
                    }
                }
            }
            _ => false,
        };
        if bump {
            m += 1;
        }
        let m = if x < 0.0 { -m } else { m };
        Some((m, exp - (p as i32 - 1)))
    }
}

impl Arith for DecimalArith {
    type Elem = Decimal;

    fn zero(self) -> Decimal {
        Decimal::ZERO
    }

    fn round(self, x: f64) -> Decimal {
        if !x.is_finite() {
            return Decimal::INVALID;
        }
        if x == 0.0 {
            return Decimal::ZERO;
        }
        match Self::decompose(x, self.digits, self.tie) {
            Some((m, e)) => self.finish(m, e, self.digits),
            None => Decimal::INVALID,
        }
    }

    fn to_f64(self, x: Decimal) -> f64 {
        if x.is_invalid() {
            return f64::NAN;
        }
        format!("{}e{}", x.mantissa, x.exponent).parse().unwrap_or(f64::NAN)
    }

    fn add(self, a: Decimal, b: Decimal) -> Decimal {
        self.add_impl(a, b)
    }

    fn sub(self, a: Decimal, b: Decimal) -> Decimal {
        self.add_impl(a, self.neg(b))
    }

    fn mul(self, a: Decimal, b: Decimal) -> Decimal {
        if a.is_invalid() || b.is_invalid() {
            return Decimal::INVALID;
        }
        if a.mantissa == 0 || b.mantissa == 0 {
            return Decimal::ZERO;
        }
        // Wide sums can carry up to WIDE_DIGITS digits; shorten operands that
        // would not fit an i128 product.
        let (a, b) = if digit_count(a.mantissa) + digit_count(b.mantissa) > 36 {
            (self.finish(a.mantissa, a.exponent, 18), self.finish(b.mantissa, b.exponent, 18))
        } else {
            (a, b)
        };
        self.finish(a.mantissa * b.mantissa, a.exponent + b.exponent, self.digits)
    }

    fn neg(self, a: Decimal) -> Decimal {
        if a.is_invalid() {
            a
        } else {
            Decimal { mantissa: -a.mantissa, exponent: a.exponent }
        }
    }

    fn abs(self, a: Decimal) -> Decimal {
        if a.is_invalid() {
            a
        } else {
            Decimal { mantissa: a.mantissa.abs(), exponent: a.exponent }
        }
    }

    fn recip(self, a: Decimal) -> Decimal {
        if a.is_invalid() || a.mantissa == 0 {
            return Decimal::INVALID;
        }
        let p = self.digits;
        let k = p + 2 + digit_count(a.mantissa);
        let num = POW10[k as usize];
        let den = a.mantissa.abs();
        let q = num / den;
        let sticky = (num % den != 0) as i128;
        let m = (q * 10 + sticky) * a.mantissa.signum();
        self.finish(m, -a.exponent - k as i32 - 1, p)
    }

    fn sqrt(self, a: Decimal) -> Decimal {
        if a.is_invalid() || a.mantissa < 0 {
            return Decimal::INVALID;
        }
        if a.mantissa == 0 {
            return Decimal::ZERO;
        }
        let p = self.digits;
        let (mut m, mut e) = (a.mantissa, a.exponent);
        if e.rem_euclid(2) != 0 {
            m *= 10;
            e -= 1;
        }
        let want = 2 * (p + 2);
        let have = digit_count(m);
        let j = if have < want { (want - have).div_ceil(2) } else { 0 };
        let n = m * POW10[(2 * j) as usize];
        let r = isqrt(n);
        let sticky = (r * r != n) as i128;
        self.finish(r * 10 + sticky, e / 2 - j as i32 - 1, p)
    }

    fn is_zero(self, a: Decimal) -> bool {
        !a.is_invalid() && a.mantissa == 0
    }

    fn is_finite(self, a: Decimal) -> bool {
        !a.is_invalid()
    }

    fn gt(self, a: Decimal, b: Decimal) -> bool {
        // Canonical values of at most 15 digits map to distinct, order-preserving doubles.
        self.to_f64(a) > self.to_f64(b)
    }

    fn epsilon(self) -> f64 {
        0.5 * 10f64.powi(1 - self.digits as i32)
    }

    fn mode(self) -> ScalarMode {
        ScalarMode::Decimal(self)
    }
}

/// The arithmetic environment in which a multiplication is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScalarMode {
    F64,
    F32,
    Decimal(DecimalArith),
}

impl ScalarMode {
    /// `dec(t)` with round-half-even and every operation rounded.
    pub fn decimal(digits: u32) -> Result<Self> {
        Ok(ScalarMode::Decimal(DecimalArith::new(digits, TieRule::HalfEven, RoundingScope::AllOps)?))
    }

    /// Unit roundoff: 2^-53, 2^-24 or 0.5 * 10^(1 - t).
    pub fn epsilon_machine(&self) -> f64 {
        match self {
            ScalarMode::F64 => F64Arith.epsilon(),
            ScalarMode::F32 => F32Arith.epsilon(),
            ScalarMode::Decimal(d) => d.epsilon(),
        }
    }
}

impl fmt::Display for ScalarMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarMode::F64 => write!(f, "f64"),
            ScalarMode::F32 => write!(f, "f32"),
            ScalarMode::Decimal(d) => {
                write!(f, "dec{}", d.digits)?;
                if d.tie == TieRule::HalfAway {
                    write!(f, ":away")?;
                }
                if d.scope == RoundingScope::ProductsOnly {
                    write!(f, ":products")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for ScalarMode {
    type Err = Error;

    /// Accepts `f64`, `f32`, `double`, `single`, and `dec<t>[:even|:away][:all|:products]`.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f64" | "double" => return Ok(ScalarMode::F64),
            "f32" | "single" => return Ok(ScalarMode::F32),
            _ => {}
        }
        let lower = s.to_ascii_lowercase();
        let mut parts = lower.split(':');
        let head = parts.next().unwrap_or_default();
        let digits: u32 = head
            .strip_prefix("dec")
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| Error::Parse(format!("unknown precision '{s}'")))?;
        let mut tie = TieRule::HalfEven;
        let mut scope = RoundingScope::AllOps;
        for part in parts {
            match part {
                "even" => tie = TieRule::HalfEven,
                "away" => tie = TieRule::HalfAway,
                "all" => scope = RoundingScope::AllOps,
                "products" => scope = RoundingScope::ProductsOnly,
                other => return Err(Error::Parse(format!("unknown decimal option '{other}'"))),
            }
        }
        Ok(ScalarMode::Decimal(DecimalArith::new(digits, tie, scope)?))
    }
}

/// Run `$body` with `$ar` bound to the [`Arith`] implementation of `$mode`.
macro_rules! with_arith {
    ($mode:expr, |$ar:ident| $body:expr) => {
        match $mode {
            $crate::precision::ScalarMode::F64 => {
                let $ar = $crate::precision::F64Arith;
                $body
            }
            $crate::precision::ScalarMode::F32 => {
                let $ar = $crate::precision::F32Arith;
                $body
            }
            $crate::precision::ScalarMode::Decimal(d) => {
                let $ar = d;
                $body
            }
        }
    };
}
pub(crate) use with_arith;

/// Arithmetic operators covered by the rounding model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
}

fn overflow(mode: ScalarMode) -> Error {
    Error::Overflow { mode: mode.to_string() }
}

fn checked<A: Arith>(ar: A, x: A::Elem) -> Result<f64> {
    if ar.is_finite(x) {
        Ok(ar.to_f64(x))
    } else {
        Err(overflow(ar.mode()))
    }
}

/// `fl(x)` in `mode`, returned as the double carrying the same value.
pub fn fl(x: f64, mode: ScalarMode) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("fl of non-finite value {x}")));
    }
    with_arith!(mode, |ar| checked(ar, ar.round(x)))
}

/// `fl(x op y)`. Operands are passed through `fl` first, which is the identity
/// for values already representable in `mode`.
pub fn rounded_op(x: f64, y: f64, op: Op, mode: ScalarMode) -> Result<f64> {
    with_arith!(mode, |ar| {
        let (a, b) = (ar.round(x), ar.round(y));
        let r = match op {
            Op::Add => ar.add(a, b),
            Op::Sub => ar.sub(a, b),
            Op::Mul => ar.mul(a, b),
        };
        checked(ar, r)
    })
}

/// Left-to-right rounded sum. The empty sum is zero.
pub fn sequential_sum(values: &[f64], mode: ScalarMode) -> Result<f64> {
    with_arith!(mode, |ar| {
        let mut acc = ar.zero();
        for (i, &v) in values.iter().enumerate() {
            let v = ar.round(v);
            acc = if i == 0 { v } else { ar.add(acc, v) };
        }
        checked(ar, acc)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dec(t: u32) -> ScalarMode {
        ScalarMode::decimal(t).unwrap()
    }

    #[test]
    fn two_digit_rounding() {
        assert_eq!(fl(0.99, dec(2)).unwrap(), 0.99);
        assert_eq!(fl(0.0010, dec(2)).unwrap(), 0.001);
        assert_eq!(fl(0.99 * 0.99, dec(2)).unwrap(), 0.98);
        assert_eq!(fl(1.98, dec(2)).unwrap(), 2.0);
        assert_eq!(fl(-0.0456, dec(2)).unwrap(), -0.046);
        assert_eq!(fl(0.0, dec(2)).unwrap(), 0.0);
    }

    #[test]
    fn double_is_identity() {
        for x in [0.1, -3.75e-300, 1.0 / 3.0, f64::MAX] {
            assert_eq!(fl(x, ScalarMode::F64).unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn ties_follow_rule() {
        // 0.125 and 0.375 are exact binary values, so these are genuine ties.
        let even = dec(2);
        let away: ScalarMode = "dec2:away".parse().unwrap();
        assert_eq!(fl(0.125, even).unwrap(), 0.12);
        assert_eq!(fl(0.125, away).unwrap(), 0.13);
        assert_eq!(fl(0.375, even).unwrap(), 0.38);
        assert_eq!(fl(-0.125, away).unwrap(), -0.13);
        assert_eq!(rounded_op(0.12, 0.005, Op::Add, even).unwrap(), 0.12);
        assert_eq!(rounded_op(0.12, 0.005, Op::Add, away).unwrap(), 0.13);
    }

    #[test]
    fn swamping() {
        assert_eq!(rounded_op(0.98, 0.0000010, Op::Add, dec(2)).unwrap(), 0.98);
        assert_eq!(rounded_op(1.0, -1e-40, Op::Add, dec(2)).unwrap(), 1.0);
        assert_eq!(rounded_op(1.0, -0.06, Op::Add, dec(2)).unwrap(), 0.94);
        assert_eq!(sequential_sum(&[1.0, 0.004, 0.004], dec(2)).unwrap(), 1.0);
    }

    #[test]
    fn sequential_sum_edges() {
        assert_eq!(sequential_sum(&[], dec(3)).unwrap(), 0.0);
        assert_eq!(sequential_sum(&[0.123], dec(3)).unwrap(), 0.123);
        assert_eq!(sequential_sum(&[1.0, 2.0, 3.0], ScalarMode::F32).unwrap(), 6.0);
    }

    #[test]
    fn overflow_is_an_error() {
        assert!(matches!(fl(1e100, dec(2)), Err(Error::Overflow { .. })));
        assert!(matches!(rounded_op(1e60, 1e60, Op::Mul, dec(2)), Err(Error::Overflow { .. })));
        assert!(matches!(rounded_op(3e38, 3e38, Op::Add, ScalarMode::F32), Err(Error::Overflow { .. })));
        assert!(fl(9.9e99, dec(2)).is_ok());
    }

    #[test]
    fn products_only_scope_keeps_sums() {
        let m: ScalarMode = "dec2:products".parse().unwrap();
        assert_eq!(rounded_op(0.99, 0.001, Op::Add, m).unwrap(), 0.991);
        assert_eq!(rounded_op(0.99, 0.99, Op::Mul, m).unwrap(), 0.98);
    }

    #[test]
    fn recip_and_sqrt_are_correctly_rounded() {
        let ar = DecimalArith::new(3, TieRule::HalfEven, RoundingScope::AllOps).unwrap();
        let r = |x: f64| ar.to_f64(ar.recip(ar.round(x)));
        assert_eq!(r(3.0), 0.333);
        assert_eq!(r(7.0), 0.143);
        assert_eq!(r(-0.25), -4.0);
        let s = |x: f64| ar.to_f64(ar.sqrt(ar.round(x)));
        assert_eq!(s(2.0), 1.41);
        assert_eq!(s(0.4), 0.632);
        assert_eq!(s(16.0), 4.0);
        assert!(!ar.is_finite(ar.sqrt(ar.round(-1.0))));
    }

    #[test]
    fn parse_and_display() {
        for s in ["f64", "f32", "dec2", "dec7:away", "dec2:products", "dec3:away:products"] {
            let m: ScalarMode = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("dec0".parse::<ScalarMode>().is_err());
        assert!("dec16".parse::<ScalarMode>().is_err());
        assert!("f16".parse::<ScalarMode>().is_err());
        assert_eq!(dec(2).epsilon_machine(), 0.05);
        assert_eq!(ScalarMode::F32.epsilon_machine(), 2f64.powi(-24));
        assert_eq!(ScalarMode::F64.epsilon_machine(), 2f64.powi(-53));
    }

    fn modes() -> impl Strategy<Value = ScalarMode> {
        prop_oneof![
            Just(ScalarMode::F64),
            Just(ScalarMode::F32),
            (1u32..=8).prop_map(|t| ScalarMode::decimal(t).unwrap()),
            (1u32..=8).prop_map(|t| ScalarMode::Decimal(
                DecimalArith::new(t, TieRule::HalfAway, RoundingScope::AllOps).unwrap()
            )),
        ]
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6f64..1e6, -1.0f64..1.0]
    }

    proptest! {
        #[test]
        fn rounding_model_holds(mode in modes(), x in finite(), y in finite(), op in prop_oneof![Just(Op::Add), Just(Op::Sub), Just(Op::Mul)]) {
            let (x, y) = (fl(x, mode).unwrap(), fl(y, mode).unwrap());
            let exact = match op { Op::Add => x + y, Op::Sub => x - y, Op::Mul => x * y };
            let got = rounded_op(x, y, op, mode).unwrap();
            // Decimal operands are exact doubles only up to the double's own rounding.
            let slack = if matches!(mode, ScalarMode::Decimal(_)) { 4.0 * f64::EPSILON * exact.abs() } else { 0.0 };
            prop_assert!((got - exact).abs() <= mode.epsilon_machine() * exact.abs() + slack,
                "{x} {op:?} {y} = {got}, exact {exact}");
        }

        #[test]
        fn fl_is_idempotent(mode in modes(), x in finite()) {
            let once = fl(x, mode).unwrap();
            prop_assert_eq!(fl(once, mode).unwrap().to_bits(), once.to_bits());
        }

        #[test]
        fn decimal_add_matches_exact_reference(t in 1u32..=6, a in -99_999i64..99_999, ea in -8i32..8, b in -99_999i64..99_999, eb in -8i32..8) {
            // Reference: integer-exact sum, rounded with the same digit logic through fl.
            let ar = DecimalArith::new(t, TieRule::HalfEven, RoundingScope::AllOps).unwrap();
            let x = ar.round(a as f64 * 10f64.powi(ea));
            let y = ar.round(b as f64 * 10f64.powi(eb));
            let e = x.exponent().min(y.exponent());
            let exact = x.mantissa() * POW10[(x.exponent() - e) as usize] + y.mantissa() * POW10[(y.exponent() - e) as usize];
            let reference = ar.finish(exact, e, t);
            prop_assert_eq!(ar.add(x, y), reference);
        }
    }
}
