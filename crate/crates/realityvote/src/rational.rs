//! Exact rational helpers shared by every module.
//!
//! Interchange formats always carry rationals as `"p/q"` strings. Parsing also
//! accepts plain integers and finite decimals (`"0.4"` is exactly `2/5`).

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::Error;

/// Exact rational number used for every tally, fraction and position.
pub type Q = BigRational;

pub fn int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn from_usize(n: usize) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn zero() -> Q {
    Q::zero()
}

pub fn one() -> Q {
    Q::one()
}

pub fn half() -> Q {
    frac(1, 2)
}

/// Largest integer not above `x`.
pub fn floor_int(x: &Q) -> BigInt {
    x.numer().div_floor(x.denom())
}

/// Smallest integer not below `x`.
pub fn ceil_int(x: &Q) -> BigInt {
    -((-x.numer()).div_floor(x.denom()))
}

/// `floor(x)` as a count, clamped below at zero.
pub fn floor_count(x: &Q) -> usize {
    let f = floor_int(x);
    if f.is_negative() {
        0
    } else {
        f.to_usize().unwrap_or(usize::MAX)
    }
}

pub fn max_q(a: Q, b: Q) -> Q {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn min_q(a: Q, b: Q) -> Q {
    if a <= b {
        a
    } else {
        b
    }
}

/// Advisory decimal approximation for human-facing columns.
pub fn to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap_or(f64::NAN) / x.denom().to_f64().unwrap_or(f64::NAN)
}

/// Canonical `"p/q"` form; the denominator is always printed.
pub fn format(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

/// Parses `"p/q"`, `"-3"`, or a finite decimal such as `"0.35"`.
pub fn parse(s: &str) -> Result<Q, Error> {
    let t = s.trim();
    let bad = || Error::Parse(format!("not a rational: {s:?}"));
    if t.is_empty() {
        return Err(bad());
    }
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Q::new(n, d));
    }
    if let Some((whole, fracpart)) = t.split_once('.') {
        let neg = whole.starts_with('-');
        let digits = whole.trim_start_matches(['-', '+']);
        if !digits.chars().all(|c| c.is_ascii_digit())
            || !fracpart.chars().all(|c| c.is_ascii_digit())
            || (digits.is_empty() && fracpart.is_empty())
        {
            return Err(bad());
        }
        let joined = format!("{}{}", digits, fracpart);
        let n: BigInt = if joined.is_empty() {
            BigInt::zero()
        } else {
            joined.parse().map_err(|_| bad())?
        };
        let d = num_traits::pow(BigInt::from(10), fracpart.len());
        let q = Q::new(n, d);
        return Ok(if neg { -q } else { q });
    }
    let n: BigInt = t.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(n))
}
