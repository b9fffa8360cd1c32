//! Exact arithmetic helpers: rationals, combinatorial numbers, and a small
//! quadratic-surd type for odd-order normalized moments.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number used throughout the engine.
pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Integer power with a possibly zero base; `0^0 = 1`.
pub fn rpow(base: &Rational, exp: usize) -> Rational {
    Pow::pow(base, exp)
}

/// Two-sided power `2^e` for a signed exponent.
pub fn pow2(e: i64) -> Rational {
    let p = Rational::from_integer(BigInt::one() << e.unsigned_abs());
    if e >= 0 {
        p
    } else {
        p.recip()
    }
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// The Catalan number `C_n = binom(2n, n) / (n + 1)`.
pub fn catalan(n: u64) -> BigInt {
    binomial(2 * n, n) / BigInt::from(n + 1)
}

/// `(n-1)!! = 1 * 3 * ... * (n-1)` for even `n`; the number of pairings of `[n]`.
pub fn pairings_count(n: u64) -> BigInt {
    assert!(n.is_multiple_of(2), "pairings of an odd set");
    (1..n).step_by(2).map(BigInt::from).product()
}

/// Falling factorial `n (n-1) ... (n-k+1)`.
pub fn falling_factorial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    (0..k).map(|i| BigInt::from(n - i)).product()
}

/// Exact square root of a non-negative rational, if it is a perfect square.
pub fn rational_sqrt(r: &Rational) -> Option<Rational> {
    if r.is_negative() {
        return None;
    }
    let n = r.numer().sqrt();
    let d = r.denom().sqrt();
    if &(&n * &n) == r.numer() && &(&d * &d) == r.denom() {
        Some(Rational::new(n, d))
    } else {
        None
    }
}

/// Formats `r` as `numerator/denominator`, always including the denominator.
pub fn to_fraction_string(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Decimal rendering of `r` rounded half away from zero to `digits` places,
/// with trailing zeros trimmed.
pub fn to_decimal_string(r: &Rational, digits: usize) -> String {
    let scale = BigInt::from(10u32).pow(digits as u32);
    let scaled = r.abs() * Rational::from_integer(scale.clone());
    let (q, rem) = scaled.numer().div_rem(scaled.denom());
    let twice = rem * 2u32;
    let q = if &twice >= scaled.denom() { q + 1u32 } else { q };
    let (int_part, frac_part) = q.div_rem(&scale);
    let mut frac = format!("{:0>width$}", frac_part.to_string(), width = digits);
    while frac.ends_with('0') {
        frac.pop();
    }
    let neg = r.is_negative() && !(int_part.is_zero() && frac.is_empty());
    let sign = if neg { "-" } else { "" };
    if frac.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac}")
    }
}

/// Parses `a`, `a/b`, or a finite decimal literal such as `-0.25` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        let digits = format!("{}{}", if int_digits.is_empty() { "0" } else { int_digits }, frac);
        let n = BigInt::from_str(&digits).map_err(|_| bad())?;
        let n = if neg { -n } else { n };
        let d = BigInt::from(10u32).pow(frac.len() as u32);
        return Ok(Rational::new(n, d));
    }
    BigInt::from_str(s).map(Rational::from_integer).map_err(|_| bad())
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// An exact real number of the form `coeff * sqrt(radicand)` with a
/// non-negative rational radicand.
///
/// Odd-order normalized moments carry a factor `1/delta` or `1/sqrt(n)` that is
/// irrational in general; even orders always have `radicand == 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Surd {
    coeff: Rational,
    radicand: Rational,
}

impl Surd {
    pub fn new(coeff: Rational, radicand: Rational) -> Self {
        assert!(!radicand.is_negative(), "negative radicand");
        if coeff.is_zero() || radicand.is_zero() {
            return Self::zero();
        }
        match rational_sqrt(&radicand) {
            Some(root) => Self::rational(coeff * root),
            None => {
                // Pull the square part of the denominator out so equal values
                // compare equal: sqrt(a/b) = sqrt(a*b)/b.
                let d = radicand.denom().clone();
                let rad = Rational::from_integer(radicand.numer() * &d);
                let coeff = coeff / Rational::from_integer(d);
                Self {
                    coeff,
                    radicand: rad,
                }
            }
        }
    }

    pub fn rational(value: Rational) -> Self {
        Self {
            coeff: value,
            radicand: Rational::one(),
        }
    }

    pub fn zero() -> Self {
        Self::rational(Rational::zero())
    }

    pub fn coeff(&self) -> &Rational {
        &self.coeff
    }

    pub fn radicand(&self) -> &Rational {
        &self.radicand
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    /// The exact value when it is rational.
    pub fn as_rational(&self) -> Option<&Rational> {
        if self.radicand.is_one() {
            Some(&self.coeff)
        } else {
            None
        }
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.coeff) * to_f64(&self.radicand).sqrt()
    }

    /// `self - other` when both share a radicand (or either is zero).
    pub fn checked_sub(&self, other: &Surd) -> Option<Surd> {
        if other.is_zero() {
            return Some(self.clone());
        }
        if self.is_zero() {
            return Some(Surd {
                coeff: -other.coeff.clone(),
                radicand: other.radicand.clone(),
            });
        }
        if self.radicand == other.radicand {
            Some(Surd::new(&self.coeff - &other.coeff, self.radicand.clone()))
        } else {
            None
        }
    }

    pub fn sign(&self) -> Sign {
        if self.coeff.is_zero() {
            Sign::NoSign
        } else if self.coeff.is_negative() {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }
}

impl From<Rational> for Surd {
    fn from(value: Rational) -> Self {
        Surd::rational(value)
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.radicand.is_one() || self.is_zero() {
            write!(f, "{}", to_fraction_string(&self.coeff))
        } else {
            write!(
                f,
                "{}*sqrt({})",
                to_fraction_string(&self.coeff),
                to_fraction_string(&self.radicand)
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalan_and_pairings() {
        let c: Vec<u64> = (0..8).map(|n| catalan(n).to_u64().unwrap()).collect();
        assert_eq!(c, vec![1, 1, 2, 5, 14, 42, 132, 429]);
        assert_eq!(pairings_count(6), BigInt::from(15));
        assert_eq!(pairings_count(16), BigInt::from(2_027_025));
        assert_eq!(falling_factorial(10, 3), BigInt::from(720));
        assert_eq!(falling_factorial(2, 3), BigInt::zero());
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(to_decimal_string(&ratio(147, 4), 6), "36.75");
        assert_eq!(to_decimal_string(&ratio(20, 9), 4), "2.2222");
        assert_eq!(to_decimal_string(&ratio(-2, 3), 3), "-0.667");
        assert_eq!(to_decimal_string(&rat(0), 3), "0");
        assert_eq!(to_decimal_string(&ratio(-1, 10000), 2), "0");
    }

    #[test]
    fn parsing() {
        assert_eq!(parse_rational("147/4").unwrap(), ratio(147, 4));
        assert_eq!(parse_rational(" -3 ").unwrap(), rat(-3));
        assert_eq!(parse_rational("0.25").unwrap(), ratio(1, 4));
        assert_eq!(parse_rational("-1.5").unwrap(), ratio(-3, 2));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert!(parse_rational("1.").is_err());
    }

    #[test]
    fn surd_normalizes() {
        let a = Surd::new(rat(1), ratio(1, 3));
        let b = Surd::new(ratio(1, 3), rat(3));
        assert_eq!(a, b);
        assert_eq!(Surd::new(rat(2), rat(4)).as_rational(), Some(&rat(4)));
        assert!((a.to_f64() - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(a.checked_sub(&b).unwrap(), Surd::zero());
        assert!(a.checked_sub(&Surd::new(rat(1), rat(2))).is_none());
    }
}
