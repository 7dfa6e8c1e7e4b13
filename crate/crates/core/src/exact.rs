//! Exact arithmetic in the quadratic field Q(√5).
//!
//! Every coefficient in the scheme catalog is either rational, a rational
//! combination `p + q√5`, or a printed decimal (which is itself an exact
//! rational with a power-of-ten denominator). Working in Q(√5) keeps row-sum
//! and order-condition residuals exact.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseExactError {
    #[error("empty coefficient literal")]
    Empty,
    #[error("malformed coefficient literal `{0}`")]
    Malformed(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

/// A number `rational + surd·√5` with arbitrary-precision rational parts.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Surd {
    rational: BigRational,
    surd: BigRational,
}

impl Surd {
    pub fn new(rational: BigRational, surd: BigRational) -> Self {
        Surd { rational, surd }
    }

    pub fn from_ratio(num: i64, den: i64) -> Self {
        Surd {
            rational: BigRational::new(BigInt::from(num), BigInt::from(den)),
            surd: BigRational::zero(),
        }
    }

    pub fn from_int(n: i64) -> Self {
        Surd::from_ratio(n, 1)
    }

    /// `(a + b√5) / den` with integer a, b.
    pub fn quadratic(a: i64, b: i64, den: i64) -> Self {
        Surd {
            rational: BigRational::new(BigInt::from(a), BigInt::from(den)),
            surd: BigRational::new(BigInt::from(b), BigInt::from(den)),
        }
    }

    pub fn sqrt5() -> Self {
        Surd::quadratic(0, 1, 1)
    }

    pub fn rational_part(&self) -> &BigRational {
        &self.rational
    }

    pub fn surd_part(&self) -> &BigRational {
        &self.surd
    }

    pub fn is_rational(&self) -> bool {
        self.surd.is_zero()
    }

    pub fn conjugate(&self) -> Self {
        Surd {
            rational: self.rational.clone(),
            surd: -self.surd.clone(),
        }
    }

    /// Field norm `r² − 5 s²`; zero only for zero.
    fn norm(&self) -> BigRational {
        &self.rational * &self.rational - BigRational::from_integer(5.into()) * &self.surd * &self.surd
    }

    /// Exact sign of `r + s√5`.
    pub fn signum(&self) -> Ordering {
        let zero = BigRational::zero();
        let rs = self.rational.cmp(&zero);
        let ss = self.surd.cmp(&zero);
        match (rs, ss) {
            (Ordering::Equal, s) => s,
            (r, Ordering::Equal) => r,
            (r, s) if r == s => r,
            (r, _) => {
                // opposite signs: compare r² with 5 s²
                let r2 = &self.rational * &self.rational;
                let s2 = BigRational::from_integer(5.into()) * &self.surd * &self.surd;
                match r2.cmp(&s2) {
                    Ordering::Greater => r,
                    Ordering::Less => r.reverse(),
                    Ordering::Equal => Ordering::Equal,
                }
            }
        }
    }

    pub fn is_negative(&self) -> bool {
        self.signum() == Ordering::Less
    }

    pub fn abs(&self) -> Self {
        if self.is_negative() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    pub fn checked_div(&self, rhs: &Surd) -> Option<Surd> {
        if rhs.is_zero() {
            return None;
        }
        let n = rhs.norm();
        let num = self * &rhs.conjugate();
        Some(Surd {
            rational: num.rational / &n,
            surd: num.surd / n,
        })
    }

    pub fn to_f64(&self) -> f64 {
        // Evaluate with a rational approximation of √5 far below f64
        // resolution so that cancellation in p + q√5 does not lose digits.
        if self.surd.is_zero() {
            return self.rational.to_f64().unwrap_or(f64::NAN);
        }
        let approx = self.rational.clone() + self.surd.clone() * sqrt5_rational();
        approx.to_f64().unwrap_or(f64::NAN)
    }
}

fn sqrt5_rational() -> BigRational {
    // Continued-fraction convergent of √5 = [2; 4, 4, 4, ...].
    let mut p0 = BigInt::from(2);
    let mut q0 = BigInt::from(1);
    let mut p1 = BigInt::from(9);
    let mut q1 = BigInt::from(4);
    for _ in 0..60 {
        let p2 = BigInt::from(4) * &p1 + &p0;
        let q2 = BigInt::from(4) * &q1 + &q0;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
    }
    BigRational::new(p1, q1)
}

impl Zero for Surd {
    fn zero() -> Self {
        Surd {
            rational: BigRational::zero(),
            surd: BigRational::zero(),
        }
    }
    fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.surd.is_zero()
    }
}

impl One for Surd {
    fn one() -> Self {
        Surd::from_int(1)
    }
}

impl<'a> Add<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn add(self, rhs: &Surd) -> Surd {
        Surd {
            rational: &self.rational + &rhs.rational,
            surd: &self.surd + &rhs.surd,
        }
    }
}

impl Add for Surd {
    type Output = Surd;
    fn add(self, rhs: Surd) -> Surd {
        &self + &rhs
    }
}

impl AddAssign<&Surd> for Surd {
    fn add_assign(&mut self, rhs: &Surd) {
        self.rational += &rhs.rational;
        self.surd += &rhs.surd;
    }
}

impl<'a> Sub<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn sub(self, rhs: &Surd) -> Surd {
        Surd {
            rational: &self.rational - &rhs.rational,
            surd: &self.surd - &rhs.surd,
        }
    }
}

impl Sub for Surd {
    type Output = Surd;
    fn sub(self, rhs: Surd) -> Surd {
        &self - &rhs
    }
}

impl<'a> Mul<&'a Surd> for &'a Surd {
    type Output = Surd;
    fn mul(self, rhs: &Surd) -> Surd {
        let five = BigRational::from_integer(5.into());
        Surd {
            rational: &self.rational * &rhs.rational + five * &self.surd * &rhs.surd,
            surd: &self.rational * &rhs.surd + &self.surd * &rhs.rational,
        }
    }
}

impl Mul for Surd {
    type Output = Surd;
    fn mul(self, rhs: Surd) -> Surd {
        &self * &rhs
    }
}

/// Panics on division by zero; use [`Surd::checked_div`] where the divisor
/// may vanish.
impl Div for Surd {
    type Output = Surd;
    fn div(self, rhs: Surd) -> Surd {
        self.checked_div(&rhs).expect("division by zero in Q(sqrt5)")
    }
}

impl Neg for Surd {
    type Output = Surd;
    fn neg(self) -> Surd {
        Surd {
            rational: -self.rational,
            surd: -self.surd,
        }
    }
}

impl PartialOrd for Surd {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Surd {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum()
    }
}

fn fmt_ratio(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

impl fmt::Display for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.surd.is_zero() {
            return write!(f, "{}", fmt_ratio(&self.rational));
        }
        let s = fmt_ratio(&self.surd.abs());
        let sign = if self.surd.is_negative() { "-" } else { "+" };
        if self.rational.is_zero() {
            let lead = if self.surd.is_negative() { "-" } else { "" };
            write!(f, "{lead}{s}*sqrt(5)")
        } else {
            write!(f, "{}{sign}{s}*sqrt(5)", fmt_ratio(&self.rational))
        }
    }
}

impl fmt::Debug for Surd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Surd({self})")
    }
}

/// Parses an integer, `p/q`, or decimal literal into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, ParseExactError> {
    let t = text.trim();
    if t.is_empty() {
        return Err(ParseExactError::Empty);
    }
    let bad = || ParseExactError::Malformed(text.to_string());
    if let Some((num, den)) = t.split_once('/') {
        let n = parse_rational(num)?;
        let d = parse_rational(den)?;
        if d.is_zero() {
            return Err(ParseExactError::ZeroDenominator(text.to_string()));
        }
        return Ok(n / d);
    }
    let (negative, body) = match t.as_bytes()[0] {
        b'-' => (true, &t[1..]),
        b'+' => (false, &t[1..]),
        _ => (false, t),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer = BigInt::from_str(&digits).map_err(|_| bad())?;
    let denom = num_traits::pow(BigInt::from(10), frac_part.len());
    let r = BigRational::new(numer, denom);
    Ok(if negative { -r } else { r })
}

impl FromStr for Surd {
    type Err = ParseExactError;

    /// Accepts `R`, `R*sqrt(5)`, `R+R*sqrt(5)` and `R-R*sqrt(5)` where `R` is
    /// an integer, `p/q`, or decimal literal.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t.is_empty() {
            return Err(ParseExactError::Empty);
        }
        let Some(body) = t.strip_suffix("*sqrt(5)") else {
            return Ok(Surd::new(parse_rational(&t)?, BigRational::zero()));
        };
        // split at the last sign that is not in leading position
        let split = body
            .char_indices()
            .skip(1)
            .filter(|&(_, c)| c == '+' || c == '-')
            .map(|(i, _)| i)
            .last();
        match split {
            None => Ok(Surd::new(BigRational::zero(), parse_rational(body)?)),
            Some(i) => {
                let rational = parse_rational(&body[..i])?;
                let surd = parse_rational(&body[i..])?;
                Ok(Surd::new(rational, surd))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decimal_literal_is_exact() {
        let x = parse_rational("0.37726891533136810").unwrap();
        assert_eq!(x, BigRational::new(BigInt::from(3772689153313681i64), BigInt::from(10_000_000_000_000_000i64)));
        let y = parse_rational("-0.25").unwrap();
        assert_eq!(y, BigRational::new(BigInt::from(-1), BigInt::from(4)));
    }

    #[test]
    fn surd_parse_and_display() {
        let x: Surd = "391/840-3/70*sqrt(5)".parse().unwrap();
        assert_eq!(x, Surd::quadratic(391, -36, 840));
        assert_eq!(x.to_string(), "391/840-3/70*sqrt(5)");
        let y: Surd = "-1/2*sqrt(5)".parse().unwrap();
        assert_eq!(y, Surd::quadratic(0, -1, 2));
        assert!("1/0".parse::<Surd>().is_err());
        assert!("abc".parse::<Surd>().is_err());
    }

    #[test]
    fn quadratic_row_sum_is_exact() {
        // (391 - 36√5)/840 + 3(13 + 2√5)/140 + 1/4 = 167/168
        let a = Surd::quadratic(391, -36, 840);
        let b = Surd::quadratic(39, 6, 140);
        let sum = &(&a + &b) + &Surd::from_ratio(1, 4);
        assert_eq!(sum, Surd::from_ratio(167, 168));
    }

    #[test]
    fn sign_of_mixed_terms() {
        assert_eq!(Surd::quadratic(-2, 1, 1).signum(), Ordering::Greater); // √5 − 2
        assert_eq!(Surd::quadratic(3, -1, 1).signum(), Ordering::Greater); // 3 − √5
        assert_eq!(Surd::quadratic(2, -1, 1).signum(), Ordering::Less);
        assert!((Surd::quadratic(-2, 2, 1).to_f64() - 2.0 * (5f64.sqrt() - 1.0)).abs() < 1e-15);
    }

    fn small() -> impl Strategy<Value = Surd> {
        (-50i64..50, -50i64..50, 1i64..40).prop_map(|(a, b, d)| Surd::quadratic(a, b, d))
    }

    proptest! {
        #[test]
        fn division_inverts_multiplication(x in small(), y in small()) {
            prop_assume!(!y.is_zero());
            let q = (&x * &y).checked_div(&y).unwrap();
            prop_assert_eq!(q, x);
        }

        #[test]
        fn display_round_trips(x in small()) {
            let back: Surd = x.to_string().parse().unwrap();
            prop_assert_eq!(back, x);
        }

        #[test]
        fn f64_conversion_tracks_sign(x in small()) {
            let v = x.to_f64();
            match x.signum() {
                Ordering::Less => prop_assert!(v < 0.0),
                Ordering::Greater => prop_assert!(v > 0.0),
                Ordering::Equal => prop_assert_eq!(v, 0.0),
            }
        }
    }
}
