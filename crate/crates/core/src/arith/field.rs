//! Exact scalar fields: the rationals and prime fields F_p.
//!
//! Scalars are stored as `BigRational` in both cases; over F_p they are kept
//! as integers in `[0, p)`, so one elimination routine serves both fields.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Scalar = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Field {
    Rationals,
    Prime(u64),
}

const MAX_PRIME: u64 = 1 << 31;

impl Field {
    pub fn prime(p: u64) -> Result<Self> {
        if p > MAX_PRIME || !is_prime(p) {
            return Err(Error::Malformed(format!("F_{p}: modulus must be a prime <= 2^31")));
        }
        Ok(Field::Prime(p))
    }

    /// Parses `"Q"`, `"F_7"`, `"F7"` or `"GF(7)"`.
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim();
        if t == "Q" || t == "QQ" {
            return Ok(Field::Rationals);
        }
        let digits = t
            .strip_prefix("F_")
            .or_else(|| t.strip_prefix('F'))
            .or_else(|| t.strip_prefix("GF(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| Error::Malformed(format!("unknown field `{s}`")))?;
        let p: u64 = digits
            .parse()
            .map_err(|_| Error::Malformed(format!("unknown field `{s}`")))?;
        Field::prime(p)
    }

    pub fn characteristic(&self) -> u64 {
        match self {
            Field::Rationals => 0,
            Field::Prime(p) => *p,
        }
    }

    pub fn zero(&self) -> Scalar {
        Scalar::zero()
    }

    pub fn one(&self) -> Scalar {
        Scalar::one()
    }

    pub fn from_int(&self, n: i64) -> Scalar {
        self.reduce(Scalar::from_integer(BigInt::from(n)))
    }

    pub fn from_bigint(&self, n: &BigInt) -> Scalar {
        self.reduce(Scalar::from_integer(n.clone()))
    }

    /// Maps an arbitrary rational into the field. Fails over F_p when the
    /// denominator is divisible by p.
    pub fn embed(&self, q: &BigRational) -> Result<Scalar> {
        match self {
            Field::Rationals => Ok(q.clone()),
            Field::Prime(p) => {
                let pb = BigInt::from(*p);
                let den = q.denom().mod_floor(&pb);
                if den.is_zero() {
                    return Err(Error::FieldMismatch(format!("{q} has no image in F_{p}")));
                }
                let num = q.numer().mod_floor(&pb);
                let inv = mod_inverse(&den, &pb);
                Ok(Scalar::from_integer((num * inv).mod_floor(&pb)))
            }
        }
    }

    fn reduce(&self, a: Scalar) -> Scalar {
        match self {
            Field::Rationals => a,
            Field::Prime(_) => self.embed(&a).expect("integral value reduces mod p"),
        }
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.reduce(a + b)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.reduce(a - b)
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.reduce(a * b)
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.reduce(-a)
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv(&self, a: &Scalar) -> Option<Scalar> {
        if a.is_zero() {
            return None;
        }
        match self {
            Field::Rationals => Some(a.recip()),
            Field::Prime(p) => {
                let pb = BigInt::from(*p);
                Some(Scalar::from_integer(mod_inverse(a.numer(), &pb)))
            }
        }
    }

    pub fn div(&self, a: &Scalar, b: &Scalar) -> Option<Scalar> {
        self.inv(b).map(|ib| self.mul(a, &ib))
    }

    /// True when `a` is a legal element of this field (reduced form over F_p).
    pub fn contains(&self, a: &Scalar) -> bool {
        match self {
            Field::Rationals => true,
            Field::Prime(p) => {
                a.is_integer() && !a.numer().is_negative() && a.numer() < &BigInt::from(*p)
            }
        }
    }

    /// Enumerates all elements for small prime fields.
    pub fn elements(&self) -> Option<Vec<Scalar>> {
        match self {
            Field::Prime(p) if *p <= 64 => {
                Some((0..*p).map(|i| Scalar::from_integer(BigInt::from(i))).collect())
            }
            _ => None,
        }
    }

    pub fn to_u64(&self, a: &Scalar) -> Option<u64> {
        match self {
            Field::Prime(_) => a.numer().to_u64(),
            Field::Rationals => None,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Rationals => write!(f, "Q"),
            Field::Prime(p) => write!(f, "F_{p}"),
        }
    }
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    let e = a.mod_floor(m).extended_gcd(m);
    debug_assert!(e.gcd.is_one());
    e.x.mod_floor(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_fields() {
        assert_eq!(Field::parse("Q").unwrap(), Field::Rationals);
        assert_eq!(Field::parse("F_7").unwrap(), Field::Prime(7));
        assert_eq!(Field::parse("GF(3)").unwrap(), Field::Prime(3));
        assert!(Field::parse("F_8").is_err());
        assert!(Field::parse("R").is_err());
    }

    #[test]
    fn prime_field_arithmetic() {
        let f = Field::Prime(7);
        let a = f.from_int(5);
        let b = f.from_int(4);
        assert_eq!(f.add(&a, &b), f.from_int(2));
        assert_eq!(f.mul(&a, &b), f.from_int(6));
        assert_eq!(f.mul(&a, &f.inv(&a).unwrap()), f.one());
        assert_eq!(f.neg(&a), f.from_int(2));
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        assert_eq!(f.embed(&half).unwrap(), f.from_int(4));
        assert!(Field::Prime(2).embed(&half).is_err());
    }
}
