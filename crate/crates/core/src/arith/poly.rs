//! Univariate polynomials and rational functions in `x` over a [`Field`].

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::field::{Field, Scalar};
use crate::error::{Error, Result};

/// Coefficients from the constant term upward, without trailing zeros.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Poly {
    field: Field,
    coeffs: Vec<Scalar>,
}

impl Poly {
    pub fn new(field: Field, mut coeffs: Vec<Scalar>) -> Self {
        for c in coeffs.iter_mut() {
            *c = field.embed(c).expect("coefficient embeds in field");
        }
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly { field, coeffs }
    }

    pub fn zero(field: Field) -> Self {
        Poly { field, coeffs: Vec::new() }
    }

    pub fn one(field: Field) -> Self {
        Self::constant(field, field.one())
    }

    pub fn constant(field: Field, c: Scalar) -> Self {
        Self::new(field, vec![c])
    }

    pub fn x(field: Field) -> Self {
        Self::monomial(field, 1)
    }

    pub fn monomial(field: Field, n: usize) -> Self {
        let mut c = vec![Scalar::zero(); n + 1];
        c[n] = Scalar::one();
        Self::new(field, c)
    }

    pub fn from_ints(field: Field, coeffs: &[i64]) -> Self {
        Self::new(field, coeffs.iter().map(|&c| field.from_int(c)).collect())
    }

    pub fn field(&self) -> Field {
        self.field
    }

    pub fn coeffs(&self) -> &[Scalar] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Scalar {
        self.coeffs.get(i).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Scalar {
        self.coeffs.last().cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn is_monic(&self) -> bool {
        self.leading().is_one()
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return self.clone();
        }
        let inv = self.field.inv(&self.leading()).expect("nonzero leading coefficient");
        self.scale(&inv)
    }

    pub fn scale(&self, c: &Scalar) -> Poly {
        let f = self.field;
        Poly::new(f, self.coeffs.iter().map(|a| f.mul(a, c)).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let f = self.field;
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(f, (0..n).map(|i| f.add(&self.coeff(i), &other.coeff(i))).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let f = self.field;
        let n = self.coeffs.len().max(other.coeffs.len());
        Poly::new(f, (0..n).map(|i| f.sub(&self.coeff(i), &other.coeff(i))).collect())
    }

    pub fn neg(&self) -> Poly {
        let f = self.field;
        Poly::new(f, self.coeffs.iter().map(|a| f.neg(a)).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let f = self.field;
        if self.is_zero() || other.is_zero() {
            return Poly::zero(f);
        }
        let mut out = vec![Scalar::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] = f.add(&out[i + j], &f.mul(a, b));
            }
        }
        Poly::new(f, out)
    }

    pub fn pow(&self, n: usize) -> Poly {
        let mut acc = Poly::one(self.field);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Euclidean division. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let f = self.field;
        let dd = divisor.degree().expect("division by zero polynomial");
        let lead_inv = f.inv(&divisor.leading()).expect("nonzero leading coefficient");
        let mut rem = self.coeffs.clone();
        let Some(sd) = self.degree() else {
            return (Poly::zero(f), Poly::zero(f));
        };
        if sd < dd {
            return (Poly::zero(f), self.clone());
        }
        let mut quot = vec![Scalar::zero(); sd - dd + 1];
        for k in (0..=sd - dd).rev() {
            let c = f.mul(&rem[k + dd], &lead_inv);
            if c.is_zero() {
                continue;
            }
            for (j, b) in divisor.coeffs.iter().enumerate() {
                rem[k + j] = f.sub(&rem[k + j], &f.mul(&c, b));
            }
            quot[k] = c;
        }
        (Poly::new(f, quot), Poly::new(f, rem))
    }

    pub fn rem(&self, divisor: &Poly) -> Poly {
        self.div_rem(divisor).1
    }

    /// Monic gcd.
    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    /// `(g, s, t)` with `s·self + t·other = g`, `g` monic.
    pub fn extended_gcd(&self, other: &Poly) -> (Poly, Poly, Poly) {
        let f = self.field;
        let (mut r0, mut r1) = (self.clone(), other.clone());
        let (mut s0, mut s1) = (Poly::one(f), Poly::zero(f));
        let (mut t0, mut t1) = (Poly::zero(f), Poly::one(f));
        while !r1.is_zero() {
            let (q, r) = r0.div_rem(&r1);
            r0 = std::mem::replace(&mut r1, r);
            let s = s0.sub(&q.mul(&s1));
            s0 = std::mem::replace(&mut s1, s);
            let t = t0.sub(&q.mul(&t1));
            t0 = std::mem::replace(&mut t1, t);
        }
        if r0.is_zero() {
            return (r0, s0, t0);
        }
        let inv = f.inv(&r0.leading()).unwrap();
        (r0.scale(&inv), s0.scale(&inv), t0.scale(&inv))
    }

    /// Inverse of `self` modulo `m` when coprime.
    pub fn inverse_mod(&self, m: &Poly) -> Option<Poly> {
        let (g, s, _) = self.rem(m).extended_gcd(m);
        g.is_one().then(|| s.rem(m))
    }

    fn pow_mod(&self, mut e: BigInt, m: &Poly) -> Poly {
        let mut base = self.rem(m);
        let mut acc = Poly::one(self.field).rem(m);
        let two = BigInt::from(2);
        while e.is_positive() {
            if e.is_odd() {
                acc = acc.mul(&base).rem(m);
            }
            base = base.mul(&base).rem(m);
            e /= &two;
        }
        acc
    }

    /// Decides irreducibility where it is verifiable: every degree over
    /// F_p, degree ≤ 3 over ℚ. Returns `None` when undecided.
    pub fn is_irreducible(&self) -> Option<bool> {
        let n = self.degree()?;
        if n == 0 {
            return Some(false);
        }
        if n == 1 {
            return Some(true);
        }
        match self.field {
            Field::Prime(p) => {
                let f = self.monic();
                let x = Poly::x(self.field);
                let mut power = x.clone();
                for _ in 1..=n / 2 {
                    power = power.pow_mod(BigInt::from(p), &f);
                    if !f.gcd(&power.sub(&x)).is_one() {
                        return Some(false);
                    }
                }
                Some(true)
            }
            Field::Rationals if n <= 3 => Some(!self.has_rational_root()),
            Field::Rationals => None,
        }
    }

    fn has_rational_root(&self) -> bool {
        // clear denominators
        let lcm = self.coeffs.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self.coeffs.iter().map(|c| (c * &lcm).to_integer()).collect();
        if ints[0].is_zero() {
            return true;
        }
        let lead = ints.last().unwrap().abs();
        let constant = ints[0].abs();
        for p in divisors(&constant) {
            for q in divisors(&lead) {
                for sign in [1, -1] {
                    let r = BigRational::new(BigInt::from(sign) * &p, q.clone());
                    if self.eval_rational(&r).is_zero() {
                        return true;
                    }
                }
            }
        }
        false
    }

    fn eval_rational(&self, r: &BigRational) -> BigRational {
        self.coeffs.iter().rev().fold(BigRational::zero(), |acc, c| acc * r + c)
    }

    pub fn eval(&self, a: &Scalar) -> Scalar {
        let f = self.field;
        self.coeffs.iter().rev().fold(Scalar::zero(), |acc, c| f.add(&f.mul(&acc, a), c))
    }
}

fn divisors(n: &BigInt) -> Vec<BigInt> {
    let n = n.abs();
    let small = n.to_u64().expect("coefficient too large for rational root search");
    let mut out = Vec::new();
    let mut d = 1u64;
    while d * d <= small {
        if small.is_multiple_of(d) {
            out.push(BigInt::from(d));
            if d * d != small {
                out.push(BigInt::from(small / d));
            }
        }
        d += 1;
    }
    out
}

fn fmt_scalar(c: &Scalar) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut out = String::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = matches!(self.field, Field::Rationals) && c.is_negative();
            let abs = if neg { -c } else { c.clone() };
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { "-" } else { "+" });
            }
            let mono = match i {
                0 => String::new(),
                1 => "x".to_string(),
                _ => format!("x^{i}"),
            };
            if i == 0 {
                out.push_str(&fmt_scalar(&abs));
            } else if abs.is_one() {
                out.push_str(&mono);
            } else if abs.is_integer() {
                out.push_str(&format!("{}*{mono}", fmt_scalar(&abs)));
            } else {
                out.push_str(&format!("({})*{mono}", fmt_scalar(&abs)));
            }
        }
        write!(f, "{out}")
    }
}

/// A reduced fraction `num/den` with monic denominator.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

impl RationalFunction {
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::Malformed("zero denominator".into()));
        }
        if num.field() != den.field() {
            return Err(Error::FieldMismatch("numerator and denominator".into()));
        }
        let g = num.gcd(&den);
        let (mut n, mut d) = (num.div_rem(&g).0, den.div_rem(&g).0);
        if num.is_zero() {
            d = Poly::one(num.field());
        }
        let lead = d.leading();
        let inv = num.field().inv(&lead).unwrap();
        n = n.scale(&inv);
        d = d.scale(&inv);
        Ok(RationalFunction { num: n, den: d })
    }

    pub fn from_poly(p: Poly) -> Self {
        let f = p.field();
        RationalFunction { num: p, den: Poly::one(f) }
    }

    pub fn field(&self) -> Field {
        self.num.field()
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.num.mul(&o.den).add(&o.num.mul(&self.den)), self.den.mul(&o.den)).unwrap()
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        RationalFunction { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Self::new(self.num.mul(&o.num), self.den.mul(&o.den)).unwrap()
    }

    pub fn div(&self, o: &Self) -> Result<Self> {
        if o.is_zero() {
            return Err(Error::Malformed("division by zero".into()));
        }
        Self::new(self.num.mul(&o.den), self.den.mul(&o.num))
    }

    pub fn pow(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { Self::from_poly(Poly::one(self.field())).div(self)? } else { self.clone() };
        let n = e.unsigned_abs() as usize;
        Ok(RationalFunction { num: base.num.pow(n), den: base.den.pow(n) })
    }

    /// Parses expressions in `x` such as `x/(x-1)`, `3x^2+1/2`, `(x+1)^-2`.
    pub fn parse(field: Field, s: &str) -> Result<Self> {
        let tokens: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut p = Parser { field, tokens, pos: 0 };
        let v = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Malformed(format!("trailing input in `{s}`")));
        }
        Ok(v)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

struct Parser {
    field: Field,
    tokens: Vec<char>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.tokens.get(self.pos).copied()
    }

    fn err(&self, what: &str) -> Error {
        let s: String = self.tokens.iter().collect();
        Error::Malformed(format!("{what} at position {} in `{s}`", self.pos))
    }

    fn expr(&mut self) -> Result<RationalFunction> {
        let mut acc = self.term()?;
        while let Some(c) = self.peek() {
            match c {
                '+' => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                '-' => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<RationalFunction> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some('/') => {
                    self.pos += 1;
                    acc = acc.div(&self.unary()?)?;
                }
                Some(c) if c == 'x' || c == '(' || c.is_ascii_digit() => {
                    acc = acc.mul(&self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<RationalFunction> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(self.unary()?.neg());
        }
        if self.peek() == Some('+') {
            self.pos += 1;
        }
        self.power()
    }

    fn power(&mut self) -> Result<RationalFunction> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.pos += 1;
            let neg = if self.peek() == Some('-') {
                self.pos += 1;
                true
            } else {
                false
            };
            let e = self.integer()?;
            let e: i64 = e.to_i64().ok_or_else(|| self.err("exponent too large"))?;
            return base.pow(if neg { -e } else { e });
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected integer"));
        }
        let s: String = self.tokens[start..self.pos].iter().collect();
        Ok(s.parse().unwrap())
    }

    fn atom(&mut self) -> Result<RationalFunction> {
        match self.peek() {
            Some('x') => {
                self.pos += 1;
                Ok(RationalFunction::from_poly(Poly::x(self.field)))
            }
            Some('(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let n = self.integer()?;
                Ok(RationalFunction::from_poly(Poly::constant(self.field, self.field.from_bigint(&n))))
            }
            _ => Err(self.err("unexpected token")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const Q: Field = Field::Rationals;

    #[test]
    fn division_and_gcd() {
        let a = Poly::from_ints(Q, &[-1, 0, 1]); // x^2 - 1
        let b = Poly::from_ints(Q, &[-1, 1]); // x - 1
        let (q, r) = a.div_rem(&b);
        assert_eq!(q, Poly::from_ints(Q, &[1, 1]));
        assert!(r.is_zero());
        assert_eq!(a.gcd(&Poly::from_ints(Q, &[1, 1])), Poly::from_ints(Q, &[1, 1]));
        let (g, s, t) = Poly::from_ints(Q, &[0, 1]).extended_gcd(&b);
        assert!(g.is_one());
        assert!(s.mul(&Poly::x(Q)).add(&t.mul(&b)).is_one());
    }

    #[test]
    fn irreducibility() {
        assert_eq!(Poly::from_ints(Q, &[1, 0, 1]).is_irreducible(), Some(true)); // x^2+1
        assert_eq!(Poly::from_ints(Q, &[-1, 0, 1]).is_irreducible(), Some(false));
        assert_eq!(Poly::from_ints(Q, &[-2, 0, 0, 1]).is_irreducible(), Some(true)); // x^3-2
        assert_eq!(Poly::from_ints(Q, &[1, 0, 0, 0, 1]).is_irreducible(), None);
        let f2 = Field::Prime(2);
        assert_eq!(Poly::from_ints(f2, &[1, 1, 1]).is_irreducible(), Some(true));
        assert_eq!(Poly::from_ints(f2, &[1, 0, 1]).is_irreducible(), Some(false));
        assert_eq!(Poly::from_ints(f2, &[1, 1, 0, 0, 1]).is_irreducible(), Some(true));
        assert_eq!(Poly::from_ints(Field::Prime(5), &[1, 0, 1]).is_irreducible(), Some(false));
    }

    #[test]
    fn parse_rational_functions() {
        let r = RationalFunction::parse(Q, "x/(x-1)").unwrap();
        assert_eq!(r.num(), &Poly::x(Q));
        assert_eq!(r.den(), &Poly::from_ints(Q, &[-1, 1]));
        let s = RationalFunction::parse(Q, "1/2x^2 + 3").unwrap();
        assert_eq!(s.num().coeff(2), BigRational::new(1.into(), 2.into()));
        let t = RationalFunction::parse(Q, "(x+1)^-2").unwrap();
        assert_eq!(t.den(), &Poly::from_ints(Q, &[1, 2, 1]));
        assert!(RationalFunction::parse(Q, "1/(x-x)").is_err());
        assert!(RationalFunction::parse(Q, "y").is_err());
    }

    #[test]
    fn display_round_trip() {
        for s in ["x^2-3*x+1/2", "-x", "(x+1)/(x^2+1)"] {
            let r = RationalFunction::parse(Q, s).unwrap();
            assert_eq!(RationalFunction::parse(Q, &r.to_string()).unwrap(), r);
        }
    }
}
