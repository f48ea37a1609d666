//! Elements of k(x) in canonical partial-fraction form relative to a
//! declared place list.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::places::{PlaceList, PoleClass, PoleSet};
use super::poly::{Poly, RationalFunction};
use crate::error::{Error, Result};

/// `poly_part + Σ_v Σ_m polar[v][m-1] / v^m + unlisted`, with every polar
/// numerator of degree `< deg v`, and `unlisted` a proper fraction whose
/// denominator is coprime to all declared places.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RationalElem {
    places: PlaceList,
    poly_part: Poly,
    polar: BTreeMap<usize, Vec<Poly>>,
    unlisted: Option<RationalFunction>,
}

impl RationalElem {
    pub fn decompose(f: &RationalFunction, places: &PlaceList) -> Result<Self> {
        let field = places.field();
        if f.field() != field {
            return Err(Error::FieldMismatch(format!("{} vs {}", f.field(), field)));
        }
        let den = f.den().clone();
        let (poly_part, rem) = f.num().div_rem(&den);

        let mut rest = den.clone();
        let mut factors: Vec<(Option<usize>, Poly, usize)> = Vec::new();
        for i in places.finite_indices() {
            let v = places.get(i).poly().unwrap();
            let mut m = 0;
            loop {
                let (q, r) = rest.div_rem(v);
                if !r.is_zero() {
                    break;
                }
                rest = q;
                m += 1;
            }
            if m > 0 {
                factors.push((Some(i), v.pow(m), m));
            }
        }
        if rest.degree().unwrap_or(0) > 0 {
            factors.push((None, rest.clone(), 1));
        }

        let mut polar = BTreeMap::new();
        let mut unlisted = None;
        for (place, power, m) in factors {
            let cofactor = den.div_rem(&power).0;
            let inv = cofactor.inverse_mod(&power).expect("coprime factors");
            let a = rem.mul(&inv).rem(&power);
            match place {
                None => unlisted = Some(RationalFunction::new(a, power)?),
                Some(i) => {
                    let v = places.get(i).poly().unwrap();
                    let mut digits = Vec::with_capacity(m);
                    let mut cur = a;
                    for _ in 0..m {
                        let (q, r) = cur.div_rem(v);
                        digits.push(r);
                        cur = q;
                    }
                    // a = Σ_j digits[j] v^j, so a / v^m = Σ_j digits[j] / v^{m-j}
                    let mut by_power: Vec<Poly> = (1..=m).map(|k| digits[m - k].clone()).collect();
                    while by_power.last().is_some_and(Poly::is_zero) {
                        by_power.pop();
                    }
                    if !by_power.is_empty() {
                        polar.insert(i, by_power);
                    }
                }
            }
        }
        Ok(RationalElem { places: places.clone(), poly_part, polar, unlisted })
    }

    pub fn parse(text: &str, places: &PlaceList) -> Result<Self> {
        Self::decompose(&RationalFunction::parse(places.field(), text)?, places)
    }

    pub fn recompose(&self) -> RationalFunction {
        let mut acc = RationalFunction::from_poly(self.poly_part.clone());
        for (&i, by_power) in &self.polar {
            let v = self.places.get(i).poly().unwrap();
            for (k, c) in by_power.iter().enumerate() {
                let term = RationalFunction::new(c.clone(), v.pow(k + 1)).unwrap();
                acc = acc.add(&term);
            }
        }
        if let Some(u) = &self.unlisted {
            acc = acc.add(u);
        }
        acc
    }

    pub fn poly_part(&self) -> &Poly {
        &self.poly_part
    }

    pub fn polar_part(&self, place: usize) -> Option<&[Poly]> {
        self.polar.get(&place).map(Vec::as_slice)
    }

    pub fn unlisted_part(&self) -> Option<&RationalFunction> {
        self.unlisted.as_ref()
    }

    pub fn poles(&self) -> BTreeSet<PoleClass> {
        let mut out: BTreeSet<PoleClass> = self.polar.keys().map(|&i| PoleClass::Place(i)).collect();
        if self.poly_part.degree().unwrap_or(0) >= 1 {
            out.insert(PoleClass::Place(self.places.infinity().expect("infinity declared")));
        }
        if self.unlisted.is_some() {
            out.insert(PoleClass::Unlisted);
        }
        out
    }

    /// `e ∈ R_T`.
    pub fn is_member(&self, t: &PoleSet) -> bool {
        self.poles().into_iter().all(|c| t.contains_class(c))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.places != other.places {
            return Err(Error::FieldMismatch("elements over different place lists".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Self::decompose(&self.recompose().add(&other.recompose()), &self.places)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Self::decompose(&self.recompose().mul(&other.recompose()), &self.places)
    }
}

impl fmt::Display for RationalElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.poly_part.is_zero() {
            parts.push(self.poly_part.to_string());
        }
        for (&i, by_power) in &self.polar {
            let v = self.places.get(i).poly().unwrap();
            for (k, c) in by_power.iter().enumerate() {
                if !c.is_zero() {
                    let den = if k == 0 { format!("({v})") } else { format!("({v})^{}", k + 1) };
                    parts.push(format!("({c})/{den}"));
                }
            }
        }
        if let Some(u) = &self.unlisted {
            parts.push(u.to_string());
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}
