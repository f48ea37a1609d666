#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;

use finspace::arith::field::Field;
use finspace::arith::homology::Coefficients;
use finspace::arith::places::{PlaceDecl, PlaceList, PoleSet};
use finspace::constructions::{complement_of, projective_line_carrier, CoveringModel};
use finspace::poset::{FinitePoset, PointSet};
use finspace::sheaf::{FracMono, LaurentFrame, Line, SheafDescriptor};
use finspace::space::RingedFiniteSpace;

pub const MAX_POINTS: usize = 6;

pub fn places() -> PlaceList {
    PlaceList::standard(Field::Rationals)
}

/// `edges` lists the pairs `i < j` in row order; the transitive closure is
/// taken, so any bit pattern gives a poset.
pub fn poset(n: usize, edges: &[bool]) -> FinitePoset {
    let mut bits = edges.iter().copied();
    let mut leq: Vec<Vec<bool>> =
        (0..n).map(|i| (0..n).map(|j| i == j || (j > i && bits.next().unwrap_or(false))).collect()).collect();
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                if leq[i][m] && leq[m][j] {
                    leq[i][j] = true;
                }
            }
        }
    }
    FinitePoset::from_leq((0..n).map(|i| format!("p{i}")).collect(), leq)
}

/// Seed `s < 8` picks a subset of the standard places by bits, `8` picks
/// every place. Stalks are the unions of seeds below each point, so the
/// result is always monotone.
pub fn rational(n: usize, edges: &[bool], seeds: &[u8]) -> RingedFiniteSpace {
    let pl = places();
    let p = poset(n, edges);
    let seed_set = |s: u8| {
        if s >= 8 {
            PoleSet::All
        } else {
            PoleSet::of(&(0..3).filter(|b| s & (1 << b) != 0).collect::<Vec<_>>())
        }
    };
    // single-digit labels keep their order, so index i is `p{i}`
    let own: Vec<PoleSet> = seeds[..n].iter().map(|&s| seed_set(s)).collect();
    let poles = (0..n)
        .map(|q| (0..n).filter(|&a| p.leq(a, q)).fold(PoleSet::empty(), |acc, a| acc.union(&own[a])))
        .collect();
    RingedFiniteSpace::rational(p, pl, poles).expect("unions of seeds are monotone")
}

pub fn topological(n: usize, edges: &[bool], field: bool) -> RingedFiniteSpace {
    let coeffs = if field { Coefficients::Field(Field::prime(2).unwrap()) } else { Coefficients::Integers };
    RingedFiniteSpace::topological(poset(n, edges), coeffs)
}

pub fn open_from_mask(x: &RingedFiniteSpace, mask: u8) -> PointSet {
    let picked: PointSet = (0..x.len()).filter(|i| mask & (1 << i) != 0).collect();
    x.poset().open_hull(&picked)
}

fn edge_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

pub fn rational_space(max: usize) -> impl Strategy<Value = RingedFiniteSpace> {
    (1..=max)
        .prop_flat_map(|n| {
            (Just(n), prop::collection::vec(prop::bool::weighted(0.4), edge_count(n)), prop::collection::vec(0u8..9, n))
        })
        .prop_map(|(n, e, s)| rational(n, &e, &s))
}

pub fn topological_space(max: usize) -> impl Strategy<Value = RingedFiniteSpace> {
    (1..=max)
        .prop_flat_map(|n| (Just(n), prop::collection::vec(prop::bool::weighted(0.4), edge_count(n)), any::<bool>()))
        .prop_map(|(n, e, f)| topological(n, &e, f))
}

pub fn any_space(max: usize) -> impl Strategy<Value = RingedFiniteSpace> {
    prop_oneof![3 => rational_space(max), 1 => topological_space(max)]
}

pub fn random_rational<R: Rng>(rng: &mut R, max: usize) -> RingedFiniteSpace {
    let n = rng.gen_range(1..=max);
    let e: Vec<bool> = (0..edge_count(n)).map(|_| rng.gen_bool(0.4)).collect();
    let s: Vec<u8> = (0..n).map(|_| rng.gen_range(0..9)).collect();
    rational(n, &e, &s)
}

pub fn random_topological<R: Rng>(rng: &mut R, max: usize) -> RingedFiniteSpace {
    let n = rng.gen_range(1..=max);
    let e: Vec<bool> = (0..edge_count(n)).map(|_| rng.gen_bool(0.4)).collect();
    topological(n, &e, rng.gen_bool(0.5))
}

/// Pairs `(fine, coarse)` of coverings of the projective-line carrier by
/// opens missing at least one declared closed point. The fine covering is
/// the coarse one plus one more open.
pub fn refinement_pairs(pl: &PlaceList) -> Vec<(CoveringModel, CoveringModel)> {
    let carrier = projective_line_carrier(pl).unwrap();
    let ids: Vec<String> = (0..pl.len()).map(|i| pl.get(i).id.clone()).collect();
    let opens: Vec<(u32, PointSet)> = (1u32..1 << ids.len())
        .map(|m| {
            let removed: Vec<&str> = (0..ids.len()).filter(|b| m & (1 << b) != 0).map(|b| ids[b].as_str()).collect();
            (m, complement_of(&carrier, &removed).unwrap())
        })
        .collect();
    let mut out = Vec::new();
    let k = opens.len();
    for pick in 1u32..1 << k {
        let chosen: Vec<usize> = (0..k).filter(|i| pick & (1 << i) != 0).collect();
        if !(2..=3).contains(&chosen.len()) || chosen.iter().fold(u32::MAX, |acc, &i| acc & opens[i].0) != 0 {
            continue;
        }
        let coarse = CoveringModel::new(&carrier, chosen.iter().map(|&i| opens[i].1.clone()).collect()).unwrap();
        for extra in (0..k).filter(|i| !chosen.contains(i)) {
            let mut cover = coarse.cover.clone();
            cover.push(opens[extra].1.clone());
            out.push((CoveringModel::new(&carrier, cover).unwrap(), coarse.clone()));
        }
    }
    out
}

/// `O(n)` on a covering model: `x^n` on the points where `∞` is not a
/// pole. `None` when the lines do not form a module.
pub fn twist(y: &RingedFiniteSpace, n: i64) -> Option<SheafDescriptor> {
    let frame = LaurentFrame::of(y.places()?);
    let inf = y.places()?.infinity()?;
    let lines = (0..y.len())
        .map(|p| {
            let t = y.poles(p);
            let e = if t.contains(inf) { 0 } else { n };
            Line::new(e, t).normalized(frame)
        })
        .collect::<Result<Vec<_>, _>>()
        .ok()?;
    let f = SheafDescriptor::FracMono(FracMono::line_bundle(y.poset(), lines));
    f.validate(y).ok()?;
    Some(f)
}

pub fn two_places() -> PlaceList {
    let decl = |id: &str, kind: &str, poly: Option<&str>| PlaceDecl {
        id: Some(id.into()),
        kind: kind.into(),
        poly: poly.map(Into::into),
        attest_irreducible: false,
    };
    PlaceList::from_decls(Field::Rationals, &[decl("zero", "finite", Some("x")), decl("inf", "infinity", None)]).unwrap()
}
