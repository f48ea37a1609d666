mod common;

use proptest::prelude::*;

use finspace::arith::places::PoleSet;
use finspace::cohomology::{
    graded_module, higher_direct_image, pushforward, sheaf_cohomology, window_cohomology, StandardComplex,
};
use finspace::constructions::{all_morphisms, fibered_product, stein_factorization};
use finspace::poset::PointSet;
use finspace::predicates::{
    is_affine, is_affine_morphism, is_schematic, is_schematic_by_base_change, is_schematic_morphism,
    is_semi_separated, AffineMode, MorphismMode, Verdict,
};
use finspace::sheaf::{grade_classes, is_quasi_coherent, pattern_data, pullback, same_sheaf, LaurentFrame, QcMode, SheafDescriptor};
use finspace::space::{MorphismDescriptor, RingedFiniteSpace};

use common::{any_space, open_from_mask, rational_space, topological_space, MAX_POINTS};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

/// Every instantiated complex for `x` on `open`: the graded pieces of the
/// structure sheaf, or the constant and pattern sheaves.
fn complexes(x: &RingedFiniteSpace, open: &PointSet, v: &PointSet) -> Vec<StandardComplex> {
    let poset = x.poset();
    match x.places() {
        Some(pl) => {
            let frame = LaurentFrame::of(pl);
            let m = graded_module(x, &SheafDescriptor::Structure, None).unwrap();
            grade_classes(pl, frame, &m.exps())
                .into_iter()
                .map(|c| StandardComplex::build(poset, open, &m.graded_piece(poset, c.grade, frame).unwrap()).unwrap())
                .collect()
        }
        None => [poset.all(), v.clone()]
            .iter()
            .map(|w| StandardComplex::build(poset, open, &pattern_data(poset, w).unwrap()).unwrap())
            .collect(),
    }
}

fn sheaves(x: &RingedFiniteSpace, v: &PointSet) -> Vec<SheafDescriptor> {
    if x.is_rational() {
        vec![SheafDescriptor::Structure]
    } else {
        vec![SheafDescriptor::Structure, SheafDescriptor::Pattern(v.clone())]
    }
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn minimal_opens_are_acyclic(x in any_space(MAX_POINTS), mask in any::<u8>()) {
        let v = open_from_mask(&x, mask);
        for f in sheaves(&x, &v) {
            for p in 0..x.len() {
                let r = sheaf_cohomology(&x, &x.poset().minimal_open(p), &f).unwrap();
                prop_assert!(r.is_acyclic(), "U_{} has higher cohomology", x.poset().label(p));
            }
        }
    }

    #[test]
    fn nothing_above_the_dimension(x in any_space(MAX_POINTS), mask in any::<u8>()) {
        let u = open_from_mask(&x, mask);
        let v = open_from_mask(&x, mask.rotate_left(3));
        for c in complexes(&x, &u, &v) {
            prop_assert!(c.dims().len() <= x.poset().dimension_of(&u) + 1);
        }
        for f in sheaves(&x, &v) {
            let r = sheaf_cohomology(&x, &x.poset().all(), &f).unwrap();
            for i in x.poset().dim() + 1..x.poset().dim() + 3 {
                prop_assert!(r.total(i).is_zero());
            }
        }
    }

    #[test]
    fn differentials_square_to_zero(x in any_space(MAX_POINTS), mask in any::<u8>()) {
        let u = open_from_mask(&x, mask);
        let v = open_from_mask(&x, !mask);
        for c in complexes(&x, &u, &v) {
            for w in c.complex.diffs.windows(2) {
                prop_assert!(w[1].mul(&w[0]).is_zero());
            }
        }
    }

    #[test]
    fn window_matches_exact(x in rational_space(5), mask in any::<u8>()) {
        let u = open_from_mask(&x, mask);
        let w = window_cohomology(&x, &u, &SheafDescriptor::Structure, 2).unwrap();
        prop_assert!(w.agrees(), "window {:?} vs exact {:?}", w.dims, w.predicted);
    }

    #[test]
    fn edge_checks_match_all_pairs(x in any_space(MAX_POINTS), mask in any::<u8>()) {
        prop_assert_eq!(is_schematic(&x, false).unwrap().verdict, is_schematic(&x, true).unwrap().verdict);
        prop_assert_eq!(is_semi_separated(&x, false).unwrap().verdict, is_semi_separated(&x, true).unwrap().verdict);
        let v = open_from_mask(&x, mask);
        for f in sheaves(&x, &v) {
            prop_assert_eq!(
                is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, false).unwrap().holds,
                is_quasi_coherent(&x, &f, QcMode::QuasiCoherent, true).unwrap().holds
            );
        }
    }

    #[test]
    fn predicate_implications(x in any_space(MAX_POINTS)) {
        let sch = is_schematic(&x, false).unwrap().verdict;
        let semi = is_semi_separated(&x, false).unwrap().verdict;
        let aff = is_affine(&x).unwrap().verdict;
        if semi == Verdict::True {
            prop_assert_eq!(sch, Verdict::True);
        }
        if aff == Verdict::True && sch == Verdict::True {
            prop_assert_eq!(semi, Verdict::True);
        }
        if x.poset().minimum(&x.poset().all()).is_some() {
            prop_assert_eq!(aff, Verdict::True);
        }
    }

    #[test]
    fn topological_schematic_rules_agree(x in topological_space(MAX_POINTS)) {
        prop_assert_eq!(
            is_schematic(&x, false).unwrap().verdict,
            is_schematic_by_base_change(&x, false).unwrap().verdict
        );
    }

    #[test]
    fn direct_images_along_open_inclusions_are_quasi_coherent(x in any_space(5), mask in any::<u8>()) {
        prop_assume!(is_schematic(&x, false).unwrap().holds());
        let u = open_from_mask(&x, mask);
        prop_assume!(!u.is_empty());
        let j = MorphismDescriptor::open_inclusion(&x, &u).unwrap();
        for i in 0..=j.source.poset().dim() {
            let d = higher_direct_image(&j, &SheafDescriptor::Structure, i).unwrap();
            prop_assert_eq!(d.quasi_coherent, Some(true), "R^{} j_* O", i);
        }
    }

    #[test]
    fn morphism_edge_checks_match_all_pairs(x in rational_space(4), y in rational_space(3), pick in any::<usize>()) {
        let maps = all_morphisms(&x, &y);
        prop_assume!(!maps.is_empty());
        let f = MorphismDescriptor::new(x, y, maps[pick % maps.len()].clone()).unwrap();
        for mode in [MorphismMode::Schematic, MorphismMode::LocallyAcyclic] {
            prop_assert_eq!(
                is_schematic_morphism(&f, mode, false).unwrap().verdict,
                is_schematic_morphism(&f, mode, true).unwrap().verdict
            );
        }
    }
}

proptest! {
    #![proptest_config(config(128))]

    #[test]
    fn stein_factorization_laws(x in rational_space(5), y in rational_space(3), pick in any::<usize>()) {
        let maps = all_morphisms(&x, &y);
        prop_assume!(!maps.is_empty());
        let f = MorphismDescriptor::new(x, y, maps[pick % maps.len()].clone()).unwrap();
        let Ok(s) = stein_factorization(&f) else { return Ok(()) };
        prop_assert_eq!(s.f_prime.then(&s.a).unwrap(), f);
        prop_assert!(is_affine_morphism(&s.a, AffineMode::Affine, false).unwrap().holds());
        let pushed = pushforward(&s.f_prime, &SheafDescriptor::Structure).unwrap();
        prop_assert!(same_sheaf(&s.middle, &pushed, &SheafDescriptor::Structure).unwrap());
    }

    #[test]
    fn fibered_product_is_universal(
        x in any_space(3),
        seeds in (rational_space(3), rational_space(3), rational_space(2), any::<(usize, usize)>()),
    ) {
        // one target for both legs, in the universe of `x`
        let (a, b, t, (i, j)) = seeds;
        let (y, s, t) = if x.is_rational() {
            (a, b, t)
        } else {
            let top = |z: &RingedFiniteSpace| RingedFiniteSpace::topological(z.poset().clone(), x.universe().coefficients());
            (top(&a), top(&b), top(&t))
        };
        let fs = all_morphisms(&x, &s);
        let gs = all_morphisms(&y, &s);
        prop_assume!(!fs.is_empty() && !gs.is_empty());
        let f = MorphismDescriptor::new(x.clone(), s.clone(), fs[i % fs.len()].clone()).unwrap();
        let g = MorphismDescriptor::new(y.clone(), s, gs[j % gs.len()].clone()).unwrap();
        let z = fibered_product(&f, &g).unwrap();
        prop_assert_eq!(z.p1.then(&f).unwrap().map, z.p2.then(&g).unwrap().map);
        let into_z = all_morphisms(&t, &z.space);
        for u in all_morphisms(&t, &x) {
            for v in all_morphisms(&t, &y) {
                let commutes = (0..t.len()).all(|p| f.map[u[p]] == g.map[v[p]]);
                let lifts = into_z
                    .iter()
                    .filter(|w| (0..t.len()).all(|p| z.p1.map[w[p]] == u[p] && z.p2.map[w[p]] == v[p]))
                    .count();
                prop_assert_eq!(lifts, usize::from(commutes));
            }
        }
    }
}

#[test]
fn poles_of_points_survive_round_trip() {
    // the generator's output is a valid document
    let x = common::rational(4, &[true, false, true, false, false, true], &[1, 8, 0, 4]);
    let y = RingedFiniteSpace::from_json(&x.to_json()).unwrap();
    assert_eq!(x, y);
    assert_eq!(x.poles(1), PoleSet::All);
}

#[test]
fn weak_equivalences_round_trip_quasi_coherent_modules() {
    let mut checked = 0;
    for pl in [common::places(), common::two_places()] {
        for (fine, coarse) in common::refinement_pairs(&pl) {
            let f = fine.refinement_to(&coarse).unwrap();
            assert!(is_affine_morphism(&f, AffineMode::WeakEquivalence, false).unwrap().holds());
            let y = &f.target;
            let library = std::iter::once(SheafDescriptor::Structure).chain((-2..=2).filter_map(|n| common::twist(y, n)));
            for m in library {
                if !is_quasi_coherent(y, &m, QcMode::QuasiCoherent, false).unwrap().holds {
                    continue;
                }
                // lines gaining poles beyond x and infinity leave the family
                let Ok(pulled) = pullback(&f, &m) else { continue };
                let back = pushforward(&f, &pulled).unwrap();
                assert!(same_sheaf(y, &back, &m).unwrap(), "{m:?} came back as {back:?}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 50, "only {checked} modules checked");
}
