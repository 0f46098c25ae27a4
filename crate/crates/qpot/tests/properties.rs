//! Randomized structural properties, exercised exactly: the exterior
//! algebra's grading laws, permutation sign multiplicativity, quaternion
//! conjugation and norm rules, antisymmetry and argument symmetry of the
//! second-order operators, agreement of the two density routes, and
//! lossless lattice serialization. Everything symbolic here compares
//! values over exact rationals, so any failure is a real counterexample,
//! never rounding.

use num_traits::Zero;
use proptest::prelude::*;

use qpot::calc::OperatorTable;
use qpot::exterior::{perm_sign, BasisIndex, Multivector};
use qpot::grid::{Box4, GridFunction};
use qpot::poly::RealPolynomial;
use qpot::quat::Quaternion;
use qpot::scalar::{cq, rat, rat_int, CQ, Rat};

fn small_rat() -> impl Strategy<Value = Rat> {
    (-12i64..=12, 1i64..=4).prop_map(|(p, q)| rat(p, q))
}

fn small_cq() -> impl Strategy<Value = CQ> {
    (small_rat(), small_rat()).prop_map(|(re, im)| cq(re, im))
}

/// A multivector of fixed degree over the complex rationals: up to three
/// components on random strictly increasing index tuples.
fn form(n: usize, degree: usize) -> impl Strategy<Value = Multivector<CQ>> {
    let all: Vec<u8> = (0..2 * n as u8).collect();
    prop::collection::vec(
        (prop::sample::subsequence(all, degree), small_cq()),
        0..=3,
    )
    .prop_map(move |parts| {
        Multivector::from_components(
            n,
            degree,
            parts
                .into_iter()
                .map(|(idx, c)| (BasisIndex::new(idx).expect("subsequence is increasing"), c)),
        )
        .expect("components are well formed")
    })
}

/// Dimension plus two degrees whose sum still fits below the top degree.
fn two_degrees() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..=3)
        .prop_flat_map(|n| (Just(n), 0..=2 * n))
        .prop_flat_map(|(n, p)| (Just(n), Just(p), 0..=2 * n - p))
}

/// Dimension plus three degrees whose sum fits.
fn three_degrees() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    two_degrees()
        .prop_flat_map(|(n, p, q)| (Just(n), Just(p), Just(q), 0..=2 * n - p - q))
}

/// A random real-coefficient polynomial over x_0..x_{4n-1} with small
/// integer coefficients and per-variable exponents at most 2.
fn poly(n: usize, max_terms: usize) -> impl Strategy<Value = RealPolynomial> {
    prop::collection::vec(
        (prop::collection::vec(0u32..=2, 4 * n), -9i64..=9),
        0..=max_terms,
    )
    .prop_map(move |terms| {
        let mut p = RealPolynomial::zero(n);
        for (exp, c) in terms {
            p.add_term(exp, cq(rat_int(c), Rat::zero()));
        }
        p
    })
}

fn quaternion() -> impl Strategy<Value = Quaternion> {
    (small_rat(), small_rat(), small_rat(), small_rat())
        .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z))
}

fn permutation(k: u8) -> impl Strategy<Value = Vec<u8>> {
    Just((0..k).collect::<Vec<u8>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn wedge_is_graded_anticommutative(
        ((n, p, q), seed_f, seed_g) in two_degrees().prop_flat_map(|(n, p, q)| {
            (Just((n, p, q)), form(n, p), form(n, q))
        })
    ) {
        let fg = seed_f.wedge(&seed_g).unwrap();
        let gf = seed_g.wedge(&seed_f).unwrap();
        let expected = if (p * q) % 2 == 0 { gf } else { gf.neg() };
        prop_assert!(fg.sub(&expected).unwrap().is_zero(),
            "F∧G and (−1)^{{pq}} G∧F differ at n={n}, p={p}, q={q}");
    }

    #[test]
    fn wedge_is_associative(
        ((n, ..), f, g, h) in three_degrees().prop_flat_map(|(n, p, q, r)| {
            (Just((n, p, q, r)), form(n, p), form(n, q), form(n, r))
        })
    ) {
        let left = f.wedge(&g).unwrap().wedge(&h).unwrap();
        let right = f.wedge(&g.wedge(&h).unwrap()).unwrap();
        prop_assert!(left.sub(&right).unwrap().is_zero(), "associativity broke at n={n}");
    }

    #[test]
    fn perm_sign_is_multiplicative(
        (sigma, tau) in (1u8..=4).prop_flat_map(|n| (permutation(2 * n), permutation(2 * n)))
    ) {
        let composed: Vec<u8> = tau.iter().map(|&i| sigma[i as usize]).collect();
        prop_assert_eq!(perm_sign(&composed), perm_sign(&sigma) * perm_sign(&tau));
    }

    #[test]
    fn conjugation_reverses_products_and_norms_multiply(
        (a, b) in (quaternion(), quaternion())
    ) {
        let ab = a.mul(&b);
        prop_assert_eq!(ab.conj(), b.conj().mul(&a.conj()));
        prop_assert_eq!(ab.norm_sq(), a.norm_sq() * b.norm_sq());
    }

    #[test]
    fn delta_is_antisymmetric_in_its_indices(
        (n, u, i, j) in (1usize..=2).prop_flat_map(|n| {
            (Just(n), poly(n, 4), 0..2 * n, 0..2 * n)
        })
    ) {
        let table = OperatorTable::new(n);
        let plus = table.delta_ij(&u, i, j).unwrap();
        let minus = table.delta_ij(&u, j, i).unwrap();
        prop_assert!(plus.add(&minus).is_zero(), "Δ_{{ij}} + Δ_{{ji}} != 0");
        prop_assert!(table.delta_ij(&u, i, i).unwrap().is_zero(), "Δ_{{ii}} != 0");
    }

    #[test]
    fn density_is_symmetric_in_its_arguments(
        (u, v) in (poly(2, 3), poly(2, 3))
    ) {
        let table = OperatorTable::new(2);
        let uv = table.ma_density(&[u.clone(), v.clone()]).unwrap();
        let vu = table.ma_density(&[v, u]).unwrap();
        prop_assert!(uv.sub(&vu).is_zero(), "mixed density is not symmetric");
    }

    #[test]
    fn both_density_routes_agree_exactly(
        (n, us) in (1usize..=2).prop_flat_map(|n| {
            (Just(n), prop::collection::vec(poly(n, 3), n))
        })
    ) {
        let table = OperatorTable::new(n);
        let direct = table.ma_density(&us).unwrap();
        let wedged = table.ma_density_via_wedge(&us).unwrap();
        prop_assert!(direct.sub(&wedged).is_zero(),
            "permutation expansion and wedge route disagree at n={n}");
    }

    #[test]
    fn lattice_indexing_is_a_bijection(
        (res, flat) in (3usize..=7).prop_flat_map(|half| {
            let res = 2 * half - 1;
            let cells = res * res * res * res;
            (Just(res), 0..cells)
        })
    ) {
        let geom = Box4::new([0.25, -0.5, 0.0, 1.0], 1.5, res).unwrap();
        prop_assert_eq!(geom.flat(geom.multi(flat)), flat);
    }

    #[test]
    fn grid_serialization_round_trips(
        (values, hole) in (prop::collection::vec(-100.0f64..100.0, 625), 0usize..625)
    ) {
        let geom = Box4::new([0.0; 4], 1.0, 5).unwrap();
        let mut vals = values;
        vals[hole] = 0.0;
        let original = GridFunction::sample_excluding(
            geom,
            1.0,
            |p| {
                let idx = [
                    ((p[0] + 1.0) / geom.spacing()).round() as usize,
                    ((p[1] + 1.0) / geom.spacing()).round() as usize,
                    ((p[2] + 1.0) / geom.spacing()).round() as usize,
                    ((p[3] + 1.0) / geom.spacing()).round() as usize,
                ];
                vals[geom.flat(idx)]
            },
            |p| {
                let idx = [
                    ((p[0] + 1.0) / geom.spacing()).round() as usize,
                    ((p[1] + 1.0) / geom.spacing()).round() as usize,
                    ((p[2] + 1.0) / geom.spacing()).round() as usize,
                    ((p[3] + 1.0) / geom.spacing()).round() as usize,
                ];
                geom.flat(idx) == hole
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        original.export(&mut buf).unwrap();
        let back = GridFunction::import(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(back.geom(), original.geom());
        prop_assert_eq!(back.domain_radius(), original.domain_radius());
        prop_assert_eq!(back.values(), original.values());
        for i in 0..geom.num_cells() {
            prop_assert_eq!(back.is_excluded(i), original.is_excluded(i));
        }
    }
}

#[test]
fn the_volume_form_has_top_coefficient_one() {
    use qpot::scalar::cq_one;
    for n in 1..=3 {
        let omega = Multivector::from_components(
            n,
            2 * n,
            [(BasisIndex::top(n), cq_one())],
        )
        .unwrap();
        assert_eq!(omega.top_coefficient().unwrap(), Some(&cq_one()));
    }
}
