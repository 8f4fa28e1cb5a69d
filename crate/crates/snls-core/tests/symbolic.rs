use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snls::deformation::{deformed_product, gamma, gamma_dot};
use snls::oracle::{picard, random_factors, wick_check, wick_product};
use snls::perturbation::{counterterms, expand, expectation, has_even_bidegree, two_point, verify_renormalized_equation};
use snls::Expr;

fn factors(seed: u64, max_legs: usize) -> Vec<Expr> {
    random_factors(&mut ChaCha8Rng::seed_from_u64(seed), max_legs)
}

fn expansion_text(kappa: u32, order: u32) -> String {
    let sol = expand(kappa, order).unwrap();
    sol.coefficients.iter().enumerate().map(|(k, f)| format!("F_{k} = {f}\n")).collect()
}

#[test]
fn wick_oracle_agrees_on_random_products() {
    let r = wick_check(600, 8, 20240601);
    assert_eq!(r.mismatches, 0, "{r:?}");
    assert!(r.max_legs_seen >= 6, "{r:?}");
}

#[test]
fn picard_iteration_matches_expansion() {
    for (kappa, order) in [(1, 4), (2, 2), (3, 2)] {
        assert_eq!(picard(kappa, order), expand(kappa, order).unwrap().coefficients, "kappa={kappa} order={order}");
    }
}

#[test]
fn expansion_goldens() {
    assert_eq!(expansion_text(1, 2), include_str!("golden/expansion_k1_o2.txt"));
    assert_eq!(expansion_text(2, 2), include_str!("golden/expansion_k2_o2.txt"));
}

#[test]
fn first_order_two_point_goldens() {
    let sol = expand(1, 1).unwrap();
    let diags = two_point(&sol, 1).unwrap();
    let golden = [
        include_str!("golden/two_point_o1_0.dot"),
        include_str!("golden/two_point_o1_1.dot"),
        include_str!("golden/two_point_o1_2.dot"),
    ];
    assert_eq!(diags.len(), golden.len());
    for (i, (d, g)) in diags.iter().zip(golden).enumerate() {
        assert_eq!(d.to_dot(&format!("diagram_{i}")), g);
    }
}

#[test]
fn mean_vanishes_for_higher_nonlinearities() {
    for (kappa, order) in [(1, 5), (2, 3), (3, 2)] {
        let sol = expand(kappa, order).unwrap();
        for k in 0..=order {
            assert!(expectation(&sol, k).unwrap().is_zero(), "kappa={kappa} k={k}");
        }
    }
}

#[test]
fn counterterms_absorb_every_residual() {
    // Extraction fails if a residual does not factor through Φ.
    for (kappa, order) in [(1, 3), (2, 2)] {
        let sol = expand(kappa, order).unwrap();
        let cts = counterterms(&sol, order).unwrap();
        assert!(cts.entries.iter().all(has_even_bidegree), "kappa={kappa}");
        assert!(verify_renormalized_equation(&sol, &cts, order).unwrap().passed, "kappa={kappa}");
    }
}

fn odd_legs(m: &snls::Monomial) -> bool {
    let (a, b) = m.total_leg_count();
    (a + b) % 2 == 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_is_commutative_and_associative(s in any::<u64>()) {
        let f = factors(s, 6);
        let a = gamma(&f[0]);
        let b = gamma(&f.get(1).cloned().unwrap_or_else(Expr::phibar));
        let c = gamma(&f.get(2).cloned().unwrap_or_else(Expr::phi));
        prop_assert_eq!(deformed_product(&a, &b), deformed_product(&b, &a));
        prop_assert_eq!(
            deformed_product(&deformed_product(&a, &b), &c),
            deformed_product(&a, &deformed_product(&b, &c))
        );
    }

    #[test]
    fn gamma_commutes_with_conjugation(s in any::<u64>()) {
        // Under a convolution the token choice follows the kernel, so the
        // identity holds literally there.
        let e = factors(s, 6).into_iter().fold(Expr::zero(), |a, b| a.add(&b)).convolve(false);
        prop_assert_eq!(gamma(&e).conj(), gamma(&e.conj()));
    }

    #[test]
    fn gamma_dot_is_order_independent(s in any::<u64>()) {
        let mut f = factors(s, 6);
        let fwd = gamma_dot(&f).unwrap();
        f.reverse();
        prop_assert_eq!(&fwd, &gamma_dot(&f).unwrap());
        prop_assert_eq!(fwd, wick_product(&f));
    }

    #[test]
    fn product_has_unit(s in any::<u64>()) {
        let a = gamma(&factors(s, 6)[0]);
        prop_assert_eq!(deformed_product(&a, &Expr::one()), a);
    }

    #[test]
    fn odd_products_stay_odd(s in any::<u64>()) {
        // Each random factor is a single monomial; an extra Φ fixes its parity.
        let odd: Vec<Expr> = factors(s, 5)
            .into_iter()
            .chain([Expr::phi(), Expr::phibar()])
            .take(3)
            .map(|f| if f.monomials().iter().all(odd_legs) { f } else { f.mul(&Expr::phi()) })
            .collect();
        let product = odd.iter().fold(Expr::one(), |a, b| a.mul(b));
        prop_assert!(product.monomials().iter().all(odd_legs));
        prop_assert!(gamma_dot(&odd).unwrap().monomials().iter().all(odd_legs));
    }
}
