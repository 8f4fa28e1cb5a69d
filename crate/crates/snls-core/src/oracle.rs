//! Brute-force reference implementations used to cross-check the engine.
//!
//! These share only the canonical form of [`Expr`] with the main code:
//! leg discovery, matching enumeration and contraction are written
//! independently and favour obviousness over speed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algebra::{Atom, Body, Coeff, Expr, Monomial, Token};

/// Leg address: chain of `(atom index, bar)` for the enclosing `Conv`s,
/// then the atom index of the leg.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Leg {
    path: Vec<(usize, bool)>,
    index: usize,
    bar: bool,
}

fn collect_legs(atoms: &[Atom], path: &mut Vec<(usize, bool)>, out: &mut Vec<Leg>) {
    for (i, a) in atoms.iter().enumerate() {
        match a {
            Atom::Leg { bar } => out.push(Leg { path: path.clone(), index: i, bar: *bar }),
            Atom::Conv { bar, body } => {
                path.push((i, *bar));
                collect_legs(&body.atoms, path, out);
                path.pop();
            }
            _ => {}
        }
    }
}

/// What becomes of a leg after contraction.
#[derive(Clone, Debug)]
enum Fate {
    Keep,
    Drop,
    Become(Atom),
}

fn rebuild(atoms: &[Atom], path: &mut Vec<(usize, bool)>, legs: &[Leg], fates: &[Fate]) -> Vec<Atom> {
    let mut out = Vec::new();
    for (i, a) in atoms.iter().enumerate() {
        match a {
            Atom::Leg { .. } => {
                let k = legs.iter().position(|l| l.path == *path && l.index == i).expect("leg is indexed");
                match &fates[k] {
                    Fate::Keep => out.push(a.clone()),
                    Fate::Drop => {}
                    Fate::Become(b) => out.push(b.clone()),
                }
            }
            Atom::Conv { bar, body } => {
                path.push((i, *bar));
                let inner = rebuild(&body.atoms, path, legs, fates);
                path.pop();
                out.push(Atom::Conv { bar: *bar, body: Body::raw(inner) });
            }
            _ => out.push(a.clone()),
        }
    }
    out
}

/// Every set of disjoint `Φ`–`Φ̄` pairs, found by deciding the fate of the
/// first open leg and recursing.
fn matchings(legs: &[Leg]) -> Vec<Vec<(usize, usize)>> {
    fn go(open: &[usize], legs: &[Leg], cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        let Some((&first, rest)) = open.split_first() else {
            out.push(cur.clone());
            return;
        };
        go(rest, legs, cur, out);
        for (pos, &other) in rest.iter().enumerate() {
            if legs[other].bar != legs[first].bar {
                let remaining: Vec<usize> = rest.iter().enumerate().filter(|&(p, _)| p != pos).map(|(_, &x)| x).collect();
                cur.push((first, other));
                go(&remaining, legs, cur, out);
                cur.pop();
            }
        }
    }
    let open: Vec<usize> = (0..legs.len()).collect();
    let mut out = Vec::new();
    go(&open, legs, &mut Vec::new(), &mut out);
    out
}

/// All partial Wick contractions of one body: two legs at the same vertex
/// give `C̄` (`C` directly under `Ḡ⊛`), legs at different vertices a link
/// pair.
pub fn wick_body(body: &Body) -> Vec<Body> {
    let mut legs = Vec::new();
    collect_legs(&body.atoms, &mut Vec::new(), &mut legs);
    let mut next_link = body.link_bound();
    let base = next_link;
    let mut out = Vec::new();
    for m in matchings(&legs) {
        next_link = base;
        let mut fates = vec![Fate::Keep; legs.len()];
        for &(a, b) in &m {
            let (phi, bar) = if legs[a].bar { (b, a) } else { (a, b) };
            if legs[phi].path == legs[bar].path {
                let under_bar = legs[phi].path.last().is_some_and(|&(_, bar)| bar);
                fates[phi] = Fate::Become(Atom::Token(if under_bar { Token::C } else { Token::Cbar }));
                fates[bar] = Fate::Drop;
            } else {
                fates[phi] = Fate::Become(Atom::Link { id: next_link, bar: false });
                fates[bar] = Fate::Become(Atom::Link { id: next_link, bar: true });
                next_link += 1;
            }
        }
        out.push(Body::raw(rebuild(&body.atoms, &mut Vec::new(), &legs, &fates)));
    }
    out
}

/// Wick expansion of the pointwise product of the factors.
pub fn wick_product(factors: &[Expr]) -> Expr {
    let product = factors.iter().fold(Expr::one(), |a, b| a.mul(b));
    let terms: Vec<Monomial> = product
        .monomials()
        .iter()
        .flat_map(|m| wick_body(&m.body).into_iter().map(move |body| Monomial { coeff: m.coeff, lambda: m.lambda, body }))
        .collect();
    Expr::from_monomials(terms)
}

/// Random monomial factors with at most `max_legs` legs in total, nested
/// at most two convolutions deep.
pub fn random_factors(rng: &mut impl Rng, max_legs: usize) -> Vec<Expr> {
    fn random_body(rng: &mut impl Rng, budget: &mut usize, depth: usize) -> Vec<Atom> {
        let mut atoms = Vec::new();
        let n = rng.gen_range(1..=3);
        for _ in 0..n {
            match rng.gen_range(0..10) {
                0..=5 if *budget > 0 => {
                    *budget -= 1;
                    atoms.push(Atom::Leg { bar: rng.gen_bool(0.5) });
                }
                6 | 7 if depth < 2 && *budget > 0 => {
                    let inner = random_body(rng, budget, depth + 1);
                    atoms.push(Atom::Conv { bar: rng.gen_bool(0.5), body: Body::raw(inner) });
                }
                8 => atoms.push(Atom::Token([Token::Cbar, Token::Chi, Token::C][rng.gen_range(0..3)])),
                _ => {}
            }
        }
        atoms
    }
    let mut budget = max_legs;
    let n = rng.gen_range(1..=4);
    (0..n)
        .map(|_| {
            let atoms = random_body(rng, &mut budget, 0);
            let coeff = Coeff::new([-3, -2, -1, 1, 2, 3][rng.gen_range(0..6)], rng.gen_range(1..=2));
            Expr::from_body(coeff, rng.gen_range(0..=1), Body::new(atoms))
        })
        .collect()
}

/// Outcome of the randomized `gamma_dot` comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct WickReport {
    pub cases: usize,
    pub mismatches: usize,
    pub max_legs_seen: usize,
}

pub fn wick_check(cases: usize, max_legs: usize, seed: u64) -> WickReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mismatches = 0;
    let mut max_legs_seen = 0;
    for _ in 0..cases {
        let fs = random_factors(&mut rng, max_legs);
        let legs: usize = fs.iter().map(|f| f.monomials().iter().map(|m| {
            let (a, b) = m.total_leg_count();
            a + b
        }).sum::<usize>()).sum();
        max_legs_seen = max_legs_seen.max(legs);
        let engine = crate::deformation::gamma_dot(&fs).expect("no holes");
        if engine != wick_product(&fs) {
            mismatches += 1;
        }
    }
    WickReport { cases, mismatches, max_legs_seen }
}

/// `F_0..F_K` by Picard iteration `ψ ↦ Φ + λG⊛(ψ̄^κ ψ^{κ+1})`, truncated
/// at `λ^K` after every step.
pub fn picard(kappa: u32, order: u32) -> Vec<Expr> {
    let mut psi = Expr::phi();
    for _ in 0..order {
        let nl = psi.conj().pow(kappa).mul(&psi.pow(kappa + 1)).truncate(order);
        psi = Expr::phi().add(&nl.convolve(false).shift_lambda(1)).truncate(order);
    }
    (0..=order).map(|k| psi.order(k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_wick_counts() {
        // Φ²Φ̄²: 1 + 4 + 2 matchings, all at one vertex.
        let e = Expr::phi().pow(2).mul(&Expr::phibar().pow(2));
        let w = wick_product(&[e]);
        let total: Coeff = w.monomials().iter().map(|m| m.coeff).sum();
        assert_eq!(total, Coeff::from(7));
    }

    #[test]
    fn engine_agrees_on_a_few_cases() {
        let r = wick_check(60, 8, 1);
        assert_eq!(r.mismatches, 0, "{r:?}");
    }

    #[test]
    fn picard_matches_recursion() {
        for (kappa, k) in [(1, 3), (2, 2)] {
            let sol = crate::perturbation::expand(kappa, k).unwrap();
            assert_eq!(picard(kappa, k), sol.coefficients);
        }
    }

    #[test]
    fn random_factors_respect_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let fs = random_factors(&mut rng, 8);
            let legs: usize = fs.iter().flat_map(|f| f.monomials()).map(|m| {
                let (a, b) = m.total_leg_count();
                a + b
            }).sum();
            assert!(legs <= 8);
        }
    }
}
