//! Wick-type deformations of the pointwise product.
//!
//! `Γ·Q` sums over every partial matching of `Φ` legs with `Φ̄` legs taken
//! from distinct generator factors. Two legs at one vertex collapse to a
//! `C̄` token (`C` inside a `Ḡ⊛`); legs at different vertices become a pair
//! of link ends standing for a `Q` kernel. `Γ•Q` pairs legs across external
//! slots only and never merges slots.

use std::collections::HashMap;
use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{canonicalize_forest, Atom, Body, Coeff, Expr, LegRef, Monomial, Token};

/// Partial matchings of `phi` with `bar` legs, restricted to allowed pairs.
/// Each matching is listed once as `(phi index, bar index)` pairs.
pub fn partial_matchings(
    n_phi: usize,
    n_bar: usize,
    allowed: &dyn Fn(usize, usize) -> bool,
    perfect_only: bool,
) -> Vec<Vec<(usize, usize)>> {
    struct Search<'a> {
        n_phi: usize,
        n_bar: usize,
        allowed: &'a dyn Fn(usize, usize) -> bool,
        perfect_only: bool,
        used: Vec<bool>,
        cur: Vec<(usize, usize)>,
        out: Vec<Vec<(usize, usize)>>,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize) {
            if i == self.n_phi {
                if !self.perfect_only || self.cur.len() == self.n_bar {
                    self.out.push(self.cur.clone());
                }
                return;
            }
            if !self.perfect_only {
                self.go(i + 1);
            }
            for j in 0..self.n_bar {
                if !self.used[j] && (self.allowed)(i, j) {
                    self.used[j] = true;
                    self.cur.push((i, j));
                    self.go(i + 1);
                    self.cur.pop();
                    self.used[j] = false;
                }
            }
        }
    }
    if perfect_only && n_phi != n_bar {
        return Vec::new();
    }
    let mut s = Search { n_phi, n_bar, allowed, perfect_only, used: vec![false; n_bar], cur: Vec::new(), out: Vec::new() };
    s.go(0);
    s.out
}

/// Atom index with its replacement, or `None` to remove it.
type AtomEdit = (usize, Option<Atom>);

/// Context of a vertex: `true` when it sits directly under `Ḡ⊛`.
fn vertex_is_bar(body: &Body, path: &[usize], root_bar: bool) -> bool {
    match path.split_last() {
        None => root_bar,
        Some((last, parent)) => match &body.vertex(parent).atoms[*last] {
            Atom::Conv { bar, .. } => *bar,
            _ => unreachable!("path element is a convolution"),
        },
    }
}

/// Contracts the given `(Φ leg, Φ̄ leg)` pairs in a body.
fn contract(body: &Body, pairs: &[(&LegRef, &LegRef)], root_bar: bool) -> Body {
    if pairs.is_empty() {
        return body.clone();
    }
    let mut out = body.clone();
    let mut next_id = body.link_bound();
    // Per vertex: atom index -> replacement (None removes the atom).
    let mut edits: HashMap<Vec<usize>, Vec<(usize, Option<Atom>)>> = HashMap::new();
    for (p, q) in pairs {
        if p.path == q.path {
            let token = if vertex_is_bar(body, &p.path, root_bar) { Token::C } else { Token::Cbar };
            let e = edits.entry(p.path.clone()).or_default();
            e.push((p.index, Some(Atom::Token(token))));
            e.push((q.index, None));
        } else {
            edits.entry(p.path.clone()).or_default().push((p.index, Some(Atom::Link { id: next_id, bar: false })));
            edits.entry(q.path.clone()).or_default().push((q.index, Some(Atom::Link { id: next_id, bar: true })));
            next_id += 1;
        }
    }
    // Deepest vertices first: removals shift the indices on ancestor paths.
    let mut edits: Vec<(Vec<usize>, Vec<AtomEdit>)> = edits.into_iter().collect();
    edits.sort_by_key(|e| std::cmp::Reverse(e.0.len()));
    for (path, mut e) in edits {
        let v = out.vertex_mut(&path);
        // Removals go last-to-first so earlier indices stay valid; replacing
        // in place never shifts indices.
        e.sort_by_key(|x| std::cmp::Reverse(x.0));
        for (idx, rep) in e {
            match rep {
                Some(a) => v.atoms[idx] = a,
                None => {
                    v.atoms.remove(idx);
                }
            }
        }
    }
    out
}

/// Σ over contractions of a single body, with `allowed(phi_leg, bar_leg)`
/// selecting admissible pairs.
fn contract_all(
    body: &Body,
    root_bar: bool,
    allowed: impl Fn(&LegRef, &LegRef) -> bool,
    perfect_only: bool,
) -> Vec<Body> {
    let legs = body.legs();
    let phis: Vec<&LegRef> = legs.iter().filter(|l| !l.bar).collect();
    let bars: Vec<&LegRef> = legs.iter().filter(|l| l.bar).collect();
    let ok = |i: usize, j: usize| allowed(phis[i], bars[j]);
    partial_matchings(phis.len(), bars.len(), &ok, perfect_only)
        .into_iter()
        .map(|m| {
            let pairs: Vec<(&LegRef, &LegRef)> = m.iter().map(|&(i, j)| (phis[i], bars[j])).collect();
            contract(body, &pairs, root_bar)
        })
        .collect()
}

/// `a ·Q b` evaluated at top level.
pub fn deformed_product(a: &Expr, b: &Expr) -> Expr {
    deformed_product_in(a, b, false)
}

/// `a ·Q b` at a vertex that sits under `Ḡ⊛` when `bar` is set.
pub fn deformed_product_in(a: &Expr, b: &Expr, bar: bool) -> Expr {
    let mut out = Vec::new();
    for ma in a.monomials() {
        for mb in b.monomials() {
            let mut rhs = mb.body.clone();
            rhs.shift_links(ma.body.link_bound());
            let split = ma.body.atoms.len();
            let mut atoms = ma.body.atoms.clone();
            atoms.extend(rhs.atoms);
            let merged = Body { atoms };
            let from_a = |l: &LegRef| match l.path.first() {
                Some(&i) => i < split,
                None => l.index < split,
            };
            let coeff = ma.coeff * mb.coeff;
            let lambda = ma.lambda + mb.lambda;
            for body in contract_all(&merged, bar, |p, q| from_a(p) != from_a(q), false) {
                out.push(Monomial { coeff, lambda, body });
            }
        }
    }
    Expr::from_monomials(out)
}

/// `Γ·Q` on an arbitrary expression: every generator occurrence is its own
/// factor, so all partial `Φ`–`Φ̄` matchings in the tree contribute.
pub fn gamma(e: &Expr) -> Expr {
    gamma_filtered(e, false)
}

/// `Γ·Q` followed by `η = 0`. Only perfect matchings survive, so the others
/// are never generated.
pub fn gamma_at_zero(e: &Expr) -> Expr {
    gamma_filtered(e, true).evaluate_at_zero()
}

fn gamma_filtered(e: &Expr, perfect_only: bool) -> Expr {
    let terms: Vec<Monomial> = e
        .monomials()
        .par_iter()
        .flat_map_iter(|m| {
            contract_all(&m.body, false, |_, _| true, perfect_only)
                .into_iter()
                .map(move |body| Monomial { coeff: m.coeff, lambda: m.lambda, body })
        })
        .collect();
    Expr::from_monomials(terms)
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DeformationError {
    #[error("factor contains an operand placeholder and cannot be deformed")]
    UnresolvedMarker,
}

/// Left fold of `·Q` over generator-level factors, each factor deformed
/// internally first (so `Γ·Q(G⊛τ) = G⊛Γ·Q(τ)`).
pub fn gamma_dot(factors: &[Expr]) -> Result<Expr, DeformationError> {
    let mut acc = Expr::one();
    for f in factors {
        if f.monomials().iter().any(|m| m.body.any(&|a| matches!(a, Atom::Hole))) {
            return Err(DeformationError::UnresolvedMarker);
        }
        acc = deformed_product(&acc, &gamma(f));
    }
    Ok(acc)
}

/// A term of a multilocal expression: one body per external slot.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MultiTerm {
    pub coeff: (i64, i64),
    pub lambda: u32,
    pub slots: Vec<Body>,
}

/// Sum of tensor products `Σ c λ^p τ₁⊗…⊗τₘ`, possibly joined by links.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MultiExpr {
    terms: Vec<(Coeff, u32, Vec<Body>)>,
}

impl MultiExpr {
    pub fn from_terms(it: impl IntoIterator<Item = (Coeff, u32, Vec<Body>)>) -> MultiExpr {
        let mut acc: HashMap<(u32, Vec<Body>), Coeff> = HashMap::new();
        for (c, l, mut slots) in it {
            if c.is_zero() {
                continue;
            }
            canonicalize_forest(&mut slots);
            *acc.entry((l, slots)).or_insert_with(Coeff::zero) += c;
        }
        let mut terms: Vec<(Coeff, u32, Vec<Body>)> =
            acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|((l, s), c)| (c, l, s)).collect();
        terms.sort_by(|a, b| (a.1, &a.2).cmp(&(b.1, &b.2)));
        MultiExpr { terms }
    }

    /// Plain tensor product of the slot expressions.
    pub fn tensor(slots: &[Expr]) -> MultiExpr {
        MultiExpr::from_terms(tensor_terms(slots, None))
    }

    pub fn terms(&self) -> &[(Coeff, u32, Vec<Body>)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, o: &MultiExpr) -> MultiExpr {
        MultiExpr::from_terms(self.terms.iter().chain(o.terms.iter()).cloned())
    }

    pub fn truncate(&self, k: u32) -> MultiExpr {
        MultiExpr { terms: self.terms.iter().filter(|t| t.1 <= k).cloned().collect() }
    }

    pub fn order(&self, k: u32) -> MultiExpr {
        MultiExpr { terms: self.terms.iter().filter(|t| t.1 == k).map(|t| (t.0, 0, t.2.clone())).collect() }
    }

    /// Drops every term that still carries a leg or an `η` token.
    pub fn evaluate_at_zero(&self) -> MultiExpr {
        let dead = |a: &Atom| matches!(a, Atom::Leg { .. } | Atom::Token(Token::Eta) | Atom::Token(Token::EtaBar));
        MultiExpr { terms: self.terms.iter().filter(|t| !t.2.iter().any(|s| s.any(&dead))).cloned().collect() }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v: Vec<MultiTerm> = self
            .terms
            .iter()
            .map(|(c, l, s)| MultiTerm {
                coeff: (i64::try_from(*c.numer()).unwrap(), i64::try_from(*c.denom()).unwrap()),
                lambda: *l,
                slots: s.clone(),
            })
            .collect();
        serde_json::to_value(v).expect("multilocal expression serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<MultiExpr, serde_json::Error> {
        let ts: Vec<MultiTerm> = serde_json::from_value(v.clone())?;
        Ok(MultiExpr::from_terms(
            ts.into_iter().map(|t| (Coeff::new(t.coeff.0 as i128, t.coeff.1 as i128), t.lambda, t.slots)),
        ))
    }
}

impl fmt::Display for MultiExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (c, l, slots)) in self.terms.iter().enumerate() {
            let m = Monomial { coeff: *c, lambda: *l, body: Body::empty() };
            let prefix = m.to_string();
            let sign = if *c < Coeff::zero() { "-" } else { "+" };
            if i > 0 || sign == "-" {
                write!(f, "{}{sign} ", if i > 0 { " " } else { "" })?;
            }
            let coeff = prefix.trim_start_matches('-');
            if coeff != "1" {
                write!(f, "{coeff}·")?;
            }
            let parts: Vec<String> = slots.iter().map(|s| s.to_string()).collect();
            write!(f, "{}", parts.join(" ⊗ "))?;
        }
        Ok(())
    }
}

/// Cartesian product of slot monomials with link ids kept disjoint,
/// skipping combinations above `max_lambda`.
fn tensor_terms(slots: &[Expr], max_lambda: Option<u32>) -> Vec<(Coeff, u32, Vec<Body>)> {
    let mut partial: Vec<(Coeff, u32, Vec<Body>, u32)> = vec![(Coeff::one(), 0, Vec::new(), 0)];
    for s in slots {
        let mut next = Vec::new();
        for (c, l, bodies, bound) in &partial {
            for m in s.monomials() {
                let lam = l + m.lambda;
                if max_lambda.is_some_and(|k| lam > k) {
                    continue;
                }
                let mut b = m.body.clone();
                b.shift_links(*bound);
                let nb = bound + m.body.link_bound();
                let mut v = bodies.clone();
                v.push(b);
                next.push((*c * m.coeff, lam, v, nb));
            }
        }
        partial = next;
    }
    partial.into_iter().map(|(c, l, b, _)| (c, l, b)).collect()
}

/// `Γ•Q(τ₁⊗…⊗τₘ)`: contracts legs lying in distinct slots only.
pub fn bullet_product(slots: &[Expr]) -> MultiExpr {
    bullet_product_truncated(slots, None, false)
}

/// `Γ•Q` restricted to total `λ` degree `max_lambda`; with `at_zero` only
/// fully contracted terms are generated.
pub fn bullet_product_truncated(slots: &[Expr], max_lambda: Option<u32>, at_zero: bool) -> MultiExpr {
    let combos = tensor_terms(slots, max_lambda);
    let out: Vec<(Coeff, u32, Vec<Body>)> = combos
        .par_iter()
        .flat_map_iter(|(c, l, bodies)| {
            contract_slots(bodies, at_zero).into_iter().map(move |b| (*c, *l, b))
        })
        .collect();
    let me = MultiExpr::from_terms(out);
    if at_zero {
        me.evaluate_at_zero()
    } else {
        me
    }
}

/// All cross-slot contractions of a forest.
fn contract_slots(bodies: &[Body], perfect_only: bool) -> Vec<Vec<Body>> {
    let mut bound = bodies.iter().map(Body::link_bound).max().unwrap_or(0);
    let legs: Vec<(usize, LegRef)> =
        bodies.iter().enumerate().flat_map(|(s, b)| b.legs().into_iter().map(move |l| (s, l))).collect();
    let phis: Vec<&(usize, LegRef)> = legs.iter().filter(|l| !l.1.bar).collect();
    let bars: Vec<&(usize, LegRef)> = legs.iter().filter(|l| l.1.bar).collect();
    let ok = |i: usize, j: usize| phis[i].0 != bars[j].0;
    let matchings = partial_matchings(phis.len(), bars.len(), &ok, perfect_only);
    bound = bound.max(1);
    matchings
        .into_iter()
        .map(|m| {
            let mut out = bodies.to_vec();
            for (n, &(i, j)) in m.iter().enumerate() {
                let id = bound + n as u32;
                let (sp, lp) = phis[i];
                let (sq, lq) = bars[j];
                out[*sp].vertex_mut(&lp.path).atoms[lp.index] = Atom::Link { id, bar: false };
                out[*sq].vertex_mut(&lq.path).atoms[lq.index] = Atom::Link { id, bar: true };
            }
            out
        })
        .collect()
}

/// Ambiguity of the extension: `C ↦ C + s·δc`, `C̄ ↦ C̄ + s·δc̄`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountertermShift {
    pub scale: (i64, i64),
}

impl CountertermShift {
    pub fn zero() -> Self {
        CountertermShift { scale: (0, 1) }
    }

    pub fn unit() -> Self {
        CountertermShift { scale: (1, 1) }
    }

    fn coeff(&self) -> Coeff {
        Coeff::new(self.scale.0 as i128, self.scale.1 as i128)
    }
}

pub fn apply_counterterm_shift(e: &Expr, shift: &CountertermShift) -> Expr {
    let s = shift.coeff();
    if s.is_zero() {
        return e.clone();
    }
    let c = Expr::token(Token::C).add(&Expr::token(Token::DeltaC).scale(s));
    let cbar = Expr::token(Token::Cbar).add(&Expr::token(Token::DeltaCbar).scale(s));
    e.substitute_token(Token::C, &c).substitute_token(Token::Cbar, &cbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Generator;

    fn phi() -> Expr {
        Expr::phi()
    }
    fn bar() -> Expr {
        Expr::phibar()
    }
    fn cbar() -> Expr {
        Expr::token(Token::Cbar)
    }

    #[test]
    fn matching_counts() {
        let all = |_: usize, _: usize| true;
        assert_eq!(partial_matchings(2, 2, &all, false).len(), 7);
        assert_eq!(partial_matchings(2, 2, &all, true).len(), 2);
        assert_eq!(partial_matchings(3, 2, &all, true).len(), 0);
    }

    #[test]
    fn basic_products() {
        assert_eq!(deformed_product(&phi(), &bar()), phi().mul(&bar()).add(&cbar()));
        assert_eq!(deformed_product(&phi(), &phi()), phi().pow(2));
        let e = deformed_product(&bar(), &phi().pow(2));
        assert_eq!(e, bar().mul(&phi().pow(2)).add(&cbar().mul(&phi()).scale_int(2)));
    }

    #[test]
    fn gamma_closed_form_two_two() {
        let e = gamma_dot(&[phi(), phi(), bar(), bar()]).unwrap();
        let expected = phi()
            .pow(2)
            .mul(&bar().pow(2))
            .add(&cbar().mul(&phi()).mul(&bar()).scale_int(4))
            .add(&cbar().pow(2).scale_int(2));
        assert_eq!(e, expected);
        assert_eq!(gamma(&phi().pow(2).mul(&bar().pow(2))), expected);
    }

    #[test]
    fn gamma_commutes_with_convolution() {
        let tau = bar().mul(&phi().pow(2));
        let g = gamma_dot(&[tau.convolve(false)]).unwrap();
        let expected = tau.add(&cbar().mul(&phi()).scale_int(2)).convolve(false);
        assert_eq!(g, expected);
        let gb = gamma(&tau.conj().convolve(true));
        assert_eq!(gb, expected.conj());
    }

    #[test]
    fn unit_and_generators_are_fixed() {
        let tau = bar().mul(&phi().pow(2)).convolve(false);
        assert_eq!(gamma_dot(&[Expr::generator(Generator::One), tau.clone()]).unwrap(), gamma(&tau));
        assert_eq!(gamma(&phi()), phi());
        assert_eq!(gamma(&bar()), bar());
    }

    #[test]
    fn holes_are_rejected() {
        assert_eq!(gamma_dot(&[Expr::atom(Atom::Hole)]), Err(DeformationError::UnresolvedMarker));
    }

    #[test]
    fn cross_vertex_contraction_makes_links() {
        let e = deformed_product(&phi(), &bar().convolve(false));
        assert_eq!(e.len(), 2);
        assert!(e.monomials().iter().any(|m| m.body.has_links()));
    }

    #[test]
    fn bullet_examples() {
        let two = bullet_product(&[phi(), bar()]);
        assert_eq!(two.len(), 2);
        assert_eq!(two.evaluate_at_zero().len(), 1);
        let same = bullet_product(&[phi(), phi()]);
        assert_eq!(same, MultiExpr::tensor(&[phi(), phi()]));
        assert!(same.evaluate_at_zero().is_empty());
    }

    #[test]
    fn bullet_on_first_order_term() {
        let left = gamma(&bar().mul(&phi().pow(2)).convolve(false));
        let b = bullet_product(&[left, bar()]);
        // G⊛(Φ̄Φ²)⊗Φ̄: 1 + 2 contractions, G⊛(2C̄Φ)⊗Φ̄: 1 + 1.
        assert_eq!(b.len(), 4);
        let z = b.evaluate_at_zero();
        assert_eq!(z.len(), 1);
        assert_eq!(z.terms()[0].0, Coeff::from_integer(2));
    }

    #[test]
    fn shift_substitutes_tokens() {
        let e = deformed_product(&phi(), &bar());
        let s = apply_counterterm_shift(&e, &CountertermShift::unit());
        let expected = phi().mul(&bar()).add(&cbar()).add(&Expr::token(Token::DeltaCbar));
        assert_eq!(s, expected);
        assert_eq!(apply_counterterm_shift(&e, &CountertermShift::zero()), e);
        let tau = e.convolve(false);
        assert_eq!(
            apply_counterterm_shift(&tau, &CountertermShift::unit()),
            apply_counterterm_shift(&e, &CountertermShift::unit()).convolve(false)
        );
    }

    #[test]
    fn multi_json_round_trip() {
        let b = bullet_product(&[phi().add(&bar().convolve(false)), bar()]);
        assert_eq!(MultiExpr::from_json(&b.to_json()).unwrap(), b);
    }
}
