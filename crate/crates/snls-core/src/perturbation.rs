//! Perturbative solution `Ψ = Σ λ^k F_k` of
//! `Ψ = Φ + λ G⊛(Ψ̄^κ Ψ^{κ+1})`, its deformed image, correlation functions
//! and the counterterms of the renormalized equation
//! `Γ·Q(Ψ) = Φ + λ G⊛(Γ(Ψ̄)^κ Γ(Ψ)^{κ+1}) + λ G⊛(M Γ(Ψ))`,
//! `M = Σ_{j≥1} λ^{j-1} M_j`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{Atom, Body, Expr, Monomial};
use crate::deformation::{bullet_product_truncated, gamma, gamma_at_zero, MultiExpr};
use crate::diagram::{multi_to_diagrams, Diagram};

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbativeSolution {
    pub kappa: u32,
    pub order: u32,
    /// `F_0, …, F_K`, each with `lambda = 0`.
    pub coefficients: Vec<Expr>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PerturbationError {
    #[error("order {order} exceeds the expansion order {available}")]
    OrderTooHigh { order: u32, available: u32 },
    #[error("odd number of points ({0}) requested in strict mode; odd correlations vanish")]
    OddPoints(usize),
    #[error("kappa must be positive")]
    ZeroKappa,
    #[error("residual at order {order} is not of the form G⊛(K·Φ): {term}")]
    NotAbsorbable { order: u32, term: String },
    #[error("counterterm M_{order} does not have even bidegree: {term}")]
    OddBidegree { order: u32, term: String },
}

/// Ordered compositions of `total` into `parts` non-negative integers.
pub fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 0 {
        return if total == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `Σ_{k₁+…+k_{2κ+1}=total} Π_{i≤κ} conj(xs[kᵢ]) · Π_{i>κ} xs[kᵢ]`, with
/// `bars[j]` standing in for the conjugate of `xs[j]`.
fn nonlinearity(kappa: u32, total: u32, xs: &[Expr], bars: &[Expr]) -> Expr {
    let k = kappa as usize;
    let terms: Vec<Expr> = compositions(total, 2 * k + 1)
        .par_iter()
        .map(|c| {
            let mut p = Expr::one();
            for (i, &ki) in c.iter().enumerate() {
                let f = if i < k { &bars[ki as usize] } else { &xs[ki as usize] };
                p = p.mul(f);
            }
            p
        })
        .collect();
    terms.iter().fold(Expr::zero(), |a, b| a.add(b))
}

/// Builds `F_0..F_K` by the order-by-order recursion.
pub fn expand(kappa: u32, order: u32) -> Result<PerturbativeSolution, PerturbationError> {
    if kappa == 0 {
        return Err(PerturbationError::ZeroKappa);
    }
    let mut fs = vec![Expr::phi()];
    let mut bars = vec![Expr::phibar()];
    for k in 1..=order {
        let f = nonlinearity(kappa, k - 1, &fs, &bars).convolve(false);
        bars.push(f.conj());
        fs.push(f);
    }
    Ok(PerturbativeSolution { kappa, order, coefficients: fs })
}

impl PerturbativeSolution {
    fn check(&self, order: u32) -> Result<(), PerturbationError> {
        if order > self.order {
            return Err(PerturbationError::OrderTooHigh { order, available: self.order });
        }
        Ok(())
    }

    /// `Σ_{k≤order} λ^k F_k`.
    pub fn psi(&self, order: u32) -> Expr {
        self.coefficients
            .iter()
            .enumerate()
            .take(order as usize + 1)
            .fold(Expr::zero(), |acc, (k, f)| acc.add(&f.shift_lambda(k as u32)))
    }

    pub fn coefficient(&self, k: u32) -> &Expr {
        &self.coefficients[k as usize]
    }
}

/// `E[Γ·Q(Ψ)]` truncated at `order`: `Γ·Q` followed by `η = 0`.
pub fn expectation(sol: &PerturbativeSolution, order: u32) -> Result<Expr, PerturbationError> {
    sol.check(order)?;
    Ok(gamma_at_zero(&sol.psi(order)))
}

/// Same as [`expectation`] but through the full deformation, with every
/// partial contraction generated before setting `η = 0`.
pub fn expectation_full(sol: &PerturbativeSolution, order: u32) -> Result<Expr, PerturbationError> {
    sol.check(order)?;
    Ok(gamma(&sol.psi(order)).evaluate_at_zero())
}

/// `Γ•Q` over slots alternating `Γ·Q(Ψ)`, `Γ·Q(Ψ̄)`, at `η = 0`, truncated
/// at `order`.
pub fn m_point_expr(
    sol: &PerturbativeSolution,
    m: usize,
    order: u32,
    strict: bool,
) -> Result<MultiExpr, PerturbationError> {
    sol.check(order)?;
    if m % 2 == 1 && strict {
        return Err(PerturbationError::OddPoints(m));
    }
    let g = gamma(&sol.psi(order));
    let gbar = gamma(&sol.psi(order).conj());
    let slots: Vec<Expr> = (0..m).map(|i| if i % 2 == 0 { g.clone() } else { gbar.clone() }).collect();
    Ok(bullet_product_truncated(&slots, Some(order), true))
}

pub fn two_point_expr(sol: &PerturbativeSolution, order: u32) -> Result<MultiExpr, PerturbationError> {
    m_point_expr(sol, 2, order, true)
}

pub fn two_point(sol: &PerturbativeSolution, order: u32) -> Result<Vec<Diagram>, PerturbationError> {
    Ok(multi_to_diagrams(&two_point_expr(sol, order)?))
}

pub fn m_point(sol: &PerturbativeSolution, m: usize, order: u32, strict: bool) -> Result<Vec<Diagram>, PerturbationError> {
    Ok(multi_to_diagrams(&m_point_expr(sol, m, order, strict)?))
}

/// `⟨Γ·Q(Ψ) Γ·Q(Ψ)⟩` at `η = 0`, with no conjugate slot.
pub fn unconjugated_two_point(sol: &PerturbativeSolution, order: u32) -> Result<MultiExpr, PerturbationError> {
    sol.check(order)?;
    let g = gamma(&sol.psi(order));
    Ok(bullet_product_truncated(&[g.clone(), g], Some(order), true))
}

/// `M_1, …, M_K`; each is an operator-valued functional whose operand
/// position is an [`Atom::Hole`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CountertermSeries {
    pub entries: Vec<Expr>,
}

impl CountertermSeries {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(self.entries.iter().map(Expr::to_json).collect())
    }
}

fn hole_path(body: &Body) -> Option<Vec<usize>> {
    for (i, a) in body.atoms.iter().enumerate() {
        match a {
            Atom::Hole => return Some(Vec::new()),
            Atom::Conv { body, .. } => {
                if let Some(mut p) = hole_path(body) {
                    p.insert(0, i);
                    return Some(p);
                }
            }
            _ => {}
        }
    }
    None
}

/// `M[u]`: substitutes every operand monomial at the hole's vertex.
pub fn apply_operator(m: &Expr, operand: &Expr) -> Expr {
    let mut out = Vec::new();
    for mm in m.monomials() {
        let Some(path) = hole_path(&mm.body) else {
            // Without a hole the operator is a plain multiplier.
            out.extend(mm.clone().times_all(operand));
            continue;
        };
        for o in operand.monomials() {
            let mut body = mm.body.clone();
            let mut rhs = o.body.clone();
            rhs.shift_links(body.link_bound());
            let v = body.vertex_mut(&path);
            let pos = v.atoms.iter().position(|a| matches!(a, Atom::Hole)).expect("hole present");
            v.atoms.remove(pos);
            v.atoms.extend(rhs.atoms);
            out.push(Monomial { coeff: mm.coeff * o.coeff, lambda: mm.lambda + o.lambda, body });
        }
    }
    Expr::from_monomials(out)
}

trait TimesAll {
    fn times_all(self, e: &Expr) -> Vec<Monomial>;
}

impl TimesAll for Monomial {
    fn times_all(self, e: &Expr) -> Vec<Monomial> {
        e.monomials().iter().map(|o| self.times(o)).collect()
    }
}

/// Cached deformed coefficients `Γ(F_j)` and `Γ(F̄_j)`.
pub struct DeformedSolution {
    pub kappa: u32,
    pub gf: Vec<Expr>,
    pub gfbar: Vec<Expr>,
}

impl DeformedSolution {
    pub fn new(sol: &PerturbativeSolution) -> DeformedSolution {
        let gf: Vec<Expr> = sol.coefficients.par_iter().map(gamma).collect();
        let gfbar: Vec<Expr> = sol.coefficients.par_iter().map(|f| gamma(&f.conj())).collect();
        DeformedSolution { kappa: sol.kappa, gf, gfbar }
    }

    /// Coefficient of `λ^k` in
    /// `Γ(Ψ) − Φ − λG⊛(Γ(Ψ̄)^κΓ(Ψ)^{κ+1}) − λG⊛(MΓ(Ψ))`, `k ≥ 1`.
    pub fn residual(&self, cts: &[Expr], k: u32) -> Expr {
        let products = nonlinearity(self.kappa, k - 1, &self.gf, &self.gfbar).convolve(false);
        let mut r = self.gf[k as usize].sub(&products);
        for j in 1..=k.min(cts.len() as u32) {
            let t = apply_operator(&cts[j as usize - 1], &self.gf[(k - j) as usize]).convolve(false);
            r = r.sub(&t);
        }
        r
    }
}

/// Reads `M_k` off a residual `G⊛(K·Φ)`.
fn absorb(order: u32, r: &Expr) -> Result<Expr, PerturbationError> {
    let mut out = Vec::new();
    for m in r.monomials() {
        let fail = || PerturbationError::NotAbsorbable { order, term: m.to_string() };
        let inner = match m.body.atoms.as_slice() {
            [Atom::Conv { bar: false, body }] if m.lambda == 0 => body,
            _ => return Err(fail()),
        };
        let g = inner.grading();
        if g.m != g.mbar + 1 || inner.any(&|a| matches!(a, Atom::Hole)) {
            return Err(fail());
        }
        let mut body = inner.clone();
        match body.atoms.iter().position(|a| *a == Atom::Leg { bar: false }) {
            Some(i) => body.atoms[i] = Atom::Hole,
            None => {
                let leg = body.legs().into_iter().find(|l| !l.bar).ok_or_else(fail)?;
                body.vertex_mut(&leg.path).atoms[leg.index] = Atom::Hole;
            }
        }
        out.push(Monomial { coeff: m.coeff, lambda: 0, body });
    }
    let mk = Expr::from_monomials(out);
    for m in mk.monomials() {
        let g = m.grading();
        if g.m != g.mbar {
            return Err(PerturbationError::OddBidegree { order, term: m.to_string() });
        }
    }
    Ok(mk)
}

/// Whether every monomial of an operator has as many `Φ` as `Φ̄` legs,
/// so that its polynomial degree is even in the pair.
pub fn has_even_bidegree(m: &Expr) -> bool {
    m.monomials().iter().all(|x| {
        let g = x.grading();
        g.m == g.mbar && (g.m + g.mbar) % 2 == 0
    })
}

/// Extracts `M_1..M_K` order by order.
pub fn counterterms(sol: &PerturbativeSolution, order: u32) -> Result<CountertermSeries, PerturbationError> {
    sol.check(order)?;
    let ds = DeformedSolution::new(sol);
    let mut cts: Vec<Expr> = Vec::new();
    for k in 1..=order {
        let r = ds.residual(&cts, k);
        cts.push(absorb(k, &r)?);
    }
    Ok(CountertermSeries { entries: cts })
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VerifyReport {
    pub passed: bool,
    pub orders_checked: u32,
    pub first_failing_order: Option<u32>,
    /// `λ^k` times the order-`k` residual, pretty-printed.
    pub residual: Option<String>,
    #[serde(skip)]
    pub residual_expr: Option<Expr>,
}

/// Checks the renormalized equation order by order up to `order`.
pub fn verify_renormalized_equation(
    sol: &PerturbativeSolution,
    cts: &CountertermSeries,
    order: u32,
) -> Result<VerifyReport, PerturbationError> {
    sol.check(order)?;
    let ds = DeformedSolution::new(sol);
    for k in 1..=order {
        let r = ds.residual(&cts.entries, k);
        if !r.is_zero() {
            let r = r.shift_lambda(k);
            return Ok(VerifyReport {
                passed: false,
                orders_checked: k,
                first_failing_order: Some(k),
                residual: Some(r.to_string()),
                residual_expr: Some(r),
            });
        }
    }
    Ok(VerifyReport { passed: true, orders_checked: order, first_failing_order: None, residual: None, residual_expr: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Token;

    fn phi() -> Expr {
        Expr::phi()
    }
    fn bar() -> Expr {
        Expr::phibar()
    }
    fn cbar() -> Expr {
        Expr::token(Token::Cbar)
    }
    fn hole() -> Expr {
        Expr::atom(Atom::Hole)
    }

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(1, 3).len(), 3);
        assert_eq!(compositions(2, 3).len(), 6);
        assert_eq!(compositions(0, 5), vec![vec![0; 5]]);
    }

    #[test]
    fn low_orders() {
        let s = expand(1, 2).unwrap();
        let f1 = bar().mul(&phi().pow(2)).convolve(false);
        assert_eq!(s.coefficients[1], f1);
        let f2 = f1.conj().mul(&phi().pow(2)).add(&bar().mul(&phi()).mul(&f1).scale_int(2)).convolve(false);
        assert_eq!(s.coefficients[2], f2);
        assert_eq!(expand(0, 1), Err(PerturbationError::ZeroKappa));
    }

    #[test]
    fn unpaired_phi_everywhere() {
        for kappa in 1..=2 {
            let s = expand(kappa, 3).unwrap();
            for f in &s.coefficients {
                for m in f.monomials() {
                    let g = m.grading();
                    assert_eq!(g.m, g.mbar + 1);
                }
            }
        }
    }

    #[test]
    fn first_counterterm() {
        let s = expand(1, 1).unwrap();
        let c = counterterms(&s, 1).unwrap();
        assert_eq!(c.entries[0], cbar().mul(&hole()).scale_int(2));
        let s2 = expand(2, 1).unwrap();
        let c2 = counterterms(&s2, 1).unwrap();
        let expected = cbar().mul(&bar()).mul(&phi()).mul(&hole()).scale_int(6).add(&cbar().pow(2).mul(&hole()).scale_int(6));
        assert_eq!(c2.entries[0], expected);
        assert!(has_even_bidegree(&c2.entries[0]));
    }

    #[test]
    fn verify_detects_missing_counterterm() {
        let s = expand(1, 1).unwrap();
        let rep = verify_renormalized_equation(&s, &CountertermSeries::default(), 1).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.first_failing_order, Some(1));
        let expected = cbar().mul(&phi()).scale_int(2).convolve(false).shift_lambda(1);
        assert_eq!(rep.residual_expr.unwrap(), expected);
    }

    #[test]
    fn operator_application() {
        let m = cbar().mul(&hole()).scale_int(2);
        assert_eq!(apply_operator(&m, &phi()), cbar().mul(&phi()).scale_int(2));
        assert_eq!(apply_operator(&cbar(), &phi()), cbar().mul(&phi()));
    }

    #[test]
    fn order_limit() {
        let s = expand(1, 1).unwrap();
        assert_eq!(expectation(&s, 2), Err(PerturbationError::OrderTooHigh { order: 2, available: 1 }));
    }
}
