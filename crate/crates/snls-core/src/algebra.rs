//! Polynomial functionals in two independent fields `Φ`, `Φ̄`.
//!
//! A monomial is a tree: its top-level atoms live at the evaluation point,
//! every [`Atom::Conv`] opens a new integration vertex reached through a
//! `G` (or `Ḡ`) propagator. Contractions that join legs sitting at two
//! different vertices leave a pair of [`Atom::Link`] ends carrying the same
//! id; a contraction at a single vertex leaves a `C`/`C̄` token instead.
//!
//! Expressions are kept fully distributed: every convolution wraps exactly
//! one monomial body and all scalars live on the outer monomial, so
//! `G⊛(a+b)` and `G⊛a + G⊛b` share one canonical form.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Exact rational coefficient.
pub type Coeff = Ratio<i128>;

/// Smooth multipliers that carry no field legs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Token {
    C,
    Cbar,
    Chi,
    Eta,
    EtaBar,
    /// Counterterm ambiguity `δc`, supported at coinciding times.
    DeltaC,
    DeltaCbar,
}

impl Token {
    pub fn conj(self) -> Token {
        match self {
            Token::C => Token::Cbar,
            Token::Cbar => Token::C,
            Token::Eta => Token::EtaBar,
            Token::EtaBar => Token::Eta,
            Token::Chi => Token::Chi,
            Token::DeltaC => Token::DeltaCbar,
            Token::DeltaCbar => Token::DeltaC,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Token::C => "C",
            Token::Cbar => "C̄",
            Token::Chi => "χ",
            Token::Eta => "η",
            Token::EtaBar => "η̄",
            Token::DeltaC => "δc",
            Token::DeltaCbar => "δc̄",
        }
    }
}

/// The three generators of the algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Generator {
    One,
    Phi,
    PhiBar,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    /// An uncontracted field: `Φ` (`bar = false`) or `Φ̄`.
    Leg { bar: bool },
    Token(Token),
    /// One end of a `Q` contraction. `bar = false` marks the end that
    /// carried `Φ`.
    Link { id: u32, bar: bool },
    /// Operand position of an operator-valued functional.
    Hole,
    /// `G⊛body` (`bar = false`) or `Ḡ⊛body`.
    Conv { bar: bool, body: Body },
}

/// Multiset of atoms at one vertex, kept in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Body {
    pub atoms: Vec<Atom>,
}

/// Location of a field leg inside a monomial tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LegRef {
    /// Indices of the `Conv` atoms leading to the vertex.
    pub path: Vec<usize>,
    /// Index of the leg atom inside that vertex.
    pub index: usize,
    pub bar: bool,
}

impl Body {
    /// Canonical body; `atoms` must form a complete monomial tree.
    pub fn new(atoms: Vec<Atom>) -> Body {
        let mut b = Body { atoms };
        canonicalize_forest(std::slice::from_mut(&mut b));
        b
    }

    /// Wraps atoms without canonicalizing. Use for subtrees whose links
    /// have partners elsewhere.
    pub fn raw(atoms: Vec<Atom>) -> Body {
        Body { atoms }
    }

    pub fn empty() -> Body {
        Body { atoms: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn vertex(&self, path: &[usize]) -> &Body {
        let mut v = self;
        for &i in path {
            match &v.atoms[i] {
                Atom::Conv { body, .. } => v = body,
                _ => panic!("path does not lead through a convolution"),
            }
        }
        v
    }

    pub fn vertex_mut(&mut self, path: &[usize]) -> &mut Body {
        let mut v = self;
        for &i in path {
            match &mut v.atoms[i] {
                Atom::Conv { body, .. } => v = body,
                _ => panic!("path does not lead through a convolution"),
            }
        }
        v
    }

    /// Every uncontracted leg, at any depth, in traversal order.
    pub fn legs(&self) -> Vec<LegRef> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_legs(&mut path, &mut out);
        out
    }

    fn collect_legs(&self, path: &mut Vec<usize>, out: &mut Vec<LegRef>) {
        for (i, a) in self.atoms.iter().enumerate() {
            match a {
                Atom::Leg { bar } => out.push(LegRef { path: path.clone(), index: i, bar: *bar }),
                Atom::Conv { body, .. } => {
                    path.push(i);
                    body.collect_legs(path, out);
                    path.pop();
                }
                _ => {}
            }
        }
    }

    pub fn any(&self, pred: &impl Fn(&Atom) -> bool) -> bool {
        self.atoms.iter().any(|a| {
            pred(a)
                || match a {
                    Atom::Conv { body, .. } => body.any(pred),
                    _ => false,
                }
        })
    }

    pub fn count(&self, pred: &impl Fn(&Atom) -> bool) -> usize {
        self.atoms
            .iter()
            .map(|a| {
                let own = usize::from(pred(a));
                own + match a {
                    Atom::Conv { body, .. } => body.count(pred),
                    _ => 0,
                }
            })
            .sum()
    }

    pub fn has_links(&self) -> bool {
        self.any(&|a| matches!(a, Atom::Link { .. }))
    }

    /// One past the largest link id in use.
    pub fn link_bound(&self) -> u32 {
        let mut m = 0;
        self.for_each(&mut |a| {
            if let Atom::Link { id, .. } = a {
                m = m.max(id + 1);
            }
        });
        m
    }

    pub fn for_each(&self, f: &mut impl FnMut(&Atom)) {
        for a in &self.atoms {
            f(a);
            if let Atom::Conv { body, .. } = a {
                body.for_each(f);
            }
        }
    }

    pub fn for_each_mut(&mut self, f: &mut impl FnMut(&mut Atom)) {
        for a in &mut self.atoms {
            f(a);
            if let Atom::Conv { body, .. } = a {
                body.for_each_mut(f);
            }
        }
    }

    pub fn shift_links(&mut self, offset: u32) {
        if offset == 0 {
            return;
        }
        self.for_each_mut(&mut |a| {
            if let Atom::Link { id, .. } = a {
                *id += offset;
            }
        });
    }

    pub fn conj(&self) -> Body {
        let mut b = self.clone();
        b.for_each_mut(&mut |a| match a {
            Atom::Leg { bar } | Atom::Link { bar, .. } | Atom::Conv { bar, .. } => *bar = !*bar,
            Atom::Token(t) => *t = t.conj(),
            Atom::Hole => {}
        });
        canonicalize_forest(std::slice::from_mut(&mut b));
        b
    }

    pub fn grading(&self) -> Grading {
        let mut g = Grading::default();
        self.for_each(&mut |a| match a {
            Atom::Leg { bar: false } => g.m += 1,
            Atom::Leg { bar: true } => g.mbar += 1,
            Atom::Conv { bar: false, .. } => g.l += 1,
            Atom::Conv { bar: true, .. } => g.lbar += 1,
            _ => {}
        });
        g
    }

    pub fn depth(&self) -> usize {
        self.atoms
            .iter()
            .map(|a| match a {
                Atom::Conv { body, .. } => 1 + body.depth(),
                _ => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Product of two bodies at the same vertex; link ids of `other` are
    /// shifted to stay disjoint.
    pub fn merged(&self, other: &Body) -> Body {
        let mut rhs = other.clone();
        rhs.shift_links(self.link_bound());
        let mut atoms = self.atoms.clone();
        atoms.extend(rhs.atoms);
        Body::new(atoms)
    }

    /// Recursive sort by the derived order, children first.
    fn sort_rec(&mut self) {
        for a in &mut self.atoms {
            if let Atom::Conv { body, .. } = a {
                body.sort_rec();
            }
        }
        self.atoms.sort();
    }
}

/// Puts a forest of vertex trees (one tree per external slot, order kept)
/// into canonical form. Link ids are renumbered from 0 so that isomorphic
/// contraction patterns compare equal.
pub fn canonicalize_forest(roots: &mut [Body]) {
    if !roots.iter().any(Body::has_links) {
        for r in roots.iter_mut() {
            r.sort_rec();
        }
        return;
    }
    // Position of every link end, described without reference to ids.
    let mut ends: HashMap<u32, [String; 2]> = HashMap::new();
    for (i, r) in roots.iter().enumerate() {
        let ctx = format!("R{i}{{{}}}", shape(r));
        record_ends(r, &ctx, &mut ends);
    }
    let sigs: HashMap<u32, String> = ends
        .into_iter()
        .map(|(id, [phi, bar])| (id, format!("{phi}~{bar}")))
        .collect();
    for r in roots.iter_mut() {
        key_sort(r, &sigs);
    }
    let mut next = 0u32;
    let mut renum: HashMap<u32, u32> = HashMap::new();
    for r in roots.iter_mut() {
        r.for_each_mut(&mut |a| {
            if let Atom::Link { id, .. } = a {
                let n = *renum.entry(*id).or_insert_with(|| {
                    next += 1;
                    next - 1
                });
                *id = n;
            }
        });
    }
    for r in roots.iter_mut() {
        r.sort_rec();
    }
}

fn atom_shape(a: &Atom) -> String {
    match a {
        Atom::Leg { bar } => format!("a{}", u8::from(*bar)),
        Atom::Token(t) => format!("b{}", *t as u8),
        Atom::Hole => "c".into(),
        Atom::Link { bar, .. } => format!("d{}", u8::from(*bar)),
        Atom::Conv { bar, body } => format!("e{}({})", u8::from(*bar), shape(body)),
    }
}

fn shape(b: &Body) -> String {
    let mut parts: Vec<String> = b.atoms.iter().map(atom_shape).collect();
    parts.sort();
    parts.join(",")
}

fn record_ends(b: &Body, ctx: &str, ends: &mut HashMap<u32, [String; 2]>) {
    for a in &b.atoms {
        match a {
            Atom::Link { id, bar } => {
                ends.entry(*id).or_default()[usize::from(*bar)] = ctx.to_string();
            }
            Atom::Conv { bar, body } => {
                let child = format!("{ctx}/G{}{{{}}}", u8::from(*bar), shape(body));
                record_ends(body, &child, ends);
            }
            _ => {}
        }
    }
}

fn key_sort(b: &mut Body, sigs: &HashMap<u32, String>) -> String {
    let mut keyed: Vec<(String, Atom)> = b
        .atoms
        .drain(..)
        .map(|mut a| {
            let key = match &mut a {
                Atom::Link { id, bar } => format!("d{}[{}]", u8::from(*bar), sigs[id]),
                Atom::Conv { bar, body } => format!("e{}({})", u8::from(*bar), key_sort(body, sigs)),
                other => atom_shape(other),
            };
            (key, a)
        })
        .collect();
    keyed.sort_by(|x, y| x.0.cmp(&y.0));
    let key = keyed.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(",");
    b.atoms = keyed.into_iter().map(|(_, a)| a).collect();
    key
}

/// `(m, m′, l, l′)`: numbers of `Φ`, `Φ̄`, `G⊛`, `Ḡ⊛` in a monomial.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Grading {
    pub m: u32,
    pub mbar: u32,
    pub l: u32,
    pub lbar: u32,
}

impl Grading {
    pub fn max(self, o: Grading) -> Grading {
        Grading { m: self.m.max(o.m), mbar: self.mbar.max(o.mbar), l: self.l.max(o.l), lbar: self.lbar.max(o.lbar) }
    }
}

impl std::ops::Add for Grading {
    type Output = Grading;
    fn add(self, o: Grading) -> Grading {
        Grading { m: self.m + o.m, mbar: self.mbar + o.mbar, l: self.l + o.l, lbar: self.lbar + o.lbar }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coeff: Coeff,
    pub lambda: u32,
    pub body: Body,
}

impl Monomial {
    pub fn grading(&self) -> Grading {
        self.body.grading()
    }

    /// Top-level `(Φ, Φ̄)` leg counts.
    pub fn leg_count(&self) -> (usize, usize) {
        let mut phi = 0;
        let mut bar = 0;
        for a in &self.body.atoms {
            match a {
                Atom::Leg { bar: false } => phi += 1,
                Atom::Leg { bar: true } => bar += 1,
                _ => {}
            }
        }
        (phi, bar)
    }

    /// `(Φ, Φ̄)` leg counts through every convolution.
    pub fn total_leg_count(&self) -> (usize, usize) {
        let g = self.grading();
        (g.m as usize, g.mbar as usize)
    }

    pub fn times(&self, other: &Monomial) -> Monomial {
        Monomial { coeff: self.coeff * other.coeff, lambda: self.lambda + other.lambda, body: self.body.merged(&other.body) }
    }
}

/// A finite sum of monomials with like terms merged.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Expr {
    monomials: Vec<Monomial>,
    grading: Grading,
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::default()
    }

    pub fn one() -> Expr {
        Expr::from_body(Coeff::one(), 0, Body::empty())
    }

    pub fn generator(kind: Generator) -> Expr {
        match kind {
            Generator::One => Expr::one(),
            Generator::Phi => Expr::atom(Atom::Leg { bar: false }),
            Generator::PhiBar => Expr::atom(Atom::Leg { bar: true }),
        }
    }

    pub fn phi() -> Expr {
        Expr::generator(Generator::Phi)
    }

    pub fn phibar() -> Expr {
        Expr::generator(Generator::PhiBar)
    }

    pub fn token(t: Token) -> Expr {
        Expr::atom(Atom::Token(t))
    }

    pub fn atom(a: Atom) -> Expr {
        Expr::from_body(Coeff::one(), 0, Body::new(vec![a]))
    }

    pub fn scalar(c: Coeff) -> Expr {
        Expr::from_body(c, 0, Body::empty())
    }

    pub fn int(n: i64) -> Expr {
        Expr::scalar(Coeff::from_integer(n as i128))
    }

    /// `λ^p`.
    pub fn lambda(p: u32) -> Expr {
        Expr::from_body(Coeff::one(), p, Body::empty())
    }

    pub fn from_body(coeff: Coeff, lambda: u32, body: Body) -> Expr {
        Expr::from_monomials(std::iter::once(Monomial { coeff, lambda, body }))
    }

    /// Builds a normalized expression: bodies canonicalized, like terms
    /// merged, zero terms dropped.
    pub fn from_monomials(it: impl IntoIterator<Item = Monomial>) -> Expr {
        let mut acc: HashMap<(u32, Body), Coeff> = HashMap::new();
        for mut m in it {
            if m.coeff.is_zero() {
                continue;
            }
            canonicalize_forest(std::slice::from_mut(&mut m.body));
            *acc.entry((m.lambda, m.body)).or_insert_with(Coeff::zero) += m.coeff;
        }
        Expr::from_canonical(acc)
    }

    fn from_canonical(acc: HashMap<(u32, Body), Coeff>) -> Expr {
        let sorted: BTreeMap<(u32, Body), Coeff> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        let monomials: Vec<Monomial> =
            sorted.into_iter().map(|((lambda, body), coeff)| Monomial { coeff, lambda, body }).collect();
        let grading = monomials.iter().fold(Grading::default(), |g, m| g.max(m.grading()));
        Expr { monomials, grading }
    }

    pub fn monomials(&self) -> &[Monomial] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Componentwise maximum of the monomial gradings.
    pub fn grading(&self) -> Grading {
        self.grading
    }

    pub fn nesting_depth(&self) -> usize {
        self.monomials.iter().map(|m| m.body.depth()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::from_monomials(self.monomials.iter().chain(other.monomials.iter()).cloned())
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.scale(-Coeff::one()))
    }

    pub fn scale(&self, c: Coeff) -> Expr {
        Expr::from_monomials(self.monomials.iter().map(|m| Monomial { coeff: m.coeff * c, ..m.clone() }))
    }

    pub fn scale_int(&self, n: i64) -> Expr {
        self.scale(Coeff::from_integer(n as i128))
    }

    /// Multiplies by `λ^p`.
    pub fn shift_lambda(&self, p: u32) -> Expr {
        Expr {
            monomials: self.monomials.iter().map(|m| Monomial { lambda: m.lambda + p, ..m.clone() }).collect(),
            grading: self.grading,
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Expr) -> Expr {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.monomials {
            for b in &other.monomials {
                out.push(a.times(b));
            }
        }
        Expr::from_monomials(out)
    }

    pub fn pow(&self, n: u32) -> Expr {
        (0..n).fold(Expr::one(), |acc, _| acc.mul(self))
    }

    /// Swaps `Φ↔Φ̄`, `G⊛↔Ḡ⊛`, `C↔C̄`, `η↔η̄`. Coefficients are rational,
    /// hence self-conjugate.
    pub fn conj(&self) -> Expr {
        Expr::from_monomials(self.monomials.iter().map(|m| Monomial { body: m.body.conj(), ..m.clone() }))
    }

    /// `G⊛a` (`bar = false`) or `Ḡ⊛a`, distributed over monomials.
    pub fn convolve(&self, bar: bool) -> Expr {
        Expr::from_monomials(self.monomials.iter().map(|m| Monomial {
            coeff: m.coeff,
            lambda: m.lambda,
            body: Body::new(vec![Atom::Conv { bar, body: m.body.clone() }]),
        }))
    }

    /// Monomials of total `λ` degree at most `k`.
    pub fn truncate(&self, k: u32) -> Expr {
        Expr::from_monomials(self.monomials.iter().filter(|m| m.lambda <= k).cloned())
    }

    /// Coefficient of `λ^k`, returned with `lambda = 0`.
    pub fn order(&self, k: u32) -> Expr {
        Expr::from_monomials(
            self.monomials.iter().filter(|m| m.lambda == k).map(|m| Monomial { lambda: 0, ..m.clone() }),
        )
    }

    /// Setting `η = η′ = 0`: drops every monomial that still carries a leg or
    /// an `η` token anywhere.
    pub fn evaluate_at_zero(&self) -> Expr {
        Expr::from_monomials(self.monomials.iter().filter(|m| !m.body.any(&survives_zero_not)).cloned())
    }

    pub fn filter(&self, keep: impl Fn(&Monomial) -> bool) -> Expr {
        Expr::from_monomials(self.monomials.iter().filter(|m| keep(m)).cloned())
    }

    pub fn map_bodies(&self, f: impl Fn(&Monomial) -> Vec<Monomial>) -> Expr {
        Expr::from_monomials(self.monomials.iter().flat_map(f))
    }

    /// Replaces every occurrence of a token by an expression.
    /// The replacement must not contain links.
    pub fn substitute_token(&self, t: Token, with: &Expr) -> Expr {
        assert!(with.monomials.iter().all(|m| !m.body.has_links()), "substitution carries links");
        let mut out = Vec::new();
        for m in &self.monomials {
            out.extend(substitute_in(&m.body, t, with).into_iter().map(|(c, l, body)| Monomial {
                coeff: m.coeff * c,
                lambda: m.lambda + l,
                body,
            }));
        }
        Expr::from_monomials(out)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.monomials.iter().map(MonomialJson::from).collect::<Vec<_>>())
            .expect("expression serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Expr, serde_json::Error> {
        let ms: Vec<MonomialJson> = serde_json::from_value(v.clone())?;
        Ok(Expr::from_monomials(ms.into_iter().map(Monomial::from)))
    }
}

fn survives_zero_not(a: &Atom) -> bool {
    matches!(a, Atom::Leg { .. } | Atom::Token(Token::Eta) | Atom::Token(Token::EtaBar))
}

/// Expands a body in which each occurrence of `t` is replaced by `with`.
/// Returns `(coeff, lambda, body)` triples; bodies are not canonicalized so
/// link ids stay valid across vertices.
fn substitute_in(body: &Body, t: Token, with: &Expr) -> Vec<(Coeff, u32, Body)> {
    let mut partial: Vec<(Coeff, u32, Vec<Atom>)> = vec![(Coeff::one(), 0, Vec::new())];
    for a in &body.atoms {
        let options: Vec<(Coeff, u32, Vec<Atom>)> = match a {
            Atom::Token(x) if *x == t => with
                .monomials
                .iter()
                .map(|m| (m.coeff, m.lambda, m.body.atoms.clone()))
                .collect(),
            Atom::Conv { bar, body } => substitute_in(body, t, with)
                .into_iter()
                .map(|(c, l, b)| (c, l, vec![Atom::Conv { bar: *bar, body: b }]))
                .collect(),
            other => vec![(Coeff::one(), 0, vec![other.clone()])],
        };
        let mut next = Vec::with_capacity(partial.len() * options.len());
        for (c, l, atoms) in &partial {
            for (oc, ol, oa) in &options {
                let mut v = atoms.clone();
                v.extend(oa.iter().cloned());
                next.push((*c * *oc, l + ol, v));
            }
        }
        partial = next;
    }
    partial.into_iter().map(|(c, l, atoms)| (c, l, Body { atoms })).collect()
}

#[derive(Serialize, Deserialize)]
struct MonomialJson {
    coeff: [i64; 2],
    lambda: u32,
    atoms: Vec<Atom>,
}

impl From<&Monomial> for MonomialJson {
    fn from(m: &Monomial) -> Self {
        let num = i64::try_from(*m.coeff.numer()).expect("numerator fits in i64");
        let den = i64::try_from(*m.coeff.denom()).expect("denominator fits in i64");
        MonomialJson { coeff: [num, den], lambda: m.lambda, atoms: m.body.atoms.clone() }
    }
}

impl From<MonomialJson> for Monomial {
    fn from(j: MonomialJson) -> Self {
        Monomial {
            coeff: Coeff::new(j.coeff[0] as i128, j.coeff[1] as i128),
            lambda: j.lambda,
            body: Body::new(j.atoms),
        }
    }
}

fn superscript(n: usize) -> String {
    const D: [char; 10] = ['⁰', '¹', '²', '³', '⁴', '⁵', '⁶', '⁷', '⁸', '⁹'];
    n.to_string().chars().map(|c| D[c.to_digit(10).unwrap() as usize]).collect()
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "𝟏");
        }
        let mut i = 0;
        while i < self.atoms.len() {
            let a = &self.atoms[i];
            let mut run = 1;
            while i + run < self.atoms.len() && &self.atoms[i + run] == a && !matches!(a, Atom::Conv { .. }) {
                run += 1;
            }
            let pow = if run > 1 { superscript(run) } else { String::new() };
            match a {
                Atom::Leg { bar: false } => write!(f, "Φ{pow}")?,
                Atom::Leg { bar: true } => write!(f, "Φ̄{pow}")?,
                Atom::Token(t) => write!(f, "{}{pow}", t.symbol())?,
                Atom::Link { id, bar: false } => write!(f, "q{id}{pow}")?,
                Atom::Link { id, bar: true } => write!(f, "q̄{id}{pow}")?,
                Atom::Hole => write!(f, "□{pow}")?,
                Atom::Conv { bar, body } => write!(f, "{}⊛({body})", if *bar { "Ḡ" } else { "G" })?,
            }
            i += run;
        }
        Ok(())
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = self.coeff.abs();
        let lam = match self.lambda {
            0 => String::new(),
            1 => "λ".into(),
            p => format!("λ{}", superscript(p as usize)),
        };
        let coeff = if c.is_one() { String::new() } else { format!("{c}") };
        if self.body.is_empty() && lam.is_empty() {
            return write!(f, "{}", if c.is_one() { "1".to_string() } else { coeff });
        }
        if self.body.is_empty() {
            write!(f, "{coeff}{lam}")
        } else {
            write!(f, "{coeff}{lam}{}", self.body)
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return write!(f, "0");
        }
        for (i, m) in self.monomials.iter().enumerate() {
            let neg = m.coeff.is_negative();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: i64) -> Coeff {
        Coeff::from_integer(n as i128)
    }

    #[test]
    fn generators_have_expected_grading() {
        assert_eq!(Expr::phi().grading(), Grading { m: 1, ..Default::default() });
        assert_eq!(Expr::phibar().grading(), Grading { mbar: 1, ..Default::default() });
        assert_eq!(Expr::one().grading(), Grading::default());
        assert_eq!(Expr::one().monomials()[0].coeff, c(1));
        assert!(Expr::one().monomials()[0].body.is_empty());
    }

    #[test]
    fn product_merges_like_terms() {
        let s = Expr::phi().add(&Expr::phibar());
        let p = s.mul(&Expr::phi());
        let expected = Expr::phi().pow(2).add(&Expr::phibar().mul(&Expr::phi()));
        assert_eq!(p, expected);
        assert_eq!(p.len(), 2);
        assert_eq!(Expr::one().mul(&s), s);
    }

    #[test]
    fn conjugation_swaps_generators_and_convolutions() {
        let f1 = Expr::phibar().mul(&Expr::phi().pow(2)).convolve(false);
        let expected = Expr::phi().mul(&Expr::phibar().pow(2)).convolve(true);
        assert_eq!(f1.conj(), expected);
        assert_eq!(Expr::phi().conj(), Expr::phibar());
    }

    #[test]
    fn convolve_is_linear_and_graded() {
        assert!(Expr::zero().convolve(false).is_zero());
        let g = Expr::phi().convolve(true).grading();
        assert_eq!(g, Grading { m: 1, lbar: 1, ..Default::default() });
        let a = Expr::phi();
        let b = Expr::phibar().pow(2);
        assert_eq!(a.add(&b).convolve(false), a.convolve(false).add(&b.convolve(false)));
    }

    #[test]
    fn leg_count_is_top_level() {
        let m = Expr::phibar().mul(&Expr::phi().pow(2));
        assert_eq!(m.monomials()[0].leg_count(), (2, 1));
        assert_eq!(Expr::one().monomials()[0].leg_count(), (0, 0));
        let cphi = Expr::token(Token::Cbar).mul(&Expr::phi());
        assert_eq!(cphi.monomials()[0].leg_count(), (1, 0));
        let nested = Expr::phi().mul(&m.convolve(false));
        assert_eq!(nested.monomials()[0].leg_count(), (1, 0));
        assert_eq!(nested.monomials()[0].total_leg_count(), (3, 1));
    }

    #[test]
    fn evaluate_at_zero_kills_legs_everywhere() {
        let cbar = Expr::token(Token::Cbar);
        let e = Expr::phibar().mul(&Expr::phi().pow(2)).add(&cbar.mul(&Expr::phi()).scale(c(2)));
        assert!(e.evaluate_at_zero().is_zero());
        assert_eq!(cbar.evaluate_at_zero(), cbar);
        assert!(cbar.mul(&Expr::phi()).scale(c(2)).convolve(false).evaluate_at_zero().is_zero());
        assert!(Expr::token(Token::Eta).evaluate_at_zero().is_zero());
    }

    #[test]
    fn links_are_renumbered_canonically() {
        let a = Body::new(vec![
            Atom::Link { id: 7, bar: false },
            Atom::Conv { bar: true, body: Body::raw(vec![Atom::Link { id: 7, bar: true }, Atom::Leg { bar: false }]) },
        ]);
        let b = Body::new(vec![
            Atom::Conv { bar: true, body: Body::raw(vec![Atom::Leg { bar: false }, Atom::Link { id: 2, bar: true }]) },
            Atom::Link { id: 2, bar: false },
        ]);
        assert_eq!(a, b);
        assert_eq!(a.link_bound(), 1);
    }

    #[test]
    fn symmetric_links_agree_under_relabeling() {
        let make = |x: u32, y: u32| {
            Body::new(vec![
                Atom::Link { id: x, bar: false },
                Atom::Link { id: y, bar: false },
                Atom::Conv { bar: false, body: Body::raw(vec![Atom::Link { id: x, bar: true }, Atom::Leg { bar: true }]) },
                Atom::Conv { bar: false, body: Body::raw(vec![Atom::Link { id: y, bar: true }, Atom::Token(Token::Cbar)]) },
            ])
        };
        assert_eq!(make(0, 1), make(1, 0));
        assert_eq!(make(5, 3), make(0, 1));
    }

    #[test]
    fn json_round_trip() {
        let e = Expr::phibar()
            .mul(&Expr::phi().pow(2))
            .convolve(false)
            .shift_lambda(1)
            .add(&Expr::token(Token::Cbar).scale(Coeff::new(3, 2)));
        let j = e.to_json();
        assert_eq!(Expr::from_json(&j).unwrap(), e);
    }

    #[test]
    fn display_uses_powers() {
        let e = Expr::phibar().mul(&Expr::phi().pow(2)).convolve(false);
        assert_eq!(e.to_string(), "G⊛(Φ²Φ̄)");
        assert_eq!(Expr::token(Token::Cbar).scale(c(2)).to_string(), "2C̄");
    }
}
