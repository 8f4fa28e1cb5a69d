//! Kernel diagrams read off contracted monomials.
//!
//! Vertices are the external slot roots plus one internal vertex per
//! convolution. `G`/`Ḡ` edges point from a vertex to the convolution it
//! integrates over; every link pair becomes a `Q` or `Q̄` edge whose first
//! endpoint is the shallower one (ties broken by slot order), labelled `Q`
//! when that endpoint carries `Φ` and `Q̄` when it carries `Φ̄`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algebra::{Atom, Body, Coeff, Expr, Token};
use crate::deformation::MultiExpr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    G,
    Gbar,
    Q,
    Qbar,
}

impl EdgeKind {
    pub fn label(self) -> &'static str {
        match self {
            EdgeKind::G => "G",
            EdgeKind::Gbar => "Gbar",
            EdgeKind::Q => "Q",
            EdgeKind::Qbar => "Qbar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Decoration {
    C,
    Cbar,
    Chi,
    EtaLeg,
    EtaBarLeg,
    DeltaC,
    DeltaCbar,
    /// Merged pair of contracted leaves.
    DiagonalId,
    /// Uncontracted `Φ` leg.
    PhiLeg,
    /// Uncontracted `Φ̄` leg.
    PhiBarLeg,
    /// Operand slot of an operator-valued term.
    Operand,
}

impl Decoration {
    fn from_token(t: Token) -> Decoration {
        match t {
            Token::C => Decoration::C,
            Token::Cbar => Decoration::Cbar,
            Token::Chi => Decoration::Chi,
            Token::Eta => Decoration::EtaLeg,
            Token::EtaBar => Decoration::EtaBarLeg,
            Token::DeltaC => Decoration::DeltaC,
            Token::DeltaCbar => Decoration::DeltaCbar,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    External,
    Internal,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vertex {
    pub role: Role,
    pub label: String,
    pub decorations: Vec<Decoration>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagram {
    pub externals: Vec<String>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Exact rational weight `[numerator, denominator]`.
    pub symmetry_factor: (i64, i64),
    pub lambda_power: u32,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DiagramError {
    #[error("term carries an η leg and has no kernel value")]
    EtaLeg,
    #[error("term carries an uncontracted field leg")]
    OpenLeg,
}

/// Link end: `(vertex, depth, slot)`; index 0 is the `Φ` end, 1 the `Φ̄` end.
type LinkEnd = (usize, usize, usize);

struct Builder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    ends: BTreeMap<u32, [Option<LinkEnd>; 2]>,
}

impl Builder {
    fn visit(&mut self, body: &Body, v: usize, depth: usize, slot: usize) {
        for a in &body.atoms {
            match a {
                Atom::Leg { bar } => self.vertices[v].decorations.push(if *bar {
                    Decoration::PhiBarLeg
                } else {
                    Decoration::PhiLeg
                }),
                Atom::Token(t) => self.vertices[v].decorations.push(Decoration::from_token(*t)),
                Atom::Hole => self.vertices[v].decorations.push(Decoration::Operand),
                Atom::Link { id, bar } => {
                    self.ends.entry(*id).or_default()[usize::from(*bar)] = Some((v, depth, slot));
                }
                Atom::Conv { bar, body } => {
                    let w = self.vertices.len();
                    self.vertices.push(Vertex { role: Role::Internal, label: String::new(), decorations: Vec::new() });
                    self.edges.push(Edge { src: v, dst: w, kind: if *bar { EdgeKind::Gbar } else { EdgeKind::G } });
                    self.visit(body, w, depth + 1, slot);
                }
            }
        }
    }
}

impl Diagram {
    /// Diagram of one multilocal term (a single slot for local terms).
    pub fn from_forest(coeff: Coeff, lambda: u32, slots: &[Body]) -> Diagram {
        let mut b = Builder { vertices: Vec::new(), edges: Vec::new(), ends: BTreeMap::new() };
        for i in 0..slots.len() {
            b.vertices.push(Vertex { role: Role::External, label: format!("x{}", i + 1), decorations: Vec::new() });
        }
        for (i, s) in slots.iter().enumerate() {
            b.visit(s, i, 0, i);
        }
        let ends = std::mem::take(&mut b.ends);
        for (_, [phi, bar]) in ends {
            let (phi, bar) = (phi.expect("link has a Φ end"), bar.expect("link has a Φ̄ end"));
            let phi_first = (phi.1, phi.2, phi.0) <= (bar.1, bar.2, bar.0);
            let e = if phi_first {
                Edge { src: phi.0, dst: bar.0, kind: EdgeKind::Q }
            } else {
                Edge { src: bar.0, dst: phi.0, kind: EdgeKind::Qbar }
            };
            b.edges.push(e);
        }
        let d = Diagram {
            externals: (1..=slots.len()).map(|i| format!("x{i}")).collect(),
            vertices: b.vertices,
            edges: b.edges,
            symmetry_factor: (i64::try_from(*coeff.numer()).unwrap(), i64::try_from(*coeff.denom()).unwrap()),
            lambda_power: lambda,
        };
        d.canonical()
    }

    /// Number of edges.
    pub fn l(&self) -> usize {
        self.edges.len()
    }

    /// Number of vertices.
    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn internal_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.role == Role::Internal).count()
    }

    pub fn coefficient(&self) -> Coeff {
        Coeff::new(self.symmetry_factor.0 as i128, self.symmetry_factor.1 as i128)
    }

    pub fn edges_of(&self, kind: EdgeKind) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| e.kind == kind).collect()
    }

    pub fn q_edges(&self) -> Vec<Edge> {
        self.edges.iter().copied().filter(|e| matches!(e.kind, EdgeKind::Q | EdgeKind::Qbar)).collect()
    }

    pub fn has(&self, d: Decoration) -> bool {
        self.vertices.iter().any(|v| v.decorations.contains(&d))
    }

    /// Edges viewed as undirected: a tree or forest has no cycle.
    pub fn is_forest(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.src), find(&mut parent, e.dst));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }

    fn degree(&self, v: usize) -> usize {
        self.edges.iter().filter(|e| e.src == v || e.dst == v).count()
    }

    /// Canonical vertex order: externals keep slot order; internals are
    /// sorted by (decorations, degree) and ties resolved by the
    /// lexicographically smallest edge list.
    pub fn canonical(&self) -> Diagram {
        let mut d = self.clone();
        for v in &mut d.vertices {
            v.decorations.sort();
        }
        let ext: Vec<usize> = (0..d.n()).filter(|&v| d.vertices[v].role == Role::External).collect();
        let mut int: Vec<usize> = (0..d.n()).filter(|&v| d.vertices[v].role == Role::Internal).collect();
        let key = |v: usize| (d.vertices[v].decorations.clone(), d.degree(v));
        int.sort_by_key(|&v| key(v));
        // Groups of internals with identical keys may be permuted freely.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &v in &int {
            match groups.last_mut() {
                Some(g) if key(g[0]) == key(v) => g.push(v),
                _ => groups.push(vec![v]),
            }
        }
        let budget: usize = groups.iter().map(|g| (1..=g.len()).product::<usize>()).product();
        let mut best: Option<(Vec<Edge>, Vec<usize>)> = None;
        let orders: Vec<Vec<usize>> = if budget <= 40_320 {
            group_permutations(&groups)
        } else {
            vec![int.clone()]
        };
        for order in orders {
            let perm: Vec<usize> = ext.iter().copied().chain(order).collect();
            let mut pos = vec![0; d.n()];
            for (new, &old) in perm.iter().enumerate() {
                pos[old] = new;
            }
            let mut edges: Vec<Edge> =
                d.edges.iter().map(|e| Edge { src: pos[e.src], dst: pos[e.dst], kind: e.kind }).collect();
            edges.sort();
            if best.as_ref().is_none_or(|(b, _)| edges < *b) {
                best = Some((edges, perm));
            }
        }
        let (edges, perm) = best.expect("at least one ordering");
        let mut vertices: Vec<Vertex> = perm.iter().map(|&v| d.vertices[v].clone()).collect();
        let mut k = 0;
        for v in &mut vertices {
            if v.role == Role::Internal {
                k += 1;
                v.label = format!("y{k}");
            }
        }
        d.vertices = vertices;
        d.edges = edges;
        d
    }

    /// Rejects terms that cannot be evaluated as kernels.
    pub fn check_evaluable(&self) -> Result<(), DiagramError> {
        if self.has(Decoration::EtaLeg) || self.has(Decoration::EtaBarLeg) {
            return Err(DiagramError::EtaLeg);
        }
        if self.has(Decoration::PhiLeg) || self.has(Decoration::PhiBarLeg) {
            return Err(DiagramError::OpenLeg);
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("diagram serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Diagram, serde_json::Error> {
        serde_json::from_value(v.clone())
    }

    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph {name} {{\n");
        let _ = writeln!(s, "  label=\"{}/{} λ^{}\";", self.symmetry_factor.0, self.symmetry_factor.1, self.lambda_power);
        for (i, v) in self.vertices.iter().enumerate() {
            let decs: Vec<String> = v.decorations.iter().map(|d| format!("{d:?}")).collect();
            let label = if decs.is_empty() { v.label.clone() } else { format!("{} [{}]", v.label, decs.join(",")) };
            let shape = if v.role == Role::External { "box" } else { "ellipse" };
            let _ = writeln!(s, "  v{i} [label=\"{label}\", shape={shape}];");
        }
        for e in &self.edges {
            let style = match e.kind {
                EdgeKind::G | EdgeKind::Gbar => "solid",
                EdgeKind::Q | EdgeKind::Qbar => "dashed",
            };
            let _ = writeln!(s, "  v{} -> v{} [label=\"{}\", style={style}];", e.src, e.dst, e.kind.label());
        }
        s.push_str("}\n");
        s
    }
}

fn group_permutations(groups: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for g in groups {
        let perms = permutations(g);
        let mut next = Vec::with_capacity(out.len() * perms.len());
        for prefix in &out {
            for p in &perms {
                let mut v = prefix.clone();
                v.extend(p);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

fn permutations(xs: &[usize]) -> Vec<Vec<usize>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// One diagram per monomial of a local expression.
pub fn to_diagrams(e: &Expr) -> Vec<Diagram> {
    e.monomials()
        .iter()
        .map(|m| Diagram::from_forest(m.coeff, m.lambda, std::slice::from_ref(&m.body)))
        .collect()
}

/// One diagram per term of a multilocal expression.
pub fn multi_to_diagrams(e: &MultiExpr) -> Vec<Diagram> {
    e.terms().iter().map(|(c, l, slots)| Diagram::from_forest(*c, *l, slots)).collect()
}

/// Like [`to_diagrams`] but fails on terms without a kernel value.
pub fn to_diagrams_strict(e: &Expr) -> Result<Vec<Diagram>, DiagramError> {
    let ds = to_diagrams(e);
    ds.iter().try_for_each(Diagram::check_evaluable)?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{bullet_product, gamma};

    #[test]
    fn cbar_alone_is_one_decorated_vertex() {
        let ds = to_diagrams(&Expr::token(Token::Cbar));
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].n(), 1);
        assert_eq!(ds[0].vertices[0].decorations, vec![Decoration::Cbar]);
        assert!(ds[0].q_edges().is_empty());
    }

    #[test]
    fn two_point_edge() {
        let b = bullet_product(&[Expr::phi(), Expr::phibar()]).evaluate_at_zero();
        let ds = multi_to_diagrams(&b);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].edges, vec![Edge { src: 0, dst: 1, kind: EdgeKind::Q }]);
        assert_eq!(ds[0].externals, vec!["x1", "x2"]);
    }

    #[test]
    fn first_order_reading() {
        let left = gamma(&Expr::phibar().mul(&Expr::phi().pow(2)).convolve(false));
        let b = bullet_product(&[left, Expr::phibar()]).evaluate_at_zero();
        let d = &multi_to_diagrams(&b)[0];
        assert_eq!(d.coefficient(), Coeff::from_integer(2));
        assert_eq!(d.vertices[2].decorations, vec![Decoration::Cbar]);
        let mut edges = d.edges.clone();
        edges.sort();
        assert_eq!(
            edges,
            vec![Edge { src: 0, dst: 2, kind: EdgeKind::G }, Edge { src: 1, dst: 2, kind: EdgeKind::Qbar }]
        );
        assert!(d.is_forest());
    }

    #[test]
    fn strict_mode_rejects_eta() {
        assert_eq!(to_diagrams_strict(&Expr::token(Token::Eta)), Err(DiagramError::EtaLeg));
        assert!(to_diagrams_strict(&Expr::token(Token::C)).is_ok());
    }

    #[test]
    fn json_and_dot() {
        let e = gamma(&Expr::phibar().mul(&Expr::phi().pow(2)).convolve(false));
        for d in to_diagrams(&e) {
            assert_eq!(Diagram::from_json(&d.to_json()).unwrap(), d);
            let dot = d.to_dot("g");
            assert!(dot.contains("label=\"G\""));
        }
    }

    #[test]
    fn canonical_form_ignores_internal_order() {
        let a = Body::new(vec![
            Atom::Conv { bar: false, body: Body::raw(vec![Atom::Token(Token::Cbar)]) },
            Atom::Conv { bar: false, body: Body::raw(vec![Atom::Token(Token::Chi)]) },
        ]);
        let d1 = Diagram::from_forest(Coeff::from_integer(1), 0, std::slice::from_ref(&a));
        let d2 = d1.canonical();
        assert_eq!(d1, d2);
    }
}
