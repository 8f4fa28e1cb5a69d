//! Power counting on the tree graphs generated by the perturbative
//! recursion.
//!
//! A tree of order `k` has `k` internal vertices of valence `2κ+2` and
//! `2κk+1` leaves. Maximal contraction merges `κk` pairs of opposite-colour
//! leaves, leaving one plain leaf free. `L` counts every line, the line to
//! the external point included; `N` counts the vertices other than the
//! external point.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::diagram::{Decoration, Diagram, Edge, EdgeKind, Role, Vertex};
use crate::perturbation::compositions;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tree {
    /// A `Φ` leaf (`bar = false`) or a `Φ̄` leaf.
    Leaf { bar: bool },
    /// A `G⊛` vertex (`Ḡ⊛` when `bar`), children kept sorted.
    Node { bar: bool, children: Vec<Tree> },
}

impl Tree {
    fn node(bar: bool, mut children: Vec<Tree>) -> Tree {
        children.sort();
        Tree::Node { bar, children }
    }

    pub fn conj(&self) -> Tree {
        match self {
            Tree::Leaf { bar } => Tree::Leaf { bar: !bar },
            Tree::Node { bar, children } => Tree::node(!bar, children.iter().map(Tree::conj).collect()),
        }
    }

    pub fn internal_count(&self) -> usize {
        match self {
            Tree::Leaf { .. } => 0,
            Tree::Node { children, .. } => 1 + children.iter().map(Tree::internal_count).sum::<usize>(),
        }
    }

    /// `(plain, barred)` leaf counts.
    pub fn leaf_census(&self) -> (usize, usize) {
        match self {
            Tree::Leaf { bar: false } => (1, 0),
            Tree::Leaf { bar: true } => (0, 1),
            Tree::Node { children, .. } => children.iter().map(Tree::leaf_census).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)),
        }
    }

    pub fn vertex_count(&self) -> usize {
        let (p, b) = self.leaf_census();
        self.internal_count() + p + b
    }
}

/// Distinct trees of order `k`, built by the same recursion as `F_k`.
pub fn admissible_trees(kappa: u32, k: u32) -> Vec<Tree> {
    let mut levels: Vec<Vec<Tree>> = vec![vec![Tree::Leaf { bar: false }]];
    let kk = kappa as usize;
    for order in 1..=k {
        let mut set = BTreeSet::new();
        for comp in compositions(order - 1, 2 * kk + 1) {
            let mut partial: Vec<Vec<Tree>> = vec![Vec::new()];
            for (i, &ki) in comp.iter().enumerate() {
                let mut next = Vec::new();
                for p in &partial {
                    for t in &levels[ki as usize] {
                        let mut v = p.clone();
                        v.push(if i < kk { t.conj() } else { t.clone() });
                        next.push(v);
                    }
                }
                partial = next;
            }
            for children in partial {
                set.insert(Tree::node(false, children));
            }
        }
        levels.push(set.into_iter().collect());
    }
    levels.pop().unwrap_or_default()
}

struct Build {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    plain: Vec<usize>,
    barred: Vec<usize>,
}

fn lay_out(t: &Tree, parent: usize, b: &mut Build) {
    let v = b.vertices.len();
    match t {
        Tree::Leaf { bar } => {
            b.vertices.push(Vertex { role: Role::Internal, label: String::new(), decorations: Vec::new() });
            b.edges.push(Edge { src: parent, dst: v, kind: if *bar { EdgeKind::Gbar } else { EdgeKind::G } });
            if *bar {
                b.barred.push(v);
            } else {
                b.plain.push(v);
            }
        }
        Tree::Node { bar, children } => {
            b.vertices.push(Vertex { role: Role::Internal, label: String::new(), decorations: Vec::new() });
            b.edges.push(Edge { src: parent, dst: v, kind: if *bar { EdgeKind::Gbar } else { EdgeKind::G } });
            for c in children {
                lay_out(c, v, b);
            }
        }
    }
}

/// Merges every barred leaf with a plain leaf; the last plain leaf in
/// traversal order stays free. Merged vertices carry `DiagonalId`, the
/// free one `PhiLeg`. Vertices follow traversal order; call
/// [`Diagram::canonical`] for a canonical labelling.
pub fn maximal_contraction(t: &Tree) -> Diagram {
    let mut b = Build {
        vertices: vec![Vertex { role: Role::External, label: "x1".into(), decorations: Vec::new() }],
        edges: Vec::new(),
        plain: Vec::new(),
        barred: Vec::new(),
    };
    lay_out(t, 0, &mut b);
    let free = *b.plain.last().expect("a tree has a plain leaf");
    b.vertices[free].decorations.push(Decoration::PhiLeg);
    let mut removed = Vec::new();
    for (&bar, &plain) in b.barred.iter().zip(b.plain.iter()) {
        debug_assert_ne!(plain, free);
        for e in &mut b.edges {
            if e.dst == bar {
                e.dst = plain;
            }
        }
        b.vertices[plain].decorations.push(Decoration::DiagonalId);
        removed.push(bar);
    }
    removed.sort_unstable();
    let keep: Vec<usize> = (0..b.vertices.len()).filter(|v| removed.binary_search(v).is_err()).collect();
    let mut pos = vec![usize::MAX; b.vertices.len()];
    for (new, &old) in keep.iter().enumerate() {
        pos[old] = new;
    }
    let mut vertices: Vec<Vertex> = keep.iter().map(|&v| b.vertices[v].clone()).collect();
    for (i, v) in vertices.iter_mut().enumerate().skip(1) {
        v.label = format!("y{i}");
    }
    Diagram {
        externals: vec!["x1".into()],
        vertices,
        edges: b.edges.iter().map(|e| Edge { src: pos[e.src], dst: pos[e.dst], kind: e.kind }).collect(),
        symmetry_factor: (1, 1),
        lambda_power: t.internal_count() as u32,
    }
}

/// `(L, N)` of a maximally contracted diagram.
pub fn diagram_counts(d: &Diagram) -> (u64, u64) {
    (d.l() as u64, (d.n() - d.externals.len()) as u64)
}

/// Closed forms `L = (2κ+1)k+1`, `N = (κ+1)k+1`.
pub fn counts(k: u64, kappa: u64) -> (u64, u64) {
    ((2 * kappa + 1) * k + 1, (kappa + 1) * k + 1)
}

/// `ρ = Ld − 2(N−1)`.
pub fn divergence_degree(l: u64, n: u64, d: u64) -> i64 {
    (l * d) as i64 - 2 * (n as i64 - 1)
}

/// `ρ` as an affine function of `k`: `k((2κ+1)d − 2(κ+1)) + d`. The slope
/// is negative exactly in the subcritical regime.
pub fn rho_slope(d: f64, kappa: u64) -> f64 {
    (2 * kappa + 1) as f64 * d - 2.0 * (kappa + 1) as f64
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DivergenceRow {
    pub k: u32,
    pub diagram_id: usize,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "N")]
    pub n: u64,
    pub rho: i64,
    pub divergent: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct DivergenceReport {
    pub d: u64,
    pub kappa: u32,
    pub rows: Vec<DivergenceRow>,
    pub subcritical: bool,
    /// Largest order with a divergent graph, when finitely many exist.
    pub max_divergent_order: Option<u32>,
}

pub fn subcritical_report(d: u64, kappa: u32, k_max: u32) -> DivergenceReport {
    let mut rows = Vec::new();
    for k in 0..=k_max {
        for (id, t) in admissible_trees(kappa, k).iter().enumerate() {
            let dg = maximal_contraction(t);
            let (l, n) = diagram_counts(&dg);
            let rho = divergence_degree(l, n, d);
            rows.push(DivergenceRow { k, diagram_id: id, l, n, rho, divergent: rho >= 0 });
        }
    }
    let subcritical = rho_slope(d as f64, kappa as u64) < 0.0;
    let max_divergent_order = if subcritical { rows.iter().filter(|r| r.divergent).map(|r| r.k).max() } else { None };
    DivergenceReport { d, kappa, rows, subcritical, max_divergent_order }
}

impl DivergenceReport {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_trees() {
        assert_eq!(admissible_trees(1, 0), vec![Tree::Leaf { bar: false }]);
        let t1 = admissible_trees(1, 1);
        assert_eq!(t1.len(), 1);
        assert_eq!(t1[0].leaf_census(), (2, 1));
        assert_eq!(admissible_trees(1, 2).len(), 2);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(counts(1, 1), (4, 3));
        assert_eq!(counts(0, 1), (1, 1));
        assert_eq!(counts(8, 1), (25, 17));
        assert_eq!(divergence_degree(4, 3, 1), 0);
        assert_eq!(divergence_degree(7, 5, 1), -1);
        assert_eq!(divergence_degree(4, 3, 2), 4);
    }

    #[test]
    fn contraction_counts_match() {
        for kappa in 1..=2u32 {
            for k in 0..=4u32 {
                for t in admissible_trees(kappa, k) {
                    assert_eq!(t.vertex_count() as u64, (2 * kappa as u64 + 1) * k as u64 + 1);
                    let d = maximal_contraction(&t);
                    assert_eq!(diagram_counts(&d), counts(k as u64, kappa as u64));
                }
            }
        }
    }

    #[test]
    fn verdicts() {
        let r = subcritical_report(1, 1, 10);
        assert!(r.subcritical);
        assert_eq!(r.max_divergent_order, Some(1));
        assert!(r.rows.iter().all(|x| x.divergent == (x.k <= 1)));
        assert!(!subcritical_report(2, 1, 3).subcritical);
        assert!(subcritical_report(1, 2, 3).subcritical);
    }
}
