//! Lattice evaluation of forest-shaped diagrams by message passing.
//!
//! Each edge carries a field from the far vertex to the near one. With
//! `K` the lattice kernel, `fwd` the causal sum and `adj` its adjoint:
//! a `G` edge `p → c` sends `fwd(χ·g)`, read backwards it sends `χ·adj(g)`;
//! a `Q` edge `a → b` sends `fwd(χ²·conj(adj(conj g)))` towards `a` and
//! `conj(fwd(χ²·conj(adj g)))` towards `b`. Barred kinds conjugate the
//! kernel.

use num_complex::Complex64;

use super::kernel::Propagator;
use super::lattice::{Field, TestFunction};
use super::NumericsError;
use crate::diagram::{Decoration, Diagram, EdgeKind, Role};

/// Grids bound to the `C`-type decorations.
#[derive(Clone, Debug, Default)]
pub struct Bindings {
    pub c: Option<Field>,
    pub cbar: Option<Field>,
    pub delta_c: Option<Field>,
    pub delta_cbar: Option<Field>,
}

impl Bindings {
    /// `C̄` and its conjugate `C`.
    pub fn from_cbar(cbar: &Field) -> Bindings {
        Bindings { c: Some(cbar.conj()), cbar: Some(cbar.clone()), ..Bindings::default() }
    }

    /// `ΔC̄` and its conjugate `ΔC`.
    pub fn from_delta_cbar(delta: &Field) -> Bindings {
        Bindings { delta_c: Some(delta.conj()), delta_cbar: Some(delta.clone()), ..Bindings::default() }
    }

    fn grid<'a>(&'a self, d: Decoration, chi: &'a Field) -> Result<&'a Field, NumericsError> {
        let g = match d {
            Decoration::C => self.c.as_ref(),
            Decoration::Cbar => self.cbar.as_ref(),
            Decoration::DeltaC => self.delta_c.as_ref(),
            Decoration::DeltaCbar => self.delta_cbar.as_ref(),
            Decoration::Chi => Some(chi),
            _ => None,
        };
        g.ok_or(NumericsError::Unbound(d))
    }
}

struct Ctx<'a> {
    diag: &'a Diagram,
    prop: &'a Propagator,
    chi2: Field,
    adj: Vec<Vec<(usize, usize)>>,
    local: Vec<Field>,
}

impl Ctx<'_> {
    fn node_value(&self, v: usize, from_edge: Option<usize>) -> Field {
        let mut acc = self.local[v].clone();
        for &(e, w) in &self.adj[v] {
            if Some(e) == from_edge {
                continue;
            }
            let g = self.node_value(w, Some(e));
            acc = acc.mul(&self.transfer(e, v, &g));
        }
        acc
    }

    /// Field at `p` obtained by summing the edge kernel against `g` at the
    /// other endpoint.
    fn transfer(&self, e: usize, p: usize, g: &Field) -> Field {
        let edge = self.diag.edges[e];
        let prop = self.prop;
        let chi = &prop.chi;
        let g_like = |g: &Field, towards_src: bool| {
            if towards_src {
                prop.forward(&chi.mul(g))
            } else {
                chi.mul(&prop.adjoint(g))
            }
        };
        // Q(a, b) with the message going to `a` when `towards_a`.
        let q_like = |g: &Field, towards_a: bool| {
            if towards_a {
                prop.forward(&self.chi2.mul(&prop.adjoint(&g.conj()).conj()))
            } else {
                prop.forward(&self.chi2.mul(&prop.adjoint(g).conj())).conj()
            }
        };
        match edge.kind {
            EdgeKind::G => g_like(g, edge.src == p),
            EdgeKind::Gbar => g_like(&g.conj(), edge.src == p).conj(),
            EdgeKind::Q => q_like(g, edge.src == p),
            EdgeKind::Qbar => q_like(g, edge.dst == p),
        }
    }
}

/// Value of `diag` on `fs` (one test function per external vertex, paired
/// without conjugation), times the symmetry factor. The power of `λ` is
/// not included. Only forests are supported.
pub fn evaluate_diagram(
    diag: &Diagram,
    prop: &Propagator,
    fs: &[&TestFunction],
    bindings: &Bindings,
) -> Result<Complex64, NumericsError> {
    let ext = diag.externals.len();
    if fs.len() != ext {
        return Err(NumericsError::SlotMismatch { expected: ext, got: fs.len() });
    }
    let (num, den) = diag.symmetry_factor;
    if num == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if !diag.is_forest() {
        return Err(NumericsError::Unsupported("diagram contains a loop".into()));
    }
    let spec = &prop.spec;
    let nv = diag.vertices.len();
    let mut local = Vec::with_capacity(nv);
    let mut slot = 0;
    for v in &diag.vertices {
        let mut f = match v.role {
            Role::External => {
                slot += 1;
                fs[slot - 1].field.clone()
            }
            Role::Internal => Field::from_fn(spec, |_, _| Complex64::new(1.0, 0.0)),
        };
        for &d in &v.decorations {
            f = f.mul(bindings.grid(d, &prop.chi)?);
        }
        local.push(f);
    }
    let mut adj = vec![Vec::new(); nv];
    for (i, e) in diag.edges.iter().enumerate() {
        adj[e.src].push((i, e.dst));
        adj[e.dst].push((i, e.src));
    }
    let ctx = Ctx { diag, prop, chi2: prop.chi.mul(&prop.chi), adj, local };
    let ones = Field::from_fn(spec, |_, _| Complex64::new(1.0, 0.0));
    let mut seen = vec![false; nv];
    let mut total = Complex64::new(num as f64 / den as f64, 0.0);
    for root in 0..nv {
        if seen[root] {
            continue;
        }
        let mut stack = vec![root];
        seen[root] = true;
        while let Some(v) = stack.pop() {
            for &(_, w) in &ctx.adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        total *= ctx.node_value(root, None).pair(&ones, spec);
    }
    Ok(total)
}

/// `Σ λ^p · value` over a diagram list.
pub fn evaluate_diagrams(
    diags: &[Diagram],
    prop: &Propagator,
    fs: &[&TestFunction],
    bindings: &Bindings,
    lambda: f64,
) -> Result<Complex64, NumericsError> {
    let mut sum = Complex64::new(0.0, 0.0);
    for d in diags {
        sum += lambda.powi(d.lambda_power as i32) * evaluate_diagram(d, prop, fs, bindings)?;
    }
    Ok(sum)
}
