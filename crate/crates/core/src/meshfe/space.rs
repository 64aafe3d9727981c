use std::sync::Arc;

use super::mesh::{lattice_sides, CellBox, Mesh, SideSet};
use super::quadrature::TriangleRule;
use crate::{Error, Result, C64};

/// Maximum number of local basis functions (P2).
pub const MAX_LOCAL: usize = 6;

/// Continuous piecewise-polynomial Lagrange space of degree 1 or 2.
///
/// Lagrange nodes form a lattice of spacing `h/p` in each direction; node
/// `(a, b)` has index `b (p nx + 1) + a`. Nodes on Dirichlet sides carry no
/// degree of freedom; the remaining nodes are numbered in node order.
#[derive(Debug, Clone)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    pub dirichlet: SideSet,
    nodes: Vec<[f64; 2]>,
    elem_nodes: Vec<usize>,
    node_dof: Vec<Option<usize>>,
    dof_node: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, dirichlet: SideSet) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree must be 1 or 2, got {degree}"
            )));
        }
        let p = degree;
        let (na, nb) = (p * mesh.nx + 1, p * mesh.ny + 1);
        let (x0, y0) = (mesh.rect.x0, mesh.rect.y0);
        let (dx, dy) = (mesh.hx() / p as f64, mesh.hy() / p as f64);
        let mut nodes = Vec::with_capacity(na * nb);
        for b in 0..nb {
            for a in 0..na {
                let x = if a == na - 1 {
                    mesh.rect.x1
                } else {
                    x0 + a as f64 * dx
                };
                let y = if b == nb - 1 {
                    mesh.rect.y1
                } else {
                    y0 + b as f64 * dy
                };
                nodes.push([x, y]);
            }
        }
        let nid = |a: usize, b: usize| b * na + a;
        let nloc = (p + 1) * (p + 2) / 2;
        let mut elem_nodes = Vec::with_capacity(nloc * mesh.n_elements());
        for t in 0..mesh.n_elements() {
            let (i, j, upper) = mesh.cell_of(t);
            let (a0, b0) = (p * i, p * j);
            let v: [(usize, usize); 3] = if upper == 0 {
                [(a0, b0), (a0 + p, b0), (a0 + p, b0 + p)]
            } else {
                [(a0, b0), (a0 + p, b0 + p), (a0, b0 + p)]
            };
            for &(a, b) in &v {
                elem_nodes.push(nid(a, b));
            }
            if p == 2 {
                for (s, e) in [(0, 1), (1, 2), (2, 0)] {
                    elem_nodes.push(nid((v[s].0 + v[e].0) / 2, (v[s].1 + v[e].1) / 2));
                }
            }
        }
        let mut node_dof = vec![None; nodes.len()];
        let mut dof_node = Vec::new();
        for (n, slot) in node_dof.iter_mut().enumerate() {
            let sides = lattice_sides(n % na, n / na, na - 1, nb - 1);
            if !sides.intersects(dirichlet) {
                *slot = Some(dof_node.len());
                dof_node.push(n);
            }
        }
        Ok(Self {
            mesh,
            degree,
            dirichlet,
            nodes,
            elem_nodes,
            node_dof,
            dof_node,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_node.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Local basis functions per element.
    pub fn n_local(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn element_nodes(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.elem_nodes[t * n..(t + 1) * n]
    }

    pub fn node_coord(&self, n: usize) -> [f64; 2] {
        self.nodes[n]
    }

    pub fn node_dof(&self, n: usize) -> Option<usize> {
        self.node_dof[n]
    }

    pub fn dof_node(&self, d: usize) -> usize {
        self.dof_node[d]
    }

    pub fn dof_coord(&self, d: usize) -> [f64; 2] {
        self.nodes[self.dof_node[d]]
    }

    pub fn dof_coords(&self) -> Vec<[f64; 2]> {
        self.dof_node.iter().map(|&n| self.nodes[n]).collect()
    }

    /// Lattice position `(a, b)` of node `n`.
    pub fn node_lattice(&self, n: usize) -> (usize, usize) {
        let na = self.degree * self.mesh.nx + 1;
        (n % na, n / na)
    }

    pub fn node_sides(&self, n: usize) -> SideSet {
        let (a, b) = self.node_lattice(n);
        let p = self.degree;
        lattice_sides(a, b, p * self.mesh.nx, p * self.mesh.ny)
    }

    /// Dofs on the closure of a cell box, minus nodes on the box sides in
    /// `exclude` that are not on the mesh boundary.
    pub fn box_dofs(&self, cells: &CellBox, exclude: SideSet) -> DofMap {
        let p = self.degree;
        let dom = cells.domain_sides(&self.mesh);
        let mut global = Vec::new();
        for b in p * cells.j0..=p * cells.j1 {
            for a in p * cells.i0..=p * cells.i1 {
                let n = b * (p * self.mesh.nx + 1) + a;
                let Some(d) = self.node_dof[n] else { continue };
                let sides = cells
                    .lattice_position(a, b, p)
                    .expect("lattice point inside box");
                let interior_sides: SideSet = sides.iter().filter(|s| !dom.contains(*s)).collect();
                if !interior_sides.intersects(exclude) {
                    global.push(d);
                }
            }
        }
        DofMap::new(global, self.n_dofs())
    }

    /// Reference basis values at `r`.
    pub fn basis(&self, r: [f64; 2]) -> [f64; MAX_LOCAL] {
        let l = [1.0 - r[0] - r[1], r[0], r[1]];
        let mut out = [0.0; MAX_LOCAL];
        if self.degree == 1 {
            out[..3].copy_from_slice(&l);
        } else {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            out[3] = 4.0 * l[0] * l[1];
            out[4] = 4.0 * l[1] * l[2];
            out[5] = 4.0 * l[2] * l[0];
        }
        out
    }

    /// Reference basis gradients at `r`.
    pub fn basis_grad(&self, r: [f64; 2]) -> [[f64; 2]; MAX_LOCAL] {
        const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
        let l = [1.0 - r[0] - r[1], r[0], r[1]];
        let mut out = [[0.0; 2]; MAX_LOCAL];
        if self.degree == 1 {
            out[..3].copy_from_slice(&DL);
        } else {
            for i in 0..3 {
                let f = 4.0 * l[i] - 1.0;
                out[i] = [f * DL[i][0], f * DL[i][1]];
            }
            for (k, (a, b)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                out[3 + k] = [
                    4.0 * (l[b] * DL[a][0] + l[a] * DL[b][0]),
                    4.0 * (l[b] * DL[a][1] + l[a] * DL[b][1]),
                ];
            }
        }
        out
    }

    pub fn quadrature(&self) -> TriangleRule {
        TriangleRule::for_space_degree(self.degree)
    }

    /// Nodal values of a dof vector (zero on Dirichlet nodes).
    pub fn expand(&self, u: &[C64]) -> Vec<C64> {
        self.node_dof
            .iter()
            .map(|d| d.map_or(C64::new(0.0, 0.0), |d| u[d]))
            .collect()
    }

    /// Value and gradient at `x` of the function with nodal values `nodal`.
    pub fn eval_nodal(&self, nodal: &[C64], x: [f64; 2]) -> (C64, [C64; 2]) {
        let (t, r) = self.mesh.locate(x);
        let map = self.mesh.element_map(t);
        let phi = self.basis(r);
        let dphi = self.basis_grad(r);
        let mut v = C64::new(0.0, 0.0);
        let mut g = [C64::new(0.0, 0.0); 2];
        for (k, &n) in self.element_nodes(t).iter().enumerate() {
            let gp = map.grad(dphi[k]);
            v += nodal[n] * phi[k];
            g[0] += nodal[n] * gp[0];
            g[1] += nodal[n] * gp[1];
        }
        (v, g)
    }

    /// Value at `x` of the finite-element function with dof vector `u`.
    pub fn evaluate(&self, u: &[C64], x: [f64; 2]) -> C64 {
        let (t, r) = self.mesh.locate(x);
        let phi = self.basis(r);
        self.element_nodes(t)
            .iter()
            .enumerate()
            .filter_map(|(k, &n)| self.node_dof[n].map(|d| u[d] * phi[k]))
            .sum()
    }

    /// Nodal interpolant as a dof vector (Dirichlet nodes dropped).
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> C64) -> Vec<C64> {
        self.dof_node.iter().map(|&n| f(self.nodes[n])).collect()
    }

    /// Nodal interpolant on all Lagrange nodes.
    pub fn interpolate_nodes(&self, f: impl Fn([f64; 2]) -> C64) -> Vec<C64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    /// `(‖u - u*‖_{L²}, |u - u*|_{H¹})` by element quadrature, `u` given as nodal values.
    pub fn error_norms(&self, nodal: &[C64], exact: &dyn ExactField) -> (f64, f64) {
        let rule = self.quadrature();
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for t in 0..self.mesh.n_elements() {
            let map = self.mesh.element_map(t);
            let nodes = self.element_nodes(t);
            for (q, w) in rule.points.iter().zip(&rule.weights) {
                let phi = self.basis(*q);
                let dphi = self.basis_grad(*q);
                let mut v = C64::new(0.0, 0.0);
                let mut g = [C64::new(0.0, 0.0); 2];
                for (k, &n) in nodes.iter().enumerate() {
                    let gp = map.grad(dphi[k]);
                    v += nodal[n] * phi[k];
                    g[0] += nodal[n] * gp[0];
                    g[1] += nodal[n] * gp[1];
                }
                let x = map.point(*q);
                let ge = exact.grad(x);
                let wa = w * map.area();
                l2 += wa * (v - exact.value(x)).norm_sqr();
                h1 += wa * ((g[0] - ge[0]).norm_sqr() + (g[1] - ge[1]).norm_sqr());
            }
        }
        (l2.sqrt(), h1.sqrt())
    }
}

/// Ordered subset of the dofs of a space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    /// Local index to global dof.
    pub global: Vec<usize>,
    lookup: Vec<usize>,
}

impl DofMap {
    pub fn new(global: Vec<usize>, n_global: usize) -> Self {
        let mut lookup = vec![usize::MAX; n_global];
        for (l, &g) in global.iter().enumerate() {
            lookup[g] = l;
        }
        Self { global, lookup }
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect(), n)
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    pub fn n_global(&self) -> usize {
        self.lookup.len()
    }

    pub fn local(&self, g: usize) -> Option<usize> {
        match self.lookup[g] {
            usize::MAX => None,
            l => Some(l),
        }
    }

    /// `v[global]`.
    pub fn gather(&self, v: &[C64]) -> Vec<C64> {
        self.global.iter().map(|&g| v[g]).collect()
    }

    /// `out[global] += w`.
    pub fn scatter_add(&self, w: &[C64], out: &mut [C64]) {
        for (&g, x) in self.global.iter().zip(w) {
            out[g] += x;
        }
    }

    /// Zero-extension of a local vector.
    pub fn extend(&self, w: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n_global()];
        self.scatter_add(w, &mut out);
        out
    }
}

/// Analytic function with gradient, used for interpolation and error norms.
pub trait ExactField: Sync {
    fn value(&self, x: [f64; 2]) -> C64;
    fn grad(&self, x: [f64; 2]) -> [C64; 2];
}

/// Finite-element function: a space and its nodal values on every Lagrange node.
#[derive(Debug, Clone)]
pub struct NodalField<'a> {
    pub space: &'a FeSpace,
    pub values: Vec<C64>,
}

impl<'a> NodalField<'a> {
    pub fn from_dofs(space: &'a FeSpace, u: &[C64]) -> Self {
        Self {
            space,
            values: space.expand(u),
        }
    }

    pub fn interpolate(space: &'a FeSpace, f: impl Fn([f64; 2]) -> C64) -> Self {
        Self {
            space,
            values: space.interpolate_nodes(f),
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> C64 {
        self.space.eval_nodal(&self.values, x).0
    }

    pub fn eval_with_grad(&self, x: [f64; 2]) -> (C64, [C64; 2]) {
        self.space.eval_nodal(&self.values, x)
    }
}
