//! Finite-element assembly of the Helmholtz sesquilinear form, its local
//! versions on subdomains, the `H¹_k` norm matrices and load vectors.
//!
//! Everything goes through one element loop driven by pointwise integrand
//! coefficients `(K, b, c)` for `∫ (K∇u)·∇v̄ + (b·∇u) v̄ + c u v̄` plus a
//! boundary coefficient `ρ` for `∫ ρ u v̄` on selected edges. Matrix rows
//! index test functions: `(A)_ij = a(φ_j, φ_i)`.

mod coefficients;
mod pml;

pub use coefficients::{
    min_hermitian_eigenvalue, BoundaryField, CoefficientSet, PointCoefficients, ProblemConfig,
    ScalarField, TensorField, Truncation, VectorField,
};
pub use pml::{pml_coefficients, PmlLayer};

use rayon::prelude::*;

use crate::decomp::Subdomain;
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::meshfe::{gauss_legendre_unit, BoxEdge, CellBox, DofMap, FeSpace, Side};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Pointwise coefficients of `(K∇u)·∇v̄ + (b·∇u) v̄ + c u v̄`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrand {
    pub diffusion: [[C64; 2]; 2],
    pub advection: [C64; 2],
    pub reaction: C64,
}

impl Integrand {
    pub fn stiffness() -> Self {
        Self {
            diffusion: [[C64::new(1.0, 0.0), ZERO], [ZERO, C64::new(1.0, 0.0)]],
            advection: [ZERO; 2],
            reaction: ZERO,
        }
    }

    pub fn mass() -> Self {
        Self {
            diffusion: [[ZERO; 2]; 2],
            advection: [ZERO; 2],
            reaction: C64::new(1.0, 0.0),
        }
    }

    /// `k⁻²A`, `k⁻¹B`, `−c⁻²`.
    pub fn helmholtz(c: &PointCoefficients, k: f64) -> Self {
        let s = 1.0 / (k * k);
        Self {
            diffusion: [
                [c.a[0][0] * s, c.a[0][1] * s],
                [c.a[1][0] * s, c.a[1][1] * s],
            ],
            advection: [c.b[0] / k, c.b[1] * (1.0 / k)],
            reaction: -c.inv_c2,
        }
    }
}

pub type VolumeKernel<'a> = dyn Fn([f64; 2]) -> Result<Integrand> + Sync + 'a;
pub type EdgeKernel<'a> = dyn Fn([f64; 2], &BoxEdge) -> Result<C64> + Sync + 'a;

const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Quadrature points on an element edge: reference coordinates and weight times length.
fn edge_points(space: &FeSpace, edge: &BoxEdge) -> Vec<([f64; 2], f64)> {
    let map = space.mesh.element_map(edge.element);
    let (ra, rb) = (REF_VERTICES[edge.local[0]], REF_VERTICES[edge.local[1]]);
    let (xa, xb) = (map.point(ra), map.point(rb));
    let len = (xb[0] - xa[0]).hypot(xb[1] - xa[1]);
    gauss_legendre_unit()
        .iter()
        .map(|&(t, w)| {
            (
                [ra[0] + t * (rb[0] - ra[0]), ra[1] + t * (rb[1] - ra[1])],
                w * len,
            )
        })
        .collect()
}

/// Local dof index of each element node, if any.
fn element_rows(space: &FeSpace, dofs: &DofMap, t: usize) -> [Option<usize>; 6] {
    let mut rows = [None; 6];
    for (k, &n) in space.element_nodes(t).iter().enumerate() {
        rows[k] = space.node_dof(n).and_then(|d| dofs.local(d));
    }
    rows
}

fn element_matrix(space: &FeSpace, t: usize, volume: &VolumeKernel) -> Result<[[C64; 6]; 6]> {
    let map = space.mesh.element_map(t);
    let rule = space.quadrature();
    let nl = space.n_local();
    let mut loc = [[ZERO; 6]; 6];
    for (r, w) in rule.points.iter().zip(&rule.weights) {
        let x = map.point(*r);
        let c = volume(x)?;
        let phi = space.basis(*r);
        let dphi = space.basis_grad(*r);
        let wa = w * map.area();
        let grads: Vec<[f64; 2]> = (0..nl).map(|k| map.grad(dphi[k])).collect();
        for j in 0..nl {
            let gj = grads[j];
            let kg = [
                c.diffusion[0][0] * gj[0] + c.diffusion[0][1] * gj[1],
                c.diffusion[1][0] * gj[0] + c.diffusion[1][1] * gj[1],
            ];
            let bg = c.advection[0] * gj[0] + c.advection[1] * gj[1];
            for i in 0..nl {
                let gi = grads[i];
                loc[i][j] +=
                    wa * (kg[0] * gi[0] + kg[1] * gi[1] + (bg + c.reaction * phi[j]) * phi[i]);
            }
        }
    }
    Ok(loc)
}

fn edge_matrix(space: &FeSpace, edge: &BoxEdge, boundary: &EdgeKernel) -> Result<[[C64; 6]; 6]> {
    let map = space.mesh.element_map(edge.element);
    let nl = space.n_local();
    let mut loc = [[ZERO; 6]; 6];
    for (r, wl) in edge_points(space, edge) {
        let rho = boundary(map.point(r), edge)?;
        if rho == ZERO {
            continue;
        }
        let phi = space.basis(r);
        for j in 0..nl {
            for i in 0..nl {
                loc[i][j] += wl * rho * phi[j] * phi[i];
            }
        }
    }
    Ok(loc)
}

fn scatter(
    loc: &[[C64; 6]; 6],
    rows: &[Option<usize>; 6],
    nl: usize,
    out: &mut Vec<(usize, usize, C64)>,
) {
    for i in 0..nl {
        let Some(ri) = rows[i] else { continue };
        for j in 0..nl {
            if let Some(cj) = rows[j] {
                out.push((ri, cj, loc[i][j]));
            }
        }
    }
}

/// Assembles `∫_Ω' (K∇u)·∇v̄ + (b·∇u)v̄ + c u v̄ + Σ_edges ∫ ρ u v̄` over the
/// given elements, for trial and test functions in `dofs`.
pub fn assemble_generic(
    space: &FeSpace,
    elements: &[usize],
    dofs: &DofMap,
    volume: &VolumeKernel,
    edges: &[BoxEdge],
    boundary: &EdgeKernel,
) -> Result<CsrMatrix> {
    let nl = space.n_local();
    let chunks: Vec<Vec<(usize, usize, C64)>> = elements
        .par_chunks(256)
        .map(|chunk| {
            let mut trip = Vec::with_capacity(chunk.len() * nl * nl);
            for &t in chunk {
                let rows = element_rows(space, dofs, t);
                if rows.iter().all(Option::is_none) {
                    continue;
                }
                scatter(&element_matrix(space, t, volume)?, &rows, nl, &mut trip);
            }
            Ok(trip)
        })
        .collect::<Result<_>>()?;
    let mut b = TripletBuilder::with_capacity(dofs.len(), dofs.len(), elements.len() * nl * nl);
    for chunk in chunks {
        for (i, j, v) in chunk {
            b.push(i, j, v);
        }
    }
    for e in edges {
        let rows = element_rows(space, dofs, e.element);
        let mut trip = Vec::new();
        scatter(&edge_matrix(space, e, boundary)?, &rows, nl, &mut trip);
        for (i, j, v) in trip {
            b.push(i, j, v);
        }
    }
    Ok(b.build())
}

/// `F_i = a(u, φ_i)` for test functions in `dofs`, with `u` given by its
/// values on all Lagrange nodes. Uses quadrature on `u` directly rather than
/// an assembled matrix.
pub fn form_action(
    space: &FeSpace,
    elements: &[usize],
    dofs: &DofMap,
    volume: &VolumeKernel,
    edges: &[BoxEdge],
    boundary: &EdgeKernel,
    u_nodal: &[C64],
) -> Result<Vec<C64>> {
    let nl = space.n_local();
    let rule = space.quadrature();
    let mut out = vec![ZERO; dofs.len()];
    for &t in elements {
        let rows = element_rows(space, dofs, t);
        if rows.iter().all(Option::is_none) {
            continue;
        }
        let map = space.mesh.element_map(t);
        let nodes = space.element_nodes(t);
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.point(*r);
            let c = volume(x)?;
            let phi = space.basis(*r);
            let dphi = space.basis_grad(*r);
            let mut u = ZERO;
            let mut gu = [ZERO; 2];
            for k in 0..nl {
                let g = map.grad(dphi[k]);
                let val = u_nodal[nodes[k]];
                u += val * phi[k];
                gu[0] += val * g[0];
                gu[1] += val * g[1];
            }
            let kg = [
                c.diffusion[0][0] * gu[0] + c.diffusion[0][1] * gu[1],
                c.diffusion[1][0] * gu[0] + c.diffusion[1][1] * gu[1],
            ];
            let lower = c.advection[0] * gu[0] + c.advection[1] * gu[1] + c.reaction * u;
            let wa = w * map.area();
            for i in 0..nl {
                if let Some(ri) = rows[i] {
                    let gi = map.grad(dphi[i]);
                    out[ri] += wa * (kg[0] * gi[0] + kg[1] * gi[1] + lower * phi[i]);
                }
            }
        }
    }
    for e in edges {
        let rows = element_rows(space, dofs, e.element);
        let map = space.mesh.element_map(e.element);
        let nodes = space.element_nodes(e.element);
        for (r, wl) in edge_points(space, e) {
            let rho = boundary(map.point(r), e)?;
            let phi = space.basis(r);
            let u: C64 = (0..nl).map(|k| u_nodal[nodes[k]] * phi[k]).sum();
            for i in 0..nl {
                if let Some(ri) = rows[i] {
                    out[ri] += wl * rho * u * phi[i];
                }
            }
        }
    }
    Ok(out)
}

fn check_space(space: &FeSpace, config: &ProblemConfig) -> Result<()> {
    config.validate(&space.mesh.rect)?;
    if space.dirichlet != config.global_dirichlet() {
        return Err(Error::InvalidArgument(format!(
            "space Dirichlet sides {:?} do not match the truncation mode {:?}",
            space.dirichlet, config.truncation
        )));
    }
    Ok(())
}

/// Boundary coefficient of the global or local form on a box edge.
fn form_boundary<'a>(
    coeffs: &'a CoefficientSet,
    config: &'a ProblemConfig,
) -> impl Fn([f64; 2], &BoxEdge) -> Result<C64> + Sync + 'a {
    let factor = C64::new(0.0, -1.0 / coeffs.k);
    move |x, e| {
        if !config.is_impedance() {
            return Ok(ZERO);
        }
        let theta = if e.on_domain_boundary {
            coeffs.eval_theta(x, e.side)?
        } else {
            config.local_theta
        };
        Ok(factor * theta)
    }
}

fn form_volume(coeffs: &CoefficientSet) -> impl Fn([f64; 2]) -> Result<Integrand> + Sync + '_ {
    move |x| Ok(Integrand::helmholtz(&coeffs.eval(x)?, coeffs.k))
}

/// Galerkin matrix of `a(·,·)` on the whole space.
pub fn assemble_global(
    space: &FeSpace,
    coeffs: &CoefficientSet,
    config: &ProblemConfig,
) -> Result<CsrMatrix> {
    check_space(space, config)?;
    let cells = CellBox::full(&space.mesh);
    let dofs = DofMap::identity(space.n_dofs());
    assemble_on_box(space, &cells, &dofs, coeffs, config)
}

/// Galerkin matrix of the form restricted to a cell box: impedance or
/// nothing on box edges according to `config`, test and trial functions in
/// `dofs`. No coefficient-agreement check.
pub fn assemble_on_box(
    space: &FeSpace,
    cells: &CellBox,
    dofs: &DofMap,
    coeffs: &CoefficientSet,
    config: &ProblemConfig,
) -> Result<CsrMatrix> {
    let elements = cells.elements(&space.mesh);
    let edges = cells.boundary_edges(&space.mesh);
    assemble_generic(
        space,
        &elements,
        dofs,
        &form_volume(coeffs),
        &edges,
        &form_boundary(coeffs, config),
    )
}

/// `a(u, φ_i)` for every dof `i`, by quadrature on `u`.
pub fn global_form_action(
    space: &FeSpace,
    coeffs: &CoefficientSet,
    config: &ProblemConfig,
    u_nodal: &[C64],
) -> Result<Vec<C64>> {
    let cells = CellBox::full(&space.mesh);
    form_action(
        space,
        &cells.elements(&space.mesh),
        &DofMap::identity(space.n_dofs()),
        &form_volume(coeffs),
        &cells.boundary_edges(&space.mesh),
        &form_boundary(coeffs, config),
        u_nodal,
    )
}

/// `a_ℓ(u, φ_i)` for local dofs `i` of a subdomain, by quadrature on `u`.
pub fn local_form_action(
    space: &FeSpace,
    sub: &Subdomain,
    coeffs: &CoefficientSet,
    config: &ProblemConfig,
    u_nodal: &[C64],
) -> Result<Vec<C64>> {
    form_action(
        space,
        &sub.cells.elements(&space.mesh),
        &sub.local_dofs,
        &form_volume(coeffs),
        &sub.cells.boundary_edges(&space.mesh),
        &form_boundary(coeffs, config),
        u_nodal,
    )
}

/// Local Galerkin matrix `A_ℓ` on the subdomain's local dofs, after checking
/// that the local coefficients agree with the global ones on the support of
/// the interpolated oversampled cutoff.
pub fn assemble_local(
    space: &FeSpace,
    sub: &Subdomain,
    local: &CoefficientSet,
    global: &CoefficientSet,
    config: &ProblemConfig,
) -> Result<CsrMatrix> {
    check_agreement(space, sub, local, global).map_err(|e| e.in_subdomain(sub.index))?;
    assemble_on_box(space, &sub.cells, &sub.local_dofs, local, config)
        .map_err(|e| e.in_subdomain(sub.index))
}

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() <= 1e-14 * (1.0 + a.norm().max(b.norm()))
}

fn check_agreement(
    space: &FeSpace,
    sub: &Subdomain,
    local: &CoefficientSet,
    global: &CoefficientSet,
) -> Result<()> {
    if local.k != global.k {
        return Err(Error::InvalidArgument(
            "local and global wavenumbers differ".into(),
        ));
    }
    let support = sub.chi_gt_support(space);
    let rule = space.quadrature();
    for &t in &support {
        let map = space.mesh.element_map(t);
        for r in &rule.points {
            let x = map.point(*r);
            let (l, g) = (local.eval(x)?, global.eval(x)?);
            let same =
                l.a.iter()
                    .flatten()
                    .zip(g.a.iter().flatten())
                    .all(|(a, b)| close(*a, *b))
                    && l.b.iter().zip(&g.b).all(|(a, b)| close(*a, *b))
                    && close(l.inv_c2, g.inv_c2);
            if !same {
                return Err(Error::CoefficientMismatch { x: x[0], y: x[1] });
            }
        }
    }
    let dom_edges = sub.cells.boundary_edges(&space.mesh);
    for e in dom_edges
        .iter()
        .filter(|e| e.on_domain_boundary && support.binary_search(&e.element).is_ok())
    {
        let map = space.mesh.element_map(e.element);
        for (r, _) in edge_points(space, e) {
            let x = map.point(r);
            if !close(local.eval_theta(x, e.side)?, global.eval_theta(x, e.side)?) {
                return Err(Error::CoefficientMismatch { x: x[0], y: x[1] });
            }
        }
    }
    Ok(())
}

/// Stiffness `S`, mass `M` and `D_k = k⁻²S + M`.
#[derive(Debug, Clone)]
pub struct NormMatrices {
    pub k: f64,
    pub s: CsrMatrix,
    pub m: CsrMatrix,
    pub d: CsrMatrix,
}

/// Norm matrices of the whole space.
pub fn assemble_norm_matrices(space: &FeSpace, k: f64) -> Result<NormMatrices> {
    let cells = CellBox::full(&space.mesh);
    assemble_norm_matrices_on(
        space,
        &cells.elements(&space.mesh),
        &DofMap::identity(space.n_dofs()),
        k,
    )
}

/// Norm matrices over a set of elements (e.g. `H¹_k(Ω_ℓ)` on a subdomain).
pub fn assemble_norm_matrices_on(
    space: &FeSpace,
    elements: &[usize],
    dofs: &DofMap,
    k: f64,
) -> Result<NormMatrices> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "wavenumber must be positive, got {k}"
        )));
    }
    let none = |_: [f64; 2], _: &BoxEdge| Ok(ZERO);
    let s = assemble_generic(
        space,
        elements,
        dofs,
        &|_| Ok(Integrand::stiffness()),
        &[],
        &none,
    )?;
    let m = assemble_generic(
        space,
        elements,
        dofs,
        &|_| Ok(Integrand::mass()),
        &[],
        &none,
    )?;
    let d =
        CsrMatrix::linear_combination(C64::new(1.0 / (k * k), 0.0), &s, C64::new(1.0, 0.0), &m)?;
    Ok(NormMatrices { k, s, m, d })
}

/// `F_i = ∫ f φ_i + ∫_∂Ω g φ_i` over the space's dofs.
pub fn assemble_load(
    space: &FeSpace,
    f: &(dyn Fn([f64; 2]) -> C64 + Sync),
    g: Option<&(dyn Fn([f64; 2], Side) -> C64 + Sync)>,
) -> Result<Vec<C64>> {
    let nl = space.n_local();
    let rule = space.quadrature();
    let mut out = vec![ZERO; space.n_dofs()];
    let dofs = DofMap::identity(space.n_dofs());
    let check = |v: C64, x: [f64; 2]| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteCoefficient { x: x[0], y: x[1] })
        }
    };
    for t in 0..space.mesh.n_elements() {
        let rows = element_rows(space, &dofs, t);
        let map = space.mesh.element_map(t);
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.point(*r);
            let fx = check(f(x), x)? * (w * map.area());
            let phi = space.basis(*r);
            for i in 0..nl {
                if let Some(ri) = rows[i] {
                    out[ri] += fx * phi[i];
                }
            }
        }
    }
    if let Some(g) = g {
        let cells = CellBox::full(&space.mesh);
        for e in cells.boundary_edges(&space.mesh) {
            let rows = element_rows(space, &dofs, e.element);
            let map = space.mesh.element_map(e.element);
            for (r, wl) in edge_points(space, &e) {
                let x = map.point(r);
                let gx = check(g(x, e.side), x)? * wl;
                let phi = space.basis(r);
                for i in 0..nl {
                    if let Some(ri) = rows[i] {
                        out[ri] += gx * phi[i];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Minimum over quadrature points of the smallest eigenvalue of the
/// Hermitian part of `A(x)`.
pub fn coercivity_lower_bound(space: &FeSpace, coeffs: &CoefficientSet) -> Result<f64> {
    let rule = space.quadrature();
    let mut lo = f64::INFINITY;
    for t in 0..space.mesh.n_elements() {
        let map = space.mesh.element_map(t);
        for r in &rule.points {
            lo = lo.min(min_hermitian_eigenvalue(coeffs.eval(map.point(*r))?.a));
        }
    }
    Ok(lo)
}

#[cfg(test)]
mod tests;
