//! Overlapping cover of the domain by square subdomains, smooth partition of
//! unity `χ_ℓ`, oversampled cutoffs `χ_ℓ^>`, weighted restrictions and the
//! overlap constant `Λ`.
//!
//! Along each axis the mesh cells are split into `N` cores at breakpoints
//! `t_0 = 0 < t_1 < ... < t_N`. Subdomain `i` covers the core `[t_i, t_{i+1}]`
//! extended by `e` cells on each interior side. With `δ = 2eh/3`:
//!
//! - `χ` rises over `[t_i − δ/2, t_i + δ/2]` and falls over `[t_{i+1} − δ/2, t_{i+1} + δ/2]`;
//! - `χ^>` rises over `[t_i − 3δ/2, t_i − δ/2]` and falls over `[t_{i+1} + δ/2, t_{i+1} + 3δ/2]`,
//!   so it is 1 on the support of `χ` and vanishes on the subdomain boundary.
//!
//! No ramps are placed at the domain boundary, so all cutoffs are constant in
//! the normal direction there. The two-dimensional cutoffs are tensor
//! products of the axis profiles.

mod ramp;

pub use ramp::SmoothRamp;

use std::sync::Arc;

use rand::Rng;

use crate::assembly::ProblemConfig;
use crate::linalg::{vector, CsrMatrix, TripletBuilder};
use crate::meshfe::{CellBox, DofMap, FeSpace, Mesh, SideSet};
use crate::{Error, Result, C64};

/// Smallest admissible extension in cells.
pub const MIN_EXTENSION: usize = 2;

/// Cover parameters in units of fine cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoverSpec {
    /// Subdomains per side.
    pub per_side: usize,
    /// Extension of each core beyond its interior sides, in cells.
    pub extension: usize,
    /// Smoothing order of the cutoff ramps.
    pub smoothness: usize,
}

impl CoverSpec {
    /// Spec from a subdomain diameter and overlap given as multiples of `1/k`
    /// on the unit-width axis of `mesh`: the core width is
    /// `(diameter − 2·overlap)/k` and the extension `overlap/k` rounded to cells.
    pub fn from_wavelength_multiples(
        mesh: &Mesh,
        k: f64,
        diameter: f64,
        overlap: f64,
        smoothness: usize,
    ) -> Result<Self> {
        let core = (diameter - 2.0 * overlap) / k;
        if !(core.is_finite() && core > 0.0 && overlap > 0.0) {
            return Err(Error::Cover(format!(
                "diameter {diameter}/k must exceed twice the overlap {overlap}/k"
            )));
        }
        let per_side = ((mesh.rect.width() / core).round() as usize).max(1);
        let extension = (overlap / (k * mesh.hx())).round() as usize;
        Ok(Self {
            per_side,
            extension,
            smoothness,
        })
    }
}

/// Ramp placement along one axis: rise starting at `up`, fall starting at `down`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisProfile {
    pub up: Option<f64>,
    pub down: Option<f64>,
}

impl AxisProfile {
    fn derivative(&self, ramp: &SmoothRamp, t: f64, d: usize) -> f64 {
        let up = |j: usize| {
            self.up.map_or(if j == 0 { 1.0 } else { 0.0 }, |s| {
                ramp.derivative(t - s, j)
            })
        };
        let down = |j: usize| {
            self.down.map_or(if j == 0 { 1.0 } else { 0.0 }, |s| {
                if j == 0 {
                    1.0 - ramp.value(t - s)
                } else {
                    -ramp.derivative(t - s, j)
                }
            })
        };
        if d == 0 {
            let u = self.up.map_or(1.0, |s| ramp.value(t - s));
            return u * down(0);
        }
        // Leibniz rule
        (0..=d)
            .map(|j| {
                let c = (0..j).fold(1.0, |acc, i| acc * (d - i) as f64 / (i + 1) as f64);
                c * up(j) * down(d - j)
            })
            .sum()
    }
}

/// All `χ` axis profiles, used to normalise the partition of unity.
#[derive(Debug, Clone)]
struct AxisPartition {
    ramp: SmoothRamp,
    x: Vec<AxisProfile>,
    y: Vec<AxisProfile>,
}

impl AxisPartition {
    fn sums(&self, p: [f64; 2]) -> f64 {
        let sx: f64 = self
            .x
            .iter()
            .map(|a| a.derivative(&self.ramp, p[0], 0))
            .sum();
        let sy: f64 = self
            .y
            .iter()
            .map(|a| a.derivative(&self.ramp, p[1], 0))
            .sum();
        sx * sy
    }
}

/// Closed-form cutoffs `χ_ℓ` and `χ_ℓ^>` of one subdomain.
#[derive(Debug, Clone)]
pub struct CutoffPair {
    pub ramp: SmoothRamp,
    pub chi_axes: [AxisProfile; 2],
    pub chi_gt_axes: [AxisProfile; 2],
    partition: Arc<AxisPartition>,
}

impl CutoffPair {
    /// `χ_ℓ(x)`, normalised by the cover sum.
    pub fn chi(&self, x: [f64; 2]) -> f64 {
        let v = self.chi_axes[0].derivative(&self.ramp, x[0], 0)
            * self.chi_axes[1].derivative(&self.ramp, x[1], 0);
        if v == 0.0 {
            0.0
        } else {
            v / self.partition.sums(x)
        }
    }

    pub fn chi_gt(&self, x: [f64; 2]) -> f64 {
        self.chi_gt_axes[0].derivative(&self.ramp, x[0], 0)
            * self.chi_gt_axes[1].derivative(&self.ramp, x[1], 0)
    }

    /// `∂^α χ_ℓ`. The cover sum is identically one, so the normalisation is
    /// not differentiated.
    pub fn chi_derivative(&self, x: [f64; 2], alpha: [usize; 2]) -> f64 {
        self.chi_axes[0].derivative(&self.ramp, x[0], alpha[0])
            * self.chi_axes[1].derivative(&self.ramp, x[1], alpha[1])
    }

    pub fn chi_gt_derivative(&self, x: [f64; 2], alpha: [usize; 2]) -> f64 {
        self.chi_gt_axes[0].derivative(&self.ramp, x[0], alpha[0])
            * self.chi_gt_axes[1].derivative(&self.ramp, x[1], alpha[1])
    }

    pub fn chi_grad(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.chi_derivative(x, [1, 0]),
            self.chi_derivative(x, [0, 1]),
        ]
    }

    pub fn chi_gt_grad(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.chi_gt_derivative(x, [1, 0]),
            self.chi_gt_derivative(x, [0, 1]),
        ]
    }
}

/// Which cutoff weights a restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// `R_ℓ`, plain restriction.
    None,
    /// `R_ℓ^χ`.
    Chi,
    /// `R_ℓ^{χ^>}`.
    ChiGt,
}

/// One subdomain `Ω_ℓ` with its dofs and cutoffs.
#[derive(Debug, Clone)]
pub struct Subdomain {
    pub index: usize,
    /// Column and row in the subdomain grid.
    pub position: (usize, usize),
    pub cells: CellBox,
    pub core: CellBox,
    /// Euclidean diameter `H_ℓ`.
    pub diameter: f64,
    /// Ramp width `δ_ℓ`.
    pub delta: f64,
    /// Largest element diameter inside `Ω_ℓ`.
    pub element_diameter: f64,
    /// Dofs on the closure of `Ω_ℓ`.
    pub closure_dofs: DofMap,
    /// Dofs of the local problem: closure dofs minus those with a local
    /// Dirichlet condition.
    pub local_dofs: DofMap,
    pub cutoff: CutoffPair,
    /// `χ_ℓ` at the local dofs.
    pub chi: Vec<f64>,
    /// `χ_ℓ^>` at the local dofs.
    pub chi_gt: Vec<f64>,
}

impl Subdomain {
    pub fn n_local(&self) -> usize {
        self.local_dofs.len()
    }

    fn weights(&self, w: Weight) -> Option<&[f64]> {
        match w {
            Weight::None => None,
            Weight::Chi => Some(&self.chi),
            Weight::ChiGt => Some(&self.chi_gt),
        }
    }

    /// `R_ℓ^w v`.
    pub fn restrict(&self, w: Weight, v: &[C64]) -> Vec<C64> {
        let mut out = self.local_dofs.gather(v);
        if let Some(ws) = self.weights(w) {
            for (o, c) in out.iter_mut().zip(ws) {
                *o *= c;
            }
        }
        out
    }

    /// `out += (R_ℓ^w)ᵀ y`.
    pub fn extend_add(&self, w: Weight, y: &[C64], out: &mut [C64]) {
        match self.weights(w) {
            None => self.local_dofs.scatter_add(y, out),
            Some(ws) => {
                for ((&g, v), c) in self.local_dofs.global.iter().zip(y).zip(ws) {
                    out[g] += v * c;
                }
            }
        }
    }

    /// `R_ℓ^w` as a sparse matrix (local dofs × global dofs).
    pub fn restriction_matrix(&self, w: Weight) -> CsrMatrix {
        let mut t = TripletBuilder::new(self.n_local(), self.local_dofs.n_global());
        for (l, &g) in self.local_dofs.global.iter().enumerate() {
            let c = self.weights(w).map_or(1.0, |ws| ws[l]);
            t.push(l, g, C64::new(c, 0.0));
        }
        t.build()
    }

    /// Elements of `Ω_ℓ` on which the nodal interpolant of `χ_ℓ^>` is nonzero, sorted.
    pub fn chi_gt_support(&self, space: &FeSpace) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .cells
            .elements(&space.mesh)
            .into_iter()
            .filter(|&t| {
                space
                    .element_nodes(t)
                    .iter()
                    .any(|&n| self.cutoff.chi_gt(space.node_coord(n)) != 0.0)
            })
            .collect();
        out.sort_unstable();
        out
    }
}

/// Summary of one subdomain for reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainSummary {
    pub index: usize,
    pub diameter: f64,
    pub delta: f64,
    pub local_dofs: usize,
    /// Number of subdomains (itself included) intersecting this one.
    pub neighbours: usize,
}

/// Overlapping cover of the domain.
#[derive(Debug, Clone)]
pub struct Cover {
    pub spec: CoverSpec,
    pub subdomains: Vec<Subdomain>,
    /// Maximum number of subdomains intersecting any one subdomain (itself included).
    pub lambda: usize,
    /// `min_ℓ δ_ℓ`.
    pub delta: f64,
    /// Whether `δ_ℓ ≥ h_ℓ` for every subdomain.
    pub delta_resolves_mesh: bool,
}

fn breakpoints(n: usize, parts: usize) -> Vec<usize> {
    (0..=parts).map(|i| (i * n + parts / 2) / parts).collect()
}

impl Cover {
    /// Builds the cover on the space's mesh. Local Dirichlet sides follow
    /// `config`.
    pub fn build(space: &FeSpace, spec: &CoverSpec, config: &ProblemConfig) -> Result<Self> {
        let mesh = &space.mesh;
        if mesh.nx != mesh.ny || (mesh.hx() - mesh.hy()).abs() > 1e-12 * mesh.hx() {
            return Err(Error::Cover(
                "covers require square cells and equal cell counts per side".into(),
            ));
        }
        let n = mesh.nx;
        let ns = spec.per_side;
        let e = spec.extension;
        if ns == 0 || ns > n {
            return Err(Error::Cover(format!(
                "{ns} subdomains per side on a {n}-cell mesh"
            )));
        }
        if spec.smoothness == 0 {
            return Err(Error::Cover("cutoff smoothness must be at least 1".into()));
        }
        let h = mesh.hx();
        let t = breakpoints(n, ns);
        if ns > 1 {
            if e < MIN_EXTENSION {
                return Err(Error::Cover(format!(
                    "overlap of {e} cells cannot host the cutoff pair (need at least {MIN_EXTENSION})"
                )));
            }
            let min_core = t.windows(2).map(|w| w[1] - w[0]).min().unwrap();
            if min_core < e + 1 {
                return Err(Error::Cover(format!(
                    "core of {min_core} cells is too small for an extension of {e} cells"
                )));
            }
        }
        let delta = 2.0 * e as f64 * h / 3.0;
        let ramp = SmoothRamp::new(if ns > 1 { delta } else { 1.0 }, spec.smoothness);
        let x0 = [mesh.rect.x0, mesh.rect.y0];
        let axis = |i: usize, shift: f64, d: usize| {
            let lo = x0[d] + t[i] as f64 * h;
            let hi = x0[d] + t[i + 1] as f64 * h;
            AxisProfile {
                up: (i > 0).then_some(lo - shift),
                down: (i + 1 < ns).then_some(hi + shift - delta),
            }
        };
        // χ ramps are centred on the breakpoints; χ^> ramps sit one ramp width outside.
        let chi_shift = delta / 2.0;
        let gt_shift = 1.5 * delta;
        let partition = Arc::new(AxisPartition {
            ramp,
            x: (0..ns).map(|i| axis(i, chi_shift, 0)).collect(),
            y: (0..ns).map(|i| axis(i, chi_shift, 1)).collect(),
        });
        let local_exclude = config.local_dirichlet();
        let mut subdomains = Vec::with_capacity(ns * ns);
        for j in 0..ns {
            for i in 0..ns {
                let core = CellBox {
                    i0: t[i],
                    j0: t[j],
                    i1: t[i + 1],
                    j1: t[j + 1],
                };
                let cells = CellBox {
                    i0: t[i].saturating_sub(e),
                    j0: t[j].saturating_sub(e),
                    i1: (t[i + 1] + e).min(n),
                    j1: (t[j + 1] + e).min(n),
                };
                let r = cells.rect(mesh);
                let cutoff = CutoffPair {
                    ramp,
                    chi_axes: [axis(i, chi_shift, 0), axis(j, chi_shift, 1)],
                    chi_gt_axes: [axis(i, gt_shift, 0), axis(j, gt_shift, 1)],
                    partition: partition.clone(),
                };
                let closure_dofs = space.box_dofs(&cells, SideSet::NONE);
                let local_dofs = space.box_dofs(&cells, local_exclude);
                let chi = local_dofs
                    .global
                    .iter()
                    .map(|&g| cutoff.chi(space.dof_coord(g)))
                    .collect();
                let chi_gt = local_dofs
                    .global
                    .iter()
                    .map(|&g| cutoff.chi_gt(space.dof_coord(g)))
                    .collect();
                subdomains.push(Subdomain {
                    index: j * ns + i,
                    position: (i, j),
                    cells,
                    core,
                    diameter: r.width().hypot(r.height()),
                    delta: if ns > 1 { delta } else { f64::INFINITY },
                    element_diameter: mesh.h(),
                    closure_dofs,
                    local_dofs,
                    cutoff,
                    chi,
                    chi_gt,
                });
            }
        }
        let lambda = lambda_by_boxes(&subdomains);
        let by_elements = lambda_by_elements(&subdomains, mesh);
        if lambda != by_elements {
            return Err(Error::Cover(format!(
                "overlap count disagrees: {lambda} from boxes, {by_elements} from elements"
            )));
        }
        let min_delta = subdomains
            .iter()
            .map(|s| s.delta)
            .fold(f64::INFINITY, f64::min);
        let delta_resolves_mesh = subdomains.iter().all(|s| s.delta >= s.element_diameter);
        Ok(Self {
            spec: *spec,
            subdomains,
            lambda,
            delta: min_delta,
            delta_resolves_mesh,
        })
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    /// `Σ_ℓ χ_ℓ(x)`.
    pub fn pou_sum(&self, x: [f64; 2]) -> f64 {
        self.subdomains.iter().map(|s| s.cutoff.chi(x)).sum()
    }

    /// Whether every mesh element lies in at least one subdomain.
    pub fn covers(&self, mesh: &Mesh) -> bool {
        let mut hit = vec![false; mesh.n_elements()];
        for s in &self.subdomains {
            for t in s.cells.elements(mesh) {
                hit[t] = true;
            }
        }
        hit.into_iter().all(|b| b)
    }

    pub fn summary(&self) -> Vec<SubdomainSummary> {
        self.subdomains
            .iter()
            .map(|s| SubdomainSummary {
                index: s.index,
                diameter: s.diameter,
                delta: s.delta,
                local_dofs: s.n_local(),
                neighbours: self
                    .subdomains
                    .iter()
                    .filter(|o| o.cells.overlaps(&s.cells))
                    .count(),
            })
            .collect()
    }

    /// Largest `‖Σ v_ℓ‖²_D / (2Λ Σ ‖v_ℓ‖²_D)` over random `v_ℓ` supported in `Ω_ℓ`.
    pub fn overlap_inequality_ratio<R: Rng + ?Sized>(
        &self,
        space: &FeSpace,
        d: &CsrMatrix,
        samples: usize,
        rng: &mut R,
    ) -> f64 {
        let interiors: Vec<DofMap> = self
            .subdomains
            .iter()
            .map(|s| space.box_dofs(&s.cells, SideSet::ALL))
            .collect();
        let norm2 = |v: &[C64]| vector::inner(&d.matvec(v), v).re;
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let mut total = vector::zeros(space.n_dofs());
            let mut parts = 0.0;
            for dm in &interiors {
                let v = dm.extend(&vector::random(rng, dm.len()));
                parts += norm2(&v);
                total = vector::add(&total, &v);
            }
            if parts > 0.0 {
                worst = worst.max(norm2(&total) / (2.0 * self.lambda as f64 * parts));
            }
        }
        worst
    }
}

fn lambda_by_boxes(subs: &[Subdomain]) -> usize {
    subs.iter()
        .map(|s| subs.iter().filter(|o| o.cells.overlaps(&s.cells)).count())
        .max()
        .unwrap_or(0)
}

fn lambda_by_elements(subs: &[Subdomain], mesh: &Mesh) -> usize {
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); mesh.n_elements()];
    for (l, s) in subs.iter().enumerate() {
        for t in s.cells.elements(mesh) {
            owners[t].push(l);
        }
    }
    let mut best = 0;
    let mut seen = vec![usize::MAX; subs.len()];
    for (l, s) in subs.iter().enumerate() {
        let mut count = 0;
        for t in s.cells.elements(mesh) {
            for &o in &owners[t] {
                if seen[o] != l {
                    seen[o] = l;
                    count += 1;
                }
            }
        }
        best = best.max(count);
    }
    best
}

#[cfg(test)]
mod tests;
