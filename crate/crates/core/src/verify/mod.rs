//! Measured surrogates for every constant the two-level bound consumes, the
//! bound itself, and an audit of `I − Q` against it.
//!
//! Suprema over subdomain function spaces are operator norms of small
//! assembled local operators, evaluated in the chosen [`EstimateMode`]:
//!
//! - `μ̂_ℓ²` is the largest eigenvalue of the Gram matrix of
//!   `(I − I_h)(χ φ_j)` in `H¹_k(Ω_ℓ)` relative to `D_ℓ`. On an element `T`
//!   the interpolant of `χ φ_j` is `χ(x_j) φ_j`, so the Gram matrix
//!   assembles element by element.
//! - `Ĉ_com,ℓ` is the `L² → (H¹_k)'` norm of the commutator matrix
//!   `C_ij = a_ℓ(χ^> φ_j, φ_i) − a_ℓ(φ_j, χ^> φ_i)`, rescaled.
//! - `γ̂_ℓ` is the `(H¹_k)' → H¹_k` norm of `A_ℓ⁻¹`.
//!
//! The audit of `‖(I − Q)v‖/‖v‖` uses random probes through the matrix path.

mod schatz;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::{
    assemble_local, assemble_norm_matrices_on, CoefficientSet, Integrand, ProblemConfig,
};
use crate::coarse::{estimate_csol, estimate_eta, estimate_sigmas, norm_in_mode, EstimateMode};
use crate::decomp::{Cover, Subdomain};
use crate::experiment::Problem;
use crate::linalg::{vector, CsrMatrix, Factorization, FnOperator, Metric, TripletBuilder};
use crate::meshfe::{DofMap, FeSpace};
use crate::precond::{PrecondSide, SchwarzPreconditioner};
use crate::{Error, Result, C64};

pub use schatz::{schatz_experiment, Manufactured, SchatzLevel, SchatzReport, SCHATZ_GATE};

/// Knobs of a constants measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    /// Mode of every operator-norm estimate.
    pub mode: EstimateMode,
    /// Random probes of the `I − Q` audit.
    pub probes: usize,
    pub seed: u64,
}

/// Absolute slack of the audit comparison. Degenerate covers have a bound of
/// exactly zero while the measured defect sits at rounding level.
pub const AUDIT_ROUNDOFF: f64 = 1e-10;

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            mode: EstimateMode::sampled(200),
            probes: 100,
            seed: 0,
        }
    }
}

/// Value and gradient of one shape function, with its node.
struct Shape {
    value: f64,
    grad: [f64; 2],
    node: [f64; 2],
}

type PairKernel<'a> = dyn Fn([f64; 2], &Shape, &Shape) -> Result<C64> + Sync + 'a;

/// `M_ij = ∫ kernel(x, φ_j, φ_i)` over `elements`, rows and columns in `dofs`.
fn assemble_pairs(
    space: &FeSpace,
    elements: &[usize],
    dofs: &DofMap,
    kernel: &PairKernel,
) -> Result<CsrMatrix> {
    let nl = space.n_local();
    let rule = space.quadrature();
    let chunks = elements
        .par_chunks(128)
        .map(|chunk| {
            let mut trip = Vec::new();
            for &t in chunk {
                let nodes = space.element_nodes(t);
                let rows: Vec<Option<usize>> = nodes
                    .iter()
                    .map(|&n| space.node_dof(n).and_then(|d| dofs.local(d)))
                    .collect();
                if rows.iter().all(Option::is_none) {
                    continue;
                }
                let map = space.mesh.element_map(t);
                let mut loc = vec![C64::new(0.0, 0.0); nl * nl];
                for (r, w) in rule.points.iter().zip(&rule.weights) {
                    let x = map.point(*r);
                    let phi = space.basis(*r);
                    let dphi = space.basis_grad(*r);
                    let shapes: Vec<Shape> = (0..nl)
                        .map(|k| Shape {
                            value: phi[k],
                            grad: map.grad(dphi[k]),
                            node: space.node_coord(nodes[k]),
                        })
                        .collect();
                    let wa = w * map.area();
                    for i in 0..nl {
                        for j in 0..nl {
                            if rows[i].is_some() && rows[j].is_some() {
                                loc[i * nl + j] += kernel(x, &shapes[j], &shapes[i])? * wa;
                            }
                        }
                    }
                }
                for i in 0..nl {
                    for j in 0..nl {
                        if let (Some(ri), Some(cj)) = (rows[i], rows[j]) {
                            trip.push((ri, cj, loc[i * nl + j]));
                        }
                    }
                }
            }
            Ok(trip)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut b = TripletBuilder::new(dofs.len(), dofs.len());
    for (i, j, v) in chunks.into_iter().flatten() {
        b.push(i, j, v);
    }
    Ok(b.build())
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Gram matrix of `(I − I_h)(c φ_j)` in `H¹_k` over the subdomain, for a
/// cutoff `c` given with its gradient.
pub fn interpolation_gram(
    space: &FeSpace,
    sub: &Subdomain,
    k: f64,
    cut: &(dyn Fn([f64; 2]) -> (f64, [f64; 2]) + Sync),
) -> Result<CsrMatrix> {
    let k2 = 1.0 / (k * k);
    let err = |x: [f64; 2], s: &Shape| {
        let (c, gc) = cut(x);
        let d = c - cut(s.node).0;
        (
            d * s.value,
            [
                gc[0] * s.value + d * s.grad[0],
                gc[1] * s.value + d * s.grad[1],
            ],
        )
    };
    let kernel = |x: [f64; 2], sj: &Shape, si: &Shape| {
        let (ej, gj) = err(x, sj);
        let (ei, gi) = err(x, si);
        Ok(C64::new(k2 * dot(gj, gi) + ej * ei, 0.0))
    };
    assemble_pairs(
        space,
        &sub.cells.elements(&space.mesh),
        &sub.closure_dofs,
        &kernel,
    )
}

/// `C_ij = a_ℓ(χ^> φ_j, φ_i) − a_ℓ(φ_j, χ^> φ_i)` on the closure dofs.
///
/// Reaction and boundary terms cancel pointwise since `χ^>` is real, which
/// leaves `φ_j (D∇χ^>)·∇φ_i − φ_i (D∇φ_j)·∇χ^> + (b·∇χ^>) φ_j φ_i`.
pub fn commutator_matrix(
    space: &FeSpace,
    sub: &Subdomain,
    coeffs: &CoefficientSet,
) -> Result<CsrMatrix> {
    let k = coeffs.k;
    let kernel = |x: [f64; 2], sj: &Shape, si: &Shape| {
        let c = Integrand::helmholtz(&coeffs.eval(x)?, k);
        let g = sub.cutoff.chi_gt_grad(x);
        Ok(commutator_density(
            &c,
            g,
            C64::new(sj.value, 0.0),
            sj.grad.map(|v| C64::new(v, 0.0)),
            C64::new(si.value, 0.0),
            si.grad.map(|v| C64::new(v, 0.0)),
        ))
    };
    assemble_pairs(
        space,
        &sub.cells.elements(&space.mesh),
        &sub.closure_dofs,
        &kernel,
    )
}

/// Integrand of the commutator for trial `(u, ∇u)` and conjugated test `(v̄, ∇v̄)`.
fn commutator_density(
    c: &Integrand,
    gchi: [f64; 2],
    u: C64,
    gu: [C64; 2],
    vb: C64,
    gvb: [C64; 2],
) -> C64 {
    let d = &c.diffusion;
    let dchi = [
        d[0][0] * gchi[0] + d[0][1] * gchi[1],
        d[1][0] * gchi[0] + d[1][1] * gchi[1],
    ];
    let dgu = [
        d[0][0] * gu[0] + d[0][1] * gu[1],
        d[1][0] * gu[0] + d[1][1] * gu[1],
    ];
    let bchi = c.advection[0] * gchi[0] + c.advection[1] * gchi[1];
    u * (dchi[0] * gvb[0] + dchi[1] * gvb[1]) - vb * (dgu[0] * gchi[0] + dgu[1] * gchi[1])
        + bchi * u * vb
}

/// `a_ℓ(χ^> u, v) − a_ℓ(u, χ^> v)` computed two ways for nodal fields `u`,
/// `v`: as the difference of the full volume forms, and as the direct
/// integral of the commutator density.
pub fn commutator_two_ways(
    space: &FeSpace,
    sub: &Subdomain,
    coeffs: &CoefficientSet,
    u_nodal: &[C64],
    v_nodal: &[C64],
) -> Result<(C64, C64)> {
    let k = coeffs.k;
    let rule = space.quadrature();
    let mut diff = C64::new(0.0, 0.0);
    let mut direct = C64::new(0.0, 0.0);
    for t in sub.cells.elements(&space.mesh) {
        let map = space.mesh.element_map(t);
        let nodes = space.element_nodes(t);
        for (r, w) in rule.points.iter().zip(&rule.weights) {
            let x = map.point(*r);
            let phi = space.basis(*r);
            let dphi = space.basis_grad(*r);
            let field = |vals: &[C64]| {
                let mut v = C64::new(0.0, 0.0);
                let mut g = [C64::new(0.0, 0.0); 2];
                for (k, &n) in nodes.iter().enumerate() {
                    let gp = map.grad(dphi[k]);
                    v += vals[n] * phi[k];
                    g[0] += vals[n] * gp[0];
                    g[1] += vals[n] * gp[1];
                }
                (v, g)
            };
            let (u, gu) = field(u_nodal);
            let (v, gv) = field(v_nodal);
            let (vb, gvb) = (v.conj(), [gv[0].conj(), gv[1].conj()]);
            let c = Integrand::helmholtz(&coeffs.eval(x)?, k);
            let chi = sub.cutoff.chi_gt(x);
            let gchi = sub.cutoff.chi_gt_grad(x);
            let form = |w: C64, gw: [C64; 2], zb: C64, gzb: [C64; 2]| {
                let d = &c.diffusion;
                let dg = [
                    d[0][0] * gw[0] + d[0][1] * gw[1],
                    d[1][0] * gw[0] + d[1][1] * gw[1],
                ];
                dg[0] * gzb[0]
                    + dg[1] * gzb[1]
                    + (c.advection[0] * gw[0] + c.advection[1] * gw[1] + c.reaction * w) * zb
            };
            let chi_u = (
                chi * u,
                [gchi[0] * u + chi * gu[0], gchi[1] * u + chi * gu[1]],
            );
            let chi_vb = (
                chi * vb,
                [gchi[0] * vb + chi * gvb[0], gchi[1] * vb + chi * gvb[1]],
            );
            let wa = w * map.area();
            diff += (form(chi_u.0, chi_u.1, vb, gvb) - form(u, gu, chi_vb.0, chi_vb.1)) * wa;
            direct += commutator_density(&c, gchi, u, gu, vb, gvb) * wa;
        }
    }
    Ok((diff, direct))
}

/// `H¹_k(Ω_ℓ)` and `L²(Ω_ℓ)` metrics on a dof subset of the subdomain.
pub fn local_metrics(
    space: &FeSpace,
    sub: &Subdomain,
    dofs: &DofMap,
    k: f64,
) -> Result<(Metric, Metric)> {
    let norms = assemble_norm_matrices_on(space, &sub.cells.elements(&space.mesh), dofs, k)?;
    let coords: Vec<[f64; 2]> = dofs.global.iter().map(|&g| space.dof_coord(g)).collect();
    Ok((
        Metric::with_coordinates(std::sync::Arc::new(norms.d), &coords)?,
        Metric::with_coordinates(std::sync::Arc::new(norms.m), &coords)?,
    ))
}

/// `μ̂_ℓ = max(‖(I − I_h)χ_ℓ·‖, ‖(I − I_h)χ_ℓ^>·‖)` over `R_ℓ V_h` in `H¹_k(Ω_ℓ)`.
pub fn measure_mu(
    space: &FeSpace,
    sub: &Subdomain,
    d_closure: &Metric,
    k: f64,
    mode: EstimateMode,
) -> Result<f64> {
    let cut = &sub.cutoff;
    let chi = |x: [f64; 2]| (cut.chi(x), cut.chi_grad(x));
    let chi_gt = |x: [f64; 2]| (cut.chi_gt(x), cut.chi_gt_grad(x));
    let dinv = d_closure.inverse();
    let mut worst: f64 = 0.0;
    for g in [
        interpolation_gram(space, sub, k, &chi)?,
        interpolation_gram(space, sub, k, &chi_gt)?,
    ] {
        if g.values().iter().all(|v| v.norm() == 0.0) {
            continue;
        }
        worst = worst.max(norm_in_mode(&g, &dinv, d_closure, mode)?.value.sqrt());
    }
    Ok(worst)
}

/// `γ̂`: norm of `A_ℓ⁻¹` from `(H¹_k)'` to `H¹_k`, i.e. the reciprocal of
/// the discrete inf-sup constant of `A_ℓ` in the `D_ℓ` geometry. Infinite
/// when `A_ℓ` is singular.
pub fn measure_infsup(a: &CsrMatrix, d: &Metric, mode: EstimateMode) -> Result<f64> {
    let lu = match Factorization::new(a) {
        Ok(lu) => lu,
        Err(Error::SingularMatrix { .. }) => return Ok(f64::INFINITY),
        Err(e) => return Err(e),
    };
    let op = FnOperator::square(a.nrows(), |f| lu.solve(f)).with_adjoint(|y| lu.solve_adjoint(y));
    Ok(norm_in_mode(&op, d, &d.inverse(), mode)?.value)
}

/// Discrete continuity constant: norm of `A` from `H¹_k` to `(H¹_k)'`.
pub fn continuity_constant(a: &CsrMatrix, d: &Metric, mode: EstimateMode) -> Result<f64> {
    Ok(norm_in_mode(a, &d.inverse(), d, mode)?.value)
}

/// `Ĉ_com,ℓ = ‖C‖_{L² → (H¹_k)'} · kδ_ℓ / (1 + (kδ_ℓ)⁻¹)`.
pub fn measure_commutator(
    space: &FeSpace,
    sub: &Subdomain,
    coeffs: &CoefficientSet,
    d_closure: &Metric,
    m_closure: &Metric,
    mode: EstimateMode,
) -> Result<f64> {
    let c = commutator_matrix(space, sub, coeffs)?;
    if c.values().iter().all(|v| v.norm() == 0.0) {
        return Ok(0.0);
    }
    let kd = coeffs.k * sub.delta;
    let norm = norm_in_mode(&c, &d_closure.inverse(), m_closure, mode)?.value;
    Ok(norm * kd / (1.0 + 1.0 / kd))
}

/// `C_PoU = max_ℓ δ_ℓ ‖∇χ_ℓ‖_∞`, sampled at quadrature points.
pub fn measure_pou(space: &FeSpace, cover: &Cover) -> f64 {
    let rule = space.quadrature();
    cover
        .subdomains
        .par_iter()
        .map(|sub| {
            let mut g: f64 = 0.0;
            for t in sub.cells.elements(&space.mesh) {
                let map = space.mesh.element_map(t);
                for r in &rule.points {
                    let d = sub.cutoff.chi_grad(map.point(*r));
                    g = g.max(d[0].hypot(d[1]));
                }
            }
            g * sub.delta
        })
        .reduce(|| 0.0, f64::max)
}

/// Largest `Σ_ℓ ‖v‖²_{L²(Ω_ℓ)} / (Λ ‖v‖²_{L²(Ω)})` over random `v`; at most one.
pub fn overlap_l2_ratio(
    space: &FeSpace,
    cover: &Cover,
    m: &CsrMatrix,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let locals = cover
        .subdomains
        .iter()
        .map(|s| {
            assemble_norm_matrices_on(space, &s.cells.elements(&space.mesh), &s.closure_dofs, 1.0)
                .map(|n| n.m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let v = vector::random(&mut rng, space.n_dofs());
        let total = vector::inner(&m.matvec(&v), &v).re;
        let parts: f64 = cover
            .subdomains
            .iter()
            .zip(&locals)
            .map(|(s, ml)| {
                let w = s.closure_dofs.gather(&v);
                vector::inner(&ml.matvec(&w), &w).re
            })
            .sum();
        worst = worst.max(parts / (cover.lambda as f64 * total));
    }
    Ok(worst)
}

/// Largest `‖(I − B_L⁻¹A)v‖_{D_k} / ‖v‖_{D_k}` over random probes.
pub fn audit_defect(pre: &SchwarzPreconditioner, d: &Metric, probes: usize, seed: u64) -> f64 {
    (0..probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let v = vector::random(&mut rng, pre.dim());
            let e = vector::sub(&v, &pre.apply_preconditioned(&v));
            d.norm(&e) / d.norm(&v)
        })
        .reduce(|| 0.0, f64::max)
}

/// Inputs of the bound on `I − Q`. Every field must be set.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TheoremConstants {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub gamma: Option<f64>,
    pub c_com: Option<f64>,
    pub c_pou: Option<f64>,
    pub c_cont: Option<f64>,
    pub k_delta: Option<f64>,
    pub sigma_l2: Option<f64>,
    pub sigma_h1: Option<f64>,
}

/// `2Λ[(1+μ)(1+C_PoU/(kδ)) γ C_com (kδ)⁻¹(1+(kδ)⁻¹) σ_L²
///    + (1 + (1+μ)(1+C_PoU/(kδ))(1+γ C_cont)) μ σ_H¹]`.
pub fn theorem_bound(c: &TheoremConstants) -> Result<f64> {
    let get = |v: Option<f64>, name: &'static str| v.ok_or(Error::MissingConstant(name));
    let lambda = get(c.lambda, "lambda")?;
    let mu = get(c.mu, "mu")?;
    let gamma = get(c.gamma, "gamma")?;
    let c_com = get(c.c_com, "c_com")?;
    let c_pou = get(c.c_pou, "c_pou")?;
    let c_cont = get(c.c_cont, "c_cont")?;
    let kd = get(c.k_delta, "k_delta")?;
    let s_l2 = get(c.sigma_l2, "sigma_l2")?;
    let s_h1 = get(c.sigma_h1, "sigma_h1")?;
    let pou = 1.0 + c_pou / kd;
    let first = (1.0 + mu) * pou * gamma * c_com / kd * (1.0 + 1.0 / kd) * s_l2;
    let second = (1.0 + (1.0 + mu) * pou * (1.0 + gamma * c_cont)) * mu * s_h1;
    Ok(2.0 * lambda * (first + second))
}

/// Constants of one subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubdomainConstants {
    pub index: usize,
    pub delta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub c_com: f64,
    /// Continuity constant of the local form.
    pub c_cont: f64,
}

/// Measures `μ̂_ℓ`, `γ̂_ℓ`, `Ĉ_com,ℓ` and the local continuity constant.
pub fn measure_subdomain(
    space: &FeSpace,
    sub: &Subdomain,
    coeffs: &CoefficientSet,
    config: &ProblemConfig,
    mode: EstimateMode,
) -> Result<SubdomainConstants> {
    let k = coeffs.k;
    let run = || -> Result<SubdomainConstants> {
        let (dc, mc) = local_metrics(space, sub, &sub.closure_dofs, k)?;
        let mu = measure_mu(space, sub, &dc, k, mode)?;
        let c_com = measure_commutator(space, sub, coeffs, &dc, &mc, mode)?;
        let al = assemble_local(space, sub, coeffs, coeffs, config)?;
        let (dl, _) = local_metrics(space, sub, &sub.local_dofs, k)?;
        let gamma = measure_infsup(&al, &dl, mode)?;
        let c_cont = continuity_constant(&al, &dl, mode)?;
        Ok(SubdomainConstants {
            index: sub.index,
            delta: sub.delta,
            mu,
            gamma,
            c_com,
            c_cont,
        })
    };
    run().map_err(|e| match e {
        e @ Error::Subdomain { .. } => e,
        e => e.in_subdomain(sub.index),
    })
}

/// Every measured constant of one configuration, the bound they give and
/// the audit against it.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsReport {
    pub k: f64,
    pub degree: usize,
    pub h: f64,
    pub h_coarse: f64,
    pub lambda: usize,
    pub delta: f64,
    pub k_delta: f64,
    pub subdomains: Vec<SubdomainConstants>,
    pub mu: f64,
    pub gamma: f64,
    pub c_com: f64,
    pub c_pou: f64,
    /// `max` of the global and local continuity constants.
    pub c_cont: f64,
    pub sigma_l2: f64,
    pub sigma_h1: f64,
    pub eta: f64,
    pub c_sol: f64,
    pub theorem_rhs: f64,
    pub defect_left: f64,
    pub defect_right: f64,
    /// Largest probe ratio `‖(I − Q)v‖/‖v‖`.
    pub audit_sup: f64,
    pub probes: usize,
    /// `δ` resolves the mesh and every local problem is solvable.
    pub assumptions_hold: bool,
    pub audit_holds: bool,
}

impl ConstantsReport {
    pub fn theorem_constants(&self) -> TheoremConstants {
        TheoremConstants {
            lambda: Some(self.lambda as f64),
            mu: Some(self.mu),
            gamma: Some(self.gamma),
            c_com: Some(self.c_com),
            c_pou: Some(self.c_pou),
            c_cont: Some(self.c_cont),
            k_delta: Some(self.k_delta),
            sigma_l2: Some(self.sigma_l2),
            sigma_h1: Some(self.sigma_h1),
        }
    }

    /// The audit passes, or its preconditions do not hold.
    pub fn passed(&self) -> bool {
        !self.assumptions_hold || self.audit_holds
    }

    pub const CSV_HEADER: [&'static str; 24] = [
        "k",
        "p",
        "h",
        "H_coarse",
        "lambda",
        "delta",
        "k_delta",
        "mu",
        "gamma",
        "c_com",
        "c_pou",
        "c_cont",
        "sigma_l2",
        "sigma_h1",
        "eta",
        "c_sol",
        "theorem_rhs",
        "defect_left",
        "defect_right",
        "audit_sup",
        "probes",
        "assumptions_hold",
        "audit_holds",
        "pass",
    ];

    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.6e}");
        vec![
            f(self.k),
            self.degree.to_string(),
            f(self.h),
            f(self.h_coarse),
            self.lambda.to_string(),
            f(self.delta),
            f(self.k_delta),
            f(self.mu),
            f(self.gamma),
            f(self.c_com),
            f(self.c_pou),
            f(self.c_cont),
            f(self.sigma_l2),
            f(self.sigma_h1),
            f(self.eta),
            f(self.c_sol),
            f(self.theorem_rhs),
            f(self.defect_left),
            f(self.defect_right),
            f(self.audit_sup),
            self.probes.to_string(),
            self.assumptions_hold.to_string(),
            self.audit_holds.to_string(),
            self.passed().to_string(),
        ]
    }

    /// Human-readable account of each assumption and its measured status.
    pub fn summary(&self) -> String {
        let status = |ok: bool| if ok { "ok" } else { "not met" };
        let mut s = String::new();
        s += &format!(
            "k = {}, p = {}, h = {:.4e}, H_coarse = {:.4e}\n",
            self.k, self.degree, self.h, self.h_coarse
        );
        s += &format!("finite overlap: Lambda = {}\n", self.lambda);
        s += &format!(
            "overlap width: delta = {:.4e}, k*delta = {:.3} ({})\n",
            self.delta,
            self.k_delta,
            status(self.assumptions_hold)
        );
        s += &format!("super-approximation: mu = {:.4e}\n", self.mu);
        s += &format!(
            "local inf-sup: gamma = {:.4e} ({})\n",
            self.gamma,
            status(self.gamma.is_finite())
        );
        s += &format!("partition-of-unity gradient: C_PoU = {:.4e}\n", self.c_pou);
        s += &format!("commutator: C_com = {:.4e}\n", self.c_com);
        s += &format!("continuity: C_cont = {:.4e}\n", self.c_cont);
        s += &format!(
            "coarse approximation: sigma_L2 = {:.4e}, sigma_H1 = {:.4e}, eta = {:.4e}, C_sol = {:.4e}\n",
            self.sigma_l2, self.sigma_h1, self.eta, self.c_sol
        );
        s += &format!(
            "bound on I - Q: {:.4e}; probe sup {:.4e} over {} probes; defect left {:.4e}, right {:.4e} ({})\n",
            self.theorem_rhs,
            self.audit_sup,
            self.probes,
            self.defect_left,
            self.defect_right,
            if self.passed() { "pass" } else { "FAIL" }
        );
        s
    }
}

/// Measures every constant of `problem` and audits the bound.
pub fn measure_constants(problem: &Problem, opts: &MeasureOptions) -> Result<ConstantsReport> {
    let mode = opts.mode;
    let space = &problem.space;
    let cover = &problem.cover;
    let subdomains = cover
        .subdomains
        .par_iter()
        .map(|sub| measure_subdomain(space, sub, &problem.coeffs, &problem.spec.config, mode))
        .collect::<Result<Vec<_>>>()?;
    let max = |f: fn(&SubdomainConstants) -> f64| subdomains.iter().map(f).fold(0.0, f64::max);
    let global_cont = continuity_constant(&problem.a, &problem.d, mode)?;
    let lu = problem.factorize()?;
    let fine = problem.fine_problem(&lu);
    let (sl2, sh1) = estimate_sigmas(&fine, &problem.coarse_ops, mode)?;
    let eta = estimate_eta(&fine, &problem.projection()?, mode)?.value;
    let c_sol = estimate_csol(&fine, mode)?.value;
    let left = problem.preconditioner(PrecondSide::Left)?;
    let right = problem.preconditioner(PrecondSide::Right)?;
    let defect_left = left.norm_defect(&problem.d, mode)?.value;
    let defect_right = right.norm_defect(&problem.d, mode)?.value;
    let audit_sup = audit_defect(&left, &problem.d, opts.probes, opts.seed);
    let mut report = ConstantsReport {
        k: problem.spec.k,
        degree: problem.spec.degree,
        h: problem.spec.h(),
        h_coarse: problem.spec.h_coarse(),
        lambda: cover.lambda,
        delta: cover.delta,
        k_delta: problem.k_delta(),
        mu: max(|s| s.mu),
        gamma: max(|s| s.gamma),
        c_com: max(|s| s.c_com),
        c_pou: measure_pou(space, cover),
        c_cont: max(|s| s.c_cont).max(global_cont),
        subdomains,
        sigma_l2: sl2.value,
        sigma_h1: sh1.value,
        eta,
        c_sol,
        theorem_rhs: 0.0,
        defect_left,
        defect_right,
        audit_sup,
        probes: opts.probes,
        assumptions_hold: false,
        audit_holds: false,
    };
    report.theorem_rhs = theorem_bound(&report.theorem_constants())?;
    report.assumptions_hold =
        cover.delta_resolves_mesh && report.gamma.is_finite() && report.theorem_rhs.is_finite();
    let bound = report.theorem_rhs + AUDIT_ROUNDOFF;
    report.audit_holds = report.audit_sup <= bound && report.defect_left <= bound;
    Ok(report)
}

#[cfg(test)]
mod tests;
