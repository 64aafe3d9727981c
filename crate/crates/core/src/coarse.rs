//! Coarse spaces of continuous piecewise polynomials on a coarser nested mesh.
//!
//! The embedding `R_0` holds the values of the coarse basis at the fine
//! Lagrange nodes, so `R_0ᵀ w` is the fine dof vector of the coarse function
//! with coefficients `w`. On top of it sit the Galerkin matrix `A_0 = R_0 A R_0ᵀ`,
//! the Galerkin projection `Q_0` and the `H¹_k`-orthogonal projection `Π_0`.
//!
//! The estimators measure, on the fine space:
//!
//! - `η`: the norm of `f ↦ (I − Π_0) S*_h f` from `L²` to `H¹_k`, where
//!   `S*_h f` solves the discrete adjoint problem `A^H U = M F`
//! - `σ_L²` and `σ_H¹`: the norms of `I − Q_0` from `H¹_k` to `L²` and `H¹_k`
//! - `C_sol`: the norm of `f ↦ S_h f = A⁻¹ M f` from `L²` to `H¹_k`

use std::sync::Arc;

use crate::linalg::lanczos_norm;
use crate::linalg::{
    operator_norm_between, CsrMatrix, Factorization, FnOperator, LinearOperator, Metric,
    NormEstimate, NormMode, TripletBuilder,
};
use crate::meshfe::{check_nested, FeSpace, Mesh};
use crate::{Error, Result, C64};

/// Entries of `R_0` below this magnitude are dropped.
const DROP_TOLERANCE: f64 = 1e-14;

/// Coarse Lagrange space nested in a fine one.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub space: FeSpace,
    /// `(R_0)_{pj} = Φ_p(x_j)`, coarse dofs by fine dofs.
    pub r0: Arc<CsrMatrix>,
    /// Fine cells per coarse cell along an axis, `H / h`.
    pub factor: usize,
}

impl CoarseSpace {
    /// Coarse space of the fine space's degree and boundary conditions on `mesh`.
    pub fn build(fine: &FeSpace, mesh: Arc<Mesh>) -> Result<Self> {
        check_nested(&mesh, &fine.mesh)?;
        let factor = fine.mesh.nx / mesh.nx;
        let space = FeSpace::new(mesh, fine.degree, fine.dirichlet)?;
        let mut b = TripletBuilder::with_capacity(space.n_dofs(), fine.n_dofs(), fine.n_dofs() * 6);
        for j in 0..fine.n_dofs() {
            let x = fine.dof_coord(j);
            let (t, r) = space.mesh.locate(x);
            let phi = space.basis(r);
            for (k, &n) in space.element_nodes(t).iter().enumerate() {
                if let Some(p) = space.node_dof(n) {
                    if phi[k].abs() > DROP_TOLERANCE {
                        b.push(p, j, C64::new(phi[k], 0.0));
                    }
                }
            }
        }
        Ok(Self {
            space,
            r0: Arc::new(b.build()),
            factor,
        })
    }

    pub fn n_coarse(&self) -> usize {
        self.r0.nrows()
    }

    pub fn n_fine(&self) -> usize {
        self.r0.ncols()
    }

    /// Coarse cell width `H`.
    pub fn h_coarse(&self) -> f64 {
        self.space.mesh.hx()
    }

    /// Fine dof vector `R_0ᵀ w` of a coarse function.
    pub fn prolong(&self, w: &[C64]) -> Vec<C64> {
        self.r0.matvec_transpose(w)
    }

    /// `R_0 v`.
    pub fn restrict(&self, v: &[C64]) -> Vec<C64> {
        self.r0.matvec(v)
    }
}

/// Factorized coarse Galerkin matrix `A_0 = R_0 A R_0ᵀ`.
#[derive(Debug)]
pub struct CoarseOperators {
    pub r0: Arc<CsrMatrix>,
    pub a0: CsrMatrix,
    lu: Factorization,
}

impl CoarseOperators {
    /// Galerkin matrix of `a` on the coarse space, factorized.
    ///
    /// A singular `A_0` means the coarse space is too coarse for the problem
    /// and is reported as [`Error::Coarse`].
    pub fn new(coarse: &CoarseSpace, a: &CsrMatrix) -> Result<Self> {
        Self::from_embedding(coarse.r0.clone(), a, Some(&coarse.space.dof_coords()))
    }

    pub fn from_embedding(
        r0: Arc<CsrMatrix>,
        a: &CsrMatrix,
        coords: Option<&[[f64; 2]]>,
    ) -> Result<Self> {
        if a.nrows() != r0.ncols() || a.ncols() != r0.ncols() {
            return Err(Error::DimensionMismatch {
                context: "coarse Galerkin matrix",
                expected: r0.ncols(),
                actual: a.nrows(),
            });
        }
        let a0 = r0.matmul(a)?.matmul(&r0.transpose())?;
        let lu = match coords {
            Some(c) => Factorization::with_coordinates(&a0, c),
            None => Factorization::new(&a0),
        }
        .map_err(|e| Error::Coarse(Box::new(e)))?;
        Ok(Self { r0, a0, lu })
    }

    pub fn n_fine(&self) -> usize {
        self.r0.ncols()
    }

    /// `R_0ᵀ A_0⁻¹ R_0 r`.
    pub fn solve(&self, r: &[C64]) -> Vec<C64> {
        self.r0.matvec_transpose(&self.lu.solve(&self.r0.matvec(r)))
    }

    /// `R_0ᵀ A_0^{-H} R_0 r`, the adjoint of [`Self::solve`].
    pub fn solve_adjoint(&self, r: &[C64]) -> Vec<C64> {
        self.r0
            .matvec_transpose(&self.lu.solve_adjoint(&self.r0.matvec(r)))
    }

    /// Coefficients of the Galerkin projection `Q_0 v = R_0ᵀ A_0⁻¹ R_0 A v`.
    pub fn apply_q0(&self, a: &CsrMatrix, v: &[C64]) -> Vec<C64> {
        self.solve(&a.matvec(v))
    }

    /// Euclidean adjoint of `Q_0`: `A^H R_0ᵀ A_0^{-H} R_0`.
    pub fn apply_q0_adjoint(&self, a: &CsrMatrix, v: &[C64]) -> Vec<C64> {
        a.matvec_adjoint(&self.solve_adjoint(v))
    }
}

/// `H¹_k`-orthogonal projection `Π_0 = R_0ᵀ (R_0 D R_0ᵀ)⁻¹ R_0 D` onto the coarse space.
#[derive(Debug)]
pub struct H1kProjection {
    r0: Arc<CsrMatrix>,
    d: Arc<CsrMatrix>,
    gram: Factorization,
}

impl H1kProjection {
    pub fn new(coarse: &CoarseSpace, d: Arc<CsrMatrix>) -> Result<Self> {
        let r0 = coarse.r0.clone();
        let g = r0.matmul(&d)?.matmul(&r0.transpose())?;
        let gram = Factorization::with_coordinates(&g, &coarse.space.dof_coords())?;
        Ok(Self { r0, d, gram })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.r0
            .matvec_transpose(&self.gram.solve(&self.r0.matvec(&self.d.matvec(v))))
    }

    /// Euclidean adjoint `D R_0ᵀ G⁻¹ R_0` (the Gram matrix is Hermitian).
    pub fn apply_adjoint(&self, v: &[C64]) -> Vec<C64> {
        self.d.matvec(
            &self
                .r0
                .matvec_transpose(&self.gram.solve(&self.r0.matvec(v))),
        )
    }
}

/// How the coarse estimators evaluate operator norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimateMode {
    /// Exact norm from the assembled operator (at most 2500 dofs).
    Dense,
    /// Lanczos on the normal operator with at most `samples` applications.
    /// The result is a lower bound that is exact once the Krylov space is
    /// invariant.
    Sampled { samples: usize, seed: u64 },
}

impl EstimateMode {
    pub fn sampled(samples: usize) -> Self {
        EstimateMode::Sampled {
            samples,
            seed: NormMode::DEFAULT_SEED,
        }
    }
}

/// Relative Ritz-residual target for sampled estimates.
const SAMPLED_TOL: f64 = 1e-6;

/// `sup ‖E v‖_out / ‖v‖_in` in the given mode.
pub fn norm_in_mode(
    op: &dyn LinearOperator,
    out_metric: &Metric,
    in_metric: &Metric,
    mode: EstimateMode,
) -> Result<NormEstimate> {
    match mode {
        EstimateMode::Dense => operator_norm_between(op, out_metric, in_metric, NormMode::Dense),
        EstimateMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument(
                    "sampled estimate needs at least one sample".into(),
                ));
            }
            if op.nrows() != out_metric.dim() || op.ncols() != in_metric.dim() {
                return Err(Error::DimensionMismatch {
                    context: "operator norm metrics",
                    expected: op.nrows() * op.ncols(),
                    actual: out_metric.dim() * in_metric.dim(),
                });
            }
            lanczos_norm(op, out_metric, in_metric, SAMPLED_TOL, samples, seed)
        }
    }
}

/// Fine-space data shared by the coarse estimators.
pub struct FineProblem<'a> {
    pub a: &'a CsrMatrix,
    pub lu: &'a Factorization,
    /// `L²` metric (mass matrix).
    pub m: &'a Metric,
    /// `H¹_k` metric.
    pub d: &'a Metric,
}

/// `η̂`: norm of `f ↦ (I − Π_0) A^{-H} M f` from `L²` to `H¹_k`.
pub fn estimate_eta(
    fine: &FineProblem,
    proj: &H1kProjection,
    mode: EstimateMode,
) -> Result<NormEstimate> {
    let n = fine.a.nrows();
    let op = FnOperator::square(n, |f| {
        let u = fine.lu.solve_adjoint(&fine.m.apply(f));
        let pu = proj.apply(&u);
        u.iter().zip(&pu).map(|(a, b)| a - b).collect()
    })
    .with_adjoint(|y| {
        let py = proj.apply_adjoint(y);
        let z: Vec<C64> = y.iter().zip(&py).map(|(a, b)| a - b).collect();
        fine.m.apply(&fine.lu.solve(&z))
    });
    norm_in_mode(&op, fine.d, fine.m, mode)
}

/// `(σ̂_L², σ̂_H¹)`: norms of `I − Q_0` from `H¹_k` to `L²` and to `H¹_k`.
pub fn estimate_sigmas(
    fine: &FineProblem,
    ops: &CoarseOperators,
    mode: EstimateMode,
) -> Result<(NormEstimate, NormEstimate)> {
    let n = fine.a.nrows();
    let op = FnOperator::square(n, |v| {
        let q = ops.apply_q0(fine.a, v);
        v.iter().zip(&q).map(|(a, b)| a - b).collect()
    })
    .with_adjoint(|v| {
        let q = ops.apply_q0_adjoint(fine.a, v);
        v.iter().zip(&q).map(|(a, b)| a - b).collect()
    });
    let l2 = norm_in_mode(&op, fine.m, fine.d, mode)?;
    let h1 = norm_in_mode(&op, fine.d, fine.d, mode)?;
    Ok((l2, h1))
}

/// `Ĉ_sol`: norm of `f ↦ A⁻¹ M f` from `L²` to `H¹_k`.
pub fn estimate_csol(fine: &FineProblem, mode: EstimateMode) -> Result<NormEstimate> {
    let n = fine.a.nrows();
    let op = FnOperator::square(n, |f| fine.lu.solve(&fine.m.apply(f)))
        .with_adjoint(|y| fine.m.apply(&fine.lu.solve_adjoint(y)));
    norm_in_mode(&op, fine.d, fine.m, mode)
}

/// Least-squares fit `η ≈ c₁ (kH) + c₂ (kH)^p Ĉ_sol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaFit {
    pub c1: f64,
    pub c2: f64,
    /// Largest `|fit − η| / η` over the data.
    pub max_rel_residual: f64,
}

/// Fits the piecewise-polynomial bound shape to `(kH, Ĉ_sol, η̂)` samples.
pub fn fit_eta_shape(data: &[(f64, f64, f64)], p: usize) -> Result<EtaFit> {
    if data.len() < 2 {
        return Err(Error::HistoryTooShort {
            needed: 2,
            got: data.len(),
        });
    }
    // relative least squares: rows scaled by 1/η
    let rows: Vec<[f64; 3]> = data
        .iter()
        .map(|&(kh, cs, eta)| [kh / eta, kh.powi(p as i32) * cs / eta, 1.0])
        .collect();
    let (mut g11, mut g12, mut g22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in &rows {
        g11 += r[0] * r[0];
        g12 += r[0] * r[1];
        g22 += r[1] * r[1];
        b1 += r[0] * r[2];
        b2 += r[1] * r[2];
    }
    let det = g11 * g22 - g12 * g12;
    if det.abs() <= 1e-14 * g11 * g22 {
        return Err(Error::InvalidArgument("degenerate fit data".into()));
    }
    let c1 = (b1 * g22 - b2 * g12) / det;
    let c2 = (g11 * b2 - g12 * b1) / det;
    let max_rel_residual = rows
        .iter()
        .map(|r| (c1 * r[0] + c2 * r[1] - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(EtaFit {
        c1,
        c2,
        max_rel_residual,
    })
}
