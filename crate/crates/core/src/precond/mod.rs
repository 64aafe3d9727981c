//! Hybrid Schwarz preconditioners.
//!
//! The two-level preconditioners are
//!
//! ```text
//! B_L⁻¹ = C + S (I − A C)        B_R⁻¹ = C + (I − C A) Sᵀ'
//! C  = R_0ᵀ A_0⁻¹ R_0
//! S  = Σ_ℓ (R_ℓ^χ)ᵀ A_ℓ⁻¹ R_ℓ^{χ^>}
//! Sᵀ' = Σ_ℓ (R_ℓ^{χ^>})ᵀ A_ℓ⁻¹ R_ℓ^χ
//! ```
//!
//! so the left version does the coarse solve first and the local solves on the
//! updated residual, and the right version mirrors that order. Replacing the
//! inbound weight `χ^>` by `χ` or by plain restriction gives the one-level
//! baselines; without a coarse space only the one-level sum remains.
//!
//! Local solves run in parallel and are summed in ascending subdomain order,
//! so results do not depend on the thread count.
//!
//! [`VariationalQ`] evaluates `Q v = Q_0 v + Σ_ℓ I_h(χ_ℓ Q_ℓ (I − Q_0) v)`
//! from quadrature form actions only, as an independent route to `B_L⁻¹ A`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::assembly::{
    assemble_local, global_form_action, local_form_action, CoefficientSet, ProblemConfig,
};
use crate::coarse::{norm_in_mode, CoarseOperators, CoarseSpace, EstimateMode};
use crate::decomp::{Cover, Subdomain, Weight};
use crate::linalg::{
    vector, CsrMatrix, Factorization, FnOperator, Metric, NormEstimate, TripletBuilder,
};
use crate::meshfe::FeSpace;
use crate::{Error, Result, C64};

/// Which side the preconditioner is applied on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondSide {
    Left,
    Right,
}

/// Inbound restriction of the one-level sum; the outbound one is always `R^χ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneLevelVariant {
    /// `R^{χ^>}` in: the hybrid Schwarz pairing covered by the theory.
    HybridPair,
    /// `R^χ` in and out.
    BothWeighted,
    /// Plain restriction in (optimised restricted additive Schwarz).
    Oras,
}

impl OneLevelVariant {
    fn inbound(self) -> Weight {
        match self {
            OneLevelVariant::HybridPair => Weight::ChiGt,
            OneLevelVariant::BothWeighted => Weight::Chi,
            OneLevelVariant::Oras => Weight::None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OneLevelVariant::HybridPair => "hybrid_pair",
            OneLevelVariant::BothWeighted => "both_weighted",
            OneLevelVariant::Oras => "oras",
        }
    }

    /// Whether the defect-norm bound applies to this pairing.
    pub fn has_guarantee(self) -> bool {
        self == OneLevelVariant::HybridPair
    }
}

/// Factorized local matrices, one per subdomain in cover order.
#[derive(Debug)]
pub struct LocalSolvers {
    pub factors: Vec<Factorization>,
}

impl LocalSolvers {
    /// Assembles and factorizes every `A_ℓ` in parallel.
    pub fn build(
        space: &FeSpace,
        cover: &Cover,
        local: &CoefficientSet,
        global: &CoefficientSet,
        config: &ProblemConfig,
    ) -> Result<Self> {
        let mats = assemble_local_matrices(space, cover, local, global, config)?;
        Self::from_matrices(space, cover, &mats)
    }

    /// Factorizes given local matrices with nested dissection on the local dof coordinates.
    pub fn from_matrices(space: &FeSpace, cover: &Cover, mats: &[CsrMatrix]) -> Result<Self> {
        if mats.len() != cover.len() {
            return Err(Error::DimensionMismatch {
                context: "local matrices",
                expected: cover.len(),
                actual: mats.len(),
            });
        }
        let factors = cover
            .subdomains
            .par_iter()
            .zip(mats)
            .map(|(sub, m)| {
                let coords: Vec<[f64; 2]> = sub
                    .local_dofs
                    .global
                    .iter()
                    .map(|&g| space.dof_coord(g))
                    .collect();
                Factorization::with_coordinates(m, &coords).map_err(|e| e.in_subdomain(sub.index))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { factors })
    }
}

/// Every `A_ℓ`, assembled in parallel.
pub fn assemble_local_matrices(
    space: &FeSpace,
    cover: &Cover,
    local: &CoefficientSet,
    global: &CoefficientSet,
    config: &ProblemConfig,
) -> Result<Vec<CsrMatrix>> {
    cover
        .subdomains
        .par_iter()
        .map(|sub| assemble_local(space, sub, local, global, config))
        .collect()
}

/// Two-level (or one-level) hybrid Schwarz preconditioner.
#[derive(Debug, Clone)]
pub struct SchwarzPreconditioner {
    pub side: PrecondSide,
    pub variant: OneLevelVariant,
    a: Arc<CsrMatrix>,
    cover: Arc<Cover>,
    coarse: Option<Arc<CoarseOperators>>,
    locals: Arc<LocalSolvers>,
}

impl SchwarzPreconditioner {
    pub fn new(
        a: Arc<CsrMatrix>,
        cover: Arc<Cover>,
        coarse: Option<Arc<CoarseOperators>>,
        locals: Arc<LocalSolvers>,
        side: PrecondSide,
        variant: OneLevelVariant,
    ) -> Result<Self> {
        let n = a.nrows();
        if let Some(c) = &coarse {
            if c.n_fine() != n {
                return Err(Error::DimensionMismatch {
                    context: "coarse embedding",
                    expected: n,
                    actual: c.n_fine(),
                });
            }
        }
        if locals.factors.len() != cover.len() {
            return Err(Error::DimensionMismatch {
                context: "local factorizations",
                expected: cover.len(),
                actual: locals.factors.len(),
            });
        }
        for (sub, f) in cover.subdomains.iter().zip(&locals.factors) {
            if f.dim() != sub.n_local() || sub.local_dofs.n_global() != n {
                return Err(Error::DimensionMismatch {
                    context: "local factorization",
                    expected: sub.n_local(),
                    actual: f.dim(),
                }
                .in_subdomain(sub.index));
            }
        }
        Ok(Self {
            side,
            variant,
            a,
            cover,
            coarse,
            locals,
        })
    }

    /// The two-level preconditioner covered by the theory.
    pub fn two_level(
        a: Arc<CsrMatrix>,
        cover: Arc<Cover>,
        coarse: Arc<CoarseOperators>,
        locals: Arc<LocalSolvers>,
        side: PrecondSide,
    ) -> Result<Self> {
        Self::new(
            a,
            cover,
            Some(coarse),
            locals,
            side,
            OneLevelVariant::HybridPair,
        )
    }

    /// Same data, other side.
    pub fn mirrored(&self) -> Self {
        let side = match self.side {
            PrecondSide::Left => PrecondSide::Right,
            PrecondSide::Right => PrecondSide::Left,
        };
        Self {
            side,
            ..self.clone()
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn cover(&self) -> &Cover {
        &self.cover
    }

    pub fn coarse(&self) -> Option<&CoarseOperators> {
        self.coarse.as_deref()
    }

    /// `Σ_ℓ (R_ℓ^{out})ᵀ A_ℓ^{-1 or -H} R_ℓ^{in} r`.
    fn one_level(&self, r: &[C64], w_in: Weight, w_out: Weight, adjoint: bool) -> Vec<C64> {
        let pieces: Vec<Vec<C64>> = self
            .cover
            .subdomains
            .par_iter()
            .zip(&self.locals.factors)
            .map(|(sub, lu): (&Subdomain, &Factorization)| {
                let rl = sub.restrict(w_in, r);
                if adjoint {
                    lu.solve_adjoint(&rl)
                } else {
                    lu.solve(&rl)
                }
            })
            .collect();
        let mut out = vector::zeros(r.len());
        for (sub, y) in self.cover.subdomains.iter().zip(&pieces) {
            sub.extend_add(w_out, y, &mut out);
        }
        out
    }

    fn coarse_solve(&self, r: &[C64], adjoint: bool) -> Option<Vec<C64>> {
        self.coarse.as_ref().map(|c| {
            if adjoint {
                c.solve_adjoint(r)
            } else {
                c.solve(r)
            }
        })
    }

    /// `B⁻¹ r`.
    pub fn apply(&self, r: &[C64]) -> Vec<C64> {
        let w = self.variant.inbound();
        match self.side {
            PrecondSide::Left => match self.coarse_solve(r, false) {
                Some(c) => {
                    let ac = self.a.matvec(&c);
                    let rho = vector::sub(r, &ac);
                    vector::add(&c, &self.one_level(&rho, w, Weight::Chi, false))
                }
                None => self.one_level(r, w, Weight::Chi, false),
            },
            PrecondSide::Right => {
                let y = self.one_level(r, Weight::Chi, w, false);
                match self.coarse_solve(r, false) {
                    Some(c) => {
                        let cy = self
                            .coarse_solve(&self.a.matvec(&y), false)
                            .expect("coarse present");
                        vector::add(&c, &vector::sub(&y, &cy))
                    }
                    None => y,
                }
            }
        }
    }

    /// `B^{-H} r`, the Euclidean adjoint of [`Self::apply`].
    pub fn apply_adjoint(&self, r: &[C64]) -> Vec<C64> {
        let w = self.variant.inbound();
        match self.side {
            PrecondSide::Left => {
                let y = self.one_level(r, Weight::Chi, w, true);
                match self.coarse_solve(r, true) {
                    Some(c) => {
                        let cy = self
                            .coarse_solve(&self.a.matvec_adjoint(&y), true)
                            .expect("coarse present");
                        vector::add(&c, &vector::sub(&y, &cy))
                    }
                    None => y,
                }
            }
            PrecondSide::Right => match self.coarse_solve(r, true) {
                Some(c) => {
                    let rho = vector::sub(r, &self.a.matvec_adjoint(&c));
                    vector::add(&c, &self.one_level(&rho, w, Weight::Chi, true))
                }
                None => self.one_level(r, w, Weight::Chi, true),
            },
        }
    }

    /// `B_L⁻¹ A v` (left) or `A B_R⁻¹ v` (right).
    pub fn apply_preconditioned(&self, v: &[C64]) -> Vec<C64> {
        match self.side {
            PrecondSide::Left => self.apply(&self.a.matvec(v)),
            PrecondSide::Right => self.a.matvec(&self.apply(v)),
        }
    }

    /// `I − B_L⁻¹ A` or `I − A B_R⁻¹` with its Euclidean adjoint.
    pub fn defect_operator(&self) -> FnOperator<'_> {
        let n = self.dim();
        FnOperator::square(n, move |v| vector::sub(v, &self.apply_preconditioned(v))).with_adjoint(
            move |v| {
                let w = match self.side {
                    PrecondSide::Left => self.a.matvec_adjoint(&self.apply_adjoint(v)),
                    PrecondSide::Right => self.apply_adjoint(&self.a.matvec_adjoint(v)),
                };
                vector::sub(v, &w)
            },
        )
    }

    /// `‖I − B_L⁻¹A‖_{D_k}` (left) or `‖I − A B_R⁻¹‖_{D_k⁻¹}` (right).
    pub fn norm_defect(&self, d: &Metric, mode: EstimateMode) -> Result<NormEstimate> {
        let op = self.defect_operator();
        match self.side {
            PrecondSide::Left => norm_in_mode(&op, d, d, mode),
            PrecondSide::Right => {
                let dinv = d.inverse();
                norm_in_mode(&op, &dinv, &dinv, mode)
            }
        }
    }
}

/// The variational operator `Q`, evaluated from quadrature form actions.
///
/// The coarse Galerkin matrix and the local matrices are built column by
/// column from the form itself; nothing is shared with the assembled path.
pub struct VariationalQ<'a> {
    space: &'a FeSpace,
    cover: &'a Cover,
    coeffs: &'a CoefficientSet,
    config: &'a ProblemConfig,
    r0: Arc<CsrMatrix>,
    a0: Factorization,
    locals: Vec<Factorization>,
}

impl<'a> VariationalQ<'a> {
    pub fn new(
        space: &'a FeSpace,
        cover: &'a Cover,
        coarse: &CoarseSpace,
        coeffs: &'a CoefficientSet,
        config: &'a ProblemConfig,
    ) -> Result<Self> {
        let r0 = coarse.r0.clone();
        let nc = coarse.n_coarse();
        // a(Φ_q, Φ_p) = (R_0 F_q)_p with F_q the fine form action of Φ_q
        let cols = (0..nc)
            .into_par_iter()
            .map(|q| {
                let phi = coarse.prolong(&vector::unit(nc, q));
                global_form_action(space, coeffs, config, &space.expand(&phi))
                    .map(|f| r0.matvec(&f))
            })
            .collect::<Result<Vec<_>>>()?;
        let a0 =
            Factorization::new(&from_columns(nc, &cols)).map_err(|e| Error::Coarse(Box::new(e)))?;
        let locals = cover
            .subdomains
            .par_iter()
            .map(|sub| {
                let nl = sub.n_local();
                let cols = (0..nl)
                    .map(|j| {
                        let mut nodal = vector::zeros(space.n_dofs());
                        nodal[sub.local_dofs.global[j]] = C64::new(1.0, 0.0);
                        local_form_action(space, sub, coeffs, config, &space.expand(&nodal))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Factorization::new(&from_columns(nl, &cols))
            })
            .enumerate()
            .map(|(l, r)| r.map_err(|e| e.in_subdomain(l)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space,
            cover,
            coeffs,
            config,
            r0,
            a0,
            locals,
        })
    }

    fn action(&self, v: &[C64]) -> Result<Vec<C64>> {
        global_form_action(self.space, self.coeffs, self.config, &self.space.expand(v))
    }

    /// Coefficients of `Q_0 v`.
    pub fn apply_q0(&self, v: &[C64]) -> Result<Vec<C64>> {
        let f = self.action(v)?;
        Ok(self
            .r0
            .matvec_transpose(&self.a0.solve(&self.r0.matvec(&f))))
    }

    /// Coefficients of `Q v`.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        let q0 = self.apply_q0(v)?;
        let e = vector::sub(v, &q0);
        let fe = self.action(&e)?;
        // a_ℓ(Q_ℓ e, φ_i) = a(e, I_h(χ^> φ_i)) = χ^>(x_i) a(e, φ_i)
        let pieces: Vec<Vec<C64>> = self
            .cover
            .subdomains
            .par_iter()
            .zip(&self.locals)
            .map(|(sub, lu)| {
                let rhs: Vec<C64> = sub
                    .local_dofs
                    .global
                    .iter()
                    .zip(&sub.chi_gt)
                    .map(|(&g, &c)| fe[g] * c)
                    .collect();
                lu.solve(&rhs)
            })
            .collect();
        let mut out = q0;
        for (sub, w) in self.cover.subdomains.iter().zip(&pieces) {
            // nodal interpolation of χ_ℓ times the local solution
            for ((&g, &c), x) in sub.local_dofs.global.iter().zip(&sub.chi).zip(w) {
                out[g] += x * c;
            }
        }
        Ok(out)
    }
}

fn from_columns(n: usize, cols: &[Vec<C64>]) -> CsrMatrix {
    let mut t = TripletBuilder::new(n, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            if v != C64::new(0.0, 0.0) {
                t.push(i, j, v);
            }
        }
    }
    t.build()
}
