//! End-to-end problem construction shared by tests, the acceptance suite and the CLI.
//!
//! A [`ProblemSpec`] fixes the wavenumber, discretisation, cover and coarse
//! level on the unit square; [`Problem::build`] assembles everything the
//! preconditioners and the measurements need.

use std::sync::Arc;

use crate::assembly::{
    assemble_global, assemble_norm_matrices, pml_coefficients, CoefficientSet, NormMatrices,
    ProblemConfig, Truncation,
};
use crate::coarse::{CoarseOperators, CoarseSpace, FineProblem, H1kProjection};
use crate::decomp::{Cover, CoverSpec};
use crate::linalg::{CsrMatrix, Factorization, Metric};
use crate::meshfe::{FeSpace, Mesh, Rect};
use crate::precond::{LocalSolvers, OneLevelVariant, PrecondSide, SchwarzPreconditioner};
use crate::{Error, Result, C64};

/// Wave speed profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Medium {
    Homogeneous,
    /// `c⁻² = 1 + 0.3 sin(πx) sin(πy)`.
    SmoothBump,
}

/// Everything that defines one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub k: f64,
    pub degree: usize,
    /// Fine cells per side.
    pub fine_cells: usize,
    /// Coarse cells per side; must divide `fine_cells`.
    pub coarse_cells: usize,
    /// Subdomains per side.
    pub per_side: usize,
    /// Overlap extension in fine cells.
    pub extension: usize,
    pub config: ProblemConfig,
    pub medium: Medium,
}

impl ProblemSpec {
    /// Impedance problem on a homogeneous medium.
    pub fn impedance(
        k: f64,
        degree: usize,
        fine_cells: usize,
        coarse_cells: usize,
        per_side: usize,
        extension: usize,
    ) -> Self {
        Self {
            k,
            degree,
            fine_cells,
            coarse_cells,
            per_side,
            extension,
            config: ProblemConfig::impedance(),
            medium: Medium::Homogeneous,
        }
    }

    pub fn with_config(mut self, config: ProblemConfig) -> Self {
        self.config = config;
        self
    }

    pub fn with_medium(mut self, medium: Medium) -> Self {
        self.medium = medium;
        self
    }

    pub fn h(&self) -> f64 {
        1.0 / self.fine_cells as f64
    }

    pub fn h_coarse(&self) -> f64 {
        1.0 / self.coarse_cells as f64
    }

    /// Checks everything that can be checked before assembly.
    pub fn validate(&self) -> Result<()> {
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "k must be positive, got {}",
                self.k
            )));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(Error::InvalidArgument(format!(
                "degree must be 1 or 2, got {}",
                self.degree
            )));
        }
        if self.fine_cells == 0 || self.coarse_cells == 0 || self.per_side == 0 {
            return Err(Error::InvalidArgument(
                "cell and subdomain counts must be positive".into(),
            ));
        }
        if !self.fine_cells.is_multiple_of(self.coarse_cells) {
            return Err(Error::NotNested(format!(
                "{} coarse cells do not divide {} fine cells",
                self.coarse_cells, self.fine_cells
            )));
        }
        self.config.validate(&Rect::unit_square())
    }

    /// Coefficients of the global problem.
    pub fn coefficients(&self) -> Result<CoefficientSet> {
        let base = match self.config.truncation {
            Truncation::Impedance => CoefficientSet::helmholtz(self.k)?,
            Truncation::CartesianPml { width, strength } => {
                pml_coefficients(Rect::unit_square(), self.k, width, strength)?
            }
        };
        Ok(match self.medium {
            Medium::Homogeneous => base,
            Medium::SmoothBump => {
                let inner = base.inv_c2.clone();
                let bump = |x: [f64; 2]| {
                    1.0 + 0.3
                        * (std::f64::consts::PI * x[0]).sin()
                        * (std::f64::consts::PI * x[1]).sin()
                };
                base.with_inv_c2(move |x| inner(x) * bump(x))
            }
        })
    }
}

/// Assembled configuration.
pub struct Problem {
    pub spec: ProblemSpec,
    pub space: FeSpace,
    pub coeffs: CoefficientSet,
    pub a: Arc<CsrMatrix>,
    pub norms: NormMatrices,
    /// `H¹_k` metric `D_k`.
    pub d: Metric,
    /// `L²` metric `M`.
    pub m: Metric,
    pub cover: Arc<Cover>,
    pub coarse: CoarseSpace,
    pub coarse_ops: Arc<CoarseOperators>,
    pub locals: Arc<LocalSolvers>,
}

impl Problem {
    pub fn build(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let coeffs = spec.coefficients()?;
        Self::build_with(spec, coeffs)
    }

    /// Builds with explicit global coefficients (also used for the local problems).
    pub fn build_with(spec: &ProblemSpec, coeffs: CoefficientSet) -> Result<Self> {
        spec.validate()?;
        let rect = Rect::unit_square();
        let fine_mesh = Arc::new(Mesh::structured(rect, spec.fine_cells, spec.fine_cells)?);
        let coarse_mesh = Arc::new(Mesh::structured(
            rect,
            spec.coarse_cells,
            spec.coarse_cells,
        )?);
        let space = FeSpace::new(fine_mesh, spec.degree, spec.config.global_dirichlet())?;
        let cover = Arc::new(Cover::build(
            &space,
            &CoverSpec {
                per_side: spec.per_side,
                extension: spec.extension,
                smoothness: spec.degree,
            },
            &spec.config,
        )?);
        let a = Arc::new(assemble_global(&space, &coeffs, &spec.config)?);
        let norms = assemble_norm_matrices(&space, spec.k)?;
        let coords = space.dof_coords();
        let d = Metric::with_coordinates(Arc::new(norms.d.clone()), &coords)?;
        let m = Metric::with_coordinates(Arc::new(norms.m.clone()), &coords)?;
        let coarse = CoarseSpace::build(&space, coarse_mesh)?;
        let coarse_ops = Arc::new(CoarseOperators::new(&coarse, &a)?);
        let locals = Arc::new(LocalSolvers::build(
            &space,
            &cover,
            &coeffs,
            &coeffs,
            &spec.config,
        )?);
        Ok(Self {
            spec: spec.clone(),
            space,
            coeffs,
            a,
            norms,
            d,
            m,
            cover,
            coarse,
            coarse_ops,
            locals,
        })
    }

    /// The same configuration built from the adjoint coefficients, so that its
    /// matrix is `A^H`.
    pub fn adjoint(&self) -> Result<Self> {
        let spec = ProblemSpec {
            config: self.spec.config.adjoint(),
            ..self.spec.clone()
        };
        Self::build_with(&spec, self.coeffs.adjoint()?)
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn preconditioner(&self, side: PrecondSide) -> Result<SchwarzPreconditioner> {
        SchwarzPreconditioner::two_level(
            self.a.clone(),
            self.cover.clone(),
            self.coarse_ops.clone(),
            self.locals.clone(),
            side,
        )
    }

    /// One-level baseline, optionally keeping the coarse correction.
    pub fn variant(
        &self,
        variant: OneLevelVariant,
        with_coarse: bool,
        side: PrecondSide,
    ) -> Result<SchwarzPreconditioner> {
        SchwarzPreconditioner::new(
            self.a.clone(),
            self.cover.clone(),
            with_coarse.then(|| self.coarse_ops.clone()),
            self.locals.clone(),
            side,
            variant,
        )
    }

    /// Sparse LU of the fine matrix.
    pub fn factorize(&self) -> Result<Factorization> {
        Factorization::with_coordinates(&self.a, &self.space.dof_coords())
    }

    pub fn projection(&self) -> Result<H1kProjection> {
        H1kProjection::new(&self.coarse, Arc::new(self.norms.d.clone()))
    }

    pub fn fine_problem<'a>(&'a self, lu: &'a Factorization) -> FineProblem<'a> {
        FineProblem {
            a: &self.a,
            lu,
            m: &self.m,
            d: &self.d,
        }
    }

    /// `kδ` of the cover.
    pub fn k_delta(&self) -> f64 {
        self.spec.k * self.cover.delta
    }

    /// Load vector of a plane wave `exp(i k d·x)` incident through the impedance boundary.
    pub fn plane_wave_load(&self, dir: [f64; 2]) -> Result<Vec<C64>> {
        let k = self.spec.k;
        let u = move |x: [f64; 2]| C64::from_polar(1.0, k * (dir[0] * x[0] + dir[1] * x[1]));
        let g = move |x: [f64; 2], side: crate::meshfe::Side| {
            let n = side.normal();
            let dn = C64::new(0.0, k * (dir[0] * n[0] + dir[1] * n[1]));
            u(x) * (dn / (k * k) - C64::new(0.0, 1.0 / k))
        };
        match self.spec.config.truncation {
            Truncation::Impedance => {
                crate::assembly::assemble_load(&self.space, &|_| C64::new(0.0, 0.0), Some(&g))
            }
            // a point-like source in the interior for the PML case
            Truncation::CartesianPml { .. } => crate::assembly::assemble_load(
                &self.space,
                &|x| {
                    let r2 = (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
                    C64::new((-r2 * k * k).exp() * k * k, 0.0)
                },
                None,
            ),
        }
    }
}
