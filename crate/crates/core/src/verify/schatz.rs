//! Manufactured solutions and the Schatz / Aubin–Nitsche experiment.
//!
//! The experiment works inside the fine space: `u_h` is the fine Galerkin
//! solution, the coarse Galerkin solution is `Q_0 u_h`, and the best
//! approximation is `Π_0 u_h`. With the discrete `η̂` and `C_cont` the
//! Aubin–Nitsche inequality is then exact. The Gårding identity
//! `Re a(v, v) = ‖v‖²_{H¹_k} − 2‖v‖²_{L²}` (unit coefficients) makes the
//! Schatz precondition `‖e‖_{L²} ≤ ½‖e‖_{H¹_k}`, which the inequality
//! guarantees once `C_cont η̂ ≤ ½`. Errors against the manufactured solution
//! itself are reported alongside.

use std::sync::Arc;

use crate::assembly::{assemble_global, assemble_load, assemble_norm_matrices, CoefficientSet};
use crate::coarse::{
    estimate_eta, CoarseOperators, CoarseSpace, EstimateMode, FineProblem, H1kProjection,
};
use crate::experiment::ProblemSpec;
use crate::linalg::{vector, Factorization, Metric};
use crate::meshfe::{ExactField, FeSpace, Mesh, Rect, Side};
use crate::{Error, Result, C64};

use super::continuity_constant;

/// Largest `C_cont η̂` for which the Schatz precondition is guaranteed.
pub const SCHATZ_GATE: f64 = 0.5;

type Field = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;
type GradField = Arc<dyn Fn([f64; 2]) -> [C64; 2] + Send + Sync>;

/// A closed-form solution of `−k⁻²Δu − c⁻²u = f` with impedance data.
#[derive(Clone)]
pub struct Manufactured {
    pub name: &'static str,
    pub k: f64,
    u: Field,
    grad: GradField,
    laplacian: Field,
    source: Field,
}

impl std::fmt::Debug for Manufactured {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Manufactured")
            .field("name", &self.name)
            .field("k", &self.k)
            .finish()
    }
}

impl Manufactured {
    /// `exp(i k d·x)` with `|d| = 1` after normalisation; source zero.
    pub fn plane_wave(k: f64, dir: [f64; 2]) -> Self {
        let n = dir[0].hypot(dir[1]);
        let d = [dir[0] / n, dir[1] / n];
        let u = move |x: [f64; 2]| C64::from_polar(1.0, k * (d[0] * x[0] + d[1] * x[1]));
        Self {
            name: "plane_wave",
            k,
            u: Arc::new(u),
            grad: Arc::new(move |x| {
                let v = u(x) * C64::new(0.0, k);
                [v * d[0], v * d[1]]
            }),
            laplacian: Arc::new(move |x| u(x) * (-k * k)),
            source: Arc::new(|_| C64::new(0.0, 0.0)),
        }
    }

    /// `16 x(1−x) y(1−y)`, a non-oscillatory control, with the matching source.
    pub fn bubble(k: f64) -> Self {
        let u = |x: [f64; 2]| 16.0 * x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let lap = |x: [f64; 2]| -32.0 * (x[1] * (1.0 - x[1]) + x[0] * (1.0 - x[0]));
        Self {
            name: "bubble",
            k,
            u: Arc::new(move |x| C64::new(u(x), 0.0)),
            grad: Arc::new(|x| {
                [
                    C64::new(16.0 * (1.0 - 2.0 * x[0]) * x[1] * (1.0 - x[1]), 0.0),
                    C64::new(16.0 * x[0] * (1.0 - x[0]) * (1.0 - 2.0 * x[1]), 0.0),
                ]
            }),
            laplacian: Arc::new(move |x| C64::new(lap(x), 0.0)),
            source: Arc::new(move |x| C64::new(-lap(x) / (k * k) - u(x), 0.0)),
        }
    }

    /// Replaces the source term.
    pub fn with_source(mut self, f: impl Fn([f64; 2]) -> C64 + Send + Sync + 'static) -> Self {
        self.source = Arc::new(f);
        self
    }

    /// Largest `|−k⁻²Δu − c⁻²u − f|` at quadrature points, relative to
    /// `max |u|`. Requires `A = I` and `B = 0`.
    pub fn strong_residual(&self, space: &FeSpace, coeffs: &CoefficientSet) -> Result<f64> {
        let rule = space.quadrature();
        let k2 = 1.0 / (self.k * self.k);
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let (mut worst, mut scale): (f64, f64) = (0.0, 0.0);
        for t in 0..space.mesh.n_elements() {
            let map = space.mesh.element_map(t);
            for r in &rule.points {
                let x = map.point(*r);
                let c = coeffs.eval(x)?;
                if c.a != [[one, zero], [zero, one]] || c.b != [zero; 2] {
                    return Err(Error::InvalidArgument(
                        "manufactured solutions assume unit diffusion and no first-order term"
                            .into(),
                    ));
                }
                let u = (self.u)(x);
                let res = -(self.laplacian)(x) * k2 - c.inv_c2 * u - (self.source)(x);
                worst = worst.max(res.norm());
                scale = scale.max(u.norm());
            }
        }
        Ok(worst / scale.max(f64::MIN_POSITIVE))
    }

    /// Errors with [`Error::ManufacturedMismatch`] when the strong residual exceeds `tol`.
    pub fn check(&self, space: &FeSpace, coeffs: &CoefficientSet, tol: f64) -> Result<()> {
        let residual = self.strong_residual(space, coeffs)?;
        if residual > tol {
            return Err(Error::ManufacturedMismatch {
                residual,
                tolerance: tol,
            });
        }
        Ok(())
    }

    /// `∫ f φ_i + ∫_∂Ω (k⁻²∂_n u − i k⁻¹ θ u) φ_i`.
    pub fn load(&self, space: &FeSpace, coeffs: &CoefficientSet) -> Result<Vec<C64>> {
        let k = self.k;
        let g = |x: [f64; 2], side: Side| {
            let n = side.normal();
            let gu = (self.grad)(x);
            let theta = coeffs
                .eval_theta(x, side)
                .unwrap_or(C64::new(f64::NAN, 0.0));
            (gu[0] * n[0] + gu[1] * n[1]) / (k * k) - C64::new(0.0, 1.0 / k) * theta * (self.u)(x)
        };
        let f = |x: [f64; 2]| (self.source)(x);
        assemble_load(space, &f, Some(&g))
    }
}

impl ExactField for Manufactured {
    fn value(&self, x: [f64; 2]) -> C64 {
        (self.u)(x)
    }

    fn grad(&self, x: [f64; 2]) -> [C64; 2] {
        (self.grad)(x)
    }
}

/// One coarse level of the experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchatzLevel {
    pub coarse_cells: usize,
    pub h_coarse: f64,
    pub eta: f64,
    /// `‖u_h − Q_0 u_h‖_{L²}`.
    pub l2_error: f64,
    /// `‖u_h − Q_0 u_h‖_{H¹_k}`.
    pub h1_error: f64,
    /// `‖u_h − Π_0 u_h‖_{H¹_k}`.
    pub best_h1_error: f64,
    /// `h1_error / best_h1_error`, taken as one when both vanish.
    pub quasi_optimality: f64,
    /// `‖u − Q_0 u_h‖` in `L²` and `H¹_k` against the manufactured solution.
    pub exact_l2_error: f64,
    pub exact_h1_error: f64,
    /// `C_cont η̂ ≤ ½`.
    pub under_threshold: bool,
    /// `‖e‖_{L²} ≤ C_cont η̂ ‖e‖_{H¹_k}`.
    pub qos_holds: bool,
    /// `quasi_optimality ≤ 2 C_cont · 1.2`.
    pub quasi_optimal: bool,
}

/// Outcome of [`schatz_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct SchatzReport {
    pub solution: &'static str,
    pub c_cont: f64,
    /// Fine Galerkin error against the manufactured solution, `L²` and `H¹_k`.
    pub fine_l2_error: f64,
    pub fine_h1_error: f64,
    pub levels: Vec<SchatzLevel>,
}

impl SchatzReport {
    /// Every level under the threshold satisfies both inequalities.
    pub fn passed(&self) -> bool {
        self.levels
            .iter()
            .filter(|l| l.under_threshold)
            .all(|l| l.qos_holds && l.quasi_optimal)
    }
}

fn h1k(k: f64, l2: f64, semi: f64) -> f64 {
    (semi * semi / (k * k) + l2 * l2).sqrt()
}

/// Runs the experiment on the fine space of `spec` for each coarse cell count in `levels`.
pub fn schatz_experiment(
    spec: &ProblemSpec,
    levels: &[usize],
    solution: &Manufactured,
    mode: EstimateMode,
) -> Result<SchatzReport> {
    spec.validate()?;
    if !spec.config.is_impedance() {
        return Err(Error::InvalidArgument(
            "the manufactured experiment needs impedance truncation".into(),
        ));
    }
    let k = spec.k;
    let rect = Rect::unit_square();
    let coeffs = spec.coefficients()?;
    let mesh = Arc::new(Mesh::structured(rect, spec.fine_cells, spec.fine_cells)?);
    let space = FeSpace::new(mesh, spec.degree, spec.config.global_dirichlet())?;
    solution.check(&space, &coeffs, 1e-8)?;
    let a = assemble_global(&space, &coeffs, &spec.config)?;
    let norms = assemble_norm_matrices(&space, k)?;
    let coords = space.dof_coords();
    let d = Metric::with_coordinates(Arc::new(norms.d.clone()), &coords)?;
    let m = Metric::with_coordinates(Arc::new(norms.m.clone()), &coords)?;
    let lu = Factorization::with_coordinates(&a, &coords)?;
    let uh = lu.solve(&solution.load(&space, &coeffs)?);
    let (fl2, fsemi) = space.error_norms(&space.expand(&uh), solution);
    let c_cont = continuity_constant(&a, &d, mode)?;
    let fine = FineProblem {
        a: &a,
        lu: &lu,
        m: &m,
        d: &d,
    };
    let dmat = Arc::new(norms.d.clone());
    let mut out = Vec::with_capacity(levels.len());
    for &nc in levels {
        if nc == 0 || !spec.fine_cells.is_multiple_of(nc) {
            return Err(Error::NotNested(format!(
                "{nc} coarse cells do not divide {}",
                spec.fine_cells
            )));
        }
        let coarse = CoarseSpace::build(&space, Arc::new(Mesh::structured(rect, nc, nc)?))?;
        let ops = CoarseOperators::new(&coarse, &a)?;
        let proj = H1kProjection::new(&coarse, dmat.clone())?;
        let eta = estimate_eta(&fine, &proj, mode)?.value;
        let uc = ops.apply_q0(&a, &uh);
        let e = vector::sub(&uh, &uc);
        let (l2, h1) = (m.norm(&e), d.norm(&e));
        let best = d.norm(&vector::sub(&uh, &proj.apply(&uh)));
        let tiny = 1e-12 * d.norm(&uh);
        let qo = if best <= tiny {
            if h1 <= tiny {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            h1 / best
        };
        let (xl2, xsemi) = space.error_norms(&space.expand(&uc), solution);
        out.push(SchatzLevel {
            coarse_cells: nc,
            h_coarse: 1.0 / nc as f64,
            eta,
            l2_error: l2,
            h1_error: h1,
            best_h1_error: best,
            quasi_optimality: qo,
            exact_l2_error: xl2,
            exact_h1_error: h1k(k, xl2, xsemi),
            under_threshold: c_cont * eta <= SCHATZ_GATE,
            qos_holds: l2 <= c_cont * eta * h1 * (1.0 + 1e-8) + tiny,
            quasi_optimal: qo <= 2.0 * c_cont * 1.2,
        });
    }
    Ok(SchatzReport {
        solution: solution.name,
        c_cont,
        fine_l2_error: fl2,
        fine_h1_error: h1k(k, fl2, fsemi),
        levels: out,
    })
}
