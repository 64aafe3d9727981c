use std::fmt;
use std::sync::Arc;

use crate::meshfe::{Rect, Side, SideSet};
use crate::{Error, Result, C64};

pub type ScalarField = Arc<dyn Fn([f64; 2]) -> C64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn([f64; 2]) -> [C64; 2] + Send + Sync>;
pub type TensorField = Arc<dyn Fn([f64; 2]) -> [[C64; 2]; 2] + Send + Sync>;
pub type BoundaryField = Arc<dyn Fn([f64; 2], Side) -> C64 + Send + Sync>;

/// Coefficients of
/// `a(u, v) = ∫ k⁻² (A∇u)·∇v̄ + k⁻¹ (B·∇u) v̄ − c⁻² u v̄ − i k⁻¹ ∫_∂Ω θ u v̄`.
///
/// `inv_c2` stores `c⁻²` directly.
#[derive(Clone)]
pub struct CoefficientSet {
    pub k: f64,
    pub a: TensorField,
    pub b: Option<VectorField>,
    pub inv_c2: ScalarField,
    pub theta: BoundaryField,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("k", &self.k)
            .field("has_b", &self.b.is_some())
            .finish_non_exhaustive()
    }
}

/// Coefficients evaluated at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoefficients {
    pub a: [[C64; 2]; 2],
    pub b: [C64; 2],
    pub inv_c2: C64,
}

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

impl CoefficientSet {
    /// `A = I`, `B = 0`, `c = 1`, `θ = 1`.
    pub fn helmholtz(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        Ok(Self {
            k,
            a: Arc::new(|_| [[one(), zero()], [zero(), one()]]),
            b: None,
            inv_c2: Arc::new(|_| one()),
            theta: Arc::new(|_, _| one()),
        })
    }

    pub fn with_a(mut self, a: impl Fn([f64; 2]) -> [[C64; 2]; 2] + Send + Sync + 'static) -> Self {
        self.a = Arc::new(a);
        self
    }

    pub fn with_b(mut self, b: impl Fn([f64; 2]) -> [C64; 2] + Send + Sync + 'static) -> Self {
        self.b = Some(Arc::new(b));
        self
    }

    pub fn with_inv_c2(mut self, c: impl Fn([f64; 2]) -> C64 + Send + Sync + 'static) -> Self {
        self.inv_c2 = Arc::new(c);
        self
    }

    pub fn with_theta(mut self, t: impl Fn([f64; 2], Side) -> C64 + Send + Sync + 'static) -> Self {
        self.theta = Arc::new(t);
        self
    }

    /// Coefficients of the adjoint form `a*(u, v) = conj(a(v, u))`.
    ///
    /// Only available without a first-order term, since its adjoint is not
    /// of the same form without integrating by parts.
    pub fn adjoint(&self) -> Result<Self> {
        if self.b.is_some() {
            return Err(Error::InvalidArgument(
                "adjoint coefficients require B = 0".into(),
            ));
        }
        let a = self.a.clone();
        let c = self.inv_c2.clone();
        let t = self.theta.clone();
        Ok(Self {
            k: self.k,
            a: Arc::new(move |x| {
                let m = a(x);
                [
                    [m[0][0].conj(), m[1][0].conj()],
                    [m[0][1].conj(), m[1][1].conj()],
                ]
            }),
            b: None,
            inv_c2: Arc::new(move |x| c(x).conj()),
            theta: Arc::new(move |x, s| -t(x, s).conj()),
        })
    }

    /// Evaluates the volume coefficients, rejecting non-finite values.
    pub fn eval(&self, x: [f64; 2]) -> Result<PointCoefficients> {
        let a = (self.a)(x);
        let b = self.b.as_ref().map_or([zero(), zero()], |b| b(x));
        let inv_c2 = (self.inv_c2)(x);
        let finite = a
            .iter()
            .flatten()
            .chain(&b)
            .chain(std::iter::once(&inv_c2))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFiniteCoefficient { x: x[0], y: x[1] });
        }
        Ok(PointCoefficients { a, b, inv_c2 })
    }

    pub fn eval_theta(&self, x: [f64; 2], side: Side) -> Result<C64> {
        let t = (self.theta)(x, side);
        if !t.is_finite() {
            return Err(Error::NonFiniteCoefficient { x: x[0], y: x[1] });
        }
        Ok(t)
    }
}

/// Smallest eigenvalue of the Hermitian part of a 2×2 complex matrix.
pub fn min_hermitian_eigenvalue(m: [[C64; 2]; 2]) -> f64 {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = 0.5 * (m[0][1] + m[1][0].conj());
    0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt()
}

/// Domain truncation and the matching local boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Impedance condition on ∂Ω; functions in H¹(Ω).
    Impedance,
    /// Cartesian PML of the given width and strength in front of a
    /// homogeneous Dirichlet condition on ∂Ω; functions in H¹₀(Ω).
    CartesianPml { width: f64, strength: f64 },
}

/// Boundary handling for the global and local problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConfig {
    pub truncation: Truncation,
    /// `θ_ℓ` on local boundaries ∂Ω_ℓ∖∂Ω in impedance mode.
    pub local_theta: C64,
}

impl ProblemConfig {
    pub fn impedance() -> Self {
        Self {
            truncation: Truncation::Impedance,
            local_theta: one(),
        }
    }

    pub fn pml(width: f64, strength: f64) -> Self {
        Self {
            truncation: Truncation::CartesianPml { width, strength },
            local_theta: one(),
        }
    }

    /// Configuration of the adjoint problem: the local impedance
    /// coefficient maps to `−θ̄_ℓ` like the global one.
    pub fn adjoint(&self) -> Self {
        Self {
            local_theta: -self.local_theta.conj(),
            ..*self
        }
    }

    pub fn is_impedance(&self) -> bool {
        matches!(self.truncation, Truncation::Impedance)
    }

    /// Sides with a homogeneous Dirichlet condition on the global problem.
    pub fn global_dirichlet(&self) -> SideSet {
        if self.is_impedance() {
            SideSet::NONE
        } else {
            SideSet::ALL
        }
    }

    /// Local boundary sides (off ∂Ω) carrying a Dirichlet condition.
    pub fn local_dirichlet(&self) -> SideSet {
        self.global_dirichlet()
    }

    pub fn validate(&self, rect: &Rect) -> Result<()> {
        if let Truncation::CartesianPml { width, strength } = self.truncation {
            if !(width.is_finite() && width > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "PML width must be positive, got {width}"
                )));
            }
            if !(strength.is_finite() && strength >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "PML strength must be non-negative, got {strength}"
                )));
            }
            if 2.0 * width >= rect.width().min(rect.height()) {
                return Err(Error::InvalidArgument(format!(
                    "PML layers of width {width} leave no interior region"
                )));
            }
        }
        if !self.local_theta.is_finite() {
            return Err(Error::InvalidArgument(
                "local impedance coefficient is not finite".into(),
            ));
        }
        Ok(())
    }
}
