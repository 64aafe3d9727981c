//! Cartesian perfectly matched layer folded into `A` and `c`.
//!
//! Stretching `x_j ↦ x_j + (i/k)∫σ_j` turns the Helmholtz operator into one
//! with `A = diag(s₂/s₁, s₁/s₂)` and `c⁻² ↦ c⁻² s₁ s₂`, where
//! `s_j = 1 + (i/k) σ_j(x_j)`. The absorption profile is a quadratic ramp
//! `σ_j = σ̄ (d/w)²` with `d` the depth into a layer of width `w`.

use std::sync::Arc;

use super::coefficients::CoefficientSet;
use crate::meshfe::Rect;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmlLayer {
    pub rect: Rect,
    pub k: f64,
    pub width: f64,
    pub strength: f64,
}

impl PmlLayer {
    pub fn new(rect: Rect, k: f64, width: f64, strength: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || !(strength.is_finite() && strength >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "PML needs width > 0 and strength >= 0, got {width} and {strength}"
            )));
        }
        if 2.0 * width >= rect.width().min(rect.height()) {
            return Err(Error::InvalidArgument(format!(
                "PML layers of width {width} overlap the interior region"
            )));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "wavenumber must be positive, got {k}"
            )));
        }
        Ok(Self {
            rect,
            k,
            width,
            strength,
        })
    }

    /// Depth into the layer along one axis, zero in the interior.
    fn depth(&self, lo: f64, hi: f64, t: f64) -> f64 {
        (lo + self.width - t)
            .max(t - (hi - self.width))
            .max(0.0)
            .min(self.width)
    }

    /// Absorption `σ_j` at coordinate `t` along axis `j` (0 = x, 1 = y).
    pub fn sigma(&self, axis: usize, t: f64) -> f64 {
        let d = if axis == 0 {
            self.depth(self.rect.x0, self.rect.x1, t)
        } else {
            self.depth(self.rect.y0, self.rect.y1, t)
        };
        self.strength * (d / self.width).powi(2)
    }

    /// `s_j = 1 + (i/k) σ_j`.
    pub fn stretch(&self, axis: usize, t: f64) -> C64 {
        C64::new(1.0, self.sigma(axis, t) / self.k)
    }

    /// `∫ σ dt` across one full layer.
    pub fn integrated_absorption(&self) -> f64 {
        self.strength * self.width / 3.0
    }

    /// Coefficients of the stretched problem; `base` supplies `c⁻²`.
    pub fn coefficients(&self, base: &CoefficientSet) -> Result<CoefficientSet> {
        if (base.k - self.k).abs() > 0.0 {
            return Err(Error::InvalidArgument(
                "PML and coefficient wavenumbers differ".into(),
            ));
        }
        let layer = *self;
        let c = base.inv_c2.clone();
        let zero = C64::new(0.0, 0.0);
        Ok(CoefficientSet {
            k: self.k,
            a: Arc::new(move |x| {
                let (s1, s2) = (layer.stretch(0, x[0]), layer.stretch(1, x[1]));
                [[s2 / s1, zero], [zero, s1 / s2]]
            }),
            b: None,
            inv_c2: Arc::new(move |x| c(x) * layer.stretch(0, x[0]) * layer.stretch(1, x[1])),
            theta: base.theta.clone(),
        })
    }
}

/// PML coefficients for a rectangle with unit sound speed.
pub fn pml_coefficients(rect: Rect, k: f64, width: f64, strength: f64) -> Result<CoefficientSet> {
    PmlLayer::new(rect, k, width, strength)?.coefficients(&CoefficientSet::helmholtz(k)?)
}
