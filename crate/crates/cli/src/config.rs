//! Run configuration read from TOML, and its translation into one problem
//! description per wavenumber.
//!
//! Lengths in the `[decomposition]` section are multiples of `1/k`, so a
//! single file describes a whole k-sweep at fixed wavelength-relative
//! geometry. Every check happens here, before anything is assembled.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use hybrid_schwarz::assembly::ProblemConfig;
use hybrid_schwarz::decomp::MIN_EXTENSION;
use hybrid_schwarz::experiment::{Medium, ProblemSpec};
use hybrid_schwarz::krylov::InnerProduct;
use hybrid_schwarz::precond::PrecondSide;

/// A configuration problem, tagged with the offending field.
#[derive(Debug, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn bad(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Solve,
    Defect,
    Constants,
    Schatz,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationKind {
    Impedance,
    Pml,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediumKind {
    Homogeneous,
    SmoothBump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SideKind {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerKind {
    Euclidean,
    Dk,
    DkInv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub k: Vec<f64>,
    pub degree: usize,
    /// Fine mesh resolution `2π/(kh)`; exclusive with `h`.
    pub points_per_wavelength: Option<f64>,
    pub h: Option<f64>,
    /// `H_coarse / h`.
    #[serde(default = "default_c_coarse")]
    pub c_coarse: usize,
    #[serde(default = "default_truncation")]
    pub truncation: TruncationKind,
    pub pml_width: Option<f64>,
    pub pml_strength: Option<f64>,
    #[serde(default = "default_medium")]
    pub medium: MediumKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSection {
    /// Subdomain diameter times k.
    pub diameter: f64,
    /// Overlap extension times k.
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub side: SideKind,
    pub inner: InnerKind,
    pub tol: f64,
    pub max_iter: usize,
    /// Incidence direction of the plane-wave load.
    pub direction: [f64; 2],
    /// Lanczos steps per operator-norm estimate.
    pub samples: usize,
    /// Random probes of the `I − Q` audit.
    pub probes: usize,
    /// Coarse cell counts of the Schatz experiment; every divisor of the
    /// fine cell count from 2 up when empty.
    pub schatz_levels: Vec<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            side: SideKind::Left,
            inner: InnerKind::Dk,
            tol: 1e-6,
            max_iter: 500,
            direction: [0.6, 0.8],
            samples: 200,
            probes: 100,
            schatz_levels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub pipeline: Pipeline,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    pub decomposition: DecompositionSection,
    #[serde(default)]
    pub solver: SolverSection,
    pub run: RunSection,
}

fn default_c_coarse() -> usize {
    2
}

fn default_truncation() -> TruncationKind {
    TruncationKind::Impedance
}

fn default_medium() -> MediumKind {
    MediumKind::Homogeneous
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// The problem derived for one wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct Derived {
    pub spec: ProblemSpec,
    /// Points per wavelength actually used after rounding.
    pub points_per_wavelength: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| bad("config", e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn side(&self) -> PrecondSide {
        match self.solver.side {
            SideKind::Left => PrecondSide::Left,
            SideKind::Right => PrecondSide::Right,
        }
    }

    pub fn inner(&self) -> InnerProduct {
        match self.solver.inner {
            InnerKind::Euclidean => InnerProduct::Euclidean,
            InnerKind::Dk => InnerProduct::Dk,
            InnerKind::DkInv => InnerProduct::DkInv,
        }
    }

    /// Validates everything and derives one problem per wavenumber.
    pub fn derive(&self) -> Result<Vec<Derived>, ConfigError> {
        let p = &self.problem;
        if p.k.is_empty() {
            return Err(bad("problem.k", "at least one wavenumber is required"));
        }
        if let Some(k) = p.k.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(bad(
                "problem.k",
                format!("wavenumbers must be positive, got {k}"),
            ));
        }
        if self.run.pipeline == Pipeline::Sweep && p.k.len() < 2 {
            return Err(bad("problem.k", "a sweep needs at least two wavenumbers"));
        }
        if !(1..=2).contains(&p.degree) {
            return Err(bad(
                "problem.degree",
                format!("must be 1 or 2, got {}", p.degree),
            ));
        }
        if p.c_coarse == 0 {
            return Err(bad("problem.c_coarse", "must be positive"));
        }
        let config = match p.truncation {
            TruncationKind::Impedance => {
                if p.pml_width.is_some() || p.pml_strength.is_some() {
                    return Err(bad(
                        "problem.pml_width",
                        "only valid with truncation = \"pml\"",
                    ));
                }
                ProblemConfig::impedance()
            }
            TruncationKind::Pml => {
                let width = p
                    .pml_width
                    .ok_or_else(|| bad("problem.pml_width", "required for a PML"))?;
                let strength = p
                    .pml_strength
                    .ok_or_else(|| bad("problem.pml_strength", "required for a PML"))?;
                if !(width > 0.0 && width < 0.5) {
                    return Err(bad(
                        "problem.pml_width",
                        format!("must lie in (0, 0.5), got {width}"),
                    ));
                }
                if !(strength > 0.0 && strength.is_finite()) {
                    return Err(bad(
                        "problem.pml_strength",
                        format!("must be positive, got {strength}"),
                    ));
                }
                ProblemConfig::pml(width, strength)
            }
        };
        let d = &self.decomposition;
        if !(d.diameter > 0.0 && d.diameter.is_finite()) {
            return Err(bad(
                "decomposition.diameter",
                format!("must be positive, got {}", d.diameter),
            ));
        }
        if !(d.overlap > 0.0 && d.overlap.is_finite()) {
            return Err(bad(
                "decomposition.overlap",
                format!("must be positive, got {}", d.overlap),
            ));
        }
        let s = &self.solver;
        if !(s.tol > 0.0 && s.tol < 1.0) {
            return Err(bad(
                "solver.tol",
                format!("must lie in (0, 1), got {}", s.tol),
            ));
        }
        if s.max_iter == 0 {
            return Err(bad("solver.max_iter", "must be positive"));
        }
        if s.samples == 0 {
            return Err(bad("solver.samples", "must be positive"));
        }
        if s.probes == 0 {
            return Err(bad("solver.probes", "must be positive"));
        }
        if s.direction[0].hypot(s.direction[1]) == 0.0 || !s.direction.iter().all(|v| v.is_finite())
        {
            return Err(bad("solver.direction", "must be a finite nonzero vector"));
        }
        if self.run.pipeline == Pipeline::Schatz
            && (p.truncation != TruncationKind::Impedance || p.medium != MediumKind::Homogeneous)
        {
            return Err(bad(
                "run.pipeline",
                "the Schatz pipeline uses manufactured plane waves and needs a homogeneous impedance problem",
            ));
        }
        p.k.iter().map(|&k| self.derive_one(k, config)).collect()
    }

    fn derive_one(&self, k: f64, config: ProblemConfig) -> Result<Derived, ConfigError> {
        let p = &self.problem;
        let h = match (p.points_per_wavelength, p.h) {
            (Some(ppw), None) if ppw > 0.0 && ppw.is_finite() => {
                2.0 * std::f64::consts::PI / (k * ppw)
            }
            (Some(ppw), None) => {
                return Err(bad(
                    "problem.points_per_wavelength",
                    format!("must be positive, got {ppw}"),
                ))
            }
            (None, Some(h)) if h > 0.0 && h <= 1.0 => h,
            (None, Some(h)) => {
                return Err(bad("problem.h", format!("must lie in (0, 1], got {h}")))
            }
            _ => {
                return Err(bad(
                    "problem.points_per_wavelength",
                    "give exactly one of points_per_wavelength and h",
                ))
            }
        };
        // fine cells: the smallest multiple of C_coarse resolving h
        let c = p.c_coarse;
        let fine = ((1.0 / h - 1e-9).ceil() as usize).div_ceil(c).max(1) * c;
        let per_side = ((k / self.decomposition.diameter).round() as usize).max(1);
        let extension = (self.decomposition.overlap / k * fine as f64).round() as usize;
        if per_side > fine {
            return Err(bad(
                "decomposition.diameter",
                format!("{per_side} subdomains per side on {fine} cells at k = {k}"),
            ));
        }
        if per_side > 1 {
            if extension < MIN_EXTENSION {
                return Err(bad(
                    "decomposition.overlap",
                    format!("{extension} cells at k = {k}; at least {MIN_EXTENSION} are needed"),
                ));
            }
            if fine / per_side < extension + 1 {
                return Err(bad(
                    "decomposition.overlap",
                    format!(
                        "extension of {extension} cells exceeds the {}-cell cores at k = {k}",
                        fine / per_side
                    ),
                ));
            }
        }
        let medium = match p.medium {
            MediumKind::Homogeneous => Medium::Homogeneous,
            MediumKind::SmoothBump => Medium::SmoothBump,
        };
        let spec = ProblemSpec::impedance(k, p.degree, fine, fine / c, per_side, extension)
            .with_config(config)
            .with_medium(medium);
        spec.validate().map_err(|e| bad("problem", e.to_string()))?;
        for &level in &self.solver.schatz_levels {
            if level == 0 || !fine.is_multiple_of(level) {
                return Err(bad(
                    "solver.schatz_levels",
                    format!("{level} coarse cells do not divide {fine} fine cells at k = {k}"),
                ));
            }
        }
        Ok(Derived {
            points_per_wavelength: 2.0 * std::f64::consts::PI * fine as f64 / k,
            spec,
        })
    }
}
