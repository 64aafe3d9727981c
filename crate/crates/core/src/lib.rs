//! Two-level hybrid Schwarz preconditioning for finite-element discretisations
//! of the high-frequency Helmholtz equation, together with the machinery to
//! measure every constant that the convergence theory of the method consumes.
//!
//! The crate is organised bottom-up:
//!
//! - [`meshfe`]: nested structured triangle meshes and Lagrange spaces (p = 1, 2)
//! - [`linalg`]: complex CSR storage, sparse LU, dense oracle, weighted norms
//! - [`assembly`]: Galerkin matrices of the Helmholtz form, norm matrices, loads
//! - [`decomp`]: overlapping subdomain covers, cutoffs, weighted restrictions
//! - [`coarse`]: nested coarse spaces, `Q_0`, `Π_0` and coarse estimators
//! - [`precond`]: hybrid Schwarz preconditioners and the variational `Q`
//! - [`krylov`]: fixed-point iteration and weighted full GMRES
//! - [`verify`]: constants, the main norm bound and Schatz experiments
//! - [`experiment`]: end-to-end problem construction used by the CLI

pub mod assembly;
pub mod coarse;
pub mod decomp;
mod error;
pub mod experiment;
pub mod krylov;
pub mod linalg;
pub mod meshfe;
pub mod precond;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
