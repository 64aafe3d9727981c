//! Structured nested triangle meshes and Lagrange finite-element spaces.
//!
//! Every mesh is a uniform `nx × ny` grid of rectangular cells on an
//! axis-aligned rectangle, each cell split along its south-west/north-east
//! diagonal. With this diagonal convention one uniform red refinement of a
//! level is exactly the grid with twice as many cells per side, so nesting
//! holds by construction and every coarse triangle is the union of four
//! children.

mod mesh;
mod quadrature;
mod space;

pub use mesh::{
    check_nested, BoundaryFacet, BoxEdge, CellBox, ElementMap, Mesh, MeshHierarchy, Rect, Side,
    SideSet,
};
pub use quadrature::{gauss_legendre_unit, TriangleRule};
pub use space::{DofMap, ExactField, FeSpace, NodalField};

use crate::C64;

/// Point-evaluable complex function, with its gradient when available.
pub trait PointFunction: Sync {
    fn value(&self, x: [f64; 2]) -> C64;
}

impl<F> PointFunction for F
where
    F: Fn([f64; 2]) -> C64 + Sync,
{
    fn value(&self, x: [f64; 2]) -> C64 {
        self(x)
    }
}
