use std::fmt::Write as _;
use std::sync::Arc;

use crate::{Error, Result};

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let ok = [x0, y0, x1, y1].iter().all(|v| v.is_finite()) && x1 > x0 && y1 > y0;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    pub fn unit_square() -> Self {
        Self {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol
            && p[0] <= self.x1 + tol
            && p[1] >= self.y0 - tol
            && p[1] <= self.y1 + tol
    }
}

/// A side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    fn bit(self) -> u8 {
        match self {
            Side::Bottom => 1,
            Side::Right => 2,
            Side::Top => 4,
            Side::Left => 8,
        }
    }

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

/// A set of rectangle sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct SideSet(u8);

impl SideSet {
    pub const NONE: SideSet = SideSet(0);
    pub const ALL: SideSet = SideSet(15);

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn with(self, side: Side) -> Self {
        SideSet(self.0 | side.bit())
    }

    pub fn without(self, side: Side) -> Self {
        SideSet(self.0 & !side.bit())
    }

    pub fn union(self, other: SideSet) -> Self {
        SideSet(self.0 | other.0)
    }

    pub fn intersects(self, other: SideSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

impl FromIterator<Side> for SideSet {
    fn from_iter<I: IntoIterator<Item = Side>>(iter: I) -> Self {
        iter.into_iter().fold(SideSet::NONE, SideSet::with)
    }
}

/// Boundary edge of the mesh with the element it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryFacet {
    pub vertices: [usize; 2],
    pub side: Side,
    pub element: usize,
}

/// Affine map from the reference triangle onto an element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: [f64; 2],
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jac: [[f64; 2]; 2],
    /// `J^{-T}`, maps reference gradients to physical ones.
    pub jinv_t: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementMap {
    pub fn new(v: [[f64; 2]; 3]) -> Self {
        let jac = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        // J^{-1} = [[d, -b], [-c, a]] / det, transposed
        let jinv_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        Self {
            origin: v[0],
            jac,
            jinv_t,
            det,
        }
    }

    pub fn point(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1],
            self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }
}

/// Structured triangulation of a rectangle.
///
/// Cell `(i, j)` spans `[x0 + i hx, x0 + (i+1) hx] × [y0 + j hy, y0 + (j+1) hy]`
/// and holds triangles `2 (j nx + i)` (below the diagonal) and `2 (j nx + i) + 1`
/// (above it). Vertex `(i, j)` has index `j (nx + 1) + i`.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub rect: Rect,
    pub nx: usize,
    pub ny: usize,
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryFacet>,
}

impl Mesh {
    pub fn structured(rect: Rect, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidArgument(format!(
                "mesh needs at least one cell per side, got {nx} x {ny}"
            )));
        }
        let hx = rect.width() / nx as f64;
        let hy = rect.height() / ny as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let x = if i == nx {
                    rect.x1
                } else {
                    rect.x0 + i as f64 * hx
                };
                let y = if j == ny {
                    rect.y1
                } else {
                    rect.y0 + j as f64 * hy
                };
                vertices.push([x, y]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                triangles.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                triangles.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        let tri = |i: usize, j: usize, upper: usize| 2 * (j * nx + i) + upper;
        let mut boundary = Vec::with_capacity(2 * (nx + ny));
        for i in 0..nx {
            boundary.push(BoundaryFacet {
                vertices: [vid(i, 0), vid(i + 1, 0)],
                side: Side::Bottom,
                element: tri(i, 0, 0),
            });
        }
        for j in 0..ny {
            boundary.push(BoundaryFacet {
                vertices: [vid(nx, j), vid(nx, j + 1)],
                side: Side::Right,
                element: tri(nx - 1, j, 0),
            });
        }
        for i in (0..nx).rev() {
            boundary.push(BoundaryFacet {
                vertices: [vid(i + 1, ny), vid(i, ny)],
                side: Side::Top,
                element: tri(i, ny - 1, 1),
            });
        }
        for j in (0..ny).rev() {
            boundary.push(BoundaryFacet {
                vertices: [vid(0, j + 1), vid(0, j)],
                side: Side::Left,
                element: tri(0, j, 1),
            });
        }
        Ok(Self {
            rect,
            nx,
            ny,
            vertices,
            triangles,
            boundary,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn hx(&self) -> f64 {
        self.rect.width() / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.rect.height() / self.ny as f64
    }

    /// Largest element diameter (the cell diagonal).
    pub fn h(&self) -> f64 {
        self.hx().hypot(self.hy())
    }

    /// Cell `(i, j)` and half (0 lower, 1 upper) of element `t`.
    pub fn cell_of(&self, t: usize) -> (usize, usize, usize) {
        let c = t / 2;
        (c % self.nx, c / self.nx, t % 2)
    }

    pub fn element_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn element_map(&self, t: usize) -> ElementMap {
        ElementMap::new(self.element_vertices(t))
    }

    pub fn element_area(&self, t: usize) -> f64 {
        self.element_map(t).area()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let v = self.element_vertices(t);
        [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ]
    }

    /// Bounding box of element `t`.
    pub fn element_box(&self, t: usize) -> Rect {
        let (i, j, _) = self.cell_of(t);
        let (hx, hy) = (self.hx(), self.hy());
        Rect {
            x0: self.rect.x0 + i as f64 * hx,
            y0: self.rect.y0 + j as f64 * hy,
            x1: self.rect.x0 + (i + 1) as f64 * hx,
            y1: self.rect.y0 + (j + 1) as f64 * hy,
        }
    }

    /// Ratio of diameter to inscribed-circle diameter, maximised over elements.
    pub fn shape_regularity(&self) -> f64 {
        (0..self.n_elements())
            .map(|t| {
                let v = self.element_vertices(t);
                let len = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
                let (l0, l1, l2) = (len(v[0], v[1]), len(v[1], v[2]), len(v[2], v[0]));
                let area = self.element_area(t);
                let inradius = 2.0 * area / (l0 + l1 + l2);
                l0.max(l1).max(l2) / (2.0 * inradius)
            })
            .fold(0.0, f64::max)
    }

    /// Element containing `p` and the reference coordinates of `p` in it.
    ///
    /// Points outside the rectangle are clamped onto it.
    pub fn locate(&self, p: [f64; 2]) -> (usize, [f64; 2]) {
        let u = ((p[0] - self.rect.x0) / self.hx()).clamp(0.0, self.nx as f64);
        let v = ((p[1] - self.rect.y0) / self.hy()).clamp(0.0, self.ny as f64);
        let i = (u.floor() as usize).min(self.nx - 1);
        let j = (v.floor() as usize).min(self.ny - 1);
        let s = u - i as f64;
        let t = v - j as f64;
        let cell = 2 * (j * self.nx + i);
        if t <= s {
            (cell, [s - t, t])
        } else {
            (cell + 1, [s, t - s])
        }
    }

    /// Side tags of a vertex (empty for interior vertices).
    pub fn vertex_sides(&self, v: usize) -> SideSet {
        let (i, j) = (v % (self.nx + 1), v / (self.nx + 1));
        lattice_sides(i, j, self.nx, self.ny)
    }

    /// Plain-text export: one `v x y` line per vertex, one `t a b c` line per element.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# vertices {} elements {}",
            self.n_vertices(),
            self.n_elements()
        );
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.17e} {:.17e}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

/// Half-open box of mesh cells `[i0, i1) × [j0, j1)`; as a region it is the
/// union of the triangles of those cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellBox {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

/// Edge on the boundary of a [`CellBox`] region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxEdge {
    pub element: usize,
    /// Local vertex indices of the edge within the element.
    pub local: [usize; 2],
    /// Side of the box the edge lies on.
    pub side: Side,
    /// Whether the edge also lies on the mesh boundary.
    pub on_domain_boundary: bool,
}

impl CellBox {
    pub fn full(mesh: &Mesh) -> Self {
        Self {
            i0: 0,
            j0: 0,
            i1: mesh.nx,
            j1: mesh.ny,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.i0 >= self.i1 || self.j0 >= self.j1
    }

    pub fn n_cells(&self) -> usize {
        (self.i1 - self.i0) * (self.j1 - self.j0)
    }

    pub fn contains_cell(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    /// Whether the open regions of two boxes intersect.
    pub fn overlaps(&self, other: &CellBox) -> bool {
        self.i0.max(other.i0) < self.i1.min(other.i1)
            && self.j0.max(other.j0) < self.j1.min(other.j1)
    }

    pub fn elements(&self, mesh: &Mesh) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.n_cells());
        for j in self.j0..self.j1 {
            for i in self.i0..self.i1 {
                let c = 2 * (j * mesh.nx + i);
                out.push(c);
                out.push(c + 1);
            }
        }
        out
    }

    pub fn rect(&self, mesh: &Mesh) -> Rect {
        let (hx, hy) = (mesh.hx(), mesh.hy());
        let x = |i: usize| {
            if i == mesh.nx {
                mesh.rect.x1
            } else {
                mesh.rect.x0 + i as f64 * hx
            }
        };
        let y = |j: usize| {
            if j == mesh.ny {
                mesh.rect.y1
            } else {
                mesh.rect.y0 + j as f64 * hy
            }
        };
        Rect {
            x0: x(self.i0),
            y0: y(self.j0),
            x1: x(self.i1),
            y1: y(self.j1),
        }
    }

    /// Sides of the box that lie on the mesh boundary.
    pub fn domain_sides(&self, mesh: &Mesh) -> SideSet {
        let mut s = SideSet::NONE;
        if self.j0 == 0 {
            s = s.with(Side::Bottom);
        }
        if self.i1 == mesh.nx {
            s = s.with(Side::Right);
        }
        if self.j1 == mesh.ny {
            s = s.with(Side::Top);
        }
        if self.i0 == 0 {
            s = s.with(Side::Left);
        }
        s
    }

    /// Boundary edges of the region, counter-clockwise from the bottom-left corner.
    pub fn boundary_edges(&self, mesh: &Mesh) -> Vec<BoxEdge> {
        let dom = self.domain_sides(mesh);
        let tri = |i: usize, j: usize, upper: usize| 2 * (j * mesh.nx + i) + upper;
        let mut out = Vec::new();
        for i in self.i0..self.i1 {
            out.push(BoxEdge {
                element: tri(i, self.j0, 0),
                local: [0, 1],
                side: Side::Bottom,
                on_domain_boundary: dom.contains(Side::Bottom),
            });
        }
        for j in self.j0..self.j1 {
            out.push(BoxEdge {
                element: tri(self.i1 - 1, j, 0),
                local: [1, 2],
                side: Side::Right,
                on_domain_boundary: dom.contains(Side::Right),
            });
        }
        for i in (self.i0..self.i1).rev() {
            out.push(BoxEdge {
                element: tri(i, self.j1 - 1, 1),
                local: [1, 2],
                side: Side::Top,
                on_domain_boundary: dom.contains(Side::Top),
            });
        }
        for j in (self.j0..self.j1).rev() {
            out.push(BoxEdge {
                element: tri(self.i0, j, 1),
                local: [2, 0],
                side: Side::Left,
                on_domain_boundary: dom.contains(Side::Left),
            });
        }
        out
    }

    /// Sides of the closed box a lattice point `(a, b)` (spacing `h/p`) lies on, or
    /// `None` if it is outside the closed box.
    pub fn lattice_position(&self, a: usize, b: usize, p: usize) -> Option<SideSet> {
        let (a0, a1, b0, b1) = (p * self.i0, p * self.i1, p * self.j0, p * self.j1);
        if a < a0 || a > a1 || b < b0 || b > b1 {
            return None;
        }
        let mut s = SideSet::NONE;
        if b == b0 {
            s = s.with(Side::Bottom);
        }
        if a == a1 {
            s = s.with(Side::Right);
        }
        if b == b1 {
            s = s.with(Side::Top);
        }
        if a == a0 {
            s = s.with(Side::Left);
        }
        Some(s)
    }
}

pub(crate) fn lattice_sides(i: usize, j: usize, ni: usize, nj: usize) -> SideSet {
    let mut s = SideSet::NONE;
    if j == 0 {
        s = s.with(Side::Bottom);
    }
    if i == ni {
        s = s.with(Side::Right);
    }
    if j == nj {
        s = s.with(Side::Top);
    }
    if i == 0 {
        s = s.with(Side::Left);
    }
    s
}

/// Sequence of meshes obtained by uniform refinement, coarsest first.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub levels: Vec<Arc<Mesh>>,
}

impl MeshHierarchy {
    /// Base mesh with `n0` cells per side refined `n_levels - 1` times.
    pub fn build(rect: Rect, n0: usize, n_levels: usize) -> Result<Self> {
        if n_levels == 0 {
            return Err(Error::InvalidArgument(
                "hierarchy needs at least one level".into(),
            ));
        }
        let levels = (0..n_levels)
            .map(|m| {
                let n = n0
                    .checked_mul(1usize << m)
                    .ok_or_else(|| Error::InvalidArgument("mesh size overflow".into()))?;
                Mesh::structured(rect, n, n).map(Arc::new)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    pub fn finest(&self) -> &Arc<Mesh> {
        self.levels.last().expect("hierarchy is non-empty")
    }

    pub fn coarsest(&self) -> &Arc<Mesh> {
        &self.levels[0]
    }

    /// Index of the level with `n` cells per side.
    pub fn level_with_cells(&self, n: usize) -> Option<usize> {
        self.levels.iter().position(|m| m.nx == n)
    }

    /// Parent element on level `m - 1` of element `t` on level `m`.
    pub fn parent(&self, m: usize, t: usize) -> Option<usize> {
        if m == 0 || m >= self.levels.len() {
            return None;
        }
        let c = self.levels[m].centroid(t);
        Some(self.levels[m - 1].locate(c).0)
    }
}

/// Checks that every element of `fine` lies inside exactly one element of
/// `coarse` (coarse cells must divide fine cells evenly).
pub fn check_nested(coarse: &Mesh, fine: &Mesh) -> Result<()> {
    if coarse.rect != fine.rect {
        return Err(Error::NotNested("meshes cover different rectangles".into()));
    }
    let ok = |nc: usize, nf: usize| nf.is_multiple_of(nc);
    if !ok(coarse.nx, fine.nx) || !ok(coarse.ny, fine.ny) {
        return Err(Error::NotNested(format!(
            "{}x{} cells do not refine {}x{}",
            fine.nx, fine.ny, coarse.nx, coarse.ny
        )));
    }
    // diagonals only line up when both axes refine by the same factor
    if fine.nx / coarse.nx != fine.ny / coarse.ny {
        return Err(Error::NotNested("unequal refinement factors".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_and_refined_counts() {
        let h = MeshHierarchy::build(Rect::unit_square(), 1, 2).unwrap();
        assert_eq!(h.levels[0].n_elements(), 2);
        assert_eq!(h.levels[0].n_vertices(), 4);
        assert_eq!(h.levels[1].n_elements(), 8);
        assert_eq!(h.levels[1].n_vertices(), 9);
        assert_eq!(h.levels[1].boundary.len(), 8);
    }

    #[test]
    fn children_tile_parents() {
        let rect = Rect::new(-0.5, 0.0, 1.5, 1.0).unwrap();
        let h = MeshHierarchy::build(rect, 3, 3).unwrap();
        for m in 1..3 {
            let mut child_area = vec![0.0; h.levels[m - 1].n_elements()];
            let mut count = vec![0usize; h.levels[m - 1].n_elements()];
            for t in 0..h.levels[m].n_elements() {
                let p = h.parent(m, t).unwrap();
                // all child vertices inside the parent triangle
                for v in h.levels[m].element_vertices(t) {
                    let map = h.levels[m - 1].element_map(p);
                    let d = [v[0] - map.origin[0], v[1] - map.origin[1]];
                    let inv = [
                        [map.jinv_t[0][0], map.jinv_t[1][0]],
                        [map.jinv_t[0][1], map.jinv_t[1][1]],
                    ];
                    let xi = inv[0][0] * d[0] + inv[0][1] * d[1];
                    let eta = inv[1][0] * d[0] + inv[1][1] * d[1];
                    assert!(xi >= -1e-12 && eta >= -1e-12 && xi + eta <= 1.0 + 1e-12);
                }
                child_area[p] += h.levels[m].element_area(t);
                count[p] += 1;
            }
            for (p, a) in child_area.iter().enumerate() {
                assert_eq!(count[p], 4);
                assert!((a - h.levels[m - 1].element_area(p)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn areas_sum_to_domain() {
        let rect = Rect::new(0.0, 0.0, 2.0, 3.0).unwrap();
        let mesh = Mesh::structured(rect, 5, 7).unwrap();
        let total: f64 = (0..mesh.n_elements()).map(|t| mesh.element_area(t)).sum();
        assert!((total - 6.0).abs() < 1e-12);
        assert!(mesh.element_map(0).det > 0.0 && mesh.element_map(1).det > 0.0);
    }

    #[test]
    fn boundary_length_and_normals() {
        let mesh = Mesh::structured(Rect::unit_square(), 4, 4).unwrap();
        let mut len = 0.0;
        for f in &mesh.boundary {
            let a = mesh.vertices[f.vertices[0]];
            let b = mesh.vertices[f.vertices[1]];
            len += (a[0] - b[0]).hypot(a[1] - b[1]);
            assert!(mesh.triangles[f.element].contains(&f.vertices[0]));
            assert!(mesh.triangles[f.element].contains(&f.vertices[1]));
        }
        assert!((len - 4.0).abs() < 1e-14);
    }

    #[test]
    fn locate_round_trips() {
        let mesh = Mesh::structured(Rect::new(0.0, 0.0, 1.0, 2.0).unwrap(), 3, 5).unwrap();
        for &p in &[[0.1, 0.2], [0.99, 1.99], [0.5, 1.0], [0.0, 0.0], [1.0, 2.0]] {
            let (t, r) = mesh.locate(p);
            let q = mesh.element_map(t).point(r);
            assert!((q[0] - p[0]).abs() < 1e-13 && (q[1] - p[1]).abs() < 1e-13);
            assert!(r[0] >= -1e-14 && r[1] >= -1e-14 && r[0] + r[1] <= 1.0 + 1e-14);
        }
    }

    #[test]
    fn text_export_lists_everything() {
        let mesh = Mesh::structured(Rect::unit_square(), 2, 2).unwrap();
        let text = mesh.to_text();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 9);
        assert_eq!(text.lines().filter(|l| l.starts_with("t ")).count(), 8);
    }

    #[test]
    fn box_boundary_matches_mesh_boundary() {
        let mesh = Mesh::structured(Rect::unit_square(), 3, 4).unwrap();
        let edges = CellBox::full(&mesh).boundary_edges(&mesh);
        assert_eq!(edges.len(), mesh.boundary.len());
        for (e, f) in edges.iter().zip(&mesh.boundary) {
            assert_eq!(e.element, f.element);
            assert_eq!(e.side, f.side);
            assert!(e.on_domain_boundary);
            let tri = mesh.triangles[e.element];
            assert_eq!([tri[e.local[0]], tri[e.local[1]]], f.vertices);
        }
        let inner = CellBox {
            i0: 1,
            j0: 1,
            i1: 3,
            j1: 2,
        };
        let edges = inner.boundary_edges(&mesh);
        assert_eq!(edges.len(), 6);
        assert_eq!(edges.iter().filter(|e| e.on_domain_boundary).count(), 1);
        assert_eq!(inner.elements(&mesh).len(), 4);
        assert!(inner.overlaps(&CellBox {
            i0: 2,
            j0: 0,
            i1: 3,
            j1: 2
        }));
        assert!(!inner.overlaps(&CellBox {
            i0: 0,
            j0: 0,
            i1: 1,
            j1: 4
        }));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Rect::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(Mesh::structured(Rect::unit_square(), 0, 1).is_err());
        assert!(MeshHierarchy::build(Rect::unit_square(), 1, 0).is_err());
    }

    #[test]
    fn shape_regularity_is_uniform() {
        let a = Mesh::structured(Rect::unit_square(), 2, 2)
            .unwrap()
            .shape_regularity();
        let b = Mesh::structured(Rect::unit_square(), 16, 16)
            .unwrap()
            .shape_regularity();
        assert!((a - b).abs() < 1e-12);
    }
}
