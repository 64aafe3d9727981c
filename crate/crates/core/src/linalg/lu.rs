//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are taken in a fill-reducing order `q`; for each column the sparse
//! triangular solve against the factor built so far is restricted to the
//! reach of the column's pattern (depth-first search in the graph of `L`).
//! Among the candidate rows the pivot is the largest entry, unless the
//! diagonal entry of the symmetrically permuted matrix is within
//! [`PIVOT_TOLERANCE`] of it, in which case the diagonal is kept.

use super::ordering::{minimum_degree, nested_dissection, Ordering};
use super::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// Relative threshold for keeping the diagonal pivot.
pub const PIVOT_TOLERANCE: f64 = 0.1;

/// `P A Q = L U` with `L` unit lower triangular, both factors column-compressed.
#[derive(Debug, Clone)]
pub struct Factorization {
    n: usize,
    /// Column order: step `k` eliminates column `q[k]`.
    q: Vec<usize>,
    /// Row `i` becomes pivot row `pinv[i]`.
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<C64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<C64>,
    growth: f64,
}

impl Factorization {
    /// Factorises with the minimum-degree ordering.
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::with_ordering(a, &Ordering::MinimumDegree)
    }

    /// Factorises with nested dissection on the given node coordinates.
    pub fn with_coordinates(a: &CsrMatrix, coords: &[[f64; 2]]) -> Result<Self> {
        Self::with_ordering(a, &Ordering::NestedDissection(coords.to_vec()))
    }

    pub fn with_ordering(a: &CsrMatrix, ordering: &Ordering) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "factorize requires a square matrix",
                expected: n,
                actual: a.ncols(),
            });
        }
        let q = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::MinimumDegree => minimum_degree(&a.symmetric_pattern()),
            Ordering::NestedDissection(xy) => {
                if xy.len() != n {
                    return Err(Error::DimensionMismatch {
                        context: "ordering coordinates",
                        expected: n,
                        actual: xy.len(),
                    });
                }
                nested_dissection(&a.symmetric_pattern(), xy)
            }
        };
        factor(a, q)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `max |U_ij| / max |A_ij|`.
    pub fn pivot_growth(&self) -> f64 {
        self.growth
    }

    /// Number of stored entries in `L` and `U`.
    pub fn fill(&self) -> usize {
        self.lx.len() + self.ux.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n, "solve dimension");
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        for (i, &v) in b.iter().enumerate() {
            y[self.pinv[i]] = v;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != C64::new(0.0, 0.0) {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let last = self.up[j + 1] - 1;
            y[j] /= self.ux[last];
            let yj = y[j];
            if yj != C64::new(0.0, 0.0) {
                for p in self.up[j]..last {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); self.n];
        for (k, &col) in self.q.iter().enumerate() {
            x[col] = y[k];
        }
        x
    }

    /// Solves `A^H x = b` with the same factors.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        assert_eq!(b.len(), self.n, "solve dimension");
        let mut y: Vec<C64> = self.q.iter().map(|&c| b[c]).collect();
        for j in 0..self.n {
            let last = self.up[j + 1] - 1;
            let mut s = y[j];
            for p in self.up[j]..last {
                s -= self.ux[p].conj() * y[self.ui[p]];
            }
            y[j] = s / self.ux[last].conj();
        }
        for j in (0..self.n).rev() {
            let mut s = y[j];
            for p in self.lp[j] + 1..self.lp[j + 1] {
                s -= self.lx[p].conj() * y[self.li[p]];
            }
            y[j] = s;
        }
        (0..self.n).map(|i| y[self.pinv[i]]).collect()
    }
}

fn factor(a: &CsrMatrix, q: Vec<usize>) -> Result<Factorization> {
    let n = a.nrows();
    // Column access: CSR of A^T is CSC of A.
    let at = a.transpose();
    let amax = a.max_abs();
    const NONE: usize = usize::MAX;
    let mut pinv = vec![NONE; n];
    let mut lp = Vec::with_capacity(n + 1);
    let mut li = Vec::with_capacity(4 * a.nnz());
    let mut lx = Vec::with_capacity(4 * a.nnz());
    let mut up = Vec::with_capacity(n + 1);
    let mut ui = Vec::with_capacity(4 * a.nnz());
    let mut ux = Vec::with_capacity(4 * a.nnz());
    lp.push(0);
    up.push(0);
    let mut x = vec![C64::new(0.0, 0.0); n];
    let mut xi = vec![0usize; n];
    let mut mark = vec![NONE; n];
    let mut stack = vec![0usize; n];
    let mut pstack = vec![0usize; n];
    let mut umax: f64 = 0.0;

    for (k, &col) in q.iter().enumerate() {
        let (rows, vals) = at.row(col);
        // Reach of the column pattern in the graph of L, topologically ordered in xi[top..].
        let mut top = n;
        for &r in rows {
            if mark[r] == k {
                continue;
            }
            let mut head = 0usize;
            stack[0] = r;
            loop {
                let j = stack[head];
                let jnew = pinv[j];
                if mark[j] != k {
                    mark[j] = k;
                    pstack[head] = if jnew == NONE { 0 } else { lp[jnew] + 1 };
                }
                let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                let mut done = true;
                let mut p = pstack[head];
                while p < end {
                    let i = li[p];
                    p += 1;
                    if mark[i] != k {
                        pstack[head] = p;
                        head += 1;
                        stack[head] = i;
                        done = false;
                        break;
                    }
                }
                if done {
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }
        for &i in &xi[top..] {
            x[i] = C64::new(0.0, 0.0);
        }
        for (&r, &v) in rows.iter().zip(vals) {
            x[r] = v;
        }
        for &j in &xi[top..] {
            let jnew = pinv[j];
            if jnew == NONE {
                continue;
            }
            let xj = x[j];
            if xj != C64::new(0.0, 0.0) {
                for p in lp[jnew] + 1..lp[jnew + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }
        }
        let mut ipiv = NONE;
        let mut best = -1.0;
        for &i in &xi[top..] {
            if pinv[i] == NONE {
                let t = x[i].norm();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else if x[i] != C64::new(0.0, 0.0) {
                ui.push(pinv[i]);
                ux.push(x[i]);
                umax = umax.max(x[i].norm());
            }
        }
        if ipiv == NONE || best <= 0.0 || !best.is_finite() {
            return Err(Error::SingularMatrix { pivot: k });
        }
        if pinv[col] == NONE && x[col].norm() >= PIVOT_TOLERANCE * best {
            ipiv = col;
        }
        let pivot = x[ipiv];
        ui.push(k);
        ux.push(pivot);
        umax = umax.max(pivot.norm());
        up.push(ui.len());
        pinv[ipiv] = k;
        li.push(ipiv);
        lx.push(C64::new(1.0, 0.0));
        for &i in &xi[top..] {
            if pinv[i] == NONE && x[i] != C64::new(0.0, 0.0) {
                li.push(i);
                lx.push(x[i] / pivot);
            }
            x[i] = C64::new(0.0, 0.0);
        }
        lp.push(li.len());
    }
    for i in li.iter_mut() {
        *i = pinv[*i];
    }
    let growth = if amax > 0.0 { umax / amax } else { 0.0 };
    Ok(Factorization {
        n,
        q,
        pinv,
        lp,
        li,
        lx,
        up,
        ui,
        ux,
        growth,
    })
}
