use nalgebra::DMatrix;

use crate::{Error, Result, C64};

/// Compressed sparse row matrix with sorted column indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

/// Coordinate-format accumulator. Duplicate entries are summed on `build`.
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(i < self.nrows && j < self.ncols, "({i}, {j}) out of bounds");
        self.entries.push((i, j, v));
    }

    pub fn extend(&mut self, other: TripletBuilder) {
        self.entries.extend(other.entries);
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values: Vec<C64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        let mut row_of = Vec::with_capacity(self.entries.len());
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                row_of.push(i);
                last = Some((i, j));
            }
        }
        let mut k = 0;
        for idx in 0..values.len() {
            if values[idx] != C64::new(0.0, 0.0) {
                indices[k] = indices[idx];
                values[k] = values[idx];
                indptr[row_of[idx] + 1] += 1;
                k += 1;
            }
        }
        indices.truncate(k);
        values.truncate(k);
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr,
            indices,
            values,
        }
    }
}

impl CsrMatrix {
    /// Validates raw CSR arrays.
    pub fn from_raw(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<C64>,
    ) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("invalid CSR data: {m}")));
        if indptr.len() != nrows + 1 || indptr[0] != 0 || indptr[nrows] != indices.len() {
            return bad("row pointer");
        }
        if indices.len() != values.len() {
            return bad("index/value length");
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return bad("row pointer not monotone");
            }
            let row = &indices[indptr[i]..indptr[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&j| j >= ncols) {
                return bad("column indices unsorted or out of range");
            }
        }
        if values.iter().any(|v| *v == C64::new(0.0, 0.0)) {
            return bad("explicit zero");
        }
        Ok(Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![C64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let mut b = TripletBuilder::with_capacity(d.len(), d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            b.push(i, i, v);
        }
        b.build()
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut b = TripletBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                b.push(i, j, m[(i, j)]);
            }
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> (&[usize], &[C64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j)
            .map_or(C64::new(0.0, 0.0), |p| vals[p])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    fn check_len(&self, context: &'static str, expected: usize, actual: usize) -> Result<()> {
        if expected != actual {
            return Err(Error::DimensionMismatch {
                context,
                expected,
                actual,
            });
        }
        Ok(())
    }

    /// `A x`.
    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols, "matvec dimension");
        (0..self.nrows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    pub fn try_matvec(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check_len("matvec", self.ncols, x.len())?;
        Ok(self.matvec(x))
    }

    /// `A^H x`.
    pub fn matvec_adjoint(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows, "adjoint matvec dimension");
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                y[j] += a.conj() * xi;
            }
        }
        y
    }

    /// `A^T x` (no conjugation).
    pub fn matvec_transpose(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.nrows, "transpose matvec dimension");
        let mut y = vec![C64::new(0.0, 0.0); self.ncols];
        for (i, xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                y[j] += a * xi;
            }
        }
        y
    }

    fn map_transpose(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![C64::new(0.0, 0.0); self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                indices[next[j]] = i;
                values[next[j]] = f(a);
                next[j] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            values,
        }
    }

    pub fn transpose(&self) -> Self {
        self.map_transpose(|a| a)
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.map_transpose(|a| a.conj())
    }

    pub fn conj(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v = v.conj();
        }
        out
    }

    pub fn scaled(&self, a: C64) -> Self {
        if a == C64::new(0.0, 0.0) {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= a;
        }
        out
    }

    /// `a A + b B`.
    pub fn linear_combination(a: C64, x: &Self, b: C64, y: &Self) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::DimensionMismatch {
                context: "matrix sum",
                expected: x.nrows * x.ncols,
                actual: y.nrows * y.ncols,
            });
        }
        let mut t = TripletBuilder::with_capacity(x.nrows, x.ncols, x.nnz() + y.nnz());
        for (i, j, v) in x.triplets() {
            t.push(i, j, a * v);
        }
        for (i, j, v) in y.triplets() {
            t.push(i, j, b * v);
        }
        Ok(t.build())
    }

    /// Sparse product `A B` (row-wise Gustavson).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_len("matrix product", self.ncols, other.nrows)?;
        let n = other.ncols;
        let mut acc = vec![C64::new(0.0, 0.0); n];
        let mut mark = vec![usize::MAX; n];
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut pattern = Vec::new();
        for i in 0..self.nrows {
            pattern.clear();
            let (ca, va) = self.row(i);
            for (&k, &a) in ca.iter().zip(va) {
                let (cb, vb) = other.row(k);
                for (&j, &b) in cb.iter().zip(vb) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = C64::new(0.0, 0.0);
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            for &j in &pattern {
                if acc[j] != C64::new(0.0, 0.0) {
                    indices.push(j);
                    values.push(acc[j]);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            nrows: self.nrows,
            ncols: n,
            indptr,
            indices,
            values,
        })
    }

    /// Submatrix `A[rows, cols]`; indices need not be sorted but must be distinct.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.ncols];
        for (k, &j) in cols.iter().enumerate() {
            pos[j] = k;
        }
        let mut t = TripletBuilder::new(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if pos[j] != usize::MAX {
                    t.push(r, pos[j], a);
                }
            }
        }
        t.build()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).1.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|A - A^H|` relative to `max |A|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = Self::linear_combination(
            C64::new(1.0, 0.0),
            self,
            C64::new(-1.0, 0.0),
            &self.adjoint(),
        )
        .expect("square matrix");
        let m = self.max_abs();
        if m == 0.0 {
            0.0
        } else {
            d.max_abs() / m
        }
    }

    /// Symmetrised sparsity pattern without the diagonal, as adjacency lists.
    pub fn symmetric_pattern(&self) -> Vec<Vec<usize>> {
        let n = self.nrows;
        let mut adj = vec![Vec::new(); n];
        for (i, j, _) in self.triplets() {
            if i != j && i < n && j < n {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}
