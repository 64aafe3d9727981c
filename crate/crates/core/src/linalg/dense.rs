use nalgebra::{DMatrix, DVector};

use super::sparse::CsrMatrix;
use crate::{Error, Result, C64};

/// Largest dimension accepted by dense reference computations.
pub const DENSE_CEILING: usize = 2500;

/// Dense LU of a sparse matrix, used as a brute-force reference.
pub struct DenseOracle {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
}

impl DenseOracle {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        Self::from_dense(a.to_dense_checked()?)
    }

    pub fn from_dense(m: DMatrix<C64>) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::DimensionMismatch {
                context: "dense oracle requires a square matrix",
                expected: n,
                actual: m.ncols(),
            });
        }
        if n > DENSE_CEILING {
            return Err(Error::SizeCeiling {
                size: n,
                ceiling: DENSE_CEILING,
            });
        }
        let lu = m.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularMatrix { pivot: 0 });
        }
        Ok(Self { lu, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let x = self
            .lu
            .solve(&DVector::from_column_slice(b))
            .expect("invertibility checked at construction");
        x.as_slice().to_vec()
    }

    pub fn inverse(&self) -> DMatrix<C64> {
        self.lu
            .try_inverse()
            .expect("invertibility checked at construction")
    }
}

impl CsrMatrix {
    pub fn to_dense_checked(&self) -> Result<DMatrix<C64>> {
        let size = self.nrows().max(self.ncols());
        if size > DENSE_CEILING {
            return Err(Error::SizeCeiling {
                size,
                ceiling: DENSE_CEILING,
            });
        }
        Ok(self.to_dense())
    }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn dense_hermitian_eigen(m: &DMatrix<C64>) -> Result<Vec<f64>> {
    if m.nrows() > DENSE_CEILING {
        return Err(Error::SizeCeiling {
            size: m.nrows(),
            ceiling: DENSE_CEILING,
        });
    }
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}
