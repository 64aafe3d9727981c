//! Weighted inner products and induced operator norms.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dense::{DenseOracle, DENSE_CEILING};
use super::lu::Factorization;
use super::sparse::CsrMatrix;
use super::vector;
use crate::{Error, Result, C64};

/// `⟨D V, U⟩ = U^H D V`.
pub fn weighted_inner(d: &CsrMatrix, u: &[C64], v: &[C64]) -> Result<C64> {
    let dv = d.try_matvec(v)?;
    if u.len() != dv.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted inner product",
            expected: dv.len(),
            actual: u.len(),
        });
    }
    Ok(vector::inner(&dv, u))
}

pub fn weighted_norm(d: &CsrMatrix, v: &[C64]) -> Result<f64> {
    Ok(weighted_inner(d, v, v)?.re.max(0.0).sqrt())
}

/// Linear map on complex vectors, with an optional Euclidean adjoint.
pub trait LinearOperator: Sync {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, _x: &[C64]) -> Result<Vec<C64>> {
        Err(Error::InvalidArgument("operator has no adjoint".into()))
    }
}

impl LinearOperator for CsrMatrix {
    fn nrows(&self) -> usize {
        CsrMatrix::nrows(self)
    }
    fn ncols(&self) -> usize {
        CsrMatrix::ncols(self)
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matvec(x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        Ok(self.matvec_adjoint(x))
    }
}

type VecFn<'a> = Box<dyn Fn(&[C64]) -> Vec<C64> + Sync + 'a>;

/// Operator built from closures.
pub struct FnOperator<'a> {
    nrows: usize,
    ncols: usize,
    forward: VecFn<'a>,
    adjoint: Option<VecFn<'a>>,
}

impl<'a> FnOperator<'a> {
    pub fn new(nrows: usize, ncols: usize, f: impl Fn(&[C64]) -> Vec<C64> + Sync + 'a) -> Self {
        Self {
            nrows,
            ncols,
            forward: Box::new(f),
            adjoint: None,
        }
    }

    pub fn square(n: usize, f: impl Fn(&[C64]) -> Vec<C64> + Sync + 'a) -> Self {
        Self::new(n, n, f)
    }

    pub fn with_adjoint(mut self, g: impl Fn(&[C64]) -> Vec<C64> + Sync + 'a) -> Self {
        self.adjoint = Some(Box::new(g));
        self
    }
}

impl LinearOperator for FnOperator<'_> {
    fn nrows(&self) -> usize {
        self.nrows
    }
    fn ncols(&self) -> usize {
        self.ncols
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (self.forward)(x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Result<Vec<C64>> {
        match &self.adjoint {
            Some(g) => Ok(g(x)),
            None => Err(Error::InvalidArgument("operator has no adjoint".into())),
        }
    }
}

/// Hermitian positive-definite weight defining `‖v‖² = v^H W v`.
#[derive(Debug, Clone)]
pub enum Metric {
    Identity(usize),
    /// `W = mat`.
    Matrix {
        mat: Arc<CsrMatrix>,
        lu: Arc<Factorization>,
    },
    /// `W = mat⁻¹`.
    Inverse {
        mat: Arc<CsrMatrix>,
        lu: Arc<Factorization>,
    },
}

impl Metric {
    pub fn new(mat: Arc<CsrMatrix>) -> Result<Self> {
        let lu = Arc::new(Factorization::new(&mat)?);
        Ok(Self::Matrix { mat, lu })
    }

    pub fn with_coordinates(mat: Arc<CsrMatrix>, coords: &[[f64; 2]]) -> Result<Self> {
        let lu = Arc::new(Factorization::with_coordinates(&mat, coords)?);
        Ok(Self::Matrix { mat, lu })
    }

    pub fn from_parts(mat: Arc<CsrMatrix>, lu: Arc<Factorization>) -> Self {
        Self::Matrix { mat, lu }
    }

    /// The metric with weight `W⁻¹`.
    pub fn inverse(&self) -> Self {
        match self {
            Self::Identity(n) => Self::Identity(*n),
            Self::Matrix { mat, lu } => Self::Inverse {
                mat: mat.clone(),
                lu: lu.clone(),
            },
            Self::Inverse { mat, lu } => Self::Matrix {
                mat: mat.clone(),
                lu: lu.clone(),
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Matrix { mat, .. } | Self::Inverse { mat, .. } => mat.nrows(),
        }
    }

    /// `W x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity(_) => x.to_vec(),
            Self::Matrix { mat, .. } => mat.matvec(x),
            Self::Inverse { lu, .. } => lu.solve(x),
        }
    }

    /// `W⁻¹ x`.
    pub fn apply_inv(&self, x: &[C64]) -> Vec<C64> {
        match self {
            Self::Identity(_) => x.to_vec(),
            Self::Matrix { lu, .. } => lu.solve(x),
            Self::Inverse { mat, .. } => mat.matvec(x),
        }
    }

    /// `⟨W V, U⟩ = U^H W V`.
    pub fn inner(&self, u: &[C64], v: &[C64]) -> C64 {
        vector::inner(&self.apply(v), u)
    }

    pub fn norm(&self, v: &[C64]) -> f64 {
        self.inner(v, v).re.max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> Result<DMatrix<C64>> {
        match self {
            Self::Identity(n) => {
                if *n > DENSE_CEILING {
                    return Err(Error::SizeCeiling {
                        size: *n,
                        ceiling: DENSE_CEILING,
                    });
                }
                Ok(DMatrix::identity(*n, *n))
            }
            Self::Matrix { mat, .. } => mat.to_dense_checked(),
            Self::Inverse { mat, .. } => Ok(DenseOracle::new(mat)?.inverse()),
        }
    }
}

/// How an operator norm is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormMode {
    /// Assemble the operator column by column and take the largest singular
    /// value after Cholesky congruence with the metrics.
    Dense,
    /// Lanczos with full reorthogonalisation on `E^† E` in the input metric.
    /// Returns the largest Ritz value, a lower bound, once the Ritz residual
    /// is below `tol` relative.
    Power {
        tol: f64,
        max_iter: usize,
        seed: u64,
    },
}

impl NormMode {
    pub const DEFAULT_SEED: u64 = 0x5eed_2024;

    pub fn power() -> Self {
        NormMode::Power {
            tol: 1e-4,
            max_iter: 300,
            seed: Self::DEFAULT_SEED,
        }
    }
}

/// Result of an operator-norm computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// Operator applications used (columns in dense mode, Lanczos steps otherwise).
    pub applications: usize,
    pub converged: bool,
}

/// `sup ‖E v‖_D / ‖v‖_D`.
pub fn operator_norm_weighted(op: &dyn LinearOperator, d: &Metric, mode: NormMode) -> Result<f64> {
    operator_norm_between(op, d, d, mode).map(|e| e.value)
}

/// `sup ‖E v‖_out / ‖v‖_in`.
///
/// Power mode fails with [`Error::NoConvergence`] when the iteration limit is
/// reached before the tolerance.
pub fn operator_norm_between(
    op: &dyn LinearOperator,
    out_metric: &Metric,
    in_metric: &Metric,
    mode: NormMode,
) -> Result<NormEstimate> {
    if op.nrows() != out_metric.dim() || op.ncols() != in_metric.dim() {
        return Err(Error::DimensionMismatch {
            context: "operator norm metrics",
            expected: op.nrows() * op.ncols(),
            actual: out_metric.dim() * in_metric.dim(),
        });
    }
    match mode {
        NormMode::Dense => dense_norm(op, out_metric, in_metric),
        NormMode::Power {
            tol,
            max_iter,
            seed,
        } => {
            let est = lanczos_norm(op, out_metric, in_metric, tol, max_iter, seed)?;
            if !est.converged {
                return Err(Error::NoConvergence {
                    method: "lanczos operator norm",
                    iterations: est.applications,
                    last: est.value,
                });
            }
            Ok(est)
        }
    }
}

fn dense_norm(
    op: &dyn LinearOperator,
    out_metric: &Metric,
    in_metric: &Metric,
) -> Result<NormEstimate> {
    let (m, n) = (op.nrows(), op.ncols());
    if m.max(n) > DENSE_CEILING {
        return Err(Error::SizeCeiling {
            size: m.max(n),
            ceiling: DENSE_CEILING,
        });
    }
    let mut e = DMatrix::<C64>::zeros(m, n);
    for j in 0..n {
        let col = op.apply(&vector::unit(n, j));
        e.column_mut(j).copy_from_slice(&col);
    }
    let chol = |w: &Metric| -> Result<DMatrix<C64>> {
        let d = w.to_dense()?;
        let h = (&d + d.adjoint()) * C64::new(0.5, 0.0);
        h.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::InvalidArgument("metric is not positive definite".into()))
    };
    let lo = chol(out_metric)?;
    let li = chol(in_metric)?;
    // ‖E‖ = ‖Lo^H E Li^{-H}‖₂ and (X Li^{-H})^H = Li⁻¹ X^H.
    let x = lo.adjoint() * e;
    let yh = li
        .solve_lower_triangular(&x.adjoint())
        .ok_or(Error::SingularMatrix { pivot: 0 })?;
    let value = if yh.is_empty() {
        0.0
    } else {
        yh.singular_values().max()
    };
    Ok(NormEstimate {
        value,
        applications: n,
        converged: true,
    })
}

/// Lanczos for the largest eigenvalue of `T = W_in⁻¹ E^H W_out E`, self-adjoint in the `W_in` inner product.
pub(crate) fn lanczos_norm(
    op: &dyn LinearOperator,
    out_metric: &Metric,
    in_metric: &Metric,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<NormEstimate> {
    let n = op.ncols();
    if n == 0 {
        return Ok(NormEstimate {
            value: 0.0,
            applications: 0,
            converged: true,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vector::random(&mut rng, n);
    let mut wv = in_metric.apply(&v);
    let nrm = vector::inner(&wv, &v).re.sqrt();
    vector::scale(C64::new(1.0 / nrm, 0.0), &mut v);
    vector::scale(C64::new(1.0 / nrm, 0.0), &mut wv);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut wbasis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut theta = 0.0;
    let limit = max_iter.min(n).max(1);
    for j in 0..limit {
        let g = op.apply_adjoint(&out_metric.apply(&op.apply(&v)))?;
        let a = vector::inner(&g, &v).re;
        let mut w = in_metric.apply_inv(&g);
        basis.push(v);
        wbasis.push(wv);
        alpha.push(a);
        for _ in 0..2 {
            for (b, wb) in basis.iter().zip(&wbasis) {
                let c = vector::inner(&w, wb);
                vector::axpy(-c, b, &mut w);
            }
        }
        let ww = in_metric.apply(&w);
        let b = vector::inner(&ww, &w).re.max(0.0).sqrt();
        let m = alpha.len();
        let t = DMatrix::<f64>::from_fn(m, m, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let (imax, &tmax) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty tridiagonal");
        theta = tmax.max(0.0);
        let resid = b * eig.eigenvectors[(m - 1, imax)].abs();
        let scale_ref = theta.max(alpha.iter().fold(0.0_f64, |s, x| s.max(x.abs())));
        if b <= 1e-13 * scale_ref || b == 0.0 || resid <= tol * theta || j + 1 == n {
            return Ok(NormEstimate {
                value: theta.sqrt(),
                applications: j + 1,
                converged: true,
            });
        }
        beta.push(b);
        v = w;
        wv = ww;
        vector::scale(C64::new(1.0 / b, 0.0), &mut v);
        vector::scale(C64::new(1.0 / b, 0.0), &mut wv);
    }
    Ok(NormEstimate {
        value: theta.sqrt(),
        applications: limit,
        converged: false,
    })
}

/// `(λ_min, λ_max)` of a metric's weight matrix.
pub fn extreme_eigenvalues(w: &Metric, tol: f64) -> Result<(f64, f64)> {
    let n = w.dim();
    let id = FnOperator::square(n, |x| x.to_vec()).with_adjoint(|x| x.to_vec());
    let eye = Metric::Identity(n);
    let max_iter = 1000;
    let big = lanczos_norm(&id, w, &eye, tol, max_iter, NormMode::DEFAULT_SEED)?;
    let small = lanczos_norm(
        &id,
        &w.inverse(),
        &eye,
        tol,
        max_iter,
        NormMode::DEFAULT_SEED,
    )?;
    if !big.converged || !small.converged {
        return Err(Error::NoConvergence {
            method: "lanczos extreme eigenvalues",
            iterations: max_iter,
            last: big.value,
        });
    }
    Ok((1.0 / (small.value * small.value), big.value * big.value))
}

#[cfg(test)]
mod tests {
    use super::super::sparse::TripletBuilder;
    use super::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Sparse Hermitian positive-definite test metric.
    fn spd(n: usize, rng: &mut ChaCha8Rng) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, c(2.5 + rng.random::<f64>(), 0.0));
            if i + 1 < n {
                let v = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                t.push(i, i + 1, v);
                t.push(i + 1, i, v.conj());
            }
        }
        t.build()
    }

    #[test]
    fn inner_product_convention() {
        let d = CsrMatrix::identity(2);
        let e1 = vector::unit(2, 0);
        assert_eq!(weighted_inner(&d, &e1, &e1).unwrap(), c(1.0, 0.0));
        assert_eq!(weighted_norm(&d, &vector::zeros(2)).unwrap(), 0.0);
        // linear in V, conjugate-linear in U
        let u = vec![c(1.0, 2.0), c(0.5, -1.0)];
        let v = vec![c(-0.3, 0.2), c(1.0, 1.0)];
        let a = c(0.0, 1.0);
        let base = weighted_inner(&d, &u, &v).unwrap();
        let av: Vec<C64> = v.iter().map(|x| a * x).collect();
        let au: Vec<C64> = u.iter().map(|x| a * x).collect();
        assert!((weighted_inner(&d, &u, &av).unwrap() - a * base).norm() < 1e-15);
        assert!((weighted_inner(&d, &au, &v).unwrap() - a.conj() * base).norm() < 1e-15);
        assert!(weighted_inner(&d, &u, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn polarization_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = spd(30, &mut rng);
        let u = vector::random(&mut rng, 30);
        let v = vector::random(&mut rng, 30);
        // ⟨v, u⟩_D (linear in v) = ¼ Σ_k i^k ‖v + i^k u‖²
        let mut acc = c(0.0, 0.0);
        for k in 0..4 {
            let ik = c(0.0, 1.0).powi(k);
            let s: Vec<C64> = v.iter().zip(&u).map(|(a, b)| a + ik * b).collect();
            acc += ik * weighted_norm(&d, &s).unwrap().powi(2);
        }
        acc *= 0.25;
        assert!((acc - weighted_inner(&d, &u, &v).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn dual_metric_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = Arc::new(spd(25, &mut rng));
        let m = Metric::new(d.clone()).unwrap();
        let v1 = vector::random(&mut rng, 25);
        let v2 = vector::random(&mut rng, 25);
        let (w1, w2) = (d.matvec(&v1), d.matvec(&v2));
        let lhs = m.inner(&v1, &v2);
        let rhs = m.inverse().inner(&w1, &w2);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn trivial_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = Metric::new(Arc::new(spd(20, &mut rng))).unwrap();
        let zero = FnOperator::square(20, |x| vector::zeros(x.len()))
            .with_adjoint(|x| vector::zeros(x.len()));
        let two = FnOperator::square(20, |x| x.iter().map(|v| v * 2.0).collect())
            .with_adjoint(|x| x.iter().map(|v| v * 2.0).collect());
        for mode in [NormMode::Dense, NormMode::power()] {
            assert_eq!(operator_norm_weighted(&zero, &d, mode).unwrap(), 0.0);
            assert!((operator_norm_weighted(&two, &d, mode).unwrap() - 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dense_and_power_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 300;
        let d = Metric::new(Arc::new(spd(n, &mut rng))).unwrap();
        let e = {
            let mut t = TripletBuilder::new(n, n);
            for i in 0..n {
                for _ in 0..6 {
                    let j = rng.random_range(0..n);
                    t.push(
                        i,
                        j,
                        c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                    );
                }
            }
            t.build()
        };
        let dense = operator_norm_weighted(&e, &d, NormMode::Dense).unwrap();
        let power = operator_norm_weighted(&e, &d, NormMode::power()).unwrap();
        assert!(power <= dense * (1.0 + 1e-10));
        assert!((dense - power).abs() <= 1e-3 * dense, "{dense} vs {power}");
        // Cholesky congruence against the defining generalized eigenproblem
        let dd = d.to_dense().unwrap();
        let ed = e.to_dense();
        let lhs = ed.adjoint() * &dd * &ed;
        let l = dd.clone().cholesky().unwrap();
        let linv = l.l().try_inverse().unwrap();
        let ev = crate::linalg::dense_hermitian_eigen(&(&linv * lhs * linv.adjoint())).unwrap();
        assert!((ev.last().unwrap().sqrt() - dense).abs() < 1e-9 * dense);
    }

    #[test]
    fn extreme_eigenvalues_of_diagonal() {
        let d = CsrMatrix::from_diagonal(&(1..=40).map(|i| c(i as f64, 0.0)).collect::<Vec<_>>());
        let m = Metric::new(Arc::new(d)).unwrap();
        let (lo, hi) = extreme_eigenvalues(&m, 1e-8).unwrap();
        assert!(
            (lo - 1.0).abs() < 1e-6 && (hi - 40.0).abs() < 1e-6,
            "{lo} {hi}"
        );
    }
}
