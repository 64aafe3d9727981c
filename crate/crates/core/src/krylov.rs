//! Preconditioned fixed-point iteration and full GMRES in a weighted inner product.
//!
//! GMRES builds a basis that is orthonormal in `⟨u, v⟩_W = v^H W u` with
//! `W ∈ {I, D_k, D_k⁻¹}`, so the least-squares residual it minimises is the
//! residual in the `W` norm. `W v` is computed once per basis vector and
//! cached. Left preconditioning minimises the preconditioned residual
//! `B⁻¹(b − A x)`, right preconditioning the true residual `b − A x`.

use std::time::{Duration, Instant};

use crate::linalg::{vector, CsrMatrix, Metric};
use crate::precond::{PrecondSide, SchwarzPreconditioner};
use crate::{Error, Result, C64};

/// Something that approximates `A⁻¹`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[C64]) -> Vec<C64>;
}

impl Preconditioner for SchwarzPreconditioner {
    fn apply(&self, r: &[C64]) -> Vec<C64> {
        SchwarzPreconditioner::apply(self, r)
    }
}

/// No preconditioning.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[C64]) -> Vec<C64> {
        r.to_vec()
    }
}

/// Inner product a GMRES run orthogonalises in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerProduct {
    Euclidean,
    Dk,
    DkInv,
}

impl InnerProduct {
    pub fn name(self) -> &'static str {
        match self {
            InnerProduct::Euclidean => "euclidean",
            InnerProduct::Dk => "dk",
            InnerProduct::DkInv => "dk_inv",
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Residual norms in the solve's own norm, starting with the initial one.
    pub history: Vec<f64>,
    /// Euclidean norms of the same residual vectors.
    pub euclidean: Vec<f64>,
    /// `‖x − x^n‖_{D_k}` against a reference solution, when one was given.
    pub errors: Vec<f64>,
    /// Geometric fit of the history, when it is long enough.
    pub contraction: Option<f64>,
    /// Arnoldi steps that needed the second Gram–Schmidt pass.
    pub reorthogonalisations: usize,
    pub wall: Duration,
}

impl SolveReport {
    /// `history[n] / history[0]`.
    pub fn relative(&self) -> Vec<f64> {
        let h0 = self.history.first().copied().unwrap_or(1.0);
        self.history
            .iter()
            .map(|h| if h0 > 0.0 { h / h0 } else { 0.0 })
            .collect()
    }
}

/// Number of consecutive growing steps after which the fixed-point iteration aborts.
pub const DIVERGENCE_WINDOW: usize = 10;

/// `x^{n+1} = x^n + B_L⁻¹ (b − A x^n)`.
///
/// Stops once `‖B_L⁻¹(b − A x^n)‖_{D_k} ≤ tol · ‖B_L⁻¹(b − A x^0)‖_{D_k}`.
/// That preconditioned residual equals `B_L⁻¹ A (x − x^n)` and is what the
/// history records.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point(
    a: &CsrMatrix,
    p: &dyn Preconditioner,
    b: &[C64],
    x0: &[C64],
    d: &Metric,
    tol: f64,
    max_iter: usize,
    reference: Option<&[C64]>,
) -> Result<(Vec<C64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let start = Instant::now();
    let mut x = x0.to_vec();
    let mut history = Vec::new();
    let mut euclidean = Vec::new();
    let mut errors = Vec::new();
    let mut growth = 0;
    let mut converged = false;
    let mut iterations = 0;
    for n in 0..=max_iter {
        if let Some(xr) = reference {
            errors.push(d.norm(&vector::sub(xr, &x)));
        }
        let z = p.apply(&vector::sub(b, &a.matvec(&x)));
        let nz = d.norm(&z);
        if let Some(&last) = history.last() {
            growth = if nz > last { growth + 1 } else { 0 };
        }
        history.push(nz);
        euclidean.push(vector::norm2(&z));
        iterations = n;
        if nz <= tol * history[0] || nz == 0.0 {
            converged = true;
            break;
        }
        if growth >= DIVERGENCE_WINDOW {
            return Err(Error::Diverged {
                iteration: n,
                history,
            });
        }
        if n == max_iter {
            break;
        }
        vector::axpy(C64::new(1.0, 0.0), &z, &mut x);
    }
    let contraction = contraction_fit(&history).ok();
    Ok((
        x,
        SolveReport {
            iterations,
            converged,
            history,
            euclidean,
            errors,
            contraction,
            reorthogonalisations: 0,
            wall: start.elapsed(),
        },
    ))
}

/// Options of a GMRES run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub side: PrecondSide,
    pub inner: InnerProduct,
    /// Relative residual target in the selected norm.
    pub tol: f64,
    pub max_iter: usize,
}

impl GmresOptions {
    pub fn new(side: PrecondSide, inner: InnerProduct) -> Self {
        Self {
            side,
            inner,
            tol: 1e-6,
            max_iter: 500,
        }
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// Relative threshold for the second Gram–Schmidt pass.
const REORTH_THRESHOLD: f64 = 1e-8;

/// Full (unrestarted) GMRES.
///
/// `d` is the `D_k` metric; it is only used for the weighted inner products.
pub fn gmres(
    a: &CsrMatrix,
    p: &dyn Preconditioner,
    b: &[C64],
    x0: &[C64],
    d: Option<&Metric>,
    opts: GmresOptions,
) -> Result<(Vec<C64>, SolveReport)> {
    check_dims(a, b, x0)?;
    let start = Instant::now();
    let dinv;
    let w: Option<&Metric> = match opts.inner {
        InnerProduct::Euclidean => None,
        InnerProduct::Dk => Some(d.ok_or(Error::MissingConstant("D_k metric"))?),
        InnerProduct::DkInv => {
            dinv = d.ok_or(Error::MissingConstant("D_k metric"))?.inverse();
            Some(&dinv)
        }
    };
    let weigh = |v: &[C64]| -> Vec<C64> {
        match w {
            Some(m) => m.apply(v),
            None => v.to_vec(),
        }
    };
    let op = |v: &[C64]| -> Vec<C64> {
        match opts.side {
            PrecondSide::Left => p.apply(&a.matvec(v)),
            PrecondSide::Right => a.matvec(&p.apply(v)),
        }
    };
    let r_true = vector::sub(b, &a.matvec(x0));
    let r0 = match opts.side {
        PrecondSide::Left => p.apply(&r_true),
        PrecondSide::Right => r_true,
    };
    let wr0 = weigh(&r0);
    let beta = vector::inner(&r0, &wr0).re.max(0.0).sqrt();
    let mut history = vec![beta];
    let mut euclidean = vec![vector::norm2(&r0)];
    let mut reorth = 0;
    let mut x = x0.to_vec();
    if beta == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                converged: true,
                history,
                euclidean,
                errors: Vec::new(),
                contraction: None,
                reorthogonalisations: 0,
                wall: start.elapsed(),
            },
        ));
    }
    let inv = C64::new(1.0 / beta, 0.0);
    let mut basis: Vec<Vec<C64>> = vec![r0.iter().map(|v| v * inv).collect()];
    let mut wbasis: Vec<Vec<C64>> = vec![wr0.iter().map(|v| v * inv).collect()];
    // Hessenberg columns (unrotated, for residual reconstruction) and rotated copies
    let mut h_cols: Vec<Vec<C64>> = Vec::new();
    let mut r_cols: Vec<Vec<C64>> = Vec::new();
    let mut rot: Vec<(C64, C64)> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];
    let mut converged = false;
    let mut steps = 0;
    let limit = opts.max_iter.min(a.nrows());
    for j in 0..limit {
        let mut v = op(&basis[j]);
        let mut h = vec![C64::new(0.0, 0.0); j + 2];
        for i in 0..=j {
            let c = vector::inner(&v, &wbasis[i]);
            h[i] += c;
            vector::axpy(-c, &basis[i], &mut v);
        }
        let mut wv = weigh(&v);
        let mut hn = vector::inner(&v, &wv).re.max(0.0).sqrt();
        let worst = (0..=j)
            .map(|i| vector::inner(&v, &wbasis[i]).norm())
            .fold(0.0, f64::max);
        if worst > REORTH_THRESHOLD * hn {
            reorth += 1;
            for i in 0..=j {
                let c = vector::inner(&v, &wbasis[i]);
                h[i] += c;
                vector::axpy(-c, &basis[i], &mut v);
            }
            wv = weigh(&v);
            hn = vector::inner(&v, &wv).re.max(0.0).sqrt();
        }
        h[j + 1] = C64::new(hn, 0.0);
        h_cols.push(h.clone());
        // apply previous rotations, then a new one zeroing h[j + 1]
        let mut hr = h;
        for (i, &(cs, sn)) in rot.iter().enumerate() {
            let (a0, a1) = (hr[i], hr[i + 1]);
            hr[i] = cs.conj() * a0 + sn.conj() * a1;
            hr[i + 1] = -sn * a0 + cs * a1;
        }
        let (a0, a1) = (hr[j], hr[j + 1]);
        let den = (a0.norm_sqr() + a1.norm_sqr()).sqrt();
        let (cs, sn) = if den == 0.0 {
            (C64::new(1.0, 0.0), C64::new(0.0, 0.0))
        } else {
            (a0 / den, a1 / den)
        };
        hr[j] = C64::new(den, 0.0);
        hr[j + 1] = C64::new(0.0, 0.0);
        rot.push((cs, sn));
        let gj = g[j];
        g[j] = cs.conj() * gj;
        g.push(-sn * gj);
        r_cols.push(hr);
        steps = j + 1;
        let breakdown = hn <= 1e-14 * beta.max(den);
        if !breakdown {
            let s = C64::new(1.0 / hn, 0.0);
            basis.push(v.iter().map(|x| x * s).collect());
            wbasis.push(wv.iter().map(|x| x * s).collect());
        }
        let y = back_substitute(&r_cols, &g, steps);
        let res_norm = if breakdown { 0.0 } else { g[steps].norm() };
        // reconstruct the residual vector V_{j+1}(β e₁ − H̄ y) for its Euclidean norm
        let mut t = vec![C64::new(0.0, 0.0); steps + 1];
        t[0] = C64::new(beta, 0.0);
        for (col, yc) in h_cols.iter().zip(&y) {
            for (ti, hi) in t.iter_mut().zip(col) {
                *ti -= hi * yc;
            }
        }
        let mut rvec = vector::zeros(a.nrows());
        for (ti, bi) in t.iter().zip(&basis) {
            vector::axpy(*ti, bi, &mut rvec);
        }
        history.push(res_norm);
        euclidean.push(vector::norm2(&rvec));
        if breakdown || res_norm <= opts.tol * beta {
            converged = true;
            break;
        }
    }
    let y = back_substitute(&r_cols, &g, steps);
    let mut update = vector::zeros(a.nrows());
    for (yi, bi) in y.iter().zip(&basis) {
        vector::axpy(*yi, bi, &mut update);
    }
    if opts.side == PrecondSide::Right {
        update = p.apply(&update);
    }
    vector::axpy(C64::new(1.0, 0.0), &update, &mut x);
    let contraction = contraction_fit(&history).ok();
    Ok((
        x,
        SolveReport {
            iterations: steps,
            converged,
            history,
            euclidean,
            errors: Vec::new(),
            contraction,
            reorthogonalisations: reorth,
            wall: start.elapsed(),
        },
    ))
}

fn back_substitute(r_cols: &[Vec<C64>], g: &[C64], m: usize) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); m];
    for i in (0..m).rev() {
        let mut s = g[i];
        for (k, yk) in y.iter().enumerate().take(m).skip(i + 1) {
            s -= r_cols[k][i] * yk;
        }
        let piv = r_cols[i][i];
        y[i] = if piv.norm() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            s / piv
        };
    }
    y
}

fn check_dims(a: &CsrMatrix, b: &[C64], x0: &[C64]) -> Result<()> {
    if a.nrows() != a.ncols() || b.len() != a.nrows() || x0.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "iterative solve",
            expected: a.nrows(),
            actual: b.len().max(x0.len()),
        });
    }
    Ok(())
}

/// `exp` of the least-squares slope of `ln history[n]` against `n` over the
/// tail half of the history.
pub fn contraction_fit(history: &[f64]) -> Result<f64> {
    if history.len() < 4 {
        return Err(Error::HistoryTooShort {
            needed: 4,
            got: history.len(),
        });
    }
    let tail: Vec<(f64, f64)> = history
        .iter()
        .enumerate()
        .skip(history.len() / 2)
        .filter(|(_, h)| **h > 0.0 && h.is_finite())
        .map(|(n, h)| (n as f64, h.ln()))
        .collect();
    if tail.len() < 2 {
        return Err(Error::HistoryTooShort {
            needed: 2,
            got: tail.len(),
        });
    }
    let m = tail.len() as f64;
    let (sx, sy) = tail
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = tail.iter().fold((0.0, 0.0), |(n, d), (x, y)| {
        (n + (x - mx) * (y - my), d + (x - mx) * (x - mx))
    });
    Ok((num / den).exp())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::coarse::EstimateMode;
    use crate::experiment::{Problem, ProblemSpec};
    use crate::linalg::{extreme_eigenvalues, TripletBuilder};

    #[test]
    fn contraction_fit_examples() {
        let geo: Vec<f64> = (0..12).map(|n| 0.5f64.powi(n)).collect();
        assert!((contraction_fit(&geo).unwrap() - 0.5).abs() < 1e-12);
        assert!((contraction_fit(&[3.0; 6]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            contraction_fit(&[1.0, 0.5, 0.25]),
            Err(Error::HistoryTooShort { .. })
        ));
    }

    #[test]
    fn identity_system_converges_in_one_step() {
        let n = 7;
        let a = CsrMatrix::identity(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = vector::random(&mut rng, n);
        let (x, rep) = gmres(
            &a,
            &Identity,
            &b,
            &vector::zeros(n),
            None,
            GmresOptions::new(PrecondSide::Left, InnerProduct::Euclidean),
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(vector::norm2(&vector::sub(&x, &b)) < 1e-14);
    }

    fn tridiagonal(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, C64::new(2.5, 0.3));
            if i > 0 {
                t.push(i, i - 1, C64::new(-1.0, 0.1));
            }
            if i + 1 < n {
                t.push(i, i + 1, C64::new(-1.2, 0.0));
            }
        }
        t.build()
    }

    #[test]
    fn gmres_solves_and_history_is_monotone() {
        let n = 60;
        let a = tridiagonal(n);
        let d = Metric::new(Arc::new(CsrMatrix::from_diagonal(
            &(0..n)
                .map(|i| C64::new(1.0 + i as f64, 0.0))
                .collect::<Vec<_>>(),
        )))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = vector::random(&mut rng, n);
        for inner in [
            InnerProduct::Euclidean,
            InnerProduct::Dk,
            InnerProduct::DkInv,
        ] {
            for side in [PrecondSide::Left, PrecondSide::Right] {
                let opts = GmresOptions::new(side, inner).tol(1e-12);
                let (x, rep) = gmres(&a, &Identity, &b, &vector::zeros(n), Some(&d), opts).unwrap();
                assert!(rep.converged);
                let res = vector::norm2(&vector::sub(&b, &a.matvec(&x)));
                assert!(res < 1e-10 * vector::norm2(&b), "{inner:?} {side:?} {res}");
                for w in rep.history.windows(2) {
                    assert!(w[1] <= w[0] * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn zero_residual_start_and_fixed_point_trivial() {
        let a = tridiagonal(10);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x0 = vector::random(&mut rng, 10);
        let b = a.matvec(&x0);
        let d = Metric::Identity(10);
        let (_, rep) = fixed_point(&a, &Identity, &b, &x0, &d, 1e-10, 5, None).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        let (_, rep) = gmres(
            &a,
            &Identity,
            &b,
            &x0,
            None,
            GmresOptions::new(PrecondSide::Left, InnerProduct::Euclidean),
        )
        .unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn fixed_point_divergence_aborts() {
        // x ← x + 3(b − x) doubles the error each step
        let n = 4;
        let a = CsrMatrix::identity(n);
        struct Times3;
        impl Preconditioner for Times3 {
            fn apply(&self, r: &[C64]) -> Vec<C64> {
                r.iter().map(|v| v * 3.0).collect()
            }
        }
        let b = vec![C64::new(1.0, 0.0); n];
        let err = fixed_point(
            &a,
            &Times3,
            &b,
            &vector::zeros(n),
            &Metric::Identity(n),
            1e-10,
            100,
            None,
        )
        .unwrap_err();
        match err {
            Error::Diverged { iteration, history } => {
                assert_eq!(iteration, DIVERGENCE_WINDOW);
                assert_eq!(history.len(), DIVERGENCE_WINDOW + 1);
            }
            other => panic!("{other}"),
        }
    }

    fn problem(per_side: usize) -> Problem {
        Problem::build(&ProblemSpec::impedance(6.0, 1, 12, 6, per_side, 2)).unwrap()
    }

    #[test]
    fn single_subdomain_fixed_point_is_exact_in_one_step() {
        let p = problem(1);
        let b = p.plane_wave_load([0.6, 0.8]).unwrap();
        let pre = p.preconditioner(PrecondSide::Left).unwrap();
        let (x, rep) = fixed_point(
            &p.a,
            &pre,
            &b,
            &vector::zeros(p.n_dofs()),
            &p.d,
            1e-10,
            5,
            None,
        )
        .unwrap();
        assert_eq!(rep.iterations, 1);
        let res = vector::norm2(&vector::sub(&b, &p.a.matvec(&x)));
        assert!(res < 1e-10 * vector::norm2(&b));
    }

    #[test]
    fn contraction_bounds_on_a_contracting_configuration() {
        let p = Problem::build(&ProblemSpec::impedance(6.0, 1, 24, 12, 2, 4)).unwrap();
        let pre = p.preconditioner(PrecondSide::Left).unwrap();
        let c = pre.norm_defect(&p.d, EstimateMode::Dense).unwrap().value;
        assert!(c < 1.0, "defect {c}");
        let b = p.plane_wave_load([0.6, 0.8]).unwrap();
        let xref = p.factorize().unwrap().solve(&b);
        let x0 = vector::zeros(p.n_dofs());
        let (_, fp) = fixed_point(&p.a, &pre, &b, &x0, &p.d, 1e-10, 200, Some(&xref)).unwrap();
        assert!(fp.converged);
        for w in fp.errors.windows(2) {
            if w[0] > 1e-12 * fp.errors[0] {
                assert!(w[1] / w[0] <= c + 0.05, "{} > {c}", w[1] / w[0]);
            }
        }
        assert!(fp.contraction.unwrap() <= c + 0.05);
        let (x, gm) = gmres(
            &p.a,
            &pre,
            &b,
            &x0,
            Some(&p.d),
            GmresOptions::new(PrecondSide::Left, InnerProduct::Dk).tol(1e-10),
        )
        .unwrap();
        assert!(vector::norm2(&vector::sub(&x, &xref)) < 1e-8 * vector::norm2(&xref));
        let (lmin, lmax) = extreme_eigenvalues(&p.d, 1e-8).unwrap();
        let kappa = (lmax / lmin).sqrt();
        for (n, (h, e)) in gm.history.iter().zip(&gm.euclidean).enumerate() {
            assert!(
                *h <= c.powi(n as i32) * gm.history[0] * (1.0 + 1e-9),
                "step {n}"
            );
            assert!(e / gm.euclidean[0] <= kappa * h / gm.history[0] * (1.0 + 1e-9));
        }
        // D_k norm of the reconstructed residual is the minimised quantity
        assert!(gm.history.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn right_gmres_on_dual_data_mirrors_left() {
        let p = problem(2);
        let dual = p.adjoint().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = vector::random(&mut rng, p.n_dofs());
        let x0 = vector::zeros(p.n_dofs());
        let left = dual.preconditioner(PrecondSide::Left).unwrap();
        let right = p.preconditioner(PrecondSide::Right).unwrap();
        let (_, l) = gmres(
            &dual.a,
            &left,
            &b,
            &x0,
            Some(&p.d),
            GmresOptions::new(PrecondSide::Left, InnerProduct::Dk),
        )
        .unwrap();
        let (x, r) = gmres(
            &p.a,
            &right,
            &b,
            &x0,
            Some(&p.d),
            GmresOptions::new(PrecondSide::Right, InnerProduct::DkInv),
        )
        .unwrap();
        assert!(
            l.iterations.abs_diff(r.iterations) <= 1,
            "{} {}",
            l.iterations,
            r.iterations
        );
        let res = vector::norm2(&vector::sub(&b, &p.a.matvec(&x)));
        assert!(res < 1e-5 * vector::norm2(&b));
    }
}
