use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decomp::{Cover, CoverSpec};
use crate::linalg::{vector, DenseOracle};
use crate::meshfe::{Mesh, Rect, SideSet};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn space(n: usize, p: usize, dir: SideSet) -> FeSpace {
    let mesh = Arc::new(Mesh::structured(Rect::unit_square(), n, n).unwrap());
    FeSpace::new(mesh, p, dir).unwrap()
}

fn max_diff(a: &CsrMatrix, b: &CsrMatrix) -> f64 {
    CsrMatrix::linear_combination(c(1.0, 0.0), a, c(-1.0, 0.0), b)
        .unwrap()
        .max_abs()
}

#[test]
fn laplace_minus_mass_without_boundary_term() {
    let s = space(1, 1, SideSet::NONE);
    let coeffs = CoefficientSet::helmholtz(1.0)
        .unwrap()
        .with_theta(|_, _| c(0.0, 0.0));
    let a = assemble_global(&s, &coeffs, &ProblemConfig::impedance()).unwrap();
    let nm = assemble_norm_matrices(&s, 1.0).unwrap();
    let want = CsrMatrix::linear_combination(c(1.0, 0.0), &nm.s, c(-1.0, 0.0), &nm.m).unwrap();
    assert!(max_diff(&a, &want) < 1e-15);
}

#[test]
fn reference_triangle_stiffness() {
    // Lower triangle of the unit cell: (0,0), (1,0), (1,1), right angle at (1,0).
    let s = space(1, 1, SideSet::NONE);
    let none = |_: [f64; 2], _: &BoxEdge| Ok(C64::new(0.0, 0.0));
    let k = assemble_generic(
        &s,
        &[0],
        &DofMap::identity(4),
        &|_| Ok(Integrand::stiffness()),
        &[],
        &none,
    )
    .unwrap();
    let nodes = s.element_nodes(0);
    // reorder to (right-angle vertex, other two)
    let order = [nodes[1], nodes[0], nodes[2]];
    let want = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
    for i in 0..3 {
        for j in 0..3 {
            let (di, dj) = (s.node_dof(order[i]).unwrap(), s.node_dof(order[j]).unwrap());
            assert!((k.get(di, dj) - want[i][j]).norm() < 1e-15);
        }
    }
}

#[test]
fn impedance_block_on_one_side() {
    let s = space(1, 1, SideSet::NONE);
    let k = 2.0;
    let bottom_only = CoefficientSet::helmholtz(k).unwrap().with_theta(|_, side| {
        if side == Side::Bottom {
            c(1.0, 0.0)
        } else {
            c(0.0, 0.0)
        }
    });
    let none = CoefficientSet::helmholtz(k)
        .unwrap()
        .with_theta(|_, _| c(0.0, 0.0));
    let cfg = ProblemConfig::impedance();
    let a1 = assemble_global(&s, &bottom_only, &cfg).unwrap();
    let a0 = assemble_global(&s, &none, &cfg).unwrap();
    let d = CsrMatrix::linear_combination(c(1.0, 0.0), &a1, c(-1.0, 0.0), &a0).unwrap();
    // bottom dofs are nodes 0 and 1
    let f = c(0.0, -1.0 / k);
    let want = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
    for i in 0..4 {
        for j in 0..4 {
            let w = if i < 2 && j < 2 {
                f * want[i][j]
            } else {
                c(0.0, 0.0)
            };
            assert!((d.get(i, j) - w).norm() < 1e-15);
        }
    }
}

#[test]
fn norm_matrix_identities() {
    let s = space(6, 2, SideSet::NONE);
    let nm = assemble_norm_matrices(&s, 7.0).unwrap();
    let ones = vec![c(1.0, 0.0); s.n_dofs()];
    let dv = vector::inner(&nm.d.matvec(&ones), &ones);
    assert!((dv.re - 1.0).abs() < 1e-13);
    let total: C64 = nm.m.values().iter().sum();
    assert!((total.re - 1.0).abs() < 1e-13);
    assert!(nm.d.hermitian_defect() < 1e-15);
}

#[test]
fn sine_norm_converges() {
    let s = space(64, 1, SideSet::NONE);
    let nm = assemble_norm_matrices(&s, 1.0).unwrap();
    let v = s.interpolate(|x| c((std::f64::consts::PI * x[0]).sin(), 0.0));
    let got = vector::inner(&nm.d.matvec(&v), &v).re;
    let want = (std::f64::consts::PI.powi(2) + 1.0) / 2.0;
    assert!((got / want - 1.0).abs() < 0.01);
}

#[test]
fn norm_matrix_is_positive_definite() {
    let s = space(4, 2, SideSet::ALL);
    let nm = assemble_norm_matrices(&s, 3.0).unwrap();
    let ev = crate::linalg::dense_hermitian_eigen(&nm.d.to_dense()).unwrap();
    assert!(ev[0] > 0.0);
}

fn rich_coefficients(k: f64) -> CoefficientSet {
    CoefficientSet::helmholtz(k)
        .unwrap()
        .with_a(|x| {
            [
                [c(1.0 + x[0], 0.2), c(0.1, x[1])],
                [c(-0.3, 0.0), c(2.0, -0.5 * x[0])],
            ]
        })
        .with_inv_c2(|x| c(1.0 + x[0] * x[1], 0.1))
        .with_theta(|x, _| c(1.0, 0.3 * x[0]))
}

#[test]
fn adjoint_assembly_is_hermitian_transpose() {
    let s = space(5, 2, SideSet::NONE);
    let cfg = ProblemConfig::impedance();
    let coeffs = rich_coefficients(4.0);
    let a = assemble_global(&s, &coeffs, &cfg).unwrap();
    let ah = assemble_global(&s, &coeffs.adjoint().unwrap(), &cfg).unwrap();
    assert!(max_diff(&ah, &a.adjoint()) < 1e-14);
}

#[test]
fn constant_first_order_term() {
    let s = space(4, 1, SideSet::NONE);
    let cfg = ProblemConfig::impedance();
    let k = 3.0;
    let plain = CoefficientSet::helmholtz(k).unwrap();
    let with_b = plain.clone().with_b(|_| [c(2.0, 1.0), c(-1.0, 0.0)]);
    let diff = CsrMatrix::linear_combination(
        c(1.0, 0.0),
        &assemble_global(&s, &with_b, &cfg).unwrap(),
        c(-1.0, 0.0),
        &assemble_global(&s, &plain, &cfg).unwrap(),
    )
    .unwrap();
    // ∫ (B·∇x)·1 = B_x |Ω|, scaled by 1/k
    let u = s.interpolate(|x| c(x[0], 0.0));
    let ones = vec![c(1.0, 0.0); s.n_dofs()];
    let got = vector::inner(&diff.matvec(&u), &ones);
    assert!((got - c(2.0, 1.0) / k).norm() < 1e-13);
}

#[test]
fn garding_identity_for_unit_coefficients() {
    let s = space(8, 2, SideSet::NONE);
    let k = 6.0;
    let a = assemble_global(
        &s,
        &CoefficientSet::helmholtz(k).unwrap(),
        &ProblemConfig::impedance(),
    )
    .unwrap();
    let nm = assemble_norm_matrices(&s, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let v = vector::random(&mut rng, s.n_dofs());
        let re = vector::inner(&a.matvec(&v), &v).re;
        let dn = vector::inner(&nm.d.matvec(&v), &v).re;
        let mn = vector::inner(&nm.m.matvec(&v), &v).re;
        assert!((re - (dn - 2.0 * mn)).abs() < 1e-12 * dn);
    }
}

#[test]
fn load_vectors() {
    let s = space(5, 1, SideSet::NONE);
    let z = assemble_load(&s, &|_| c(0.0, 0.0), Some(&|_, _| c(0.0, 0.0))).unwrap();
    assert!(z.iter().all(|v| *v == c(0.0, 0.0)));
    let f = assemble_load(&s, &|_| c(1.0, 0.0), None).unwrap();
    let total: C64 = f.iter().sum();
    assert!((total.re - 1.0).abs() < 1e-14);
    let g = assemble_load(&s, &|_| c(0.0, 0.0), Some(&|_, _| c(0.0, 2.0))).unwrap();
    let total: C64 = g.iter().sum();
    assert!((total - c(0.0, 8.0)).norm() < 1e-13);
}

#[test]
fn form_action_matches_matrix() {
    let s = space(6, 2, SideSet::NONE);
    let cfg = ProblemConfig::impedance();
    let coeffs = rich_coefficients(5.0);
    let a = assemble_global(&s, &coeffs, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = vector::random(&mut rng, s.n_dofs());
    let act = global_form_action(&s, &coeffs, &cfg, &s.expand(&u)).unwrap();
    let mv = a.matvec(&u);
    assert!(vector::norm_inf(&vector::sub(&act, &mv)) < 1e-13);
}

fn one_cover(s: &FeSpace, cfg: &ProblemConfig) -> Cover {
    Cover::build(
        s,
        &CoverSpec {
            per_side: 1,
            extension: 0,
            smoothness: s.degree,
        },
        cfg,
    )
    .unwrap()
}

#[test]
fn whole_domain_subdomain_reproduces_global_matrix() {
    for cfg in [ProblemConfig::impedance(), ProblemConfig::pml(0.25, 4.0)] {
        let s = space(6, 2, cfg.global_dirichlet());
        let coeffs = match cfg.truncation {
            Truncation::Impedance => rich_coefficients(5.0),
            Truncation::CartesianPml { width, strength } => {
                pml_coefficients(Rect::unit_square(), 5.0, width, strength).unwrap()
            }
        };
        let cover = one_cover(&s, &cfg);
        let a = assemble_global(&s, &coeffs, &cfg).unwrap();
        let al = assemble_local(&s, &cover.subdomains[0], &coeffs, &coeffs, &cfg).unwrap();
        assert!(max_diff(&a, &al) < 1e-14);
    }
}

#[test]
fn local_dirichlet_and_locality() {
    let cfg = ProblemConfig::pml(0.1, 4.0);
    let s = space(12, 1, SideSet::ALL);
    let cover = Cover::build(
        &s,
        &CoverSpec {
            per_side: 2,
            extension: 3,
            smoothness: 1,
        },
        &cfg,
    )
    .unwrap();
    let global = pml_coefficients(Rect::unit_square(), 8.0, 0.1, 4.0).unwrap();
    let sub = &cover.subdomains[0];
    let al = assemble_local(&s, sub, &global, &global, &cfg).unwrap();
    assert_eq!(al.nrows(), sub.local_dofs.len());
    assert!(al.nrows() < sub.closure_dofs.len());

    // change c⁻² outside the subdomain box only
    let r = sub.cells.rect(&s.mesh);
    let g2 = global.inv_c2.clone();
    let perturbed = CoefficientSet {
        inv_c2: Arc::new(move |x| {
            if r.contains(x, 0.0) {
                g2(x)
            } else {
                g2(x) * 3.0
            }
        }),
        ..global.clone()
    };
    let ap = assemble_local(&s, sub, &perturbed, &perturbed, &cfg).unwrap();
    assert_eq!(max_diff(&al, &ap), 0.0);
    let (ag, agp) = (
        assemble_global(&s, &global, &cfg).unwrap(),
        assemble_global(&s, &perturbed, &cfg).unwrap(),
    );
    assert!(max_diff(&ag, &agp) > 1e-4);
    // perturbation inside the support is rejected
    let bad = global.clone().with_inv_c2(|_| c(2.0, 0.0));
    assert!(matches!(
        assemble_local(&s, sub, &bad, &global, &cfg),
        Err(Error::Subdomain { index: 0, .. })
    ));
}

#[test]
fn pml_decay_in_one_dimension() {
    // −k⁻² (s⁻¹ u')' s⁻¹·s − s u = 0 in weak form ∫ k⁻² s⁻¹ u' v̄' − s u v̄ on [0, 1]
    // with u(0) = 1, u(1) = 0 and the layer on [1 − w, 1]: |u| drops by exp(−∫σ).
    let k = 20.0;
    let (w, strength) = (0.3, 30.0);
    let layer = PmlLayer::new(Rect::new(-1.0, 0.0, 1.0, 1.0).unwrap(), k, w, strength).unwrap();
    let n = 2000;
    let h = 1.0 / n as f64;
    let gl = gauss_legendre_unit();
    let mut a = nalgebra::DMatrix::<C64>::zeros(n - 1, n - 1);
    let mut rhs = nalgebra::DVector::<C64>::zeros(n - 1);
    for e in 0..n {
        let mut ke = [[c(0.0, 0.0); 2]; 2];
        for &(t, wt) in &gl {
            let x = (e as f64 + t) * h;
            let s = layer.stretch(0, x);
            let phi = [1.0 - t, t];
            let dphi = [-1.0 / h, 1.0 / h];
            for i in 0..2 {
                for j in 0..2 {
                    ke[i][j] += wt * h * (dphi[j] * dphi[i] / (k * k * s) - s * phi[j] * phi[i]);
                }
            }
        }
        for i in 0..2 {
            let gi = e + i;
            if gi == 0 || gi == n {
                continue;
            }
            for j in 0..2 {
                let gj = e + j;
                if gj == 0 {
                    rhs[gi - 1] -= ke[i][j];
                } else if gj < n {
                    a[(gi - 1, gj - 1)] += ke[i][j];
                }
            }
        }
    }
    let u = DenseOracle::from_dense(a).unwrap().solve(rhs.as_slice());
    let at = |x: f64| u[(x / h).round() as usize - 1].norm();
    let interior = at(0.5);
    let inside_layer = at(1.0 - w / 3.0);
    // ∫σ from 1 − w to 1 − w/3 for σ̄ (d/w)²
    let absorbed = strength * w * (8.0 / 27.0) / 3.0;
    let want = (-absorbed).exp();
    assert!((interior - 1.0).abs() < 0.05, "{interior}");
    assert!(
        (inside_layer / interior / want - 1.0).abs() < 0.1,
        "{} vs {want}",
        inside_layer / interior
    );
}

#[test]
fn coercivity_bound_of_identity() {
    let s = space(2, 1, SideSet::NONE);
    let lo = coercivity_lower_bound(&s, &CoefficientSet::helmholtz(1.0).unwrap()).unwrap();
    assert_eq!(lo, 1.0);
}

#[test]
fn manufactured_plane_wave_converges() {
    let k = 10.0;
    let dir = [std::f64::consts::FRAC_1_SQRT_2; 2];
    let u = move |x: [f64; 2]| C64::from_polar(1.0, k * (dir[0] * x[0] + dir[1] * x[1]));
    // g = k⁻² ∂_n u − i k⁻¹ u with θ = 1 and f = 0
    let g = move |x: [f64; 2], side: Side| {
        let n = side.normal();
        let dn = c(0.0, k * (dir[0] * n[0] + dir[1] * n[1]));
        u(x) * (dn / (k * k) - c(0.0, 1.0 / k))
    };
    let mut errors = Vec::new();
    for n in [16, 32, 64] {
        let s = space(n, 1, SideSet::NONE);
        let a = assemble_global(
            &s,
            &CoefficientSet::helmholtz(k).unwrap(),
            &ProblemConfig::impedance(),
        )
        .unwrap();
        let rhs = assemble_load(&s, &|_| c(0.0, 0.0), Some(&g)).unwrap();
        let uh = crate::linalg::Factorization::new(&a).unwrap().solve(&rhs);
        let e = vector::sub(&uh, &s.interpolate(u));
        let d = assemble_norm_matrices(&s, k).unwrap().d;
        errors.push(vector::inner(&d.matvec(&e), &e).re.sqrt());
    }
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    assert!(errors[2] < 0.35 * errors[1], "{errors:?}");
}

#[test]
fn adjoint_local_matrices_are_hermitian_transposes() {
    let cfg = ProblemConfig::impedance();
    let s = space(12, 1, SideSet::NONE);
    let cover = Cover::build(
        &s,
        &CoverSpec {
            per_side: 2,
            extension: 2,
            smoothness: 1,
        },
        &cfg,
    )
    .unwrap();
    let coeffs = rich_coefficients(5.0);
    let dual = coeffs.adjoint().unwrap();
    for sub in &cover.subdomains {
        let al = assemble_local(&s, sub, &coeffs, &coeffs, &cfg).unwrap();
        let ad = assemble_local(&s, sub, &dual, &dual, &cfg.adjoint()).unwrap();
        assert!(max_diff(&ad, &al.adjoint()) < 1e-14);
    }
}
