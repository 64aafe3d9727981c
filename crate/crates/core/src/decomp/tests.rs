use super::*;
use crate::assembly::{assemble_norm_matrices, ProblemConfig};
use crate::meshfe::{Mesh, Rect};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(n: usize, p: usize, config: &ProblemConfig) -> FeSpace {
    let mesh = Arc::new(Mesh::structured(Rect::unit_square(), n, n).unwrap());
    FeSpace::new(mesh, p, config.global_dirichlet()).unwrap()
}

fn cover(n: usize, p: usize, per_side: usize, e: usize) -> (FeSpace, Cover) {
    let cfg = ProblemConfig::impedance();
    let s = space(n, p, &cfg);
    let c = Cover::build(
        &s,
        &CoverSpec {
            per_side,
            extension: e,
            smoothness: p,
        },
        &cfg,
    )
    .unwrap();
    (s, c)
}

#[test]
fn single_subdomain_is_trivial() {
    let (s, c) = cover(4, 1, 1, 0);
    assert_eq!(c.lambda, 1);
    let sub = &c.subdomains[0];
    assert_eq!(sub.n_local(), s.n_dofs());
    assert!(sub.chi.iter().chain(&sub.chi_gt).all(|&v| v == 1.0));
    assert_eq!(sub.cutoff.chi_derivative([0.3, 0.7], [1, 0]), 0.0);
    assert_eq!(sub.cutoff.chi_gt_derivative([0.3, 0.7], [1, 1]), 0.0);
}

#[test]
fn two_by_two_with_half_overlap() {
    // cores of 8 cells, extension 4 cells: each subdomain spans 12 of 16 cells
    let (_, c) = cover(16, 1, 2, 4);
    assert_eq!(c.lambda, 4);
    assert_eq!(c.len(), 4);
}

#[test]
fn four_by_four_covers_every_element() {
    let (s, c) = cover(32, 1, 4, 2);
    assert!(c.covers(&s.mesh));
    assert_eq!(c.lambda, 9);
}

#[test]
fn partition_of_unity_at_nodes_and_quadrature_points() {
    for p in [1, 2] {
        let (s, c) = cover(24, p, 3, 3);
        for g in 0..s.n_dofs() {
            assert!((c.pou_sum(s.dof_coord(g)) - 1.0).abs() < 1e-14);
        }
        let rule = s.quadrature();
        for t in (0..s.mesh.n_elements()).step_by(7) {
            let map = s.mesh.element_map(t);
            for r in &rule.points {
                assert!((c.pou_sum(map.point(*r)) - 1.0).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn oversampled_cutoff_is_one_on_support_of_chi() {
    let (s, c) = cover(24, 2, 3, 3);
    for sub in &c.subdomains {
        for (l, &g) in sub.local_dofs.global.iter().enumerate() {
            if sub.chi[l] > 0.0 {
                assert_eq!(sub.chi_gt[l], 1.0);
            }
            assert!(sub.chi_gt[l] >= sub.chi[l]);
            let x = s.dof_coord(g);
            assert_eq!(sub.cutoff.chi(x) * sub.cutoff.chi_gt(x), sub.cutoff.chi(x));
        }
        // χ^> vanishes on the interior part of ∂Ω_ℓ
        let r = sub.cells.rect(&s.mesh);
        let dom = sub.cells.domain_sides(&s.mesh);
        for y in [r.y0 + 0.3 * r.height(), r.y0 + 0.6 * r.height()] {
            if !dom.contains(crate::meshfe::Side::Left) {
                assert_eq!(sub.cutoff.chi_gt([r.x0, y]), 0.0);
            }
            if !dom.contains(crate::meshfe::Side::Right) {
                assert_eq!(sub.cutoff.chi_gt([r.x1, y]), 0.0);
            }
        }
    }
}

#[test]
fn normal_derivative_vanishes_on_domain_boundary() {
    let (_, c) = cover(24, 1, 3, 3);
    for sub in &c.subdomains {
        for t in [0.1, 0.35, 0.5, 0.8] {
            assert_eq!(sub.cutoff.chi_gt_derivative([0.0, t], [1, 0]), 0.0);
            assert_eq!(sub.cutoff.chi_gt_derivative([t, 1.0], [0, 1]), 0.0);
            assert_eq!(sub.cutoff.chi_derivative([1.0, t], [1, 0]), 0.0);
        }
    }
}

#[test]
fn restriction_matrices() {
    let (s, c) = cover(12, 1, 2, 3);
    let sub = &c.subdomains[3];
    let r = sub.restriction_matrix(Weight::ChiGt);
    let rtr = r.transpose().matmul(&r).unwrap();
    for (l, &g) in sub.local_dofs.global.iter().enumerate() {
        let want = sub.cutoff.chi_gt(s.dof_coord(g)).powi(2);
        assert!((rtr.get(g, g).re - want).abs() < 1e-15);
        let rc = sub.restriction_matrix(Weight::Chi);
        if sub.chi[l] == 1.0 {
            assert_eq!(rc.row(l).0, &[g]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = vector::random(&mut rng, s.n_dofs());
    let direct = r.matvec(&v);
    assert_eq!(direct, sub.restrict(Weight::ChiGt, &v));
    let y = vector::random(&mut rng, sub.n_local());
    let mut out = vector::zeros(s.n_dofs());
    sub.extend_add(Weight::ChiGt, &y, &mut out);
    let want = r.matvec_transpose(&y);
    assert!(vector::norm_inf(&vector::sub(&out, &want)) < 1e-15);
}

#[test]
fn local_dirichlet_removes_interior_boundary_dofs() {
    let cfg = ProblemConfig::pml(0.1, 5.0);
    let s = space(12, 1, &cfg);
    let c = Cover::build(
        &s,
        &CoverSpec {
            per_side: 2,
            extension: 3,
            smoothness: 1,
        },
        &cfg,
    )
    .unwrap();
    let sub = &c.subdomains[0];
    // closure: 10x10 nodes minus global Dirichlet on left/bottom → 9x9
    assert_eq!(sub.closure_dofs.len(), 81);
    assert_eq!(sub.local_dofs.len(), 64);
}

#[test]
fn overlap_inequality_holds() {
    let (s, c) = cover(32, 1, 4, 2);
    let nm = assemble_norm_matrices(&s, 10.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ratio = c.overlap_inequality_ratio(&s, &nm.d, 100, &mut rng);
    assert!(ratio > 0.0 && ratio <= 1.0, "{ratio}");
    let (s1, c1) = cover(8, 1, 1, 0);
    let nm1 = assemble_norm_matrices(&s1, 1.0).unwrap();
    let r1 = c1.overlap_inequality_ratio(&s1, &nm1.d, 5, &mut rng);
    assert!((r1 - 0.5).abs() < 1e-12);
}

fn scaled_derivative_sup(n: usize, per_side: usize, e: usize) -> [f64; 4] {
    let (_, c) = cover(n, 2, per_side, e);
    // an interior subdomain, sampled across its whole overlap region
    let sub = &c.subdomains[per_side + 1];
    let r = sub.cells.rect(&sub_mesh(n));
    let mut worst = [0.0f64; 4];
    for i in 0..600 {
        for j in 0..60 {
            let x = [
                r.x0 + r.width() * i as f64 / 599.0,
                r.y0 + r.height() * (0.3 + 0.4 * j as f64 / 59.0),
            ];
            for order in 1..=3 {
                for ax in 0..=order {
                    let d = sub.cutoff.chi_derivative(x, [ax, order - ax]).abs();
                    worst[order] = worst[order].max(d * c.delta.powi(order as i32));
                }
            }
        }
    }
    worst
}

fn sub_mesh(n: usize) -> Mesh {
    Mesh::structured(Rect::unit_square(), n, n).unwrap()
}

#[test]
fn derivative_bounds_scale_with_delta() {
    // halving h and δ together leaves δ^|α| sup|∂^α χ| unchanged
    let coarse = scaled_derivative_sup(48, 3, 3);
    let fine = scaled_derivative_sup(96, 6, 3);
    for order in 1..=3 {
        assert!(
            coarse[order].is_finite() && coarse[order] > 0.0,
            "{coarse:?}"
        );
        assert!(
            (fine[order] / coarse[order] - 1.0).abs() < 0.1,
            "{coarse:?} {fine:?}"
        );
    }
}

#[test]
fn rejects_small_overlap_and_cores() {
    let cfg = ProblemConfig::impedance();
    let s = space(16, 1, &cfg);
    let spec = |per_side, extension| CoverSpec {
        per_side,
        extension,
        smoothness: 1,
    };
    assert!(matches!(
        Cover::build(&s, &spec(2, 1), &cfg),
        Err(Error::Cover(_))
    ));
    assert!(matches!(
        Cover::build(&s, &spec(8, 2), &cfg),
        Err(Error::Cover(_))
    ));
    assert!(Cover::build(&s, &spec(20, 2), &cfg).is_err());
}

#[test]
fn spec_from_wavelength_multiples() {
    let mesh = Mesh::structured(Rect::unit_square(), 64, 64).unwrap();
    // k = 20: core 4/k = 0.2 → 5 per side; overlap 0.9375/k → 3 cells of 1/64
    let spec =
        CoverSpec::from_wavelength_multiples(&mesh, 20.0, 4.0 + 2.0 * 0.9375, 0.9375, 2).unwrap();
    assert_eq!(
        spec,
        CoverSpec {
            per_side: 5,
            extension: 3,
            smoothness: 2
        }
    );
    assert!(CoverSpec::from_wavelength_multiples(&mesh, 20.0, 1.0, 1.0, 2).is_err());
}
