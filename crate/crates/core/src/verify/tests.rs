use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::experiment::{Medium, ProblemSpec};

fn full() -> TheoremConstants {
    TheoremConstants {
        lambda: Some(1.0),
        mu: Some(0.0),
        gamma: Some(1.0),
        c_com: Some(1.0),
        c_pou: Some(0.0),
        c_cont: Some(1.0),
        k_delta: Some(1.0),
        sigma_l2: Some(1.0),
        sigma_h1: Some(1.0),
    }
}

#[test]
fn theorem_bound_examples() {
    assert_eq!(theorem_bound(&full()).unwrap(), 4.0);
    let zero = TheoremConstants {
        sigma_l2: Some(0.0),
        ..full()
    };
    assert_eq!(theorem_bound(&zero).unwrap(), 0.0);
    let missing = TheoremConstants {
        gamma: None,
        ..full()
    };
    assert!(matches!(
        theorem_bound(&missing),
        Err(Error::MissingConstant("gamma"))
    ));
    // second summand alone: 2·(1 + 1·1·2)·μ·σ_H¹
    let second = TheoremConstants {
        mu: Some(0.5),
        sigma_l2: Some(0.0),
        ..full()
    };
    assert!((theorem_bound(&second).unwrap() - 2.0 * (1.0 + 1.5 * 2.0) * 0.5).abs() < 1e-15);
}

fn small() -> Problem {
    Problem::build(&ProblemSpec::impedance(6.0, 1, 12, 6, 2, 3)).unwrap()
}

#[test]
fn infsup_of_norm_matrix_is_one_and_scales() {
    let p = small();
    let sub = &p.cover.subdomains[0];
    let (d, _) = local_metrics(&p.space, sub, &sub.local_dofs, 6.0).unwrap();
    let dmat = assemble_norm_matrices_on(
        &p.space,
        &sub.cells.elements(&p.space.mesh),
        &sub.local_dofs,
        6.0,
    )
    .unwrap()
    .d;
    for mode in [EstimateMode::Dense, EstimateMode::sampled(200)] {
        let g = measure_infsup(&dmat, &d, mode).unwrap();
        assert!((g - 1.0).abs() < 1e-6, "{g}");
        let g2 = measure_infsup(&dmat.scaled(C64::new(2.0, 0.0)), &d, mode).unwrap();
        assert!((g2 - 0.5).abs() < 1e-6, "{g2}");
    }
    let singular = CsrMatrix::zeros(dmat.nrows(), dmat.ncols());
    assert_eq!(
        measure_infsup(&singular, &d, EstimateMode::Dense).unwrap(),
        f64::INFINITY
    );
}

#[test]
fn gram_matrix_matches_direct_interpolation_error() {
    let p = Problem::build(&ProblemSpec::impedance(6.0, 2, 12, 6, 2, 3)).unwrap();
    let sub = &p.cover.subdomains[1];
    let k = 6.0;
    let cut = &sub.cutoff;
    let chi = |x: [f64; 2]| (cut.chi(x), cut.chi_grad(x));
    let g = interpolation_gram(&p.space, sub, k, &chi).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let w = vector::random(&mut rng, sub.closure_dofs.len());
    let quad = g.matvec(&w);
    let via_gram = vector::inner(&quad, &w).re;
    // direct: nodal values of v and of I_h(χ v), then quadrature of the difference
    let v = p.space.expand(&sub.closure_dofs.extend(&w));
    let iv: Vec<C64> = v
        .iter()
        .enumerate()
        .map(|(n, x)| x * cut.chi(p.space.node_coord(n)))
        .collect();
    let rule = p.space.quadrature();
    let mut direct = 0.0;
    for t in sub.cells.elements(&p.space.mesh) {
        let map = p.space.mesh.element_map(t);
        for (r, wq) in rule.points.iter().zip(&rule.weights) {
            let x = map.point(*r);
            let (vx, gv) = p.space.eval_nodal(&v, map.point(*r));
            let (ix, gi) = p.space.eval_nodal(&iv, map.point(*r));
            let (c, gc) = chi(x);
            let e = c * vx - ix;
            let ge = [
                gc[0] * vx + c * gv[0] - gi[0],
                gc[1] * vx + c * gv[1] - gi[1],
            ];
            direct +=
                wq * map.area() * ((ge[0].norm_sqr() + ge[1].norm_sqr()) / (k * k) + e.norm_sqr());
        }
    }
    assert!(
        (via_gram - direct).abs() <= 1e-8 * direct,
        "{via_gram} {direct}"
    );
    assert!(direct > 0.0);
}

#[test]
fn degenerate_cover_has_zero_mu_and_commutator() {
    let p = Problem::build(&ProblemSpec::impedance(6.0, 1, 12, 6, 1, 2)).unwrap();
    let sub = &p.cover.subdomains[0];
    let (d, m) = local_metrics(&p.space, sub, &sub.closure_dofs, 6.0).unwrap();
    assert_eq!(
        measure_mu(&p.space, sub, &d, 6.0, EstimateMode::Dense).unwrap(),
        0.0
    );
    assert_eq!(
        measure_commutator(&p.space, sub, &p.coeffs, &d, &m, EstimateMode::Dense).unwrap(),
        0.0
    );
}

#[test]
fn commutator_two_ways_agree() {
    let p = Problem::build(
        &ProblemSpec::impedance(8.0, 2, 12, 6, 2, 3).with_medium(Medium::SmoothBump),
    )
    .unwrap();
    let sub = &p.cover.subdomains[0];
    let k = 8.0;
    let u = p
        .space
        .interpolate_nodes(|x| C64::from_polar(1.0, k * (0.6 * x[0] + 0.8 * x[1])));
    let v = p
        .space
        .interpolate_nodes(|x| C64::new((x[0] * 3.0).sin() + x[1], x[0] * x[1]));
    let (diff, direct) = commutator_two_ways(&p.space, sub, &p.coeffs, &u, &v).unwrap();
    assert!(
        (diff - direct).norm() <= 1e-10 * direct.norm(),
        "{diff} {direct}"
    );
    assert!(direct.norm() > 1e-6);
    // the assembled matrix gives the same number: c(u, v) = V^H C U
    let c = commutator_matrix(&p.space, sub, &p.coeffs).unwrap();
    let gather = |nodal: &[C64]| -> Vec<C64> {
        sub.closure_dofs
            .global
            .iter()
            .map(|&g| nodal[p.space.dof_node(g)])
            .collect()
    };
    let (uu, vv) = (gather(&u), gather(&v));
    let via_matrix = vector::inner(&c.matvec(&uu), &vv);
    assert!(
        (via_matrix - direct).norm() <= 1e-10 * direct.norm(),
        "{via_matrix} {direct}"
    );
}

#[test]
fn overlap_ratio_is_at_most_one() {
    let p = small();
    let r = overlap_l2_ratio(&p.space, &p.cover, &p.norms.m, 50, 3).unwrap();
    assert!(r <= 1.0 + 1e-12 && r > 0.0, "{r}");
}

#[test]
fn pou_constant_is_order_one() {
    let p = small();
    let c = measure_pou(&p.space, &p.cover);
    assert!(c > 0.5 && c < 5.0, "{c}");
}

#[test]
fn audit_is_bounded_by_defect_norm() {
    let p = small();
    let pre = p.preconditioner(PrecondSide::Left).unwrap();
    let sup = audit_defect(&pre, &p.d, 100, 4);
    let defect = pre.norm_defect(&p.d, EstimateMode::Dense).unwrap().value;
    assert!(sup <= defect * (1.0 + 1e-10) && sup > 0.0, "{sup} {defect}");
}

#[test]
fn constants_report_is_consistent_and_reproducible() {
    let p = small();
    let a = measure_constants(&p, &MeasureOptions::default()).unwrap();
    let b = measure_constants(
        &p,
        &MeasureOptions {
            seed: 99,
            mode: EstimateMode::Sampled {
                samples: 200,
                seed: 7,
            },
            ..MeasureOptions::default()
        },
    )
    .unwrap();
    for r in [&a, &b] {
        let values = [
            r.mu,
            r.gamma,
            r.c_com,
            r.c_pou,
            r.c_cont,
            r.sigma_l2,
            r.sigma_h1,
            r.eta,
            r.c_sol,
            r.theorem_rhs,
            r.defect_left,
            r.defect_right,
            r.audit_sup,
        ];
        assert!(
            values.iter().all(|v| v.is_finite() && *v >= 0.0),
            "{values:?}"
        );
        assert_eq!(
            r.theorem_rhs,
            theorem_bound(&r.theorem_constants()).unwrap()
        );
        assert_eq!(r.csv_row().len(), ConstantsReport::CSV_HEADER.len());
        assert!(r.passed());
    }
    for (x, y) in [
        (a.mu, b.mu),
        (a.gamma, b.gamma),
        (a.c_com, b.c_com),
        (a.sigma_l2, b.sigma_l2),
        (a.eta, b.eta),
    ] {
        assert!((x / y - 1.0).abs() < 0.1, "{x} {y}");
    }
    // Schatz relation between the measured coarse constants
    assert!(a.sigma_l2 <= a.eta * a.c_cont * a.sigma_h1 * (1.0 + 1e-4));
    assert!(a.summary().contains("bound on I - Q"));
}

#[test]
fn manufactured_mismatch_is_detected() {
    let spec = ProblemSpec::impedance(10.0, 1, 8, 4, 1, 2);
    let space = FeSpace::new(
        Arc::new(
            crate::meshfe::Mesh::structured(crate::meshfe::Rect::unit_square(), 8, 8).unwrap(),
        ),
        1,
        spec.config.global_dirichlet(),
    )
    .unwrap();
    let coeffs = spec.coefficients().unwrap();
    assert!(Manufactured::plane_wave(10.0, [1.0, 1.0])
        .check(&space, &coeffs, 1e-10)
        .is_ok());
    assert!(Manufactured::bubble(10.0)
        .check(&space, &coeffs, 1e-10)
        .is_ok());
    let wrong = Manufactured::plane_wave(10.0, [1.0, 0.0]).with_source(|x| C64::new(x[0], 0.0));
    assert!(matches!(
        wrong.check(&space, &coeffs, 1e-8),
        Err(Error::ManufacturedMismatch { .. })
    ));
    // a plane wave does not solve the problem in a heterogeneous medium
    let bumpy = spec.with_medium(Medium::SmoothBump);
    let err = schatz_experiment(
        &bumpy,
        &[4],
        &Manufactured::plane_wave(10.0, [1.0, 0.0]),
        EstimateMode::Dense,
    );
    assert!(matches!(err, Err(Error::ManufacturedMismatch { .. })));
}

#[test]
fn schatz_levels() {
    let spec = ProblemSpec::impedance(8.0, 2, 16, 4, 1, 2);
    for sol in [
        Manufactured::plane_wave(8.0, [0.6, 0.8]),
        Manufactured::bubble(8.0),
    ] {
        let rep =
            schatz_experiment(&spec, &[2, 4, 8, 16], &sol, EstimateMode::sampled(300)).unwrap();
        assert!(rep.fine_h1_error < 0.05, "{}", rep.fine_h1_error);
        let last = rep.levels.last().unwrap();
        assert_eq!(last.quasi_optimality, 1.0);
        assert!(last.h1_error < 1e-10);
        // the Aubin–Nitsche inequality holds on every level with the discrete constants
        assert!(rep.levels.iter().all(|l| l.qos_holds), "{:?}", rep.levels);
        assert!(rep
            .levels
            .iter()
            .any(|l| l.under_threshold && l.coarse_cells < 16));
        assert!(rep.passed());
        // η̂ decreases as the coarse level refines
        for w in rep.levels.windows(2) {
            assert!(w[1].eta <= w[0].eta * (1.0 + 1e-9));
        }
    }
}
