//! Property tests of invariants that must hold for every admissible input.

use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hybrid_schwarz::assembly::ProblemConfig;
use hybrid_schwarz::decomp::{Cover, CoverSpec};
use hybrid_schwarz::experiment::{Problem, ProblemSpec};
use hybrid_schwarz::krylov::contraction_fit;
use hybrid_schwarz::linalg::{vector, Factorization, TripletBuilder};
use hybrid_schwarz::meshfe::{FeSpace, Mesh, Rect};
use hybrid_schwarz::precond::PrecondSide;
use hybrid_schwarz::verify::{theorem_bound, TheoremConstants};
use hybrid_schwarz::C64;

/// Cover parameters that `Cover::build` accepts: cores of at least e + 1 cells.
fn cover_params() -> impl Strategy<Value = (usize, usize, usize, usize)> {
    (1usize..=2, 1usize..=3, 2usize..=4).prop_flat_map(|(p, ns, e)| {
        let min = ns * (e + 1);
        (Just(p), (min..=min + 6), Just(ns), Just(e))
    })
}

fn complex() -> impl Strategy<Value = C64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_of_unity_and_enlarged_cutoff((p, n, ns, e) in cover_params(), x in 0.0..=1.0f64, y in 0.0..=1.0f64) {
        let config = ProblemConfig::impedance();
        let mesh = Arc::new(Mesh::structured(Rect::unit_square(), n, n).unwrap());
        let space = FeSpace::new(mesh, p, config.global_dirichlet()).unwrap();
        let cover_spec = CoverSpec { per_side: ns, extension: e, smoothness: p };
        let cover = Cover::build(&space, &cover_spec, &config).unwrap();
        prop_assert!((cover.pou_sum([x, y]) - 1.0).abs() <= 1e-13);
        for sub in &cover.subdomains {
            let chi = sub.cutoff.chi([x, y]);
            prop_assert!((0.0..=1.0).contains(&chi));
            if chi > 0.0 {
                prop_assert_eq!(sub.cutoff.chi_gt([x, y]), 1.0);
            }
        }
    }

    #[test]
    fn csr_matvec_and_adjoint_agree_with_triplets(
        entries in prop::collection::vec((0usize..7, 0usize..5, complex()), 0..30),
        x in prop::collection::vec(complex(), 5),
        y in prop::collection::vec(complex(), 7),
    ) {
        let mut b = TripletBuilder::new(7, 5);
        let mut expect = vector::zeros(7);
        for &(i, j, v) in &entries {
            b.push(i, j, v);
            expect[i] += v * x[j];
        }
        let a = b.build();
        let ax = a.matvec(&x);
        prop_assert!(vector::norm2(&vector::sub(&ax, &expect)) <= 1e-12 * (1.0 + vector::norm2(&expect)));
        // ⟨Ax, y⟩ = ⟨x, A^H y⟩
        let lhs = vector::inner(&ax, &y);
        let rhs = vector::inner(&x, &a.matvec_adjoint(&y));
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
    }

    #[test]
    fn sparse_lu_solves_diagonally_dominant_systems(
        entries in prop::collection::vec((0usize..12, 0usize..12, complex()), 0..60),
        rhs in prop::collection::vec(complex(), 12),
    ) {
        let mut b = TripletBuilder::new(12, 12);
        for &(i, j, v) in &entries {
            b.push(i, j, v);
        }
        for i in 0..12 {
            b.push(i, i, C64::new(130.0, 1.0));
        }
        let a = b.build();
        let x = Factorization::new(&a).unwrap().solve(&rhs);
        let r = vector::sub(&a.matvec(&x), &rhs);
        prop_assert!(vector::norm2(&r) <= 1e-12 * vector::norm2(&rhs).max(1e-300));
    }

    #[test]
    fn theorem_bound_is_monotone(
        base in prop::collection::vec(0.01..10.0f64, 8),
        which in 0usize..8,
        factor in 1.0..3.0f64,
    ) {
        let build = |v: &[f64]| TheoremConstants {
            lambda: Some(v[0]),
            mu: Some(v[1]),
            gamma: Some(v[2]),
            c_com: Some(v[3]),
            c_pou: Some(v[4]),
            c_cont: Some(v[5]),
            k_delta: Some(1.0),
            sigma_l2: Some(v[6]),
            sigma_h1: Some(v[7]),
        };
        let mut grown = base.clone();
        grown[which] *= factor;
        let (a, b) = (theorem_bound(&build(&base)).unwrap(), theorem_bound(&build(&grown)).unwrap());
        prop_assert!(b >= a * (1.0 - 1e-12));
    }

    #[test]
    fn contraction_fit_recovers_geometric_rates(c in 0.05..0.95f64, len in 4usize..30) {
        let history: Vec<f64> = (0..len).map(|n| c.powi(n as i32)).collect();
        prop_assert!((contraction_fit(&history).unwrap() - c).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn preconditioner_is_linear_with_consistent_adjoint(seed in any::<u64>(), alpha in complex(), beta in complex(), right in any::<bool>()) {
        let p = Problem::build(&ProblemSpec::impedance(6.0, 1, 12, 4, 2, 3)).unwrap();
        let side = if right { PrecondSide::Right } else { PrecondSide::Left };
        let b = p.preconditioner(side).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (u, v) = (vector::random(&mut rng, p.n_dofs()), vector::random(&mut rng, p.n_dofs()));
        let mut comb = vector::zeros(p.n_dofs());
        vector::axpy(alpha, &u, &mut comb);
        vector::axpy(beta, &v, &mut comb);
        let mut expect = vector::zeros(p.n_dofs());
        vector::axpy(alpha, &b.apply(&u), &mut expect);
        vector::axpy(beta, &b.apply(&v), &mut expect);
        prop_assert!(vector::norm2(&vector::sub(&b.apply(&comb), &expect)) <= 1e-10 * vector::norm2(&expect));
        let lhs = vector::inner(&b.apply(&u), &v);
        let rhs = vector::inner(&u, &b.apply_adjoint(&v));
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1e-300));
    }
}
