use gflab::calculus::{exp_projection, ProjectionExponent};
use gflab::evolution::{apply_exp_group, evolve_heat, leakage};
use gflab::fiber::{project_onto_span, FiberVector, C64};
use gflab::grid::{form_a, inner, laplacian, Field, GridSpec};
use gflab::presets;
use gflab::rng::Ensemble;
use gflab::symmetry::{form_a_s_exact, gauge_field};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    prop_oneof![
        (2usize..24).prop_map(|n| GridSpec::unit_torus(vec![n]).unwrap()),
        (2usize..8, 2usize..8).prop_map(|(a, b)| GridSpec::unit_torus(vec![a, b]).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_group_law_and_unitarity(seed in any::<u64>(), d in 1usize..6, s in -10.0f64..10.0, t in -10.0f64..10.0) {
        let mut rng = Ensemble::new(seed);
        let rank = 1 + rng.below(d);
        let vs: Vec<FiberVector> = (0..rank).map(|_| FiberVector::from_slice(&rng.complex_normals(d))).collect();
        let p = project_onto_span(&vs).unwrap();
        let a = exp_projection(&p, ProjectionExponent::imaginary(s));
        let b = exp_projection(&p, ProjectionExponent::imaginary(t));
        let ab = exp_projection(&p, ProjectionExponent::imaginary(s + t));
        prop_assert!((&a.0 * &b.0 - &ab.0).norm() <= 1e-12);
        prop_assert!((a.0.adjoint() * &a.0 - DMatrix::<C64>::identity(d, d)).norm() <= 1e-12);
    }

    #[test]
    fn summation_by_parts(grid in grid_strategy(), seed in any::<u64>()) {
        let mut rng = Ensemble::new(seed);
        let f = Field::random(&grid, 2, &mut rng);
        let lhs = -inner(&laplacian(&f), &f).unwrap();
        let a = form_a(&f);
        prop_assert!((lhs.re - a).abs() <= 1e-10 * a.max(1.0));
        prop_assert!(lhs.im.abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn heat_flow_contracts_and_dissipates(grid in grid_strategy(), seed in any::<u64>(), t in 0.0f64..0.5) {
        let f = Field::random(&grid, 2, &mut Ensemble::new(seed));
        let u = evolve_heat(&f, t).unwrap();
        prop_assert!(u.norm() <= f.norm() * (1.0 + 1e-12));
        prop_assert!(form_a(&u) <= form_a(&f) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn exp_group_is_pointwise_unitary(grid in grid_strategy(), seed in any::<u64>(), s in -7.0f64..7.0) {
        let mut rng = Ensemble::new(seed);
        let p = presets::random_smooth(&grid, 3, &mut rng).unwrap();
        let f = Field::random(&grid, 3, &mut rng);
        let g = apply_exp_group(&p, s, &f).unwrap();
        prop_assert!((g.norm() - f.norm()).abs() <= 1e-12 * f.norm());
        let back = apply_exp_group(&p, -s, &g).unwrap();
        prop_assert!(back.sub(&f).unwrap().norm() <= 1e-12 * f.norm());
    }

    #[test]
    fn leibniz_form_matches_energy(grid in grid_strategy(), seed in any::<u64>(), s in -7.0f64..7.0) {
        let mut rng = Ensemble::new(seed);
        let p = presets::random_smooth(&grid, 2, &mut rng).unwrap();
        let f = Field::random(&grid, 2, &mut rng);
        let exact = form_a(&apply_exp_group(&p, s, &f).unwrap());
        prop_assert!((form_a_s_exact(&p, s, &f).unwrap() - exact).abs() <= 1e-11 * exact.max(1.0));
    }

    #[test]
    fn gauge_field_is_periodic_in_s(grid in grid_strategy(), seed in any::<u64>(), s in -7.0f64..7.0) {
        let p = presets::random_smooth(&grid, 2, &mut Ensemble::new(seed)).unwrap();
        let a = gauge_field(&p, s);
        let b = gauge_field(&p, s + std::f64::consts::TAU);
        for (x, y) in a.components.iter().zip(&b.components) {
            for (u, v) in x.values().iter().zip(y.values()) {
                prop_assert!((&u.0 - &v.0).norm() <= 1e-9 * (1.0 + u.0.norm()));
            }
        }
    }

    #[test]
    fn constant_projections_never_leak(grid in grid_strategy(), seed in any::<u64>()) {
        let mut rng = Ensemble::new(seed);
        let p = presets::random_constant(&grid, 3, &mut rng).unwrap();
        let f = Field::random(&grid, 3, &mut rng);
        match leakage(&p, &f, &[0.01, 0.1, 1.0]) {
            Ok(l) => prop_assert!(l.iter().all(|&v| v <= 1e-12)),
            Err(gflab::Error::AnnihilatedByProjection) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }
}
