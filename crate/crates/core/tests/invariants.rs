use proptest::prelude::*;
use vertex_duality::duality::{DualityVariant, IdentityChecker, IdentityKind};
use vertex_duality::evolve::{build_step_matrix, BoundarySpec, Direction, StepSpec};
use vertex_duality::state::LatticeWindow;
use vertex_duality::{Exec, Rational};

fn rational() -> impl Strategy<Value = Rational> {
    (-9i64..=9, 1i64..=9)
        .prop_filter("nonzero", |(a, _)| *a != 0)
        .prop_map(|(a, b)| Rational::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_rows_sum_to_one_and_conserve(
        n in 1usize..=2,
        caps in prop::collection::vec(1u32..=2, 1..=3),
        q in rational(),
        z in rational(),
        reversed in any::<bool>(),
    ) {
        let window = LatticeWindow::new(-(caps.len() as i64), -1, caps.clone(), caps[0]).unwrap();
        let (dir, bd) = if reversed {
            (Direction::Reversed, BoundarySpec::REVERSED_ABSORB)
        } else {
            (Direction::Forward, BoundarySpec::FORWARD_EXIT)
        };
        let spec = StepSpec::new(n, q, window, vec![z; caps.len()], dir, bd);
        // poles and degenerate q are rejected up front, not mid-sweep
        let Ok(m) = build_step_matrix(&spec, Exec::default()) else { return Ok(()) };
        prop_assert!(m.validate_stochastic().is_ok());
        prop_assert!(m.validate_conservation().is_ok());
    }

    #[test]
    fn sequential_and_parallel_agree(q in rational(), z in rational()) {
        let window = LatticeWindow::uniform(-2, 0, 2).unwrap();
        let spec = StepSpec::new(2, q, window, vec![z; 3], Direction::Forward, BoundarySpec::FORWARD_EXIT);
        let Ok(a) = build_step_matrix(&spec, Exec::Sequential) else { return Ok(()) };
        let b = build_step_matrix(&spec, Exec::Parallel).unwrap();
        prop_assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn half_line_duality_holds_for_generic_parameters(
        q in rational(),
        z in prop::collection::vec(rational(), 3),
        caps in prop::collection::vec(1u32..=2, 3),
    ) {
        let window = LatticeWindow::new(-3, -1, caps.clone(), caps[0]).unwrap();
        let Ok(c) = IdentityChecker::new(IdentityKind::Theorem1, DualityVariant::Normalized, 1, &q, &window, &z) else {
            return Ok(());
        };
        let Ok(rep) = c.check(Exec::default(), 0) else { return Ok(()) };
        prop_assert!(rep.passed(), "{}", rep);
    }
}
