use num_complex::Complex64;
use proptest::prelude::*;
use workbench::bell::behavior::Behavior;
use workbench::bell::fine::fine_feasibility;
use workbench::export::sig17;
use workbench::quantum::{born_probability, rotate_basis, Direction, SpinCoefficients};
use workbench::sampling::{sample_positions, DensityCdf};
use workbench::solver::{init_gaussian_packet, FieldProfile, Grid1D, Propagator};

fn direction() -> impl Strategy<Value = Direction<f64>> {
    (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(t, p)| Direction::new(t, p))
}

fn spinor() -> impl Strategy<Value = SpinCoefficients<f64>> {
    (0.01..1.0f64, 0.0..1.0f64, -3.2..3.2f64, -3.2..3.2f64).prop_map(|(a, b, pa, pb)| {
        let n = (a * a + b * b).sqrt();
        SpinCoefficients::new(Complex64::from_polar(a / n, pa), Complex64::from_polar(b / n, pb)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rotation_preserves_norm_and_inverts(s in spinor(), a in direction(), b in direction()) {
        let r = rotate_basis(&s, &a, &b);
        prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-12);
        let back = rotate_basis(&r, &b, &a);
        let phase = if back.c_up.norm() > 1e-6 { s.c_up / back.c_up } else { s.c_down / back.c_down };
        prop_assert!((back.c_up * phase - s.c_up).norm() < 1e-10);
        prop_assert!((back.c_down * phase - s.c_down).norm() < 1e-10);
    }

    #[test]
    fn born_probabilities_follow_the_axis_angle(n in direction(), d in direction()) {
        let (p, m) = born_probability(&rotate_basis(&SpinCoefficients::up_along(&n), &Direction::z(), &d)).unwrap();
        prop_assert!((p + m - 1.0).abs() < 1e-12);
        prop_assert!((p - (1.0 + n.dot(&d)) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn steps_are_unitary(s in spinor(), g in 0.0..10.0f64, dt in 1e-4..5e-3f64) {
        let grid = Grid1D::new(-20.0, 20.0, 256).unwrap();
        let f = init_gaussian_packet(grid, 0.0, 1.0, 0.0, s).unwrap();
        let prop = Propagator::new(grid, dt).without_boundary_guard();
        let profile = FieldProfile::new(1.0, 0.2, g, 0.0, 1.0, Direction::z()).unwrap();
        let mut next = f.clone();
        for _ in 0..20 {
            next = prop.step(&next, &profile, dt);
        }
        prop_assert!((next.norm() - f.norm()).abs() < 1e-12);
        let (u0, d0) = f.component_masses();
        let (u1, d1) = next.component_masses();
        prop_assert!((u0 - u1).abs() < 1e-12 && (d0 - d1).abs() < 1e-12);
    }

    #[test]
    fn quantile_inverts_the_cdf(u in 0.001..0.999f64, c in -5.0..5.0f64) {
        let grid = Grid1D::new(-20.0, 20.0, 512).unwrap();
        let f = init_gaussian_packet(grid, c, 1.0, 0.0, SpinCoefficients::up()).unwrap();
        let cdf = DensityCdf::from_field(&f);
        prop_assert!((cdf.cdf(cdf.quantile(u)) - u).abs() < 1e-9);
    }

    #[test]
    fn sampling_depends_only_on_seed_and_index(seed in any::<u64>(), n in 1usize..50) {
        let grid = Grid1D::new(-20.0, 20.0, 512).unwrap();
        let f = init_gaussian_packet(grid, 0.0, 1.0, 0.0, SpinCoefficients::up()).unwrap();
        let long = sample_positions(&f, n + 10, seed);
        let short = sample_positions(&f, n, seed);
        prop_assert_eq!(&long[..n], &short[..]);
    }

    #[test]
    fn sig17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(sig17(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn correlation_behaviors_match_chsh_feasibility(e in prop::array::uniform4(-1.0..1.0f64)) {
        let b = Behavior::from_correlations([0.0; 4], e);
        prop_assert!(b.validate(1e-12).is_ok());
        prop_assert_eq!(fine_feasibility(&b).unwrap().is_feasible(), b.satisfies_chsh(1e-9));
    }
}
