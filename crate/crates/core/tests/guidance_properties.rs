use workbench::guidance::{
    check_equivariance, expectation_description_a, expectation_description_b, integrate_trajectories,
    integrate_with, order_inversions, EvolveSpec,
};
use workbench::quantum::{Direction, SpinCoefficients};
use workbench::sampling::{ks_critical_99, sample_positions, stratified_grid};
use workbench::scenario::{Scenario, ScenarioConfig};
use workbench::solver::{init_gaussian_packet, FieldProfile, Grid1D};

/// Bohm trajectory of a free Gaussian: the packet's affine flow.
fn gaussian_flow(x0: f64, center: f64, k: f64, w: f64, t: f64) -> f64 {
    let spread = (1.0 + (t / (2.0 * w * w)).powi(2)).sqrt();
    center + k * t + (x0 - center) * spread
}

fn free_spec(t_final: f64) -> EvolveSpec<f64> {
    EvolveSpec {
        profile: FieldProfile::free(),
        t_final,
        dt: 1e-3,
        snapshot_every: 100,
    }
}

#[test]
fn free_trajectories_follow_the_affine_flow() {
    let grid = Grid1D::new(-40.0_f64, 40.0, 4096).unwrap();
    for &(center, k) in &[(0.0, 0.0), (-5.0, 2.0)] {
        let f0 = init_gaussian_packet(grid, center, 1.0, k, SpinCoefficients::up()).unwrap();
        let x0s: Vec<f64> = (-8..=8).map(|i| center + 0.25 * i as f64).collect();
        let run = integrate_trajectories(&x0s, &f0, &free_spec(3.0)).unwrap();
        for tr in &run.trajectories {
            for &(t, x) in &tr.path {
                let want = gaussian_flow(tr.x0, center, k, 1.0, t);
                assert!((x - want).abs() < 1e-6, "x0 = {}, t = {t}: {x} vs {want}", tr.x0);
            }
        }
    }
}

#[test]
fn free_evolution_is_equivariant() {
    let grid = Grid1D::new(-40.0_f64, 40.0, 4096).unwrap();
    let spin = SpinCoefficients::up_along(&Direction::planar_degrees(60.0));
    let f0 = init_gaussian_packet(grid, 0.0, 1.0, 1.0, spin).unwrap();
    let x0s = sample_positions(&f0, 10_000, 42);
    let run = integrate_trajectories(&x0s, &f0, &free_spec(2.0)).unwrap();
    let ks = check_equivariance(&run.final_positions(), &run.final_field);
    assert!(ks < ks_critical_99(10_000), "KS {ks}");
    assert_eq!(order_inversions(&run.trajectories), 0);
}

#[test]
fn stratified_description_a_matches_description_b() {
    let mut cfg = ScenarioConfig::default();
    cfg.spin.theta_deg = 60.0;
    let scenario = Scenario::<f64>::new(cfg).unwrap();
    let coeffs = SpinCoefficients::up_along(&Direction::planar_degrees(60.0));
    let initial = scenario.packet(coeffs).unwrap();
    let (xs, ws) = stratified_grid(&initial, 4000);
    let profile = scenario.profile(Direction::z());
    let mut run = integrate_with(
        scenario.propagator(),
        &xs,
        Some(&ws),
        &initial,
        &profile,
        scenario.t_final(),
        50,
    )
    .unwrap();
    run.classify(scenario.overlap_epsilon());
    let a = expectation_description_a(&run.trajectories, &run.initial).unwrap();
    let b = expectation_description_b(&run.final_field);
    assert!((a.value - b).abs() < 2e-3, "A {} vs B {b}", a.value);
    assert!((b - 0.5).abs() < 1e-6, "B {b}");
}

#[test]
fn trajectories_are_reproducible() {
    let grid = Grid1D::new(-20.0_f64, 20.0, 1024).unwrap();
    let f0 = init_gaussian_packet(grid, 0.0, 1.0, 0.0, SpinCoefficients::up()).unwrap();
    let x0s = sample_positions(&f0, 500, 7);
    let a = integrate_trajectories(&x0s, &f0, &free_spec(1.0)).unwrap();
    let b = integrate_trajectories(&x0s, &f0, &free_spec(1.0)).unwrap();
    assert_eq!(a.trajectories, b.trajectories);
}
