use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workbench::bell::behavior::Behavior;
use workbench::bell::chsh::{correlation, ChshVariant};
use workbench::bell::fine::{fine_feasibility, fine_feasibility_exact};
use workbench::bell::model::{
    behavior_from_model, coincidence, hidden_joint_per_particle, single_party, Integration, LocalModel, Party,
};
use workbench::quantum::Direction;
use workbench::Error;

fn random_unit_ball(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        if v.iter().map(|x: &f64| x * x).sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

fn random_bloch_model(rng: &mut ChaCha8Rng) -> LocalModel {
    let k = rng.gen_range(1..6);
    let w = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let r1 = (0..k).map(|_| random_unit_ball(rng)).collect();
    let r2 = (0..k).map(|_| random_unit_ball(rng)).collect();
    LocalModel::bloch(w, r1, r2).unwrap()
}

fn random_angles(rng: &mut ChaCha8Rng) -> [f64; 4] {
    [(); 4].map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
}

fn max_abs_chsh(b: &Behavior) -> f64 {
    b.chsh_values().iter().map(|s| s.abs()).fold(0.0, f64::max)
}

#[test]
fn random_local_models_respect_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..1000 {
        let model = random_bloch_model(&mut rng);
        let angles = random_angles(&mut rng);
        let exact = behavior_from_model(&model, angles, Integration::Quadrature { points: 1 }).unwrap().0;
        assert!(max_abs_chsh(&exact) <= 2.0 + 1e-12, "model {i}: {:?}", exact.chsh_values());
        if i % 50 == 0 {
            let (mc, err) =
                behavior_from_model(&model, angles, Integration::MonteCarlo { samples: 4000, seed: i }).unwrap();
            // Each correlation is a ±1 average, so its error is at most 1/√n.
            let sigma = 4.0 / (4000f64).sqrt();
            assert!(max_abs_chsh(&mc) <= 2.0 + 3.0 * sigma, "model {i}: {:?}", mc.chsh_values());
            assert!(err.iter().flatten().all(|e| e.is_finite()));
        }
    }
}

#[test]
fn random_strategy_mixtures_respect_the_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let w = [(); 16].map(|_| rng.gen::<f64>());
        let total: f64 = w.iter().sum();
        let b = Behavior::mixture(&w.map(|x| x / total));
        assert!(max_abs_chsh(&b) <= 2.0 + 1e-12);
        assert!(b.satisfies_chsh(1e-9));
    }
}

#[test]
fn sphere_model_reproduces_the_linear_law() {
    let m = LocalModel::bell_toy();
    let a = Direction::z();
    for k in 0..=6 {
        let theta = std::f64::consts::PI * k as f64 / 6.0;
        let t = coincidence(&m, &a, &Direction::planar(theta), Integration::Quadrature { points: 200_000 }).unwrap();
        let want = -1.0 + 2.0 * theta / std::f64::consts::PI;
        assert!((correlation(&t.table) - want).abs() < 1e-3, "θ = {theta}");
    }
}

#[test]
fn no_signaling_holds_for_local_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let model = random_bloch_model(&mut rng);
        let (b, _) = behavior_from_model(&model, random_angles(&mut rng), Integration::Quadrature { points: 1 }).unwrap();
        let row = |t: &[f64; 4]| [t[0] + t[1], t[2] + t[3]];
        let col = |t: &[f64; 4]| [t[0] + t[2], t[1] + t[3]];
        for x in 0..2 {
            let (p, q) = (row(&b.tables[2 * x]), row(&b.tables[2 * x + 1]));
            assert!((p[0] - q[0]).abs() < 1e-12);
        }
        for y in 0..2 {
            let (p, q) = (col(&b.tables[y]), col(&b.tables[2 + y]));
            assert!((p[0] - q[0]).abs() < 1e-12);
        }
    }
}

#[test]
fn singlet_is_not_locally_producible() {
    let b = Behavior::singlet([0.0, 90.0, 45.0, 135.0]);
    assert!((max_abs_chsh(&b) - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    assert!(!fine_feasibility(&b).unwrap().is_feasible());
    assert!(!fine_feasibility_exact(&b).unwrap().is_feasible());
    // The toy model at the same angles is local and feasible.
    let toy = behavior_from_model(
        &LocalModel::bell_toy(),
        [0.0, 90.0, 45.0, 135.0].map(f64::to_radians),
        Integration::Quadrature { points: 20_000 },
    )
    .unwrap()
    .0;
    assert!(max_abs_chsh(&toy) <= 2.0 + 1e-9);
}

#[test]
fn hidden_pair_table_obeys_frechet_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let model = random_bloch_model(&mut rng);
        let [x, x2, ..] = random_angles(&mut rng).map(Direction::planar);
        for party in [Party::One, Party::Two] {
            let q = Integration::Quadrature { points: 1 };
            let h = hidden_joint_per_particle(&model, &x, &x2, party, q).unwrap();
            assert!(!h.observable);
            let (m1, _) = single_party(&model, &x, party, q).unwrap();
            let (m2, _) = single_party(&model, &x2, party, q).unwrap();
            for i in 0..2 {
                assert!((h.table[i][0] + h.table[i][1] - m1[i]).abs() < 1e-12);
                assert!((h.table[0][i] + h.table[1][i] - m2[i]).abs() < 1e-12);
                for j in 0..2 {
                    let v = h.table[i][j];
                    assert!(v <= m1[i].min(m2[j]) + 1e-12);
                    assert!(v >= (m1[i] + m2[j] - 1.0).max(0.0) - 1e-12);
                }
            }
        }
    }
}

#[test]
fn exact_and_float_programs_agree_on_dyadic_behaviors() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let pr = Behavior::pr_box();
    for _ in 0..100 {
        let w = [(); 16].map(|_| rng.gen_range(0..8) as f64);
        let total: f64 = w.iter().sum();
        if total == 0.0 {
            continue;
        }
        // Dyadic weights keep every entry exactly representable.
        let scale = 2f64.powi(6);
        let w = w.map(|x| (x / total * scale).floor() / scale);
        let rest = 1.0 - w.iter().sum::<f64>();
        let mut w = w;
        w[0] += rest;
        let local = Behavior::mixture(&w);
        let t = rng.gen_range(0..=8) as f64 / 8.0;
        let b = local.mix(&pr, t);
        let float = fine_feasibility(&b).unwrap().is_feasible();
        let exact = fine_feasibility_exact(&b).unwrap().is_feasible();
        assert_eq!(float, exact, "t = {t}");
        assert_eq!(float, b.satisfies_chsh(1e-9), "t = {t}");
    }
}

#[test]
fn absorbing_model_is_rejected_for_behaviors() {
    let m = LocalModel::absorbing([0.4, 0.5], [0.4, 0.5]).unwrap();
    let r = behavior_from_model(&m, [0.0; 4], Integration::Quadrature { points: 8 });
    assert!(matches!(r, Err(Error::Unsupported(_))));
    // Single-particle tables allow the deficit.
    let (m1, _) = single_party(&m, &Direction::z(), Party::One, Integration::Quadrature { points: 8 }).unwrap();
    assert!((m1[0] + m1[1] - 0.8).abs() < 1e-12);
}

#[test]
fn every_variant_is_bounded_for_deterministic_strategies() {
    for s in workbench::bell::chsh::DeterministicStrategy::all() {
        let e = s.correlations();
        for v in ChshVariant::all() {
            assert_eq!(v.value(&e).abs(), 2.0);
        }
    }
}
