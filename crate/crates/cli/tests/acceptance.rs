//! Acceptance criteria 1–10 on the default scenario. Prints one PASS/FAIL line
//! per criterion and exits nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use workbench::bell::behavior::Behavior;
use workbench::bell::chsh::correlation;
use workbench::bell::fine::FineOutcome;
use workbench::bell::model::{coincidence, Integration, LocalModel};
use workbench::ensembles::{build_partition, intersect_partitions, sample_hidden, stratified_joint_table};
use workbench::guidance::{check_equivariance, integrate_trajectories, EvolveSpec};
use workbench::quantum::{Direction, SpinCoefficients};
use workbench::sampling::sample_positions;
use workbench::scenario::{Scenario, ScenarioConfig};
use workbench::solver::{init_gaussian_packet, FieldProfile, Grid1D, Propagator};
use workbench_cli::bell::{bell_bound, bell_chsh, bell_fine, bell_fine_scan, bell_toy, ModelName};
use workbench_cli::sg::{sg_run, sg_sequential, SgRunResult};
use workbench_cli::{render, with_envelope};

const THETAS: [f64; 6] = [0.0, 30.0, 60.0, 90.0, 120.0, 180.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn config(theta_deg: f64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.spin.theta_deg = theta_deg;
    cfg
}

fn born_runs() -> Vec<SgRunResult> {
    THETAS.iter().map(|&t| sg_run(&config(t), None).expect("sg run")).collect()
}

fn criterion_1(runs: &[SgRunResult]) -> Verdict {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for r in runs {
        let want = (r.theta_deg.to_radians() / 2.0).cos().powi(2);
        let se = (want * (1.0 - want) / r.n as f64).sqrt();
        let dev = (r.p_plus.value - want).abs();
        pass &= dev <= 3.0 * se && r.unresolved == 0;
        worst = worst.max(if se > 0.0 { dev / se } else { dev });
    }
    verdict(pass, format!("max |P(+) - cos^2(theta/2)| = {worst:.3} SE over {} angles", runs.len()))
}

fn criterion_2(runs: &[SgRunResult]) -> Verdict {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for r in runs {
        // Roundoff floor for the eigenstate angles, where the MC error is zero.
        let tol = (3.0 * r.e_description_a.std_error).max(1e-9);
        let cos = r.theta_deg.to_radians().cos();
        let a = r.e_description_a.value;
        let b = r.e_description_b;
        pass &= (a - b).abs() < tol && (a - cos).abs() < tol && (b - cos).abs() < tol;
        worst = worst.max((a - b).abs() / tol).max((a - cos).abs() / tol).max((b - cos).abs() / tol);
    }
    verdict(pass, format!("worst deviation {worst:.3} of the 3-SE tolerance"))
}

fn criterion_3(runs: &[SgRunResult]) -> Verdict {
    let grid = Grid1D::new(-40.0, 40.0, 4096).unwrap();
    let spin = SpinCoefficients::up_along(&Direction::planar_degrees(60.0));
    let f0 = init_gaussian_packet(grid, 0.0, 1.0, 0.0, spin).unwrap();
    let x0s = sample_positions(&f0, 10_000, 42);
    let spec = EvolveSpec {
        profile: FieldProfile::free(),
        t_final: 2.0,
        dt: 1e-3,
        snapshot_every: 50,
    };
    let run = integrate_trajectories(&x0s, &f0, &spec).unwrap();
    let free = check_equivariance(&run.final_positions(), &run.final_field);
    let sg = runs.iter().map(|r| r.equivariance.ks_distance).fold(0.0, f64::max);
    verdict(free < 0.03 && sg < 0.03, format!("KS free {free:.4}, SG max over angles {sg:.4}"))
}

fn continuity_residual(n: usize, dt: f64, t: f64) -> f64 {
    let grid = Grid1D::new(-40.0, 40.0, n).unwrap();
    let prop = Propagator::new(grid, dt);
    let profile = FieldProfile::new(1.0, 0.0, 25.0, 0.0, 0.2, Direction::z()).unwrap();
    let spin = SpinCoefficients::up_along(&Direction::planar_degrees(60.0));
    let f0 = init_gaussian_packet(grid, 0.0, 1.0, 0.0, spin).unwrap();
    let before = prop.drive(&f0, &profile, t - dt, |_, _, _| Ok(())).unwrap();
    let now = prop.step(&before, &profile, dt);
    let after = prop.step(&now, &profile, dt);
    let (r0, r2) = (before.density(), after.density());
    let j: Vec<Complex64> = prop.density_current(&now).j.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let dj = prop.derivative(&j);
    (0..n)
        .map(|i| ((r2[i] - r0[i]) / (2.0 * dt) + dj[i].re).abs())
        .fold(0.0, f64::max)
}

fn criterion_4(runs: &[SgRunResult]) -> Verdict {
    let grid = Grid1D::new(-40.0, 40.0, 4096).unwrap();
    let f0 = init_gaussian_packet(grid, 0.0, 1.0, 0.0, SpinCoefficients::up()).unwrap();
    let f = Propagator::new(grid, 1e-3)
        .drive(&f0, &FieldProfile::free(), 2.0, |_, _, _| Ok(()))
        .unwrap();
    let (_, sigma) = f.position_moments();
    let want = (1.0 + 1.0f64).sqrt();
    let width = ((sigma - want) / want).abs();

    let drift = runs.iter().map(|r| (r.final_norm - 1.0).abs()).fold(0.0, f64::max);

    let levels = [(1024, 4e-3), (2048, 2e-3), (4096, 1e-3)];
    let res: Vec<f64> = levels.iter().map(|&(n, dt)| continuity_residual(n, dt, 0.1)).collect();
    let orders: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = orders.iter().copied().fold(f64::INFINITY, f64::min);

    verdict(
        width < 1e-4 && drift < 1e-8 && order >= 1.8,
        format!("width rel err {width:.2e}, norm drift {drift:.2e}, continuity order {order:.2}"),
    )
}

fn report_with_threads(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let cfg = config(60.0);
    pool.install(|| {
        let r = with_envelope("sg run", Some(&cfg), None, false, || sg_run(&cfg, None)).unwrap();
        render(&r).unwrap()
    })
}

fn criterion_5(runs: &[SgRunResult]) -> Verdict {
    let inversions: usize = runs.iter().map(|r| r.order_inversions).sum();
    let one = report_with_threads(1);
    let four = report_with_threads(4);
    let again = report_with_threads(1);
    let same = one == four && one == again;
    verdict(
        inversions == 0 && same,
        format!("order inversions {inversions}, reports byte-identical across 1/4/1 threads: {same}"),
    )
}

fn criterion_6() -> Verdict {
    let angles = [0.0, 36.0, 72.0, 108.0, 144.0, 180.0];
    let cfg = config(30.0);
    let scenario = Scenario::<f64>::new(cfg).unwrap();
    let sample = sample_hidden(&scenario.initial_density_field(), cfg.ensemble.n_samples, cfg.ensemble.seed).unwrap();
    let parts: Vec<_> = angles
        .iter()
        .map(|&a| build_partition(&sample, Direction::planar_degrees(a), &scenario).unwrap())
        .collect();
    let mut frechet = 0;
    let mut exact = 0;
    for pa in &parts {
        for pb in &parts {
            let j = intersect_partitions(pa, pb).unwrap();
            frechet += j.frechet_violations(1e-12).len();
            exact += usize::from(!j.marginals_match(pa, pb));
        }
    }
    let (a, b) = (Direction::planar_degrees(72.0), Direction::planar_degrees(144.0));
    let mc = intersect_partitions(&parts[2], &parts[4]).unwrap();
    let oracle = stratified_joint_table(&scenario, a, b, 100_000).unwrap();
    let dev = (0..4)
        .map(|k| (mc.table[k / 2][k % 2] - oracle[k / 2][k % 2]).abs())
        .fold(0.0, f64::max);
    verdict(
        frechet == 0 && exact == 0 && dev < 0.02,
        format!("6x6 grid: {frechet} Frechet violations, {exact} inexact marginals; oracle max dev {dev:.4}"),
    )
}

fn criterion_7() -> Verdict {
    let r = sg_sequential(&ScenarioConfig::default(), 0.0, 45.0, true).unwrap();
    let seq = r.tables.sequential.as_ref().unwrap();
    let both = r.both_orders.as_ref().unwrap();
    let fwd = seq.max_reference_deviation;
    let rev = both.reverse.max_reference_deviation;
    let hidden_z = r.hidden_vs_sequential.max_z.max(both.hidden_vs_reverse.max_z);
    verdict(
        fwd < 0.02 && rev < 0.02 && both.max_z > 5.0 && hidden_z > 5.0,
        format!(
            "chain-rule dev {fwd:.4}/{rev:.4}, orders differ at {:.1} sigma, hidden vs sequential {hidden_z:.1} sigma",
            both.max_z
        ),
    )
}

fn criterion_8() -> Verdict {
    let bound = bell_bound().maximum;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 4000;
    let mut over = 0;
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..1000 {
        let k = rng.gen_range(1..5);
        let ball = |rng: &mut ChaCha8Rng| loop {
            let v: [f64; 3] = [(); 3].map(|_| rng.gen_range(-1.0..1.0));
            if v.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
                break v;
            }
        };
        let w = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let r1 = (0..k).map(|_| ball(&mut rng)).collect();
        let r2 = (0..k).map(|_| ball(&mut rng)).collect();
        let model = LocalModel::bloch(w, r1, r2).unwrap();
        let dirs = [(); 4].map(|_| Direction::planar(rng.gen_range(0.0..2.0 * PI)));
        let integ = Integration::MonteCarlo { samples: n, seed: i };
        let mut e = [0.0; 4];
        let mut sigma = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let t = coincidence(&model, &dirs[x], &dirs[2 + y], integ).unwrap();
                e[2 * x + y] = correlation(&t.table);
                sigma += ((1.0 - e[2 * x + y].powi(2)).max(0.0) / n as f64).sqrt();
            }
        }
        let s = Behavior::from_correlations([0.0; 4], e)
            .chsh_values()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        worst = worst.max(s - 2.0 - 3.0 * sigma);
        over += usize::from(s > 2.0 + 3.0 * sigma);
    }
    let singlet = bell_chsh(ModelName::Singlet, [0.0, 90.0, 45.0, 135.0], 0, 0).unwrap();
    let err = (singlet.max_abs_s - 2.0 * 2f64.sqrt()).abs();
    verdict(
        bound == 2.0 && over == 0 && err < 1e-12,
        format!("bound {bound}, {over}/1000 models above 2+3sigma (max excess {worst:.4}), singlet |S| error {err:.1e}"),
    )
}

fn criterion_9() -> Verdict {
    let scan = bell_fine_scan(2000, 42).unwrap();
    let fine = bell_fine(Behavior::singlet([0.0, 90.0, 45.0, 135.0])).unwrap();
    let label = match &fine.outcome {
        FineOutcome::Infeasible { certificate, .. } => Some(certificate.label.clone()),
        FineOutcome::Feasible { .. } => None,
    };
    verdict(
        scan.disagreements == 0 && scan.feasible > 0 && scan.infeasible > 0 && label.is_some(),
        format!(
            "{} behaviors ({} feasible, {} infeasible), {} disagreements; singlet certificate {:?}",
            scan.n, scan.feasible, scan.infeasible, scan.disagreements, label
        ),
    )
}

fn criterion_10() -> Verdict {
    let n = 100_000;
    let toy = bell_toy(n, 42, 4).unwrap();
    verdict(
        toy.points.len() == 5 && toy.max_scaled_deviation < 3.0,
        format!("max |E - (-1 + 2theta/pi)| * sqrt(n) = {:.3} at n = {n}", toy.max_scaled_deviation),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |k: usize, start: Instant, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {k:>2}: {tag}  {} [{:.1}s]", v.detail, start.elapsed().as_secs_f64());
        all &= v.pass;
    };
    let t = Instant::now();
    let runs = born_runs();
    report(1, t, criterion_1(&runs));
    report(2, Instant::now(), criterion_2(&runs));
    let t = Instant::now();
    report(3, t, criterion_3(&runs));
    let t = Instant::now();
    report(4, t, criterion_4(&runs));
    let t = Instant::now();
    report(5, t, criterion_5(&runs));
    let t = Instant::now();
    report(6, t, criterion_6());
    let t = Instant::now();
    report(7, t, criterion_7());
    let t = Instant::now();
    report(8, t, criterion_8());
    let t = Instant::now();
    report(9, t, criterion_9());
    let t = Instant::now();
    report(10, t, criterion_10());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
