//! `sg run`, `sg partitions` and `sg sequential`.

use std::path::Path;

use serde::Serialize;
use workbench::ensembles::{
    binomial_se, build_partition, compare_hidden_vs_sequential, intersect_partitions, sample_hidden,
    sequential_measurement, single_probability, EnsemblePartition, HiddenSample, HiddenVsSequential, Probability,
    SequentialTable, Table2,
};
use workbench::export::{snapshot_csv, trajectory_csv, trajectory_summaries, to_json};
use workbench::guidance::{
    check_equivariance, expectation_description_a, expectation_description_b, order_inversions, Lobes, Trajectory,
};
use workbench::quantum::{born_probability, rotate_basis, Direction, Outcome};
use workbench::sampling::ks_critical_99;
use workbench::scenario::{Scenario, ScenarioConfig};
use workbench::Direction64;

use crate::{write_plot, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct ValueWithError {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LobeSummary {
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_split: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub separation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
}

impl LobeSummary {
    fn of(l: &Lobes<f64>) -> Self {
        match l {
            Lobes::Single { .. } => LobeSummary {
                kind: "single",
                x_split: None,
                overlap: None,
                separation: None,
                width: None,
            },
            Lobes::Separated {
                x_split,
                overlap,
                width,
                separation,
                ..
            } => LobeSummary {
                kind: "separated",
                x_split: Some(*x_split),
                overlap: Some(*overlap),
                separation: Some(*separation),
                width: Some(*width),
            },
            Lobes::Unresolved { .. } => LobeSummary {
                kind: "unresolved",
                x_split: None,
                overlap: None,
                separation: None,
                width: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Equivariance {
    pub ks_distance: f64,
    pub critical_99: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SgRunResult {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub n: usize,
    pub t_final: f64,
    pub p_plus: Probability,
    pub p_minus: Probability,
    /// `(cos²θ/2, sin²θ/2)`.
    pub born: [f64; 2],
    pub e_description_a: ValueWithError,
    pub e_description_b: f64,
    pub e_quantum: f64,
    pub e_difference: f64,
    pub equivariance: Equivariance,
    pub unresolved: usize,
    pub escaped: usize,
    pub order_inversions: usize,
    pub final_norm: f64,
    pub lobes: LobeSummary,
}

fn born_pair(cfg: &ScenarioConfig, device: &Direction64) -> CliResult<[f64; 2]> {
    let (p, m) = born_probability(&rotate_basis(&cfg.prepared_state::<f64>(), &Direction::z(), device))?;
    Ok([p, m])
}

pub fn sg_run(cfg: &ScenarioConfig, plots: Option<&Path>) -> CliResult<SgRunResult> {
    let scenario = Scenario::<f64>::new(*cfg)?;
    let n = cfg.ensemble.n_samples;
    let sample = sample_hidden(&scenario.initial_density_field(), n, cfg.ensemble.seed)?;
    let device = Direction::z();
    let state = cfg.prepared_state::<f64>();
    let run = scenario.run_device(device, &state, &sample.x0s, None)?;
    let failed = run.failed();
    scenario.check_failures(failed, n)?;

    let outcomes = run.outcomes();
    let plus = outcomes.iter().filter(|o| **o == Outcome::Plus).count();
    let minus = outcomes.iter().filter(|o| **o == Outcome::Minus).count();
    let resolved = plus + minus;

    let trajectories = &run.run.trajectories;
    let resolved_only: Vec<Trajectory<f64>>;
    let for_a: &[Trajectory<f64>] = if failed == 0 {
        trajectories
    } else {
        resolved_only = trajectories.iter().filter(|t| t.outcome.is_resolved()).cloned().collect();
        &resolved_only
    };
    let e_a = expectation_description_a(for_a, &run.run.initial)?;
    let e_b = expectation_description_b(&run.run.final_field);
    let e_q = device.dot(&cfg.preparation_axis());

    let positions: Vec<f64> = trajectories.iter().filter(|t| !t.escaped).map(|t| t.final_position()).collect();
    let ks = check_equivariance(&positions, &run.run.final_field);

    if let Some(dir) = plots {
        let initial = &run.run.initial;
        let fin = &run.run.final_field;
        let prop = scenario.propagator();
        write_plot(dir, "snapshot_initial.csv", &snapshot_csv(initial, &prop.density_current(initial)))?;
        write_plot(dir, "snapshot_final.csv", &snapshot_csv(fin, &prop.density_current(fin)))?;
        write_plot(dir, "trajectories.csv", &trajectory_csv(&run.run))?;
        write_plot(dir, "trajectories.json", &to_json(&trajectory_summaries(&run.run))?)?;
    }

    Ok(SgRunResult {
        theta_deg: cfg.spin.theta_deg,
        phi_deg: cfg.spin.phi_deg,
        n,
        t_final: scenario.t_final(),
        p_plus: Probability::binomial(plus, resolved),
        p_minus: Probability::binomial(minus, resolved),
        born: born_pair(cfg, &device)?,
        e_description_a: ValueWithError {
            value: e_a.value,
            std_error: e_a.std_error,
        },
        e_description_b: e_b,
        e_quantum: e_q,
        e_difference: e_a.value - e_b,
        equivariance: Equivariance {
            ks_distance: ks,
            critical_99: ks_critical_99(positions.len()),
            n: positions.len(),
        },
        unresolved: failed,
        escaped: run.run.escaped,
        order_inversions: order_inversions(trajectories),
        final_norm: run.run.final_field.norm(),
        lobes: LobeSummary::of(&run.lobes),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SingleTables {
    /// `[P(+), P(−)]` per setting, keyed by role.
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub born_a: [f64; 2],
    pub born_b: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct HiddenJointOut {
    /// The intersection measure is not the outcome distribution of any experiment.
    pub observable: bool,
    pub table: Table2<f64>,
    pub counts: [[usize; 2]; 2],
    pub marginal_a: [f64; 2],
    pub marginal_b: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct FrechetCheck {
    pub holds: bool,
    pub violations: Vec<(usize, usize)>,
    pub marginals_exact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct McErrors {
    pub single_a: [f64; 2],
    pub single_b: [f64; 2],
    pub hidden_joint: Table2<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequential: Option<Table2<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tables {
    pub single: SingleTables,
    pub hidden_joint: HiddenJointOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sequential: Option<SequentialOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Unresolved {
    pub a: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartitionsResult {
    /// `(a, b)` in degrees, planar axes measured from `+z`.
    pub settings: [f64; 2],
    pub n: usize,
    pub tables: Tables,
    pub frechet: FrechetCheck,
    pub mc_errors: McErrors,
    pub unresolved_count: Unresolved,
}

fn probs(p: &EnsemblePartition<f64>) -> CliResult<[f64; 2]> {
    Ok([
        single_probability(p, Outcome::Plus)?.value,
        single_probability(p, Outcome::Minus)?.value,
    ])
}

fn ses(p: &EnsemblePartition<f64>) -> CliResult<[f64; 2]> {
    Ok([
        single_probability(p, Outcome::Plus)?.std_error,
        single_probability(p, Outcome::Minus)?.std_error,
    ])
}

fn partitions_report(
    cfg: &ScenarioConfig,
    settings: [f64; 2],
    pa: &EnsemblePartition<f64>,
    pb: &EnsemblePartition<f64>,
    sequential: Option<&SequentialTable<f64>>,
) -> CliResult<PartitionsResult> {
    let joint = intersect_partitions(pa, pb)?;
    let violations = joint.frechet_violations(1e-12);
    Ok(PartitionsResult {
        settings,
        n: pa.n(),
        tables: Tables {
            single: SingleTables {
                a: probs(pa)?,
                b: probs(pb)?,
                born_a: born_pair(cfg, &pa.setting)?,
                born_b: born_pair(cfg, &pb.setting)?,
            },
            hidden_joint: HiddenJointOut {
                observable: false,
                table: joint.table,
                counts: joint.counts,
                marginal_a: joint.marginal_a,
                marginal_b: joint.marginal_b,
            },
            sequential: sequential.map(SequentialOut::of),
        },
        frechet: FrechetCheck {
            holds: violations.is_empty(),
            violations,
            marginals_exact: joint.marginals_match(pa, pb),
        },
        mc_errors: McErrors {
            single_a: ses(pa)?,
            single_b: ses(pb)?,
            hidden_joint: joint.std_errors(),
            sequential: sequential.map(|s| s.std_errors()),
        },
        unresolved_count: Unresolved {
            a: pa.unresolved(),
            b: pb.unresolved(),
        },
    })
}

fn shared_sample(cfg: &ScenarioConfig, scenario: &Scenario<f64>) -> CliResult<HiddenSample<f64>> {
    Ok(sample_hidden(
        &scenario.initial_density_field(),
        cfg.ensemble.n_samples,
        cfg.ensemble.seed,
    )?)
}

pub fn sg_partitions(
    cfg: &ScenarioConfig,
    theta_a_deg: f64,
    theta_b_deg: f64,
    plots: Option<&Path>,
) -> CliResult<PartitionsResult> {
    let scenario = Scenario::<f64>::new(*cfg)?;
    let sample = shared_sample(cfg, &scenario)?;
    let pa = build_partition(&sample, Direction::planar_degrees(theta_a_deg), &scenario)?;
    let pb = build_partition(&sample, Direction::planar_degrees(theta_b_deg), &scenario)?;
    if let Some(dir) = plots {
        let mut csv = String::from("sample_id,x0,outcome_a,outcome_b\n");
        let value = |o: &Outcome| o.value().map_or(0, i32::from);
        for (i, ((x0, oa), ob)) in sample.x0s.iter().zip(&pa.outcomes).zip(&pb.outcomes).enumerate() {
            csv.push_str(&format!(
                "{i},{},{},{}\n",
                workbench::export::sig17(*x0),
                value(oa),
                value(ob)
            ));
        }
        write_plot(dir, "partitions.csv", &csv)?;
    }
    partitions_report(cfg, [theta_a_deg, theta_b_deg], &pa, &pb, None)
}

#[derive(Debug, Clone, Serialize)]
pub struct SequentialOut {
    /// `table[α′ on first][α on second]`.
    pub table: Table2<f64>,
    pub reference: Table2<f64>,
    pub unresolved: usize,
    pub first_marginal: [f64; 2],
    pub max_reference_deviation: f64,
}

impl SequentialOut {
    fn of(s: &SequentialTable<f64>) -> Self {
        let mut dev: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                dev = dev.max((s.table[i][j] - s.reference[i][j]).abs());
            }
        }
        SequentialOut {
            table: s.table,
            reference: s.reference,
            unresolved: s.unresolved,
            first_marginal: s.first_marginal(),
            max_reference_deviation: dev,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderDelta {
    /// The reverse-order table, transposed so cells align with the forward table.
    pub reverse: SequentialOut,
    pub difference: Table2<f64>,
    pub sigma: Table2<f64>,
    pub max_z: f64,
    pub distinct: bool,
    /// The hidden table against the reverse-order sequential table.
    pub hidden_vs_reverse: HiddenVsSequential,
}

#[derive(Debug, Clone, Serialize)]
pub struct SequentialResult {
    /// `(first, second)` in degrees.
    pub settings: [f64; 2],
    pub n: usize,
    pub tables: Tables,
    pub hidden_vs_sequential: HiddenVsSequential,
    pub mc_errors: McErrors,
    pub unresolved_count: Unresolved,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub both_orders: Option<OrderDelta>,
}

fn transpose(t: &Table2<f64>) -> Table2<f64> {
    [[t[0][0], t[1][0]], [t[0][1], t[1][1]]]
}

pub fn sg_sequential(
    cfg: &ScenarioConfig,
    first_deg: f64,
    second_deg: f64,
    both_orders: bool,
) -> CliResult<SequentialResult> {
    let scenario = Scenario::<f64>::new(*cfg)?;
    let sample = shared_sample(cfg, &scenario)?;
    let first = Direction::planar_degrees(first_deg);
    let second = Direction::planar_degrees(second_deg);
    let seq = sequential_measurement(&sample, first, second, &scenario)?;
    let pa = EnsemblePartition::from_outcomes(first, sample.key(), seq.first_outcomes.clone());
    let pb = build_partition(&sample, second, &scenario)?;
    let joint = intersect_partitions(&pa, &pb)?;
    let cmp = compare_hidden_vs_sequential(&joint, &seq)?;
    let base = partitions_report(cfg, [first_deg, second_deg], &pa, &pb, Some(&seq))?;

    let both = if both_orders {
        let rev = sequential_measurement(&sample, second, first, &scenario)?;
        let hidden_vs_reverse = compare_hidden_vs_sequential(&joint, &rev)?;
        let mut out = SequentialOut::of(&rev);
        out.table = transpose(&rev.table);
        out.reference = transpose(&rev.reference);
        let mut difference = [[0.0; 2]; 2];
        let mut sigma = [[0.0; 2]; 2];
        let mut max_z: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                difference[i][j] = seq.table[i][j] - out.table[i][j];
                sigma[i][j] = (binomial_se(seq.table[i][j], seq.n).powi(2)
                    + binomial_se(out.table[i][j], rev.n).powi(2))
                .sqrt();
                if sigma[i][j] > 0.0 {
                    max_z = max_z.max(difference[i][j].abs() / sigma[i][j]);
                } else if difference[i][j] != 0.0 {
                    max_z = f64::INFINITY;
                }
            }
        }
        Some(OrderDelta {
            reverse: out,
            difference,
            sigma,
            max_z,
            distinct: max_z > 5.0,
            hidden_vs_reverse,
        })
    } else {
        None
    };

    Ok(SequentialResult {
        settings: base.settings,
        n: base.n,
        tables: base.tables,
        hidden_vs_sequential: cmp,
        mc_errors: base.mc_errors,
        unresolved_count: Unresolved {
            a: seq.unresolved,
            b: pb.unresolved(),
        },
        both_orders: both,
    })
}
