//! Hidden-variable bookkeeping over one shared sample of initial positions:
//! the partitions `E(α, a)`, single-setting probabilities, the intersection
//! measure of two partitions, and sequential two-device statistics.
//!
//! The intersection table is a property of the outcome map over initial
//! positions. No single experiment measures it; every serialized form carries
//! `observable: false`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quantum::{born_probability, rotate_basis, sequential_chain_probability, Direction, Outcome};
use crate::real::Real;
use crate::sampling::{ks_distance, sample_positions, stratified_grid, DensityCdf};
use crate::scenario::{DeviceRun, Scenario};
use crate::solver::SpinorField;

/// 2×2 table indexed `[first outcome][second outcome]`, `Plus → 0`.
pub type Table2<T> = [[T; 2]; 2];

/// Identity of a hidden sample: partitions may only be intersected when these match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SampleKey {
    pub seed: u64,
    pub n: usize,
    pub checksum: u64,
}

/// Initial positions drawn from `ρ(·, t0)`. Drawing takes no device setting.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSample<T> {
    pub seed: u64,
    pub x0s: Vec<T>,
    pub t0: T,
    key: SampleKey,
}

impl<T: Real> HiddenSample<T> {
    pub fn key(&self) -> SampleKey {
        self.key
    }

    pub fn len(&self) -> usize {
        self.x0s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0s.is_empty()
    }

    /// KS distance of the sample against `ρ(·, t0)` of `initial`.
    pub fn ks_against(&self, initial: &SpinorField<T>) -> T {
        ks_distance(&self.x0s, &DensityCdf::from_field(initial))
    }
}

fn checksum<T: Real>(xs: &[T]) -> u64 {
    // FNV-1a over the f64 bit patterns.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in xs {
        for b in x.to_f64_lossy().to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

pub fn sample_hidden<T: Real>(initial: &SpinorField<T>, n: usize, seed: u64) -> Result<HiddenSample<T>> {
    if n == 0 {
        return Err(Error::invalid("hidden sample needs n >= 1"));
    }
    let x0s = sample_positions(initial, n, seed);
    let key = SampleKey {
        seed,
        n,
        checksum: checksum(&x0s),
    };
    Ok(HiddenSample {
        seed,
        x0s,
        t0: initial.t,
        key,
    })
}

/// `E(+, a)` and `E(−, a)` over one hidden sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsemblePartition<T> {
    pub setting: Direction<T>,
    pub sample: SampleKey,
    pub outcomes: Vec<Outcome>,
    pub plus: Vec<usize>,
    pub minus: Vec<usize>,
}

impl<T: Real> EnsemblePartition<T> {
    pub fn from_outcomes(setting: Direction<T>, sample: SampleKey, outcomes: Vec<Outcome>) -> Self {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, o) in outcomes.iter().enumerate() {
            match o {
                Outcome::Plus => plus.push(i),
                Outcome::Minus => minus.push(i),
                Outcome::Unresolved => {}
            }
        }
        EnsemblePartition {
            setting,
            sample,
            outcomes,
            plus,
            minus,
        }
    }

    pub fn n(&self) -> usize {
        self.outcomes.len()
    }

    pub fn unresolved(&self) -> usize {
        self.n() - self.plus.len() - self.minus.len()
    }

    pub fn subset(&self, outcome: Outcome) -> &[usize] {
        match outcome {
            Outcome::Minus => &self.minus,
            _ => &self.plus,
        }
    }
}

/// Runs the full pilot-wave pipeline for `setting` on every sampled position.
pub fn build_partition<T: Real>(
    sample: &HiddenSample<T>,
    setting: Direction<T>,
    scenario: &Scenario<T>,
) -> Result<EnsemblePartition<T>> {
    let state = scenario.config().prepared_state::<T>();
    let run = scenario.run_device(setting, &state, &sample.x0s, None)?;
    scenario.check_failures(run.failed(), sample.len())?;
    Ok(EnsemblePartition::from_outcomes(setting, sample.key, run.outcomes()))
}

/// A probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probability {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Probability {
    pub fn binomial(count: usize, n: usize) -> Self {
        let p = if n > 0 { count as f64 / n as f64 } else { 0.0 };
        Probability {
            value: p,
            std_error: binomial_se(p, n),
            n,
        }
    }
}

pub fn binomial_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// `|E(α, a)|` over the resolved samples.
pub fn single_probability<T: Real>(partition: &EnsemblePartition<T>, outcome: Outcome) -> Result<Probability> {
    if !outcome.is_resolved() {
        return Err(Error::invalid("single probability needs a resolved outcome"));
    }
    let resolved = partition.plus.len() + partition.minus.len();
    Ok(Probability::binomial(partition.subset(outcome).len(), resolved))
}

/// `𝒫(α, a, β, b) = |E(α, a) ∩ E(β, b)| / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenJointTable<T> {
    pub a: Direction<T>,
    pub b: Direction<T>,
    pub table: Table2<f64>,
    pub counts: [[usize; 2]; 2],
    pub n: usize,
    /// Row sums, `P(α, a)` restricted to samples resolved under both settings.
    pub marginal_a: [f64; 2],
    pub marginal_b: [f64; 2],
}

impl<T: Real> HiddenJointTable<T> {
    pub fn total(&self) -> f64 {
        self.table.iter().flatten().sum()
    }

    /// Cells outside `[max(0, pα + pβ − 1), min(pα, pβ)]`, as `(α, β)` indices.
    pub fn frechet_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut bad = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let (pa, pb) = (self.marginal_a[i], self.marginal_b[j]);
                let lower = (pa + pb - self.total()).max(0.0);
                let upper = pa.min(pb);
                let v = self.table[i][j];
                if v < lower - tol || v > upper + tol {
                    bad.push((i, j));
                }
            }
        }
        bad
    }

    pub fn std_errors(&self) -> Table2<f64> {
        self.table.map(|row| row.map(|p| binomial_se(p, self.n)))
    }

    /// Row and column counts equal `|E(α, a)|` and `|E(β, b)|` exactly. Holds
    /// whenever every sample is resolved under both settings.
    pub fn marginals_match(&self, pa: &EnsemblePartition<T>, pb: &EnsemblePartition<T>) -> bool {
        let c = &self.counts;
        c[0][0] + c[0][1] == pa.plus.len()
            && c[1][0] + c[1][1] == pa.minus.len()
            && c[0][0] + c[1][0] == pb.plus.len()
            && c[0][1] + c[1][1] == pb.minus.len()
    }
}

pub fn intersect_partitions<T: Real>(
    pa: &EnsemblePartition<T>,
    pb: &EnsemblePartition<T>,
) -> Result<HiddenJointTable<T>> {
    if pa.sample != pb.sample || pa.n() != pb.n() {
        return Err(Error::InvalidPairing);
    }
    let n = pa.n();
    let mut counts = [[0usize; 2]; 2];
    for (oa, ob) in pa.outcomes.iter().zip(&pb.outcomes) {
        if let (Some(i), Some(j)) = (oa.index(), ob.index()) {
            counts[i][j] += 1;
        }
    }
    let table = counts.map(|row| row.map(|c| c as f64 / n as f64));
    Ok(HiddenJointTable {
        a: pa.setting,
        b: pb.setting,
        marginal_a: [table[0][0] + table[0][1], table[1][0] + table[1][1]],
        marginal_b: [table[0][0] + table[1][0], table[0][1] + table[1][1]],
        table,
        counts,
        n,
    })
}

/// Deterministic quadrature of the intersection measure: a midpoint grid of
/// `n_grid` initial positions weighted by `ρ(x₀, t0)·Δx₀`.
pub fn stratified_joint_table<T: Real>(
    scenario: &Scenario<T>,
    a: Direction<T>,
    b: Direction<T>,
    n_grid: usize,
) -> Result<Table2<f64>> {
    let (xs, ws) = stratified_grid(&scenario.initial_density_field(), n_grid);
    let state = scenario.config().prepared_state::<T>();
    let ra = scenario.run_device(a, &state, &xs, Some(&ws))?;
    let rb = scenario.run_device(b, &state, &xs, Some(&ws))?;
    let mut table = [[0.0; 2]; 2];
    for ((ta, tb), w) in ra.run.trajectories.iter().zip(&rb.run.trajectories).zip(&ws) {
        if let (Some(i), Some(j)) = (ta.outcome.index(), tb.outcome.index()) {
            table[i][j] += w.to_f64_lossy();
        }
    }
    Ok(table)
}

/// Outcomes of two successive devices, `table[α′ on first][α on second]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialTable<T> {
    pub first: Direction<T>,
    pub second: Direction<T>,
    pub table: Table2<f64>,
    pub n: usize,
    pub unresolved: usize,
    /// Stage-one outcome of every sample, the partition of `first`.
    pub first_outcomes: Vec<Outcome>,
    /// Chain-rule prediction for the same preparation.
    pub reference: Table2<f64>,
}

impl<T: Real> SequentialTable<T> {
    pub fn std_errors(&self) -> Table2<f64> {
        self.table.map(|row| row.map(|p| binomial_se(p, self.n)))
    }

    pub fn first_marginal(&self) -> [f64; 2] {
        [self.table[0][0] + self.table[0][1], self.table[1][0] + self.table[1][1]]
    }
}

/// Runs `first`, then re-prepares each exit in its spin eigenstate (fresh
/// packet, quantile-matched position) and runs `second`.
pub fn sequential_measurement<T: Real>(
    sample: &HiddenSample<T>,
    first: Direction<T>,
    second: Direction<T>,
    scenario: &Scenario<T>,
) -> Result<SequentialTable<T>> {
    let state = scenario.config().prepared_state::<T>();
    let n = sample.len();
    let stage1 = scenario.run_device(first, &state, &sample.x0s, None)?;
    let mut second_outcome = vec![Outcome::Unresolved; n];
    for branch in [Outcome::Plus, Outcome::Minus] {
        let branch_state = first.eigenstate(branch);
        let fresh = scenario.packet(rotate_basis(&branch_state, &Direction::z(), &second))?;
        let restart = second_stage_positions(&stage1, branch, &fresh)?;
        if restart.is_empty() {
            continue;
        }
        let x0s: Vec<T> = restart.iter().map(|r| r.1).collect();
        let stage2 = scenario.run_device(second, &branch_state, &x0s, None)?;
        for ((id, _), traj) in restart.iter().zip(&stage2.run.trajectories) {
            second_outcome[*id] = traj.outcome;
        }
    }
    let mut counts = [[0usize; 2]; 2];
    let mut unresolved = 0;
    for (traj, o2) in stage1.run.trajectories.iter().zip(&second_outcome) {
        match (traj.outcome.index(), o2.index()) {
            (Some(i), Some(j)) => counts[i][j] += 1,
            _ => unresolved += 1,
        }
    }
    scenario.check_failures(unresolved, n)?;
    let table = counts.map(|row| row.map(|c| c as f64 / n as f64));
    let mut reference = [[0.0; 2]; 2];
    for (i, o1) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
        for (j, o2) in [Outcome::Plus, Outcome::Minus].into_iter().enumerate() {
            reference[i][j] =
                sequential_chain_probability(&first, &second, &state, o1, o2)?.to_f64_lossy();
        }
    }
    Ok(SequentialTable {
        first,
        second,
        table,
        n,
        unresolved,
        first_outcomes: stage1.outcomes(),
        reference,
    })
}

fn second_stage_positions<T: Real>(
    stage1: &DeviceRun<T>,
    branch: Outcome,
    fresh: &SpinorField<T>,
) -> Result<Vec<(usize, T)>> {
    if !stage1.run.trajectories.iter().any(|t| t.outcome == branch) {
        return Ok(Vec::new());
    }
    stage1.branch_restart(branch, fresh)
}

/// Element-wise `lhs − rhs`.
pub fn table_difference(lhs: &Table2<f64>, rhs: &Table2<f64>) -> Table2<f64> {
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            d[i][j] = lhs[i][j] - rhs[i][j];
        }
    }
    d
}

/// The hidden intersection table next to a sequential table on the same settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HiddenVsSequential {
    /// Both tables indexed `[outcome on the sequential table's first][outcome on its second]`.
    pub hidden: Table2<f64>,
    pub sequential: Table2<f64>,
    pub difference: Table2<f64>,
    pub sigma: Table2<f64>,
    pub max_z: f64,
    /// Some cell differs by more than 5 combined standard errors.
    pub distinct: bool,
}

pub fn compare_hidden_vs_sequential<T: Real>(
    joint: &HiddenJointTable<T>,
    seq: &SequentialTable<T>,
) -> Result<HiddenVsSequential> {
    let same = |x: &Direction<T>, y: &Direction<T>| x.angle_to(y) < T::lit(1e-9);
    let hidden = if same(&joint.a, &seq.first) && same(&joint.b, &seq.second) {
        joint.table
    } else if same(&joint.a, &seq.second) && same(&joint.b, &seq.first) {
        [[joint.table[0][0], joint.table[1][0]], [joint.table[0][1], joint.table[1][1]]]
    } else {
        return Err(Error::invalid("hidden and sequential tables use different settings"));
    };
    let difference = table_difference(&hidden, &seq.table);
    let mut sigma = [[0.0; 2]; 2];
    let mut max_z: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let s = (binomial_se(hidden[i][j], joint.n).powi(2)
                + binomial_se(seq.table[i][j], seq.n).powi(2))
            .sqrt();
            sigma[i][j] = s;
            let d = difference[i][j].abs();
            let z = if s > 0.0 {
                d / s
            } else if d > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            max_z = max_z.max(z);
        }
    }
    Ok(HiddenVsSequential {
        hidden,
        sequential: seq.table,
        difference,
        sigma,
        max_z,
        distinct: max_z > 5.0,
    })
}

/// Born-rule reference `(P(+), P(−))` for the scenario's preparation measured along `setting`.
pub fn born_reference<T: Real>(scenario: &Scenario<T>, setting: &Direction<T>) -> Result<(f64, f64)> {
    let state = scenario.config().prepared_state::<T>();
    let (p, m) = born_probability(&rotate_basis(&state, &Direction::z(), setting))?;
    Ok((p.to_f64_lossy(), m.to_f64_lossy()))
}
