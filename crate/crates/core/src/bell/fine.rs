//! Joint distributions over `(A_a, A_a′, B_b, B_b′)` and the feasibility test
//! whose answer must agree with the eight CHSH inequalities.

use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::stream_rng;

use super::behavior::Behavior;
use super::chsh::{ChshVariant, DeterministicStrategy, CHSH_LOCAL_BOUND};
use super::simplex::{phase_one, LpScalar};

/// Tolerance on marginal reproduction and on the CHSH comparison.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// Weights on the 16 atoms, indexed like [`DeterministicStrategy::from_index`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointDistribution16 {
    pub weights: [f64; 16],
}

impl JointDistribution16 {
    /// The behavior obtained by marginalizing onto each setting pair.
    pub fn marginalize(&self) -> Behavior {
        Behavior::mixture(&self.weights)
    }

    /// Largest absolute difference between the marginals and `behavior`.
    pub fn residual(&self, behavior: &Behavior) -> f64 {
        let m = self.marginalize();
        m.tables
            .iter()
            .flatten()
            .zip(behavior.tables.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// A violated inequality: `Σ c_k E_k ≤ bound` fails with the given value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub inequality: [i8; 4],
    pub label: String,
    pub value: f64,
    pub bound: f64,
}

impl Certificate {
    fn from_variant(v: ChshVariant, value: f64) -> Self {
        Certificate {
            inequality: v.coefficients(),
            label: v.label(),
            value,
            bound: CHSH_LOCAL_BOUND,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessSource {
    /// Product of the single-party marginals; used whenever it reproduces the behavior.
    Product,
    /// Basic solution of the linear program.
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FineOutcome {
    Feasible {
        witness: JointDistribution16,
        source: WitnessSource,
        residual: f64,
    },
    Infeasible {
        certificate: Certificate,
        infeasibility: f64,
    },
}

impl FineOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FineOutcome::Feasible { .. })
    }
}

/// Rows: one per `(x, y, α, β)`; columns: the 16 atoms.
fn constraints<S: LpScalar>(behavior: &Behavior) -> Result<(Vec<Vec<S>>, Vec<S>)> {
    let atoms = DeterministicStrategy::all();
    let idx = |v: i8| (v < 0) as usize;
    let mut a = Vec::with_capacity(16);
    let mut b = Vec::with_capacity(16);
    for x in 0..2 {
        for y in 0..2 {
            for al in 0..2 {
                for be in 0..2 {
                    a.push(
                        atoms
                            .iter()
                            .map(|s| {
                                if idx(s.a[x]) == al && idx(s.b[y]) == be {
                                    S::one()
                                } else {
                                    S::zero()
                                }
                            })
                            .collect(),
                    );
                    let p = behavior.p(x, y, al, be);
                    b.push(S::from_f64_exact(p).ok_or_else(|| Error::invalid("non-finite probability"))?);
                }
            }
        }
    }
    Ok((a, b))
}

/// Phase-1 feasibility in the scalar `S`. Returns the atom weights if feasible.
pub fn lp_feasible<S: LpScalar>(behavior: &Behavior) -> Result<(Option<Vec<S>>, S)> {
    let (a, b) = constraints::<S>(behavior)?;
    let r = phase_one(&a, &b);
    Ok((r.feasible.then_some(r.x), r.infeasibility))
}

/// Product of single-party marginals, if it reproduces `behavior` to 1e-12.
fn product_witness(behavior: &Behavior) -> Option<JointDistribution16> {
    let pa = [behavior.marginal_a(0), behavior.marginal_a(1)];
    let pb = [behavior.marginal_b(0), behavior.marginal_b(1)];
    for x in 0..2 {
        for y in 0..2 {
            for al in 0..2 {
                for be in 0..2 {
                    if (behavior.p(x, y, al, be) - pa[x][al] * pb[y][be]).abs() > 1e-12 {
                        return None;
                    }
                }
            }
        }
    }
    let idx = |v: i8| (v < 0) as usize;
    let mut weights = [0.0; 16];
    for (k, s) in DeterministicStrategy::all().iter().enumerate() {
        weights[k] = pa[0][idx(s.a[0])] * pa[1][idx(s.a[1])] * pb[0][idx(s.b[0])] * pb[1][idx(s.b[1])];
    }
    Some(JointDistribution16 { weights })
}

fn decide<S: LpScalar>(behavior: &Behavior) -> Result<FineOutcome> {
    behavior.validate(FEASIBILITY_TOLERANCE)?;
    if let Some(w) = product_witness(behavior) {
        let residual = w.residual(behavior);
        return Ok(FineOutcome::Feasible {
            witness: w,
            source: WitnessSource::Product,
            residual,
        });
    }
    let (x, infeasibility) = lp_feasible::<S>(behavior)?;
    match x {
        Some(x) => {
            let mut weights = [0.0; 16];
            for (w, v) in weights.iter_mut().zip(&x) {
                *w = v.to_f64_lossy().max(0.0);
            }
            let witness = JointDistribution16 { weights };
            let residual = witness.residual(behavior);
            Ok(FineOutcome::Feasible {
                witness,
                source: WitnessSource::Simplex,
                residual,
            })
        }
        None => {
            let (v, value) = behavior.most_violated();
            Ok(FineOutcome::Infeasible {
                certificate: Certificate::from_variant(v, value),
                infeasibility: infeasibility.to_f64_lossy(),
            })
        }
    }
}

/// Witness distribution or CHSH certificate, solved in double precision.
pub fn fine_feasibility(behavior: &Behavior) -> Result<FineOutcome> {
    decide::<f64>(behavior)
}

/// Same decision in exact rational arithmetic on the exact values of the entries.
pub fn fine_feasibility_exact(behavior: &Behavior) -> Result<FineOutcome> {
    decide::<BigRational>(behavior)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Random mixture of deterministic strategies.
    LocalMixture,
    /// Random point on the segment from a local mixture to a nonlocal box.
    TowardBox,
    /// Nonlocal box with white noise.
    NoisyBox,
    /// The point where the segment leaves the local polytope.
    Boundary,
    /// Singlet statistics at random planar angles.
    Singlet,
}

const KINDS: [ScanKind; 5] = [
    ScanKind::LocalMixture,
    ScanKind::TowardBox,
    ScanKind::NoisyBox,
    ScanKind::Boundary,
    ScanKind::Singlet,
];

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct KindSummary {
    pub count: usize,
    pub feasible: usize,
    pub max_chsh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub n: usize,
    pub seed: u64,
    pub feasible: usize,
    pub infeasible: usize,
    pub disagreements: usize,
    pub by_kind: Vec<(ScanKind, KindSummary)>,
}

fn random_mixture<R: Rng>(rng: &mut R) -> Behavior {
    // Exponential weights give a uniform point on the simplex; squaring some
    // pushes samples toward faces and vertices.
    let sharp = rng.gen_bool(0.5);
    let mut w = [0.0; 16];
    for wi in w.iter_mut() {
        let e = -(1.0 - rng.gen::<f64>()).ln();
        *wi = if sharp { e.powi(4) } else { e };
    }
    Behavior::mixture(&w)
}

/// One of the eight relabelled boxes `α ⊕ β = xy ⊕ r₁x ⊕ r₂y ⊕ r₃`.
fn random_box<R: Rng>(rng: &mut R) -> Behavior {
    let r: [usize; 3] = [rng.gen_range(0..2), rng.gen_range(0..2), rng.gen_range(0..2)];
    let mut tables = [[0.0; 4]; 4];
    for x in 0..2 {
        for y in 0..2 {
            let parity = (x * y) ^ (r[0] * x) ^ (r[1] * y) ^ r[2];
            for al in 0..2 {
                for be in 0..2 {
                    if al ^ be == parity {
                        tables[2 * x + y][2 * al + be] = 0.5;
                    }
                }
            }
        }
    }
    Behavior::new([0.0; 4], tables)
}

/// Largest `t` with every variant of `(1 − t)·local + t·nonlocal` at most 2.
fn exit_point(local: &Behavior, nonlocal: &Behavior) -> f64 {
    let s0 = local.chsh_values();
    let s1 = nonlocal.chsh_values();
    let mut t = 1.0;
    for (a, b) in s0.iter().zip(&s1) {
        if b > a && *b > 2.0 {
            t = f64::min(t, (2.0 - a) / (b - a));
        }
    }
    t
}

fn generate(kind: ScanKind, seed: u64, index: u64) -> Behavior {
    let mut rng = stream_rng(seed, index);
    match kind {
        ScanKind::LocalMixture => random_mixture(&mut rng),
        ScanKind::TowardBox => {
            let m = random_mixture(&mut rng);
            let b = random_box(&mut rng);
            m.mix(&b, rng.gen())
        }
        ScanKind::NoisyBox => {
            let b = random_box(&mut rng);
            Behavior::uniform().mix(&b, rng.gen())
        }
        ScanKind::Boundary => {
            let m = random_mixture(&mut rng);
            let b = random_box(&mut rng);
            m.mix(&b, exit_point(&m, &b))
        }
        ScanKind::Singlet => {
            let angles = [0; 4].map(|_| rng.gen_range(0.0..360.0));
            Behavior::singlet(angles)
        }
    }
}

/// Generates `n` behaviors across all kinds and checks that LP feasibility and
/// the eight-inequality test agree on each. A disagreement is a hard error
/// carrying the offending behavior as JSON.
pub fn fine_equivalence_scan(n: usize, seed: u64) -> Result<ScanReport> {
    if n == 0 {
        return Err(Error::invalid("scan needs at least one behavior"));
    }
    let results: Vec<(ScanKind, bool, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let kind = KINDS[(i as usize) % KINDS.len()];
            let b = generate(kind, seed, i);
            let feasible = fine_feasibility(&b)?.is_feasible();
            let chsh_ok = b.satisfies_chsh(FEASIBILITY_TOLERANCE);
            if feasible != chsh_ok {
                return Err(Error::ScanDisagreement(serde_json::to_string(&b)?));
            }
            Ok((kind, feasible, b.most_violated().1))
        })
        .collect::<Result<_>>()?;
    let mut by_kind: Vec<(ScanKind, KindSummary)> = KINDS
        .iter()
        .map(|&k| {
            (
                k,
                KindSummary {
                    max_chsh: f64::NEG_INFINITY,
                    ..KindSummary::default()
                },
            )
        })
        .collect();
    let mut feasible = 0;
    for (kind, ok, s) in &results {
        let entry = &mut by_kind.iter_mut().find(|(k, _)| k == kind).expect("known kind").1;
        entry.count += 1;
        entry.max_chsh = entry.max_chsh.max(*s);
        if *ok {
            entry.feasible += 1;
            feasible += 1;
        }
    }
    by_kind.retain(|(_, s)| s.count > 0);
    Ok(ScanReport {
        n,
        seed,
        feasible,
        infeasible: n - feasible,
        disagreements: 0,
        by_kind,
    })
}
