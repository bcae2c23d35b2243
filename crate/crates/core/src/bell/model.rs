//! Local models `P₁₂(α, β | a, b) = ∫ P₁(α|a,λ) P₂(β|b,λ) ρ(λ) dλ`.
//!
//! Each party's [`Response`] is called with λ and that party's own setting
//! only; there is no code path through which party 1 can see `b`.

use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ensembles::Table2;
use crate::error::{Error, Result};
use crate::quantum::Direction;
use crate::sampling::stream_rng;

use super::behavior::Behavior;
use super::chsh::DeterministicStrategy;

/// Probabilities may exceed their bounds by this much through roundoff.
const RESPONSE_SLACK: f64 = 1e-12;

/// A point of a λ space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Vector([f64; 3]),
    Scalar(f64),
    Index(usize),
}

/// Where λ lives and how it is distributed.
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaSpace {
    /// Uniform on the unit sphere.
    Sphere,
    /// Uniform on `[0, 1]`.
    Interval,
    /// Finite set with (unnormalized) weights.
    Finite(Vec<f64>),
}

impl LambdaSpace {
    pub fn validate(&self) -> Result<()> {
        if let LambdaSpace::Finite(w) = self {
            if w.is_empty() || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(Error::InvalidModel(String::from(
                    "finite λ weights must be finite and nonnegative",
                )));
            }
            if !(w.iter().sum::<f64>() > 0.0) {
                return Err(Error::InvalidModel(String::from("λ density is not normalizable")));
            }
        }
        Ok(())
    }

    /// Sample `index` of the `seed` stream family.
    pub fn sample(&self, seed: u64, index: u64) -> Lambda {
        let mut rng = stream_rng(seed, index);
        match self {
            LambdaSpace::Sphere => {
                let z: f64 = 2.0 * rng.gen::<f64>() - 1.0;
                let phi = std::f64::consts::TAU * rng.gen::<f64>();
                let r = (1.0 - z * z).max(0.0).sqrt();
                Lambda::Vector([r * phi.cos(), r * phi.sin(), z])
            }
            LambdaSpace::Interval => Lambda::Scalar(rng.gen()),
            LambdaSpace::Finite(w) => {
                let total: f64 = w.iter().sum();
                let u = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                for (i, wi) in w.iter().enumerate() {
                    acc += wi;
                    if u < acc {
                        return Lambda::Index(i);
                    }
                }
                Lambda::Index(w.iter().rposition(|&x| x > 0.0).unwrap_or(0))
            }
        }
    }

    /// Deterministic nodes and weights summing to one. Finite spaces are exact
    /// and ignore `points`; the sphere uses a Fibonacci lattice.
    pub fn quadrature(&self, points: usize) -> Vec<(Lambda, f64)> {
        match self {
            LambdaSpace::Sphere => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                let n = points as f64;
                (0..points)
                    .map(|i| {
                        let z = 1.0 - (2.0 * i as f64 + 1.0) / n;
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        let phi = golden * i as f64;
                        (Lambda::Vector([r * phi.cos(), r * phi.sin(), z]), 1.0 / n)
                    })
                    .collect()
            }
            LambdaSpace::Interval => {
                let n = points as f64;
                (0..points)
                    .map(|i| (Lambda::Scalar((i as f64 + 0.5) / n), 1.0 / n))
                    .collect()
            }
            LambdaSpace::Finite(w) => {
                let total: f64 = w.iter().sum();
                w.iter()
                    .enumerate()
                    .map(|(i, wi)| (Lambda::Index(i), wi / total))
                    .collect()
            }
        }
    }
}

/// How an integral over λ is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integration {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature { points: usize },
}

impl Integration {
    fn check(&self) -> Result<()> {
        match *self {
            Integration::MonteCarlo { samples: 0, .. } | Integration::Quadrature { points: 0 } => {
                Err(Error::invalid("integration needs at least one point"))
            }
            _ => Ok(()),
        }
    }
}

/// Response of one party: `(P(+|λ,x), P(−|λ,x))`.
pub trait Response: Send + Sync {
    fn probabilities(&self, lambda: &Lambda, setting: &Direction<f64>) -> Result<[f64; 2]>;
}

/// `A(λ, x) = sign · sign(λ̂·x̂)`; zero dot products read `+sign`.
#[derive(Debug, Clone, Copy)]
pub struct SignResponse {
    pub sign: f64,
}

impl Response for SignResponse {
    fn probabilities(&self, lambda: &Lambda, setting: &Direction<f64>) -> Result<[f64; 2]> {
        let Lambda::Vector(v) = lambda else {
            return Err(Error::InvalidModel(String::from("sign response needs a vector λ")));
        };
        let x = setting.vector();
        let d = v[0] * x[0] + v[1] * x[1] + v[2] * x[2];
        let s = if d >= 0.0 { self.sign } else { -self.sign };
        Ok(if s > 0.0 { [1.0, 0.0] } else { [0.0, 1.0] })
    }
}

/// λ- and setting-independent response.
#[derive(Debug, Clone, Copy)]
pub struct ConstantResponse {
    pub plus: f64,
    pub minus: f64,
}

impl Response for ConstantResponse {
    fn probabilities(&self, _: &Lambda, _: &Direction<f64>) -> Result<[f64; 2]> {
        Ok([self.plus, self.minus])
    }
}

/// Stochastic response `P(±|λ, x) = (1 ± r_λ·x)/2` for a finite λ with `|r_λ| ≤ 1`.
#[derive(Debug, Clone)]
pub struct BlochResponse {
    pub vectors: Vec<[f64; 3]>,
}

impl Response for BlochResponse {
    fn probabilities(&self, lambda: &Lambda, setting: &Direction<f64>) -> Result<[f64; 2]> {
        let Lambda::Index(i) = lambda else {
            return Err(Error::InvalidModel(String::from("Bloch response needs an indexed λ")));
        };
        let r = self
            .vectors
            .get(*i)
            .ok_or_else(|| Error::InvalidModel(format!("λ index {i} out of range")))?;
        let x = setting.vector();
        let d = r[0] * x[0] + r[1] * x[1] + r[2] * x[2];
        Ok([(1.0 + d) / 2.0, (1.0 - d) / 2.0])
    }
}

/// Deterministic ±1 assignments to two named settings, selected by a finite λ.
#[derive(Debug, Clone)]
pub struct AssignmentResponse {
    pub settings: [Direction<f64>; 2],
    /// `assignments[λ][k]` is the outcome at `settings[k]`.
    pub assignments: Vec<[i8; 2]>,
}

impl Response for AssignmentResponse {
    fn probabilities(&self, lambda: &Lambda, setting: &Direction<f64>) -> Result<[f64; 2]> {
        let Lambda::Index(i) = lambda else {
            return Err(Error::InvalidModel(String::from("assignment response needs an indexed λ")));
        };
        let k = self
            .settings
            .iter()
            .position(|s| s.angle_to(setting) < 1e-9)
            .ok_or_else(|| Error::Unsupported(String::from("setting outside the assignment table")))?;
        let row = self
            .assignments
            .get(*i)
            .ok_or_else(|| Error::InvalidModel(format!("λ index {i} out of range")))?;
        Ok(if row[k] > 0 { [1.0, 0.0] } else { [0.0, 1.0] })
    }
}

/// λ space plus one response per party.
#[derive(Clone)]
pub struct LocalModel {
    pub name: String,
    pub space: LambdaSpace,
    pub party1: Arc<dyn Response>,
    pub party2: Arc<dyn Response>,
}

impl std::fmt::Debug for LocalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LocalModel")
            .field("name", &self.name)
            .field("space", &self.space)
            .finish_non_exhaustive()
    }
}

impl LocalModel {
    pub fn new(
        name: impl Into<String>,
        space: LambdaSpace,
        party1: Arc<dyn Response>,
        party2: Arc<dyn Response>,
    ) -> Result<Self> {
        space.validate()?;
        Ok(LocalModel {
            name: name.into(),
            space,
            party1,
            party2,
        })
    }

    /// `A = sign(λ̂·â)`, `B = −sign(λ̂·b̂)`, λ uniform on the sphere.
    pub fn bell_toy() -> Self {
        LocalModel {
            name: String::from("bell_toy"),
            space: LambdaSpace::Sphere,
            party1: Arc::new(SignResponse { sign: 1.0 }),
            party2: Arc::new(SignResponse { sign: -1.0 }),
        }
    }

    /// `P₁(+) = p`, `P₂(+) = q` for every λ and setting.
    pub fn constant(p: f64, q: f64) -> Result<Self> {
        Self::new(
            "constant",
            LambdaSpace::Interval,
            Arc::new(ConstantResponse { plus: p, minus: 1.0 - p }),
            Arc::new(ConstantResponse { plus: q, minus: 1.0 - q }),
        )
    }

    /// Constant responses that may lose particles (`plus + minus < 1`).
    pub fn absorbing(plus: [f64; 2], minus: [f64; 2]) -> Result<Self> {
        Self::new(
            "absorbing",
            LambdaSpace::Interval,
            Arc::new(ConstantResponse { plus: plus[0], minus: minus[0] }),
            Arc::new(ConstantResponse { plus: plus[1], minus: minus[1] }),
        )
    }

    /// Finite λ with a Bloch vector per party.
    pub fn bloch(weights: Vec<f64>, r1: Vec<[f64; 3]>, r2: Vec<[f64; 3]>) -> Result<Self> {
        if r1.len() != weights.len() || r2.len() != weights.len() {
            return Err(Error::InvalidModel(String::from("one Bloch vector per λ per party")));
        }
        let too_long = |v: &[f64; 3]| v[0] * v[0] + v[1] * v[1] + v[2] * v[2] > 1.0 + RESPONSE_SLACK;
        if r1.iter().chain(&r2).any(too_long) {
            return Err(Error::InvalidModel(String::from("Bloch vectors must have length ≤ 1")));
        }
        Self::new(
            "bloch",
            LambdaSpace::Finite(weights),
            Arc::new(BlochResponse { vectors: r1 }),
            Arc::new(BlochResponse { vectors: r2 }),
        )
    }

    /// Mixture of the 16 deterministic strategies on `(a, a′)` and `(b, b′)`.
    pub fn strategy_mixture(
        settings: [Direction<f64>; 4],
        weights: [f64; 16],
    ) -> Result<Self> {
        let all = DeterministicStrategy::all();
        Self::new(
            "strategy_mixture",
            LambdaSpace::Finite(weights.to_vec()),
            Arc::new(AssignmentResponse {
                settings: [settings[0], settings[1]],
                assignments: all.iter().map(|s| s.a).collect(),
            }),
            Arc::new(AssignmentResponse {
                settings: [settings[2], settings[3]],
                assignments: all.iter().map(|s| s.b).collect(),
            }),
        )
    }
}

fn checked(p: [f64; 2], require_total: bool) -> Result<[f64; 2]> {
    let bad = |x: f64| !x.is_finite() || !(-RESPONSE_SLACK..=1.0 + RESPONSE_SLACK).contains(&x);
    if bad(p[0]) || bad(p[1]) || p[0] + p[1] > 1.0 + RESPONSE_SLACK {
        return Err(Error::InvalidModel(format!("response {p:?} is not a sub-probability")));
    }
    if require_total && p[0] + p[1] < 1.0 - RESPONSE_SLACK {
        return Err(Error::Unsupported(String::from(
            "absorbing responses need a no-detection outcome",
        )));
    }
    Ok(p)
}

/// A 2×2 table with its integration error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratedTable {
    pub table: Table2<f64>,
    pub std_error: Table2<f64>,
}

/// Integrates the four products `f(λ)` over `space`. Monte Carlo errors are
/// sample standard errors; quadrature errors compare against the half-size rule.
fn integrate<F>(space: &LambdaSpace, integration: Integration, f: F) -> Result<IntegratedTable>
where
    F: Fn(&Lambda) -> Result<[f64; 4]> + Sync,
{
    space.validate()?;
    integration.check()?;
    let to_table = |v: [f64; 4]| [[v[0], v[1]], [v[2], v[3]]];
    match integration {
        Integration::MonteCarlo { samples, seed } => {
            let values: Vec<[f64; 4]> = (0..samples as u64)
                .into_par_iter()
                .map(|i| f(&space.sample(seed, i)))
                .collect::<Result<_>>()?;
            let n = samples as f64;
            let mut mean = [0.0; 4];
            for v in &values {
                for k in 0..4 {
                    mean[k] += v[k];
                }
            }
            mean = mean.map(|m| m / n);
            let mut var = [0.0; 4];
            for v in &values {
                for k in 0..4 {
                    var[k] += (v[k] - mean[k]).powi(2);
                }
            }
            let se = var.map(|s| if samples > 1 { (s / (n - 1.0) / n).sqrt() } else { 0.0 });
            Ok(IntegratedTable {
                table: to_table(mean),
                std_error: to_table(se),
            })
        }
        Integration::Quadrature { points } => {
            let rule = |nodes: Vec<(Lambda, f64)>| -> Result<[f64; 4]> {
                let values: Vec<([f64; 4], f64)> = nodes
                    .into_par_iter()
                    .map(|(l, w)| f(&l).map(|v| (v, w)))
                    .collect::<Result<_>>()?;
                let mut acc = [0.0; 4];
                for (v, w) in values {
                    for k in 0..4 {
                        acc[k] += w * v[k];
                    }
                }
                Ok(acc)
            };
            let full = rule(space.quadrature(points))?;
            let err = match space {
                LambdaSpace::Finite(_) => [0.0; 4],
                _ if points >= 2 => {
                    let half = rule(space.quadrature(points / 2))?;
                    [0, 1, 2, 3].map(|k| (full[k] - half[k]).abs())
                }
                _ => [f64::INFINITY; 4],
            };
            Ok(IntegratedTable {
                table: to_table(full),
                std_error: to_table(err),
            })
        }
    }
}

fn coincidence_inner(
    model: &LocalModel,
    a: &Direction<f64>,
    b: &Direction<f64>,
    integration: Integration,
    require_total: bool,
) -> Result<IntegratedTable> {
    integrate(&model.space, integration, |l| {
        let p = checked(model.party1.probabilities(l, a)?, require_total)?;
        let q = checked(model.party2.probabilities(l, b)?, require_total)?;
        Ok([p[0] * q[0], p[0] * q[1], p[1] * q[0], p[1] * q[1]])
    })
}

/// `P₁₂(α, β | a, b)` indexed `[α][β]`.
pub fn coincidence(
    model: &LocalModel,
    a: &Direction<f64>,
    b: &Direction<f64>,
    integration: Integration,
) -> Result<IntegratedTable> {
    coincidence_inner(model, a, b, integration, false)
}

/// Which party's response enters a single-particle hidden table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Party {
    One,
    Two,
}

/// `∫ P(α|x,λ) P(α′|x′,λ) ρ(λ) dλ` for one particle. Not an observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HiddenPairTable {
    pub table: Table2<f64>,
    pub std_error: Table2<f64>,
    pub observable: bool,
}

pub fn hidden_joint_per_particle(
    model: &LocalModel,
    x: &Direction<f64>,
    x2: &Direction<f64>,
    party: Party,
    integration: Integration,
) -> Result<HiddenPairTable> {
    let response = match party {
        Party::One => &model.party1,
        Party::Two => &model.party2,
    };
    let t = integrate(&model.space, integration, |l| {
        let p = checked(response.probabilities(l, x)?, false)?;
        let q = checked(response.probabilities(l, x2)?, false)?;
        Ok([p[0] * q[0], p[0] * q[1], p[1] * q[0], p[1] * q[1]])
    })?;
    Ok(HiddenPairTable {
        table: t.table,
        std_error: t.std_error,
        observable: false,
    })
}

/// Single-party marginal `∫ P(α|x,λ) ρ(λ) dλ` as `[P(+), P(−)]`.
pub fn single_party(
    model: &LocalModel,
    x: &Direction<f64>,
    party: Party,
    integration: Integration,
) -> Result<([f64; 2], [f64; 2])> {
    let response = match party {
        Party::One => &model.party1,
        Party::Two => &model.party2,
    };
    let t = integrate(&model.space, integration, |l| {
        let p = checked(response.probabilities(l, x)?, false)?;
        Ok([p[0], p[1], 0.0, 0.0])
    })?;
    Ok((t.table[0], t.std_error[0]))
}

/// The four coincidence tables at planar setting angles `(a, a′, b, b′)` in
/// radians, with their per-entry integration errors in the same layout.
pub fn behavior_from_model(
    model: &LocalModel,
    angles: [f64; 4],
    integration: Integration,
) -> Result<(Behavior, [[f64; 4]; 4])> {
    let dirs = angles.map(Direction::planar);
    let mut tables = [[0.0; 4]; 4];
    let mut errors = [[0.0; 4]; 4];
    for x in 0..2 {
        for y in 0..2 {
            let t = coincidence_inner(model, &dirs[x], &dirs[2 + y], integration, true)?;
            tables[2 * x + y] = [t.table[0][0], t.table[0][1], t.table[1][0], t.table[1][1]];
            errors[2 * x + y] = [
                t.std_error[0][0],
                t.std_error[0][1],
                t.std_error[1][0],
                t.std_error[1][1],
            ];
        }
    }
    let mut behavior = Behavior::new(angles.map(f64::to_degrees), tables);
    behavior
        .meta
        .insert(String::from("model"), serde_json::Value::from(model.name.clone()));
    Ok((behavior, errors))
}
