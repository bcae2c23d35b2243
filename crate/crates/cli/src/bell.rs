//! `bell chsh`, `bell bound`, `bell toy` and `bell fine`.

use std::path::Path;

use serde::Serialize;
use workbench::bell::behavior::Behavior;
use workbench::bell::chsh::{chsh, correlation, deterministic_bound, ChshVariant, DeterministicStrategy};
use workbench::bell::fine::{fine_equivalence_scan, fine_feasibility, FineOutcome, ScanReport};
use workbench::bell::model::{behavior_from_model, coincidence, Integration, LocalModel};
use workbench::quantum::Direction;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Singlet,
    Toy,
}

impl std::str::FromStr for ModelName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "singlet" => Ok(ModelName::Singlet),
            "toy" => Ok(ModelName::Toy),
            other => Err(format!("unknown model {other:?} (expected singlet or toy)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantValue {
    pub label: String,
    pub coefficients: [i8; 4],
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChshResult {
    pub model: &'static str,
    /// `(a, a′, b, b′)` in degrees.
    pub angles: [f64; 4],
    /// `[E(a,b), E(a,b′), E(a′,b), E(a′,b′)]`.
    pub correlations: [f64; 4],
    /// Standard errors of the correlations; zero for closed forms.
    pub std_errors: [f64; 4],
    pub s: f64,
    pub variants: Vec<VariantValue>,
    pub max_abs_s: f64,
}

fn variants(e: &[f64; 4]) -> Vec<VariantValue> {
    ChshVariant::all()
        .iter()
        .map(|v| VariantValue {
            label: v.label(),
            coefficients: v.coefficients(),
            value: v.value(e),
        })
        .collect()
}

pub fn bell_chsh(model: ModelName, angles: [f64; 4], samples: usize, seed: u64) -> CliResult<ChshResult> {
    let (name, e, se) = match model {
        ModelName::Singlet => ("singlet", Behavior::singlet(angles).correlations(), [0.0; 4]),
        ModelName::Toy => {
            let m = LocalModel::bell_toy();
            let dirs = angles.map(Direction::planar_degrees);
            let mut e = [0.0; 4];
            let mut se = [0.0; 4];
            for x in 0..2 {
                for y in 0..2 {
                    let t = coincidence(
                        &m,
                        &dirs[x],
                        &dirs[2 + y],
                        Integration::MonteCarlo { samples, seed },
                    )?;
                    e[2 * x + y] = correlation(&t.table);
                    // A ±1 variable with mean E has standard deviation √(1 − E²).
                    se[2 * x + y] = ((1.0 - e[2 * x + y].powi(2)).max(0.0) / samples as f64).sqrt();
                }
            }
            ("bell_toy", e, se)
        }
    };
    let vs = variants(&e);
    let max_abs_s = vs.iter().map(|v| v.value.abs()).fold(0.0, f64::max);
    Ok(ChshResult {
        model: name,
        angles,
        correlations: e,
        std_errors: se,
        s: chsh(e[0], e[1], e[2], e[3], 3),
        variants: vs,
        max_abs_s,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyRow {
    pub index: usize,
    pub a: [i8; 2],
    pub b: [i8; 2],
    pub correlations: [f64; 4],
    pub chsh: [f64; 8],
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    pub strategies: Vec<StrategyRow>,
    pub maximum: f64,
}

pub fn bell_bound() -> BoundResult {
    let strategies = DeterministicStrategy::all()
        .iter()
        .map(|s| {
            let e = s.correlations();
            StrategyRow {
                index: s.index(),
                a: s.a,
                b: s.b,
                correlations: e,
                chsh: ChshVariant::all().map(|v| v.value(&e)),
            }
        })
        .collect();
    BoundResult {
        strategies,
        maximum: deterministic_bound(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyPoint {
    pub theta_deg: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `−1 + 2θ/π`.
    pub analytic: f64,
    pub quantum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToyResult {
    pub samples: usize,
    pub points: Vec<ToyPoint>,
    /// Largest `|estimate − analytic| · √n`.
    pub max_scaled_deviation: f64,
}

/// `E(θ)` of the sphere model at `points + 1` angles spanning `[0, 180°]`.
pub fn bell_toy(samples: usize, seed: u64, points: usize) -> CliResult<ToyResult> {
    if points == 0 || samples == 0 {
        return Err(CliError::invalid("toy curve needs at least one point and one sample"));
    }
    let m = LocalModel::bell_toy();
    let a = Direction::z();
    let mut out = Vec::with_capacity(points + 1);
    let mut worst: f64 = 0.0;
    for k in 0..=points {
        let theta = std::f64::consts::PI * k as f64 / points as f64;
        let t = coincidence(&m, &a, &Direction::planar(theta), Integration::MonteCarlo { samples, seed })?;
        let e = correlation(&t.table);
        let analytic = -1.0 + 2.0 * theta / std::f64::consts::PI;
        worst = worst.max((e - analytic).abs() * (samples as f64).sqrt());
        out.push(ToyPoint {
            theta_deg: theta.to_degrees(),
            estimate: e,
            std_error: ((1.0 - e * e).max(0.0) / samples as f64).sqrt(),
            analytic,
            quantum: -theta.cos(),
        });
    }
    Ok(ToyResult {
        samples,
        points: out,
        max_scaled_deviation: worst,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FineResult {
    pub behavior: Behavior,
    pub outcome: FineOutcome,
}

pub fn read_behavior(path: &Path) -> CliResult<Behavior> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

pub fn bell_fine(behavior: Behavior) -> CliResult<FineResult> {
    let outcome = fine_feasibility(&behavior)?;
    Ok(FineResult { behavior, outcome })
}

pub fn bell_fine_scan(n: usize, seed: u64) -> CliResult<ScanReport> {
    Ok(fine_equivalence_scan(n, seed)?)
}

/// Toy-model behavior at the given angles, for feeding back into `bell fine`.
pub fn toy_behavior(angles_deg: [f64; 4], samples: usize, seed: u64) -> CliResult<Behavior> {
    let (b, _) = behavior_from_model(
        &LocalModel::bell_toy(),
        angles_deg.map(f64::to_radians),
        Integration::MonteCarlo { samples, seed },
    )?;
    Ok(b)
}
