//! Bipartite statistics `P(α, β | x, y)` over two settings per side.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{singlet_correlation, Direction};

use super::chsh::{ChshVariant, DeterministicStrategy};

/// Four tables; `tables[2x + y]` holds `[P(++), P(+−), P(−+), P(−−)]` for
/// `x ∈ {a, a′}`, `y ∈ {b, b′}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Behavior {
    /// Setting angles `(a, a′, b, b′)` in degrees.
    pub settings: [f64; 4],
    pub tables: [[f64; 4]; 4],
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

fn sign(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        -1.0
    }
}

impl Behavior {
    pub fn new(settings: [f64; 4], tables: [[f64; 4]; 4]) -> Self {
        Behavior {
            settings,
            tables,
            meta: BTreeMap::new(),
        }
    }

    fn tagged(mut self, model: &str) -> Self {
        self.meta.insert(String::from("model"), serde_json::Value::from(model));
        self
    }

    /// `P(α, β | x, y)` with `0 → +1`, `1 → −1` on every index.
    pub fn p(&self, x: usize, y: usize, alpha: usize, beta: usize) -> f64 {
        self.tables[2 * x + y][2 * alpha + beta]
    }

    /// Equal marginals and `E(x, y) = e[2x + y]`.
    pub fn from_correlations(settings: [f64; 4], e: [f64; 4]) -> Self {
        let mut tables = [[0.0; 4]; 4];
        for (t, ek) in tables.iter_mut().zip(e) {
            for al in 0..2 {
                for be in 0..2 {
                    t[2 * al + be] = (1.0 + sign(al) * sign(be) * ek) / 4.0;
                }
            }
        }
        Behavior::new(settings, tables)
    }

    /// Singlet statistics at planar angles `(a, a′, b, b′)` in degrees.
    pub fn singlet(angles_deg: [f64; 4]) -> Self {
        let d = angles_deg.map(Direction::<f64>::planar_degrees);
        let mut e = [0.0; 4];
        for x in 0..2 {
            for y in 0..2 {
                e[2 * x + y] = singlet_correlation(&d[x], &d[2 + y]);
            }
        }
        Self::from_correlations(angles_deg, e).tagged("singlet")
    }

    /// `P(α, β | x, y) = ½` when `αβ = (−1)^{xy}`.
    pub fn pr_box() -> Self {
        Self::from_correlations([0.0; 4], [1.0, 1.0, 1.0, -1.0]).tagged("pr_box")
    }

    pub fn uniform() -> Self {
        Self::from_correlations([0.0; 4], [0.0; 4]).tagged("uniform")
    }

    pub fn from_strategy(s: &DeterministicStrategy) -> Self {
        let mut tables = [[0.0; 4]; 4];
        let idx = |v: i8| (v < 0) as usize;
        for x in 0..2 {
            for y in 0..2 {
                tables[2 * x + y][2 * idx(s.a[x]) + idx(s.b[y])] = 1.0;
            }
        }
        Behavior::new([0.0; 4], tables).tagged("deterministic")
    }

    /// `Σ_k w_k · strategy_k`; weights need not be normalized.
    pub fn mixture(weights: &[f64; 16]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut tables = [[0.0; 4]; 4];
        for (k, w) in weights.iter().enumerate() {
            let b = Self::from_strategy(&DeterministicStrategy::from_index(k));
            for t in 0..4 {
                for c in 0..4 {
                    tables[t][c] += w / total * b.tables[t][c];
                }
            }
        }
        Behavior::new([0.0; 4], tables).tagged("mixture")
    }

    /// `(1 − t)·self + t·other`.
    pub fn mix(&self, other: &Behavior, t: f64) -> Self {
        let mut tables = self.tables;
        for (row, o) in tables.iter_mut().zip(&other.tables) {
            for (c, oc) in row.iter_mut().zip(o) {
                *c = (1.0 - t) * *c + t * oc;
            }
        }
        Behavior::new(self.settings, tables)
    }

    pub fn marginal_a(&self, x: usize) -> [f64; 2] {
        let t = &self.tables[2 * x];
        [t[0] + t[1], t[2] + t[3]]
    }

    pub fn marginal_b(&self, y: usize) -> [f64; 2] {
        let t = &self.tables[y];
        [t[0] + t[2], t[1] + t[3]]
    }

    /// Positivity, normalization and no-signaling within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        for (k, t) in self.tables.iter().enumerate() {
            if t.iter().any(|p| !p.is_finite() || *p < -tol) {
                return Err(Error::invalid(format!("table {k} has a negative or non-finite entry")));
            }
            if (t.iter().sum::<f64>() - 1.0).abs() > tol {
                return Err(Error::invalid(format!("table {k} does not sum to one")));
            }
        }
        for x in 0..2 {
            let (m0, m1) = (self.tables[2 * x], self.tables[2 * x + 1]);
            if ((m0[0] + m0[1]) - (m1[0] + m1[1])).abs() > tol {
                return Err(Error::invalid("party 1 marginal depends on party 2 setting"));
            }
        }
        for y in 0..2 {
            let (m0, m1) = (self.tables[y], self.tables[2 + y]);
            if ((m0[0] + m0[2]) - (m1[0] + m1[2])).abs() > tol {
                return Err(Error::invalid("party 2 marginal depends on party 1 setting"));
            }
        }
        Ok(())
    }

    /// `[E(a,b), E(a,b′), E(a′,b), E(a′,b′)]`.
    pub fn correlations(&self) -> [f64; 4] {
        self.tables.map(|t| t[0] - t[1] - t[2] + t[3])
    }

    pub fn chsh_values(&self) -> [f64; 8] {
        let e = self.correlations();
        ChshVariant::all().map(|v| v.value(&e))
    }

    /// The variant with the largest value.
    pub fn most_violated(&self) -> (ChshVariant, f64) {
        let e = self.correlations();
        ChshVariant::all()
            .into_iter()
            .map(|v| (v, v.value(&e)))
            .fold((ChshVariant::all()[0], f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    /// Every variant `≤ 2 + tol`.
    pub fn satisfies_chsh(&self, tol: f64) -> bool {
        self.chsh_values().iter().all(|s| *s <= 2.0 + tol)
    }
}
