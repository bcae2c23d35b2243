//! Correlations, the CHSH combinations and the 16 deterministic strategies.
//!
//! Correlation vectors are ordered `[E(a,b), E(a,b′), E(a′,b), E(a′,b′)]`.

use serde::{Deserialize, Serialize};

use crate::ensembles::Table2;

/// `Σ αβ P(α, β)` for a table indexed `[α][β]`, `+ → 0`.
pub fn correlation(t: &Table2<f64>) -> f64 {
    t[0][0] - t[0][1] - t[1][0] + t[1][1]
}

/// `S` with the minus sign on term `minus_at` (`3` gives the usual
/// `E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)`).
pub fn chsh(e_ab: f64, e_ab2: f64, e_a2b: f64, e_a2b2: f64, minus_at: usize) -> f64 {
    ChshVariant { minus_at: minus_at % 4, sign: 1 }.value(&[e_ab, e_ab2, e_a2b, e_a2b2])
}

/// One of the eight inequalities `sign · (±E ± E ± E ± E) ≤ 2` with a single minus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChshVariant {
    pub minus_at: usize,
    pub sign: i8,
}

impl ChshVariant {
    pub fn all() -> [ChshVariant; 8] {
        let mut out = [ChshVariant { minus_at: 0, sign: 1 }; 8];
        for (k, v) in out.iter_mut().enumerate() {
            *v = ChshVariant {
                minus_at: k % 4,
                sign: if k < 4 { 1 } else { -1 },
            };
        }
        out
    }

    pub fn coefficients(&self) -> [i8; 4] {
        let mut c = [self.sign; 4];
        c[self.minus_at] = -self.sign;
        c
    }

    pub fn value(&self, e: &[f64; 4]) -> f64 {
        self.coefficients()
            .iter()
            .zip(e)
            .map(|(&c, &x)| c as f64 * x)
            .sum()
    }

    /// Human-readable form, e.g. `+E(a,b) +E(a,b') +E(a',b) -E(a',b')`.
    pub fn label(&self) -> String {
        const TERMS: [&str; 4] = ["E(a,b)", "E(a,b')", "E(a',b)", "E(a',b')"];
        self.coefficients()
            .iter()
            .zip(TERMS)
            .map(|(c, t)| format!("{}{t}", if *c > 0 { '+' } else { '-' }))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Local bound shared by all eight variants.
pub const CHSH_LOCAL_BOUND: f64 = 2.0;

/// Fixed outcomes `(A(a), A(a′))` and `(B(b), B(b′))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub a: [i8; 2],
    pub b: [i8; 2],
}

impl DeterministicStrategy {
    /// All 16 strategies; bit 3..0 of the index set means `−1` on
    /// `A(a), A(a′), B(b), B(b′)` respectively.
    pub fn all() -> [DeterministicStrategy; 16] {
        let mut out = [DeterministicStrategy { a: [1; 2], b: [1; 2] }; 16];
        for (i, s) in out.iter_mut().enumerate() {
            *s = Self::from_index(i);
        }
        out
    }

    pub fn from_index(i: usize) -> Self {
        let bit = |k: usize| if (i >> k) & 1 == 1 { -1 } else { 1 };
        DeterministicStrategy {
            a: [bit(3), bit(2)],
            b: [bit(1), bit(0)],
        }
    }

    pub fn index(&self) -> usize {
        let bit = |v: i8| (v < 0) as usize;
        bit(self.a[0]) << 3 | bit(self.a[1]) << 2 | bit(self.b[0]) << 1 | bit(self.b[1])
    }

    pub fn correlations(&self) -> [f64; 4] {
        let mut e = [0.0; 4];
        for x in 0..2 {
            for y in 0..2 {
                e[2 * x + y] = (self.a[x] * self.b[y]) as f64;
            }
        }
        e
    }
}

/// Maximum `|S|` over every strategy and sign placement.
pub fn deterministic_bound() -> f64 {
    DeterministicStrategy::all()
        .iter()
        .flat_map(|s| {
            let e = s.correlations();
            ChshVariant::all().map(move |v| v.value(&e).abs())
        })
        .fold(0.0, f64::max)
}
