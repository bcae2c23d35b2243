//! Dense phase-1 simplex for `A x = b, x ≥ 0`, with Bland's rule.
//!
//! Generic over the field so the same code runs in `f64` (with tolerances)
//! and in exact rationals (all tolerances zero).

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive};

pub trait LpScalar: Clone + PartialOrd + Num + Signed + Debug {
    /// Exact conversion of a finite double.
    fn from_f64_exact(x: f64) -> Option<Self>;
    fn to_f64_lossy(&self) -> f64;
    /// Largest total artificial mass still read as feasible.
    fn feasibility_tolerance() -> Self;
    /// Entries at or below this magnitude never become pivots.
    fn pivot_tolerance() -> Self;
}

impl LpScalar for f64 {
    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }

    fn feasibility_tolerance() -> Self {
        1e-9
    }

    fn pivot_tolerance() -> Self {
        1e-12
    }
}

impl LpScalar for BigRational {
    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_f64(x)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn feasibility_tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }

    fn pivot_tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}

/// Result of phase 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOne<S> {
    /// A basic solution of the original variables (artificials dropped).
    pub x: Vec<S>,
    /// Optimal total artificial mass, `0` iff feasible in exact arithmetic.
    pub infeasibility: S,
    pub feasible: bool,
    pub pivots: usize,
}

/// Minimizes the sum of artificials for `A x = b`, `x ≥ 0`.
pub fn phase_one<S: LpScalar>(a: &[Vec<S>], b: &[S]) -> PhaseOne<S> {
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    let width = n + m + 1;
    let mut t: Vec<Vec<S>> = Vec::with_capacity(m);
    for (i, (row, bi)) in a.iter().zip(b).enumerate() {
        assert_eq!(row.len(), n, "ragged constraint matrix");
        let flip = bi.is_negative();
        let mut r = vec![S::zero(); width];
        for (j, v) in row.iter().enumerate() {
            r[j] = if flip { -v.clone() } else { v.clone() };
        }
        r[n + i] = S::one();
        r[width - 1] = if flip { -bi.clone() } else { bi.clone() };
        t.push(r);
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced costs of phase 1: minus the column sums over original columns.
    let mut cost = vec![S::zero(); width];
    for r in &t {
        for j in 0..n {
            cost[j] = cost[j].clone() - r[j].clone();
        }
        cost[width - 1] = cost[width - 1].clone() - r[width - 1].clone();
    }

    let pivot_tol = S::pivot_tolerance();
    let neg_tol = -pivot_tol.clone();
    let mut pivots = 0;
    while let Some(enter) = (0..n + m).find(|&j| cost[j] < neg_tol) {
        let mut leave: Option<(usize, S)> = None;
        for i in 0..m {
            if t[i][enter] > pivot_tol {
                let ratio = t[i][width - 1].clone() / t[i][enter].clone();
                let better = match &leave {
                    None => true,
                    Some((k, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*k]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        // Phase 1 is bounded below by zero, so an entering column always has a pivot
        // in exact arithmetic; in floating point a vanishing column just stops here.
        let Some((r, _)) = leave else {
            break;
        };
        let p = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r || row[enter].is_zero() {
                continue;
            }
            let f = row[enter].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        let f = cost[enter].clone();
        for (v, pv) in cost.iter_mut().zip(&pivot_row) {
            *v = v.clone() - f.clone() * pv.clone();
        }
        basis[r] = enter;
        pivots += 1;
    }

    let mut x = vec![S::zero(); n];
    let mut infeasibility = S::zero();
    for (i, &j) in basis.iter().enumerate() {
        let v = t[i][width - 1].clone();
        if j < n {
            x[j] = v;
        } else {
            infeasibility = infeasibility + v.abs();
        }
    }
    let feasible = infeasibility <= S::feasibility_tolerance();
    PhaseOne {
        x,
        infeasibility,
        feasible,
        pivots,
    }
}
