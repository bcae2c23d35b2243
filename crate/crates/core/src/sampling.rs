//! Inverse-CDF sampling from a gridded density, with one RNG stream per sample.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::real::Real;
use crate::solver::{Grid1D, SpinorField, BOUNDARY_THRESHOLD};

/// Uniform variate for sample `index` of the stream family keyed by `seed`.
/// Independent of how many other samples are drawn or in which order.
pub fn stream_uniform(seed: u64, index: u64) -> f64 {
    stream_rng(seed, index).gen::<f64>()
}

/// Generator for the `(seed, index)` stream.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Cumulative distribution of a nonnegative gridded density, linear between nodes.
#[derive(Debug, Clone)]
pub struct DensityCdf<T> {
    x: Vec<T>,
    cumulative: Vec<T>,
}

impl<T: Real> DensityCdf<T> {
    pub fn new(grid: &Grid1D<T>, rho: &[T]) -> Self {
        let x = grid.positions();
        let half_dx = grid.dx() / T::lit(2.0);
        let mut cumulative = Vec::with_capacity(rho.len());
        let mut acc = T::zero();
        cumulative.push(acc);
        for w in rho.windows(2) {
            acc = acc + (w[0] + w[1]) * half_dx;
            cumulative.push(acc);
        }
        if acc > T::zero() {
            for c in cumulative.iter_mut() {
                *c = *c / acc;
            }
        }
        DensityCdf { x, cumulative }
    }

    pub fn from_field(field: &SpinorField<T>) -> Self {
        Self::new(&field.grid, &field.density())
    }

    pub fn cdf(&self, x: T) -> T {
        let n = self.x.len();
        if x <= self.x[0] {
            return T::zero();
        }
        if x >= self.x[n - 1] {
            return T::one();
        }
        let i = self.x.partition_point(|&xi| xi <= x) - 1;
        let frac = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.cumulative[i] + (self.cumulative[i + 1] - self.cumulative[i]) * frac
    }

    pub fn quantile(&self, u: T) -> T {
        let n = self.x.len();
        let u = u.max(T::zero()).min(T::one());
        let i = self.cumulative.partition_point(|&c| c < u);
        if i == 0 {
            return self.x[0];
        }
        if i >= n {
            return self.x[n - 1];
        }
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { T::zero() };
        self.x[i - 1] + (self.x[i] - self.x[i - 1]) * frac
    }
}

/// Draws `n` positions from `ρ(·, field.t)`; sample `i` uses stream `(seed, i)`.
pub fn sample_positions<T: Real>(field: &SpinorField<T>, n: usize, seed: u64) -> Vec<T> {
    let cdf = DensityCdf::from_field(field);
    (0..n)
        .map(|i| cdf.quantile(T::lit(stream_uniform(seed, i as u64))))
        .collect()
}

/// Midpoint grid of `n` positions across the support of `ρ`, with weights
/// `ρ(x₀)·Δx₀` normalized to one.
pub fn stratified_grid<T: Real>(field: &SpinorField<T>, n: usize) -> (Vec<T>, Vec<T>) {
    let rho = field.density();
    let peak = rho.iter().copied().fold(T::zero(), T::max);
    // Slightly inside the trajectory admission threshold so every node is admissible.
    let floor = peak * T::lit(BOUNDARY_THRESHOLD * 10.0);
    let first = rho.iter().position(|&r| r > floor).unwrap_or(0);
    let last = rho.iter().rposition(|&r| r > floor).unwrap_or(rho.len() - 1);
    let lo = field.grid.x(first);
    let hi = field.grid.x(last);
    let h = (hi - lo) / T::from_usize(n).unwrap();
    let xs: Vec<T> = (0..n)
        .map(|i| lo + h * (T::from_usize(i).unwrap() + T::lit(0.5)))
        .collect();
    let mut w: Vec<T> = xs
        .iter()
        .map(|&x| crate::solver::interpolate(&field.grid, &rho, x).unwrap_or(T::zero()) * h)
        .collect();
    let total: T = w.iter().copied().sum();
    for wi in w.iter_mut() {
        *wi = *wi / total;
    }
    (xs, w)
}

/// Kolmogorov–Smirnov distance between the empirical distribution of `xs` and `cdf`.
pub fn ks_distance<T: Real>(xs: &[T], cdf: &DensityCdf<T>) -> T {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite positions"));
    let n = T::from_usize(sorted.len()).unwrap();
    let mut d = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf.cdf(x);
        let lo = T::from_usize(i).unwrap() / n;
        let hi = T::from_usize(i + 1).unwrap() / n;
        d = d.max(hi - f).max(f - lo);
    }
    d
}

/// 99% critical value of the one-sample KS statistic, `1.63/√n`.
pub fn ks_critical_99(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}
