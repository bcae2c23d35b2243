//! Split-operator spectral solver for the two-component Pauli equation reduced
//! to one dimension along the field gradient, with `ħ = M = 1`.
//!
//! In the device eigenbasis the Hamiltonian is diagonal:
//! `H± = −½∂ₓ² ± μ (b0 + g·x)` while the field window is open, so each
//! component evolves independently and the spin basis never mixes.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::quantum::{Direction, SpinCoefficients};
use crate::real::Real;

/// Relative density below which the guidance velocity is not evaluated directly.
pub const NODE_THRESHOLD: f64 = 1e-12;
/// Relative density allowed near the periodic boundary.
pub const BOUNDARY_THRESHOLD: f64 = 1e-10;
/// Largest phase increment per factor and step accepted by [`stability_phase`].
pub const MAX_PHASE_PER_STEP: f64 = 0.5;

pub(crate) fn drift_tolerance<T: Real>() -> f64 {
    1e-8_f64.max(T::EPS * 1e4)
}

/// Uniform periodic grid `x_i = x_min + i·dx`, `dx = (x_max − x_min)/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    x_min: T,
    x_max: T,
    n_points: usize,
}

impl<T: Real> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, n_points: usize) -> Result<Self> {
        if !n_points.is_power_of_two() || n_points < 256 {
            return Err(Error::invalid(format!(
                "grid size {n_points} must be a power of two >= 256"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::invalid("grid bounds must satisfy x_min < x_max"));
        }
        Ok(Grid1D {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn x_min(&self) -> T {
        self.x_min
    }

    pub fn x_max(&self) -> T {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn length(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> T {
        self.length() / T::from_usize(self.n_points).unwrap()
    }

    pub fn x(&self, i: usize) -> T {
        self.x_min + T::from_usize(i).unwrap() * self.dx()
    }

    pub fn positions(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// FFT-ordered angular wavenumbers.
    pub fn wavenumbers(&self) -> Vec<T> {
        let n = self.n_points;
        let dk = (T::PI() + T::PI()) / self.length();
        (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                T::lit(m) * dk
            })
            .collect()
    }

    /// Continuous index of `x`, `(x − x_min)/dx`.
    pub fn index_of(&self, x: T) -> T {
        (x - self.x_min) / self.dx()
    }

    /// Number of points on each side treated as the boundary band.
    pub fn boundary_band(&self) -> usize {
        (self.n_points / 64).max(4)
    }
}

/// Two-component wave function sampled on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField<T> {
    pub grid: Grid1D<T>,
    pub psi_up: Vec<Complex<T>>,
    pub psi_down: Vec<Complex<T>>,
    pub t: T,
}

impl<T: Real> SpinorField<T> {
    /// Wraps raw components; lengths must match the grid. No normalization is applied.
    pub fn from_components(
        grid: Grid1D<T>,
        psi_up: Vec<Complex<T>>,
        psi_down: Vec<Complex<T>>,
        t: T,
    ) -> Result<Self> {
        if psi_up.len() != grid.len() || psi_down.len() != grid.len() {
            return Err(Error::invalid("component length does not match grid"));
        }
        Ok(SpinorField {
            grid,
            psi_up,
            psi_down,
            t,
        })
    }

    /// Rescales both components so the discrete norm is one.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if !(n > T::zero()) || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero field"));
        }
        let s = T::one() / n.sqrt();
        for z in self.psi_up.iter_mut().chain(self.psi_down.iter_mut()) {
            *z = *z * s;
        }
        Ok(())
    }

    /// `Σ (|ψ↑|² + |ψ↓|²) dx`.
    pub fn norm(&self) -> T {
        let (u, d) = self.component_masses();
        u + d
    }

    pub fn component_masses(&self) -> (T, T) {
        let dx = self.grid.dx();
        let up: T = self.psi_up.iter().map(|z| z.norm_sqr()).sum();
        let down: T = self.psi_down.iter().map(|z| z.norm_sqr()).sum();
        (up * dx, down * dx)
    }

    pub fn density(&self) -> Vec<T> {
        self.psi_up
            .iter()
            .zip(&self.psi_down)
            .map(|(u, d)| u.norm_sqr() + d.norm_sqr())
            .collect()
    }

    /// Mean and standard deviation of `ρ`.
    pub fn position_moments(&self) -> (T, T) {
        moments(&self.grid, &self.density())
    }

    /// Mean and standard deviation of one component's density, normalized to that component.
    pub fn component_moments(&self, up: bool) -> (T, T) {
        let psi = if up { &self.psi_up } else { &self.psi_down };
        let rho: Vec<T> = psi.iter().map(|z| z.norm_sqr()).collect();
        moments(&self.grid, &rho)
    }

    /// Largest density in the boundary band relative to the peak density.
    pub fn boundary_ratio(&self) -> T {
        let rho = self.density();
        let peak = rho.iter().copied().fold(T::zero(), T::max);
        let band = self.grid.boundary_band();
        let n = rho.len();
        let edge = rho[..band]
            .iter()
            .chain(&rho[n - band..])
            .copied()
            .fold(T::zero(), T::max);
        if peak > T::zero() {
            edge / peak
        } else {
            T::zero()
        }
    }
}

fn moments<T: Real>(grid: &Grid1D<T>, rho: &[T]) -> (T, T) {
    let total: T = rho.iter().copied().sum();
    if !(total > T::zero()) {
        return (T::nan(), T::nan());
    }
    let mean = rho
        .iter()
        .enumerate()
        .map(|(i, &r)| grid.x(i) * r)
        .sum::<T>()
        / total;
    let var = rho
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let d = grid.x(i) - mean;
            d * d * r
        })
        .sum::<T>()
        / total;
    (mean, var.sqrt())
}

/// Linear Stern–Gerlach field `B(x, t) = b0 + gradient·x` inside `[t_on, t_off]`, zero outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldProfile<T> {
    pub mu: T,
    pub b0: T,
    pub gradient: T,
    pub t_on: T,
    pub t_off: T,
    pub device_axis: Direction<T>,
}

impl<T: Real> FieldProfile<T> {
    pub fn new(mu: T, b0: T, gradient: T, t_on: T, t_off: T, device_axis: Direction<T>) -> Result<Self> {
        if !(t_on < t_off) {
            return Err(Error::invalid("field window needs t_on < t_off"));
        }
        Ok(FieldProfile {
            mu,
            b0,
            gradient,
            t_on,
            t_off,
            device_axis,
        })
    }

    /// No field at all.
    pub fn free() -> Self {
        FieldProfile {
            mu: T::zero(),
            b0: T::zero(),
            gradient: T::zero(),
            t_on: T::zero(),
            t_off: T::one(),
            device_axis: Direction::z(),
        }
    }

    pub fn is_on(&self, t: T) -> bool {
        t >= self.t_on && t <= self.t_off
    }

    /// `μ B(x, t)`: the potential felt by the `+a` component (the `−a` one feels its negative).
    pub fn potential(&self, x: T, t: T) -> T {
        if self.is_on(t) {
            self.mu * (self.b0 + self.gradient * x)
        } else {
            T::zero()
        }
    }

    /// Total momentum transferred to each component, `μ·gradient·(t_off − t_on)`.
    pub fn impulse(&self) -> T {
        self.mu * self.gradient * (self.t_off - self.t_on)
    }

    pub fn is_separating(&self) -> bool {
        self.impulse() > T::zero()
    }
}

/// `ρ`, `J` and `v = J/ρ` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurrent<T> {
    pub rho: Vec<T>,
    pub j: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> DensityCurrent<T> {
    /// Velocity at `x` by linear interpolation; `None` outside the interior.
    pub fn velocity_at(&self, grid: &Grid1D<T>, x: T) -> Option<T> {
        interpolate(grid, &self.v, x)
    }
}

/// Linear interpolation on the grid nodes; `None` when `x` leaves `[x_1, x_{n−2}]`.
pub(crate) fn interpolate<T: Real>(grid: &Grid1D<T>, values: &[T], x: T) -> Option<T> {
    Lerp::new(grid).eval(values, x)
}

/// Precomputed node lookup for repeated interpolation on one grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Lerp<T> {
    x_min: T,
    inv_dx: T,
    upper: T,
}

impl<T: Real> Lerp<T> {
    pub(crate) fn new(grid: &Grid1D<T>) -> Self {
        Lerp {
            x_min: grid.x_min(),
            inv_dx: T::one() / grid.dx(),
            upper: T::from_usize(grid.len() - 2).unwrap(),
        }
    }

    #[inline]
    pub(crate) fn eval(&self, values: &[T], x: T) -> Option<T> {
        let s = (x - self.x_min) * self.inv_dx;
        if !(s >= T::one()) || !(s < self.upper) {
            return None;
        }
        let i = s.floor();
        let frac = s - i;
        let i = i.to_usize()?;
        Some(values[i] + (values[i + 1] - values[i]) * frac)
    }
}

/// Gaussian packet `ψ_s(x) = c_s (2πw²)^{−1/4} exp(−(x−x₀)²/(4w²) + i k x)`, renormalized on the grid.
pub fn init_gaussian_packet<T: Real>(
    grid: Grid1D<T>,
    center: T,
    width: T,
    momentum: T,
    coeffs: SpinCoefficients<T>,
) -> Result<SpinorField<T>> {
    coeffs.check_normalized()?;
    if !(width >= T::lit(4.0) * grid.dx()) {
        return Err(Error::invalid(format!(
            "packet width {width} narrower than 4 dx = {}",
            T::lit(4.0) * grid.dx()
        )));
    }
    // ρ falls below BOUNDARY_THRESHOLD of its peak beyond this distance.
    let reach = width * T::lit((2.0 * (1.0 / BOUNDARY_THRESHOLD).ln()).sqrt());
    let band = grid.dx() * T::from_usize(grid.boundary_band()).unwrap();
    if center - reach < grid.x_min() + band || center + reach > grid.x_max() - band {
        return Err(Error::invalid(format!(
            "packet support [{}, {}] touches the grid boundary",
            center - reach,
            center + reach
        )));
    }
    let two_pi = T::PI() + T::PI();
    let amp = (two_pi * width * width).powf(T::lit(-0.25));
    let four_w2 = T::lit(4.0) * width * width;
    let spatial: Vec<Complex<T>> = grid
        .positions()
        .into_iter()
        .map(|x| {
            let d = x - center;
            Complex::from_polar(amp * (-(d * d) / four_w2).exp(), momentum * x)
        })
        .collect();
    let up = spatial.iter().map(|&z| z * coeffs.c_up).collect();
    let down = spatial.iter().map(|&z| z * coeffs.c_down).collect();
    let mut field = SpinorField::from_components(grid, up, down, T::zero())?;
    field.normalize()?;
    Ok(field)
}

/// Spectral machinery for a fixed grid: FFT plans and cached kinetic phases for one `dt`.
pub struct Propagator<T: Real> {
    grid: Grid1D<T>,
    k: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    dt: T,
    kinetic: Vec<Complex<T>>,
    boundary_guard: bool,
}

impl<T: Real> Propagator<T> {
    pub fn new(grid: Grid1D<T>, dt: T) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(grid.len());
        let ifft = planner.plan_fft_inverse(grid.len());
        let k = grid.wavenumbers();
        let kinetic = kinetic_phases(&k, dt);
        Propagator {
            grid,
            k,
            fft,
            ifft,
            dt,
            kinetic,
            boundary_guard: true,
        }
    }

    /// Disables the boundary-density guard, for fields that are periodic by design.
    pub fn without_boundary_guard(mut self) -> Self {
        self.boundary_guard = false;
        self
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn forward(&self, psi: &mut [Complex<T>]) {
        self.fft.process(psi);
    }

    fn inverse(&self, psi: &mut [Complex<T>]) {
        self.ifft.process(psi);
        let s = T::one() / T::from_usize(psi.len()).unwrap();
        for z in psi.iter_mut() {
            *z = *z * s;
        }
    }

    /// Spectral derivative `∂ₓψ`.
    pub fn derivative(&self, psi: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        let n = buf.len();
        for (i, (z, &k)) in buf.iter_mut().zip(&self.k).enumerate() {
            // The Nyquist mode has no well-defined sign; drop it.
            *z = if i == n / 2 {
                Complex::new(T::zero(), T::zero())
            } else {
                *z * Complex::new(T::zero(), k)
            };
        }
        self.inverse(&mut buf);
        buf
    }

    /// `Σ k |ψ̂_k|² / Σ |ψ̂_k|²` for one component.
    pub fn mean_wavenumber(&self, psi: &[Complex<T>]) -> T {
        let mut buf = psi.to_vec();
        self.forward(&mut buf);
        let (num, den) = buf
            .iter()
            .zip(&self.k)
            .fold((T::zero(), T::zero()), |(n, d), (z, &k)| {
                let w = z.norm_sqr();
                (n + k * w, d + w)
            });
        num / den
    }

    /// Largest `|k|` carrying spectral weight above `BOUNDARY_THRESHOLD` of the peak.
    pub fn spectral_reach(&self, field: &SpinorField<T>) -> T {
        let mut reach = T::zero();
        for psi in [&field.psi_up, &field.psi_down] {
            let mut buf = psi.clone();
            self.forward(&mut buf);
            let peak = buf.iter().map(|z| z.norm_sqr()).fold(T::zero(), T::max);
            for (z, &k) in buf.iter().zip(&self.k) {
                if z.norm_sqr() > peak * T::lit(BOUNDARY_THRESHOLD) {
                    reach = reach.max(k.abs());
                }
            }
        }
        reach
    }

    /// One Strang step: half potential, full kinetic, half potential. The
    /// potential is frozen at the midpoint time `t + dt/2`.
    pub fn step(&self, field: &SpinorField<T>, profile: &FieldProfile<T>, dt: T) -> SpinorField<T> {
        let two = T::lit(2.0);
        let t_mid = field.t + dt / two;
        let kinetic_owned;
        let kinetic: &[Complex<T>] = if dt == self.dt {
            &self.kinetic
        } else {
            kinetic_owned = kinetic_phases(&self.k, dt);
            &kinetic_owned
        };
        let half: Option<Vec<Complex<T>>> = profile.is_on(t_mid).then(|| {
            (0..self.grid.len())
                .map(|i| {
                    let v = profile.potential(self.grid.x(i), t_mid);
                    Complex::from_polar(T::one(), -v * dt / two)
                })
                .collect()
        });

        let mut up = field.psi_up.clone();
        let mut down = field.psi_down.clone();
        if let Some(h) = &half {
            apply_potential(&mut up, &mut down, h);
        }
        for psi in [&mut up, &mut down] {
            self.forward(psi);
            for (z, &p) in psi.iter_mut().zip(kinetic) {
                *z = *z * p;
            }
            self.inverse(psi);
        }
        if let Some(h) = &half {
            apply_potential(&mut up, &mut down, h);
        }
        SpinorField {
            grid: self.grid,
            psi_up: up,
            psi_down: down,
            t: field.t + dt,
        }
    }

    /// `ρ`, `J = Im(ψ↑* ∂ψ↑ + ψ↓* ∂ψ↓)` and the regularized velocity.
    pub fn density_current(&self, field: &SpinorField<T>) -> DensityCurrent<T> {
        let du = self.derivative(&field.psi_up);
        let dd = self.derivative(&field.psi_down);
        let rho = field.density();
        let j: Vec<T> = (0..rho.len())
            .map(|i| (field.psi_up[i].conj() * du[i] + field.psi_down[i].conj() * dd[i]).im)
            .collect();
        let v = regularized_velocity(&rho, &j);
        DensityCurrent { rho, j, v }
    }

    /// Checks the boundary band of `field`, returning the grid-too-small error if it holds density.
    pub fn check_boundary(&self, field: &SpinorField<T>) -> Result<()> {
        if !self.boundary_guard {
            return Ok(());
        }
        let ratio = field.boundary_ratio();
        if ratio > T::lit(BOUNDARY_THRESHOLD) {
            return Err(Error::GridTooSmall {
                time: field.t.to_f64_lossy(),
                ratio: ratio.to_f64_lossy(),
            });
        }
        Ok(())
    }

    /// Drives [`Propagator::step`] from `field.t` to `t_final`, yielding each
    /// intermediate field to `visit` together with its step index. The last step
    /// is shortened to land on `t_final` exactly.
    pub fn drive<F>(&self, field: &SpinorField<T>, profile: &FieldProfile<T>, t_final: T, mut visit: F) -> Result<SpinorField<T>>
    where
        F: FnMut(usize, &SpinorField<T>, &SpinorField<T>) -> Result<()>,
    {
        let steps = step_count(field.t, t_final, self.dt)?;
        let t0 = field.t;
        let n0 = field.norm();
        let mut current = field.clone();
        for s in 0..steps {
            let t_next = if s + 1 == steps {
                t_final
            } else {
                t0 + self.dt * T::from_usize(s + 1).unwrap()
            };
            let dt = t_next - current.t;
            let mut next = self.step(&current, profile, dt);
            next.t = t_next;
            let drift = (next.norm() - n0).abs().to_f64_lossy();
            if drift > drift_tolerance::<T>() {
                return Err(Error::Internal(format!(
                    "norm drift {drift:.3e} at t = {}",
                    t_next.to_f64_lossy()
                )));
            }
            visit(s + 1, &current, &next)?;
            current = next;
        }
        Ok(current)
    }

    /// Snapshots at `field.t`, every `snapshot_every` steps, and at `t_final`.
    pub fn evolve(
        &self,
        field: &SpinorField<T>,
        profile: &FieldProfile<T>,
        t_final: T,
        snapshot_every: usize,
    ) -> Result<Vec<SpinorField<T>>> {
        let every = snapshot_every.max(1);
        self.check_boundary(field)?;
        let mut snaps = vec![field.clone()];
        let steps = step_count(field.t, t_final, self.dt)?;
        let last = self.drive(field, profile, t_final, |s, _, next| {
            if s % every == 0 || s == steps {
                self.check_boundary(next)?;
                if s != steps {
                    snaps.push(next.clone());
                }
            }
            Ok(())
        })?;
        if steps > 0 {
            snaps.push(last);
        }
        Ok(snaps)
    }
}

fn kinetic_phases<T: Real>(k: &[T], dt: T) -> Vec<Complex<T>> {
    let two = T::lit(2.0);
    k.iter()
        .map(|&k| Complex::from_polar(T::one(), -k * k * dt / two))
        .collect()
}

fn apply_potential<T: Real>(up: &mut [Complex<T>], down: &mut [Complex<T>], half: &[Complex<T>]) {
    for ((u, d), &h) in up.iter_mut().zip(down.iter_mut()).zip(half) {
        *u = *u * h;
        *d = *d * h.conj();
    }
}

pub(crate) fn step_count<T: Real>(t0: T, t_final: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("dt must be positive"));
    }
    let span = t_final - t0;
    if span < T::zero() {
        return Err(Error::invalid("t_final precedes the field time"));
    }
    let ratio = (span / dt).to_f64_lossy();
    let rounded = ratio.round();
    let steps = if (ratio - rounded).abs() < 1e-6 {
        rounded
    } else {
        ratio.ceil()
    };
    Ok(steps as usize)
}

/// `J/ρ`, with sub-threshold nodes copied from the nearest valid neighbour.
fn regularized_velocity<T: Real>(rho: &[T], j: &[T]) -> Vec<T> {
    let n = rho.len();
    let peak = rho.iter().copied().fold(T::zero(), T::max);
    let floor = peak * T::lit(NODE_THRESHOLD);
    let valid: Vec<bool> = rho.iter().map(|&r| r > floor && r > T::zero()).collect();
    if !valid.iter().any(|&b| b) {
        return vec![T::zero(); n];
    }
    let mut left = vec![usize::MAX; n];
    let mut last = usize::MAX;
    for i in 0..n {
        if valid[i] {
            last = i;
        }
        left[i] = last;
    }
    let mut right = vec![usize::MAX; n];
    last = usize::MAX;
    for i in (0..n).rev() {
        if valid[i] {
            last = i;
        }
        right[i] = last;
    }
    (0..n)
        .map(|i| {
            let src = match (left[i], right[i]) {
                (usize::MAX, r) => r,
                (l, usize::MAX) => l,
                (l, r) => {
                    if i - l <= r - i {
                        l
                    } else {
                        r
                    }
                }
            };
            j[src] / rho[src]
        })
        .collect()
}

/// One step with a freshly planned propagator.
pub fn step<T: Real>(field: &SpinorField<T>, profile: &FieldProfile<T>, dt: T) -> Result<SpinorField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("dt must be positive"));
    }
    Ok(Propagator::new(field.grid, dt).step(field, profile, dt))
}

pub fn evolve<T: Real>(
    field: &SpinorField<T>,
    profile: &FieldProfile<T>,
    t_final: T,
    dt: T,
    snapshot_every: usize,
) -> Result<Vec<SpinorField<T>>> {
    Propagator::new(field.grid, dt).evolve(field, profile, t_final, snapshot_every)
}

pub fn density_current<T: Real>(field: &SpinorField<T>) -> DensityCurrent<T> {
    Propagator::new(field.grid, T::lit(1e-3)).density_current(field)
}

/// Largest phase increment per factor over a run with `profile`: kinetic over the
/// spectral reach after the full impulse, potential over the spatial support of
/// `field` widened by the distance a kicked packet travels before the window closes.
pub fn stability_phase<T: Real>(field: &SpinorField<T>, profile: &FieldProfile<T>, dt: T) -> T {
    let prop = Propagator::new(field.grid, dt);
    let two = T::lit(2.0);
    let k_reach = prop.spectral_reach(field) + profile.impulse().abs();
    let kinetic = k_reach * k_reach * dt / two;
    let rho = field.density();
    let peak = rho.iter().copied().fold(T::zero(), T::max);
    let travel = k_reach * (profile.t_off - field.t).max(T::zero());
    let mut potential = T::zero();
    for (i, &r) in rho.iter().enumerate() {
        if r > peak * T::lit(BOUNDARY_THRESHOLD) {
            let x = field.grid.x(i);
            for x in [x - travel, x + travel] {
                let v = (profile.mu * (profile.b0 + profile.gradient * x)).abs();
                potential = potential.max(v * dt / two);
            }
        }
    }
    kinetic.max(potential)
}
