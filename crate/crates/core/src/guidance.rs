//! Bohmian trajectories guided by `v = J/ρ`, outcome classification, and the
//! two equivalent routes to the spin expectation: over initial positions
//! (each trajectory's terminal `A(x₀) = ±1`) or over the final-time density
//! weighted by the local spin projection `Σ(x, t)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::Outcome;
use crate::real::Real;
use crate::sampling::{ks_distance, DensityCdf};
use crate::solver::{
    interpolate, FieldProfile, Lerp, Propagator, SpinorField, BOUNDARY_THRESHOLD,
    NODE_THRESHOLD,
};

/// Half-width of the overlap window around the split, in lobe widths.
pub const OVERLAP_WINDOW_WIDTHS: f64 = 3.0;
/// Minimum lobe-center separation, in lobe widths, before outcomes are read.
pub const SEPARATION_WIDTHS: f64 = 8.0;
/// Component mass ratio below which a field is treated as a single lobe.
const SINGLE_LOBE_MASS: f64 = 0.0;

/// One hidden-variable history: the initial position and the sampled path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub id: usize,
    pub x0: T,
    pub t0: T,
    /// Quadrature weight; `1` for sampled ensembles.
    pub weight: T,
    pub path: Vec<(T, T)>,
    pub outcome: Outcome,
    pub escaped: bool,
}

impl<T: Real> Trajectory<T> {
    pub fn final_position(&self) -> T {
        self.path.last().map(|p| p.1).unwrap_or(self.x0)
    }

    pub fn final_time(&self) -> T {
        self.path.last().map(|p| p.0).unwrap_or(self.t0)
    }
}

/// `Σ(x(t), t)` sampled along a trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SpinRecord<T> {
    pub sigma_samples: Vec<(T, T)>,
}

impl<T: Real> SpinRecord<T> {
    pub fn terminal(&self) -> Option<T> {
        self.sigma_samples.last().map(|s| s.1)
    }
}

/// The solver run a trajectory ensemble is co-integrated with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveSpec<T> {
    pub profile: FieldProfile<T>,
    pub t_final: T,
    pub dt: T,
    pub snapshot_every: usize,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRun<T> {
    pub trajectories: Vec<Trajectory<T>>,
    pub spin: Vec<SpinRecord<T>>,
    pub initial: SpinorField<T>,
    pub final_field: SpinorField<T>,
    pub escaped: usize,
}

impl<T: Real> TrajectoryRun<T> {
    pub fn final_positions(&self) -> Vec<T> {
        self.trajectories
            .iter()
            .filter(|t| !t.escaped)
            .map(|t| t.final_position())
            .collect()
    }

    /// Classifies every non-escaped trajectory against the final field.
    pub fn classify(&mut self, overlap_epsilon: T) -> Lobes<T> {
        let lobes = Lobes::analyze(&self.final_field, overlap_epsilon);
        for t in self.trajectories.iter_mut().filter(|t| !t.escaped) {
            t.outcome = lobes.outcome_at(t.final_position());
        }
        lobes
    }

    pub fn unresolved(&self) -> usize {
        self.trajectories
            .iter()
            .filter(|t| !t.outcome.is_resolved())
            .count()
    }
}

/// Integrates `x0s` alongside the field with a shared-`dt` propagator.
pub fn integrate_trajectories<T: Real>(
    x0s: &[T],
    initial: &SpinorField<T>,
    spec: &EvolveSpec<T>,
) -> Result<TrajectoryRun<T>> {
    let prop = Propagator::new(initial.grid, spec.dt);
    integrate_with(&prop, x0s, None, initial, &spec.profile, spec.t_final, spec.snapshot_every)
}

/// Co-integration driver: each field step is followed by one RK4 step per
/// trajectory, with `v` linear in `x` and linear in `t` between the two fields.
pub fn integrate_with<T: Real>(
    prop: &Propagator<T>,
    x0s: &[T],
    weights: Option<&[T]>,
    initial: &SpinorField<T>,
    profile: &FieldProfile<T>,
    t_final: T,
    snapshot_every: usize,
) -> Result<TrajectoryRun<T>> {
    let every = snapshot_every.max(1);
    let grid = initial.grid;
    if let Some(w) = weights {
        if w.len() != x0s.len() {
            return Err(Error::invalid("weights and positions differ in length"));
        }
    }
    let rho0 = initial.density();
    let peak = rho0.iter().copied().fold(T::zero(), T::max);
    for (i, &x) in x0s.iter().enumerate() {
        match interpolate(&grid, &rho0, x) {
            Some(r) if r > peak * T::lit(BOUNDARY_THRESHOLD) => {}
            _ => {
                return Err(Error::invalid(format!(
                    "initial position #{i} ({x}) outside the support of the initial density"
                )))
            }
        }
    }
    prop.check_boundary(initial)?;

    let t0 = initial.t;
    let mut trajectories: Vec<Trajectory<T>> = x0s
        .iter()
        .enumerate()
        .map(|(id, &x0)| Trajectory {
            id,
            x0,
            t0,
            weight: weights.map(|w| w[id]).unwrap_or(T::one()),
            path: vec![(t0, x0)],
            outcome: Outcome::Unresolved,
            escaped: false,
        })
        .collect();
    let mut spin: Vec<SpinRecord<T>> = vec![SpinRecord::default(); x0s.len()];
    record_spin(initial, &trajectories, &mut spin);

    let mut positions: Vec<Option<T>> = x0s.iter().map(|&x| Some(x)).collect();
    let mut current_dc = prop.density_current(initial);
    let steps = crate::solver::step_count(t0, t_final, prop.dt())?;
    let lerp = Lerp::new(&grid);

    let final_field = prop.drive(initial, profile, t_final, |s, prev, next| {
        let next_dc = prop.density_current(next);
        let h = next.t - prev.t;
        let two = T::lit(2.0);
        let v_mid: Vec<T> = current_dc
            .v
            .iter()
            .zip(&next_dc.v)
            .map(|(&a, &b)| (a + b) / two)
            .collect();
        let fields = [&current_dc.v[..], &v_mid[..], &next_dc.v[..]];
        positions
            .par_iter_mut()
            .with_min_len(256)
            .for_each(|pos| {
                if let Some(x) = *pos {
                    *pos = rk4(&lerp, fields, x, h);
                }
            });
        current_dc = next_dc;
        if s % every == 0 || s == steps {
            prop.check_boundary(next)?;
            for (traj, pos) in trajectories.iter_mut().zip(&positions) {
                match pos {
                    Some(x) => traj.path.push((next.t, *x)),
                    None => traj.escaped = true,
                }
            }
            record_spin(next, &trajectories, &mut spin);
        }
        Ok(())
    })?;
    for (traj, pos) in trajectories.iter_mut().zip(&positions) {
        if pos.is_none() {
            traj.escaped = true;
        }
    }
    let escaped = trajectories.iter().filter(|t| t.escaped).count();
    Ok(TrajectoryRun {
        trajectories,
        spin,
        initial: initial.clone(),
        final_field,
        escaped,
    })
}

fn record_spin<T: Real>(field: &SpinorField<T>, trajectories: &[Trajectory<T>], spin: &mut [SpinRecord<T>]) {
    let map = SpinMap::new(field);
    for (traj, rec) in trajectories.iter().zip(spin.iter_mut()) {
        if traj.escaped {
            continue;
        }
        let (t, x) = *traj.path.last().expect("path starts at x0");
        if t == field.t {
            if let Ok(sigma) = map.sigma(x) {
                rec.sigma_samples.push((t, sigma));
            }
        }
    }
}

/// Classical RK4 on `[v(t), v(t + h/2), v(t + h)]`.
fn rk4<T: Real>(lerp: &Lerp<T>, v: [&[T]; 3], x: T, h: T) -> Option<T> {
    let two = T::lit(2.0);
    let k1 = lerp.eval(v[0], x)?;
    let k2 = lerp.eval(v[1], x + h / two * k1)?;
    let k3 = lerp.eval(v[1], x + h / two * k2)?;
    let k4 = lerp.eval(v[2], x + h * k3)?;
    let next = x + h / T::lit(6.0) * (k1 + two * k2 + two * k3 + k4);
    // Leaving the interior counts as escape even between velocity evaluations.
    lerp.eval(v[2], next).map(|_| next)
}

/// Two-lobe analysis of a field at the end of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Lobes<T> {
    /// Only one spin component carries density; every position reads that component.
    Single { outcome: Outcome },
    /// Disjoint lobes split at `x_split`; `up_side` is the side holding the `+` component.
    Separated {
        x_split: T,
        up_side: T,
        overlap: T,
        width: T,
        separation: T,
    },
    Unresolved { reason: String },
}

impl<T: Real> Lobes<T> {
    /// Locates the split as the density minimum between the component centers of
    /// the renormalized two-lobe profile `ρ↑/m↑ + ρ↓/m↓`, then measures the actual
    /// density inside `x_split ± 3w`, `w` being the wider component's RMS width.
    pub fn analyze(field: &SpinorField<T>, overlap_epsilon: T) -> Self {
        let (m_up, m_down) = field.component_masses();
        let total = m_up + m_down;
        if m_down <= total * T::lit(SINGLE_LOBE_MASS) {
            return Lobes::Single { outcome: Outcome::Plus };
        }
        if m_up <= total * T::lit(SINGLE_LOBE_MASS) {
            return Lobes::Single { outcome: Outcome::Minus };
        }
        let geo = LobeGeometry::measure(field);
        if geo.separation < T::lit(SEPARATION_WIDTHS) * geo.width {
            return Lobes::Unresolved {
                reason: format!(
                    "lobe centers {:.4} apart, need {} widths of {:.4}",
                    geo.separation.to_f64_lossy(),
                    SEPARATION_WIDTHS,
                    geo.width.to_f64_lossy()
                ),
            };
        }
        let rho = field.density();
        let overlap = window_mass(field, &rho, geo.x_split, geo.half_window());
        if !(overlap < overlap_epsilon) {
            return Lobes::Unresolved {
                reason: format!(
                    "inter-lobe overlap {:.3e} not below {:.3e}",
                    overlap.to_f64_lossy(),
                    overlap_epsilon.to_f64_lossy()
                ),
            };
        }
        Lobes::Separated {
            x_split: geo.x_split,
            up_side: geo.up_side,
            overlap,
            width: geo.width,
            separation: geo.separation,
        }
    }

    pub fn outcome_at(&self, x: T) -> Outcome {
        match self {
            Lobes::Single { outcome } => *outcome,
            Lobes::Separated { x_split, up_side, .. } => {
                let d = (x - *x_split) * *up_side;
                if d > T::zero() {
                    Outcome::Plus
                } else if d < T::zero() {
                    Outcome::Minus
                } else {
                    Outcome::Unresolved
                }
            }
            Lobes::Unresolved { .. } => Outcome::Unresolved,
        }
    }

    pub fn is_resolved(&self) -> bool {
        !matches!(self, Lobes::Unresolved { .. })
    }
}

/// Spin-independent geometry of the two exits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LobeGeometry<T> {
    pub center_up: T,
    pub center_down: T,
    pub width: T,
    pub separation: T,
    pub x_split: T,
    pub up_side: T,
    /// Window masses of each component normalized to unit mass.
    pub overlap_up: T,
    pub overlap_down: T,
}

impl<T: Real> LobeGeometry<T> {
    /// Needs both components to carry mass.
    pub fn measure(field: &SpinorField<T>) -> Self {
        let (m_up, m_down) = field.component_masses();
        let (cu, su) = field.component_moments(true);
        let (cd, sd) = field.component_moments(false);
        let width = su.max(sd);
        let separation = (cu - cd).abs();
        let grid = &field.grid;
        let profile: Vec<T> = field
            .psi_up
            .iter()
            .zip(&field.psi_down)
            .map(|(u, d)| u.norm_sqr() / m_up + d.norm_sqr() / m_down)
            .collect();
        let (lo, hi) = if cu < cd { (cu, cd) } else { (cd, cu) };
        let mut x_split = (lo + hi) / T::lit(2.0);
        let mut best = T::infinity();
        for (i, &p) in profile.iter().enumerate() {
            let x = grid.x(i);
            if x >= lo && x <= hi && p < best {
                best = p;
                x_split = x;
            }
        }
        let up_side = if cu >= x_split { T::one() } else { -T::one() };
        let half = T::lit(OVERLAP_WINDOW_WIDTHS) * width;
        let rho_up: Vec<T> = field.psi_up.iter().map(|z| z.norm_sqr() / m_up).collect();
        let rho_down: Vec<T> = field.psi_down.iter().map(|z| z.norm_sqr() / m_down).collect();
        LobeGeometry {
            center_up: cu,
            center_down: cd,
            width,
            separation,
            x_split,
            up_side,
            overlap_up: window_mass(field, &rho_up, x_split, half),
            overlap_down: window_mass(field, &rho_down, x_split, half),
        }
    }

    pub fn half_window(&self) -> T {
        T::lit(OVERLAP_WINDOW_WIDTHS) * self.width
    }

    /// The separation criterion that makes every spin state resolvable: centers
    /// more than 8 widths apart and each normalized component below `epsilon`
    /// inside the window, which bounds the overlap of any superposition.
    pub fn is_separated(&self, overlap_epsilon: T) -> bool {
        self.separation > T::lit(SEPARATION_WIDTHS) * self.width
            && self.overlap_up < overlap_epsilon
            && self.overlap_down < overlap_epsilon
    }
}

fn window_mass<T: Real>(field: &SpinorField<T>, rho: &[T], center: T, half: T) -> T {
    let grid = &field.grid;
    rho.iter()
        .enumerate()
        .filter(|(i, _)| (grid.x(*i) - center).abs() <= half)
        .map(|(_, &r)| r)
        .sum::<T>()
        * grid.dx()
}

/// Outcome of one trajectory against the final field.
pub fn classify_outcome<T: Real>(traj: &Trajectory<T>, final_field: &SpinorField<T>, overlap_epsilon: T) -> Outcome {
    if traj.escaped {
        return Outcome::Unresolved;
    }
    Lobes::analyze(final_field, overlap_epsilon).outcome_at(traj.final_position())
}

/// Component densities of one field, for repeated `Σ` evaluations.
struct SpinMap<'a, T> {
    field: &'a SpinorField<T>,
    up: Vec<T>,
    down: Vec<T>,
    peak: T,
}

impl<'a, T: Real> SpinMap<'a, T> {
    fn new(field: &'a SpinorField<T>) -> Self {
        let up: Vec<T> = field.psi_up.iter().map(|z| z.norm_sqr()).collect();
        let down: Vec<T> = field.psi_down.iter().map(|z| z.norm_sqr()).collect();
        let peak = up
            .iter()
            .zip(&down)
            .map(|(&u, &d)| u + d)
            .fold(T::zero(), T::max);
        SpinMap { field, up, down, peak }
    }

    fn sigma(&self, x: T) -> Result<T> {
        let grid = &self.field.grid;
        let (ru, rd) = match (interpolate(grid, &self.up, x), interpolate(grid, &self.down, x)) {
            (Some(u), Some(d)) => (u, d),
            _ => return Err(Error::invalid(format!("x = {x} outside the grid interior"))),
        };
        let rho = ru + rd;
        if !(rho > self.peak * T::lit(NODE_THRESHOLD)) {
            return Err(Error::NodeEvaluation {
                x: x.to_f64_lossy(),
                rho: rho.to_f64_lossy(),
            });
        }
        Ok((ru - rd) / rho)
    }
}

/// `Σ(x, t) = (|ψ↑|² − |ψ↓|²)/ρ` at `x`, linearly interpolated.
pub fn spin_projection<T: Real>(field: &SpinorField<T>, x: T) -> Result<T> {
    SpinMap::new(field).sigma(x)
}

/// `∫ Σ ρ dx`, which in the device basis is `∫ (|ψ↑|² − |ψ↓|²) dx`.
pub fn expectation_description_b<T: Real>(field: &SpinorField<T>) -> T {
    let (u, d) = field.component_masses();
    u - d
}

/// A Monte Carlo or quadrature estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub std_error: T,
    pub n: usize,
}

/// Weighted average of `A(x₀) = ±1` over the ensemble.
pub fn expectation_description_a<T: Real>(trajectories: &[Trajectory<T>], initial: &SpinorField<T>) -> Result<Estimate<T>> {
    let unresolved = trajectories
        .iter()
        .filter(|t| !t.outcome.is_resolved())
        .count();
    if unresolved > 0 {
        return Err(Error::Unresolved {
            unresolved,
            total: trajectories.len(),
        });
    }
    if trajectories.is_empty() {
        return Err(Error::invalid("no trajectories"));
    }
    if trajectories.iter().any(|t| t.t0 != initial.t) {
        return Err(Error::invalid("trajectories do not start at the initial field time"));
    }
    let value_of = |t: &Trajectory<T>| T::lit(t.outcome.value().unwrap() as f64);
    let wsum: T = trajectories.iter().map(|t| t.weight).sum();
    let mean = trajectories
        .iter()
        .map(|t| t.weight * value_of(t))
        .sum::<T>()
        / wsum;
    let var = trajectories
        .iter()
        .map(|t| {
            let d = value_of(t) - mean;
            t.weight * t.weight * d * d
        })
        .sum::<T>();
    // Unit weights: the usual sample-variance standard error.
    let n = trajectories.len();
    let std_error = if trajectories.iter().all(|t| t.weight == T::one()) && n > 1 {
        (var / T::from_usize(n - 1).unwrap()).sqrt() / T::from_usize(n).unwrap().sqrt()
    } else {
        var.sqrt() / wsum
    };
    Ok(Estimate {
        value: mean,
        std_error,
        n,
    })
}

/// KS distance between evolved positions and the CDF of `ρ(·, t)`.
pub fn check_equivariance<T: Real>(positions: &[T], field: &SpinorField<T>) -> T {
    ks_distance(positions, &DensityCdf::from_field(field))
}

/// Number of trajectory pairs whose order at some stored time differs from their order at `t0`.
pub fn order_inversions<T: Real>(trajectories: &[Trajectory<T>]) -> usize {
    let mut alive: Vec<&Trajectory<T>> = trajectories.iter().filter(|t| !t.escaped).collect();
    alive.sort_by(|a, b| a.x0.partial_cmp(&b.x0).expect("finite x0"));
    let len = alive.iter().map(|t| t.path.len()).min().unwrap_or(0);
    let mut inversions = 0;
    for k in 0..len {
        for w in alive.windows(2) {
            if w[1].path[k].1 < w[0].path[k].1 {
                inversions += 1;
            }
        }
    }
    inversions
}
