//! A Stern–Gerlach scenario as data, and the device pipeline built on it:
//! rotate the prepared spin into the device basis, evolve, co-integrate the
//! trajectories and classify their exits.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::{integrate_with, LobeGeometry, Lobes, TrajectoryRun};
use crate::quantum::{rotate_basis, Direction, Outcome, SpinCoefficients};
use crate::real::Real;
use crate::sampling::DensityCdf;
use crate::solver::{
    init_gaussian_packet, stability_phase, FieldProfile, Grid1D, Propagator, SpinorField,
    MAX_PHASE_PER_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: -40.0,
            x_max: 40.0,
            n_points: 4096,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
}

impl Default for PacketConfig {
    fn default() -> Self {
        PacketConfig {
            center: 0.0,
            width: 1.0,
            momentum: 0.0,
        }
    }
}

/// Preparation axis, in degrees, relative to the reference axis `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinConfig {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub mu: f64,
    pub b0: f64,
    pub gradient: f64,
    pub t_on: f64,
    pub t_off: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            mu: 1.0,
            b0: 0.0,
            gradient: 25.0,
            t_on: 0.0,
            t_off: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dt: f64,
    /// Fixed end time; when absent the run stops once the lobes are separated.
    pub t_final: Option<f64>,
    /// Upper bound on the separation search.
    pub t_max: f64,
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dt: 1e-3,
            t_final: None,
            t_max: 6.0,
            snapshot_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_samples: 10_000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub overlap_epsilon: f64,
    pub unresolved_max_fraction: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            overlap_epsilon: 1e-4,
            unresolved_max_fraction: 1e-3,
        }
    }
}

/// Every knob of a run, with defaults for all of them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub grid: GridConfig,
    pub packet: PacketConfig,
    pub spin: SpinConfig,
    pub field: FieldConfig,
    pub run: RunConfig,
    pub ensemble: EnsembleConfig,
    pub thresholds: Thresholds,
}

impl ScenarioConfig {
    /// The state prepared along the configured axis, in the reference basis.
    pub fn prepared_state<T: Real>(&self) -> SpinCoefficients<T> {
        SpinCoefficients::up_along(&self.preparation_axis())
    }

    pub fn preparation_axis<T: Real>(&self) -> Direction<T> {
        Direction::new(
            T::lit(self.spin.theta_deg.to_radians()),
            T::lit(self.spin.phi_deg.to_radians()),
        )
    }

    /// Checks everything that can be checked without evolving anything.
    pub fn validate(&self) -> Result<()> {
        let t = &self.thresholds;
        if !(t.overlap_epsilon > 0.0 && t.overlap_epsilon < 1.0) {
            return Err(Error::invalid("overlap_epsilon must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&t.unresolved_max_fraction) {
            return Err(Error::invalid("unresolved_max_fraction must lie in [0, 1)"));
        }
        if self.ensemble.n_samples == 0 {
            return Err(Error::invalid("n_samples must be at least 1"));
        }
        if !(self.run.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if self.run.snapshot_every == 0 {
            return Err(Error::invalid("snapshot_every must be positive"));
        }
        if let Some(tf) = self.run.t_final {
            if !(tf > 0.0) {
                return Err(Error::invalid("t_final must be positive"));
            }
        }
        let f = &self.field;
        if !(f.t_on < f.t_off) {
            return Err(Error::invalid("field window needs t_on < t_off"));
        }
        if !(f.mu * f.gradient * (f.t_off - f.t_on) > 0.0) {
            return Err(Error::invalid("mu * gradient * (t_off - t_on) must be positive"));
        }
        if f.t_on < 0.0 {
            return Err(Error::invalid("field window must open at or after t0 = 0"));
        }
        let grid = Grid1D::<f64>::new(self.grid.x_min, self.grid.x_max, self.grid.n_points)?;
        let packet = init_gaussian_packet(
            grid,
            self.packet.center,
            self.packet.width,
            self.packet.momentum,
            SpinCoefficients::up(),
        )?;
        let profile = FieldProfile::new(f.mu, f.b0, f.gradient, f.t_on, f.t_off, Direction::z())?;
        let phase = stability_phase(&packet, &profile, self.run.dt);
        if phase >= MAX_PHASE_PER_STEP {
            return Err(Error::invalid(format!(
                "dt = {} gives a phase increment of {phase:.3} rad per step (limit {MAX_PHASE_PER_STEP})",
                self.run.dt
            )));
        }
        Ok(())
    }
}

/// Validated scenario with its propagator and the resolved end time.
pub struct Scenario<T: Real> {
    config: ScenarioConfig,
    grid: Grid1D<T>,
    propagator: Propagator<T>,
    t_final: T,
}

impl<T: Real> Scenario<T> {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid1D::new(
            T::lit(config.grid.x_min),
            T::lit(config.grid.x_max),
            config.grid.n_points,
        )?;
        let propagator = Propagator::new(grid, T::lit(config.run.dt));
        let mut scenario = Scenario {
            config,
            grid,
            propagator,
            t_final: T::zero(),
        };
        scenario.t_final = match config.run.t_final {
            Some(t) => T::lit(t),
            None => scenario.separation_time()?,
        };
        Ok(scenario)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn propagator(&self) -> &Propagator<T> {
        &self.propagator
    }

    pub fn t_final(&self) -> T {
        self.t_final
    }

    pub fn overlap_epsilon(&self) -> T {
        T::lit(self.config.thresholds.overlap_epsilon)
    }

    pub fn profile(&self, device: Direction<T>) -> FieldProfile<T> {
        let f = &self.config.field;
        FieldProfile {
            mu: T::lit(f.mu),
            b0: T::lit(f.b0),
            gradient: T::lit(f.gradient),
            t_on: T::lit(f.t_on),
            t_off: T::lit(f.t_off),
            device_axis: device,
        }
    }

    /// Packet with the given device-basis amplitudes at `t0 = 0`.
    pub fn packet(&self, coeffs: SpinCoefficients<T>) -> Result<SpinorField<T>> {
        let p = &self.config.packet;
        init_gaussian_packet(self.grid, T::lit(p.center), T::lit(p.width), T::lit(p.momentum), coeffs)
    }

    /// Spin-independent spatial packet, `ρ(·, t0)` for every preparation.
    pub fn initial_density_field(&self) -> SpinorField<T> {
        self.packet(SpinCoefficients::up()).expect("validated packet")
    }

    /// First snapshot time after the window closes at which every spin state
    /// would be resolvable. The component geometry does not depend on the
    /// amplitudes, so an equal-weight probe decides it once for all settings.
    fn separation_time(&self) -> Result<T> {
        let h = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        let probe = self.packet(SpinCoefficients::from_real(h, h)?)?;
        let profile = self.profile(Direction::z());
        let every = self.config.run.snapshot_every;
        let eps = self.overlap_epsilon();
        let t_off = profile.t_off;
        let mut found = None;
        let t_max = T::lit(self.config.run.t_max);
        let result = self.propagator.drive(&probe, &profile, t_max, |s, _, next| {
            if s % every == 0 {
                self.propagator.check_boundary(next)?;
                if next.t > t_off && LobeGeometry::measure(next).is_separated(eps) {
                    found = Some(next.t);
                    // Abort the drive early; the sentinel is recognised below.
                    return Err(Error::Internal(String::from("separated")));
                }
            }
            Ok(())
        });
        match (found, result) {
            (Some(t), _) => Ok(t),
            (None, Err(e)) => Err(e),
            (None, Ok(_)) => Err(Error::invalid(format!(
                "lobes not separated by t_max = {}",
                self.config.run.t_max
            ))),
        }
    }

    /// Runs one device on `x0s` for a state given in the reference basis.
    pub fn run_device(
        &self,
        device: Direction<T>,
        state: &SpinCoefficients<T>,
        x0s: &[T],
        weights: Option<&[T]>,
    ) -> Result<DeviceRun<T>> {
        let coeffs = normalized(rotate_basis(state, &Direction::z(), &device));
        let initial = self.packet(coeffs)?;
        let profile = self.profile(device);
        let mut run = integrate_with(
            &self.propagator,
            x0s,
            weights,
            &initial,
            &profile,
            self.t_final,
            self.config.run.snapshot_every,
        )?;
        let lobes = run.classify(self.overlap_epsilon());
        Ok(DeviceRun {
            device,
            coeffs,
            run,
            lobes,
        })
    }

    /// Fails when escaped plus unresolved samples exceed the configured fraction.
    pub fn check_failures(&self, failed: usize, total: usize) -> Result<()> {
        let limit = self.config.thresholds.unresolved_max_fraction;
        if total > 0 && failed as f64 > limit * total as f64 {
            return Err(Error::RunFailure {
                failed,
                total,
                limit,
            });
        }
        Ok(())
    }
}

fn normalized<T: Real>(c: SpinCoefficients<T>) -> SpinCoefficients<T> {
    let n = c.norm_sqr().sqrt();
    SpinCoefficients {
        c_up: c.c_up / n,
        c_down: c.c_down / n,
    }
}

/// Output of one device on one ensemble.
pub struct DeviceRun<T: Real> {
    pub device: Direction<T>,
    /// Amplitudes in the device basis.
    pub coeffs: SpinCoefficients<T>,
    pub run: TrajectoryRun<T>,
    pub lobes: Lobes<T>,
}

impl<T: Real> DeviceRun<T> {
    pub fn outcomes(&self) -> Vec<Outcome> {
        self.run.trajectories.iter().map(|t| t.outcome).collect()
    }

    /// Escaped and unresolved samples together.
    pub fn failed(&self) -> usize {
        self.run.unresolved()
    }

    /// Maps final positions in branch `outcome` to fresh initial positions by
    /// matching quantiles: the conditional CDF of `ρ(·, t_final)` on that exit
    /// is carried onto the CDF of `fresh`.
    pub fn branch_restart(&self, outcome: Outcome, fresh: &SpinorField<T>) -> Result<Vec<(usize, T)>> {
        let final_field = &self.run.final_field;
        let cdf = DensityCdf::from_field(final_field);
        let (lo, hi) = match &self.lobes {
            Lobes::Single { .. } => (T::zero(), T::one()),
            Lobes::Separated { x_split, up_side, .. } => {
                let at_split = cdf.cdf(*x_split);
                let plus_right = *up_side > T::zero();
                if (outcome == Outcome::Plus) == plus_right {
                    (at_split, T::one())
                } else {
                    (T::zero(), at_split)
                }
            }
            Lobes::Unresolved { reason } => return Err(Error::invalid(reason.clone())),
        };
        if !(hi > lo) {
            return Err(Error::Internal(String::from("empty branch")));
        }
        let target = DensityCdf::from_field(fresh);
        let clamp = T::lit(1e-8);
        Ok(self
            .run
            .trajectories
            .iter()
            .filter(|t| t.outcome == outcome)
            .map(|t| {
                let u = (cdf.cdf(t.final_position()) - lo) / (hi - lo);
                let u = u.max(clamp).min(T::one() - clamp);
                (t.id, target.quantile(u))
            })
            .collect())
    }
}

/// Amplitudes for a device-basis eigenstate, with the global phase dropped.
pub fn device_eigen_coeffs<T: Real>(outcome: Outcome) -> SpinCoefficients<T> {
    let one = Complex::new(T::one(), T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    match outcome {
        Outcome::Minus => SpinCoefficients {
            c_up: zero,
            c_down: one,
        },
        _ => SpinCoefficients {
            c_up: one,
            c_down: zero,
        },
    }
}
