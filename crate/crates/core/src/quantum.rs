//! Spin-1/2 algebra: measurement directions, two-component amplitudes and the
//! closed-form quantum predictions the simulations are checked against.
//!
//! Amplitudes are always expressed relative to the eigenbasis of some
//! [`Direction`]. For a direction `n = (θ, φ)` the basis vectors, written in
//! the reference (`z`) basis, are
//!
//! ```text
//! |+n⟩ = (  cos θ/2,          e^{iφ} sin θ/2 )
//! |−n⟩ = ( −e^{−iφ} sin θ/2,  cos θ/2        )
//! ```
//!
//! so that the `z` eigenbasis is the reference basis itself. A state
//! "prepared along `n`" is therefore `SpinCoefficients::up_along(n)` in the
//! reference basis.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Tolerance for the unit-norm checks on spinors; 1e-12 in double precision.
pub fn norm_tolerance<T: Real>() -> T {
    T::lit(1e-12_f64.max(T::EPS * 64.0))
}

/// A measurement axis on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction<T> {
    theta: T,
    phi: T,
}

impl<T: Real> Direction<T> {
    /// Builds a direction, folding `theta` into `[0, π]` and `phi` into `[0, 2π)`.
    pub fn new(theta: T, phi: T) -> Self {
        let two_pi = T::PI() + T::PI();
        let mut theta = theta % two_pi;
        if theta < T::zero() {
            theta = theta + two_pi;
        }
        let mut phi = phi;
        if theta > T::PI() {
            theta = two_pi - theta;
            phi = phi + T::PI();
        }
        let mut phi = phi % two_pi;
        if phi < T::zero() {
            phi = phi + two_pi;
        }
        if phi >= two_pi {
            phi = phi - two_pi;
        }
        Direction { theta, phi }
    }

    /// Axis in the x–z plane at `angle` from `+z` (radians).
    pub fn planar(angle: T) -> Self {
        Self::new(angle, T::zero())
    }

    pub fn planar_degrees(deg: T) -> Self {
        Self::planar(deg.to_radians())
    }

    pub fn z() -> Self {
        Direction {
            theta: T::zero(),
            phi: T::zero(),
        }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn phi(&self) -> T {
        self.phi
    }

    /// Unit 3-vector `(sinθ cosφ, sinθ sinφ, cosθ)`.
    pub fn vector(&self) -> [T; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn dot(&self, other: &Self) -> T {
        let a = self.vector();
        let b = other.vector();
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
    }

    /// Angle between the two axes, in `[0, π]`.
    pub fn angle_to(&self, other: &Self) -> T {
        self.dot(other).max(-T::one()).min(T::one()).acos()
    }

    /// Spinor of the eigenstate with eigenvalue `sign` of `σ·n`, in the reference basis.
    pub fn eigenstate(&self, sign: Outcome) -> SpinCoefficients<T> {
        let half = self.theta / T::lit(2.0);
        let (s, c) = half.sin_cos();
        let phase = Complex::from_polar(T::one(), self.phi);
        match sign {
            Outcome::Minus => SpinCoefficients {
                c_up: -phase.conj() * s,
                c_down: Complex::new(c, T::zero()),
            },
            _ => SpinCoefficients {
                c_up: Complex::new(c, T::zero()),
                c_down: phase * s,
            },
        }
    }
}

/// Two amplitudes `(c_up, c_down)` in the eigenbasis of some measurement axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinCoefficients<T> {
    pub c_up: Complex<T>,
    pub c_down: Complex<T>,
}

impl<T: Real> SpinCoefficients<T> {
    /// Validating constructor: the pair must have unit norm.
    pub fn new(c_up: Complex<T>, c_down: Complex<T>) -> Result<Self> {
        let s = SpinCoefficients { c_up, c_down };
        s.check_normalized()?;
        Ok(s)
    }

    pub fn from_real(up: T, down: T) -> Result<Self> {
        Self::new(Complex::new(up, T::zero()), Complex::new(down, T::zero()))
    }

    pub fn up() -> Self {
        SpinCoefficients {
            c_up: Complex::new(T::one(), T::zero()),
            c_down: Complex::new(T::zero(), T::zero()),
        }
    }

    /// State prepared along `dir`, expressed in the reference basis.
    pub fn up_along(dir: &Direction<T>) -> Self {
        dir.eigenstate(Outcome::Plus)
    }

    pub fn norm_sqr(&self) -> T {
        self.c_up.norm_sqr() + self.c_down.norm_sqr()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if !n.is_finite() || (n - T::one()).abs() > norm_tolerance::<T>() {
            return Err(Error::invalid(format!(
                "spin coefficients not normalized: |c_up|^2 + |c_down|^2 = {n}"
            )));
        }
        Ok(())
    }

    fn inner(&self, other: &Self) -> Complex<T> {
        self.c_up.conj() * other.c_up + self.c_down.conj() * other.c_down
    }
}

/// A measured spin value. `Unresolved` is an error channel, never a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Plus,
    Minus,
    Unresolved,
}

impl Outcome {
    pub fn from_sign(s: i8) -> Self {
        match s.signum() {
            1 => Outcome::Plus,
            -1 => Outcome::Minus,
            _ => Outcome::Unresolved,
        }
    }

    pub fn value(self) -> Option<i8> {
        match self {
            Outcome::Plus => Some(1),
            Outcome::Minus => Some(-1),
            Outcome::Unresolved => None,
        }
    }

    pub fn is_resolved(self) -> bool {
        self != Outcome::Unresolved
    }

    /// Table index: `Plus → 0`, `Minus → 1`.
    pub fn index(self) -> Option<usize> {
        match self {
            Outcome::Plus => Some(0),
            Outcome::Minus => Some(1),
            Outcome::Unresolved => None,
        }
    }
}

/// `(P(+), P(−)) = (|c_up|², |c_down|²)`.
pub fn born_probability<T: Real>(state: &SpinCoefficients<T>) -> Result<(T, T)> {
    state.check_normalized()?;
    Ok((state.c_up.norm_sqr(), state.c_down.norm_sqr()))
}

/// Change-of-basis matrix `U_to† U_from`, with the global phase fixed so the
/// `(up, up)` element is real and nonnegative.
pub fn basis_change<T: Real>(from: &Direction<T>, to: &Direction<T>) -> [[Complex<T>; 2]; 2] {
    let fu = from.eigenstate(Outcome::Plus);
    let fd = from.eigenstate(Outcome::Minus);
    let tu = to.eigenstate(Outcome::Plus);
    let td = to.eigenstate(Outcome::Minus);
    let mut m = [[tu.inner(&fu), tu.inner(&fd)], [td.inner(&fu), td.inner(&fd)]];
    // Antiparallel axes have a vanishing (up, up) element; pin (down, up) instead.
    let pivot = if m[0][0].norm() > T::lit(1e-6) { m[0][0] } else { m[1][0] };
    if pivot.norm() > T::zero() {
        let phase = pivot.conj() / pivot.norm();
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e = *e * phase;
            }
        }
    }
    m
}

/// Re-expresses amplitudes given in the `from` eigenbasis in the `to` eigenbasis.
pub fn rotate_basis<T: Real>(
    state: &SpinCoefficients<T>,
    from: &Direction<T>,
    to: &Direction<T>,
) -> SpinCoefficients<T> {
    let m = basis_change(from, to);
    SpinCoefficients {
        c_up: m[0][0] * state.c_up + m[0][1] * state.c_down,
        c_down: m[1][0] * state.c_up + m[1][1] * state.c_down,
    }
}

/// Quantum singlet correlation `E(a, b) = −a·b`.
pub fn singlet_correlation<T: Real>(a: &Direction<T>, b: &Direction<T>) -> T {
    -a.dot(b)
}

/// Chain-rule probability of `α′` along `first` followed by `α` along `second`,
/// for `state` given in the reference basis.
pub fn sequential_chain_probability<T: Real>(
    first: &Direction<T>,
    second: &Direction<T>,
    state: &SpinCoefficients<T>,
    first_outcome: Outcome,
    second_outcome: Outcome,
) -> Result<T> {
    state.check_normalized()?;
    if !first_outcome.is_resolved() || !second_outcome.is_resolved() {
        return Err(Error::invalid("chain probability needs resolved outcomes"));
    }
    let branch = first.eigenstate(first_outcome);
    let p_first = branch.inner(state).norm_sqr();
    let p_second = second.eigenstate(second_outcome).inner(&branch).norm_sqr();
    Ok(p_first * p_second)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

    fn same_up_to_phase(a: &SpinCoefficients<f64>, b: &SpinCoefficients<f64>, tol: f64) -> bool {
        let overlap = a.inner(b).norm();
        (overlap - 1.0).abs() < tol
    }

    #[test]
    fn direction_is_unit_and_normalized() {
        for &(t, p) in &[(0.3, 0.1), (-0.7, 0.0), (4.0, 7.0), (PI, -1.0), (2.0 * PI, 0.0)] {
            let d = Direction::new(t, p);
            let v = d.vector();
            let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
            assert!((0.0..=PI).contains(&d.theta()));
            assert!((0.0..2.0 * PI).contains(&d.phi()));
        }
        // Folding keeps the geometric axis.
        let folded = Direction::new(-FRAC_PI_4, 0.0);
        let expect = [-(FRAC_PI_4.sin()), 0.0, FRAC_PI_4.cos()];
        for (x, y) in folded.vector().iter().zip(expect) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn born_examples() {
        let (p, m) = born_probability(&SpinCoefficients::<f64>::up()).unwrap();
        assert_eq!((p, m), (1.0, 0.0));
        let s = SpinCoefficients::from_real(FRAC_1_SQRT_2, FRAC_1_SQRT_2).unwrap();
        let (p, m) = born_probability(&s).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-12);
        let s = SpinCoefficients::from_real(FRAC_PI_6.cos(), FRAC_PI_6.sin()).unwrap();
        let (p, m) = born_probability(&s).unwrap();
        assert_abs_diff_eq!(p, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(m, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn born_rejects_unnormalized() {
        let bad = SpinCoefficients {
            c_up: Complex::new(1.0, 0.0),
            c_down: Complex::new(0.1, 0.0),
        };
        assert!(matches!(born_probability(&bad), Err(Error::InvalidInput(_))));
        assert!(SpinCoefficients::from_real(0.6, 0.6).is_err());
    }

    #[test]
    fn rotate_identity_and_planar_example() {
        let s = SpinCoefficients::from_real(0.6, 0.8).unwrap();
        let a = Direction::new(0.4, 1.3);
        let r = rotate_basis(&s, &a, &a);
        assert_abs_diff_eq!((r.c_up - s.c_up).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((r.c_down - s.c_down).norm(), 0.0, epsilon = 1e-12);

        for &theta in &[0.0, FRAC_PI_6, FRAC_PI_3, FRAC_PI_2, 2.0, PI] {
            let n = Direction::planar(theta);
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let r = rotate_basis(&SpinCoefficients::up(), &n, &Direction::z());
            let expect = SpinCoefficients::from_real(c, s).unwrap();
            assert!(same_up_to_phase(&r, &expect, 1e-12), "theta = {theta}: {r:?}");
            let r = rotate_basis(&SpinCoefficients::up_along(&n), &Direction::z(), &Direction::z());
            assert!(same_up_to_phase(&r, &expect, 1e-12), "theta = {theta}: {r:?}");
            let r = rotate_basis(&SpinCoefficients::up(), &Direction::z(), &n);
            let expect = SpinCoefficients::from_real(c, -s).unwrap();
            assert!(same_up_to_phase(&r, &expect, 1e-12), "theta = {theta}: {r:?}");
            let (p, _) = born_probability(&r).unwrap();
            assert_abs_diff_eq!(p, c * c, epsilon = 1e-12);
        }
    }

    #[test]
    fn rotate_round_trip() {
        let s = SpinCoefficients::new(Complex::new(0.6, 0.0), Complex::new(0.0, 0.8)).unwrap();
        let z = Direction::z();
        let a = Direction::new(1.1, 0.4);
        let back = rotate_basis(&rotate_basis(&s, &z, &a), &a, &z);
        assert!(same_up_to_phase(&back, &s, 1e-12));
    }

    #[test]
    fn singlet_examples() {
        let a = Direction::<f64>::planar(0.3);
        assert_abs_diff_eq!(singlet_correlation(&a, &a), -1.0, epsilon = 1e-12);
        let b = Direction::planar(0.3 + FRAC_PI_2);
        assert_abs_diff_eq!(singlet_correlation(&a, &b), 0.0, epsilon = 1e-12);
        let c = Direction::planar(0.3 + 3.0 * FRAC_PI_4);
        assert_abs_diff_eq!(singlet_correlation(&a, &c), FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn chain_rule_examples() {
        let first = Direction::<f64>::planar(0.0);
        let second = Direction::planar(FRAC_PI_2);
        let state = SpinCoefficients::up_along(&first);
        let p = sequential_chain_probability(&first, &second, &state, Outcome::Plus, Outcome::Plus)
            .unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-12);

        let s = SpinCoefficients::up_along(&Direction::planar(1.0));
        let rep = sequential_chain_probability(&first, &first, &s, Outcome::Minus, Outcome::Minus)
            .unwrap();
        let (_, pm) = born_probability(&rotate_basis(&s, &Direction::z(), &first)).unwrap();
        assert_abs_diff_eq!(rep, pm, epsilon = 1e-12);
        let cross =
            sequential_chain_probability(&first, &first, &s, Outcome::Minus, Outcome::Plus).unwrap();
        assert_abs_diff_eq!(cross, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn single_precision_compiles_and_agrees() {
        let s = rotate_basis(
            &SpinCoefficients::<f32>::up(),
            &Direction::z(),
            &Direction::planar(std::f32::consts::FRAC_PI_3),
        );
        let (p, _) = born_probability(&s).unwrap();
        assert!((p - 0.75).abs() < 1e-6);
    }
}
