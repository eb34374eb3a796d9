//! Phase-space types: angles on the torus, actions in a box, Fourier
//! perturbations, integrable systems with resonance metadata, and grid
//! estimates of `C^j` norms.

pub mod fourier;
pub mod norm;
pub mod poly;
pub mod system;

pub use fourier::{canonical_wave_vector, poisson_bracket, wave_norm, FourierMode, FourierPerturbation};
pub use norm::{estimate_cj_norm, NormField, NormGrid, NormReport};
pub use poly::{Monomial, PolyField};
pub use system::{
    evaluate_hamiltonian, hamiltonian_vector_field, verify_channel_assumptions, ChannelReport,
    IntegrableSystem, ResonanceData, SystemBundle,
};

use crate::error::{Error, Result};

/// Canonical representative in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance on the circle `ℝ/ℤ`, at most `1/2`.
#[inline]
pub fn circle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_unit(a - b);
    d.min(1.0 - d)
}

/// A point of `𝕋² = ℝ²/ℤ²`, always stored by its representative in `[0,1)²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair([f64; 2]);

impl AnglePair {
    pub fn new(theta1: f64, theta2: f64) -> Self {
        Self([wrap_unit(theta1), wrap_unit(theta2)])
    }

    pub fn theta1(&self) -> f64 {
        self.0[0]
    }

    pub fn theta2(&self) -> f64 {
        self.0[1]
    }

    pub fn as_array(&self) -> [f64; 2] {
        self.0
    }

    /// Real translation followed by re-wrapping.
    pub fn shifted(&self, d: [f64; 2]) -> Self {
        Self::new(self.0[0] + d[0], self.0[1] + d[1])
    }

    /// Translation by an integer vector: the torus point does not move, so the
    /// representative is returned unchanged.
    pub fn shifted_by_lattice(&self, _m: [i64; 2]) -> Self {
        *self
    }

    /// Supremum over coordinates of the circle distance.
    pub fn distance(&self, other: &Self) -> f64 {
        circle_distance(self.0[0], other.0[0]).max(circle_distance(self.0[1], other.0[1]))
    }
}

/// Action values `(I1, I2)` with the supremum norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionPair(pub [f64; 2]);

impl ActionPair {
    pub fn new(i1: f64, i2: f64) -> Self {
        Self([i1, i2])
    }

    pub fn i1(&self) -> f64 {
        self.0[0]
    }

    pub fn i2(&self) -> f64 {
        self.0[1]
    }

    pub fn sup_norm(&self) -> f64 {
        self.0[0].abs().max(self.0[1].abs())
    }

    /// Membership in `B_R = {|I1| ≤ R, |I2| ≤ R}`.
    pub fn in_ball(&self, radius: f64) -> bool {
        self.sup_norm() <= radius
    }
}

/// Closed axis-aligned box of actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionBox {
    pub i1: [f64; 2],
    pub i2: [f64; 2],
}

impl ActionBox {
    pub fn new(i1: [f64; 2], i2: [f64; 2]) -> Self {
        Self { i1, i2 }
    }

    pub fn ball(radius: f64) -> Self {
        Self::new([-radius, radius], [-radius, radius])
    }

    /// The `width`-neighbourhood of the segment `{(I1, 0) : I1 ∈ [lo, hi]}`.
    pub fn channel(interval: [f64; 2], width: f64) -> Self {
        Self::new([interval[0] - width, interval[1] + width], [-width, width])
    }

    pub fn contains(&self, a: [f64; 2]) -> bool {
        a[0] >= self.i1[0] && a[0] <= self.i1[1] && a[1] >= self.i2[0] && a[1] <= self.i2[1]
    }

    pub fn within_ball(&self, radius: f64) -> bool {
        [self.i1[0], self.i1[1], self.i2[0], self.i2[1]].iter().all(|v| v.abs() <= radius)
    }

    /// `n` equispaced points per axis, endpoints included (a single midpoint
    /// when `n == 1`).
    pub fn grid(&self, n1: usize, n2: usize) -> Vec<[f64; 2]> {
        let xs = linspace(self.i1, n1);
        let ys = linspace(self.i2, n2);
        xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, y])).collect()
    }
}

pub fn linspace(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (range[0] + range[1])],
        _ => (0..n)
            .map(|j| range[0] + (range[1] - range[0]) * j as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// A phase-space point `(θ, I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub angles: AnglePair,
    pub actions: ActionPair,
}

impl PhaseState {
    pub fn new(theta: [f64; 2], action: [f64; 2]) -> Self {
        Self { angles: AnglePair::new(theta[0], theta[1]), actions: ActionPair(action) }
    }

    /// Constructor enforcing membership of the actions in `B_R`.
    pub fn in_domain(theta: [f64; 2], action: [f64; 2], radius: f64) -> Result<Self> {
        let z = Self::new(theta, action);
        check_domain(action, radius)?;
        Ok(z)
    }

    pub fn from_lift(y: &[f64; 4]) -> Self {
        Self::new([y[0], y[1]], [y[2], y[3]])
    }

    /// Representation used by the integrator: `[θ1, θ2, I1, I2]`.
    pub fn to_lift(&self) -> [f64; 4] {
        [self.angles.theta1(), self.angles.theta2(), self.actions.i1(), self.actions.i2()]
    }

    pub fn theta(&self) -> [f64; 2] {
        self.angles.as_array()
    }

    pub fn action(&self) -> [f64; 2] {
        self.actions.0
    }

    /// Sup-norm distance with angles measured on the torus.
    pub fn distance(&self, other: &Self) -> f64 {
        self.angles
            .distance(&other.angles)
            .max((self.actions.i1() - other.actions.i1()).abs())
            .max((self.actions.i2() - other.actions.i2()).abs())
    }
}

/// Distance between two lifted states with angles taken modulo 1.
pub fn lift_distance(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    circle_distance(a[0], b[0])
        .max(circle_distance(a[1], b[1]))
        .max((a[2] - b[2]).abs())
        .max((a[3] - b[3]).abs())
}

pub(crate) fn check_domain(action: [f64; 2], radius: f64) -> Result<()> {
    if ActionPair(action).in_ball(radius) {
        Ok(())
    } else {
        Err(Error::DomainViolation { i1: action[0], i2: action[1], radius })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_handles_negative_round_off() {
        assert_eq!(wrap_unit(-1e-18), 0.0);
        assert_eq!(wrap_unit(-0.25), 0.75);
        assert_eq!(wrap_unit(3.5), 0.5);
        assert_eq!(AnglePair::new(-500.0, 1.0).as_array(), [0.0, 0.0]);
    }

    #[test]
    fn torus_distance_is_at_most_half() {
        let a = AnglePair::new(0.05, 0.9);
        let b = AnglePair::new(0.95, 0.4);
        assert!((a.distance(&b) - 0.5).abs() < 1e-15);
        assert!((circle_distance(0.05, 0.95) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn ball_membership_uses_sup_norm() {
        assert!(ActionPair::new(1.0, -1.0).in_ball(1.0));
        assert!(!ActionPair::new(1.0, -1.0000001).in_ball(1.0));
        assert!(PhaseState::in_domain([0.0, 0.0], [2.0, 0.0], 1.5).is_err());
    }

    proptest! {
        #[test]
        fn lattice_shift_is_exact(t1 in -10.0f64..10.0, t2 in -10.0f64..10.0, m1 in -50i64..50, m2 in -50i64..50) {
            let a = AnglePair::new(t1, t2);
            prop_assert_eq!(a.shifted_by_lattice([m1, m2]), a);
            // dyadic angles survive real integer translation bit for bit
            let d1 = (t1 * 1024.0).round() / 1024.0;
            let d2 = (t2 * 1024.0).round() / 1024.0;
            let b = AnglePair::new(d1, d2);
            prop_assert_eq!(b.shifted([m1 as f64, m2 as f64]), b);
            // generic angles agree up to rounding of the translation
            let c = a.shifted([m1 as f64, m2 as f64]);
            prop_assert!(a.distance(&c) <= 64.0 * f64::EPSILON);
            prop_assert!(c.theta1() >= 0.0 && c.theta1() < 1.0);
        }
    }
}
