use super::fourier::FourierPerturbation;
use super::poly::PolyField;
use super::{check_domain, linspace, PhaseState};
use crate::error::{invalid, Error, Result};

const LINE_TOL: f64 = 1e-9;

/// Resonance line `k·I + a = 0`, the channel segment `S`, its core `S*` and
/// the frequency lower bound `ϖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceData {
    pub k: [i64; 2],
    pub a: f64,
    pub segment: [[f64; 2]; 2],
    pub core: [[f64; 2]; 2],
    pub varpi: f64,
    /// Distance from the marked point `I*` to the boundary of `S*`, filled in
    /// by the genericity analysis.
    pub delta_star: Option<f64>,
}

impl ResonanceData {
    pub fn new(k: [i64; 2], a: f64, segment: [[f64; 2]; 2], core: [[f64; 2]; 2], varpi: f64) -> Result<Self> {
        if k == [0, 0] {
            return Err(Error::ZeroVector);
        }
        if !(varpi > 0.0 && varpi.is_finite()) {
            return Err(invalid("varpi", format!("must be positive, got {varpi}")));
        }
        let r = Self { k, a, segment, core, varpi, delta_star: None };
        for p in segment.iter().chain(core.iter()) {
            if r.line_residual(*p).abs() > LINE_TOL * (1.0 + p[0].abs() + p[1].abs()) {
                return Err(invalid("resonance", format!("point ({}, {}) is not on the resonance line", p[0], p[1])));
            }
        }
        let d = [segment[1][0] - segment[0][0], segment[1][1] - segment[0][1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        if len2 == 0.0 {
            return Err(invalid("resonance", "segment S is degenerate"));
        }
        for p in core {
            let s = ((p[0] - segment[0][0]) * d[0] + (p[1] - segment[0][1]) * d[1]) / len2;
            if !(-1e-12..=1.0 + 1e-12).contains(&s) {
                return Err(invalid("resonance", "S* is not contained in S"));
            }
        }
        Ok(r)
    }

    /// `k·I + a`.
    pub fn line_residual(&self, i: [f64; 2]) -> f64 {
        self.k[0] as f64 * i[0] + self.k[1] as f64 * i[1] + self.a
    }

    /// True when the resonance line is `{I2 = 0}`.
    pub fn is_reduced(&self) -> bool {
        self.k[0] == 0 && self.k[1].abs() == 1 && self.a == 0.0
    }

    /// `S1` as an ordered `I1` interval (meaningful in reduced coordinates).
    pub fn channel_interval(&self) -> [f64; 2] {
        ordered(self.segment[0][0], self.segment[1][0])
    }

    /// `S1*` as an ordered `I1` interval.
    pub fn core_interval(&self) -> [f64; 2] {
        ordered(self.core[0][0], self.core[1][0])
    }

    pub fn with_delta_star(mut self, d: f64) -> Self {
        self.delta_star = Some(d);
        self
    }
}

fn ordered(a: f64, b: f64) -> [f64; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Integrable part `h` with exact frequency map and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrableSystem {
    h: PolyField,
    grad: [PolyField; 2],
    radius: f64,
    pub resonance: ResonanceData,
}

impl IntegrableSystem {
    pub fn new(h: PolyField, radius: f64, resonance: ResonanceData) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("R", format!("must be positive, got {radius}")));
        }
        for p in resonance.segment {
            if p[0].abs() > radius * (1.0 + 1e-12) || p[1].abs() > radius * (1.0 + 1e-12) {
                return Err(Error::DomainViolation { i1: p[0], i2: p[1], radius });
            }
        }
        let grad = [h.partial(1, 0), h.partial(0, 1)];
        Ok(Self { h, grad, radius, resonance })
    }

    pub fn h(&self) -> &PolyField {
        &self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn energy(&self, i: [f64; 2]) -> f64 {
        self.h.eval(i)
    }

    pub fn omega(&self, i: [f64; 2]) -> [f64; 2] {
        [self.grad[0].eval(i), self.grad[1].eval(i)]
    }

    /// Gradient polynomials `(∂h/∂I1, ∂h/∂I2)`.
    pub fn omega_fields(&self) -> &[PolyField; 2] {
        &self.grad
    }

    pub fn hessian(&self, i: [f64; 2]) -> [[f64; 2]; 2] {
        self.h.hessian(i)
    }

    /// Largest relative discrepancy between the exact `ω`, `∇²h` and central
    /// differences of `h` (resp. `ω`) over an `n × n` grid of `B_R`.
    pub fn finite_difference_defect(&self, n: usize) -> f64 {
        let step = 1e-5 * self.radius.max(1.0);
        let pts = linspace([-self.radius, self.radius], n.max(2));
        let mut worst: f64 = 0.0;
        for &x in &pts {
            for &y in &pts {
                let w = self.omega([x, y]);
                let fd = [
                    (self.energy([x + step, y]) - self.energy([x - step, y])) / (2.0 * step),
                    (self.energy([x, y + step]) - self.energy([x, y - step])) / (2.0 * step),
                ];
                let hs = self.hessian([x, y]);
                let wx = [self.omega([x + step, y]), self.omega([x - step, y])];
                let wy = [self.omega([x, y + step]), self.omega([x, y - step])];
                for c in 0..2 {
                    worst = worst.max((w[c] - fd[c]).abs() / w[c].abs().max(1.0));
                    let fdh = [(wx[0][c] - wx[1][c]) / (2.0 * step), (wy[0][c] - wy[1][c]) / (2.0 * step)];
                    worst = worst.max((hs[0][c] - fdh[0]).abs() / hs[0][c].abs().max(1.0));
                    worst = worst.max((hs[1][c] - fdh[1]).abs() / hs[1][c].abs().max(1.0));
                }
            }
        }
        worst
    }
}

/// `H = h + ε f` together with its domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBundle {
    pub integrable: IntegrableSystem,
    pub perturbation: FourierPerturbation,
    epsilon: f64,
}

impl SystemBundle {
    /// `ε = 0` is accepted so the integrable flow can be run through the same
    /// machinery.
    pub fn new(integrable: IntegrableSystem, perturbation: FourierPerturbation, epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(invalid("epsilon", format!("must lie in [0, 1), got {epsilon}")));
        }
        Ok(Self { integrable, perturbation, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.integrable.clone(), self.perturbation.clone(), epsilon)
    }

    pub fn radius(&self) -> f64 {
        self.integrable.radius()
    }

    /// `H` on a lifted state `[θ1, θ2, I1, I2]`, without domain checks.
    pub fn energy_lift(&self, y: &[f64; 4]) -> f64 {
        let i = [y[2], y[3]];
        let mut e = self.integrable.energy(i);
        if self.epsilon != 0.0 {
            e += self.epsilon * self.perturbation.eval([y[0], y[1]], i);
        }
        e
    }

    /// Hamilton's equations on a lifted state, without domain checks.
    pub fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let i = [y[2], y[3]];
        let w = self.integrable.omega(i);
        if self.epsilon == 0.0 {
            return [w[0], w[1], 0.0, 0.0];
        }
        let (_, dt, di) = self.perturbation.eval_with_gradient([y[0], y[1]], i);
        let e = self.epsilon;
        [w[0] + e * di[0], w[1] + e * di[1], -e * dt[0], -e * dt[1]]
    }
}

/// `H(θ, I) = h(I) + ε f(θ, I)`.
pub fn evaluate_hamiltonian(bundle: &SystemBundle, z: &PhaseState) -> Result<f64> {
    check_domain(z.action(), bundle.radius())?;
    Ok(bundle.energy_lift(&z.to_lift()))
}

/// `(dθ/dt, dI/dt) = (∂H/∂I, −∂H/∂θ)`.
pub fn hamiltonian_vector_field(bundle: &SystemBundle, z: &PhaseState) -> Result<([f64; 2], [f64; 2])> {
    check_domain(z.action(), bundle.radius())?;
    let v = bundle.rhs(&z.to_lift());
    Ok(([v[0], v[1]], [v[2], v[3]]))
}

/// Outcome of the reduced channel checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub samples: usize,
    /// `max |ω1(I1, 0)|` over `S1`.
    pub max_abs_omega1: f64,
    /// `min ω2(I1, 0)` over `S1*`.
    pub min_omega2: f64,
    pub varpi: f64,
    pub line_is_reduced: bool,
    pub resonance_holds: bool,
    pub frequency_bound_holds: bool,
}

impl ChannelReport {
    pub fn passed(&self) -> bool {
        self.line_is_reduced && self.resonance_holds && self.frequency_bound_holds
    }
}

/// Samples `ω` along the reduced channel `{I2 = 0}`.
pub fn verify_channel_assumptions(system: &IntegrableSystem, samples: usize) -> ChannelReport {
    let n = samples.max(2);
    let res = &system.resonance;
    let max_abs_omega1 = linspace(res.channel_interval(), n)
        .into_iter()
        .map(|x| system.omega([x, 0.0])[0].abs())
        .fold(0.0, f64::max);
    let min_omega2 = linspace(res.core_interval(), n)
        .into_iter()
        .map(|x| system.omega([x, 0.0])[1])
        .fold(f64::INFINITY, f64::min);
    ChannelReport {
        samples: n,
        max_abs_omega1,
        min_omega2,
        varpi: res.varpi,
        line_is_reduced: res.is_reduced(),
        resonance_holds: max_abs_omega1 <= 1e-10,
        frequency_bound_holds: min_omega2 >= res.varpi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    fn moser() -> SystemBundle {
        let h = PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)]);
        let res = ResonanceData::new(
            [1, 1],
            0.0,
            [[0.25, -0.25], [1.75, -1.75]],
            [[0.5, -0.5], [1.5, -1.5]],
            0.5,
        )
        .unwrap();
        let sys = IntegrableSystem::new(h, 4.0, res).unwrap();
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]);
        SystemBundle::new(sys, f, 1e-3).unwrap()
    }

    fn reduced(h: PolyField, s: [f64; 2], core: [f64; 2], varpi: f64) -> IntegrableSystem {
        let res = ResonanceData::new([0, 1], 0.0, [[s[0], 0.0], [s[1], 0.0]], [[core[0], 0.0], [core[1], 0.0]], varpi)
            .unwrap();
        IntegrableSystem::new(h, 3.0, res).unwrap()
    }

    #[test]
    fn hamiltonian_at_origin_and_quarter_turn() {
        let b = moser();
        assert_eq!(evaluate_hamiltonian(&b, &PhaseState::new([0.0, 0.0], [0.0, 0.0])).unwrap(), 0.0);
        let v = evaluate_hamiltonian(&b, &PhaseState::new([0.25, 0.0], [1.0, 0.0])).unwrap();
        let direct = 0.5 * 1.0f64.powi(2) + 1e-3 * (2.0 * PI * 0.25).sin() / (2.0 * PI);
        assert!((v - direct).abs() < 1e-15);
        assert!((v - (0.5 + 1e-3 / TAU)).abs() < 1e-15);
    }

    #[test]
    fn unperturbed_energy_is_h() {
        let b = moser().with_epsilon(0.0).unwrap();
        let z = PhaseState::new([0.3, 0.9], [1.25, -0.5]);
        assert_eq!(evaluate_hamiltonian(&b, &z).unwrap(), 0.5 * (1.25f64 * 1.25 - 0.25));
    }

    #[test]
    fn moser_vector_field_at_origin() {
        let b = moser();
        let (dt, di) = hamiltonian_vector_field(&b, &PhaseState::new([0.0, 0.0], [0.0, 0.0])).unwrap();
        assert_eq!(dt, [0.0, 0.0]);
        assert!((di[0] + 1e-3).abs() < 1e-18 && (di[1] - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn integrable_flow_is_frequency_map() {
        let b = moser().with_epsilon(0.0).unwrap();
        let (dt, di) = hamiltonian_vector_field(&b, &PhaseState::new([0.1, 0.2], [2.0, 1.0])).unwrap();
        assert_eq!(dt, [2.0, -1.0]);
        assert_eq!(di, [0.0, 0.0]);
    }

    #[test]
    fn cosine_perturbation_vector_field_against_differences() {
        let mut b = moser();
        b.perturbation = FourierPerturbation::trig(&[([0, 1], 1.0, 0.0)]);
        let eps = b.epsilon();
        for &t2 in &[0.0, 0.1, 0.37, 0.8] {
            let z = PhaseState::new([0.4, t2], [0.5, 0.5]);
            let (_, di) = hamiltonian_vector_field(&b, &z).unwrap();
            assert!(di[0].abs() < 1e-18);
            assert!((di[1] - TAU * eps * (TAU * t2).sin()).abs() < 1e-14);
            let h = 1e-6;
            let up = evaluate_hamiltonian(&b, &PhaseState::new([0.4, t2 + h], [0.5, 0.5])).unwrap();
            let dn = evaluate_hamiltonian(&b, &PhaseState::new([0.4, t2 - h], [0.5, 0.5])).unwrap();
            assert!((di[1] + (up - dn) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn domain_violation_is_reported() {
        let b = moser();
        let z = PhaseState::new([0.0, 0.0], [4.5, 0.0]);
        assert!(matches!(evaluate_hamiltonian(&b, &z), Err(Error::DomainViolation { .. })));
        assert!(hamiltonian_vector_field(&b, &z).is_err());
    }

    #[test]
    fn frequency_map_agrees_with_differences() {
        assert!(moser().integrable.finite_difference_defect(9) < 1e-6);
    }

    #[test]
    fn reduced_moser_channel() {
        let h = PolyField::from_terms([(2, 0, 0.5)]);
        let shifted = PolyField::from_terms([(0, 1, 1.0), (1, 0, -1.0)]).powu(2).scale(-0.5);
        let sys = reduced(&h + &shifted, [0.5, 1.5], [0.5, 1.5], 0.5);
        let r = verify_channel_assumptions(&sys, 101);
        assert_eq!(r.max_abs_omega1, 0.0);
        assert!((r.min_omega2 - 0.5).abs() < 1e-15);
        assert!(r.passed());
    }

    #[test]
    fn product_channel() {
        let sys = reduced(PolyField::from_terms([(1, 1, 1.0)]), [1.0, 2.0], [1.0, 2.0], 1.0);
        let r = verify_channel_assumptions(&sys, 11);
        assert_eq!(r.max_abs_omega1, 0.0);
        assert_eq!(r.min_omega2, 1.0);
        assert!(r.passed());
    }

    #[test]
    fn convex_channel_fails() {
        let sys = reduced(PolyField::from_terms([(2, 0, 0.5), (0, 2, 0.5)]), [1.0, 2.0], [1.0, 2.0], 0.5);
        let r = verify_channel_assumptions(&sys, 11);
        assert!(!r.resonance_holds);
        assert!(!r.passed());
    }

    #[test]
    fn resonance_validation() {
        assert_eq!(ResonanceData::new([0, 0], 0.0, [[0.0; 2]; 2], [[0.0; 2]; 2], 1.0), Err(Error::ZeroVector));
        assert!(ResonanceData::new([0, 1], 0.0, [[0.0, 0.0], [1.0, 0.0]], [[0.5, 0.0], [0.6, 0.0]], 0.0).is_err());
        assert!(ResonanceData::new([0, 1], 0.0, [[0.0, 0.0], [1.0, 0.0]], [[0.5, 0.0], [1.6, 0.0]], 1.0).is_err());
        assert!(ResonanceData::new([0, 1], 0.0, [[0.0, 0.1], [1.0, 0.0]], [[0.5, 0.0], [0.6, 0.0]], 1.0).is_err());
    }
}
