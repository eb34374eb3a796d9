//! Resonant averaging, genericity analysis, the homological equation and the
//! one- and two-step resonant normal forms.

pub mod chebyshev;
mod homological;
mod normal_form;

pub use chebyshev::{lobatto_nodes, ChebFit};
pub use homological::{solve_homological, solve_homological_series, GeneratorChi, CHECK_ANGLES, CHECK_GRID};
pub use normal_form::{
    c1_sup, one_step_normal_form, two_step_normal_form, NormalFormConfig, NormalFormResult, SecondStep, FIT_LIMIT,
    MODE_FLOOR,
};

use crate::phase::{linspace, wave_norm, FourierPerturbation, IntegrableSystem, PolyField};
use std::f64::consts::TAU;

/// Action-dependent coefficient of a Fourier mode. `Ctx` carries work shared
/// by all coefficients evaluated at the same action.
pub trait Coefficient: Clone + Send + Sync {
    type Ctx;
    fn context<'a>(coefficients: impl Iterator<Item = &'a Self>, i: [f64; 2]) -> Self::Ctx
    where
        Self: 'a;
    fn value_grad(&self, ctx: &Self::Ctx) -> (f64, [f64; 2]);
    fn is_zero(&self) -> bool;
}

impl Coefficient for PolyField {
    type Ctx = [f64; 2];

    fn context<'a>(_: impl Iterator<Item = &'a Self>, i: [f64; 2]) -> [f64; 2] {
        i
    }

    fn value_grad(&self, i: &[f64; 2]) -> (f64, [f64; 2]) {
        (self.eval(*i), self.gradient(*i))
    }

    fn is_zero(&self) -> bool {
        PolyField::is_zero(self)
    }
}

/// `cos · cos(2π k·θ) + sin · sin(2π k·θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMode<C> {
    pub k: [i64; 2],
    pub cos: C,
    pub sin: C,
}

/// Finite real Fourier series with arbitrary coefficient type.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefSeries<C> {
    pub modes: Vec<SeriesMode<C>>,
}

impl<C: Coefficient> CoefSeries<C> {
    pub fn empty() -> Self {
        Self { modes: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    fn ctx(&self, i: [f64; 2]) -> C::Ctx {
        C::context(self.modes.iter().flat_map(|m| [&m.cos, &m.sin]), i)
    }

    pub fn eval(&self, theta: [f64; 2], action: [f64; 2]) -> f64 {
        self.eval_with_gradient(theta, action).0
    }

    /// Value, angle gradient and action gradient.
    pub fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        let ctx = self.ctx(action);
        let mut v = 0.0;
        let mut dt = [0.0; 2];
        let mut di = [0.0; 2];
        for m in &self.modes {
            let (s, c) = (TAU * (m.k[0] as f64 * theta[0] + m.k[1] as f64 * theta[1])).sin_cos();
            let (a, ga) = m.cos.value_grad(&ctx);
            let (b, gb) = m.sin.value_grad(&ctx);
            v += a * c + b * s;
            let dphase = TAU * (b * c - a * s);
            dt[0] += m.k[0] as f64 * dphase;
            dt[1] += m.k[1] as f64 * dphase;
            di[0] += ga[0] * c + gb[0] * s;
            di[1] += ga[1] * c + gb[1] * s;
        }
        (v, dt, di)
    }
}

impl From<&FourierPerturbation> for CoefSeries<PolyField> {
    fn from(f: &FourierPerturbation) -> Self {
        Self {
            modes: f
                .modes()
                .iter()
                .map(|m| SeriesMode { k: m.k, cos: m.cos.clone(), sin: m.sin.clone() })
                .collect(),
        }
    }
}

impl<C: Coefficient> crate::flow::Generator for CoefSeries<C> {
    fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        CoefSeries::eval_with_gradient(self, theta, action)
    }
}

/// `f̄(θ1, I) = ∫ f(θ1, θ2, I) dθ2`: the modes with `k2 = 0`.
pub fn average_over_theta2(f: &FourierPerturbation) -> FourierPerturbation {
    f.filter_modes(|k| k[1] == 0)
}

/// `∫₀¹ f(θ + t k, I*) dt`: the modes orthogonal to `k`, frozen at `I*`.
pub fn resonant_average_along_k(f: &FourierPerturbation, k: [i64; 2], i_star: [f64; 2]) -> FourierPerturbation {
    f.filter_modes(|m| m[0] * k[0] + m[1] * k[1] == 0).freeze_actions(i_star)
}

/// Cutoff `K = max(⌈ϖ / (2κε)⌉, max |k| of f)`.
pub fn choose_cutoff(epsilon: f64, kappa: f64, varpi: f64, max_mode: i64) -> i64 {
    let raw = varpi / (2.0 * kappa * epsilon);
    // shave round-off so exact quotients are not bumped to the next integer
    let k = (raw * (1.0 - 1e-12)).ceil();
    let k = if k.is_finite() { k.min(i64::MAX as f64 / 2.0) as i64 } else { i64::MAX / 2 };
    k.max(max_mode)
}

/// Marked action, maximizing angle and the resulting lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericityReport {
    pub i_star: [f64; 2],
    pub theta_star: f64,
    /// `max |∂θ1 f̄|` on the grid.
    pub max_derivative: f64,
    /// `0.9 · max_derivative`, or `0` when the check fails.
    pub lambda: f64,
    pub delta_star: f64,
    pub pass: bool,
}

/// Grid sizes for [`genericity_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenericityGrid {
    pub n_theta: usize,
    pub n_actions: usize,
}

impl Default for GenericityGrid {
    fn default() -> Self {
        Self { n_theta: 1024, n_actions: 33 }
    }
}

pub const LAMBDA_SAFETY: f64 = 0.9;
pub const GENERICITY_FLOOR: f64 = 1e-12;

/// Scans `I*` over the interior of `S1*` (a single midpoint when `f` does not
/// depend on the actions) and `θ1` over a uniform grid for the largest
/// `|∂θ1 f̄(θ1, I*)|`. Ties go to the larger `δ*`.
pub fn genericity_check(f: &FourierPerturbation, system: &IntegrableSystem, grid: GenericityGrid) -> GenericityReport {
    let fbar = average_over_theta2(f);
    let core = system.resonance.core_interval();
    let candidates: Vec<f64> = if f.is_action_independent() {
        vec![0.5 * (core[0] + core[1])]
    } else {
        let n = grid.n_actions.max(1);
        let pts = linspace(core, n + 2);
        pts[1..=n].to_vec()
    };
    let dfbar = fbar.partial([1, 0], [0, 0]);
    let mut best = GenericityReport {
        i_star: [candidates[0], 0.0],
        theta_star: 0.0,
        max_derivative: 0.0,
        lambda: 0.0,
        delta_star: (candidates[0] - core[0]).min(core[1] - candidates[0]),
        pass: false,
    };
    for &x in &candidates {
        let delta = (x - core[0]).min(core[1] - x);
        for j in 0..grid.n_theta {
            let th = j as f64 / grid.n_theta as f64;
            let v = dfbar.eval([th, 0.0], [x, 0.0]).abs();
            if v > best.max_derivative || (v == best.max_derivative && delta > best.delta_star) {
                best.i_star = [x, 0.0];
                best.theta_star = th;
                best.max_derivative = v;
                best.delta_star = delta;
            }
        }
    }
    best.pass = best.max_derivative >= GENERICITY_FLOOR;
    best.lambda = if best.pass { LAMBDA_SAFETY * best.max_derivative } else { 0.0 };
    best
}

/// `0.9 · max_s |d/ds g(s d)|` for a resonant average `g` and a direction
/// `d ∈ ℤ²` along which `g` is not constant (the `λ` of an unreduced system).
pub fn directional_lambda(g: &FourierPerturbation, d: [i64; 2], n_theta: usize) -> f64 {
    let dir = [d[0] as f64, d[1] as f64];
    let mut best: f64 = 0.0;
    for j in 0..n_theta {
        let s = j as f64 / n_theta as f64;
        let (_, dt, _) = g.eval_with_gradient([s * dir[0], s * dir[1]], [0.0, 0.0]);
        best = best.max((dt[0] * dir[0] + dt[1] * dir[1]).abs());
    }
    LAMBDA_SAFETY * best
}

/// Largest `|k|` among stored modes.
pub fn max_mode(f: &FourierPerturbation) -> i64 {
    f.modes().iter().map(|m| wave_norm(m.k)).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::reduce_system;
    use crate::phase::{FourierMode, ResonanceData};
    use proptest::prelude::*;

    fn reduced_moser() -> IntegrableSystem {
        let h = PolyField::from_terms([(1, 1, 1.0), (0, 2, -0.5)]);
        let res = ResonanceData::new([0, 1], 0.0, [[0.25, 0.0], [1.75, 0.0]], [[0.5, 0.0], [1.5, 0.0]], 0.5).unwrap();
        IntegrableSystem::new(h, 2.0, res).unwrap()
    }

    fn generic3() -> FourierPerturbation {
        FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU), ([0, 1], 0.2, 0.0), ([1, 1], 0.3, 0.0)])
    }

    #[test]
    fn theta2_average_filters_modes() {
        assert!(average_over_theta2(&FourierPerturbation::trig(&[([0, 1], 1.0, 0.0)])).is_zero());
        assert_eq!(average_over_theta2(&generic3()), FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU)]));
        let f = FourierPerturbation::from_modes([FourierMode {
            k: [1, 0],
            cos: PolyField::coordinate(0),
            sin: PolyField::zero(),
        }]);
        assert_eq!(average_over_theta2(&f), f);
    }

    #[test]
    fn resonant_average_examples() {
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]);
        assert_eq!(resonant_average_along_k(&f, [1, 1], [0.0, 0.0]), f);
        assert!(resonant_average_along_k(&f, [1, -1], [0.0, 0.0]).is_zero());
        let g = FourierPerturbation::trig(&[([1, 0], 1.0, 0.0), ([0, 1], 1.0, 0.0)]);
        assert!(resonant_average_along_k(&g, [1, 1], [0.0, 0.0]).is_zero());
        // the direct time average along k agrees
        let th = [0.137, 0.71];
        let n = 4096;
        let quad: f64 = (0..n)
            .map(|j| {
                let t = j as f64 / n as f64;
                f.eval([th[0] + t, th[1] + t], [0.0, 0.0])
            })
            .sum::<f64>()
            / n as f64;
        assert!((quad - f.eval(th, [0.0, 0.0])).abs() < 1e-12);
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(choose_cutoff(1e-3, 2.0, 0.5, 3), 125);
        assert_eq!(choose_cutoff(0.1, 2.0, 0.5, 3), 3);
        let k1 = choose_cutoff(1e-3, 1.3, 0.75, 2) as f64;
        let k2 = choose_cutoff(1e-4, 1.3, 0.75, 2) as f64;
        assert!((k2 / k1 - 10.0).abs() < 0.05);
    }

    #[test]
    fn genericity_examples() {
        let sys = reduced_moser();
        let moser = FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU)]);
        let r = genericity_check(&moser, &sys, GenericityGrid::default());
        assert!(r.pass);
        assert!(((TAU * r.theta_star).cos().abs() - 1.0).abs() < 1e-15);
        assert!((r.lambda - 0.9).abs() < 1e-15);
        assert_eq!(r.i_star, [1.0, 0.0]);
        assert_eq!(r.delta_star, 0.5);
        let r3 = genericity_check(&generic3(), &sys, GenericityGrid::default());
        assert_eq!(r3, r);
        let fail = genericity_check(&FourierPerturbation::trig(&[([0, 1], 1.0, 0.0)]), &sys, GenericityGrid::default());
        assert!(!fail.pass);
        assert_eq!(fail.lambda, 0.0);
    }

    #[test]
    fn action_dependent_scan_prefers_interior() {
        let sys = reduced_moser();
        // ∂θ1 f̄ = I1 cos(2πθ1): largest at the right end of the scan
        let f = FourierPerturbation::from_modes([FourierMode {
            k: [1, 0],
            cos: PolyField::zero(),
            sin: PolyField::coordinate(0).scale(1.0 / TAU),
        }]);
        let r = genericity_check(&f, &sys, GenericityGrid { n_theta: 64, n_actions: 9 });
        assert!(r.i_star[0] < 1.5 && r.i_star[0] > 1.3);
        assert!((r.max_derivative - r.i_star[0]).abs() < 1e-12);
    }

    #[test]
    fn lambda_is_invariant_under_reduction() {
        let h = PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)]);
        let res =
            ResonanceData::new([1, 1], 0.0, [[0.25, -0.25], [1.75, -1.75]], [[0.5, -0.5], [1.5, -1.5]], 0.5).unwrap();
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU), ([1, 0], 0.2, 0.0), ([2, -2], 0.05, 0.03)]);
        let red = reduce_system(&h, &f, &res, 4.0).unwrap();
        let after = genericity_check(&red.perturbation, &red.system, GenericityGrid::default()).lambda;
        let i_star = red.forward_action([1.0, 0.0]);
        let g = resonant_average_along_k(&f, [1, 1], i_star);
        let before = directional_lambda(&g, [red.map.m[0][0], red.map.m[1][0]], 1024);
        assert!((before - after).abs() <= 1e-6, "{before} vs {after}");
    }

    proptest! {
        #[test]
        fn theta2_average_is_idempotent(modes in prop::collection::vec(((-3i64..=3, -3i64..=3), -1.0f64..1.0, -1.0f64..1.0), 0..6)) {
            let f = FourierPerturbation::trig(&modes.iter().map(|&((a, b), c, s)| ([a, b], c, s)).collect::<Vec<_>>());
            let once = average_over_theta2(&f);
            prop_assert_eq!(average_over_theta2(&once), once.clone());
            prop_assert!(once.modes().iter().all(|m| m.k[1] == 0));
        }
    }
}
