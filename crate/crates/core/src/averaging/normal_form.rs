use super::chebyshev::{lobatto_nodes, ChebFit};
use super::homological::{solve_homological, solve_homological_series, GeneratorChi};
use super::{average_over_theta2, choose_cutoff, max_mode, CoefSeries, SeriesMode};
use crate::error::{invalid, Error, Result};
use crate::flow::{propagate, Generator, IntegratorConfig, State};
use crate::phase::{linspace, ActionBox, FourierPerturbation, PhaseState, PolyField, SystemBundle};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Sampling and fitting parameters of the normal-form construction.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormConfig {
    /// Fixed `κ`; when unset `κ = 2γ` is found by fixed-point iteration.
    pub kappa: Option<f64>,
    /// Generator flows. Tolerances apply to the displacement `Φ − Id`.
    pub integrator: IntegratorConfig,
    /// `(n_θ, n_I1, n_I2)` of the grid on which remainder sups are taken.
    pub sup_grid: (usize, usize, usize),
    /// `(n_θ, n_I1, n_I2)` of the grid on which `|χ|_{C¹}` is measured.
    pub gamma_grid: (usize, usize, usize),
    pub displacement_samples: usize,
    pub seed: u64,
    /// Angle grid per axis for the discrete transform of `f′` (power of two).
    pub analysis_theta: usize,
    /// Lobatto nodes in `(I1, I2)` for the coefficient fits.
    pub analysis_actions: (usize, usize),
    /// Largest Chebyshev degrees in `(I1, I2)`.
    pub fit_degrees: (usize, usize),
    /// Largest second-step cutoff.
    pub max_cutoff2: i64,
}

impl Default for NormalFormConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            integrator: IntegratorConfig::lie(),
            sup_grid: (32, 9, 3),
            gamma_grid: (128, 5, 3),
            displacement_samples: 200,
            seed: 0x5eed,
            analysis_theta: 128,
            analysis_actions: (17, 9),
            fit_degrees: (12, 4),
            max_cutoff2: 64,
        }
    }
}

/// Relative fit tolerance of the second-step coefficients, against `sup|f′|`.
pub const FIT_LIMIT: f64 = 1e-6;
/// Modes of `f′` below this fraction of `sup|f′|` are discarded.
pub const MODE_FLOOR: f64 = 1e-10;
const KAPPA_ITERATIONS: usize = 25;

/// Data of the second averaging step.
#[derive(Debug, Clone)]
pub struct SecondStep {
    pub cutoff: i64,
    /// `f̄′`: the analysed `k2 = 0` part of `f′`.
    pub fbar: CoefSeries<ChebFit>,
    pub chi: GeneratorChi<ChebFit>,
    /// Largest nodal residual of the coefficient fits.
    pub fit_residual: f64,
    /// `sup|f′|` over the analysis grid.
    pub sup_f1_analysis: f64,
    pub retained_modes: usize,
}

#[derive(Debug, Clone)]
pub struct NormalFormResult {
    pub steps: u8,
    pub epsilon: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub cutoff: i64,
    pub fbar: FourierPerturbation,
    pub chi: GeneratorChi<PolyField>,
    pub second: Option<SecondStep>,
    pub sup_f1: f64,
    pub sup_f2: Option<f64>,
    /// Largest `|Φ − Id|` (sup norm, lifted) over the sampled points.
    pub phi_displacement: f64,
    pub residual_homological: f64,
    core: [f64; 2],
    f: FourierPerturbation,
    /// `(∂^{a,b} h / a! b!)` for `1 ≤ a + b ≤ deg h`.
    taylor: Vec<(u32, u32, PolyField)>,
    integrator: IntegratorConfig,
}

fn add(a: &State, b: &State) -> State {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]
}

fn sup_norm(d: &State) -> f64 {
    d.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Displacement of the time-one map of `scale · χ` started at `base + d0`,
/// accumulated on top of `d0`. Working with displacements keeps the `O(ε)`
/// motion free of the rounding of `O(1)` coordinates.
fn lie_displacement<G: Generator + ?Sized>(
    chi: &G,
    scale: f64,
    base: &State,
    d0: State,
    cfg: &IntegratorConfig,
    window: &ActionBox,
) -> Result<State> {
    if scale == 0.0 {
        return Ok(d0);
    }
    let rhs = |d: &State| {
        let y = add(base, d);
        let (_, dt, di) = chi.eval_with_gradient([y[0], y[1]], [y[2], y[3]]);
        [scale * di[0], scale * di[1], -scale * dt[0], -scale * dt[1]]
    };
    let shifted = ActionBox::new(
        [window.i1[0] - base[2], window.i1[1] - base[2]],
        [window.i2[0] - base[3], window.i2[1] - base[3]],
    );
    let cfg = IntegratorConfig { atol: cfg.atol * scale, ..*cfg };
    propagate(&rhs, d0, 1.0, &cfg, Some(&shifted)).map_err(|e| match e {
        Error::FlowEscape { t, i1, i2 } => Error::FlowEscape { t, i1: i1 + base[2], i2: i2 + base[3] },
        other => other,
    })
}

/// `max(|χ|, |∂θ1χ|, |∂θ2χ|, |∂I1χ|, |∂I2χ|)` over an angle grid times an
/// action grid of `window`, with each maximiser polished by nested local
/// grids.
pub fn c1_sup<G: Generator + ?Sized>(chi: &G, window: ActionBox, n_theta: usize, n_i1: usize, n_i2: usize) -> f64 {
    let comps = |th: [f64; 2], i: [f64; 2]| {
        let (v, dt, di) = chi.eval_with_gradient(th, i);
        [v.abs(), dt[0].abs(), dt[1].abs(), di[0].abs(), di[1].abs()]
    };
    let mut best = [(0.0f64, [0.0; 2], [0.0; 2]); 5];
    let xs = linspace(window.i1, n_i1);
    let ys = linspace(window.i2, n_i2);
    for &x in &xs {
        for &y in &ys {
            for a in 0..n_theta {
                for b in 0..n_theta {
                    let th = [a as f64 / n_theta as f64, b as f64 / n_theta as f64];
                    let c = comps(th, [x, y]);
                    for j in 0..5 {
                        if c[j] > best[j].0 {
                            best[j] = (c[j], th, [x, y]);
                        }
                    }
                }
            }
        }
    }
    let clamp = |v: f64, r: [f64; 2]| v.clamp(r[0], r[1]);
    let mut out: f64 = 0.0;
    for (j, b) in best.iter_mut().enumerate() {
        let mut ht = 0.5 / n_theta as f64;
        let mut hi = [
            (window.i1[1] - window.i1[0]) / (2 * n_i1.max(1)) as f64,
            (window.i2[1] - window.i2[0]) / (2 * n_i2.max(1)) as f64,
        ];
        for _ in 0..6 {
            let (_, th0, i0) = *b;
            for p in -2i32..=2 {
                for q in -2i32..=2 {
                    for r in -1i32..=1 {
                        for s in -1i32..=1 {
                            let th = [th0[0] + p as f64 * ht / 2.0, th0[1] + q as f64 * ht / 2.0];
                            let i = [clamp(i0[0] + r as f64 * hi[0], window.i1), clamp(i0[1] + s as f64 * hi[1], window.i2)];
                            let v = comps(th, i)[j];
                            if v > b.0 {
                                *b = (v, th, i);
                            }
                        }
                    }
                }
            }
            ht /= 4.0;
            hi = [hi[0] / 4.0, hi[1] / 4.0];
        }
        out = out.max(b.0);
    }
    out
}

impl NormalFormResult {
    /// `S*(w)`: the `w`-neighbourhood of the core segment.
    pub fn window(&self, width: f64) -> ActionBox {
        ActionBox::channel(self.core, width)
    }

    /// `Φ(z) − z` on a lifted state (`Φ = Φ1` or `Φ1 ∘ Φ2`).
    pub fn displacement(&self, y: &State) -> Result<State> {
        let ke = self.kappa * self.epsilon;
        let d2 = match &self.second {
            Some(s) => lie_displacement(&s.chi, self.epsilon * self.epsilon, y, [0.0; 4], &self.integrator, &self.window(0.5 * ke))?,
            None => [0.0; 4],
        };
        self.displacement1(y, d2)
    }

    fn displacement1(&self, y: &State, d0: State) -> Result<State> {
        let ke = self.kappa * self.epsilon;
        lie_displacement(&self.chi, self.epsilon, y, d0, &self.integrator, &self.window(ke))
    }

    pub fn phi_lift(&self, y: &State) -> Result<State> {
        Ok(add(y, &self.displacement(y)?))
    }

    pub fn phi(&self, z: &PhaseState) -> Result<PhaseState> {
        Ok(PhaseState::from_lift(&self.phi_lift(&z.to_lift())?))
    }

    /// `h(I + d) − h(I)` by the exact Taylor expansion of the polynomial.
    fn h_increment(&self, i: [f64; 2], d: [f64; 2]) -> f64 {
        self.taylor
            .iter()
            .map(|(a, b, p)| p.eval(i) * d[0].powi(*a as i32) * d[1].powi(*b as i32))
            .sum()
    }

    /// `ε(H∘Φ − h − εf̄)` pieces given the total displacement.
    fn first_order_excess(&self, theta: [f64; 2], i: [f64; 2], d: &State) -> f64 {
        let moved_t = [theta[0] + d[0], theta[1] + d[1]];
        let moved_i = [i[0] + d[2], i[1] + d[3]];
        self.h_increment(i, [d[2], d[3]])
            + self.epsilon * (self.f.eval(moved_t, moved_i) - self.fbar.eval(theta, i))
    }

    /// `f′ = ε⁻²(H∘Φ1 − h − εf̄)`, meaningful on `𝒟*(κε/2)`.
    pub fn f1(&self, theta: [f64; 2], i: [f64; 2]) -> Result<f64> {
        let y = [theta[0], theta[1], i[0], i[1]];
        let d = self.displacement1(&y, [0.0; 4])?;
        Ok(self.first_order_excess(theta, i, &d) / (self.epsilon * self.epsilon))
    }

    /// `f̄′(θ1, I)`, present after two steps.
    pub fn fbar2(&self, theta1: f64, i: [f64; 2]) -> Option<f64> {
        self.second.as_ref().map(|s| s.fbar.eval([theta1, 0.0], i))
    }

    /// `f″ = ε⁻³(H∘Φ1∘Φ2 − h − εf̄ − ε²f̄′)`, meaningful on `𝒟*(κε/4)`.
    pub fn f2(&self, theta: [f64; 2], i: [f64; 2]) -> Result<f64> {
        let s = self.second.as_ref().ok_or_else(|| invalid("steps", "second remainder needs the two-step form"))?;
        let y = [theta[0], theta[1], i[0], i[1]];
        let d = self.displacement(&y)?;
        let e = self.epsilon;
        Ok((self.first_order_excess(theta, i, &d) - e * e * s.fbar.eval(theta, i)) / (e * e * e))
    }

    /// Remainder values on a `n_θ² × n1 × n2` grid of `𝒟*(width)`, as
    /// `(θ, I, value)`.
    pub fn remainder_samples(&self, second: bool, width: f64, grid: (usize, usize, usize)) -> Result<Vec<([f64; 2], [f64; 2], f64)>> {
        let w = self.window(width);
        let mut out = Vec::with_capacity(grid.0 * grid.0 * grid.1 * grid.2);
        for x in linspace(w.i1, grid.1) {
            for y in linspace(w.i2, grid.2) {
                for a in 0..grid.0 {
                    for b in 0..grid.0 {
                        let th = [a as f64 / grid.0 as f64, b as f64 / grid.0 as f64];
                        let v = if second { self.f2(th, [x, y])? } else { self.f1(th, [x, y])? };
                        out.push((th, [x, y], v));
                    }
                }
            }
        }
        Ok(out)
    }

    fn sup_over(&self, second: bool, width: f64, grid: (usize, usize, usize)) -> Result<f64> {
        Ok(self.remainder_samples(second, width, grid)?.iter().fold(0.0f64, |m, s| m.max(s.2.abs())))
    }

    /// Largest `|Φ − Id|` over `n` random points of `𝒟*(width)`.
    pub fn measure_displacement(&self, width: f64, n: usize, seed: u64) -> Result<f64> {
        let w = self.window(width);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..n {
            let y = [
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(w.i1[0]..=w.i1[1]),
                rng.gen_range(w.i2[0]..=w.i2[1]),
            ];
            worst = worst.max(sup_norm(&self.displacement(&y)?));
        }
        Ok(worst)
    }
}

/// `h + εf ↦ h + εf̄ + ε²f′` through the time-one map of `εχ`.
pub fn one_step_normal_form(bundle: &SystemBundle, cfg: &NormalFormConfig) -> Result<NormalFormResult> {
    let eps = bundle.epsilon();
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "the normal form needs ε > 0"));
    }
    let sys = &bundle.integrable;
    if !sys.resonance.is_reduced() {
        return Err(Error::ChannelAssumption("normal forms are built in reduced coordinates".into()));
    }
    let f = &bundle.perturbation;
    let core = sys.resonance.core_interval();
    let varpi = sys.resonance.varpi;
    let kmax = max_mode(f);
    let (gn, g1, g2) = cfg.gamma_grid;

    let build = |kappa: f64| -> Result<(i64, ActionBox, GeneratorChi<PolyField>)> {
        let window = ActionBox::channel(core, kappa * eps);
        if !window.within_ball(sys.radius()) {
            return Err(invalid("epsilon", format!("S*(κε) with κε = {} leaves the domain", kappa * eps)));
        }
        let k = choose_cutoff(eps, kappa, varpi, kmax);
        Ok((k, window, solve_homological(sys, f, k, window)?))
    };

    let mut kappa = cfg.kappa.unwrap_or(1.0);
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(invalid("kappa", "must be positive"));
    }
    let (mut cutoff, mut window, mut chi) = build(kappa)?;
    let mut gamma = if chi.is_zero() { 0.0 } else { c1_sup(&chi, window, gn, g1, g2) };
    if cfg.kappa.is_none() && !chi.is_zero() {
        for _ in 0..KAPPA_ITERATIONS {
            let next = 2.0 * gamma;
            let done = (next - kappa).abs() <= 1e-12 * kappa;
            kappa = next;
            (cutoff, window, chi) = build(kappa)?;
            gamma = c1_sup(&chi, window, gn, g1, g2);
            if done {
                break;
            }
        }
        kappa = 2.0 * gamma;
    }
    let _ = window;

    let h = sys.h();
    let deg = h.degree();
    let mut taylor = Vec::new();
    for total in 1..=deg {
        for a in 0..=total {
            let b = total - a;
            let p = h.partial(a, b);
            if !p.is_zero() {
                taylor.push((a, b, p.scale(1.0 / (factorial(a) * factorial(b)))));
            }
        }
    }
    let mut nf = NormalFormResult {
        steps: 1,
        epsilon: eps,
        kappa,
        gamma,
        cutoff,
        fbar: average_over_theta2(f),
        residual_homological: chi.residual,
        chi,
        second: None,
        sup_f1: 0.0,
        sup_f2: None,
        phi_displacement: 0.0,
        core,
        f: f.clone(),
        taylor,
        integrator: cfg.integrator,
    };
    let half = 0.5 * kappa * eps;
    nf.sup_f1 = nf.sup_over(false, half, cfg.sup_grid)?;
    nf.phi_displacement = nf.measure_displacement(half, cfg.displacement_samples, cfg.seed)?;
    Ok(nf)
}

/// In-place 2D transform of an `n × n` row-major array.
fn fft2(data: &mut [Complex<f64>], n: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(n);
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// Continues the one-step form with a second averaging: `f′` is sampled on
/// `𝒟*(κε/2)`, transformed in the angles, fitted in the actions, and
/// averaged again by `Φ2`, the time-one map of `ε²χ2`.
pub fn two_step_normal_form(bundle: &SystemBundle, cfg: &NormalFormConfig) -> Result<NormalFormResult> {
    if !bundle.perturbation.is_action_independent() {
        return Err(Error::ActionDependent);
    }
    let mut nf = one_step_normal_form(bundle, cfg)?;
    nf.steps = 2;
    let sys = &bundle.integrable;
    let eps = nf.epsilon;
    let ke = nf.kappa * eps;
    let half = nf.window(0.5 * ke);
    let cutoff2 = choose_cutoff(eps, nf.kappa, sys.resonance.varpi, 0).min(cfg.max_cutoff2).max(1);

    let second = if nf.chi.is_zero() {
        let fits = CoefSeries::<ChebFit>::empty();
        SecondStep {
            cutoff: cutoff2,
            chi: solve_homological_series(sys, &fits, cutoff2, half)?,
            fbar: fits,
            fit_residual: 0.0,
            sup_f1_analysis: 0.0,
            retained_modes: 0,
        }
    } else {
        analyse_second_step(&nf, cfg, half, cutoff2, sys)?
    };
    nf.residual_homological = nf.residual_homological.max(second.chi.residual);
    nf.second = Some(second);
    let quarter = 0.25 * ke;
    nf.sup_f2 = Some(nf.sup_over(true, quarter, cfg.sup_grid)?);
    nf.phi_displacement = nf.measure_displacement(quarter, cfg.displacement_samples, cfg.seed)?;
    Ok(nf)
}

fn analyse_second_step(
    nf: &NormalFormResult,
    cfg: &NormalFormConfig,
    window: ActionBox,
    cutoff2: i64,
    sys: &crate::phase::IntegrableSystem,
) -> Result<SecondStep> {
    let n = cfg.analysis_theta;
    if n < 8 || !n.is_power_of_two() {
        return Err(invalid("analysis_theta", "must be a power of two ≥ 8"));
    }
    let (na, nb) = cfg.analysis_actions;
    let xs = lobatto_nodes(window.i1, na);
    let ys = lobatto_nodes(window.i2, nb);
    let mut planner = FftPlanner::new();
    let mut spectra = Vec::with_capacity(na * nb);
    let mut sup: f64 = 0.0;
    for &x in &xs {
        for &y in &ys {
            let mut data = Vec::with_capacity(n * n);
            for a in 0..n {
                for b in 0..n {
                    let v = nf.f1([a as f64 / n as f64, b as f64 / n as f64], [x, y])?;
                    sup = sup.max(v.abs());
                    data.push(Complex::new(v, 0.0));
                }
            }
            fft2(&mut data, n, &mut planner);
            spectra.push(data);
        }
    }
    let norm = 1.0 / (n * n) as f64;
    let half = (n / 2) as i64;
    let index = |k: i64| k.rem_euclid(n as i64) as usize;
    let limit = FIT_LIMIT * sup;
    let mut modes = Vec::new();
    let mut fit_residual: f64 = 0.0;
    for k1 in 0..half {
        for k2 in (1 - half)..half {
            if k1 == 0 && k2 < 0 {
                continue;
            }
            let at = index(k1) * n + index(k2);
            let coef = |s: &Vec<Complex<f64>>| {
                let z = s[at] * norm;
                if k1 == 0 && k2 == 0 {
                    (z.re, 0.0)
                } else {
                    (2.0 * z.re, -2.0 * z.im)
                }
            };
            let amp = spectra.iter().map(|s| {
                let (c, d) = coef(s);
                c.hypot(d)
            });
            if amp.fold(0.0f64, f64::max) <= MODE_FLOOR * sup {
                continue;
            }
            let cos = DMatrix::from_fn(na, nb, |a, b| coef(&spectra[a * nb + b]).0);
            let sin = DMatrix::from_fn(na, nb, |a, b| coef(&spectra[a * nb + b]).1);
            let mut fitted = [cos, sin].map(|m| ChebFit::fit_adaptive(window.i1, window.i2, &m, cfg.fit_degrees.0, cfg.fit_degrees.1, 0.1 * limit));
            for (_, r) in &fitted {
                fit_residual = fit_residual.max(*r);
                if *r > limit {
                    return Err(Error::FitResidual { residual: *r, limit });
                }
            }
            let sin_fit = std::mem::replace(&mut fitted[1].0, ChebFit::zero());
            let cos_fit = std::mem::replace(&mut fitted[0].0, ChebFit::zero());
            modes.push(SeriesMode { k: [k1, k2], cos: cos_fit, sin: sin_fit });
        }
    }
    let retained_modes = modes.len();
    let (resonant, rest): (Vec<_>, Vec<_>) = modes.into_iter().partition(|m| m.k[1] == 0);
    let chi = solve_homological_series(sys, &CoefSeries { modes: rest }, cutoff2, window)?;
    Ok(SecondStep {
        cutoff: cutoff2,
        fbar: CoefSeries { modes: resonant },
        chi,
        fit_residual,
        sup_f1_analysis: sup,
        retained_modes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::symplecticity_defect;
    use crate::phase::{IntegrableSystem, ResonanceData};
    use std::f64::consts::TAU;

    fn reduced_h() -> PolyField {
        PolyField::from_terms([(1, 1, 1.0), (0, 2, -0.5)])
    }

    fn reduced_moser(eps: f64) -> SystemBundle {
        let res = ResonanceData::new([0, 1], 0.0, [[0.25, 0.0], [1.75, 0.0]], [[0.5, 0.0], [1.5, 0.0]], 0.5).unwrap();
        let sys = IntegrableSystem::new(reduced_h(), 2.0, res).unwrap();
        SystemBundle::new(sys, FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU)]), eps).unwrap()
    }

    fn generic3(eps: f64) -> SystemBundle {
        let res = ResonanceData::new([0, 1], 0.0, [[0.5, 0.0], [1.5, 0.0]], [[0.75, 0.0], [1.25, 0.0]], 0.75).unwrap();
        let sys = IntegrableSystem::new(reduced_h(), 2.0, res).unwrap();
        let f = FourierPerturbation::trig(&[([1, 0], 0.0, 1.0 / TAU), ([0, 1], 0.2, 0.0), ([1, 1], 0.3, 0.0)]);
        SystemBundle::new(sys, f, eps).unwrap()
    }

    fn light() -> NormalFormConfig {
        NormalFormConfig { sup_grid: (16, 5, 3), displacement_samples: 50, ..Default::default() }
    }

    #[test]
    fn theta1_only_perturbation_is_already_normal() {
        let nf = one_step_normal_form(&reduced_moser(1e-3), &light()).unwrap();
        assert!(nf.chi.is_zero());
        assert_eq!(nf.kappa, 1.0);
        assert_eq!(nf.sup_f1, 0.0);
        assert_eq!(nf.phi_displacement, 0.0);
        let z = PhaseState::new([0.3, 0.4], [1.0, 0.0]);
        assert_eq!(nf.phi(&z).unwrap(), z);
        let nf2 = two_step_normal_form(&reduced_moser(1e-3), &light()).unwrap();
        let s = nf2.second.as_ref().unwrap();
        assert!(s.chi.is_zero() && s.fbar.is_empty());
        assert_eq!(nf2.sup_f2, Some(0.0));
    }

    #[test]
    fn kappa_is_twice_gamma_and_displacement_is_bounded() {
        let nf = one_step_normal_form(&generic3(1e-3), &light()).unwrap();
        assert!((nf.kappa - 2.0 * nf.gamma).abs() <= 1e-12 * nf.kappa);
        // χ = 0.2 sin(2πθ2)/(2π(I1−I2)) + 0.3 sin(2π(θ1+θ2))/(2π I1): the
        // θ2-derivative alone reaches 0.2/0.75 + 0.3/0.75 at I = (0.75, 0)
        assert!(nf.gamma >= 0.5 / 0.75 - 1e-9);
        assert!(nf.residual_homological <= 1e-9);
        let d = nf.measure_displacement(0.5 * nf.kappa * nf.epsilon, 200, 7).unwrap();
        assert!(d <= 0.5 * nf.kappa * nf.epsilon, "{d}");
    }

    #[test]
    fn first_remainder_matches_bracket_expansion() {
        // to leading order f′ = {f̄, χ} + ½{f − f̄, χ}
        let eps = 1e-4;
        let b = generic3(eps);
        let nf = one_step_normal_form(&b, &light()).unwrap();
        let g = b.perturbation.filter_modes(|k| k[1] != 0);
        for &(th, i) in &[([0.1, 0.7], [1.0, 0.0]), ([0.55, 0.2], [0.9, 1e-5])] {
            let (_, ct, ci) = nf.chi.value_and_gradient(th, i);
            let bracket = |f: &FourierPerturbation| {
                let (_, ft, fi) = f.eval_with_gradient(th, i);
                ft[0] * ci[0] + ft[1] * ci[1] - fi[0] * ct[0] - fi[1] * ct[1]
            };
            let expect = bracket(&nf.fbar) + 0.5 * bracket(&g);
            let v = nf.f1(th, i).unwrap();
            assert!((v - expect).abs() < 1e-3 * (1.0 + expect.abs()), "{v} vs {expect}");
        }
    }

    #[test]
    fn first_remainder_is_uniform_in_epsilon() {
        let a = one_step_normal_form(&generic3(1e-3), &light()).unwrap().sup_f1;
        let b = one_step_normal_form(&generic3(1e-4), &light()).unwrap().sup_f1;
        assert!(a > 0.0 && b > 0.0);
        assert!(b / a <= 2.0 && a / b <= 2.0, "{a} {b}");
    }

    #[test]
    fn phi_is_symplectic() {
        let nf = one_step_normal_form(&generic3(1e-2), &light()).unwrap();
        let map = |y: &State| nf.phi_lift(y).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = nf.window(0.5 * nf.kappa * nf.epsilon);
        for _ in 0..20 {
            let y = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(w.i1[0]..w.i1[1]), 0.5 * rng.gen_range(w.i2[0]..w.i2[1])];
            assert!(symplecticity_defect(&map, &y, 1e-5) <= 1e-6);
        }
    }

    #[test]
    fn second_average_matches_quadrature() {
        let nf = two_step_normal_form(&generic3(1e-3), &light()).unwrap();
        let s = nf.second.as_ref().unwrap();
        assert!(s.fit_residual <= FIT_LIMIT * s.sup_f1_analysis);
        assert!(s.chi.wave_vectors().iter().all(|k| k[1] != 0));
        assert!(nf.residual_homological <= 1e-9);
        assert!(nf.phi_displacement <= 0.75 * nf.kappa * nf.epsilon);
        let w = nf.window(0.5 * nf.kappa * nf.epsilon);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 64;
        for _ in 0..50 {
            let t1 = rng.gen_range(0.0..1.0);
            let i = [rng.gen_range(w.i1[0]..w.i1[1]), rng.gen_range(w.i2[0]..w.i2[1])];
            let quad = (0..n).map(|j| nf.f1([t1, j as f64 / n as f64], i).unwrap()).sum::<f64>() / n as f64;
            let v = nf.fbar2(t1, i).unwrap();
            assert!((quad - v).abs() <= 1e-6, "{quad} vs {v}");
        }
    }

    #[test]
    fn action_dependent_perturbation_is_refused_for_two_steps() {
        let mut b = generic3(1e-3);
        b.perturbation = FourierPerturbation::from_modes([crate::phase::FourierMode {
            k: [0, 1],
            cos: PolyField::coordinate(0),
            sin: PolyField::zero(),
        }]);
        assert!(matches!(two_step_normal_form(&b, &light()), Err(Error::ActionDependent)));
    }

    #[test]
    fn unreduced_bundle_is_refused() {
        let h = PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)]);
        let res =
            ResonanceData::new([1, 1], 0.0, [[0.25, -0.25], [1.75, -1.75]], [[0.5, -0.5], [1.5, -1.5]], 0.5).unwrap();
        let sys = IntegrableSystem::new(h, 4.0, res).unwrap();
        let b = SystemBundle::new(sys, FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]), 1e-3).unwrap();
        assert!(matches!(one_step_normal_form(&b, &light()), Err(Error::ChannelAssumption(_))));
    }
}
