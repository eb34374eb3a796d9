use super::{CoefSeries, Coefficient, SeriesMode};
use crate::error::{Error, Result};
use crate::flow::Generator;
use crate::phase::{linspace, wave_norm, ActionBox, FourierPerturbation, IntegrableSystem, PolyField};
use std::f64::consts::TAU;

/// Solution of `ω(I)·∂θχ = g_K` for the modes of `g` with `k2 ≠ 0` and
/// `|k| ≤ K`. A mode `c cos φ + s sin φ` of `g` (with `φ = 2π k·θ`) gives
/// `(c sin φ − s cos φ) / (2π k·ω(I))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorChi<C> {
    numerators: CoefSeries<C>,
    omega: [PolyField; 2],
    /// `∂ω_i/∂I_j`.
    domega: [[PolyField; 2]; 2],
    pub cutoff: i64,
    pub window: ActionBox,
    /// `min |k·ω|` over the check grid and the retained modes.
    pub min_divisor: f64,
    /// `max |ω·∂θχ − g_K|` over the check grid.
    pub residual: f64,
}

/// I-grid used for the small-divisor guard and the residual check.
pub const CHECK_GRID: (usize, usize) = (65, 17);
/// Angles of the residual check: the rank-one lattice `(j/128, 47j/128)`.
pub const CHECK_ANGLES: usize = 128;
const LATTICE_STEP: usize = 47;

impl<C: Coefficient> GeneratorChi<C> {
    pub fn is_zero(&self) -> bool {
        self.numerators.is_empty()
    }

    pub fn len(&self) -> usize {
        self.numerators.len()
    }

    pub fn wave_vectors(&self) -> Vec<[i64; 2]> {
        self.numerators.modes.iter().map(|m| m.k).collect()
    }

    /// The right-hand side `g_K` that was inverted.
    pub fn numerators(&self) -> &CoefSeries<C> {
        &self.numerators
    }

    pub fn omega(&self, i: [f64; 2]) -> [f64; 2] {
        [self.omega[0].eval(i), self.omega[1].eval(i)]
    }

    pub fn eval(&self, theta: [f64; 2], action: [f64; 2]) -> f64 {
        self.value_and_gradient(theta, action).0
    }

    pub fn value_and_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        let ctx = C::context(self.numerators.modes.iter().flat_map(|m| [&m.cos, &m.sin]), action);
        let w = self.omega(action);
        let dw = [
            [self.domega[0][0].eval(action), self.domega[0][1].eval(action)],
            [self.domega[1][0].eval(action), self.domega[1][1].eval(action)],
        ];
        let mut v = 0.0;
        let mut dt = [0.0; 2];
        let mut di = [0.0; 2];
        for m in &self.numerators.modes {
            let kf = [m.k[0] as f64, m.k[1] as f64];
            let d = TAU * (kf[0] * w[0] + kf[1] * w[1]);
            let dd = [TAU * (kf[0] * dw[0][0] + kf[1] * dw[1][0]), TAU * (kf[0] * dw[0][1] + kf[1] * dw[1][1])];
            let (s, c) = (TAU * (kf[0] * theta[0] + kf[1] * theta[1])).sin_cos();
            let (a, ga) = m.cos.value_grad(&ctx);
            let (b, gb) = m.sin.value_grad(&ctx);
            let num = a * s - b * c;
            v += num / d;
            // ∂θ of the numerator is 2π k (a c + b s)
            let dnum = TAU * (a * c + b * s) / d;
            dt[0] += kf[0] * dnum;
            dt[1] += kf[1] * dnum;
            for j in 0..2 {
                let dn = ga[j] * s - gb[j] * c;
                di[j] += (dn * d - num * dd[j]) / (d * d);
            }
        }
        (v, dt, di)
    }
}

impl<C: Coefficient> Generator for GeneratorChi<C> {
    fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        self.value_and_gradient(theta, action)
    }
}

/// Builds `χ` for a general coefficient series on `window`, guarding
/// `|k·ω| ≥ ϖ/2` on a 65×17 action grid.
pub fn solve_homological_series<C: Coefficient>(
    system: &IntegrableSystem,
    g: &CoefSeries<C>,
    cutoff: i64,
    window: ActionBox,
) -> Result<GeneratorChi<C>> {
    let modes: Vec<SeriesMode<C>> = g
        .modes
        .iter()
        .filter(|m| m.k[1] != 0 && wave_norm(m.k) <= cutoff)
        .filter(|m| !(m.cos.is_zero() && m.sin.is_zero()))
        .cloned()
        .collect();
    let grad = system.omega_fields().clone();
    let domega = [
        [grad[0].partial(1, 0), grad[0].partial(0, 1)],
        [grad[1].partial(1, 0), grad[1].partial(0, 1)],
    ];
    let mut chi = GeneratorChi {
        numerators: CoefSeries { modes },
        omega: grad,
        domega,
        cutoff,
        window,
        min_divisor: f64::INFINITY,
        residual: 0.0,
    };
    if chi.is_zero() {
        return Ok(chi);
    }
    let bound = 0.5 * system.resonance.varpi;
    let xs = linspace(window.i1, CHECK_GRID.0);
    let ys = linspace(window.i2, CHECK_GRID.1);
    for &x in &xs {
        for &y in &ys {
            let w = system.omega([x, y]);
            for m in &chi.numerators.modes {
                let kw = (m.k[0] as f64 * w[0] + m.k[1] as f64 * w[1]).abs();
                chi.min_divisor = chi.min_divisor.min(kw);
                if kw < bound {
                    return Err(Error::SmallDivisor { k1: m.k[0], k2: m.k[1], value: kw, bound, i1: x, i2: y });
                }
            }
        }
    }
    let gk = CoefSeries { modes: chi.numerators.modes.clone() };
    let mut residual: f64 = 0.0;
    for &x in &xs {
        for &y in &ys {
            let w = system.omega([x, y]);
            for j in 0..CHECK_ANGLES {
                let n = CHECK_ANGLES as f64;
                let th = [j as f64 / n, ((j * LATTICE_STEP) % CHECK_ANGLES) as f64 / n];
                let (_, dt, _) = chi.value_and_gradient(th, [x, y]);
                let lhs = w[0] * dt[0] + w[1] * dt[1];
                residual = residual.max((lhs - gk.eval(th, [x, y])).abs());
            }
        }
    }
    chi.residual = residual;
    Ok(chi)
}

/// `χ` for a polynomial-coefficient perturbation.
pub fn solve_homological(
    system: &IntegrableSystem,
    f: &FourierPerturbation,
    cutoff: i64,
    window: ActionBox,
) -> Result<GeneratorChi<PolyField>> {
    solve_homological_series(system, &CoefSeries::from(f), cutoff, window)
}
