//! Grid estimates of `|f|_{C^j} = max_{|α| ≤ j} sup |∂^α f|` on `𝕋² × box`.
//!
//! Multi-indices `α = (a1, a2, b1, b2)` act on `(θ1, θ2, I1, I2)`.

use super::fourier::FourierPerturbation;
use super::{linspace, ActionBox};
use crate::error::{invalid, Error, Result};
use std::f64::consts::TAU;

/// Highest derivative order supported by the estimator.
pub const MAX_ORDER: u32 = 4;

/// A field to be measured.
pub enum NormField<'a> {
    /// Exact term-wise derivatives.
    Fourier(&'a FourierPerturbation),
    /// Black-box sampler `(θ, I) ↦ value`; derivatives by central differences.
    Sampler(&'a dyn Fn([f64; 2], [f64; 2]) -> f64),
}

/// Tensor grid: `n_theta` points per angle (periodic), `n_action` points per
/// action axis (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormGrid {
    pub n_theta: usize,
    pub n_action: usize,
    pub actions: ActionBox,
}

impl NormGrid {
    pub fn new(n_theta: usize, n_action: usize, actions: ActionBox) -> Self {
        Self { n_theta, n_action, actions }
    }

    /// 128 points per angle and 33 per action.
    pub fn standard(actions: ActionBox) -> Self {
        Self::new(128, 33, actions)
    }

    fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|j| j as f64 / self.n_theta as f64).collect()
    }

    fn actions_1(&self) -> Vec<f64> {
        linspace(self.actions.i1, self.n_action)
    }

    fn actions_2(&self) -> Vec<f64> {
        linspace(self.actions.i2, self.n_action)
    }

    fn action_step(&self, axis: usize) -> f64 {
        let r = if axis == 0 { self.actions.i1 } else { self.actions.i2 };
        let w = r[1] - r[0];
        if w > 0.0 && self.n_action > 1 {
            w / (self.n_action - 1) as f64
        } else {
            1.0 / self.n_theta as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub order: u32,
    pub grid: NormGrid,
    /// The `C^j` estimate; NaN when a sample was not finite.
    pub value: f64,
    /// `(α, sup |∂^α f|)` for every multi-index with `|α| ≤ j`.
    pub per_index: Vec<([u32; 4], f64)>,
}

impl NormReport {
    pub fn index_max(&self, alpha: [u32; 4]) -> Option<f64> {
        self.per_index.iter().find(|(a, _)| *a == alpha).map(|&(_, v)| v)
    }
}

fn multi_indices(j: u32) -> Vec<[u32; 4]> {
    let mut out = Vec::new();
    for total in 0..=j {
        for a1 in 0..=total {
            for a2 in 0..=total - a1 {
                for b1 in 0..=total - a1 - a2 {
                    out.push([a1, a2, b1, total - a1 - a2 - b1]);
                }
            }
        }
    }
    out
}

fn nan_max(acc: f64, v: f64) -> f64 {
    if acc.is_nan() || v.is_nan() {
        f64::NAN
    } else {
        acc.max(v.abs())
    }
}

pub fn estimate_cj_norm(field: &NormField<'_>, j: u32, grid: &NormGrid) -> Result<NormReport> {
    if j > MAX_ORDER {
        return Err(invalid("j", format!("derivative order {j} exceeds {MAX_ORDER}")));
    }
    let needed = 2 * j as usize + 1;
    for points in [grid.n_theta, grid.n_action] {
        if points < needed {
            return Err(Error::GridTooCoarse { points, order: j as usize, needed });
        }
    }
    let per_index: Vec<([u32; 4], f64)> = multi_indices(j)
        .into_iter()
        .map(|alpha| {
            let v = match field {
                NormField::Fourier(f) => fourier_sup(f, alpha, grid),
                NormField::Sampler(s) => sampler_sup(*s, alpha, grid),
            };
            (alpha, v)
        })
        .collect();
    let value = per_index.iter().fold(0.0, |acc, &(_, v)| nan_max(acc, v));
    Ok(NormReport { order: j, grid: *grid, value, per_index })
}

fn fourier_sup(f: &FourierPerturbation, alpha: [u32; 4], grid: &NormGrid) -> f64 {
    let d = f.partial([alpha[0], alpha[1]], [alpha[2], alpha[3]]);
    if d.is_zero() {
        return 0.0;
    }
    let thetas = grid.thetas();
    let modes = d.modes();
    let nm = modes.len();
    // trig table indexed by (θ-point, mode) and coefficient table by (I-point, mode)
    let mut trig = Vec::with_capacity(thetas.len() * thetas.len() * nm * 2);
    for &t1 in &thetas {
        for &t2 in &thetas {
            for m in modes {
                let (s, c) = (TAU * (m.k[0] as f64 * t1 + m.k[1] as f64 * t2)).sin_cos();
                trig.push(c);
                trig.push(s);
            }
        }
    }
    let mut coef = Vec::new();
    for &x in &grid.actions_1() {
        for &y in &grid.actions_2() {
            for m in modes {
                coef.push(m.cos.eval([x, y]));
                coef.push(m.sin.eval([x, y]));
            }
        }
    }
    let w = 2 * nm;
    let mut best: f64 = 0.0;
    for cb in coef.chunks_exact(w) {
        for tb in trig.chunks_exact(w) {
            let v: f64 = cb.iter().zip(tb).map(|(a, b)| a * b).sum();
            best = nan_max(best, v);
        }
    }
    best
}

/// Central-difference weights `(offset in steps, weight)` for the `n`-th
/// derivative; offsets are half-integers for odd `n`.
fn stencil(n: u32) -> Vec<(f64, f64)> {
    let mut binom = 1.0;
    (0..=n)
        .map(|i| {
            let w = if i % 2 == 0 { binom } else { -binom };
            let off = n as f64 / 2.0 - i as f64;
            binom = binom * (n - i) as f64 / (i + 1) as f64;
            (off, w)
        })
        .collect()
}

fn sampler_sup(s: &dyn Fn([f64; 2], [f64; 2]) -> f64, alpha: [u32; 4], grid: &NormGrid) -> f64 {
    let hs = [
        1.0 / grid.n_theta as f64,
        1.0 / grid.n_theta as f64,
        grid.action_step(0),
        grid.action_step(1),
    ];
    let stencils: Vec<Vec<(f64, f64)>> = alpha.iter().map(|&a| stencil(a)).collect();
    let scale: f64 = (0..4).map(|c| hs[c].powi(alpha[c] as i32)).product();
    let thetas = grid.thetas();
    let mut best: f64 = 0.0;
    for &t1 in &thetas {
        for &t2 in &thetas {
            for &x in &grid.actions_1() {
                for &y in &grid.actions_2() {
                    let mut acc = 0.0;
                    for &(o1, w1) in &stencils[0] {
                        for &(o2, w2) in &stencils[1] {
                            for &(o3, w3) in &stencils[2] {
                                for &(o4, w4) in &stencils[3] {
                                    let v = s(
                                        [t1 + o1 * hs[0], t2 + o2 * hs[1]],
                                        [x + o3 * hs[2], y + o4 * hs[3]],
                                    );
                                    acc += w1 * w2 * w3 * w4 * v;
                                }
                            }
                        }
                    }
                    best = nan_max(best, acc / scale);
                }
            }
        }
    }
    best
}
