//! Reduction of a rational resonance `k·I + a = 0` to the line `{I2 = 0}`.
//!
//! The reduced coordinates `(θ̃, Ĩ)` are related to the original ones by
//! `θ = M θ̃`, `I = ᵗM⁻¹ Ĩ + T`, where `M ∈ GL₂(ℤ)` has second column `k`
//! and `T` lies on the resonance line.

use crate::error::{Error, Result};
use crate::flow::OrbitRecord;
use crate::phase::{
    linspace, verify_channel_assumptions, ChannelReport, FourierPerturbation, IntegrableSystem, PolyField,
    ResonanceData,
};

/// Samples used for the constancy and frequency checks.
pub const CHECK_SAMPLES: usize = 2001;

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `(k / p, p)` with `p = gcd(|k1|, |k2|)`.
pub fn primitive_vector(k: [i64; 2]) -> Result<([i64; 2], i64)> {
    if k == [0, 0] {
        return Err(Error::ZeroVector);
    }
    let p = gcd(k[0], k[1]);
    Ok(([k[0] / p, k[1] / p], p))
}

/// Extended Euclid: `(g, x, y)` with `a x + b y = g = gcd(a, b) ≥ 0`.
fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    let (mut r0, mut r1) = (a, b);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 < 0 {
        (-r0, -s0, -t0)
    } else {
        (r0, s0, t0)
    }
}

/// `M ∈ GL₂(ℤ)` with its exact integer inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnimodularMap {
    pub m: [[i64; 2]; 2],
    pub m_inv: [[i64; 2]; 2],
    pub det: i64,
}

impl UnimodularMap {
    pub fn identity() -> Self {
        Self { m: [[1, 0], [0, 1]], m_inv: [[1, 0], [0, 1]], det: 1 }
    }

    pub fn new(m: [[i64; 2]; 2]) -> Result<Self> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() != 1 {
            return Err(Error::InvalidParameter { name: "M", reason: format!("determinant {det} is not ±1") });
        }
        let m_inv = [[det * m[1][1], -det * m[0][1]], [-det * m[1][0], det * m[0][0]]];
        Ok(Self { m, m_inv, det })
    }

    /// `ᵗM⁻¹`.
    pub fn inv_transpose(&self) -> [[i64; 2]; 2] {
        [[self.m_inv[0][0], self.m_inv[1][0]], [self.m_inv[0][1], self.m_inv[1][1]]]
    }

    /// `ᵗM`.
    pub fn transpose(&self) -> [[i64; 2]; 2] {
        [[self.m[0][0], self.m[1][0]], [self.m[0][1], self.m[1][1]]]
    }

    /// The 4×4 matrix of `(θ, I) ↦ (Mθ, ᵗM⁻¹ I)`.
    pub fn phase_matrix(&self) -> [[i64; 4]; 4] {
        let a = self.m;
        let b = self.inv_transpose();
        [
            [a[0][0], a[0][1], 0, 0],
            [a[1][0], a[1][1], 0, 0],
            [0, 0, b[0][0], b[0][1]],
            [0, 0, b[1][0], b[1][1]],
        ]
    }
}

/// `JᵀΩJ − Ω` over the integers, `Ω = [[0, 1], [−1, 0]]` in `2×2` blocks.
pub fn symplectic_form_defect(j: &[[i64; 4]; 4]) -> [[i64; 4]; 4] {
    let omega = |r: usize, c: usize| -> i64 {
        match (r, c) {
            (0, 2) | (1, 3) => 1,
            (2, 0) | (3, 1) => -1,
            _ => 0,
        }
    };
    let mut out = [[0i64; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let mut s = 0;
            for a in 0..4 {
                for b in 0..4 {
                    s += j[a][r] * omega(a, b) * j[b][c];
                }
            }
            out[r][c] = s - omega(r, c);
        }
    }
    out
}

fn mat_vec(m: [[i64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] as f64 * v[0] + m[0][1] as f64 * v[1], m[1][0] as f64 * v[0] + m[1][1] as f64 * v[1]]
}

fn to_f64(m: [[i64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[0][0] as f64, m[0][1] as f64], [m[1][0] as f64, m[1][1] as f64]]
}

/// Completes a primitive `k` to `M` with `M e2 = k` and `det M = 1`. Among
/// the Bézout first columns `(p, q)` with `p k2 − q k1 = 1` the one with the
/// smallest `|p| + |q|` is chosen; ties prefer fewer negative entries, then
/// the larger `p`.
pub fn unimodular_completion(k: [i64; 2]) -> Result<UnimodularMap> {
    let (prim, g) = primitive_vector(k)?;
    if g != 1 || prim != k {
        return Err(Error::NotPrimitive(k[0], k[1]));
    }
    let (_, x, y) = ext_gcd(k[1], -k[0]);
    // all solutions: (x + t k1, y + t k2)
    let mut centres = vec![0i64];
    if k[0] != 0 {
        centres.push(-x / k[0]);
    }
    if k[1] != 0 {
        centres.push(-y / k[1]);
    }
    let key = |p: i64, q: i64| (p.abs() + q.abs(), (p < 0) as u8 + (q < 0) as u8, -p);
    let mut best: Option<(i64, i64)> = None;
    for c in centres {
        for t in c - 2..=c + 2 {
            let (p, q) = (x + t * k[0], y + t * k[1]);
            if best.map_or(true, |(bp, bq)| key(p, q) < key(bp, bq)) {
                best = Some((p, q));
            }
        }
    }
    let (p, q) = best.expect("candidate set is non-empty");
    UnimodularMap::new([[p, k[0]], [q, k[1]]])
}

/// Orbit transport direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Reduced coordinates to original coordinates.
    Forward,
    /// Original coordinates to reduced coordinates.
    Backward,
}

/// Diagnostics recorded by [`reduce_system`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionChecks {
    /// `max |h(I) − h(I_0)|` over sampled points of `S`.
    pub h_constancy: f64,
    pub channel: ChannelReport,
    pub symplectic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub map: UnimodularMap,
    /// Translation `T`, a point of the resonance line.
    pub translation: [f64; 2],
    /// gcd of the declared resonance vector.
    pub multiplicity: i64,
    /// `true` when `H` was replaced by `−H` so that `ω̃2 > 0` on the channel;
    /// reduced orbits then run backwards in original time.
    pub time_reversed: bool,
    pub system: IntegrableSystem,
    pub perturbation: FourierPerturbation,
    pub checks: ReductionChecks,
}

impl ReductionResult {
    /// `±1` with `H̃ = sign · H ∘ Φ`.
    pub fn sign(&self) -> f64 {
        if self.time_reversed {
            -1.0
        } else {
            1.0
        }
    }

    /// Reduced lifted state to original lifted state (continuous lifts).
    pub fn forward_lift(&self, y: &[f64; 4]) -> [f64; 4] {
        let th = mat_vec(self.map.m, [y[0], y[1]]);
        let i = mat_vec(self.map.inv_transpose(), [y[2], y[3]]);
        [th[0], th[1], i[0] + self.translation[0], i[1] + self.translation[1]]
    }

    /// Original lifted state to reduced lifted state.
    pub fn backward_lift(&self, y: &[f64; 4]) -> [f64; 4] {
        let th = mat_vec(self.map.m_inv, [y[0], y[1]]);
        let i = mat_vec(self.map.transpose(), [y[2] - self.translation[0], y[3] - self.translation[1]]);
        [th[0], th[1], i[0], i[1]]
    }

    pub fn forward_action(&self, i: [f64; 2]) -> [f64; 2] {
        let y = self.forward_lift(&[0.0, 0.0, i[0], i[1]]);
        [y[2], y[3]]
    }

    pub fn backward_action(&self, i: [f64; 2]) -> [f64; 2] {
        let y = self.backward_lift(&[0.0, 0.0, i[0], i[1]]);
        [y[2], y[3]]
    }
}

/// Reduces `(h, f)` with resonance data `res` on `B_R`.
pub fn reduce_system(
    h: &PolyField,
    f: &FourierPerturbation,
    res: &ResonanceData,
    radius: f64,
) -> Result<ReductionResult> {
    let (k, p) = primitive_vector(res.k)?;
    let a = res.a / p as f64;
    let map = unimodular_completion(k)?;
    let k2 = (k[0] * k[0] + k[1] * k[1]) as f64;
    let translation = [-a * k[0] as f64 / k2, -a * k[1] as f64 / k2];

    let h0 = h.eval(res.segment[0]);
    let h_constancy = linspace([0.0, 1.0], CHECK_SAMPLES)
        .into_iter()
        .map(|s| {
            let q = lerp(res.segment, s);
            (h.eval(q) - h0).abs()
        })
        .fold(0.0, f64::max);
    if h_constancy > 1e-10 * h0.abs().max(1.0) {
        return Err(Error::ChannelAssumption(format!(
            "h is not constant on S (variation {h_constancy:.3e})"
        )));
    }

    let a_lin = to_f64(map.inv_transpose());
    let mut h_red = h.compose_affine(a_lin, translation);
    let mut f_red = f.transform(map.m, a_lin, translation);

    let back = |q: [f64; 2]| {
        let i = mat_vec(map.transpose(), [q[0] - translation[0], q[1] - translation[1]]);
        // exact zero up to round-off in the subtraction of T
        [i[0], if i[1].abs() <= 1e-12 * (1.0 + i[0].abs()) { 0.0 } else { i[1] }]
    };
    let seg = [back(res.segment[0]), back(res.segment[1])];
    let core = [back(res.core[0]), back(res.core[1])];

    // orientation of the channel: ω̃2 must be positive on S1*
    let mid = [0.5 * (core[0][0] + core[1][0]), 0.0];
    let time_reversed = h_red.partial(0, 1).eval(mid) < 0.0;
    if time_reversed {
        h_red = h_red.scale(-1.0);
        f_red = f_red.scale(-1.0);
    }

    let row_sum = a_lin.iter().map(|r| r[0].abs() + r[1].abs()).fold(0.0, f64::max);
    let t_norm = translation[0].abs().max(translation[1].abs());
    let radius_red = (radius - t_norm) / row_sum;

    let d_omega2 = h_red.partial(0, 1);
    let core_iv = ordered(core[0][0], core[1][0]);
    let varpi_red = linspace(core_iv, CHECK_SAMPLES)
        .into_iter()
        .map(|x| d_omega2.eval([x, 0.0]))
        .fold(f64::INFINITY, f64::min);
    if !(varpi_red >= res.varpi * (1.0 - 1e-12)) || varpi_red <= 0.0 {
        return Err(Error::ChannelAssumption(format!(
            "frequency bound not achieved: min ω̃2 on S1* is {varpi_red:.6e}, declared ϖ = {:.6e}",
            res.varpi
        )));
    }
    let res_red = ResonanceData::new([0, 1], 0.0, seg, core, varpi_red)?;
    let system = IntegrableSystem::new(h_red, radius_red, res_red)?;
    let channel = verify_channel_assumptions(&system, CHECK_SAMPLES);
    if !channel.resonance_holds {
        return Err(Error::ChannelAssumption(format!(
            "ω̃1 does not vanish on S1 (max |ω̃1| = {:.3e})",
            channel.max_abs_omega1
        )));
    }
    if !channel.frequency_bound_holds {
        return Err(Error::ChannelAssumption(format!(
            "min ω̃2 = {:.6e} below ϖ = {:.6e}",
            channel.min_omega2, channel.varpi
        )));
    }
    let symplectic = symplectic_form_defect(&map.phase_matrix()) == [[0; 4]; 4];
    Ok(ReductionResult {
        map,
        translation,
        multiplicity: p,
        time_reversed,
        system,
        perturbation: f_red,
        checks: ReductionChecks { h_constancy, channel, symplectic },
    })
}

fn lerp(seg: [[f64; 2]; 2], s: f64) -> [f64; 2] {
    [seg[0][0] + s * (seg[1][0] - seg[0][0]), seg[0][1] + s * (seg[1][1] - seg[0][1])]
}

fn ordered(a: f64, b: f64) -> [f64; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

/// Transports an orbit between reduced and original coordinates. Energies
/// pick up the sign of the reduction; diagnostics are recomputed against the
/// transported channel segment.
pub fn map_orbit(result: &ReductionResult, orbit: &OrbitRecord, direction: Direction) -> OrbitRecord {
    let map = |y: &[f64; 4]| match direction {
        Direction::Forward => result.forward_lift(y),
        Direction::Backward => result.backward_lift(y),
    };
    let channel = orbit.channel.map(|seg| {
        let a = map(&[0.0, 0.0, seg[0][0], seg[0][1]]);
        let b = map(&[0.0, 0.0, seg[1][0], seg[1][1]]);
        [[a[2], a[3]], [b[2], b[3]]]
    });
    let mut out = OrbitRecord::new(channel);
    out.stats = orbit.stats;
    out.termination = orbit.termination;
    for s in &orbit.samples {
        out.push(s.t, map(&s.state), result.sign() * s.energy);
    }
    out
}
