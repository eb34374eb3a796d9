//! Finite real Fourier series on the torus with polynomial coefficients.
//!
//! A perturbation is stored as
//! `f(θ, I) = Σ_k [c_k(I) cos(2π k·θ) + s_k(I) sin(2π k·θ)]`
//! with `k` restricted to the half-plane `k1 > 0 or (k1 == 0 and k2 >= 0)`.
//! The complex coefficient of `e^{2πi k·θ}` is `(c_k − i s_k)/2` and the one of
//! `−k` its conjugate, so the series is real by construction.

use super::poly::PolyField;
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// One cosine/sine pair sharing the wave vector `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMode {
    pub k: [i64; 2],
    pub cos: PolyField,
    pub sin: PolyField,
}

/// Finite Fourier series in the angles with polynomial-in-action coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FourierPerturbation {
    modes: Vec<FourierMode>,
    /// Declared regularity proxy `r`; bookkeeping only.
    pub regularity: u32,
}

/// Canonical representative of `±k` and the sign picked up by the sine part.
pub fn canonical_wave_vector(k: [i64; 2]) -> ([i64; 2], f64) {
    if k[0] > 0 || (k[0] == 0 && k[1] >= 0) {
        (k, 1.0)
    } else {
        ([-k[0], -k[1]], -1.0)
    }
}

/// `|k|` as the ℓ¹ norm, dual to the supremum norm used on frequencies.
pub fn wave_norm(k: [i64; 2]) -> i64 {
    k[0].abs() + k[1].abs()
}

impl FourierPerturbation {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a series from arbitrary (possibly non-canonical, possibly
    /// repeated) modes. Modes with both coefficients zero are dropped.
    pub fn from_modes(modes: impl IntoIterator<Item = FourierMode>) -> Self {
        let mut acc: BTreeMap<[i64; 2], (PolyField, PolyField)> = BTreeMap::new();
        for m in modes {
            let (k, sign) = canonical_wave_vector(m.k);
            let entry = acc.entry(k).or_default();
            entry.0 = &entry.0 + &m.cos;
            entry.1 = &entry.1 + &m.sin.scale(sign);
        }
        let modes = acc
            .into_iter()
            .map(|(k, (cos, sin))| {
                let sin = if k == [0, 0] { PolyField::zero() } else { sin };
                FourierMode { k, cos, sin }
            })
            .filter(|m| !(m.cos.is_zero() && m.sin.is_zero()))
            .collect();
        Self { modes, regularity: 0 }
    }

    pub fn with_regularity(mut self, r: u32) -> Self {
        self.regularity = r;
        self
    }

    /// Convenience constructor for action-independent terms
    /// `a cos(2π k·θ) + b sin(2π k·θ)`.
    pub fn trig(terms: &[([i64; 2], f64, f64)]) -> Self {
        Self::from_modes(terms.iter().map(|&(k, a, b)| FourierMode {
            k,
            cos: PolyField::constant(a),
            sin: PolyField::constant(b),
        }))
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Largest `|k|` (ℓ¹) among stored modes.
    pub fn max_wave_norm(&self) -> i64 {
        self.modes.iter().map(|m| wave_norm(m.k)).max().unwrap_or(0)
    }

    pub fn is_action_independent(&self) -> bool {
        self.modes.iter().all(|m| m.cos.is_constant() && m.sin.is_constant())
    }

    pub fn eval(&self, theta: [f64; 2], action: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let phase = TAU * (m.k[0] as f64 * theta[0] + m.k[1] as f64 * theta[1]);
                let (s, c) = phase.sin_cos();
                m.cos.eval(action) * c + m.sin.eval(action) * s
            })
            .sum()
    }

    /// Value, angle gradient and action gradient in one pass.
    pub fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        let mut v = 0.0;
        let mut dt = [0.0; 2];
        let mut di = [0.0; 2];
        for m in &self.modes {
            let k = [m.k[0] as f64, m.k[1] as f64];
            let phase = TAU * (k[0] * theta[0] + k[1] * theta[1]);
            let (s, c) = phase.sin_cos();
            let a = m.cos.eval(action);
            let b = m.sin.eval(action);
            v += a * c + b * s;
            let dphase = -a * s + b * c;
            dt[0] += TAU * k[0] * dphase;
            dt[1] += TAU * k[1] * dphase;
            let ga = m.cos.gradient(action);
            let gb = m.sin.gradient(action);
            di[0] += ga[0] * c + gb[0] * s;
            di[1] += ga[1] * c + gb[1] * s;
        }
        (v, dt, di)
    }

    /// Exact partial derivative of orders `theta_orders` in the angles and
    /// `action_orders` in the actions.
    pub fn partial(&self, theta_orders: [u32; 2], action_orders: [u32; 2]) -> Self {
        let modes = self.modes.iter().map(|m| {
            let mut cos = m.cos.partial(action_orders[0], action_orders[1]);
            let mut sin = m.sin.partial(action_orders[0], action_orders[1]);
            for (axis, &order) in theta_orders.iter().enumerate() {
                for _ in 0..order {
                    // d/dθ (c cos φ + s sin φ) = 2π k_axis (s cos φ − c sin φ)
                    let f = TAU * m.k[axis] as f64;
                    let new_cos = sin.scale(f);
                    let new_sin = cos.scale(-f);
                    cos = new_cos;
                    sin = new_sin;
                }
            }
            FourierMode { k: m.k, cos, sin }
        });
        Self::from_modes(modes).with_regularity(self.regularity)
    }

    /// Keeps the modes accepted by `keep`.
    pub fn filter_modes(&self, keep: impl Fn([i64; 2]) -> bool) -> Self {
        Self {
            modes: self.modes.iter().filter(|m| keep(m.k)).cloned().collect(),
            regularity: self.regularity,
        }
    }

    /// Evaluates every coefficient at a fixed action, giving an
    /// action-independent series.
    pub fn freeze_actions(&self, action: [f64; 2]) -> Self {
        Self::from_modes(self.modes.iter().map(|m| FourierMode {
            k: m.k,
            cos: PolyField::constant(m.cos.eval(action)),
            sin: PolyField::constant(m.sin.eval(action)),
        }))
        .with_regularity(self.regularity)
    }

    /// `f(Mθ, A I + b)` for an integer matrix `M`: the wave vector `m`
    /// becomes `ᵗM m` and each coefficient is composed with the affine map.
    pub fn transform(&self, m: [[i64; 2]; 2], a: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        Self::from_modes(self.modes.iter().map(|mode| {
            let k = mode.k;
            let new_k = [m[0][0] * k[0] + m[1][0] * k[1], m[0][1] * k[0] + m[1][1] * k[1]];
            FourierMode {
                k: new_k,
                cos: mode.cos.compose_affine(a, b),
                sin: mode.sin.compose_affine(a, b),
            }
        }))
        .with_regularity(self.regularity)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_modes(self.modes.iter().map(|m| FourierMode {
            k: m.k,
            cos: m.cos.scale(s),
            sin: m.sin.scale(s),
        }))
        .with_regularity(self.regularity)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_modes(self.modes.iter().chain(other.modes.iter()).cloned())
            .with_regularity(self.regularity.min(other.regularity))
    }

    /// Complex coefficient `f_k(I)` of `e^{2πi k·θ}` for an arbitrary `k`.
    pub fn complex_coefficient(&self, k: [i64; 2], action: [f64; 2]) -> (f64, f64) {
        let (ck, sign) = canonical_wave_vector(k);
        match self.modes.iter().find(|m| m.k == ck) {
            None => (0.0, 0.0),
            Some(m) if ck == [0, 0] => (m.cos.eval(action), 0.0),
            Some(m) => (0.5 * m.cos.eval(action), -0.5 * sign * m.sin.eval(action)),
        }
    }
}

/// Poisson bracket `{f, g} = ∂θf·∂Ig − ∂If·∂θg` at a point.
pub fn poisson_bracket(f: &FourierPerturbation, g: &FourierPerturbation, theta: [f64; 2], action: [f64; 2]) -> f64 {
    let (_, ft, fi) = f.eval_with_gradient(theta, action);
    let (_, gt, gi) = g.eval_with_gradient(theta, action);
    ft[0] * gi[0] + ft[1] * gi[1] - fi[0] * gt[0] - fi[1] * gt[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn negative_wave_vector_is_folded_with_sine_sign() {
        let f = FourierPerturbation::trig(&[([-1, 1], 0.5, 1.0)]);
        assert_eq!(f.modes()[0].k, [1, -1]);
        let theta = [0.13, 0.71];
        let direct = 0.5 * (TAU * (-theta[0] + theta[1])).cos() + (TAU * (-theta[0] + theta[1])).sin();
        assert!((f.eval(theta, [0.0, 0.0]) - direct).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_cosine_mode() {
        // f = cos(2π θ2): ∂θ2 f = −2π sin(2π θ2)
        let f = FourierPerturbation::trig(&[([0, 1], 1.0, 0.0)]);
        let d = f.partial([0, 1], [0, 0]);
        let theta = [0.3, 0.2];
        let expect = -TAU * (TAU * 0.2f64).sin();
        assert!((d.eval(theta, [0.0, 0.0]) - expect).abs() < 1e-12);
        let (_, dt, di) = f.eval_with_gradient(theta, [1.0, 2.0]);
        assert!((dt[1] - expect).abs() < 1e-12);
        assert_eq!(dt[0], 0.0);
        assert_eq!(di, [0.0, 0.0]);
    }

    #[test]
    fn complex_coefficients_are_conjugate() {
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / (2.0 * PI))]);
        let (re, im) = f.complex_coefficient([1, -1], [0.0, 0.0]);
        let (re2, im2) = f.complex_coefficient([-1, 1], [0.0, 0.0]);
        assert_eq!(re, re2);
        assert_eq!(im, -im2);
        assert!((im + 0.5 / (2.0 * PI)).abs() < 1e-16);
    }

    #[test]
    fn relabeling_by_unimodular_matrix() {
        // M = [[1,1],[0,1]], ᵗM (1,-1) = (1, 0)
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]);
        let g = f.transform([[1, 1], [0, 1]], [[1.0, 0.0], [-1.0, 1.0]], [0.0, 0.0]);
        assert_eq!(g.modes().len(), 1);
        assert_eq!(g.modes()[0].k, [1, 0]);
        let th = [0.37, 0.81];
        let mth = [th[0] + th[1], th[1]];
        assert!((g.eval(th, [0.0, 0.0]) - f.eval(mth, [0.0, 0.0])).abs() < 1e-14);
    }

    fn arb_series() -> impl Strategy<Value = FourierPerturbation> {
        prop::collection::vec(
            (
                (-3i64..=3, -3i64..=3),
                prop::collection::vec((0u32..3, 0u32..3, -1.0f64..1.0), 0..3),
                prop::collection::vec((0u32..3, 0u32..3, -1.0f64..1.0), 0..3),
            ),
            1..5,
        )
        .prop_map(|v| {
            FourierPerturbation::from_modes(v.into_iter().map(|((k1, k2), c, s)| FourierMode {
                k: [k1, k2],
                cos: PolyField::from_terms(c),
                sin: PolyField::from_terms(s),
            }))
        })
    }

    proptest! {
        #[test]
        fn analytic_gradient_matches_finite_differences(
            f in arb_series(),
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
            i1 in -1.0f64..1.0, i2 in -1.0f64..1.0,
        ) {
            let h = 1e-6;
            let (_, dt, di) = f.eval_with_gradient([t1, t2], [i1, i2]);
            let fd_t = [
                (f.eval([t1 + h, t2], [i1, i2]) - f.eval([t1 - h, t2], [i1, i2])) / (2.0 * h),
                (f.eval([t1, t2 + h], [i1, i2]) - f.eval([t1, t2 - h], [i1, i2])) / (2.0 * h),
            ];
            let fd_i = [
                (f.eval([t1, t2], [i1 + h, i2]) - f.eval([t1, t2], [i1 - h, i2])) / (2.0 * h),
                (f.eval([t1, t2], [i1, i2 + h]) - f.eval([t1, t2], [i1, i2 - h])) / (2.0 * h),
            ];
            for c in 0..2 {
                prop_assert!((dt[c] - fd_t[c]).abs() <= 1e-6 * dt[c].abs().max(1.0));
                prop_assert!((di[c] - fd_i[c]).abs() <= 1e-6 * di[c].abs().max(1.0));
            }
            // exact partial agrees with the one-pass gradient
            let p = f.partial([1, 0], [0, 0]).eval([t1, t2], [i1, i2]);
            prop_assert!((p - dt[0]).abs() <= 1e-12 * dt[0].abs().max(1.0));
        }

        #[test]
        fn transform_matches_pointwise_substitution(
            f in arb_series(),
            t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
            i1 in -1.0f64..1.0, i2 in -1.0f64..1.0,
        ) {
            let m = [[2i64, 1], [1, 1]];
            let a = [[1.0, -1.0], [-1.0, 2.0]];
            let b = [0.1, -0.2];
            let g = f.transform(m, a, b);
            prop_assert_eq!(g.len(), f.len());
            let mth = [2.0 * t1 + t2, t1 + t2];
            let ai = [i1 - i2 + b[0], -i1 + 2.0 * i2 + b[1]];
            let lhs = g.eval([t1, t2], [i1, i2]);
            let rhs = f.eval(mth, ai);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }
}
