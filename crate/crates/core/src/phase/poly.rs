//! Bivariate polynomials in the actions `(I1, I2)`.
//!
//! Every integrable part and every Fourier coefficient is stored as a
//! [`PolyField`], so frequencies, Hessians and action derivatives of the
//! perturbation are obtained by exact term-wise differentiation.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

/// One monomial `coeff * I1^p1 * I2^p2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub p1: u32,
    pub p2: u32,
    pub coeff: f64,
}

/// Polynomial in two variables, kept in canonical form: exponents sorted,
/// no duplicate exponent pairs, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolyField {
    terms: Vec<Monomial>,
}

impl PolyField {
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(0, 0, c)])
    }

    /// The coordinate function `I1` (`index == 0`) or `I2` (`index == 1`).
    pub fn coordinate(index: usize) -> Self {
        match index {
            0 => Self::from_terms([(1, 0, 1.0)]),
            _ => Self::from_terms([(0, 1, 1.0)]),
        }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, u32, f64)>) -> Self {
        let mut acc: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (p1, p2, c) in terms {
            *acc.entry((p1, p2)).or_insert(0.0) += c;
        }
        let terms = acc
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((p1, p2), coeff)| Monomial { p1, p2, coeff })
            .collect();
        Self { terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|m| m.p1 == 0 && m.p2 == 0)
    }

    /// Maximum total degree; `0` for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|m| m.p1 + m.p2).max().unwrap_or(0)
    }

    pub fn eval(&self, i: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|m| m.coeff * pow(i[0], m.p1) * pow(i[1], m.p2))
            .sum()
    }

    pub fn gradient(&self, i: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for m in &self.terms {
            if m.p1 > 0 {
                g[0] += m.coeff * m.p1 as f64 * pow(i[0], m.p1 - 1) * pow(i[1], m.p2);
            }
            if m.p2 > 0 {
                g[1] += m.coeff * m.p2 as f64 * pow(i[0], m.p1) * pow(i[1], m.p2 - 1);
            }
        }
        g
    }

    pub fn hessian(&self, i: [f64; 2]) -> [[f64; 2]; 2] {
        let mut h = [[0.0; 2]; 2];
        for m in &self.terms {
            let (p1, p2, c) = (m.p1, m.p2, m.coeff);
            if p1 > 1 {
                h[0][0] += c * (p1 * (p1 - 1)) as f64 * pow(i[0], p1 - 2) * pow(i[1], p2);
            }
            if p2 > 1 {
                h[1][1] += c * (p2 * (p2 - 1)) as f64 * pow(i[0], p1) * pow(i[1], p2 - 2);
            }
            if p1 > 0 && p2 > 0 {
                let v = c * (p1 * p2) as f64 * pow(i[0], p1 - 1) * pow(i[1], p2 - 1);
                h[0][1] += v;
                h[1][0] += v;
            }
        }
        h
    }

    /// Exact mixed partial derivative `d^{a1+a2} / dI1^{a1} dI2^{a2}`.
    pub fn partial(&self, a1: u32, a2: u32) -> Self {
        Self::from_terms(self.terms.iter().filter_map(|m| {
            if m.p1 < a1 || m.p2 < a2 {
                return None;
            }
            let f1 = falling(m.p1, a1);
            let f2 = falling(m.p2, a2);
            Some((m.p1 - a1, m.p2 - a2, m.coeff * f1 * f2))
        }))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_terms(self.terms.iter().map(|m| (m.p1, m.p2, m.coeff * s)))
    }

    /// Integer power by repeated multiplication.
    pub fn powu(&self, n: u32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..n {
            acc = &acc * self;
        }
        acc
    }

    /// Exact composition `p(A I + b)`; the affine map is expanded monomial by
    /// monomial, so the result is again a polynomial of the same degree.
    pub fn compose_affine(&self, a: [[f64; 2]; 2], b: [f64; 2]) -> Self {
        let x = Self::from_terms([(1, 0, a[0][0]), (0, 1, a[0][1]), (0, 0, b[0])]);
        let y = Self::from_terms([(1, 0, a[1][0]), (0, 1, a[1][1]), (0, 0, b[1])]);
        let max1 = self.terms.iter().map(|m| m.p1).max().unwrap_or(0);
        let max2 = self.terms.iter().map(|m| m.p2).max().unwrap_or(0);
        let xp: Vec<Self> = (0..=max1).map(|n| x.powu(n)).collect();
        let yp: Vec<Self> = (0..=max2).map(|n| y.powu(n)).collect();
        let mut out = Self::zero();
        for m in &self.terms {
            out = &out + &(&xp[m.p1 as usize] * &yp[m.p2 as usize]).scale(m.coeff);
        }
        out
    }

    /// Largest absolute coefficient.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|m| m.coeff.abs()).fold(0.0, f64::max)
    }

    /// Serialization helper: `[p1, p2, coeff]` triples.
    pub fn to_triples(&self) -> Vec<(u32, u32, f64)> {
        self.terms.iter().map(|m| (m.p1, m.p2, m.coeff)).collect()
    }
}

#[inline]
fn pow(x: f64, n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x.powi(n as i32),
    }
}

fn falling(p: u32, a: u32) -> f64 {
    (0..a).map(|j| (p - j) as f64).product()
}

impl Add for &PolyField {
    type Output = PolyField;
    fn add(self, rhs: &PolyField) -> PolyField {
        PolyField::from_terms(
            self.terms
                .iter()
                .chain(rhs.terms.iter())
                .map(|m| (m.p1, m.p2, m.coeff)),
        )
    }
}

impl Sub for &PolyField {
    type Output = PolyField;
    fn sub(self, rhs: &PolyField) -> PolyField {
        self + &(-rhs)
    }
}

impl Neg for &PolyField {
    type Output = PolyField;
    fn neg(self) -> PolyField {
        self.scale(-1.0)
    }
}

impl Mul for &PolyField {
    type Output = PolyField;
    fn mul(self, rhs: &PolyField) -> PolyField {
        let mut terms = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for a in &self.terms {
            for b in &rhs.terms {
                terms.push((a.p1 + b.p1, a.p2 + b.p2, a.coeff * b.coeff));
            }
        }
        PolyField::from_terms(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn moser_h() -> PolyField {
        PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)])
    }

    #[test]
    fn canonical_form_merges_and_drops_zeros() {
        let p = PolyField::from_terms([(1, 0, 1.0), (1, 0, -1.0), (0, 2, 3.0), (0, 2, 1.0)]);
        assert_eq!(p.terms().len(), 1);
        assert_eq!(p.terms()[0], Monomial { p1: 0, p2: 2, coeff: 4.0 });
    }

    #[test]
    fn gradient_and_hessian_of_moser() {
        let h = moser_h();
        assert_eq!(h.gradient([2.0, 1.0]), [2.0, -1.0]);
        assert_eq!(h.hessian([0.3, -0.7]), [[1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(h.partial(2, 0), PolyField::constant(1.0));
        assert!(h.partial(1, 1).is_zero());
    }

    #[test]
    fn affine_composition_reproduces_reduced_moser() {
        // h(I1, I2 - I1) = 1/2 (I1^2 - (I2 - I1)^2) = I1 I2 - 1/2 I2^2
        let reduced = moser_h().compose_affine([[1.0, 0.0], [-1.0, 1.0]], [0.0, 0.0]);
        assert_eq!(reduced, PolyField::from_terms([(1, 1, 1.0), (0, 2, -0.5)]));
        assert_eq!(reduced.gradient([1.0, 0.0]), [0.0, 1.0]);
    }

    #[test]
    fn product_and_power() {
        let x = PolyField::coordinate(0);
        let y = PolyField::coordinate(1);
        let s = &x + &y;
        let sq = s.powu(2);
        assert_eq!(sq, PolyField::from_terms([(2, 0, 1.0), (1, 1, 2.0), (0, 2, 1.0)]));
        assert_eq!(sq.degree(), 2);
    }

    fn arb_poly() -> impl Strategy<Value = PolyField> {
        prop::collection::vec((0u32..4, 0u32..4, -2.0f64..2.0), 1..6)
            .prop_map(PolyField::from_terms)
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(p in arb_poly(), x in -1.5f64..1.5, y in -1.5f64..1.5) {
            let h = 1e-5;
            let g = p.gradient([x, y]);
            let fd = [
                (p.eval([x + h, y]) - p.eval([x - h, y])) / (2.0 * h),
                (p.eval([x, y + h]) - p.eval([x, y - h])) / (2.0 * h),
            ];
            for c in 0..2 {
                let scale = g[c].abs().max(1.0);
                prop_assert!((g[c] - fd[c]).abs() <= 1e-6 * scale, "{} vs {}", g[c], fd[c]);
            }
            let hs = p.hessian([x, y]);
            let dx = p.partial(1, 0);
            let dy = p.partial(0, 1);
            prop_assert!((hs[0][1] - dx.gradient([x, y])[1]).abs() < 1e-12 * hs[0][1].abs().max(1.0));
            prop_assert!((hs[1][1] - dy.gradient([x, y])[1]).abs() < 1e-12 * hs[1][1].abs().max(1.0));
        }

        #[test]
        fn composition_agrees_with_pointwise_evaluation(p in arb_poly(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let a = [[1.0, 2.0], [-1.0, 3.0]];
            let b = [0.25, -0.5];
            let q = p.compose_affine(a, b);
            let u = [a[0][0] * x + a[0][1] * y + b[0], a[1][0] * x + a[1][1] * y + b[1]];
            let lhs = q.eval([x, y]);
            let rhs = p.eval(u);
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }
}
