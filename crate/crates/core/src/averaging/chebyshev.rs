//! Tensor Chebyshev least-squares fits on a rectangle of actions.

use super::Coefficient;
use nalgebra::DMatrix;

/// Chebyshev–Lobatto nodes on `[a, b]`, in increasing order.
pub fn lobatto_nodes(range: [f64; 2], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (range[0] + range[1])];
    }
    (0..n)
        .map(|j| {
            let x = -(std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
            0.5 * (range[0] + range[1]) + 0.5 * (range[1] - range[0]) * x
        })
        .collect()
}

/// Largest supported degree per axis.
pub const MAX_DEGREE: usize = 16;

/// `T_0..T_d` and their derivatives at `x ∈ [−1, 1]`.
fn cheb_basis(x: f64, d: usize) -> ([f64; MAX_DEGREE + 1], [f64; MAX_DEGREE + 1]) {
    let mut t = [0.0; MAX_DEGREE + 1];
    let mut dt = [0.0; MAX_DEGREE + 1];
    t[0] = 1.0;
    if d >= 1 {
        t[1] = x;
        dt[1] = 1.0;
    }
    for n in 1..d {
        t[n + 1] = 2.0 * x * t[n] - t[n - 1];
        dt[n + 1] = 2.0 * t[n] + 2.0 * x * dt[n] - dt[n - 1];
    }
    (t, dt)
}

/// Basis values shared by all fits on the same rectangle.
#[derive(Debug, Clone, Copy)]
pub struct ChebBasis {
    t1: [f64; MAX_DEGREE + 1],
    dt1: [f64; MAX_DEGREE + 1],
    t2: [f64; MAX_DEGREE + 1],
    dt2: [f64; MAX_DEGREE + 1],
}

/// `Σ c[i][j] T_i(x1) T_j(x2)` with `x` the affine image of the action in
/// `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebFit {
    pub i1: [f64; 2],
    pub i2: [f64; 2],
    coeffs: DMatrix<f64>,
}

impl ChebFit {
    pub fn zero() -> Self {
        Self { i1: [-1.0, 1.0], i2: [-1.0, 1.0], coeffs: DMatrix::zeros(1, 1) }
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.coeffs.nrows() - 1, self.coeffs.ncols() - 1)
    }

    fn scaled(range: [f64; 2], v: f64) -> (f64, f64) {
        let w = range[1] - range[0];
        if w == 0.0 {
            (0.0, 0.0)
        } else {
            ((2.0 * v - range[0] - range[1]) / w, 2.0 / w)
        }
    }

    pub fn eval(&self, i: [f64; 2]) -> f64 {
        self.eval_with_gradient(i).0
    }

    pub fn eval_with_gradient(&self, i: [f64; 2]) -> (f64, [f64; 2]) {
        self.value_grad(&Self::context(std::iter::once(self), i))
    }

    /// Least-squares fit of `values[a][b] ≈ f(x1[a], x2[b])` on Lobatto nodes
    /// of the given ranges, with degrees `(d1, d2)`. Returns the fit and the
    /// maximum nodal residual.
    pub fn fit(i1: [f64; 2], i2: [f64; 2], values: &DMatrix<f64>, d1: usize, d2: usize) -> (Self, f64) {
        let (d1, d2) = (d1.min(MAX_DEGREE), d2.min(MAX_DEGREE));
        let n1 = values.nrows();
        let n2 = values.ncols();
        let design = |n: usize, d: usize| {
            let nodes = lobatto_nodes([-1.0, 1.0], n);
            DMatrix::from_fn(n, d + 1, |r, c| cheb_basis(nodes[r], d).0[c])
        };
        let a1 = design(n1, d1);
        let a2 = design(n2, d2);
        let p1 = a1.clone().pseudo_inverse(1e-13).expect("pseudo-inverse of a Chebyshev design matrix");
        let p2 = a2.clone().pseudo_inverse(1e-13).expect("pseudo-inverse of a Chebyshev design matrix");
        let coeffs = &p1 * values * p2.transpose();
        let recon = &a1 * &coeffs * a2.transpose();
        let residual = (recon - values).amax();
        (Self { i1, i2, coeffs }, residual)
    }

    /// Fit with the smallest degrees (scanning `d1 ≤ max1`, `d2 ≤ max2`) whose
    /// residual is below `target`; falls back to the maximal degrees.
    pub fn fit_adaptive(
        i1: [f64; 2],
        i2: [f64; 2],
        values: &DMatrix<f64>,
        max1: usize,
        max2: usize,
        target: f64,
    ) -> (Self, f64) {
        let max1 = max1.min(values.nrows() - 1).min(MAX_DEGREE);
        let max2 = max2.min(values.ncols() - 1).min(MAX_DEGREE);
        let mut best: Option<(Self, f64)> = None;
        for d1 in 0..=max1 {
            for d2 in 0..=max2.min(d1) {
                let (fit, r) = Self::fit(i1, i2, values, d1, d2);
                if r <= target {
                    return (fit, r);
                }
                if best.as_ref().map_or(true, |b| r < b.1) {
                    best = Some((fit, r));
                }
            }
        }
        let (fit, r) = Self::fit(i1, i2, values, max1, max2);
        match best {
            Some(b) if b.1 < r => b,
            _ => (fit, r),
        }
    }
}

impl Coefficient for ChebFit {
    type Ctx = ChebBasis;

    fn context<'a>(mut fits: impl Iterator<Item = &'a Self>, i: [f64; 2]) -> ChebBasis {
        let (mut ranges, mut d1, mut d2) = (None, 0, 0);
        for f in fits.by_ref() {
            ranges.get_or_insert((f.i1, f.i2));
            let d = f.degrees();
            d1 = d1.max(d.0);
            d2 = d2.max(d.1);
        }
        let (r1, r2) = ranges.unwrap_or(([-1.0, 1.0], [-1.0, 1.0]));
        let (x1, s1) = Self::scaled(r1, i[0]);
        let (x2, s2) = Self::scaled(r2, i[1]);
        let (t1, mut dt1) = cheb_basis(x1, d1);
        let (t2, mut dt2) = cheb_basis(x2, d2);
        dt1.iter_mut().for_each(|v| *v *= s1);
        dt2.iter_mut().for_each(|v| *v *= s2);
        ChebBasis { t1, dt1, t2, dt2 }
    }

    fn value_grad(&self, b: &ChebBasis) -> (f64, [f64; 2]) {
        let (d1, d2) = self.degrees();
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for a in 0..=d1 {
            let mut row_v = 0.0;
            let mut row_d = 0.0;
            for c in 0..=d2 {
                let w = self.coeffs[(a, c)];
                row_v += w * b.t2[c];
                row_d += w * b.dt2[c];
            }
            v += b.t1[a] * row_v;
            g[0] += b.dt1[a] * row_v;
            g[1] += b.t1[a] * row_d;
        }
        (v, g)
    }

    fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }
}
