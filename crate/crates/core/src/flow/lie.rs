use super::{propagate, IntegratorConfig, State};
use crate::error::{Error, Result};
use crate::phase::{lift_distance, ActionBox, FourierPerturbation, PhaseState};

/// A scalar function on `𝕋² × ℝ²` with its gradient, used as a Hamiltonian
/// for time-`t` maps.
pub trait Generator {
    /// `(value, ∂θ, ∂I)` at `(θ, I)`.
    fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]);
}

impl Generator for FourierPerturbation {
    fn eval_with_gradient(&self, theta: [f64; 2], action: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
        FourierPerturbation::eval_with_gradient(self, theta, action)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LieFlowOptions {
    /// Action window the flow must not leave.
    pub window: Option<ActionBox>,
    /// Upper bound on `|X^t(z) − z|` (angles measured on the torus).
    pub displacement_bound: Option<f64>,
}

/// Time-`t` map of the Hamiltonian `scale · χ` on a lifted state.
pub fn lie_flow_lift<G: Generator + ?Sized>(
    chi: &G,
    scale: f64,
    t: f64,
    y: &State,
    cfg: &IntegratorConfig,
    window: Option<&ActionBox>,
) -> Result<State> {
    if scale == 0.0 || t == 0.0 {
        return Ok(*y);
    }
    let rhs = |z: &State| {
        let (_, dt, di) = chi.eval_with_gradient([z[0], z[1]], [z[2], z[3]]);
        [scale * di[0], scale * di[1], -scale * dt[0], -scale * dt[1]]
    };
    propagate(&rhs, *y, t, cfg, window)
}

/// Time-`t` map of `scale · χ`, with optional window and displacement checks.
pub fn lie_flow<G: Generator + ?Sized>(
    chi: &G,
    scale: f64,
    t: f64,
    z: &PhaseState,
    cfg: &IntegratorConfig,
    opts: &LieFlowOptions,
) -> Result<PhaseState> {
    let y0 = z.to_lift();
    let y1 = lie_flow_lift(chi, scale, t, &y0, cfg, opts.window.as_ref())?;
    if let Some(bound) = opts.displacement_bound {
        let d = lift_distance(&y0, &y1);
        if d > bound {
            return Err(Error::DisplacementExceeded { displacement: d, bound });
        }
    }
    Ok(PhaseState::from_lift(&y1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    /// `sin(2πθ2) / (2π (I1 − I2))`
    struct Single;

    impl Generator for Single {
        fn eval_with_gradient(&self, th: [f64; 2], i: [f64; 2]) -> (f64, [f64; 2], [f64; 2]) {
            let d = TAU * (i[0] - i[1]);
            let (s, c) = (TAU * th[1]).sin_cos();
            let v = s / d;
            (v, [0.0, TAU * c / d], [-TAU * s / (d * d), TAU * s / (d * d)])
        }
    }

    #[test]
    fn zero_generator_is_identity() {
        let z = PhaseState::new([0.3, 0.6], [1.0, 0.2]);
        let out = lie_flow(&FourierPerturbation::zero(), 1e-3, 1.0, &z, &IntegratorConfig::lie(), &LieFlowOptions::default());
        assert_eq!(out.unwrap(), z);
    }

    #[test]
    fn forward_backward_single_mode() {
        let cfg = IntegratorConfig::lie();
        for &(t1, t2, i1, i2) in &[(0.1, 0.2, 1.0, 0.0), (0.7, 0.95, 1.4, 0.1), (0.5, 0.33, 0.8, -0.2)] {
            let z = PhaseState::new([t1, t2], [i1, i2]);
            let y = lie_flow(&Single, 1e-3, 1.0, &z, &cfg, &LieFlowOptions::default()).unwrap();
            let back = lie_flow(&Single, 1e-3, -1.0, &y, &cfg, &LieFlowOptions::default()).unwrap();
            assert!(back.distance(&z) < 1e-10);
            assert!(y.distance(&z) > 1e-5);
        }
    }

    #[test]
    fn displacement_and_window_guards() {
        let z = PhaseState::new([0.1, 0.25], [1.0, 0.0]);
        let cfg = IntegratorConfig::lie();
        let tight = LieFlowOptions { displacement_bound: Some(1e-9), ..Default::default() };
        assert!(matches!(lie_flow(&Single, 1e-3, 1.0, &z, &cfg, &tight), Err(Error::DisplacementExceeded { .. })));
        let boxed = LieFlowOptions { window: Some(ActionBox::new([0.9, 1.1], [-1e-6, 1e-6])), ..Default::default() };
        let z = PhaseState::new([0.1, 0.1], [1.0, 0.0]);
        assert!(matches!(lie_flow(&Single, 1e-2, 1.0, &z, &cfg, &boxed), Err(Error::FlowEscape { .. })));
    }
}
