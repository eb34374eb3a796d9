//! Adaptive integration of Hamiltonian vector fields on lifted states
//! `[θ1, θ2, I1, I2]`, with dense output, domain monitoring and terminal
//! events.

mod lie;
mod record;
mod tableau;

pub use lie::{lie_flow, lie_flow_lift, Generator, LieFlowOptions};
pub use record::{segment_distance, IntegrationStats, OrbitRecord, OrbitSample, Termination, CSV_HEADER};
pub use tableau::{Method, State};

use crate::error::{invalid, Error, Result};
use crate::phase::{ActionBox, PhaseState, SystemBundle};

/// A Hamiltonian vector field together with its energy function.
pub trait Field {
    fn rhs(&self, y: &State) -> State;
    fn energy(&self, y: &State) -> f64;
}

impl Field for SystemBundle {
    fn rhs(&self, y: &State) -> State {
        SystemBundle::rhs(self, y)
    }

    fn energy(&self, y: &State) -> f64 {
        self.energy_lift(y)
    }
}

/// Adapter building a [`Field`] from two closures.
pub struct FnField<F, E> {
    pub rhs: F,
    pub energy: E,
}

impl<F: Fn(&State) -> State, E: Fn(&State) -> f64> Field for FnField<F, E> {
    fn rhs(&self, y: &State) -> State {
        (self.rhs)(y)
    }

    fn energy(&self, y: &State) -> f64 {
        (self.energy)(y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub atol: f64,
    pub rtol: f64,
    pub max_step: f64,
    /// Dense-output spacing; `0` records every accepted step.
    pub stride: f64,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Dop853,
            atol: 1e-10,
            rtol: 1e-10,
            max_step: f64::INFINITY,
            stride: 0.0,
            initial_step: None,
            max_steps: 50_000_000,
        }
    }
}

impl IntegratorConfig {
    /// Tight settings for short generator flows of size `O(ε)`.
    pub fn lie() -> Self {
        Self { atol: 1e-15, rtol: 1e-14, initial_step: Some(1.0), ..Self::default() }
    }

    pub fn with_order(mut self, order: u32) -> Result<Self> {
        self.method = Method::from_order(order).ok_or_else(|| invalid("order", format!("{order} is not 4 or 8")))?;
        Ok(self)
    }

    pub fn with_tolerances(mut self, atol: f64, rtol: f64) -> Self {
        self.atol = atol;
        self.rtol = rtol;
        self
    }

    pub fn with_stride(mut self, stride: f64) -> Self {
        self.stride = stride;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.atol > 0.0 && self.rtol > 0.0) {
            return Err(invalid("tolerance", "absolute and relative tolerances must be positive"));
        }
        if !(self.max_step > 0.0) || !(self.stride >= 0.0) || !self.stride.is_finite() {
            return Err(invalid("step", "max step must be positive and stride non-negative"));
        }
        Ok(())
    }
}

/// Optional monitors for [`integrate_lift`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Declared action domain; leaving it ends the run with a flagged record.
    pub domain: Option<ActionBox>,
    /// Channel segment used for the distance diagnostic.
    pub channel: Option<[[f64; 2]; 2]>,
    /// Terminal event: the run stops where `g` first crosses from negative to
    /// non-negative.
    pub event: Option<&'a dyn Fn(&State) -> f64>,
}

/// Integrates `field` from `z0` over `tspan` and records the orbit.
pub fn integrate<F: Field>(field: &F, z0: &PhaseState, tspan: (f64, f64), config: &IntegratorConfig) -> Result<OrbitRecord> {
    integrate_lift(field, z0.to_lift(), tspan, config, &RunOptions::default())
}

fn inside(domain: &Option<ActionBox>, y: &State) -> bool {
    domain.map_or(true, |b| b.contains([y[2], y[3]]))
}

fn initial_step<G: Fn(&State) -> State>(rhs: &G, y: &State, k1: &State, cfg: &IntegratorConfig, span: f64) -> f64 {
    let sc: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let nrm = |v: &State| (v.iter().zip(&sc).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / 4.0).sqrt();
    let d0 = nrm(y);
    let d1 = nrm(k1);
    let mut h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span).min(cfg.max_step);
    let mut y1 = *y;
    for i in 0..4 {
        y1[i] += h0 * k1[i];
    }
    let k2 = rhs(&y1);
    let mut diff = [0.0; 4];
    for i in 0..4 {
        diff[i] = k2[i] - k1[i];
    }
    let d2 = nrm(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (cfg.method.order() as f64 + 1.0))
    };
    (100.0 * h0).min(h1).min(span).min(cfg.max_step)
}

/// Bisection on the sub-step size `s ∈ (0, h]` for the first point where
/// `bad` holds, starting from the accepted step origin.
fn locate<G: Fn(&State) -> State>(
    cfg: &IntegratorConfig,
    rhs: &G,
    y: &State,
    k1: &State,
    h: f64,
    bad: impl Fn(&State) -> bool,
) -> (f64, State) {
    let (mut lo, mut hi) = (0.0, h);
    let mut y_hi = tableau::step(cfg.method, rhs, y, k1, h, cfg.atol, cfg.rtol).0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let ym = tableau::step(cfg.method, rhs, y, k1, mid, cfg.atol, cfg.rtol).0;
        if bad(&ym) {
            hi = mid;
            y_hi = ym;
        } else {
            lo = mid;
        }
    }
    (hi, y_hi)
}

/// Integrates a lifted state and records dense samples.
pub fn integrate_lift<F: Field>(
    field: &F,
    y0: State,
    tspan: (f64, f64),
    cfg: &IntegratorConfig,
    opts: &RunOptions<'_>,
) -> Result<OrbitRecord> {
    cfg.validate()?;
    let (t0, t1) = tspan;
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(invalid("tspan", "time span must be finite"));
    }
    let evals = std::cell::Cell::new(0usize);
    let rhs = |y: &State| {
        evals.set(evals.get() + 1);
        field.rhs(y)
    };
    let mut rec = OrbitRecord::new(opts.channel);
    rec.push(t0, y0, field.energy(&y0));
    if !inside(&opts.domain, &y0) {
        rec.termination = Termination::DomainExit;
        return Ok(rec);
    }
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let span = (t1 - t0).abs();
    if span == 0.0 {
        return Ok(rec);
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut h = cfg.initial_step.unwrap_or_else(|| initial_step(&rhs, &y, &k1, cfg, span)).abs();
    let mut n_sample = 1u64;
    let mut steps = 0usize;
    let expo = cfg.method.controller_exponent();
    let min_step = 1e-14 * t0.abs().max(t1.abs()).max(1.0);
    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 0.0 {
            break;
        }
        let last = h >= remaining;
        let hs = if last { remaining } else { h.min(cfg.max_step) };
        let (y_new, err) = tableau::step(cfg.method, &rhs, &y, &k1, dir * hs, cfg.atol, cfg.rtol);
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        let fac = if err == 0.0 { 1.0 / 6.0 } else { (err.powf(expo) / 0.9).clamp(1.0 / 6.0, 3.0) };
        let finite = y_new.iter().all(|v| v.is_finite()) && err.is_finite();
        if !finite || err > 1.0 {
            rec.stats.rejected += 1;
            h = if finite { hs / fac.max(1.0) } else { 0.25 * hs };
            if h < min_step {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }
        rec.stats.accepted += 1;
        let t_new = if last { t1 } else { t + dir * hs };
        // dense samples strictly inside (t, t_new)
        if cfg.stride > 0.0 {
            loop {
                let ts = t0 + dir * cfg.stride * n_sample as f64;
                if dir * (ts - t_new) >= 0.0 || dir * (t1 - ts) <= 0.0 {
                    break;
                }
                let ys = tableau::step(cfg.method, &rhs, &y, &k1, ts - t, cfg.atol, cfg.rtol).0;
                rec.push(ts, ys, field.energy(&ys));
                n_sample += 1;
            }
        }
        if !inside(&opts.domain, &y_new) {
            let (s, ye) = locate(cfg, &rhs, &y, &k1, dir * hs, |z| !inside(&opts.domain, z));
            rec.push(t + s, ye, field.energy(&ye));
            rec.termination = Termination::DomainExit;
            break;
        }
        if let Some(g) = opts.event {
            if g(&y) < 0.0 && g(&y_new) >= 0.0 {
                let (s, ye) = locate(cfg, &rhs, &y, &k1, dir * hs, |z| g(z) >= 0.0);
                rec.push(t + s, ye, field.energy(&ye));
                rec.termination = Termination::Event;
                break;
            }
        }
        t = t_new;
        y = y_new;
        k1 = rhs(&y);
        if cfg.stride == 0.0 || last {
            rec.push(t, y, field.energy(&y));
        }
        if last {
            break;
        }
        h = hs / fac;
        if h < min_step {
            return Err(Error::StepUnderflow { t, h });
        }
    }
    rec.stats.evaluations = evals.get();
    Ok(rec)
}

/// End state of the flow over `[0, t]`, or [`Error::FlowEscape`] if the
/// actions leave `window` at an accepted step.
pub fn propagate<F: Fn(&State) -> State>(
    rhs: &F,
    y0: State,
    t: f64,
    cfg: &IntegratorConfig,
    window: Option<&ActionBox>,
) -> Result<State> {
    if t == 0.0 {
        return Ok(y0);
    }
    let dir = t.signum();
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut h = cfg.initial_step.unwrap_or(t.abs()).min(t.abs());
    let mut done = 0.0;
    let expo = cfg.method.controller_exponent();
    let mut steps = 0usize;
    while done < t.abs() {
        let remaining = t.abs() - done;
        let last = h >= remaining;
        let hs = if last { remaining } else { h.min(cfg.max_step) };
        let (y_new, err) = tableau::step(cfg.method, rhs, &y, &k1, dir * hs, cfg.atol, cfg.rtol);
        steps += 1;
        if steps > cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        let fac = if err == 0.0 { 1.0 / 6.0 } else { (err.powf(expo) / 0.9).clamp(1.0 / 6.0, 3.0) };
        if !(err <= 1.0) || y_new.iter().any(|v| !v.is_finite()) {
            h = if err.is_finite() { hs / fac.max(1.0) } else { 0.25 * hs };
            if h < 1e-14 * t.abs() {
                return Err(Error::StepUnderflow { t: dir * done, h });
            }
            continue;
        }
        if let Some(w) = window {
            if !w.contains([y_new[2], y_new[3]]) {
                return Err(Error::FlowEscape { t: dir * (done + hs), i1: y_new[2], i2: y_new[3] });
            }
        }
        done = if last { t.abs() } else { done + hs };
        y = y_new;
        k1 = rhs(&y);
        h = hs / fac;
    }
    Ok(y)
}

/// `‖JᵀΩJ − Ω‖∞` for the central-difference Jacobian `J` of `map` at `z`,
/// where `Ω = [[0, 1], [−1, 0]]` in `(θ, I)` blocks. The map must return a
/// continuous lift (no angle wrapping).
pub fn symplecticity_defect(map: &dyn Fn(&State) -> State, z: &State, h: f64) -> f64 {
    let mut jac = [[0.0; 4]; 4];
    for c in 0..4 {
        let mut up = *z;
        let mut dn = *z;
        up[c] += h;
        dn[c] -= h;
        let fu = map(&up);
        let fd = map(&dn);
        for r in 0..4 {
            jac[r][c] = (fu[r] - fd[r]) / (2.0 * h);
        }
    }
    symplectic_residual(&jac)
}

/// `‖JᵀΩJ − Ω‖∞` (max-row-sum norm) for a given 4×4 matrix.
pub fn symplectic_residual(jac: &[[f64; 4]; 4]) -> f64 {
    let omega = |r: usize, c: usize| -> f64 {
        match (r, c) {
            (0, 2) | (1, 3) => 1.0,
            (2, 0) | (3, 1) => -1.0,
            _ => 0.0,
        }
    };
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        let mut row = 0.0;
        for c in 0..4 {
            let mut s = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    s += jac[a][r] * omega(a, b) * jac[b][c];
                }
            }
            row += (s - omega(r, c)).abs();
        }
        worst = worst.max(row);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::{FourierPerturbation, IntegrableSystem, PolyField, ResonanceData};
    use std::f64::consts::TAU;

    fn moser(eps: f64) -> SystemBundle {
        let h = PolyField::from_terms([(2, 0, 0.5), (0, 2, -0.5)]);
        let res =
            ResonanceData::new([1, 1], 0.0, [[0.25, -0.25], [1.75, -1.75]], [[0.5, -0.5], [1.5, -1.5]], 0.5).unwrap();
        let f = FourierPerturbation::trig(&[([1, -1], 0.0, 1.0 / TAU)]);
        SystemBundle::new(IntegrableSystem::new(h, 4.0, res).unwrap(), f, eps).unwrap()
    }

    #[test]
    fn integrable_flow_is_linear_and_actions_are_frozen() {
        let b = moser(0.0);
        let cfg = IntegratorConfig::default().with_stride(0.5);
        let rec = integrate(&b, &PhaseState::new([0.1, 0.7], [2.0, 1.0]), (0.0, 10.0), &cfg).unwrap();
        for s in &rec.samples {
            assert_eq!(s.state[2].to_bits(), 2.0f64.to_bits());
            assert_eq!(s.state[3].to_bits(), 1.0f64.to_bits());
            let p = s.phase_state();
            let expect = PhaseState::new([0.1 + 2.0 * s.t, 0.7 - s.t], [2.0, 1.0]);
            assert!(p.distance(&expect) < 1e-9);
        }
        assert_eq!(rec.last().t, 10.0);
        assert_eq!(rec.samples.len(), 21);
    }

    #[test]
    fn moser_unstable_solution() {
        let b = moser(1e-3);
        let rec = integrate(&b, &PhaseState::new([0.0, 0.0], [0.0, 0.0]), (0.0, 10.0), &IntegratorConfig::default()).unwrap();
        let z = rec.last().phase_state();
        assert!((z.actions.i1() + 0.01).abs() < 1e-8 && (z.actions.i2() - 0.01).abs() < 1e-8);
        assert!(z.angles.distance(&crate::phase::AnglePair::new(0.95, 0.95)) < 1e-8);
    }

    #[test]
    fn energy_is_conserved_over_long_runs() {
        let b = moser(1e-3);
        let cfg = IntegratorConfig::default().with_stride(10.0);
        let rec = integrate(&b, &PhaseState::new([0.3, 0.1], [1.0, -1.0]), (0.0, 1000.0), &cfg).unwrap();
        assert!(rec.energy_drift() <= 1e-8, "drift {}", rec.energy_drift());
        let t: Vec<f64> = rec.samples.iter().map(|s| s.t).collect();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn forward_then_backward_returns() {
        let b = moser(1e-2);
        let cfg = IntegratorConfig::default();
        let z0 = [0.2, 0.4, 1.0, -0.9];
        let fwd = integrate_lift(&b, z0, (0.0, 50.0), &cfg, &RunOptions::default()).unwrap();
        let back = integrate_lift(&b, fwd.last().state, (50.0, 0.0), &cfg, &RunOptions::default()).unwrap();
        let d = crate::phase::lift_distance(&back.last().state, &z0);
        assert!(d < 1e-8, "{d}");
    }

    #[test]
    fn domain_exit_is_flagged_at_the_boundary() {
        let b = moser(1e-2);
        let opts = RunOptions { domain: Some(ActionBox::new([-0.05, 1.0], [-1.0, 1.0])), ..Default::default() };
        let rec = integrate_lift(&b, [0.0; 4], (0.0, 100.0), &IntegratorConfig::default(), &opts).unwrap();
        assert!(rec.flagged());
        let last = rec.last();
        assert!((last.state[2] + 0.05).abs() < 1e-9);
        assert!((last.t - 5.0).abs() < 1e-6);
    }

    #[test]
    fn terminal_event_is_located() {
        let b = moser(1e-2);
        let g = |y: &State| y[3] - 0.03;
        let opts = RunOptions { event: Some(&g), ..Default::default() };
        let rec = integrate_lift(&b, [0.0; 4], (0.0, 100.0), &IntegratorConfig::default(), &opts).unwrap();
        assert_eq!(rec.termination, Termination::Event);
        assert!((rec.last().t - 3.0).abs() < 1e-9);
    }

    #[test]
    fn linear_symplectic_maps_have_no_defect() {
        let id = |y: &State| *y;
        assert!(symplecticity_defect(&id, &[0.1, 0.2, 0.3, 0.4], 1e-4) < 1e-12);
        // (θ, I) ↦ (Mθ, ᵗM⁻¹ I) with M = [[1, 1], [0, 1]]
        let phi = |y: &State| [y[0] + y[1], y[1], y[2], y[3] - y[2]];
        assert!(symplecticity_defect(&phi, &[0.1, 0.2, 0.3, 0.4], 1e-3) < 1e-12);
        let bad = |y: &State| [2.0 * y[0], y[1], y[2], y[3]];
        assert!(symplecticity_defect(&bad, &[0.0; 4], 1e-3) > 0.5);
    }

    #[test]
    fn integrator_config_validation() {
        assert!(IntegratorConfig::default().with_order(6).is_err());
        assert_eq!(IntegratorConfig::default().with_order(4).unwrap().method, Method::Rkf45);
        let bad = IntegratorConfig::default().with_tolerances(0.0, 1e-9);
        assert!(integrate(&moser(0.0), &PhaseState::new([0.0; 2], [0.0; 2]), (0.0, 1.0), &bad).is_err());
    }
}
