//! Drift, connecting-orbit and ε-sweep experiments on the full Hamiltonian.

use crate::averaging::{average_over_theta2, GenericityReport};
use crate::error::{invalid, Error, Result};
use crate::flow::{integrate_lift, IntegratorConfig, OrbitRecord, RunOptions, State, Termination};
use crate::phase::{wrap_unit, ActionBox, PhaseState, SystemBundle};
use std::f64::consts::TAU;
use std::io::{self, Write};

/// Slack on the optimal upper bound `drift ≤ δ`.
pub const UPPER_TOL: f64 = 1e-6;

/// Orbit of the saddle with `f = sin(2π(θ1 − θ2))/2π` from the origin:
/// `I(t) = (−εt, εt)`, `θ(t) = −½(εt², εt²)` (angles wrapped).
pub fn exact_moser_orbit(epsilon: f64, t: f64) -> PhaseState {
    let th = -0.5 * epsilon * t * t;
    PhaseState::new([wrap_unit(th), wrap_unit(th)], [-epsilon * t, epsilon * t])
}

/// Closed-form solution of the same system from an arbitrary lifted state.
/// `φ = θ1 − θ2` rotates with the conserved rate `s = I1 + I2`.
pub fn moser_closed_form(epsilon: f64, y0: &State, t: f64) -> State {
    let [t1, t2, i1, i2] = *y0;
    let s = i1 + i2;
    let phi0 = t1 - t2;
    let (sin0, cos0) = (TAU * phi0).sin_cos();
    // ∫₀ᵗ cos(2π(φ0 + s u)) du and its primitive ∫₀ᵗ∫₀ᵘ
    let (c1, c2) = if (TAU * s * t).abs() < 1e-4 {
        // series in s to avoid cancellation
        let a = TAU * s;
        let c1 = cos0 * (t - a * a * t.powi(3) / 6.0) - sin0 * (a * t * t / 2.0 - a.powi(3) * t.powi(4) / 24.0);
        let c2 = cos0 * (t * t / 2.0 - a * a * t.powi(4) / 24.0) - sin0 * (a * t.powi(3) / 6.0 - a.powi(3) * t.powi(5) / 120.0);
        (c1, c2)
    } else {
        let a = TAU * s;
        let (sn, cs) = (TAU * phi0 + a * t).sin_cos();
        let c1 = (sn - sin0) / a;
        let c2 = (cos0 - cs) / (a * a) - t * sin0 / a;
        (c1, c2)
    };
    let i1t = i1 - epsilon * c1;
    let th1 = t1 + i1 * t - epsilon * c2;
    let phi = phi0 + s * t;
    [th1, th1 - phi, i1t, s - i1t]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub epsilon: f64,
    /// `ε τ`: the `δ` of the time scale `τ = δ/ε` (the configured `δ` for
    /// drift runs, `2ρ/λ` for connecting runs).
    pub delta: f64,
    pub tau: f64,
    /// `±1`: direction of integration.
    pub time_sign: f64,
    pub initial: PhaseState,
    pub final_state: PhaseState,
    pub drift: f64,
    pub max_abs_i2: f64,
    /// `max d(I1(t), S1*)`.
    pub max_core_distance: f64,
    /// Confinement constant `max|I2| / ε`.
    pub c_fit: f64,
    /// `drift / δ²`.
    pub drift_constant: f64,
    pub lambda: f64,
    pub theta_star: f64,
    pub i_star: [f64; 2],
    /// Sup-norm distance from `I(τ)` to the target `(I1″, 0)`.
    pub terminal_distance: Option<f64>,
    pub pass_upper: bool,
    pub pass_lower: bool,
    pub flagged: bool,
    pub orbit: OrbitRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOptions {
    /// Overrides the `δ` rule of drift runs.
    pub delta: Option<f64>,
    pub theta2: f64,
    /// Constant `C` of the `δ` rule and of the lower bound `drift ≥ Cδ²`.
    pub c_cfg: f64,
    /// Half-width of the action neighbourhood `S*(margin)` the orbit must not
    /// leave.
    pub channel_margin: f64,
    pub integrator: IntegratorConfig,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self { delta: None, theta2: 0.0, c_cfg: 1.0, channel_margin: 0.05, integrator: IntegratorConfig::default() }
    }
}

fn require_reduced(bundle: &SystemBundle) -> Result<()> {
    if bundle.integrable.resonance.is_reduced() {
        Ok(())
    } else {
        Err(Error::ChannelAssumption("experiments run in reduced coordinates".into()))
    }
}

fn require_generic(g: &GenericityReport) -> Result<()> {
    if g.pass {
        Ok(())
    } else {
        Err(Error::NotGeneric(g.max_derivative))
    }
}

fn interval_distance(x: f64, iv: [f64; 2]) -> f64 {
    (iv[0] - x).max(x - iv[1]).max(0.0)
}

struct Run {
    orbit: OrbitRecord,
    max_abs_i2: f64,
    max_core_distance: f64,
}

fn run(bundle: &SystemBundle, y0: State, t_end: f64, opts: &ExperimentOptions, event: Option<&dyn Fn(&State) -> f64>) -> Result<Run> {
    let res = &bundle.integrable.resonance;
    let core = res.core_interval();
    let run_opts = RunOptions {
        domain: Some(ActionBox::channel(core, opts.channel_margin)),
        channel: Some([[core[0], 0.0], [core[1], 0.0]]),
        event,
    };
    let orbit = integrate_lift(bundle, y0, (0.0, t_end), &opts.integrator, &run_opts)?;
    let max_core_distance = orbit.samples.iter().map(|s| interval_distance(s.state[2], core)).fold(0.0, f64::max);
    Ok(Run { max_abs_i2: orbit.max_abs_i2(), max_core_distance, orbit })
}

fn confinement(max_abs_i2: f64, epsilon: f64) -> f64 {
    if epsilon > 0.0 {
        max_abs_i2 / epsilon
    } else {
        0.0
    }
}

/// Integrates `H` from `(θ1*, θ2(0), I*)` for `τ = δ/ε` with
/// `δ = min(λ/4C, δ*)` unless overridden. At `ε = 0` the run lasts `δ` time
/// units.
pub fn run_drift_experiment(bundle: &SystemBundle, genericity: &GenericityReport, opts: &ExperimentOptions) -> Result<ExperimentRecord> {
    require_reduced(bundle)?;
    require_generic(genericity)?;
    if !(opts.c_cfg > 0.0) {
        return Err(invalid("c_cfg", "must be positive"));
    }
    let delta = match opts.delta {
        Some(d) if d > 0.0 && d.is_finite() => d,
        Some(d) => return Err(invalid("delta", format!("must be positive, got {d}"))),
        None => (genericity.lambda / (4.0 * opts.c_cfg)).min(genericity.delta_star),
    };
    let eps = bundle.epsilon();
    let tau = if eps > 0.0 { delta / eps } else { delta };
    let y0 = [genericity.theta_star, opts.theta2, genericity.i_star[0], genericity.i_star[1]];
    let r = run(bundle, y0, tau, opts, None)?;
    let last = *r.orbit.last();
    let drift = (last.state[2] - y0[2]).abs();
    let flagged = r.orbit.termination != Termination::Completed;
    Ok(ExperimentRecord {
        epsilon: eps,
        delta,
        tau: last.t,
        time_sign: 1.0,
        initial: PhaseState::from_lift(&y0),
        final_state: last.phase_state(),
        drift,
        max_abs_i2: r.max_abs_i2,
        max_core_distance: r.max_core_distance,
        c_fit: confinement(r.max_abs_i2, eps),
        drift_constant: drift / (delta * delta),
        lambda: genericity.lambda,
        theta_star: genericity.theta_star,
        i_star: genericity.i_star,
        terminal_distance: None,
        pass_upper: drift <= delta + UPPER_TOL,
        pass_lower: !flagged && drift >= opts.c_cfg * delta * delta,
        flagged,
        orbit: r.orbit,
    })
}

/// Drift runs for `n` equispaced values of `θ2(0)`.
pub fn drift_theta2_scan(bundle: &SystemBundle, genericity: &GenericityReport, opts: &ExperimentOptions, n: usize) -> Result<Vec<ExperimentRecord>> {
    (0..n)
        .map(|j| {
            let o = ExperimentOptions { theta2: j as f64 / n as f64, ..opts.clone() };
            run_drift_experiment(bundle, genericity, &o)
        })
        .collect()
}

/// Moves `I1` from `from` to `to` along the channel: starts at
/// `(θ1*, θ2(0), (from, 0))`, runs in the time direction in which the averaged
/// drift points at `to`, and stops when `|I1 − from| ≥ ρ` or after
/// `δ/ε = 2ρ/(λε)`.
pub fn run_connecting_experiment(
    bundle: &SystemBundle,
    genericity: &GenericityReport,
    from: f64,
    to: f64,
    opts: &ExperimentOptions,
) -> Result<ExperimentRecord> {
    require_reduced(bundle)?;
    require_generic(genericity)?;
    if !bundle.perturbation.is_action_independent() {
        return Err(Error::ActionDependent);
    }
    let core = bundle.integrable.resonance.core_interval();
    for (name, v) in [("from", from), ("to", to)] {
        if !(core[0]..=core[1]).contains(&v) {
            return Err(invalid(name, format!("{v} lies outside S1* = {core:?}")));
        }
    }
    let eps = bundle.epsilon();
    if !(eps > 0.0) {
        return Err(invalid("epsilon", "connecting runs need ε > 0"));
    }
    let rho = (to - from).abs();
    let delta = 2.0 * rho / genericity.lambda;
    let slope = average_over_theta2(&bundle.perturbation)
        .partial([1, 0], [0, 0])
        .eval([genericity.theta_star, 0.0], genericity.i_star);
    // forward time moves I1 at rate −ε ∂θ1 f̄
    let time_sign = if -slope * (to - from) >= 0.0 { 1.0 } else { -1.0 };
    let y0 = [genericity.theta_star, opts.theta2, from, 0.0];
    let base = |r: Run, tau: f64, flagged: bool, last: State| ExperimentRecord {
        epsilon: eps,
        delta,
        tau,
        time_sign,
        initial: PhaseState::from_lift(&y0),
        final_state: PhaseState::from_lift(&last),
        drift: (last[2] - from).abs(),
        max_abs_i2: r.max_abs_i2,
        max_core_distance: r.max_core_distance,
        c_fit: confinement(r.max_abs_i2, eps),
        drift_constant: if delta > 0.0 { (last[2] - from).abs() / (delta * delta) } else { 0.0 },
        lambda: genericity.lambda,
        theta_star: genericity.theta_star,
        i_star: genericity.i_star,
        terminal_distance: Some((last[2] - to).abs().max(last[3].abs())),
        pass_upper: tau <= delta / eps * (1.0 + 1e-12),
        pass_lower: !flagged,
        flagged,
        orbit: r.orbit,
    };
    if rho == 0.0 {
        let mut orbit = OrbitRecord::new(Some([[core[0], 0.0], [core[1], 0.0]]));
        orbit.push(0.0, y0, bundle.energy_lift(&y0));
        orbit.termination = Termination::Event;
        let r = Run { orbit, max_abs_i2: 0.0, max_core_distance: 0.0 };
        return Ok(base(r, 0.0, false, y0));
    }
    let event = move |y: &State| (y[2] - from).abs() - rho;
    let r = run(bundle, y0, time_sign * delta / eps, opts, Some(&event))?;
    let last = *r.orbit.last();
    let flagged = r.orbit.termination != Termination::Event;
    Ok(base(r, last.t.abs(), flagged, last.state))
}

/// `drift ≤ δ · |f|_{C¹}` up to [`UPPER_TOL`].
pub fn optimality_check(record: &ExperimentRecord, f_c1_norm: f64) -> bool {
    record.drift <= record.delta * f_c1_norm + UPPER_TOL
}

/// Least-squares fit `τ = A ε^{−p}` on log–log axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerFit {
    pub p: f64,
    pub a: f64,
    pub r_squared: f64,
}

pub fn fit_power_law(eps: &[f64], tau: &[f64]) -> Result<PowerFit> {
    if eps.len() != tau.len() || eps.len() < 2 {
        return Err(invalid("fit", "need at least two (ε, τ) pairs"));
    }
    if eps.iter().chain(tau).any(|v| !(*v > 0.0)) {
        return Err(invalid("fit", "ε and τ must be positive"));
    }
    let x: Vec<f64> = eps.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = tau.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit", "ε values must not all coincide"));
    }
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(PowerFit { p: -slope, a: icept.exp(), r_squared })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub target_drift: f64,
    pub records: Vec<ExperimentRecord>,
    pub fit: PowerFit,
    /// `max c_fit / min c_fit` over the records.
    pub confinement_ratio: f64,
    pub flagged: bool,
}

/// For each `ε`, the time `τ_Δ` needed to drift by `Δ` from `I*`, capped at
/// `4Δ/(λε)`; runs go to one worker thread each.
pub fn sweep_epsilon(
    bundle: &SystemBundle,
    genericity: &GenericityReport,
    epsilons: &[f64],
    target: f64,
    opts: &ExperimentOptions,
) -> Result<SweepResult> {
    require_reduced(bundle)?;
    require_generic(genericity)?;
    if epsilons.len() < 3 {
        return Err(invalid("epsilons", "a sweep needs at least three values"));
    }
    let lo = epsilons.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = epsilons.iter().cloned().fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < 10.0 * (1.0 - 1e-12) {
        return Err(invalid("epsilons", "values must be positive and span at least one decade"));
    }
    if !(target > 0.0 && target <= genericity.delta_star) {
        return Err(invalid("target_drift", format!("must lie in (0, δ*] = (0, {}]", genericity.delta_star)));
    }
    let results: Vec<Result<ExperimentRecord>> = std::thread::scope(|s| {
        let handles: Vec<_> = epsilons
            .iter()
            .map(|&eps| s.spawn(move || sweep_one(bundle, genericity, eps, target, opts)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let flagged = records.iter().any(|r| r.flagged);
    let e: Vec<f64> = records.iter().map(|r| r.epsilon).collect();
    let t: Vec<f64> = records.iter().map(|r| r.tau).collect();
    let fit = fit_power_law(&e, &t)?;
    let cmax = records.iter().map(|r| r.c_fit).fold(0.0, f64::max);
    let cmin = records.iter().map(|r| r.c_fit).fold(f64::INFINITY, f64::min);
    let confinement_ratio = if cmax == 0.0 { 1.0 } else { cmax / cmin };
    Ok(SweepResult { target_drift: target, records, fit, confinement_ratio, flagged })
}

fn sweep_one(bundle: &SystemBundle, g: &GenericityReport, eps: f64, target: f64, opts: &ExperimentOptions) -> Result<ExperimentRecord> {
    let b = bundle.with_epsilon(eps)?;
    let y0 = [g.theta_star, opts.theta2, g.i_star[0], g.i_star[1]];
    let t_max = 4.0 * target / (g.lambda * eps);
    let start = y0[2];
    let event = move |y: &State| (y[2] - start).abs() - target;
    let r = run(&b, y0, t_max, opts, Some(&event))?;
    let last = *r.orbit.last();
    let flagged = r.orbit.termination != Termination::Event;
    let tau = last.t;
    let delta = eps * tau;
    let drift = (last.state[2] - start).abs();
    Ok(ExperimentRecord {
        epsilon: eps,
        delta,
        tau,
        time_sign: 1.0,
        initial: PhaseState::from_lift(&y0),
        final_state: last.phase_state(),
        drift,
        max_abs_i2: r.max_abs_i2,
        max_core_distance: r.max_core_distance,
        c_fit: confinement(r.max_abs_i2, eps),
        drift_constant: drift / (delta * delta),
        lambda: g.lambda,
        theta_star: g.theta_star,
        i_star: g.i_star,
        terminal_distance: None,
        pass_upper: drift <= delta + UPPER_TOL,
        pass_lower: !flagged && drift >= opts.c_cfg * delta * delta,
        flagged,
        orbit: r.orbit,
    })
}

pub const SWEEP_CSV_HEADER: &str = "epsilon,delta,tau,drift,maxI2,c_fit,pass_upper,pass_lower";

pub fn write_sweep_csv<W: Write>(records: &[ExperimentRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{SWEEP_CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
            r.epsilon, r.delta, r.tau, r.drift, r.max_abs_i2, r.c_fit, r.pass_upper, r.pass_lower
        )?;
    }
    Ok(())
}
