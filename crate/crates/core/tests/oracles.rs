use superchannel::catalog::lookup;
use superchannel::diffusion::moser_closed_form;
use superchannel::flow::{integrate, IntegratorConfig, Method, State};
use superchannel::phase::PhaseState;

const EPS: f64 = 0.5;
const Y0: State = [0.1, 0.3, 0.7, -0.2];
const T_END: f64 = 2.0;

/// Sup error at `T_END` with every step of length `h`.
fn fixed_step_error(method: Method, h: f64) -> f64 {
    let b = lookup("moser").unwrap().bundle(EPS).unwrap();
    // loose tolerances never reject, so the cap fixes the step
    let cfg = IntegratorConfig { method, atol: 1e6, rtol: 1e6, max_step: h, initial_step: Some(h), ..IntegratorConfig::default() };
    let orbit = integrate(&b, &PhaseState::from_lift(&Y0), (0.0, T_END), &cfg).unwrap();
    let last = orbit.last();
    assert!((last.t - T_END).abs() < 1e-12);
    let exact = moser_closed_form(EPS, &Y0, T_END);
    (0..4).map(|j| (last.state[j] - exact[j]).abs()).fold(0.0, f64::max)
}

/// Least-squares slope of `log2 error` against `log2 h` over `n` halvings.
/// The Moser flow is close to a quadrature (the phase `θ1 − θ2` advances
/// linearly), so a scheme may beat its nominal order here; only a lower
/// bound is meaningful.
fn observed_order(method: Method, h0: f64, n: usize) -> f64 {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|j| {
            let h = h0 / f64::powi(2.0, j as i32);
            (h.log2(), fixed_step_error(method, h).log2())
        })
        .collect();
    let m = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn rkf45_converges_at_least_at_fourth_order() {
    let p = observed_order(Method::Rkf45, 0.1, 4);
    assert!(p >= 3.5, "observed order {p}");
}

#[test]
fn dop853_converges_at_least_at_eighth_order() {
    // h ≥ 0.05 keeps the error above rounding
    let p = observed_order(Method::Dop853, 0.2, 3);
    assert!(p >= 7.5, "observed order {p}");
    assert!(fixed_step_error(Method::Dop853, 0.05) < 1e-9);
}

#[test]
fn adaptive_run_meets_tolerance_on_closed_form() {
    let b = lookup("moser").unwrap().bundle(EPS).unwrap();
    let cfg = IntegratorConfig::default().with_stride(0.25);
    let orbit = integrate(&b, &PhaseState::from_lift(&Y0), (0.0, 20.0), &cfg).unwrap();
    for s in &orbit.samples {
        let exact = moser_closed_form(EPS, &Y0, s.t);
        let err = (0..4).map(|j| (s.state[j] - exact[j]).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "t = {}: {err:e}", s.t);
    }
}
