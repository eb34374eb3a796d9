//! Subcommand implementations.

use crate::config::{load_system, Params, RunConfig};
use crate::output::RunDir;
use crate::plots::emit_plots;
use crate::{CliError, Command, Numerics, Status, SystemArg};
use serde::Serialize;
use superchannel::averaging::{
    genericity_check, one_step_normal_form, two_step_normal_form, GenericityGrid, GenericityReport, NormalFormConfig,
};
use superchannel::catalog::{catalog, SystemSpec};
use superchannel::diffusion::{
    run_connecting_experiment, run_drift_experiment, sweep_epsilon, write_sweep_csv, ExperimentOptions, ExperimentRecord,
};
use superchannel::flow::{integrate, IntegratorConfig, Termination};
use superchannel::lattice::ReductionResult;
use superchannel::phase::{PhaseState, SystemBundle};
use superchannel::schema::SystemJson;

/// Homological residual above which a normal form is flagged.
const RESIDUAL_LIMIT: f64 = 1e-9;
/// Samples kept by `simulate`.
const SIMULATE_SAMPLES: f64 = 1000.0;

pub fn dispatch(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Catalog => list_catalog(),
        Command::Plots { out } => {
            for name in emit_plots(&out.out)? {
                println!("{}", out.out.join(name).display());
            }
            Ok(Status::Pass)
        }
        Command::Reduce { system, out } => {
            let run = Prepared::new("reduce", &system, Params::default(), out.out)?;
            reduce(run)
        }
        Command::NormalForm { system, epsilon, steps, tol, grid, out } => {
            let params = Params { epsilon: Some(epsilon), steps: Some(steps), tol, grid, ..Params::default() };
            normal_form(Prepared::new("normal-form", &system, params, out.out)?)
        }
        Command::Genericity { system, grid, out } => {
            let params = Params { grid, ..Params::default() };
            genericity(Prepared::new("genericity", &system, params, out.out)?)
        }
        Command::Simulate { system, epsilon, time, theta2, numerics, out } => {
            let params = with_numerics(Params { epsilon: Some(epsilon), time, theta2: Some(theta2), ..Params::default() }, &numerics);
            simulate(Prepared::new("simulate", &system, params, out.out)?)
        }
        Command::Drift { system, epsilon, delta, theta2, numerics, out } => {
            let params = with_numerics(Params { epsilon: Some(epsilon), delta, theta2: Some(theta2), ..Params::default() }, &numerics);
            drift(Prepared::new("drift", &system, params, out.out)?)
        }
        Command::Connect { system, epsilon, from, to, theta2, numerics, out } => {
            let params = with_numerics(
                Params { epsilon: Some(epsilon), from: Some(from), to: Some(to), theta2: Some(theta2), ..Params::default() },
                &numerics,
            );
            connect(Prepared::new("connect", &system, params, out.out)?)
        }
        Command::Sweep { system, epsilons, target_drift, theta2, numerics, out } => {
            let params = with_numerics(
                Params { epsilons: Some(epsilons), target_drift: Some(target_drift), theta2: Some(theta2), ..Params::default() },
                &numerics,
            );
            sweep(Prepared::new("sweep", &system, params, out.out)?)
        }
    }
}

fn with_numerics(mut p: Params, n: &Numerics) -> Params {
    p.tol = n.tol;
    p.grid = n.grid;
    p
}

fn list_catalog() -> Result<Status, CliError> {
    let mut ok = true;
    for e in catalog() {
        let verdict = match e.spec().and_then(|s| s.reduce()) {
            Ok(_) => "ok".to_string(),
            Err(err) => {
                ok = false;
                format!("FAILED: {err}")
            }
        };
        println!("{:<14} {}  [{verdict}]", e.name, e.summary);
    }
    Ok(Status::from_pass(ok))
}

/// A validated configuration with its system loaded and reduced.
struct Prepared {
    config: RunConfig,
    spec: SystemSpec,
    reduction: ReductionResult,
}

impl Prepared {
    fn new(command: &'static str, system: &SystemArg, params: Params, out: std::path::PathBuf) -> Result<Self, CliError> {
        let (spec, source) = load_system(system.system.as_deref(), system.system_file.as_deref())?;
        // every run starts from a verified reduction
        let reduction = spec.reduce()?;
        Ok(Self { config: RunConfig { command, system: Some(source), params, out }, spec, reduction })
    }

    fn epsilon(&self) -> f64 {
        self.config.params.epsilon.unwrap_or(0.0)
    }

    fn reduced_bundle(&self, epsilon: f64) -> Result<SystemBundle, CliError> {
        Ok(SystemBundle::new(self.reduction.system.clone(), self.reduction.perturbation.clone(), epsilon)?)
    }

    fn genericity(&self, bundle: &SystemBundle) -> GenericityReport {
        let grid = match self.config.params.grid {
            Some((n_theta, n_actions)) => GenericityGrid { n_theta, n_actions },
            None => GenericityGrid::default(),
        };
        genericity_check(&bundle.perturbation, &bundle.integrable, grid)
    }

    fn integrator(&self) -> IntegratorConfig {
        match self.config.params.tol {
            Some((a, r)) => IntegratorConfig::default().with_tolerances(a, r),
            None => IntegratorConfig::default(),
        }
    }

    fn experiment_options(&self) -> ExperimentOptions {
        ExperimentOptions {
            delta: self.config.params.delta,
            theta2: self.config.params.theta2.unwrap_or(0.0),
            integrator: self.integrator(),
            ..ExperimentOptions::default()
        }
    }

    fn open(&self) -> Result<RunDir, CliError> {
        RunDir::create(&self.config.out)
    }

    /// Writes `run.json` last and reports the outcome on stdout.
    fn finish(&self, mut dir: RunDir, status: Status) -> Result<Status, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            run_id: String,
            config: &'a RunConfig,
            status: &'static str,
            outputs: Vec<String>,
        }
        let status_text = match status {
            Status::Pass => "pass",
            Status::Flagged => "flagged",
        };
        let manifest =
            Manifest { run_id: self.config.run_id(), config: &self.config, status: status_text, outputs: dir.written().to_vec() };
        dir.write_json("run.json", &manifest)?;
        println!("{} {} -> {} [{status_text}]", self.config.command, manifest.run_id, self.config.out.display());
        Ok(status)
    }
}

fn reduce(run: Prepared) -> Result<Status, CliError> {
    let r = &run.reduction;
    let reduced = SystemSpec {
        h: r.system.h().clone(),
        perturbation: r.perturbation.clone(),
        radius: r.system.radius(),
        resonance: r.system.resonance.clone(),
    };
    #[derive(Serialize)]
    struct Checks {
        h_constancy: f64,
        max_abs_omega1: f64,
        min_omega2: f64,
        symplectic: bool,
        passed: bool,
    }
    #[derive(Serialize)]
    struct Sidecar {
        #[serde(rename = "M")]
        m: [[i64; 2]; 2],
        #[serde(rename = "detM")]
        det_m: i64,
        #[serde(rename = "T")]
        translation: [f64; 2],
        multiplicity: i64,
        time_reversed: bool,
        varpi_reduced: f64,
        checks: Checks,
    }
    let c = &r.checks;
    let sidecar = Sidecar {
        m: r.map.m,
        det_m: r.map.det,
        translation: r.translation,
        multiplicity: r.multiplicity,
        time_reversed: r.time_reversed,
        varpi_reduced: r.system.resonance.varpi,
        checks: Checks {
            h_constancy: c.h_constancy,
            max_abs_omega1: c.channel.max_abs_omega1,
            min_omega2: c.channel.min_omega2,
            symplectic: c.symplectic,
            passed: c.channel.passed() && c.symplectic,
        },
    };
    let pass = sidecar.checks.passed && sidecar.det_m.abs() == 1;
    let mut dir = run.open()?;
    dir.write_json("reduced.json", &SystemJson::from_spec(&reduced))?;
    dir.write_json("reduction.json", &sidecar)?;
    run.finish(dir, Status::from_pass(pass))
}

#[derive(Serialize)]
struct GenericityJson {
    lambda: f64,
    theta_star: f64,
    #[serde(rename = "I_star")]
    i_star: [f64; 2],
    max_derivative: f64,
    delta_star: f64,
    pass: bool,
}

impl From<&GenericityReport> for GenericityJson {
    fn from(g: &GenericityReport) -> Self {
        Self {
            lambda: g.lambda,
            theta_star: g.theta_star,
            i_star: g.i_star,
            max_derivative: g.max_derivative,
            delta_star: g.delta_star,
            pass: g.pass,
        }
    }
}

fn genericity(run: Prepared) -> Result<Status, CliError> {
    let b = run.reduced_bundle(0.0)?;
    let g = run.genericity(&b);
    let mut dir = run.open()?;
    dir.write_json("genericity.json", &GenericityJson::from(&g))?;
    run.finish(dir, Status::from_pass(g.pass))
}

fn normal_form(run: Prepared) -> Result<Status, CliError> {
    let eps = run.epsilon();
    let steps = run.config.params.steps.unwrap_or(1);
    let b = run.reduced_bundle(eps)?;
    let g = run.genericity(&b);
    let mut cfg = NormalFormConfig::default();
    if let Some((a, r)) = run.config.params.tol {
        cfg.integrator = cfg.integrator.with_tolerances(a, r);
    }
    let nf = if steps == 2 { two_step_normal_form(&b, &cfg)? } else { one_step_normal_form(&b, &cfg)? };
    let ke = nf.kappa * nf.epsilon;
    let bound = if steps == 2 { 0.75 * ke } else { 0.5 * ke };
    #[derive(Serialize)]
    struct Report {
        steps: u8,
        epsilon: f64,
        #[serde(rename = "K")]
        cutoff: i64,
        #[serde(rename = "K2", skip_serializing_if = "Option::is_none")]
        cutoff2: Option<i64>,
        kappa: f64,
        gamma: f64,
        sup_f1: f64,
        sup_f2: Option<f64>,
        phi_displacement: f64,
        displacement_bound: f64,
        residual_homological: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        fit_residual: Option<f64>,
        lambda: f64,
        theta_star: f64,
        #[serde(rename = "I_star")]
        i_star: [f64; 2],
        pass: bool,
    }
    let pass = nf.residual_homological <= RESIDUAL_LIMIT && nf.phi_displacement <= bound;
    let report = Report {
        steps,
        epsilon: eps,
        cutoff: nf.cutoff,
        cutoff2: nf.second.as_ref().map(|s| s.cutoff),
        kappa: nf.kappa,
        gamma: nf.gamma,
        sup_f1: nf.sup_f1,
        sup_f2: nf.sup_f2,
        phi_displacement: nf.phi_displacement,
        displacement_bound: bound,
        residual_homological: nf.residual_homological,
        fit_residual: nf.second.as_ref().map(|s| s.fit_residual),
        lambda: g.lambda,
        theta_star: g.theta_star,
        i_star: g.i_star,
        pass,
    };
    let mut dir = run.open()?;
    dir.write_json("normal_form.json", &report)?;
    if let Some((n_theta, n_i)) = run.config.params.grid {
        // f′ lives on S*(κε/2), f″ on S*(κε/4)
        let width = if steps == 2 { 0.25 * ke } else { 0.5 * ke };
        let samples = nf.remainder_samples(steps == 2, width, (n_theta, n_i, n_i))?;
        dir.write_with("remainder.csv", |w| {
            use std::io::Write;
            writeln!(w, "theta1,theta2,I1,I2,remainder")?;
            for (th, i, v) in &samples {
                writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}", th[0], th[1], i[0], i[1], v)?;
            }
            Ok(())
        })?;
    }
    run.finish(dir, Status::from_pass(pass))
}

fn simulate(run: Prepared) -> Result<Status, CliError> {
    let eps = run.epsilon();
    let rb = run.reduced_bundle(eps)?;
    let g = run.genericity(&rb);
    let time = match run.config.params.time {
        Some(t) => t,
        None if g.pass => {
            let delta = (0.25 * g.lambda).min(g.delta_star);
            if eps > 0.0 {
                delta / eps
            } else {
                delta
            }
        }
        None => return Err(CliError::usage("--time", "a positive time (the perturbation is not generic, so there is no default)")),
    };
    let y_reduced = [g.theta_star, run.config.params.theta2.unwrap_or(0.0), g.i_star[0], g.i_star[1]];
    let y0 = run.reduction.forward_lift(&y_reduced);
    let bundle = run.spec.bundle(eps)?;
    let cfg = run.integrator().with_stride(time / SIMULATE_SAMPLES);
    let orbit = integrate(&bundle, &PhaseState::from_lift(&y0), (0.0, time), &cfg)?;
    let max_reduced_i2 = orbit
        .samples
        .iter()
        .map(|s| run.reduction.backward_action(s.action())[1].abs())
        .fold(0.0, f64::max);
    #[derive(Serialize)]
    struct Summary {
        epsilon: f64,
        time: f64,
        samples: usize,
        initial: [f64; 4],
        energy_drift: f64,
        max_abs_reduced_i2: f64,
        completed: bool,
    }
    let completed = orbit.termination == Termination::Completed;
    let summary = Summary {
        epsilon: eps,
        time: orbit.last().t,
        samples: orbit.samples.len(),
        initial: y0,
        energy_drift: orbit.energy_drift(),
        max_abs_reduced_i2: max_reduced_i2,
        completed,
    };
    let mut dir = run.open()?;
    dir.write_with("orbit.csv", |w| orbit.write_csv(w))?;
    dir.write_json("simulate.json", &summary)?;
    run.finish(dir, Status::from_pass(completed))
}

#[derive(Serialize)]
struct RecordJson {
    epsilon: f64,
    delta: f64,
    tau: f64,
    time_sign: f64,
    initial: [f64; 4],
    #[serde(rename = "final")]
    final_state: [f64; 4],
    drift: f64,
    #[serde(rename = "max_abs_I2")]
    max_abs_i2: f64,
    max_core_distance: f64,
    c_fit: f64,
    drift_constant: f64,
    lambda: f64,
    theta_star: f64,
    #[serde(rename = "I_star")]
    i_star: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    terminal_distance: Option<f64>,
    pass_upper: bool,
    pass_lower: bool,
    flagged: bool,
    accepted_steps: usize,
}

fn state_array(z: &PhaseState) -> [f64; 4] {
    let (t, i) = (z.theta(), z.action());
    [t[0], t[1], i[0], i[1]]
}

impl From<&ExperimentRecord> for RecordJson {
    fn from(r: &ExperimentRecord) -> Self {
        Self {
            epsilon: r.epsilon,
            delta: r.delta,
            tau: r.tau,
            time_sign: r.time_sign,
            initial: state_array(&r.initial),
            final_state: state_array(&r.final_state),
            drift: r.drift,
            max_abs_i2: r.max_abs_i2,
            max_core_distance: r.max_core_distance,
            c_fit: r.c_fit,
            drift_constant: r.drift_constant,
            lambda: r.lambda,
            theta_star: r.theta_star,
            i_star: r.i_star,
            terminal_distance: r.terminal_distance,
            pass_upper: r.pass_upper,
            pass_lower: r.pass_lower,
            flagged: r.flagged,
            accepted_steps: r.orbit.stats.accepted,
        }
    }
}

fn write_record(run: &Prepared, name: &str, rec: &ExperimentRecord, pass: bool) -> Result<Status, CliError> {
    let mut dir = run.open()?;
    dir.write_with("orbit.csv", |w| rec.orbit.write_csv(w))?;
    dir.write_json(name, &RecordJson::from(rec))?;
    run.finish(dir, Status::from_pass(pass))
}

fn drift(run: Prepared) -> Result<Status, CliError> {
    let b = run.reduced_bundle(run.epsilon())?;
    let g = run.genericity(&b);
    let rec = run_drift_experiment(&b, &g, &run.experiment_options())?;
    let pass = !rec.flagged && rec.pass_upper && rec.pass_lower;
    write_record(&run, "drift.json", &rec, pass)
}

fn connect(run: Prepared) -> Result<Status, CliError> {
    let p = &run.config.params;
    let (from, to) = (p.from.unwrap_or_default(), p.to.unwrap_or_default());
    let b = run.reduced_bundle(run.epsilon())?;
    let g = run.genericity(&b);
    let rec = run_connecting_experiment(&b, &g, from, to, &run.experiment_options())?;
    let pass = !rec.flagged && rec.pass_upper;
    write_record(&run, "connect.json", &rec, pass)
}

fn sweep(run: Prepared) -> Result<Status, CliError> {
    let p = &run.config.params;
    let epsilons = p.epsilons.clone().unwrap_or_default();
    let target = p.target_drift.unwrap_or_default();
    let b = run.reduced_bundle(epsilons[0])?;
    let g = run.genericity(&b);
    let s = sweep_epsilon(&b, &g, &epsilons, target, &run.experiment_options())?;
    #[derive(Serialize)]
    struct Fit {
        p: f64,
        #[serde(rename = "A")]
        a: f64,
        r_squared: f64,
        target_drift: f64,
        confinement_ratio: f64,
        flagged: bool,
    }
    let fit = Fit {
        p: s.fit.p,
        a: s.fit.a,
        r_squared: s.fit.r_squared,
        target_drift: s.target_drift,
        confinement_ratio: s.confinement_ratio,
        flagged: s.flagged,
    };
    let mut dir = run.open()?;
    dir.write_with("sweep.csv", |w| write_sweep_csv(&s.records, w))?;
    dir.write_json("fit.json", &fit)?;
    run.finish(dir, Status::from_pass(!s.flagged))
}
