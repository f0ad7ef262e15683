//! Subcommand implementations. Each writes its run directory and reports
//! whether all monitors passed.

use crate::config::ScenarioConfig;
use crate::output::{self, RunDir, Summary};
use anyhow::{Context, Result};
use mfg_core::best_response::{evaluate_cost, solve_lp, BestResponseOptions, Carrier, ControlField};
use mfg_core::coefficients::hypotheses::{check_all, Sample};
use mfg_core::coefficients::{CoefficientSet, Environment};
use mfg_core::equilibrium::{certify, generate_challengers, initial_curve, iterate, CertificateReport};
use mfg_core::fpk::{apriori_monitor, solve_fpk, Scheme, SolveOptions};
use mfg_core::measures::{MeasureCurve, StateGrid, TimeGrid};
use mfg_core::particles::{cost_estimate, simulate, superposition_gap};
use mfg_core::tol;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    MonitorFailure,
}

impl Outcome {
    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::MonitorFailure
        }
    }
}

struct Scenario {
    cfg: ScenarioConfig,
    grid: StateGrid,
    time: TimeGrid,
    coeffs: CoefficientSet,
    nu: Vec<f64>,
    dir: RunDir,
}

impl Scenario {
    fn new(cfg: ScenarioConfig) -> Result<Self> {
        let grid = cfg.state_grid()?;
        let time = cfg.time_grid()?;
        let coeffs = cfg.coefficients()?;
        let nu = cfg.initial_law(&grid)?;
        let dir = RunDir::create(Path::new(&cfg.out))?;
        dir.text("config.toml", &cfg.to_toml())?;
        Ok(Self { cfg, grid, time, coeffs, nu, dir })
    }

    fn udim(&self) -> usize {
        self.coeffs.control.dim()
    }

    fn r(&self) -> Result<f64> {
        self.cfg.moment_bound(&self.coeffs, &self.grid, &self.nu)
    }

    fn frozen_env(&self) -> Result<Environment> {
        Ok(Environment::new(MeasureCurve::constant(self.grid.clone(), self.time.clone(), &self.nu)?))
    }

    fn initial_env(&self) -> Result<Environment> {
        let c = initial_curve(&self.coeffs, &self.grid, &self.time, &self.nu, self.cfg.default_control(), self.cfg.solver.cfl_max)?;
        Ok(Environment::new(c))
    }
}

fn finish(sc: &Scenario, name: &str, mut s: Summary, pass: bool) -> Result<Outcome> {
    s.put("monitors_pass", pass);
    sc.dir.text(name, &s.render())?;
    Ok(Outcome::from_pass(pass))
}

/// FPK solve under the constant default control with the environment frozen at `ν`.
pub fn solve_fpk_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let env = sc.frozen_env()?;
    let u = ControlField::constant(sc.time.steps(), sc.grid.len(), sc.cfg.default_control());
    let opts = SolveOptions { scheme: sc.cfg.solver.scheme(), cfl_max: sc.cfg.solver.cfl_max };
    let rep = solve_fpk(&sc.coeffs, &env, &u, &sc.nu, &opts)?;
    output::write_curve(&sc.dir, "density.csv", &rep.curve)?;
    output::write_solve_report(&sc.dir, "solve.csv", &rep)?;
    let r = sc.r()?;
    let ap = apriori_monitor(&rep.curve, &sc.coeffs.lyapunov, r, &u)?;
    output::write_envelope(&sc.dir, "moments.csv", &sc.time, &ap.moment, &ap.envelope)?;
    let defect_limit = match opts.scheme {
        Scheme::Explicit => 1e-12,
        Scheme::Implicit => 1e-10,
    };
    let max_defect = rep.mass_defect.iter().copied().fold(0.0, f64::max);
    let leak_ok = rep.total_leakage <= sc.cfg.solver.leakage_budget;
    let mut s = Summary::default();
    s.put("command", "solve-fpk")
        .put("scheme", format!("{:?}", opts.scheme))
        .put("cfl_ratio", rep.cfl_ratio)
        .put("max_mass_defect", max_defect)
        .put("total_leakage", rep.total_leakage)
        .put("leakage_budget", sc.cfg.solver.leakage_budget)
        .put("clamped", rep.clamped)
        .put("R", r)
        .put("apriori_moment_pass", ap.pass_moment)
        .put("apriori_control_pass", ap.pass_control);
    let pass = leak_ok && max_defect <= defect_limit && ap.pass;
    finish(&sc, "summary.txt", s, pass)
}

/// Best response to the starting environment.
pub fn best_response_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let env = sc.initial_env()?;
    let r = sc.r()?;
    let opts = BestResponseOptions { r, default_control: sc.cfg.default_control(), cfl_max: sc.cfg.solver.cfl_max };
    let br = solve_lp(&sc.coeffs, &env, &sc.nu, &opts)?;
    output::write_occupation(&sc.dir, "occupation.csv", &br.occupation)?;
    output::write_control(&sc.dir, "control.csv", &br.control, &sc.grid, &sc.time, sc.udim())?;
    output::write_curve(&sc.dir, "state.csv", &br.state.curve)?;
    let f = &br.feasibility;
    output::write_envelope(&sc.dir, "moments.csv", &sc.time, &f.moment, &f.envelope)?;
    let jensen = br.projected_cost <= br.relaxed_cost + tol::LP;
    let ap = apriori_monitor(&br.state.curve, &sc.coeffs.lyapunov, r, &br.control)?;
    let mut s = Summary::default();
    s.put("command", "best-response")
        .put("R", r)
        .put("lp_objective", br.lp_objective)
        .put("relaxed_cost", br.relaxed_cost)
        .put("projected_cost", br.projected_cost)
        .put("jensen_pass", jensen)
        .put("dynamics_residual", f.dynamics_residual)
        .put("normalization_error", f.normalization_error)
        .put("moment_active_nodes", f.moment_active.iter().filter(|a| **a).count())
        .put("control_integral", f.control_integral)
        .put("control_budget", f.control_budget)
        .put("control_active", f.control_active)
        .put("deterministic", f.deterministic)
        .put("lp_variables", f.lp_variables)
        .put("lp_rows", f.lp_rows)
        .put("apriori_pass", ap.pass);
    finish(&sc, "best_response.txt", s, jensen && ap.pass)
}

fn write_certificate_summary(s: &mut Summary, cert: &CertificateReport) {
    s.put("j_star", cert.j_star)
        .put("certificate_fpk_residual", cert.fpk_residual)
        .put("challengers", cert.challengers.len())
        .put("exploitability", cert.exploitability)
        .put("certificate_tolerance", cert.tolerance)
        .put("certificate_pass", cert.pass);
}

/// Fixed-point iteration, certificate and a-priori check of the result.
pub fn equilibrium_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let r = sc.r()?;
    let fp = sc.cfg.fixed_point(r);
    let res = iterate(&sc.coeffs, &sc.grid, &sc.time, &sc.nu, &fp)?;
    output::write_history(&sc.dir, &res.history)?;
    output::write_curve(&sc.dir, "mu_star.csv", &res.mu_star)?;
    output::write_curve(&sc.dir, "environment.csv", &res.environment)?;
    output::write_control(&sc.dir, "u_star.csv", &res.u_star, &sc.grid, &sc.time, sc.udim())?;
    let env = Environment::new(res.environment.clone());
    let challengers = generate_challengers(&sc.coeffs, &env, &res.u_star, sc.cfg.certify.challengers, sc.cfg.seed);
    let cert = certify(&sc.coeffs, &env, &res.u_star, &res.mu_star, &challengers, &sc.nu, sc.cfg.solver.cfl_max)?;
    output::write_certificate(&sc.dir, &cert)?;
    let ap = apriori_monitor(&res.mu_star, &sc.coeffs.lyapunov, r, &res.u_star)?;
    output::write_envelope(&sc.dir, "moments.csv", &sc.time, &ap.moment, &ap.envelope)?;
    let mut s = Summary::default();
    s.put("command", "equilibrium")
        .put("R", r)
        .put("iterations", res.history.len())
        .put("converged", res.converged)
        .put("best_iter", res.best_iter)
        .put("fixed_point_gap", res.fixed_point_gap)
        .put("hypotheses_pass", res.hypotheses_pass.map_or("skipped".to_string(), |p| p.to_string()))
        .put("relaxed_cost", res.best_response.relaxed_cost)
        .put("projected_cost", res.best_response.projected_cost);
    write_certificate_summary(&mut s, &cert);
    s.put("apriori_moment_pass", ap.pass_moment)
        .put("apriori_control_pass", ap.pass_control)
        .put("control_integral", ap.control_integral)
        .put("control_budget", ap.control_budget);
    finish(&sc, "summary.txt", s, res.converged && cert.pass && ap.pass)
}

/// Certifies a stored equilibrium (`certify.from`), or one computed on the spot.
pub fn certify_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let (env, u_star) = if sc.cfg.certify.from.is_empty() {
        let r = sc.r()?;
        let res = iterate(&sc.coeffs, &sc.grid, &sc.time, &sc.nu, &sc.cfg.fixed_point(r))?;
        (Environment::new(res.environment), res.u_star)
    } else {
        let from = Path::new(&sc.cfg.certify.from);
        let curve = output::read_curve(&from.join("environment.csv"), &sc.grid, &sc.time)?;
        let u = output::read_control(&from.join("u_star.csv"), &sc.grid, &sc.time, sc.udim())?;
        (Environment::new(curve), u)
    };
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max: sc.cfg.solver.cfl_max };
    let mu_star = solve_fpk(&sc.coeffs, &env, &u_star, &sc.nu, &opts)?.curve;
    let challengers = generate_challengers(&sc.coeffs, &env, &u_star, sc.cfg.certify.challengers, sc.cfg.seed);
    let cert = certify(&sc.coeffs, &env, &u_star, &mu_star, &challengers, &sc.nu, sc.cfg.solver.cfl_max)?;
    output::write_certificate(&sc.dir, &cert)?;
    let mut s = Summary::default();
    s.put("command", "certify");
    write_certificate_summary(&mut s, &cert);
    finish(&sc, "summary.txt", s, cert.pass)
}

/// Sampled hypothesis checks in the starting environment.
pub fn check_hypotheses_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let env = sc.initial_env()?;
    let sample = Sample::standard(&sc.grid, &sc.time, &sc.coeffs.control, sc.cfg.seed);
    let reports = check_all(&sc.coeffs, &env, &sample)?;
    output::write_hypotheses(&sc.dir, &reports)?;
    let text: Vec<String> = reports.iter().map(|r| r.to_text()).collect();
    sc.dir.text("hypotheses.txt", &text.join("\n"))?;
    let pass = reports.iter().all(|r| r.pass());
    let mut s = Summary::default();
    s.put("command", "check-hypotheses");
    for r in &reports {
        s.put(&r.title, r.pass());
    }
    finish(&sc, "summary.txt", s, pass)
}

/// Particle ensemble under the constant default control against the grid
/// solution, environment frozen at `ν`.
pub fn particle_check_cmd(cfg: ScenarioConfig) -> Result<Outcome> {
    let sc = Scenario::new(cfg)?;
    let env = sc.frozen_env()?;
    let u = ControlField::constant(sc.time.steps(), sc.grid.len(), sc.cfg.default_control());
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max: sc.cfg.solver.cfl_max };
    let rep = solve_fpk(&sc.coeffs, &env, &u, &sc.nu, &opts)?;
    output::write_curve(&sc.dir, "density.csv", &rep.curve)?;
    let ens = simulate(&sc.coeffs, &env, &u, &sc.nu, sc.cfg.particles.count, sc.cfg.seed)?;
    let gaps = superposition_gap(&ens, &rep.curve)?;
    output::write_ensemble(&sc.dir, &ens.summary(), &gaps, sc.grid.dim())?;
    if sc.cfg.particles.dump {
        output::write_trajectories(&sc.dir.path("trajectories.bin"), &ens).context("cannot dump trajectories")?;
    }
    let est = cost_estimate(&ens, &sc.coeffs, &env, &u)?;
    let grid_cost = evaluate_cost(&sc.coeffs, &env, Carrier::Feedback { control: &u, state: &rep.curve })?;
    let max_gap = gaps.iter().copied().fold(0.0, f64::max);
    let mut s = Summary::default();
    s.put("command", "particle-check")
        .put("particles", ens.len())
        .put("max_w1_gap", max_gap)
        .put("gap_tolerance", sc.cfg.particles.gap_tolerance)
        .put("mc_cost", est.mean)
        .put("mc_std_error", est.std_error)
        .put("grid_cost", grid_cost);
    finish(&sc, "summary.txt", s, max_gap <= sc.cfg.particles.gap_tolerance)
}
