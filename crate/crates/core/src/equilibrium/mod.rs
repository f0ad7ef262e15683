//! Damped best-response iteration `σ ↦ (1−λ)σ + λ Φ(σ)`, exploitability
//! certificates and a-priori diagnostics.

mod certificate;
mod diagnostics;

pub use certificate::{certify, generate_challengers, CertificateReport, ChallengerResult};
pub use diagnostics::{apriori_sweep, default_r, lsc_probe, modulus_diagnostic, stencil_bound, ModulusReport, SweepReport, SweepRow};

use crate::best_response::{solve_lp, BestResponseOptions, BestResponseResult, ControlField};
use crate::coefficients::hypotheses::{check_all, Sample};
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{validation, Error, Result};
use crate::fpk::{solve_fpk, Scheme, SolveOptions};
use crate::measures::{check_probability, kr_distance, MeasureCurve, StateGrid, TimeGrid};
use crate::{tol, Point};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Averaging {
    /// Constant weight `λ` on the new best response.
    DampedPicard,
    /// `λ_k = 1/(k+1)`.
    FictitiousPlay,
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPointConfig {
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop once `max_t KR(Φ(σ)_t, σ_t) ≤ tolerance`.
    pub tolerance: f64,
    pub averaging: Averaging,
    pub r: f64,
    pub default_control: Point,
    pub seed: u64,
    pub cfl_max: f64,
    /// Run the sampled hypothesis checks on the initial environment first.
    pub check_hypotheses: bool,
}

impl FixedPointConfig {
    pub fn new(r: f64, default_control: Point) -> Self {
        Self {
            damping: 0.5,
            max_iterations: 200,
            tolerance: 1e-3,
            averaging: Averaging::DampedPicard,
            r,
            default_control,
            seed: 0,
            cfl_max: tol::CFL_MAX,
            check_hypotheses: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(validation(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tolerance > 0.0) {
            return Err(validation(format!("fixed-point tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(validation("need at least one iteration"));
        }
        Ok(())
    }

    /// Weight on the best response at iteration `k`. The first step always
    /// replaces the starting curve.
    pub fn weight(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        match self.averaging {
            Averaging::DampedPicard => self.damping,
            Averaging::FictitiousPlay => 1.0 / (k as f64 + 1.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// `max_t KR(Φ(σ^k)_t, σ^k_t)`.
    pub kr_gap: f64,
    /// `max_t KR(σ^{k+1}_t, σ^k_t)`.
    pub step_gap: f64,
    pub lambda: f64,
    pub relaxed_cost: f64,
    pub projected_cost: f64,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    /// Environment curve `σ` of the returned iterate.
    pub environment: MeasureCurve,
    /// State curve of `u*` in that environment, `μ*`.
    pub mu_star: MeasureCurve,
    pub u_star: ControlField,
    pub best_response: BestResponseResult,
    pub history: Vec<IterationRecord>,
    pub best_iter: usize,
    pub fixed_point_gap: f64,
    pub converged: bool,
    pub hypotheses_pass: Option<bool>,
}

/// Starting curve: the state under the constant default control in the
/// environment frozen at `ν`.
pub fn initial_curve(
    coeffs: &CoefficientSet,
    grid: &StateGrid,
    time: &TimeGrid,
    nu: &[f64],
    u0: Point,
    cfl_max: f64,
) -> Result<MeasureCurve> {
    let env = Environment::new(MeasureCurve::constant(grid.clone(), time.clone(), nu)?);
    let u = ControlField::constant(time.steps(), grid.len(), u0);
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max };
    Ok(solve_fpk(coeffs, &env, &u, nu, &opts)?.curve)
}

/// Largest per-time KR distance between two curves on the same grids.
pub fn curve_gap(a: &MeasureCurve, b: &MeasureCurve) -> Result<f64> {
    a.grid().check_same(b.grid())?;
    let g = a.grid();
    let d: Vec<f64> = (0..a.time().nodes()).into_par_iter().map(|k| kr_distance(a.slice(k), b.slice(k), g)).collect::<Result<_>>()?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

/// Iterates the best-response map and returns the iterate with the smallest
/// fixed-point gap. Hitting the iteration cap is reported as non-converged.
pub fn iterate(
    coeffs: &CoefficientSet,
    grid: &StateGrid,
    time: &TimeGrid,
    nu: &[f64],
    cfg: &FixedPointConfig,
) -> Result<EquilibriumResult> {
    cfg.validate()?;
    check_probability(nu, grid.len(), "initial law")?;
    let mut sigma = initial_curve(coeffs, grid, time, nu, cfg.default_control, cfg.cfl_max)?;

    let hypotheses_pass = if cfg.check_hypotheses {
        let env = Environment::new(sigma.clone());
        let sample = Sample::standard(grid, time, &coeffs.control, cfg.seed);
        let reports = check_all(coeffs, &env, &sample)?;
        let ok = reports.iter().all(|r| r.pass());
        if !ok {
            for r in reports.iter().filter(|r| !r.pass()) {
                log::warn!("hypothesis check failed:\n{}", r.to_text());
            }
        }
        Some(ok)
    } else {
        None
    };

    let opts = BestResponseOptions { r: cfg.r, default_control: cfg.default_control, cfl_max: cfg.cfl_max };
    let mut history = Vec::new();
    let mut best: Option<(usize, f64, MeasureCurve, BestResponseResult)> = None;
    let mut converged = false;
    for k in 0..cfg.max_iterations {
        let env = Environment::new(sigma.clone());
        let br = solve_lp(coeffs, &env, nu, &opts)?;
        if !(br.relaxed_cost.is_finite() && br.projected_cost.is_finite()) {
            return Err(Error::Numerical(format!("non-finite cost at iteration {k}")));
        }
        let gap = curve_gap(&br.state.curve, &sigma)?;
        let lambda = cfg.weight(k);
        let next = sigma.mix(&br.state.curve, lambda)?;
        let step_gap = curve_gap(&next, &sigma)?;
        history.push(IterationRecord {
            iter: k,
            kr_gap: gap,
            step_gap,
            lambda,
            relaxed_cost: br.relaxed_cost,
            projected_cost: br.projected_cost,
        });
        log::info!("iteration {k}: gap {gap:.3e}, cost {:.6}", br.projected_cost);
        if best.as_ref().is_none_or(|b| gap < b.1) {
            best = Some((k, gap, sigma.clone(), br));
        }
        if gap <= cfg.tolerance {
            converged = true;
            break;
        }
        sigma = next;
    }
    let (best_iter, fixed_point_gap, environment, br) = best.expect("at least one iteration ran");
    Ok(EquilibriumResult {
        environment,
        mu_star: br.state.curve.clone(),
        u_star: br.control.clone(),
        best_response: br,
        history,
        best_iter,
        fixed_point_gap,
        converged,
        hypotheses_pass,
    })
}
