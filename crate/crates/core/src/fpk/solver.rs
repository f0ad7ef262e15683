use super::banded::Banded;
use super::generator::{Generator, StepStencil};
use crate::best_response::ControlField;
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{dimension, Error, Result};
use crate::measures::{check_probability, MeasureCurve};
use crate::tol;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Explicit,
    Implicit,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub cfl_max: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { scheme: Scheme::Explicit, cfl_max: tol::CFL_MAX }
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub curve: MeasureCurve,
    /// `|Σσ_{k+1} − Σσ_k|` per step.
    pub mass_defect: Vec<f64>,
    /// Mass that the dropped boundary rates would have carried out, per step.
    pub leakage: Vec<f64>,
    pub total_leakage: f64,
    /// `∫V dσ_{t_k}` per time node.
    pub v_moment: Vec<f64>,
    /// Largest `Δt · exit rate` over all steps and nodes.
    pub cfl_ratio: f64,
    /// `cfl_max − cfl_ratio`.
    pub cfl_margin: f64,
    /// Total of tiny negative weights (above −1e-12) set to zero by implicit steps.
    pub clamped: f64,
}

fn check_inputs(env: &Environment, control: &ControlField, nu: &[f64]) -> Result<()> {
    let grid = env.curve().grid();
    check_probability(nu, grid.len(), "initial law")?;
    if control.nodes() != grid.len() || control.steps() != env.curve().time().steps() {
        return Err(dimension(format!(
            "control field is {}x{}, expected {}x{}",
            control.steps(),
            control.nodes(),
            env.curve().time().steps(),
            grid.len()
        )));
    }
    Ok(())
}

/// Generators of every step under a feedback control.
pub fn step_generators(coeffs: &CoefficientSet, env: &Environment, control: &ControlField) -> Result<Vec<Generator>> {
    (0..env.curve().time().steps()).map(|k| Ok(StepStencil::new(coeffs, env, k)?.generator(|i| control.get(k, i)))).collect()
}

/// Steps `σ_0 = ν` forward under the feedback control `control` in the
/// environment `env`.
pub fn solve_fpk(
    coeffs: &CoefficientSet,
    env: &Environment,
    control: &ControlField,
    nu: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    check_inputs(env, control, nu)?;
    let gens = step_generators(coeffs, env, control)?;
    solve_with_generators(coeffs, env, &gens, nu, opts)
}

pub(crate) fn solve_with_generators(
    coeffs: &CoefficientSet,
    env: &Environment,
    gens: &[Generator],
    nu: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let grid = env.curve().grid().clone();
    let time = env.curve().time().clone();
    let dt = time.dt();
    let v = grid.field(&*coeffs.lyapunov.v);
    let mut slices = Vec::with_capacity(time.nodes());
    slices.push(nu.to_vec());
    let mut mass_defect = Vec::with_capacity(time.steps());
    let mut leakage = Vec::with_capacity(time.steps());
    let mut cfl_ratio: f64 = 0.0;
    let mut clamped = 0.0;
    for (k, g) in gens.iter().enumerate() {
        let sigma = &slices[k];
        let (node, exit) = g.max_exit();
        cfl_ratio = cfl_ratio.max(dt * exit);
        if opts.scheme == Scheme::Explicit && dt * exit > opts.cfl_max {
            return Err(Error::StepSize { node, step: k, ratio: dt * exit, limit: opts.cfl_max });
        }
        leakage.push(dt * (0..grid.len()).map(|i| g.leak(i) * sigma[i]).sum::<f64>());
        let mut next = match opts.scheme {
            Scheme::Explicit => g.explicit_step(sigma, dt),
            Scheme::Implicit => implicit_step(g, sigma, dt)?,
        };
        for (i, w) in next.iter_mut().enumerate() {
            if *w < 0.0 {
                if *w < -tol::NEGATIVITY {
                    return Err(Error::Scheme { node: i, step: k + 1, value: *w });
                }
                clamped += -*w;
                *w = 0.0;
            }
        }
        let before: f64 = sigma.iter().sum();
        let after: f64 = next.iter().sum();
        mass_defect.push((after - before).abs());
        slices.push(next);
    }
    let curve = MeasureCurve::new(grid, time, slices)?;
    let v_moment = (0..curve.time().nodes()).map(|k| curve.moment(&v, k)).collect();
    let total_leakage = leakage.iter().sum();
    Ok(SolveReport { curve, mass_defect, leakage, total_leakage, v_moment, cfl_ratio, cfl_margin: opts.cfl_max - cfl_ratio, clamped })
}

fn implicit_step(g: &Generator, sigma: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = g.len();
    let mut m = Banded::zeros(n, g.bandwidth());
    for i in 0..n {
        m.add(i, i, 1.0 + dt * g.exit(i));
        for (j, r) in g.row(i) {
            // (I − Δt Gᵀ)_{j,i} = −Δt G_{i,j}
            m.add(j, i, -dt * r);
        }
    }
    let mut x = sigma.to_vec();
    m.solve(&mut x)?;
    Ok(x)
}

/// Largest per-step residual of the discrete FPK equation for `curve` under `control`.
pub fn fpk_residual(
    coeffs: &CoefficientSet,
    env: &Environment,
    control: &ControlField,
    curve: &MeasureCurve,
    scheme: Scheme,
) -> Result<f64> {
    check_inputs(env, control, curve.slice(0))?;
    curve.grid().check_same(env.curve().grid())?;
    let dt = curve.time().dt();
    let gens = step_generators(coeffs, env, control)?;
    let mut worst: f64 = 0.0;
    for (k, g) in gens.iter().enumerate() {
        let (a, b) = (curve.slice(k), curve.slice(k + 1));
        let r: Vec<f64> = match scheme {
            Scheme::Explicit => {
                let d = g.apply_transpose(a);
                (0..a.len()).map(|i| b[i] - a[i] - dt * d[i]).collect()
            }
            Scheme::Implicit => {
                let d = g.apply_transpose(b);
                (0..a.len()).map(|i| b[i] - dt * d[i] - a[i]).collect()
            }
        };
        worst = r.iter().fold(worst, |m, x| m.max(x.abs()));
    }
    Ok(worst)
}
