use super::{evaluate_cost, Carrier, ControlField, OccupationMeasure};
use crate::coefficients::{CoefficientSet, ControlSet, Environment};
use crate::error::{dimension, Error, Result};
use crate::fpk::{solve_fpk, Scheme, SolveOptions, SolveReport, StepStencil};
use crate::measures::{check_probability, conditional_family};
use crate::{tol, Point};
use rand::Rng;

/// `u(t_k, x_i) = Σ_j p_k(j | x_i) u_j`, and `default` where `m_k(x_i) = 0`.
pub fn project_markovian(pi: &OccupationMeasure, control: &ControlSet, default: Point) -> Result<ControlField> {
    if pi.controls() != control.len() {
        return Err(dimension("occupation measure and control set have different sizes"));
    }
    let fam = conditional_family(pi);
    let us = control.points();
    let mut field = ControlField::constant(pi.steps(), pi.nodes(), default);
    for k in 0..pi.steps() {
        for i in 0..pi.nodes() {
            if let Some(p) = fam.cell(k, i) {
                let mut u = Point::zeros();
                for (pj, uj) in p.iter().zip(us) {
                    u += *pj * uj;
                }
                if !control.contains(&u) {
                    u = control.project(&u);
                }
                field.set(k, i, u);
            }
        }
    }
    Ok(field)
}

#[derive(Clone, Debug)]
pub struct Resolved {
    pub control: ControlField,
    pub state: SolveReport,
    pub relaxed_cost: f64,
    pub projected_cost: f64,
}

/// Projects `pi`, re-solves the FPK equation under the projected control and
/// evaluates both costs in `env`.
pub fn resolve_and_compare(
    coeffs: &CoefficientSet,
    env: &Environment,
    nu: &[f64],
    pi: &OccupationMeasure,
    default: Point,
    cfl_max: f64,
) -> Result<Resolved> {
    let control = project_markovian(pi, &coeffs.control, default)?;
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max };
    let state = solve_fpk(coeffs, env, &control, nu, &opts)?;
    let relaxed_cost = evaluate_cost(coeffs, env, Carrier::Occupation(pi))?;
    let projected_cost = evaluate_cost(coeffs, env, Carrier::Feedback { control: &control, state: &state.curve })?;
    Ok(Resolved { control, state, relaxed_cost, projected_cost })
}

/// A random occupation measure satisfying `m_0 = ν` and the relaxed explicit
/// dynamics. Each cell draws its kernel from a flat Dirichlet law; with
/// `sparsity > 0` each control is dropped with that probability first.
pub fn sample_feasible<R: Rng + ?Sized>(
    coeffs: &CoefficientSet,
    env: &Environment,
    nu: &[f64],
    sparsity: f64,
    rng: &mut R,
) -> Result<OccupationMeasure> {
    let grid = env.curve().grid();
    let time = env.curve().time();
    let (n, steps, dt) = (grid.len(), time.steps(), time.dt());
    check_probability(nu, n, "initial law")?;
    let us = coeffs.control.points().to_vec();
    let m = us.len();
    let mut w = vec![0.0; steps * m * n];
    let mut marg = nu.to_vec();
    for k in 0..steps {
        let st = StepStencil::new(coeffs, env, k)?;
        let gens: Vec<_> = us.iter().map(|u| st.generator(|_| *u)).collect();
        for g in &gens {
            let (node, exit) = g.max_exit();
            if dt * exit > tol::CFL_MAX {
                return Err(Error::StepSize { node, step: k, ratio: dt * exit, limit: tol::CFL_MAX });
            }
        }
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut p: Vec<f64> =
                (0..m).map(|_| if rng.random::<f64>() < sparsity { 0.0 } else { -(1.0 - rng.random::<f64>()).ln() }).collect();
            let s: f64 = p.iter().sum();
            if s <= 0.0 {
                p.iter_mut().for_each(|x| *x = 0.0);
                p[rng.random_range(0..m)] = 1.0;
            } else {
                p.iter_mut().for_each(|x| *x /= s);
            }
            for j in 0..m {
                w[(k * m + j) * n + i] = p[j] * marg[i];
            }
        }
        for (j, g) in gens.iter().enumerate() {
            let cell: Vec<f64> = (0..n).map(|i| w[(k * m + j) * n + i]).collect();
            for (a, b) in next.iter_mut().zip(g.explicit_step(&cell, dt)) {
                *a += b;
            }
        }
        marg = next;
    }
    Ok(OccupationMeasure::from_raw(steps, m, n, w))
}
