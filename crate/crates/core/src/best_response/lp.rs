use super::{evaluate_cost, running_table, terminal_field, Carrier, ControlField, OccupationMeasure};
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{validation, Error, Result};
use crate::fpk::{apriori_monitor, solve_fpk, AprioriReport, Generator, Scheme, SolveOptions, SolveReport, StepStencil};
use crate::lp::{Cmp, LinearProgram, Sense};
use crate::measures::{check_probability, MeasureCurve};
use crate::{tol, Point};
use rayon::prelude::*;

#[derive(Clone, Copy, Debug)]
pub struct BestResponseOptions {
    /// Moment bound `R` of the admissible set.
    pub r: f64,
    /// Constant control of the feasibility witness. Must be a control-grid
    /// point; also used in cells the optimal measure does not charge.
    pub default_control: Point,
    pub cfl_max: f64,
}

impl BestResponseOptions {
    pub fn new(r: f64, default_control: Point) -> Self {
        Self { r, default_control, cfl_max: tol::CFL_MAX }
    }
}

#[derive(Clone, Debug)]
pub struct Feasibility {
    /// Moment and budget check of the constant witness control.
    pub witness: AprioriReport,
    pub normalization_error: f64,
    /// Largest residual of the discrete dynamics constraint at the LP solution.
    pub dynamics_residual: f64,
    /// `∫V dm_k` at the LP solution, `k = 0..=K`.
    pub moment: Vec<f64>,
    pub envelope: Vec<f64>,
    pub moment_active: Vec<bool>,
    pub control_integral: f64,
    pub control_budget: f64,
    pub control_active: bool,
    /// Every charged cell puts all its mass on one control.
    pub deterministic: bool,
    pub lp_variables: usize,
    pub lp_rows: usize,
}

#[derive(Clone, Debug)]
pub struct BestResponseResult {
    pub occupation: OccupationMeasure,
    /// Marginals `m_0..m_K` of the LP solution.
    pub relaxed_curve: MeasureCurve,
    /// Conditional-mean feedback control.
    pub control: ControlField,
    /// FPK solution under `control`.
    pub state: SolveReport,
    pub lp_objective: f64,
    pub relaxed_cost: f64,
    pub projected_cost: f64,
    pub feasibility: Feasibility,
}

/// Runs the constant control `u0` and checks it against the admissible set
/// with bound `r`.
pub fn witness(
    coeffs: &CoefficientSet,
    env: &Environment,
    nu: &[f64],
    r: f64,
    u0: Point,
    cfl_max: f64,
) -> Result<(AprioriReport, SolveReport)> {
    let time = env.curve().time();
    let n = env.curve().grid().len();
    let u = ControlField::constant(time.steps(), n, u0);
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max };
    let sol = solve_fpk(coeffs, env, &u, nu, &opts)?;
    let rep = apriori_monitor(&sol.curve, &coeffs.lyapunov, r, &u)?;
    Ok((rep, sol))
}

/// Exact best response over relaxed occupation measures on the grids.
///
/// Variables are `π(k, j, i)` for `k < K`. Constraints: `m_0 = ν`, the
/// explicit dynamics `m_{k+1} = m_k + Δt Σ_j G_{k,j}ᵀ π(k, j, ·)`, the moment
/// envelope `∫V dm_k ≤ R e^{M t_k}` for `k ≥ 1` and the budget
/// `Δt Σ h(|u_j|) π ≤ γR`. The last marginal `m_K` is eliminated.
pub fn solve_lp(coeffs: &CoefficientSet, env: &Environment, nu: &[f64], opts: &BestResponseOptions) -> Result<BestResponseResult> {
    let grid = env.curve().grid().clone();
    let time = env.curve().time().clone();
    let (n, steps, dt) = (grid.len(), time.steps(), time.dt());
    check_probability(nu, n, "initial law")?;
    coeffs.check_grid(&grid)?;
    if !(opts.r > 0.0 && opts.r.is_finite()) {
        return Err(validation(format!("moment bound R must be positive, got {}", opts.r)));
    }
    let us = coeffs.control.points().to_vec();
    let m = us.len();
    let j0 =
        coeffs.control.index_of(&opts.default_control).ok_or_else(|| validation("default control must be a point of the control grid"))?;
    let u0 = us[j0];

    let (wit, _) = witness(coeffs, env, nu, opts.r, u0, opts.cfl_max)?;
    if !wit.pass {
        return Err(Error::Infeasible(format!(
            "constant control {:?} violates the admissible set with R = {} \
             (moment margin {:.3e}, budget {:.3e} of {:.3e}); increase R",
            &u0.as_slice()[..grid.dim()],
            opts.r,
            wit.margins.iter().copied().fold(f64::INFINITY, f64::min),
            wit.control_integral,
            wit.control_budget
        )));
    }

    let gens: Vec<Vec<Generator>> = (0..steps)
        .into_par_iter()
        .map(|k| {
            let st = StepStencil::new(coeffs, env, k)?;
            Ok(us.iter().map(|u| st.generator(|_| *u)).collect())
        })
        .collect::<Result<_>>()?;
    for (k, gk) in gens.iter().enumerate() {
        for g in gk {
            let (node, exit) = g.max_exit();
            if dt * exit > opts.cfl_max {
                return Err(Error::StepSize { node, step: k, ratio: dt * exit, limit: opts.cfl_max });
            }
        }
    }

    let f = running_table(coeffs, env)?;
    let g = terminal_field(coeffs, env)?;
    let v = grid.field(&*coeffs.lyapunov.v);
    let hs: Vec<f64> = us.iter().map(|u| (coeffs.lyapunov.h)(u.norm())).collect();
    let big_m = coeffs.lyapunov.m();
    let envelope: Vec<f64> = (0..time.nodes()).map(|k| opts.r * (big_m * time.time(k)).exp()).collect();
    let budget = coeffs.lyapunov.gamma(time.horizon()) * opts.r;
    let idx = |k: usize, j: usize, i: usize| (k * m + j) * n + i;

    // Terminal coefficients ψ + Δt G_{K−1,j} ψ for ψ = g and ψ = V.
    let last = steps - 1;
    let term_g: Vec<Vec<f64>> = gens[last].iter().map(|gj| shifted(gj, &g, dt)).collect();
    let term_v: Vec<Vec<f64>> = gens[last].iter().map(|gj| shifted(gj, &v, dt)).collect();

    let mut lp = LinearProgram::new(Sense::Minimize);
    for k in 0..steps {
        for j in 0..m {
            for i in 0..n {
                let mut c = dt * f[idx(k, j, i)];
                if k == last {
                    c += term_g[j][i];
                }
                lp.add_var(c, 0.0, f64::INFINITY);
            }
        }
    }
    // m_0 = ν
    for i in 0..n {
        let terms: Vec<(usize, f64)> = (0..m).map(|j| (idx(0, j, i), 1.0)).collect();
        lp.add_row(&terms, Cmp::Eq, nu[i]);
    }
    // dynamics: m_{k+1} − Σ_{j,l} π(k,j,l)[δ_{l,i}(1 − Δt exit_l) + Δt G_{l,i}] = 0
    for k in 0..last {
        let mut rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| (0..m).map(|j| (idx(k + 1, j, i), 1.0)).collect()).collect();
        for (j, gj) in gens[k].iter().enumerate() {
            for l in 0..n {
                let var = idx(k, j, l);
                rows[l].push((var, -(1.0 - dt * gj.exit(l))));
                for (t, r) in gj.row(l) {
                    rows[t].push((var, -dt * r));
                }
            }
        }
        for row in rows {
            lp.add_row(&row, Cmp::Eq, 0.0);
        }
    }
    // moment envelope at t_1..t_{K-1}, then t_K through the eliminated step
    for k in 1..steps {
        let terms: Vec<(usize, f64)> = (0..m).flat_map(|j| (0..n).map(move |i| (j, i))).map(|(j, i)| (idx(k, j, i), v[i])).collect();
        lp.add_row(&terms, Cmp::Le, envelope[k]);
    }
    let terms: Vec<(usize, f64)> = (0..m).flat_map(|j| (0..n).map(move |i| (j, i))).map(|(j, i)| (idx(last, j, i), term_v[j][i])).collect();
    lp.add_row(&terms, Cmp::Le, envelope[steps]);
    // control budget
    let terms: Vec<(usize, f64)> = (0..steps)
        .flat_map(|k| (0..m).flat_map(move |j| (0..n).map(move |i| (k, j, i))))
        .filter(|&(_, j, _)| hs[j] != 0.0)
        .map(|(k, j, i)| (idx(k, j, i), dt * hs[j]))
        .collect();
    if !terms.is_empty() {
        lp.add_row(&terms, Cmp::Le, budget);
    }

    let (lp_variables, lp_rows) = (lp.num_vars(), lp.num_rows());
    log::debug!("best-response LP: {lp_variables} variables, {lp_rows} rows");
    let sol = lp.solve()?;
    let pi = OccupationMeasure::from_raw(steps, m, n, sol.values);

    // marginals and the eliminated terminal step
    let mut marginals: Vec<Vec<f64>> = (0..steps).map(|k| pi.marginal(k)).collect();
    let mut dynamics_residual: f64 = 0.0;
    let mut next = Vec::new();
    for k in 0..steps {
        let mut step = vec![0.0; n];
        for (j, gj) in gens[k].iter().enumerate() {
            let w: Vec<f64> = (0..n).map(|i| pi.get(k, j, i)).collect();
            for (s, x) in step.iter_mut().zip(gj.explicit_step(&w, dt)) {
                *s += x;
            }
        }
        if k + 1 < steps {
            for i in 0..n {
                dynamics_residual = dynamics_residual.max((marginals[k + 1][i] - step[i]).abs());
            }
        } else {
            next = step;
        }
    }
    for i in 0..n {
        dynamics_residual = dynamics_residual.max((marginals[0][i] - nu[i]).abs());
    }
    marginals.push(next);
    // solver round-off is reported through `normalization_error`; the curve
    // itself has to be a probability vector at every node
    for w in marginals.iter_mut() {
        w.iter_mut().for_each(|x| *x = x.max(0.0));
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            w.iter_mut().for_each(|x| *x /= total);
        }
    }
    let relaxed_curve = MeasureCurve::new(grid.clone(), time.clone(), marginals)?;
    let moment: Vec<f64> = (0..time.nodes()).map(|k| relaxed_curve.moment(&v, k)).collect();
    let moment_active: Vec<bool> = moment.iter().zip(&envelope).map(|(a, b)| b - a <= tol::LP * b.max(1.0)).collect();
    let control_integral: f64 = dt * pi.weights().iter().enumerate().map(|(c, w)| hs[(c / n) % m] * w).sum::<f64>();
    let deterministic = (0..steps).all(|k| {
        (0..n).all(|i| {
            let tot: f64 = (0..m).map(|j| pi.get(k, j, i)).sum();
            tot <= tol::LP || (0..m).any(|j| pi.get(k, j, i) >= (1.0 - 1e-9) * tot)
        })
    });

    let resolved = super::resolve_and_compare(coeffs, env, nu, &pi, u0, opts.cfl_max)?;
    let relaxed_cost = evaluate_cost(coeffs, env, Carrier::Occupation(&pi))?;
    let feasibility = Feasibility {
        witness: wit,
        normalization_error: pi.normalization_error(),
        dynamics_residual,
        moment,
        envelope,
        moment_active,
        control_integral,
        control_budget: budget,
        control_active: budget - control_integral <= tol::LP * budget.max(1.0),
        deterministic,
        lp_variables,
        lp_rows,
    };
    Ok(BestResponseResult {
        occupation: pi,
        relaxed_curve,
        control: resolved.control,
        state: resolved.state,
        lp_objective: sol.objective,
        relaxed_cost,
        projected_cost: resolved.projected_cost,
        feasibility,
    })
}

fn shifted(g: &Generator, psi: &[f64], dt: f64) -> Vec<f64> {
    g.apply(psi).iter().zip(psi).map(|(a, p)| p + dt * a).collect()
}
