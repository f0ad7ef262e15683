use crate::best_response::{evaluate_cost, Carrier, ControlField};
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{validation, Result};
use crate::fpk::{fpk_residual, solve_fpk, Scheme, SolveOptions};
use crate::measures::MeasureCurve;
use crate::{tol, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChallengerResult {
    pub id: usize,
    /// `J(v, σ_v)` in the frozen environment.
    pub cost: f64,
    /// `J(v, σ_v) − J(u*, μ*)`; negative values are improvements over `u*`.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct CertificateReport {
    pub j_star: f64,
    pub fpk_residual: f64,
    pub challengers: Vec<ChallengerResult>,
    /// `max(0, J(u*) − min_v J(v))`.
    pub exploitability: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Checks `J(u*, μ*) ≤ J(v, σ_v) + τ` for every challenger `v`, all costs
/// evaluated in the frozen environment `env`. `mu_star` must solve the FPK
/// equation under `u_star` in `env`.
pub fn certify(
    coeffs: &CoefficientSet,
    env: &Environment,
    u_star: &ControlField,
    mu_star: &MeasureCurve,
    challengers: &[ControlField],
    nu: &[f64],
    cfl_max: f64,
) -> Result<CertificateReport> {
    u_star.check_in(&coeffs.control)?;
    for (id, v) in challengers.iter().enumerate() {
        v.check_in(&coeffs.control).map_err(|e| validation(format!("challenger {id}: {e}")))?;
    }
    let residual = fpk_residual(coeffs, env, u_star, mu_star, Scheme::Explicit)?;
    if residual > tol::MONITOR {
        return Err(validation(format!("state curve does not solve its FPK equation (residual {residual:e})")));
    }
    let j_star = evaluate_cost(coeffs, env, Carrier::Feedback { control: u_star, state: mu_star })?;
    let opts = SolveOptions { scheme: Scheme::Explicit, cfl_max };
    let results: Vec<ChallengerResult> = challengers
        .par_iter()
        .enumerate()
        .map(|(id, v)| {
            let state = solve_fpk(coeffs, env, v, nu, &opts)?;
            let cost = evaluate_cost(coeffs, env, Carrier::Feedback { control: v, state: &state.curve })?;
            Ok(ChallengerResult { id, cost, gap: cost - j_star })
        })
        .collect::<Result<_>>()?;
    let min_cost = results.iter().map(|r| r.cost).fold(f64::INFINITY, f64::min);
    let exploitability = if results.is_empty() { 0.0 } else { (j_star - min_cost).max(0.0) };
    let tolerance = 1e-3 * (1.0 + j_star.abs());
    Ok(CertificateReport {
        j_star,
        fpk_residual: residual,
        challengers: results,
        exploitability,
        tolerance,
        pass: exploitability <= tolerance,
    })
}

/// Challengers in equal thirds: random piecewise-constant fields, perturbations
/// of `u*` (projected back into `U`), and greedy one-step deviations that
/// minimize the running cost on the control grid at one time step.
pub fn generate_challengers(
    coeffs: &CoefficientSet,
    env: &Environment,
    u_star: &ControlField,
    count: usize,
    seed: u64,
) -> Vec<ControlField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = env.curve().grid();
    let (steps, n) = (u_star.steps(), u_star.nodes());
    let set = &coeffs.control;
    let dim = set.dim();
    let width = set.points().iter().flat_map(|a| set.points().iter().map(move |b| (a - b).norm())).fold(0.0, f64::max).max(1e-12);
    let mut out = Vec::with_capacity(count);
    for c in 0..count {
        let mut v = u_star.clone();
        match c % 3 {
            0 => {
                let tb = rng.random_range(1..=4usize);
                let sb = rng.random_range(1..=4usize);
                let vals: Vec<Point> = (0..tb * sb).map(|_| set.sample(&mut rng)).collect();
                for k in 0..steps {
                    for i in 0..n {
                        let x = grid.point(i);
                        let pos = ((x[0] / grid.half_width() + 1.0) * 0.5 * sb as f64).floor() as usize;
                        v.set(k, i, vals[(k * tb / steps) * sb + pos.min(sb - 1)]);
                    }
                }
            }
            1 => {
                let scale = width * [0.02, 0.1, 0.25][rng.random_range(0..3usize)];
                let mut d = Point::zeros();
                for a in 0..dim {
                    d[a] = rng.random_range(-1.0..=1.0) * scale;
                }
                let local = rng.random_bool(0.5);
                for k in 0..steps {
                    for i in 0..n {
                        let mut e = d;
                        if local {
                            for a in 0..dim {
                                e[a] = rng.random_range(-1.0..=1.0) * scale;
                            }
                        }
                        v.set(k, i, set.project(&(u_star.get(k, i) + e)));
                    }
                }
            }
            _ => {
                let k = rng.random_range(0..steps);
                for i in 0..n {
                    let x = grid.point(i);
                    let best = set
                        .points()
                        .iter()
                        .map(|u| (coeffs.f(u, &x, k, env), *u))
                        .fold((f64::INFINITY, u_star.get(k, i)), |a, b| if b.0 < a.0 { b } else { a });
                    v.set(k, i, best.1);
                }
            }
        }
        out.push(v);
    }
    out
}
