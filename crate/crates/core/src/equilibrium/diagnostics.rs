use super::{initial_curve, FixedPointConfig, IterationRecord};
use crate::best_response::{solve_lp, witness, BestResponseOptions};
use crate::coefficients::{h_inverse, CoefficientSet, ControlShape, Environment, LyapunovData};
use crate::error::{validation, Error, Result};
use crate::fpk::{apriori_monitor, StepStencil};
use crate::measures::{MeasureCurve, StateGrid, TimeGrid};
use crate::Point;

/// `sup |(G_{k,u} ψ)_i|` over steps, nodes and `u ∈ U`. The generator is
/// affine in `u`, so the supremum is computed exactly from two evaluations
/// per axis.
pub fn stencil_bound(coeffs: &CoefficientSet, env: &Environment, psi: &[f64]) -> Result<f64> {
    env.curve().grid().check_len(psi.len(), "test field")?;
    let set = &coeffs.control;
    let dim = set.dim();
    let (center, half): (Point, [f64; 2]) = match set.shape() {
        ControlShape::Box { lo, hi } => ((lo + hi) * 0.5, [(hi[0] - lo[0]) * 0.5, (hi[1] - lo[1]) * 0.5]),
        ControlShape::Ball { center, radius } => (*center, [*radius; 2]),
    };
    let mut bound: f64 = 0.0;
    for k in 0..env.curve().time().steps() {
        let st = StepStencil::new(coeffs, env, k)?;
        let a = st.generator(|_| center).apply(psi);
        let mut slopes = Vec::new();
        for ax in 0..dim {
            if half[ax] == 0.0 {
                slopes.push(vec![0.0; psi.len()]);
                continue;
            }
            let mut u = center;
            u[ax] += half[ax];
            let b = st.generator(|_| u).apply(psi);
            slopes.push(b.iter().zip(&a).map(|(b, a)| (b - a) / half[ax]).collect::<Vec<f64>>());
        }
        for i in 0..psi.len() {
            let extra = match set.shape() {
                ControlShape::Box { .. } => (0..dim).map(|ax| slopes[ax][i].abs() * half[ax]).sum::<f64>(),
                ControlShape::Ball { radius, .. } => radius * (0..dim).map(|ax| slopes[ax][i].powi(2)).sum::<f64>().sqrt(),
            };
            bound = bound.max(a[i].abs() + extra);
        }
    }
    Ok(bound)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulusReport {
    pub c: f64,
    /// Time-node pair `(s, t)` with the smallest margin.
    pub worst_pair: (usize, usize),
    pub worst_lhs: f64,
    pub worst_rhs: f64,
    pub pass: bool,
}

/// Checks `|∫ψ dμ_t − ∫ψ dμ_s| ≤ ω(|t−s|)` with
/// `ω(v) = C v + C v h⁻¹(γR / v)` over all pairs of time nodes.
pub fn modulus_diagnostic(curve: &MeasureCurve, psi: &[f64], c: f64, lyap: &LyapunovData, r: f64) -> Result<ModulusReport> {
    curve.grid().check_len(psi.len(), "test field")?;
    let time = curve.time();
    let gamma = lyap.gamma(time.horizon());
    let vals: Vec<f64> = (0..time.nodes()).map(|k| curve.moment(psi, k)).collect();
    let mut report = ModulusReport { c, worst_pair: (0, 0), worst_lhs: 0.0, worst_rhs: 0.0, pass: true };
    let mut worst_margin = f64::INFINITY;
    for s in 0..time.nodes() {
        for t in s + 1..time.nodes() {
            let v = time.time(t) - time.time(s);
            let lhs = (vals[t] - vals[s]).abs();
            let rhs = c * v + c * v * h_inverse(&*lyap.h, gamma * r / v)?;
            let margin = rhs - lhs;
            if margin < worst_margin {
                worst_margin = margin;
                report.worst_pair = (s, t);
                report.worst_lhs = lhs;
                report.worst_rhs = rhs;
            }
            if lhs > rhs + 1e-12 * (1.0 + rhs) {
                report.pass = false;
            }
        }
    }
    Ok(report)
}

/// `2 max(∫V dν, T h(|u₀|) / γ)`: covers the moment at time zero and the
/// control budget of the constant witness with a factor of two to spare.
pub fn default_r(coeffs: &CoefficientSet, grid: &StateGrid, horizon: f64, nu: &[f64], u0: Point) -> Result<f64> {
    grid.check_len(nu.len(), "initial law")?;
    let lyap = &coeffs.lyapunov;
    let v = grid.field(&*lyap.v);
    let m0: f64 = v.iter().zip(nu).map(|(a, b)| a * b).sum();
    let budget = horizon * (lyap.h)(u0.norm()) / lyap.gamma(horizon);
    Ok(2.0 * m0.max(budget))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub r: f64,
    pub witness_pass: bool,
    /// Every best-response state satisfied both bounds (false if not run).
    pub best_response_pass: bool,
    pub pass: bool,
    /// Smallest moment margin of the witness.
    pub witness_margin: f64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Smallest passing ladder value.
    pub r0: Option<f64>,
    /// No failure after the first pass.
    pub monotone: bool,
}

/// For each `R` on the ladder: check the constant witness, then run
/// `iterations` damped best-response steps and check every best-response state
/// against both a-priori bounds.
pub fn apriori_sweep(
    coeffs: &CoefficientSet,
    grid: &StateGrid,
    time: &TimeGrid,
    nu: &[f64],
    ladder: &[f64],
    cfg: &FixedPointConfig,
    iterations: usize,
) -> Result<SweepReport> {
    if ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(validation("R ladder must be strictly increasing"));
    }
    let sigma0 = initial_curve(coeffs, grid, time, nu, cfg.default_control, cfg.cfl_max)?;
    let mut rows = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let env0 = Environment::new(sigma0.clone());
        let (wit, _) = witness(coeffs, &env0, nu, r, cfg.default_control, cfg.cfl_max)?;
        let witness_margin = wit.margins.iter().copied().fold(f64::INFINITY, f64::min);
        let mut br_pass = wit.pass;
        if wit.pass {
            let opts = BestResponseOptions { r, default_control: cfg.default_control, cfl_max: cfg.cfl_max };
            let mut sigma = sigma0.clone();
            for k in 0..iterations {
                let env = Environment::new(sigma.clone());
                let br = match solve_lp(coeffs, &env, nu, &opts) {
                    Ok(br) => br,
                    Err(Error::Infeasible(_)) => {
                        br_pass = false;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let rep = apriori_monitor(&br.state.curve, &coeffs.lyapunov, r, &br.control)?;
                if !rep.pass {
                    br_pass = false;
                    break;
                }
                sigma = sigma.mix(&br.state.curve, cfg.weight(k))?;
            }
        }
        log::info!("sweep R = {r}: witness {}, best responses {br_pass}", wit.pass);
        rows.push(SweepRow { r, witness_pass: wit.pass, best_response_pass: br_pass, pass: wit.pass && br_pass, witness_margin });
    }
    let first = rows.iter().position(|r| r.pass);
    let monotone = first.is_none_or(|f| rows[f..].iter().all(|r| r.pass));
    Ok(SweepReport { r0: first.map(|f| rows[f].r), rows, monotone })
}

/// `liminf` of the recorded relaxed costs over the second half of the history,
/// and whether it is at least `limit − 1e-6`.
pub fn lsc_probe(history: &[IterationRecord], limit: f64) -> (f64, bool) {
    let tail = &history[history.len() / 2..];
    let liminf = tail.iter().map(|h| h.relaxed_cost).fold(f64::INFINITY, f64::min);
    (liminf, liminf >= limit - 1e-6)
}
