//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line with
//! its runtime; the test fails if any criterion fails.

use mfg_cli::config::ScenarioConfig;
use mfg_core::best_response::{resolve_and_compare, sample_feasible, solve_lp, BestResponseOptions, ControlField};
use mfg_core::coefficients::catalog::{example_catalog, standard_lyapunov, Params};
use mfg_core::coefficients::hypotheses::{check_all, check_h2_1, Sample};
use mfg_core::coefficients::{beta_vw, legendre, CoefficientSet, ControlSet, Dependence, Environment};
use mfg_core::equilibrium::{apriori_sweep, certify, generate_challengers, iterate, FixedPointConfig};
use mfg_core::fpk::{apriori_monitor, fpk_residual, solve_fpk, step_generators, Scheme, SolveOptions};
use mfg_core::measures::{gaussian_weights, mollify_curve, subprob_jensen_check, MeasureCurve, StateGrid, TimeGrid};
use mfg_core::particles::{simulate, superposition_gap};
use mfg_core::{Mat, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, u64);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn custom(
    dim: usize,
    control: ControlSet,
    a: f64,
    drift: impl Fn(&Point) -> Point + Send + Sync + 'static,
    q: f64,
    f: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    g: impl Fn(&Point) -> f64 + Send + Sync + 'static,
) -> CoefficientSet {
    let id = if dim == 1 { Mat::new(1.0, 0.0, 0.0, 0.0) } else { Mat::identity() };
    CoefficientSet {
        name: "custom".into(),
        dim,
        control,
        lyapunov: standard_lyapunov(1.0, [1.0, 1.0, 1.5, 1.0], 1.0, 1.0),
        mode: Dependence::None,
        diffusion: Arc::new(move |_, _, _| a * id),
        drift: Arc::new(move |x, _, _| drift(x)),
        control_matrix: Arc::new(move |_, _, _| q * id),
        running_cost: Arc::new(move |u, x, _, _| f(u, x)),
        terminal_cost: Arc::new(move |x, _| g(x)),
    }
}

fn p1(x: f64) -> Point {
    Point::new(x, 0.0)
}

fn line(l: f64, n: usize) -> StateGrid {
    StateGrid::new(1, l, n).unwrap()
}

fn frozen(grid: &StateGrid, time: &TimeGrid, nu: &[f64]) -> Environment {
    Environment::new(MeasureCurve::constant(grid.clone(), time.clone(), nu).unwrap())
}

fn u_box(lo: f64, hi: f64, n: usize) -> ControlSet {
    ControlSet::uniform_box(1, lo, hi, n).unwrap()
}

fn variance(grid: &StateGrid, w: &[f64]) -> f64 {
    let m: f64 = (0..grid.len()).map(|i| grid.coord(i) * w[i]).sum();
    (0..grid.len()).map(|i| (grid.coord(i) - m).powi(2) * w[i]).sum()
}

fn zero_field(time: &TimeGrid, grid: &StateGrid) -> ControlField {
    ControlField::constant(time.steps(), grid.len(), Point::zeros())
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn c1_fpk_oracles() -> Outcome {
    let heat = custom(1, u_box(-1.0, 1.0, 3), 0.5, |_| Point::zeros(), 0.0, |_, _| 0.0, |_| 0.0);
    let g = line(3.0, 401);
    let t = TimeGrid::new(0.2, 2000).unwrap();
    let nu = gaussian_weights(&g, &Point::zeros(), 0.04).unwrap();
    let start = Instant::now();
    let rep = solve_fpk(&heat, &frozen(&g, &t, &nu), &zero_field(&t, &g), &nu, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let heat_time = start.elapsed();
    let exact = 0.04 + 2.0 * 0.5 * 0.2;
    let heat_err = (variance(&g, rep.curve.slice(2000)) - exact).abs() / exact;

    // OU dX = −X dt + dW: stationary variance a/κ = 0.5
    let ou = custom(1, u_box(-1.0, 1.0, 3), 0.5, |x| -x, 0.0, |_, _| 0.0, |_| 0.0);
    let g = line(4.0, 321);
    let t = TimeGrid::new(6.0, 12000).unwrap();
    let nu = gaussian_weights(&g, &p1(1.0), 0.04).unwrap();
    let start = Instant::now();
    let rep = solve_fpk(&ou, &frozen(&g, &t, &nu), &zero_field(&t, &g), &nu, &SolveOptions::default()).map_err(|e| e.to_string())?;
    let ou_time = start.elapsed();
    let ou_err = (variance(&g, rep.curve.slice(12000)) - 0.5).abs() / 0.5;
    let msg = format!("heat rel err {heat_err:.2e} ({heat_time:.1?}), OU rel err {ou_err:.2e} ({ou_time:.1?})");
    ensure(heat_err <= 0.02 && ou_err <= 0.02, || msg.clone())?;
    ensure(heat_time < Duration::from_secs(10) && ou_time < Duration::from_secs(10), || format!("too slow: {msg}"))?;
    Ok(msg)
}

/// Random 1D scenario with a stable explicit step.
fn random_scenario(seed: u64) -> (CoefficientSet, StateGrid, TimeGrid, Vec<f64>, ControlField) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(5..60);
    let grid = line(rng.random_range(0.5..3.0), n);
    let control = u_box(-1.0, 1.0, 3);
    let a: f64 = rng.random_range(0.0..1.0);
    let (kappa, shift) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let q = rng.random_range(0.0..2.0);
    let coeffs = custom(1, control.clone(), a, move |x| p1(shift) - kappa * x, q, |_, _| 0.0, |_| 0.0);
    let mut nu: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() }).collect();
    if nu.iter().sum::<f64>() == 0.0 {
        nu[0] = 1.0;
    }
    let s: f64 = nu.iter().sum();
    nu.iter_mut().for_each(|w| *w /= s);
    let h = grid.dx();
    let rate = 2.0 * a / (h * h) + (shift.abs() + kappa.abs() * grid.half_width() + q) * 2.0 / h;
    let steps = rng.random_range(3..20);
    let dt = 0.8 / rate * rng.random_range(0.2..1.0);
    let time = TimeGrid::new(dt * steps as f64, steps).unwrap();
    let vals = (0..steps * n).map(|_| control.sample(&mut rng)).collect();
    (coeffs, grid, time, nu, ControlField::new(steps, n, vals).unwrap())
}

fn c2_conservation() -> Outcome {
    let (mut defect, mut low, mut duality): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for seed in 0..500u64 {
        let (coeffs, grid, time, nu, u) = random_scenario(seed);
        let env = frozen(&grid, &time, &nu);
        let rep = solve_fpk(&coeffs, &env, &u, &nu, &SolveOptions::default()).map_err(|e| format!("seed {seed}: {e}"))?;
        defect = rep.mass_defect.iter().fold(defect, |m, d| m.max(*d));
        low = rep.curve.slices().iter().flatten().fold(low, |m, w| m.min(*w));
        // ⟨ψ, σ_K − ν⟩ = Δt Σ_k ⟨Gψ, σ_k⟩
        let gens = step_generators(&coeffs, &env, &u).map_err(|e| e.to_string())?;
        let psi: Vec<f64> = (0..grid.len()).map(|i| (grid.coord(i) * 1.7).sin() + grid.coord(i).powi(2)).collect();
        let rhs: f64 = gens
            .iter()
            .enumerate()
            .map(|(k, gk)| time.dt() * gk.apply(&psi).iter().zip(rep.curve.slice(k)).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let lhs: f64 = (0..grid.len()).map(|i| psi[i] * (rep.curve.slice(time.steps())[i] - nu[i])).sum();
        duality = duality.max((lhs - rhs).abs());
        let res = fpk_residual(&coeffs, &env, &u, &rep.curve, Scheme::Explicit).map_err(|e| e.to_string())?;
        duality = duality.max(res);
    }
    let msg = format!("500 scenarios: max defect {defect:.1e}, min weight {low:.1e}, duality {duality:.1e}");
    ensure(defect <= 1e-12 && low >= -1e-12 && duality <= 1e-10, || msg.clone())?;
    Ok(msg)
}

fn c3_superposition() -> Outcome {
    let grid = line(3.0, 201);
    let time = TimeGrid::new(0.5, 700).unwrap();
    let nu = gaussian_weights(&grid, &p1(0.5), 0.1).unwrap();
    let env = frozen(&grid, &time, &nu);
    let feedback = ControlField::new(
        time.steps(),
        grid.len(),
        (0..time.steps() * grid.len()).map(|c| p1((-grid.coord(c % grid.len())).clamp(-1.0, 1.0))).collect(),
    )
    .unwrap();
    let cases: Vec<(&str, CoefficientSet, ControlField)> = vec![
        ("heat", custom(1, u_box(-1.0, 1.0, 3), 0.5, |_| Point::zeros(), 0.0, |_, _| 0.0, |_| 0.0), zero_field(&time, &grid)),
        ("OU", custom(1, u_box(-1.0, 1.0, 3), 0.5, |x| -x, 0.0, |_, _| 0.0, |_| 0.0), zero_field(&time, &grid)),
        ("controlled", custom(1, u_box(-1.0, 1.0, 3), 0.3, |x| p1(0.5) - 0.5 * x, 1.0, |_, _| 0.0, |_| 0.0), feedback),
    ];
    let mut parts = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, c, u) in cases {
        let sol = solve_fpk(&c, &env, &u, &nu, &SolveOptions::default()).map_err(|e| e.to_string())?;
        let ens = simulate(&c, &env, &u, &nu, 100_000, 17).map_err(|e| e.to_string())?;
        let gap = superposition_gap(&ens, &sol.curve).map_err(|e| e.to_string())?.into_iter().fold(0.0, f64::max);
        worst = worst.max(gap);
        parts.push(format!("{name} {gap:.3e}"));
    }
    let msg = format!("max W1 gap: {}", parts.join(", "));
    ensure(worst <= 0.05, || msg.clone())?;
    Ok(msg)
}

/// Random 3-node, 2-step, 2-control instance.
fn tiny(seed: u64) -> (CoefficientSet, StateGrid, TimeGrid, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = rng.random_range(0.0..0.5);
    let b = rng.random_range(-0.5..0.5);
    let q = rng.random_range(0.2..1.0);
    let (c, th) = (rng.random_range(0.1..2.0), rng.random_range(-1.0..1.0));
    let gw: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let coeffs = custom(
        1,
        u_box(-1.0, 1.0, 2),
        a,
        move |_| p1(b),
        q,
        move |u, x| c * (u[0] - th * x[0]).powi(2) + x[0],
        move |x| gw[(x[0].round() + 1.0) as usize],
    );
    let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    (coeffs, line(1.0, 3), TimeGrid::new(0.4, 2).unwrap(), raw.iter().map(|x| x / s).collect())
}

/// Minimum cost over every deterministic feedback policy inside the a-priori bounds.
fn enumerate(coeffs: &CoefficientSet, env: &Environment, nu: &[f64], r: f64) -> f64 {
    let grid = env.curve().grid();
    let time = env.curve().time();
    let (n, steps) = (grid.len(), time.steps());
    let us = coeffs.control.points();
    let cells = n * steps;
    let mut best = f64::INFINITY;
    for code in 0..us.len().pow(cells as u32) {
        let vals = (0..cells).map(|c| us[(code / us.len().pow(c as u32)) % us.len()]).collect();
        let u = ControlField::new(steps, n, vals).unwrap();
        let st = solve_fpk(coeffs, env, &u, nu, &SolveOptions::default()).unwrap().curve;
        if !apriori_monitor(&st, &coeffs.lyapunov, r, &u).unwrap().pass {
            continue;
        }
        let mut cost: f64 = (0..n).map(|i| coeffs.g(&grid.point(i), env) * st.slice(steps)[i]).sum();
        for k in 0..steps {
            for i in 0..n {
                cost += time.dt() * coeffs.f(&u.get(k, i), &grid.point(i), k, env) * st.slice(k)[i];
            }
        }
        best = best.min(cost);
    }
    best
}

fn c4_brute_force() -> Outcome {
    let (mut matched, mut bounded, mut worst): (usize, usize, f64) = (0, 0, 0.0);
    for seed in 0..20u64 {
        let (coeffs, grid, time, nu) = tiny(seed);
        let env = frozen(&grid, &time, &nu);
        let res = solve_lp(&coeffs, &env, &nu, &BestResponseOptions::new(100.0, p1(1.0))).map_err(|e| e.to_string())?;
        let brute = enumerate(&coeffs, &env, &nu, 100.0);
        if res.feasibility.deterministic {
            worst = worst.max((res.lp_objective - brute).abs());
            ensure((res.lp_objective - brute).abs() <= 1e-8, || format!("seed {seed}: lp {} vs {brute}", res.lp_objective))?;
            matched += 1;
        } else {
            ensure(res.lp_objective <= brute + 1e-8, || format!("seed {seed}: lp {} above {brute}", res.lp_objective))?;
            bounded += 1;
        }
    }
    Ok(format!("{matched} deterministic matches (max diff {worst:.1e}), {bounded} relaxed lower bounds"))
}

fn c5_jensen() -> Outcome {
    let coeffs = custom(1, u_box(-1.5, 1.5, 7), 0.15, |x| -0.5 * x, 0.8, |u, x| u[0] * u[0] + 0.5 * (u[0] - x[0]).abs(), |x| x[0] * x[0]);
    let g = line(2.0, 15);
    let t = TimeGrid::new(1.0, 30).unwrap();
    let nu = gaussian_weights(&g, &p1(0.4), 0.3).unwrap();
    let env = frozen(&g, &t, &nu);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut violations, mut slack) = (0, f64::INFINITY);
    for draw in 0..50 {
        let pi = sample_feasible(&coeffs, &env, &nu, [0.0, 0.5, 0.8][draw % 3], &mut rng).map_err(|e| e.to_string())?;
        let r = resolve_and_compare(&coeffs, &env, &nu, &pi, Point::zeros(), 0.9).map_err(|e| e.to_string())?;
        if r.projected_cost > r.relaxed_cost + 1e-8 {
            violations += 1;
        }
        slack = slack.min(r.relaxed_cost - r.projected_cost);
    }
    let msg = format!("50 draws, {violations} violations, min slack {slack:.2e}");
    ensure(violations == 0, || msg.clone())?;
    Ok(msg)
}

fn c6_apriori() -> Outcome {
    let cfg = ScenarioConfig::load(&scenario("ex2_1.toml"), &[]).map_err(|e| e.to_string())?;
    let grid = cfg.state_grid().map_err(|e| e.to_string())?;
    let time = cfg.time_grid().map_err(|e| e.to_string())?;
    let coeffs = cfg.coefficients().map_err(|e| e.to_string())?;
    let nu = cfg.initial_law(&grid).map_err(|e| e.to_string())?;
    let m0: f64 = grid.field(&*coeffs.lyapunov.v).iter().zip(&nu).map(|(a, b)| a * b).sum();
    // the lowest rungs sit below ∫V dν and must fail
    let ladder: Vec<f64> = (-3..7).map(|i| m0 * 1.25f64.powi(i)).collect();
    let fp = cfg.fixed_point(m0);
    let sweep = apriori_sweep(&coeffs, &grid, &time, &nu, &ladder, &fp, 1).map_err(|e| e.to_string())?;
    let r0 = sweep.r0.ok_or_else(|| format!("no rung of {ladder:?} passes"))?;
    ensure(sweep.monotone, || format!("pass pattern not monotone: {:?}", sweep.rows.iter().map(|r| r.pass).collect::<Vec<_>>()))?;
    let passes: Vec<bool> = sweep.rows.iter().map(|r| r.pass).collect();
    ensure(!passes[0], || format!("rung below the initial moment passed: {passes:?}"))?;
    let res = iterate(&coeffs, &grid, &time, &nu, &cfg.fixed_point(r0)).map_err(|e| e.to_string())?;
    let ap = apriori_monitor(&res.mu_star, &coeffs.lyapunov, r0, &res.u_star).map_err(|e| e.to_string())?;
    let worst = ap.moment.iter().zip(&ap.envelope).map(|(m, e)| m / e).fold(0.0, f64::max);
    let msg = format!(
        "R0 {r0:.3}, {} iterations (gap {:.1e}), max moment/envelope {worst:.3}, control {:.3e} <= {:.3e}",
        res.history.len(),
        res.fixed_point_gap,
        ap.control_integral,
        ap.control_budget
    );
    ensure(ap.pass_moment && ap.pass_control, || msg.clone())?;
    Ok(msg)
}

fn c7_legendre_beta() -> Outcome {
    let mut worst: f64 = 0.0;
    for c in [0.5, 1.0, 3.0] {
        let h = move |v: f64| c * v * v;
        for i in 0..=100 {
            let p = i as f64 * 0.1;
            worst = worst.max((legendre(&h, p, 1e3).map_err(|e| e.to_string())? - p * p / (4.0 * c)).abs());
        }
    }
    ensure(worst <= 1e-4, || format!("legendre error {worst:e}"))?;
    let g = line(8.0, 161);
    let v = |x: &Point| 1.0 + x.norm_squared();
    let w = |x: &Point| x.norm();
    let mut parts = vec![format!("legendre err {worst:.1e}")];
    for r in [5.0, 50.0] {
        let b = beta_vw(&v, &w, &g, r).map_err(|e| e.to_string())?;
        let exact = (r - 1.0).sqrt() / r;
        ensure((b - exact).abs() <= g.dx() / r, || format!("beta({r}) = {b} vs {exact}"))?;
        parts.push(format!("beta({r}) {b:.4}"));
    }
    let betas: Vec<f64> = (1..=8).map(|e| beta_vw(&v, &w, &g, 2f64.powi(e)).unwrap()).collect();
    ensure(betas.windows(2).all(|p| p[1] <= p[0] + 1e-12), || format!("ladder not decreasing: {betas:?}"))?;
    ensure(betas[7] < 0.1 * betas[0], || format!("beta(256) {} vs beta(2) {}", betas[7], betas[0]))?;
    // the continuum ratio is √255/256 ÷ ½ ≈ 0.125; the grid caps mass at |x| = 8
    let continuum = 255f64.sqrt() / 256.0 / 0.5;
    parts.push(format!("beta(256)/beta(2) {:.3} on |x| <= 8 (continuum {continuum:.3})", betas[7] / betas[0]));
    Ok(parts.join(", "))
}

fn c8_hypotheses() -> Outcome {
    let mut checked = 0;
    for dim in [1, 2] {
        let grid = StateGrid::new(dim, if dim == 1 { 3.0 } else { 2.0 }, if dim == 1 { 31 } else { 9 }).unwrap();
        let time = TimeGrid::new(1.0, 8).unwrap();
        let nu = gaussian_weights(&grid, &Point::new(0.5, -0.5 * (dim - 1) as f64), 0.25).unwrap();
        let env = frozen(&grid, &time, &nu);
        let u = ControlSet::uniform_box(dim, -1.0, 1.0, if dim == 1 { 9 } else { 3 }).unwrap();
        for name in ["ex2.1", "ex2.2"] {
            let c = example_catalog(name, &Params::new(), dim, u.clone()).map_err(|e| e.to_string())?;
            let sample = Sample::standard(&grid, &time, &c.control, 7);
            for r in check_all(&c, &env, &sample).map_err(|e| e.to_string())? {
                ensure(r.pass(), || format!("{name} {dim}D: {}", r.to_text()))?;
                checked += 1;
            }
        }
    }
    let cubic = custom(1, u_box(-1.0, 1.0, 9), 0.1, |x| x * x.norm_squared(), 1.0, |u, _| u.norm_squared(), |_| 0.0);
    let grid = line(3.0, 31);
    let time = TimeGrid::new(1.0, 4).unwrap();
    let env = frozen(&grid, &time, &gaussian_weights(&grid, &Point::zeros(), 0.25).unwrap());
    let r = check_h2_1(&cubic, &env, &Sample::standard(&grid, &time, &cubic.control, 1)).map_err(|e| e.to_string())?;
    ensure(!r.pass(), || "cubic drift passed the Lyapunov check".into())?;
    Ok(format!("{checked} catalog reports pass, cubic drift rejected"))
}

fn c9_equilibrium() -> Outcome {
    let grid = line(2.0, 15);
    let time = TimeGrid::new(1.0, 10).unwrap();
    let nu = gaussian_weights(&grid, &p1(-0.5), 0.2).unwrap();
    let lq = custom(1, u_box(-1.0, 1.0, 5), 0.1, |x| -0.5 * x, 1.0, |u, x| u.norm_squared() + (x[0] - 0.5).abs(), |x| x.norm_squared());
    let r = iterate(&lq, &grid, &time, &nu, &FixedPointConfig::new(20.0, p1(1.0))).map_err(|e| e.to_string())?;
    ensure(r.converged && r.history.len() == 2 && r.history[1].kr_gap == 0.0, || format!("independent mode: {:?}", r.history))?;

    let cfg = ScenarioConfig::load(&scenario("crowd.toml"), &[]).map_err(|e| e.to_string())?;
    let grid = cfg.state_grid().map_err(|e| e.to_string())?;
    let time = cfg.time_grid().map_err(|e| e.to_string())?;
    let coeffs = cfg.coefficients().map_err(|e| e.to_string())?;
    let nu = cfg.initial_law(&grid).map_err(|e| e.to_string())?;
    let rbound = cfg.moment_bound(&coeffs, &grid, &nu).map_err(|e| e.to_string())?;
    let fp = cfg.fixed_point(rbound);
    let res = iterate(&coeffs, &grid, &time, &nu, &fp).map_err(|e| e.to_string())?;
    let env = Environment::new(res.environment.clone());
    let ch = generate_challengers(&coeffs, &env, &res.u_star, 100, cfg.seed);
    let cert = certify(&coeffs, &env, &res.u_star, &res.mu_star, &ch, &nu, fp.cfl_max).map_err(|e| e.to_string())?;
    let msg = format!(
        "independent mode gap 0 after 1 step; crowd gap {:.3e} after {} iterations, exploitability {:.1e} vs 100 challengers",
        res.fixed_point_gap,
        res.history.len(),
        cert.exploitability
    );
    ensure(res.fixed_point_gap <= 1e-3 && res.history.len() <= 200 && cert.exploitability <= 1e-3, || msg.clone())?;
    Ok(msg)
}

fn c10_mollification() -> Outcome {
    let g = line(2.0, 41);
    let time = TimeGrid::new(1.0, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut mass, mut min_dens, mut sup_excess): (f64, f64, f64) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
    for eps in [0.05, 0.2, 0.45] {
        let slices: Vec<Vec<f64>> = (0..time.nodes())
            .map(|_| {
                let raw: Vec<f64> = (0..g.len()).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() + 1e-3 }).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        let curve = MeasureCurve::new(g.clone(), time.clone(), slices).unwrap();
        let u: Vec<Vec<f64>> = (0..time.nodes()).map(|_| (0..g.len()).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let sup = u.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let m = mollify_curve(&curve, &u, eps).map_err(|e| e.to_string())?;
        for (d, p) in m.density.iter().zip(&m.payload) {
            mass = mass.max((d.iter().sum::<f64>() - 1.0).abs());
            min_dens = d.iter().fold(min_dens, |a, b| a.min(*b));
            sup_excess = p.iter().fold(sup_excess, |a, b| a.max(b.abs() - sup));
        }
    }
    ensure(mass <= 1e-8 && min_dens > 0.0 && sup_excess <= 1e-12, || {
        format!("mass err {mass:e}, min density {min_dens:e}, sup excess {sup_excess:e}")
    })?;
    let mut violations = 0;
    for trial in 0..200 {
        let len = rng.random_range(1..8);
        let xi: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..5.0)).collect();
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>()).collect();
        let total = rng.random::<f64>() * (1.0 - 1e-12) / raw.iter().sum::<f64>().max(1e-12);
        let omega: Vec<f64> = raw.iter().map(|r| r * total).collect();
        let p = rng.random_range(1.0..3.0);
        let ok = match trial % 3 {
            0 => subprob_jensen_check(|v| v.powf(p), &xi, &omega),
            1 => subprob_jensen_check(|v| v.exp() - 1.0, &xi, &omega),
            _ => subprob_jensen_check(|v| v * v + v, &xi, &omega),
        }
        .map_err(|e| e.to_string())?;
        if !ok {
            violations += 1;
        }
    }
    let msg = format!("mass err {mass:.1e}, min density {min_dens:.1e}; 200 Jensen triples, {violations} violations");
    ensure(violations == 0, || msg.clone())?;
    Ok(msg)
}

fn c11_reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let small = ["--set", "grid.n=15", "--set", "grid.steps=20", "--set", "control.points=5", "--set", "particles.count=5000"];
    let mut compared = 0;
    for (cmd, cfg) in [
        ("equilibrium", "crowd.toml"),
        ("equilibrium", "ex2_1.toml"),
        ("best-response", "ex2_1.toml"),
        ("solve-fpk", "crowd.toml"),
        ("particle-check", "ex2_1.toml"),
        ("check-hypotheses", "crowd.toml"),
    ] {
        let dirs: Vec<PathBuf> = (0..2).map(|i| tmp.path().join(format!("{cmd}-{cfg}-{i}"))).collect();
        for d in &dirs {
            let out = Command::new(env!("CARGO_BIN_EXE_mfg"))
                .arg(cmd)
                .arg(scenario(cfg))
                .arg("--out")
                .arg(d)
                .args(small)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(matches!(out.status.code(), Some(0) | Some(2)), || format!("{cmd} {cfg}: {}", String::from_utf8_lossy(&out.stderr)))?;
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name())
            .filter(|n| n.to_string_lossy().ends_with(".csv"))
            .collect();
        names.sort();
        ensure(!names.is_empty(), || format!("{cmd} wrote no CSV files"))?;
        for n in names {
            let a = std::fs::read(dirs[0].join(&n)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dirs[1].join(&n)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{cmd} {cfg}: {} differs", n.to_string_lossy()))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV files byte-identical across reruns"))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("1 FPK analytic oracles", c1_fpk_oracles, 20),
        ("2 conservation and positivity", c2_conservation, 60),
        ("3 superposition cross-check", c3_superposition, 60),
        ("4 best response vs enumeration", c4_brute_force, 30),
        ("5 Jensen projection", c5_jensen, 60),
        ("6 a-priori bounds", c6_apriori, 120),
        ("7 Legendre and beta", c7_legendre_beta, 10),
        ("8 hypothesis catalog", c8_hypotheses, 30),
        ("9 equilibrium end to end", c9_equilibrium, 600),
        ("10 mollification", c10_mollification, 10),
        ("11 reproducibility", c11_reproducibility, 600),
    ];
    let mut failed = Vec::new();
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome =
            outcome.and_then(|m| if took > Duration::from_secs(budget) { Err(format!("{m}; over the {budget} s budget")) } else { Ok(m) });
        match outcome {
            Ok(m) => println!("criterion {name}: PASS ({took:.1?}) {m}"),
            Err(m) => {
                println!("criterion {name}: FAIL ({took:.1?}) {m}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
