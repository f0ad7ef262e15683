//! Euler–Maruyama particle simulation of the controlled SDE
//! `dX = √(2A) dW + (b + Qu) dt`, and its comparison with the grid solution.
//!
//! Each particle owns a ChaCha8 stream `(seed, particle index)`, so results do
//! not depend on how particles are scheduled across threads.

use crate::best_response::ControlField;
use crate::coefficients::linalg::psd_sqrt;
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{dimension, validation, Error, Result};
use crate::measures::{check_probability, wasserstein_p, MeasureCurve, StateGrid, TimeGrid};
use crate::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Particles per reduction chunk. Fixed so sums are grouped identically on
/// every run.
const CHUNK: usize = 4096;

/// Trajectories of `N` particles at every time node.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    grid: StateGrid,
    time: TimeGrid,
    seed: u64,
    particles: usize,
    // particle-major: ((p * (K+1)) + k) * dim + axis
    positions: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn len(&self) -> usize {
        self.particles
    }
    pub fn is_empty(&self) -> bool {
        self.particles == 0
    }

    /// Position of particle `p` at time node `k`.
    pub fn position(&self, p: usize, k: usize) -> Point {
        let d = self.grid.dim();
        let o = (p * self.time.nodes() + k) * d;
        if d == 1 {
            Point::new(self.positions[o], 0.0)
        } else {
            Point::new(self.positions[o], self.positions[o + 1])
        }
    }

    /// Nearest-node histogram at time node `k`.
    pub fn binned(&self, k: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.grid.len()];
        for p in 0..self.particles {
            w[self.grid.nearest(&self.position(p, k))] += 1.0;
        }
        let inv = 1.0 / self.particles as f64;
        w.iter_mut().for_each(|x| *x *= inv);
        w
    }

    /// Per-time mean and total variance (trace of the covariance).
    pub fn summary(&self) -> Vec<MomentRow> {
        (0..self.time.nodes())
            .map(|k| {
                let mut acc = Moments::default();
                for chunk in (0..self.particles).collect::<Vec<_>>().chunks(CHUNK) {
                    let mut c = Moments::default();
                    for &p in chunk {
                        c.push(&self.position(p, k));
                    }
                    acc.merge(&c);
                }
                acc.row(self.time.time(k))
            })
            .collect()
    }
}

/// Mean and total variance at one time node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentRow {
    pub t: f64,
    pub mean: Point,
    pub var: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: usize,
    sum: Point,
    sum_sq: Point,
}

impl Moments {
    fn push(&mut self, x: &Point) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x.component_mul(x);
    }
    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }
    fn row(&self, t: f64) -> MomentRow {
        let n = self.n as f64;
        let mean = self.sum / n;
        let ex2 = self.sum_sq / n;
        let var = (ex2[0] - mean[0] * mean[0]) + (ex2[1] - mean[1] * mean[1]);
        MomentRow { t, mean, var: var.max(0.0), count: self.n }
    }
}

struct Sim<'a> {
    coeffs: &'a CoefficientSet,
    env: &'a Environment,
    control: &'a ControlField,
    cdf: Vec<f64>,
    seed: u64,
}

impl Sim<'_> {
    fn new<'a>(coeffs: &'a CoefficientSet, env: &'a Environment, control: &'a ControlField, nu: &[f64], seed: u64) -> Result<Sim<'a>> {
        let grid = env.curve().grid();
        coeffs.check_grid(grid)?;
        check_probability(nu, grid.len(), "initial law")?;
        if control.nodes() != grid.len() || control.steps() != env.curve().time().steps() {
            return Err(dimension("control field does not match the environment grids"));
        }
        let mut acc = 0.0;
        let cdf = nu
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Ok(Sim { coeffs, env, control, cdf, seed })
    }

    /// Runs particle `p`, calling `visit(k, x)` at every time node.
    fn run(&self, p: usize, mut visit: impl FnMut(usize, &Point)) -> Result<()> {
        let grid = self.env.curve().grid();
        let time = self.env.curve().time();
        let (dim, l, dt) = (grid.dim(), grid.half_width(), time.dt());
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(p as u64);
        let total = *self.cdf.last().unwrap_or(&1.0);
        let draw: f64 = rng.random::<f64>() * total;
        let node = self.cdf.partition_point(|c| *c <= draw).min(grid.len() - 1);
        let mut x = grid.point(node);
        visit(0, &x);
        let sdt = dt.sqrt();
        for k in 0..time.steps() {
            let a = self.coeffs.a(&x, k, self.env);
            let s = psd_sqrt(&(2.0 * a), dim)?;
            let b = self.coeffs.b(&x, k, self.env);
            let q = self.coeffs.q(&x, k, self.env);
            let u = self.control.get(k, grid.nearest(&x));
            let mut xi = Point::zeros();
            for a in 0..dim {
                xi[a] = rng.sample(StandardNormal);
            }
            x += (b + q * u) * dt + s * xi * sdt;
            for a in 0..dim {
                if !x[a].is_finite() || x[a].abs() > 10.0 * l {
                    return Err(Error::Divergence { particle: p, step: k + 1 });
                }
                while x[a].abs() > l {
                    x[a] = if x[a] > l { 2.0 * l - x[a] } else { -2.0 * l - x[a] };
                }
            }
            visit(k + 1, &x);
        }
        Ok(())
    }
}

/// Simulates `n` particles started from `ν` (sampled at grid nodes) under the
/// feedback control `u`, read at the nearest node. Particles reflect at the
/// truncation boundary; `|x| > 10L` aborts.
pub fn simulate(coeffs: &CoefficientSet, env: &Environment, u: &ControlField, nu: &[f64], n: usize, seed: u64) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(validation("ensemble needs at least one particle"));
    }
    let sim = Sim::new(coeffs, env, u, nu, seed)?;
    let grid = env.curve().grid().clone();
    let time = env.curve().time().clone();
    let (dim, nodes) = (grid.dim(), time.nodes());
    let mut positions = vec![0.0; n * nodes * dim];
    positions
        .par_chunks_mut(nodes * dim)
        .enumerate()
        .map(|(p, out)| {
            sim.run(p, |k, x| {
                out[k * dim..(k + 1) * dim].copy_from_slice(&x.as_slice()[..dim]);
            })
        })
        .collect::<Result<Vec<()>>>()?;
    Ok(ParticleEnsemble { grid, time, seed, particles: n, positions })
}

/// Per-time mean and variance of `n` particles without storing trajectories.
pub fn simulate_moments(
    coeffs: &CoefficientSet,
    env: &Environment,
    u: &ControlField,
    nu: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    if n == 0 {
        return Err(validation("ensemble needs at least one particle"));
    }
    let sim = Sim::new(coeffs, env, u, nu, seed)?;
    let time = env.curve().time();
    let nodes = time.nodes();
    let chunks: Vec<Vec<Moments>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); nodes];
            for p in c * CHUNK..((c + 1) * CHUNK).min(n) {
                sim.run(p, |k, x| acc[k].push(x))?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Moments::default(); nodes];
    for c in &chunks {
        for (t, m) in total.iter_mut().zip(c) {
            t.merge(m);
        }
    }
    Ok(total.iter().enumerate().map(|(k, m)| m.row(time.time(k))).collect())
}

/// `W₁` distance between the binned ensemble and the grid solution at every
/// time node.
pub fn superposition_gap(ensemble: &ParticleEnsemble, grid_solution: &MeasureCurve) -> Result<Vec<f64>> {
    ensemble.grid.check_same(grid_solution.grid())?;
    if ensemble.time != *grid_solution.time() {
        return Err(dimension("ensemble and grid solution have different time grids"));
    }
    (0..ensemble.time.nodes())
        .into_par_iter()
        .map(|k| {
            let emp = ensemble.binned(k);
            Ok(wasserstein_p(&emp, grid_solution.slice(k), &ensemble.grid, 1)?.distance)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of `E[∫f dt + g(X_T)]` with left-endpoint time
/// quadrature along the stored trajectories.
pub fn cost_estimate(ensemble: &ParticleEnsemble, coeffs: &CoefficientSet, env: &Environment, u: &ControlField) -> Result<CostEstimate> {
    ensemble.grid.check_same(env.curve().grid())?;
    let time = &ensemble.time;
    if u.steps() != time.steps() || u.nodes() != ensemble.grid.len() {
        return Err(dimension("control field does not match the ensemble"));
    }
    let dt = time.dt();
    let per: Vec<f64> = (0..ensemble.particles)
        .into_par_iter()
        .map(|p| {
            let mut c = 0.0;
            for k in 0..time.steps() {
                let x = ensemble.position(p, k);
                c += dt * coeffs.f(&u.get(k, ensemble.grid.nearest(&x)), &x, k, env);
            }
            c + coeffs.g(&ensemble.position(p, time.steps()), env)
        })
        .collect();
    if per.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("cost along a trajectory is not finite".into()));
    }
    let n = per.len() as f64;
    let mean = per.iter().sum::<f64>() / n;
    let var = if per.len() > 1 { per.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    Ok(CostEstimate { mean, std_error: (var / n).sqrt() })
}
