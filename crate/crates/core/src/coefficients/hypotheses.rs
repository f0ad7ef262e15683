//! Sampled checks of the local, global and cost hypotheses.
//!
//! Every check evaluates an inequality `lhs ≤ rhs` on a finite sample and
//! passes when the worst violation is at most `1e-8·(1 + |lhs| + |rhs|)`.
//! A pass means no violation was found on the sample, not a proof.

use super::linalg::{is_symmetric, psd_sqrt, spectral_norm, sym_eigenvalues};
use super::{CoefficientSet, Environment};
use crate::error::Result;
use crate::measures::{StateGrid, TimeGrid};
use crate::{tol, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;

/// Points at which the hypotheses are evaluated.
#[derive(Clone, Debug)]
pub struct Sample {
    /// `(node, time node)` cells.
    pub cells: Vec<(usize, usize)>,
    /// `(node x, node y, time node)` pairs.
    pub pairs: Vec<(usize, usize, usize)>,
    pub controls: Vec<Point>,
    /// Control pairs whose midpoints test convexity.
    pub midpoints: Vec<(Point, Point)>,
}

impl Sample {
    /// All nodes at the first, middle and last time node; random node pairs
    /// plus all neighbouring pairs; the control grid plus random controls.
    pub fn standard(grid: &StateGrid, time: &TimeGrid, control: &super::ControlSet, seed: u64) -> Sample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = grid.len();
        let mut times = vec![0, time.steps() / 2, time.steps()];
        times.dedup();
        let cells = times.iter().flat_map(|&k| (0..n).map(move |i| (i, k))).collect();
        let mut pairs = Vec::new();
        for &k in &times {
            for i in 0..n {
                for off in [[1, 0], [0, 1]] {
                    if let Some(j) = grid.shift(i, off) {
                        pairs.push((i, j, k));
                    }
                }
            }
            for _ in 0..200 {
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                if i != j {
                    pairs.push((i, j, k));
                }
            }
        }
        let mut controls = control.points().to_vec();
        for _ in 0..16 {
            controls.push(control.sample(&mut rng));
        }
        let midpoints = (0..64).map(|_| (control.sample(&mut rng), control.sample(&mut rng))).collect();
        Sample { cells, pairs, controls, midpoints }
    }
}

#[derive(Clone, Debug)]
pub struct InequalityCheck {
    pub name: String,
    pub samples: usize,
    /// `lhs − rhs` at the worst sample (normalized by `1 + |lhs| + |rhs|` for ranking).
    pub worst_violation: f64,
    pub worst_lhs: f64,
    pub worst_rhs: f64,
    pub worst_at: String,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct HypothesisReport {
    pub title: String,
    pub checks: Vec<InequalityCheck>,
    /// Smallest constant that would have passed on this sample, where meaningful.
    pub smallest_constant: Option<f64>,
}

impl HypothesisReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[{}] {}", self.title, if self.pass() { "pass" } else { "FAIL" });
        for c in &self.checks {
            let _ = writeln!(
                s,
                "  {:<28} {:<4} samples={:<6} worst lhs-rhs={:+.3e} (lhs={:.6e}, rhs={:.6e}) at {}",
                c.name,
                if c.pass { "ok" } else { "FAIL" },
                c.samples,
                c.worst_violation,
                c.worst_lhs,
                c.worst_rhs,
                c.worst_at
            );
        }
        if let Some(c) = self.smallest_constant {
            let _ = writeln!(s, "  smallest sampled-feasible constant: {c:.6e}");
        }
        let _ = writeln!(s, "  (sampled check: no violation found on the sample; not a proof)");
        s
    }
}

struct Acc {
    name: String,
    samples: usize,
    worst: Option<(f64, f64, f64, String)>,
    worst_rank: f64,
}

impl Acc {
    fn new(name: &str) -> Self {
        Self { name: name.into(), samples: 0, worst: None, worst_rank: f64::NEG_INFINITY }
    }

    fn add(&mut self, lhs: f64, rhs: f64, at: impl FnOnce() -> String) {
        self.samples += 1;
        let rank = if lhs.is_finite() && rhs.is_finite() { (lhs - rhs) / (1.0 + lhs.abs() + rhs.abs()) } else { f64::INFINITY };
        if rank > self.worst_rank {
            self.worst_rank = rank;
            self.worst = Some((lhs - rhs, lhs, rhs, at()));
        }
    }

    fn finish(self) -> InequalityCheck {
        let (v, l, r, at) = self.worst.unwrap_or((f64::NEG_INFINITY, 0.0, 0.0, "-".into()));
        InequalityCheck {
            name: self.name,
            samples: self.samples,
            worst_violation: v,
            worst_lhs: l,
            worst_rhs: r,
            worst_at: at,
            pass: self.worst_rank <= tol::HYPOTHESIS,
        }
    }
}

fn at_cell(grid: &StateGrid, i: usize, k: usize) -> String {
    let p = grid.point(i);
    if grid.dim() == 1 {
        format!("x={:.4} k={k}", p[0])
    } else {
        format!("x=({:.4},{:.4}) k={k}", p[0], p[1])
    }
}

struct Moments {
    int_v: Vec<f64>,
    sup_w: f64,
}

fn moments(coeffs: &CoefficientSet, env: &Environment) -> Moments {
    let grid = env.curve().grid();
    let v = grid.field(&*coeffs.lyapunov.v);
    let w = grid.field(&*coeffs.lyapunov.w);
    Moments { int_v: (0..env.curve().time().nodes()).map(|k| env.curve().moment(&v, k)).collect(), sup_w: env.sup_moment(&w) }
}

/// Local boundedness: finite coefficients, symmetric PSD diffusion.
pub fn check_h1_1(coeffs: &CoefficientSet, env: &Environment, sample: &Sample) -> Result<HypothesisReport> {
    coeffs.check_grid(env.curve().grid())?;
    let grid = env.curve().grid();
    let evals: Vec<_> = sample
        .cells
        .par_iter()
        .map(|&(i, k)| {
            let x = grid.point(i);
            let (a, b, q) = (coeffs.a(&x, k, env), coeffs.b(&x, k, env), coeffs.q(&x, k, env));
            let finite = a.iter().chain(b.iter()).chain(q.iter()).all(|v| v.is_finite());
            let sym = is_symmetric(&a, 1e-12);
            let emin = sym_eigenvalues(&a, coeffs.dim).into_iter().fold(f64::INFINITY, f64::min);
            (finite, sym, emin)
        })
        .collect();
    let mut fin = Acc::new("H1.1 finite coefficients");
    let mut sym = Acc::new("H1.1 A symmetric");
    let mut psd = Acc::new("H1.1 A nonnegative");
    for (&(i, k), &(f, s, e)) in sample.cells.iter().zip(&evals) {
        fin.add(if f { 0.0 } else { 1.0 }, 0.0, || at_cell(grid, i, k));
        sym.add(if s { 0.0 } else { 1.0 }, 0.0, || at_cell(grid, i, k));
        // -λ_min ≤ 1e-12
        psd.add(-e, tol::PSD, || at_cell(grid, i, k));
    }
    Ok(HypothesisReport { title: "H1.1".into(), checks: vec![fin.finish(), sym.finish(), psd.finish()], smallest_constant: None })
}

/// `L_μV + h*(|Qᵀ∇V|) ≤ C_L V(x) + C_L ∫V dμ_t + C_L sup_t ∫W dμ_t`.
pub fn check_h2_1(coeffs: &CoefficientSet, env: &Environment, sample: &Sample) -> Result<HypothesisReport> {
    coeffs.check_grid(env.curve().grid())?;
    let grid = env.curve().grid();
    let ly = &coeffs.lyapunov;
    let mo = moments(coeffs, env);
    let evals: Vec<Result<(f64, f64)>> = sample
        .cells
        .par_iter()
        .map(|&(i, k)| {
            let x = grid.point(i);
            let (a, b, q) = (coeffs.a(&x, k, env), coeffs.b(&x, k, env), coeffs.q(&x, k, env));
            let grad = (ly.grad_v)(&x);
            let hess = (ly.hess_v)(&x);
            let lv = (a * hess).trace() + b.dot(&grad);
            let p = (q.transpose() * grad).norm();
            let lhs = lv + ly.h_star(p)?;
            let scale = (ly.v)(&x) + mo.int_v[k] + mo.sup_w;
            Ok((lhs, scale))
        })
        .collect();
    let mut acc = Acc::new("H2.1 Lyapunov bound");
    let mut smallest: f64 = 0.0;
    for (&(i, k), e) in sample.cells.iter().zip(evals) {
        let (lhs, scale) = e?;
        smallest = smallest.max(lhs / scale);
        acc.add(lhs, ly.c_l * scale, || at_cell(grid, i, k));
    }
    Ok(HypothesisReport { title: "H2.1".into(), checks: vec![acc.finish()], smallest_constant: Some(smallest) })
}

/// Monotonicity bound on `√A` and `b`, Lipschitz bound on `Q` with `Θ`, and
/// the growth bound on `A, b, Q, Θ`.
pub fn check_h2_2_h2_3(coeffs: &CoefficientSet, env: &Environment, sample: &Sample) -> Result<HypothesisReport> {
    coeffs.check_grid(env.curve().grid())?;
    let grid = env.curve().grid();
    let ly = &coeffs.lyapunov;
    let c1 = (ly.c1)(env);
    let c2 = (ly.c2)(env);
    let d = coeffs.dim;
    let pair_evals: Vec<Result<(f64, f64, f64, f64)>> = sample
        .pairs
        .par_iter()
        .map(|&(i, j, k)| {
            let (x, y) = (grid.point(i), grid.point(j));
            let sa = psd_sqrt(&coeffs.a(&x, k, env), d)?;
            let sb = psd_sqrt(&coeffs.a(&y, k, env), d)?;
            let diff = sa - sb;
            let tr = (diff * diff).trace();
            let mono = (coeffs.b(&x, k, env) - coeffs.b(&y, k, env)).dot(&(x - y));
            let r2 = (x - y).norm_squared();
            let lhs_a = tr + mono;
            let rhs_a = c1 * (1.0 + (ly.v)(&x) + (ly.v)(&y)) * r2;
            let lhs_q = spectral_norm(&(coeffs.q(&x, k, env) - coeffs.q(&y, k, env)));
            let rhs_q = ((ly.theta)(&x, k, env) + (ly.theta)(&y, k, env)) * r2.sqrt();
            Ok((lhs_a, rhs_a, lhs_q, rhs_q))
        })
        .collect();
    let mut mono = Acc::new("H2.2 sqrt(A)/b monotonicity");
    let mut lipq = Acc::new("H2.2 Q Lipschitz with Theta");
    for (&(i, j, k), e) in sample.pairs.iter().zip(pair_evals) {
        let (la, ra, lq, rq) = e?;
        let at = || format!("{} / {}", at_cell(grid, i, k), at_cell(grid, j, k));
        mono.add(la, ra, at);
        lipq.add(lq, rq, at);
    }
    let cell_evals: Vec<Result<(f64, f64)>> = sample
        .cells
        .par_iter()
        .map(|&(i, k)| {
            let x = grid.point(i);
            let a = coeffs.a(&x, k, env);
            let lhs = spectral_norm(&a)
                + coeffs.b(&x, k, env).norm()
                + ly.h_star(spectral_norm(&coeffs.q(&x, k, env)))?
                + ly.h_star((ly.theta)(&x, k, env))?;
            Ok((lhs, c2 * (ly.v)(&x)))
        })
        .collect();
    let mut growth = Acc::new("H2.3 growth bound");
    for (&(i, k), e) in sample.cells.iter().zip(cell_evals) {
        let (l, r) = e?;
        growth.add(l, r, || at_cell(grid, i, k));
    }
    Ok(HypothesisReport { title: "H2.2/H2.3".into(), checks: vec![mono.finish(), lipq.finish(), growth.finish()], smallest_constant: None })
}

/// Bounds on `g` and `f` and midpoint convexity of `f` in `u`.
pub fn check_h3(coeffs: &CoefficientSet, env: &Environment, sample: &Sample) -> Result<HypothesisReport> {
    coeffs.check_grid(env.curve().grid())?;
    let grid = env.curve().grid();
    let ly = &coeffs.lyapunov;
    let mo = moments(coeffs, env);
    let mut g_acc = Acc::new("H3.1 terminal growth");
    let mut lo_acc = Acc::new("H3.2 running cost lower");
    let mut hi_acc = Acc::new("H3.2 running cost upper");
    let mut cvx = Acc::new("H3.4 convexity in u");
    type CellEval = (Vec<(f64, f64, f64)>, Vec<(f64, f64)>);
    let evals: Vec<CellEval> = sample
        .cells
        .par_iter()
        .map(|&(i, k)| {
            let x = grid.point(i);
            let wx = (ly.w)(&x) + mo.sup_w;
            let bounds = sample
                .controls
                .iter()
                .map(|u| {
                    let f = coeffs.f(u, &x, k, env);
                    let hu = (ly.h)(u.norm());
                    (f, hu - ly.c_f * wx, ly.c_h * hu + ly.c_f * wx)
                })
                .collect();
            let mids = sample
                .midpoints
                .iter()
                .map(|(u, v)| {
                    let m = 0.5 * (u + v);
                    (coeffs.f(&m, &x, k, env), 0.5 * (coeffs.f(u, &x, k, env) + coeffs.f(v, &x, k, env)))
                })
                .collect();
            (bounds, mids)
        })
        .collect();
    for (&(i, k), (bounds, mids)) in sample.cells.iter().zip(&evals) {
        let x = grid.point(i);
        g_acc.add(coeffs.g(&x, env).abs(), ly.c_g * ((ly.w)(&x) + mo.sup_w), || at_cell(grid, i, k));
        for (c, &(f, lo, hi)) in bounds.iter().enumerate() {
            let at = || format!("{} u={:?}", at_cell(grid, i, k), sample.controls[c].as_slice());
            lo_acc.add(lo, f, at);
            hi_acc.add(f, hi, at);
        }
        for (m, &(fm, avg)) in mids.iter().enumerate() {
            cvx.add(fm, avg, || {
                let (u, v) = &sample.midpoints[m];
                format!("{} u={:?} v={:?}", at_cell(grid, i, k), u.as_slice(), v.as_slice())
            });
        }
    }
    Ok(HypothesisReport {
        title: "H3".into(),
        checks: vec![g_acc.finish(), lo_acc.finish(), hi_acc.finish(), cvx.finish()],
        smallest_constant: None,
    })
}

/// Runs every implemented check.
pub fn check_all(coeffs: &CoefficientSet, env: &Environment, sample: &Sample) -> Result<Vec<HypothesisReport>> {
    Ok(vec![
        check_h1_1(coeffs, env, sample)?,
        check_h2_1(coeffs, env, sample)?,
        check_h2_2_h2_3(coeffs, env, sample)?,
        check_h3(coeffs, env, sample)?,
    ])
}
