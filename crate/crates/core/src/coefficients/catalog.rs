//! Named coefficient families.
//!
//! * `ex2.1`: `V = 1+|x|²`, `W = |x|`, mean-reverting drift pulled toward the
//!   population mean, quadratic control cost plus distance to the mean.
//! * `ex2.2`: `V = 1+|x|^m`, `W = |x|^p`, drift `−x|x|^{m−1} + β tanh(m_t)`.
//! * `ex2.3`: crowd aversion, `f = c|u|² + λ ρ_t(x)` with `ρ_t` a Gaussian
//!   kernel density of the slice at time `t`.
//! * `ex2.4`: whole-curve coupling through `r = ∫₀^T ∫ |x|^q dμ_τ dτ`.
//! * `linear`: heat, Ornstein-Uhlenbeck, transport and linear-quadratic cases.
//!
//! All families use `h(v) = c v²`.

use super::{CoefficientSet, ControlSet, Dependence, EnvConstant, Environment, Field, LyapunovData, RunningCost, TerminalCost};
use crate::error::{validation, Result};
use crate::measures::MeasureCurve;
use crate::{Mat, Point};
use std::collections::BTreeMap;
use std::sync::Arc;

pub type Params = BTreeMap<String, f64>;

pub const NAMES: [&str; 5] = ["ex2.1", "ex2.2", "ex2.3", "ex2.4", "linear"];

const H_BOUND: f64 = 1e6;

fn defaults(name: &str) -> Option<&'static [(&'static str, f64)]> {
    Some(match name {
        "ex2.1" => &[("c", 1.0), ("c1", 1.0), ("c2", 1.0), ("c3", 1.0), ("c4", 1.0), ("c5", 1.0)],
        "ex2.2" => &[("m", 2.0), ("p", 1.0), ("a", 0.5), ("q", 1.0), ("beta", 0.5), ("c", 1.0), ("c4", 1.0), ("c5", 1.0)],
        "ex2.3" => &[("a", 0.1), ("kappa", 0.5), ("c", 0.5), ("lambda", 1.0), ("delta", 0.5), ("cg", 0.5), ("xt", 0.0), ("yt", 0.0)],
        "ex2.4" => &[("a", 0.1), ("kappa", 0.5), ("beta", 0.5), ("c", 0.5), ("lambda", 1.0), ("q", 2.0), ("cg", 0.5)],
        "linear" => &[("a", 0.5), ("b0", 0.0), ("kappa", 0.0), ("q", 0.0), ("c", 1.0), ("wx", 0.0), ("x0", 0.0), ("wg", 0.0), ("xg", 0.0)],
        _ => return None,
    })
}

/// Merges user parameters over the defaults, rejecting unknown keys.
pub fn resolve_params(name: &str, params: &Params) -> Result<Params> {
    let def = defaults(name).ok_or_else(|| validation(format!("unknown catalog entry `{name}` (known: {})", NAMES.join(", "))))?;
    let mut out: Params = def.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in params {
        if !out.contains_key(k) {
            let known: Vec<_> = def.iter().map(|d| d.0).collect();
            return Err(validation(format!("`{name}` has no parameter `{k}` (known: {})", known.join(", "))));
        }
        if !v.is_finite() {
            return Err(validation(format!("parameter `{k}` is not finite")));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

fn need(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(validation(msg.to_string()))
    }
}

fn identity(dim: usize) -> Mat {
    if dim == 1 {
        Mat::new(1.0, 0.0, 0.0, 0.0)
    } else {
        Mat::identity()
    }
}

/// `d × d₁` identity block, zero-padded.
fn control_identity(dim: usize, cdim: usize) -> Mat {
    let mut m = Mat::zeros();
    for i in 0..dim.min(cdim) {
        m[(i, i)] = 1.0;
    }
    m
}

fn ones(dim: usize) -> Point {
    if dim == 1 {
        Point::new(1.0, 0.0)
    } else {
        Point::new(1.0, 1.0)
    }
}

fn constant_field<T: Copy + Send + Sync + 'static>(v: T) -> Field<T> {
    Arc::new(move |_, _, _| v)
}

fn constant_env(c: f64) -> EnvConstant {
    Arc::new(move |_| c)
}

/// `V = 1+|x|²` with `h(v) = c v²`; `W` and the constants are supplied.
fn quadratic_v(c: f64, w: super::Scalar, consts: [f64; 4], c1: EnvConstant, c2: EnvConstant) -> LyapunovData {
    LyapunovData {
        v: Arc::new(|x: &Point| 1.0 + x.norm_squared()),
        grad_v: Arc::new(|x: &Point| 2.0 * x),
        hess_v: Arc::new(|_: &Point| 2.0 * Mat::identity()),
        w,
        h: Arc::new(move |v: f64| c * v * v),
        h_bound: H_BOUND,
        c_l: consts[0],
        c_g: consts[1],
        c_h: consts[2],
        c_f: consts[3],
        c1,
        c2,
        theta: constant_field(0.0),
    }
}

/// Standard Lyapunov data `V = 1+|x|²`, `W = √(1+|x|²)`, `h = c v²` with the
/// given `[C_L, C_g, C_h, C_f]` and constant `C₁, C₂`. Useful for hand-built
/// coefficient sets.
pub fn standard_lyapunov(c: f64, consts: [f64; 4], c1: f64, c2: f64) -> LyapunovData {
    quadratic_v(c, Arc::new(|x: &Point| (1.0 + x.norm_squared()).sqrt()), consts, constant_env(c1), constant_env(c2))
}

/// Trapezoidal `∫₀^T ∫ζ dμ_τ dτ`.
pub fn whole_curve_functional(curve: &MeasureCurve, zeta: &[f64]) -> f64 {
    let tg = curve.time();
    let k = tg.steps();
    let mut s = 0.0;
    for j in 0..=k {
        let w = if j == 0 || j == k { 0.5 } else { 1.0 };
        s += w * curve.moment(zeta, j);
    }
    s * tg.horizon() / k as f64
}

fn sup_abs_mean(env: &Environment) -> f64 {
    (0..env.curve().time().nodes()).map(|k| env.mean(k).norm()).fold(0.0, f64::max)
}

/// Builds a catalog entry on the given control set.
pub fn example_catalog(name: &str, params: &Params, dim: usize, control: ControlSet) -> Result<CoefficientSet> {
    if !(1..=2).contains(&dim) {
        return Err(validation(format!("state dimension must be 1 or 2, got {dim}")));
    }
    let p = resolve_params(name, params)?;
    let g = |k: &str| p[k];
    let cdim = control.dim();
    let sqrt_d = (dim as f64).sqrt();
    let set = match name {
        "ex2.1" => {
            let (c, c1, c2, c3, c4, c5) = (g("c"), g("c1"), g("c2"), g("c3"), g("c4"), g("c5"));
            need([c, c1, c2, c3, c4, c5].iter().all(|v| *v > 0.0), "ex2.1 needs positive constants")?;
            need(c5 >= c, "ex2.1 needs c5 >= c so that f dominates h")?;
            let d = dim as f64;
            let c_l = (d * c2 * c2 / 2.0).max(c2 / 2.0 + c2 * c2 / c - 2.0 * c1).max(c2 / 2.0).max(1e-3);
            let a = c2 * c2 / 4.0 * identity(dim);
            let q = c2 * control_identity(dim, cdim);
            let c2_fn: EnvConstant = Arc::new(move |env| c2 * c2 / 4.0 + c1 / 2.0 + c2 / 2.0 * sup_abs_mean(env) + c2 * c2 / (4.0 * c));
            let running: RunningCost = Arc::new(move |u, x, k, env| c5 * u.norm_squared() + c4 * (x - env.mean(k)).norm());
            let terminal: TerminalCost = Arc::new(move |x, _| c3 * x.norm());
            CoefficientSet {
                name: name.into(),
                dim,
                control,
                lyapunov: quadratic_v(c, Arc::new(|x: &Point| x.norm()), [c_l, c3, (c5 / c).max(1.0) + 0.5, c4], constant_env(c1), c2_fn),
                mode: Dependence::MarginalAtT,
                diffusion: constant_field(a),
                drift: Arc::new(move |x, k, env| -c1 * x + 0.5 * c2 * env.mean(k)),
                control_matrix: constant_field(q),
                running_cost: running,
                terminal_cost: terminal,
            }
        }
        "ex2.2" => {
            let (m, pw, a, q, beta, c, c4, c5) = (g("m"), g("p"), g("a"), g("q"), g("beta"), g("c"), g("c4"), g("c5"));
            need(m >= 2.0, "ex2.2 needs m >= 2")?;
            need((1.0..m).contains(&pw), "ex2.2 needs 1 <= p < m")?;
            need(a >= 0.0 && c > 0.0 && c4 > 0.0 && c5 > 0.0 && beta >= 0.0, "ex2.2 needs a, beta >= 0 and c, c4, c5 > 0")?;
            let d = dim as f64;
            let phi = |r: f64| {
                a * m * (d + m - 2.0) * r.powf(m - 2.0) + m * beta * sqrt_d * r.powf(m - 1.0) - m * r.powf(2.0 * m - 1.0)
                    + q * q * m * m * r.powf(2.0 * m - 2.0) / (4.0 * c)
            };
            let n2 = radial_sup(phi);
            let c_l = (n2 * (1.0 + 1e-9) + 1e-12).max(1e-3);
            let lyap = LyapunovData {
                v: Arc::new(move |x: &Point| 1.0 + x.norm().powf(m)),
                grad_v: Arc::new(move |x: &Point| {
                    let r = x.norm();
                    if r == 0.0 {
                        Point::zeros()
                    } else {
                        m * r.powf(m - 2.0) * x
                    }
                }),
                hess_v: Arc::new(move |x: &Point| {
                    let r = x.norm();
                    if r == 0.0 {
                        return if m == 2.0 { 2.0 * Mat::identity() } else { Mat::zeros() };
                    }
                    m * r.powf(m - 2.0) * Mat::identity() + m * (m - 2.0) * r.powf(m - 4.0) * x * x.transpose()
                }),
                w: Arc::new(move |x: &Point| x.norm().powf(pw)),
                h: Arc::new(move |v: f64| c * v * v),
                h_bound: H_BOUND,
                c_l,
                c_g: c4,
                c_h: 1.5,
                c_f: c5,
                c1: constant_env(1.0),
                c2: constant_env(a + 1.0 + beta * sqrt_d + q * q / (4.0 * c)),
                theta: constant_field(0.0),
            };
            let one = ones(dim);
            CoefficientSet {
                name: name.into(),
                dim,
                control,
                lyapunov: lyap,
                mode: Dependence::MarginalAtT,
                diffusion: constant_field(a * identity(dim)),
                drift: Arc::new(move |x, k, env| {
                    let mt = env.mean(k);
                    let b0 = Point::new(mt[0].tanh(), mt[1].tanh()).component_mul(&one);
                    -x * x.norm().powf(m - 1.0) + beta * b0
                }),
                control_matrix: constant_field(q * control_identity(dim, cdim)),
                running_cost: Arc::new(move |u, x, _, _| c * u.norm_squared() + c5 * x.norm().powf(pw)),
                terminal_cost: Arc::new(move |x, _| c4 * x.norm().powf(pw)),
            }
        }
        "ex2.3" => {
            let (a, kappa, c, lambda, delta, cg) = (g("a"), g("kappa"), g("c"), g("lambda"), g("delta"), g("cg"));
            let target = if dim == 1 { Point::new(g("xt"), 0.0) } else { Point::new(g("xt"), g("yt")) };
            need(a >= 0.0 && c > 0.0 && lambda >= 0.0 && delta > 0.0 && cg > 0.0, "ex2.3 needs a, lambda >= 0 and c, delta, cg > 0")?;
            let d = dim as f64;
            let kmax = (2.0 * std::f64::consts::PI * delta * delta).powf(-d / 2.0);
            let c_l = (2.0 * a * d).max(1.0 / c - 2.0 * kappa).max(1e-3);
            let lyap = quadratic_v(
                c,
                Arc::new(|x: &Point| (1.0 + x.norm_squared()).sqrt()),
                [c_l, cg * (1.0 + target.norm()), 1.5, (lambda * kmax).max(1e-3)],
                constant_env(kappa.abs().max(1.0)),
                constant_env(a + kappa.abs() / 2.0 + 1.0 / (4.0 * c)),
            );
            CoefficientSet {
                name: name.into(),
                dim,
                control,
                lyapunov: lyap,
                mode: Dependence::MarginalAtT,
                diffusion: constant_field(a * identity(dim)),
                drift: Arc::new(move |x, _, _| -kappa * x),
                control_matrix: constant_field(control_identity(dim, cdim)),
                running_cost: Arc::new(move |u, x, k, env| c * u.norm_squared() + lambda * kernel_density(env.curve(), k, x, delta, kmax)),
                terminal_cost: Arc::new(move |x, _| cg * (1.0 + (x - target).norm_squared()).sqrt()),
            }
        }
        "ex2.4" => {
            let (a, kappa, beta, c, lambda, qz, cg) = (g("a"), g("kappa"), g("beta"), g("c"), g("lambda"), g("q"), g("cg"));
            need(
                a >= 0.0 && c > 0.0 && lambda >= 0.0 && qz >= 0.0 && cg > 0.0 && beta >= 0.0,
                "ex2.4 needs a, beta, lambda, q >= 0 and c, cg > 0",
            )?;
            let d = dim as f64;
            let c_l = (2.0 * a * d + beta * sqrt_d).max(beta * sqrt_d + 1.0 / c - 2.0 * kappa).max(1e-3);
            let lyap = quadratic_v(
                c,
                Arc::new(|x: &Point| (1.0 + x.norm_squared()).sqrt()),
                [c_l, cg, 1.5, lambda.max(1e-3)],
                constant_env(kappa.abs().max(1.0)),
                constant_env(a + kappa.abs() / 2.0 + beta * sqrt_d + 1.0 / (4.0 * c)),
            );
            let zeta = move |x: &Point| if qz == 0.0 { 1.0 } else { x.norm().powf(qz) };
            let functional = move |env: &Environment| {
                let z = env.curve().grid().field(zeta);
                whole_curve_functional(env.curve(), &z)
            };
            let one = ones(dim);
            CoefficientSet {
                name: name.into(),
                dim,
                control,
                lyapunov: lyap,
                mode: Dependence::WholeCurve,
                diffusion: constant_field(a * identity(dim)),
                drift: Arc::new(move |x, _, env| -kappa * x + beta * functional(env).tanh() * one),
                control_matrix: constant_field(control_identity(dim, cdim)),
                running_cost: Arc::new(move |u, x, _, env| {
                    let s = 1.0 / (1.0 + (-functional(env)).exp());
                    c * u.norm_squared() + lambda * s * (1.0 + x.norm_squared()).sqrt()
                }),
                terminal_cost: Arc::new(move |x, _| cg * (1.0 + x.norm_squared()).sqrt()),
            }
        }
        "linear" => {
            let (a, b0, kappa, q, c, wx, x0, wg, xg) = (g("a"), g("b0"), g("kappa"), g("q"), g("c"), g("wx"), g("x0"), g("wg"), g("xg"));
            need(a >= 0.0 && c > 0.0 && wx >= 0.0 && wg >= 0.0, "linear needs a, wx, wg >= 0 and c > 0")?;
            let d = dim as f64;
            let bn = b0.abs() * sqrt_d;
            let c_l = (2.0 * a * d + bn).max(bn + q * q / c - 2.0 * kappa).max(1e-3);
            let (px0, pxg) = (x0 * ones(dim), xg * ones(dim));
            let lyap = quadratic_v(
                c,
                Arc::new(|x: &Point| (1.0 + x.norm_squared()).sqrt()),
                [c_l, (wg * (1.0 + pxg.norm())).max(1e-3), 1.5, (wx * (1.0 + px0.norm())).max(1e-3)],
                constant_env((-kappa).max(1.0)),
                constant_env(a + bn + kappa.abs() / 2.0 + q * q / (4.0 * c)),
            );
            let drift0 = b0 * ones(dim);
            CoefficientSet {
                name: name.into(),
                dim,
                control,
                lyapunov: lyap,
                mode: Dependence::None,
                diffusion: constant_field(a * identity(dim)),
                drift: Arc::new(move |x, _, _| drift0 - kappa * x),
                control_matrix: constant_field(q * control_identity(dim, cdim)),
                running_cost: Arc::new(move |u, x, _, _| c * u.norm_squared() + wx * (1.0 + (x - px0).norm_squared()).sqrt()),
                terminal_cost: Arc::new(move |x, _| wg * (1.0 + (x - pxg).norm_squared()).sqrt()),
            }
        }
        _ => unreachable!("resolve_params rejects unknown names"),
    };
    Ok(set)
}

/// Gaussian kernel density of the slice at time node `k`, evaluated at `x`.
pub fn kernel_density(curve: &MeasureCurve, k: usize, x: &Point, delta: f64, kmax: f64) -> f64 {
    let grid = curve.grid();
    let w = curve.slice(k);
    let mut s = 0.0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            let r2 = (grid.point(i) - x).norm_squared();
            s += wi * (-r2 / (2.0 * delta * delta)).exp();
        }
    }
    kmax * s
}

/// Supremum over `r ≥ 0` of a function that tends to −∞, by a coarse scan
/// followed by local refinement.
fn radial_sup(phi: impl Fn(f64) -> f64) -> f64 {
    let mut hi = 1.0;
    while phi(hi) > -1.0 && hi < 1e6 {
        hi *= 2.0;
    }
    let n = 20_000;
    let mut best = (0.0, phi(0.0));
    for i in 1..=n {
        let r = hi * i as f64 / n as f64;
        let v = phi(r);
        if v > best.1 {
            best = (r, v);
        }
    }
    let h = hi / n as f64;
    let (mut a, mut b) = ((best.0 - h).max(0.0), best.0 + h);
    for _ in 0..200 {
        let c = a + (b - a) / 3.0;
        let d = b - (b - a) / 3.0;
        if phi(c) >= phi(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.1.max(phi(0.5 * (a + b)))
}
