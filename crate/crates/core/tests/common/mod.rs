#![allow(dead_code)]

use mfg_core::coefficients::catalog::standard_lyapunov;
use mfg_core::coefficients::{CoefficientSet, ControlSet, Dependence, Environment};
use mfg_core::measures::{MeasureCurve, StateGrid, TimeGrid};
use mfg_core::{Mat, Point};
use std::sync::Arc;

/// Hand-built coefficients: constant scalar diffusion `a I`, drift `b(x)`,
/// control matrix `q I`, running cost `f(u, x)` and terminal cost `g(x)`.
pub fn custom(
    dim: usize,
    control: ControlSet,
    a: f64,
    drift: impl Fn(&Point) -> Point + Send + Sync + 'static,
    q: f64,
    f: impl Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    g: impl Fn(&Point) -> f64 + Send + Sync + 'static,
) -> CoefficientSet {
    let id = if dim == 1 { Mat::new(1.0, 0.0, 0.0, 0.0) } else { Mat::identity() };
    let cid = if control.dim() == 1 { Mat::new(1.0, 0.0, 0.0, 0.0) } else { id };
    CoefficientSet {
        name: "custom".into(),
        dim,
        control,
        lyapunov: standard_lyapunov(1.0, [1.0, 1.0, 1.5, 1.0], 1.0, 1.0),
        mode: Dependence::None,
        diffusion: Arc::new(move |_, _, _| a * id),
        drift: Arc::new(move |x, _, _| drift(x)),
        control_matrix: Arc::new(move |_, _, _| q * cid),
        running_cost: Arc::new(move |u, x, _, _| f(u, x)),
        terminal_cost: Arc::new(move |x, _| g(x)),
    }
}

pub fn line(l: f64, n: usize) -> StateGrid {
    StateGrid::new(1, l, n).unwrap()
}

pub fn frozen(grid: &StateGrid, time: &TimeGrid, nu: &[f64]) -> Environment {
    Environment::new(MeasureCurve::constant(grid.clone(), time.clone(), nu).unwrap())
}

pub fn p1(x: f64) -> Point {
    Point::new(x, 0.0)
}

/// Random probability vector with roughly `zeros` of the entries forced to 0.
pub fn random_prob(raw: &[f64], zeros: &[bool]) -> Vec<f64> {
    let mut w: Vec<f64> = raw.iter().zip(zeros).map(|(r, z)| if *z { 0.0 } else { *r + 1e-3 }).collect();
    if w.iter().sum::<f64>() == 0.0 {
        w[0] = 1.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}
