//! Coefficient fields, Lyapunov data, hypothesis checkers and the example catalog.

pub mod catalog;
mod conjugate;
pub mod hypotheses;
pub mod linalg;

pub use catalog::{example_catalog, Params};
pub use conjugate::{beta_vw, h_inverse, legendre};

use crate::error::{validation, Result};
use crate::measures::{MeasureCurve, StateGrid};
use crate::{Mat, Point};
use rand::Rng;
use std::fmt;
use std::sync::Arc;

/// How the coefficients read the environment curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dependence {
    None,
    /// Only the slice at the evaluation time is read.
    MarginalAtT,
    /// The curve enters through time integrals.
    WholeCurve,
}

/// An environment curve with per-time statistics cached.
#[derive(Clone, Debug)]
pub struct Environment {
    curve: MeasureCurve,
    means: Vec<Point>,
}

impl Environment {
    pub fn new(curve: MeasureCurve) -> Self {
        let means = (0..curve.time().nodes()).map(|k| curve.mean(k)).collect();
        Self { curve, means }
    }
    pub fn curve(&self) -> &MeasureCurve {
        &self.curve
    }
    pub fn mean(&self, k: usize) -> Point {
        self.means[k]
    }
    pub fn time(&self, k: usize) -> f64 {
        self.curve.time().time(k)
    }
    /// `sup_k ∫φ dμ_{t_k}`.
    pub fn sup_moment(&self, phi: &[f64]) -> f64 {
        (0..self.curve.time().nodes()).map(|k| self.curve.moment(phi, k)).fold(f64::NEG_INFINITY, f64::max)
    }
}

pub type Field<T> = Arc<dyn Fn(&Point, usize, &Environment) -> T + Send + Sync>;
pub type RunningCost = Arc<dyn Fn(&Point, &Point, usize, &Environment) -> f64 + Send + Sync>;
pub type TerminalCost = Arc<dyn Fn(&Point, &Environment) -> f64 + Send + Sync>;
pub type Scalar = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;
pub type Radial = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type EnvConstant = Arc<dyn Fn(&Environment) -> f64 + Send + Sync>;

#[derive(Clone, Debug, PartialEq)]
pub enum ControlShape {
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
}

/// Convex control set `U` (box or ball) with a finite grid of points in it.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSet {
    dim: usize,
    shape: ControlShape,
    points: Vec<Point>,
}

const MEMBERSHIP_TOL: f64 = 1e-12;

impl ControlSet {
    pub fn new(dim: usize, shape: ControlShape, points: Vec<Point>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(validation(format!("control dimension must be 1 or 2, got {dim}")));
        }
        match &shape {
            ControlShape::Box { lo, hi } => {
                for c in 0..dim {
                    if !(lo[c] <= hi[c]) {
                        return Err(validation("control box has lo > hi"));
                    }
                }
            }
            ControlShape::Ball { radius, .. } => {
                if !(*radius >= 0.0) {
                    return Err(validation("control ball has negative radius"));
                }
            }
        }
        if points.is_empty() {
            return Err(validation("control grid is empty"));
        }
        let set = Self { dim, shape, points };
        for p in &set.points {
            if !set.contains(p) {
                return Err(validation(format!("control grid point {:?} lies outside U", p.as_slice())));
            }
        }
        Ok(set)
    }

    /// Box `[lo, hi]^dim` with `m` equally spaced points per axis.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(validation("control grid needs at least one point per axis"));
        }
        let axis: Vec<f64> =
            if m == 1 { vec![0.5 * (lo + hi)] } else { (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect() };
        let points = if dim == 1 {
            axis.iter().map(|&a| Point::new(a, 0.0)).collect()
        } else {
            let mut v = Vec::new();
            for &b in &axis {
                for &a in &axis {
                    v.push(Point::new(a, b));
                }
            }
            v
        };
        let (l2, h2) = if dim == 1 { (0.0, 0.0) } else { (lo, hi) };
        Self::new(dim, ControlShape::Box { lo: Point::new(lo, l2), hi: Point::new(hi, h2) }, points)
    }

    /// Ball of `radius` around `center`: the lattice with `m` points per axis
    /// of the bounding box, kept where it lies inside, plus `4m` points on the
    /// boundary circle in 2D.
    pub fn uniform_ball(dim: usize, center: Point, radius: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(validation("control grid needs at least one point per axis"));
        }
        let mut c = center;
        if dim == 1 {
            c[1] = 0.0;
        }
        let shape = ControlShape::Ball { center: c, radius };
        let bx = Self::uniform_box(dim, -radius, radius, m)?;
        let mut points: Vec<Point> = bx.points.iter().filter(|p| p.norm() <= radius * (1.0 + 1e-12)).map(|p| c + p).collect();
        if dim == 2 && radius > 0.0 {
            for s in 0..4 * m {
                let a = std::f64::consts::TAU * s as f64 / (4 * m) as f64;
                points.push(c + radius * Point::new(a.cos(), a.sin()));
            }
        }
        Self::new(dim, shape, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn shape(&self) -> &ControlShape {
        &self.shape
    }
    pub fn points(&self) -> &[Point] {
        &self.points
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, p: &Point) -> bool {
        if self.dim == 1 && p[1] != 0.0 {
            return false;
        }
        match &self.shape {
            ControlShape::Box { lo, hi } => (0..self.dim).all(|c| p[c] >= lo[c] - MEMBERSHIP_TOL && p[c] <= hi[c] + MEMBERSHIP_TOL),
            ControlShape::Ball { center, radius } => (p - center).norm() <= radius + MEMBERSHIP_TOL,
        }
    }

    /// Nearest point of `U`.
    pub fn project(&self, p: &Point) -> Point {
        let mut q = *p;
        if self.dim == 1 {
            q[1] = 0.0;
        }
        match &self.shape {
            ControlShape::Box { lo, hi } => {
                for c in 0..self.dim {
                    q[c] = q[c].clamp(lo[c], hi[c]);
                }
                q
            }
            ControlShape::Ball { center, radius } => {
                let d = q - center;
                let r = d.norm();
                if r <= *radius {
                    q
                } else {
                    center + d * (radius / r)
                }
            }
        }
    }

    /// `(inf, sup)` of `⟨row, u⟩` over `u ∈ U`.
    pub fn range(&self, row: [f64; 2]) -> (f64, f64) {
        match &self.shape {
            ControlShape::Box { lo, hi } => (0..self.dim).fold((0.0, 0.0), |(a, b), c| {
                let (x, y) = (row[c] * lo[c], row[c] * hi[c]);
                (a + x.min(y), b + x.max(y))
            }),
            ControlShape::Ball { center, radius } => {
                let r = Point::new(row[0], if self.dim == 2 { row[1] } else { 0.0 });
                let m = r.dot(center);
                (m - radius * r.norm(), m + radius * r.norm())
            }
        }
    }

    /// Index of a grid point equal to `p` (within 1e-12).
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.points.iter().position(|q| (q - p).amax() <= MEMBERSHIP_TOL)
    }

    /// Uniform sample from `U`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match &self.shape {
            ControlShape::Box { lo, hi } => {
                let mut p = Point::zeros();
                for c in 0..self.dim {
                    p[c] = if hi[c] > lo[c] { rng.random_range(lo[c]..=hi[c]) } else { lo[c] };
                }
                p
            }
            ControlShape::Ball { center, radius } => loop {
                let mut p = Point::zeros();
                for c in 0..self.dim {
                    p[c] = rng.random_range(-1.0..=1.0);
                }
                if p.norm() <= 1.0 {
                    return center + p * *radius;
                }
            },
        }
    }
}

/// Lyapunov data `V, W, h` and the constants of the global hypotheses.
#[derive(Clone)]
pub struct LyapunovData {
    pub v: Scalar,
    pub grad_v: Arc<dyn Fn(&Point) -> Point + Send + Sync>,
    pub hess_v: Arc<dyn Fn(&Point) -> Mat + Send + Sync>,
    pub w: Scalar,
    pub h: Radial,
    /// Search bound used when evaluating `h*` numerically.
    pub h_bound: f64,
    pub c_l: f64,
    pub c_g: f64,
    pub c_h: f64,
    pub c_f: f64,
    pub c1: EnvConstant,
    pub c2: EnvConstant,
    pub theta: Field<f64>,
}

impl LyapunovData {
    /// Exponential rate of the moment envelope, `M = 5 C_L`.
    pub fn m(&self) -> f64 {
        5.0 * self.c_l
    }

    /// Control budget factor `γ = e^{−C_L T} / 4`.
    pub fn gamma(&self, horizon: f64) -> f64 {
        0.25 * (-self.c_l * horizon).exp()
    }

    pub fn h_star(&self, p: f64) -> Result<f64> {
        legendre(&*self.h, p, self.h_bound)
    }

    /// Checks the structural conditions on the grid nodes and a sample of `h`.
    pub fn validate(&self, grid: &StateGrid) -> Result<()> {
        for i in 0..grid.len() {
            let x = grid.point(i);
            let (v, w) = ((self.v)(&x), (self.w)(&x));
            if !(v >= 0.0 && w >= 0.0 && w <= v * (1.0 + 1e-12)) {
                return Err(validation(format!("need 0 <= W <= V, fails at node {i} (W={w}, V={v})")));
            }
        }
        if (self.h)(0.0) != 0.0 {
            return Err(validation("h(0) must be 0"));
        }
        let pts: Vec<f64> = (0..=64).map(|i| self.h_bound * i as f64 / 64.0).collect();
        let hv: Vec<f64> = pts.iter().map(|&v| (self.h)(v)).collect();
        for i in 1..hv.len() {
            if hv[i] < hv[i - 1] {
                return Err(validation(format!("h decreases near v = {}", pts[i])));
            }
            if i + 1 < hv.len() && hv[i] > 0.5 * (hv[i - 1] + hv[i + 1]) + 1e-12 * (1.0 + hv[i].abs()) {
                return Err(validation(format!("h not convex near v = {}", pts[i])));
            }
        }
        if !(self.c_l > 0.0 && self.c_g > 0.0 && self.c_h > 1.0 && self.c_f > 0.0) {
            return Err(validation("need C_L, C_g, C_f > 0 and C_h > 1"));
        }
        Ok(())
    }
}

/// The coefficient fields `A, b, Q, f, g` with their Lyapunov data.
#[derive(Clone)]
pub struct CoefficientSet {
    pub name: String,
    pub dim: usize,
    pub control: ControlSet,
    pub lyapunov: LyapunovData,
    pub mode: Dependence,
    pub diffusion: Field<Mat>,
    pub drift: Field<Point>,
    /// `d × d₁` control matrix, zero-padded to 2×2.
    pub control_matrix: Field<Mat>,
    pub running_cost: RunningCost,
    pub terminal_cost: TerminalCost,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("control", &self.control)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    pub fn a(&self, x: &Point, k: usize, env: &Environment) -> Mat {
        (self.diffusion)(x, k, env)
    }
    pub fn b(&self, x: &Point, k: usize, env: &Environment) -> Point {
        (self.drift)(x, k, env)
    }
    pub fn q(&self, x: &Point, k: usize, env: &Environment) -> Mat {
        (self.control_matrix)(x, k, env)
    }
    pub fn f(&self, u: &Point, x: &Point, k: usize, env: &Environment) -> f64 {
        (self.running_cost)(u, x, k, env)
    }
    pub fn g(&self, x: &Point, env: &Environment) -> f64 {
        (self.terminal_cost)(x, env)
    }

    pub fn check_grid(&self, grid: &StateGrid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(crate::error::dimension(format!("coefficients are {}-dimensional, grid is {}-dimensional", self.dim, grid.dim())));
        }
        Ok(())
    }
}
