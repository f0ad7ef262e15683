//! Grids, measure curves, transport distances, mollification and conditional
//! measures.

mod conditional;
mod mollify;
mod transport;

pub use conditional::{conditional_family, ConditionalFamily};
pub use mollify::{mollify_curve, subprob_jensen_check, Mollified};
pub use transport::{kr_distance, min_cost_plan, wasserstein_p, TransportPlan, Wasserstein};

use crate::error::{dimension, validation, Result};
use crate::{tol, Point};

/// Uniform grid on the box `[-L, L]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGrid {
    dim: usize,
    half_width: f64,
    n: usize,
    dx: f64,
}

impl StateGrid {
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(validation(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(validation(format!("half-width must be positive, got {half_width}")));
        }
        if n < 3 {
            return Err(validation(format!("need at least 3 points per axis, got {n}")));
        }
        Ok(Self { dim, half_width, n, dx: 2.0 * half_width / (n - 1) as f64 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    /// Total node count `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of axis index `i`. The middle index maps to exactly 0 for odd `n`.
    pub fn coord(&self, i: usize) -> f64 {
        let h = (self.n - 1) as f64;
        self.half_width * (2.0 * i as f64 - h) / h
    }

    pub fn multi(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % self.n, idx / self.n]
        }
    }

    pub fn index(&self, m: [usize; 2]) -> usize {
        if self.dim == 1 {
            m[0]
        } else {
            m[0] + self.n * m[1]
        }
    }

    pub fn point(&self, idx: usize) -> Point {
        let m = self.multi(idx);
        if self.dim == 1 {
            Point::new(self.coord(m[0]), 0.0)
        } else {
            Point::new(self.coord(m[0]), self.coord(m[1]))
        }
    }

    pub fn points(&self) -> Vec<Point> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    fn nearest_axis(&self, x: f64) -> usize {
        let r = ((x + self.half_width) / self.dx).round();
        r.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Nearest node, clamping points outside the box to its faces.
    pub fn nearest(&self, p: &Point) -> usize {
        if self.dim == 1 {
            self.nearest_axis(p[0])
        } else {
            self.index([self.nearest_axis(p[0]), self.nearest_axis(p[1])])
        }
    }

    /// Evaluates `f` on every node.
    pub fn field(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.point(i))).collect()
    }

    /// Offset node `idx + off` (in axis steps), or `None` if it leaves the box.
    pub fn shift(&self, idx: usize, off: [i64; 2]) -> Option<usize> {
        let m = self.multi(idx);
        let n = self.n as i64;
        let a = m[0] as i64 + off[0];
        let b = m[1] as i64 + off[1];
        if a < 0 || a >= n {
            return None;
        }
        if self.dim == 1 {
            return if off[1] == 0 { Some(a as usize) } else { None };
        }
        if b < 0 || b >= n {
            return None;
        }
        Some(self.index([a as usize, b as usize]))
    }

    pub(crate) fn check_same(&self, other: &StateGrid) -> Result<()> {
        if self != other {
            return Err(dimension("state grids differ"));
        }
        Ok(())
    }

    pub(crate) fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.len() {
            return Err(dimension(format!("{what} has {len} entries, grid has {}", self.len())));
        }
        Ok(())
    }
}

/// Uniform time grid `t_k = k T / K`, `k = 0..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(validation(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(validation("need at least one time step"));
        }
        Ok(Self { horizon, steps })
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
    pub fn time(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.steps as f64
    }
    /// Number of time nodes, `K + 1`.
    pub fn nodes(&self) -> usize {
        self.steps + 1
    }
}

/// Checks that `w` is a probability vector of the given length.
pub fn check_probability(w: &[f64], len: usize, what: &str) -> Result<()> {
    if w.len() != len {
        return Err(dimension(format!("{what} has {} entries, expected {len}", w.len())));
    }
    let mut total = 0.0;
    for (i, &x) in w.iter().enumerate() {
        if !(x >= 0.0 && x.is_finite()) {
            return Err(validation(format!("{what} has weight {x} at node {i}")));
        }
        total += x;
    }
    if (total - 1.0).abs() > tol::MASS {
        return Err(validation(format!("{what} has total mass {total}, expected 1")));
    }
    Ok(())
}

/// Time-indexed probability vectors on a state grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasureCurve {
    grid: StateGrid,
    time: TimeGrid,
    weights: Vec<Vec<f64>>,
}

impl MeasureCurve {
    pub fn new(grid: StateGrid, time: TimeGrid, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != time.nodes() {
            return Err(dimension(format!("curve has {} time slices, expected {}", weights.len(), time.nodes())));
        }
        for (k, w) in weights.iter().enumerate() {
            check_probability(w, grid.len(), &format!("time slice {k}"))?;
        }
        Ok(Self { grid, time, weights })
    }

    /// The same probability vector at every time node.
    pub fn constant(grid: StateGrid, time: TimeGrid, w: &[f64]) -> Result<Self> {
        let weights = vec![w.to_vec(); time.nodes()];
        Self::new(grid, time, weights)
    }

    pub fn grid(&self) -> &StateGrid {
        &self.grid
    }
    pub fn time(&self) -> &TimeGrid {
        &self.time
    }
    pub fn slice(&self, k: usize) -> &[f64] {
        &self.weights[k]
    }
    pub fn slices(&self) -> &[Vec<f64>] {
        &self.weights
    }
    pub fn into_slices(self) -> Vec<Vec<f64>> {
        self.weights
    }

    /// `∫φ dμ_{t_k}`.
    pub fn moment(&self, phi: &[f64], k: usize) -> f64 {
        dot(phi, &self.weights[k])
    }

    /// Per-time mean position.
    pub fn mean(&self, k: usize) -> Point {
        let mut m = Point::zeros();
        for (i, &w) in self.weights[k].iter().enumerate() {
            m += self.grid.point(i) * w;
        }
        m
    }

    /// Pointwise convex combination `(1-λ)·self + λ·other`.
    pub fn mix(&self, other: &MeasureCurve, lambda: f64) -> Result<MeasureCurve> {
        self.grid.check_same(&other.grid)?;
        if self.time != other.time {
            return Err(dimension("time grids differ"));
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(validation(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (1.0 - lambda) * x + lambda * y).collect())
            .collect();
        Ok(MeasureCurve { grid: self.grid.clone(), time: self.time.clone(), weights })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Cell-mass discretization of an isotropic Gaussian `N(mean, var·I)`.
///
/// Each node receives the Gaussian mass of its cell; the outermost cells also
/// take the tails, so the result is a probability vector.
pub fn gaussian_weights(grid: &StateGrid, mean: &Point, var: f64) -> Result<Vec<f64>> {
    if !(var > 0.0) {
        return Err(validation(format!("variance must be positive, got {var}")));
    }
    let sd = var.sqrt();
    let axis = |c: f64| -> Vec<f64> {
        let cdf = |x: f64| 0.5 * libm::erfc(-(x - c) / (sd * std::f64::consts::SQRT_2));
        let n = grid.n();
        (0..n)
            .map(|i| {
                let x = grid.coord(i);
                let lo = if i == 0 { 0.0 } else { cdf(x - 0.5 * grid.dx()) };
                let hi = if i == n - 1 { 1.0 } else { cdf(x + 0.5 * grid.dx()) };
                (hi - lo).max(0.0)
            })
            .collect()
    };
    let ax = axis(mean[0]);
    let w: Vec<f64> = if grid.dim() == 1 {
        ax
    } else {
        let ay = axis(mean[1]);
        (0..grid.len())
            .map(|i| {
                let m = grid.multi(i);
                ax[m[0]] * ay[m[1]]
            })
            .collect()
    };
    Ok(normalize(w))
}

/// Unit point mass at the node nearest to `p`.
pub fn dirac(grid: &StateGrid, p: &Point) -> Vec<f64> {
    let mut w = vec![0.0; grid.len()];
    w[grid.nearest(p)] = 1.0;
    w
}

pub(crate) fn normalize(mut w: Vec<f64>) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// For each curve, `max_k |∫ζ dμ^n_{t_k} − ∫ζ dμ_{t_k}|`.
pub fn v_weak_gap(curves: &[MeasureCurve], limit: &MeasureCurve, zeta: &[f64]) -> Result<Vec<f64>> {
    limit.grid.check_len(zeta.len(), "test field")?;
    curves
        .iter()
        .map(|c| {
            c.grid.check_same(&limit.grid)?;
            if c.time != limit.time {
                return Err(dimension("time grids differ"));
            }
            Ok((0..limit.time.nodes()).map(|k| (c.moment(zeta, k) - limit.moment(zeta, k)).abs()).fold(0.0, f64::max))
        })
        .collect()
}
