//! Markov-chain generators discretizing `L_{μ,u}` on the state grid.
//!
//! Rates, for a node `x` and axis step `h = Δx`:
//! * diffusion: `w_k / h²` towards `x ± h e_k`, where `A = Σ w_k e_k e_kᵀ`
//!   is the Selling decomposition (in 1D simply `a / h²` to both neighbours);
//! * drift and control along axis `a`, with `w = b_a + (Qu)_a`:
//!   `d_a / h² + (c_a ± w) / (2h)` towards `x ± h e_a`, where `d_a` is the
//!   axis weight of the diffusion, `S_a = sup_{u∈U} |b_a + (Qu)_a|` and
//!   `c_a = max(0, S_a − 2 d_a / h)`. This is central differencing when the
//!   diffusion allows it and upwinding when `A = 0`. The rates are affine in
//!   `u`, so a mixture of controls in a cell acts exactly like its mean control.
//!
//! Rates that would leave the box are dropped (no-flux) and recorded as
//! leakage; every row therefore sums to zero.

use crate::best_response::ControlField;
use crate::coefficients::linalg::sym_eigenvalues;
use crate::coefficients::{CoefficientSet, Environment};
use crate::error::{validation, Error, Result};
use crate::measures::StateGrid;
use crate::{tol, Mat, Point};

/// Sparse generator with nonnegative off-diagonal rates and zero row sums.
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    n: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    leak: Vec<f64>,
}

impl Generator {
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Off-diagonal entries `(column, rate)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_start[i]..self.row_start[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.rates[r].iter().copied())
    }

    /// Total exit rate of node `i` (minus the diagonal entry).
    pub fn exit(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// Rate dropped at the boundary from node `i`.
    pub fn leak(&self, i: usize) -> f64 {
        self.leak[i]
    }

    pub fn max_exit(&self) -> (usize, f64) {
        self.exit.iter().copied().enumerate().fold((0, 0.0), |best, (i, e)| if e > best.1 { (i, e) } else { best })
    }

    /// `(Gψ)_i = Σ_j G_ij (ψ_j − ψ_i)`.
    pub fn apply(&self, psi: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, r)| r * (psi[j] - psi[i])).sum()).collect()
    }

    /// `Gᵀσ`.
    pub fn apply_transpose(&self, sigma: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n).map(|i| -self.exit[i] * sigma[i]).collect();
        for i in 0..self.n {
            for (j, r) in self.row(i) {
                out[j] += r * sigma[i];
            }
        }
        out
    }

    /// One explicit step `σ + Δt Gᵀσ`, written as a sum of nonnegative terms
    /// when `Δt · exit ≤ 1`.
    pub fn explicit_step(&self, sigma: &[f64], dt: f64) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.n).map(|i| sigma[i] * (1.0 - dt * self.exit[i])).collect();
        for i in 0..self.n {
            let s = sigma[i];
            if s == 0.0 {
                continue;
            }
            for (j, r) in self.row(i) {
                out[j] += dt * r * s;
            }
        }
        out
    }

    /// Largest `|i − j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for i in 0..self.n {
            m[i][i] = -self.exit[i];
            for (j, r) in self.row(i) {
                m[i][j] += r;
            }
        }
        m
    }

    fn from_rows(rows: Vec<Vec<(usize, f64)>>, leak: Vec<f64>) -> Self {
        let n = rows.len();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut rates = Vec::new();
        let mut exit = Vec::with_capacity(n);
        row_start.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut e = 0.0;
            let mut idx = 0;
            while idx < row.len() {
                let (j, mut r) = row[idx];
                idx += 1;
                while idx < row.len() && row[idx].0 == j {
                    r += row[idx].1;
                    idx += 1;
                }
                if r > 0.0 {
                    cols.push(j);
                    rates.push(r);
                    e += r;
                }
            }
            exit.push(e);
            row_start.push(cols.len());
        }
        Self { n, row_start, cols, rates, exit, leak }
    }
}

/// Selling decomposition of a symmetric PSD 2×2 matrix: `D = Σ w_k e_k e_kᵀ`
/// with integer offsets `e_k` and weights `w_k ≥ 0`.
pub fn selling(d: &Mat) -> Vec<([i64; 2], f64)> {
    let ip = |a: [i64; 2], b: [i64; 2]| {
        let (a0, a1, b0, b1) = (a[0] as f64, a[1] as f64, b[0] as f64, b[1] as f64);
        a0 * (d[(0, 0)] * b0 + d[(0, 1)] * b1) + a1 * (d[(1, 0)] * b0 + d[(1, 1)] * b1)
    };
    let thresh = 1e-14 * d.abs().max();
    let mut b: [[i64; 2]; 3] = [[1, 0], [0, 1], [-1, -1]];
    for _ in 0..200 {
        let mut flipped = false;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            if ip(b[i], b[j]) > thresh {
                let k = 3 - i - j;
                let (bi, bj) = (b[i], b[j]);
                b[i] = [-bi[0], -bi[1]];
                b[k] = [bi[0] - bj[0], bi[1] - bj[1]];
                flipped = true;
                break;
            }
        }
        if !flipped {
            break;
        }
    }
    let mut out = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let k = 3 - i - j;
        let w = -ip(b[i], b[j]);
        if w > 0.0 {
            out.push(([-b[k][1], b[k][0]], w));
        }
    }
    out
}

/// Coefficients of one time step, evaluated on every node once; generators
/// for any control assignment are assembled from it.
pub struct StepStencil {
    grid: StateGrid,
    /// Off-axis diffusion rates.
    base: Vec<Vec<(usize, f64)>>,
    base_leak: Vec<f64>,
    q: Vec<Mat>,
    b: Vec<Point>,
    /// Axis diffusion rate `d_a / h²`.
    axis: Vec<[f64; 2]>,
    /// `c_a / (2h)`.
    spread: Vec<[f64; 2]>,
}

impl StepStencil {
    pub fn new(coeffs: &CoefficientSet, env: &Environment, k: usize) -> Result<Self> {
        let grid = env.curve().grid().clone();
        coeffs.check_grid(&grid)?;
        let n = grid.len();
        let dim = grid.dim();
        let h = grid.dx();
        let mut base = Vec::with_capacity(n);
        let mut base_leak = vec![0.0; n];
        let mut q = Vec::with_capacity(n);
        let mut bs = Vec::with_capacity(n);
        let mut axis = Vec::with_capacity(n);
        let mut spread = Vec::with_capacity(n);
        for i in 0..n {
            let x = grid.point(i);
            let a = coeffs.a(&x, k, env);
            let b = coeffs.b(&x, k, env);
            let qi = coeffs.q(&x, k, env);
            if !a.iter().chain(b.iter()).chain(qi.iter()).all(|v| v.is_finite()) {
                return Err(Error::Numerical(format!("non-finite coefficient at node {i}, step {k}")));
            }
            let emin = sym_eigenvalues(&a, dim).into_iter().fold(f64::INFINITY, f64::min);
            if emin < -tol::PSD {
                return Err(validation(format!("diffusion not PSD at node {i}, step {k} (eigenvalue {emin})")));
            }
            let mut row = Vec::new();
            let mut d = [0.0; 2];
            if dim == 1 {
                d[0] = a[(0, 0)].max(0.0);
            } else {
                let s = (a + a.transpose()) * 0.5;
                for (e, w) in selling(&s) {
                    match (e[0].abs(), e[1].abs()) {
                        (1, 0) => d[0] += w,
                        (0, 1) => d[1] += w,
                        _ => {
                            let r = w / (h * h);
                            for off in [e, [-e[0], -e[1]]] {
                                match grid.shift(i, off) {
                                    Some(j) => row.push((j, r)),
                                    None => base_leak[i] += r,
                                }
                            }
                        }
                    }
                }
            }
            let mut ax_rate = [0.0; 2];
            let mut sp = [0.0; 2];
            for ax in 0..dim {
                let (lo, hi) = coeffs.control.range([qi[(ax, 0)], qi[(ax, 1)]]);
                let s = (b[ax] + lo).abs().max((b[ax] + hi).abs());
                ax_rate[ax] = d[ax] / (h * h);
                sp[ax] = (s - 2.0 * d[ax] / h).max(0.0) / (2.0 * h);
            }
            base.push(row);
            q.push(qi);
            bs.push(b);
            axis.push(ax_rate);
            spread.push(sp);
        }
        Ok(Self { grid, base, base_leak, q, b: bs, axis, spread })
    }

    /// Generator for the control `u(i)` at node `i`.
    pub fn generator(&self, u: impl Fn(usize) -> Point) -> Generator {
        let n = self.grid.len();
        let h = self.grid.dx();
        let mut rows = self.base.clone();
        let mut leak = self.base_leak.clone();
        for i in 0..n {
            let w = self.b[i] + self.q[i] * u(i);
            for ax in 0..self.grid.dim() {
                let mut fwd = [0, 0];
                fwd[ax] = 1;
                let bwd = [-fwd[0], -fwd[1]];
                let half = w[ax] / (2.0 * h);
                let (d, c) = (self.axis[i][ax], self.spread[i][ax]);
                for (off, r) in [(fwd, d + c + half), (bwd, d + c - half)] {
                    if r <= 0.0 {
                        continue;
                    }
                    match self.grid.shift(i, off) {
                        Some(j) => rows[i].push((j, r)),
                        None => leak[i] += r,
                    }
                }
            }
        }
        Generator::from_rows(rows, leak)
    }
}

/// Which control the generator is built for.
#[derive(Clone, Copy, Debug)]
pub enum ControlChoice<'a> {
    /// Row `k` of a feedback field.
    Field(&'a ControlField),
    /// A control-grid index, used at every node.
    Index(usize),
    Constant(Point),
}

/// Generator of time step `k` under the given control.
pub fn build_generator(coeffs: &CoefficientSet, env: &Environment, k: usize, control: ControlChoice) -> Result<Generator> {
    let st = StepStencil::new(coeffs, env, k)?;
    Ok(match control {
        ControlChoice::Field(f) => st.generator(|i| f.get(k, i)),
        ControlChoice::Index(j) => {
            let u = *coeffs.control.points().get(j).ok_or_else(|| validation(format!("control index {j} out of range")))?;
            st.generator(|_| u)
        }
        ControlChoice::Constant(u) => st.generator(|_| u),
    })
}

/// `max_i (GV)_i / V_i`, the smallest `C` with `GV ≤ C V` on the grid.
pub fn generator_growth(g: &Generator, v: &[f64]) -> f64 {
    g.apply(v).iter().zip(v).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selling_reconstructs() {
        for d in [
            Mat::new(1.0, 0.0, 0.0, 1.0),
            Mat::new(2.0, 0.5, 0.5, 1.0),
            Mat::new(1.0, 0.9, 0.9, 1.0),
            Mat::new(1.0, -0.95, -0.95, 1.0),
            Mat::new(3.0, 2.9, 2.9, 3.0),
            Mat::new(1.0, 0.0, 0.0, 0.0),
            Mat::zeros(),
        ] {
            let mut r = Mat::zeros();
            for (e, w) in selling(&d) {
                assert!(w >= 0.0);
                let v = Point::new(e[0] as f64, e[1] as f64);
                r += w * v * v.transpose();
            }
            assert!((r - d).abs().max() < 1e-12, "{d} vs {r}");
        }
    }

    #[test]
    fn diagonally_dominant_is_nine_point() {
        for (e, _) in selling(&Mat::new(2.0, 0.5, 0.5, 1.0)) {
            assert!(e[0].abs() <= 1 && e[1].abs() <= 1);
        }
    }
}
