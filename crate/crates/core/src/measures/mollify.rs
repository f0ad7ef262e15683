//! Space-time mollification of a measure curve and a payload field.
//!
//! For each output time node `t_k` with `t_k + ε ≤ T`:
//!
//! ```text
//! μ^ε_k(y) = ε φ(y) + (1−ε) Σ_j w_j Σ_z ω_z(y) μ_j(z)
//! u_ε,k(y) = (1−ε) / μ^ε_k(y) · Σ_j w_j Σ_z ω_z(y) u_j(z) μ_j(z)
//! ```
//!
//! `w_j` is the fraction of `[t_k, t_k + ε]` covered by `[t_j, t_{j+1})`
//! (the curve is held constant on each step), `ω_z` is the bump kernel
//! `(1 − |y−z|²/ε²)³` renormalized on the grid for each source node `z`,
//! and `φ` is the standard Gaussian sampled on the nodes and normalized.

use super::{MeasureCurve, StateGrid};
use crate::error::{dimension, validation, Result};

#[derive(Clone, Debug)]
pub struct Mollified {
    /// Time-node indices of the output slices.
    pub times: Vec<usize>,
    pub density: Vec<Vec<f64>>,
    pub payload: Vec<Vec<f64>>,
    /// Sampled standard Gaussian used as the positive floor.
    pub floor: Vec<f64>,
    /// Time weights `w_j` per output slice.
    pub time_weights: Vec<Vec<(usize, f64)>>,
}

/// Per source node, the normalized kernel weights it spreads to.
fn kernel_rows(grid: &StateGrid, eps: f64) -> Vec<Vec<(usize, f64)>> {
    let reach = (eps / grid.dx()).floor() as i64;
    (0..grid.len())
        .map(|z| {
            let pz = grid.point(z);
            let mut row = Vec::new();
            let (ry, rx) = if grid.dim() == 1 { (0, reach) } else { (reach, reach) };
            for oy in -ry..=ry {
                for ox in -rx..=rx {
                    if let Some(y) = grid.shift(z, [ox, oy]) {
                        let r2 = (grid.point(y) - pz).norm_squared() / (eps * eps);
                        if r2 < 1.0 {
                            row.push((y, (1.0 - r2).powi(3)));
                        }
                    }
                }
            }
            let s: f64 = row.iter().map(|e| e.1).sum();
            row.iter_mut().for_each(|e| e.1 /= s);
            row
        })
        .collect()
}

fn time_weights(curve: &MeasureCurve, k: usize, eps: f64) -> Vec<(usize, f64)> {
    let tg = curve.time();
    let (a, b) = (tg.time(k), tg.time(k) + eps);
    let mut out = Vec::new();
    for j in k..tg.nodes() {
        let lo = tg.time(j).max(a);
        let hi = if j + 1 < tg.nodes() { tg.time(j + 1).min(b) } else { lo };
        if hi > lo {
            out.push((j, (hi - lo) / eps));
        }
    }
    let s: f64 = out.iter().map(|e| e.1).sum();
    out.iter_mut().for_each(|e| e.1 /= s);
    out
}

/// Mollifies `curve` and `payload` (one scalar per time node and grid node).
pub fn mollify_curve(curve: &MeasureCurve, payload: &[Vec<f64>], eps: f64) -> Result<Mollified> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(validation(format!("bandwidth must lie in (0, 1/2), got {eps}")));
    }
    let tg = curve.time();
    if eps >= tg.horizon() {
        return Err(validation(format!("bandwidth {eps} not below the horizon {}", tg.horizon())));
    }
    if payload.len() != tg.nodes() {
        return Err(dimension(format!("payload has {} slices, expected {}", payload.len(), tg.nodes())));
    }
    let grid = curve.grid();
    for p in payload {
        grid.check_len(p.len(), "payload slice")?;
    }
    let kernel = kernel_rows(grid, eps);
    let floor = super::normalize(grid.field(|p| (-0.5 * p.norm_squared()).exp()));
    let n = grid.len();
    let mut out = Mollified { times: Vec::new(), density: Vec::new(), payload: Vec::new(), floor: floor.clone(), time_weights: Vec::new() };
    for k in 0..tg.nodes() {
        if tg.time(k) + eps > tg.horizon() * (1.0 + 1e-12) {
            break;
        }
        let tw = time_weights(curve, k, eps);
        let mut smooth = vec![0.0; n];
        let mut carried = vec![0.0; n];
        for &(j, w) in &tw {
            let mu = curve.slice(j);
            for z in 0..n {
                let m = w * mu[z];
                if m == 0.0 {
                    continue;
                }
                let um = m * payload[j][z];
                for &(y, o) in &kernel[z] {
                    smooth[y] += o * m;
                    carried[y] += o * um;
                }
            }
        }
        let density: Vec<f64> = (0..n).map(|y| eps * floor[y] + (1.0 - eps) * smooth[y]).collect();
        let u: Vec<f64> = (0..n).map(|y| (1.0 - eps) * carried[y] / density[y]).collect();
        out.times.push(k);
        out.density.push(density);
        out.payload.push(u);
        out.time_weights.push(tw);
    }
    Ok(out)
}

/// Checks `Φ(Σ ξ ω) ≤ Σ Φ(ξ) ω` for nonnegative sub-probability weights `ω`.
pub fn subprob_jensen_check(phi: impl Fn(f64) -> f64, xi: &[f64], omega: &[f64]) -> Result<bool> {
    if xi.len() != omega.len() {
        return Err(dimension("samples and weights differ in length"));
    }
    if let Some(w) = omega.iter().find(|w| !(**w >= 0.0)) {
        return Err(validation(format!("negative weight {w}")));
    }
    if let Some(x) = xi.iter().find(|x| !(**x >= 0.0)) {
        return Err(validation(format!("negative sample {x}")));
    }
    let total: f64 = omega.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(validation(format!("weights sum to {total} > 1")));
    }
    let mean: f64 = xi.iter().zip(omega).map(|(x, w)| x * w).sum();
    let rhs: f64 = xi.iter().zip(omega).map(|(x, w)| phi(*x) * w).sum();
    Ok(phi(mean) <= rhs + 1e-12)
}
