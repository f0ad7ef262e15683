//! Transport distances between probability vectors on a common grid.

use super::{check_probability, StateGrid};
use crate::error::Result;
use crate::lp::{Cmp, LinearProgram, Sense};

/// Coupling of two probability vectors, stored sparsely as `(source node, target node, weight)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    pub grid: StateGrid,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
}

impl TransportPlan {
    /// Largest deviation of the plan's row and column sums from the marginals.
    pub fn marginal_error(&self) -> f64 {
        let mut rows = vec![0.0; self.source.len()];
        let mut cols = vec![0.0; self.target.len()];
        for &(i, j, w) in &self.entries {
            rows[i] += w;
            cols[j] += w;
        }
        let r = rows.iter().zip(&self.source).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(&self.target).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }

    /// Cost of the plan under `c(x, y)`.
    pub fn evaluate(&self, c: impl Fn(usize, usize) -> f64) -> f64 {
        self.entries.iter().map(|&(i, j, w)| w * c(i, j)).sum()
    }
}

#[derive(Clone, Debug)]
pub struct Wasserstein {
    pub distance: f64,
    pub plan: TransportPlan,
}

fn validate(a: &[f64], b: &[f64], grid: &StateGrid) -> Result<()> {
    check_probability(a, grid.len(), "source")?;
    check_probability(b, grid.len(), "target")
}

fn support(w: &[f64]) -> Vec<(usize, f64)> {
    w.iter().enumerate().filter(|(_, &x)| x > 0.0).map(|(i, &x)| (i, x)).collect()
}

type Entries = Vec<(usize, usize, f64)>;

/// Balanced transport LP between two sparse vectors. The target is rescaled to
/// the source's total so tiny mass mismatches do not make it infeasible.
fn transport_lp(src: &[(usize, f64)], dst: &[(usize, f64)], cost: impl Fn(usize, usize) -> f64) -> Result<(f64, Entries)> {
    let sa: f64 = src.iter().map(|s| s.1).sum();
    let sb: f64 = dst.iter().map(|s| s.1).sum();
    if src.is_empty() || dst.is_empty() || sa <= 0.0 {
        return Ok((0.0, Vec::new()));
    }
    let scale = sa / sb;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut vars = Vec::with_capacity(src.len() * dst.len());
    for &(i, _) in src {
        for &(j, _) in dst {
            vars.push((i, j, lp.add_var(cost(i, j), 0.0, f64::INFINITY)));
        }
    }
    let m = dst.len();
    for (r, &(_, w)) in src.iter().enumerate() {
        let terms: Vec<_> = (0..m).map(|c| (vars[r * m + c].2, 1.0)).collect();
        lp.add_row(&terms, Cmp::Eq, w);
    }
    for (c, &(_, w)) in dst.iter().enumerate() {
        let terms: Vec<_> = (0..src.len()).map(|r| (vars[r * m + c].2, 1.0)).collect();
        lp.add_row(&terms, Cmp::Eq, w * scale);
    }
    let sol = lp.solve()?;
    let entries = vars
        .iter()
        .filter_map(|&(i, j, v)| {
            let w = sol.values[v];
            (w > 0.0).then_some((i, j, w))
        })
        .collect();
    Ok((sol.objective, entries))
}

fn dist(grid: &StateGrid, i: usize, j: usize) -> f64 {
    (grid.point(i) - grid.point(j)).norm()
}

/// Splits off the mass two vectors share. With a metric cost the shared mass
/// can stay in place at zero cost.
fn split_common(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>, Entries) {
    let mut ra = a.to_vec();
    let mut rb = b.to_vec();
    let mut diag = Vec::new();
    for i in 0..a.len() {
        let c = a[i].min(b[i]);
        if c > 0.0 {
            diag.push((i, i, c));
            ra[i] -= c;
            rb[i] -= c;
        }
    }
    (ra, rb, diag)
}

/// Bounded-Lipschitz (Kantorovich-Rubinstein) distance, computed as optimal
/// transport with ground cost `min(|x−y|, 2)`.
///
/// In one dimension this is a min-cost flow on the grid line plus a hub node
/// reachable from every node at cost 1, so routes through the hub cost 2.
pub fn kr_distance(a: &[f64], b: &[f64], grid: &StateGrid) -> Result<f64> {
    validate(a, b, grid)?;
    if a == b {
        return Ok(0.0);
    }
    let d = if grid.dim() == 1 {
        kr_line(a, b, grid)?
    } else {
        let (ra, rb, _) = split_common(a, b);
        let (c, _) = transport_lp(&support(&ra), &support(&rb), |i, j| dist(grid, i, j).min(2.0))?;
        c
    };
    Ok(d.clamp(0.0, 2.0))
}

fn kr_line(a: &[f64], b: &[f64], grid: &StateGrid) -> Result<f64> {
    let n = grid.len();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut right = Vec::with_capacity(n - 1);
    let mut left = Vec::with_capacity(n - 1);
    for i in 0..n - 1 {
        let c = grid.coord(i + 1) - grid.coord(i);
        right.push(lp.add_var(c, 0.0, f64::INFINITY));
        left.push(lp.add_var(c, 0.0, f64::INFINITY));
    }
    let into_hub: Vec<_> = (0..n).map(|_| lp.add_var(1.0, 0.0, f64::INFINITY)).collect();
    let from_hub: Vec<_> = (0..n).map(|_| lp.add_var(1.0, 0.0, f64::INFINITY)).collect();
    for i in 0..n {
        // outflow minus inflow equals supply minus demand
        let mut terms = vec![(into_hub[i], 1.0), (from_hub[i], -1.0)];
        if i + 1 < n {
            terms.push((right[i], 1.0));
            terms.push((left[i], -1.0));
        }
        if i > 0 {
            terms.push((left[i - 1], 1.0));
            terms.push((right[i - 1], -1.0));
        }
        lp.add_row(&terms, Cmp::Eq, a[i] - b[i]);
    }
    Ok(lp.solve()?.objective)
}

/// Order-`p` Wasserstein distance and an optimal coupling.
///
/// One-dimensional inputs use the monotone (north-west corner) coupling, which
/// is optimal for convex costs on the line; two-dimensional inputs solve the
/// transport LP.
pub fn wasserstein_p(a: &[f64], b: &[f64], grid: &StateGrid, p: u32) -> Result<Wasserstein> {
    validate(a, b, grid)?;
    if !(1..=2).contains(&p) {
        return Err(crate::error::validation(format!("order p must be 1 or 2, got {p}")));
    }
    let pf = p as f64;
    let c = |i: usize, j: usize| dist(grid, i, j).powf(pf);
    let (cost, entries) = if grid.dim() == 1 {
        let entries = monotone_coupling(a, b);
        (entries.iter().map(|&(i, j, w)| w * c(i, j)).sum(), entries)
    } else {
        transport_lp(&support(a), &support(b), c)?
    };
    let cost = cost.max(0.0);
    Ok(Wasserstein {
        distance: cost.powf(1.0 / pf),
        plan: TransportPlan { grid: grid.clone(), source: a.to_vec(), target: b.to_vec(), entries, cost },
    })
}

/// North-west corner coupling of two vectors on sorted nodes.
pub(crate) fn monotone_coupling(a: &[f64], b: &[f64]) -> Vec<(usize, usize, f64)> {
    let scale = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    let mut entries = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut ra = a.first().copied().unwrap_or(0.0);
    let mut rb = b.first().copied().unwrap_or(0.0) * scale;
    while i < a.len() && j < b.len() {
        let m = ra.min(rb);
        if m > 0.0 {
            entries.push((i, j, m));
        }
        ra -= m;
        rb -= m;
        if ra <= 0.0 {
            i += 1;
            ra = a.get(i).copied().unwrap_or(0.0);
        } else {
            j += 1;
            rb = b.get(j).copied().unwrap_or(0.0) * scale;
        }
    }
    entries
}

/// Optimal plan for the truncated cost `min(|x−y|, 1)`.
pub fn min_cost_plan(a: &[f64], b: &[f64], grid: &StateGrid) -> Result<TransportPlan> {
    validate(a, b, grid)?;
    let (ra, rb, mut entries) = split_common(a, b);
    let (cost, rest) = transport_lp(&support(&ra), &support(&rb), |i, j| dist(grid, i, j).min(1.0))?;
    entries.extend(rest);
    Ok(TransportPlan { grid: grid.clone(), source: a.to_vec(), target: b.to_vec(), entries, cost: cost.max(0.0) })
}
