//! Legendre transform, monotone inversion and the β_{V,W} level function.

use crate::error::{validation, Error, Result};
use crate::lp::{Cmp, LinearProgram, Sense};
use crate::measures::StateGrid;
use crate::Point;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// `h*(p) = sup_{0 ≤ v ≤ v_max} (p v − h(v))` by golden-section search.
///
/// The objective is concave for convex `h`, so the search is exact up to the
/// bracket width. A maximizer pressed against `v_max` means the bound was too
/// small for this `p`.
pub fn legendre(h: &dyn Fn(f64) -> f64, p: f64, v_max: f64) -> Result<f64> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(validation(format!("Legendre argument must be nonnegative, got {p}")));
    }
    if !(v_max > 0.0) {
        return Err(validation(format!("search bound must be positive, got {v_max}")));
    }
    let obj = |v: f64| p * v - h(v);
    let (mut a, mut b) = (0.0, v_max);
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (obj(c), obj(d));
    while b - a > 1e-13 * (1.0 + v_max) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = obj(d);
        }
    }
    let v = 0.5 * (a + b);
    if v >= v_max * (1.0 - 1e-9) {
        return Err(Error::BoundTooSmall { bound: v_max });
    }
    Ok(obj(v).max(obj(0.0)).max(0.0))
}

/// Inverse of an increasing `h` by doubling and bisection.
pub fn h_inverse(h: &dyn Fn(f64) -> f64, y: f64) -> Result<f64> {
    let h0 = h(0.0);
    if !(y >= h0) {
        return Err(validation(format!("value {y} lies below h(0) = {h0}")));
    }
    if y == h0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while h(hi) < y {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Numerical(format!("h never reaches {y}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(if (h(lo) - y).abs() < (h(hi) - y).abs() { lo } else { hi })
}

/// `β_{V,W}(R) = sup { R⁻¹ ∫W dη : η probability on the grid, ∫V dη ≤ R }`.
pub fn beta_vw(v: &dyn Fn(&Point) -> f64, w: &dyn Fn(&Point) -> f64, grid: &StateGrid, r: f64) -> Result<f64> {
    let vv = grid.field(v);
    let ww = grid.field(w);
    for (i, (a, b)) in vv.iter().zip(&ww).enumerate() {
        if !(*b >= 0.0 && b <= a) {
            return Err(validation(format!("need 0 <= W <= V, fails at node {i} (W={b}, V={a})")));
        }
    }
    let vmin = vv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(r >= vmin) || r <= 0.0 {
        return Err(validation(format!("level {r} below min V = {vmin}")));
    }
    let mut lp = LinearProgram::new(Sense::Maximize);
    let vars: Vec<_> = ww.iter().map(|wi| lp.add_var(wi / r, 0.0, f64::INFINITY)).collect();
    let ones: Vec<_> = vars.iter().map(|&x| (x, 1.0)).collect();
    lp.add_row(&ones, Cmp::Eq, 1.0);
    let vrow: Vec<_> = vars.iter().zip(&vv).map(|(&x, &c)| (x, c)).collect();
    lp.add_row(&vrow, Cmp::Le, r);
    Ok(lp.solve()?.objective.clamp(0.0, 1.0))
}
