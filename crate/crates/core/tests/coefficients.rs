mod common;

use common::{custom, frozen, line, p1};
use mfg_core::coefficients::catalog::{example_catalog, whole_curve_functional, Params};
use mfg_core::coefficients::hypotheses::*;
use mfg_core::coefficients::{beta_vw, h_inverse, legendre};
use mfg_core::coefficients::{CoefficientSet, ControlSet, Environment};
use mfg_core::measures::{gaussian_weights, MeasureCurve, StateGrid, TimeGrid};
use mfg_core::{Mat, Point};
use proptest::prelude::*;
use std::sync::Arc;

fn u1() -> ControlSet {
    ControlSet::uniform_box(1, -1.0, 1.0, 9).unwrap()
}

fn gauss_env(grid: &StateGrid, time: &TimeGrid, mean: f64) -> Environment {
    frozen(grid, time, &gaussian_weights(grid, &p1(mean), 0.25).unwrap())
}

fn all_pass(coeffs: &CoefficientSet, env: &Environment) -> bool {
    let g = env.curve().grid();
    let sample = Sample::standard(g, env.curve().time(), &coeffs.control, 7);
    let reports = check_all(coeffs, env, &sample).unwrap();
    for r in &reports {
        if !r.pass() {
            eprintln!("{}", r.to_text());
        }
    }
    reports.iter().all(|r| r.pass())
}

#[test]
fn legendre_examples() {
    let h = |v: f64| 2.0 * v * v;
    assert!((legendre(&h, 1.0, 100.0).unwrap() - 0.125).abs() < 1e-12);
    assert_eq!(legendre(&h, 0.0, 100.0).unwrap(), 0.0);
    let q = |v: f64| v.powi(4);
    let brute = (0..=400_000).map(|i| i as f64 * 5e-6).map(|v| 2.0 * v - v.powi(4)).fold(f64::MIN, f64::max);
    assert!((legendre(&q, 2.0, 10.0).unwrap() - brute).abs() < 1e-9);
}

#[test]
fn quadratic_biconjugate() {
    let c = 1.5;
    let h = move |v: f64| c * v * v;
    let ps: Vec<f64> = (0..=600).map(|i| i as f64 * 0.1).collect();
    let hs: Vec<f64> = ps.iter().map(|&p| legendre(&h, p, 1e3).unwrap()).collect();
    for i in 0..=100 {
        let v = i as f64 * 0.1;
        let hh = ps.iter().zip(&hs).map(|(p, s)| p * v - s).fold(f64::MIN, f64::max);
        assert!((hh - h(v)).abs() < 1e-4, "v={v}: {hh} vs {}", h(v));
    }
}

#[test]
fn h_inverse_examples() {
    let sq = |v: f64| v * v;
    assert!((h_inverse(&sq, 4.0).unwrap() - 2.0).abs() < 1e-10);
    assert_eq!(h_inverse(&sq, 0.0).unwrap(), 0.0);
    let h = |v: f64| v * v + v;
    assert!((h_inverse(&h, 6.0).unwrap() - 2.0).abs() < 1e-10);
    assert!(h_inverse(&|v: f64| v + 1.0, 0.5).is_err());
}

/// Best value of `R⁻¹∫W` over all one- and two-point laws with `∫V ≤ R`.
fn beta_pairs(v: &[f64], w: &[f64], r: f64) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..v.len() {
        if v[i] <= r {
            best = best.max(w[i] / r);
        }
        for j in 0..v.len() {
            if v[i] < r && v[j] > r {
                let th = (v[j] - r) / (v[j] - v[i]);
                best = best.max((th * w[i] + (1.0 - th) * w[j]) / r);
            }
        }
    }
    best
}

#[test]
fn beta_examples() {
    let g = line(8.0, 161);
    let v = |x: &Point| 1.0 + x.norm_squared();
    let w = |x: &Point| x.norm();
    assert_eq!(beta_vw(&v, &|_: &Point| 0.0, &g, 3.0).unwrap(), 0.0);
    let b5 = beta_vw(&v, &w, &g, 5.0).unwrap();
    assert!((b5 - 0.4).abs() < 1e-9, "{b5}");
    for r in [1.3, 2.0, 7.7, 20.0, 64.9] {
        let lp = beta_vw(&v, &w, &g, r).unwrap();
        let oracle = beta_pairs(&g.field(v), &g.field(w), r);
        assert!((lp - oracle).abs() < 1e-8, "R={r}: {lp} vs {oracle}");
        assert!((lp - (r - 1.0).sqrt() / r).abs() < 0.02);
    }
    assert!((beta_vw(&v, &v, &g, 5.0).unwrap() - 1.0).abs() < 1e-9);
    assert!(beta_vw(&v, &w, &g, 0.5).is_err());
}

#[test]
fn beta_decays_along_ladder() {
    let g = line(8.0, 161);
    let v = |x: &Point| 1.0 + x.norm_squared();
    let w = |x: &Point| x.norm();
    let ladder: Vec<f64> = (1..=8).map(|e| 2f64.powi(e)).collect();
    let betas: Vec<f64> = ladder.iter().map(|&r| beta_vw(&v, &w, &g, r).unwrap()).collect();
    for p in betas.windows(2) {
        assert!(p[1] <= p[0] + 1e-12);
    }
    assert!(betas[7] < betas[0] / 10.0, "{betas:?}");
    // past R = 1 + L² the grid cap binds: all mass at |x| = 8, well below √(R−1)/R
    assert!((betas[7] - 8.0 / 256.0).abs() < 1e-9, "{}", betas[7]);
    assert!(betas[7] < 255f64.sqrt() / 256.0 / 1.9);
}

#[test]
fn catalog_entries_pass_their_checks() {
    let g = line(3.0, 31);
    let t = TimeGrid::new(1.0, 10).unwrap();
    let env = gauss_env(&g, &t, 1.0);
    for name in ["ex2.1", "ex2.2", "ex2.3", "ex2.4", "linear"] {
        let c = example_catalog(name, &Params::new(), 1, u1()).unwrap();
        assert!(all_pass(&c, &env), "{name}");
    }
    let g2 = StateGrid::new(2, 2.0, 9).unwrap();
    let t2 = TimeGrid::new(1.0, 4).unwrap();
    let env2 = frozen(&g2, &t2, &gaussian_weights(&g2, &Point::new(0.5, -0.5), 0.25).unwrap());
    let u2 = ControlSet::uniform_box(2, -1.0, 1.0, 3).unwrap();
    for name in ["ex2.1", "ex2.2"] {
        let c = example_catalog(name, &Params::new(), 2, u2.clone()).unwrap();
        assert!(all_pass(&c, &env2), "{name} 2D");
    }
}

#[test]
fn ex21_lyapunov_constant() {
    let c = example_catalog("ex2.1", &Params::new(), 1, u1()).unwrap();
    // C₁ = C₂ = C = 1 in 1D
    assert_eq!(c.lyapunov.c_l, 0.5);
    assert_eq!(c.lyapunov.m(), 2.5);
    assert!((c.lyapunov.gamma(2.0) - 0.25 * (-1.0f64).exp()).abs() < 1e-15);
}

#[test]
fn trivial_dynamics_pass() {
    let c = custom(1, u1(), 0.0, |_| Point::zeros(), 0.0, |u, _| u.norm_squared(), |_| 0.0);
    let g = line(3.0, 31);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let env = gauss_env(&g, &t, 0.0);
    let s = Sample::standard(&g, &t, &c.control, 1);
    assert!(check_h2_1(&c, &env, &s).unwrap().pass());
    assert!(check_h2_2_h2_3(&c, &env, &s).unwrap().pass());
    assert!(check_h3(&c, &env, &s).unwrap().pass());
}

#[test]
fn cubic_drift_fails_lyapunov_bound() {
    let c = custom(1, u1(), 0.1, |x| x * x.norm_squared(), 1.0, |u, _| u.norm_squared(), |_| 0.0);
    let g = line(3.0, 31);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let env = gauss_env(&g, &t, 0.0);
    let s = Sample::standard(&g, &t, &c.control, 1);
    let r = check_h2_1(&c, &env, &s).unwrap();
    assert!(!r.pass());
    // worst point is the boundary: 2x·x³ = 162 at |x| = 3
    let chk = &r.checks[0];
    assert!(chk.worst_lhs > 162.0);
    assert!(chk.worst_at.contains('3'));
}

#[test]
fn concave_cost_fails_convexity() {
    let c = custom(1, u1(), 0.1, |_| Point::zeros(), 1.0, |u, _| -u.norm_squared(), |_| 0.0);
    let g = line(2.0, 11);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let env = gauss_env(&g, &t, 0.0);
    let s = Sample::standard(&g, &t, &c.control, 1);
    let r = check_h3(&c, &env, &s).unwrap();
    assert!(!r.checks.iter().find(|c| c.name.contains("convexity")).unwrap().pass);
}

#[test]
fn state_dependent_diffusion_pair_check() {
    let base = custom(1, u1(), 0.0, |_| Point::zeros(), 1.0, |u, _| u.norm_squared(), |_| 0.0);
    let c = CoefficientSet { diffusion: Arc::new(|x: &Point, _, _| x[0] * x[0] * Mat::new(1.0, 0.0, 0.0, 0.0)), ..base };
    let g = line(2.0, 21);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let env = gauss_env(&g, &t, 0.0);
    let s = Sample::standard(&g, &t, &c.control, 3);
    let r = check_h2_2_h2_3(&c, &env, &s).unwrap();
    assert!(r.pass(), "{}", r.to_text());
    let mono = &r.checks[0];
    // (|x| − |y|)² ≤ |x − y|² with equality on same-sign pairs
    assert!(mono.worst_lhs >= 0.0);
}

#[test]
fn non_psd_diffusion_is_rejected() {
    let base = custom(1, u1(), 0.0, |_| Point::zeros(), 1.0, |u, _| u.norm_squared(), |_| 0.0);
    let c = CoefficientSet { diffusion: Arc::new(|_, _, _| Mat::new(-1.0, 0.0, 0.0, 0.0)), ..base };
    let g = line(2.0, 11);
    let t = TimeGrid::new(1.0, 2).unwrap();
    let env = gauss_env(&g, &t, 0.0);
    let s = Sample::standard(&g, &t, &c.control, 3);
    assert!(!check_h1_1(&c, &env, &s).unwrap().pass());
    assert!(check_h2_2_h2_3(&c, &env, &s).is_err());
}

#[test]
fn whole_curve_of_one_is_horizon() {
    let g = line(2.0, 9);
    for (h, k) in [(1.0, 3), (2.5, 10)] {
        let t = TimeGrid::new(h, k).unwrap();
        let w = (0..=k)
            .map(|j| {
                let raw: Vec<f64> = (0..9).map(|i| 1.0 + ((i + j) % 4) as f64).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        let curve = MeasureCurve::new(g.clone(), t, w).unwrap();
        assert!((whole_curve_functional(&curve, &[1.0; 9]) - h).abs() < 1e-12);
    }
}

#[test]
fn marginal_mode_reads_only_its_slice() {
    let g = line(2.0, 21);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let c = example_catalog("ex2.3", &Params::new(), 1, u1()).unwrap();
    let a = gauss_env(&g, &t, 0.0);
    let mut slices: Vec<Vec<f64>> = (0..5).map(|k| a.curve().slice(k).to_vec()).collect();
    slices[3] = gaussian_weights(&g, &p1(1.0), 0.1).unwrap();
    let b = Environment::new(MeasureCurve::new(g.clone(), t, slices).unwrap());
    for i in 0..g.len() {
        let x = g.point(i);
        for k in [0, 1, 2, 4] {
            assert_eq!(c.f(&p1(0.3), &x, k, &a), c.f(&p1(0.3), &x, k, &b));
        }
        assert_ne!(c.f(&p1(0.3), &x, 3, &a), c.f(&p1(0.3), &x, 3, &b));
    }
}

#[test]
fn whole_curve_mode_sees_only_the_functional() {
    let g = line(2.0, 21);
    let t = TimeGrid::new(1.0, 4).unwrap();
    let c = example_catalog("ex2.4", &Params::new(), 1, u1()).unwrap();
    let s1 = gaussian_weights(&g, &p1(1.0), 0.2).unwrap();
    let s2 = gaussian_weights(&g, &p1(-0.5), 0.3).unwrap();
    let s0 = gaussian_weights(&g, &p1(0.0), 0.3).unwrap();
    let a = Environment::new(
        MeasureCurve::new(g.clone(), t.clone(), vec![s0.clone(), s1.clone(), s2.clone(), s0.clone(), s0.clone()]).unwrap(),
    );
    let b = Environment::new(MeasureCurve::new(g.clone(), t, vec![s0.clone(), s2, s0.clone(), s1, s0]).unwrap());
    for i in 0..g.len() {
        let x = g.point(i);
        assert!((c.f(&p1(0.2), &x, 1, &a) - c.f(&p1(0.2), &x, 1, &b)).abs() < 1e-12);
        assert!((c.b(&x, 2, &a) - c.b(&x, 2, &b)).norm() < 1e-12);
    }
}

#[test]
fn control_sets() {
    let b = ControlSet::uniform_box(1, -1.0, 1.0, 5).unwrap();
    assert_eq!(b.len(), 5);
    assert!(b.contains(&p1(0.99)) && !b.contains(&p1(1.01)));
    assert_eq!(b.project(&p1(3.0)), p1(1.0));
    let ball = ControlSet::uniform_ball(2, Point::zeros(), 1.0, 5).unwrap();
    assert!(ball.points().iter().all(|p| ball.contains(p)));
    let pr = ball.project(&Point::new(3.0, 4.0));
    assert!((pr - Point::new(0.6, 0.8)).norm() < 1e-12);
    assert!(ControlSet::uniform_box(1, 1.0, -1.0, 5).is_err());
}

proptest! {
    #[test]
    fn legendre_monotone_and_convex(p in 0.0f64..20.0, d in 0.01f64..5.0, c in 0.2f64..4.0) {
        let h = move |v: f64| c * v * v;
        let a = legendre(&h, p, 1e4).unwrap();
        let b = legendre(&h, p + d, 1e4).unwrap();
        let m = legendre(&h, p + d / 2.0, 1e4).unwrap();
        prop_assert!(a >= 0.0 && b >= a - 1e-12);
        prop_assert!(m <= 0.5 * (a + b) + 1e-9);
        prop_assert!((a - p * p / (4.0 * c)).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn young_inequality(p in 0.0f64..10.0, v in 0.0f64..10.0, c in 0.2f64..4.0) {
        let h = move |v: f64| c * v * v;
        prop_assert!(p * v <= h(v) + legendre(&h, p, 1e4).unwrap() + 1e-9);
    }

    #[test]
    fn h_inverse_roundtrip(y in 0.0f64..1e4, c in 0.1f64..10.0) {
        let h = move |v: f64| c * v * v + v;
        let x = h_inverse(&h, y).unwrap();
        prop_assert!((h(x) - y).abs() <= 1e-10 * (1.0 + y));
    }
}
