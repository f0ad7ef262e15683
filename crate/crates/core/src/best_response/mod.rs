//! Best responses as linear programs over discrete occupation measures, and
//! their projection to feedback controls.

mod lp;
mod projection;

pub use lp::{solve_lp, witness, BestResponseOptions, BestResponseResult, Feasibility};
pub use projection::{project_markovian, resolve_and_compare, sample_feasible, Resolved};

use crate::coefficients::{CoefficientSet, ControlSet, Environment};
use crate::error::{dimension, validation, Error, Result};
use crate::fpk::StepStencil;
use crate::measures::MeasureCurve;
use crate::{tol, Point};
use rayon::prelude::*;

/// Weights `π(k, j, i)` over time step `k < K`, control index `j` and node `i`.
/// Each time step carries total mass 1.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupationMeasure {
    steps: usize,
    controls: usize,
    nodes: usize,
    weights: Vec<f64>,
}

impl OccupationMeasure {
    pub fn new(steps: usize, controls: usize, nodes: usize, weights: Vec<f64>) -> Result<Self> {
        let pi = Self::from_raw(steps, controls, nodes, weights);
        if pi.weights.len() != steps * controls * nodes {
            return Err(dimension(format!("occupation measure has {} weights, expected {}", pi.weights.len(), steps * controls * nodes)));
        }
        if let Some(w) = pi.weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(validation(format!("occupation measure has weight {w}")));
        }
        let err = pi.normalization_error();
        if err > tol::NORMALIZATION {
            return Err(validation(format!("per-step mass deviates from 1 by {err:e}")));
        }
        Ok(pi)
    }

    pub(crate) fn from_raw(steps: usize, controls: usize, nodes: usize, weights: Vec<f64>) -> Self {
        Self { steps, controls, nodes, weights }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn controls(&self) -> usize {
        self.controls
    }
    pub fn nodes(&self) -> usize {
        self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, k: usize, j: usize, i: usize) -> f64 {
        self.weights[(k * self.controls + j) * self.nodes + i]
    }

    /// State marginal `m_k = Σ_j π(k, j, ·)`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.nodes];
        for j in 0..self.controls {
            for (i, mi) in m.iter_mut().enumerate() {
                *mi += self.get(k, j, i);
            }
        }
        m
    }

    /// Largest per-step deviation of total mass from 1.
    pub fn normalization_error(&self) -> f64 {
        let per = self.controls * self.nodes;
        if per == 0 {
            return 0.0;
        }
        self.weights.chunks(per).map(|c| (c.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `α·self + (1−α)·other`.
    pub fn mix(&self, other: &OccupationMeasure, alpha: f64) -> Result<OccupationMeasure> {
        if (self.steps, self.controls, self.nodes) != (other.steps, other.controls, other.nodes) {
            return Err(dimension("occupation measures have different shapes"));
        }
        let w = self.weights.iter().zip(&other.weights).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
        Ok(Self::from_raw(self.steps, self.controls, self.nodes, w))
    }

    /// `δ_{u(k,i)} ⊗ μ_{t_k}` for a control given by grid indices per cell.
    pub fn deterministic(choice: &[usize], controls: usize, curve: &MeasureCurve) -> Result<Self> {
        let n = curve.grid().len();
        let steps = curve.time().steps();
        if choice.len() != steps * n {
            return Err(dimension("choice vector does not match the grids"));
        }
        let mut w = vec![0.0; steps * controls * n];
        for k in 0..steps {
            let s = curve.slice(k);
            for i in 0..n {
                let j = choice[k * n + i];
                if j >= controls {
                    return Err(validation(format!("control index {j} out of range")));
                }
                w[(k * controls + j) * n + i] = s[i];
            }
        }
        Ok(Self::from_raw(steps, controls, n, w))
    }
}

/// Feedback control `u(k, i)` per time step and node.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlField {
    steps: usize,
    nodes: usize,
    values: Vec<Point>,
}

impl ControlField {
    pub fn new(steps: usize, nodes: usize, values: Vec<Point>) -> Result<Self> {
        if values.len() != steps * nodes {
            return Err(dimension(format!("control field has {} values, expected {}", values.len(), steps * nodes)));
        }
        if values.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(validation("control field has a non-finite value"));
        }
        Ok(Self { steps, nodes, values })
    }

    pub fn constant(steps: usize, nodes: usize, u: Point) -> Self {
        Self { steps, nodes, values: vec![u; steps * nodes] }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn nodes(&self) -> usize {
        self.nodes
    }
    pub fn values(&self) -> &[Point] {
        &self.values
    }
    pub fn get(&self, k: usize, i: usize) -> Point {
        self.values[k * self.nodes + i]
    }
    pub fn set(&mut self, k: usize, i: usize, u: Point) {
        self.values[k * self.nodes + i] = u;
    }

    /// Validation error naming the first cell whose value lies outside `U`.
    pub fn check_in(&self, set: &ControlSet) -> Result<()> {
        for (c, v) in self.values.iter().enumerate() {
            if !set.contains(v) {
                return Err(validation(format!(
                    "control value {:?} at step {}, node {} lies outside U",
                    &v.as_slice()[..set.dim()],
                    c / self.nodes,
                    c % self.nodes
                )));
            }
        }
        Ok(())
    }
}

/// What the cost functional is evaluated on.
#[derive(Clone, Copy, Debug)]
pub enum Carrier<'a> {
    Occupation(&'a OccupationMeasure),
    /// A feedback control and the state curve it generates.
    Feedback {
        control: &'a ControlField,
        state: &'a MeasureCurve,
    },
}

/// `f(u_j, x_i, t_k)` for every `(k, j, i)`, laid out like an occupation measure.
pub(crate) fn running_table(coeffs: &CoefficientSet, env: &Environment) -> Result<Vec<f64>> {
    let grid = env.curve().grid();
    let steps = env.curve().time().steps();
    let us = coeffs.control.points();
    let (m, n) = (us.len(), grid.len());
    let pts = grid.points();
    let table: Vec<f64> = (0..steps * m)
        .into_par_iter()
        .flat_map_iter(|kj| {
            let (k, j) = (kj / m, kj % m);
            let pts = &pts;
            (0..n).map(move |i| coeffs.f(&us[j], &pts[i], k, env))
        })
        .collect();
    if let Some(pos) = table.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("running cost not finite at entry {pos}")));
    }
    Ok(table)
}

pub(crate) fn terminal_field(coeffs: &CoefficientSet, env: &Environment) -> Result<Vec<f64>> {
    let g = env.curve().grid().field(|x| coeffs.g(x, env));
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("terminal cost not finite".into()));
    }
    Ok(g)
}

/// Cost functional `∫∫ f dΠ + ∫ g dμ_T` in the environment `env`.
pub fn evaluate_cost(coeffs: &CoefficientSet, env: &Environment, carrier: Carrier) -> Result<f64> {
    let grid = env.curve().grid();
    let time = env.curve().time();
    let (n, steps, dt) = (grid.len(), time.steps(), time.dt());
    let g = terminal_field(coeffs, env)?;
    match carrier {
        Carrier::Occupation(pi) => {
            let m = coeffs.control.len();
            if (pi.steps(), pi.controls(), pi.nodes()) != (steps, m, n) {
                return Err(dimension("occupation measure does not match the grids"));
            }
            let f = running_table(coeffs, env)?;
            let mut running = 0.0;
            for (w, c) in pi.weights().iter().zip(&f) {
                running += w * c;
            }
            let st = StepStencil::new(coeffs, env, steps - 1)?;
            let mut terminal = 0.0;
            for (j, u) in coeffs.control.points().iter().enumerate() {
                let gg = st.generator(|_| *u).apply(&g);
                for i in 0..n {
                    terminal += pi.get(steps - 1, j, i) * (g[i] + dt * gg[i]);
                }
            }
            Ok(dt * running + terminal)
        }
        Carrier::Feedback { control, state } => {
            if control.steps() != steps || control.nodes() != n {
                return Err(dimension("control field does not match the grids"));
            }
            state.grid().check_same(grid)?;
            let mut running = 0.0;
            for k in 0..steps {
                let s = state.slice(k);
                for i in 0..n {
                    if s[i] != 0.0 {
                        let f = coeffs.f(&control.get(k, i), &grid.point(i), k, env);
                        if !f.is_finite() {
                            return Err(Error::Numerical(format!("running cost not finite at step {k}, node {i}")));
                        }
                        running += f * s[i];
                    }
                }
            }
            let terminal = crate::measures::dot(&g, state.slice(steps));
            Ok(dt * running + terminal)
        }
    }
}
