//! Disintegration of an occupation measure over its (x, t) marginal.

use crate::best_response::OccupationMeasure;

/// Per-cell conditional distributions over the control grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalFamily {
    steps: usize,
    controls: usize,
    nodes: usize,
    base: Vec<f64>,
    probs: Vec<f64>,
    defined: Vec<bool>,
}

impl ConditionalFamily {
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn controls(&self) -> usize {
        self.controls
    }
    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// (x, t) marginal weight of cell `(k, i)`.
    pub fn base(&self, k: usize, i: usize) -> f64 {
        self.base[k * self.nodes + i]
    }

    pub fn is_defined(&self, k: usize, i: usize) -> bool {
        self.defined[k * self.nodes + i]
    }

    /// Conditional probability vector of cell `(k, i)`, or `None` where the marginal vanishes.
    pub fn cell(&self, k: usize, i: usize) -> Option<&[f64]> {
        let c = k * self.nodes + i;
        self.defined[c].then(|| &self.probs[c * self.controls..(c + 1) * self.controls])
    }

    /// Number of cells flagged undefined.
    pub fn undefined_count(&self) -> usize {
        self.defined.iter().filter(|d| !**d).count()
    }

    /// Rebuilds the occupation measure as conditional times marginal.
    pub fn recompose(&self) -> OccupationMeasure {
        let (m, n) = (self.controls, self.nodes);
        let mut w = vec![0.0; self.steps * m * n];
        for k in 0..self.steps {
            for i in 0..n {
                if let Some(p) = self.cell(k, i) {
                    let b = self.base(k, i);
                    for j in 0..m {
                        w[(k * m + j) * n + i] = p[j] * b;
                    }
                }
            }
        }
        OccupationMeasure::from_raw(self.steps, m, n, w)
    }
}

pub fn conditional_family(pi: &OccupationMeasure) -> ConditionalFamily {
    let (steps, m, n) = (pi.steps(), pi.controls(), pi.nodes());
    let mut base = vec![0.0; steps * n];
    let mut probs = vec![0.0; steps * n * m];
    let mut defined = vec![false; steps * n];
    for k in 0..steps {
        for i in 0..n {
            let c = k * n + i;
            let b: f64 = (0..m).map(|j| pi.get(k, j, i)).sum();
            base[c] = b;
            if b > 0.0 {
                defined[c] = true;
                for j in 0..m {
                    probs[c * m + j] = pi.get(k, j, i) / b;
                }
            }
        }
    }
    ConditionalFamily { steps, controls: m, nodes: n, base, probs, defined }
}
