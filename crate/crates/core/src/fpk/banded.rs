//! Banded LU without pivoting, for the column diagonally dominant M-matrices
//! `I − Δt Gᵀ` of implicit steps.

use crate::error::{Error, Result};

pub struct Banded {
    n: usize,
    bw: usize,
    /// Row-major band storage: entry (i, j) lives at `i * width + (j + bw − i)`.
    data: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, data: vec![0.0; n * (2 * bw + 1)] }
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.at(i, j);
        self.data[k] += v;
    }

    /// Solves `M x = rhs` in place, destroying the factor storage.
    pub fn solve(mut self, rhs: &mut [f64]) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for p in 0..n {
            let piv = self.data[self.at(p, p)];
            if !(piv.abs() > 0.0) || !piv.is_finite() {
                return Err(Error::Numerical(format!("zero pivot at row {p} of implicit step")));
            }
            let last = (p + bw).min(n - 1);
            for r in p + 1..=last {
                let idx = self.at(r, p);
                let f = self.data[idx] / piv;
                if f == 0.0 {
                    continue;
                }
                self.data[idx] = 0.0;
                for c in p + 1..=last {
                    let src = self.data[self.at(p, c)];
                    let dst = self.at(r, c);
                    self.data[dst] -= f * src;
                }
                rhs[r] -= f * rhs[p];
            }
        }
        for p in (0..n).rev() {
            let last = (p + bw).min(n - 1);
            let mut s = rhs[p];
            for c in p + 1..=last {
                s -= self.data[self.at(p, c)] * rhs[c];
            }
            rhs[p] = s / self.data[self.at(p, p)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal() {
        let mut m = Banded::zeros(3, 1);
        for (i, j, v) in [(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 2.0)] {
            m.add(i, j, v);
        }
        let mut b = vec![1.0, 0.0, 1.0];
        m.solve(&mut b).unwrap();
        for x in b {
            assert!((x - 1.0).abs() < 1e-15);
        }
    }
}
