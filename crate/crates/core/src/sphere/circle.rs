//! Uniform periodic grid on S¹ with trigonometric (Fourier) differentiation.
//!
//! Coefficients are taken in the real orthonormal basis
//! `1/√(2π), cos kθ/√π, sin kθ/√π, …, cos(Kθ)/√(2π)` with `K = N/2`, so the
//! discrete transform is an exact change of basis on the grid.

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub(crate) struct CircleBasis {
    n: usize,
    degrees: Vec<usize>,
    /// `values[k * n + j]` = k-th basis function at node j.
    values: Vec<f64>,
    /// θ-derivative of each basis function at each node.
    derivs: Vec<f64>,
    weight: f64,
}

impl CircleBasis {
    pub(crate) fn new(n: usize) -> Self {
        let half = n / 2;
        let mut degrees = Vec::with_capacity(n);
        degrees.push(0);
        for k in 1..half {
            degrees.push(k);
            degrees.push(k);
        }
        degrees.push(half);

        let s0 = 1.0 / (2.0 * PI).sqrt();
        let sk = 1.0 / PI.sqrt();
        let mut values = vec![0.0; n * n];
        let mut derivs = vec![0.0; n * n];
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            values[j] = s0;
            for k in 1..half {
                let kf = k as f64;
                let (s, c) = (kf * theta).sin_cos();
                let row_c = 2 * k - 1;
                let row_s = 2 * k;
                values[row_c * n + j] = sk * c;
                values[row_s * n + j] = sk * s;
                derivs[row_c * n + j] = -sk * kf * s;
                derivs[row_s * n + j] = sk * kf * c;
            }
            // Nyquist mode: its first derivative vanishes at every node.
            let row = n - 1;
            values[row * n + j] = s0 * (half as f64 * theta).cos();
        }
        Self {
            n,
            degrees,
            values,
            derivs,
            weight: 2.0 * PI / n as f64,
        }
    }

    pub(crate) fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub(crate) fn analyze(&self, u: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let row = &self.values[k * n..(k + 1) * n];
                self.weight * row.iter().zip(u).map(|(b, v)| b * v).sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn synthesize(&self, coefs: &[f64]) -> Vec<f64> {
        self.combine(&self.values, coefs)
    }

    pub(crate) fn synthesize_derivative(&self, coefs: &[f64]) -> Vec<f64> {
        self.combine(&self.derivs, coefs)
    }

    /// Value of the trigonometric interpolant at an arbitrary direction.
    pub(crate) fn evaluate_at(&self, coefs: &[f64], p: &[f64; 3]) -> f64 {
        let theta = p[1].atan2(p[0]);
        let half = self.n / 2;
        let s0 = 1.0 / (2.0 * PI).sqrt();
        let sk = 1.0 / PI.sqrt();
        let mut total = coefs[0] * s0;
        for k in 1..half {
            let (s, c) = (k as f64 * theta).sin_cos();
            total += sk * (coefs[2 * k - 1] * c + coefs[2 * k] * s);
        }
        total + coefs[self.n - 1] * s0 * (half as f64 * theta).cos()
    }

    fn combine(&self, table: &[f64], coefs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (k, &c) in coefs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let row = &table[k * n..(k + 1) * n];
            for (o, b) in out.iter_mut().zip(row) {
                *o += c * b;
            }
        }
        out
    }
}
