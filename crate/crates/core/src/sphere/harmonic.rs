//! Gauss–Legendre × uniform-longitude grid on S² with a truncated real
//! spherical-harmonic basis.
//!
//! With `N` colatitude rings and `2N` longitudes the triangular truncation
//! `l ≤ N − 1` is integrated exactly by the grid quadrature, so analysis
//! followed by synthesis reproduces any band-limited field.

use std::f64::consts::PI;

use super::gauss::gauss_legendre;

#[derive(Debug, Clone)]
pub(crate) struct HarmonicBasis {
    n_lat: usize,
    n_lon: usize,
    l_max: usize,
    pub(crate) cos_theta: Vec<f64>,
    pub(crate) sin_theta: Vec<f64>,
    ring_weights: Vec<f64>,
    /// `cos(m φ_j)` at `m * n_lon + j`.
    cos_mphi: Vec<f64>,
    sin_mphi: Vec<f64>,
    /// Normalized associated Legendre functions; block `m` holds
    /// `n_lat × (l_max + 1 − m)` entries, ring-major.
    legendre: Vec<Vec<f64>>,
    legendre_dtheta: Vec<Vec<f64>>,
    /// Start of the coefficient block for order `m`.
    offsets: Vec<usize>,
    degrees: Vec<usize>,
}

impl HarmonicBasis {
    pub(crate) fn new(n_lat: usize) -> Self {
        let n_lon = 2 * n_lat;
        let l_max = n_lat - 1;
        let (x, w) = gauss_legendre(n_lat);
        let sin_theta: Vec<f64> = x.iter().map(|c| (1.0 - c * c).sqrt()).collect();

        let mut cos_mphi = vec![0.0; (l_max + 1) * n_lon];
        let mut sin_mphi = vec![0.0; (l_max + 1) * n_lon];
        for m in 0..=l_max {
            for j in 0..n_lon {
                let phi = 2.0 * PI * j as f64 / n_lon as f64;
                let (s, c) = (m as f64 * phi).sin_cos();
                cos_mphi[m * n_lon + j] = c;
                sin_mphi[m * n_lon + j] = s;
            }
        }

        let mut legendre = Vec::with_capacity(l_max + 1);
        let mut legendre_dtheta = Vec::with_capacity(l_max + 1);
        for m in 0..=l_max {
            let len = l_max + 1 - m;
            legendre.push(vec![0.0; n_lat * len]);
            legendre_dtheta.push(vec![0.0; n_lat * len]);
        }
        for i in 0..n_lat {
            let (c, s) = (x[i], sin_theta[i]);
            let mut p_mm = (0.5f64).sqrt();
            for m in 0..=l_max {
                if m > 0 {
                    let mf = m as f64;
                    p_mm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
                }
                let len = l_max + 1 - m;
                let block = &mut legendre[m][i * len..(i + 1) * len];
                block[0] = p_mm;
                if len > 1 {
                    block[1] = (2.0 * m as f64 + 3.0).sqrt() * c * p_mm;
                }
                for l in (m + 2)..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                    block[l - m] = a * (c * block[l - m - 1] - b * block[l - m - 2]);
                }
                let dblock = &mut legendre_dtheta[m][i * len..(i + 1) * len];
                for l in m..=l_max {
                    let lf = l as f64;
                    let mf = m as f64;
                    let prev = if l > m {
                        ((2.0 * lf + 1.0) * (lf * lf - mf * mf) / (2.0 * lf - 1.0)).sqrt()
                            * block[l - m - 1]
                    } else {
                        0.0
                    };
                    dblock[l - m] = (lf * c * block[l - m] - prev) / s;
                }
            }
        }

        let mut offsets = Vec::with_capacity(l_max + 1);
        let mut degrees = Vec::with_capacity((l_max + 1) * (l_max + 1));
        for m in 0..=l_max {
            offsets.push(degrees.len());
            let copies = if m == 0 { 1 } else { 2 };
            for _ in 0..copies {
                degrees.extend(m..=l_max);
            }
        }
        let dphi = 2.0 * PI / n_lon as f64;
        Self {
            n_lat,
            n_lon,
            l_max,
            cos_theta: x,
            sin_theta,
            ring_weights: w.iter().map(|w| w * dphi).collect(),
            cos_mphi,
            sin_mphi,
            legendre,
            legendre_dtheta,
            offsets,
            degrees,
        }
    }

    pub(crate) fn n_lon(&self) -> usize {
        self.n_lon
    }

    pub(crate) fn ring_weight(&self, i: usize) -> f64 {
        self.ring_weights[i]
    }

    pub(crate) fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    fn norm(m: usize) -> f64 {
        if m == 0 {
            1.0 / (2.0 * PI).sqrt()
        } else {
            1.0 / PI.sqrt()
        }
    }

    pub(crate) fn analyze(&self, u: &[f64]) -> Vec<f64> {
        let (n_lat, n_lon, l_max) = (self.n_lat, self.n_lon, self.l_max);
        let mut coefs = vec![0.0; self.degrees.len()];
        let mut ring_c = vec![0.0; l_max + 1];
        let mut ring_s = vec![0.0; l_max + 1];
        for i in 0..n_lat {
            let ring = &u[i * n_lon..(i + 1) * n_lon];
            for m in 0..=l_max {
                let cm = &self.cos_mphi[m * n_lon..(m + 1) * n_lon];
                let sm = &self.sin_mphi[m * n_lon..(m + 1) * n_lon];
                let mut acc_c = 0.0;
                let mut acc_s = 0.0;
                for j in 0..n_lon {
                    acc_c += ring[j] * cm[j];
                    acc_s += ring[j] * sm[j];
                }
                ring_c[m] = acc_c * self.ring_weights[i] * Self::norm(m);
                ring_s[m] = acc_s * self.ring_weights[i] * Self::norm(m);
            }
            for m in 0..=l_max {
                let len = l_max + 1 - m;
                let p = &self.legendre[m][i * len..(i + 1) * len];
                let off = self.offsets[m];
                for (k, pk) in p.iter().enumerate() {
                    coefs[off + k] += pk * ring_c[m];
                }
                if m > 0 {
                    for (k, pk) in p.iter().enumerate() {
                        coefs[off + len + k] += pk * ring_s[m];
                    }
                }
            }
        }
        coefs
    }

    pub(crate) fn synthesize(&self, coefs: &[f64]) -> Vec<f64> {
        let (n_lat, n_lon, l_max) = (self.n_lat, self.n_lon, self.l_max);
        let mut out = vec![0.0; n_lat * n_lon];
        for i in 0..n_lat {
            let ring = &mut out[i * n_lon..(i + 1) * n_lon];
            for m in 0..=l_max {
                let len = l_max + 1 - m;
                let p = &self.legendre[m][i * len..(i + 1) * len];
                let off = self.offsets[m];
                let fa: f64 = p.iter().zip(&coefs[off..off + len]).map(|(p, a)| p * a).sum();
                let fb: f64 = if m > 0 {
                    p.iter().zip(&coefs[off + len..off + 2 * len]).map(|(p, b)| p * b).sum()
                } else {
                    0.0
                };
                let (fa, fb) = (fa * Self::norm(m), fb * Self::norm(m));
                let cm = &self.cos_mphi[m * n_lon..(m + 1) * n_lon];
                let sm = &self.sin_mphi[m * n_lon..(m + 1) * n_lon];
                for j in 0..n_lon {
                    ring[j] += fa * cm[j] + fb * sm[j];
                }
            }
        }
        out
    }

    /// Value of the band-limited field at an arbitrary direction.
    pub(crate) fn evaluate_at(&self, coefs: &[f64], p: &[f64; 3]) -> f64 {
        let l_max = self.l_max;
        let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let c = (p[2] / r).clamp(-1.0, 1.0);
        let s = (1.0 - c * c).sqrt();
        let phi = p[1].atan2(p[0]);
        let mut p_mm = (0.5f64).sqrt();
        let mut block = vec![0.0; l_max + 1];
        let mut total = 0.0;
        for m in 0..=l_max {
            let mf = m as f64;
            if m > 0 {
                p_mm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
            }
            let len = l_max + 1 - m;
            block[0] = p_mm;
            if len > 1 {
                block[1] = (2.0 * mf + 3.0).sqrt() * c * p_mm;
            }
            for l in (m + 2)..=l_max {
                let lf = l as f64;
                let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
                block[l - m] = a * (c * block[l - m - 1] - b * block[l - m - 2]);
            }
            let off = self.offsets[m];
            let fa: f64 = block[..len].iter().zip(&coefs[off..off + len]).map(|(p, a)| p * a).sum();
            let fb: f64 = if m > 0 {
                block[..len].iter().zip(&coefs[off + len..off + 2 * len]).map(|(p, b)| p * b).sum()
            } else {
                0.0
            };
            let (sm, cm) = (mf * phi).sin_cos();
            total += Self::norm(m) * (fa * cm + fb * sm);
        }
        total
    }

    /// Synthesizes the Laplacian, gradient and covariant Hessian (orthonormal
    /// frame `∂θ, ∂φ / sin θ`) of the band-limited field with `coefs`.
    pub(crate) fn synthesize_jet(&self, coefs: &[f64]) -> (Vec<f64>, Vec<[f64; 2]>, Vec<[f64; 3]>) {
        let (n_lat, n_lon, l_max) = (self.n_lat, self.n_lon, self.l_max);
        let count = n_lat * n_lon;
        let mut lap = vec![0.0; count];
        let mut grad = vec![[0.0; 2]; count];
        let mut hess = vec![[0.0; 3]; count];
        let mut u_t = vec![0.0; n_lon];
        let mut u_p = vec![0.0; n_lon];
        let mut u_tp = vec![0.0; n_lon];
        let mut u_pp = vec![0.0; n_lon];
        let mut u_lap = vec![0.0; n_lon];
        for i in 0..n_lat {
            for buf in [&mut u_t, &mut u_p, &mut u_tp, &mut u_pp, &mut u_lap] {
                buf.iter_mut().for_each(|v| *v = 0.0);
            }
            for m in 0..=l_max {
                let len = l_max + 1 - m;
                let p = &self.legendre[m][i * len..(i + 1) * len];
                let dp = &self.legendre_dtheta[m][i * len..(i + 1) * len];
                let off = self.offsets[m];
                let a = &coefs[off..off + len];
                let (mut fa, mut da, mut la) = (0.0, 0.0, 0.0);
                for k in 0..len {
                    let l = (m + k) as f64;
                    fa += p[k] * a[k];
                    da += dp[k] * a[k];
                    la -= l * (l + 1.0) * p[k] * a[k];
                }
                let (mut fb, mut db, mut lb) = (0.0, 0.0, 0.0);
                if m > 0 {
                    let b = &coefs[off + len..off + 2 * len];
                    for k in 0..len {
                        let l = (m + k) as f64;
                        fb += p[k] * b[k];
                        db += dp[k] * b[k];
                        lb -= l * (l + 1.0) * p[k] * b[k];
                    }
                }
                let s = Self::norm(m);
                let mf = m as f64;
                let cm = &self.cos_mphi[m * n_lon..(m + 1) * n_lon];
                let sm = &self.sin_mphi[m * n_lon..(m + 1) * n_lon];
                for j in 0..n_lon {
                    let (c, sn) = (cm[j], sm[j]);
                    u_lap[j] += s * (la * c + lb * sn);
                    u_t[j] += s * (da * c + db * sn);
                    u_p[j] += s * mf * (fb * c - fa * sn);
                    u_tp[j] += s * mf * (db * c - da * sn);
                    u_pp[j] -= s * mf * mf * (fa * c + fb * sn);
                }
            }
            let (ct, st) = (self.cos_theta[i], self.sin_theta[i]);
            let cot = ct / st;
            for j in 0..n_lon {
                let idx = i * n_lon + j;
                lap[idx] = u_lap[j];
                grad[idx] = [u_t[j], u_p[j] / st];
                let h22 = u_pp[j] / (st * st) + cot * u_t[j];
                let h12 = (u_tp[j] - cot * u_p[j]) / st;
                hess[idx] = [u_lap[j] - h22, h12, h22];
            }
        }
        (lap, grad, hess)
    }
}
