//! Damped Newton–Krylov solver for `Δu + n u = F(X(u))`.
//!
//! Unknowns are the basis coefficients of `u`. The Jacobian acts as
//! `v ↦ (λ_l + n) v − P[∇F(X)·X(v)]`, with `∇F` from central differences and
//! `X(v) = v x + ∇v` the linear embedding map; it is inverted by restarted
//! GMRES preconditioned with its radial part.

use serde::Serialize;
use thiserror::Error;

use crate::curvature::CurvatureSpec;
use crate::geometry::{extremal_report, ExtremalReport, GeometryError, SupportField};
use crate::residual::{embedding_of_jet, Forcing, ResidualError, FD_EPSILON};
use crate::sphere::{ScalarField, SphereDomain};

pub use crate::residual::residual;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Damping {
    /// First step fraction tried.
    pub initial: f64,
    /// Factor applied on each backtrack.
    pub backtrack: f64,
    /// Smallest step fraction before giving up.
    pub min_step: f64,
}

impl Default for Damping {
    fn default() -> Self {
        Self {
            initial: 1.0,
            backtrack: 0.5,
            min_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonConfig {
    pub initial_guess: SupportField,
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub damping: Damping,
    pub fd_epsilon: f64,
    pub gmres_restart: usize,
    pub gmres_max_iterations: usize,
    pub gmres_tol: f64,
    /// Tolerance of the extremal-point check on the solution.
    pub bartnik_tol: f64,
}

impl NewtonConfig {
    pub fn new(initial_guess: SupportField) -> Self {
        Self {
            initial_guess,
            residual_tol: 1e-10,
            max_iterations: 50,
            damping: Damping::default(),
            fd_epsilon: FD_EPSILON,
            gmres_restart: 60,
            gmres_max_iterations: 600,
            gmres_tol: 1e-12,
            bartnik_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub residual: f64,
    /// Node sup-norm of the residual before each iteration and at return.
    pub residual_history: Vec<f64>,
    pub gmres_iterations: usize,
    pub convexity_margin: f64,
    pub radial_min: f64,
    pub radial_max: f64,
    pub inside_annulus: bool,
    pub extremal: Option<ExtremalReport>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StationaryError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial guess is not uniformly convex (margin {margin})")]
    GuessNotConvex { margin: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Residual(#[from] ResidualError),
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("line search failed at iteration {iteration} (residual {residual})")]
    LineSearch { iteration: usize, residual: f64 },
    #[error("solution lost convexity (margin {margin})")]
    ConvexityLost { margin: f64 },
}

impl StationaryError {
    /// Residual history or margin attached to the failure, when available.
    pub fn residual(&self) -> Option<f64> {
        match self {
            StationaryError::MaxIterations { residual, .. } | StationaryError::LineSearch { residual, .. } => {
                Some(*residual)
            }
            _ => None,
        }
    }
}

/// `∇F` at each position by central differences along the axes of R^{n+1}.
fn forcing_gradient(spec: &CurvatureSpec, positions: &[[f64; 3]], fd_epsilon: f64) -> Result<Vec<[f64; 3]>, ResidualError> {
    let n = spec.dim();
    positions
        .iter()
        .map(|x| {
            let xn = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let s = fd_epsilon * (1.0 + xn);
            let mut g = [0.0; 3];
            for k in 0..=n {
                let mut p = *x;
                let mut m = *x;
                p[k] += s;
                m[k] -= s;
                g[k] = (spec.evaluate_embedded(&p)? - spec.evaluate_embedded(&m)?) / (2.0 * s);
            }
            Ok(g)
        })
        .collect()
}

struct Linearization<'a> {
    domain: &'a SphereDomain,
    grad_f: Vec<[f64; 3]>,
    diag: Vec<f64>,
    precond: Vec<f64>,
}

impl Linearization<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let values = self.domain.synthesize(v);
        let jet = self.domain.jet_of_values(&values);
        let dirs = embedding_of_jet(self.domain, &jet);
        let df: Vec<f64> = dirs
            .iter()
            .zip(&self.grad_f)
            .map(|(d, g)| d[0] * g[0] + d[1] * g[1] + d[2] * g[2])
            .collect();
        let pdf = self.domain.analyze(&df);
        v.iter()
            .zip(&self.diag)
            .zip(&pdf)
            .map(|((v, d), p)| d * v - p)
            .collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`. Returns the
/// solution and the number of inner iterations.
fn gmres(
    lin: &Linearization<'_>,
    b: &[f64],
    restart: usize,
    max_iter: usize,
    rtol: f64,
) -> (Vec<f64>, usize) {
    let m = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; m];
    if bnorm == 0.0 {
        return (x, 0);
    }
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&lin.precond).map(|(a, p)| a / p).collect() };
    let mut total = 0;
    while total < max_iter {
        let ax = lin.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= rtol * bnorm {
            break;
        }
        let k_max = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let mut cs = vec![0.0; k_max];
        let mut sn = vec![0.0; k_max];
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..k_max {
            total += 1;
            let mut w = lin.apply(&precond(&basis[k]));
            for (j, q) in basis.iter().enumerate() {
                let hjk: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                h[j][k] = hjk;
                w.iter_mut().zip(q).for_each(|(a, b)| *a -= hjk * b);
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= rtol * bnorm || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = ((i + 1)..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut z = vec![0.0; m];
        for (yi, q) in y.iter().zip(&basis) {
            z.iter_mut().zip(q).for_each(|(a, b)| *a += yi * b);
        }
        x.iter_mut().zip(precond(&z)).for_each(|(a, b)| *a += b);
        if g[k_used].abs() <= rtol * bnorm {
            break;
        }
    }
    (x, total)
}

struct Trial {
    coefs: Vec<f64>,
    u: SupportField,
    forcing: Forcing,
    residual: f64,
}

fn evaluate(domain: &std::sync::Arc<SphereDomain>, coefs: Vec<f64>, spec: &CurvatureSpec) -> Option<Trial> {
    let values = domain.synthesize(&coefs);
    let field = ScalarField::new(domain.clone(), values).ok()?;
    let u = SupportField::new(field).ok()?;
    let forcing = Forcing::of(&u, spec).ok()?;
    let residual = forcing.sup_residual();
    Some(Trial {
        coefs,
        u,
        forcing,
        residual,
    })
}

/// Solves the stationary equation from `config.initial_guess`.
pub fn solve(config: &NewtonConfig, spec: &CurvatureSpec) -> Result<(SupportField, ConvergenceReport), StationaryError> {
    let d = config.damping;
    if !(config.residual_tol > 0.0) {
        return Err(StationaryError::InvalidConfig("residual_tol must be positive".into()));
    }
    if !(d.initial > 0.0 && d.initial <= 1.0 && d.backtrack > 0.0 && d.backtrack < 1.0) {
        return Err(StationaryError::InvalidConfig("damping fractions must lie in (0, 1]".into()));
    }
    let domain = config.initial_guess.domain().clone();
    let n = domain.dim() as f64;
    let guess = Forcing::of(&config.initial_guess, spec)?;
    let margin = guess.geometry.convexity_margin();
    if margin <= 0.0 {
        return Err(StationaryError::GuessNotConvex { margin });
    }
    let mut current = match evaluate(&domain, domain.analyze(config.initial_guess.values()), spec) {
        Some(t) if t.forcing.geometry.convexity_margin() > 0.0 => t,
        _ => return Err(StationaryError::GuessNotConvex { margin }),
    };
    let diag: Vec<f64> = domain
        .coefficient_degrees()
        .iter()
        .map(|&l| domain.eigenvalue(l) + n)
        .collect();
    let mut history = vec![current.residual];
    let mut gmres_total = 0;
    let mut iterations = 0;
    while current.residual >= config.residual_tol {
        if iterations >= config.max_iterations {
            return Err(StationaryError::MaxIterations {
                iterations,
                residual: current.residual,
            });
        }
        iterations += 1;
        let geom = &current.forcing.geometry;
        let grad_f = forcing_gradient(spec, &geom.surface.positions, config.fd_epsilon)?;
        let radial_rate = grad_f
            .iter()
            .zip(domain.nodes())
            .map(|(g, x)| g[0] * x[0] + g[1] * x[1] + g[2] * x[2])
            .sum::<f64>()
            / domain.node_count() as f64;
        let precond = diag
            .iter()
            .map(|d| {
                let p = d - radial_rate;
                if p.abs() < 1e-3 {
                    1e-3_f64.copysign(p)
                } else {
                    p
                }
            })
            .collect();
        let lin = Linearization {
            domain: &domain,
            grad_f,
            diag: diag.clone(),
            precond,
        };
        let rhs: Vec<f64> = domain.analyze(&current.forcing.g).iter().map(|v| -v).collect();
        let (delta, its) = gmres(
            &lin,
            &rhs,
            config.gmres_restart,
            config.gmres_max_iterations,
            config.gmres_tol,
        );
        gmres_total += its;
        let mut alpha = d.initial;
        let accepted = loop {
            let coefs: Vec<f64> = current.coefs.iter().zip(&delta).map(|(c, s)| c + alpha * s).collect();
            if let Some(t) = evaluate(&domain, coefs, spec) {
                let convex = t.forcing.geometry.convexity_margin() > 0.0;
                if convex && t.residual < (1.0 - 1e-4 * alpha) * current.residual {
                    break Some(t);
                }
            }
            alpha *= d.backtrack;
            if alpha < d.min_step {
                break None;
            }
        };
        match accepted {
            Some(t) => current = t,
            None => {
                return Err(StationaryError::LineSearch {
                    iteration: iterations,
                    residual: current.residual,
                })
            }
        }
        history.push(current.residual);
    }
    let geom = &current.forcing.geometry;
    let margin = geom.convexity_margin();
    if margin <= 0.0 {
        return Err(StationaryError::ConvexityLost { margin });
    }
    let (radial_min, radial_max) = geom.radial_range();
    let (r1, r2) = spec.annulus();
    let report = ConvergenceReport {
        iterations,
        residual: current.residual,
        residual_history: history,
        gmres_iterations: gmres_total,
        convexity_margin: margin,
        radial_min,
        radial_max,
        inside_annulus: radial_min >= r1 * r1 && radial_max <= r2 * r2,
        extremal: extremal_report(current.u.domain(), geom, config.bartnik_tol).ok(),
    };
    Ok((current.u, report))
}
