//! Geometry of the convex hypersurface encoded by a support function.
//!
//! For a support function `u` on S^n the hypersurface is parametrized by its
//! normal: `X(x) = u(x)·x + Σᵢ ∇ᵢu(x)·eᵢ(x)`, its second fundamental form in
//! the normal parametrization is `h = ∇²u + u·I`, and the eigenvalues of `h`
//! are the principal radii of curvature `1/kᵢ`.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::sphere::{FieldJet, ScalarField, SphereDomain, SymmetricTensorField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("support function must be positive: u = {value} at node {node}")]
    NonPositiveSupport { node: usize, value: f64 },
    #[error("hypersurface is not uniformly convex: min eigenvalue of h is {margin}")]
    NotConvex { margin: f64 },
}

/// A positive support function: the origin lies inside the body.
#[derive(Debug, Clone)]
pub struct SupportField(ScalarField);

impl SupportField {
    pub fn new(field: ScalarField) -> Result<Self, GeometryError> {
        if let Some((node, &value)) = field.values().iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(GeometryError::NonPositiveSupport { node, value });
        }
        Ok(Self(field))
    }

    /// Round sphere of radius `r` centred at the origin.
    pub fn sphere(domain: Arc<SphereDomain>, radius: f64) -> Result<Self, GeometryError> {
        Self::new(ScalarField::constant(domain, radius))
    }

    pub fn field(&self) -> &ScalarField {
        &self.0
    }

    pub fn into_field(self) -> ScalarField {
        self.0
    }

    pub fn domain(&self) -> &Arc<SphereDomain> {
        self.0.domain()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn dim(&self) -> usize {
        self.0.domain().dim()
    }
}

/// Node-wise embedding of the hypersurface: position `X` and outer normal.
#[derive(Debug, Clone)]
pub struct EmbeddedHypersurface {
    pub dim: usize,
    pub positions: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
}

impl EmbeddedHypersurface {
    pub fn squared_radius(&self, i: usize) -> f64 {
        let p = self.positions[i];
        p[0] * p[0] + p[1] * p[1] + p[2] * p[2]
    }
}

/// Everything derived from one jet of `u`.
#[derive(Debug, Clone)]
pub struct SurfaceGeometry {
    pub jet: FieldJet,
    pub surface: EmbeddedHypersurface,
    /// `h = ∇²u + u I`.
    pub h: SymmetricTensorField,
    /// `H = Δu + n u` (sum of principal radii).
    pub inverse_harmonic_mean: Vec<f64>,
    /// `u² + |∇u|²` per node.
    pub radial_squared: Vec<f64>,
}

impl SurfaceGeometry {
    pub fn of(u: &SupportField) -> Self {
        let domain = u.domain();
        let jet = domain
            .jet(u.field())
            .expect("support field lives on its own domain");
        Self::from_jet(domain, jet)
    }

    pub(crate) fn from_jet(domain: &SphereDomain, jet: FieldJet) -> Self {
        let n = domain.dim();
        let count = domain.node_count();
        let mut positions = Vec::with_capacity(count);
        let mut radial_squared = Vec::with_capacity(count);
        for i in 0..count {
            let x = domain.nodes()[i];
            let [e1, e2] = domain.frame(i);
            let [g1, g2] = jet.gradient.at(i);
            let u = jet.values[i];
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = u * x[k] + g1 * e1[k] + g2 * e2[k];
            }
            positions.push(p);
            radial_squared.push(u * u + jet.gradient.norm_squared(i));
        }
        let h = jet.hessian.shifted(&jet.values);
        let inverse_harmonic_mean = jet
            .laplacian
            .iter()
            .zip(&jet.values)
            .map(|(l, u)| l + n as f64 * u)
            .collect();
        Self {
            surface: EmbeddedHypersurface {
                dim: n,
                positions,
                normals: domain.nodes().to_vec(),
            },
            h,
            inverse_harmonic_mean,
            radial_squared,
            jet,
        }
    }

    pub fn convexity_margin(&self) -> f64 {
        (0..self.h.len())
            .map(|i| self.h.min_eigenvalue(i))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn radial_range(&self) -> (f64, f64) {
        let lo = self.radial_squared.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.radial_squared.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }


    /// Principal curvatures at node `i`, ascending. Requires `h > 0` there.
    pub fn curvatures_at(&self, i: usize) -> Vec<f64> {
        let mut k: Vec<f64> = self.h.eigenvalues(i).iter().map(|r| 1.0 / r).collect();
        k.sort_by(f64::total_cmp);
        k
    }
}

pub fn embed(u: &SupportField) -> EmbeddedHypersurface {
    SurfaceGeometry::of(u).surface
}

pub fn second_fundamental_form(u: &SupportField) -> SymmetricTensorField {
    SurfaceGeometry::of(u).h
}

/// `H = Δu + n u`, the sum of the principal radii of curvature.
pub fn inverse_harmonic_mean(u: &SupportField) -> ScalarField {
    let geom = SurfaceGeometry::of(u);
    u.field().with_values(geom.inverse_harmonic_mean)
}

/// Per-node principal curvatures `kᵢ = 1/λᵢ(h)`, ascending.
pub fn principal_curvatures(u: &SupportField) -> Result<Vec<Vec<f64>>, GeometryError> {
    let geom = SurfaceGeometry::of(u);
    let margin = geom.convexity_margin();
    if margin <= 0.0 {
        return Err(GeometryError::NotConvex { margin });
    }
    Ok((0..geom.h.len()).map(|i| geom.curvatures_at(i)).collect())
}

/// Minimum over nodes of the smallest eigenvalue of `h`.
pub fn convexity_margin(u: &SupportField) -> f64 {
    SurfaceGeometry::of(u).convexity_margin()
}

/// `(min, max)` of `|X|² = u² + |∇u|²` over the nodes.
pub fn radial_range(u: &SupportField) -> (f64, f64) {
    SurfaceGeometry::of(u).radial_range()
}

/// Measurements at one extremum of `|X|`, located off-grid on the interpolant.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExtremalSide {
    /// Grid node the search started from.
    pub node: usize,
    /// Unit normal at the refined extremum.
    pub point: [f64; 3],
    /// `|X|` at the refined extremum.
    pub radius: f64,
    pub gradient_norm: f64,
    /// Smallest curvature at the farthest point, largest at the nearest.
    pub curvature: f64,
    /// `tol·radius − |∇u|`; nonnegative when the position is radial enough.
    pub radial_slack: f64,
    /// Signed distance to the curvature bound (nonnegative when satisfied).
    pub curvature_slack: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ExtremalReport {
    pub tol: f64,
    pub farthest: ExtremalSide,
    pub nearest: ExtremalSide,
    pub pass: bool,
}

/// Checks the extremal-point property at the farthest and nearest points of
/// the hypersurface: the position is radial there (`|∇u| ≈ 0`) and the
/// curvatures are at least `1/R` at the farthest point and at most `1/r` at
/// the nearest one, each within `tol`.
///
/// The extrema of `|X|` coincide with those of `u`. They are seeded at the
/// grid extrema and refined by Newton iteration on the spectral interpolant.
pub fn extremal_point_check(u: &SupportField, tol: f64) -> Result<ExtremalReport, GeometryError> {
    let geom = SurfaceGeometry::of(u);
    extremal_report(u.domain(), &geom, tol)
}

pub(crate) fn extremal_report(
    domain: &SphereDomain,
    geom: &SurfaceGeometry,
    tol: f64,
) -> Result<ExtremalReport, GeometryError> {
    let margin = geom.convexity_margin();
    if margin <= 0.0 {
        return Err(GeometryError::NotConvex { margin });
    }
    let values = &geom.jet.values;
    let mut imin = 0;
    let mut imax = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[imin] {
            imin = i;
        }
        if v > values[imax] {
            imax = i;
        }
    }
    let coefs = domain.analyze(values);
    let interp = Interpolant { domain, coefs: &coefs };
    let side = |node: usize, farthest: bool| -> Result<ExtremalSide, GeometryError> {
        let seed = domain.nodes()[node];
        let jet = interp.refine(seed, farthest, domain.grid_spacing());
        let [k_lo, k_hi] = jet.principal_radii();
        if k_lo <= 0.0 {
            return Err(GeometryError::NotConvex { margin: k_lo });
        }
        let radius = jet.radius();
        let gradient_norm = jet.gradient_norm();
        let (curvature, curvature_slack) = if farthest {
            let kmin = 1.0 / k_hi;
            (kmin, kmin - (1.0 / radius - tol))
        } else {
            let kmax = 1.0 / k_lo;
            (kmax, 1.0 / radius + tol - kmax)
        };
        let radial_slack = tol * radius - gradient_norm;
        Ok(ExtremalSide {
            node,
            point: jet.p,
            radius,
            gradient_norm,
            curvature,
            radial_slack,
            curvature_slack,
            pass: radial_slack >= 0.0 && curvature_slack >= 0.0,
        })
    };
    let farthest = side(imax, true)?;
    let nearest = side(imin, false)?;
    Ok(ExtremalReport {
        tol,
        pass: farthest.pass && nearest.pass,
        farthest,
        nearest,
    })
}

/// Second-order jet of `u` at an arbitrary unit vector, in a tangent frame.
struct PointJet {
    dim: usize,
    p: [f64; 3],
    frame: [[f64; 3]; 2],
    value: f64,
    gradient: [f64; 2],
    /// `∇²u + u I` in the tangent frame.
    h: [[f64; 2]; 2],
}

impl PointJet {
    fn gradient_norm(&self) -> f64 {
        self.gradient[..self.dim].iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn radius(&self) -> f64 {
        (self.value * self.value + self.gradient_norm().powi(2)).sqrt()
    }

    /// Eigenvalues of `h`, ascending.
    fn principal_radii(&self) -> [f64; 2] {
        if self.dim == 1 {
            return [self.h[0][0]; 2];
        }
        let [[a, b], [_, c]] = self.h;
        let mean = 0.5 * (a + c);
        let dev = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        [mean - dev, mean + dev]
    }
}

/// Point evaluation of a field through its coefficients.
struct Interpolant<'a> {
    domain: &'a SphereDomain,
    coefs: &'a [f64],
}

impl Interpolant<'_> {
    const MAX_ITERATIONS: usize = 30;

    /// The one-homogeneous extension `|y| u(y/|y|)`. Its gradient is `X` and
    /// its tangential Hessian is `∇²u + u I`.
    fn homogeneous(&self, y: &[f64; 3]) -> f64 {
        let r = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
        r * self.domain.evaluate_at(self.coefs, y)
    }

    fn jet(&self, p: [f64; 3]) -> PointJet {
        let dim = self.domain.dim();
        let frame = tangent_frame(p, dim);
        let at = |a: &[(usize, f64)]| {
            let mut y = p;
            for &(k, s) in a {
                for j in 0..3 {
                    y[j] += s * frame[k][j];
                }
            }
            self.homogeneous(&y)
        };
        let s = 4e-3;
        let value = self.domain.evaluate_at(self.coefs, &p);
        let mut gradient = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for a in 0..dim {
            let f = |m: f64| at(&[(a, m * s)]);
            gradient[a] = (f(-2.0) - 8.0 * f(-1.0) + 8.0 * f(1.0) - f(2.0)) / (12.0 * s);
            h[a][a] = (-f(-2.0) + 16.0 * f(-1.0) - 30.0 * at(&[]) + 16.0 * f(1.0) - f(2.0)) / (12.0 * s * s);
        }
        if dim == 2 {
            let cross = |t: f64| {
                (at(&[(0, t), (1, t)]) - at(&[(0, t), (1, -t)]) - at(&[(0, -t), (1, t)])
                    + at(&[(0, -t), (1, -t)]))
                    / (4.0 * t * t)
            };
            let b = (4.0 * cross(s) - cross(2.0 * s)) / 3.0;
            h[0][1] = b;
            h[1][0] = b;
        }
        PointJet { dim, p, frame, value, gradient, h }
    }

    /// Newton iteration for `∇u = 0` from `seed`. The search ends at the
    /// first step that fails to improve both `u` and `|∇u|`.
    fn refine(&self, seed: [f64; 3], maximize: bool, spacing: f64) -> PointJet {
        let mut jet = self.jet(seed);
        for _ in 0..Self::MAX_ITERATIONS {
            let g = jet.gradient;
            if jet.gradient_norm() <= 1e-12 * (1.0 + jet.value.abs()) {
                break;
            }
            let hess = [
                [jet.h[0][0] - jet.value, jet.h[0][1]],
                [jet.h[1][0], jet.h[1][1] - jet.value],
            ];
            let delta = if jet.dim == 1 {
                if hess[0][0] == 0.0 {
                    break;
                }
                [-g[0] / hess[0][0], 0.0]
            } else {
                let det = hess[0][0] * hess[1][1] - hess[0][1] * hess[1][0];
                if det == 0.0 || !det.is_finite() {
                    break;
                }
                [
                    -(hess[1][1] * g[0] - hess[0][1] * g[1]) / det,
                    -(hess[0][0] * g[1] - hess[1][0] * g[0]) / det,
                ]
            };
            let len = (delta[0] * delta[0] + delta[1] * delta[1]).sqrt();
            let scale = if len > 2.0 * spacing { 2.0 * spacing / len } else { 1.0 };
            let mut q = jet.p;
            for k in 0..jet.dim {
                for j in 0..3 {
                    q[j] += scale * delta[k] * jet.frame[k][j];
                }
            }
            let qn = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]).sqrt();
            for v in q.iter_mut() {
                *v /= qn;
            }
            let next = self.jet(q);
            let improved = if maximize {
                next.value >= jet.value - 1e-15 * jet.value.abs()
            } else {
                next.value <= jet.value + 1e-15 * jet.value.abs()
            };
            if !improved || next.gradient_norm() >= jet.gradient_norm() {
                break;
            }
            jet = next;
        }
        jet
    }
}

/// Orthonormal tangent vectors at the unit vector `p`.
fn tangent_frame(p: [f64; 3], dim: usize) -> [[f64; 3]; 2] {
    if dim == 1 {
        return [[-p[1], p[0], 0.0], [0.0; 3]];
    }
    let k = (0..3)
        .min_by(|&a, &b| p[a].abs().total_cmp(&p[b].abs()))
        .unwrap();
    let mut a = [0.0; 3];
    a[k] = 1.0;
    let d = a[0] * p[0] + a[1] * p[1] + a[2] * p[2];
    let mut t1 = [a[0] - d * p[0], a[1] - d * p[1], a[2] - d * p[2]];
    let n1 = (t1[0] * t1[0] + t1[1] * t1[1] + t1[2] * t1[2]).sqrt();
    for v in t1.iter_mut() {
        *v /= n1;
    }
    let t2 = [
        p[1] * t1[2] - p[2] * t1[1],
        p[2] * t1[0] - p[0] * t1[2],
        p[0] * t1[1] - p[1] * t1[0],
    ];
    [t1, t2]
}

/// Summary shape measurements of a support function.
#[derive(Debug, Clone)]
pub struct ShapeDiagnostics {
    pub convexity_margin: f64,
    pub radial_min: f64,
    pub radial_max: f64,
    pub h_field: SymmetricTensorField,
    pub inverse_harmonic_mean: ScalarField,
}

pub fn shape_diagnostics(u: &SupportField) -> ShapeDiagnostics {
    let geom = SurfaceGeometry::of(u);
    let (radial_min, radial_max) = geom.radial_range();
    ShapeDiagnostics {
        convexity_margin: geom.convexity_margin(),
        radial_min,
        radial_max,
        inverse_harmonic_mean: u.field().with_values(geom.inverse_harmonic_mean.clone()),
        h_field: geom.h,
    }
}

/// Snapshot rows: node coordinates, position, `u`, `H`, smallest eigenvalue of `h`.
pub fn snapshot_rows(u: &SupportField) -> (Vec<String>, Vec<Vec<f64>>) {
    let geom = SurfaceGeometry::of(u);
    let n = u.dim();
    let mut header: Vec<String> = (1..=n + 1).map(|k| format!("x{k}")).collect();
    header.extend((1..=n + 1).map(|k| format!("X{k}")));
    header.extend(["u", "H", "min_eig_h"].map(String::from));
    let rows = (0..geom.h.len())
        .map(|i| {
            let x = geom.surface.normals[i];
            let p = geom.surface.positions[i];
            let mut row: Vec<f64> = x[..=n].to_vec();
            row.extend_from_slice(&p[..=n]);
            row.push(geom.jet.values[i]);
            row.push(geom.inverse_harmonic_mean[i]);
            row.push(geom.h.min_eigenvalue(i));
            row
        })
        .collect();
    (header, rows)
}
