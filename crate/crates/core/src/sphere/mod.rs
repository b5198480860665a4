//! Discretizations of S¹ and S² and their intrinsic differential operators.
//!
//! Both schemes expose the same coefficient-space view: a real orthonormal
//! basis of eigenfunctions of the Laplace–Beltrami operator, each tagged with
//! its degree `l` (eigenvalue `−l(l+n−1)`). Every operator is applied by
//! analysis, a diagonal multiply, and synthesis.

mod circle;
mod gauss;
mod harmonic;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use circle::CircleBasis;
use harmonic::HarmonicBasis;

pub use gauss::gauss_legendre;

/// Smallest accepted resolution for either scheme.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("unsupported sphere dimension {0}: only S^1 and S^2 are available")]
    UnsupportedDim(usize),
    #[error("resolution {got} is below the minimum of {min}")]
    ResolutionTooLow { got: usize, min: usize },
    #[error("resolution {0} must be even on the circle")]
    OddResolution(usize),
    #[error("field lives on S^{got_dim} at resolution {got_res}, operator expects S^{dim} at resolution {res}")]
    Mismatch {
        dim: usize,
        res: usize,
        got_dim: usize,
        got_res: usize,
    },
    #[error("expected {expected} node values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("implicit operator is singular for degree {degree} (dt = {dt})")]
    SingularShift { degree: usize, dt: f64 },
}

#[derive(Debug, Clone)]
enum Basis {
    Circle(CircleBasis),
    Harmonic(HarmonicBasis),
}

/// A discretized unit sphere `S^n`, `n ∈ {1, 2}`.
///
/// Nodes are unit vectors stored with three components (the third is zero on
/// the circle). Each node carries an orthonormal tangent frame: `∂θ` on the
/// circle, `(∂θ, ∂φ / sin θ)` in colatitude/longitude on S².
pub struct SphereDomain {
    dim: usize,
    resolution: usize,
    nodes: Vec<[f64; 3]>,
    frames: Vec<[[f64; 3]; 2]>,
    weights: Vec<f64>,
    spacing: f64,
    basis: Basis,
    operator_error: f64,
}

impl fmt::Debug for SphereDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereDomain")
            .field("dim", &self.dim)
            .field("resolution", &self.resolution)
            .field("node_count", &self.nodes.len())
            .finish()
    }
}

impl SphereDomain {
    /// Builds the grid for `S^dim`.
    ///
    /// On the circle `resolution` is the (even) number of equispaced nodes. On
    /// S² it is the number of Gauss–Legendre colatitude rings `N`; the grid has
    /// `2N` longitudes and resolves harmonics up to degree `N − 1`.
    pub fn build(dim: usize, resolution: usize) -> Result<Arc<Self>, DomainError> {
        if dim != 1 && dim != 2 {
            return Err(DomainError::UnsupportedDim(dim));
        }
        if resolution < MIN_RESOLUTION {
            return Err(DomainError::ResolutionTooLow {
                got: resolution,
                min: MIN_RESOLUTION,
            });
        }
        let mut domain = if dim == 1 {
            if resolution % 2 != 0 {
                return Err(DomainError::OddResolution(resolution));
            }
            Self::circle(resolution)
        } else {
            Self::sphere(resolution)
        };
        domain.operator_error = domain.measure_operator_error();
        Ok(Arc::new(domain))
    }

    fn circle(n: usize) -> Self {
        let mut nodes = Vec::with_capacity(n);
        let mut frames = Vec::with_capacity(n);
        for j in 0..n {
            let theta = 2.0 * PI * j as f64 / n as f64;
            let (s, c) = theta.sin_cos();
            nodes.push([c, s, 0.0]);
            frames.push([[-s, c, 0.0], [0.0; 3]]);
        }
        Self {
            dim: 1,
            resolution: n,
            nodes,
            frames,
            weights: vec![2.0 * PI / n as f64; n],
            spacing: 2.0 * PI / n as f64,
            basis: Basis::Circle(CircleBasis::new(n)),
            operator_error: 0.0,
        }
    }

    fn sphere(n_lat: usize) -> Self {
        let basis = HarmonicBasis::new(n_lat);
        let n_lon = basis.n_lon();
        let mut nodes = Vec::with_capacity(n_lat * n_lon);
        let mut frames = Vec::with_capacity(n_lat * n_lon);
        let mut weights = Vec::with_capacity(n_lat * n_lon);
        for i in 0..n_lat {
            let (ct, st) = (basis.cos_theta[i], basis.sin_theta[i]);
            for j in 0..n_lon {
                let phi = 2.0 * PI * j as f64 / n_lon as f64;
                let (sp, cp) = phi.sin_cos();
                nodes.push([st * cp, st * sp, ct]);
                frames.push([[ct * cp, ct * sp, -st], [-sp, cp, 0.0]]);
                weights.push(basis.ring_weight(i));
            }
        }
        Self {
            dim: 2,
            resolution: n_lat,
            nodes,
            frames,
            weights,
            spacing: PI / n_lat as f64,
            basis: Basis::Harmonic(basis),
            operator_error: 0.0,
        }
    }

    /// Relative sup error of Δ on a battery of low-degree eigenfunctions,
    /// measured once at construction. Monitor tolerance bands scale with it.
    fn measure_operator_error(&self) -> f64 {
        let top = self.max_degree().min(8);
        let mut worst: f64 = 0.0;
        for l in 1..=top {
            let values: Vec<f64> = match self.dim {
                1 => self
                    .nodes
                    .iter()
                    .map(|x| (l as f64 * x[1].atan2(x[0]) + 0.3).cos())
                    .collect(),
                _ => {
                    let axis = normalize([0.3, -0.5, 0.81]);
                    self.nodes.iter().map(|x| legendre_p(l, dot3(&axis, x))).collect()
                }
            };
            let coefs = self.analyze(&values);
            let lap = self.synthesize(&self.scale_by_eigenvalue(&coefs));
            let eig = -((l * (l + self.dim - 1)) as f64);
            let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs())) * eig.abs();
            for (lv, v) in lap.iter().zip(&values) {
                worst = worst.max((lv - eig * v).abs() / scale);
            }
        }
        worst.max(f64::EPSILON)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// Orthonormal tangent frame at node `i` (only the first vector is used on S¹).
    pub fn frame(&self, i: usize) -> &[[f64; 3]; 2] {
        &self.frames[i]
    }

    pub fn quadrature_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest angular gap between neighbouring nodes.
    pub fn grid_spacing(&self) -> f64 {
        self.spacing
    }

    /// Largest degree resolved by the basis.
    pub fn max_degree(&self) -> usize {
        match &self.basis {
            Basis::Circle(_) => self.resolution / 2,
            Basis::Harmonic(_) => self.resolution - 1,
        }
    }

    /// Relative sup error of Δ on eigenfunctions of degree ≤ 8.
    pub fn operator_error(&self) -> f64 {
        self.operator_error
    }

    /// Surface measure of the unit sphere, `2π` or `4π`.
    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            2.0 * PI
        } else {
            4.0 * PI
        }
    }

    // ---- coefficient space -------------------------------------------------

    pub fn coefficient_count(&self) -> usize {
        self.coefficient_degrees().len()
    }

    /// Degree `l` of every basis function, in coefficient order.
    pub fn coefficient_degrees(&self) -> &[usize] {
        match &self.basis {
            Basis::Circle(b) => b.degrees(),
            Basis::Harmonic(b) => b.degrees(),
        }
    }

    /// Laplace–Beltrami eigenvalue `−l(l+n−1)` of a degree-`l` function.
    pub fn eigenvalue(&self, degree: usize) -> f64 {
        -((degree * (degree + self.dim - 1)) as f64)
    }

    /// Projects node values onto the basis (exact for band-limited fields).
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Circle(b) => b.analyze(values),
            Basis::Harmonic(b) => b.analyze(values),
        }
    }

    pub fn synthesize(&self, coefs: &[f64]) -> Vec<f64> {
        match &self.basis {
            Basis::Circle(b) => b.synthesize(coefs),
            Basis::Harmonic(b) => b.synthesize(coefs),
        }
    }

    fn scale_by_eigenvalue(&self, coefs: &[f64]) -> Vec<f64> {
        coefs
            .iter()
            .zip(self.coefficient_degrees())
            .map(|(c, &l)| c * self.eigenvalue(l))
            .collect()
    }

    /// Solves `(I − dt(Δ + shift)) v = rhs` in coefficient space; the result is
    /// band-limited.
    pub fn solve_shifted(&self, rhs: &[f64], dt: f64, shift: f64) -> Result<Vec<f64>, DomainError> {
        let mut coefs = self.analyze(rhs);
        for (c, &l) in coefs.iter_mut().zip(self.coefficient_degrees()) {
            let denom = 1.0 - dt * (self.eigenvalue(l) + shift);
            if denom.abs() < 1e-14 {
                return Err(DomainError::SingularShift { degree: l, dt });
            }
            *c /= denom;
        }
        Ok(self.synthesize(&coefs))
    }

    /// Evaluates the band-limited field with `coefs` in the direction of `point`.
    pub fn evaluate_at(&self, coefs: &[f64], point: &[f64; 3]) -> f64 {
        match &self.basis {
            Basis::Circle(b) => b.evaluate_at(coefs, point),
            Basis::Harmonic(b) => b.evaluate_at(coefs, point),
        }
    }

    /// Energy per degree `l = 0..=max_degree` of the projected field.
    pub fn degree_spectrum(&self, values: &[f64]) -> Vec<f64> {
        let mut spectrum = vec![0.0; self.max_degree() + 1];
        for (c, &l) in self.analyze(values).iter().zip(self.coefficient_degrees()) {
            spectrum[l] += c * c;
        }
        spectrum
    }

    // ---- field operators ---------------------------------------------------

    fn check(&self, field: &ScalarField) -> Result<(), DomainError> {
        let other = field.domain();
        if other.dim != self.dim || other.resolution != self.resolution {
            return Err(DomainError::Mismatch {
                dim: self.dim,
                res: self.resolution,
                got_dim: other.dim,
                got_res: other.resolution,
            });
        }
        Ok(())
    }

    /// Value, gradient, covariant Hessian and Laplacian in one pass.
    pub fn jet(&self, field: &ScalarField) -> Result<FieldJet, DomainError> {
        self.check(field)?;
        Ok(self.jet_of_values(field.values()))
    }

    pub(crate) fn jet_of_values(&self, values: &[f64]) -> FieldJet {
        let coefs = self.analyze(values);
        let (laplacian, gradient, hessian) = match &self.basis {
            Basis::Circle(b) => {
                let d1 = b.synthesize_derivative(&coefs);
                let lap = b.synthesize(&self.scale_by_eigenvalue(&coefs));
                let grad = d1.iter().map(|&g| [g, 0.0]).collect();
                let hess = lap.iter().map(|&h| [h, 0.0, 0.0]).collect();
                (lap, grad, hess)
            }
            Basis::Harmonic(b) => b.synthesize_jet(&coefs),
        };
        FieldJet {
            values: values.to_vec(),
            gradient: TangentField {
                dim: self.dim,
                components: gradient,
            },
            hessian: SymmetricTensorField {
                dim: self.dim,
                entries: hessian,
            },
            laplacian,
        }
    }

    pub fn laplace_beltrami(&self, field: &ScalarField) -> Result<ScalarField, DomainError> {
        self.check(field)?;
        let coefs = self.analyze(field.values());
        Ok(field.with_values(self.synthesize(&self.scale_by_eigenvalue(&coefs))))
    }

    pub fn gradient(&self, field: &ScalarField) -> Result<TangentField, DomainError> {
        Ok(self.jet(field)?.gradient)
    }

    pub fn covariant_hessian(&self, field: &ScalarField) -> Result<SymmetricTensorField, DomainError> {
        Ok(self.jet(field)?.hessian)
    }

    /// Quadrature `Σ wᵢ fᵢ`.
    pub fn integrate(&self, field: &ScalarField) -> Result<f64, DomainError> {
        self.check(field)?;
        Ok(self.integrate_values(field.values()))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Quadrature inner product `⟨a, b⟩`.
    pub fn inner(&self, a: &ScalarField, b: &ScalarField) -> Result<f64, DomainError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self
            .weights
            .iter()
            .zip(a.values().iter().zip(b.values()))
            .map(|(w, (x, y))| w * x * y)
            .sum())
    }
}

/// Real values at the nodes of a [`SphereDomain`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<SphereDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<SphereDomain>, values: Vec<f64>) -> Result<Self, DomainError> {
        if values.len() != domain.node_count() {
            return Err(DomainError::Length {
                expected: domain.node_count(),
                got: values.len(),
            });
        }
        if let Some((node, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(DomainError::NonFinite { node, value });
        }
        Ok(Self { domain, values })
    }

    pub fn constant(domain: Arc<SphereDomain>, value: f64) -> Self {
        let values = vec![value; domain.node_count()];
        Self { domain, values }
    }

    /// Samples `f` at every node (given as a point of R³).
    pub fn from_fn(domain: Arc<SphereDomain>, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = domain.nodes().iter().map(f).collect();
        Self { domain, values }
    }

    /// Band-limited field from basis coefficients.
    pub fn from_coefficients(domain: Arc<SphereDomain>, coefs: &[f64]) -> Self {
        let values = domain.synthesize(coefs);
        Self { domain, values }
    }

    pub fn domain(&self) -> &Arc<SphereDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            domain: self.domain.clone(),
            values,
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `max |self − other|` over nodes.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }
}

/// Tangent vectors in the per-node orthonormal frame.
#[derive(Debug, Clone)]
pub struct TangentField {
    dim: usize,
    components: Vec<[f64; 2]>,
}

impl TangentField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Frame components at node `i` (the second entry is zero on S¹).
    pub fn at(&self, i: usize) -> [f64; 2] {
        self.components[i]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn norm_squared(&self, i: usize) -> f64 {
        let [a, b] = self.components[i];
        a * a + b * b
    }
}

/// Symmetric 2-tensors in the per-node orthonormal frame, stored as
/// `[t11, t12, t22]` (only `t11` is meaningful on S¹).
#[derive(Debug, Clone)]
pub struct SymmetricTensorField {
    dim: usize,
    entries: Vec<[f64; 3]>,
}

impl SymmetricTensorField {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, i: usize) -> [f64; 3] {
        self.entries[i]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn trace(&self, i: usize) -> f64 {
        let [a, _, c] = self.entries[i];
        if self.dim == 1 {
            a
        } else {
            a + c
        }
    }

    /// Eigenvalues at node `i`, ascending.
    pub fn eigenvalues(&self, i: usize) -> Vec<f64> {
        let [a, b, c] = self.entries[i];
        if self.dim == 1 {
            return vec![a];
        }
        let mean = 0.5 * (a + c);
        let radius = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        vec![mean - radius, mean + radius]
    }

    pub fn min_eigenvalue(&self, i: usize) -> f64 {
        self.eigenvalues(i)[0]
    }

    /// Adds `shift · I` at every node.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        let entries = self
            .entries
            .iter()
            .zip(shift)
            .map(|(&[a, b, c], s)| [a + s, b, if self.dim == 1 { c } else { c + s }])
            .collect();
        Self {
            dim: self.dim,
            entries,
        }
    }
}

/// Pointwise derivatives of a scalar field up to second order.
#[derive(Debug, Clone)]
pub struct FieldJet {
    pub values: Vec<f64>,
    pub gradient: TangentField,
    pub hessian: SymmetricTensorField,
    pub laplacian: Vec<f64>,
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = dot3(&v, &v).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn legendre_p(l: usize, x: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, x);
    if l == 0 {
        return 1.0;
    }
    for k in 2..=l {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    p1
}
