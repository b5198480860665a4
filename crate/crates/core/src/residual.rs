//! The forcing `F(X(u))` and the curvature residual `G = Δu + n u − F(X(u))`,
//! shared by the flow and the stationary solver.

use thiserror::Error;

use crate::curvature::{CurvatureSpec, EvalError};
use crate::geometry::{SupportField, SurfaceGeometry};
use crate::sphere::{FieldJet, ScalarField, SphereDomain};

/// Default relative step for finite differences of `F`.
pub const FD_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResidualError {
    #[error("curvature function is posed for n = {spec}, field lives on S^{domain}")]
    DimensionMismatch { spec: usize, domain: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Geometry of `u` together with `F(X)` and `G` at every node.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub geometry: SurfaceGeometry,
    pub forcing: Vec<f64>,
    pub g: Vec<f64>,
}

impl Forcing {
    pub fn of(u: &SupportField, spec: &CurvatureSpec) -> Result<Self, ResidualError> {
        if spec.dim() != u.dim() {
            return Err(ResidualError::DimensionMismatch {
                spec: spec.dim(),
                domain: u.dim(),
            });
        }
        let geometry = SurfaceGeometry::of(u);
        let forcing = geometry
            .surface
            .positions
            .iter()
            .map(|p| spec.evaluate_embedded(p))
            .collect::<Result<Vec<_>, _>>()?;
        let g = geometry
            .inverse_harmonic_mean
            .iter()
            .zip(&forcing)
            .map(|(h, f)| h - f)
            .collect();
        Ok(Self { geometry, forcing, g })
    }

    pub fn sup_residual(&self) -> f64 {
        self.g.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn min_g(&self) -> f64 {
        self.g.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `Δu + n u − F(X(u))` at the nodes.
pub fn residual(u: &SupportField, spec: &CurvatureSpec) -> Result<ScalarField, ResidualError> {
    let g = Forcing::of(u, spec)?.g;
    Ok(ScalarField::new(u.domain().clone(), g).expect("residual is finite"))
}

/// The linear embedding map `v ↦ v x + Σ ∇ᵢv eᵢ` applied to a jet.
pub(crate) fn embedding_of_jet(domain: &SphereDomain, jet: &FieldJet) -> Vec<[f64; 3]> {
    (0..domain.node_count())
        .map(|i| {
            let x = domain.nodes()[i];
            let [e1, e2] = domain.frame(i);
            let [g1, g2] = jet.gradient.at(i);
            let v = jet.values[i];
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = v * x[k] + g1 * e1[k] + g2 * e2[k];
            }
            p
        })
        .collect()
}

/// Central-difference approximation of `DF(x)·v`.
pub(crate) fn directional_derivative(
    spec: &CurvatureSpec,
    x: &[f64; 3],
    v: &[f64; 3],
    fd_epsilon: f64,
) -> Result<f64, EvalError> {
    let vn = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if vn == 0.0 {
        return Ok(0.0);
    }
    let xn = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let s = fd_epsilon * (1.0 + xn);
    let mut plus = *x;
    let mut minus = *x;
    for k in 0..3 {
        plus[k] += s * v[k] / vn;
        minus[k] -= s * v[k] / vn;
    }
    let fp = spec.evaluate_embedded(&plus)?;
    let fm = spec.evaluate_embedded(&minus)?;
    Ok((fp - fm) / (2.0 * s) * vn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_of_round_solutions_vanishes() {
        let d = SphereDomain::build(2, 16).unwrap();
        let spec = CurvatureSpec::new("3*r-1", 2, 0.5, 2.0).unwrap();
        let g = residual(&SupportField::sphere(d, 1.0).unwrap(), &spec).unwrap();
        assert!(g.sup_norm() < 1e-11, "{}", g.sup_norm());

        let d = SphereDomain::build(1, 32).unwrap();
        let spec = CurvatureSpec::new("2*r-1.5", 1, 1.0, 3.0).unwrap();
        let g = residual(&SupportField::sphere(d, 1.5).unwrap(), &spec).unwrap();
        assert!(g.sup_norm() < 1e-11, "{}", g.sup_norm());
    }

    #[test]
    fn constant_forcing() {
        let d = SphereDomain::build(2, 12).unwrap();
        let spec = CurvatureSpec::new("2.5", 2, 0.5, 2.0).unwrap();
        let g = residual(&SupportField::sphere(d, 1.3).unwrap(), &spec).unwrap();
        for v in g.values() {
            assert!((v - (2.0 * 1.3 - 2.5)).abs() < 1e-11);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let d = SphereDomain::build(1, 16).unwrap();
        let spec = CurvatureSpec::new("r", 2, 0.5, 2.0).unwrap();
        assert!(matches!(
            residual(&SupportField::sphere(d, 1.0).unwrap(), &spec),
            Err(ResidualError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn finite_difference_directional_derivative() {
        let spec = CurvatureSpec::new("r^2 + x1*x3", 2, 0.5, 3.0).unwrap();
        let x = [0.3, -0.7, 1.1];
        let v = [0.2, 0.5, -0.4];
        let exact = 2.0 * (x[0] * v[0] + x[1] * v[1] + x[2] * v[2]) + v[0] * x[2] + x[0] * v[2];
        let fd = directional_derivative(&spec, &x, &v, FD_EPSILON).unwrap();
        assert!((fd - exact).abs() < 1e-8, "{fd} vs {exact}");
        assert_eq!(directional_derivative(&spec, &x, &[0.0; 3], FD_EPSILON).unwrap(), 0.0);
    }
}
