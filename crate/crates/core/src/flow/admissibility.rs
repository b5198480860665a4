//! Admissibility of initial data and the automatic choice of a round start.

use serde::Serialize;

use crate::curvature::{boundary_directions, CurvatureSpec};
use crate::geometry::SupportField;
use crate::residual::{Forcing, ResidualError};

use super::FlowError;

/// Tolerance on `min G` at time zero.
pub const INITIAL_G_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// Smallest eigenvalue of `h` over the nodes.
    pub convexity_margin: f64,
    pub g_min: f64,
    /// `min |X|² − R₁²`.
    pub inner_margin: f64,
    /// `R₂² − max |X|²`.
    pub outer_margin: f64,
    pub convex: bool,
    pub expanding: bool,
    pub inside_annulus: bool,
    pub pass: bool,
}

pub fn check_initial_admissibility(
    u0: &SupportField,
    spec: &CurvatureSpec,
) -> Result<AdmissibilityReport, ResidualError> {
    let forcing = Forcing::of(u0, spec)?;
    let (r1, r2) = spec.annulus();
    let (lo, hi) = forcing.geometry.radial_range();
    let convexity_margin = forcing.geometry.convexity_margin();
    let g_min = forcing.min_g();
    let inner_margin = lo - r1 * r1;
    let outer_margin = r2 * r2 - hi;
    let convex = convexity_margin > 0.0;
    let expanding = g_min >= -INITIAL_G_TOLERANCE;
    let inside_annulus = inner_margin > 0.0 && outer_margin > 0.0;
    Ok(AdmissibilityReport {
        convexity_margin,
        g_min,
        inner_margin,
        outer_margin,
        convex,
        expanding,
        inside_annulus,
        pass: convex && expanding && inside_annulus,
    })
}

/// Smallest `r` on the grid `R₁ + (R₂ − R₁)k/1000` for which `u ≡ r` is
/// admissible with every margin at least `epsilon` (radial margins in
/// radius units).
pub fn suggest_initial_radius(spec: &CurvatureSpec, epsilon: f64) -> Result<f64, FlowError> {
    let n = spec.dim();
    let (r1, r2) = spec.annulus();
    let dirs = boundary_directions(n, 512);
    const STEPS: usize = 1000;
    'scan: for k in 1..STEPS {
        let r = r1 + (r2 - r1) * k as f64 / STEPS as f64;
        if r - r1 < epsilon || r2 - r < epsilon || r < epsilon {
            continue;
        }
        for d in &dirs {
            let p = [d[0] * r, d[1] * r, d[2] * r];
            match spec.evaluate_embedded(&p) {
                Ok(f) if n as f64 * r - f >= epsilon => {}
                _ => continue 'scan,
            }
        }
        return Ok(r);
    }
    Err(FlowError::NoAdmissibleRadius { epsilon })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::SphereDomain;

    #[test]
    fn round_initial_data() {
        let d = SphereDomain::build(1, 32).unwrap();
        let spec = CurvatureSpec::new("2*r-1.5", 1, 1.0, 3.0).unwrap();
        let a = check_initial_admissibility(&SupportField::sphere(d.clone(), 1.2).unwrap(), &spec).unwrap();
        assert!(a.pass);
        assert!((a.convexity_margin - 1.2).abs() < 1e-12);
        assert!((a.g_min - 0.3).abs() < 1e-12);
        assert!((a.inner_margin - 0.44).abs() < 1e-12);
        assert!((a.outer_margin - 7.56).abs() < 1e-12);

        let d2 = SphereDomain::build(2, 16).unwrap();
        let spec2 = CurvatureSpec::new("3*r-1", 2, 0.5, 2.0).unwrap();
        let a = check_initial_admissibility(&SupportField::sphere(d2, 0.8).unwrap(), &spec2).unwrap();
        assert!(a.pass);
        assert!((a.g_min - 0.2).abs() < 1e-12);

        // Admissible although this F violates the barrier condition.
        let spec3 = CurvatureSpec::new("0.5", 1, 1.0, 3.0).unwrap();
        let a = check_initial_admissibility(&SupportField::sphere(d, 1.2).unwrap(), &spec3).unwrap();
        assert!(a.pass);
        assert!((a.g_min - 0.7).abs() < 1e-12);
    }

    #[test]
    fn failing_initial_data() {
        let d = SphereDomain::build(1, 32).unwrap();
        let spec = CurvatureSpec::new("2*r-1.5", 1, 1.0, 3.0).unwrap();
        let a = check_initial_admissibility(&SupportField::sphere(d.clone(), 1.6).unwrap(), &spec).unwrap();
        assert!(!a.expanding && !a.pass);
        let a = check_initial_admissibility(&SupportField::sphere(d, 0.9).unwrap(), &spec).unwrap();
        assert!(!a.inside_annulus && !a.pass);
    }

    #[test]
    fn suggested_radius() {
        let spec = CurvatureSpec::new("2*r-1.5", 1, 1.0, 3.0).unwrap();
        let r = suggest_initial_radius(&spec, 0.05).unwrap();
        assert!((1.05..=1.45).contains(&r), "{r}");
        assert!((r - 1.05).abs() < 1e-9);

        let spec = CurvatureSpec::new("3*r-1", 2, 0.5, 2.0).unwrap();
        let r = suggest_initial_radius(&spec, 0.05).unwrap();
        assert!(r < 1.0 && r >= 0.55 - 1e-12, "{r}");

        let spec = CurvatureSpec::new("5*r", 1, 1.0, 3.0).unwrap();
        assert!(matches!(
            suggest_initial_radius(&spec, 0.05),
            Err(FlowError::NoAdmissibleRadius { .. })
        ));
    }
}
