//! Sampled checks of the boundary-barrier inequalities, midpoint concavity
//! and positivity of `F`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::CurvatureSpec;

/// Slack allowed in the midpoint inequality.
pub const CHORD_TOLERANCE: f64 = 1e-9;

/// Points sampled on each boundary sphere.
const BOUNDARY_SAMPLES: usize = 2048;

/// Quasi-uniform unit vectors: equispaced angles on S¹, a Fibonacci
/// lattice on S². Padded to three components.
pub fn boundary_directions(dim: usize, count: usize) -> Vec<[f64; 3]> {
    if dim == 1 {
        return (0..count)
            .map(|k| {
                let (s, c) = (2.0 * PI * k as f64 / count as f64).sin_cos();
                [c, s, 0.0]
            })
            .collect();
    }
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).sqrt();
            let (s, c) = (golden * k as f64).sin_cos();
            [rho * c, rho * s, z]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionA {
    /// Strict inequalities on both boundary spheres.
    pub strict: bool,
    /// Non-strict form: `F ≥ nR₂` outside, `F ≤ nR₁` inside.
    pub weak: bool,
    /// `min (F − nR₂)` over the outer sphere.
    pub outer_margin: f64,
    /// `min (nR₁ − F)` over the inner sphere.
    pub inner_margin: f64,
    pub outer_witness: Vec<f64>,
    pub inner_witness: Vec<f64>,
    pub samples_per_sphere: usize,
    /// Boundary points where `F` could not be evaluated.
    pub eval_failures: usize,
}

pub fn verify_condition_a(spec: &CurvatureSpec) -> ConditionA {
    let n = spec.dim();
    let (r1, r2) = spec.annulus();
    let dirs = boundary_directions(n, BOUNDARY_SAMPLES);
    let mut failures = 0;
    let mut scan = |radius: f64, margin: &dyn Fn(f64) -> f64| {
        let mut worst = f64::INFINITY;
        let mut witness = Vec::new();
        for d in &dirs {
            let p: Vec<f64> = d[..=n].iter().map(|c| c * radius).collect();
            match spec.evaluate(&p) {
                Ok(f) => {
                    let m = margin(f);
                    if m < worst {
                        worst = m;
                        witness = p;
                    }
                }
                Err(_) => {
                    failures += 1;
                    worst = f64::NEG_INFINITY;
                    witness = p;
                }
            }
        }
        (worst, witness)
    };
    let nf = n as f64;
    let (outer_margin, outer_witness) = scan(r2, &|f| f - nf * r2);
    let (inner_margin, inner_witness) = scan(r1, &|f| nf * r1 - f);
    // Equality in the non-strict form is judged up to evaluation roundoff.
    let slack = 64.0 * f64::EPSILON * nf * r2;
    ConditionA {
        strict: outer_margin > 0.0 && inner_margin > 0.0,
        weak: outer_margin >= -slack && inner_margin >= -slack,
        outer_margin,
        inner_margin,
        outer_witness,
        inner_witness,
        samples_per_sphere: BOUNDARY_SAMPLES,
        eval_failures: failures,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordWitness {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// `(F(P) + F(Q))/2 − F((P+Q)/2)`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChordReport {
    pub seed: u64,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: usize,
    pub concave: bool,
    /// Largest positive defect seen; 0 when none.
    pub worst_concavity_violation: f64,
    pub concavity_witness: Option<ChordWitness>,
    pub convex: bool,
    pub worst_convexity_violation: f64,
    pub convexity_witness: Option<ChordWitness>,
    pub eval_failures: usize,
}

fn annulus_point(rng: &mut ChaCha8Rng, n: usize, r1: f64, r2: f64) -> Vec<f64> {
    // Volume-uniform radius.
    let d = (n + 1) as i32;
    let u: f64 = rng.gen();
    let r = (r1.powi(d) + u * (r2.powi(d) - r1.powi(d))).powf(1.0 / d as f64);
    let phi = rng.gen::<f64>() * 2.0 * PI;
    if n == 1 {
        vec![r * phi.cos(), r * phi.sin()]
    } else {
        let z: f64 = rng.gen::<f64>() * 2.0 - 1.0;
        let rho = (1.0 - z * z).sqrt();
        vec![r * rho * phi.cos(), r * rho * phi.sin(), r * z]
    }
}

/// Midpoint test on `samples` random chords lying inside the annulus.
pub fn verify_concavity(spec: &CurvatureSpec, samples: usize, seed: u64) -> ChordReport {
    let n = spec.dim();
    let (r1, r2) = spec.annulus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_attempts = samples.saturating_mul(200).max(1000);
    let mut report = ChordReport {
        seed,
        requested: samples,
        accepted: 0,
        attempts: 0,
        concave: true,
        worst_concavity_violation: 0.0,
        concavity_witness: None,
        convex: true,
        worst_convexity_violation: 0.0,
        convexity_witness: None,
        eval_failures: 0,
    };
    while report.accepted < samples && report.attempts < max_attempts {
        report.attempts += 1;
        let p = annulus_point(&mut rng, n, r1, r2);
        let q = annulus_point(&mut rng, n, r1, r2);
        let inside = (1..=9).all(|k| {
            let t = k as f64 / 10.0;
            let x: Vec<f64> = p.iter().zip(&q).map(|(a, b)| a + t * (b - a)).collect();
            spec.in_annulus(&x)
        });
        if !inside {
            continue;
        }
        let mid: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let (fp, fq, fm) = match (spec.evaluate(&p), spec.evaluate(&q), spec.evaluate(&mid)) {
            (Ok(a), Ok(b), Ok(c)) => (a, b, c),
            _ => {
                report.eval_failures += 1;
                continue;
            }
        };
        report.accepted += 1;
        let defect = 0.5 * (fp + fq) - fm;
        if defect > report.worst_concavity_violation {
            report.worst_concavity_violation = defect;
            report.concavity_witness = Some(ChordWitness {
                p: p.clone(),
                q: q.clone(),
                defect,
            });
        }
        if -defect > report.worst_convexity_violation {
            report.worst_convexity_violation = -defect;
            report.convexity_witness = Some(ChordWitness { p, q, defect });
        }
    }
    report.concave = report.worst_concavity_violation <= CHORD_TOLERANCE && report.eval_failures == 0;
    report.convex = report.worst_convexity_violation <= CHORD_TOLERANCE && report.eval_failures == 0;
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub pass: bool,
    pub min_value: f64,
    pub argmin: Vec<f64>,
    pub samples: usize,
}

/// Minimum of `F` over a radial × directional grid on the closed annulus.
/// `samples` is the number of directions; 17 radial levels are used.
pub fn positivity_scan(spec: &CurvatureSpec, samples: usize) -> PositivityReport {
    const LEVELS: usize = 17;
    let n = spec.dim();
    let (r1, r2) = spec.annulus();
    let dirs = boundary_directions(n, samples.max(1));
    let mut min_value = f64::INFINITY;
    let mut argmin = Vec::new();
    for k in 0..LEVELS {
        let r = r1 + (r2 - r1) * k as f64 / (LEVELS - 1) as f64;
        for d in &dirs {
            let p: Vec<f64> = d[..=n].iter().map(|c| c * r).collect();
            let f = spec.evaluate(&p).unwrap_or(f64::NEG_INFINITY);
            if f < min_value {
                min_value = f;
                argmin = p;
            }
        }
    }
    PositivityReport {
        pass: min_value > 0.0,
        min_value,
        argmin,
        samples: LEVELS * dirs.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub condition_a: ConditionA,
    pub chords: ChordReport,
    pub positivity: PositivityReport,
    pub seed: u64,
}

pub fn check_conditions(spec: &CurvatureSpec, chord_samples: usize, seed: u64) -> ConditionReport {
    ConditionReport {
        condition_a: verify_condition_a(spec),
        chords: verify_concavity(spec, chord_samples, seed),
        positivity: positivity_scan(spec, 1024),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str, n: usize, r1: f64, r2: f64) -> CurvatureSpec {
        CurvatureSpec::new(text, n, r1, r2).unwrap()
    }

    #[test]
    fn condition_a_margins() {
        let a = verify_condition_a(&spec("2*r-1.5", 1, 1.0, 3.0));
        assert!(a.strict && a.weak);
        assert!((a.outer_margin - 1.5).abs() < 1e-12);
        assert!((a.inner_margin - 0.5).abs() < 1e-12);
        assert!(a.samples_per_sphere >= 1000);

        let a = verify_condition_a(&spec("3*r-1", 2, 0.5, 2.0));
        assert!(a.strict);
        assert!((a.outer_margin - 1.0).abs() < 1e-12);
        assert!((a.inner_margin - 0.5).abs() < 1e-12);

        let a = verify_condition_a(&spec("2.1", 2, 0.5, 2.0));
        assert!(!a.strict && !a.weak);
        assert!((a.outer_margin - (2.1 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn weak_form_accepts_equality() {
        // F = n r touches both barriers.
        let a = verify_condition_a(&spec("r", 1, 1.0, 3.0));
        assert!(!a.strict);
        assert!(a.weak);
    }

    #[test]
    fn anisotropic_condition_a_finds_worst_point() {
        let a = verify_condition_a(&spec("3*r - 1 + 0.1*x3", 2, 0.5, 2.0));
        assert!((a.outer_margin - (5.0 - 0.2 - 4.0)).abs() < 1e-3);
        assert!(a.outer_witness[2] < -1.9);
    }

    #[test]
    fn affine_is_both_concave_and_convex() {
        let r = verify_concavity(&spec("5", 1, 1.0, 3.0), 500, 7);
        assert!(r.concave && r.convex);
        assert_eq!(r.accepted, 500);
        let r = verify_concavity(&spec("2 + 0.3*x1 - 0.1*x3", 2, 1.0, 3.0), 500, 7);
        assert!(r.concave && r.convex);
    }

    #[test]
    fn convex_functions_fail_concavity() {
        let r = verify_concavity(&spec("r^2", 1, 1.0, 3.0), 500, 1);
        assert!(!r.concave && r.convex);
        let w = r.concavity_witness.unwrap();
        assert!(w.defect > CHORD_TOLERANCE);

        let r = verify_concavity(&spec("2*r-1.5", 1, 1.0, 3.0), 500, 1);
        assert!(!r.concave && r.convex);
    }

    #[test]
    fn explicit_chord_for_r_squared() {
        let f = spec("r^2", 1, 1.0, 3.0);
        let fp = f.evaluate(&[1.2, 0.0]).unwrap();
        let fq = f.evaluate(&[0.0, 1.2]).unwrap();
        let fm = f.evaluate(&[0.6, 0.6]).unwrap();
        assert!((fm - 0.72).abs() < 1e-14);
        assert!((0.5 * (fp + fq) - 1.44).abs() < 1e-14);
        assert!(fm < 0.5 * (fp + fq));
    }

    #[test]
    fn chords_stay_inside_the_annulus() {
        let f = spec("r", 2, 1.0, 1.5);
        let r = verify_concavity(&f, 200, 3);
        assert_eq!(r.accepted, 200);
        let w = r.concavity_witness.unwrap();
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            let x: Vec<f64> = w.p.iter().zip(&w.q).map(|(a, b)| a + t * (b - a)).collect();
            let rr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(rr > 0.99 && rr < 1.5);
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let f = spec("sqrt(r) + 0.2*x2", 2, 0.5, 2.0);
        assert_eq!(check_conditions(&f, 300, 42), check_conditions(&f, 300, 42));
        assert_ne!(verify_concavity(&f, 300, 42), verify_concavity(&f, 300, 43));
    }

    #[test]
    fn positivity() {
        let p = positivity_scan(&spec("2*r-1.5", 1, 1.0, 3.0), 256);
        assert!(p.pass);
        assert!((p.min_value - 0.5).abs() < 1e-12);
        let rr: f64 = p.argmin.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((rr - 1.0).abs() < 1e-12);
        let p = positivity_scan(&spec("r-2", 1, 1.0, 3.0), 256);
        assert!(!p.pass && p.min_value < 0.0);
        let p = positivity_scan(&spec("1", 2, 1.0, 3.0), 256);
        assert!(p.pass && p.min_value == 1.0);
    }

    #[test]
    fn fibonacci_directions_are_unit_and_balanced() {
        let d = boundary_directions(2, 1000);
        let mut c = [0.0; 3];
        for v in &d {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            assert!((norm - 1.0).abs() < 1e-14);
            (0..3).for_each(|k| c[k] += v[k] / 1000.0);
        }
        assert!(c.iter().all(|v| v.abs() < 1e-2));
    }
}
