use std::sync::Arc;

use harmflow::sphere::{ScalarField, SphereDomain};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Real and imaginary parts of `(x1 + i x2)^m`.
fn sectoral(x: &[f64; 3], m: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..m {
        (re, im) = (re * x[0] - im * x[1], re * x[1] + im * x[0]);
    }
    (re, im)
}

/// Legendre polynomial `P_l(t)` by the three-term recurrence.
fn legendre(l: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if l == 0 {
        return p0;
    }
    for k in 1..l {
        let k = k as f64;
        (p0, p1) = (p1, ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0));
    }
    p1
}

/// Degree-`l` harmonics built from harmonic polynomials.
fn sphere_harmonics(l: usize) -> Vec<Box<dyn Fn(&[f64; 3]) -> f64>> {
    let m = l as u32;
    let mut fs: Vec<Box<dyn Fn(&[f64; 3]) -> f64>> = vec![
        Box::new(move |x| legendre(l, x[2])),
        Box::new(move |x| sectoral(x, m).0),
    ];
    if l >= 1 {
        fs.push(Box::new(move |x| sectoral(x, m).1));
        fs.push(Box::new(move |x| x[2] * sectoral(x, m - 1).0));
    }
    if l >= 2 {
        fs.push(Box::new(move |x| x[2] * sectoral(x, m - 1).1));
    }
    fs
}

fn relative_eigen_error(d: &Arc<SphereDomain>, f: &dyn Fn(&[f64; 3]) -> f64, eigen: f64) -> f64 {
    let u = ScalarField::from_fn(d.clone(), f);
    let lu = d.laplace_beltrami(&u).unwrap();
    let scale = u.sup_norm() * eigen.abs().max(1.0);
    u.values()
        .iter()
        .zip(lu.values())
        .fold(0.0_f64, |m, (v, w)| m.max((w + eigen * v).abs()))
        / scale
}

#[test]
fn circle_eigenfunction_battery() {
    let d = SphereDomain::build(1, 32).unwrap();
    for l in 0..=8u32 {
        let eigen = (l * l) as f64;
        let c = relative_eigen_error(&d, &|x| sectoral(x, l).0, eigen);
        let s = if l == 0 { 0.0 } else { relative_eigen_error(&d, &|x| sectoral(x, l).1, eigen) };
        assert!(c < 1e-10 && s < 1e-10, "l={l}: {c} {s}");
    }
}

#[test]
fn sphere_eigenfunction_battery() {
    let d = SphereDomain::build(2, 48).unwrap();
    for l in 0..=8 {
        let eigen = (l * (l + 1)) as f64;
        for (k, f) in sphere_harmonics(l).iter().enumerate() {
            let e = relative_eigen_error(&d, f.as_ref(), eigen);
            assert!(e < 1e-6, "l={l} k={k}: {e}");
        }
    }
}

fn random_field(d: &Arc<SphereDomain>, band: usize, rng: &mut ChaCha8Rng) -> ScalarField {
    let coefs: Vec<f64> = d
        .coefficient_degrees()
        .iter()
        .map(|&l| if l <= band { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    ScalarField::from_coefficients(d.clone(), &coefs)
}

#[test]
fn hessian_trace_matches_laplacian_on_random_fields() {
    for (dim, res, band, tol) in [(1, 64, 16, 1e-8), (2, 32, 10, 1e-6)] {
        let d = SphereDomain::build(dim, res).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let u = random_field(&d, band, &mut rng);
            let lu = d.laplace_beltrami(&u).unwrap();
            let hess = d.covariant_hessian(&u).unwrap();
            let scale = lu.sup_norm();
            for i in 0..d.node_count() {
                assert!((hess.trace(i) - lu.values()[i]).abs() < tol * scale);
            }
        }
    }
}

#[test]
fn examples_from_calculus() {
    let d = SphereDomain::build(1, 32).unwrap();
    let sin = ScalarField::from_fn(d.clone(), |x| x[1]);
    let g = d.gradient(&sin).unwrap();
    for (i, x) in d.nodes().iter().enumerate() {
        assert!((g.at(i)[0] - x[0]).abs() < 1e-13);
    }

    let d = SphereDomain::build(2, 16).unwrap();
    let x3 = ScalarField::from_fn(d.clone(), |x| x[2]);
    let g = d.gradient(&x3).unwrap();
    let h = d.covariant_hessian(&x3).unwrap();
    for (i, x) in d.nodes().iter().enumerate() {
        let sin_theta = (1.0 - x[2] * x[2]).sqrt();
        assert!((g.at(i)[0] + sin_theta).abs() < 1e-12 && g.at(i)[1].abs() < 1e-12);
        let [a, b, c] = h.at(i);
        assert!((a + x[2]).abs() < 1e-12 && b.abs() < 1e-12 && (c + x[2]).abs() < 1e-12);
    }
    let w = ScalarField::from_fn(d.clone(), |x| x[0] * x[1]);
    let lw = d.laplace_beltrami(&w).unwrap();
    for (a, b) in w.values().iter().zip(lw.values()) {
        assert!((b + 6.0 * a).abs() < 1e-12);
    }
    assert!(d.integrate(&x3).unwrap().abs() < 1e-10);
    assert!((d.integrate(&ScalarField::constant(d.clone(), 1.0)).unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplacian_is_self_adjoint(seed in any::<u64>(), dim in 1usize..=2) {
        let (res, band) = if dim == 1 { (64, 20) } else { (24, 8) };
        let d = SphereDomain::build(dim, res).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_field(&d, band, &mut rng);
        let v = random_field(&d, band, &mut rng);
        let lhs = d.inner(&d.laplace_beltrami(&u).unwrap(), &v).unwrap();
        let rhs = d.inner(&u, &d.laplace_beltrami(&v).unwrap()).unwrap();
        let norms = d.inner(&u, &u).unwrap().sqrt() * d.inner(&v, &v).unwrap().sqrt();
        prop_assert!((lhs - rhs).abs() < 1e-8 * norms);
    }

    #[test]
    fn laplacian_annihilates_constants(c in -1e3f64..1e3, dim in 1usize..=2) {
        let d = SphereDomain::build(dim, 16).unwrap();
        let lu = d.laplace_beltrami(&ScalarField::constant(d.clone(), c)).unwrap();
        prop_assert!(lu.sup_norm() < 1e-11 * (1.0 + c.abs()));
    }
}
