//! Validation of the monomial closed form of the Cauchy-Green transform
//! against 2D quadrature of the defining integral
//!
//!   T g(z) = (1/pi) int_D g(zeta) / (z - zeta) dA(zeta).
//!
//! The quadrature oracle parametrizes the disc by polar coordinates
//! centered at the evaluation point, zeta = z + rho e^{i theta}; the
//! area element cancels the kernel singularity and leaves the smooth
//! integrand -g(z + rho e^{i theta}) e^{-i theta}, handled by a
//! Gauss-Legendre x trapezoid product rule.

use jpsh::{cg_transform, dbar, ComplexPoint2, DiscField};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 32-point Gauss-Legendre nodes/weights on [-1, 1] (positive half; the
/// rule is symmetric).
const GL32_NODES: [f64; 16] = [
    0.048307665687738316,
    0.144471961582796493,
    0.239287362252137075,
    0.331868602282127650,
    0.421351276130635345,
    0.506899908932229390,
    0.587715757240762329,
    0.663044266930215201,
    0.732182118740289680,
    0.794483795967942407,
    0.849367613732569970,
    0.896321155766052124,
    0.934906075937739689,
    0.964762255587506430,
    0.985611511545268335,
    0.997263861849481564,
];
const GL32_WEIGHTS: [f64; 16] = [
    0.096540088514727801,
    0.095638720079274859,
    0.093844399080804566,
    0.091173878695763885,
    0.087652093004403811,
    0.083311924226946755,
    0.078193895787070306,
    0.072345794108848506,
    0.065822222776361847,
    0.058684093478535547,
    0.050998059262376176,
    0.042835898022226681,
    0.034273862913021433,
    0.025392065309262059,
    0.016274394730905671,
    0.007018610009470097,
];

fn gauss_legendre_01() -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(32);
    for i in 0..16 {
        for sign in [-1.0, 1.0] {
            let x = 0.5 * (1.0 + sign * GL32_NODES[i]);
            out.push((x, 0.5 * GL32_WEIGHTS[i]));
        }
    }
    out
}

/// Quadrature of the Cauchy-Green integral of g(zeta) = zeta^m conj(zeta)^n
/// at an interior point z.
fn cg_quadrature(m: usize, n: usize, z: Complex64, n_theta: usize) -> Complex64 {
    let gl = gauss_legendre_01();
    let mut total = Complex64::default();
    for j in 0..n_theta {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / n_theta as f64;
        let e = Complex64::from_polar(1.0, theta);
        // distance from z to the unit circle along direction e
        let b = (z * e.conj()).re;
        let reach = -b + (b * b + 1.0 - z.norm_sqr()).sqrt();
        let mut radial = Complex64::default();
        for &(x, w) in &gl {
            let rho = reach * x;
            let zeta = z + e * rho;
            let g = zeta.powu(m as u32) * zeta.conj().powu(n as u32);
            radial += g * (w * reach);
        }
        total += -radial * e.conj() * (2.0 * std::f64::consts::PI / n_theta as f64);
    }
    total / std::f64::consts::PI
}

fn monomial_field(m: usize, n: usize, degree: usize) -> DiscField {
    let mut f = DiscField::zero(degree);
    f.set_coeff(0, m, n, Complex64::new(1.0, 0.0));
    f
}

#[test]
fn closed_form_matches_quadrature_at_random_points() {
    let degree = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cases = [
        (0, 0),
        (1, 0),
        (0, 1),
        (2, 0),
        (1, 1),
        (3, 1),
        (2, 3),
        (5, 0),
        (0, 5),
        (7, 4),
    ];
    for (m, n) in cases {
        let field = monomial_field(m, n, degree);
        let t = cg_transform(&field).unwrap();
        for _ in 0..2 {
            let z = Complex64::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
            let oracle = cg_quadrature(m, n, z, 256);
            let ours = t.eval(z).unwrap().z1;
            assert!(
                (ours - oracle).norm() < 1e-6,
                "T(z^{m} zbar^{n}) at {z}: closed {ours}, quadrature {oracle}"
            );
        }
    }
}

#[test]
fn pinned_values_at_origin() {
    // T(1)(0) = 0 and T(z)(0) = -1 = -(1/pi) area of the disc.
    let t1 = cg_transform(&monomial_field(0, 0, 8)).unwrap();
    assert!(t1.eval(Complex64::default()).unwrap().z1.norm() < 1e-15);
    let tz = cg_transform(&monomial_field(1, 0, 8)).unwrap();
    let v = tz.eval(Complex64::default()).unwrap().z1;
    assert!((v - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    // and the quadrature agrees
    let q = cg_quadrature(1, 0, Complex64::default(), 128);
    assert!((q - Complex64::new(-1.0, 0.0)).norm() < 1e-9);
}

#[test]
fn dbar_after_transform_is_identity_coefficientwise() {
    let degree = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let mut g = DiscField::zero(degree);
        // random polynomial field of total degree <= 20
        for c in 0..2 {
            for _ in 0..12 {
                let m = rng.gen_range(0..=20usize);
                let n = rng.gen_range(0..=(20 - m).min(degree - 1));
                if m + n > 20 {
                    continue;
                }
                g.set_coeff(
                    c,
                    m,
                    n,
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                );
            }
        }
        let t = cg_transform(&g).unwrap();
        let back = dbar(&t);
        for c in 0..2 {
            for m in 0..=degree {
                for n in 0..=degree {
                    let want = g.coeff(c, m, n);
                    let got = back.coeff(c, m, n);
                    // Exact coefficient map up to the single rounding of
                    // the division by (n + 1).
                    assert!(
                        (got - want).norm() <= 4e-16 * want.norm().max(1.0),
                        "coefficient ({c},{m},{n}) drifted: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn transform_is_complex_linear() {
    let degree = 12;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut g = DiscField::zero(degree);
    let mut h = DiscField::zero(degree);
    for c in 0..2 {
        for m in 0..6 {
            for n in 0..5 {
                g.set_coeff(c, m, n, Complex64::new(rng.gen(), rng.gen()));
                h.set_coeff(c, m, n, Complex64::new(rng.gen(), rng.gen()));
            }
        }
    }
    let a = Complex64::new(0.3, -1.2);
    let lhs = cg_transform(&g.axpy(a, &h)).unwrap();
    let rhs = cg_transform(&g).unwrap().axpy(a, &cg_transform(&h).unwrap());
    for c in 0..2 {
        for m in 0..=degree {
            for n in 0..=degree {
                assert!((lhs.coeff(c, m, n) - rhs.coeff(c, m, n)).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn center_preserved_under_transform_composition() {
    // eval(T g, 0) stays finite and matches the coefficient (0,0) slot.
    let mut g = DiscField::zero(8);
    g.set_coeff(0, 2, 1, Complex64::new(0.5, 0.5));
    let t = cg_transform(&g).unwrap();
    let v = t.eval(Complex64::default()).unwrap();
    assert_eq!(v, ComplexPoint2::new(t.coeff(0, 0, 0), t.coeff(1, 0, 0)));
}
