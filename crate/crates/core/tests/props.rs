//! Property tests for the disc calculus and the center-fixing map.

use jpsh::structure::QMode;
use jpsh::{
    boundary_trace, cg_transform, dbar, conjugated_structure, psi_map, ComplexPoint2, DiscField,
    DiscGrid, Domain, FrameField, QTensor,
};
use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;

const DEGREE: usize = 8;

fn arb_complex(scale: f64) -> impl Strategy<Value = Complex64> {
    (-scale..scale, -scale..scale).prop_map(|(re, im)| Complex64::new(re, im))
}

fn arb_field() -> impl Strategy<Value = DiscField> {
    // Low-order bigraded coefficients, modest size.
    proptest::collection::vec(arb_complex(0.4), 12).prop_map(|cs| {
        let mut f = DiscField::zero(DEGREE);
        let slots = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)];
        for (c, chunk) in cs.chunks(6).enumerate() {
            for ((m, n), v) in slots.iter().zip(chunk.iter()) {
                f.set_coeff(c, *m, *n, *v);
            }
        }
        f
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dbar_inverts_cg_transform(g in arb_field()) {
        let t = cg_transform(&g).unwrap();
        let back = dbar(&t);
        for c in 0..2 {
            for m in 0..=DEGREE {
                for n in 0..=DEGREE {
                    prop_assert!((back.coeff(c, m, n) - g.coeff(c, m, n)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn trace_matches_pointwise_eval(u in arb_field()) {
        let tr = boundary_trace(&u, 32).unwrap();
        for j in [0usize, 5, 17, 31] {
            let th = tr.angle(j);
            let direct = u.eval(Complex64::from_polar(1.0, th)).unwrap();
            prop_assert!((tr.values[j] - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn holomorphic_fields_have_zero_dbar(coeffs in proptest::collection::vec(arb_complex(0.5), 4)) {
        let pairs: Vec<[Complex64; 2]> = coeffs.chunks(2).map(|c| [c[0], c[1]]).collect();
        let h = DiscField::holomorphic(ComplexPoint2::ORIGIN, &pairs, DEGREE);
        let d = dbar(&h);
        prop_assert_eq!(d.coeff_l1(), 0.0);
    }

    #[test]
    fn psi_fixes_centers(u in arb_field()) {
        let grid = DiscGrid::new(DEGREE, 32).unwrap();
        let s = Arc::new(
            conjugated_structure(&FrameField::bump(0.05), &Domain::unit_ball().scaled(3.0))
                .unwrap(),
        );
        let q = QTensor::new(s, QMode::Antilinear);
        let psi = psi_map(&u, &q, &grid).unwrap();
        prop_assert!((psi.center_value() - u.center_value()).norm() < 1e-12);
    }
}
