use nalgebra::{DMatrix, Matrix3};
use paraquat_core::algebra::{
    check_triple_algebra, span_gap, LocalBasisTriple, SplitQuaternion, TransitionMap,
};
use paraquat_core::catalog::{
    conjugated_triple, neutral_metric, r4_chart, r8_chart, rotated_triple, scaled_j1_triple,
    standard_triple,
};
use paraquat_core::structure::{classify_structure, fit_kahler_oneforms, StructureClass};
use paraquat_core::tensor::{max_abs, sample_points};
use paraquat_core::{FdConfig, Point};
use proptest::prelude::*;

fn quaternion() -> impl Strategy<Value = SplitQuaternion> {
    prop::array::uniform4(-2.0_f64..2.0).prop_map(|v| SplitQuaternion::new(v[0], v[1], v[2], v[3]))
}

fn catalog_triples() -> Vec<LocalBasisTriple> {
    let c4 = r4_chart();
    let mut q = DMatrix::<f64>::identity(4, 4);
    q[(0, 1)] = 0.3;
    q[(2, 3)] = -0.2;
    vec![
        standard_triple(&c4),
        rotated_triple(&c4, 0),
        rotated_triple(&c4, 2),
        conjugated_triple(&standard_triple(&c4), &q).unwrap(),
        standard_triple(&r8_chart()),
        rotated_triple(&r8_chart(), 0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn splitq_mul_is_associative(x in quaternion(), y in quaternion(), z in quaternion()) {
        let l = (x * y) * z;
        let r = x * (y * z);
        prop_assert!(l.max_abs_diff(&r) < 1e-12);
    }

    #[test]
    fn standard_triple_represents_the_algebra(
        x in quaternion(),
        y in quaternion(),
        coords in prop::collection::vec(-0.9_f64..0.9, 4),
    ) {
        let c = r4_chart();
        let p = Point::new(&c, coords).unwrap();
        for t in [standard_triple(&c), rotated_triple(&c, 0)] {
            let js = t.at(&p).unwrap();
            let lhs = (x * y).represent(&js);
            let rhs = x.represent(&js) * y.represent(&js);
            prop_assert!(max_abs(&(lhs - rhs)) < 1e-12);
        }
    }

    #[test]
    fn omega_fit_recovers_the_rotation_rate(coords in prop::collection::vec(-0.8_f64..0.8, 4)) {
        let c = r4_chart();
        let p = Point::new(&c, coords).unwrap();
        let fit = fit_kahler_oneforms(&neutral_metric(&c), &rotated_triple(&c, 0), &p, &FdConfig::default()).unwrap();
        let mut expected = DMatrix::<f64>::zeros(3, 4);
        expected[(2, 0)] = -1.0;
        prop_assert!(max_abs(&(fit.omega - expected)) < 1e-5);
        prop_assert!(fit.residual < 1e-5);
    }
}

#[test]
fn trace_identities_hold_for_catalog_triples() {
    for t in catalog_triples() {
        let n = t.chart().dim() as f64;
        for p in sample_points(t.chart(), 10, 7).unwrap() {
            let js = t.at(&p).unwrap();
            for a in 0..3 {
                assert!(js[a].trace().abs() < 1e-10);
                for b in 0..3 {
                    let tr = (&js[a] * &js[b]).trace();
                    let expected = match (a, b) {
                        (0, 0) | (1, 1) => n,
                        (2, 2) => -n,
                        _ => 0.0,
                    };
                    assert!(
                        (tr - expected).abs() < 1e-10,
                        "tr(J{}J{}) = {tr}",
                        a + 1,
                        b + 1
                    );
                }
            }
        }
    }
}

#[test]
fn algebra_preserving_transitions_keep_the_span_and_the_algebra() {
    let c = r4_chart();
    let rot = TransitionMap::plane_rotation("rot", |x| 0.7 * x[1] + 0.2);
    let boost = TransitionMap::constant(
        "boost",
        Matrix3::new(
            1.2_f64.cosh(),
            0.0,
            1.2_f64.sinh(),
            0.0,
            1.0,
            0.0,
            1.2_f64.sinh(),
            0.0,
            1.2_f64.cosh(),
        ),
    );
    let stretch = TransitionMap::constant(
        "stretch",
        Matrix3::new(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0),
    );
    for t in catalog_triples()
        .into_iter()
        .filter(|t| t.chart().dim() == 4)
    {
        for p in sample_points(&c, 10, 8).unwrap() {
            assert!(check_triple_algebra(&t, &p, 1e-12).unwrap().pass);
            for s in [&rot, &boost] {
                let image = t.transformed(s);
                assert!(
                    check_triple_algebra(&image, &p, 1e-10).unwrap().pass,
                    "{}",
                    s.label()
                );
                assert!(span_gap(&t, &image, &p).unwrap() < 1e-10);
            }
            let image = t.transformed(&stretch);
            assert!(!check_triple_algebra(&image, &p, 1e-10).unwrap().pass);
            assert!(span_gap(&t, &image, &p).unwrap() < 1e-10);
        }
    }
}

#[test]
fn a_triple_with_the_right_span_can_still_fail_the_algebra() {
    let c = r4_chart();
    let p = Point::new(&c, vec![0.2, -0.1, 0.4, 0.0]).unwrap();
    let scaled = scaled_j1_triple(&c);
    assert!(!check_triple_algebra(&scaled, &p, 1e-12).unwrap().pass);
    assert!(span_gap(&scaled, &standard_triple(&c), &p).unwrap() < 1e-10);
}

#[test]
fn constant_basis_change_preserves_the_pqk_verdict() {
    let c = r4_chart();
    let g = neutral_metric(&c);
    let pts = sample_points(&c, 10, 9).unwrap();
    let cfg = FdConfig::default();
    let t = rotated_triple(&c, 0);
    let s = TransitionMap::plane_rotation("rot(0.4)", |_| 0.4);
    let before = classify_structure(&g, &t, &pts, 1e-5, &cfg).unwrap();
    let after = classify_structure(&g, &t.transformed(&s), &pts, 1e-5, &cfg).unwrap();
    assert_eq!(before.class, StructureClass::Pqk);
    assert_eq!(after.class, StructureClass::Pqk);
    assert!(after.residuals.kahler_fit < 1e-5);
}
