use gausshardy::impow_kernel::*;
use gausshardy::quadrature::QuadOptions;
use proptest::prelude::*;

#[test]
fn canonical_normalization_is_resolved() {
    let p = ImpowParams::new(1.0, 1.0).unwrap();
    let rep = spectral_action_check(&p, -1.0, 2.0, 8.0).unwrap();
    assert_eq!(rep.resolved, Some(CANONICAL_NORMALIZATION));
}

#[test]
fn lemma_golden_values() {
    let opts = QuadOptions::default();
    let mut min_i = f64::INFINITY;
    let mut max_h: f64 = 0.0;
    for a in [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0] {
        for s in [0.005, 0.01, 0.05, 0.1, 0.25, 0.5] {
            let c = lemma_components(1.0, a, s, &opts).unwrap();
            min_i = min_i.min((a * s).sqrt() * c.i.value.norm());
            max_h = max_h.max(a * s.sqrt() * c.h.value.norm());
            let sum = c.j.value + c.h.value;
            assert!(
                (sum - c.i.value).norm() <= 1e-7 * c.i.value.norm().max(1e-12),
                "a={a} s={s}"
            );
        }
    }
    assert!((min_i - 0.8074).abs() < 1e-3, "{min_i}");
    assert!((max_h - 1.0012).abs() < 1e-3, "{max_h}");
}

#[test]
fn rejects_bad_parameters() {
    assert!(ImpowParams::new(0.0, 1.0).is_err());
    assert!(ImpowParams::new(1.0, 0.0).is_err());
    let p = ImpowParams::new(1.0, 1.0).unwrap();
    assert!(kernel_closed_form_1d(&p, 1.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn routes_agree(x in -3.0f64..3.0, d in 0.2f64..2.0) {
        let y = x + d;
        prop_assume!((x + y).abs() > 0.1);
        let p = ImpowParams::new(1.0, 1.0).unwrap();
        let q = kernel_quadrature(&p, x, y).unwrap().value;
        let c = kernel_closed_form_1d(&p, x, y).unwrap().value;
        prop_assert!((q - c).norm() <= 1e-6 * c.norm());
    }

    #[test]
    fn conjugation_symmetry(x in -3.0f64..3.0, d in 0.2f64..2.0, u in 0.3f64..2.0) {
        let y = x - d;
        prop_assume!((x + y).abs() > 0.1);
        let p = ImpowParams::new(u, 1.0).unwrap();
        let a = kernel_closed_form_1d(&p, x, y).unwrap().value;
        let b = kernel_closed_form_1d(&p.conjugate(), x, y).unwrap().value;
        prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm());
    }
}
