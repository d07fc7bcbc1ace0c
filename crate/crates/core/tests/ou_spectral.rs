use gausshardy::ou_spectral::*;
use gausshardy::quadrature::QuadratureGrid;
use num_complex::Complex64;
use proptest::prelude::*;

#[test]
fn hermite_eigen_equation() {
    let pts: Vec<f64> = (-8..=8).map(|k| 0.5 * k as f64).collect();
    for j in 0..=40 {
        assert!(eigen_residual(j, &pts) < 1e-12, "j = {j}");
    }
}

#[test]
fn precise_series_matches_closed_form_at_small_time() {
    for &(x, y) in &[(-3.0, 3.0), (3.0, 3.0), (1.5, -1.5), (0.0, 0.0)] {
        let s = mehler_series_eval_precise(0.2, x, y, 1e-12).unwrap();
        let c = mehler_eval(0.2, x, y).unwrap();
        assert!(
            (s.value - c).abs() <= 1e-10 * c,
            "({x}, {y}): {} vs {c}",
            s.value
        );
    }
}

#[test]
fn precise_series_rejects_bad_input() {
    assert!(mehler_series_eval_precise(1.0, 0.0, 0.0, 0.0).is_err());
    assert!(mehler_series_eval_precise(1.0, 25.0, 0.0, 1e-8).is_err());
    assert!(mehler_eval(0.0, 1.0, 1.0).is_err());
}

#[test]
fn shipped_functions_are_degree_twenty() {
    let fs = shipped_test_functions();
    assert!(!fs.is_empty());
    for (name, f) in &fs {
        assert_eq!(f.degree(), 20, "{name}");
    }
}

proptest! {
    #[test]
    fn mehler_is_symmetric(t in 0.05f64..4.0, x in -4.0f64..4.0, y in -4.0f64..4.0) {
        let a = mehler_eval(t, x, y).unwrap();
        let b = mehler_eval(t, y, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-13 * a.max(1.0));
        let asym = mehler_eval_asymmetric(t, x, y).unwrap() * (-y * y).exp();
        let sym = a * (-y * y).exp();
        prop_assert!((asym - sym).abs() <= 1e-10 * sym.max(1e-300) + 1e-300);
    }

    #[test]
    fn series_agrees_where_it_converges(t in 0.5f64..3.0, x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let s = mehler_series_eval(t, x, y, Truncation::Adaptive { tol: 1e-12 }).unwrap();
        let c = mehler_eval(t, x, y).unwrap();
        prop_assert!((s.value - c).abs() <= s.tail_bound + 1e-11 * c.max(1.0));
    }

    #[test]
    fn shifted_power_is_isometric(re in prop::collection::vec(-1.0f64..1.0, 1..25), u in -3.0f64..3.0, r in 0.1f64..5.0) {
        let f = SpectralFunction::new(re.iter().map(|&c| Complex64::new(c, 0.5 * c)).collect());
        let m = Multiplier::shifted(u, r).unwrap();
        prop_assert!((apply_multiplier(&m, &f).norm() - f.norm()).abs() <= 1e-12 * f.norm().max(1.0));
    }

    #[test]
    fn heat_kernel_is_stochastic(t in 0.1f64..3.0, x in -2.5f64..2.5) {
        let grid = QuadratureGrid::gauss_hermite(120);
        let total = grid.integrate(|v| mehler_eval(t, x, v).unwrap());
        prop_assert!((total - 1.0).abs() < 1e-8);
    }
}
