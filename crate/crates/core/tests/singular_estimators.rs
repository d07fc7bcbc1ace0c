use gausshardy::impow_kernel::ImpowParams;
use gausshardy::singular_estimators::*;
use proptest::prelude::*;

#[test]
fn reciprocal_mass_grows_with_y() {
    let r = i_infinity_estimate(
        &ImpowKernel::new(ImpowParams::new(1.0, 1.0).unwrap()),
        &[4.0, 8.0, 16.0],
        &TailWindow::default(),
    )
    .unwrap();
    assert_eq!(r.verdict, Verdict::Growing);
}

#[test]
fn constant_kernel_criteria() {
    let tail = TailWindow::default();
    let h = hormander_estimate(
        &ConstantKernel { value: 1.0 },
        &BallGrid::design(),
        &tail,
        1,
    )
    .unwrap();
    assert!(h.supremum.abs() < 1e-12);
    assert_eq!(h.verdict, Verdict::Plateau);
}

#[test]
fn divergence_preconditions() {
    let p = ImpowParams::new(1.0, 1.0).unwrap();
    assert!(divergence_scan(&p, &[4.0], &TailWindow::default()).is_err());
    assert!(divergence_scan(&p, &[1.0, 4.0], &TailWindow::default()).is_err());
}

#[test]
fn doubled_grid_refines() {
    let g = BallGrid::design();
    assert!(g.doubled().balls().len() > g.balls().len());
}

proptest! {
    #[test]
    fn linear_fit_recovers_lines(a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let xs = [1.0, 2.0, 3.5, 7.0];
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let (s, i, r2) = linear_fit(&xs, &ys);
        prop_assert!((s - a).abs() < 1e-10 && (i - b).abs() < 1e-10);
        prop_assert!(r2 > 1.0 - 1e-9);
    }

    #[test]
    fn constant_scans_are_plateaus(v in 0.1f64..10.0, n in 2usize..8) {
        prop_assert_eq!(trend_verdict(&vec![v; n]), Verdict::Plateau);
    }

    #[test]
    fn geometric_growth_is_growing(v in 0.1f64..10.0, g in 1.2f64..3.0, n in 2usize..6) {
        let vals: Vec<f64> = (0..n).map(|k| v * g.powi(k as i32)).collect();
        prop_assert_eq!(trend_verdict(&vals), Verdict::Growing);
    }

    #[test]
    fn tay_identity_for_constants(c in -5.0f64..5.0, y in 2.0f64..10.0) {
        let r = tay_identity_residual(&ConstantKernel { value: c }, y, &[y - 3.0, y + 3.0]).unwrap();
        prop_assert!(r <= 1e-12);
    }
}
