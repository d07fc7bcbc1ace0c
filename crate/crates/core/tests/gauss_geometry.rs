use gausshardy::gauss_geometry::*;
use proptest::prelude::*;

#[test]
fn doubling_maximum_on_maximal_balls() {
    let centers: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
    let scan = doubling_ratio_scan(&centers, &RadiusGrid::FractionOfMaximal(vec![1.0])).unwrap();
    assert!(
        (scan.max_ratio - 7.37317).abs() < 1e-5,
        "{}",
        scan.max_ratio
    );
}

#[test]
fn shell_family_has_positive_floor() {
    let fam = shell_family();
    assert_eq!(fam.len(), 60);
    let floor = fam
        .iter()
        .map(|s| boundary_shell_ratio(s).unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(floor >= 1.8, "{floor}");
}

#[test]
fn non_admissible_doubling_grid_is_rejected() {
    assert!(doubling_ratio_scan(&[4.0], &RadiusGrid::Absolute(vec![0.5])).is_err());
    assert!(doubling_ratio_scan(&[], &RadiusGrid::Absolute(vec![0.1])).is_err());
}

#[test]
fn shell_kappa_range() {
    let base = vec![Interval::new(1.0, 2.0).unwrap()];
    assert!(ShellSpec::new(base.clone(), 0.2).is_err());
    assert!(ShellSpec::new(base, 0.1).is_ok());
}

proptest! {
    #[test]
    fn maximal_ball_is_admissible(y in -60.0f64..60.0) {
        let b = maximal_ball_1d(y);
        prop_assert!(b.is_admissible());
        prop_assert!((b.radius() - admissible_radius(y.abs())).abs() < 1e-15);
    }

    #[test]
    fn ball_measure_grows_with_radius(c in -20.0f64..20.0, f in 0.05f64..0.9) {
        let r = f * admissible_radius(c.abs());
        let b = GaussBall::new_1d(c, r).unwrap();
        let m = ball_measure(&b);
        prop_assert!(m > 0.0);
        prop_assert!(ball_measure(&b.scaled(2.0)) >= m);
    }

    #[test]
    fn gauss_measure_is_additive(a in -5.0f64..5.0, w1 in 0.01f64..2.0, w2 in 0.01f64..2.0) {
        let i1 = Interval::new(a, a + w1).unwrap();
        let i2 = Interval::new(a + w1, a + w1 + w2).unwrap();
        let joined = Interval::new(a, a + w1 + w2).unwrap();
        let sum = gauss_measure(&GaussSet::Intervals(vec![i1])).unwrap() + gauss_measure(&GaussSet::Intervals(vec![i2])).unwrap();
        let whole = gauss_measure(&GaussSet::Intervals(vec![joined])).unwrap();
        prop_assert!((sum - whole).abs() <= 1e-12 * whole.max(1e-300) + 1e-300);
    }
}
