use gausshardy::gauss_geometry::{admissible_radius, maximal_ball_1d, GaussBall};
use gausshardy::hardy_atoms::*;
use proptest::prelude::*;

#[test]
fn global_indicator_has_unit_local_norm() {
    for y in [4.0, 8.0, 16.0] {
        let f = SampledFunction::normalized_indicator(&maximal_ball_1d(y));
        let b = h1glob_norm_bound(&f, 100_000).unwrap();
        assert!(b <= 1.01, "y = {y}: {b}");
    }
}

#[test]
fn duality_bound_grows_fourfold() {
    let bound = |y: f64| {
        let b = maximal_ball_1d(y);
        h1_lower_bound_duality(
            &SampledFunction::normalized_indicator(&b),
            &BmoDictionary::standard(y, b.radius()),
        )
        .bound
    };
    let (a, b, c) = (bound(4.0), bound(8.0), bound(16.0));
    assert!(b / a >= 3.0 && c / b >= 3.0, "{a} {b} {c}");
}

#[test]
fn square_has_bounded_oscillation() {
    let rep = bmo_mean_oscillation(
        &|x: f64| x * x,
        &admissible_ball_grid(50.0, 0.5, &[1.0, 0.5, 0.25, 0.125]),
    );
    assert!(rep.sup_oscillation <= 6.0);
    assert!((rep.l1_norm - 0.5).abs() < 1e-10);
}

#[test]
fn exceptional_atom_is_valid() {
    assert!(validate_atom(&Atom::exceptional()).valid);
    assert!(validate_atom(&Atom::global_indicator(5.0)).size_ok);
    assert!(validate_atom(&Atom::global_indicator(5.0)).valid);
}

proptest! {
    #[test]
    fn haar_atoms_are_valid(c in -20.0f64..20.0, f in 0.05f64..1.0) {
        let ball = GaussBall::new_1d(c, f * admissible_radius(c.abs())).unwrap();
        let v = validate_atom(&Atom::standard_haar(&ball).unwrap());
        prop_assert!(v.valid, "{v:?}");
        prop_assert!((v.size_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn greedy_decomposition_reconstructs(y in 1.5f64..12.0) {
        let f = SampledFunction::normalized_indicator(&maximal_ball_1d(y));
        let d = h1_upper_bound_greedy(&f, AtomicSpace::H1, 100_000).unwrap();
        prop_assert!(d.residual <= RESIDUAL_TOL);
        prop_assert!(d.total >= 1.0 - 1e-9);
    }
}
