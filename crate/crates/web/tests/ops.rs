use roughcert_web::{decay_profile, kernel_profile, sandwich_profile};

#[test]
fn kernel_sits_above_comparator_and_loses_mass() {
    let p = kernel_profile(256, 1.0, 0.05).unwrap();
    assert_eq!(p.x.len(), p.kernel.len());
    assert!(p.mass < 1.0 && p.mass > 0.9);
    for ((x, k), c) in p.x.iter().zip(&p.kernel).zip(&p.comparator) {
        if x.abs() < 0.25 {
            assert!(k - c > -1e-8, "x={x}");
        }
    }
}

#[test]
fn sandwich_orders_the_profiles() {
    let p = sandwich_profile(64, 0.05, 1.5, 5.0).unwrap();
    assert_eq!(p.verdict, "PASS");
    for i in 0..p.x.len() {
        assert!(p.lower[i] <= p.w[i] + 1e-12 && p.w[i] <= p.upper[i] + 1e-12);
    }
}

#[test]
fn decay_sequence_is_reported() {
    let p = decay_profile(128, 0.1, 1.5, 5.0).unwrap();
    assert!(p.radii.len() >= 3);
    assert!(p.oscillations.windows(2).all(|w| w[1] <= w[0]));
    assert!(p.slope.unwrap() > 0.0);
}

#[test]
fn out_of_range_requests_are_errors() {
    assert!(kernel_profile(2, 1.0, 0.1).is_err());
    assert!(sandwich_profile(100_000, 0.1, 1.5, 5.0).is_err());
}
