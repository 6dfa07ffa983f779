use sve_core::{build_soe, verify_soe, GradedMesh, SoeApprox};

#[test]
fn certified_on_a_denser_independent_grid() {
    for gamma in [0.1, 0.5, 0.8, 0.9] {
        let approx = build_soe(gamma, 1e-4, 1.0, 1e-6).unwrap();
        let certified = verify_soe(&approx, 4096);
        let dense = verify_soe(&approx, 4 * 4096);
        assert!(dense <= 1e-6, "gamma={gamma}: {dense}");
        assert!(
            dense <= 1.1 * certified,
            "gamma={gamma}: {dense} vs {certified}"
        );
        assert!(approx.len() <= 300, "gamma={gamma}: K={}", approx.len());
        assert!(approx.rates().iter().all(|&t| t > 0.0));
        assert!(approx.weights().iter().all(|&w| w > 0.0));
        assert!(approx.rates().windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn certified_with_mesh_truncation() {
    let mesh = GradedMesh::new(1.0, 128, 2.0).unwrap();
    let approx = build_soe(0.9, mesh.h(1), 1.0, 1e-6).unwrap();
    assert!(verify_soe(&approx, 100_000) <= 1e-6);
}

#[test]
fn term_count_grows_at_most_quadratically_in_log_tolerance() {
    let eps = [1e-3, 1e-6, 1e-9, 1e-12];
    let counts: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let a = build_soe(0.5, 1e-2, 1.0, e).unwrap();
            assert!(verify_soe(&a, 16_384) <= e);
            a.len() as f64
        })
        .collect();
    // K / log(1/ε)² must not grow.
    let ratio: Vec<f64> = counts
        .iter()
        .zip(&eps)
        .map(|(k, e)| k / e.ln().powi(2))
        .collect();
    assert!(ratio.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
}

#[test]
fn degenerate_interval() {
    let a = build_soe(0.5, 1.0, 1.0, 0.5).unwrap();
    assert!(a.len() <= 8);
    assert!((a.eval(1.0) - 1.0).abs() <= 0.5);
}

#[test]
fn verifier_self_tests() {
    // A single exponential reproduced exactly.
    let one = SoeApprox::from_parts(0.5, 0.1, 1.0, 1e-6, vec![1.0], vec![1.0]).unwrap();
    assert_eq!(one.eval(0.0), 1.0);
    assert_eq!(one.verify_against(|t| (-t).exp(), 1000), 0.0);
    // Zero weights leave the kernel's maximum as the error.
    let approx = build_soe(0.7, 1e-3, 1.0, 1e-6).unwrap();
    let zero = approx.zeroed();
    assert!((verify_soe(&zero, 1000) - 1e-3f64.powf(-0.7)).abs() < 1e-9 * 1e-3f64.powf(-0.7));
    // Monotone in t.
    let mut prev = f64::INFINITY;
    for k in 0..200 {
        let v = approx.eval(1e-4 * 1.05f64.powi(k));
        assert!(v < prev);
        prev = v;
    }
}

#[test]
fn invalid_parameters() {
    assert!(build_soe(0.0, 1e-3, 1.0, 1e-6).is_err());
    assert!(build_soe(1.0, 1e-3, 1.0, 1e-6).is_err());
    assert!(build_soe(0.5, 2.0, 1.0, 1e-6).is_err());
    assert!(build_soe(0.5, 1e-3, 1.0, 0.0).is_err());
    assert!(build_soe(0.5, 1e-3, 1.0, 1.5).is_err());
}
