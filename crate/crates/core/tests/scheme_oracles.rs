use sve_core::harness::fit_order;
use sve_core::quadrature::ln_gamma;
use sve_core::{
    em_solve, fast_em_solve, milstein_solve, path_seed, sample_path, GradedMesh, MilsteinMode,
    SveProblem,
};

/// `E_μ(z) = Σ_k z^k / Γ(μk + 1)`.
fn mittag_leffler(mu: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    for k in 0..400 {
        let k = k as f64;
        let mag = (k * z.abs().ln() - ln_gamma(mu * k + 1.0)).exp();
        let term = if z < 0.0 && (k as u64) % 2 == 1 {
            -mag
        } else {
            mag
        };
        sum += term;
        if mag < 1e-18 * sum.abs() && k > 10.0 {
            break;
        }
    }
    sum
}

#[test]
fn deterministic_linear_equation_converges_at_first_order() {
    // x(t) = 1 - ∫ (t-s)^{-1/2} x(s) ds has x(t) = E_{1/2}(-Γ(1/2) t^{1/2}).
    let alpha = 0.5;
    let lambda = -1.0;
    let problem = SveProblem::scalar_affine(alpha, 0.0, 1.0, 1.0, lambda, 0.0, 0.0, 0.0).unwrap();
    let exact = mittag_leffler(1.0 - alpha, lambda * std::f64::consts::PI.sqrt());
    let levels = [64, 128, 256, 512, 1024];
    let errors: Vec<f64> = levels
        .iter()
        .map(|&n| {
            let mesh = GradedMesh::new(1.0, n, 1.0).unwrap();
            let path = sample_path(&mesh, 1, 0).unwrap();
            let traj = em_solve(&problem, &mesh, path.increments()).unwrap();
            (traj.state(n)[0] - exact).abs()
        })
        .collect();
    let order = fit_order(&levels, &errors).unwrap();
    assert!(order >= 0.9, "order {order}, errors {errors:?}");
}

#[test]
fn fast_em_approaches_em_linearly_in_tolerance() {
    let problem = SveProblem::sine_cosine(0.9, 0.1).unwrap();
    let mesh = GradedMesh::new(1.0, 256, 2.0).unwrap();
    let eps = [1e-4, 1e-6, 1e-8];
    let mut dev = [0.0f64; 3];
    for p in 0..10 {
        let path = sample_path(&mesh, 1, path_seed(1, p)).unwrap();
        let em = em_solve(&problem, &mesh, path.increments()).unwrap();
        for (k, &e) in eps.iter().enumerate() {
            let fast = fast_em_solve(&problem, &mesh, path.increments(), e).unwrap();
            let d = em
                .states()
                .iter()
                .zip(fast.states())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            dev[k] = dev[k].max(d);
        }
    }
    for (d, e) in dev.iter().zip(&eps) {
        assert!(*d <= 100.0 * e, "deviation {d} at eps {e}");
    }
    let fitted = {
        let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = dev.iter().map(|d| d.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 3.0;
        let my = ys.iter().sum::<f64>() / 3.0;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        sxy / sxx
    };
    assert!(
        (fitted - 1.0).abs() <= 0.2,
        "slope {fitted}, deviations {dev:?}"
    );
}

#[test]
fn iterated_integral_second_moment() {
    // E[(½(ΔW² - h))²] = h²/2.
    let mesh = GradedMesh::new(1.0, 16, 2.0).unwrap();
    let paths = 20_000;
    for step in [1usize, 8, 16] {
        let h = mesh.h(step);
        let samples: Vec<f64> = (0..paths)
            .map(|p| {
                let dw = sample_path(&mesh, 1, path_seed(8, p))
                    .unwrap()
                    .increments()
                    .row(step - 1)[0];
                (0.5 * (dw * dw - h)).powi(2)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / paths as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (paths - 1) as f64;
        let se = (var / paths as f64).sqrt();
        assert!(
            (mean - 0.5 * h * h).abs() <= 3.0 * se,
            "step {step}: {mean} vs {}",
            0.5 * h * h
        );
    }
}

#[test]
fn additive_noise_milstein_is_em() {
    let problem = SveProblem::scalar_affine(0.7, 0.0, 1.0, 0.5, -1.0, 0.3, 0.0, 0.8).unwrap();
    let mesh = GradedMesh::new(1.0, 64, 2.0).unwrap();
    let path = sample_path(&mesh, 1, 12).unwrap();
    let em = em_solve(&problem, &mesh, path.increments()).unwrap();
    let mil = milstein_solve(&problem, &mesh, path.increments(), MilsteinMode::Exact).unwrap();
    assert_eq!(em.states(), mil.states());
}

#[test]
fn subsampled_milstein_converges_to_closed_form() {
    let problem = SveProblem::sine_cosine(0.6, 0.0).unwrap();
    let n = 16;
    let fine_n = n * 64;
    let fine_mesh = GradedMesh::new(1.0, fine_n, 1.5).unwrap();
    let mut dev = [0.0f64; 3];
    let paths = 200;
    for p in 0..paths {
        let fine = sample_path(&fine_mesh, 1, path_seed(4, p)).unwrap();
        let coarse = fine.coarsened(n).unwrap();
        let exact = milstein_solve(
            &problem,
            coarse.mesh(),
            coarse.increments(),
            MilsteinMode::Exact,
        )
        .unwrap();
        for (k, inner) in [4usize, 16, 64].into_iter().enumerate() {
            let sub = fine.coarsened(n * inner).unwrap();
            let approx = milstein_solve(
                &problem,
                coarse.mesh(),
                coarse.increments(),
                MilsteinMode::Subsampled(&sub),
            )
            .unwrap();
            dev[k] += (approx.state(n)[0] - exact.state(n)[0]).powi(2);
        }
    }
    assert!(dev[0] > dev[1] && dev[1] > dev[2], "{dev:?}");
}

#[test]
fn schemes_are_pathwise_deterministic() {
    let problem = SveProblem::sine_cosine(0.8, 0.2).unwrap();
    let mesh = GradedMesh::new(1.0, 100, 2.0).unwrap();
    let path = sample_path(&mesh, 1, 3).unwrap();
    let a = em_solve(&problem, &mesh, path.increments()).unwrap();
    let b = em_solve(&problem, &mesh, path.increments()).unwrap();
    assert_eq!(a.states(), b.states());
    let a = fast_em_solve(&problem, &mesh, path.increments(), 1e-6).unwrap();
    let b = fast_em_solve(&problem, &mesh, path.increments(), 1e-6).unwrap();
    assert_eq!(a.states(), b.states());
}
