use proptest::prelude::*;
use sve_core::noise::increment_at;
use sve_core::{path_seed, sample_path, GradedMesh};

#[test]
fn increments_have_gaussian_moments() {
    // 10^5 draws: 10^3 paths of 100 steps on a graded mesh, each step
    // normalised by its variance.
    let mesh = GradedMesh::new(2.0, 100, 2.5).unwrap();
    let (mut n, mut sum, mut sum_sq, mut sum_4) = (0.0, 0.0, 0.0, 0.0);
    let mut per_step_sq = vec![0.0; 100];
    for p in 0..1000 {
        let path = sample_path(&mesh, 1, path_seed(99, p)).unwrap();
        for (i, (&dw, &h)) in path
            .increments()
            .as_slice()
            .iter()
            .zip(mesh.steps())
            .enumerate()
        {
            let z = dw / h.sqrt();
            n += 1.0;
            sum += z;
            sum_sq += z * z;
            sum_4 += z.powi(4);
            per_step_sq[i] += z * z;
        }
    }
    let mean = sum / n;
    let var = sum_sq / n - mean * mean;
    assert!(mean.abs() < 3.0 / n.sqrt(), "mean {mean}");
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
    assert!(
        (sum_4 / n - 3.0).abs() < 0.15,
        "fourth moment {}",
        sum_4 / n
    );
    // Per-step variance over 1000 samples (standard error ≈ 4.5%).
    let worst = per_step_sq
        .iter()
        .map(|s| (s / 1000.0 - 1.0).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.2, "per-step variance off by {worst}");
}

#[test]
fn coordinates_of_vector_noise_are_independent() {
    let mesh = GradedMesh::new(1.0, 50, 1.0).unwrap();
    let (mut cross, mut count) = (0.0, 0.0);
    for p in 0..2000 {
        let path = sample_path(&mesh, 2, p).unwrap();
        for i in 0..50 {
            let row = path.increments().row(i);
            cross += row[0] * row[1] / mesh.h(i + 1);
            count += 1.0;
        }
    }
    assert!((cross / count).abs() < 4.0 / count.sqrt());
}

#[test]
fn random_access_matches_the_stream() {
    let mesh = GradedMesh::new(1.0, 300, 2.0).unwrap();
    let path = sample_path(&mesh, 3, 77).unwrap();
    for step in [0, 1, 150, 299] {
        for c in 0..3 {
            assert_eq!(
                path.increments().row(step)[c],
                increment_at(&mesh, 3, 77, step, c)
            );
        }
    }
}

#[test]
fn documented_nesting_example() {
    let fine_mesh = GradedMesh::new(1.0, 4, 2.0).unwrap();
    let path = sample_path(&fine_mesh, 1, 5).unwrap();
    let coarse_mesh = path.coarse_mesh(2).unwrap();
    assert_eq!(coarse_mesh.t(1), 0.25);
    assert_eq!(coarse_mesh.t(1), fine_mesh.t(2));
    let coarse = path.coarsen(2).unwrap();
    let fine = path.increments().as_slice();
    assert_eq!(coarse.row(0)[0], fine[0] + fine[1]);
    assert_eq!(coarse.row(1)[0], fine[2] + fine[3]);
    assert!(path.coarsen(3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nesting_is_bit_exact(k1 in 0u32..4, k2 in 0u32..4, base in 1usize..20, r in 1.0f64..4.0, horizon in 0.01f64..10.0, seed: u64) {
        // N₂ | N₁ | N_fine.
        let n2 = base;
        let n1 = n2 << k2;
        let n_fine = n1 << k1;
        let mesh = GradedMesh::new(horizon, n_fine, r).unwrap();
        let path = sample_path(&mesh, 2, seed).unwrap();

        // Coarse nodes coincide with fine nodes.
        let coarse_mesh = path.coarse_mesh(n2).unwrap();
        let stride = n_fine / n2;
        for j in 0..=n2 {
            prop_assert_eq!(coarse_mesh.t(j).to_bits(), mesh.t(j * stride).to_bits());
        }
        prop_assert!(coarse_mesh.nests_in(&mesh));

        // Block sums, commutation and telescoping, all exact.
        let direct = path.coarsen(n2).unwrap();
        let via = path.coarsen(n1).unwrap().coarsen(n2).unwrap();
        prop_assert_eq!(direct.as_slice(), via.as_slice());
        for j in 0..n2 {
            for c in 0..2 {
                let mut acc = 0.0;
                for i in j * stride..(j + 1) * stride {
                    acc += path.increments().row(i)[c];
                }
                prop_assert_eq!(direct.row(j)[c].to_bits(), acc.to_bits());
            }
        }
        prop_assert_eq!(direct.total(), path.increments().total());
        let identity = path.coarsen(n_fine).unwrap();
        prop_assert_eq!(identity.as_slice(), path.increments().as_slice());

        // Same seed, same path.
        prop_assert_eq!(sample_path(&mesh, 2, seed).unwrap(), path);
    }
}
