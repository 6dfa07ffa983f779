use std::time::Instant;

use super::em::{dot, EmWeights};
use super::{check_inputs, ensure_finite, mat_vec_acc, SchemeKind, Trajectory};
use crate::error::{invalid, Result, SveError};
use crate::mesh::GradedMesh;
use crate::noise::{BrownianPath, Increments};
use crate::problem::SveProblem;

/// How the stochastic integrals of the Milstein scheme are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum MilsteinMode<'a> {
    /// `β = 0`, scalar noise: the kernel-difference double sum vanishes and
    /// the local iterated integral is `½ (ΔW² - h)`.
    Exact,
    /// Left-point Riemann–Itô sums on a finer nested path, for any
    /// `β ∈ [0, 1/2)` and noise dimension. An oracle, not a fast scheme.
    Subsampled(&'a BrownianPath),
}

/// Milstein scheme on a graded mesh (no `f'` terms).
pub fn milstein_solve(
    problem: &SveProblem,
    mesh: &GradedMesh,
    increments: &Increments,
    mode: MilsteinMode<'_>,
) -> Result<Trajectory> {
    let start = Instant::now();
    let weights = EmWeights::new(mesh, problem.alpha(), 0.0)?;
    let mut traj = milstein_solve_with(&weights, problem, increments, mode)?;
    traj.wall_time = start.elapsed();
    Ok(traj)
}

/// [`milstein_solve`] with precomputed drift weights (the diffusion table of
/// `weights` is not used).
pub fn milstein_solve_with(
    weights: &EmWeights,
    problem: &SveProblem,
    increments: &Increments,
    mode: MilsteinMode<'_>,
) -> Result<Trajectory> {
    let start = Instant::now();
    let states = match mode {
        MilsteinMode::Exact => exact_states(weights, problem, increments, weights.mesh().len())?,
        MilsteinMode::Subsampled(fine) => {
            weights.check_rows(weights.mesh().len())?;
            subsampled_states(weights, problem, increments, fine)?
        }
    };
    Ok(Trajectory::new(
        weights.mesh().clone(),
        SchemeKind::Milstein,
        problem.state_dim(),
        states,
        start.elapsed(),
    ))
}

fn check_common(weights: &EmWeights, problem: &SveProblem, increments: &Increments) -> Result<()> {
    if weights.alpha() != problem.alpha() {
        return Err(invalid("drift weights built for a different alpha"));
    }
    check_inputs(problem, weights.mesh(), increments)?;
    if !problem.coefficients().has_diffusion_jacobian() {
        return Err(invalid("Milstein needs the diffusion Jacobian g'"));
    }
    Ok(())
}

pub(crate) fn exact_states(
    weights: &EmWeights,
    problem: &SveProblem,
    increments: &Increments,
    last: usize,
) -> Result<Vec<f64>> {
    check_common(weights, problem, increments)?;
    weights.check_rows(last)?;
    if problem.beta() != 0.0 {
        return Err(invalid("exact Milstein mode requires beta = 0"));
    }
    if problem.noise_dim() != 1 {
        return Err(invalid(
            "exact Milstein mode requires scalar noise (no Lévy areas)",
        ));
    }
    let mesh = weights.mesh();
    let d = problem.state_dim();
    let coeffs = problem.coefficients();
    let x0 = problem.initial_state(increments.seed())?;
    ensure_finite(&x0, 0)?;

    let mut states = Vec::with_capacity((last + 1) * d);
    states.extend_from_slice(&x0);
    let mut f_hist = vec![0.0; last * d];
    let mut g = vec![0.0; d];
    let mut jac = vec![0.0; d * d];
    let mut noise_sum = vec![0.0; d];
    let mut drift = vec![0.0; d];

    for n in 1..=last {
        let y = &states[(n - 1) * d..n * d];
        coeffs.drift(y, &mut f_hist[(n - 1) * d..n * d]);
        coeffs.diffusion(y, &mut g);
        coeffs.diffusion_jacobian(y, &mut jac);
        let dw = increments.row(n - 1)[0];
        let iterated = 0.5 * (dw * dw - mesh.h(n));
        for j in 0..d {
            let gprime_g: f64 = (0..d).map(|l| jac[j * d + l] * g[l]).sum();
            noise_sum[j] += g[j] * dw + gprime_g * iterated;
        }
        let w = weights.drift_row(n);
        if d == 1 {
            drift[0] = dot(w, &f_hist[..n]);
        } else {
            drift.iter_mut().for_each(|v| *v = 0.0);
            for (i, wi) in w.iter().enumerate() {
                for k in 0..d {
                    drift[k] += wi * f_hist[i * d + k];
                }
            }
        }
        let x: Vec<f64> = (0..d).map(|k| x0[k] + (drift[k] + noise_sum[k])).collect();
        ensure_finite(&x, n)?;
        states.extend_from_slice(&x);
    }
    Ok(states)
}

pub(crate) fn subsampled_states(
    weights: &EmWeights,
    problem: &SveProblem,
    increments: &Increments,
    fine: &BrownianPath,
) -> Result<Vec<f64>> {
    check_common(weights, problem, increments)?;
    let mesh = weights.mesh();
    if !mesh.nests_in(fine.mesh()) {
        return Err(invalid("fine path mesh does not refine the scheme mesh"));
    }
    if fine.dim() != problem.noise_dim() {
        return Err(SveError::DimensionMismatch {
            what: "fine path noise dimension",
            expected: problem.noise_dim(),
            got: fine.dim(),
        });
    }
    let n_steps = mesh.len();
    let inner = fine.mesh().len() / n_steps;
    let fine_t = fine.mesh().points();
    let db = fine.increments();
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let beta = problem.beta();
    let coeffs = problem.coefficients();
    let x0 = problem.initial_state(increments.seed())?;
    ensure_finite(&x0, 0)?;

    let kernel = |x: f64| if beta == 0.0 { 1.0 } else { x.powf(-beta) };

    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(&x0);
    let mut f_hist = vec![0.0; n_steps * d];
    // g(Y_i) ΔB_p and the full per-fine-step increment u_p.
    let mut g_db = vec![0.0; n_steps * inner * d];
    let mut u = vec![0.0; n_steps * inner * d];
    let mut g = vec![0.0; d * m];
    let mut jac = vec![0.0; d * m * d];
    let mut v = vec![0.0; d];
    let mut jv = vec![0.0; d * m];
    let mut u_sum = vec![0.0; d];
    let mut drift = vec![0.0; d];

    for n in 1..=n_steps {
        let i = n - 1;
        let y = &states[i * d..n * d];
        coeffs.drift(y, &mut f_hist[i * d..n * d]);
        coeffs.diffusion(y, &mut g);
        coeffs.diffusion_jacobian(y, &mut jac);
        let t_i = fine_t[i * inner];

        for p in i * inner..n * inner {
            let dbp = db.row(p);
            let s_p = fine_t[p];
            let gd = &mut g_db[p * d..(p + 1) * d];
            gd.iter_mut().for_each(|x| *x = 0.0);
            mat_vec_acc(&g, dbp, gd);

            // Inner integral v_p over [0, s_p).
            v.iter_mut().for_each(|x| *x = 0.0);
            if beta != 0.0 {
                for q in 0..i * inner {
                    let u_q = fine_t[q];
                    let w = kernel(s_p - u_q) - kernel(t_i - u_q);
                    for c in 0..d {
                        v[c] += w * g_db[q * d + c];
                    }
                }
            }
            for q in i * inner..p {
                let w = kernel(s_p - fine_t[q]);
                for c in 0..d {
                    v[c] += w * g_db[q * d + c];
                }
            }

            // g'(Y_i)[v] is d×m; apply to ΔB_p.
            for jk in 0..d * m {
                jv[jk] = (0..d).map(|l| jac[jk * d + l] * v[l]).sum();
            }
            let up = &mut u[p * d..(p + 1) * d];
            up.copy_from_slice(&g_db[p * d..(p + 1) * d]);
            mat_vec_acc(&jv, dbp, up);
        }

        let t_n = mesh.t(n);
        let w = weights.drift_row(n);
        drift.iter_mut().for_each(|x| *x = 0.0);
        for (ii, wi) in w.iter().enumerate() {
            for k in 0..d {
                drift[k] += wi * f_hist[ii * d + k];
            }
        }
        let noise: Vec<f64> = if beta == 0.0 {
            for p in i * inner..n * inner {
                for c in 0..d {
                    u_sum[c] += u[p * d + c];
                }
            }
            u_sum.clone()
        } else {
            let mut acc = vec![0.0; d];
            for p in 0..n * inner {
                let w = kernel(t_n - fine_t[p]);
                for c in 0..d {
                    acc[c] += w * u[p * d + c];
                }
            }
            acc
        };
        let x: Vec<f64> = (0..d).map(|k| x0[k] + (drift[k] + noise[k])).collect();
        ensure_finite(&x, n)?;
        states.extend_from_slice(&x);
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_path;
    use crate::problem::{Affine, InitialState};
    use crate::schemes::em_solve;
    use std::sync::Arc;

    #[test]
    fn additive_noise_matches_em() {
        let p = SveProblem::scalar_affine(0.7, 0.0, 1.0, 1.0, -0.5, 0.2, 0.0, 0.8).unwrap();
        let mesh = GradedMesh::new(1.0, 64, 2.0).unwrap();
        let path = sample_path(&mesh, 1, 9).unwrap();
        let mil = milstein_solve(&p, &mesh, path.increments(), MilsteinMode::Exact).unwrap();
        let em = em_solve(&p, &mesh, path.increments()).unwrap();
        assert_eq!(mil.states(), em.states());
    }

    #[test]
    fn mode_mismatches() {
        let mesh = GradedMesh::new(1.0, 16, 1.0).unwrap();
        let path = sample_path(&mesh, 1, 9).unwrap();
        let p = SveProblem::sine_cosine(0.5, 0.1).unwrap();
        assert!(milstein_solve(&p, &mesh, path.increments(), MilsteinMode::Exact).is_err());

        let p2 = SveProblem::new(
            0.5,
            0.0,
            1.0,
            InitialState::Fixed(vec![1.0]),
            Arc::new(
                Affine::new(1, 2, vec![0.0], vec![0.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap(),
            ),
        )
        .unwrap();
        let path2 = sample_path(&mesh, 2, 9).unwrap();
        assert!(milstein_solve(&p2, &mesh, path2.increments(), MilsteinMode::Exact).is_err());

        // Fine path on a different grading does not refine the mesh.
        let other = GradedMesh::new(1.0, 64, 2.0).unwrap();
        let fine = sample_path(&other, 1, 9).unwrap();
        let p0 = SveProblem::sine_cosine(0.5, 0.0).unwrap();
        assert!(milstein_solve(
            &p0,
            &mesh,
            path.increments(),
            MilsteinMode::Subsampled(&fine)
        )
        .is_err());
    }

    #[test]
    fn subsampled_with_one_inner_step_drops_iterated_integral() {
        // With K = 1 the inner sums are empty: the scheme reduces to EM (β = 0).
        let p = SveProblem::sine_cosine(0.6, 0.0).unwrap();
        let mesh = GradedMesh::new(1.0, 32, 1.0).unwrap();
        let path = sample_path(&mesh, 1, 2).unwrap();
        let sub = milstein_solve(
            &p,
            &mesh,
            path.increments(),
            MilsteinMode::Subsampled(&path),
        )
        .unwrap();
        let em = em_solve(&p, &mesh, path.increments()).unwrap();
        for (a, b) in sub.states().iter().zip(em.states()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn subsampled_handles_positive_beta_and_vector_noise() {
        let coeffs = Affine::new(
            2,
            2,
            vec![-0.3, 0.1, 0.0, -0.2],
            vec![0.1, 0.0],
            vec![0.2, 0.0, 0.0, 0.1, 0.05, 0.0, 0.0, 0.3],
            vec![0.5, 0.1, 0.0, 0.4],
        )
        .unwrap();
        let p = SveProblem::new(
            0.6,
            0.2,
            1.0,
            InitialState::Fixed(vec![1.0, -1.0]),
            Arc::new(coeffs),
        )
        .unwrap();
        let mesh = GradedMesh::new(1.0, 8, 2.0).unwrap();
        let fine = sample_path(&GradedMesh::new(1.0, 32, 2.0).unwrap(), 2, 3).unwrap();
        let coarse = fine.coarsen(8).unwrap();
        let t = milstein_solve(&p, &mesh, &coarse, MilsteinMode::Subsampled(&fine)).unwrap();
        assert_eq!(t.len(), 9);
        assert!(t.states().iter().all(|v| v.is_finite()));
    }
}
