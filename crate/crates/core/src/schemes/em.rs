use std::time::Instant;

use super::{check_inputs, ensure_finite, mat_vec_acc, SchemeKind, Trajectory};
use crate::error::{invalid, Result};
use crate::mesh::GradedMesh;
use crate::noise::Increments;
use crate::problem::SveProblem;

/// Lower-triangular tables of the EM weights for one mesh: drift panel
/// integrals `∫_{t_i}^{t_{i+1}} (t_n - s)^{-α} ds` and diffusion factors
/// `(t_n - t_i)^{-β}` (absent when `β = 0`). Row `n` holds `i = 0..n`.
#[derive(Debug, Clone)]
pub struct EmWeights {
    mesh: GradedMesh,
    alpha: f64,
    beta: f64,
    rows: usize,
    drift: Vec<f64>,
    diffusion: Option<Vec<f64>>,
}

#[inline]
fn row_start(n: usize) -> usize {
    n * (n - 1) / 2
}

impl EmWeights {
    pub fn new(mesh: &GradedMesh, alpha: f64, beta: f64) -> Result<Self> {
        Self::truncated(mesh, alpha, beta, mesh.len())
    }

    /// Rows `1..=last` only, for solves that stop at step `last`.
    pub(crate) fn truncated(mesh: &GradedMesh, alpha: f64, beta: f64, last: usize) -> Result<Self> {
        if last > mesh.len() {
            return Err(crate::SveError::IndexOutOfRange(format!(
                "last row {last} beyond {} steps",
                mesh.len()
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid(format!("beta must lie in [0,1/2), got {beta}")));
        }
        let n = last;
        let total = row_start(n + 1);
        let mut drift = Vec::with_capacity(total);
        let mut diffusion = (beta != 0.0).then(|| Vec::with_capacity(total));
        for row in 1..=n {
            for i in 0..row {
                drift.push(mesh.drift_weight_unchecked(row, i, alpha));
            }
            if let Some(d) = diffusion.as_mut() {
                for i in 0..row {
                    d.push(mesh.diffusion_coeff_unchecked(row, i, beta));
                }
            }
        }
        Ok(Self {
            mesh: mesh.clone(),
            alpha,
            beta,
            rows: n,
            drift,
            diffusion,
        })
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }

    #[inline]
    pub(crate) fn drift_row(&self, n: usize) -> &[f64] {
        &self.drift[row_start(n)..row_start(n) + n]
    }

    #[inline]
    pub(crate) fn diffusion_row(&self, n: usize) -> Option<&[f64]> {
        self.diffusion
            .as_ref()
            .map(|d| &d[row_start(n)..row_start(n) + n])
    }

    pub(crate) fn check_rows(&self, last: usize) -> Result<()> {
        if last > self.rows {
            return Err(crate::SveError::IndexOutOfRange(format!(
                "weights hold {} rows, step {last} requested",
                self.rows
            )));
        }
        Ok(())
    }

    pub(crate) fn check_problem(&self, problem: &SveProblem) -> Result<()> {
        if self.alpha != problem.alpha() || self.beta != problem.beta() {
            return Err(invalid(format!(
                "weights built for (alpha, beta) = ({}, {}), problem has ({}, {})",
                self.alpha,
                self.beta,
                problem.alpha(),
                problem.beta()
            )));
        }
        Ok(())
    }
}

/// Euler–Maruyama on a graded mesh:
///
/// ```text
/// X_n = X_0 + Σ_{i<n} ∫_{t_i}^{t_{i+1}} (t_n-s)^{-α} ds f(X_i)
///           + Σ_{i<n} (t_n-t_i)^{-β} g(X_i) ΔW_{i+1}
/// ```
///
/// Cost is quadratic in the number of steps.
pub fn em_solve(
    problem: &SveProblem,
    mesh: &GradedMesh,
    increments: &Increments,
) -> Result<Trajectory> {
    let start = Instant::now();
    let weights = EmWeights::new(mesh, problem.alpha(), problem.beta())?;
    let mut traj = em_solve_with(&weights, problem, increments)?;
    traj.wall_time = start.elapsed();
    Ok(traj)
}

/// [`em_solve`] with precomputed weights (shared across Monte Carlo paths).
pub fn em_solve_with(
    weights: &EmWeights,
    problem: &SveProblem,
    increments: &Increments,
) -> Result<Trajectory> {
    let start = Instant::now();
    let states = em_states(weights, problem, increments, weights.mesh.len())?;
    Ok(Trajectory::new(
        weights.mesh.clone(),
        SchemeKind::Em,
        problem.state_dim(),
        states,
        start.elapsed(),
    ))
}

/// States `X_0 ..= X_last` (the scheme is causal, so later steps are skipped).
pub(crate) fn em_states(
    weights: &EmWeights,
    problem: &SveProblem,
    increments: &Increments,
    last: usize,
) -> Result<Vec<f64>> {
    weights.check_problem(problem)?;
    check_inputs(problem, &weights.mesh, increments)?;
    weights.check_rows(last)?;
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let coeffs = problem.coefficients();
    let x0 = problem.initial_state(increments.seed())?;
    ensure_finite(&x0, 0)?;

    let mut states = Vec::with_capacity((last + 1) * d);
    states.extend_from_slice(&x0);
    // f(X_i) and g(X_i) ΔW_{i+1}, filled as X_i becomes known.
    let mut f_hist = vec![0.0; last * d];
    let mut g_hist = vec![0.0; last * d];
    let mut g_buf = vec![0.0; d * m];
    // Running diffusion sum when β = 0 (all factors are 1).
    let mut noise_sum = vec![0.0; d];
    let mut x = vec![0.0; d];

    for n in 1..=last {
        let prev = &states[(n - 1) * d..n * d];
        coeffs.drift(prev, &mut f_hist[(n - 1) * d..n * d]);
        coeffs.diffusion(prev, &mut g_buf);
        let gdw = &mut g_hist[(n - 1) * d..n * d];
        gdw.iter_mut().for_each(|v| *v = 0.0);
        mat_vec_acc(&g_buf, increments.row(n - 1), gdw);

        let w = weights.drift_row(n);
        let c = weights.diffusion_row(n);
        if d == 1 {
            let drift: f64 = dot(w, &f_hist[..n]);
            let noise = match c {
                Some(c) => dot(c, &g_hist[..n]),
                None => {
                    noise_sum[0] += g_hist[n - 1];
                    noise_sum[0]
                }
            };
            x[0] = x0[0] + (drift + noise);
        } else {
            let mut drift = vec![0.0; d];
            for (i, wi) in w.iter().enumerate() {
                for k in 0..d {
                    drift[k] += wi * f_hist[i * d + k];
                }
            }
            let noise = match c {
                Some(c) => {
                    let mut acc = vec![0.0; d];
                    for (i, ci) in c.iter().enumerate() {
                        for k in 0..d {
                            acc[k] += ci * g_hist[i * d + k];
                        }
                    }
                    acc
                }
                None => {
                    for k in 0..d {
                        noise_sum[k] += g_hist[(n - 1) * d + k];
                    }
                    noise_sum.clone()
                }
            };
            for k in 0..d {
                x[k] = x0[k] + (drift[k] + noise[k]);
            }
        }
        ensure_finite(&x, n)?;
        states.extend_from_slice(&x);
    }
    Ok(states)
}

/// Left-to-right dot product (fixed order, so results are reproducible).
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_path;

    #[test]
    fn zero_coefficients_keep_initial_state() {
        let p = SveProblem::scalar_affine(0.7, 0.2, 1.0, 1.5, 0.0, 0.0, 0.0, 0.0).unwrap();
        let mesh = GradedMesh::new(1.0, 32, 2.0).unwrap();
        let path = sample_path(&mesh, 1, 4).unwrap();
        let t = em_solve(&p, &mesh, path.increments()).unwrap();
        assert_eq!(t.len(), 33);
        assert!(t.states().iter().all(|v| *v == 1.5));
    }

    #[test]
    fn constant_drift_telescopes() {
        let (alpha, c) = (0.6, 0.3);
        let p = SveProblem::scalar_affine(alpha, 0.1, 2.0, 1.0, 0.0, c, 0.0, 0.0).unwrap();
        let mesh = GradedMesh::new(2.0, 50, 1.7).unwrap();
        let path = sample_path(&mesh, 1, 4).unwrap();
        let t = em_solve(&p, &mesh, path.increments()).unwrap();
        for n in 0..=50 {
            let exact = 1.0 + c * mesh.t(n).powf(1.0 - alpha) / (1.0 - alpha);
            assert!((t.state(n)[0] - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = SveProblem::sine_cosine(0.5, 0.1).unwrap();
        let mesh = GradedMesh::new(1.0, 8, 1.0).unwrap();
        let path = sample_path(&mesh, 2, 4).unwrap();
        assert!(em_solve(&p, &mesh, path.increments()).is_err());
        let other = GradedMesh::new(1.0, 16, 1.0).unwrap();
        let path = sample_path(&other, 1, 4).unwrap();
        assert!(em_solve(&p, &mesh, path.increments()).is_err());
    }

    #[test]
    fn blow_up_is_reported_with_step() {
        let p = SveProblem::scalar_affine(0.5, 0.0, 1.0, 1.0, 1e200, 0.0, 0.0, 0.0).unwrap();
        let mesh = GradedMesh::new(1.0, 8, 1.0).unwrap();
        let path = sample_path(&mesh, 1, 4).unwrap();
        let err = em_solve(&p, &mesh, path.increments()).unwrap_err();
        assert!(matches!(err, crate::SveError::NonFinite { step } if step >= 1));
    }
}
