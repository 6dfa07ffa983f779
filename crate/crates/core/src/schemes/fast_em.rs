use std::time::Instant;

use super::{check_inputs, ensure_finite, mat_vec_acc, SchemeKind, Trajectory};
use crate::error::{invalid, Result};
use crate::mesh::GradedMesh;
use crate::noise::Increments;
use crate::problem::SveProblem;
use crate::soe::{build_soe, SoeApprox};

/// Everything the fast EM recurrences need for one mesh: the two
/// exponential expansions and the exact last-panel weights.
///
/// Decay factors are produced step by step inside the solver, so memory is
/// `O(K)` on top of the trajectory itself. With `β = 0` the diffusion history
/// kernel is the constant 1, represented as a single term with rate 0 and
/// weight 1.
#[derive(Debug, Clone)]
pub struct FastEmPlan {
    mesh: GradedMesh,
    alpha: f64,
    beta: f64,
    soe_alpha: SoeApprox,
    soe_beta: Option<SoeApprox>,
    rates_b: Vec<f64>,
    weights_b: Vec<f64>,
    // Local (last-panel) weights, index n - 1.
    local_drift: Vec<f64>,
    local_diffusion: Vec<f64>,
}

impl FastEmPlan {
    /// Build both expansions at tolerance `eps` with truncation `δ = h_1`.
    pub fn new(mesh: &GradedMesh, alpha: f64, beta: f64, eps: f64) -> Result<Self> {
        Self::with_delta(mesh, alpha, beta, eps, mesh.h(1))
    }

    pub fn with_delta(
        mesh: &GradedMesh,
        alpha: f64,
        beta: f64,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&beta) {
            return Err(invalid(format!("beta must lie in [0,1/2), got {beta}")));
        }
        let delta = delta.min(mesh.horizon());
        let soe_alpha = build_soe(alpha, delta, mesh.horizon(), eps)?;
        let soe_beta = if beta == 0.0 {
            None
        } else {
            Some(build_soe(beta, delta, mesh.horizon(), eps)?)
        };
        Self::from_soe(mesh, alpha, beta, soe_alpha, soe_beta)
    }

    /// Assemble from prebuilt expansions (`soe_beta` must be `None` iff `β = 0`).
    pub fn from_soe(
        mesh: &GradedMesh,
        alpha: f64,
        beta: f64,
        soe_alpha: SoeApprox,
        soe_beta: Option<SoeApprox>,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if soe_alpha.gamma() != alpha {
            return Err(invalid("drift expansion built for a different exponent"));
        }
        let (rates_b, weights_b) = match (&soe_beta, beta == 0.0) {
            (None, true) => (vec![0.0], vec![1.0]),
            (Some(s), false) if s.gamma() == beta => (s.rates().to_vec(), s.weights().to_vec()),
            _ => return Err(invalid("diffusion expansion does not match beta")),
        };
        let n = mesh.len();
        let local_drift = (1..=n)
            .map(|k| mesh.drift_weight_unchecked(k, k - 1, alpha))
            .collect();
        let local_diffusion = (1..=n)
            .map(|k| mesh.diffusion_coeff_unchecked(k, k - 1, beta))
            .collect();
        Ok(Self {
            mesh: mesh.clone(),
            alpha,
            beta,
            soe_alpha,
            soe_beta,
            rates_b,
            weights_b,
            local_drift,
            local_diffusion,
        })
    }

    pub fn mesh(&self) -> &GradedMesh {
        &self.mesh
    }
    pub fn soe_alpha(&self) -> &SoeApprox {
        &self.soe_alpha
    }
    pub fn soe_beta(&self) -> Option<&SoeApprox> {
        self.soe_beta.as_ref()
    }
    /// `(K_α, K_β)`; `K_β = 1` when `β = 0`.
    pub fn term_counts(&self) -> (usize, usize) {
        (self.soe_alpha.len(), self.rates_b.len())
    }
}

/// Fast EM: EM with the history parts of both convolutions replaced by
/// sum-of-exponentials recurrences. `X̃_1` is the plain EM step. Cost is
/// linear in the number of steps times the number of exponentials.
pub fn fast_em_solve(
    problem: &SveProblem,
    mesh: &GradedMesh,
    increments: &Increments,
    eps: f64,
) -> Result<Trajectory> {
    let start = Instant::now();
    let plan = FastEmPlan::new(mesh, problem.alpha(), problem.beta(), eps)?;
    let mut traj = fast_em_solve_with(&plan, problem, increments)?;
    traj.wall_time = start.elapsed();
    Ok(traj)
}

pub fn fast_em_solve_with(
    plan: &FastEmPlan,
    problem: &SveProblem,
    increments: &Increments,
) -> Result<Trajectory> {
    let start = Instant::now();
    let states = fast_em_states(plan, problem, increments)?;
    Ok(Trajectory::new(
        plan.mesh.clone(),
        SchemeKind::FastEm,
        problem.state_dim(),
        states,
        start.elapsed(),
    ))
}

pub(crate) fn fast_em_states(
    plan: &FastEmPlan,
    problem: &SveProblem,
    increments: &Increments,
) -> Result<Vec<f64>> {
    if plan.alpha != problem.alpha() || plan.beta != problem.beta() {
        return Err(invalid("fast EM plan built for different kernel exponents"));
    }
    check_inputs(problem, &plan.mesh, increments)?;
    let n_steps = plan.mesh.len();
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let coeffs = problem.coefficients();
    let x0 = problem.initial_state(increments.seed())?;
    ensure_finite(&x0, 0)?;

    let ka = plan.soe_alpha.len();
    let kb = plan.rates_b.len();
    let (ra, wa) = (plan.soe_alpha.rates(), plan.soe_alpha.weights());
    let (rb, wb) = (&plan.rates_b, &plan.weights_b);
    let mut zeta_a = vec![0.0; ka * d];
    let mut zeta_b = vec![0.0; kb * d];
    // ∫ over the previous step of e^{-τ (t_{n-1} - s)} ds, per drift term,
    // and e^{-τ h_{n-1}} per diffusion term.
    let mut width_a: Vec<f64> = ra
        .iter()
        .map(|&tau| panel_width(tau, plan.mesh.h(1)))
        .collect();
    let mut decay_b: Vec<f64> = rb
        .iter()
        .map(|&tau| (-tau * plan.mesh.h(1)).exp())
        .collect();

    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(&x0);
    let mut g_buf = vec![0.0; d * m];
    // f and g ΔW at the previous two nodes: `last` = n-1, `prev` = n-2.
    let mut f_last = vec![0.0; d];
    let mut gdw_last = vec![0.0; d];
    let mut f_prev = vec![0.0; d];
    let mut gdw_prev = vec![0.0; d];
    let mut x = vec![0.0; d];

    for n in 1..=n_steps {
        std::mem::swap(&mut f_last, &mut f_prev);
        std::mem::swap(&mut gdw_last, &mut gdw_prev);
        let y = &states[(n - 1) * d..n * d];
        coeffs.drift(y, &mut f_last);
        coeffs.diffusion(y, &mut g_buf);
        gdw_last.iter_mut().for_each(|v| *v = 0.0);
        mat_vec_acc(&g_buf, increments.row(n - 1), &mut gdw_last);

        if n >= 2 {
            // Fold the panel [t_{n-2}, t_{n-1}] into the history and age it by h_n.
            let h = plan.mesh.h(n);
            for k in 0..ka {
                let decay = (-ra[k] * h).exp();
                let panel = decay * width_a[k];
                width_a[k] = panel_width(ra[k], h);
                for c in 0..d {
                    let z = &mut zeta_a[k * d + c];
                    *z = decay * *z + panel * f_prev[c];
                }
            }
            for k in 0..kb {
                let decay = (-rb[k] * h).exp();
                let lag = decay * decay_b[k];
                decay_b[k] = decay;
                for c in 0..d {
                    let z = &mut zeta_b[k * d + c];
                    *z = decay * *z + lag * gdw_prev[c];
                }
            }
        }
        let wl = plan.local_drift[n - 1];
        let cl = plan.local_diffusion[n - 1];
        for c in 0..d {
            let mut hist_a = 0.0;
            for k in 0..ka {
                hist_a += wa[k] * zeta_a[k * d + c];
            }
            let mut hist_b = 0.0;
            for k in 0..kb {
                hist_b += wb[k] * zeta_b[k * d + c];
            }
            x[c] = x0[c] + hist_a + wl * f_last[c] + hist_b + cl * gdw_last[c];
        }
        ensure_finite(&x, n)?;
        states.extend_from_slice(&x);
    }
    Ok(states)
}

/// `(1 - e^{-τ h}) / τ`, with the `τ = 0` limit `h`.
#[inline]
fn panel_width(tau: f64, h: f64) -> f64 {
    let x = tau * h;
    if x <= 1e-8 {
        h
    } else {
        -(-x).exp_m1() / tau
    }
}
