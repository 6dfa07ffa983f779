//! Graded time meshes `t_n = T (n/N)^r` and the exact panel weights of the
//! singular kernels used by every scheme.

use crate::error::{invalid, Result, SveError};

/// Time grid on `[0, T]` clustered towards the origin when `r > 1`.
///
/// Nodes are evaluated independently from `n / N`, so a mesh with `N` steps
/// and one with `N * M` steps (same `T`, `r`) share bit-identical nodes at
/// every `M`-th fine index. Steps are differences of stored nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedMesh {
    horizon: f64,
    steps_count: usize,
    grading: f64,
    points: Vec<f64>,
    steps: Vec<f64>,
}

impl GradedMesh {
    pub fn new(horizon: f64, n: usize, r: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(invalid(format!("horizon must be positive, got {horizon}")));
        }
        if n == 0 {
            return Err(invalid("step count must be at least 1"));
        }
        if !(r >= 1.0 && r.is_finite()) {
            return Err(invalid(format!("grading exponent must be >= 1, got {r}")));
        }
        let nf = n as f64;
        let points: Vec<f64> = (0..=n)
            .map(|k| {
                // k/N is correctly rounded, hence identical for (k, N) and (kM, NM).
                let q = k as f64 / nf;
                if r == 1.0 {
                    horizon * q
                } else {
                    horizon * q.powf(r)
                }
            })
            .collect();
        let steps = points.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self {
            horizon,
            steps_count: n,
            grading: r,
            points,
            steps,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`.
    pub fn len(&self) -> usize {
        self.steps_count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Nodes `t_0 ..= t_N`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Steps `h_1 ..= h_N`; `steps()[n - 1] == h_n`.
    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn t(&self, n: usize) -> f64 {
        self.points[n]
    }

    /// `h_n = t_n - t_{n-1}` for `1 <= n <= N`.
    pub fn h(&self, n: usize) -> f64 {
        self.steps[n - 1]
    }

    /// Whether `self` is nested inside `fine`: same horizon and grading, and
    /// `fine.len()` a multiple of `self.len()`.
    pub fn nests_in(&self, fine: &GradedMesh) -> bool {
        self.horizon == fine.horizon
            && self.grading == fine.grading
            && fine.steps_count.is_multiple_of(self.steps_count)
    }

    fn check_pair(&self, n: usize, i: usize) -> Result<()> {
        if i < n && n <= self.steps_count {
            Ok(())
        } else {
            Err(SveError::IndexOutOfRange(format!(
                "need 0 <= i < n <= {}, got n={n}, i={i}",
                self.steps_count
            )))
        }
    }

    /// `∫_{t_i}^{t_{i+1}} (t_n - s)^{-α} ds`.
    pub fn drift_weight(&self, n: usize, i: usize, alpha: f64) -> Result<f64> {
        self.check_pair(n, i)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(self.drift_weight_unchecked(n, i, alpha))
    }

    /// `(t_n - t_i)^{-β}`.
    pub fn diffusion_coeff(&self, n: usize, i: usize, beta: f64) -> Result<f64> {
        self.check_pair(n, i)?;
        Ok(self.diffusion_coeff_unchecked(n, i, beta))
    }

    #[inline]
    pub(crate) fn drift_weight_unchecked(&self, n: usize, i: usize, alpha: f64) -> f64 {
        let tn = self.points[n];
        let far = tn - self.points[i];
        let width = self.steps[i];
        power_panel(far, width, 1.0 - alpha)
    }

    #[inline]
    pub(crate) fn diffusion_coeff_unchecked(&self, n: usize, i: usize, beta: f64) -> f64 {
        if beta == 0.0 {
            1.0
        } else {
            (self.points[n] - self.points[i]).powf(-beta)
        }
    }
}

/// `(a^p - (a - w)^p) / p` for `0 < w <= a`, `p in (0, 1)`.
///
/// Written as `a^p (1 - (1 - w/a)^p) / p` with `expm1`/`ln_1p`, which stays
/// accurate when `w << a` (far panels), where the plain difference cancels.
#[inline]
fn power_panel(a: f64, w: f64, p: f64) -> f64 {
    let ratio = w / a;
    if ratio >= 1.0 {
        return a.powf(p) / p;
    }
    if ratio < 1e-8 {
        // Midpoint expansion: p ξ^{p-1} w / p with ξ the panel midpoint.
        return (a - 0.5 * w).powf(p - 1.0) * w;
    }
    -a.powf(p) * (p * (-ratio).ln_1p()).exp_m1() / p
}

/// `∫_{t_a}^{t_b} e^{-τ (t_n - s)} ds`, the exponential-kernel panel weight.
pub fn exp_drift_weight(tau: f64, tn: f64, ta: f64, tb: f64) -> Result<f64> {
    if !(ta < tb) {
        return Err(invalid(format!("need t_a < t_b, got {ta} >= {tb}")));
    }
    if tb > tn {
        return Err(invalid(format!("need t_b <= t_n, got {tb} > {tn}")));
    }
    if !(tau >= 0.0) {
        return Err(invalid(format!("decay rate must be >= 0, got {tau}")));
    }
    Ok(exp_panel(tau, tn - tb, tb - ta))
}

/// `e^{-τ lag} (1 - e^{-τ width}) / τ`, with the `τ = 0` limit `width`.
#[inline]
pub(crate) fn exp_panel(tau: f64, lag: f64, width: f64) -> f64 {
    let near = (-tau * lag).exp();
    let x = tau * width;
    if x <= 1e-8 {
        width * near
    } else {
        -near * (-x).exp_m1() / tau
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn figure_mesh_nodes() {
        let m = GradedMesh::new(10.0, 10, 2.0).unwrap();
        assert!(rel(m.t(1), 0.1) < 1e-15);
        assert!(rel(m.t(5), 2.5) < 1e-15);
        assert_eq!(m.t(10), 10.0);
        assert_eq!(m.t(0), 0.0);
    }

    #[test]
    fn uniform_mesh_has_equal_steps() {
        let m = GradedMesh::new(10.0, 10, 1.0).unwrap();
        for &h in m.steps() {
            assert!((h - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn step_bound_example() {
        let m = GradedMesh::new(1.0, 4, 2.0).unwrap();
        assert!(rel(m.h(2), 3.0 / 16.0) < 1e-15);
        assert!(1.0 / 8.0 <= m.h(2) && m.h(2) <= 0.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(GradedMesh::new(0.0, 4, 1.0).is_err());
        assert!(GradedMesh::new(-1.0, 4, 1.0).is_err());
        assert!(GradedMesh::new(1.0, 0, 1.0).is_err());
        assert!(GradedMesh::new(1.0, 4, 0.9).is_err());
    }

    #[test]
    fn nested_nodes_are_bit_identical() {
        for &r in &[1.0, 1.5, 2.0, 3.0, 3.7] {
            let coarse = GradedMesh::new(1.3, 48, r).unwrap();
            let fine = GradedMesh::new(1.3, 48 * 16, r).unwrap();
            for j in 0..=48 {
                assert_eq!(coarse.t(j).to_bits(), fine.t(16 * j).to_bits());
            }
        }
    }

    #[test]
    fn first_step_weight() {
        let m = GradedMesh::new(1.0, 1, 1.0).unwrap();
        assert!(rel(m.drift_weight(1, 0, 0.5).unwrap(), 2.0) < 1e-15);
    }

    #[test]
    fn drift_weight_errors() {
        let m = GradedMesh::new(1.0, 4, 1.0).unwrap();
        assert!(matches!(
            m.drift_weight(2, 2, 0.5),
            Err(SveError::IndexOutOfRange(_))
        ));
        assert!(matches!(
            m.drift_weight(5, 0, 0.5),
            Err(SveError::IndexOutOfRange(_))
        ));
        assert!(matches!(
            m.drift_weight(2, 0, 1.0),
            Err(SveError::InvalidParameter(_))
        ));
        assert!(matches!(
            m.drift_weight(2, 0, 0.0),
            Err(SveError::InvalidParameter(_))
        ));
        assert!(m.diffusion_coeff(1, 1, 0.1).is_err());
    }

    #[test]
    fn diffusion_coeff_cases() {
        let m = GradedMesh::new(1.0, 4, 1.0).unwrap();
        for n in 1..=4 {
            for i in 0..n {
                assert_eq!(m.diffusion_coeff(n, i, 0.0).unwrap(), 1.0);
            }
            assert!(rel(m.diffusion_coeff(n, n - 1, 0.3).unwrap(), m.h(n).powf(-0.3)) < 1e-15);
        }
        assert!(rel(m.diffusion_coeff(4, 0, 0.1).unwrap(), 1.0) < 1e-15);
    }

    #[test]
    fn exp_weight_limits() {
        assert_eq!(exp_drift_weight(0.0, 1.0, 0.2, 0.5).unwrap(), 0.5 - 0.2);
        assert!(exp_drift_weight(1e6, 1.0, 0.0, 0.5).unwrap() < 1e-300);
        let expected = ((-1.0f64).exp() - (-2.0f64).exp()) / 2.0;
        assert!(rel(exp_drift_weight(2.0, 1.0, 0.0, 0.5).unwrap(), expected) < 1e-14);
        assert!(exp_drift_weight(1.0, 1.0, 0.5, 0.5).is_err());
        assert!(exp_drift_weight(1.0, 1.0, 0.5, 1.5).is_err());
    }

    #[test]
    fn exp_weight_taylor_branch_is_continuous() {
        let width = 1e-9;
        let tau = 5.0;
        let a = exp_panel(tau, 0.3, width);
        let b = exp_panel(tau, 0.3, width * 1.0000001);
        assert!(rel(a, (-tau * 0.3f64).exp() * width) < 1e-8);
        assert!(rel(a, b) < 1e-6);
    }

    #[test]
    fn drift_weight_far_panel_matches_midpoint() {
        // Far-away tiny panel: exact value ≈ w ξ^{-α}.
        let m = GradedMesh::new(1.0, 1 << 16, 1.0).unwrap();
        let n = 1 << 16;
        let w = m.drift_weight(n, 0, 0.9).unwrap();
        let h = m.h(1);
        let xi = 1.0 - 0.5 * h;
        assert!(rel(w, h * xi.powf(-0.9)) < 1e-9);
    }
}
