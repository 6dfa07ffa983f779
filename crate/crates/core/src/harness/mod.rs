//! Monte Carlo experiments: strong errors against a nested fine-mesh
//! reference, least-squares order fits, CPU scaling of EM against fast EM,
//! and an empirical Hölder-regularity probe of the reference solution.

mod bench;
mod convergence;
mod regularity;

pub use bench::{bench_cpu, BenchConfig, BenchReport, BenchRow};
pub use convergence::{run_convergence, run_convergence_for, ErrorReport, LevelError};
pub use regularity::{regularity_probe, RegularityConfig, RegularityReport, RegularityRow};

use crate::error::{invalid, Result};
use crate::problem::SveProblem;
use crate::schemes::SchemeKind;

/// Registered test problems.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    /// `f = -(1-α) sin(x/2)`, `g = cos(x/2)`, `x0 = 1`, `T = 1`.
    SineCosine,
    /// Scalar `f = a1 x + a0`, `g = b1 x + b0`.
    Affine {
        horizon: f64,
        x0: f64,
        a1: f64,
        a0: f64,
        b1: f64,
        b0: f64,
    },
}

impl Preset {
    pub fn build(&self, alpha: f64, beta: f64) -> Result<SveProblem> {
        match *self {
            Preset::SineCosine => SveProblem::sine_cosine(alpha, beta),
            Preset::Affine {
                horizon,
                x0,
                a1,
                a0,
                b1,
                b0,
            } => SveProblem::scalar_affine(alpha, beta, horizon, x0, a1, a0, b1, b0),
        }
    }

    /// Short identifier used on the command line and in CSV metadata.
    pub fn id(&self) -> &'static str {
        match self {
            Preset::SineCosine => "example41",
            Preset::Affine { .. } => "affine",
        }
    }
}

/// One convergence experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub scheme: SchemeKind,
    pub alpha: f64,
    pub beta: f64,
    /// Grading exponent of every mesh, reference included.
    pub r: f64,
    /// Step counts under test, strictly increasing, each dividing `n_ref`.
    pub levels: Vec<usize>,
    pub n_ref: usize,
    pub paths: usize,
    pub seed: u64,
    /// Expansion tolerance (fast EM only).
    pub eps: f64,
    /// Error moment `p ≥ 2`.
    pub p: f64,
    /// Milstein only: `Some(K)` evaluates the stochastic integrals on a path
    /// `K` times finer than each level instead of the closed form.
    pub milstein_inner: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Sine/cosine problem, levels `2^6..2^9`, reference `2^12`, 1000 paths.
    pub fn new(scheme: SchemeKind, alpha: f64, beta: f64, r: f64) -> Self {
        Self {
            preset: Preset::SineCosine,
            scheme,
            alpha,
            beta,
            r,
            levels: pow2_levels(6, 9),
            n_ref: 1 << 12,
            paths: 1000,
            seed: 0,
            eps: 1e-6,
            p: 2.0,
            milstein_inner: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(invalid("at least one level is required"));
        }
        if self.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("levels must be strictly increasing"));
        }
        if self.n_ref == 0 {
            return Err(invalid("reference step count must be positive"));
        }
        if let Some(&bad) = self
            .levels
            .iter()
            .find(|&&n| n == 0 || !self.n_ref.is_multiple_of(n))
        {
            return Err(invalid(format!(
                "level {bad} does not divide the reference step count {}",
                self.n_ref
            )));
        }
        if self.paths == 0 {
            return Err(invalid("paths must be at least 1"));
        }
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(invalid(format!(
                "grading exponent must be >= 1, got {}",
                self.r
            )));
        }
        if !(self.p >= 2.0 && self.p.is_finite()) {
            return Err(invalid(format!(
                "error moment must be >= 2, got {}",
                self.p
            )));
        }
        if self.scheme == SchemeKind::FastEm && !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(invalid(format!("eps must lie in (0,1), got {}", self.eps)));
        }
        match (self.scheme, self.milstein_inner) {
            (SchemeKind::Milstein, None) if self.beta != 0.0 => {
                return Err(invalid(
                    "closed-form Milstein requires beta = 0; request subsampling instead",
                ))
            }
            (SchemeKind::Milstein, Some(k)) => {
                if let Some(&bad) = self.levels.iter().find(|&&n| {
                    k == 0
                        || n.checked_mul(k)
                            .is_none_or(|nk| !self.n_ref.is_multiple_of(nk))
                }) {
                    return Err(invalid(format!(
                        "level {bad} refined {k} times does not divide the reference step count {}",
                        self.n_ref
                    )));
                }
            }
            (_, Some(_)) => return Err(invalid("inner subsampling applies to Milstein only")),
            _ => {}
        }
        if self.threads == Some(0) {
            return Err(invalid("thread count must be positive"));
        }
        Ok(())
    }
}

/// `2^lo, 2^{lo+1}, ..., 2^hi`.
pub fn pow2_levels(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

/// Convergence orders predicted by the error analysis, with the symbols
/// that enter them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryOrders {
    /// `ρ = min{1-α, 1/2-β}`, Hölder exponent near the origin.
    pub rho: f64,
    /// `σ = min{3/2-α-β, 1}`.
    pub sigma: f64,
    /// Smallest grading exponent giving the optimal uniform EM order.
    pub r_em: f64,
    /// Smallest grading exponent giving the optimal uniform Milstein order.
    pub r_milstein: f64,
    /// Predicted order at the terminal time.
    pub order_end: f64,
    /// Predicted order of the maximum over mesh nodes.
    pub order_max: f64,
}

impl TheoryOrders {
    pub fn new(scheme: SchemeKind, alpha: f64, beta: f64, r: f64) -> Self {
        let rho = (1.0 - alpha).min(0.5 - beta);
        let sigma = (1.5 - alpha - beta).min(1.0);
        let r_em = ((0.5 - beta) / (1.0 - alpha + rho)).max(1.0);
        let r_milstein = (sigma / (0.5 - alpha + beta + sigma)).max(1.0);
        let (order_end, order_max) = match scheme {
            SchemeKind::Em | SchemeKind::FastEm => {
                let end = 0.5 - beta;
                (end, end.min(r * (1.0 - alpha + rho)))
            }
            SchemeKind::Milstein => {
                let end = (1.5 - alpha - beta).min(1.0 - 2.0 * beta);
                let excess = 0.5 - alpha + beta + sigma - sigma / r;
                (end, end + r * excess.min(0.0))
            }
        };
        Self {
            rho,
            sigma,
            r_em,
            r_milstein,
            order_end,
            order_max,
        }
    }
}

/// Negated least-squares slope of `ln(error)` against `ln(N)`.
pub fn fit_order(levels: &[usize], errors: &[f64]) -> Result<f64> {
    if levels.len() != errors.len() {
        return Err(invalid("levels and errors differ in length"));
    }
    if levels.len() < 2 {
        return Err(invalid("an order fit needs at least two levels"));
    }
    if let Some(bad) = errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(invalid(format!(
            "errors must be positive and finite, got {bad}"
        )));
    }
    if levels.contains(&0) {
        return Err(invalid("levels must be positive"));
    }
    let xs: Vec<f64> = levels.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    Ok(-least_squares_slope(&xs, &ys)?)
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("abscissae are all equal"));
    }
    Ok(sxy / sxx)
}

/// Run `work` on a dedicated pool of `threads` workers, or on the global
/// pool when `None`.
pub(crate) fn with_pool<T: Send>(
    threads: Option<usize>,
    work: impl FnOnce() -> T + Send,
) -> Result<T> {
    match threads {
        None => Ok(work()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
    }
}

/// Mean of `|D|^p` samples turned into an `L^p` norm, with the delta-method
/// standard error from the sample variance.
pub(crate) fn lp_norm_with_se(sum: f64, sum_sq: f64, count: usize, p: f64) -> (f64, f64) {
    let c = count as f64;
    let mean = sum / c;
    let norm = mean.powf(1.0 / p);
    if count < 2 || mean == 0.0 {
        return (norm, 0.0);
    }
    let var = ((sum_sq / c - mean * mean) * c / (c - 1.0)).max(0.0);
    let se_mean = (var / c).sqrt();
    (norm, norm / (p * mean) * se_mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_of_halving_errors() {
        let levels = pow2_levels(3, 7);
        let errs: Vec<f64> = levels.iter().map(|&n| 3.0 / n as f64).collect();
        assert!((fit_order(&levels, &errs).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(fit_order(&levels, &[0.5; 5]).unwrap(), 0.0);
    }

    #[test]
    fn order_of_published_maximum_errors() {
        let errs = [6.6831e-2, 5.7599e-2, 5.0155e-2, 4.3819e-2];
        let q = fit_order(&pow2_levels(7, 10), &errs).unwrap();
        assert!((q - 0.2027).abs() < 5e-4, "{q}");
    }

    #[test]
    fn order_fit_rejects_bad_input() {
        assert!(fit_order(&[8, 16], &[0.1, 0.0]).is_err());
        assert!(fit_order(&[8, 16], &[0.1, -1.0]).is_err());
        assert!(fit_order(&[8], &[0.1]).is_err());
        assert!(fit_order(&[8, 16], &[0.1]).is_err());
    }

    #[test]
    fn theoretical_orders() {
        let em = TheoryOrders::new(SchemeKind::Em, 0.9, 0.1, 1.0);
        assert!((em.order_end - 0.4).abs() < 1e-12 && (em.order_max - 0.2).abs() < 1e-12);
        assert!((em.r_em - 2.0).abs() < 1e-12);
        let em2 = TheoryOrders::new(SchemeKind::Em, 0.9, 0.1, 2.0);
        assert!((em2.order_max - 0.4).abs() < 1e-12);
        let mil = TheoryOrders::new(SchemeKind::Milstein, 0.9, 0.0, 1.0);
        assert!((mil.order_end - 0.6).abs() < 1e-12 && (mil.order_max - 0.2).abs() < 1e-12);
        assert!((mil.sigma - 0.6).abs() < 1e-12 && (mil.r_milstein - 3.0).abs() < 1e-12);
        let mil3 = TheoryOrders::new(SchemeKind::Milstein, 0.9, 0.0, 3.0);
        assert!((mil3.order_max - 0.6).abs() < 1e-12);
        let mil_half = TheoryOrders::new(SchemeKind::Milstein, 0.5, 0.0, 1.0);
        assert!(
            (mil_half.order_end - 1.0).abs() < 1e-12 && (mil_half.order_max - 1.0).abs() < 1e-12
        );
    }

    #[test]
    fn config_validation() {
        let base = ExperimentConfig::new(SchemeKind::Em, 0.9, 0.1, 1.0);
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.levels = vec![64, 32];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.levels = vec![48, 64];
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.paths = 0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.scheme = SchemeKind::Milstein;
        assert!(c.validate().is_err());
        c.milstein_inner = Some(4);
        assert!(c.validate().is_ok());
        c.milstein_inner = Some(16);
        assert!(c.validate().is_err());
        let mut c = base;
        c.p = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lp_norm_of_constant_samples() {
        let (norm, se) = lp_norm_with_se(4.0 * 10.0, 16.0 * 10.0, 10, 2.0);
        assert!((norm - 2.0).abs() < 1e-15);
        assert_eq!(se, 0.0);
    }
}
