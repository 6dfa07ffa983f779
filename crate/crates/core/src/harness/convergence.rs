use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use super::{fit_order, lp_norm_with_se, with_pool, ExperimentConfig, TheoryOrders};
use crate::error::{invalid, Result, SveError};
use crate::mesh::GradedMesh;
use crate::noise::{path_seed, sample_path, BrownianPath};
use crate::problem::SveProblem;
use crate::schemes::em::{em_states, EmWeights};
use crate::schemes::fast_em::{fast_em_states, FastEmPlan};
use crate::schemes::milstein::{exact_states, subsampled_states};
use crate::schemes::SchemeKind;

/// Paths evaluated per parallel batch before their results are folded in.
const BATCH: usize = 256;

/// Errors at one step count.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelError {
    pub n: usize,
    /// `‖x_ref(T) - Z_N‖_{L^p}`.
    pub err_end: f64,
    /// `max_n ‖x_ref(t_n) - Z_n‖_{L^p}`.
    pub err_max: f64,
    /// Monte Carlo standard errors of the two entries above.
    pub se_end: f64,
    pub se_max: f64,
    /// Solve time for this level summed over paths.
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub config: ExperimentConfig,
    pub levels: Vec<LevelError>,
    /// `None` with fewer than two levels or a zero error.
    pub order_end: Option<f64>,
    pub order_max: Option<f64>,
    pub paths_used: usize,
    pub failed_paths: usize,
    pub theory: TheoryOrders,
}

impl ErrorReport {
    /// Refit both orders from the table.
    pub fn refit(&self) -> (Option<f64>, Option<f64>) {
        let ns: Vec<usize> = self.levels.iter().map(|l| l.n).collect();
        let end: Vec<f64> = self.levels.iter().map(|l| l.err_end).collect();
        let max: Vec<f64> = self.levels.iter().map(|l| l.err_max).collect();
        (fit_order(&ns, &end).ok(), fit_order(&ns, &max).ok())
    }

    /// One row per level under the header
    /// `scheme,alpha,beta,r,N,err_end,err_max,paths,seed,wall_s`, then
    /// `# key=value` footer lines (fitted orders first).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        writeln!(
            out,
            "scheme,alpha,beta,r,N,err_end,err_max,paths,seed,wall_s"
        )?;
        for l in &self.levels {
            writeln!(
                out,
                "{},{},{},{},{},{:e},{:e},{},{},{:.6}",
                c.scheme,
                c.alpha,
                c.beta,
                c.r,
                l.n,
                l.err_end,
                l.err_max,
                self.paths_used,
                c.seed,
                l.wall_s
            )?;
        }
        let fmt = |o: Option<f64>| o.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        writeln!(out, "# order_end={}", fmt(self.order_end))?;
        writeln!(out, "# order_max={}", fmt(self.order_max))?;
        writeln!(out, "# theory_order_end={:.6}", self.theory.order_end)?;
        writeln!(out, "# theory_order_max={:.6}", self.theory.order_max)?;
        writeln!(out, "# preset={}", c.preset.id())?;
        writeln!(out, "# n_ref={}", c.n_ref)?;
        writeln!(out, "# p={}", c.p)?;
        if c.scheme == SchemeKind::FastEm {
            writeln!(out, "# eps={:e}", c.eps)?;
        }
        if let Some(k) = c.milstein_inner {
            writeln!(out, "# milstein_inner={k}")?;
        }
        writeln!(out, "# failed_paths={}", self.failed_paths)?;
        let se = |f: fn(&LevelError) -> f64| {
            self.levels
                .iter()
                .map(|l| format!("{:e}", f(l)))
                .collect::<Vec<_>>()
                .join(";")
        };
        writeln!(out, "# se_end={}", se(|l| l.se_end))?;
        writeln!(out, "# se_max={}", se(|l| l.se_max))?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// How one step count is solved.
enum Engine {
    Em(EmWeights),
    Fast(FastEmPlan),
    MilsteinExact(EmWeights),
    MilsteinSubsampled { weights: EmWeights, inner: usize },
}

impl Engine {
    fn for_level(config: &ExperimentConfig, mesh: &GradedMesh) -> Result<Self> {
        let (alpha, beta) = (config.alpha, config.beta);
        Ok(match (config.scheme, config.milstein_inner) {
            (SchemeKind::Em, _) => Engine::Em(EmWeights::new(mesh, alpha, beta)?),
            (SchemeKind::FastEm, _) => {
                Engine::Fast(FastEmPlan::new(mesh, alpha, beta, config.eps)?)
            }
            (SchemeKind::Milstein, None) => {
                Engine::MilsteinExact(EmWeights::new(mesh, alpha, 0.0)?)
            }
            (SchemeKind::Milstein, Some(inner)) => Engine::MilsteinSubsampled {
                weights: EmWeights::new(mesh, alpha, 0.0)?,
                inner,
            },
        })
    }

    /// Same family at the reference resolution. The closed-form Milstein
    /// scheme needs `β = 0` and scalar noise; otherwise EM is the reference.
    fn reference(
        config: &ExperimentConfig,
        problem: &SveProblem,
        mesh: &GradedMesh,
    ) -> Result<Self> {
        let (alpha, beta) = (config.alpha, config.beta);
        let milstein_closed_form = beta == 0.0 && problem.noise_dim() == 1;
        Ok(match config.scheme {
            SchemeKind::Milstein if milstein_closed_form => {
                Engine::MilsteinExact(EmWeights::new(mesh, alpha, 0.0)?)
            }
            _ => Engine::Em(EmWeights::new(mesh, alpha, beta)?),
        })
    }

    fn states(&self, problem: &SveProblem, path: &BrownianPath, n: usize) -> Result<Vec<f64>> {
        let incs = if n == path.mesh().len() {
            path.increments().clone()
        } else {
            path.coarsen(n)?
        };
        match self {
            Engine::Em(w) => em_states(w, problem, &incs, n),
            Engine::Fast(plan) => fast_em_states(plan, problem, &incs),
            Engine::MilsteinExact(w) => exact_states(w, problem, &incs, n),
            Engine::MilsteinSubsampled { weights, inner } => {
                let fine = path.coarsened(n * inner)?;
                subsampled_states(weights, problem, &incs, &fine)
            }
        }
    }
}

struct PathOutcome {
    /// `|x_ref(t_n) - Z_n|^p` for every level and `n = 1..=N`, concatenated.
    powers: Vec<f64>,
    seconds: Vec<f64>,
}

/// Monte Carlo strong errors of `config.scheme` on the preset problem.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ErrorReport> {
    let problem = config.preset.build(config.alpha, config.beta)?;
    run_convergence_for(&problem, config)
}

/// [`run_convergence`] on a caller-supplied problem; its exponents must
/// match the configuration.
///
/// Every path samples Brownian increments on the reference mesh, solves the
/// reference there, and solves each level on block sums of the same
/// increments, so all levels see the same noise at coinciding nodes.
/// Paths whose states become non-finite are excluded up to 0.1% of the
/// total; beyond that the run aborts.
pub fn run_convergence_for(problem: &SveProblem, config: &ExperimentConfig) -> Result<ErrorReport> {
    config.validate()?;
    if problem.alpha() != config.alpha || problem.beta() != config.beta {
        return Err(invalid("problem exponents differ from the configuration"));
    }
    if config.scheme == SchemeKind::Milstein && !problem.coefficients().has_diffusion_jacobian() {
        return Err(invalid("Milstein needs the diffusion Jacobian g'"));
    }
    if config.scheme == SchemeKind::Milstein
        && config.milstein_inner.is_none()
        && problem.noise_dim() != 1
    {
        return Err(invalid(
            "closed-form Milstein needs scalar noise; request subsampling instead",
        ));
    }
    let horizon = problem.horizon();
    let ref_mesh = GradedMesh::new(horizon, config.n_ref, config.r)?;
    let reference = Engine::reference(config, problem, &ref_mesh)?;
    let engines = config
        .levels
        .iter()
        .map(|&n| Engine::for_level(config, &GradedMesh::new(horizon, n, config.r)?))
        .collect::<Result<Vec<_>>>()?;
    let offsets: Vec<usize> = config
        .levels
        .iter()
        .scan(0, |acc, &n| {
            let start = *acc;
            *acc += n;
            Some(start)
        })
        .collect();
    let total_nodes: usize = config.levels.iter().sum();
    let d = problem.state_dim();
    let m = problem.noise_dim();
    let p = config.p;

    let one_path = |index: usize| -> Result<PathOutcome> {
        let path = sample_path(&ref_mesh, m, path_seed(config.seed, index as u64))?;
        let x_ref = reference.states(problem, &path, config.n_ref)?;
        let mut powers = Vec::with_capacity(total_nodes);
        let mut seconds = Vec::with_capacity(engines.len());
        for (engine, &n) in engines.iter().zip(&config.levels) {
            let start = Instant::now();
            let z = engine.states(problem, &path, n)?;
            seconds.push(start.elapsed().as_secs_f64());
            let stride = config.n_ref / n;
            for k in 1..=n {
                let a = &x_ref[k * stride * d..(k * stride + 1) * d];
                let b = &z[k * d..(k + 1) * d];
                let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                powers.push(if p == 2.0 { sq } else { sq.sqrt().powf(p) });
            }
        }
        Ok(PathOutcome { powers, seconds })
    };

    let mut sum = vec![0.0; total_nodes];
    let mut sum_sq = vec![0.0; total_nodes];
    let mut seconds = vec![0.0; config.levels.len()];
    let mut failed = 0usize;
    with_pool(config.threads, || -> Result<()> {
        let mut start = 0;
        while start < config.paths {
            let end = (start + BATCH).min(config.paths);
            let batch: Vec<Result<PathOutcome>> =
                (start..end).into_par_iter().map(one_path).collect();
            // Fold in path-index order so the sums do not depend on scheduling.
            for (offset, outcome) in batch.into_iter().enumerate() {
                match outcome {
                    Ok(o) => {
                        for (i, v) in o.powers.iter().enumerate() {
                            sum[i] += v;
                            sum_sq[i] += v * v;
                        }
                        for (s, t) in seconds.iter_mut().zip(&o.seconds) {
                            *s += t;
                        }
                    }
                    Err(SveError::NonFinite { step }) => {
                        failed += 1;
                        log::warn!("path {} diverged at step {step}", start + offset);
                    }
                    Err(e) => return Err(e),
                }
            }
            start = end;
        }
        Ok(())
    })??;

    if failed > 0 && (failed as f64 > 1e-3 * config.paths as f64 || failed == config.paths) {
        return Err(SveError::NumericalFailure {
            failed,
            total: config.paths,
        });
    }
    if failed > 0 {
        log::warn!(
            "excluded {failed} of {} paths with non-finite states",
            config.paths
        );
    }
    let used = config.paths - failed;

    let levels: Vec<LevelError> = config
        .levels
        .iter()
        .zip(&offsets)
        .zip(&seconds)
        .map(|((&n, &off), &wall_s)| {
            let (err_end, se_end) = lp_norm_with_se(sum[off + n - 1], sum_sq[off + n - 1], used, p);
            let (mut err_max, mut se_max) = (0.0, 0.0);
            for k in 0..n {
                let (e, s) = lp_norm_with_se(sum[off + k], sum_sq[off + k], used, p);
                if e > err_max {
                    err_max = e;
                    se_max = s;
                }
            }
            // The terminal node is one of the maximised nodes.
            let err_max = err_max.max(err_end);
            LevelError {
                n,
                err_end,
                err_max,
                se_end,
                se_max,
                wall_s,
            }
        })
        .collect();

    let mut report = ErrorReport {
        config: config.clone(),
        levels,
        order_end: None,
        order_max: None,
        paths_used: used,
        failed_paths: failed,
        theory: TheoryOrders::new(config.scheme, config.alpha, config.beta, config.r),
    };
    (report.order_end, report.order_max) = report.refit();
    Ok(report)
}
