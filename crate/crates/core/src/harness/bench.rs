use std::io::Write;
use std::time::Instant;

use super::{least_squares_slope, Preset};
use crate::error::{invalid, Result};
use crate::mesh::GradedMesh;
use crate::noise::sample_path;
use crate::schemes::{em_solve, fast_em_solve_with, FastEmPlan};
use crate::soe::build_soe;

/// Single-path timing of EM against fast EM.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub preset: Preset,
    pub alpha: f64,
    pub beta: f64,
    pub r: f64,
    pub levels: Vec<usize>,
    pub eps: f64,
    /// Timed repetitions per level (at least 5); the median is reported.
    pub reps: usize,
    pub seed: u64,
}

impl BenchConfig {
    /// Sine/cosine problem, `N = 2^7..2^11`, `ε = 1e-6`, 5 repetitions.
    pub fn new(alpha: f64, beta: f64, r: f64) -> Self {
        Self {
            preset: Preset::SineCosine,
            alpha,
            beta,
            r,
            levels: super::pow2_levels(7, 11),
            eps: 1e-6,
            reps: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    /// Median seconds of one EM solve, weight tables included.
    pub em_seconds: f64,
    /// Median seconds of one fast EM solve, per-mesh decay tables included.
    pub fast_em_seconds: f64,
    /// Seconds to build the two expansions for this mesh (not part of
    /// `fast_em_seconds`; they depend only on `δ`, `T` and `ε`).
    pub soe_seconds: f64,
    /// Number of exponentials `(K_α, K_β)`.
    pub terms: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Log-log slope of time against `N`.
    pub em_slope: f64,
    pub fast_em_slope: f64,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "N,em_s,fast_em_s,soe_s,k_alpha,k_beta")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{},{}",
                r.n, r.em_seconds, r.fast_em_seconds, r.soe_seconds, r.terms.0, r.terms.1
            )?;
        }
        writeln!(out, "# em_slope={:.4}", self.em_slope)?;
        writeln!(out, "# fast_em_slope={:.4}", self.fast_em_slope)?;
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Time one solve of each scheme per level on the calling thread, after a
/// discarded warm-up run.
pub fn bench_cpu(config: &BenchConfig) -> Result<BenchReport> {
    if config.reps < 5 {
        return Err(invalid("at least 5 timed repetitions are required"));
    }
    if config.levels.len() < 2 || config.levels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("need at least two strictly increasing levels"));
    }
    let problem = config.preset.build(config.alpha, config.beta)?;
    let mut rows = Vec::with_capacity(config.levels.len());
    for &n in &config.levels {
        let mesh = GradedMesh::new(problem.horizon(), n, config.r)?;
        let path = sample_path(&mesh, problem.noise_dim(), config.seed)?;
        let incs = path.increments();

        let start = Instant::now();
        let delta = mesh.h(1);
        let soe_a = build_soe(config.alpha, delta, mesh.horizon(), config.eps)?;
        let soe_b = if config.beta == 0.0 {
            None
        } else {
            Some(build_soe(config.beta, delta, mesh.horizon(), config.eps)?)
        };
        let soe_seconds = start.elapsed().as_secs_f64();

        let time_em = || -> Result<f64> {
            let start = Instant::now();
            std::hint::black_box(em_solve(&problem, &mesh, incs)?);
            Ok(start.elapsed().as_secs_f64())
        };
        let time_fast = || -> Result<(f64, (usize, usize))> {
            let start = Instant::now();
            let plan = FastEmPlan::from_soe(
                &mesh,
                config.alpha,
                config.beta,
                soe_a.clone(),
                soe_b.clone(),
            )?;
            std::hint::black_box(fast_em_solve_with(&plan, &problem, incs)?);
            Ok((start.elapsed().as_secs_f64(), plan.term_counts()))
        };
        time_em()?;
        let (_, terms) = time_fast()?;
        let mut em = Vec::with_capacity(config.reps);
        let mut fast = Vec::with_capacity(config.reps);
        for _ in 0..config.reps {
            em.push(time_em()?);
            fast.push(time_fast()?.0);
        }
        rows.push(BenchRow {
            n,
            em_seconds: median(em),
            fast_em_seconds: median(fast),
            soe_seconds,
            terms,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let slope = |f: fn(&BenchRow) -> f64| {
        let ys: Vec<f64> = rows.iter().map(|r| f(r).max(1e-12).ln()).collect();
        least_squares_slope(&xs, &ys)
    };
    Ok(BenchReport {
        em_slope: slope(|r| r.em_seconds)?,
        fast_em_slope: slope(|r| r.fast_em_seconds)?,
        rows,
    })
}
